//! Scenario configuration: the JSON schema, validation into core types,
//! and the normalized echo written into every output sidecar.
//!
//! Stage weights `q` and `s` in the config are running-cost densities;
//! validation folds the sampling interval in (`q dt`, `s dt`) so the
//! discrete stage cost approximates the integral. The terminal weight
//! `v` applies as given.

use nalgebra::{Matrix3, Matrix6, Quaternion, Rotation3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

use geo_ctrl_core::ilqr::{CostModel, CostWeights, Discretization, Goal};
use geo_ctrl_core::pd::{PdGains, SinusoidSpec};
use geo_ctrl_core::rigid_body::{BodyState, Inertia};
use geo_ctrl_core::so3::Rotation;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("missing field `{0}` for this experiment kind")]
    Missing(&'static str),
}

fn invalid(field: &'static str, reason: impl ToString) -> ScenarioError {
    ScenarioError::Invalid {
        field,
        reason: reason.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Pd,
    Ilqr,
}

/// Rotation encodings accepted in configs. Quaternions are scalar-first
/// `[w, x, y, z]` and may be off unit norm by up to 1e-3 (they are
/// renormalized); matrices are row-major and must satisfy the group
/// invariants as given.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationSpec {
    Quat([f64; 4]),
    Matrix([f64; 9]),
    AxisAngle { axis: [f64; 3], angle: f64 },
}

impl RotationSpec {
    pub fn build(&self, field: &'static str) -> Result<Rotation, ScenarioError> {
        match self {
            RotationSpec::Quat(q) => quat_to_rotation(q).map_err(|e| invalid(field, e)),
            RotationSpec::Matrix(m) => {
                let mat = Matrix3::from_row_slice(m);
                Rotation::from_matrix(mat).map_err(|e| invalid(field, e))
            }
            RotationSpec::AxisAngle { axis, angle } => {
                let axis = Vector3::from_column_slice(axis);
                let norm = axis.norm();
                if !(norm.is_finite() && norm > 1e-12) {
                    return Err(invalid(field, "axis must have nonzero finite norm"));
                }
                if !angle.is_finite() {
                    return Err(invalid(field, "angle must be finite"));
                }
                Ok(Rotation::exp(&(axis / norm * *angle)))
            }
        }
    }
}

/// Scalar-first quaternion to rotation; tolerates up to 1e-3 norm error.
pub fn quat_to_rotation(q: &[f64; 4]) -> Result<Rotation, String> {
    let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-3 {
        return Err(format!("quaternion norm {norm} is not within 1e-3 of 1"));
    }
    let unit = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]));
    Rotation::from_matrix(*unit.to_rotation_matrix().matrix()).map_err(|e| e.to_string())
}

/// Rotation to scalar-first quaternion with nonnegative scalar part.
pub fn rotation_to_quat(r: &Rotation) -> [f64; 4] {
    let unit = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r.matrix()));
    let q = unit.quaternion();
    if q.w < 0.0 {
        [-q.w, -q.i, -q.j, -q.k]
    } else {
        [q.w, q.i, q.j, q.k]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixSpec3 {
    Diag([f64; 3]),
    Matrix([f64; 9]),
}

impl MatrixSpec3 {
    pub fn build(&self) -> Matrix3<f64> {
        match self {
            MatrixSpec3::Diag(d) => Matrix3::from_diagonal(&Vector3::from_column_slice(d)),
            MatrixSpec3::Matrix(m) => Matrix3::from_row_slice(m),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixSpec6 {
    Diag([f64; 6]),
    Matrix(Vec<f64>),
}

impl MatrixSpec6 {
    pub fn build(&self, field: &'static str) -> Result<Matrix6<f64>, ScenarioError> {
        match self {
            MatrixSpec6::Diag(d) => Ok(Matrix6::from_diagonal(&Vector6::from_column_slice(d))),
            MatrixSpec6::Matrix(m) => {
                if m.len() != 36 {
                    return Err(invalid(
                        field,
                        format!("expected 36 entries, got {}", m.len()),
                    ));
                }
                Ok(Matrix6::from_row_slice(m))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateSpec {
    pub rotation: RotationSpec,
    pub omega: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    /// Attitude the reference starts from (default: identity).
    pub rotation0: Option<RotationSpec>,
    pub amplitude: [f64; 3],
    pub frequency: [f64; 3],
    pub phase: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSpec {
    pub kp: MatrixSpec3,
    pub kd: MatrixSpec3,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalSpec {
    pub rotation: RotationSpec,
    #[serde(default)]
    pub omega: [f64; 3],
    #[serde(default)]
    pub torque: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSpec {
    pub v_psi: MatrixSpec3,
    pub v_omega: MatrixSpec3,
    /// Stage state weight density (6x6); default zero.
    pub q: Option<MatrixSpec6>,
    pub s: MatrixSpec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalCostSpec {
    Log,
    Trace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscretizationSpec {
    Exact,
    Euler,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub terminal_cost: Option<TerminalCostSpec>,
    pub line_search: Option<bool>,
    pub discretization: Option<DiscretizationSpec>,
}

/// The on-disk scenario schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub inertia: MatrixSpec3,
    pub dt: f64,
    pub t_f: f64,
    pub initial: InitialStateSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gains: Option<GainsSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub goal: Option<GoalSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightsSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_control: Option<[f64; 3]>,
    /// Output stem; CSV and sidecar names derive from it.
    pub output: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notes: Option<Vec<String>>,
}

/// A PD tracking experiment, fully validated.
#[derive(Debug, Clone)]
pub struct PdScenario {
    pub inertia: Inertia,
    pub dt: f64,
    pub t_f: f64,
    pub initial: BodyState,
    pub reference_start: Rotation,
    pub sinusoid: SinusoidSpec,
    pub gains: PdGains,
}

/// A trajectory-optimization experiment, fully validated.
#[derive(Debug, Clone)]
pub struct IlqrScenario {
    pub inertia: Inertia,
    pub dt: f64,
    pub t_f: f64,
    pub initial: BodyState,
    pub initial_control: Vector3<f64>,
    pub goal: Goal,
    pub weights: CostWeights,
    pub max_iters: usize,
    pub tol: f64,
    pub cost_model: CostModel,
    pub line_search: bool,
    pub discretization: Discretization,
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)] // built once per run at config load
pub enum Validated {
    Pd(PdScenario),
    Ilqr(IlqrScenario),
}

/// The scenario with defaults materialized, ready to run, plus the
/// normalized config echoed into the sidecar.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub validated: Validated,
    pub echo: ScenarioConfig,
    pub output_stem: String,
    pub seed: u64,
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let config: ScenarioConfig = serde_json::from_str(&text)?;
    let fallback_stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string());
    validate(config, &fallback_stem)
}

pub fn validate(
    config: ScenarioConfig,
    fallback_stem: &str,
) -> Result<LoadedScenario, ScenarioError> {
    if config.schema_version != SCHEMA_VERSION {
        return Err(ScenarioError::SchemaVersion(config.schema_version));
    }
    if !(config.dt.is_finite() && config.dt > 0.0) {
        return Err(invalid("dt", "must be a positive finite number"));
    }
    if !(config.t_f.is_finite() && config.t_f >= config.dt) {
        return Err(invalid("t_f", "must be finite and at least dt"));
    }
    let inertia =
        Inertia::from_matrix(config.inertia.build()).map_err(|e| invalid("inertia", e))?;
    let initial_rotation = config.initial.rotation.build("initial.rotation")?;
    let omega = Vector3::from_column_slice(&config.initial.omega);
    if !omega.iter().all(|x| x.is_finite()) {
        return Err(invalid("initial.omega", "entries must be finite"));
    }
    let initial = BodyState::new(initial_rotation, omega);

    let output_stem = config
        .output
        .clone()
        .unwrap_or_else(|| fallback_stem.to_string());

    let validated = match config.kind {
        ExperimentKind::Pd => {
            let reference = config
                .reference
                .as_ref()
                .ok_or(ScenarioError::Missing("reference"))?;
            let gains_spec = config
                .gains
                .as_ref()
                .ok_or(ScenarioError::Missing("gains"))?;
            let gains = PdGains::new(gains_spec.kp.build(), gains_spec.kd.build())
                .map_err(|e| invalid("gains", e))?;
            let reference_start = match &reference.rotation0 {
                Some(spec) => spec.build("reference.rotation0")?,
                None => Rotation::identity(),
            };
            let sinusoid = SinusoidSpec {
                amplitude: Vector3::from_column_slice(&reference.amplitude),
                frequency: Vector3::from_column_slice(&reference.frequency),
                phase: Vector3::from_column_slice(&reference.phase),
            };
            for (field, v) in [
                ("reference.amplitude", &sinusoid.amplitude),
                ("reference.frequency", &sinusoid.frequency),
                ("reference.phase", &sinusoid.phase),
            ] {
                if !v.iter().all(|x| x.is_finite()) {
                    return Err(invalid(field, "entries must be finite"));
                }
            }
            Validated::Pd(PdScenario {
                inertia,
                dt: config.dt,
                t_f: config.t_f,
                initial,
                reference_start,
                sinusoid,
                gains,
            })
        }
        ExperimentKind::Ilqr => {
            let goal_spec = config.goal.as_ref().ok_or(ScenarioError::Missing("goal"))?;
            let weights_spec = config
                .weights
                .as_ref()
                .ok_or(ScenarioError::Missing("weights"))?;
            let goal = Goal {
                rotation: goal_spec.rotation.build("goal.rotation")?,
                omega: Vector3::from_column_slice(&goal_spec.omega),
                torque: Vector3::from_column_slice(&goal_spec.torque),
            };
            // fold dt into the stage densities; terminal weight as given
            let mut v = Matrix6::zeros();
            v.fixed_view_mut::<3, 3>(0, 0)
                .copy_from(&weights_spec.v_psi.build());
            v.fixed_view_mut::<3, 3>(3, 3)
                .copy_from(&weights_spec.v_omega.build());
            let q_density = match &weights_spec.q {
                Some(spec) => spec.build("weights.q")?,
                None => Matrix6::zeros(),
            };
            let weights =
                CostWeights::new(q_density * config.dt, weights_spec.s.build() * config.dt, v)
                    .map_err(|e| invalid("weights", e))?;
            let solver = config.solver.clone().unwrap_or_default();
            Validated::Ilqr(IlqrScenario {
                inertia,
                dt: config.dt,
                t_f: config.t_f,
                initial,
                initial_control: Vector3::from_column_slice(
                    &config.initial_control.unwrap_or([0.0; 3]),
                ),
                goal,
                weights,
                max_iters: solver.max_iters.unwrap_or(100),
                tol: solver.tol.unwrap_or(1e-6),
                cost_model: match solver.terminal_cost.unwrap_or(TerminalCostSpec::Log) {
                    TerminalCostSpec::Log => CostModel::Log,
                    TerminalCostSpec::Trace => CostModel::Trace,
                },
                line_search: solver.line_search.unwrap_or(false),
                discretization: match solver.discretization.unwrap_or(DiscretizationSpec::Exact) {
                    DiscretizationSpec::Exact => Discretization::ExactZoh,
                    DiscretizationSpec::Euler => Discretization::Euler,
                },
            })
        }
    };

    let echo = echo_config(&config, &validated, &output_stem);
    Ok(LoadedScenario {
        validated,
        echo,
        output_stem,
        seed: config.seed,
    })
}

/// Normalizes the parsed config: every default is materialized so the
/// sidecar alone reproduces the run.
fn echo_config(config: &ScenarioConfig, validated: &Validated, stem: &str) -> ScenarioConfig {
    let mut echo = config.clone();
    echo.output = Some(stem.to_string());
    match validated {
        Validated::Pd(_) => {
            if let Some(reference) = echo.reference.as_mut() {
                if reference.rotation0.is_none() {
                    reference.rotation0 = Some(RotationSpec::Quat([1.0, 0.0, 0.0, 0.0]));
                }
            }
        }
        Validated::Ilqr(scenario) => {
            echo.initial_control = Some(scenario.initial_control.into());
            if let Some(goal) = echo.goal.as_mut() {
                // goal omega/torque already defaulted by serde
                let _ = goal;
            }
            if echo
                .weights
                .as_ref()
                .map(|w| w.q.is_none())
                .unwrap_or(false)
            {
                if let Some(w) = echo.weights.as_mut() {
                    w.q = Some(MatrixSpec6::Diag([0.0; 6]));
                }
            }
            echo.solver = Some(SolverSpec {
                max_iters: Some(scenario.max_iters),
                tol: Some(scenario.tol),
                terminal_cost: Some(match scenario.cost_model {
                    CostModel::Log => TerminalCostSpec::Log,
                    CostModel::Trace => TerminalCostSpec::Trace,
                }),
                line_search: Some(scenario.line_search),
                discretization: Some(match scenario.discretization {
                    Discretization::ExactZoh => DiscretizationSpec::Exact,
                    Discretization::Euler => DiscretizationSpec::Euler,
                }),
            });
        }
    }
    echo
}

/// Template configs emitted by `init`; they parse and run as-is.
pub fn template(kind: ExperimentKind) -> ScenarioConfig {
    let pi = std::f64::consts::PI;
    match kind {
        ExperimentKind::Pd => ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            kind: ExperimentKind::Pd,
            inertia: MatrixSpec3::Diag([1.0, 3.0, 5.0]),
            dt: 1e-3,
            t_f: 10.0,
            initial: InitialStateSpec {
                rotation: RotationSpec::AxisAngle {
                    axis: [1.0, 1.0, 1.0],
                    angle: 0.999 * pi,
                },
                omega: [0.0; 3],
            },
            reference: Some(ReferenceSpec {
                rotation0: Some(RotationSpec::Quat([1.0, 0.0, 0.0, 0.0])),
                amplitude: [1.0, 1.0, 1.0],
                frequency: [0.2, 0.3, 0.1],
                phase: [0.1, pi / 5.0, 2f64.sqrt() / 3.0],
            }),
            gains: Some(GainsSpec {
                kp: MatrixSpec3::Diag([1000.0; 3]),
                kd: MatrixSpec3::Diag([100.0; 3]),
            }),
            goal: None,
            weights: None,
            solver: None,
            initial_control: None,
            output: Some("pd_run".to_string()),
            seed: 0,
            notes: Some(vec![
                "kind pd: closed-loop attitude tracking with log and trace feedback".into(),
                "initial.rotation: quat [w,x,y,z] | matrix [9 row-major] | axis_angle".into(),
                "reference: per-axis rate amplitude_i*sin(frequency_i*t + phase_i) (rad/s)".into(),
                "gains kp, kd: diag [3] or matrix [9]; eigenvalues must have positive real part"
                    .into(),
            ]),
        },
        ExperimentKind::Ilqr => ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            kind: ExperimentKind::Ilqr,
            inertia: MatrixSpec3::Diag([5.0, 10.0, 15.0]),
            dt: 0.01,
            t_f: 3.0,
            initial: InitialStateSpec {
                rotation: RotationSpec::Quat([1.0, 0.0, 0.0, 0.0]),
                omega: [0.0; 3],
            },
            reference: None,
            gains: None,
            goal: Some(GoalSpec {
                rotation: RotationSpec::AxisAngle {
                    axis: [1.0, 0.0, 0.0],
                    angle: 0.5 * pi,
                },
                omega: [0.0; 3],
                torque: [0.0; 3],
            }),
            weights: Some(WeightsSpec {
                v_psi: MatrixSpec3::Diag([1000.0; 3]),
                v_omega: MatrixSpec3::Diag([1000.0; 3]),
                q: Some(MatrixSpec6::Diag([0.0; 6])),
                s: MatrixSpec3::Diag([0.01; 3]),
            }),
            solver: Some(SolverSpec {
                max_iters: Some(100),
                tol: Some(1e-6),
                terminal_cost: Some(TerminalCostSpec::Log),
                line_search: Some(true),
                discretization: Some(DiscretizationSpec::Exact),
            }),
            initial_control: Some([0.0; 3]),
            output: Some("ilqr_run".to_string()),
            seed: 0,
            notes: Some(vec![
                "kind ilqr: trajectory optimization from the initial state to the goal".into(),
                "weights q and s are running-cost densities; the solver uses q*dt and s*dt".into(),
                "terminal_cost: log (quadratic in the log error) | trace".into(),
                "line_search: backtracking halving of the feedforward on cost increase".into(),
            ]),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn quaternion_roundtrip() {
        let r = Rotation::exp(&Vector3::new(0.4, -1.1, 2.0));
        let q = rotation_to_quat(&r);
        let back = quat_to_rotation(&q).unwrap();
        assert!((back.matrix() - r.matrix()).norm() <= 1e-12);
        assert!(q[0] >= 0.0);
    }

    #[test]
    fn quaternion_norm_gate() {
        assert!(quat_to_rotation(&[1.0, 0.0, 0.0, 0.01]).is_ok());
        assert!(quat_to_rotation(&[1.0, 0.0, 0.0, 0.1]).is_err());
    }

    #[test]
    fn templates_validate() {
        for kind in [ExperimentKind::Pd, ExperimentKind::Ilqr] {
            let config = template(kind);
            let text = serde_json::to_string_pretty(&config).unwrap();
            let parsed: ScenarioConfig = serde_json::from_str(&text).unwrap();
            validate(parsed, "template").unwrap();
        }
    }

    #[test]
    fn missing_sections_are_named() {
        let mut config = template(ExperimentKind::Pd);
        config.gains = None;
        let err = validate(config, "x").unwrap_err();
        assert!(err.to_string().contains("gains"), "{err}");

        // missing required top-level field surfaces its name via serde
        let err = serde_json::from_str::<ScenarioConfig>(r#"{"schema_version":1,"kind":"pd"}"#)
            .unwrap_err();
        assert!(err.to_string().contains("inertia"), "{err}");
    }

    #[test]
    fn axis_angle_builds_expected_rotation() {
        let spec = RotationSpec::AxisAngle {
            axis: [2.0, 2.0, 2.0],
            angle: 0.999 * PI,
        };
        let r = spec.build("initial.rotation").unwrap();
        assert_relative_eq!(r.angle(), 0.999 * PI, epsilon = 1e-12);
        assert_relative_eq!(
            r.log().normalize(),
            Vector3::new(1.0, 1.0, 1.0).normalize(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn stage_weights_are_scaled_by_dt() {
        let config = template(ExperimentKind::Ilqr);
        let loaded = validate(config, "x").unwrap();
        let Validated::Ilqr(scenario) = loaded.validated else {
            panic!("wrong kind")
        };
        assert_relative_eq!(scenario.weights.s()[(0, 0)], 0.01 * 0.01, epsilon = 1e-15);
        assert_relative_eq!(scenario.weights.v()[(0, 0)], 1000.0, epsilon = 1e-15);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut value: serde_json::Value =
            serde_json::to_value(template(ExperimentKind::Pd)).unwrap();
        value["typo_field"] = serde_json::json!(1);
        let err = serde_json::from_value::<ScenarioConfig>(value).unwrap_err();
        assert!(err.to_string().contains("typo_field"), "{err}");
    }
}
