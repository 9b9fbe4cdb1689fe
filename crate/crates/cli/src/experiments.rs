//! Experiment drivers: closed-loop PD comparison runs, trajectory
//! optimization runs, and the parameter sweep.

use nalgebra::Vector3;
use serde::Serialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

use geo_ctrl_core::ilqr::{self, Trajectory};
use geo_ctrl_core::pd::{self, PdFeedback};
use geo_ctrl_core::rigid_body::{step_euler, REPROJECT_INTERVAL};
use geo_ctrl_core::so3::error_angle;

use crate::records::{ConvergenceRecord, TimeSeriesRecord};
use crate::scenario::{rotation_to_quat, IlqrScenario, PdScenario};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("solver error: {0}")]
    Solver(#[from] ilqr::IlqrError),
    #[error("output error at {path}: {source}")]
    Output {
        path: String,
        source: std::io::Error,
    },
}

/// Continuity-canonicalized quaternion: same hemisphere as the previous
/// sample so plotted traces stay smooth across the double cover.
fn continuous_quat(rotation: &geo_ctrl_core::Rotation, previous: Option<[f64; 4]>) -> [f64; 4] {
    let mut q = rotation_to_quat(rotation);
    if let Some(p) = previous {
        let dot: f64 = q.iter().zip(p.iter()).map(|(a, b)| a * b).sum();
        if dot < 0.0 {
            for x in q.iter_mut() {
                *x = -*x;
            }
        }
    }
    q
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PdVariantSummary {
    /// First time the error angle drops below 0.1 rad.
    pub time_to_0_1_rad: Option<f64>,
    /// First time the error angle drops below 1e-3 rad.
    pub time_to_1e_3_rad: Option<f64>,
    pub final_error_angle_rad: f64,
    pub final_velocity_error_rad_per_s: f64,
    /// Set when the integrator produced a non-finite state and the
    /// record stream was truncated.
    pub diverged_at_step: Option<usize>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PdSummary {
    pub log: PdVariantSummary,
    pub trace: PdVariantSummary,
}

#[derive(Debug, Clone)]
pub struct PdOutcome {
    pub log: Vec<TimeSeriesRecord>,
    pub trace: Vec<TimeSeriesRecord>,
    pub summary: PdSummary,
}

impl PdOutcome {
    pub fn failed(&self) -> bool {
        self.summary.log.diverged_at_step.is_some() || self.summary.trace.diverged_at_step.is_some()
    }
}

fn run_pd_variant(
    scenario: &PdScenario,
    feedback: PdFeedback,
) -> (Vec<TimeSeriesRecord>, PdVariantSummary) {
    let reference = pd::sinusoid_reference(
        &scenario.sinusoid,
        scenario.reference_start,
        scenario.dt,
        scenario.t_f,
    );
    let mut records = Vec::with_capacity(reference.len());
    let mut state = scenario.initial;
    let mut previous_quat = None;
    let mut diverged_at_step = None;

    for (k, refpoint) in reference.iter().enumerate() {
        let torque = pd::pd_control(
            &state,
            refpoint,
            &scenario.gains,
            &scenario.inertia,
            feedback,
        );
        let finite =
            torque.iter().all(|x| x.is_finite()) && state.omega.iter().all(|x| x.is_finite());
        if !finite {
            // partial output plus a failure marker in the summary
            diverged_at_step = Some(k);
            break;
        }
        let quat = continuous_quat(&state.rotation, previous_quat);
        previous_quat = Some(quat);
        records.push(TimeSeriesRecord {
            t: k as f64 * scenario.dt,
            quat,
            omega: state.omega.into(),
            torque: torque.into(),
            error_angle: error_angle(&refpoint.rotation, &state.rotation),
            velocity_error_norm: pd::velocity_error(&state, refpoint).norm(),
        });
        if k + 1 < reference.len() {
            state = step_euler(&state, &torque, &scenario.inertia, scenario.dt);
            if (k + 1) % REPROJECT_INTERVAL == 0 {
                state.rotation = state.rotation.orthonormalize();
            }
        }
    }

    let first_below = |threshold: f64| {
        records
            .iter()
            .find(|r| r.error_angle < threshold)
            .map(|r| r.t)
    };
    let summary = PdVariantSummary {
        time_to_0_1_rad: first_below(0.1),
        time_to_1e_3_rad: first_below(1e-3),
        final_error_angle_rad: records.last().map(|r| r.error_angle).unwrap_or(f64::NAN),
        final_velocity_error_rad_per_s: records
            .last()
            .map(|r| r.velocity_error_norm)
            .unwrap_or(f64::NAN),
        diverged_at_step,
    };
    (records, summary)
}

/// Runs the closed loop once per feedback law from identical initial
/// conditions and reports both streams.
pub fn run_pd(scenario: &PdScenario) -> PdOutcome {
    let (log, log_summary) = run_pd_variant(scenario, PdFeedback::Log);
    let (trace, trace_summary) = run_pd_variant(scenario, PdFeedback::Trace);
    PdOutcome {
        log,
        trace,
        summary: PdSummary {
            log: log_summary,
            trace: trace_summary,
        },
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IlqrSummary {
    pub converged: bool,
    pub iterations: usize,
    pub final_total_cost: f64,
    pub final_error_angle_rad: f64,
    pub final_velocity_error_rad_per_s: f64,
    pub branch_cut_hits: usize,
}

#[derive(Debug, Clone)]
pub struct IlqrOutcome {
    pub trajectory: Vec<TimeSeriesRecord>,
    pub convergence: Vec<ConvergenceRecord>,
    pub summary: IlqrSummary,
}

/// Runs the optimizer and renders the final trajectory and the
/// per-iteration convergence stream.
pub fn run_ilqr(scenario: &IlqrScenario) -> Result<IlqrOutcome, ExperimentError> {
    let knots = geo_ctrl_core::rigid_body::step_count(scenario.dt, scenario.t_f);
    let init = Trajectory::hold(
        &scenario.initial,
        scenario.initial_control,
        &scenario.inertia,
        scenario.dt,
        knots,
    )?;
    let opts = ilqr::SolverOptions {
        max_iters: scenario.max_iters,
        tol: scenario.tol,
        cost_model: scenario.cost_model,
        line_search: scenario.line_search,
        discretization: scenario.discretization,
    };
    let solution = ilqr::ilqr_solve(
        init,
        &scenario.goal,
        &scenario.weights,
        &scenario.inertia,
        &opts,
    )?;

    let mut trajectory = Vec::with_capacity(solution.trajectory.states.len());
    let mut previous_quat = None;
    for (k, state) in solution.trajectory.states.iter().enumerate() {
        let torque = solution
            .trajectory
            .controls
            .get(k)
            .copied()
            .unwrap_or_else(Vector3::zeros);
        let quat = continuous_quat(&state.rotation, previous_quat);
        previous_quat = Some(quat);
        trajectory.push(TimeSeriesRecord {
            t: k as f64 * scenario.dt,
            quat,
            omega: state.omega.into(),
            torque: torque.into(),
            error_angle: error_angle(&scenario.goal.rotation, &state.rotation),
            velocity_error_norm: (state.omega - scenario.goal.omega).norm(),
        });
    }

    let report = &solution.report;
    let convergence = (0..report.costs.len())
        .map(|i| ConvergenceRecord {
            iteration: i,
            total_cost: report.costs[i],
            control_change: if i == 0 {
                0.0
            } else {
                report.control_change[i - 1]
            },
            distance_to_final: report.distance_to_final[i],
        })
        .collect();

    let last = trajectory.last().expect("trajectory is nonempty");
    Ok(IlqrOutcome {
        summary: IlqrSummary {
            converged: report.converged,
            iterations: report.iterations,
            final_total_cost: *report.costs.last().unwrap(),
            final_error_angle_rad: last.error_angle,
            final_velocity_error_rad_per_s: last.velocity_error_norm,
            branch_cut_hits: report.branch_cut_hits,
        },
        trajectory,
        convergence,
    })
}

/// Applies `value` at the dot-separated `param` path of a JSON config.
/// The path must lead to a number.
pub fn set_config_param(
    config: &mut serde_json::Value,
    param: &str,
    value: f64,
) -> Result<(), String> {
    let mut cursor = config;
    for key in param.split('.') {
        cursor = match cursor {
            serde_json::Value::Object(map) => map
                .get_mut(key)
                .ok_or_else(|| format!("no field `{key}` along `{param}`"))?,
            serde_json::Value::Array(items) => {
                let index: usize = key
                    .parse()
                    .map_err(|_| format!("`{key}` is not an array index in `{param}`"))?;
                items
                    .get_mut(index)
                    .ok_or_else(|| format!("index {index} out of bounds in `{param}`"))?
            }
            _ => return Err(format!("`{param}` does not reach into a scalar")),
        };
    }
    if !cursor.is_number() {
        return Err(format!("`{param}` is not a numeric field"));
    }
    *cursor = serde_json::json!(value);
    Ok(())
}

/// File-name helper: `<out_dir>/<stem><suffix>`.
pub fn output_path(out_dir: &Path, stem: &str, suffix: &str) -> PathBuf {
    out_dir.join(format!("{stem}{suffix}"))
}
