//! Attitude PD tracking on SO(3).
//!
//! Two proportional terms are provided behind one interface: feedback on
//! the logarithm of the configuration error (magnitude `|Kp psi|` all the
//! way to the branch cut) and the classical trace-gradient feedback whose
//! magnitude scales with `sin |psi|` and vanishes as the error approaches
//! `pi`. The module also carries the first-order kinematic feedback law
//! and the Lyapunov-equation certificate backing its exponential
//! stability.

use nalgebra::{Matrix3, SMatrix, Vector3};
use thiserror::Error;

use crate::linalg::kron3;
use crate::rigid_body::{BodyState, Inertia, RigidBodyError, REPROJECT_INTERVAL};
use crate::so3::{group_error, Rotation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdError {
    #[error("{which} gain has an eigenvalue with real part {real_part:.3e} <= 0")]
    GainNotPositive { which: &'static str, real_part: f64 },
    #[error("gain is not Hurwitz-stabilizing (eigenvalue real part {real_part:.3e} <= 0)")]
    NotStabilizing { real_part: f64 },
    #[error("matrix {which} is not symmetric positive definite")]
    NotPositiveDefinite { which: &'static str },
    #[error("certificate residual {residual:.3e} exceeds 1e-8")]
    ResidualTooLarge { residual: f64 },
}

/// Selects the proportional term of [`pd_control`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdFeedback {
    /// Feedback on `log(Psi)`.
    Log,
    /// Feedback on the trace-error gradient `vee((Psi - Psi^T)/2)`.
    Trace,
}

fn min_real_eigenvalue(m: &Matrix3<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|e| e.re)
        .fold(f64::INFINITY, f64::min)
}

/// Proportional and derivative gains; every eigenvalue of each matrix
/// must have positive real part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdGains {
    kp: Matrix3<f64>,
    kd: Matrix3<f64>,
}

impl PdGains {
    pub fn new(kp: Matrix3<f64>, kd: Matrix3<f64>) -> Result<Self, PdError> {
        for (which, m) in [("kp", &kp), ("kd", &kd)] {
            let real_part = min_real_eigenvalue(m);
            if real_part <= 0.0 {
                return Err(PdError::GainNotPositive { which, real_part });
            }
        }
        Ok(PdGains { kp, kd })
    }

    pub fn from_diagonals(kp: Vector3<f64>, kd: Vector3<f64>) -> Result<Self, PdError> {
        Self::new(Matrix3::from_diagonal(&kp), Matrix3::from_diagonal(&kd))
    }

    pub fn kp(&self) -> &Matrix3<f64> {
        &self.kp
    }

    pub fn kd(&self) -> &Matrix3<f64> {
        &self.kd
    }
}

/// One sample of the reference trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePoint {
    pub rotation: Rotation,
    pub omega: Vector3<f64>,
    pub omega_dot: Vector3<f64>,
}

/// Per-axis sinusoidal angular-velocity profile
/// `w_i(t) = amplitude_i * sin(frequency_i * t + phase_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidSpec {
    pub amplitude: Vector3<f64>,
    pub frequency: Vector3<f64>,
    pub phase: Vector3<f64>,
}

impl SinusoidSpec {
    pub fn omega(&self, t: f64) -> Vector3<f64> {
        self.amplitude
            .zip_map(&(self.frequency * t + self.phase), |a, arg| a * arg.sin())
    }

    pub fn omega_dot(&self, t: f64) -> Vector3<f64> {
        let scaled = self.amplitude.component_mul(&self.frequency);
        scaled.zip_map(&(self.frequency * t + self.phase), |af, arg| af * arg.cos())
    }
}

/// Samples the reference at spacing `dt` over `[0, t_f]`; the angular
/// velocity and its derivative are analytic, the attitude is integrated
/// by geometric Euler from `r0`.
pub fn sinusoid_reference(
    spec: &SinusoidSpec,
    r0: Rotation,
    dt: f64,
    t_f: f64,
) -> Vec<ReferencePoint> {
    assert!(dt > 0.0);
    let n = crate::rigid_body::step_count(dt, t_f);
    let mut out = Vec::with_capacity(n + 1);
    let mut rotation = r0;
    for k in 0..=n {
        let t = k as f64 * dt;
        let omega = spec.omega(t);
        out.push(ReferencePoint {
            rotation,
            omega,
            omega_dot: spec.omega_dot(t),
        });
        if k < n {
            rotation = rotation * Rotation::exp(&(omega * dt));
        }
    }
    out
}

/// Angular velocity error `w - R^T R_d w_d` (the reference rate carried
/// into the body frame through the inverse configuration error).
pub fn velocity_error(state: &BodyState, reference: &ReferencePoint) -> Vector3<f64> {
    state.omega - state.rotation.between(&reference.rotation).matrix() * reference.omega
}

/// Log-error proportional term `-Kp log(Psi)`.
pub fn proportional_log(error: &Rotation, kp: &Matrix3<f64>) -> Vector3<f64> {
    -(kp * error.log())
}

/// Trace-gradient proportional term `-Kp vee((Psi - Psi^T)/2)`, equal to
/// `-Kp sin(|psi|)/|psi| psi` (asserted as a property in tests).
pub fn proportional_trace(error: &Rotation, kp: &Matrix3<f64>) -> Vector3<f64> {
    let m = error.matrix();
    let grad = 0.5
        * Vector3::new(
            m[(2, 1)] - m[(1, 2)],
            m[(0, 2)] - m[(2, 0)],
            m[(1, 0)] - m[(0, 1)],
        );
    -(kp * grad)
}

/// Feedforward torque `w x Jw - J(w^ R^T R_d w_d - R^T R_d wdot_d)`.
/// Under exact tracking it reproduces the reference acceleration, so the
/// error stays at zero without any feedback.
pub fn feedforward(
    state: &BodyState,
    reference: &ReferencePoint,
    inertia: &Inertia,
) -> Vector3<f64> {
    let carry = state.rotation.between(&reference.rotation);
    let omega_d_body = carry.matrix() * reference.omega;
    let omega_dot_d_body = carry.matrix() * reference.omega_dot;
    state.omega.cross(&(inertia.matrix() * state.omega))
        - inertia.matrix() * (state.omega.cross(&omega_d_body) - omega_dot_d_body)
}

/// Full control torque: selected proportional term, derivative term
/// `-Kd (w - R^T R_d w_d)`, and feedforward.
pub fn pd_control(
    state: &BodyState,
    reference: &ReferencePoint,
    gains: &PdGains,
    inertia: &Inertia,
    feedback: PdFeedback,
) -> Vector3<f64> {
    let error = group_error(&reference.rotation, &state.rotation);
    let proportional = match feedback {
        PdFeedback::Log => proportional_log(&error, gains.kp()),
        PdFeedback::Trace => proportional_trace(&error, gains.kp()),
    };
    proportional - gains.kd() * velocity_error(state, reference)
        + feedforward(state, reference, inertia)
}

/// First-order (velocity-level) feedback `-K log(Psi) + Ad_{Psi^-1} xi_d`.
pub fn kinematic_feedback(
    error: &Rotation,
    gain: &Matrix3<f64>,
    xi_d: &Vector3<f64>,
) -> Vector3<f64> {
    -(gain * error.log()) + error.matrix().tr_mul(xi_d)
}

/// Integrates the regulation closed loop `Psi' = Psi (-K psi)^` by
/// geometric Euler and returns the sampled log errors.
pub fn kinematic_regulation(
    psi0: &Vector3<f64>,
    gain: &Matrix3<f64>,
    dt: f64,
    t_f: f64,
) -> Vec<Vector3<f64>> {
    assert!(dt > 0.0);
    let n = crate::rigid_body::step_count(dt, t_f);
    let mut out = Vec::with_capacity(n + 1);
    let mut error = Rotation::exp(psi0);
    for k in 0..=n {
        let psi = error.log();
        out.push(psi);
        if k < n {
            let xi = kinematic_feedback(&error, gain, &Vector3::zeros());
            error = error * Rotation::exp(&(xi * dt));
        }
    }
    out
}

/// One knot of a closed-loop tracking run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingStep {
    pub state: BodyState,
    pub torque: Vector3<f64>,
}

/// Runs the second-order closed loop against a sampled reference, one
/// control update per integration step (zero-order hold).
pub fn simulate_tracking(
    initial: &BodyState,
    reference: &[ReferencePoint],
    gains: &PdGains,
    inertia: &Inertia,
    feedback: PdFeedback,
    dt: f64,
) -> Result<Vec<TrackingStep>, RigidBodyError> {
    assert!(dt > 0.0 && reference.len() >= 2);
    let mut out = Vec::with_capacity(reference.len());
    let mut state = *initial;
    for (k, refpoint) in reference.iter().enumerate() {
        let torque = pd_control(&state, refpoint, gains, inertia, feedback);
        if !torque.iter().all(|x| x.is_finite()) {
            return Err(RigidBodyError::NonFiniteControl {
                step: k,
                time: k as f64 * dt,
            });
        }
        out.push(TrackingStep { state, torque });
        if k + 1 < reference.len() {
            state = crate::rigid_body::step_euler(&state, &torque, inertia, dt);
            if (k + 1) % REPROJECT_INTERVAL == 0 {
                state.rotation = state.rotation.orthonormalize();
            }
        }
    }
    Ok(out)
}

/// A solved certificate for the kinematic feedback gain `K`:
/// `P(-K) + (-K)^T P + 2Q = 0` with `P` symmetric positive definite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovCertificate {
    pub p: Matrix3<f64>,
    pub q: Matrix3<f64>,
    pub k: Matrix3<f64>,
}

impl LyapunovCertificate {
    /// Frobenius norm of `P(-K) + (-K)^T P + 2Q`.
    pub fn residual(&self) -> f64 {
        (self.p * (-self.k) + (-self.k).transpose() * self.p + 2.0 * self.q).norm()
    }
}

/// Solves the Lyapunov equation for `P` through the vectorized 9x9
/// linear system `(I kron K^T + K^T kron I) vec(P) = vec(2Q)`.
pub fn solve_lyapunov(
    gain: &Matrix3<f64>,
    q: &Matrix3<f64>,
) -> Result<LyapunovCertificate, PdError> {
    let real_part = min_real_eigenvalue(gain);
    if real_part <= 0.0 {
        return Err(PdError::NotStabilizing { real_part });
    }
    if (q - q.transpose()).norm() > 1e-12 || q.symmetric_eigenvalues().min() <= 0.0 {
        return Err(PdError::NotPositiveDefinite { which: "q" });
    }

    // row-major vec: vec(P K) = (I kron K^T) vec(P), vec(K^T P) = (K^T kron I) vec(P)
    let identity = Matrix3::identity();
    let kt = gain.transpose();
    let system = kron3(&identity, &kt) + kron3(&kt, &identity);
    let mut rhs = SMatrix::<f64, 9, 1>::zeros();
    for i in 0..3 {
        for j in 0..3 {
            rhs[3 * i + j] = 2.0 * q[(i, j)];
        }
    }
    let sol = system
        .lu()
        .solve(&rhs)
        .expect("positive-real-part eigenvalues make the Lyapunov operator invertible");
    let mut p = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            p[(i, j)] = sol[3 * i + j];
        }
    }
    p = 0.5 * (p + p.transpose());

    let certificate = LyapunovCertificate { p, q: *q, k: *gain };
    let residual = certificate.residual();
    if residual > 1e-8 {
        return Err(PdError::ResidualTooLarge { residual });
    }
    if p.symmetric_eigenvalues().min() <= 0.0 {
        return Err(PdError::NotPositiveDefinite { which: "p" });
    }
    Ok(certificate)
}

/// Quadratic certificate value `0.5 psi^T P psi`.
pub fn lyapunov_value(psi: &Vector3<f64>, p: &Matrix3<f64>) -> f64 {
    0.5 * psi.dot(&(p * psi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rigid_body::angular_acceleration;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal, Uniform};
    use std::f64::consts::PI;

    fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
        loop {
            let x: f64 = StandardNormal.sample(rng);
            let y: f64 = StandardNormal.sample(rng);
            let z: f64 = StandardNormal.sample(rng);
            let v = Vector3::new(x, y, z);
            if v.norm() > 1e-6 {
                return v / v.norm();
            }
        }
    }

    fn table1_gains() -> PdGains {
        PdGains::from_diagonals(
            Vector3::new(1000.0, 1000.0, 1000.0),
            Vector3::new(100.0, 100.0, 100.0),
        )
        .unwrap()
    }

    fn table1_sinusoid() -> SinusoidSpec {
        SinusoidSpec {
            amplitude: Vector3::new(1.0, 1.0, 1.0),
            frequency: Vector3::new(0.2, 0.3, 0.1),
            phase: Vector3::new(0.1, PI / 5.0, 2f64.sqrt() / 3.0),
        }
    }

    fn table1_inertia() -> Inertia {
        Inertia::from_diagonal(Vector3::new(1.0, 3.0, 5.0)).unwrap()
    }

    #[test]
    fn gains_validation() {
        assert!(
            PdGains::from_diagonals(Vector3::new(1.0, 1.0, -0.1), Vector3::repeat(1.0)).is_err()
        );
        // non-symmetric gain with a complex pair of positive real part
        let kp = Matrix3::new(2.0, -3.0, 0.0, 3.0, 2.0, 0.0, 0.0, 0.0, 1.0);
        assert!(PdGains::new(kp, Matrix3::identity()).is_ok());
    }

    #[test]
    fn sinusoid_reference_values() {
        let spec = table1_sinusoid();
        let refs = sinusoid_reference(&spec, Rotation::identity(), 0.01, 1.0);
        assert_eq!(refs.len(), 101);
        let expect = Vector3::new(0.1f64.sin(), (PI / 5.0).sin(), (2f64.sqrt() / 3.0).sin());
        assert_relative_eq!(refs[0].omega, expect, epsilon = 1e-15);
        assert_relative_eq!(refs[0].omega_dot.x, 0.2 * 0.1f64.cos(), epsilon = 1e-15);

        let still = SinusoidSpec {
            amplitude: Vector3::zeros(),
            frequency: Vector3::new(1.0, 2.0, 3.0),
            phase: Vector3::zeros(),
        };
        let refs = sinusoid_reference(&still, Rotation::exp(&Vector3::x()), 0.1, 1.0);
        for r in &refs {
            assert_eq!(r.rotation.matrix(), Rotation::exp(&Vector3::x()).matrix());
            assert_eq!(r.omega, Vector3::zeros());
            assert_eq!(r.omega_dot, Vector3::zeros());
        }
    }

    #[test]
    fn velocity_error_cases() {
        let reference = ReferencePoint {
            rotation: Rotation::exp(&Vector3::new(0.3, 0.1, -0.2)),
            omega: Vector3::new(0.5, -0.2, 0.1),
            omega_dot: Vector3::zeros(),
        };
        let exact = BodyState::new(reference.rotation, reference.omega);
        assert_relative_eq!(
            velocity_error(&exact, &reference),
            Vector3::zeros(),
            epsilon = 1e-15
        );

        let rest_ref = ReferencePoint {
            rotation: reference.rotation,
            omega: Vector3::zeros(),
            omega_dot: Vector3::zeros(),
        };
        let moving = BodyState::new(Rotation::identity(), Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(
            velocity_error(&moving, &rest_ref),
            Vector3::new(1.0, 2.0, 3.0)
        );

        // quarter-turn offset about z carries (1,0,0) to (0,-1,0) under R^T R_d
        let r_d = Rotation::identity();
        let r = Rotation::exp(&Vector3::new(0.0, 0.0, PI / 2.0));
        let reference = ReferencePoint {
            rotation: r_d,
            omega: Vector3::x(),
            omega_dot: Vector3::zeros(),
        };
        let state = BodyState::new(r, Vector3::zeros());
        let carried = r.between(&r_d).matrix() * Vector3::x();
        assert_relative_eq!(carried, Vector3::new(0.0, -1.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(
            velocity_error(&state, &reference),
            Vector3::new(0.0, 1.0, 0.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn proportional_terms_at_identity() {
        let kp = Matrix3::from_diagonal(&Vector3::repeat(1000.0));
        assert_eq!(
            proportional_log(&Rotation::identity(), &kp),
            Vector3::zeros()
        );
        assert_eq!(
            proportional_trace(&Rotation::identity(), &kp),
            Vector3::zeros()
        );
    }

    #[test]
    fn log_term_grows_linearly_to_the_cut() {
        let kp = Matrix3::from_diagonal(&Vector3::repeat(1000.0));
        let error = Rotation::exp(&Vector3::new(0.999 * PI, 0.0, 0.0));
        let u = proportional_log(&error, &kp);
        assert_relative_eq!(u, Vector3::new(-999.0 * PI, 0.0, 0.0), epsilon = 1e-8);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dir = random_unit(&mut rng);
        for theta in [0.1, 1.0, 2.0, 3.0, PI - 1e-4] {
            let u = proportional_log(&Rotation::exp(&(dir * theta)), &kp);
            assert_relative_eq!(u.norm(), 1000.0 * theta, max_relative = 1e-9);
        }
    }

    #[test]
    fn trace_term_is_sinc_scaled_log_term() {
        let k = 250.0;
        let kp = Matrix3::from_diagonal(&Vector3::repeat(k));
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let angles = Uniform::new(1e-3f64, PI - 1e-3).unwrap();
        for _ in 0..200 {
            let theta = angles.sample(&mut rng);
            let error = Rotation::exp(&(random_unit(&mut rng) * theta));
            let ratio =
                proportional_trace(&error, &kp).norm() / proportional_log(&error, &kp).norm();
            assert_relative_eq!(ratio, theta.sin() / theta, max_relative = 1e-10);
        }
    }

    #[test]
    fn trace_gradient_vanishes_at_the_cut() {
        let kp = Matrix3::from_diagonal(&Vector3::repeat(1000.0));
        let dir = Vector3::new(1.0, 1.0, 1.0).normalize();
        let mut previous = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
            let error = Rotation::exp(&(dir * (PI - eps)));
            let trace_mag = proportional_trace(&error, &kp).norm();
            let log_mag = proportional_log(&error, &kp).norm();
            assert_relative_eq!(trace_mag, 1000.0 * (PI - eps).sin(), max_relative = 1e-6);
            assert_relative_eq!(log_mag, 1000.0 * (PI - eps), max_relative = 1e-9);
            assert!(trace_mag < previous);
            previous = trace_mag;
        }
    }

    #[test]
    fn trace_matches_log_for_small_errors() {
        let kp = Matrix3::from_diagonal(&Vector3::repeat(1000.0));
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let psi = random_unit(&mut rng) * 1e-3;
            let error = Rotation::exp(&psi);
            let a = proportional_log(&error, &kp);
            let b = proportional_trace(&error, &kp);
            assert!((a - b).norm() <= 1e-6 * a.norm());
        }
    }

    #[test]
    fn feedforward_zero_at_rest() {
        let reference = ReferencePoint {
            rotation: Rotation::identity(),
            omega: Vector3::zeros(),
            omega_dot: Vector3::zeros(),
        };
        assert_eq!(
            feedforward(&BodyState::at_rest(), &reference, &table1_inertia()),
            Vector3::zeros()
        );
    }

    #[test]
    fn feedforward_reproduces_reference_acceleration() {
        // at exact tracking, u = F_ff must give wdot = wdot_d exactly
        let inertia = table1_inertia();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..50 {
            let rotation = Rotation::exp(&(random_unit(&mut rng) * 2.0));
            let omega = random_unit(&mut rng) * 1.5;
            let omega_dot = random_unit(&mut rng) * 0.8;
            let reference = ReferencePoint {
                rotation,
                omega,
                omega_dot,
            };
            let state = BodyState::new(rotation, omega);
            let u = feedforward(&state, &reference, &inertia);
            let wdot = angular_acceleration(&omega, &u, &inertia);
            assert!((wdot - omega_dot).norm() <= 1e-12);
        }
    }

    #[test]
    fn pd_control_decomposition() {
        let inertia = table1_inertia();
        let gains = table1_gains();
        let reference = ReferencePoint {
            rotation: Rotation::exp(&Vector3::new(0.2, -0.6, 0.4)),
            omega: Vector3::new(0.3, 0.1, -0.2),
            omega_dot: Vector3::new(0.05, 0.0, 0.1),
        };
        // at exact tracking both variants reduce to the feedforward
        let exact = BodyState::new(reference.rotation, reference.omega);
        let ff = feedforward(&exact, &reference, &inertia);
        for fb in [PdFeedback::Log, PdFeedback::Trace] {
            assert_relative_eq!(
                pd_control(&exact, &reference, &gains, &inertia, fb),
                ff,
                epsilon = 1e-12
            );
        }
        // away from it, the variants differ exactly by the proportional terms
        let state = BodyState::new(
            reference.rotation * Rotation::exp(&Vector3::new(0.5, 0.2, -0.1)),
            Vector3::new(-0.4, 0.0, 0.3),
        );
        let error = group_error(&reference.rotation, &state.rotation);
        let diff = pd_control(&state, &reference, &gains, &inertia, PdFeedback::Log)
            - pd_control(&state, &reference, &gains, &inertia, PdFeedback::Trace);
        let expect = proportional_log(&error, gains.kp()) - proportional_trace(&error, gains.kp());
        assert_relative_eq!(diff, expect, epsilon = 1e-12);
    }

    #[test]
    fn table1_closed_loop_converges() {
        let inertia = table1_inertia();
        let gains = table1_gains();
        let dt = 1e-3;
        let reference = sinusoid_reference(&table1_sinusoid(), Rotation::identity(), dt, 3.0);
        let initial = BodyState::new(
            Rotation::exp(&(Vector3::new(1.0, 1.0, 1.0).normalize() * 0.999 * PI)),
            Vector3::zeros(),
        );
        let run =
            simulate_tracking(&initial, &reference, &gains, &inertia, PdFeedback::Log, dt).unwrap();
        let last = run.last().unwrap();
        let final_angle =
            crate::so3::error_angle(&reference.last().unwrap().rotation, &last.state.rotation);
        let final_vel = velocity_error(&last.state, reference.last().unwrap()).norm();
        assert!(final_angle <= 1e-3, "final error angle {final_angle:.3e}");
        assert!(final_vel <= 1e-3, "final velocity error {final_vel:.3e}");

        // error magnitude keeps shrinking once the transient has passed,
        // down to the integrator noise floor where it must then stay
        let angles: Vec<f64> = run
            .iter()
            .zip(&reference)
            .map(|(s, r)| crate::so3::error_angle(&r.rotation, &s.state.rotation))
            .collect();
        let floor = 1e-6;
        for k in (500..angles.len() - 100).step_by(100) {
            if angles[k] > floor {
                assert!(
                    angles[k + 100] <= angles[k] * (1.0 + 1e-6),
                    "error grew at step {k}: {} -> {}",
                    angles[k],
                    angles[k + 100]
                );
            } else {
                assert!(angles[k + 100] <= floor, "error left the floor at step {k}");
            }
        }
    }

    #[test]
    fn exact_start_stays_locked() {
        let inertia = table1_inertia();
        let gains = table1_gains();
        let dt = 1e-3;
        let reference = sinusoid_reference(&table1_sinusoid(), Rotation::identity(), dt, 2.0);
        let initial = BodyState::new(reference[0].rotation, reference[0].omega);
        let run =
            simulate_tracking(&initial, &reference, &gains, &inertia, PdFeedback::Log, dt).unwrap();
        for (s, r) in run.iter().zip(&reference) {
            assert!(crate::so3::error_angle(&r.rotation, &s.state.rotation) <= 1e-6);
        }
    }

    #[test]
    fn kinematic_feedback_cases() {
        let gain = Matrix3::from_diagonal(&Vector3::repeat(2.0));
        assert_eq!(
            kinematic_feedback(&Rotation::identity(), &gain, &Vector3::zeros()),
            Vector3::zeros()
        );
        let xi_d = Vector3::new(0.4, -0.1, 0.7);
        assert_relative_eq!(
            kinematic_feedback(&Rotation::identity(), &gain, &xi_d),
            xi_d,
            epsilon = 1e-15
        );
    }

    #[test]
    fn kinematic_regulation_decays_exponentially() {
        // scalar gain: the closed-loop flow is psi(t) = exp(-k t) psi(0)
        let k = 2.0;
        let gain = Matrix3::from_diagonal(&Vector3::repeat(k));
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let psi0 = random_unit(&mut rng) * 3.0;
        let dt = 1e-4;
        let samples = kinematic_regulation(&psi0, &gain, dt, 3.0);
        for (i, psi) in samples.iter().enumerate().step_by(50) {
            let expect = 3.0 * (-k * i as f64 * dt).exp();
            assert!(
                (psi.norm() - expect).abs() <= 0.01 * expect,
                "t = {}: |psi| = {} vs {}",
                i as f64 * dt,
                psi.norm(),
                expect
            );
        }
    }

    #[test]
    fn solve_lyapunov_known_solutions() {
        let cert = solve_lyapunov(&Matrix3::identity(), &Matrix3::identity()).unwrap();
        assert_relative_eq!(cert.p, Matrix3::identity(), epsilon = 1e-12);

        // diagonal case: -2 p_i k_i + 2 = 0
        let k = Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 4.0));
        let cert = solve_lyapunov(&k, &Matrix3::identity()).unwrap();
        let expect = Matrix3::from_diagonal(&Vector3::new(1.0, 0.5, 0.25));
        assert_relative_eq!(cert.p, expect, epsilon = 1e-12);
        assert!(cert.residual() <= 1e-12);

        assert!(matches!(
            solve_lyapunov(&(-Matrix3::identity()), &Matrix3::identity()),
            Err(PdError::NotStabilizing { .. })
        ));
    }

    #[test]
    fn lyapunov_value_cases() {
        assert_eq!(lyapunov_value(&Vector3::zeros(), &Matrix3::identity()), 0.0);
        assert_eq!(
            lyapunov_value(&Vector3::new(3.0, 4.0, 0.0), &Matrix3::identity()),
            12.5
        );
    }

    #[test]
    fn certificate_bounds_first_order_decay() {
        // along psi' = -K psi the certificate value decays at least at
        // rate 2 lambda_min(Q) / lambda_max(P)
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let eigs = Uniform::new(0.1f64, 10.0).unwrap();
        for _ in 0..20 {
            let lambda = Vector3::new(
                eigs.sample(&mut rng),
                eigs.sample(&mut rng),
                eigs.sample(&mut rng),
            );
            let mut t: Matrix3<f64> = Matrix3::identity();
            for e in t.iter_mut() {
                let bump: f64 = StandardNormal.sample(&mut rng);
                *e += 0.2 * bump;
            }
            let k = t * Matrix3::from_diagonal(&lambda) * t.try_inverse().unwrap();
            let q = Matrix3::identity();
            let cert = solve_lyapunov(&k, &q).unwrap();
            assert!(cert.residual() <= 1e-10);

            let rate = 2.0 * q.symmetric_eigenvalues().min() / cert.p.symmetric_eigenvalues().max();
            let psi0 = random_unit(&mut rng);
            let h0 = lyapunov_value(&psi0, &cert.p);
            let dt = 0.05;
            let flow = (-k * dt).exp();
            let mut psi = psi0;
            for i in 1..=40 {
                psi = flow * psi;
                let bound = h0 * (-rate * i as f64 * dt).exp();
                assert!(
                    lyapunov_value(&psi, &cert.p) <= bound * (1.0 + 1e-9),
                    "decay bound violated at step {i}"
                );
            }
        }
    }

    #[test]
    fn group_flow_decay_deviation_is_third_order() {
        // Along the group closed loop Psi' = Psi (-K psi)^, the decay of
        // h = psi^T P psi / 2 matches -psi^T Q psi only to second order in
        // |psi| when P is not scalar; the excess shrinks cubically.
        let k = Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 4.0));
        let cert = solve_lyapunov(&k, &Matrix3::identity()).unwrap();
        let dir = Vector3::new(1.0, -1.0, 1.0).normalize();
        let fd = 1e-7;
        let excess_at = |scale: f64| -> f64 {
            let psi = dir * scale;
            let error = Rotation::exp(&psi);
            let xi = kinematic_feedback(&error, &k, &Vector3::zeros());
            let fwd = (error * Rotation::exp(&(xi * fd))).log();
            let bwd = (error * Rotation::exp(&(-xi * fd))).log();
            let hdot = (lyapunov_value(&fwd, &cert.p) - lyapunov_value(&bwd, &cert.p)) / (2.0 * fd);
            hdot + psi.dot(&(cert.q * psi))
        };
        let e1 = excess_at(0.2).abs();
        let e2 = excess_at(0.1).abs();
        let e3 = excess_at(0.05).abs();
        let s1 = (e1 / e2).log2();
        let s2 = (e2 / e3).log2();
        assert!((s1 - 3.0).abs() < 0.4, "excess order {s1}");
        assert!((s2 - 3.0).abs() < 0.4, "excess order {s2}");
    }

    #[test]
    fn small_initial_error_makes_variants_agree() {
        let inertia = table1_inertia();
        let gains = table1_gains();
        let dt = 1e-3;
        let reference = sinusoid_reference(&table1_sinusoid(), Rotation::identity(), dt, 0.1);
        let initial = BodyState::new(
            Rotation::exp(&(Vector3::new(1.0, 1.0, 1.0).normalize() * 1e-3)),
            Vector3::zeros(),
        );
        let log_run =
            simulate_tracking(&initial, &reference, &gains, &inertia, PdFeedback::Log, dt).unwrap();
        let trace_run = simulate_tracking(
            &initial,
            &reference,
            &gains,
            &inertia,
            PdFeedback::Trace,
            dt,
        )
        .unwrap();
        for (a, b) in log_run.iter().zip(&trace_run) {
            let scale = a.torque.norm().max(1e-9);
            assert!(
                (a.torque - b.torque).norm() <= 2e-3 * scale,
                "torque traces diverged: {:?} vs {:?}",
                a.torque,
                b.torque
            );
        }
    }
}
