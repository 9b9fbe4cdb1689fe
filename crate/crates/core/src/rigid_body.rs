//! Rotational rigid-body dynamics and geometric time integration.
//!
//! The equation of motion in body coordinates is `J w' = Jw x w + u`
//! (gyroscopic torque plus applied torque); the attitude follows the
//! reconstruction equation `R' = R w^` and is integrated by composing
//! exponentials so states stay on the group by construction.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::so3::Rotation;

/// Number of integrator steps between re-projections of the rotation
/// onto the group (polar decomposition), bounding orthonormality drift
/// in long runs.
pub const REPROJECT_INTERVAL: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RigidBodyError {
    #[error("inertia matrix is not symmetric (asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("inertia matrix is not positive definite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("control source returned a non-finite torque at step {step} (t = {time})")]
    NonFiniteControl { step: usize, time: f64 },
}

/// Body-frame inertia matrix, symmetric positive definite. The inverse
/// is cached at construction since every dynamics evaluation needs it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inertia {
    j: Matrix3<f64>,
    j_inv: Matrix3<f64>,
}

impl Inertia {
    pub fn from_matrix(j: Matrix3<f64>) -> Result<Self, RigidBodyError> {
        let asymmetry = (j - j.transpose()).norm();
        if asymmetry > 1e-12 {
            return Err(RigidBodyError::NotSymmetric { asymmetry });
        }
        let min_eigenvalue = j.symmetric_eigenvalues().min();
        if min_eigenvalue <= 0.0 {
            return Err(RigidBodyError::NotPositiveDefinite { min_eigenvalue });
        }
        let j_inv = j
            .try_inverse()
            .expect("positive definite matrix is invertible");
        Ok(Inertia { j, j_inv })
    }

    pub fn from_diagonal(d: Vector3<f64>) -> Result<Self, RigidBodyError> {
        Self::from_matrix(Matrix3::from_diagonal(&d))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.j
    }

    pub fn inverse(&self) -> &Matrix3<f64> {
        &self.j_inv
    }
}

/// Attitude plus body angular velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyState {
    pub rotation: Rotation,
    pub omega: Vector3<f64>,
}

impl BodyState {
    pub fn new(rotation: Rotation, omega: Vector3<f64>) -> Self {
        BodyState { rotation, omega }
    }

    pub fn at_rest() -> Self {
        BodyState {
            rotation: Rotation::identity(),
            omega: Vector3::zeros(),
        }
    }
}

/// Integrator used by [`simulate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    GeometricEuler,
    Rk4,
}

/// Body angular acceleration `J^-1 (Jw x w + u)`.
pub fn angular_acceleration(
    omega: &Vector3<f64>,
    torque: &Vector3<f64>,
    inertia: &Inertia,
) -> Vector3<f64> {
    inertia.inverse() * ((inertia.matrix() * omega).cross(omega) + torque)
}

/// One geometric Euler step: `R' = R exp(w dt)`, `w' = w + dt f(w, u)`.
/// The torque is held constant over the step (zero-order hold).
pub fn step_euler(
    state: &BodyState,
    torque: &Vector3<f64>,
    inertia: &Inertia,
    dt: f64,
) -> BodyState {
    debug_assert!(dt > 0.0);
    BodyState {
        rotation: state.rotation * Rotation::exp(&(state.omega * dt)),
        omega: state.omega + dt * angular_acceleration(&state.omega, torque, inertia),
    }
}

/// One classical RK4 step on the angular velocity, with the rotation
/// advanced by the exponential of the RK4 combination of the stage
/// velocities. Fourth-order accurate in `w`; used as the high-order
/// validation integrator for the conservation checks.
pub fn step_rk4(state: &BodyState, torque: &Vector3<f64>, inertia: &Inertia, dt: f64) -> BodyState {
    debug_assert!(dt > 0.0);
    let w0 = state.omega;
    let k1 = angular_acceleration(&w0, torque, inertia);
    let w1 = w0 + 0.5 * dt * k1;
    let k2 = angular_acceleration(&w1, torque, inertia);
    let w2 = w0 + 0.5 * dt * k2;
    let k3 = angular_acceleration(&w2, torque, inertia);
    let w3 = w0 + dt * k3;
    let k4 = angular_acceleration(&w3, torque, inertia);

    let dphi = dt / 6.0 * (w0 + 2.0 * w1 + 2.0 * w2 + w3);
    BodyState {
        rotation: state.rotation * Rotation::exp(&dphi),
        omega: w0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4),
    }
}

/// Number of steps covering `[0, t_f]` at spacing `dt` (rounded up, with
/// a guard against `t_f/dt` landing just above an integer).
pub fn step_count(dt: f64, t_f: f64) -> usize {
    ((t_f / dt) - 1e-9).ceil().max(1.0) as usize
}

/// Integrates from `initial` under a time-indexed torque source sampled
/// at knot times (zero-order hold in between). Returns the `n + 1`
/// states including the initial one. The rotation is re-projected onto
/// the group every [`REPROJECT_INTERVAL`] steps.
pub fn simulate<F>(
    initial: &BodyState,
    mut torque_at: F,
    inertia: &Inertia,
    dt: f64,
    t_f: f64,
    method: Integrator,
) -> Result<Vec<BodyState>, RigidBodyError>
where
    F: FnMut(usize, f64) -> Vector3<f64>,
{
    assert!(dt > 0.0 && t_f >= dt);
    let n = step_count(dt, t_f);
    let mut states = Vec::with_capacity(n + 1);
    states.push(*initial);
    let mut state = *initial;
    for k in 0..n {
        let t = k as f64 * dt;
        let u = torque_at(k, t);
        if !u.iter().all(|x| x.is_finite()) {
            return Err(RigidBodyError::NonFiniteControl { step: k, time: t });
        }
        state = match method {
            Integrator::GeometricEuler => step_euler(&state, &u, inertia, dt),
            Integrator::Rk4 => step_rk4(&state, &u, inertia, dt),
        };
        if (k + 1) % REPROJECT_INTERVAL == 0 {
            state.rotation = state.rotation.orthonormalize();
        }
        states.push(state);
    }
    Ok(states)
}
