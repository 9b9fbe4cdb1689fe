//! Iterative LQR trajectory optimization on SO(3).
//!
//! Each iteration linearizes the attitude/twist dynamics around the
//! current nominal trajectory in Lie-algebra perturbation coordinates
//! `x = [psi; dxi]`, discretizes by an exact zero-order hold, solves the
//! local LQR subproblem by a dynamic-programming backward pass, and rolls
//! the affine policy out through the nonlinear dynamics with geometric
//! Euler steps. The terminal cost is pluggable: quadratic in the log of
//! the terminal error, or the classical trace form whose gradient
//! collapses near `pi` (used for the convergence comparison).
//!
//! Per-knot linearization is independent across knots and fans out with
//! rayon when the `parallel` feature is enabled.

use nalgebra::{Matrix3, Matrix6, SMatrix, Vector3, Vector6};
use thiserror::Error;

use crate::linalg::expm;
use crate::rigid_body::{step_euler, BodyState, Inertia, REPROJECT_INTERVAL};
use crate::so3::{ad, group_error, Rotation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IlqrError {
    #[error("weight matrix {which} must be {requirement}")]
    BadWeights {
        which: &'static str,
        requirement: &'static str,
    },
    #[error(
        "trajectory needs one more state than controls (got {states} states, {controls} controls)"
    )]
    InconsistentTrajectory { states: usize, controls: usize },
    #[error("q_uu is not positive definite at knot {knot} (condition estimate {condition:.3e})")]
    QuuNotInvertible { knot: usize, condition: f64 },
    #[error("forward rollout produced a non-finite state at knot {knot}")]
    DivergedRollout { knot: usize },
    #[error("control sequences have different lengths ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("policy length {policy} does not match trajectory controls {controls}")]
    PolicyMismatch { policy: usize, controls: usize },
}

/// Terminal cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostModel {
    /// Quadratic in the log of the terminal configuration error.
    Log,
    /// Trace of the terminal configuration error, Gauss-Newton seeded
    /// with its exact gradient and PSD-floored Hessian.
    Trace,
}

/// Discretization of the per-knot linear model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discretization {
    /// Exact zero-order hold via the augmented matrix exponential.
    ExactZoh,
    /// First-order hold `A_n = I + A dt`, `B_n = B dt` (ablation switch).
    Euler,
}

/// Stage, input, and terminal weights. `Q` and `V` must be symmetric
/// positive semidefinite, `S` symmetric positive definite. The terminal
/// cost models read the `(psi, psi)` and `(omega, omega)` blocks of `V`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    q: Matrix6<f64>,
    s: Matrix3<f64>,
    v: Matrix6<f64>,
}

impl CostWeights {
    pub fn new(q: Matrix6<f64>, s: Matrix3<f64>, v: Matrix6<f64>) -> Result<Self, IlqrError> {
        for (which, m) in [("Q", &q), ("V", &v)] {
            if (m - m.transpose()).norm() > 1e-9 {
                return Err(IlqrError::BadWeights {
                    which,
                    requirement: "symmetric",
                });
            }
            if m.symmetric_eigenvalues().min() < -1e-9 {
                return Err(IlqrError::BadWeights {
                    which,
                    requirement: "positive semidefinite",
                });
            }
        }
        if (s - s.transpose()).norm() > 1e-9 {
            return Err(IlqrError::BadWeights {
                which: "S",
                requirement: "symmetric",
            });
        }
        if s.symmetric_eigenvalues().min() <= 0.0 {
            return Err(IlqrError::BadWeights {
                which: "S",
                requirement: "positive definite",
            });
        }
        Ok(CostWeights { q, s, v })
    }

    pub fn q(&self) -> &Matrix6<f64> {
        &self.q
    }

    pub fn s(&self) -> &Matrix3<f64> {
        &self.s
    }

    pub fn v(&self) -> &Matrix6<f64> {
        &self.v
    }
}

/// Goal state and input the optimizer drives the trajectory toward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Goal {
    pub rotation: Rotation,
    pub omega: Vector3<f64>,
    pub torque: Vector3<f64>,
}

/// A nominal trajectory: `n + 1` states and `n` controls at spacing `dt`,
/// consistent with a rollout of its own controls.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<BodyState>,
    pub controls: Vec<Vector3<f64>>,
    pub dt: f64,
}

impl Trajectory {
    pub fn new(
        states: Vec<BodyState>,
        controls: Vec<Vector3<f64>>,
        dt: f64,
    ) -> Result<Self, IlqrError> {
        if states.len() != controls.len() + 1 || controls.is_empty() {
            return Err(IlqrError::InconsistentTrajectory {
                states: states.len(),
                controls: controls.len(),
            });
        }
        Ok(Trajectory {
            states,
            controls,
            dt,
        })
    }

    /// Rolls the given control sequence out from `initial` so the stored
    /// states are consistent with the controls by construction.
    pub fn from_rollout(
        initial: &BodyState,
        controls: Vec<Vector3<f64>>,
        inertia: &Inertia,
        dt: f64,
    ) -> Result<Self, IlqrError> {
        let mut states = Vec::with_capacity(controls.len() + 1);
        states.push(*initial);
        let mut state = *initial;
        for u in &controls {
            state = step_euler(&state, u, inertia, dt);
            states.push(state);
        }
        Trajectory::new(states, controls, dt)
    }

    /// The default initialization: hold a constant control from the
    /// initial state over `n` knots.
    pub fn hold(
        initial: &BodyState,
        control: Vector3<f64>,
        inertia: &Inertia,
        dt: f64,
        n: usize,
    ) -> Result<Self, IlqrError> {
        Trajectory::from_rollout(initial, vec![control; n], inertia, dt)
    }

    pub fn knots(&self) -> usize {
        self.controls.len()
    }

    pub fn horizon(&self) -> f64 {
        self.controls.len() as f64 * self.dt
    }
}

/// Continuous and discretized linear model at one knot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnotLinearization {
    pub a: Matrix6<f64>,
    pub b: SMatrix<f64, 6, 3>,
    pub a_d: Matrix6<f64>,
    pub b_d: SMatrix<f64, 6, 3>,
}

/// `(psi, psi)` block of the error dynamics `psi' = -ad_{xi_d} psi + dxi`.
pub fn error_dynamics_matrix(xi_d: &Vector3<f64>) -> Matrix3<f64> {
    -ad(xi_d)
}

/// Jacobians of the twist dynamics `f(w, u) = J^-1 (Jw x w + u)` with
/// respect to `w` and `u`.
pub fn twist_jacobians(omega: &Vector3<f64>, inertia: &Inertia) -> (Matrix3<f64>, Matrix3<f64>) {
    let j = inertia.matrix();
    let f = inertia.inverse() * (ad(&(j * omega)) - ad(omega) * j);
    (f, *inertia.inverse())
}

/// Assembles the continuous 6x6/6x3 model around one nominal knot.
pub fn continuous_model(
    omega_d: &Vector3<f64>,
    inertia: &Inertia,
) -> (Matrix6<f64>, SMatrix<f64, 6, 3>) {
    let (f, g) = twist_jacobians(omega_d, inertia);
    let mut a = Matrix6::<f64>::zeros();
    a.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&error_dynamics_matrix(omega_d));
    a.fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&Matrix3::identity());
    a.fixed_view_mut::<3, 3>(3, 3).copy_from(&f);
    let mut b = SMatrix::<f64, 6, 3>::zeros();
    b.fixed_view_mut::<3, 3>(3, 0).copy_from(&g);
    (a, b)
}

/// Exact zero-order hold: `[A_n, B_n; 0, I] = expm([[A, B], [0, 0]] dt)`.
pub fn zoh_discretize(
    a: &Matrix6<f64>,
    b: &SMatrix<f64, 6, 3>,
    dt: f64,
) -> (Matrix6<f64>, SMatrix<f64, 6, 3>) {
    assert!(dt > 0.0);
    let mut aug = SMatrix::<f64, 9, 9>::zeros();
    aug.fixed_view_mut::<6, 6>(0, 0).copy_from(&(a * dt));
    aug.fixed_view_mut::<6, 3>(0, 6).copy_from(&(b * dt));
    let e = expm(&aug);
    (
        e.fixed_view::<6, 6>(0, 0).into_owned(),
        e.fixed_view::<6, 3>(0, 6).into_owned(),
    )
}

/// First-order discretization `(I + A dt, B dt)`.
pub fn euler_discretize(
    a: &Matrix6<f64>,
    b: &SMatrix<f64, 6, 3>,
    dt: f64,
) -> (Matrix6<f64>, SMatrix<f64, 6, 3>) {
    assert!(dt > 0.0);
    (Matrix6::identity() + a * dt, b * dt)
}

fn linearize_knot(
    omega_d: &Vector3<f64>,
    inertia: &Inertia,
    dt: f64,
    discretization: Discretization,
) -> KnotLinearization {
    let (a, b) = continuous_model(omega_d, inertia);
    let (a_d, b_d) = match discretization {
        Discretization::ExactZoh => zoh_discretize(&a, &b, dt),
        Discretization::Euler => euler_discretize(&a, &b, dt),
    };
    KnotLinearization { a, b, a_d, b_d }
}

/// Linearizes and discretizes at every control knot; knots are
/// independent and computed in parallel when the feature is on.
pub fn linearize_trajectory(
    traj: &Trajectory,
    inertia: &Inertia,
    discretization: Discretization,
) -> Vec<KnotLinearization> {
    let omegas: Vec<Vector3<f64>> = traj.states[..traj.knots()]
        .iter()
        .map(|s| s.omega)
        .collect();
    crate::map_slice(&omegas, |w| {
        linearize_knot(w, inertia, traj.dt, discretization)
    })
}

/// Sequential reference implementation of [`linearize_trajectory`]; kept
/// callable under every feature set for the benchmark comparison.
pub fn linearize_trajectory_seq(
    traj: &Trajectory,
    inertia: &Inertia,
    discretization: Discretization,
) -> Vec<KnotLinearization> {
    traj.states[..traj.knots()]
        .iter()
        .map(|s| linearize_knot(&s.omega, inertia, traj.dt, discretization))
        .collect()
}

/// Per-knot targets in perturbation coordinates, refreshed each
/// iteration: `x_d = [log(R_n^T R_g); w_g - w_n]`, `v_d = u_g - u_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredPerturbation {
    pub states: Vec<Vector6<f64>>,
    pub controls: Vec<Vector3<f64>>,
    /// Knots whose configuration error sat on the branch cut (angle
    /// within 1e-9 of `pi`), where the log axis is a deterministic pick.
    pub branch_cut_hits: usize,
}

pub fn desired_perturbation(traj: &Trajectory, goal: &Goal) -> DesiredPerturbation {
    let mut branch_cut_hits = 0;
    let states = traj
        .states
        .iter()
        .map(|s| {
            let err = group_error(&s.rotation, &goal.rotation);
            let psi = err.log();
            if psi.norm() >= std::f64::consts::PI - 1e-9 {
                branch_cut_hits += 1;
            }
            let mut x = Vector6::zeros();
            x.fixed_view_mut::<3, 1>(0, 0).copy_from(&psi);
            x.fixed_view_mut::<3, 1>(3, 0)
                .copy_from(&(goal.omega - s.omega));
            x
        })
        .collect();
    let controls = traj.controls.iter().map(|u| goal.torque - u).collect();
    DesiredPerturbation {
        states,
        controls,
        branch_cut_hits,
    }
}

/// Value, gradient, and Hessian of the terminal cost in the local
/// perturbation coordinates `[psi; dxi]` about the trajectory endpoint.
/// The Hessian is returned raw; the solver floors it to PSD before
/// seeding the backward pass.
pub fn terminal_cost(
    end: &BodyState,
    goal: &Goal,
    model: CostModel,
    v: &Matrix6<f64>,
) -> (f64, Vector6<f64>, Matrix6<f64>) {
    let v_psi = v.fixed_view::<3, 3>(0, 0).into_owned();
    let v_omega = v.fixed_view::<3, 3>(3, 3).into_owned();
    let omega_err = end.omega - goal.omega;

    match model {
        CostModel::Log => {
            // psi* solves exp(psi*) = R_end^T R_g; cost 0.5 |psi - psi*|^2_V
            let psi_star = group_error(&end.rotation, &goal.rotation).log();
            let mut x_d = Vector6::zeros();
            x_d.fixed_view_mut::<3, 1>(0, 0).copy_from(&psi_star);
            x_d.fixed_view_mut::<3, 1>(3, 0).copy_from(&(-omega_err));
            let value = 0.5 * x_d.dot(&(v * x_d));
            let gradient = -(v * x_d);
            (value, gradient, *v)
        }
        CostModel::Trace => {
            // 0.5 tr((I - W e^psi)^T V_psi (I - W e^psi)) with W = R_g^T R_end
            let w = group_error(&goal.rotation, &end.rotation);
            let m = v_psi * w.matrix();
            let value_psi = 0.5
                * (v_psi.trace() + (w.matrix().transpose() * v_psi * w.matrix()).trace())
                - m.trace();
            let grad_psi = Vector3::new(
                m[(2, 1)] - m[(1, 2)],
                m[(0, 2)] - m[(2, 0)],
                m[(1, 0)] - m[(0, 1)],
            );
            let hess_psi = m.trace() * Matrix3::identity() - 0.5 * (m + m.transpose());

            let value = value_psi + 0.5 * omega_err.dot(&(v_omega * omega_err));
            let mut gradient = Vector6::zeros();
            gradient.fixed_view_mut::<3, 1>(0, 0).copy_from(&grad_psi);
            gradient
                .fixed_view_mut::<3, 1>(3, 0)
                .copy_from(&(v_omega * omega_err));
            let mut hessian = Matrix6::zeros();
            hessian.fixed_view_mut::<3, 3>(0, 0).copy_from(&hess_psi);
            hessian.fixed_view_mut::<3, 3>(3, 3).copy_from(&v_omega);
            (value, gradient, hessian)
        }
    }
}

/// Clamps the eigenvalues of a symmetric matrix at zero.
pub fn floor_psd(m: &Matrix6<f64>) -> Matrix6<f64> {
    let eig = nalgebra::SymmetricEigen::new(0.5 * (m + m.transpose()));
    let clamped = eig.eigenvalues.map(|e| e.max(0.0));
    eig.eigenvectors * Matrix6::from_diagonal(&clamped) * eig.eigenvectors.transpose()
}

/// Terminal seed of the backward recursion: the gradient and Hessian of
/// the cost-to-go at the last knot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalSeed {
    pub gradient: Vector6<f64>,
    pub hessian: Matrix6<f64>,
}

/// Per-knot affine policy `u = u_n + v_ff + K x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub gains: Vec<SMatrix<f64, 3, 6>>,
    pub feedforward: Vec<Vector3<f64>>,
}

/// Dynamic-programming backward pass over the discretized model.
pub fn backward_pass(
    lin: &[KnotLinearization],
    desired: &DesiredPerturbation,
    weights: &CostWeights,
    seed: &TerminalSeed,
) -> Result<Policy, IlqrError> {
    let n = lin.len();
    assert_eq!(desired.states.len(), n + 1);
    assert_eq!(desired.controls.len(), n);

    let mut gains = vec![SMatrix::<f64, 3, 6>::zeros(); n];
    let mut feedforward = vec![Vector3::zeros(); n];
    let mut p_x = seed.gradient;
    let mut p_xx = seed.hessian;

    for k in (0..n).rev() {
        let a = &lin[k].a_d;
        let b = &lin[k].b_d;
        let q_x = -(weights.q() * desired.states[k]) + a.transpose() * p_x;
        let q_u = -(weights.s() * desired.controls[k]) + b.transpose() * p_x;
        let q_xx = weights.q() + a.transpose() * p_xx * a;
        let q_ux = b.transpose() * p_xx * a;
        let q_uu = weights.s() + b.transpose() * p_xx * b;

        let chol = match nalgebra::Cholesky::new(q_uu) {
            Some(c) => c,
            None => {
                let eigs = q_uu.symmetric_eigenvalues();
                let condition = eigs.amax() / eigs.amin().max(f64::MIN_POSITIVE);
                return Err(IlqrError::QuuNotInvertible { knot: k, condition });
            }
        };
        let v_ff = -chol.solve(&q_u);
        let gain = -chol.solve(&q_ux);

        p_x = q_x + q_ux.transpose() * v_ff;
        let new_p_xx = q_xx + q_ux.transpose() * gain;
        p_xx = 0.5 * (new_p_xx + new_p_xx.transpose());

        gains[k] = gain;
        feedforward[k] = v_ff;
    }
    Ok(Policy { gains, feedforward })
}

/// Rolls the affine policy out through the nonlinear dynamics:
/// `u_n = u_nom + gamma v_ff + K [log(R_nom^T R); w - w_nom]`, stepping
/// with geometric Euler from the same initial state.
pub fn forward_rollout(
    traj: &Trajectory,
    policy: &Policy,
    inertia: &Inertia,
    gamma: f64,
) -> Result<Trajectory, IlqrError> {
    let n = traj.knots();
    if policy.gains.len() != n || policy.feedforward.len() != n {
        return Err(IlqrError::PolicyMismatch {
            policy: policy.gains.len(),
            controls: n,
        });
    }
    let mut states = Vec::with_capacity(n + 1);
    let mut controls = Vec::with_capacity(n);
    let mut state = traj.states[0];
    states.push(state);
    for k in 0..n {
        let psi = group_error(&traj.states[k].rotation, &state.rotation).log();
        let mut x = Vector6::zeros();
        x.fixed_view_mut::<3, 1>(0, 0).copy_from(&psi);
        x.fixed_view_mut::<3, 1>(3, 0)
            .copy_from(&(state.omega - traj.states[k].omega));
        let u = traj.controls[k] + gamma * policy.feedforward[k] + policy.gains[k] * x;
        if !u.iter().all(|v| v.is_finite()) {
            return Err(IlqrError::DivergedRollout { knot: k });
        }
        state = step_euler(&state, &u, inertia, traj.dt);
        if !state.omega.iter().all(|v| v.is_finite()) {
            return Err(IlqrError::DivergedRollout { knot: k });
        }
        if (k + 1) % REPROJECT_INTERVAL == 0 {
            state.rotation = state.rotation.orthonormalize();
        }
        controls.push(u);
        states.push(state);
    }
    Trajectory::new(states, controls, traj.dt)
}

/// Total objective of a trajectory: stage quadratics toward the goal
/// plus the selected terminal model.
pub fn total_cost(traj: &Trajectory, goal: &Goal, weights: &CostWeights, model: CostModel) -> f64 {
    let desired = desired_perturbation(traj, goal);
    let mut cost = 0.0;
    for k in 0..traj.knots() {
        let x_d = &desired.states[k];
        let v_d = &desired.controls[k];
        cost += 0.5 * x_d.dot(&(weights.q() * x_d)) + 0.5 * v_d.dot(&(weights.s() * v_d));
    }
    let (terminal, _, _) = terminal_cost(traj.states.last().unwrap(), goal, model, weights.v());
    cost + terminal
}

/// `max_n |a_n - b_n|_2`: the infinity-over-knots, Euclidean-over-axes
/// distance between two control sequences.
pub fn control_change_norm(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> Result<f64, IlqrError> {
    if a.len() != b.len() {
        return Err(IlqrError::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub cost_model: CostModel,
    /// Backtracking halving of the feedforward scale on cost increase
    /// (`gamma` in `{1, 1/2, ..., 1/64}`). Off by default: the reference
    /// behavior applies the full step unconditionally.
    pub line_search: bool,
    pub discretization: Discretization,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 50,
            tol: 1e-6,
            cost_model: CostModel::Log,
            line_search: false,
            discretization: Discretization::ExactZoh,
        }
    }
}

/// Per-iteration record of the solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Total cost after each iteration; entry 0 is the initial cost.
    pub costs: Vec<f64>,
    /// `|U_{i+1} - U_i|` for each completed iteration.
    pub control_change: Vec<f64>,
    /// `|U_i - U_final|`, filled retrospectively; entry 0 is the initial
    /// distance and the last entry is zero.
    pub distance_to_final: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub branch_cut_hits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlqrSolution {
    pub trajectory: Trajectory,
    pub policy: Policy,
    pub report: ConvergenceReport,
}

/// Runs the full solve: linearize, backward pass, rollout, repeat until
/// the control change falls under `tol` or the iteration budget runs
/// out. A diverging rollout ends the loop and returns the best iterate
/// with `converged = false`.
pub fn ilqr_solve(
    init: Trajectory,
    goal: &Goal,
    weights: &CostWeights,
    inertia: &Inertia,
    opts: &SolverOptions,
) -> Result<IlqrSolution, IlqrError> {
    assert!(opts.max_iters >= 1);
    let mut traj = init;
    let mut policy = Policy {
        gains: vec![SMatrix::zeros(); traj.knots()],
        feedforward: vec![Vector3::zeros(); traj.knots()],
    };
    let mut histories = vec![traj.controls.clone()];
    let mut costs = vec![total_cost(&traj, goal, weights, opts.cost_model)];
    let mut control_change = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut branch_cut_hits = 0;

    for _ in 0..opts.max_iters {
        let desired = desired_perturbation(&traj, goal);
        branch_cut_hits += desired.branch_cut_hits;
        let lin = linearize_trajectory(&traj, inertia, opts.discretization);
        let seed = match opts.cost_model {
            CostModel::Log => {
                let x_d = desired.states[traj.knots()];
                TerminalSeed {
                    gradient: -(weights.v() * x_d),
                    hessian: *weights.v(),
                }
            }
            CostModel::Trace => {
                let (_, gradient, hessian) = terminal_cost(
                    traj.states.last().unwrap(),
                    goal,
                    CostModel::Trace,
                    weights.v(),
                );
                TerminalSeed {
                    gradient,
                    hessian: floor_psd(&hessian),
                }
            }
        };
        let new_policy = backward_pass(&lin, &desired, weights, &seed)?;

        // try the full step; with line search on, halve the feedforward
        // scale whenever the rollout diverges or the cost goes up
        let previous_cost = *costs.last().unwrap();
        let mut gamma = 1.0;
        let mut accepted: Option<(Trajectory, f64)> = None;
        loop {
            match forward_rollout(&traj, &new_policy, inertia, gamma) {
                Ok(candidate) => {
                    let cost = total_cost(&candidate, goal, weights, opts.cost_model);
                    let improved = cost <= previous_cost;
                    accepted = Some((candidate, cost));
                    if improved || !opts.line_search || gamma <= 1.0 / 64.0 {
                        break;
                    }
                }
                Err(IlqrError::DivergedRollout { .. }) => {
                    if !opts.line_search || gamma <= 1.0 / 64.0 {
                        break;
                    }
                }
                Err(e) => return Err(e),
            }
            gamma *= 0.5;
        }
        let Some((candidate, cost)) = accepted else {
            // every attempted scale diverged; keep the best iterate so far
            break;
        };

        let change = control_change_norm(&candidate.controls, &traj.controls)?;
        iterations += 1;
        costs.push(cost);
        control_change.push(change);
        histories.push(candidate.controls.clone());
        traj = candidate;
        policy = new_policy;
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    let last = histories.last().unwrap().clone();
    let distance_to_final = histories
        .iter()
        .map(|u| control_change_norm(u, &last).expect("histories share one length"))
        .collect();

    Ok(IlqrSolution {
        trajectory: traj,
        policy,
        report: ConvergenceReport {
            costs,
            control_change,
            distance_to_final,
            iterations,
            converged,
            branch_cut_hits,
        },
    })
}
