//! Batched numerical self-checks.
//!
//! These back the CLI `check` command and the benchmark suite. Each
//! check returns the measured quantity so callers can print it next to
//! the threshold; sampling is deterministic in the seed, and the batch
//! loops run in parallel under the `parallel` feature (the `_seq`
//! variants stay sequential for comparison).

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use std::f64::consts::PI;

use crate::pd::solve_lyapunov;
use crate::rigid_body::{angular_acceleration, simulate, BodyState, Inertia, Integrator};
use crate::so3::Rotation;

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub measured: f64,
    pub threshold: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.measured <= self.threshold
    }
}

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

fn roundtrip_samples(samples: usize, seed: u64) -> Vec<Vector3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angles = Uniform::new(f64::MIN_POSITIVE, PI - 1e-3).unwrap();
    (0..samples)
        .map(|_| random_unit(&mut rng) * angles.sample(&mut rng))
        .collect()
}

fn roundtrip_error(v: &Vector3<f64>) -> f64 {
    (Rotation::exp(v).log() - v).norm()
}

/// Worst `|log(exp(v)) - v|` over random rotation vectors with norm in
/// `(0, pi - 1e-3]`.
pub fn max_exp_log_roundtrip_error(samples: usize, seed: u64) -> f64 {
    let vs = roundtrip_samples(samples, seed);
    crate::map_slice(&vs, roundtrip_error)
        .into_iter()
        .fold(0.0, f64::max)
}

/// Sequential reference for [`max_exp_log_roundtrip_error`].
pub fn max_exp_log_roundtrip_error_seq(samples: usize, seed: u64) -> f64 {
    roundtrip_samples(samples, seed)
        .iter()
        .map(roundtrip_error)
        .fold(0.0, f64::max)
}

/// Worst `|log(R)| - pi` over random rotations including a near-cut
/// population; at or below zero the principal branch holds.
pub fn max_log_norm_excess(samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angles = Uniform::new(0.0f64, PI).unwrap();
    let vs: Vec<Vector3<f64>> = (0..samples)
        .map(|i| {
            let theta = match i % 5 {
                // bias a fifth of the samples hard against the cut
                0 => PI - 10.0f64.powf(-((i % 16) as f64)),
                _ => angles.sample(&mut rng),
            };
            random_unit(&mut rng) * theta
        })
        .collect();
    crate::map_slice(&vs, |v| Rotation::exp(v).log().norm() - PI)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Relative drift of kinetic energy and momentum norm over a 3 s free
/// rotation of an asymmetric body (RK4 at 1 ms).
pub fn conservation_drift() -> (f64, f64) {
    let inertia = Inertia::from_diagonal(Vector3::new(1.0, 3.0, 5.0)).unwrap();
    let initial = BodyState::new(Rotation::identity(), Vector3::new(1.0, 0.1, 0.1));
    let states = simulate(
        &initial,
        |_, _| Vector3::zeros(),
        &inertia,
        1e-3,
        3.0,
        Integrator::Rk4,
    )
    .expect("zero torque is finite");
    let energy = |s: &BodyState| 0.5 * s.omega.dot(&(inertia.matrix() * s.omega));
    let momentum = |s: &BodyState| (inertia.matrix() * s.omega).norm();
    let (e0, m0) = (energy(&initial), momentum(&initial));
    states.iter().fold((0.0f64, 0.0f64), |(de, dm), s| {
        (
            de.max((energy(s) - e0).abs() / e0),
            dm.max((momentum(s) - m0).abs() / m0),
        )
    })
}

/// Worst Lyapunov-equation residual over random stabilizing gains with
/// eigenvalues in `[0.1, 10]`.
pub fn certificate_max_residual(trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eigs = Uniform::new(0.1f64, 10.0).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..trials {
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
        let cert = solve_lyapunov(&k, &Matrix3::identity()).expect("gain is stabilizing");
        worst = worst.max(cert.residual());
        assert!(cert.p.symmetric_eigenvalues().min() > 0.0);
    }
    worst
}

/// Worst relative mismatch between the analytic twist Jacobians and
/// central finite differences at random states.
pub fn jacobian_fd_max_rel_err(states: usize, seed: u64) -> f64 {
    let inertia = Inertia::from_diagonal(Vector3::new(1.0, 3.0, 5.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mags = Uniform::new(0.1f64, 3.0).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..states {
        let omega = random_unit(&mut rng) * mags.sample(&mut rng);
        let (f, g) = crate::ilqr::twist_jacobians(&omega, &inertia);
        let mut fd_f = Matrix3::zeros();
        let mut fd_g = Matrix3::zeros();
        for i in 0..3 {
            let mut d = Vector3::zeros();
            d[i] = h;
            fd_f.set_column(
                i,
                &((angular_acceleration(&(omega + d), &Vector3::zeros(), &inertia)
                    - angular_acceleration(&(omega - d), &Vector3::zeros(), &inertia))
                    / (2.0 * h)),
            );
            fd_g.set_column(
                i,
                &((angular_acceleration(&omega, &d, &inertia)
                    - angular_acceleration(&omega, &(-d), &inertia))
                    / (2.0 * h)),
            );
        }
        worst = worst.max((fd_f - f).norm() / f.norm().max(1.0));
        worst = worst.max((fd_g - g).norm() / g.norm().max(1.0));
    }
    worst
}

/// Runs the full embedded suite. Each report pairs the measured value
/// with its threshold; the caller decides how to render them.
pub fn run_all(seed: u64) -> Vec<CheckReport> {
    let (energy_drift, momentum_drift) = conservation_drift();
    vec![
        CheckReport {
            name: "exp/log roundtrip max error (1e5 samples)",
            measured: max_exp_log_roundtrip_error(100_000, seed),
            threshold: 1e-9,
        },
        CheckReport {
            name: "log principal-branch excess over pi (2e5 samples)",
            measured: max_log_norm_excess(200_000, seed.wrapping_add(1)),
            threshold: 1e-12,
        },
        CheckReport {
            name: "free-rotation energy drift (rk4, 3 s)",
            measured: energy_drift,
            threshold: 1e-6,
        },
        CheckReport {
            name: "free-rotation momentum-norm drift (rk4, 3 s)",
            measured: momentum_drift,
            threshold: 1e-6,
        },
        CheckReport {
            name: "Lyapunov certificate max residual (20 gains)",
            measured: certificate_max_residual(20, seed.wrapping_add(2)),
            threshold: 1e-8,
        },
        CheckReport {
            name: "twist Jacobians vs finite differences (20 states)",
            measured: jacobian_fd_max_rel_err(20, seed.wrapping_add(3)),
            threshold: 1e-5,
        },
    ]
}
