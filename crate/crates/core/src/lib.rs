//! Geometric control toolkit on SO(3).
//!
//! - [`so3`]: group/algebra primitives (hat/vee, exp/log, adjoints).
//! - [`rigid_body`]: forced rigid-body dynamics and geometric integrators.
//! - [`pd`]: attitude PD tracking with log-error and trace-gradient
//!   feedback, plus the Lyapunov-equation stability certificate.
//! - [`ilqr`]: iterative LQR on the group with pluggable terminal cost.
//! - [`selftest`]: batched numerical self-checks backing the CLI `check`
//!   command and the benchmark suite.
//!
//! With the default `parallel` feature, batch operations (per-knot
//! linearization, Monte Carlo self-checks) fan out with rayon; without
//! it everything runs sequentially with identical results.

pub mod ilqr;
mod linalg;
pub mod pd;
pub mod rigid_body;
pub mod selftest;
pub mod so3;

pub use rigid_body::{BodyState, Inertia, Integrator};
pub use so3::Rotation;

/// Order-preserving parallel (or sequential) map over a slice.
pub(crate) fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
