//! Small dense linear-algebra helpers shared by the solver modules.

use nalgebra::SMatrix;

/// Matrix exponential by scaling-and-squaring with a truncated Taylor
/// series; terms are added until they fall below 1e-15 of the running
/// sum, well inside the 1e-12 accuracy the discretization asks for.
pub(crate) fn expm<const D: usize>(m: &SMatrix<f64, D, D>) -> SMatrix<f64, D, D> {
    let norm = m.norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = m / 2f64.powi(squarings as i32);

    let mut acc = SMatrix::<f64, D, D>::identity();
    let mut term = SMatrix::<f64, D, D>::identity();
    for k in 1..60 {
        term = term * scaled / k as f64;
        acc += term;
        if term.norm() <= 1e-15 * acc.norm() {
            break;
        }
    }
    for _ in 0..squarings {
        acc = acc * acc;
    }
    acc
}

/// Kronecker product of two 3x3 matrices.
pub(crate) fn kron3(a: &SMatrix<f64, 3, 3>, b: &SMatrix<f64, 3, 3>) -> SMatrix<f64, 9, 9> {
    let mut out = SMatrix::<f64, 9, 9>::zeros();
    for i in 0..3 {
        for j in 0..3 {
            out.fixed_view_mut::<3, 3>(3 * i, 3 * j)
                .copy_from(&(a[(i, j)] * b));
        }
    }
    out
}
