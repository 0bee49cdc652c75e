//! Newton iteration and conditioning helpers shared by the implicit solves.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{NEWTON_MAX_ITER, NEWTON_TOL};
use crate::error::{CoreError, Result};

/// Solve `F(x) = 0` given a callback returning the residual and Jacobian.
/// Stops when the max-norm residual drops to [`NEWTON_TOL`]; gives up with
/// `NewtonDivergence` after [`NEWTON_MAX_ITER`] iterations.
pub fn newton_solve(
    mut f: impl FnMut(&[f64]) -> Result<(DVector<f64>, DMatrix<f64>)>,
    x0: &[f64],
) -> Result<Vec<f64>> {
    let mut x = x0.to_vec();
    for iter in 0..=NEWTON_MAX_ITER {
        let (r, j) = f(&x)?;
        let rnorm = r.amax();
        if rnorm <= NEWTON_TOL {
            return Ok(x);
        }
        if iter == NEWTON_MAX_ITER || !rnorm.is_finite() {
            return Err(CoreError::NewtonDivergence {
                step: iter,
                residual: rnorm,
            });
        }
        let delta = j.lu().solve(&r).ok_or(CoreError::NewtonDivergence {
            step: iter,
            residual: rnorm,
        })?;
        for i in 0..x.len() {
            x[i] -= delta[i];
        }
    }
    unreachable!("newton loop returns or errors")
}

/// 2-norm condition number; infinite for numerically singular matrices.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let svd = m.clone().svd(false, false);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
