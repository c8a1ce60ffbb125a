//! Brute-force kernel ridge regression over every 2-D cyclic shift.
//!
//! Builds the full `(W·H) × (W·H)` Gaussian Gram matrix explicitly and solves
//! `(K + λI)α = y` by LU decomposition. This is O(n³) and exists to check
//! the frequency-domain dual solution; nothing on the tracking path uses it.

use nalgebra::{DMatrix, DVector};

use super::{same_dims, RealPlane};
use crate::error::{Error, Result};

/// Solves the dual ridge regression for the channels `x` against labels `y`
/// with Gaussian kernel bandwidth `sigma` and regularizer `lambda`.
///
/// Shift `(sx, sy)` of the sample occupies row `sy·W + sx`, the same index
/// the label and the returned dual coefficients use.
pub fn circulant_oracle_solve(
    x: &[RealPlane],
    y: &RealPlane,
    lambda: f64,
    sigma: f64,
) -> Result<RealPlane> {
    if x.is_empty() {
        return Err(Error::dim("oracle needs at least one channel"));
    }
    for c in x {
        same_dims(c.dims(), y.dims())?;
    }
    if !(lambda > 0.0) {
        return Err(Error::param(format!("lambda must be > 0, got {}", lambda)));
    }
    if !(sigma > 0.0) {
        return Err(Error::param(format!("sigma must be > 0, got {}", sigma)));
    }

    let (w, h) = y.dims();
    let n = w * h;
    // Every cyclic shift of every channel, flattened and concatenated.
    let shifted: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let (sx, sy) = ((i % w) as isize, (i / w) as isize);
            x.iter()
                .flat_map(|c| c.cyclic_shift(sx, sy).into_values())
                .collect()
        })
        .collect();

    let inv_s2 = 1.0 / (sigma * sigma);
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        gram[(i, i)] = 1.0 + lambda;
        for j in (i + 1)..n {
            let d2: f64 = shifted[i]
                .iter()
                .zip(&shifted[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let k = (-d2 * inv_s2).exp();
            gram[(i, j)] = k;
            gram[(j, i)] = k;
        }
    }

    let rhs = DVector::from_column_slice(y.values());
    let alpha = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("singular Gram system".into()))?;
    RealPlane::new(w, h, alpha.iter().copied().collect())
}
