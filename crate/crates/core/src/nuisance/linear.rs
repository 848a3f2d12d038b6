//! Least-squares linear model with ridge jitter.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative ridge jitter applied to the normal equations to absorb
/// rank-deficient designs.
pub const DEFAULT_JITTER: f64 = 1e-8;

/// Affine model `y ≈ b0 + b · x`, fit by (weighted) least squares.
#[derive(Debug, Clone)]
pub struct LinearModel {
    /// Intercept followed by one coefficient per feature.
    pub coef: Vec<f64>,
}

impl LinearModel {
    /// Fit on rows `xs` with targets `ys`, all weights one.
    pub fn fit(xs: &[&[f64]], ys: &[f64], jitter: Option<f64>) -> Result<Self> {
        Self::fit_weighted(xs, ys, None, jitter)
    }

    /// Weighted least squares; `jitter = None` disables the ridge guard and a
    /// singular design becomes an error.
    pub fn fit_weighted(
        xs: &[&[f64]],
        ys: &[f64],
        weights: Option<&[f64]>,
        jitter: Option<f64>,
    ) -> Result<Self> {
        let n = xs.len();
        if n == 0 {
            return Err(Error::EmptyCell("linear fit on empty sample".into()));
        }
        let d = xs[0].len();
        let p = d + 1;
        let mut xtx = DMatrix::<f64>::zeros(p, p);
        let mut xty = DVector::<f64>::zeros(p);
        let mut phi = Vec::with_capacity(p);
        for i in 0..n {
            let w = weights.map_or(1.0, |ws| ws[i]);
            if w == 0.0 {
                continue;
            }
            phi.clear();
            phi.push(1.0);
            phi.extend_from_slice(xs[i]);
            for r in 0..p {
                xty[r] += w * phi[r] * ys[i];
                for c in r..p {
                    xtx[(r, c)] += w * phi[r] * phi[c];
                }
            }
        }
        for r in 0..p {
            for c in 0..r {
                xtx[(r, c)] = xtx[(c, r)];
            }
        }
        // Plain least squares first; the ridge bump only engages on a
        // rank-deficient design.
        let chol = match xtx.clone().cholesky() {
            Some(c) => c,
            None => match jitter {
                Some(j) => {
                    let scale = (0..p).map(|r| xtx[(r, r)]).sum::<f64>() / p as f64;
                    let bump = j * scale.max(1.0);
                    for r in 0..p {
                        xtx[(r, r)] += bump;
                    }
                    xtx.clone().cholesky().ok_or_else(|| {
                        Error::SingularDesign("normal equations not positive definite".into())
                    })?
                }
                None => {
                    return Err(Error::SingularDesign(
                        "normal equations not positive definite".into(),
                    ))
                }
            },
        };
        let beta = chol.solve(&xty);
        Ok(LinearModel {
            coef: beta.iter().copied().collect(),
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut v = self.coef[0];
        for (c, xi) in self.coef[1..].iter().zip(x.iter()) {
            v += c * xi;
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn noiseless_linear_recovery() {
        // m = 2 + 3 * x0, no noise
        let xs_store: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.25 - 2.0]).collect();
        let xs: Vec<&[f64]> = xs_store.iter().map(|v| v.as_slice()).collect();
        let ys: Vec<f64> = xs_store.iter().map(|v| 2.0 + 3.0 * v[0]).collect();
        let m = LinearModel::fit(&xs, &ys, Some(DEFAULT_JITTER)).unwrap();
        assert!((m.coef[0] - 2.0).abs() < 1e-10);
        assert!((m.coef[1] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn constant_target() {
        let xs_store: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let xs: Vec<&[f64]> = xs_store.iter().map(|v| v.as_slice()).collect();
        let ys = vec![5.0; 10];
        let m = LinearModel::fit(&xs, &ys, Some(DEFAULT_JITTER)).unwrap();
        for x in &xs_store {
            assert!((m.predict(x) - 5.0).abs() < 1e-8);
        }
    }

    #[test]
    fn singular_design_errors_without_jitter() {
        // duplicated column -> rank deficient
        let xs_store: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, i as f64]).collect();
        let xs: Vec<&[f64]> = xs_store.iter().map(|v| v.as_slice()).collect();
        let ys: Vec<f64> = (0..8).map(|i| i as f64).collect();
        assert!(LinearModel::fit(&xs, &ys, None).is_err());
        assert!(LinearModel::fit(&xs, &ys, Some(DEFAULT_JITTER)).is_ok());
    }

    #[test]
    fn affine_equivariant_predictions() {
        // Replacing x by S x + t leaves fitted values at corresponding points
        // unchanged (up to the jitter scale).
        let xs_store: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let t = i as f64 * 0.1;
                vec![t.sin(), t.cos() * 0.5 + 0.1 * t]
            })
            .collect();
        let ys: Vec<f64> = xs_store
            .iter()
            .map(|v| 1.0 + 2.0 * v[0] - 0.7 * v[1])
            .collect();
        let trans: Vec<Vec<f64>> = xs_store
            .iter()
            .map(|v| vec![3.0 * v[0] - v[1] + 2.0, 0.5 * v[1] - 1.0])
            .collect();
        let xs: Vec<&[f64]> = xs_store.iter().map(|v| v.as_slice()).collect();
        let xt: Vec<&[f64]> = trans.iter().map(|v| v.as_slice()).collect();
        let m0 = LinearModel::fit(&xs, &ys, Some(DEFAULT_JITTER)).unwrap();
        let m1 = LinearModel::fit(&xt, &ys, Some(DEFAULT_JITTER)).unwrap();
        for i in 0..xs_store.len() {
            assert!((m0.predict(&xs_store[i]) - m1.predict(&trans[i])).abs() < 1e-8);
        }
    }
}
