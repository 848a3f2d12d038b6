//! Logistic regression by Newton-Raphson, plus a kernelized variant.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::nuisance::kernel::{median_heuristic_bandwidth, rbf, Standardizer};

const MAX_ITER: usize = 100;
const GRAD_TOL: f64 = 1e-10;
const L2_GUARD: f64 = 1e-8;

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Logistic model `P(label=1 | x) = sigmoid(b0 + b · x)`.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    pub coef: Vec<f64>,
    /// Newton hit the iteration cap; best iterate is kept.
    pub converged: bool,
}

impl LogisticModel {
    pub fn fit(xs: &[&[f64]], labels: &[u8], weights: Option<&[f64]>) -> Result<Self> {
        let n = xs.len();
        if n == 0 {
            return Err(Error::EmptyCell("logistic fit on empty sample".into()));
        }
        let pos: f64 = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| weights.map_or(1.0, |w| w[i]) * l as f64)
            .sum();
        let tot: f64 = weights.map_or(n as f64, |w| w.iter().sum());
        if pos <= 0.0 || pos >= tot {
            return Err(Error::OneClassOnly(
                "both classes required for a logistic fit".into(),
            ));
        }
        let d = xs[0].len();
        let p = d + 1;
        let mut beta = DVector::<f64>::zeros(p);
        // Intercept start at the empirical log odds.
        beta[0] = (pos / (tot - pos)).ln();
        let mut converged = false;
        let mut phi = vec![0.0; p];
        for _ in 0..MAX_ITER {
            let mut grad = DVector::<f64>::zeros(p);
            let mut hess = DMatrix::<f64>::zeros(p, p);
            for i in 0..n {
                let w = weights.map_or(1.0, |ws| ws[i]);
                if w == 0.0 {
                    continue;
                }
                phi[0] = 1.0;
                phi[1..].copy_from_slice(xs[i]);
                let mut t = 0.0;
                for r in 0..p {
                    t += beta[r] * phi[r];
                }
                let mu = sigmoid(t);
                let resid = labels[i] as f64 - mu;
                let wv = w * mu * (1.0 - mu);
                for r in 0..p {
                    grad[r] += w * resid * phi[r];
                    for c in r..p {
                        hess[(r, c)] += wv * phi[r] * phi[c];
                    }
                }
            }
            for r in 0..p {
                grad[r] -= L2_GUARD * beta[r];
                for c in 0..r {
                    hess[(r, c)] = hess[(c, r)];
                }
                hess[(r, r)] += L2_GUARD;
            }
            let gnorm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gnorm < GRAD_TOL {
                converged = true;
                break;
            }
            let step = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&grad),
                None => break,
            };
            beta += step;
        }
        Ok(LogisticModel {
            coef: beta.iter().copied().collect(),
            converged,
        })
    }

    /// Raw probability, no trimming.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut t = self.coef[0];
        for (c, xi) in self.coef[1..].iter().zip(x.iter()) {
            t += c * xi;
        }
        sigmoid(t)
    }
}

/// Logistic regression on an RBF kernel expansion over subsampled centers.
#[derive(Debug, Clone)]
pub struct KernelLogisticModel {
    standardizer: Standardizer,
    centers: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    intercept: f64,
    sigma: f64,
    pub converged: bool,
}

impl KernelLogisticModel {
    pub fn fit(
        xs: &[&[f64]],
        labels: &[u8],
        max_centers: usize,
        lambda: f64,
        bandwidth: Option<f64>,
    ) -> Result<Self> {
        let n = xs.len();
        if n == 0 {
            return Err(Error::EmptyCell("kernel logistic fit on empty sample".into()));
        }
        let pos = labels.iter().filter(|&&l| l == 1).count();
        if pos == 0 || pos == n {
            return Err(Error::OneClassOnly(
                "both classes required for a logistic fit".into(),
            ));
        }
        let standardizer = Standardizer::fit(xs);
        let std_rows: Vec<Vec<f64>> = xs.iter().map(|x| standardizer.apply(x)).collect();
        let stride = n.div_ceil(max_centers).max(1);
        let centers: Vec<Vec<f64>> = std_rows.iter().step_by(stride).cloned().collect();
        let sigma = bandwidth.unwrap_or_else(|| median_heuristic_bandwidth(&centers));
        let b = centers.len();
        let p = b + 1;
        let feats: Vec<Vec<f64>> = std_rows
            .iter()
            .map(|r| centers.iter().map(|c| rbf(r, c, sigma)).collect())
            .collect();
        let mut beta = DVector::<f64>::zeros(p);
        beta[0] = (pos as f64 / (n - pos) as f64).ln();
        let ridge = lambda * n as f64;
        let mut converged = false;
        for _ in 0..MAX_ITER {
            let mut grad = DVector::<f64>::zeros(p);
            let mut hess = DMatrix::<f64>::zeros(p, p);
            for i in 0..n {
                let mut t = beta[0];
                for j in 0..b {
                    t += beta[j + 1] * feats[i][j];
                }
                let mu = sigmoid(t);
                let resid = labels[i] as f64 - mu;
                let wv = mu * (1.0 - mu);
                grad[0] += resid;
                hess[(0, 0)] += wv;
                for r in 0..b {
                    grad[r + 1] += resid * feats[i][r];
                    hess[(0, r + 1)] += wv * feats[i][r];
                    for c in r..b {
                        hess[(r + 1, c + 1)] += wv * feats[i][r] * feats[i][c];
                    }
                }
            }
            for r in 1..p {
                grad[r] -= ridge * beta[r];
                hess[(r, r)] += ridge + L2_GUARD;
            }
            hess[(0, 0)] += L2_GUARD;
            for r in 0..p {
                for c in 0..r {
                    hess[(r, c)] = hess[(c, r)];
                }
            }
            let gnorm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gnorm < GRAD_TOL * n as f64 {
                converged = true;
                break;
            }
            let step = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&grad),
                None => break,
            };
            beta += step;
        }
        Ok(KernelLogisticModel {
            standardizer,
            alpha: beta.iter().skip(1).copied().collect(),
            intercept: beta[0],
            centers,
            sigma,
            converged,
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let xs = self.standardizer.apply(x);
        let mut t = self.intercept;
        for (a, c) in self.alpha.iter().zip(self.centers.iter()) {
            t += a * rbf(&xs, c, self.sigma);
        }
        sigmoid(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_balanced_coin_flip() {
        // Treatment independent of x with P = 0.5.
        let xs_store: Vec<Vec<f64>> = (0..2000).map(|i| vec![(i % 7) as f64 - 3.0]).collect();
        let labels: Vec<u8> = (0..2000).map(|i| ((i * 2654435761usize) >> 8) as u8 & 1).collect();
        let xs: Vec<&[f64]> = xs_store.iter().map(|v| v.as_slice()).collect();
        let m = LogisticModel::fit(&xs, &labels, None).unwrap();
        for x in xs_store.iter().take(7) {
            assert!((m.predict(x) - 0.5).abs() < 0.05);
        }
    }

    #[test]
    fn one_class_errors() {
        let xs_store: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let xs: Vec<&[f64]> = xs_store.iter().map(|v| v.as_slice()).collect();
        let labels = vec![1u8; 10];
        assert!(matches!(
            LogisticModel::fit(&xs, &labels, None),
            Err(Error::OneClassOnly(_))
        ));
    }

    #[test]
    fn separable_data_converges_to_extreme_probs() {
        let xs_store: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 - 20.0]).collect();
        let labels: Vec<u8> = (0..40).map(|i| (i >= 20) as u8).collect();
        let xs: Vec<&[f64]> = xs_store.iter().map(|v| v.as_slice()).collect();
        let m = LogisticModel::fit(&xs, &labels, None).unwrap();
        assert!(m.predict(&[-20.0]) < 0.01);
        assert!(m.predict(&[19.0]) > 0.99);
    }
}
