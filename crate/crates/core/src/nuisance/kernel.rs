//! RBF kernel utilities and kernel ridge regression.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use crate::error::{Error, Result};

/// Per-coordinate standardization fitted on training rows.
#[derive(Debug, Clone)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(xs: &[&[f64]]) -> Self {
        let n = xs.len().max(1);
        let d = xs.first().map_or(0, |x| x.len());
        let mut mean = alloc::vec![0.0; d];
        for x in xs {
            for (m, v) in mean.iter_mut().zip(x.iter()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = alloc::vec![0.0; d];
        for x in xs {
            for ((v, m), xi) in var.iter_mut().zip(mean.iter()).zip(x.iter()) {
                *v += (xi - m) * (xi - m);
            }
        }
        let scale = var
            .iter()
            .map(|v| {
                let s = (v / n as f64).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(self.scale.iter()))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Gaussian kernel `exp(-||a - b||^2 / (2 sigma^2))`.
pub fn rbf(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    let mut d2 = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        d2 += (x - y) * (x - y);
    }
    (-d2 / (2.0 * sigma * sigma)).exp()
}

/// Median pairwise distance over (at most 256) rows; floor keeps degenerate
/// inputs usable.
pub fn median_heuristic_bandwidth(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    if n < 2 {
        return 1.0;
    }
    let stride = n.div_ceil(256).max(1);
    let sub: Vec<&Vec<f64>> = rows.iter().step_by(stride).collect();
    let mut dists = Vec::new();
    for i in 0..sub.len() {
        for j in (i + 1)..sub.len() {
            let d2: f64 = sub[i]
                .iter()
                .zip(sub[j].iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d2 > 0.0 {
                dists.push(d2.sqrt());
            }
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(|a, b| a.total_cmp(b));
    dists[dists.len() / 2]
}

/// Kernel ridge regression with subsampled centers (subset of regressors).
#[derive(Debug, Clone)]
pub struct KernelRidgeModel {
    standardizer: Standardizer,
    centers: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    sigma: f64,
    pub lambda: f64,
}

/// Cross-validation grid used when no ridge level is pinned.
pub const LAMBDA_GRID: [f64; 5] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];
const MAX_CENTERS: usize = 512;

impl KernelRidgeModel {
    pub fn fit(xs: &[&[f64]], ys: &[f64], lambda: Option<f64>, bandwidth: Option<f64>) -> Result<Self> {
        let n = xs.len();
        if n == 0 {
            return Err(Error::EmptyCell("kernel ridge fit on empty sample".into()));
        }
        let standardizer = Standardizer::fit(xs);
        let rows: Vec<Vec<f64>> = xs.iter().map(|x| standardizer.apply(x)).collect();
        let sigma = bandwidth.unwrap_or_else(|| median_heuristic_bandwidth(&rows));
        let lambda = match lambda {
            Some(l) => l,
            None => Self::select_lambda(&rows, ys, sigma),
        };
        let (centers, alpha) = Self::solve(&rows, ys, sigma, lambda)?;
        Ok(KernelRidgeModel {
            standardizer,
            centers,
            alpha,
            sigma,
            lambda,
        })
    }

    fn solve(rows: &[Vec<f64>], ys: &[f64], sigma: f64, lambda: f64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let n = rows.len();
        let stride = n.div_ceil(MAX_CENTERS).max(1);
        let centers: Vec<Vec<f64>> = rows.iter().step_by(stride).cloned().collect();
        let b = centers.len();
        let mut ktk = DMatrix::<f64>::zeros(b, b);
        let mut kty = DVector::<f64>::zeros(b);
        let mut krow = alloc::vec![0.0; b];
        for (i, r) in rows.iter().enumerate() {
            for (j, c) in centers.iter().enumerate() {
                krow[j] = rbf(r, c, sigma);
            }
            for p in 0..b {
                kty[p] += krow[p] * ys[i];
                for q in p..b {
                    ktk[(p, q)] += krow[p] * krow[q];
                }
            }
        }
        for p in 0..b {
            for q in p..b {
                let reg = lambda * n as f64 * rbf(&centers[p], &centers[q], sigma);
                ktk[(p, q)] += reg;
                if p != q {
                    ktk[(q, p)] = ktk[(p, q)];
                }
            }
            ktk[(p, p)] += 1e-10 * n as f64;
        }
        let sol = ktk
            .cholesky()
            .ok_or_else(|| Error::SingularDesign("kernel system not positive definite".into()))?
            .solve(&kty);
        Ok((centers, sol.iter().copied().collect()))
    }

    fn select_lambda(rows: &[Vec<f64>], ys: &[f64], sigma: f64) -> f64 {
        let n = rows.len();
        let k = 5.min(n);
        if k < 2 {
            return LAMBDA_GRID[2];
        }
        let mut best = (f64::INFINITY, LAMBDA_GRID[2]);
        for &lam in &LAMBDA_GRID {
            let mut sse = 0.0;
            let mut ok = true;
            for fold in 0..k {
                let (mut tr_rows, mut tr_ys, mut te) = (Vec::new(), Vec::new(), Vec::new());
                for i in 0..n {
                    if i % k == fold {
                        te.push(i);
                    } else {
                        tr_rows.push(rows[i].clone());
                        tr_ys.push(ys[i]);
                    }
                }
                match Self::solve(&tr_rows, &tr_ys, sigma, lam) {
                    Ok((centers, alpha)) => {
                        for i in te {
                            let pred: f64 = centers
                                .iter()
                                .zip(alpha.iter())
                                .map(|(c, a)| a * rbf(&rows[i], c, sigma))
                                .sum();
                            sse += (pred - ys[i]) * (pred - ys[i]);
                        }
                    }
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok && sse < best.0 {
                best = (sse, lam);
            }
        }
        best.1
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let xs = self.standardizer.apply(x);
        self.centers
            .iter()
            .zip(self.alpha.iter())
            .map(|(c, a)| a * rbf(&xs, c, self.sigma))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn fits_smooth_function() {
        let xs_store: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 200.0 * 6.0 - 3.0]).collect();
        let ys: Vec<f64> = xs_store.iter().map(|v| v[0].sin()).collect();
        let xs: Vec<&[f64]> = xs_store.iter().map(|v| v.as_slice()).collect();
        let m = KernelRidgeModel::fit(&xs, &ys, Some(1e-4), None).unwrap();
        let mut worst: f64 = 0.0;
        for v in xs_store.iter() {
            worst = worst.max((m.predict(v) - v[0].sin()).abs());
        }
        assert!(worst < 0.05, "worst error {worst}");
    }

    #[test]
    fn cv_picks_a_grid_point() {
        let xs_store: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64 / 10.0]).collect();
        let ys: Vec<f64> = xs_store.iter().map(|v| 2.0 * v[0]).collect();
        let xs: Vec<&[f64]> = xs_store.iter().map(|v| v.as_slice()).collect();
        let m = KernelRidgeModel::fit(&xs, &ys, None, None).unwrap();
        assert!(LAMBDA_GRID.contains(&m.lambda));
    }
}
