//! Conditional density / mass estimation for the short-term outcome.

use alloc::vec::Vec;

use crate::data::DatasetView;
use crate::error::{Error, Result};
use num_traits::Float;

/// Support detected or requested for the short-term outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone)]
enum DensityKind {
    /// Stratified relative frequencies over a small set of levels.
    Discrete {
        levels: Vec<f64>,
        keys: Vec<Vec<f64>>,
        pmf: Vec<Vec<f64>>,
    },
    /// Gaussian-kernel density per covariate stratum, Silverman bandwidth.
    Continuous {
        keys: Vec<Vec<f64>>,
        samples: Vec<Vec<f64>>,
        bandwidths: Vec<f64>,
    },
}

/// `p(m | a, x)` fitted on one (arm, domain) cell.
#[derive(Debug, Clone)]
pub struct ConditionalDensity {
    kind: DensityKind,
}

fn group_by_x<'a>(xs: &[&'a [f64]], values: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| {
        for (a, b) in xs[i].iter().zip(xs[j].iter()) {
            let c = a.total_cmp(b);
            if c != core::cmp::Ordering::Equal {
                return c;
            }
        }
        values[i].total_cmp(&values[j])
    });
    let mut keys: Vec<Vec<f64>> = Vec::new();
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for &i in &order {
        if keys.last().map_or(true, |k| k.as_slice() != xs[i]) {
            keys.push(xs[i].to_vec());
            groups.push(Vec::new());
        }
        groups.last_mut().unwrap().push(values[i]);
    }
    (keys, groups)
}

impl ConditionalDensity {
    pub fn fit_pairs(
        xs: &[&[f64]],
        values: &[f64],
        support: Option<Support>,
        max_levels: usize,
    ) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::EmptyCell("density fit on empty subset".into()));
        }
        let mut levels: Vec<f64> = values.to_vec();
        levels.sort_by(|a, b| a.total_cmp(b));
        levels.dedup();
        let support = support.unwrap_or(if levels.len() <= max_levels {
            Support::Discrete
        } else {
            Support::Continuous
        });
        match support {
            Support::Discrete => {
                if levels.len() > max_levels {
                    return Err(Error::TooManyLevels(alloc::format!(
                        "{} distinct levels exceed the cap of {max_levels}",
                        levels.len()
                    )));
                }
                let (keys, groups) = group_by_x(xs, values);
                let pmf = groups
                    .iter()
                    .map(|g| {
                        let mut p = alloc::vec![0.0; levels.len()];
                        for v in g {
                            let j = levels
                                .iter()
                                .position(|l| l == v)
                                .expect("level present");
                            p[j] += 1.0;
                        }
                        let n = g.len() as f64;
                        for q in &mut p {
                            *q /= n;
                        }
                        p
                    })
                    .collect();
                Ok(ConditionalDensity {
                    kind: DensityKind::Discrete { levels, keys, pmf },
                })
            }
            Support::Continuous => {
                let (keys, groups) = group_by_x(xs, values);
                let bandwidths = groups
                    .iter()
                    .map(|g| {
                        let n = g.len() as f64;
                        let mean = g.iter().sum::<f64>() / n;
                        let sd =
                            (g.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
                        let h = 0.9 * sd * n.powf(-0.2);
                        if h > 1e-9 {
                            h
                        } else {
                            1e-3
                        }
                    })
                    .collect();
                Ok(ConditionalDensity {
                    kind: DensityKind::Continuous {
                        keys,
                        samples: groups,
                        bandwidths,
                    },
                })
            }
        }
    }

    pub fn fit_view(view: &DatasetView<'_>, support: Option<Support>, max_levels: usize) -> Result<Self> {
        let v = view.canonical();
        let mut xs: Vec<&[f64]> = Vec::with_capacity(v.len());
        let mut vals: Vec<f64> = Vec::with_capacity(v.len());
        for (_, r) in v.iter() {
            xs.push(r.x.as_slice());
            vals.push(r.m_req()?);
        }
        Self::fit_pairs(&xs, &vals, support, max_levels)
    }

    fn stratum(keys: &[Vec<f64>], x: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0usize);
        for (i, k) in keys.iter().enumerate() {
            let d2: f64 = k.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < best.0 {
                best = (d2, i);
                if d2 == 0.0 {
                    break;
                }
            }
        }
        best.1
    }

    /// Mass at a level (discrete) or density (continuous).
    pub fn pdf_or_pmf(&self, m: f64, x: &[f64]) -> f64 {
        match &self.kind {
            DensityKind::Discrete { levels, keys, pmf } => {
                let s = Self::stratum(keys, x);
                levels
                    .iter()
                    .position(|l| *l == m)
                    .map_or(0.0, |j| pmf[s][j])
            }
            DensityKind::Continuous {
                keys,
                samples,
                bandwidths,
            } => {
                let s = Self::stratum(keys, x);
                let h = bandwidths[s];
                let norm = 1.0 / ((2.0 * core::f64::consts::PI).sqrt() * h);
                let g = &samples[s];
                g.iter()
                    .map(|v| norm * (-(m - v) * (m - v) / (2.0 * h * h)).exp())
                    .sum::<f64>()
                    / g.len() as f64
            }
        }
    }

    /// Deterministically wrong variant used by the robustness audit: discrete
    /// masses are exponentially tilted across level indices (renormalized),
    /// continuous samples are location-shifted by the rate.
    pub fn tilted(&self, rate: f64) -> Self {
        match &self.kind {
            DensityKind::Discrete { levels, keys, pmf } => {
                let pmf = pmf
                    .iter()
                    .map(|p| {
                        let mut t: Vec<f64> = p
                            .iter()
                            .enumerate()
                            .map(|(j, &v)| v * (rate * j as f64).exp())
                            .collect();
                        let total: f64 = t.iter().sum();
                        for v in &mut t {
                            *v /= total;
                        }
                        t
                    })
                    .collect();
                ConditionalDensity {
                    kind: DensityKind::Discrete {
                        levels: levels.clone(),
                        keys: keys.clone(),
                        pmf,
                    },
                }
            }
            DensityKind::Continuous {
                keys,
                samples,
                bandwidths,
            } => ConditionalDensity {
                kind: DensityKind::Continuous {
                    keys: keys.clone(),
                    samples: samples
                        .iter()
                        .map(|g| g.iter().map(|v| v + rate).collect())
                        .collect(),
                    bandwidths: bandwidths.clone(),
                },
            },
        }
    }

    /// Distinct levels when the support is discrete.
    pub fn levels(&self) -> Option<&[f64]> {
        match &self.kind {
            DensityKind::Discrete { levels, .. } => Some(levels),
            DensityKind::Continuous { .. } => None,
        }
    }

    /// Quadrature nodes and weights for integrating against `p(m | x)`:
    /// the levels themselves (discrete) or a 101-point grid spanning the
    /// observed range plus three bandwidths (continuous).
    pub fn integration_grid(&self, x: &[f64]) -> Vec<(f64, f64)> {
        match &self.kind {
            DensityKind::Discrete { levels, keys, pmf } => {
                let s = Self::stratum(keys, x);
                levels
                    .iter()
                    .zip(pmf[s].iter())
                    .map(|(&l, &p)| (l, p))
                    .collect()
            }
            DensityKind::Continuous {
                keys,
                samples,
                bandwidths,
            } => {
                let s = Self::stratum(keys, x);
                let h = bandwidths[s];
                let lo = samples[s].iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
                let hi = samples[s]
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max)
                    + 3.0 * h;
                let k = 101usize;
                let step = (hi - lo) / (k - 1) as f64;
                (0..k)
                    .map(|i| {
                        let m = lo + i as f64 * step;
                        let w = if i == 0 || i == k - 1 { 0.5 } else { 1.0 } * step;
                        (m, w * self.pdf_or_pmf(m, x))
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn single_level_pmf_is_one() {
        let xs_store: Vec<Vec<f64>> = (0..5).map(|_| vec![0.0]).collect();
        let xs: Vec<&[f64]> = xs_store.iter().map(|v| v.as_slice()).collect();
        let d = ConditionalDensity::fit_pairs(&xs, &[2.0; 5], None, 32).unwrap();
        assert_eq!(d.pdf_or_pmf(2.0, &[0.0]), 1.0);
        assert_eq!(d.pdf_or_pmf(3.0, &[0.0]), 0.0);
    }

    #[test]
    fn pmf_normalizes_per_stratum() {
        let xs_store: Vec<Vec<f64>> = (0..90).map(|i| vec![(i % 3) as f64]).collect();
        let vals: Vec<f64> = (0..90).map(|i| (i % 5) as f64).collect();
        let xs: Vec<&[f64]> = xs_store.iter().map(|v| v.as_slice()).collect();
        let d = ConditionalDensity::fit_pairs(&xs, &vals, None, 32).unwrap();
        for s in 0..3 {
            let x = [s as f64];
            let total: f64 = (0..5).map(|l| d.pdf_or_pmf(l as f64, &x)).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn too_many_levels_rejected() {
        let xs_store: Vec<Vec<f64>> = (0..100).map(|_| vec![0.0]).collect();
        let vals: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let xs: Vec<&[f64]> = xs_store.iter().map(|v| v.as_slice()).collect();
        assert!(matches!(
            ConditionalDensity::fit_pairs(&xs, &vals, Some(Support::Discrete), 32),
            Err(Error::TooManyLevels(_))
        ));
        // Auto-detection falls back to the continuous path instead.
        assert!(ConditionalDensity::fit_pairs(&xs, &vals, None, 32).is_ok());
    }

    #[test]
    fn continuous_grid_integrates_to_one() {
        let xs_store: Vec<Vec<f64>> = (0..400).map(|_| vec![0.0]).collect();
        let vals: Vec<f64> = (0..400).map(|i| ((i * 61 % 397) as f64) / 100.0).collect();
        let xs: Vec<&[f64]> = xs_store.iter().map(|v| v.as_slice()).collect();
        let d = ConditionalDensity::fit_pairs(&xs, &vals, Some(Support::Continuous), 32).unwrap();
        let total: f64 = d.integration_grid(&[0.0]).iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 0.02, "total {total}");
    }
}
