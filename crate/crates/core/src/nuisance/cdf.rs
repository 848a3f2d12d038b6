//! Conditional empirical CDFs with the midpoint step convention.
//!
//! Within a covariate stratum the CDF passes through `(w_(i), (i - 0.5)/n)`
//! at the i-th order statistic with linear interpolation between knots; ties
//! collapse to their midrank. Anchor knots extend the curve to exact 0 and 1
//! one gap beyond the extreme order statistics, which keeps the generalized
//! inverse stable under composition. Discrete covariates get one CDF per
//! stratum; continuous covariates fall back to Gaussian-kernel local weights.

use alloc::vec::Vec;

use crate::data::DatasetView;
use crate::error::{Error, Result};
use crate::nuisance::kernel::Standardizer;
use crate::nuisance::Target;
use num_traits::Float;

/// Weighted empirical CDF over one stratum.
#[derive(Debug, Clone)]
pub struct Ecdf {
    /// Strictly increasing knot abscissae, with anchor points at both ends.
    knots: Vec<f64>,
    /// Knot heights in [0, 1], strictly increasing.
    heights: Vec<f64>,
}

impl Ecdf {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        Self::from_weighted(values, None)
    }

    pub fn from_weighted(values: &[f64], weights: Option<&[f64]>) -> Result<Self> {
        let mut pairs: Vec<(f64, f64)> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, weights.map_or(1.0, |w| w[i])))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        if pairs.is_empty() {
            return Err(Error::EmptyCell("empirical cdf on empty stratum".into()));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        // Collapse ties to a single knot at the midrank height.
        let mut uniq: Vec<(f64, f64)> = Vec::new();
        for (v, w) in pairs {
            match uniq.last_mut() {
                Some(last) if last.0 == v => last.1 += w,
                _ => uniq.push((v, w)),
            }
        }
        let mut knots = Vec::with_capacity(uniq.len() + 2);
        let mut heights = Vec::with_capacity(uniq.len() + 2);
        let span = if uniq.len() > 1 {
            uniq[uniq.len() - 1].0 - uniq[0].0
        } else {
            0.0
        };
        let pad = if span > 0.0 { span / uniq.len() as f64 } else { 1.0 };
        knots.push(uniq[0].0 - pad);
        heights.push(0.0);
        let mut cum = 0.0;
        for (v, w) in &uniq {
            let h = (cum + w / 2.0) / total;
            knots.push(*v);
            heights.push(h);
            cum += w;
        }
        knots.push(uniq[uniq.len() - 1].0 + pad);
        heights.push(1.0);
        Ok(Ecdf { knots, heights })
    }

    pub fn cdf(&self, w: f64) -> f64 {
        if w <= self.knots[0] {
            return 0.0;
        }
        let last = self.knots.len() - 1;
        if w >= self.knots[last] {
            return 1.0;
        }
        let j = match self.knots.binary_search_by(|k| k.total_cmp(&w)) {
            Ok(j) => return self.heights[j],
            Err(j) => j,
        };
        let (k0, k1) = (self.knots[j - 1], self.knots[j]);
        let (h0, h1) = (self.heights[j - 1], self.heights[j]);
        h0 + (h1 - h0) * (w - k0) / (k1 - k0)
    }

    /// Generalized inverse; `v` outside [0, 1] is clamped.
    pub fn quantile(&self, v: f64) -> f64 {
        let v = v.clamp(0.0, 1.0);
        let last = self.heights.len() - 1;
        if v <= self.heights[0] {
            return self.knots[0];
        }
        if v >= self.heights[last] {
            return self.knots[last];
        }
        let j = match self
            .heights
            .binary_search_by(|h| h.total_cmp(&v))
        {
            Ok(j) => return self.knots[j],
            Err(j) => j,
        };
        let (h0, h1) = (self.heights[j - 1], self.heights[j]);
        let (k0, k1) = (self.knots[j - 1], self.knots[j]);
        k0 + (k1 - k0) * (v - h0) / (h1 - h0)
    }

    /// Observed data range (excluding anchors).
    pub fn data_range(&self) -> (f64, f64) {
        (self.knots[1], self.knots[self.knots.len() - 2])
    }
}

const MAX_STRATA: usize = 64;

#[derive(Debug, Clone)]
enum CdfKind {
    /// One ECDF per unique covariate value.
    Stratified { keys: Vec<Vec<f64>>, cdfs: Vec<Ecdf> },
    /// Kernel-weighted local ECDF on standardized covariates.
    Smooth {
        standardizer: Standardizer,
        rows: Vec<Vec<f64>>,
        values: Vec<f64>,
        bandwidth: f64,
    },
}

/// Conditional CDF / quantile pair `F(w | x)`, `F^{-1}(v | x)`.
#[derive(Debug, Clone)]
pub struct ConditionalCdf {
    kind: CdfKind,
}

fn silverman(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let h = 0.9 * sd * n.powf(-0.2);
    if h > 1e-9 {
        h
    } else {
        1.0
    }
}

impl ConditionalCdf {
    /// Build from explicit (covariate, value) pairs.
    pub fn fit_pairs(xs: &[&[f64]], values: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::EmptyCell("conditional cdf fit on empty subset".into()));
        }
        // Group by exact covariate value.
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
        if keys.len() <= MAX_STRATA {
            let cdfs = groups
                .iter()
                .map(|g| Ecdf::from_values(g))
                .collect::<Result<Vec<_>>>()?;
            Ok(ConditionalCdf {
                kind: CdfKind::Stratified { keys, cdfs },
            })
        } else {
            let standardizer = Standardizer::fit(xs);
            let rows: Vec<Vec<f64>> = xs.iter().map(|x| standardizer.apply(x)).collect();
            let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
            let bandwidth = silverman(&flat) * (xs[0].len() as f64).sqrt();
            Ok(ConditionalCdf {
                kind: CdfKind::Smooth {
                    standardizer,
                    rows,
                    values: values.to_vec(),
                    bandwidth,
                },
            })
        }
    }

    /// Fit on a dataset view using one of the outcome columns.
    pub fn fit_view(view: &DatasetView<'_>, target: Target) -> Result<Self> {
        let v = view.canonical();
        let mut xs: Vec<&[f64]> = Vec::with_capacity(v.len());
        let mut vals: Vec<f64> = Vec::with_capacity(v.len());
        for (_, r) in v.iter() {
            let val = match target {
                Target::M => r.m_req()?,
                Target::Y => r.y.ok_or_else(|| {
                    Error::TargetUnavailable("long-term outcome missing in this subset".into())
                })?,
            };
            xs.push(r.x.as_slice());
            vals.push(val);
        }
        Self::fit_pairs(&xs, &vals)
    }

    fn local(&self, x: &[f64]) -> Ecdf {
        match &self.kind {
            CdfKind::Stratified { keys, cdfs } => {
                // Exact stratum when present, else nearest by squared distance.
                let mut best = (f64::INFINITY, 0usize);
                for (i, k) in keys.iter().enumerate() {
                    let d2: f64 = k
                        .iter()
                        .zip(x.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    if d2 < best.0 {
                        best = (d2, i);
                        if d2 == 0.0 {
                            break;
                        }
                    }
                }
                cdfs[best.1].clone()
            }
            CdfKind::Smooth {
                standardizer,
                rows,
                values,
                bandwidth,
            } => {
                let q = standardizer.apply(x);
                let w: Vec<f64> = rows
                    .iter()
                    .map(|r| {
                        let d2: f64 = r
                            .iter()
                            .zip(q.iter())
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum();
                        (-d2 / (2.0 * bandwidth * bandwidth)).exp()
                    })
                    .collect();
                Ecdf::from_weighted(values, Some(&w)).expect("nonempty smooth stratum")
            }
        }
    }

    pub fn cdf(&self, w: f64, x: &[f64]) -> f64 {
        self.local(x).cdf(w)
    }

    pub fn quantile(&self, v: f64, x: &[f64]) -> f64 {
        self.local(x).quantile(v)
    }

    /// Observed range of the fitted variable near `x`.
    pub fn data_range(&self, x: &[f64]) -> (f64, f64) {
        self.local(x).data_range()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn midpoint_convention_on_four_points() {
        let e = Ecdf::from_values(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((e.cdf(1.0) - 0.125).abs() < 1e-15);
        assert!((e.cdf(2.0) - 0.375).abs() < 1e-15);
        // Linear interpolation between the midpoint knots (2, 0.375), (3, 0.625).
        assert!((e.cdf(2.5) - 0.5).abs() < 1e-15);
        assert!((e.cdf(4.0) - 0.875).abs() < 1e-15);
    }

    #[test]
    fn generalized_inverse_law() {
        let vals = [0.3, -1.2, 2.2, 0.9, 0.9, 4.1];
        let e = Ecdf::from_values(&vals).unwrap();
        for &w in &vals {
            assert!(e.quantile(e.cdf(w)) <= w + 1e-12);
        }
        for i in 0..=100 {
            let v = i as f64 / 100.0;
            assert!(e.cdf(e.quantile(v)) >= v - 1e-12);
        }
    }

    #[test]
    fn ties_collapse_to_midrank() {
        let e = Ecdf::from_values(&[1.0, 1.0, 1.0, 5.0]).unwrap();
        // Three tied points carry ranks 1..3: midrank height (0 + 1.5)/4.
        assert!((e.cdf(1.0) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn uniform_sample_close_to_identity() {
        // Deterministic low-discrepancy stand-in for a uniform sample.
        let n = 100_000;
        let vals: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let e = Ecdf::from_values(&vals).unwrap();
        let mut sup: f64 = 0.0;
        for i in 0..=1000 {
            let w = i as f64 / 1000.0;
            sup = sup.max((e.cdf(w) - w).abs());
        }
        assert!(sup < 0.01, "sup deviation {sup}");
    }

    #[test]
    fn stratified_lookup() {
        let xs_store: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![if i % 2 == 0 { 0.0 } else { 1.0 }])
            .collect();
        let vals: Vec<f64> = (0..40)
            .map(|i| if i % 2 == 0 { i as f64 } else { 1000.0 + i as f64 })
            .collect();
        let xs: Vec<&[f64]> = xs_store.iter().map(|v| v.as_slice()).collect();
        let c = ConditionalCdf::fit_pairs(&xs, &vals).unwrap();
        assert!(c.cdf(500.0, &[0.0]) == 1.0);
        assert!(c.cdf(500.0, &[1.0]) == 0.0);
    }

    #[test]
    fn monotone_in_w_across_random_strata() {
        let xs_store: Vec<Vec<f64>> = (0..300).map(|i| vec![(i % 3) as f64]).collect();
        let vals: Vec<f64> = (0..300).map(|i| ((i * 37 % 91) as f64) * 0.11 - 3.0).collect();
        let xs: Vec<&[f64]> = xs_store.iter().map(|v| v.as_slice()).collect();
        let c = ConditionalCdf::fit_pairs(&xs, &vals).unwrap();
        for s in 0..3 {
            let x = [s as f64];
            let mut prev = -1.0;
            for g in 0..100 {
                let w = -4.0 + g as f64 * 0.15;
                let v = c.cdf(w, &x);
                assert!(v >= prev - 1e-15);
                prev = v;
            }
        }
    }
}
