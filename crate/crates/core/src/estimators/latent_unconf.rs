//! Nested-regression baseline: regress the long-term outcome on the
//! short-term outcome and covariates in the observational domain, project the
//! fit onto the experimental arm distribution, then average over the
//! observational covariates.

use alloc::vec::Vec;

use crate::data::{DomainTag, FusedDataset};
use crate::error::{Error, Result};
use crate::estimators::{p_a1_given_o, Estimand, EstimateReport};
use crate::nuisance::{fit_mean_xs, ConditionalMean, NuisanceConfig};

/// Inner fit on observational rows of one arm, outer fit of its predictions
/// on experimental rows of the same arm.
#[derive(Debug, Clone)]
pub struct NestedRegression {
    pub inner: ConditionalMean,
    pub outer: ConditionalMean,
}

impl NestedRegression {
    /// Evaluate the projected regression at a covariate point.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.outer.predict(x)
    }
}

/// Fit the nested pair for arm `a`. `inner_transform` post-multiplies the
/// inner predictions (used by the robustness audit to corrupt this stage).
pub fn fit_nested_with(
    data: &FusedDataset,
    a: u8,
    config: &NuisanceConfig,
    inner_transform: Option<(f64, f64)>,
) -> Result<NestedRegression> {
    let vo = data.split(DomainTag::Observational, Some(a)).canonical();
    if vo.is_empty() {
        return Err(Error::EmptyCell("no observational rows in this arm".into()));
    }
    let mut feats: Vec<Vec<f64>> = Vec::with_capacity(vo.len());
    let mut ys: Vec<f64> = Vec::with_capacity(vo.len());
    for (_, r) in vo.iter() {
        let mut f = Vec::with_capacity(1 + r.x.len());
        f.push(r.m_req()?);
        f.extend_from_slice(&r.x);
        feats.push(f);
        ys.push(r.y.expect("observational rows carry y"));
    }
    let refs: Vec<&[f64]> = feats.iter().map(|v| v.as_slice()).collect();
    let inner = fit_mean_xs(&refs, &ys, config)?;
    let (scale, shift) = inner_transform.unwrap_or((1.0, 0.0));

    let ve = data.split(DomainTag::Experimental, Some(a)).canonical();
    if ve.is_empty() {
        return Err(Error::EmptyCell("no experimental rows in this arm".into()));
    }
    let mut xs: Vec<&[f64]> = Vec::with_capacity(ve.len());
    let mut pseudo: Vec<f64> = Vec::with_capacity(ve.len());
    let mut feat = Vec::new();
    for (_, r) in ve.iter() {
        feat.clear();
        feat.push(r.m_req()?);
        feat.extend_from_slice(&r.x);
        xs.push(r.x.as_slice());
        pseudo.push(scale * inner.predict(&feat) + shift);
    }
    let outer = fit_mean_xs(&xs, &pseudo, config)?;
    Ok(NestedRegression { inner, outer })
}

pub fn fit_nested(data: &FusedDataset, a: u8, config: &NuisanceConfig) -> Result<NestedRegression> {
    fit_nested_with(data, a, config, None)
}

/// ATE as the observational average of the arm-wise projected regressions.
pub fn ate_latent_unconf(data: &FusedDataset, config: &NuisanceConfig) -> Result<EstimateReport> {
    let nr1 = fit_nested(data, 1, config)?;
    let nr0 = fit_nested(data, 0, config)?;
    ate_from_nested(data, &nr1, &nr0)
}

pub fn ate_from_nested(
    data: &FusedDataset,
    nr1: &NestedRegression,
    nr0: &NestedRegression,
) -> Result<EstimateReport> {
    let est = data
        .split(DomainTag::Observational, None)
        .mean(|r| nr1.predict(&r.x) - nr0.predict(&r.x))?;
    Ok(EstimateReport::new(est, Estimand::Ate, "latent-unconf", data))
}

/// ETT from the same projection of the control arm.
pub fn ett_latent_unconf(data: &FusedDataset, config: &NuisanceConfig) -> Result<EstimateReport> {
    let nr0 = fit_nested(data, 0, config)?;
    ett_from_nested(data, &nr0)
}

pub fn ett_from_nested(data: &FusedDataset, nr0: &NestedRegression) -> Result<EstimateReport> {
    let p1 = p_a1_given_o(data)?;
    let o = data.split(DomainTag::Observational, None);
    let y1 = o.split(DomainTag::Observational, Some(1)).mean(|r| {
        r.y.expect("observational rows carry y")
    })?;
    let y0 = o.split(DomainTag::Observational, Some(0)).mean(|r| {
        r.y.expect("observational rows carry y")
    })?;
    let proj0 = o.mean(|r| nr0.predict(&r.x))?;
    let est = y1 - proj0 / p1 + (1.0 - p1) / p1 * y0;
    Ok(EstimateReport::new(est, Estimand::Ett, "latent-unconf", data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{generate, DgpSpec, DgpTag, LatentUnconfParams};

    #[test]
    fn recovers_effect_on_noiseless_linear_world() {
        let spec = DgpSpec::by_name("latent-unconf", 20_000, 42).unwrap();
        let data = generate(&spec).unwrap();
        let cfg = NuisanceConfig::default();
        let ate = ate_latent_unconf(&data, &cfg).unwrap();
        assert!((ate.estimate - 1.5).abs() < 0.05, "ate {}", ate.estimate);
        let ett = ett_latent_unconf(&data, &cfg).unwrap();
        assert!((ett.estimate - 1.5).abs() < 0.08, "ett {}", ett.estimate);
    }

    #[test]
    fn null_effect_recovered() {
        let p = LatentUnconfParams {
            theta_m: 0.0,
            theta_y: 0.0,
            ..LatentUnconfParams::default()
        };
        let data = generate(&DgpSpec::new(DgpTag::LatentUnconf(p), 20_000, 43)).unwrap();
        let cfg = NuisanceConfig::default();
        let ate = ate_latent_unconf(&data, &cfg).unwrap();
        assert!(ate.estimate.abs() < 0.05, "ate {}", ate.estimate);
    }

    #[test]
    fn heterogeneous_effect_separates_ett_from_ate() {
        use crate::simgen::{ground_truth, TruthMethod};
        let p = LatentUnconfParams {
            phi: 0.8,
            ..LatentUnconfParams::default()
        };
        let spec = DgpSpec::new(DgpTag::LatentUnconf(p), 60_000, 44);
        let truth = ground_truth(&spec, TruthMethod::CounterfactualMc(400_000)).unwrap();
        assert!((truth.ate - truth.ett).abs() > 0.1);
        let data = generate(&spec).unwrap();
        let cfg = NuisanceConfig::default();
        let ate = ate_latent_unconf(&data, &cfg).unwrap();
        let ett = ett_latent_unconf(&data, &cfg).unwrap();
        assert!((ate.estimate - truth.ate).abs() < 0.08, "{} vs {}", ate.estimate, truth.ate);
        assert!((ett.estimate - truth.ett).abs() < 0.08, "{} vs {}", ett.estimate, truth.ett);
    }
}
