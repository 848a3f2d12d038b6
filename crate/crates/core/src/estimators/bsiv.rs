//! Bespoke-instrument estimators for a binary auxiliary confounder, with and
//! without the short-term outcome observed in the observational domain.
//!
//! All conditional means here condition on the instrument, so they are fitted
//! per (arm, instrument) cell on the covariates, and the treatment propensity
//! is fitted per instrument level; for binary covariates this is the
//! saturated interaction model.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::data::{DatasetView, DomainTag, FusedDataset, Observation};
use crate::error::{Error, Result};
use crate::estimators::{Estimand, EstimateReport};
use crate::nuisance::{
    fit_mean_xs, fit_propensity_xs, ConditionalMean, NuisanceConfig, PropensityScore,
};

const E: DomainTag = DomainTag::Experimental;
const O: DomainTag = DomainTag::Observational;

/// Which partial homogeneity condition an estimator leans on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Homogeneity {
    /// Effect-contrast homogeneity (strong effect homogeneity for the
    /// masked-short-term variants).
    Effect,
    /// Bias-contrast homogeneity (strong bias homogeneity for the
    /// masked-short-term variants).
    Bias,
}

impl Homogeneity {
    pub fn as_str(self) -> &'static str {
        match self {
            Homogeneity::Effect => "effect",
            Homogeneity::Bias => "bias",
        }
    }
}

/// Instrument-aware tuning knobs.
#[derive(Debug, Clone)]
pub struct BsivConfig {
    pub nuisance: NuisanceConfig,
    /// Relevance floor for the instrument-propensity denominators.
    pub delta_rel: f64,
}

impl Default for BsivConfig {
    fn default() -> Self {
        BsivConfig {
            nuisance: NuisanceConfig::default(),
            delta_rel: 0.05,
        }
    }
}

fn z_index(r: &Observation) -> Result<usize> {
    match r.z {
        Some(z) if z == 0.0 => Ok(0),
        Some(z) if z == 1.0 => Ok(1),
        Some(z) => Err(Error::ZNotBinary(format!("z = {z} is not binary"))),
        None => Err(Error::NoProxy("instrument column required on this row".into())),
    }
}

fn fit_mean_on<F>(view: &DatasetView<'_>, cfg: &NuisanceConfig, target: F) -> Result<ConditionalMean>
where
    F: Fn(&Observation) -> Result<f64>,
{
    let v = view.canonical();
    if v.is_empty() {
        return Err(Error::EmptyCell("empty (arm, instrument) cell".into()));
    }
    let mut xs: Vec<&[f64]> = Vec::with_capacity(v.len());
    let mut ys: Vec<f64> = Vec::with_capacity(v.len());
    for (_, r) in v.iter() {
        xs.push(r.x.as_slice());
        ys.push(target(r)?);
    }
    fit_mean_xs(&xs, &ys, cfg)
}

/// Fitted cell regressions and instrument propensities.
pub struct BsivComponents {
    /// E[Y - M | A=a, Z=z, X, G=O]; `None` when M is masked.
    pub e_az: Option<[[ConditionalMean; 2]; 2]>,
    /// E[Y | A=a, Z=z, X, G=O].
    pub e_dag_az: [[ConditionalMean; 2]; 2],
    /// E[Y - M | Z=z, X, G=O] pooled over arms; `None` when M is masked.
    pub pooled_ym: Option<[ConditionalMean; 2]>,
    /// E[Y | Z=z, X, G=O] pooled over arms.
    pub pooled_y: [ConditionalMean; 2],
    /// E[M | A=a, Z=z, X, G=E].
    pub mu_m_e: [[ConditionalMean; 2]; 2],
    /// E[M | A=a, Z=z, X, G=O]; `None` when M is masked.
    pub mu_m_o: Option<[[ConditionalMean; 2]; 2]>,
    /// P(A=1 | Z=z, X, G=O) per instrument level.
    pub pi_z: [PropensityScore; 2],
    pub delta_rel: f64,
}

impl BsivComponents {
    /// Fit everything the observed-short-term estimators need; when
    /// `masked_m` is set, skips the regressions that read M in the
    /// observational domain.
    pub fn fit(data: &FusedDataset, config: &BsivConfig, masked_m: bool) -> Result<Self> {
        let cfg = &config.nuisance;
        let o = data.split(O, None);
        // Validate the instrument on both domains up front.
        for (_, r) in o.iter() {
            z_index(r)?;
        }
        for (_, r) in data.split(E, None).iter() {
            z_index(r)?;
        }
        let y_of = |r: &Observation| -> Result<f64> { Ok(r.y.expect("obs rows carry y")) };
        let ym_of = |r: &Observation| -> Result<f64> {
            Ok(r.y.expect("obs rows carry y") - r.m_req()?)
        };
        let m_of = |r: &Observation| r.m_req();

        fn fit_grid(
            data: &FusedDataset,
            g: DomainTag,
            cfg: &NuisanceConfig,
            target: &dyn Fn(&Observation) -> Result<f64>,
        ) -> Result<[[ConditionalMean; 2]; 2]> {
            let cell = |a: u8, z: u8| data.split(g, Some(a)).split_z(z);
            Ok([
                [
                    fit_mean_on(&cell(0, 0), cfg, target)?,
                    fit_mean_on(&cell(0, 1), cfg, target)?,
                ],
                [
                    fit_mean_on(&cell(1, 0), cfg, target)?,
                    fit_mean_on(&cell(1, 1), cfg, target)?,
                ],
            ])
        }

        let e_dag_az = fit_grid(data, O, cfg, &y_of)?;
        let pooled_y = [
            fit_mean_on(&o.split_z(0), cfg, y_of)?,
            fit_mean_on(&o.split_z(1), cfg, y_of)?,
        ];
        let (e_az, pooled_ym, mu_m_o) = if masked_m {
            (None, None, None)
        } else {
            (
                Some(fit_grid(data, O, cfg, &ym_of)?),
                Some([
                    fit_mean_on(&o.split_z(0), cfg, ym_of)?,
                    fit_mean_on(&o.split_z(1), cfg, ym_of)?,
                ]),
                Some(fit_grid(data, O, cfg, &m_of)?),
            )
        };
        let mu_m_e = fit_grid(data, E, cfg, &m_of)?;

        let mut pi_z_vec = Vec::with_capacity(2);
        for z in 0..2u8 {
            let v = o.split_z(z).canonical();
            if v.is_empty() {
                return Err(Error::EmptyCell(format!("no observational rows with z={z}")));
            }
            let mut xs: Vec<&[f64]> = Vec::with_capacity(v.len());
            let mut labels: Vec<u8> = Vec::with_capacity(v.len());
            for (_, r) in v.iter() {
                xs.push(r.x.as_slice());
                labels.push(r.a);
            }
            pi_z_vec.push(fit_propensity_xs(&xs, &labels, cfg)?);
        }
        let pi_z1 = pi_z_vec.pop().expect("two fits");
        let pi_z0 = pi_z_vec.pop().expect("two fits");

        Ok(BsivComponents {
            e_az,
            e_dag_az,
            pooled_ym,
            pooled_y,
            mu_m_e,
            mu_m_o,
            pi_z: [pi_z0, pi_z1],
            delta_rel: config.delta_rel,
        })
    }

    /// pi(z, x) = P(A=1 | Z=z, X=x, G=O).
    pub fn pi(&self, z: usize, x: &[f64]) -> f64 {
        self.pi_z[z].predict(x)
    }

    /// P_az(x).
    pub fn p_az(&self, a: usize, z: usize, x: &[f64]) -> f64 {
        let p1 = self.pi(z, x);
        if a == 1 {
            p1
        } else {
            1.0 - p1
        }
    }

    /// Denominator P_{1,1}(x) - P_{1,0}(x), checked against the relevance
    /// floor.
    fn effect_denominator(&self, x: &[f64]) -> Result<f64> {
        let d = self.pi(1, x) - self.pi(0, x);
        if d.abs() < self.delta_rel {
            return Err(Error::WeakInstrument(format!(
                "relevance margin {:.4} below the floor {:.4}",
                d.abs(),
                self.delta_rel
            )));
        }
        Ok(d)
    }

    /// Denominator P_{0,1}(x) - P_{0,0}(x).
    fn bias_denominator(&self, x: &[f64]) -> Result<f64> {
        let d = self.p_az(0, 1, x) - self.p_az(0, 0, x);
        if d.abs() < self.delta_rel {
            return Err(Error::WeakInstrument(format!(
                "relevance margin {:.4} below the floor {:.4}",
                d.abs(),
                self.delta_rel
            )));
        }
        Ok(d)
    }
}

/// Relevance diagnostics over the observational rows.
#[derive(Debug, Clone)]
pub struct RelevanceReport {
    pub min_margin: f64,
    pub mean_margin: f64,
    /// Fraction of observational rows with margin below the floor.
    pub frac_below: f64,
    pub delta_rel: f64,
    pub pass: bool,
}

/// Per-stratum instrument relevance margin |E[A|Z=1,X] - E[A|Z=0,X]|; fails
/// when more than 5% of observational rows sit below the floor.
pub fn check_relevance(
    data: &FusedDataset,
    components: &BsivComponents,
    delta_rel: f64,
) -> Result<RelevanceReport> {
    let o = data.split(O, None).canonical();
    if o.is_empty() {
        return Err(Error::EmptyCell("no observational rows".into()));
    }
    let mut min_margin = f64::INFINITY;
    let mut sum = 0.0;
    let mut below = 0usize;
    for (_, r) in o.iter() {
        z_index(r)?;
        let margin = (components.pi(1, &r.x) - components.pi(0, &r.x)).abs();
        min_margin = min_margin.min(margin);
        sum += margin;
        if margin < delta_rel {
            below += 1;
        }
    }
    let frac_below = below as f64 / o.len() as f64;
    Ok(RelevanceReport {
        min_margin,
        mean_margin: sum / o.len() as f64,
        frac_below,
        delta_rel,
        pass: frac_below <= 0.05,
    })
}

/// Trailing short-term terms shared by both observed-M ETT displays.
fn ett_m_terms(c: &BsivComponents, z: usize, x: &[f64]) -> f64 {
    let pi = c.pi(z, x);
    let mu_m_o = c.mu_m_o.as_ref().expect("M observed");
    mu_m_o[1][z].predict(x) - c.mu_m_e[0][z].predict(x) / pi
        + mu_m_o[0][z].predict(x) * (1.0 - pi) / pi
}

fn average_over<F>(view: &DatasetView<'_>, f: F) -> Result<f64>
where
    F: Fn(usize, &[f64]) -> Result<f64>,
{
    let v = view.canonical();
    if v.is_empty() {
        return Err(Error::EmptyCell("empty averaging population".into()));
    }
    let mut acc = 0.0;
    for (_, r) in v.iter() {
        acc += f(z_index(r)?, &r.x)?;
    }
    Ok(acc / v.len() as f64)
}

fn finish_report(
    data: &FusedDataset,
    components: &BsivComponents,
    est: f64,
    estimand: Estimand,
    strategy: String,
) -> Result<EstimateReport> {
    let relevance = check_relevance(data, components, components.delta_rel)?;
    let mut report = EstimateReport::new(est, estimand, &strategy, data);
    report.diagnostics.relevance_margin = Some(relevance.min_margin);
    if !relevance.pass {
        report.warnings.push(format!(
            "instrument relevance below {:.3} on {:.1}% of rows",
            relevance.delta_rel,
            relevance.frac_below * 100.0
        ));
    }
    Ok(report)
}

/// ETT with the short-term outcome observed.
pub fn ett_bsiv(
    data: &FusedDataset,
    components: &BsivComponents,
    homogeneity: Homogeneity,
) -> Result<EstimateReport> {
    let treated = data.split(O, Some(1));
    let est = match homogeneity {
        Homogeneity::Effect => {
            let pooled = components.pooled_ym.as_ref().ok_or_else(|| {
                Error::MissingNuisance("pooled Y-M regressions need M observed".into())
            })?;
            average_over(&treated, |z, x| {
                let den = components.effect_denominator(x)?;
                Ok((pooled[1].predict(x) - pooled[0].predict(x)) / den
                    + ett_m_terms(components, z, x))
            })?
        }
        Homogeneity::Bias => {
            let e = components.e_az.as_ref().ok_or_else(|| {
                Error::MissingNuisance("cell Y-M regressions need M observed".into())
            })?;
            average_over(&treated, |z, x| {
                let den = components.bias_denominator(x)?;
                let e00 = e[0][0].predict(x);
                let e01 = e[0][1].predict(x);
                let e10 = e[1][0].predict(x);
                let e11 = e[1][1].predict(x);
                Ok((e11 - e01 - e10 + e00) * z as f64 + e10 - e00 - (e01 - e00) / den
                    + ett_m_terms(components, z, x))
            })?
        }
    };
    finish_report(
        data,
        components,
        est,
        Estimand::Ett,
        format!("bsiv-ett-{}", homogeneity.as_str()),
    )
}

/// ATE with the short-term outcome observed.
pub fn ate_bsiv(
    data: &FusedDataset,
    components: &BsivComponents,
    homogeneity: Homogeneity,
) -> Result<EstimateReport> {
    let o = data.split(O, None);
    let est = match homogeneity {
        Homogeneity::Effect => {
            let pooled = components.pooled_ym.as_ref().ok_or_else(|| {
                Error::MissingNuisance("pooled Y-M regressions need M observed".into())
            })?;
            average_over(&o, |z, x| {
                let den = components.effect_denominator(x)?;
                Ok((pooled[1].predict(x) - pooled[0].predict(x)) / den
                    + components.mu_m_e[1][z].predict(x)
                    - components.mu_m_e[0][z].predict(x))
            })?
        }
        Homogeneity::Bias => {
            let e = components.e_az.as_ref().ok_or_else(|| {
                Error::MissingNuisance("cell Y-M regressions need M observed".into())
            })?;
            average_over(&o, |z, x| {
                let den = components.bias_denominator(x)?;
                let pi = components.pi(z, x);
                let e00 = e[0][0].predict(x);
                let e01 = e[0][1].predict(x);
                let e10 = e[1][0].predict(x);
                let e11 = e[1][1].predict(x);
                Ok((e11 - e01 - e10 + e00) * z as f64 + e10 - e00
                    - ((e01 - e00) * pi + (e11 - e10) * (1.0 - pi)) / den
                    + components.mu_m_e[1][z].predict(x)
                    - components.mu_m_e[0][z].predict(x))
            })?
        }
    };
    finish_report(
        data,
        components,
        est,
        Estimand::Ate,
        format!("bsiv-ate-{}", homogeneity.as_str()),
    )
}

/// omega-dagger_a(x): instrument contrast of the experimental short-term
/// regression.
fn omega_dag(c: &BsivComponents, a: usize, x: &[f64]) -> f64 {
    c.mu_m_e[a][1].predict(x) - c.mu_m_e[a][0].predict(x)
}

/// ETT with the short-term outcome unobserved in the observational domain.
pub fn ett_bsiv_no_m(
    data: &FusedDataset,
    components: &BsivComponents,
    homogeneity: Homogeneity,
) -> Result<EstimateReport> {
    let treated = data.split(O, Some(1));
    let est = match homogeneity {
        Homogeneity::Effect => average_over(&treated, |_z, x| {
            let den = components.effect_denominator(x)?;
            Ok((components.pooled_y[1].predict(x) - components.pooled_y[0].predict(x)
                - omega_dag(components, 0, x))
                / den)
        })?,
        Homogeneity::Bias => average_over(&treated, |z, x| {
            let den = components.bias_denominator(x)?;
            let e = &components.e_dag_az;
            let e00 = e[0][0].predict(x);
            let e01 = e[0][1].predict(x);
            let e10 = e[1][0].predict(x);
            let e11 = e[1][1].predict(x);
            Ok((e11 - e01 - e10 + e00) * z as f64 + e10 - e00
                - (e01 - e00 - omega_dag(components, 0, x)) / den)
        })?,
    };
    finish_report(
        data,
        components,
        est,
        Estimand::Ett,
        format!("bsiv-ett-nom-{}", homogeneity.as_str()),
    )
}

/// ATE with the short-term outcome unobserved in the observational domain.
pub fn ate_bsiv_no_m(
    data: &FusedDataset,
    components: &BsivComponents,
    homogeneity: Homogeneity,
) -> Result<EstimateReport> {
    let o = data.split(O, None);
    let est = match homogeneity {
        Homogeneity::Effect => average_over(&o, |z, x| {
            let den = components.effect_denominator(x)?;
            let pi = components.pi(z, x);
            Ok((components.pooled_y[1].predict(x) - components.pooled_y[0].predict(x)
                - omega_dag(components, 0, x) * pi
                - omega_dag(components, 1, x) * (1.0 - pi))
                / den)
        })?,
        Homogeneity::Bias => average_over(&o, |z, x| {
            let den = components.bias_denominator(x)?;
            let pi = components.pi(z, x);
            let e = &components.e_dag_az;
            let e00 = e[0][0].predict(x);
            let e01 = e[0][1].predict(x);
            let e10 = e[1][0].predict(x);
            let e11 = e[1][1].predict(x);
            Ok((e11 - e01 - e10 + e00) * z as f64 + e10 - e00
                - ((e01 - e00 - omega_dag(components, 0, x)) * pi
                    + (e11 - e10 - omega_dag(components, 1, x)) * (1.0 - pi))
                    / den)
        })?,
    };
    finish_report(
        data,
        components,
        est,
        Estimand::Ate,
        format!("bsiv-ate-nom-{}", homogeneity.as_str()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{generate, ground_truth, DgpSpec, TruthMethod};

    fn setup(n: usize, seed: u64) -> (FusedDataset, BsivComponents) {
        let spec = DgpSpec::by_name("bsiv", n, seed).unwrap();
        let data = generate(&spec).unwrap();
        let comps = BsivComponents::fit(&data, &BsivConfig::default(), false).unwrap();
        (data, comps)
    }

    #[test]
    fn relevance_passes_on_strong_instrument() {
        let (data, comps) = setup(20_000, 51);
        let rep = check_relevance(&data, &comps, 0.05).unwrap();
        assert!(rep.pass, "min margin {}", rep.min_margin);
        assert!(rep.min_margin > 0.1);
    }

    #[test]
    fn both_homogeneity_routes_recover_truth() {
        let spec = DgpSpec::by_name("bsiv", 60_000, 52).unwrap();
        let truth = ground_truth(&spec, TruthMethod::ClosedForm).unwrap();
        let data = generate(&spec).unwrap();
        let comps = BsivComponents::fit(&data, &BsivConfig::default(), false).unwrap();
        for h in [Homogeneity::Effect, Homogeneity::Bias] {
            let ett = ett_bsiv(&data, &comps, h).unwrap();
            assert!(
                (ett.estimate - truth.ett).abs() < 0.12,
                "{h:?} ett {} vs {}",
                ett.estimate,
                truth.ett
            );
            let ate = ate_bsiv(&data, &comps, h).unwrap();
            assert!(
                (ate.estimate - truth.ate).abs() < 0.12,
                "{h:?} ate {} vs {}",
                ate.estimate,
                truth.ate
            );
        }
    }

    #[test]
    fn masked_short_term_routes_recover_truth() {
        let spec = DgpSpec::by_name("bsiv", 60_000, 53).unwrap();
        let truth = ground_truth(&spec, TruthMethod::ClosedForm).unwrap();
        let data = generate(&spec).unwrap();
        let comps = BsivComponents::fit(&data, &BsivConfig::default(), true).unwrap();
        for h in [Homogeneity::Effect, Homogeneity::Bias] {
            let ett = ett_bsiv_no_m(&data, &comps, h).unwrap();
            assert!(
                (ett.estimate - truth.ett).abs() < 0.15,
                "{h:?} ett {} vs {}",
                ett.estimate,
                truth.ett
            );
            let ate = ate_bsiv_no_m(&data, &comps, h).unwrap();
            assert!(
                (ate.estimate - truth.ate).abs() < 0.15,
                "{h:?} ate {} vs {}",
                ate.estimate,
                truth.ate
            );
        }
    }
}
