//! Plug-in estimators under additive equi-confounding, in marginal and
//! conditional-on-covariates form.
//!
//! The marginal forms need only the experimental short-term regression plus
//! empirical arm frequencies; the conditional forms add the observational
//! regressions and the observational propensity. The term "E-projection"
//! below always means evaluating the experimentally fitted regression on the
//! observational covariate distribution.

use crate::data::{DomainTag, FusedDataset};
use crate::error::{Error, Result};
use crate::estimators::{p_a1_given_o, Estimand, EstimateReport};
use crate::nuisance::{NuisanceSet, Requirements, Target};

const E: DomainTag = DomainTag::Experimental;
const O: DomainTag = DomainTag::Observational;

/// Nuisances needed by the marginal estimators.
pub fn requirements_marginal(estimand: Estimand) -> Requirements {
    let means = match estimand {
        Estimand::Ett => alloc::vec![(Target::M, 0, E)],
        Estimand::Ate => alloc::vec![(Target::M, 0, E), (Target::M, 1, E)],
    };
    Requirements {
        means,
        ..Requirements::default()
    }
}

/// Nuisances needed by the conditional estimators.
pub fn requirements_conditional(estimand: Estimand) -> Requirements {
    let means = match estimand {
        Estimand::Ett => alloc::vec![
            (Target::M, 0, E),
            (Target::M, 0, O),
            (Target::Y, 0, O),
        ],
        Estimand::Ate => alloc::vec![
            (Target::M, 0, E),
            (Target::M, 1, E),
            (Target::M, 0, O),
            (Target::M, 1, O),
            (Target::Y, 0, O),
            (Target::Y, 1, O),
        ],
    };
    Requirements {
        means,
        pi_o: matches!(estimand, Estimand::Ett),
        ..Requirements::default()
    }
}

/// Identified counterfactual mean E[M^{(a)} | X=x, A=1-a, G=O], with a flag
/// for a propensity denominator caught at the trim boundary.
pub fn cf_mean_m_conditional(
    nuisances: &NuisanceSet,
    a: u8,
    x: &[f64],
) -> Result<(f64, bool)> {
    let pi = nuisances.pi_o()?.predict(x);
    let trim = nuisances.pi_o()?.trim();
    let p_a = if a == 1 { pi } else { 1.0 - pi };
    let p_other = 1.0 - p_a;
    let trimmed = p_other <= trim || p_other >= 1.0 - trim;
    let mu_e = nuisances.mean(Target::M, a, E)?.predict(x);
    let mu_o = nuisances.mean(Target::M, a, O)?.predict(x);
    Ok(((mu_e - mu_o * p_a) / p_other, trimmed))
}

/// Marginal ETT: difference-in-differences with the control-arm short-term
/// counterfactual anchored by the experimental regression.
pub fn ett_equiconf_marginal(
    data: &FusedDataset,
    nuisances: &NuisanceSet,
) -> Result<EstimateReport> {
    let p1 = p_a1_given_o(data)?;
    if p1 <= 0.0 || p1 >= 1.0 {
        return Err(Error::PositivityViolation(
            "p(A=1 | G=O) degenerate".into(),
        ));
    }
    let o = data.split(O, None);
    let y1 = o.split(O, Some(1)).mean(|r| r.y.expect("obs rows carry y"))?;
    let y0 = o.split(O, Some(0)).mean(|r| r.y.expect("obs rows carry y"))?;
    let m0 = o.split(O, Some(0)).mean(|r| r.m.expect("m required"))?;
    let mu = nuisances.mean(Target::M, 0, E)?;
    let projected = o.mean(|r| mu.predict(&r.x))?;
    let est = y1 - y0 + m0 - (projected - m0 * (1.0 - p1)) / p1;
    Ok(EstimateReport::new(est, Estimand::Ett, "equiconf-marg-ett", data))
}

/// Marginal ATE: observed contrast corrected by the experimental-vs-
/// observational short-term contrasts.
pub fn ate_equiconf_marginal(
    data: &FusedDataset,
    nuisances: &NuisanceSet,
) -> Result<EstimateReport> {
    let o = data.split(O, None);
    let y1 = o.split(O, Some(1)).mean(|r| r.y.expect("obs rows carry y"))?;
    let y0 = o.split(O, Some(0)).mean(|r| r.y.expect("obs rows carry y"))?;
    let m1 = o.split(O, Some(1)).mean(|r| r.m.expect("m required"))?;
    let m0 = o.split(O, Some(0)).mean(|r| r.m.expect("m required"))?;
    let mu1 = nuisances.mean(Target::M, 1, E)?;
    let mu0 = nuisances.mean(Target::M, 0, E)?;
    let projected = o.mean(|r| mu1.predict(&r.x) - mu0.predict(&r.x))?;
    let est = y1 - y0 + projected - m1 + m0;
    Ok(EstimateReport::new(est, Estimand::Ate, "equiconf-marg-ate", data))
}

/// Conditional ETT: average over treated observational rows of the
/// covariate-wise corrected contrast.
pub fn ett_equiconf_conditional(
    data: &FusedDataset,
    nuisances: &NuisanceSet,
) -> Result<EstimateReport> {
    let treated = data.split(O, Some(1)).canonical();
    if treated.is_empty() {
        return Err(Error::EmptyCell("no treated observational rows".into()));
    }
    let mu_m_e = nuisances.mean(Target::M, 0, E)?;
    let mu_m_o = nuisances.mean(Target::M, 0, O)?;
    let mu_y_o = nuisances.mean(Target::Y, 0, O)?;
    let pi = nuisances.pi_o()?;
    let trim = pi.trim();
    let mut acc = 0.0;
    let mut trim_hits = 0usize;
    for (i, r) in treated.iter() {
        let p = pi.at_row(nuisances.folds(), i as usize, &r.x);
        if p <= trim || p >= 1.0 - trim {
            trim_hits += 1;
        }
        let i = i as usize;
        acc += r.y.expect("obs rows carry y")
            + (mu_m_o.at_row(nuisances.folds(), i, &r.x)
                - mu_m_e.at_row(nuisances.folds(), i, &r.x))
                / p
            - mu_y_o.at_row(nuisances.folds(), i, &r.x);
    }
    let mut report = EstimateReport::new(
        acc / treated.len() as f64,
        Estimand::Ett,
        "equiconf-cond-ett",
        data,
    );
    report.diagnostics.trim_hits = trim_hits;
    Ok(report)
}

/// Conditional ATE: six-regression contrast averaged over the observational
/// covariates.
pub fn ate_equiconf_conditional(
    data: &FusedDataset,
    nuisances: &NuisanceSet,
) -> Result<EstimateReport> {
    let o = data.split(O, None).canonical();
    if o.is_empty() {
        return Err(Error::EmptyCell("no observational rows".into()));
    }
    let mu_y1 = nuisances.mean(Target::Y, 1, O)?;
    let mu_y0 = nuisances.mean(Target::Y, 0, O)?;
    let mu_me1 = nuisances.mean(Target::M, 1, E)?;
    let mu_me0 = nuisances.mean(Target::M, 0, E)?;
    let mu_mo1 = nuisances.mean(Target::M, 1, O)?;
    let mu_mo0 = nuisances.mean(Target::M, 0, O)?;
    let folds = nuisances.folds();
    let mut acc = 0.0;
    for (i, r) in o.iter() {
        let i = i as usize;
        acc += mu_y1.at_row(folds, i, &r.x) - mu_y0.at_row(folds, i, &r.x)
            + mu_me1.at_row(folds, i, &r.x)
            - mu_me0.at_row(folds, i, &r.x)
            + mu_mo0.at_row(folds, i, &r.x)
            - mu_mo1.at_row(folds, i, &r.x);
    }
    Ok(EstimateReport::new(
        acc / o.len() as f64,
        Estimand::Ate,
        "equiconf-cond-ate",
        data,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nuisance::NuisanceConfig;
    use crate::simgen::{generate, ground_truth, DgpSpec, DgpTag, EquiConfParams, TruthMethod};

    fn fit(data: &FusedDataset, req: Requirements) -> NuisanceSet {
        NuisanceSet::fit(data, &req, &NuisanceConfig::default()).unwrap()
    }

    #[test]
    fn marginal_estimators_recover_truth() {
        let spec = DgpSpec::by_name("equiconf-marg", 40_000, 21).unwrap();
        let truth = ground_truth(&spec, TruthMethod::ClosedForm).unwrap();
        let data = generate(&spec).unwrap();
        let ett = ett_equiconf_marginal(&data, &fit(&data, requirements_marginal(Estimand::Ett)))
            .unwrap();
        assert!((ett.estimate - truth.ett).abs() < 0.08, "{}", ett.estimate);
        let ate = ate_equiconf_marginal(&data, &fit(&data, requirements_marginal(Estimand::Ate)))
            .unwrap();
        assert!((ate.estimate - truth.ate).abs() < 0.08, "{}", ate.estimate);
    }

    #[test]
    fn conditional_estimators_recover_truth() {
        let spec = DgpSpec::by_name("equiconf-cond", 40_000, 22).unwrap();
        let truth = ground_truth(&spec, TruthMethod::ClosedForm).unwrap();
        let data = generate(&spec).unwrap();
        let ett =
            ett_equiconf_conditional(&data, &fit(&data, requirements_conditional(Estimand::Ett)))
                .unwrap();
        assert!((ett.estimate - truth.ett).abs() < 0.08, "{}", ett.estimate);
        let ate =
            ate_equiconf_conditional(&data, &fit(&data, requirements_conditional(Estimand::Ate)))
                .unwrap();
        assert!((ate.estimate - truth.ate).abs() < 0.08, "{}", ate.estimate);
    }

    #[test]
    fn randomized_identical_domains_matches_naive_contrast() {
        let p = EquiConfParams::marginal().randomized();
        let spec = DgpSpec::new(DgpTag::EquiConfMarg(p), 40_000, 23);
        let data = generate(&spec).unwrap();
        let o = data.split(DomainTag::Observational, None);
        let naive = o
            .split(DomainTag::Observational, Some(1))
            .mean(|r| r.y.unwrap())
            .unwrap()
            - o.split(DomainTag::Observational, Some(0))
                .mean(|r| r.y.unwrap())
                .unwrap();
        let est = ett_equiconf_marginal(&data, &fit(&data, requirements_marginal(Estimand::Ett)))
            .unwrap();
        assert!((est.estimate - naive).abs() < 0.06, "{} vs {naive}", est.estimate);
    }

    #[test]
    fn null_effect_recovered() {
        let p = EquiConfParams::marginal().with_effect(0.0);
        let spec = DgpSpec::new(DgpTag::EquiConfMarg(p), 40_000, 24);
        let data = generate(&spec).unwrap();
        let ate = ate_equiconf_marginal(&data, &fit(&data, requirements_marginal(Estimand::Ate)))
            .unwrap();
        assert!(ate.estimate.abs() < 0.06, "{}", ate.estimate);
    }

    #[test]
    fn location_shift_in_y_cancels_in_contrasts() {
        // Adding a constant to every observed Y leaves both marginal formulas'
        // Y-terms unchanged as contrasts.
        let spec = DgpSpec::by_name("equiconf-marg", 5_000, 25).unwrap();
        let data = generate(&spec).unwrap();
        let mut rows = data.rows().to_vec();
        for r in &mut rows {
            if let Some(y) = r.y.as_mut() {
                *y += 13.25;
            }
        }
        let shifted = FusedDataset::from_rows(rows, crate::data::ZRole::None).unwrap();
        let n0 = fit(&data, requirements_marginal(Estimand::Ate));
        let n1 = fit(&shifted, requirements_marginal(Estimand::Ate));
        let a0 = ate_equiconf_marginal(&data, &n0).unwrap().estimate;
        let a1 = ate_equiconf_marginal(&shifted, &n1).unwrap().estimate;
        assert!((a0 - a1).abs() < 1e-12, "{a0} vs {a1}");
        let r0 = fit(&data, requirements_marginal(Estimand::Ett));
        let r1 = fit(&shifted, requirements_marginal(Estimand::Ett));
        let e0 = ett_equiconf_marginal(&data, &r0).unwrap().estimate;
        let e1 = ett_equiconf_marginal(&shifted, &r1).unwrap().estimate;
        assert!((e0 - e1).abs() < 1e-12, "{e0} vs {e1}");
    }

    #[test]
    fn lemma_ratio_on_explicit_numbers() {
        // E-mean 1.0, O-mean 0.4, p(A=a|x) = 0.5: (1.0 - 0.2) / 0.5 = 1.6.
        let ratio: f64 = (1.0 - 0.4 * 0.5) / 0.5;
        assert!((ratio - 1.6).abs() < 1e-12);
    }
}
