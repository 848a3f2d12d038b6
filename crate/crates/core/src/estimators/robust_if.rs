//! One-step influence-function estimators, their standard errors, and the
//! multiple-robustness audit harness.
//!
//! Every estimator here is the sample mean of an explicit per-row
//! contribution; the centered contributions average to zero by construction
//! and their standard deviation over sqrt(n) is the reported standard error.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::data::{DomainTag, FusedDataset};
use crate::error::{Error, Result};
use crate::estimators::proximal::{
    solve_bridge_h_on, solve_bridge_q_on, BridgePair, EtaFn, ProximalConfig, Strategy,
};
use crate::estimators::{p_a1_and_o, p_o, Estimand, EstimateReport};
use crate::nuisance::{NuisanceConfig, NuisanceSet, Requirements, Target};
use crate::simgen::{generate_rep, ground_truth, DgpSpec, DgpTag, GroundTruth, TruthMethod};
use num_traits::Float;

const E: DomainTag = DomainTag::Experimental;
const O: DomainTag = DomainTag::Observational;

/// Per-row influence accounting behind an [`EstimateReport`].
#[derive(Debug, Clone)]
pub struct IfDetail {
    pub report: EstimateReport,
    /// Uncentered contributions in dataset row order; the estimate is their
    /// mean.
    pub contributions: Vec<f64>,
    /// Centered contributions; mean zero by construction.
    pub centered: Vec<f64>,
}

fn detail_from_contributions(
    data: &FusedDataset,
    contributions: Vec<f64>,
    center: impl Fn(usize, f64) -> f64,
    estimand: Estimand,
    strategy: &str,
) -> IfDetail {
    let n = data.len() as f64;
    // Mean in canonical order for permutation invariance.
    let est: f64 = data
        .canonical_indices()
        .iter()
        .map(|&i| contributions[i as usize])
        .sum::<f64>()
        / n;
    let centered: Vec<f64> = contributions
        .iter()
        .enumerate()
        .map(|(i, &c)| c - center(i, est))
        .collect();
    let var: f64 = data
        .canonical_indices()
        .iter()
        .map(|&i| centered[i as usize] * centered[i as usize])
        .sum::<f64>()
        / n;
    let mut report = EstimateReport::new(est, estimand, strategy, data);
    report.se = Some((var / n).sqrt());
    IfDetail {
        report,
        contributions,
        centered,
    }
}

/// Nuisances for the equi-confounding one-step estimators.
pub fn requirements_equiconf(estimand: Estimand) -> Requirements {
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
        pi_e: true,
        pi_o: true,
        domain: true,
        ..Requirements::default()
    }
}

/// One-step ETT under conditional equi-confounding, with standard error.
pub fn if_ett_equiconf(data: &FusedDataset, nuisances: &NuisanceSet) -> Result<IfDetail> {
    let p1g = p_a1_and_o(data);
    if p1g <= 0.0 {
        return Err(Error::EmptyCell("no treated observational rows".into()));
    }
    let folds = nuisances.folds();
    let mut contributions = Vec::with_capacity(data.len());
    for (i, r) in data.rows().iter().enumerate() {
        let x = r.x.as_slice();
        let mut v = 0.0;
        match (r.g, r.a) {
            (O, 0) => {
                let pi = nuisances.pi_o()?.at_row(folds, i, x);
                let mu_m = nuisances.mean_at(Target::M, 0, O, i, x)?;
                let mu_y = nuisances.mean_at(Target::Y, 0, O, i, x)?;
                v += (r.m_req()? - mu_m) / (1.0 - pi);
                v -= pi / (1.0 - pi) * (r.y.expect("obs rows carry y") - mu_y);
            }
            (E, 0) => {
                let pi_e = nuisances.pi_e()?.at_row(folds, i, x);
                let pe = nuisances.domain_at(i, x)?;
                let mu_m = nuisances.mean_at(Target::M, 0, E, i, x)?;
                v -= (1.0 / pe - 1.0) / (1.0 - pi_e) * (r.m_req()? - mu_m);
            }
            _ => {}
        }
        if r.g == O {
            v += nuisances.mean_at(Target::M, 0, O, i, x)?
                - nuisances.mean_at(Target::M, 0, E, i, x)?;
            if r.a == 1 {
                v += r.y.expect("obs rows carry y")
                    - nuisances.mean_at(Target::Y, 0, O, i, x)?;
            }
        }
        contributions.push(v / p1g);
    }
    let rows = data.rows();
    Ok(detail_from_contributions(
        data,
        contributions,
        |i, est| {
            let r = &rows[i];
            if r.g == O && r.a == 1 {
                est / p1g
            } else {
                0.0
            }
        },
        Estimand::Ett,
        "if-equiconf-ett",
    ))
}

/// One-step ATE under conditional equi-confounding, with standard error.
pub fn if_ate_equiconf(data: &FusedDataset, nuisances: &NuisanceSet) -> Result<IfDetail> {
    let p_obs = p_o(data);
    let folds = nuisances.folds();
    let mut contributions = Vec::with_capacity(data.len());
    for (i, r) in data.rows().iter().enumerate() {
        let x = r.x.as_slice();
        let sign = if r.a == 1 { 1.0 } else { -1.0 };
        let v = match r.g {
            E => {
                let pi_e = nuisances.pi_e()?.at_row(folds, i, x);
                let pa = if r.a == 1 { pi_e } else { 1.0 - pi_e };
                let pe = nuisances.domain_at(i, x)?;
                let mu_m = nuisances.mean_at(Target::M, r.a, E, i, x)?;
                sign / pa * (r.m_req()? - mu_m) * (1.0 / pe - 1.0)
            }
            O => {
                let pi_o = nuisances.pi_o()?.at_row(folds, i, x);
                let pa = if r.a == 1 { pi_o } else { 1.0 - pi_o };
                let mu_m = nuisances.mean_at(Target::M, r.a, O, i, x)?;
                let mu_y = nuisances.mean_at(Target::Y, r.a, O, i, x)?;
                let resid = r.y.expect("obs rows carry y") - mu_y - r.m_req()? + mu_m;
                sign / pa * resid
                    + nuisances.mean_at(Target::Y, 1, O, i, x)?
                    - nuisances.mean_at(Target::Y, 0, O, i, x)?
                    + nuisances.mean_at(Target::M, 1, E, i, x)?
                    - nuisances.mean_at(Target::M, 0, E, i, x)?
                    + nuisances.mean_at(Target::M, 0, O, i, x)?
                    - nuisances.mean_at(Target::M, 1, O, i, x)?
            }
        };
        contributions.push(v / p_obs);
    }
    let rows = data.rows();
    Ok(detail_from_contributions(
        data,
        contributions,
        |i, est| {
            if rows[i].g == O {
                est / p_obs
            } else {
                0.0
            }
        },
        Estimand::Ate,
        "if-equiconf-ate",
    ))
}

// ---- proximal one-step --------------------------------------------------------

/// Bridges with optional per-fold copies for out-of-fold routing.
#[derive(Debug, Clone)]
pub struct FittedBridges {
    full: BridgePair,
    folds: Option<Vec<BridgePair>>,
}

impl FittedBridges {
    pub fn single(pair: BridgePair) -> Self {
        FittedBridges {
            full: pair,
            folds: None,
        }
    }

    pub fn full(&self) -> &BridgePair {
        &self.full
    }

    fn at_row(&self, nuisances: &NuisanceSet, i: usize) -> &BridgePair {
        match (&self.folds, nuisances.folds()) {
            (Some(models), Some(fa)) => &models[fa.of_row[i] as usize],
            _ => &self.full,
        }
    }

    /// Corrupt the outcome bridge everywhere (audit).
    pub fn corrupt_h(&mut self, scale: f64, shift: f64) {
        self.full.h = self.full.h.clone().with_corruption(scale, shift);
        if let Some(folds) = &mut self.folds {
            for f in folds {
                f.h = f.h.clone().with_corruption(scale, shift);
            }
        }
    }

    pub fn corrupt_q(&mut self, scale: f64, shift: f64) {
        self.full.q = self.full.q.clone().with_corruption(scale, shift);
        if let Some(folds) = &mut self.folds {
            for f in folds {
                f.q = f.q.clone().with_corruption(scale, shift);
            }
        }
    }
}

/// Solve both bridges, per fold when the nuisance set is cross-fitted.
pub fn fit_bridges(
    data: &FusedDataset,
    nuisances: &NuisanceSet,
    config: &ProximalConfig,
) -> Result<FittedBridges> {
    let full = BridgePair {
        h: solve_bridge_h_on(&data.view(), config)?,
        q: solve_bridge_q_on(&data.view(), nuisances, config)?,
    };
    let folds = match nuisances.folds() {
        Some(fa) => {
            let mut v = Vec::with_capacity(fa.k as usize);
            for fold in 0..fa.k as u16 {
                let idx: Vec<u32> = (0..data.len() as u32)
                    .filter(|&i| fa.of_row[i as usize] != fold)
                    .collect();
                let view = crate::data::DatasetView::from_indices(data, idx);
                v.push(BridgePair {
                    h: solve_bridge_h_on(&view, config)?,
                    q: solve_bridge_q_on(&view, nuisances, config)?,
                });
            }
            Some(v)
        }
        None => None,
    };
    Ok(FittedBridges { full, folds })
}

/// One-step estimate of theta^(a) with out-of-fold nuisance routing.
pub fn if_proximal(
    data: &FusedDataset,
    bridges: &FittedBridges,
    nuisances: &NuisanceSet,
    a: u8,
) -> Result<IfDetail> {
    let p_obs = p_o(data);
    let folds = nuisances.folds();
    let mut contributions = Vec::with_capacity(data.len());
    for (i, r) in data.rows().iter().enumerate() {
        let x = r.x.as_slice();
        let pair = bridges.at_row(nuisances, i);
        let d0 = nuisances.m_density(0, E)?.at_row(folds, i);
        let d1 = nuisances.m_density(1, E)?.at_row(folds, i);
        let eta = EtaFn::new(&pair.h, d0, d1);
        let v = match r.g {
            O => {
                let mut v = eta.eval(a, x);
                if r.a == a {
                    let z = r.z.ok_or_else(|| {
                        Error::NoProxy("proxy required on observational rows".into())
                    })?;
                    v += pair.q.eval(z, a, x)
                        * (r.y.expect("obs rows carry y") - pair.h.eval(r.m_req()?, a, x));
                }
                v
            }
            E => {
                if r.a == a {
                    let pa = nuisances.pi_e()?.at_row(folds, i, x);
                    let pa = if a == 1 { pa } else { 1.0 - pa };
                    let pe = nuisances.domain_at(i, x)?;
                    (pair.h.eval(r.m_req()?, a, x) - eta.eval(a, x)) / pa * (1.0 / pe - 1.0)
                } else {
                    0.0
                }
            }
        };
        contributions.push(v / p_obs);
    }
    let rows = data.rows();
    let mut detail = detail_from_contributions(
        data,
        contributions,
        |i, est| {
            if rows[i].g == O {
                est / p_obs
            } else {
                0.0
            }
        },
        Estimand::Ate,
        &format!("if-proximal-theta{a}"),
    );
    detail.report.diagnostics.bridge_residual_h = Some(bridges.full.h.residual);
    detail.report.diagnostics.bridge_residual_q = Some(bridges.full.q.residual);
    Ok(detail)
}

/// One-step proximal ATE = theta^(1) - theta^(0) with a delta-method SE.
pub fn if_proximal_ate(
    data: &FusedDataset,
    bridges: &FittedBridges,
    nuisances: &NuisanceSet,
) -> Result<IfDetail> {
    let d1 = if_proximal(data, bridges, nuisances, 1)?;
    let d0 = if_proximal(data, bridges, nuisances, 0)?;
    let contributions: Vec<f64> = d1
        .contributions
        .iter()
        .zip(d0.contributions.iter())
        .map(|(a, b)| a - b)
        .collect();
    let p_obs = p_o(data);
    let rows = data.rows();
    let mut detail = detail_from_contributions(
        data,
        contributions,
        |i, est| {
            if rows[i].g == O {
                est / p_obs
            } else {
                0.0
            }
        },
        Estimand::Ate,
        "proximal-s4",
    );
    detail.report.diagnostics = d1.report.diagnostics.clone();
    Ok(detail)
}

/// Convenience wrappers over a single (non-routed) bridge pair.
pub fn if_proximal_ate_with(
    data: &FusedDataset,
    bridges: &BridgePair,
    nuisances: &NuisanceSet,
) -> Result<EstimateReport> {
    Ok(if_proximal_ate(data, &FittedBridges::single(bridges.clone()), nuisances)?.report)
}

/// One-step proximal ETT anchored at theta^(0), delta-method SE over the
/// empirical arm means and treated share.
pub fn if_proximal_ett(
    data: &FusedDataset,
    bridges: &FittedBridges,
    nuisances: &NuisanceSet,
) -> Result<IfDetail> {
    let d0 = if_proximal(data, bridges, nuisances, 0)?;
    let theta0 = d0.report.estimate;
    let o = data.split(O, None);
    let y1 = o.split(O, Some(1)).mean(|r| r.y.expect("obs rows carry y"))?;
    let y0 = o.split(O, Some(0)).mean(|r| r.y.expect("obs rows carry y"))?;
    let p1 = crate::estimators::p_a1_given_o(data)?;
    let p1g = p_a1_and_o(data);
    let p0g = p_o(data) - p1g;
    let p_obs = p_o(data);
    let est = y1 - (theta0 - y0 * (1.0 - p1)) / p1;

    // Delta method over (mu1, mu0, theta0, p1).
    let dmu1 = 1.0;
    let dmu0 = (1.0 - p1) / p1;
    let dtheta = -1.0 / p1;
    let dp1 = theta0 / (p1 * p1) - y0 / (p1 * p1);
    let rows = data.rows();
    let contributions: Vec<f64> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut v = dtheta * d0.centered[i];
            if r.g == O {
                let y = r.y.expect("obs rows carry y");
                if r.a == 1 {
                    v += dmu1 * (y - y1) / p1g;
                } else {
                    v += dmu0 * (y - y0) / p0g;
                }
                v += dp1 * (((r.a == 1) as u8 as f64) - p1) / p_obs;
            }
            v
        })
        .collect();
    let n = data.len() as f64;
    let var: f64 = data
        .canonical_indices()
        .iter()
        .map(|&i| contributions[i as usize] * contributions[i as usize])
        .sum::<f64>()
        / n;
    let mut report = EstimateReport::new(est, Estimand::Ett, "proximal-s4", data);
    report.se = Some((var / n).sqrt());
    report.diagnostics = d0.report.diagnostics.clone();
    Ok(IfDetail {
        report,
        contributions: contributions.clone(),
        centered: contributions,
    })
}

pub fn if_proximal_ett_with(
    data: &FusedDataset,
    bridges: &BridgePair,
    nuisances: &NuisanceSet,
) -> Result<EstimateReport> {
    Ok(if_proximal_ett(data, &FittedBridges::single(bridges.clone()), nuisances)?.report)
}

// ---- robustness audit -----------------------------------------------------------

/// Regression corruption: 0.5 f + 1.0; propensity corruption: +1 on the
/// logit scale; density corruption: exponential tilt across levels.
const CORRUPT_SCALE: f64 = 0.5;
const CORRUPT_SHIFT: f64 = 1.0;
const CORRUPT_LOGIT: f64 = 1.0;
const CORRUPT_TILT: f64 = 0.75;

/// Which one-step estimator an audit run exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditEstimator {
    EquiConfEtt,
    EquiConfAte,
    ProximalAte,
    /// Negative control: the nested-regression baseline has no robustness
    /// margin, so corrupting its inner stage must fail.
    LatentUnconfAte,
}

impl AuditEstimator {
    pub fn as_str(self) -> &'static str {
        match self {
            AuditEstimator::EquiConfEtt => "if-equiconf-ett",
            AuditEstimator::EquiConfAte => "if-equiconf-ate",
            AuditEstimator::ProximalAte => "if-proximal-ate",
            AuditEstimator::LatentUnconfAte => "latent-unconf-ate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "if-equiconf-ett" => AuditEstimator::EquiConfEtt,
            "if-equiconf-ate" => AuditEstimator::EquiConfAte,
            "if-proximal-ate" => AuditEstimator::ProximalAte,
            "latent-unconf-ate" => AuditEstimator::LatentUnconfAte,
            _ => return None,
        })
    }
}

/// Slots that can be corrupted in an audit run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    MuME,
    MuMO,
    MuYO,
    PiE,
    PiO,
    Domain,
    BridgeH,
    BridgeQ,
    DensME,
    Inner,
}

impl Slot {
    fn name(self) -> &'static str {
        match self {
            Slot::MuME => "mu_m_exp",
            Slot::MuMO => "mu_m_obs",
            Slot::MuYO => "mu_y_obs",
            Slot::PiE => "pi_exp",
            Slot::PiO => "pi_obs",
            Slot::Domain => "domain_score",
            Slot::BridgeH => "bridge_h",
            Slot::BridgeQ => "bridge_q",
            Slot::DensME => "density_m_exp",
            Slot::Inner => "inner_regression",
        }
    }
}

/// One misspecification scenario in the report.
#[derive(Debug, Clone)]
pub struct AuditRow {
    /// Which nuisance set was kept correct.
    pub label: String,
    pub corrupted: Vec<String>,
    pub mean_estimate: f64,
    pub bias: f64,
    pub mc_se: f64,
    /// |bias| within two Monte Carlo standard errors.
    pub pass: bool,
    /// Whether the protocol expects this row to pass.
    pub expect_pass: bool,
}

/// Full audit output.
#[derive(Debug, Clone)]
pub struct RobustnessAuditReport {
    pub estimator: String,
    pub dgp: String,
    pub truth: f64,
    pub n: usize,
    pub reps: u64,
    pub seed: u64,
    pub rows: Vec<AuditRow>,
}

fn corrupt_equiconf(nuis: &mut NuisanceSet, slots: &[Slot], estimand: Estimand) {
    for &s in slots {
        match s {
            Slot::MuME => {
                nuis.corrupt_mean((Target::M, 0, E), CORRUPT_SCALE, CORRUPT_SHIFT);
                if estimand == Estimand::Ate {
                    nuis.corrupt_mean((Target::M, 1, E), CORRUPT_SCALE, CORRUPT_SHIFT);
                }
            }
            Slot::MuMO => {
                nuis.corrupt_mean((Target::M, 0, O), CORRUPT_SCALE, CORRUPT_SHIFT);
                if estimand == Estimand::Ate {
                    nuis.corrupt_mean((Target::M, 1, O), CORRUPT_SCALE, CORRUPT_SHIFT);
                }
            }
            Slot::MuYO => {
                nuis.corrupt_mean((Target::Y, 0, O), CORRUPT_SCALE, CORRUPT_SHIFT);
                if estimand == Estimand::Ate {
                    nuis.corrupt_mean((Target::Y, 1, O), CORRUPT_SCALE, CORRUPT_SHIFT);
                }
            }
            Slot::PiE => nuis.corrupt_pi_e(CORRUPT_LOGIT),
            Slot::PiO => nuis.corrupt_pi_o(CORRUPT_LOGIT),
            Slot::Domain => nuis.corrupt_domain(CORRUPT_LOGIT),
            _ => {}
        }
    }
}

/// The scenario table for one estimator: (label, corrupted slots, expect
/// pass).
fn scenarios(estimator: AuditEstimator) -> Vec<(&'static str, Vec<Slot>, bool)> {
    use Slot::*;
    match estimator {
        AuditEstimator::EquiConfEtt | AuditEstimator::EquiConfAte => alloc::vec![
            ("all-correct", alloc::vec![], true),
            ("regression-triple", alloc::vec![PiE, PiO, Domain], true),
            ("propensity-triple", alloc::vec![MuME, MuMO, MuYO], true),
            ("mu-m-exp+pi-obs", alloc::vec![MuMO, MuYO, PiE, Domain], true),
            ("pi-exp+mu-obs+domain", alloc::vec![MuME, PiO], true),
            (
                "all-corrupt",
                alloc::vec![MuME, MuMO, MuYO, PiE, PiO, Domain],
                false
            ),
        ],
        AuditEstimator::ProximalAte => alloc::vec![
            ("all-correct", alloc::vec![], true),
            ("h+density", alloc::vec![BridgeQ, PiE, Domain], true),
            ("h+propensities", alloc::vec![BridgeQ, DensME], true),
            ("q+propensities", alloc::vec![BridgeH, DensME], true),
            (
                "all-corrupt",
                alloc::vec![BridgeH, BridgeQ, DensME, PiE, Domain],
                false
            ),
        ],
        AuditEstimator::LatentUnconfAte => alloc::vec![
            ("all-correct", alloc::vec![], true),
            ("corrupt-inner", alloc::vec![Inner], false),
        ],
    }
}

/// Run the audit: for each scenario, fit everything, corrupt the complement,
/// estimate over seeded replications, and compare the mean bias to its Monte
/// Carlo standard error.
pub fn audit_multiple_robustness(
    tag: &DgpTag,
    estimator: AuditEstimator,
    n: usize,
    reps: u64,
    seed: u64,
) -> Result<RobustnessAuditReport> {
    let spec = DgpSpec::new(tag.clone(), n, seed);
    let truth_values = ground_truth(&spec, TruthMethod::ClosedForm)
        .or_else(|_| ground_truth(&spec, TruthMethod::CounterfactualMc(2_000_000)))?;
    let truth = match estimator {
        AuditEstimator::EquiConfEtt => truth_values.ett,
        _ => truth_values.ate,
    };
    let scen = scenarios(estimator);
    let mut estimates: Vec<Vec<f64>> = scen.iter().map(|_| Vec::new()).collect();
    // The audit protocol fits one-step nuisances with the default
    // cross-fitting for influence-function estimators.
    let nuis_config = NuisanceConfig {
        crossfit_folds: Some(5),
        ..NuisanceConfig::default()
    };
    for rep in 0..reps {
        let data = generate_rep(&spec, rep)?;
        match estimator {
            AuditEstimator::EquiConfEtt | AuditEstimator::EquiConfAte => {
                let estimand = if estimator == AuditEstimator::EquiConfEtt {
                    Estimand::Ett
                } else {
                    Estimand::Ate
                };
                let fitted =
                    NuisanceSet::fit(&data, &requirements_equiconf(estimand), &nuis_config)?;
                for (k, (_, slots, _)) in scen.iter().enumerate() {
                    let mut nuis = fitted.clone();
                    corrupt_equiconf(&mut nuis, slots, estimand);
                    let est = match estimator {
                        AuditEstimator::EquiConfEtt => {
                            if_ett_equiconf(&data, &nuis)?.report.estimate
                        }
                        _ => if_ate_equiconf(&data, &nuis)?.report.estimate,
                    };
                    estimates[k].push(est);
                }
            }
            AuditEstimator::ProximalAte => {
                let fitted = NuisanceSet::fit(
                    &data,
                    &crate::estimators::proximal::requirements(Strategy::S4),
                    &nuis_config,
                )?;
                let bridges = fit_bridges(&data, &fitted, &ProximalConfig::default())?;
                for (k, (_, slots, _)) in scen.iter().enumerate() {
                    let mut nuis = fitted.clone();
                    let mut br = bridges.clone();
                    for &s in slots {
                        match s {
                            Slot::BridgeH => br.corrupt_h(CORRUPT_SCALE, CORRUPT_SHIFT),
                            Slot::BridgeQ => br.corrupt_q(CORRUPT_SCALE, CORRUPT_SHIFT),
                            Slot::DensME => {
                                nuis.corrupt_m_density((0, E), CORRUPT_TILT);
                                nuis.corrupt_m_density((1, E), CORRUPT_TILT);
                            }
                            Slot::PiE => nuis.corrupt_pi_e(CORRUPT_LOGIT),
                            Slot::Domain => nuis.corrupt_domain(CORRUPT_LOGIT),
                            _ => {}
                        }
                    }
                    estimates[k].push(if_proximal_ate(&data, &br, &nuis)?.report.estimate);
                }
            }
            AuditEstimator::LatentUnconfAte => {
                let cfg = NuisanceConfig::default();
                for (k, (_, slots, _)) in scen.iter().enumerate() {
                    let corrupt = slots
                        .contains(&Slot::Inner)
                        .then_some((CORRUPT_SCALE, CORRUPT_SHIFT));
                    let nr1 = crate::estimators::latent_unconf::fit_nested_with(
                        &data, 1, &cfg, corrupt,
                    )?;
                    let nr0 = crate::estimators::latent_unconf::fit_nested_with(
                        &data, 0, &cfg, corrupt,
                    )?;
                    let est = crate::estimators::latent_unconf::ate_from_nested(
                        &data, &nr1, &nr0,
                    )?
                    .estimate;
                    estimates[k].push(est);
                }
            }
        }
    }
    let rows = scen
        .iter()
        .zip(estimates.iter())
        .map(|((label, slots, expect_pass), ests)| {
            let r = ests.len() as f64;
            let mean = ests.iter().sum::<f64>() / r;
            let var = ests.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (r - 1.0).max(1.0);
            let mc_se = (var / r).sqrt();
            let bias = mean - truth;
            AuditRow {
                label: String::from(*label),
                corrupted: slots.iter().map(|s| String::from(s.name())).collect(),
                mean_estimate: mean,
                bias,
                mc_se,
                pass: bias.abs() <= 2.0 * mc_se,
                expect_pass: *expect_pass,
            }
        })
        .collect();
    Ok(RobustnessAuditReport {
        estimator: String::from(estimator.as_str()),
        dgp: String::from(tag.name()),
        truth,
        n,
        reps,
        seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::generate;

    #[test]
    fn ett_if_self_consistency() {
        let spec = DgpSpec::by_name("equiconf-cond", 8_000, 71).unwrap();
        let data = generate(&spec).unwrap();
        let nuis = NuisanceSet::fit(
            &data,
            &requirements_equiconf(Estimand::Ett),
            &NuisanceConfig::default(),
        )
        .unwrap();
        let d = if_ett_equiconf(&data, &nuis).unwrap();
        let mean: f64 = d.contributions.iter().sum::<f64>() / data.len() as f64;
        assert!(
            (mean - d.report.estimate).abs() <= 1e-12 * d.report.estimate.abs().max(1.0),
            "estimate {} vs contribution mean {mean}",
            d.report.estimate
        );
        let centered_mean: f64 = d.centered.iter().sum::<f64>() / data.len() as f64;
        assert!(centered_mean.abs() < 1e-10, "centered mean {centered_mean}");
        assert!(d.report.se.unwrap() > 0.0);
    }

    #[test]
    fn ate_if_matches_plugin_on_well_specified_data() {
        let spec = DgpSpec::by_name("equiconf-cond", 40_000, 72).unwrap();
        let truth = ground_truth(&spec, TruthMethod::ClosedForm).unwrap();
        let data = generate(&spec).unwrap();
        let nuis = NuisanceSet::fit(
            &data,
            &requirements_equiconf(Estimand::Ate),
            &NuisanceConfig::default(),
        )
        .unwrap();
        let d = if_ate_equiconf(&data, &nuis).unwrap();
        assert!(
            (d.report.estimate - truth.ate).abs() < 4.0 * d.report.se.unwrap(),
            "{} vs {} (se {})",
            d.report.estimate,
            truth.ate,
            d.report.se.unwrap()
        );
    }

    #[test]
    fn crossfit_matches_full_fit_on_linear_world() {
        let spec = DgpSpec::by_name("equiconf-cond", 10_000, 73).unwrap();
        let data = generate(&spec).unwrap();
        let full = NuisanceSet::fit(
            &data,
            &requirements_equiconf(Estimand::Ett),
            &NuisanceConfig::default(),
        )
        .unwrap();
        let folded = NuisanceSet::fit(
            &data,
            &requirements_equiconf(Estimand::Ett),
            &NuisanceConfig {
                crossfit_folds: Some(5),
                ..NuisanceConfig::default()
            },
        )
        .unwrap();
        let e_full = if_ett_equiconf(&data, &full).unwrap().report.estimate;
        let e_fold = if_ett_equiconf(&data, &folded).unwrap().report.estimate;
        // Same parametric family, well specified: cross-fitting changes the
        // estimate only through fold noise.
        assert!((e_full - e_fold).abs() < 0.05, "{e_full} vs {e_fold}");
    }

    #[test]
    fn proximal_if_self_consistency() {
        let spec = DgpSpec::by_name("proximal", 8_000, 74).unwrap();
        let data = generate(&spec).unwrap();
        let nuis = NuisanceSet::fit(
            &data,
            &crate::estimators::proximal::requirements(Strategy::S4),
            &NuisanceConfig::default(),
        )
        .unwrap();
        let bridges = fit_bridges(&data, &nuis, &ProximalConfig::default()).unwrap();
        let d = if_proximal(&data, &bridges, &nuis, 1).unwrap();
        let mean: f64 = d.contributions.iter().sum::<f64>() / data.len() as f64;
        assert!((mean - d.report.estimate).abs() <= 1e-12 * mean.abs().max(1.0));
        let centered_mean: f64 = d.centered.iter().sum::<f64>() / data.len() as f64;
        assert!(centered_mean.abs() < 1e-10);
    }

    #[test]
    fn latent_unconf_negative_control_fails_under_corruption() {
        let tag = DgpSpec::by_name("latent-unconf", 0, 0).unwrap().tag;
        let report =
            audit_multiple_robustness(&tag, AuditEstimator::LatentUnconfAte, 6_000, 20, 99)
                .unwrap();
        let control = &report.rows[0];
        let broken = &report.rows[1];
        assert!(control.pass, "control bias {} se {}", control.bias, control.mc_se);
        assert!(
            broken.bias.abs() > 4.0 * broken.mc_se,
            "corrupted inner regression should fail: bias {} se {}",
            broken.bias,
            broken.mc_se
        );
    }
}
