//! Nuisance functions consumed by the estimators: conditional means,
//! propensities, domain scores, conditional CDFs and densities, with optional
//! K-fold cross-fitting routed per row.

pub mod cdf;
pub mod density;
pub mod kernel;
pub mod linear;
pub mod logistic;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::data::{DatasetView, DomainTag, FusedDataset, Observation};
use crate::error::{Error, Result};
use num_traits::Float;

pub use cdf::{ConditionalCdf, Ecdf};
pub use density::{ConditionalDensity, Support};
pub use kernel::KernelRidgeModel;
pub use linear::LinearModel;
pub use logistic::{KernelLogisticModel, LogisticModel};

/// Outcome column a regression targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Target {
    M,
    Y,
}

/// Function class for conditional means.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanFamily {
    Linear,
    KernelRidge,
}

/// Function class for propensity-type fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropFamily {
    Logistic,
    KernelLogistic,
}

/// Which probability a propensity fit models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropensityKind {
    /// `p(A=1 | x, G=E)`.
    TreatmentInE,
    /// `p(A=1 | x, G=O)`.
    TreatmentInO,
    /// `p(G=E | x)` over the pooled sample.
    Domain,
}

/// Tuning shared by all nuisance fits.
#[derive(Debug, Clone)]
pub struct NuisanceConfig {
    pub family: MeanFamily,
    pub prop_family: PropFamily,
    /// Propensity outputs are clipped to `[trim, 1 - trim]`.
    pub trim: f64,
    /// `Some(k)` routes every per-row evaluation through the model fitted on
    /// the other k-1 folds.
    pub crossfit_folds: Option<u32>,
    /// RBF bandwidth; `None` = median heuristic.
    pub kernel_bandwidth: Option<f64>,
    /// Kernel-ridge penalty; `None` = 5-fold CV over a log grid.
    pub ridge_lambda: Option<f64>,
    /// Auto-detection cap for treating the short-term outcome as discrete.
    pub discrete_m_max_levels: usize,
}

impl Default for NuisanceConfig {
    fn default() -> Self {
        NuisanceConfig {
            family: MeanFamily::Linear,
            prop_family: PropFamily::Logistic,
            trim: 0.01,
            crossfit_folds: None,
            kernel_bandwidth: None,
            ridge_lambda: None,
            discrete_m_max_levels: 32,
        }
    }
}

/// Size and in-sample fit quality of a trained model.
#[derive(Debug, Clone, Copy)]
pub struct FitDiagnostics {
    pub n_train: usize,
    pub rmse: f64,
}

#[derive(Debug, Clone)]
enum MeanModelKind {
    Linear(LinearModel),
    Kernel(KernelRidgeModel),
}

/// Fitted conditional mean E[target | x] on one (arm, domain) cell.
#[derive(Debug, Clone)]
pub struct ConditionalMean {
    kind: MeanModelKind,
    pub family: MeanFamily,
    pub diagnostics: FitDiagnostics,
    /// Affine post-transform; (1, 0) is the identity. The robustness audit
    /// sets this to make a fit deterministically inconsistent.
    post: (f64, f64),
}

impl ConditionalMean {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let raw = match &self.kind {
            MeanModelKind::Linear(m) => m.predict(x),
            MeanModelKind::Kernel(m) => m.predict(x),
        };
        self.post.0 * raw + self.post.1
    }

    pub fn corrupted(mut self, scale: f64, shift: f64) -> Self {
        self.post = (scale, shift);
        self
    }
}

#[derive(Debug, Clone)]
enum PropModelKind {
    Logistic(LogisticModel),
    Kernel(KernelLogisticModel),
}

/// Fitted probability model with trimming.
#[derive(Debug, Clone)]
pub struct PropensityScore {
    kind: PropModelKind,
    pub trim: f64,
    pub converged: bool,
    /// Additive shift on the logit scale; 0 is the identity (audit knob).
    logit_shift: f64,
}

impl PropensityScore {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let raw = match &self.kind {
            PropModelKind::Logistic(m) => m.predict(x),
            PropModelKind::Kernel(m) => m.predict(x),
        };
        let raw = if self.logit_shift != 0.0 {
            let p = raw.clamp(1e-12, 1.0 - 1e-12);
            logistic::sigmoid((p / (1.0 - p)).ln() + self.logit_shift)
        } else {
            raw
        };
        raw.clamp(self.trim, 1.0 - self.trim)
    }

    pub fn corrupted(mut self, logit_shift: f64) -> Self {
        self.logit_shift = logit_shift;
        self
    }
}

fn target_value(r: &Observation, target: Target) -> Result<f64> {
    match target {
        Target::M => r.m_req(),
        Target::Y => r
            .y
            .ok_or_else(|| Error::TargetUnavailable("long-term outcome missing on row".into())),
    }
}

/// Fit E[target | X, A=a, G=g] on the matching cell.
pub fn fit_conditional_mean(
    data: &FusedDataset,
    target: Target,
    a: u8,
    g: DomainTag,
    config: &NuisanceConfig,
) -> Result<ConditionalMean> {
    fit_conditional_mean_on(&data.split(g, Some(a)), target, config)
}

/// Same, on an explicit view (used by cross-fitting and custom subsets).
pub fn fit_conditional_mean_on(
    view: &DatasetView<'_>,
    target: Target,
    config: &NuisanceConfig,
) -> Result<ConditionalMean> {
    if target == Target::Y && view.iter().next().map(|(_, r)| r.g) == Some(DomainTag::Experimental)
    {
        return Err(Error::TargetUnavailable(
            "long-term outcome is never observed in the experimental domain".into(),
        ));
    }
    let v = view.canonical();
    if v.is_empty() {
        return Err(Error::EmptyCell("conditional-mean cell has no rows".into()));
    }
    let mut xs: Vec<&[f64]> = Vec::with_capacity(v.len());
    let mut ys: Vec<f64> = Vec::with_capacity(v.len());
    for (_, r) in v.iter() {
        xs.push(r.x.as_slice());
        ys.push(target_value(r, target)?);
    }
    fit_mean_xs(&xs, &ys, config)
}

/// Lowest-level mean fit on explicit feature rows.
pub fn fit_mean_xs(xs: &[&[f64]], ys: &[f64], config: &NuisanceConfig) -> Result<ConditionalMean> {
    let kind = match config.family {
        MeanFamily::Linear => MeanModelKind::Linear(LinearModel::fit(
            xs,
            ys,
            Some(linear::DEFAULT_JITTER),
        )?),
        MeanFamily::KernelRidge => MeanModelKind::Kernel(KernelRidgeModel::fit(
            xs,
            ys,
            config.ridge_lambda,
            config.kernel_bandwidth,
        )?),
    };
    let tmp = ConditionalMean {
        kind,
        family: config.family,
        diagnostics: FitDiagnostics {
            n_train: xs.len(),
            rmse: 0.0,
        },
        post: (1.0, 0.0),
    };
    let mse = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| {
            let e = tmp.predict(x) - y;
            e * e
        })
        .sum::<f64>()
        / xs.len() as f64;
    Ok(ConditionalMean {
        diagnostics: FitDiagnostics {
            n_train: xs.len(),
            rmse: mse.sqrt(),
        },
        ..tmp
    })
}

/// Fit one of the three probability models.
pub fn fit_propensity(
    data: &FusedDataset,
    kind: PropensityKind,
    config: &NuisanceConfig,
) -> Result<PropensityScore> {
    fit_propensity_on(&data.view(), kind, config)
}

pub fn fit_propensity_on(
    view: &DatasetView<'_>,
    kind: PropensityKind,
    config: &NuisanceConfig,
) -> Result<PropensityScore> {
    let scoped = match kind {
        PropensityKind::TreatmentInE => view.split(DomainTag::Experimental, None),
        PropensityKind::TreatmentInO => view.split(DomainTag::Observational, None),
        PropensityKind::Domain => view.clone(),
    };
    let v = scoped.canonical();
    if v.is_empty() {
        return Err(Error::EmptyCell("propensity subset has no rows".into()));
    }
    let mut xs: Vec<&[f64]> = Vec::with_capacity(v.len());
    let mut labels: Vec<u8> = Vec::with_capacity(v.len());
    for (_, r) in v.iter() {
        xs.push(r.x.as_slice());
        labels.push(match kind {
            PropensityKind::Domain => (r.g == DomainTag::Experimental) as u8,
            _ => r.a,
        });
    }
    fit_propensity_xs(&xs, &labels, config)
}

/// Lowest-level propensity fit on explicit feature rows.
pub fn fit_propensity_xs(
    xs: &[&[f64]],
    labels: &[u8],
    config: &NuisanceConfig,
) -> Result<PropensityScore> {
    let (kind, converged) = match config.prop_family {
        PropFamily::Logistic => {
            let m = LogisticModel::fit(xs, labels, None)?;
            let c = m.converged;
            (PropModelKind::Logistic(m), c)
        }
        PropFamily::KernelLogistic => {
            let m = KernelLogisticModel::fit(
                xs,
                labels,
                256,
                config.ridge_lambda.unwrap_or(1e-3),
                config.kernel_bandwidth,
            )?;
            let c = m.converged;
            (PropModelKind::Kernel(m), c)
        }
    };
    Ok(PropensityScore {
        kind,
        trim: config.trim,
        converged,
        logit_shift: 0.0,
    })
}

/// Fit `F(target | x)` on one (arm, domain) cell.
pub fn fit_conditional_cdf(
    data: &FusedDataset,
    target: Target,
    a: u8,
    g: DomainTag,
) -> Result<ConditionalCdf> {
    ConditionalCdf::fit_view(&data.split(g, Some(a)), target)
}

/// Fit `p(m | x)` on one (arm, domain) cell.
pub fn fit_conditional_density(
    data: &FusedDataset,
    a: u8,
    g: DomainTag,
    support: Option<Support>,
    config: &NuisanceConfig,
) -> Result<ConditionalDensity> {
    ConditionalDensity::fit_view(
        &data.split(g, Some(a)),
        support,
        config.discrete_m_max_levels,
    )
}

/// Key identifying one conditional-mean (or CDF) slot.
pub type MeanKey = (Target, u8, DomainTag);

/// Per-row fold assignment, stratified by (domain, arm).
#[derive(Debug, Clone)]
pub struct FoldAssignment {
    pub k: u32,
    pub of_row: Vec<u16>,
}

/// Assign rows to `k` folds, round-robin within each (domain, arm) cell in
/// canonical order so the assignment is invariant to the input permutation.
pub fn assign_folds(data: &FusedDataset, k: u32) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Validation("cross-fitting needs at least 2 folds".into()));
    }
    let counts = data.cell_counts();
    if counts.iter().any(|&c| c < k as usize) {
        return Err(Error::FoldTooSmall(format!(
            "every (domain, arm) cell needs at least k={k} rows, have {counts:?}"
        )));
    }
    let mut of_row = alloc::vec![0u16; data.len()];
    let mut counters = BTreeMap::<(DomainTag, u8), u32>::new();
    for &i in data.canonical_indices() {
        let r = data.row(i as usize);
        let c = counters.entry((r.g, r.a)).or_insert(0);
        of_row[i as usize] = (*c % k) as u16;
        *c += 1;
    }
    Ok(FoldAssignment { k, of_row })
}

/// A conditional mean plus optional per-fold copies for out-of-fold routing.
#[derive(Debug, Clone)]
pub struct FittedMean {
    full: ConditionalMean,
    folds: Option<Vec<ConditionalMean>>,
}

impl FittedMean {
    /// Evaluation at dataset row `i` (out-of-fold when cross-fitting).
    pub fn at_row(&self, assignment: Option<&FoldAssignment>, i: usize, x: &[f64]) -> f64 {
        match (&self.folds, assignment) {
            (Some(models), Some(fa)) => models[fa.of_row[i] as usize].predict(x),
            _ => self.full.predict(x),
        }
    }

    /// Evaluation at an arbitrary point (full-sample model).
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.full.predict(x)
    }

    pub fn full_model(&self) -> &ConditionalMean {
        &self.full
    }

    /// Apply the audit's affine corruption to every internal model.
    pub fn corrupted(&self, scale: f64, shift: f64) -> Self {
        FittedMean {
            full: self.full.clone().corrupted(scale, shift),
            folds: self
                .folds
                .as_ref()
                .map(|ms| ms.iter().map(|m| m.clone().corrupted(scale, shift)).collect()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FittedProp {
    full: PropensityScore,
    folds: Option<Vec<PropensityScore>>,
}

impl FittedProp {
    pub fn at_row(&self, assignment: Option<&FoldAssignment>, i: usize, x: &[f64]) -> f64 {
        match (&self.folds, assignment) {
            (Some(models), Some(fa)) => models[fa.of_row[i] as usize].predict(x),
            _ => self.full.predict(x),
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.full.predict(x)
    }

    pub fn trim(&self) -> f64 {
        self.full.trim
    }

    /// Apply the audit's logit-shift corruption to every internal model.
    pub fn corrupted(&self, logit_shift: f64) -> Self {
        FittedProp {
            full: self.full.clone().corrupted(logit_shift),
            folds: self
                .folds
                .as_ref()
                .map(|ms| ms.iter().map(|m| m.clone().corrupted(logit_shift)).collect()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FittedDensity {
    full: ConditionalDensity,
    folds: Option<Vec<ConditionalDensity>>,
}

impl FittedDensity {
    pub fn at_row(&self, assignment: Option<&FoldAssignment>, i: usize) -> &ConditionalDensity {
        match (&self.folds, assignment) {
            (Some(models), Some(fa)) => &models[fa.of_row[i] as usize],
            _ => &self.full,
        }
    }

    pub fn full_model(&self) -> &ConditionalDensity {
        &self.full
    }

    /// Apply the audit's exponential tilt to every internal model.
    pub fn corrupted(&self, rate: f64) -> Self {
        FittedDensity {
            full: self.full.tilted(rate),
            folds: self
                .folds
                .as_ref()
                .map(|ms| ms.iter().map(|m| m.tilted(rate)).collect()),
        }
    }
}

/// Which nuisances an estimator needs fitted.
#[derive(Debug, Clone, Default)]
pub struct Requirements {
    pub means: Vec<MeanKey>,
    pub pi_e: bool,
    pub pi_o: bool,
    pub domain: bool,
    pub cdfs: Vec<MeanKey>,
    /// (arm, domain) cells needing `p(m | x)`.
    pub m_density: Vec<(u8, DomainTag)>,
}

/// Every nuisance the selected strategy demands, fitted once and immutable.
#[derive(Debug, Clone)]
pub struct NuisanceSet {
    pub config: NuisanceConfig,
    means: BTreeMap<MeanKey, FittedMean>,
    pi_e: Option<FittedProp>,
    pi_o: Option<FittedProp>,
    domain_e: Option<FittedProp>,
    cdfs: BTreeMap<MeanKey, ConditionalCdf>,
    m_density: BTreeMap<(u8, DomainTag), FittedDensity>,
    folds: Option<FoldAssignment>,
}

fn view_minus_fold<'a>(
    data: &'a FusedDataset,
    fa: &FoldAssignment,
    fold: u16,
) -> DatasetView<'a> {
    let idx: Vec<u32> = (0..data.len() as u32)
        .filter(|&i| fa.of_row[i as usize] != fold)
        .collect();
    DatasetView::from_indices(data, idx)
}

impl NuisanceSet {
    /// Fit all requested nuisances, honoring the cross-fitting setting.
    pub fn fit(data: &FusedDataset, req: &Requirements, config: &NuisanceConfig) -> Result<Self> {
        let folds = match config.crossfit_folds {
            Some(k) => Some(assign_folds(data, k)?),
            None => None,
        };
        let mut means = BTreeMap::new();
        for &(target, a, g) in &req.means {
            let full = fit_conditional_mean(data, target, a, g, config)?;
            let fold_models = match &folds {
                Some(fa) => {
                    let mut v = Vec::with_capacity(fa.k as usize);
                    for fold in 0..fa.k as u16 {
                        let view = view_minus_fold(data, fa, fold).split(g, Some(a));
                        v.push(fit_conditional_mean_on(&view, target, config)?);
                    }
                    Some(v)
                }
                None => None,
            };
            means.insert(
                (target, a, g),
                FittedMean {
                    full,
                    folds: fold_models,
                },
            );
        }
        let mut fit_prop = |kind: PropensityKind| -> Result<FittedProp> {
            let full = fit_propensity(data, kind, config)?;
            let fold_models = match &folds {
                Some(fa) => {
                    let mut v = Vec::with_capacity(fa.k as usize);
                    for fold in 0..fa.k as u16 {
                        let view = view_minus_fold(data, fa, fold);
                        v.push(fit_propensity_on(&view, kind, config)?);
                    }
                    Some(v)
                }
                None => None,
            };
            Ok(FittedProp {
                full,
                folds: fold_models,
            })
        };
        let pi_e = if req.pi_e {
            Some(fit_prop(PropensityKind::TreatmentInE)?)
        } else {
            None
        };
        let pi_o = if req.pi_o {
            Some(fit_prop(PropensityKind::TreatmentInO)?)
        } else {
            None
        };
        let domain_e = if req.domain {
            Some(fit_prop(PropensityKind::Domain)?)
        } else {
            None
        };
        let mut cdfs = BTreeMap::new();
        for &(target, a, g) in &req.cdfs {
            cdfs.insert((target, a, g), fit_conditional_cdf(data, target, a, g)?);
        }
        let mut m_density = BTreeMap::new();
        for &(a, g) in &req.m_density {
            let full = fit_conditional_density(data, a, g, None, config)?;
            let fold_models = match &folds {
                Some(fa) => {
                    let mut v = Vec::with_capacity(fa.k as usize);
                    for fold in 0..fa.k as u16 {
                        let view = view_minus_fold(data, fa, fold).split(g, Some(a));
                        v.push(ConditionalDensity::fit_view(
                            &view,
                            None,
                            config.discrete_m_max_levels,
                        )?);
                    }
                    Some(v)
                }
                None => None,
            };
            m_density.insert(
                (a, g),
                FittedDensity {
                    full,
                    folds: fold_models,
                },
            );
        }
        Ok(NuisanceSet {
            config: config.clone(),
            means,
            pi_e,
            pi_o,
            domain_e,
            cdfs,
            m_density,
            folds,
        })
    }

    pub fn folds(&self) -> Option<&FoldAssignment> {
        self.folds.as_ref()
    }

    pub fn mean(&self, target: Target, a: u8, g: DomainTag) -> Result<&FittedMean> {
        self.means.get(&(target, a, g)).ok_or_else(|| {
            Error::MissingNuisance(format!(
                "conditional mean ({target:?}, a={a}, g={}) not fitted",
                g.as_char()
            ))
        })
    }

    /// Out-of-fold evaluation of a conditional mean at dataset row `i`.
    pub fn mean_at(&self, target: Target, a: u8, g: DomainTag, i: usize, x: &[f64]) -> Result<f64> {
        Ok(self.mean(target, a, g)?.at_row(self.folds.as_ref(), i, x))
    }

    pub fn pi_e(&self) -> Result<&FittedProp> {
        self.pi_e
            .as_ref()
            .ok_or_else(|| Error::MissingNuisance("experimental propensity not fitted".into()))
    }

    pub fn pi_o(&self) -> Result<&FittedProp> {
        self.pi_o
            .as_ref()
            .ok_or_else(|| Error::MissingNuisance("observational propensity not fitted".into()))
    }

    pub fn domain_score(&self) -> Result<&FittedProp> {
        self.domain_e
            .as_ref()
            .ok_or_else(|| Error::MissingNuisance("domain score not fitted".into()))
    }

    pub fn pi_e_at(&self, i: usize, x: &[f64]) -> Result<f64> {
        Ok(self.pi_e()?.at_row(self.folds.as_ref(), i, x))
    }

    pub fn pi_o_at(&self, i: usize, x: &[f64]) -> Result<f64> {
        Ok(self.pi_o()?.at_row(self.folds.as_ref(), i, x))
    }

    pub fn domain_at(&self, i: usize, x: &[f64]) -> Result<f64> {
        Ok(self.domain_score()?.at_row(self.folds.as_ref(), i, x))
    }

    pub fn cdf(&self, target: Target, a: u8, g: DomainTag) -> Result<&ConditionalCdf> {
        self.cdfs.get(&(target, a, g)).ok_or_else(|| {
            Error::MissingNuisance(format!(
                "conditional cdf ({target:?}, a={a}, g={}) not fitted",
                g.as_char()
            ))
        })
    }

    pub fn m_density(&self, a: u8, g: DomainTag) -> Result<&FittedDensity> {
        self.m_density.get(&(a, g)).ok_or_else(|| {
            Error::MissingNuisance(format!(
                "short-term outcome density (a={a}, g={}) not fitted",
                g.as_char()
            ))
        })
    }

    /// Replace a fitted mean (robustness audits corrupt slots this way).
    pub fn override_mean(&mut self, key: MeanKey, fit: FittedMean) {
        self.means.insert(key, fit);
    }

    pub fn take_mean(&self, key: MeanKey) -> Option<&FittedMean> {
        self.means.get(&key)
    }

    /// Corrupt a conditional-mean slot in place (audit harness).
    pub fn corrupt_mean(&mut self, key: MeanKey, scale: f64, shift: f64) {
        if let Some(m) = self.means.get(&key) {
            let c = m.corrupted(scale, shift);
            self.means.insert(key, c);
        }
    }

    pub fn corrupt_pi_e(&mut self, logit_shift: f64) {
        if let Some(p) = &self.pi_e {
            self.pi_e = Some(p.corrupted(logit_shift));
        }
    }

    pub fn corrupt_pi_o(&mut self, logit_shift: f64) {
        if let Some(p) = &self.pi_o {
            self.pi_o = Some(p.corrupted(logit_shift));
        }
    }

    pub fn corrupt_domain(&mut self, logit_shift: f64) {
        if let Some(p) = &self.domain_e {
            self.domain_e = Some(p.corrupted(logit_shift));
        }
    }

    pub fn corrupt_m_density(&mut self, key: (u8, DomainTag), rate: f64) {
        if let Some(d) = self.m_density.get(&key) {
            let c = d.corrupted(rate);
            self.m_density.insert(key, c);
        }
    }
}
