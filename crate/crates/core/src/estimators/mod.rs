//! Estimators for the long-term ATE and ETT, one module per identification
//! strategy, all reducing to sample averages over the pooled dataset with
//! nuisances supplied by [`crate::nuisance::NuisanceSet`].

pub mod bsiv;
pub mod equiconf;
pub mod latent_unconf;
pub mod proximal;
pub mod qq;
pub mod robust_if;

use alloc::string::String;
use alloc::vec::Vec;

use crate::data::{DomainTag, FusedDataset};
use crate::error::Result;

/// Which causal contrast a report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimand {
    Ate,
    Ett,
}

impl Estimand {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimand::Ate => "ate",
            Estimand::Ett => "ett",
        }
    }
}

/// Estimator-side quality indicators carried along with the point estimate.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    /// Times a propensity-type denominator was caught at the trim boundary.
    pub trim_hits: usize,
    /// Minimum instrument relevance margin over evaluated rows.
    pub relevance_margin: Option<f64>,
    /// Final conditional-moment objective of the outcome bridge solve.
    pub bridge_residual_h: Option<f64>,
    /// Final conditional-moment objective of the treatment bridge solve.
    pub bridge_residual_q: Option<f64>,
    /// Grid points where the debiased counterfactual CDF needed running-max
    /// monotonization.
    pub monotonicity_fixes: Option<usize>,
}

/// Point estimate plus provenance, sample balance, and diagnostics.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub estimate: f64,
    /// Influence-function standard error; only the one-step strategies set it.
    pub se: Option<f64>,
    pub estimand: Estimand,
    pub strategy: String,
    /// Rows per (domain, arm) cell: [E0, E1, O0, O1].
    pub cell_counts: [usize; 4],
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
}

impl EstimateReport {
    pub fn new(estimate: f64, estimand: Estimand, strategy: &str, data: &FusedDataset) -> Self {
        EstimateReport {
            estimate,
            se: None,
            estimand,
            strategy: String::from(strategy),
            cell_counts: data.cell_counts(),
            diagnostics: Diagnostics::default(),
            warnings: Vec::new(),
        }
    }
}

/// Empirical p(A=1 | G=O).
pub(crate) fn p_a1_given_o(data: &FusedDataset) -> Result<f64> {
    let o = data.split(DomainTag::Observational, None);
    let t = data.split(DomainTag::Observational, Some(1));
    if o.is_empty() {
        return Err(crate::error::Error::EmptyCell(
            "no observational rows".into(),
        ));
    }
    Ok(t.len() as f64 / o.len() as f64)
}

/// Empirical p(A=1, G=O).
pub(crate) fn p_a1_and_o(data: &FusedDataset) -> f64 {
    data.split(DomainTag::Observational, Some(1)).len() as f64 / data.len() as f64
}

/// Empirical p(G=O).
pub(crate) fn p_o(data: &FusedDataset) -> f64 {
    data.split(DomainTag::Observational, None).len() as f64 / data.len() as f64
}
