//! Typed container and validation for pooled experimental/observational samples.
//!
//! A [`FusedDataset`] holds rows from two domains: an experimental domain
//! where treatment was randomized and only the short-term outcome is recorded,
//! and an observational domain where both outcomes are recorded but treatment
//! may be confounded. Validation enforces the schema invariants once; the
//! dataset is immutable afterwards and safe to share across threads.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};

/// Which domain a row was sampled from. Serialized as `"E"` / `"O"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DomainTag {
    Experimental,
    Observational,
}

impl DomainTag {
    pub fn as_char(self) -> char {
        match self {
            DomainTag::Experimental => 'E',
            DomainTag::Observational => 'O',
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "E" => Ok(DomainTag::Experimental),
            "O" => Ok(DomainTag::Observational),
            other => Err(Error::Validation(format!(
                "domain tag must be E or O, got {other:?}"
            ))),
        }
    }
}

/// Role of the auxiliary `z` column, when present.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZRole {
    /// No auxiliary variable.
    None,
    /// Bespoke instrument: binary, required on observational rows; the
    /// instrument estimators additionally need it on experimental rows.
    Bsiv,
    /// Confounder proxy: required on observational rows only. Values on
    /// experimental rows are accepted and ignored.
    Proxy,
}

/// One sampled unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Domain the row came from.
    pub g: DomainTag,
    /// Binary treatment.
    pub a: u8,
    /// Covariate vector, shared dimension across the dataset.
    pub x: Vec<f64>,
    /// Short-term outcome. Absent only under the relaxed schema that models a
    /// short-term outcome unrecorded in the observational domain.
    pub m: Option<f64>,
    /// Long-term outcome; present exactly on observational rows.
    pub y: Option<f64>,
    /// Auxiliary variable (instrument or proxy), per [`ZRole`].
    pub z: Option<f64>,
}

impl Observation {
    /// Short-term outcome, erroring when the relaxed schema left it blank.
    pub fn m_req(&self) -> Result<f64> {
        self.m
            .ok_or_else(|| Error::Validation("short-term outcome missing on row".into()))
    }
}

/// Schema options applied at validation time.
#[derive(Debug, Clone, Copy)]
pub struct SchemaOptions {
    pub z_role: ZRole,
    /// Allow blank `m` on observational rows (bespoke-instrument estimators
    /// for the unobserved-short-term-outcome case).
    pub allow_missing_m_observational: bool,
}

impl Default for SchemaOptions {
    fn default() -> Self {
        SchemaOptions {
            z_role: ZRole::None,
            allow_missing_m_observational: false,
        }
    }
}

/// Validated, immutable pooled sample.
#[derive(Debug, Clone)]
pub struct FusedDataset {
    rows: Vec<Observation>,
    dim: usize,
    z_role: ZRole,
    /// Row indices sorted by full row content. Estimators iterate in this
    /// order so results are invariant to the input row order bit-for-bit.
    canonical: Vec<u32>,
}

fn total_cmp_opt(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => x.total_cmp(&y),
    }
}

fn cmp_rows(a: &Observation, b: &Observation) -> Ordering {
    (a.g, a.a)
        .cmp(&(b.g, b.a))
        .then_with(|| {
            for (xa, xb) in a.x.iter().zip(b.x.iter()) {
                let c = xa.total_cmp(xb);
                if c != Ordering::Equal {
                    return c;
                }
            }
            Ordering::Equal
        })
        .then_with(|| total_cmp_opt(a.m, b.m))
        .then_with(|| total_cmp_opt(a.y, b.y))
        .then_with(|| total_cmp_opt(a.z, b.z))
}

impl FusedDataset {
    /// Validate rows against the default schema and build the dataset.
    pub fn from_rows(rows: Vec<Observation>, z_role: ZRole) -> Result<Self> {
        Self::from_rows_with(
            rows,
            SchemaOptions {
                z_role,
                ..SchemaOptions::default()
            },
        )
    }

    /// Validate rows against explicit schema options.
    pub fn from_rows_with(rows: Vec<Observation>, opts: SchemaOptions) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset("dataset has no rows".into()));
        }
        let dim = rows[0].x.len();
        let mut cell = [[0usize; 2]; 2];
        for (i, r) in rows.iter().enumerate() {
            let at = |msg: &str| format!("row {i}: {msg}");
            if r.a > 1 {
                return Err(Error::NonBinaryTreatment(at(&format!(
                    "treatment {} not in {{0,1}}",
                    r.a
                ))));
            }
            if r.x.len() != dim {
                return Err(Error::Validation(at(&format!(
                    "covariate length {} != {}",
                    r.x.len(),
                    dim
                ))));
            }
            if r.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(at("non-finite covariate")));
            }
            match r.m {
                Some(m) if !m.is_finite() => {
                    return Err(Error::Validation(at("non-finite short-term outcome")))
                }
                None if r.g == DomainTag::Experimental || !opts.allow_missing_m_observational => {
                    return Err(Error::Validation(at("missing short-term outcome")))
                }
                _ => {}
            }
            match (r.g, r.y) {
                (DomainTag::Experimental, Some(_)) => {
                    return Err(Error::LongTermOutcomeInExperiment(at(
                        "long-term outcome present on experimental row",
                    )))
                }
                (DomainTag::Observational, None) => {
                    return Err(Error::Validation(at(
                        "long-term outcome missing on observational row",
                    )))
                }
                (_, Some(y)) if !y.is_finite() => {
                    return Err(Error::Validation(at("non-finite long-term outcome")))
                }
                _ => {}
            }
            if let Some(z) = r.z {
                if !z.is_finite() {
                    return Err(Error::Validation(at("non-finite z")));
                }
            }
            if opts.z_role != ZRole::None && r.g == DomainTag::Observational && r.z.is_none() {
                return Err(Error::Validation(at("z required on observational rows")));
            }
            let gi = (r.g == DomainTag::Observational) as usize;
            cell[gi][r.a as usize] += 1;
        }
        for (gi, g) in [DomainTag::Experimental, DomainTag::Observational]
            .iter()
            .enumerate()
        {
            for a in 0..2 {
                if cell[gi][a] == 0 {
                    return Err(Error::EmptyArm(format!(
                        "no rows with g={} a={a}",
                        g.as_char()
                    )));
                }
            }
        }
        let mut canonical: Vec<u32> = (0..rows.len() as u32).collect();
        canonical.sort_by(|&i, &j| cmp_rows(&rows[i as usize], &rows[j as usize]));
        Ok(FusedDataset {
            rows,
            dim,
            z_role: opts.z_role,
            canonical,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Covariate dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn z_role(&self) -> ZRole {
        self.z_role
    }

    /// Rows in input order.
    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &Observation {
        &self.rows[i]
    }

    /// Row indices in content order. Iterating in this order makes every
    /// downstream reduction independent of the input permutation.
    pub fn canonical_indices(&self) -> &[u32] {
        &self.canonical
    }

    /// View of all rows, in input order.
    pub fn view(&self) -> DatasetView<'_> {
        DatasetView {
            data: self,
            idx: (0..self.rows.len() as u32).collect(),
        }
    }

    /// Subset view by domain and optionally by arm; row order preserved.
    pub fn split(&self, g: DomainTag, a: Option<u8>) -> DatasetView<'_> {
        self.view().split(g, a)
    }

    /// Relative frequency of an event over (domain, arm).
    pub fn empirical_prob<F>(&self, event: F) -> Result<f64>
    where
        F: Fn(DomainTag, u8) -> bool,
    {
        if self.rows.is_empty() {
            return Err(Error::EmptyDataset("empirical_prob on empty dataset".into()));
        }
        let hits = self
            .canonical
            .iter()
            .filter(|&&i| {
                let r = &self.rows[i as usize];
                event(r.g, r.a)
            })
            .count();
        Ok(hits as f64 / self.rows.len() as f64)
    }

    /// Count per (domain, arm) cell, keyed `[E0, E1, O0, O1]`.
    pub fn cell_counts(&self) -> [usize; 4] {
        let mut c = [0usize; 4];
        for r in &self.rows {
            let gi = (r.g == DomainTag::Observational) as usize;
            c[gi * 2 + r.a as usize] += 1;
        }
        c
    }
}

/// Read-only subset of a dataset; holds indices, never copies rows.
#[derive(Debug, Clone)]
pub struct DatasetView<'a> {
    data: &'a FusedDataset,
    idx: Vec<u32>,
}

impl<'a> DatasetView<'a> {
    pub(crate) fn from_indices(data: &'a FusedDataset, idx: Vec<u32>) -> Self {
        DatasetView { data, idx }
    }

    pub fn dataset(&self) -> &'a FusedDataset {
        self.data
    }

    pub fn len(&self) -> usize {
        self.idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    /// Indices into the parent dataset, in view order.
    pub fn indices(&self) -> &[u32] {
        &self.idx
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &'a Observation)> + '_ {
        self.idx.iter().map(|&i| (i, self.data.row(i as usize)))
    }

    /// Further restrict the view; idempotent when the filter already holds.
    pub fn split(&self, g: DomainTag, a: Option<u8>) -> DatasetView<'a> {
        let idx = self
            .idx
            .iter()
            .copied()
            .filter(|&i| {
                let r = self.data.row(i as usize);
                r.g == g && a.map_or(true, |want| r.a == want)
            })
            .collect();
        DatasetView {
            data: self.data,
            idx,
        }
    }

    /// View restricted to rows whose binary `z` equals `z`.
    pub fn split_z(&self, z: u8) -> DatasetView<'a> {
        let idx = self
            .idx
            .iter()
            .copied()
            .filter(|&i| self.data.row(i as usize).z == Some(z as f64))
            .collect();
        DatasetView {
            data: self.data,
            idx,
        }
    }

    /// Same subset, but ordered canonically (content order).
    pub fn canonical(&self) -> DatasetView<'a> {
        let mut idx = self.idx.clone();
        idx.sort_by(|&i, &j| {
            cmp_rows(self.data.row(i as usize), self.data.row(j as usize)).then(i.cmp(&j))
        });
        DatasetView {
            data: self.data,
            idx,
        }
    }

    /// Mean of a row functional over the view, reduced in canonical order.
    pub fn mean<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&Observation) -> f64,
    {
        if self.idx.is_empty() {
            return Err(Error::EmptyCell("mean over empty view".into()));
        }
        let v = self.canonical();
        let sum: f64 = v.iter().map(|(_, r)| f(r)).sum();
        Ok(sum / v.len() as f64)
    }
}

/// Validation helper used by tests and the row-permutation property: a string
/// key identifying row content.
pub fn observation_sort_cmp(a: &Observation, b: &Observation) -> Ordering {
    cmp_rows(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn obs(g: DomainTag, a: u8, x: f64, m: f64, y: Option<f64>) -> Observation {
        Observation {
            g,
            a,
            x: vec![x],
            m: Some(m),
            y,
            z: None,
        }
    }

    fn four_cell_rows() -> Vec<Observation> {
        vec![
            obs(DomainTag::Experimental, 0, 0.1, 1.0, None),
            obs(DomainTag::Experimental, 1, -0.2, 2.0, None),
            obs(DomainTag::Observational, 0, 0.3, 1.5, Some(3.0)),
            obs(DomainTag::Observational, 1, 0.4, 2.5, Some(4.0)),
        ]
    }

    #[test]
    fn minimal_valid_dataset() {
        let d = FusedDataset::from_rows(four_cell_rows(), ZRole::None).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.dim(), 1);
    }

    #[test]
    fn y_on_experimental_row_rejected() {
        let mut rows = four_cell_rows();
        rows[0].y = Some(3.2);
        let err = FusedDataset::from_rows(rows, ZRole::None).unwrap_err();
        assert_eq!(err.code(), "long-term-outcome-in-experiment");
    }

    #[test]
    fn missing_domain_rejected() {
        let rows = vec![
            obs(DomainTag::Observational, 0, 0.3, 1.5, Some(3.0)),
            obs(DomainTag::Observational, 1, 0.4, 2.5, Some(4.0)),
        ];
        let err = FusedDataset::from_rows(rows, ZRole::None).unwrap_err();
        assert_eq!(err.code(), "empty-arm");
    }

    #[test]
    fn split_partitions_and_is_idempotent() {
        let d = FusedDataset::from_rows(four_cell_rows(), ZRole::None).unwrap();
        let o = d.split(DomainTag::Observational, None);
        let o1 = o.split(DomainTag::Observational, Some(1));
        assert_eq!(o1.len(), 1);
        assert_eq!(
            o.split(DomainTag::Observational, None).indices(),
            o.indices()
        );
        let e = d.split(DomainTag::Experimental, None);
        assert_eq!(
            e.split(DomainTag::Experimental, Some(0)).len()
                + e.split(DomainTag::Experimental, Some(1)).len(),
            e.len()
        );
    }

    #[test]
    fn empirical_prob_counts() {
        let mut rows = four_cell_rows();
        for _ in 0..3 {
            rows.push(obs(DomainTag::Observational, 1, 0.0, 1.0, Some(0.0)));
        }
        for _ in 0..3 {
            rows.push(obs(DomainTag::Experimental, 0, 0.0, 1.0, None));
        }
        let d = FusedDataset::from_rows(rows, ZRole::None).unwrap();
        let p = d
            .empirical_prob(|g, a| g == DomainTag::Observational && a == 1)
            .unwrap();
        assert_eq!(p, 0.4);
        let p0 = d
            .empirical_prob(|g, a| g == DomainTag::Observational && a == 0)
            .unwrap();
        let p_o = d
            .empirical_prob(|g, _| g == DomainTag::Observational)
            .unwrap();
        assert_eq!(p + p0, p_o);
    }

    #[test]
    fn missing_m_requires_relaxed_schema() {
        let mut rows = four_cell_rows();
        rows[2].m = None;
        assert!(FusedDataset::from_rows(rows.clone(), ZRole::None).is_err());
        let d = FusedDataset::from_rows_with(
            rows,
            SchemaOptions {
                z_role: ZRole::None,
                allow_missing_m_observational: true,
            },
        )
        .unwrap();
        assert_eq!(d.len(), 4);
    }

    #[test]
    fn z_required_on_observational_rows_when_role_set() {
        let mut rows = four_cell_rows();
        rows[2].z = Some(1.0);
        // rows[3] lacks z
        let err = FusedDataset::from_rows(rows, ZRole::Proxy).unwrap_err();
        assert_eq!(err.code(), "validation");
    }
}
