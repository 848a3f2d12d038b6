//! Finite-support population worlds with exact counterfactual truth.
//!
//! A [`DiscreteWorld`] specifies a structural model over binary latent
//! confounder `U`, covariate `X`, optional auxiliary `Z`, treatment `A`, a
//! two-level short-term outcome `M`, and a two-point long-term outcome `Y`.
//! Every conditional and counterfactual quantity is computed by direct
//! summation over the joint table, which makes the worlds usable as exact
//! oracles for the identification formulas. Constructors verify the
//! conditional-independence and equality constraints their assumption set
//! claims, to tolerance 1e-14, at build time.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::DomainTag;
use crate::error::{Error, Result};

/// Assumptions a world claims to satisfy; used to route certificates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorldAssumption {
    LatentExchangeability,
    InternalValidity,
    ExternalValidity,
    LatentUnconfoundedness,
    EquiConfMarginal,
    EquiConfConditional,
    QuantileQuantile,
    BsivRelevance,
    BsivEquiAssociation,
    BsivHomogeneityContrasts,
    BsivHomogeneityStrong,
    ProxyIndependence,
    BridgeExistence,
}

/// One structural world on finite supports.
#[derive(Debug, Clone)]
pub struct DiscreteWorld {
    pub name: &'static str,
    /// Number of Z levels; 1 means "no auxiliary variable".
    pub nz: usize,
    /// Observable values of the two M levels.
    pub m_levels: [f64; 2],
    /// Joint P(U=u, X=x).
    pub p_ux: [[f64; 2]; 2],
    /// P(G=E | x).
    pub p_e_given_x: [f64; 2],
    /// P(Z=1 | u, x); ignored when `nz == 1`.
    pub p_z1: [[f64; 2]; 2],
    /// P(A=1 | x, G=E); randomized given X.
    pub p_a_exp: [f64; 2],
    /// P(A=1 | u, x, z, G=O).
    pub p_a_obs: [[[f64; 2]; 2]; 2],
    /// P(M^{(a)} = high level | u, x, z), indexed [a][u][x][z].
    pub p_m_hi: [[[[f64; 2]; 2]; 2]; 2],
    /// E[Y^{(a)} | M^{(a)} = level m_idx, u, x, z], indexed [a][m][u][x][z].
    pub y_mean: [[[[[f64; 2]; 2]; 2]; 2]; 2],
    /// Y is y_mean ± y_spread with probability 1/2 each.
    pub y_spread: f64,
    pub claims: Vec<WorldAssumption>,
}

/// Flattened cell of the observed-data joint table.
#[derive(Debug, Clone, Copy)]
pub struct Cell {
    pub g: DomainTag,
    pub u: usize,
    pub x: usize,
    pub z: usize,
    pub a: usize,
    /// Index into `m_levels`.
    pub m: usize,
    pub prob: f64,
    pub y_mean: f64,
}

impl DiscreteWorld {
    fn p_a(&self, g: DomainTag, u: usize, x: usize, z: usize, a: usize) -> f64 {
        let p1 = match g {
            DomainTag::Experimental => self.p_a_exp[x],
            DomainTag::Observational => self.p_a_obs[u][x][z],
        };
        if a == 1 {
            p1
        } else {
            1.0 - p1
        }
    }

    fn p_z(&self, u: usize, x: usize, z: usize) -> f64 {
        if self.nz == 1 {
            return if z == 0 { 1.0 } else { 0.0 };
        }
        if z == 1 {
            self.p_z1[u][x]
        } else {
            1.0 - self.p_z1[u][x]
        }
    }

    fn p_m(&self, a: usize, u: usize, x: usize, z: usize, m: usize) -> f64 {
        let hi = self.p_m_hi[a][u][x][z];
        if m == 1 {
            hi
        } else {
            1.0 - hi
        }
    }

    fn p_g(&self, x: usize, g: DomainTag) -> f64 {
        match g {
            DomainTag::Experimental => self.p_e_given_x[x],
            DomainTag::Observational => 1.0 - self.p_e_given_x[x],
        }
    }

    /// Iterate all observed-data cells with the factual M distribution.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for g in [DomainTag::Experimental, DomainTag::Observational] {
            for u in 0..2 {
                for x in 0..2 {
                    for z in 0..self.nz {
                        for a in 0..2 {
                            for m in 0..2 {
                                let prob = self.p_ux[u][x]
                                    * self.p_g(x, g)
                                    * self.p_z(u, x, z)
                                    * self.p_a(g, u, x, z, a)
                                    * self.p_m(a, u, x, z, m);
                                out.push(Cell {
                                    g,
                                    u,
                                    x,
                                    z,
                                    a,
                                    m,
                                    prob,
                                    y_mean: self.y_mean[a][m][u][x][z],
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Counterfactual cells: `A` follows the factual assignment while `M` and
    /// `Y` are the potential versions under `a_cf`.
    pub fn cf_cells(&self, a_cf: usize) -> Vec<Cell> {
        let mut out = Vec::new();
        for g in [DomainTag::Experimental, DomainTag::Observational] {
            for u in 0..2 {
                for x in 0..2 {
                    for z in 0..self.nz {
                        for a in 0..2 {
                            for m in 0..2 {
                                let prob = self.p_ux[u][x]
                                    * self.p_g(x, g)
                                    * self.p_z(u, x, z)
                                    * self.p_a(g, u, x, z, a)
                                    * self.p_m(a_cf, u, x, z, m);
                                out.push(Cell {
                                    g,
                                    u,
                                    x,
                                    z,
                                    a,
                                    m,
                                    prob,
                                    y_mean: self.y_mean[a_cf][m][u][x][z],
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn prob<F: Fn(&Cell) -> bool>(&self, f: F) -> f64 {
        self.cells().iter().filter(|c| f(c)).map(|c| c.prob).sum()
    }

    /// E[v(cell) | filter] over the observed joint.
    pub fn mean_given<V, F>(&self, v: V, f: F) -> Result<f64>
    where
        V: Fn(&Cell) -> f64,
        F: Fn(&Cell) -> bool,
    {
        let mut num = 0.0;
        let mut den = 0.0;
        for c in self.cells() {
            if f(&c) {
                num += c.prob * v(&c);
                den += c.prob;
            }
        }
        if den <= 0.0 {
            return Err(Error::ZeroProbabilityCell(
                "conditioning event has probability zero".into(),
            ));
        }
        Ok(num / den)
    }

    /// E[v | filter] under the counterfactual-`a` table.
    pub fn cf_mean_given<V, F>(&self, a_cf: usize, v: V, f: F) -> Result<f64>
    where
        V: Fn(&Cell) -> f64,
        F: Fn(&Cell) -> bool,
    {
        let mut num = 0.0;
        let mut den = 0.0;
        for c in self.cf_cells(a_cf) {
            if f(&c) {
                num += c.prob * v(&c);
                den += c.prob;
            }
        }
        if den <= 0.0 {
            return Err(Error::ZeroProbabilityCell(
                "conditioning event has probability zero".into(),
            ));
        }
        Ok(num / den)
    }

    pub fn m_value(&self, m_idx: usize) -> f64 {
        self.m_levels[m_idx]
    }

    /// E[Y | A=a, X=x, Z=z, G] and friends are all expressible via
    /// `mean_given`; the estimators-facing oracles live in `enumerate`.
    ///
    /// Exact average treatment effect in the observational population.
    pub fn true_ate(&self) -> f64 {
        let y1 = self
            .cf_mean_given(1, |c| c.y_mean, |c| c.g == DomainTag::Observational)
            .expect("observational domain nonempty");
        let y0 = self
            .cf_mean_given(0, |c| c.y_mean, |c| c.g == DomainTag::Observational)
            .expect("observational domain nonempty");
        y1 - y0
    }

    /// Exact effect of treatment on the treated.
    pub fn true_ett(&self) -> f64 {
        let f = |c: &Cell| c.g == DomainTag::Observational && c.a == 1;
        let y1 = self.cf_mean_given(1, |c| c.y_mean, f).expect("treated cell");
        let y0 = self.cf_mean_given(0, |c| c.y_mean, f).expect("treated cell");
        y1 - y0
    }

    /// Exact E[Y^{(a)} | G=O].
    pub fn true_theta(&self, a: usize) -> f64 {
        self.cf_mean_given(a, |c| c.y_mean, |c| c.g == DomainTag::Observational)
            .expect("observational domain nonempty")
    }

    /// Naive confounded contrast E[Y|A=1,G=O] - E[Y|A=0,G=O].
    pub fn naive_obs_diff(&self) -> f64 {
        let o = DomainTag::Observational;
        let m1 = self
            .mean_given(|c| c.y_mean, |c| c.g == o && c.a == 1)
            .expect("cell");
        let m0 = self
            .mean_given(|c| c.y_mean, |c| c.g == o && c.a == 0)
            .expect("cell");
        m1 - m0
    }

    // ---- certificates ------------------------------------------------

    fn check(residual: f64, what: &str, errs: &mut Vec<String>) {
        if residual.abs() > 1e-13 {
            errs.push(format!("{what}: residual {residual:.3e}"));
        }
    }

    /// Verify every claimed assumption against the table, tolerance 1e-13.
    pub fn certify(&self) -> core::result::Result<(), String> {
        let mut errs: Vec<String> = Vec::new();
        let o = DomainTag::Observational;
        for claim in &self.claims {
            match claim {
                WorldAssumption::LatentExchangeability => {
                    // A independent of (M^(a), Y^(a)) given (U, X, Z, G):
                    // assignment tables never read potential outcomes, so the
                    // factorization is structural; check that the potential
                    // outcome law given (u,x,z) is assignment-free by design.
                    // Nothing numeric to compare; skip.
                }
                WorldAssumption::InternalValidity => {
                    // In E the assignment depends on x only, so p(u,z | x, A, G=E)
                    // must not vary with A.
                    for x in 0..2 {
                        for u in 0..2 {
                            for z in 0..self.nz {
                                let joint = |a: usize| {
                                    self.prob(|c| {
                                        c.g == DomainTag::Experimental
                                            && c.x == x
                                            && c.u == u
                                            && c.z == z
                                            && c.a == a
                                    }) / self.prob(|c| {
                                        c.g == DomainTag::Experimental && c.x == x && c.a == a
                                    })
                                };
                                Self::check(
                                    joint(1) - joint(0),
                                    "internal validity p(u,z|x,a,E)",
                                    &mut errs,
                                );
                            }
                        }
                    }
                }
                WorldAssumption::ExternalValidity => {
                    // G depends on x only: p(u,z | x, G) equal across domains.
                    for x in 0..2 {
                        for u in 0..2 {
                            for z in 0..self.nz {
                                let pg = |g: DomainTag| {
                                    self.prob(|c| c.g == g && c.x == x && c.u == u && c.z == z)
                                        / self.prob(|c| c.g == g && c.x == x)
                                };
                                Self::check(
                                    pg(DomainTag::Experimental) - pg(o),
                                    "external validity p(u,z|x,G)",
                                    &mut errs,
                                );
                            }
                        }
                    }
                }
                WorldAssumption::LatentUnconfoundedness => {
                    // Y^{(a)} law given (X, M^{(a)}) free of A in the
                    // observational domain.
                    for a_cf in 0..2 {
                        for x in 0..2 {
                            for m in 0..2 {
                                let cond = |a_obs: usize| {
                                    self.cf_mean_given(
                                        a_cf,
                                        |c| c.y_mean,
                                        |c| c.g == o && c.x == x && c.m == m && c.a == a_obs,
                                    )
                                    .unwrap_or(0.0)
                                };
                                Self::check(
                                    cond(1) - cond(0),
                                    "latent unconfoundedness E[Y^(a)|x,m,a,O]",
                                    &mut errs,
                                );
                            }
                        }
                    }
                }
                WorldAssumption::EquiConfMarginal => {
                    for a_cf in 0..2 {
                        let bias = |v: &dyn Fn(&Cell) -> f64| -> f64 {
                            let b0 = self
                                .cf_mean_given(a_cf, v, |c| c.g == o && c.a == 0)
                                .unwrap();
                            let b1 = self
                                .cf_mean_given(a_cf, v, |c| c.g == o && c.a == 1)
                                .unwrap();
                            b0 - b1
                        };
                        let m_bias = bias(&|c: &Cell| self.m_value(c.m));
                        let y_bias = bias(&|c: &Cell| c.y_mean);
                        Self::check(m_bias - y_bias, "marginal equi-confounding", &mut errs);
                    }
                }
                WorldAssumption::EquiConfConditional => {
                    for a_cf in 0..2 {
                        for x in 0..2 {
                            let bias = |v: &dyn Fn(&Cell) -> f64| -> f64 {
                                let b0 = self
                                    .cf_mean_given(a_cf, v, |c| c.g == o && c.a == 0 && c.x == x)
                                    .unwrap();
                                let b1 = self
                                    .cf_mean_given(a_cf, v, |c| c.g == o && c.a == 1 && c.x == x)
                                    .unwrap();
                                b0 - b1
                            };
                            let m_bias = bias(&|c: &Cell| self.m_value(c.m));
                            let y_bias = bias(&|c: &Cell| c.y_mean);
                            Self::check(
                                m_bias - y_bias,
                                "conditional equi-confounding",
                                &mut errs,
                            );
                        }
                    }
                }
                WorldAssumption::QuantileQuantile => {
                    // Both 0-arm potential outcomes are deterministic strictly
                    // increasing functions of U given x, which forces the
                    // quantile-quantile maps to coincide. Verify monotonicity
                    // and determinism.
                    for x in 0..2 {
                        for u in 0..2 {
                            for z in 0..self.nz {
                                let det = self.p_m_hi[0][u][x][z];
                                if det != 0.0 && det != 1.0 {
                                    errs.push(format!(
                                        "qq world: M^(0) not deterministic at u={u},x={x}"
                                    ));
                                }
                            }
                        }
                        if self.y_spread != 0.0 {
                            errs.push("qq world: Y must be deterministic".into());
                        }
                        let y0 = self.y_mean[0][usize::from(self.p_m_hi[0][0][x][0] > 0.5)][0][x][0];
                        let y1 = self.y_mean[0][usize::from(self.p_m_hi[0][1][x][0] > 0.5)][1][x][0];
                        if y1 <= y0 {
                            errs.push(format!("qq world: Y^(0) not increasing in U at x={x}"));
                        }
                        let m0 = self.p_m_hi[0][0][x][0];
                        let m1 = self.p_m_hi[0][1][x][0];
                        if m1 <= m0 {
                            errs.push(format!("qq world: M^(0) not increasing in U at x={x}"));
                        }
                    }
                }
                WorldAssumption::BsivRelevance => {
                    for x in 0..2 {
                        let pa = |z: usize| {
                            self.mean_given(|c| c.a as f64, |c| c.g == o && c.x == x && c.z == z)
                                .unwrap()
                        };
                        if (pa(1) - pa(0)).abs() < 0.05 {
                            errs.push(format!("relevance margin below 0.05 at x={x}"));
                        }
                    }
                }
                WorldAssumption::BsivEquiAssociation => {
                    for a_cf in 0..2 {
                        for x in 0..2 {
                            let zc = |v: &dyn Fn(&Cell) -> f64| -> f64 {
                                let c1 = self
                                    .cf_mean_given(a_cf, v, |c| c.g == o && c.x == x && c.z == 1)
                                    .unwrap();
                                let c0 = self
                                    .cf_mean_given(a_cf, v, |c| c.g == o && c.x == x && c.z == 0)
                                    .unwrap();
                                c1 - c0
                            };
                            let m_c = zc(&|c: &Cell| self.m_value(c.m));
                            let y_c = zc(&|c: &Cell| c.y_mean);
                            Self::check(m_c - y_c, "bsiv equi-association", &mut errs);
                        }
                    }
                }
                WorldAssumption::BsivHomogeneityContrasts => {
                    // Effect contrast (Y-effect minus M-effect) and bias
                    // contrast both free of Z given (A, X).
                    for a_obs in 0..2 {
                        for x in 0..2 {
                            let eff = |z: usize| -> f64 {
                                let f =
                                    |c: &Cell| c.g == o && c.a == a_obs && c.x == x && c.z == z;
                                let dy = self.cf_mean_given(1, |c| c.y_mean, f).unwrap()
                                    - self.cf_mean_given(0, |c| c.y_mean, f).unwrap();
                                let dm = self
                                    .cf_mean_given(1, |c| self.m_value(c.m), f)
                                    .unwrap()
                                    - self
                                        .cf_mean_given(0, |c| self.m_value(c.m), f)
                                        .unwrap();
                                dy - dm
                            };
                            Self::check(eff(1) - eff(0), "bsiv effect-contrast homogeneity", &mut errs);
                        }
                    }
                    for a_cf in 0..2 {
                        for x in 0..2 {
                            let bias = |z: usize| -> f64 {
                                let fa = |a_obs: usize| {
                                    move |c: &Cell| {
                                        c.g == o && c.a == a_obs && c.x == x && c.z == z
                                    }
                                };
                                let dy = self.cf_mean_given(a_cf, |c| c.y_mean, fa(1)).unwrap()
                                    - self.cf_mean_given(a_cf, |c| c.y_mean, fa(0)).unwrap();
                                let dm = self
                                    .cf_mean_given(a_cf, |c| self.m_value(c.m), fa(1))
                                    .unwrap()
                                    - self
                                        .cf_mean_given(a_cf, |c| self.m_value(c.m), fa(0))
                                        .unwrap();
                                dy - dm
                            };
                            Self::check(bias(1) - bias(0), "bsiv bias-contrast homogeneity", &mut errs);
                        }
                    }
                }
                WorldAssumption::BsivHomogeneityStrong => {
                    for a_obs in 0..2 {
                        for x in 0..2 {
                            let eff = |z: usize| -> f64 {
                                let f =
                                    |c: &Cell| c.g == o && c.a == a_obs && c.x == x && c.z == z;
                                self.cf_mean_given(1, |c| c.y_mean, f).unwrap()
                                    - self.cf_mean_given(0, |c| c.y_mean, f).unwrap()
                            };
                            Self::check(eff(1) - eff(0), "bsiv strong effect homogeneity", &mut errs);
                        }
                    }
                    for a_cf in 0..2 {
                        for x in 0..2 {
                            let bias = |z: usize| -> f64 {
                                let fa = |a_obs: usize| {
                                    move |c: &Cell| {
                                        c.g == o && c.a == a_obs && c.x == x && c.z == z
                                    }
                                };
                                self.cf_mean_given(a_cf, |c| c.y_mean, fa(1)).unwrap()
                                    - self.cf_mean_given(a_cf, |c| c.y_mean, fa(0)).unwrap()
                            };
                            Self::check(bias(1) - bias(0), "bsiv strong bias homogeneity", &mut errs);
                        }
                    }
                }
                WorldAssumption::ProxyIndependence => {
                    // Z independent of (M, Y) given (U, X, A) in O: the M and
                    // Y tables must not read z.
                    for a in 0..2 {
                        for u in 0..2 {
                            for x in 0..2 {
                                Self::check(
                                    self.p_m_hi[a][u][x][0] - self.p_m_hi[a][u][x][self.nz - 1],
                                    "proxy independence (M reads z)",
                                    &mut errs,
                                );
                                for m in 0..2 {
                                    Self::check(
                                        self.y_mean[a][m][u][x][0]
                                            - self.y_mean[a][m][u][x][self.nz - 1],
                                        "proxy independence (Y reads z)",
                                        &mut errs,
                                    );
                                }
                            }
                        }
                    }
                }
                WorldAssumption::BridgeExistence => {
                    if let Err(e) = self.solve_bridge_h_exact() {
                        errs.push(format!("outcome bridge does not exist: {e:?}"));
                    }
                    if let Err(e) = self.solve_bridge_q_exact() {
                        errs.push(format!("treatment bridge does not exist: {e:?}"));
                    }
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs.join("; "))
        }
    }

    // ---- exact bridge solves ------------------------------------------

    /// Solve the outcome bridge on the table: for each (a, x),
    /// `E[Y | z, a, x, O] = sum_m h(m, a, x) p(m | z, a, x, O)`.
    pub fn solve_bridge_h_exact(&self) -> Result<[[[f64; 2]; 2]; 2]> {
        if self.nz != 2 {
            return Err(Error::NoProxy("world has no auxiliary variable".into()));
        }
        let o = DomainTag::Observational;
        let mut h = [[[0.0f64; 2]; 2]; 2]; // [m][a][x]
        for a in 0..2 {
            for x in 0..2 {
                let mut mat = [[0.0f64; 2]; 2]; // [z][m]
                let mut rhs = [0.0f64; 2];
                for z in 0..2 {
                    for m in 0..2 {
                        mat[z][m] = self
                            .mean_given(
                                |c| (c.m == m) as u8 as f64,
                                |c| c.g == o && c.a == a && c.x == x && c.z == z,
                            )?;
                    }
                    rhs[z] = self.mean_given(
                        |c| c.y_mean,
                        |c| c.g == o && c.a == a && c.x == x && c.z == z,
                    )?;
                }
                let det = mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0];
                if det.abs() < 1e-10 {
                    return Err(Error::IllConditioned(format!(
                        "bridge system singular at a={a}, x={x}"
                    )));
                }
                h[0][a][x] = (rhs[0] * mat[1][1] - rhs[1] * mat[0][1]) / det;
                h[1][a][x] = (mat[0][0] * rhs[1] - mat[1][0] * rhs[0]) / det;
            }
        }
        Ok(h)
    }

    /// Solve the treatment bridge: for each (a, x),
    /// `sum_z q(z, a, x) p(z | m, a, x, O) = p(m|a,x,E) / (p(m|a,x,O) p(a|x,O))`.
    pub fn solve_bridge_q_exact(&self) -> Result<[[[f64; 2]; 2]; 2]> {
        if self.nz != 2 {
            return Err(Error::NoProxy("world has no auxiliary variable".into()));
        }
        let o = DomainTag::Observational;
        let e = DomainTag::Experimental;
        let mut q = [[[0.0f64; 2]; 2]; 2]; // [z][a][x]
        for a in 0..2 {
            for x in 0..2 {
                let p_a_x = self.mean_given(
                    |c| (c.a == a) as u8 as f64,
                    |c| c.g == o && c.x == x,
                )?;
                let mut mat = [[0.0f64; 2]; 2]; // [m][z]
                let mut rhs = [0.0f64; 2];
                for m in 0..2 {
                    for z in 0..2 {
                        mat[m][z] = self.mean_given(
                            |c| (c.z == z) as u8 as f64,
                            |c| c.g == o && c.a == a && c.x == x && c.m == m,
                        )?;
                    }
                    let pm_e = self.mean_given(
                        |c| (c.m == m) as u8 as f64,
                        |c| c.g == e && c.a == a && c.x == x,
                    )?;
                    let pm_o = self.mean_given(
                        |c| (c.m == m) as u8 as f64,
                        |c| c.g == o && c.a == a && c.x == x,
                    )?;
                    if pm_o <= 0.0 {
                        return Err(Error::ZeroProbabilityCell(format!(
                            "p(m|a,x,O) = 0 at m={m}, a={a}, x={x}"
                        )));
                    }
                    rhs[m] = pm_e / (pm_o * p_a_x);
                }
                let det = mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0];
                if det.abs() < 1e-10 {
                    return Err(Error::IllConditioned(format!(
                        "treatment bridge system singular at a={a}, x={x}"
                    )));
                }
                q[0][a][x] = (rhs[0] * mat[1][1] - rhs[1] * mat[0][1]) / det;
                q[1][a][x] = (mat[0][0] * rhs[1] - mat[1][0] * rhs[0]) / det;
            }
        }
        Ok(q)
    }
}

fn uniform_ux() -> [[f64; 2]; 2] {
    [[0.25, 0.25], [0.25, 0.25]]
}

fn fill_m<F: Fn(usize, usize, usize, usize) -> f64>(f: F) -> [[[[f64; 2]; 2]; 2]; 2] {
    let mut out = [[[[0.0; 2]; 2]; 2]; 2];
    for a in 0..2 {
        for u in 0..2 {
            for x in 0..2 {
                for z in 0..2 {
                    out[a][u][x][z] = f(a, u, x, z);
                }
            }
        }
    }
    out
}

fn fill_y<F: Fn(usize, f64, usize, usize, usize) -> f64>(
    m_levels: [f64; 2],
    f: F,
) -> [[[[[f64; 2]; 2]; 2]; 2]; 2] {
    let mut out = [[[[[0.0; 2]; 2]; 2]; 2]; 2];
    for a in 0..2 {
        for m in 0..2 {
            for u in 0..2 {
                for x in 0..2 {
                    for z in 0..2 {
                        out[a][m][u][x][z] = f(a, m_levels[m], u, x, z);
                    }
                }
            }
        }
    }
    out
}

/// Basic confounded world satisfying exchangeability, internal and external
/// validity only. Oracle for the shared identification lemmas and nuisances.
pub fn toy_world_1() -> DiscreteWorld {
    let m_levels = [0.0, 1.0];
    let w = DiscreteWorld {
        name: "toy-1",
        nz: 1,
        m_levels,
        p_ux: uniform_ux(),
        p_e_given_x: [0.55, 0.40],
        p_z1: [[0.0; 2]; 2],
        p_a_exp: [0.45, 0.60],
        p_a_obs: {
            let mut t = [[[0.0; 2]; 2]; 2];
            for u in 0..2 {
                for x in 0..2 {
                    for z in 0..2 {
                        t[u][x][z] = 0.30 + 0.40 * u as f64 + 0.08 * x as f64;
                    }
                }
            }
            t
        },
        p_m_hi: fill_m(|a, u, x, _z| {
            0.15 + 0.30 * a as f64 + 0.30 * u as f64 + 0.15 * x as f64
        }),
        y_mean: fill_y(m_levels, |a, m, u, x, _z| {
            0.2 + 1.0 * a as f64 + 0.6 * m + 0.9 * u as f64 + 0.4 * x as f64
        }),
        y_spread: 0.8,
        claims: vec![
            WorldAssumption::LatentExchangeability,
            WorldAssumption::InternalValidity,
            WorldAssumption::ExternalValidity,
        ],
    };
    debug_assert!(w.certify().is_ok(), "{:?}", w.certify());
    w
}

/// World satisfying latent unconfoundedness: the long-term outcome depends on
/// the latent confounder only through the short-term outcome.
pub fn toy_world_lu() -> DiscreteWorld {
    let m_levels = [0.0, 1.0];
    let w = DiscreteWorld {
        name: "toy-lu",
        nz: 1,
        m_levels,
        p_ux: uniform_ux(),
        p_e_given_x: [0.50, 0.42],
        p_z1: [[0.0; 2]; 2],
        p_a_exp: [0.50, 0.58],
        p_a_obs: {
            let mut t = [[[0.0; 2]; 2]; 2];
            for u in 0..2 {
                for x in 0..2 {
                    for z in 0..2 {
                        t[u][x][z] = 0.28 + 0.42 * u as f64 + 0.06 * x as f64;
                    }
                }
            }
            t
        },
        p_m_hi: fill_m(|a, u, x, _z| {
            0.15 + 0.28 * a as f64 + 0.32 * u as f64 + 0.12 * x as f64
        }),
        y_mean: fill_y(m_levels, |a, m, _u, x, _z| {
            0.3 + 1.2 * a as f64 + 0.8 * m + 0.5 * x as f64
        }),
        y_spread: 0.7,
        claims: vec![
            WorldAssumption::LatentExchangeability,
            WorldAssumption::InternalValidity,
            WorldAssumption::ExternalValidity,
            WorldAssumption::LatentUnconfoundedness,
        ],
    };
    debug_assert!(w.certify().is_ok(), "{:?}", w.certify());
    w
}

/// Negative control: identical to [`toy_world_lu`] except the long-term
/// outcome reads the latent confounder directly, violating latent
/// unconfoundedness with a constructed identification gap.
pub fn toy_world_lu_gap() -> DiscreteWorld {
    let mut w = toy_world_lu();
    w.name = "toy-lu-gap";
    let m_levels = w.m_levels;
    w.y_mean = fill_y(m_levels, |a, m, u, x, _z| {
        0.3 + 1.2 * a as f64 + 0.8 * m + 1.6 * u as f64 + 0.5 * x as f64
    });
    w.claims = vec![
        WorldAssumption::LatentExchangeability,
        WorldAssumption::InternalValidity,
        WorldAssumption::ExternalValidity,
    ];
    debug_assert!(w.certify().is_ok(), "{:?}", w.certify());
    w
}

/// World satisfying both the marginal and the conditional additive
/// equi-confounding restrictions, with a large confounding gap for the naive
/// observational contrast.
pub fn toy_world_ec() -> DiscreteWorld {
    let m_levels = [0.0, 2.0];
    let w = DiscreteWorld {
        name: "toy-ec",
        nz: 1,
        m_levels,
        p_ux: uniform_ux(),
        p_e_given_x: [0.50, 0.45],
        p_z1: [[0.0; 2]; 2],
        p_a_exp: [0.50, 0.60],
        p_a_obs: {
            // Assignment reads U only: keeps the marginal restriction exact.
            let mut t = [[[0.0; 2]; 2]; 2];
            for u in 0..2 {
                for x in 0..2 {
                    for z in 0..2 {
                        t[u][x][z] = 0.25 + 0.55 * u as f64;
                    }
                }
            }
            t
        },
        p_m_hi: fill_m(|a, u, x, _z| {
            0.20 + 0.25 * a as f64 + 0.30 * u as f64 + 0.10 * x as f64
        }),
        // u-coefficient 0.3 matches the M-channel bias: Y reads U directly at
        // 0.3 and through M (edge 0.5, M carries 2 * 0.3 per unit of U).
        y_mean: fill_y(m_levels, |a, m, u, x, _z| {
            0.1 + 1.3 * a as f64 + 0.5 * m + 0.3 * u as f64 + 0.3 * x as f64
        }),
        y_spread: 0.9,
        claims: vec![
            WorldAssumption::LatentExchangeability,
            WorldAssumption::InternalValidity,
            WorldAssumption::ExternalValidity,
            WorldAssumption::EquiConfMarginal,
            WorldAssumption::EquiConfConditional,
        ],
    };
    debug_assert!(w.certify().is_ok(), "{:?}", w.certify());
    w
}

/// World satisfying the conditional equi-confounding restriction with
/// covariate-dependent assignment, under which the marginal version fails.
pub fn toy_world_ecc() -> DiscreteWorld {
    let m_levels = [0.0, 2.0];
    let w = DiscreteWorld {
        name: "toy-ecc",
        nz: 1,
        m_levels,
        p_ux: uniform_ux(),
        p_e_given_x: [0.52, 0.44],
        p_z1: [[0.0; 2]; 2],
        p_a_exp: [0.48, 0.58],
        p_a_obs: {
            let mut t = [[[0.0; 2]; 2]; 2];
            for u in 0..2 {
                for x in 0..2 {
                    for z in 0..2 {
                        t[u][x][z] = 0.25 + 0.15 * x as f64 + 0.45 * u as f64;
                    }
                }
            }
            t
        },
        p_m_hi: fill_m(|a, u, x, _z| {
            0.15 + 0.20 * a as f64 + 0.30 * u as f64 + 0.10 * x as f64
                + 0.10 * (a * x) as f64
        }),
        // Y reads U at 0.36 = (1 - 0.4 * 2) * 0.3 ... chosen so the direct and
        // M-mediated channels add to the M-channel bias exactly.
        y_mean: fill_y(m_levels, |a, m, u, x, _z| {
            0.2 + 1.0 * a as f64 + 0.4 * m + 0.36 * u as f64 + 0.5 * x as f64
                - 0.3 * (a * x) as f64
        }),
        y_spread: 0.8,
        claims: vec![
            WorldAssumption::LatentExchangeability,
            WorldAssumption::InternalValidity,
            WorldAssumption::ExternalValidity,
            WorldAssumption::EquiConfConditional,
        ],
    };
    debug_assert!(w.certify().is_ok(), "{:?}", w.certify());
    w
}

/// World satisfying the quantile-quantile equi-confounding restriction: both
/// 0-arm potential outcomes are deterministic increasing functions of U.
pub fn toy_world_qq() -> DiscreteWorld {
    let m_levels = [0.0, 1.0];
    let w = DiscreteWorld {
        name: "toy-qq",
        nz: 1,
        m_levels,
        p_ux: uniform_ux(),
        p_e_given_x: [0.50, 0.42],
        p_z1: [[0.0; 2]; 2],
        p_a_exp: [0.50, 0.55],
        p_a_obs: {
            let mut t = [[[0.0; 2]; 2]; 2];
            for u in 0..2 {
                for x in 0..2 {
                    for z in 0..2 {
                        t[u][x][z] = 0.35 + 0.40 * u as f64 + 0.05 * x as f64;
                    }
                }
            }
            t
        },
        // M^(a) = U deterministically in both arms.
        p_m_hi: fill_m(|_a, u, _x, _z| u as f64),
        y_mean: fill_y(m_levels, |a, _m, u, x, _z| {
            0.4 + 1.1 * a as f64 + 1.2 * u as f64 + 0.5 * x as f64
        }),
        y_spread: 0.0,
        claims: vec![
            WorldAssumption::LatentExchangeability,
            WorldAssumption::InternalValidity,
            WorldAssumption::ExternalValidity,
            WorldAssumption::QuantileQuantile,
        ],
    };
    debug_assert!(w.certify().is_ok(), "{:?}", w.certify());
    w
}

/// Solve the z=1, u=1 assignment probability so the U-composition contrast
/// between arms is the same at both instrument levels.
fn solve_iv_assignment(p_u: f64, r00: f64, r01: f64, r10: f64) -> f64 {
    // delta(t0, t1) = P(U=1|A=1) - P(U=1|A=0) for assignment (t0, t1).
    let delta = |t0: f64, t1: f64| -> f64 {
        let p1 = p_u * t1 / (p_u * t1 + (1.0 - p_u) * t0);
        let p0 = p_u * (1.0 - t1) / (p_u * (1.0 - t1) + (1.0 - p_u) * (1.0 - t0));
        p1 - p0
    };
    let target = delta(r00, r01);
    let (mut lo, mut hi) = (1e-6, 1.0 - 1e-6);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if delta(r10, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Bespoke-instrument world: binary Z relevant for treatment, latent U
/// confounds both outcomes, and the assignment is solved numerically so that
/// all four homogeneity conditions (weak and strong, effect and bias) hold.
pub fn toy_world_iv() -> DiscreteWorld {
    let m_levels = [0.0, 1.0];
    let mut p_a_obs = [[[0.0; 2]; 2]; 2];
    for x in 0..2 {
        let bump = 0.05 * x as f64;
        let r00 = 0.30 + bump;
        let r01 = 0.60 + bump;
        let r10 = 0.50 + bump;
        let r11 = solve_iv_assignment(0.5, r00, r01, r10);
        p_a_obs[0][x][0] = r00;
        p_a_obs[1][x][0] = r01;
        p_a_obs[0][x][1] = r10;
        p_a_obs[1][x][1] = r11;
    }
    let w = DiscreteWorld {
        name: "toy-iv",
        nz: 2,
        m_levels,
        p_ux: uniform_ux(),
        p_e_given_x: [0.50, 0.44],
        p_z1: {
            // Z independent of U given X.
            let mut t = [[0.0; 2]; 2];
            for u in 0..2 {
                for x in 0..2 {
                    t[u][x] = 0.40 + 0.20 * x as f64;
                }
            }
            t
        },
        p_a_exp: [0.50, 0.55],
        p_a_obs,
        p_m_hi: fill_m(|a, u, x, z| {
            0.10 + 0.20 * a as f64
                + 0.25 * u as f64
                + 0.05 * x as f64
                + 0.15 * z as f64
                + 0.10 * (a * x) as f64
        }),
        y_mean: fill_y(m_levels, |a, _m, u, x, z| {
            0.2 + 1.0 * a as f64
                + 0.30 * (a * x) as f64
                + 0.80 * u as f64
                + 0.15 * z as f64
                + 0.45 * x as f64
        }),
        y_spread: 0.6,
        claims: vec![
            WorldAssumption::LatentExchangeability,
            WorldAssumption::InternalValidity,
            WorldAssumption::ExternalValidity,
            WorldAssumption::BsivRelevance,
            WorldAssumption::BsivEquiAssociation,
            WorldAssumption::BsivHomogeneityContrasts,
            WorldAssumption::BsivHomogeneityStrong,
        ],
    };
    debug_assert!(w.certify().is_ok(), "{:?}", w.certify());
    w
}

/// Proximal world: Z is a proxy for U (never read by the outcomes), both
/// bridge functions exist, and U genuinely confounds treatment.
pub fn toy_world_px() -> DiscreteWorld {
    let m_levels = [0.0, 1.0];
    let w = DiscreteWorld {
        name: "toy-px",
        nz: 2,
        m_levels,
        p_ux: uniform_ux(),
        p_e_given_x: [0.45, 0.60],
        p_z1: {
            let mut t = [[0.0; 2]; 2];
            for u in 0..2 {
                for x in 0..2 {
                    t[u][x] = 0.25 + 0.50 * u as f64 + 0.10 * x as f64;
                }
            }
            t
        },
        p_a_exp: [0.50, 0.60],
        p_a_obs: {
            let mut t = [[[0.0; 2]; 2]; 2];
            for u in 0..2 {
                for x in 0..2 {
                    for z in 0..2 {
                        t[u][x][z] =
                            0.30 + 0.35 * u as f64 + 0.05 * x as f64 + 0.05 * z as f64;
                    }
                }
            }
            t
        },
        p_m_hi: fill_m(|a, u, x, _z| {
            0.25 + 0.30 * a as f64 + 0.30 * u as f64 + 0.05 * x as f64
        }),
        y_mean: fill_y(m_levels, |a, m, u, x, _z| {
            0.3 + 0.76 * a as f64 + 0.30 * (a * x) as f64 + 0.8 * m + 0.5 * x as f64
                + 1.0 * u as f64
        }),
        y_spread: 0.5,
        claims: vec![
            WorldAssumption::LatentExchangeability,
            WorldAssumption::InternalValidity,
            WorldAssumption::ExternalValidity,
            WorldAssumption::ProxyIndependence,
            WorldAssumption::BridgeExistence,
        ],
    };
    debug_assert!(w.certify().is_ok(), "{:?}", w.certify());
    w
}

/// Names of the shipped toy worlds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyWorldName {
    Toy1,
    ToyLu,
    ToyLuGap,
    ToyEc,
    ToyEcc,
    ToyQq,
    ToyIv,
    ToyPx,
}

impl ToyWorldName {
    pub fn build(self) -> DiscreteWorld {
        match self {
            ToyWorldName::Toy1 => toy_world_1(),
            ToyWorldName::ToyLu => toy_world_lu(),
            ToyWorldName::ToyLuGap => toy_world_lu_gap(),
            ToyWorldName::ToyEc => toy_world_ec(),
            ToyWorldName::ToyEcc => toy_world_ecc(),
            ToyWorldName::ToyQq => toy_world_qq(),
            ToyWorldName::ToyIv => toy_world_iv(),
            ToyWorldName::ToyPx => toy_world_px(),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            ToyWorldName::Toy1 => "toy-1",
            ToyWorldName::ToyLu => "toy-lu",
            ToyWorldName::ToyLuGap => "toy-lu-gap",
            ToyWorldName::ToyEc => "toy-ec",
            ToyWorldName::ToyEcc => "toy-ecc",
            ToyWorldName::ToyQq => "toy-qq",
            ToyWorldName::ToyIv => "toy-iv",
            ToyWorldName::ToyPx => "toy-px",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "toy-1" => ToyWorldName::Toy1,
            "toy-lu" => ToyWorldName::ToyLu,
            "toy-lu-gap" => ToyWorldName::ToyLuGap,
            "toy-ec" => ToyWorldName::ToyEc,
            "toy-ecc" => ToyWorldName::ToyEcc,
            "toy-qq" => ToyWorldName::ToyQq,
            "toy-iv" => ToyWorldName::ToyIv,
            "toy-px" => ToyWorldName::ToyPx,
        _ => return None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_worlds_certify() {
        for name in [
            ToyWorldName::Toy1,
            ToyWorldName::ToyLu,
            ToyWorldName::ToyLuGap,
            ToyWorldName::ToyEc,
            ToyWorldName::ToyEcc,
            ToyWorldName::ToyQq,
            ToyWorldName::ToyIv,
            ToyWorldName::ToyPx,
        ] {
            let w = name.build();
            assert!(w.certify().is_ok(), "{}: {:?}", w.name, w.certify());
            let total: f64 = w.cells().iter().map(|c| c.prob).sum();
            assert!((total - 1.0).abs() < 1e-12, "{} sums to {total}", w.name);
        }
    }

    #[test]
    fn ec_world_has_large_confounding_gap() {
        let w = toy_world_ec();
        let gap = (w.naive_obs_diff() - w.true_ate()).abs();
        assert!(gap >= 0.3, "confounding gap {gap}");
    }

    #[test]
    fn iv_world_separates_ate_and_ett() {
        let w = toy_world_iv();
        assert!((w.true_ate() - w.true_ett()).abs() > 1e-3);
    }

    #[test]
    fn lu_gap_world_breaks_latent_unconfoundedness() {
        let w = toy_world_lu_gap();
        // Direct check that the latent-unconfoundedness certificate fails.
        let mut broken = w.clone();
        broken.claims = vec![WorldAssumption::LatentUnconfoundedness];
        assert!(broken.certify().is_err());
    }
}
