//! Synthetic data-generating processes with known ground truth.
//!
//! Each generator tag corresponds to one identification strategy and is
//! constructed so that its assumption set holds exactly (binary latent
//! structure with solved assignment tables where a constraint requires it)
//! while outcomes stay continuous where the strategy needs them. Truths are
//! closed-form where the structural equations force them, Monte Carlo over
//! counterfactual draws otherwise, and exact enumeration for the discrete toy
//! worlds. All sampling is routed through named per-variable ChaCha streams,
//! so datasets are reproducible byte-for-byte.

pub mod enumerate;
pub mod worlds;

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{DomainTag, FusedDataset, Observation, SchemaOptions, ZRole};
use crate::error::{Error, Result};
use crate::rng::{stream, StreamId};

pub use worlds::{DiscreteWorld, ToyWorldName, WorldAssumption};

fn sigmoid(t: f64) -> f64 {
    crate::nuisance::logistic::sigmoid(t)
}

/// Nested-regression baseline generator: the short-term outcome carries the
/// latent confounder without independent noise, so conditioning on it stands
/// in for conditioning on the confounder. Covariate and confounder are
/// standard normal.
#[derive(Debug, Clone)]
pub struct LatentUnconfParams {
    pub theta_m: f64,
    pub theta_y: f64,
    pub gamma_m: f64,
    pub gamma_y: f64,
    pub delta: f64,
    /// Treatment-confounder interaction in Y; nonzero separates ETT from ATE.
    pub phi: f64,
    pub sigma_y: f64,
    /// Independent noise on M; nonzero breaks the baseline assumption.
    pub m_noise: f64,
}

impl Default for LatentUnconfParams {
    fn default() -> Self {
        LatentUnconfParams {
            theta_m: 1.0,
            theta_y: 1.5,
            gamma_m: 0.8,
            gamma_y: 0.7,
            delta: 0.9,
            phi: 0.0,
            sigma_y: 0.5,
            m_noise: 0.0,
        }
    }
}

/// Additive equi-confounding generator over binary covariate and confounder
/// with Gaussian outcomes. The confounder loads on both outcomes with the
/// same coefficient, which is exactly the equi-confounding restriction.
#[derive(Debug, Clone)]
pub struct EquiConfParams {
    pub intercept_m: f64,
    pub effect_m: f64,
    pub x_m: f64,
    pub ax_m: f64,
    pub u_m: f64,
    pub sigma_m: f64,
    pub intercept_y: f64,
    pub effect_y: f64,
    pub x_y: f64,
    pub ax_y: f64,
    pub u_y: f64,
    pub sigma_y: f64,
    /// P(A=1 | u, x, G=O) = assign_base[x] + assign_u * u, clamped.
    pub assign_base: [f64; 2],
    pub assign_u: f64,
    /// P(A=1 | x, G=E).
    pub assign_exp: [f64; 2],
    /// P(G=E | x).
    pub p_e: [f64; 2],
}

impl EquiConfParams {
    /// Marginal variant: assignment ignores the covariate.
    pub fn marginal() -> Self {
        EquiConfParams {
            intercept_m: 0.8,
            effect_m: 1.2,
            x_m: 0.5,
            ax_m: 0.0,
            u_m: 1.0,
            sigma_m: 0.7,
            intercept_y: 0.4,
            effect_y: 2.0,
            x_y: 0.9,
            ax_y: 0.0,
            u_y: 1.0,
            sigma_y: 1.0,
            assign_base: [0.35, 0.35],
            assign_u: 0.40,
            assign_exp: [0.45, 0.60],
            p_e: [0.48, 0.62],
        }
    }

    /// Conditional variant: covariate-dependent assignment and interactions.
    pub fn conditional() -> Self {
        EquiConfParams {
            intercept_m: 0.5,
            effect_m: 1.0,
            x_m: 0.6,
            ax_m: 0.8,
            u_m: 1.0,
            sigma_m: 0.7,
            intercept_y: 0.2,
            effect_y: 1.4,
            x_y: 1.1,
            ax_y: -0.6,
            u_y: 1.0,
            sigma_y: 1.0,
            assign_base: [0.30, 0.45],
            assign_u: 0.40,
            assign_exp: [0.50, 0.55],
            p_e: [0.48, 0.62],
        }
    }

    /// No confounding, coin-flip assignment in both domains; the naive
    /// observational contrast is unbiased here.
    pub fn randomized(mut self) -> Self {
        self.assign_u = 0.0;
        self.assign_base = [0.5, 0.5];
        self.assign_exp = [0.5, 0.5];
        self
    }

    /// Replace the treatment effect on Y (0 gives a null world).
    pub fn with_effect(mut self, effect_y: f64) -> Self {
        self.effect_y = effect_y;
        self
    }
}

/// Quantile-quantile generator: both potential outcomes are strictly
/// increasing deterministic functions of a shared standard-normal confounder,
/// with a binary covariate scaling the confounder channel.
#[derive(Debug, Clone)]
pub struct QqParams {
    pub effect_m: f64,
    pub effect_y: f64,
    pub x_m: f64,
    pub x_y: f64,
    /// Confounder scale s(x) = scale_base + scale_x * x, shared by M and Y
    /// so the additive restriction holds alongside the distributional one.
    pub scale_base: f64,
    pub scale_x: f64,
    /// Multiplier on the Y confounder channel; 1.0 keeps the additive
    /// restriction, other values leave only the quantile-quantile one.
    pub y_scale_ratio: f64,
    pub assign_o_x: f64,
    pub assign_o_u: f64,
    pub assign_exp: [f64; 2],
    pub p_e: [f64; 2],
}

impl Default for QqParams {
    fn default() -> Self {
        QqParams {
            effect_m: 0.6,
            effect_y: 1.1,
            x_m: 0.4,
            x_y: 0.7,
            scale_base: 0.9,
            scale_x: 0.2,
            y_scale_ratio: 1.0,
            assign_o_x: 0.4,
            assign_o_u: 0.9,
            assign_exp: [0.50, 0.60],
            p_e: [0.45, 0.60],
        }
    }
}

/// Bespoke-instrument generator: binary covariate, confounder, and
/// instrument; the observational assignment at (z=1, u=1) is solved so the
/// confounder-composition contrast between arms is instrument-free, which
/// makes all four homogeneity conditions hold exactly.
#[derive(Debug, Clone)]
pub struct BsivParams {
    pub intercept_m: f64,
    pub effect_m: f64,
    pub x_m: f64,
    pub ax_m: f64,
    pub z_m: f64,
    pub u_m: f64,
    pub sigma_m: f64,
    pub intercept_y: f64,
    pub effect_y: f64,
    pub x_y: f64,
    pub ax_y: f64,
    pub z_y: f64,
    pub u_y: f64,
    pub sigma_y: f64,
    pub p_z1: [f64; 2],
    pub assign_exp: [f64; 2],
    pub p_e: [f64; 2],
}

impl Default for BsivParams {
    fn default() -> Self {
        BsivParams {
            intercept_m: 0.3,
            effect_m: 0.9,
            x_m: 0.4,
            ax_m: 0.2,
            z_m: 0.7,
            u_m: 1.1,
            sigma_m: 0.6,
            intercept_y: 0.1,
            effect_y: 1.0,
            x_y: 0.5,
            ax_y: 0.0,
            z_y: 0.7,
            u_y: 0.8,
            sigma_y: 0.9,
            p_z1: [0.40, 0.60],
            assign_exp: [0.50, 0.55],
            p_e: [0.50, 0.54],
        }
    }
}

impl BsivParams {
    /// Observational assignment table [u][x][z], solved for homogeneity.
    pub fn assignment(&self) -> [[[f64; 2]; 2]; 2] {
        let mut t = [[[0.0; 2]; 2]; 2];
        for x in 0..2 {
            let bump = 0.05 * x as f64;
            let r00 = 0.30 + bump;
            let r01 = 0.60 + bump;
            let r10 = 0.50 + bump;
            let r11 = solve_iv_assignment(0.5, r00, r01, r10);
            t[0][x][0] = r00;
            t[1][x][0] = r01;
            t[0][x][1] = r10;
            t[1][x][1] = r11;
        }
        t
    }
}

/// Solve the (z=1, u=1) assignment probability so the arm-wise confounder
/// composition contrast is the same at both instrument levels.
fn solve_iv_assignment(p_u: f64, r00: f64, r01: f64, r10: f64) -> f64 {
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

/// Proximal generator: binary proxy, confounder, covariate and short-term
/// outcome with a continuous long-term outcome. The proxy never enters the
/// outcome equations, and both bridge functions exist by construction.
#[derive(Debug, Clone)]
pub struct ProximalParams {
    pub intercept_y: f64,
    pub effect_y: f64,
    pub m_y: f64,
    pub x_y: f64,
    pub u_y: f64,
    pub sigma_y: f64,
    /// P(M=1 | a, u, x) = m_base + m_a a + m_u u + m_x x (+ leak * z).
    pub m_base: f64,
    pub m_a: f64,
    pub m_u: f64,
    pub m_x: f64,
    /// Direct proxy effect on M; nonzero violates proxy independence.
    pub proxy_leak: f64,
    pub p_e: [f64; 2],
    pub assign_exp: [f64; 2],
}

impl Default for ProximalParams {
    fn default() -> Self {
        ProximalParams {
            intercept_y: 0.3,
            effect_y: 0.76,
            m_y: 0.8,
            x_y: 0.5,
            u_y: 1.0,
            sigma_y: 0.8,
            m_base: 0.25,
            m_a: 0.30,
            m_u: 0.30,
            m_x: 0.05,
            proxy_leak: 0.0,
            p_e: [0.45, 0.60],
            assign_exp: [0.50, 0.60],
        }
    }
}

impl ProximalParams {
    pub fn p_z1(&self, u: usize, x: usize) -> f64 {
        0.25 + 0.50 * u as f64 + 0.10 * x as f64
    }

    pub fn p_a_obs(&self, u: usize, x: usize, z: usize) -> f64 {
        0.30 + 0.35 * u as f64 + 0.05 * x as f64 + 0.05 * z as f64
    }

    pub fn p_m_hi(&self, a: usize, u: usize, x: usize, z: usize) -> f64 {
        (self.m_base
            + self.m_a * a as f64
            + self.m_u * u as f64
            + self.m_x * x as f64
            + self.proxy_leak * z as f64)
            .clamp(0.01, 0.99)
    }

    pub fn y_mean(&self, a: usize, m: f64, u: usize, x: usize) -> f64 {
        self.intercept_y
            + self.effect_y * a as f64
            + self.m_y * m
            + self.x_y * x as f64
            + self.u_y * u as f64
    }
}

/// Generator family plus structural parameters.
#[derive(Debug, Clone)]
pub enum DgpTag {
    LatentUnconf(LatentUnconfParams),
    EquiConfMarg(EquiConfParams),
    EquiConfCond(EquiConfParams),
    Qq(QqParams),
    Bsiv(BsivParams),
    Proximal(ProximalParams),
    DiscreteToy(ToyWorldName),
}

impl DgpTag {
    pub fn name(&self) -> &'static str {
        match self {
            DgpTag::LatentUnconf(_) => "latent-unconf",
            DgpTag::EquiConfMarg(_) => "equiconf-marg",
            DgpTag::EquiConfCond(_) => "equiconf-cond",
            DgpTag::Qq(_) => "qq",
            DgpTag::Bsiv(_) => "bsiv",
            DgpTag::Proximal(_) => "proximal",
            DgpTag::DiscreteToy(w) => w.tag(),
        }
    }
}

/// Full generator specification. Same spec, same bytes.
#[derive(Debug, Clone)]
pub struct DgpSpec {
    pub tag: DgpTag,
    pub n: usize,
    pub seed: u64,
}

impl DgpSpec {
    pub fn new(tag: DgpTag, n: usize, seed: u64) -> Self {
        DgpSpec { tag, n, seed }
    }

    /// Default spec for a named tag.
    pub fn by_name(tag: &str, n: usize, seed: u64) -> Result<Self> {
        let tag = match tag {
            "latent-unconf" => DgpTag::LatentUnconf(LatentUnconfParams::default()),
            "equiconf-marg" => DgpTag::EquiConfMarg(EquiConfParams::marginal()),
            "equiconf-cond" => DgpTag::EquiConfCond(EquiConfParams::conditional()),
            "qq" => DgpTag::Qq(QqParams::default()),
            "bsiv" => DgpTag::Bsiv(BsivParams::default()),
            "proximal" => DgpTag::Proximal(ProximalParams::default()),
            other => match ToyWorldName::parse(other) {
                Some(w) => DgpTag::DiscreteToy(w),
                None => {
                    return Err(Error::InvalidSpec(alloc::format!(
                        "unknown generator tag {other:?}"
                    )))
                }
            },
        };
        Ok(DgpSpec { tag, n, seed })
    }
}

/// How a ground truth was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthMethod {
    ClosedForm,
    CounterfactualMc(u64),
    Enumeration,
}

/// Target values for a generator.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub ate: f64,
    pub ett: f64,
    /// E[Y^{(a)} | G=O] when the generator identifies them separately.
    pub theta: Option<[f64; 2]>,
    pub method: TruthMethod,
    pub mc_se: Option<f64>,
}

/// Supported structural violations for sensitivity and negative controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// Confounder loads differently on the two outcomes.
    EquiConfSlippage,
    /// Proxy enters the short-term outcome directly.
    ProxyLeak,
    /// Independent noise on the short-term outcome (breaks the baseline
    /// nested-regression assumption).
    ShortTermNoise,
    /// Instrument loads differently on the two outcomes.
    BsivAssociationSlippage,
}

/// Return a structurally perturbed spec; `delta = 0` is the identity.
pub fn violate(spec: &DgpSpec, kind: ViolationKind, delta: f64) -> Result<DgpSpec> {
    let mut out = spec.clone();
    match (&mut out.tag, kind) {
        (DgpTag::EquiConfMarg(p), ViolationKind::EquiConfSlippage)
        | (DgpTag::EquiConfCond(p), ViolationKind::EquiConfSlippage) => {
            p.u_y += delta;
        }
        (DgpTag::Proximal(p), ViolationKind::ProxyLeak) => {
            p.proxy_leak += delta;
        }
        (DgpTag::LatentUnconf(p), ViolationKind::ShortTermNoise) => {
            p.m_noise += delta;
        }
        (DgpTag::Bsiv(p), ViolationKind::BsivAssociationSlippage) => {
            p.z_y += delta;
        }
        (tag, kind) => {
            return Err(Error::UnsupportedViolation(alloc::format!(
                "{:?} not supported for generator {}",
                kind,
                tag.name()
            )))
        }
    }
    Ok(out)
}

/// Generate the dataset for replication 0.
pub fn generate(spec: &DgpSpec) -> Result<FusedDataset> {
    generate_rep(spec, 0)
}

/// Generate one replication; replications use disjoint stream ranges.
pub fn generate_rep(spec: &DgpSpec, rep: u64) -> Result<FusedDataset> {
    if spec.n == 0 {
        return Err(Error::InvalidSpec("sample size must be positive".into()));
    }
    match &spec.tag {
        DgpTag::LatentUnconf(p) => gen_latent_unconf(spec, rep, p),
        DgpTag::EquiConfMarg(p) => gen_equiconf(spec, rep, p),
        DgpTag::EquiConfCond(p) => gen_equiconf(spec, rep, p),
        DgpTag::Qq(p) => gen_qq(spec, rep, p),
        DgpTag::Bsiv(p) => gen_bsiv(spec, rep, p),
        DgpTag::Proximal(p) => gen_proximal(spec, rep, p),
        DgpTag::DiscreteToy(name) => gen_toy(spec, rep, name.build()),
    }
}

struct Streams {
    x: rand_chacha::ChaCha12Rng,
    u: rand_chacha::ChaCha12Rng,
    z: rand_chacha::ChaCha12Rng,
    g: rand_chacha::ChaCha12Rng,
    a: rand_chacha::ChaCha12Rng,
    em: rand_chacha::ChaCha12Rng,
    ey: rand_chacha::ChaCha12Rng,
}

impl Streams {
    fn new(seed: u64, rep: u64) -> Self {
        Streams {
            x: stream(seed, rep, StreamId::Covariate),
            u: stream(seed, rep, StreamId::Confounder),
            z: stream(seed, rep, StreamId::Auxiliary),
            g: stream(seed, rep, StreamId::Domain),
            a: stream(seed, rep, StreamId::Treatment),
            em: stream(seed, rep, StreamId::ShortTermNoise),
            ey: stream(seed, rep, StreamId::LongTermNoise),
        }
    }
}

fn finish(rows: Vec<Observation>, opts: SchemaOptions) -> Result<FusedDataset> {
    FusedDataset::from_rows_with(rows, opts)
}

fn gen_latent_unconf(spec: &DgpSpec, rep: u64, p: &LatentUnconfParams) -> Result<FusedDataset> {
    let mut s = Streams::new(spec.seed, rep);
    let mut rows = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let x: f64 = s.x.sample(StandardNormal);
        let u: f64 = s.u.sample(StandardNormal);
        let g = if s.g.random_bool(sigmoid(0.15 + 0.5 * x)) {
            DomainTag::Experimental
        } else {
            DomainTag::Observational
        };
        let pa = match g {
            DomainTag::Experimental => sigmoid(0.3 * x),
            DomainTag::Observational => sigmoid(0.4 * x + 0.9 * u),
        };
        let a = s.a.random_bool(pa) as u8;
        let em: f64 = s.em.sample(StandardNormal);
        let m = p.theta_m * a as f64 + p.gamma_m * x + u + p.m_noise * em;
        let ey: f64 = s.ey.sample(StandardNormal);
        let y = p.theta_y * a as f64 + p.phi * a as f64 * u + p.gamma_y * x + p.delta * u
            + p.sigma_y * ey;
        rows.push(Observation {
            g,
            a,
            x: alloc::vec![x],
            m: Some(m),
            y: (g == DomainTag::Observational).then_some(y),
            z: None,
        });
    }
    finish(rows, SchemaOptions::default())
}

fn gen_equiconf(spec: &DgpSpec, rep: u64, p: &EquiConfParams) -> Result<FusedDataset> {
    let mut s = Streams::new(spec.seed, rep);
    let mut rows = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let x = s.x.random_bool(0.5) as usize;
        let u = s.u.random_bool(0.5) as usize;
        let g = if s.g.random_bool(p.p_e[x]) {
            DomainTag::Experimental
        } else {
            DomainTag::Observational
        };
        let pa = match g {
            DomainTag::Experimental => p.assign_exp[x],
            DomainTag::Observational => {
                (p.assign_base[x] + p.assign_u * u as f64).clamp(0.02, 0.98)
            }
        };
        let a = s.a.random_bool(pa) as u8;
        let em: f64 = s.em.sample(StandardNormal);
        let ey: f64 = s.ey.sample(StandardNormal);
        let af = a as f64;
        let xf = x as f64;
        let uf = u as f64;
        let m = p.intercept_m + p.effect_m * af + p.x_m * xf + p.ax_m * af * xf + p.u_m * uf
            + p.sigma_m * em;
        let y = p.intercept_y + p.effect_y * af + p.x_y * xf + p.ax_y * af * xf + p.u_y * uf
            + p.sigma_y * ey;
        rows.push(Observation {
            g,
            a,
            x: alloc::vec![xf],
            m: Some(m),
            y: (g == DomainTag::Observational).then_some(y),
            z: None,
        });
    }
    finish(rows, SchemaOptions::default())
}

fn gen_qq(spec: &DgpSpec, rep: u64, p: &QqParams) -> Result<FusedDataset> {
    let mut s = Streams::new(spec.seed, rep);
    let mut rows = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let x = s.x.random_bool(0.5) as usize;
        let u: f64 = s.u.sample(StandardNormal);
        let g = if s.g.random_bool(p.p_e[x]) {
            DomainTag::Experimental
        } else {
            DomainTag::Observational
        };
        let pa = match g {
            DomainTag::Experimental => p.assign_exp[x],
            DomainTag::Observational => {
                sigmoid(p.assign_o_x * (2.0 * x as f64 - 1.0) + p.assign_o_u * u)
            }
        };
        let a = s.a.random_bool(pa) as u8;
        let af = a as f64;
        let xf = x as f64;
        let scale = p.scale_base + p.scale_x * xf;
        let m = p.effect_m * af + p.x_m * xf + scale * u;
        let y = p.effect_y * af + p.x_y * xf + p.y_scale_ratio * scale * u;
        rows.push(Observation {
            g,
            a,
            x: alloc::vec![xf],
            m: Some(m),
            y: (g == DomainTag::Observational).then_some(y),
            z: None,
        });
    }
    finish(rows, SchemaOptions::default())
}

fn gen_bsiv(spec: &DgpSpec, rep: u64, p: &BsivParams) -> Result<FusedDataset> {
    let mut s = Streams::new(spec.seed, rep);
    let assign = p.assignment();
    let mut rows = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let x = s.x.random_bool(0.5) as usize;
        let u = s.u.random_bool(0.5) as usize;
        let z = s.z.random_bool(p.p_z1[x]) as usize;
        let g = if s.g.random_bool(p.p_e[x]) {
            DomainTag::Experimental
        } else {
            DomainTag::Observational
        };
        let pa = match g {
            DomainTag::Experimental => p.assign_exp[x],
            DomainTag::Observational => assign[u][x][z],
        };
        let a = s.a.random_bool(pa) as u8;
        let (af, xf, zf, uf) = (a as f64, x as f64, z as f64, u as f64);
        let em: f64 = s.em.sample(StandardNormal);
        let ey: f64 = s.ey.sample(StandardNormal);
        let m = p.intercept_m + p.effect_m * af + p.x_m * xf + p.ax_m * af * xf + p.z_m * zf
            + p.u_m * uf
            + p.sigma_m * em;
        let y = p.intercept_y + p.effect_y * af + p.x_y * xf + p.ax_y * af * xf + p.z_y * zf
            + p.u_y * uf
            + p.sigma_y * ey;
        rows.push(Observation {
            g,
            a,
            x: alloc::vec![xf],
            m: Some(m),
            y: (g == DomainTag::Observational).then_some(y),
            z: Some(zf),
        });
    }
    finish(
        rows,
        SchemaOptions {
            z_role: ZRole::Bsiv,
            allow_missing_m_observational: false,
        },
    )
}

fn gen_proximal(spec: &DgpSpec, rep: u64, p: &ProximalParams) -> Result<FusedDataset> {
    let mut s = Streams::new(spec.seed, rep);
    let mut rows = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let x = s.x.random_bool(0.5) as usize;
        let u = s.u.random_bool(0.5) as usize;
        let z = s.z.random_bool(p.p_z1(u, x)) as usize;
        let g = if s.g.random_bool(p.p_e[x]) {
            DomainTag::Experimental
        } else {
            DomainTag::Observational
        };
        let pa = match g {
            DomainTag::Experimental => p.assign_exp[x],
            DomainTag::Observational => p.p_a_obs(u, x, z),
        };
        let a = s.a.random_bool(pa) as u8;
        let m = s.em.random_bool(p.p_m_hi(a as usize, u, x, z)) as u8 as f64;
        let ey: f64 = s.ey.sample(StandardNormal);
        let y = p.y_mean(a as usize, m, u, x) + p.sigma_y * ey;
        let obs = g == DomainTag::Observational;
        rows.push(Observation {
            g,
            a,
            x: alloc::vec![x as f64],
            m: Some(m),
            y: obs.then_some(y),
            // The proxy is only carried in the observational domain.
            z: obs.then_some(z as f64),
        });
    }
    finish(
        rows,
        SchemaOptions {
            z_role: ZRole::Proxy,
            allow_missing_m_observational: false,
        },
    )
}

fn gen_toy(spec: &DgpSpec, rep: u64, w: DiscreteWorld) -> Result<FusedDataset> {
    let mut s = Streams::new(spec.seed, rep);
    let mut rows = Vec::with_capacity(spec.n);
    let z_role = match w.nz {
        2 => {
            if w.claims.contains(&WorldAssumption::ProxyIndependence) {
                ZRole::Proxy
            } else {
                ZRole::Bsiv
            }
        }
        _ => ZRole::None,
    };
    let p_x1 = w.p_ux[0][1] + w.p_ux[1][1];
    for _ in 0..spec.n {
        let x = s.x.random_bool(p_x1) as usize;
        let pu = w.p_ux[1][x] / (w.p_ux[0][x] + w.p_ux[1][x]);
        let u = s.u.random_bool(pu) as usize;
        let z = if w.nz == 2 {
            s.z.random_bool(w.p_z1[u][x]) as usize
        } else {
            0
        };
        let g = if s.g.random_bool(w.p_e_given_x[x]) {
            DomainTag::Experimental
        } else {
            DomainTag::Observational
        };
        let pa = match g {
            DomainTag::Experimental => w.p_a_exp[x],
            DomainTag::Observational => w.p_a_obs[u][x][z],
        };
        let a = s.a.random_bool(pa) as u8;
        let m_idx = s.em.random_bool(w.p_m_hi[a as usize][u][x][z]) as usize;
        let mean = w.y_mean[a as usize][m_idx][u][x][z];
        let y = if w.y_spread == 0.0 {
            mean
        } else if s.ey.random_bool(0.5) {
            mean + w.y_spread
        } else {
            mean - w.y_spread
        };
        let obs = g == DomainTag::Observational;
        let emit_z = w.nz == 2 && (obs || z_role == ZRole::Bsiv);
        rows.push(Observation {
            g,
            a,
            x: alloc::vec![x as f64],
            m: Some(w.m_levels[m_idx]),
            y: obs.then_some(y),
            z: emit_z.then_some(z as f64),
        });
    }
    finish(
        rows,
        SchemaOptions {
            z_role,
            allow_missing_m_observational: false,
        },
    )
}

// ---- ground truth -----------------------------------------------------------

/// Compute the ground truth by the requested method.
pub fn ground_truth(spec: &DgpSpec, method: TruthMethod) -> Result<GroundTruth> {
    match (&spec.tag, method) {
        (DgpTag::DiscreteToy(name), TruthMethod::Enumeration) => {
            let w = name.build();
            Ok(GroundTruth {
                ate: w.true_ate(),
                ett: w.true_ett(),
                theta: Some([w.true_theta(0), w.true_theta(1)]),
                method,
                mc_se: None,
            })
        }
        (DgpTag::DiscreteToy(_), TruthMethod::ClosedForm) => {
            let mut t = ground_truth(spec, TruthMethod::Enumeration)?;
            t.method = TruthMethod::Enumeration;
            Ok(t)
        }
        (_, TruthMethod::Enumeration) => Err(Error::MethodUnavailable(
            "enumeration is only defined for the discrete toy worlds".into(),
        )),
        (DgpTag::LatentUnconf(p), TruthMethod::ClosedForm) => {
            if p.phi != 0.0 {
                return Err(Error::MethodUnavailable(
                    "closed form needs a homogeneous effect; use counterfactual simulation"
                        .into(),
                ));
            }
            Ok(GroundTruth {
                ate: p.theta_y,
                ett: p.theta_y,
                theta: None,
                method,
                mc_se: None,
            })
        }
        (DgpTag::EquiConfMarg(p), TruthMethod::ClosedForm)
        | (DgpTag::EquiConfCond(p), TruthMethod::ClosedForm) => {
            let (e_x_o, e_x_t) = equiconf_x_composition(p);
            Ok(GroundTruth {
                ate: p.effect_y + p.ax_y * e_x_o,
                ett: p.effect_y + p.ax_y * e_x_t,
                theta: None,
                method,
                mc_se: None,
            })
        }
        (DgpTag::Qq(p), TruthMethod::ClosedForm) => Ok(GroundTruth {
            ate: p.effect_y,
            ett: p.effect_y,
            theta: None,
            method,
            mc_se: None,
        }),
        (DgpTag::Bsiv(p), TruthMethod::ClosedForm) => {
            let assign = p.assignment();
            let mut w_o = [0.0f64; 2];
            let mut w_t = [0.0f64; 2];
            for x in 0..2 {
                for u in 0..2 {
                    for z in 0..2 {
                        let pz = if z == 1 { p.p_z1[x] } else { 1.0 - p.p_z1[x] };
                        let base = 0.25 * pz * (1.0 - p.p_e[x]);
                        w_o[x] += base;
                        w_t[x] += base * assign[u][x][z];
                    }
                }
            }
            let e_x_o = w_o[1] / (w_o[0] + w_o[1]);
            let e_x_t = w_t[1] / (w_t[0] + w_t[1]);
            Ok(GroundTruth {
                ate: p.effect_y + p.ax_y * e_x_o,
                ett: p.effect_y + p.ax_y * e_x_t,
                theta: None,
                method,
                mc_se: None,
            })
        }
        (DgpTag::Proximal(p), TruthMethod::ClosedForm) => {
            let mut theta = [0.0f64; 2];
            for (a, slot) in theta.iter_mut().enumerate() {
                let mut acc = 0.0;
                let mut den = 0.0;
                for u in 0..2 {
                    for x in 0..2 {
                        let p_ux = 0.25 * (1.0 - p.p_e[x]);
                        let pz1 = p.p_z1(u, x);
                        let m_mean = (1.0 - pz1) * p.p_m_hi(a, u, x, 0)
                            + pz1 * p.p_m_hi(a, u, x, 1);
                        acc += p_ux * p.y_mean(a, m_mean, u, x);
                        den += p_ux;
                    }
                }
                *slot = acc / den;
            }
            let mut acc = 0.0;
            let mut den = 0.0;
            for u in 0..2 {
                for x in 0..2 {
                    for z in 0..2 {
                        let pz = if z == 1 { p.p_z1(u, x) } else { 1.0 - p.p_z1(u, x) };
                        let w = 0.25 * (1.0 - p.p_e[x]) * pz * p.p_a_obs(u, x, z);
                        let d = p.y_mean(1, p.p_m_hi(1, u, x, z), u, x)
                            - p.y_mean(0, p.p_m_hi(0, u, x, z), u, x);
                        acc += w * d;
                        den += w;
                    }
                }
            }
            Ok(GroundTruth {
                ate: theta[1] - theta[0],
                ett: acc / den,
                theta: Some(theta),
                method,
                mc_se: None,
            })
        }
        (_, TruthMethod::CounterfactualMc(reps)) => counterfactual_mc(spec, reps),
    }
}

fn equiconf_x_composition(p: &EquiConfParams) -> (f64, f64) {
    let mut w_o = [0.0f64; 2];
    let mut w_t = [0.0f64; 2];
    for x in 0..2 {
        for u in 0..2 {
            let base = 0.25 * (1.0 - p.p_e[x]);
            let pa = (p.assign_base[x] + p.assign_u * u as f64).clamp(0.02, 0.98);
            w_o[x] += base;
            w_t[x] += base * pa;
        }
    }
    (w_o[1] / (w_o[0] + w_o[1]), w_t[1] / (w_t[0] + w_t[1]))
}

/// Monte Carlo truth over counterfactual draws: simulate latents from the
/// pooled law, weight into the observational (or treated-observational)
/// population, and average the unit-level effect.
fn counterfactual_mc(spec: &DgpSpec, reps: u64) -> Result<GroundTruth> {
    let mut rng = stream(spec.seed, 1, StreamId::Counterfactual);
    let mut sw_o = 0.0;
    let mut swd_o = 0.0;
    let mut swd2_o = 0.0;
    let mut sw_t = 0.0;
    let mut swd_t = 0.0;
    let mut swd2_t = 0.0;
    for _ in 0..reps {
        let (w_o, w_t, d) = match &spec.tag {
            DgpTag::LatentUnconf(p) => {
                let x: f64 = rng.sample(StandardNormal);
                let u: f64 = rng.sample(StandardNormal);
                let w_o = 1.0 - sigmoid(0.15 + 0.5 * x);
                let w_t = w_o * sigmoid(0.4 * x + 0.9 * u);
                (w_o, w_t, p.theta_y + p.phi * u)
            }
            DgpTag::EquiConfMarg(p) | DgpTag::EquiConfCond(p) => {
                let x = rng.random_bool(0.5) as usize;
                let u = rng.random_bool(0.5) as usize;
                let w_o = 1.0 - p.p_e[x];
                let pa = (p.assign_base[x] + p.assign_u * u as f64).clamp(0.02, 0.98);
                (w_o, w_o * pa, p.effect_y + p.ax_y * x as f64)
            }
            DgpTag::Qq(p) => {
                let x = rng.random_bool(0.5) as usize;
                let u: f64 = rng.sample(StandardNormal);
                let w_o = 1.0 - p.p_e[x];
                let pa = sigmoid(p.assign_o_x * (2.0 * x as f64 - 1.0) + p.assign_o_u * u);
                (w_o, w_o * pa, p.effect_y)
            }
            DgpTag::Bsiv(p) => {
                let assign = p.assignment();
                let x = rng.random_bool(0.5) as usize;
                let u = rng.random_bool(0.5) as usize;
                let z = rng.random_bool(p.p_z1[x]) as usize;
                let w_o = 1.0 - p.p_e[x];
                (w_o, w_o * assign[u][x][z], p.effect_y + p.ax_y * x as f64)
            }
            DgpTag::Proximal(p) => {
                let x = rng.random_bool(0.5) as usize;
                let u = rng.random_bool(0.5) as usize;
                let z = rng.random_bool(p.p_z1(u, x)) as usize;
                let w_o = 1.0 - p.p_e[x];
                let d = p.y_mean(1, p.p_m_hi(1, u, x, z), u, x)
                    - p.y_mean(0, p.p_m_hi(0, u, x, z), u, x);
                (w_o, w_o * p.p_a_obs(u, x, z), d)
            }
            DgpTag::DiscreteToy(_) => {
                return ground_truth(spec, TruthMethod::Enumeration);
            }
        };
        sw_o += w_o;
        swd_o += w_o * d;
        swd2_o += w_o * d * d;
        sw_t += w_t;
        swd_t += w_t * d;
        swd2_t += w_t * d * d;
    }
    let ate = swd_o / sw_o;
    let ett = swd_t / sw_t;
    let var_o = (swd2_o / sw_o - ate * ate).max(0.0);
    let var_t = (swd2_t / sw_t - ett * ett).max(0.0);
    let mc_se = num_traits::Float::sqrt((var_o + var_t) / reps as f64);
    Ok(GroundTruth {
        ate,
        ett,
        theta: None,
        method: TruthMethod::CounterfactualMc(reps),
        mc_se: Some(mc_se),
    })
}

/// Serialize a discrete world's joint table as inspectable text.
pub fn world_table_text(w: &DiscreteWorld) -> String {
    use core::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "world {}", w.name);
    let _ = writeln!(out, "columns g u x z a m prob y_mean");
    for c in w.cells() {
        if c.prob > 0.0 {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {} {}",
                c.g.as_char(),
                c.u,
                c.x,
                c.z,
                c.a,
                w.m_value(c.m),
                c.prob,
                c.y_mean
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let spec = DgpSpec::by_name("equiconf-marg", 500, 7).unwrap();
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.rows(), b.rows());
        let c = generate_rep(&spec, 1).unwrap();
        assert_ne!(a.rows(), c.rows());
    }

    #[test]
    fn violate_zero_delta_is_identity() {
        let spec = DgpSpec::by_name("equiconf-marg", 100, 7).unwrap();
        let same = violate(&spec, ViolationKind::EquiConfSlippage, 0.0).unwrap();
        let a = generate(&spec).unwrap();
        let b = generate(&same).unwrap();
        assert_eq!(a.rows(), b.rows());
    }

    #[test]
    fn unsupported_violation_errors() {
        let spec = DgpSpec::by_name("qq", 100, 7).unwrap();
        assert!(matches!(
            violate(&spec, ViolationKind::ProxyLeak, 0.5),
            Err(Error::UnsupportedViolation(_))
        ));
    }

    #[test]
    fn equiconf_sample_moments_match_analytic_means() {
        let p = EquiConfParams::marginal();
        let spec = DgpSpec::new(DgpTag::EquiConfMarg(p.clone()), 200_000, 11);
        let data = generate(&spec).unwrap();
        for a in 0..2u8 {
            let mut num = 0.0;
            let mut den = 0.0;
            for x in 0..2 {
                for u in 0..2 {
                    let pa = (p.assign_base[x] + p.assign_u * u as f64).clamp(0.02, 0.98);
                    let pa = if a == 1 { pa } else { 1.0 - pa };
                    let w = 0.25 * (1.0 - p.p_e[x]) * pa;
                    let m = p.intercept_m
                        + p.effect_m * a as f64
                        + p.x_m * x as f64
                        + p.u_m * u as f64;
                    num += w * m;
                    den += w;
                }
            }
            let analytic = num / den;
            let view = data.split(DomainTag::Observational, Some(a));
            let sample = view.mean(|r| r.m.unwrap()).unwrap();
            let se = 1.5 / num_traits::Float::sqrt(view.len() as f64);
            assert!(
                (sample - analytic).abs() < 3.0 * se + 1e-9,
                "a={a}: {sample} vs {analytic}"
            );
        }
    }

    #[test]
    fn toy_sample_frequencies_match_table() {
        let spec = DgpSpec::by_name("toy-1", 200_000, 3).unwrap();
        let data = generate(&spec).unwrap();
        let w = ToyWorldName::Toy1.build();
        let p_table = w.prob(|c| c.g == DomainTag::Observational && c.a == 1);
        let p_sample = data
            .empirical_prob(|g, a| g == DomainTag::Observational && a == 1)
            .unwrap();
        let se = num_traits::Float::sqrt(p_table * (1.0 - p_table) / 200_000.0);
        assert!((p_sample - p_table).abs() < 3.0 * se + 1e-9);
    }

    #[test]
    fn mc_truth_close_to_closed_form() {
        let spec = DgpSpec::by_name("proximal", 10, 5).unwrap();
        let cf = ground_truth(&spec, TruthMethod::ClosedForm).unwrap();
        let mc = ground_truth(&spec, TruthMethod::CounterfactualMc(400_000)).unwrap();
        assert!((cf.ate - mc.ate).abs() < 4.0 * mc.mc_se.unwrap() + 1e-6);
        assert!((cf.ett - mc.ett).abs() < 4.0 * mc.mc_se.unwrap() + 1e-6);
        assert!(mc.mc_se.unwrap() < 0.005);
    }
}
