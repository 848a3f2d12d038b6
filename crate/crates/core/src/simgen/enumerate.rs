//! Exact population evaluation of the identification formulas on a
//! [`DiscreteWorld`]. These are the oracles the sample-based estimators are
//! tested against; they share no code with the estimation path.

use alloc::vec::Vec;

use crate::data::DomainTag;
use crate::error::Result;
use crate::simgen::worlds::{Cell, DiscreteWorld};

const E: DomainTag = DomainTag::Experimental;
const O: DomainTag = DomainTag::Observational;

/// E[M | A=a, X=x, G=g] on the table.
pub fn mu_m(w: &DiscreteWorld, g: DomainTag, a: usize, x: usize) -> f64 {
    w.mean_given(
        |c| w.m_value(c.m),
        |c| c.g == g && c.a == a && c.x == x,
    )
    .expect("cell")
}

fn mu_m_z(w: &DiscreteWorld, g: DomainTag, a: usize, z: usize, x: usize) -> f64 {
    w.mean_given(
        |c| w.m_value(c.m),
        |c| c.g == g && c.a == a && c.x == x && c.z == z,
    )
    .expect("cell")
}

/// E[Y | A=a, X=x, G=O].
pub fn mu_y(w: &DiscreteWorld, a: usize, x: usize) -> f64 {
    w.mean_given(|c| c.y_mean, |c| c.g == O && c.a == a && c.x == x)
        .expect("cell")
}

fn mu_y_z(w: &DiscreteWorld, a: usize, z: usize, x: usize) -> f64 {
    w.mean_given(
        |c| c.y_mean,
        |c| c.g == O && c.a == a && c.x == x && c.z == z,
    )
    .expect("cell")
}

/// P(A=1 | X=x, G).
pub fn pi_g(w: &DiscreteWorld, g: DomainTag, x: usize) -> f64 {
    w.mean_given(|c| c.a as f64, |c| c.g == g && c.x == x)
        .expect("cell")
}

fn pi_o_zx(w: &DiscreteWorld, z: usize, x: usize) -> f64 {
    w.mean_given(|c| c.a as f64, |c| c.g == O && c.x == x && c.z == z)
        .expect("cell")
}

/// P(G=E | X=x) in the pooled population.
pub fn p_e_given_x(w: &DiscreteWorld, x: usize) -> f64 {
    w.mean_given(|c| (c.g == E) as u8 as f64, |c| c.x == x)
        .expect("cell")
}

/// Average f(x) over p(X | G=O).
fn avg_over_o<F: Fn(usize) -> f64>(w: &DiscreteWorld, f: F) -> f64 {
    let p_o = w.prob(|c| c.g == O);
    (0..2)
        .map(|x| f(x) * w.prob(|c| c.g == O && c.x == x) / p_o)
        .sum()
}

/// Average f(z, x) over p(Z, X | A=1, G=O) (ETT weighting) or p(Z, X | G=O).
fn avg_zx<F: Fn(usize, usize) -> f64>(w: &DiscreteWorld, treated_only: bool, f: F) -> f64 {
    let keep = |c: &Cell| c.g == O && (!treated_only || c.a == 1);
    let den = w.prob(keep);
    let mut acc = 0.0;
    for z in 0..w.nz {
        for x in 0..2 {
            let p = w.prob(|c| keep(c) && c.z == z && c.x == x);
            if p > 0.0 {
                acc += f(z, x) * p / den;
            }
        }
    }
    acc
}

// ---- nested-regression baseline ------------------------------------------

fn nested_outer(w: &DiscreteWorld, a: usize) -> f64 {
    // E over p(X|G=O) of sum_m p(m | A=a, X, G=E) E[Y | m, A=a, X, G=O].
    avg_over_o(w, |x| {
        (0..2)
            .map(|m| {
                let pm = w
                    .mean_given(
                        |c| (c.m == m) as u8 as f64,
                        |c| c.g == E && c.a == a && c.x == x,
                    )
                    .expect("cell");
                let inner = w
                    .mean_given(
                        |c| c.y_mean,
                        |c| c.g == O && c.a == a && c.x == x && c.m == m,
                    )
                    .expect("cell");
                pm * inner
            })
            .sum()
    })
}

/// Triple-expectation identification of the ATE under latent
/// unconfoundedness.
pub fn latent_unconf_ate(w: &DiscreteWorld) -> f64 {
    nested_outer(w, 1) - nested_outer(w, 0)
}

/// Matching ETT identification.
pub fn latent_unconf_ett(w: &DiscreteWorld) -> f64 {
    let p1 = w
        .mean_given(|c| c.a as f64, |c| c.g == O)
        .expect("cell");
    let y1 = w
        .mean_given(|c| c.y_mean, |c| c.g == O && c.a == 1)
        .expect("cell");
    let y0 = w
        .mean_given(|c| c.y_mean, |c| c.g == O && c.a == 0)
        .expect("cell");
    y1 - nested_outer(w, 0) / p1 + (1.0 - p1) / p1 * y0
}

// ---- cross-domain counterfactual-mean identities ---------------------------

/// Conditional identity for E[M^{(a)} | X=x, A=1-a, G=O].
pub fn cf_mean_m_conditional(w: &DiscreteWorld, a: usize, x: usize) -> f64 {
    let p_a = if a == 1 {
        pi_g(w, O, x)
    } else {
        1.0 - pi_g(w, O, x)
    };
    (mu_m(w, E, a, x) - mu_m(w, O, a, x) * p_a) / (1.0 - p_a)
}

/// True E[M^{(a)} | X=x, A=1-a, G=O] from the counterfactual table.
pub fn true_cf_mean_m_conditional(w: &DiscreteWorld, a: usize, x: usize) -> f64 {
    w.cf_mean_given(
        a,
        |c| w.m_value(c.m),
        |c| c.g == O && c.a == 1 - a && c.x == x,
    )
    .expect("cell")
}

/// Marginal identity for E[M^{(a)} | A=1-a, G=O].
pub fn cf_mean_m_marginal(w: &DiscreteWorld, a: usize) -> f64 {
    let p_a = w
        .mean_given(|c| (c.a == a) as u8 as f64, |c| c.g == O)
        .expect("cell");
    let outer = avg_over_o(w, |x| mu_m(w, E, a, x));
    let m_a = w
        .mean_given(|c| w.m_value(c.m), |c| c.g == O && c.a == a)
        .expect("cell");
    (outer - m_a * p_a) / (1.0 - p_a)
}

pub fn true_cf_mean_m_marginal(w: &DiscreteWorld, a: usize) -> f64 {
    w.cf_mean_given(a, |c| w.m_value(c.m), |c| c.g == O && c.a == 1 - a)
        .expect("cell")
}

// ---- additive equi-confounding --------------------------------------------

/// Marginal equi-confounding ETT formula.
pub fn equiconf_marg_ett(w: &DiscreteWorld) -> f64 {
    let y1 = w
        .mean_given(|c| c.y_mean, |c| c.g == O && c.a == 1)
        .expect("cell");
    let y0 = w
        .mean_given(|c| c.y_mean, |c| c.g == O && c.a == 0)
        .expect("cell");
    let m0 = w
        .mean_given(|c| w.m_value(c.m), |c| c.g == O && c.a == 0)
        .expect("cell");
    let p1 = w.mean_given(|c| c.a as f64, |c| c.g == O).expect("cell");
    let outer = avg_over_o(w, |x| mu_m(w, E, 0, x));
    y1 - y0 + m0 - (outer - m0 * (1.0 - p1)) / p1
}

/// Marginal equi-confounding ATE formula.
pub fn equiconf_marg_ate(w: &DiscreteWorld) -> f64 {
    let y1 = w
        .mean_given(|c| c.y_mean, |c| c.g == O && c.a == 1)
        .expect("cell");
    let y0 = w
        .mean_given(|c| c.y_mean, |c| c.g == O && c.a == 0)
        .expect("cell");
    let m1 = w
        .mean_given(|c| w.m_value(c.m), |c| c.g == O && c.a == 1)
        .expect("cell");
    let m0 = w
        .mean_given(|c| w.m_value(c.m), |c| c.g == O && c.a == 0)
        .expect("cell");
    y1 - y0 + avg_over_o(w, |x| mu_m(w, E, 1, x) - mu_m(w, E, 0, x)) - m1 + m0
}

/// Conditional equi-confounding ETT formula.
pub fn equiconf_cond_ett(w: &DiscreteWorld) -> f64 {
    let p_t = w.prob(|c| c.g == O && c.a == 1);
    let mut acc = 0.0;
    for x in 0..2 {
        let p_x = w.prob(|c| c.g == O && c.a == 1 && c.x == x);
        if p_x <= 0.0 {
            continue;
        }
        let pi = pi_g(w, O, x);
        let y1 = mu_y(w, 1, x);
        let term = y1 + (mu_m(w, O, 0, x) - mu_m(w, E, 0, x)) / pi - mu_y(w, 0, x);
        acc += term * p_x / p_t;
    }
    acc
}

/// Conditional equi-confounding ATE formula.
pub fn equiconf_cond_ate(w: &DiscreteWorld) -> f64 {
    avg_over_o(w, |x| {
        mu_y(w, 1, x) - mu_y(w, 0, x) + mu_m(w, E, 1, x) - mu_m(w, E, 0, x)
            + mu_m(w, O, 0, x)
            - mu_m(w, O, 1, x)
    })
}

// ---- quantile-quantile -----------------------------------------------------

/// Atom list (value, prob) of an observable conditional distribution.
fn atoms<V, F>(w: &DiscreteWorld, v: V, f: F) -> Vec<(f64, f64)>
where
    V: Fn(&Cell) -> f64,
    F: Fn(&Cell) -> bool,
{
    let den = w.prob(&f);
    let mut list: Vec<(f64, f64)> = Vec::new();
    for c in w.cells() {
        if f(&c) && c.prob > 0.0 {
            let val = v(&c);
            match list.iter_mut().find(|(x, _)| *x == val) {
                Some(e) => e.1 += c.prob / den,
                None => list.push((val, c.prob / den)),
            }
        }
    }
    list.sort_by(|a, b| a.0.total_cmp(&b.0));
    list
}

fn atom_cdf(list: &[(f64, f64)], w: f64) -> f64 {
    list.iter()
        .take_while(|(v, _)| *v <= w)
        .map(|(_, p)| p)
        .sum()
}

/// Generalized inverse with a small tolerance guard for float cumsums.
fn atom_quantile(list: &[(f64, f64)], v: f64) -> f64 {
    let mut cum = 0.0;
    for (val, p) in list {
        cum += p;
        if cum >= v - 1e-12 {
            return *val;
        }
    }
    list.last().expect("nonempty").0
}

/// Debiased counterfactual CDF F_{Y^{(0)} | A=1, X=x, G=O}(y).
pub fn qq_counterfactual_cdf(w: &DiscreteWorld, x: usize, y: f64) -> f64 {
    let f_m_e = atoms(
        w,
        |c| w.m_value(c.m),
        |c| c.g == E && c.a == 0 && c.x == x,
    );
    let f_m_o = atoms(
        w,
        |c| w.m_value(c.m),
        |c| c.g == O && c.a == 0 && c.x == x,
    );
    // Y is deterministic in the quantile-quantile world, so the atom value is
    // the cell mean.
    let f_y_o = atoms(w, |c| c.y_mean, |c| c.g == O && c.a == 0 && c.x == x);
    let pi = pi_g(w, O, x);
    let v = atom_cdf(&f_y_o, y);
    let composed = atom_cdf(&f_m_e, atom_quantile(&f_m_o, v));
    composed / pi - (1.0 - pi) / pi * v
}

/// True counterfactual CDF from the table.
pub fn true_qq_cdf(w: &DiscreteWorld, x: usize, y: f64) -> f64 {
    w.cf_mean_given(
        0,
        |c| (c.y_mean <= y) as u8 as f64,
        |c| c.g == O && c.a == 1 && c.x == x,
    )
    .expect("cell")
}

/// Distinct Y^{(0)} support points at covariate level x.
pub fn qq_y_atoms(w: &DiscreteWorld, x: usize) -> Vec<f64> {
    let mut vals: Vec<f64> = w
        .cf_cells(0)
        .iter()
        .filter(|c| c.g == O && c.x == x && c.prob > 0.0)
        .map(|c| c.y_mean)
        .collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals.dedup();
    vals
}

/// ETT implied by the debiased counterfactual CDF.
pub fn equiconf_qq_ett(w: &DiscreteWorld) -> f64 {
    let p_t = w.prob(|c| c.g == O && c.a == 1);
    let y1 = w
        .mean_given(|c| c.y_mean, |c| c.g == O && c.a == 1)
        .expect("cell");
    let mut cf = 0.0;
    for x in 0..2 {
        let p_x = w.prob(|c| c.g == O && c.a == 1 && c.x == x);
        if p_x <= 0.0 {
            continue;
        }
        // E[Y^(0)] = sum over atoms of value * (F(atom) - F(prev)).
        let ys = qq_y_atoms(w, x);
        let mut prev = 0.0;
        let mut mean = 0.0;
        for &y in &ys {
            let f = qq_counterfactual_cdf(w, x, y).clamp(0.0, 1.0);
            mean += y * (f - prev);
            prev = f;
        }
        cf += mean * p_x / p_t;
    }
    y1 - cf
}

// ---- bespoke instrument ----------------------------------------------------

struct IvPieces {
    /// E_az(x) = E[Y - M | A=a, Z=z, X=x, G=O]; [a][z][x].
    e: [[[f64; 2]; 2]; 2],
    /// With the short-term outcome masked: E[Y | A=a, Z=z, X=x, G=O].
    e_dag: [[[f64; 2]; 2]; 2],
    /// P_az(x); [a][z][x].
    p: [[[f64; 2]; 2]; 2],
    /// E[Y - M | Z=z, X=x, G=O]; [z][x].
    pooled: [[f64; 2]; 2],
    /// E[Y | Z=z, X=x, G=O]; [z][x].
    pooled_y: [[f64; 2]; 2],
    /// omega-dagger_a(x) = E[M|A=a,Z=1,x,E] - E[M|A=a,Z=0,x,E]; [a][x].
    omega_dag: [[f64; 2]; 2],
}

fn iv_pieces(w: &DiscreteWorld) -> IvPieces {
    let mut e = [[[0.0; 2]; 2]; 2];
    let mut e_dag = [[[0.0; 2]; 2]; 2];
    let mut p = [[[0.0; 2]; 2]; 2];
    let mut pooled = [[0.0; 2]; 2];
    let mut pooled_y = [[0.0; 2]; 2];
    let mut omega_dag = [[0.0; 2]; 2];
    for x in 0..2 {
        for z in 0..2 {
            for a in 0..2 {
                e[a][z][x] = w
                    .mean_given(
                        |c| c.y_mean - w.m_value(c.m),
                        |c| c.g == O && c.a == a && c.z == z && c.x == x,
                    )
                    .expect("cell");
                e_dag[a][z][x] = mu_y_z(w, a, z, x);
                let pi = pi_o_zx(w, z, x);
                p[a][z][x] = if a == 1 { pi } else { 1.0 - pi };
            }
            pooled[z][x] = w
                .mean_given(
                    |c| c.y_mean - w.m_value(c.m),
                    |c| c.g == O && c.z == z && c.x == x,
                )
                .expect("cell");
            pooled_y[z][x] = w
                .mean_given(|c| c.y_mean, |c| c.g == O && c.z == z && c.x == x)
                .expect("cell");
        }
        for a in 0..2 {
            omega_dag[a][x] = mu_m_z(w, E, a, 1, x) - mu_m_z(w, E, a, 0, x);
        }
    }
    IvPieces {
        e,
        e_dag,
        p,
        pooled,
        pooled_y,
        omega_dag,
    }
}

/// Shared trailing terms of the instrument ETT displays.
fn iv_ett_m_terms(w: &DiscreteWorld, z: usize, x: usize) -> f64 {
    let pi = pi_o_zx(w, z, x);
    mu_m_z(w, O, 1, z, x) - mu_m_z(w, E, 0, z, x) / pi
        + mu_m_z(w, O, 0, z, x) * (1.0 - pi) / pi
}

/// ETT under effect-contrast homogeneity.
pub fn bsiv_ett_effect(w: &DiscreteWorld) -> f64 {
    let p = iv_pieces(w);
    avg_zx(w, true, |z, x| {
        (p.pooled[1][x] - p.pooled[0][x]) / (p.p[1][1][x] - p.p[1][0][x])
            + iv_ett_m_terms(w, z, x)
    })
}

/// ETT under bias-contrast homogeneity.
pub fn bsiv_ett_bias(w: &DiscreteWorld) -> f64 {
    let p = iv_pieces(w);
    avg_zx(w, true, |z, x| {
        let interact = p.e[1][1][x] - p.e[0][1][x] - p.e[1][0][x] + p.e[0][0][x];
        interact * z as f64 + p.e[1][0][x] - p.e[0][0][x]
            - (p.e[0][1][x] - p.e[0][0][x]) / (p.p[0][1][x] - p.p[0][0][x])
            + iv_ett_m_terms(w, z, x)
    })
}

/// ATE under effect-contrast homogeneity.
pub fn bsiv_ate_effect(w: &DiscreteWorld) -> f64 {
    let p = iv_pieces(w);
    avg_zx(w, false, |z, x| {
        (p.pooled[1][x] - p.pooled[0][x]) / (p.p[1][1][x] - p.p[1][0][x])
            + mu_m_z(w, E, 1, z, x)
            - mu_m_z(w, E, 0, z, x)
    })
}

/// ATE under bias-contrast homogeneity.
pub fn bsiv_ate_bias(w: &DiscreteWorld) -> f64 {
    let p = iv_pieces(w);
    avg_zx(w, false, |z, x| {
        let interact = p.e[1][1][x] - p.e[0][1][x] - p.e[1][0][x] + p.e[0][0][x];
        let pi = pi_o_zx(w, z, x);
        interact * z as f64 + p.e[1][0][x] - p.e[0][0][x]
            - ((p.e[0][1][x] - p.e[0][0][x]) * pi
                + (p.e[1][1][x] - p.e[1][0][x]) * (1.0 - pi))
                / (p.p[0][1][x] - p.p[0][0][x])
            + mu_m_z(w, E, 1, z, x)
            - mu_m_z(w, E, 0, z, x)
    })
}

/// ETT with the short-term outcome unobserved, strong effect homogeneity.
pub fn bsiv_ett_effect_no_m(w: &DiscreteWorld) -> f64 {
    let p = iv_pieces(w);
    avg_zx(w, true, |_z, x| {
        (p.pooled_y[1][x] - p.pooled_y[0][x] - p.omega_dag[0][x])
            / (p.p[1][1][x] - p.p[1][0][x])
    })
}

/// ETT with the short-term outcome unobserved, strong bias homogeneity.
pub fn bsiv_ett_bias_no_m(w: &DiscreteWorld) -> f64 {
    let p = iv_pieces(w);
    avg_zx(w, true, |z, x| {
        let interact =
            p.e_dag[1][1][x] - p.e_dag[0][1][x] - p.e_dag[1][0][x] + p.e_dag[0][0][x];
        interact * z as f64 + p.e_dag[1][0][x] - p.e_dag[0][0][x]
            - (p.e_dag[0][1][x] - p.e_dag[0][0][x] - p.omega_dag[0][x])
                / (p.p[0][1][x] - p.p[0][0][x])
    })
}

/// ATE with the short-term outcome unobserved, strong effect homogeneity.
pub fn bsiv_ate_effect_no_m(w: &DiscreteWorld) -> f64 {
    let p = iv_pieces(w);
    avg_zx(w, false, |z, x| {
        let pi = pi_o_zx(w, z, x);
        (p.pooled_y[1][x] - p.pooled_y[0][x]) / (p.p[1][1][x] - p.p[1][0][x])
            - (p.omega_dag[0][x] * pi + p.omega_dag[1][x] * (1.0 - pi))
                / (p.p[1][1][x] - p.p[1][0][x])
    })
}

/// ATE with the short-term outcome unobserved, strong bias homogeneity.
pub fn bsiv_ate_bias_no_m(w: &DiscreteWorld) -> f64 {
    let p = iv_pieces(w);
    avg_zx(w, false, |z, x| {
        let interact =
            p.e_dag[1][1][x] - p.e_dag[0][1][x] - p.e_dag[1][0][x] + p.e_dag[0][0][x];
        let pi = pi_o_zx(w, z, x);
        interact * z as f64 + p.e_dag[1][0][x] - p.e_dag[0][0][x]
            - ((p.e_dag[0][1][x] - p.e_dag[0][0][x] - p.omega_dag[0][x]) * pi
                + (p.e_dag[1][1][x] - p.e_dag[1][0][x] - p.omega_dag[1][x]) * (1.0 - pi))
                / (p.p[0][1][x] - p.p[0][0][x])
    })
}

// ---- proximal ---------------------------------------------------------------

/// eta(a, x) = E[h(M, a, x) | A=a, X=x, G=E] for an exact bridge table.
fn eta_exact(w: &DiscreteWorld, h: &[[[f64; 2]; 2]; 2], a: usize, x: usize) -> f64 {
    (0..2)
        .map(|m| {
            let pm = w
                .mean_given(
                    |c| (c.m == m) as u8 as f64,
                    |c| c.g == E && c.a == a && c.x == x,
                )
                .expect("cell");
            h[m][a][x] * pm
        })
        .sum()
}

/// theta^(a) through the outcome bridge.
pub fn proximal_theta_h(w: &DiscreteWorld, a: usize) -> Result<f64> {
    let h = w.solve_bridge_h_exact()?;
    Ok(avg_over_o(w, |x| eta_exact(w, &h, a, x)))
}

/// theta^(a) through the treatment bridge.
pub fn proximal_theta_q(w: &DiscreteWorld, a: usize) -> Result<f64> {
    let q = w.solve_bridge_q_exact()?;
    let p_o = w.prob(|c| c.g == O);
    let mut acc = 0.0;
    for c in w.cells() {
        if c.g == O && c.a == a {
            acc += c.prob * c.y_mean * q[c.z][a][c.x];
        }
    }
    Ok(acc / p_o)
}

/// theta^(a) through the uncentered influence identity using exact bridges.
pub fn proximal_theta_if(w: &DiscreteWorld, a: usize) -> Result<f64> {
    let h = w.solve_bridge_h_exact()?;
    let q = w.solve_bridge_q_exact()?;
    let p_o = w.prob(|c| c.g == O);
    let mut acc = 0.0;
    for c in w.cells() {
        let x = c.x;
        match c.g {
            O => {
                if c.a == a {
                    acc += c.prob * q[c.z][a][x] * (c.y_mean - h[c.m][a][x]);
                }
                acc += c.prob * eta_exact(w, &h, a, x);
            }
            E => {
                if c.a == a {
                    let p_a = if a == 1 {
                        pi_g(w, E, x)
                    } else {
                        1.0 - pi_g(w, E, x)
                    };
                    let pe = p_e_given_x(w, x);
                    acc += c.prob / p_a
                        * (h[c.m][a][x] - eta_exact(w, &h, a, x))
                        * (1.0 / pe - 1.0);
                }
            }
        }
    }
    Ok(acc / p_o)
}

/// ETT derived from a theta^(0) identification.
pub fn ett_from_theta0(w: &DiscreteWorld, theta0: f64) -> f64 {
    let p1 = w.mean_given(|c| c.a as f64, |c| c.g == O).expect("cell");
    let y1 = w
        .mean_given(|c| c.y_mean, |c| c.g == O && c.a == 1)
        .expect("cell");
    let y0 = w
        .mean_given(|c| c.y_mean, |c| c.g == O && c.a == 0)
        .expect("cell");
    y1 - (theta0 - y0 * (1.0 - p1)) / p1
}

// ---- influence-function identities (equi-confounding) ----------------------

/// Uncentered one-step ETT identity with true table nuisances.
pub fn if_equiconf_ett(w: &DiscreteWorld) -> f64 {
    let p1g = w.prob(|c| c.g == O && c.a == 1);
    let mut acc = 0.0;
    for c in w.cells() {
        let x = c.x;
        let m = w.m_value(c.m);
        let mut v = 0.0;
        match (c.g, c.a) {
            (O, 0) => {
                let pi = pi_g(w, O, x);
                v += (m - mu_m(w, O, 0, x)) / (1.0 - pi);
                v -= pi / (1.0 - pi) * (c.y_mean - mu_y(w, 0, x));
            }
            (E, 0) => {
                let pi_e = pi_g(w, E, x);
                let pe = p_e_given_x(w, x);
                v -= (1.0 / pe - 1.0) / (1.0 - pi_e) * (m - mu_m(w, E, 0, x));
            }
            _ => {}
        }
        if c.g == O {
            v += mu_m(w, O, 0, x) - mu_m(w, E, 0, x);
            if c.a == 1 {
                v += c.y_mean - mu_y(w, 0, x);
            }
        }
        acc += c.prob * v;
    }
    acc / p1g
}

/// Uncentered one-step ATE identity with true table nuisances.
pub fn if_equiconf_ate(w: &DiscreteWorld) -> f64 {
    let p_o = w.prob(|c| c.g == O);
    let mut acc = 0.0;
    for c in w.cells() {
        let x = c.x;
        let m = w.m_value(c.m);
        let sign = if c.a == 1 { 1.0 } else { -1.0 };
        let mut v = 0.0;
        match c.g {
            E => {
                let p_a = if c.a == 1 {
                    pi_g(w, E, x)
                } else {
                    1.0 - pi_g(w, E, x)
                };
                let pe = p_e_given_x(w, x);
                v += sign / p_a * (m - mu_m(w, E, c.a, x)) * (1.0 / pe - 1.0);
            }
            O => {
                let p_a = if c.a == 1 {
                    pi_g(w, O, x)
                } else {
                    1.0 - pi_g(w, O, x)
                };
                v += sign / p_a
                    * (c.y_mean - mu_y(w, c.a, x) - m + mu_m(w, O, c.a, x));
                v += mu_y(w, 1, x) - mu_y(w, 0, x) + mu_m(w, E, 1, x) - mu_m(w, E, 0, x)
                    + mu_m(w, O, 0, x)
                    - mu_m(w, O, 1, x);
            }
        }
        acc += c.prob * v;
    }
    acc / p_o
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::worlds::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn latent_unconf_formulas_match_truth_on_lu_world() {
        let w = toy_world_lu();
        assert!((latent_unconf_ate(&w) - w.true_ate()).abs() < TOL);
        assert!((latent_unconf_ett(&w) - w.true_ett()).abs() < TOL);
    }

    #[test]
    fn latent_unconf_formula_gap_on_violating_world() {
        let w = toy_world_lu_gap();
        assert!((latent_unconf_ate(&w) - w.true_ate()).abs() > 0.1);
    }

    #[test]
    fn conditional_and_marginal_cf_mean_identities() {
        let w = toy_world_1();
        for a in 0..2 {
            for x in 0..2 {
                assert!(
                    (cf_mean_m_conditional(&w, a, x) - true_cf_mean_m_conditional(&w, a, x))
                        .abs()
                        < TOL
                );
            }
            assert!(
                (cf_mean_m_marginal(&w, a) - true_cf_mean_m_marginal(&w, a)).abs() < TOL
            );
        }
    }

    #[test]
    fn equiconf_formulas_match_truth() {
        let ec = toy_world_ec();
        assert!((equiconf_marg_ett(&ec) - ec.true_ett()).abs() < TOL);
        assert!((equiconf_marg_ate(&ec) - ec.true_ate()).abs() < TOL);
        let ecc = toy_world_ecc();
        assert!((equiconf_cond_ett(&ecc) - ecc.true_ett()).abs() < TOL);
        assert!((equiconf_cond_ate(&ecc) - ecc.true_ate()).abs() < TOL);
        // The marginal formula is *not* valid on the conditional-only world.
        assert!((equiconf_marg_ett(&ecc) - ecc.true_ett()).abs() > 1e-3);
    }

    #[test]
    fn qq_cdf_and_ett_match_truth() {
        let w = toy_world_qq();
        for x in 0..2 {
            for &y in &qq_y_atoms(&w, x) {
                let lhs = qq_counterfactual_cdf(&w, x, y);
                let rhs = true_qq_cdf(&w, x, y);
                assert!((lhs - rhs).abs() < TOL, "x={x} y={y}: {lhs} vs {rhs}");
            }
        }
        assert!((equiconf_qq_ett(&w) - w.true_ett()).abs() < TOL);
    }

    #[test]
    fn bsiv_formulas_match_truth() {
        let w = toy_world_iv();
        let ett = w.true_ett();
        let ate = w.true_ate();
        assert!((bsiv_ett_effect(&w) - ett).abs() < TOL, "9a");
        assert!((bsiv_ett_bias(&w) - ett).abs() < TOL, "9b");
        assert!((bsiv_ate_effect(&w) - ate).abs() < TOL, "9c");
        assert!((bsiv_ate_bias(&w) - ate).abs() < TOL, "9d");
        assert!((bsiv_ett_effect_no_m(&w) - ett).abs() < TOL, "10a");
        assert!((bsiv_ett_bias_no_m(&w) - ett).abs() < TOL, "10b");
        assert!((bsiv_ate_effect_no_m(&w) - ate).abs() < TOL, "10c");
        assert!((bsiv_ate_bias_no_m(&w) - ate).abs() < TOL, "10d");
    }

    #[test]
    fn proximal_identities_match_truth() {
        let w = toy_world_px();
        for a in 0..2 {
            let truth = w.true_theta(a);
            assert!((proximal_theta_h(&w, a).unwrap() - truth).abs() < TOL, "por a={a}");
            assert!((proximal_theta_q(&w, a).unwrap() - truth).abs() < TOL, "pipw a={a}");
            assert!((proximal_theta_if(&w, a).unwrap() - truth).abs() < TOL, "if a={a}");
        }
        let ett = ett_from_theta0(&w, proximal_theta_h(&w, 0).unwrap());
        assert!((ett - w.true_ett()).abs() < TOL);
    }

    #[test]
    fn equiconf_if_identities_match_truth() {
        let w = toy_world_ec();
        assert!((if_equiconf_ett(&w) - w.true_ett()).abs() < TOL);
        assert!((if_equiconf_ate(&w) - w.true_ate()).abs() < TOL);
        let wc = toy_world_ecc();
        assert!((if_equiconf_ett(&wc) - wc.true_ett()).abs() < TOL);
        assert!((if_equiconf_ate(&wc) - wc.true_ate()).abs() < TOL);
    }
}
