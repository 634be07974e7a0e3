//! Joint photon-number statistics of the `a₊`, `a₋` image modes and the
//! classical Fisher information of that measurement.
//!
//! ```text
//! P(n₊, n₋) = (1−γ²)^{1+n₊+n₋} N₊^{n₊} N₋^{n₋} ₂F₁(1+n₊, 1+n₋; 1; z) / (λ₊^{n₊+1} λ₋^{n₋+1})
//! λ± = 1 + N±(1 − γ²),   z = γ²/(λ₊λ₋)
//! ```
//!
//! `₂F₁` is evaluated through Euler's transformation, which turns it into a
//! finite sum of positive terms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian_fisher::FisherMatrix;
use crate::model::{DiffractionGeometry, SourcePair};
use crate::special::euler_polynomial;

/// Which series stands in for `₂F₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum F21Series {
    /// Gauss series `Σ (a)ₘ(b)ₘ/((c)ₘ m!) zᵐ`.
    #[default]
    Gauss,
    /// `Σ [abz]ᵐ/m! = exp(abz)`; does not normalize.
    Exponential,
}

/// Occupations and correlation entering `P(n₊, n₋)` plus their `Tᵢ` derivatives.
#[derive(Debug, Clone, Copy)]
struct CountingParams {
    n_plus: f64,
    n_minus: f64,
    g2: f64,
    dn_plus: [f64; 2],
    dn_minus: [f64; 2],
    dg2: [f64; 2],
}

impl CountingParams {
    fn new(pair: &SourcePair, geom: &DiffractionGeometry) -> Self {
        let p = pair.params();
        let g = pair.gradient();
        let s = geom.s();
        let eta = pair.eta;
        Self {
            n_plus: p.n_total * eta * (1.0 + s),
            n_minus: p.n_total * eta * (1.0 - s),
            g2: p.gamma * p.gamma,
            dn_plus: g.dn.map(|d| eta * (1.0 + s) * d),
            dn_minus: g.dn.map(|d| eta * (1.0 - s) * d),
            dg2: [0, 1].map(|i| 2.0 * p.gamma * g.dgamma[i]),
        }
    }

    fn lambda(&self) -> (f64, f64) {
        (
            1.0 + self.n_plus * (1.0 - self.g2),
            1.0 + self.n_minus * (1.0 - self.g2),
        )
    }

    fn z(&self) -> f64 {
        let (lp, lm) = self.lambda();
        self.g2 / (lp * lm)
    }
}

/// `ln P(n₊, n₋)` and its partial derivatives with respect to `(N₊, N₋, γ²)`.
fn ln_prob_and_partials(
    c: &CountingParams,
    np: usize,
    nm: usize,
    series: F21Series,
) -> (f64, [f64; 3]) {
    let (lp, lm) = c.lambda();
    let z = c.z();
    let (npf, nmf) = (np as f64, nm as f64);
    let total = 1.0 + npf + nmf;
    let (ln_f, dlnf_dz) = match series {
        F21Series::Gauss => {
            let (ln_q, q_slope) = euler_polynomial(np, nm, z);
            (ln_q - total * (-z).ln_1p(), total / (1.0 - z) + q_slope)
        }
        F21Series::Exponential => {
            let rate = (1.0 + npf) * (1.0 + nmf);
            (rate * z, rate)
        }
    };

    let mut ln_p = total * (-c.g2).ln_1p() - (npf + 1.0) * lp.ln() - (nmf + 1.0) * lm.ln() + ln_f;
    if np > 0 {
        ln_p += npf * c.n_plus.ln();
    }
    if nm > 0 {
        ln_p += nmf * c.n_minus.ln();
    }

    let one_m_g = 1.0 - c.g2;
    let dz_dnp = -z * one_m_g / lp;
    let dz_dnm = -z * one_m_g / lm;
    let dz_dg = (1.0 + c.g2 * (c.n_plus / lp + c.n_minus / lm)) / (lp * lm);

    let mut d_np = -(npf + 1.0) * one_m_g / lp + dlnf_dz * dz_dnp;
    if np > 0 {
        d_np += npf / c.n_plus;
    }
    let mut d_nm = -(nmf + 1.0) * one_m_g / lm + dlnf_dz * dz_dnm;
    if nm > 0 {
        d_nm += nmf / c.n_minus;
    }
    let d_g = -total / one_m_g
        + (npf + 1.0) * c.n_plus / lp
        + (nmf + 1.0) * c.n_minus / lm
        + dlnf_dz * dz_dg;
    (ln_p, [d_np, d_nm, d_g])
}

fn validate(pair: &SourcePair, geom: &DiffractionGeometry) -> Result<()> {
    pair.validate()?;
    geom.validate()
}

/// `P(n₊, n₋)` with the Gauss series.
pub fn joint_prob(np: usize, nm: usize, pair: &SourcePair, geom: &DiffractionGeometry) -> Result<f64> {
    joint_prob_with(np, nm, pair, geom, F21Series::Gauss)
}

pub fn joint_prob_with(
    np: usize,
    nm: usize,
    pair: &SourcePair,
    geom: &DiffractionGeometry,
    series: F21Series,
) -> Result<f64> {
    validate(pair, geom)?;
    let c = CountingParams::new(pair, geom);
    let z = c.z();
    if !(0.0..1.0).contains(&z) {
        return Err(Error::Numerical(format!(
            "hypergeometric argument {z} outside [0, 1)"
        )));
    }
    if c.n_minus == 0.0 && nm > 0 {
        return Ok(0.0);
    }
    Ok(ln_prob_and_partials(&c, np, nm, series).0.exp())
}

/// Truncated joint distribution on `0..=cap_plus × 0..=cap_minus`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountDistribution {
    /// Row-major: `probs[n₊ * (cap_minus + 1) + n₋]`.
    pub probs: Vec<f64>,
    pub cap_plus: usize,
    pub cap_minus: usize,
    /// Upper bound on the probability outside the grid.
    pub tail_mass: f64,
}

impl CountDistribution {
    pub fn get(&self, np: usize, nm: usize) -> f64 {
        if np > self.cap_plus || nm > self.cap_minus {
            return 0.0;
        }
        self.probs[np * (self.cap_minus + 1) + nm]
    }

    pub fn total(&self) -> f64 {
        pairwise_sum(&self.probs)
    }
}

/// Cap such that a geometric marginal with mean `n` leaves mass `< tol` above it.
fn marginal_cap(n: f64, tol: f64) -> usize {
    if n == 0.0 {
        return 0;
    }
    // P(X > cap) = (n/(n+1))^{cap+1}
    let q = n / (n + 1.0);
    ((tol.ln() / q.ln()).ceil() as usize).saturating_sub(1)
}

/// Grid caps per mode and the union bound on the omitted mass.
fn caps(c: &CountingParams, tail_tol: f64) -> (usize, usize, f64) {
    let cap_p = marginal_cap(c.n_plus, 0.5 * tail_tol);
    let cap_m = marginal_cap(c.n_minus, 0.5 * tail_tol);
    let tail = |n: f64, cap: usize| {
        if n == 0.0 {
            0.0
        } else {
            (n / (n + 1.0)).powi(cap as i32 + 1)
        }
    };
    (cap_p, cap_m, tail(c.n_plus, cap_p) + tail(c.n_minus, cap_m))
}

pub fn count_distribution(
    pair: &SourcePair,
    geom: &DiffractionGeometry,
    tail_tol: f64,
) -> Result<CountDistribution> {
    validate(pair, geom)?;
    check_tol(tail_tol)?;
    let c = CountingParams::new(pair, geom);
    let (cap_plus, cap_minus, tail_mass) = caps(&c, tail_tol);
    let probs = (0..=cap_plus)
        .into_par_iter()
        .flat_map_iter(|np| (0..=cap_minus).map(move |nm| (np, nm)))
        .map(|(np, nm)| ln_prob_and_partials(&c, np, nm, F21Series::Gauss).0.exp())
        .collect();
    Ok(CountDistribution {
        probs,
        cap_plus,
        cap_minus,
        tail_mass,
    })
}

fn check_tol(tail_tol: f64) -> Result<()> {
    if tail_tol > 0.0 && tail_tol < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("tail_tol must lie in (0, 1), got {tail_tol}")))
    }
}

/// Summation with a fixed tree shape, independent of thread scheduling.
fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Classical Fisher information `Σ ∂ᵢP ∂ⱼP / P` of the joint counts.
pub fn counting_fi_matrix(
    pair: &SourcePair,
    geom: &DiffractionGeometry,
    tail_tol: f64,
) -> Result<FisherMatrix> {
    counting_fi_matrix_with(pair, geom, tail_tol, F21Series::Gauss)
}

/// As [`counting_fi_matrix`], with the literal series available for comparison.
/// The literal series does not give a normalized distribution, so its output
/// is not a Fisher information in the strict sense.
pub fn counting_fi_matrix_with(
    pair: &SourcePair,
    geom: &DiffractionGeometry,
    tail_tol: f64,
    series: F21Series,
) -> Result<FisherMatrix> {
    validate(pair, geom)?;
    check_tol(tail_tol)?;
    let c = CountingParams::new(pair, geom);
    if c.n_minus == 0.0 && series == F21Series::Gauss {
        return Ok(maximum_diffraction_fi(&c));
    }
    let (cap_plus, cap_minus, _) = caps(&c, tail_tol);
    // one row of the grid per task; rows are reduced in index order
    let rows: Vec<[f64; 3]> = (0..=cap_plus)
        .into_par_iter()
        .map(|np| {
            let mut cells = [Vec::new(), Vec::new(), Vec::new()];
            for nm in 0..=cap_minus {
                let (ln_p, d) = ln_prob_and_partials(&c, np, nm, series);
                let p = ln_p.exp();
                let score = [0, 1].map(|i| d[0] * c.dn_plus[i] + d[1] * c.dn_minus[i] + d[2] * c.dg2[i]);
                cells[0].push(p * score[0] * score[0]);
                cells[1].push(p * score[1] * score[1]);
                cells[2].push(p * score[0] * score[1]);
            }
            cells.map(|v| pairwise_sum(&v))
        })
        .collect();
    let col = |k: usize| pairwise_sum(&rows.iter().map(|r| r[k]).collect::<Vec<_>>());
    Ok(FisherMatrix::new(col(0), col(1), col(2)))
}

/// At `s = 1` only `n₋ = 0` is populated and `n₊` is geometric with mean
/// `N₊`, so the information is rank one.
fn maximum_diffraction_fi(c: &CountingParams) -> FisherMatrix {
    let n = c.n_plus;
    let w = 1.0 / (n * (n + 1.0));
    let (a, b) = (c.dn_plus[0], c.dn_plus[1]);
    FisherMatrix::new(a * a * w, b * b * w, a * b * w)
}

/// `ln P` via the product of binomial-weighted terms; used only to check the
/// Euler route against a direct sum over the hypergeometric series.
#[doc(hidden)]
pub fn ln_prob_direct_series(np: usize, nm: usize, pair: &SourcePair, geom: &DiffractionGeometry) -> Result<f64> {
    let c = CountingParams::new(pair, geom);
    let (lp, lm) = c.lambda();
    let (npf, nmf) = (np as f64, nm as f64);
    let ln_f = crate::special::hyp2f1_ln(1.0 + npf, 1.0 + nmf, 1.0, c.z())?;
    let mut ln_p = (1.0 + npf + nmf) * (-c.g2).ln_1p() - (npf + 1.0) * lp.ln() - (nmf + 1.0) * lm.ln() + ln_f;
    if np > 0 {
        ln_p += npf * c.n_plus.ln();
    }
    if nm > 0 {
        ln_p += nmf * c.n_minus.ln();
    }
    Ok(ln_p)
}
