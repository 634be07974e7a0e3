//! Hermite–Gauss demultiplexing followed by photon counting.
//!
//! For the Gaussian PSF, HG mode `k` collects `β_k(d)²` of each source image,
//!
//! ```text
//! β_k(d) = exp(−d²/(8ϖ²)) (d/2ϖ)^k / √k!,    Σ β_k² = 1,    Σ (−1)^k β_k² = s,
//! ```
//!
//! even modes couple only to `a₊` and odd modes only to `a₋`. The counts
//! `N_k` have means `2Nηβ_k²` and the thermal covariance
//! `Γ = diag(n) + (n nᵀ) ∘ P` with `P_kl = 1` for equal parity and `γ²`
//! otherwise. The best linear combination of counts reaches the moment
//! sensitivity `M = Dᵀ Γ⁻¹ D`; [`hg_sensitivity`] is its Woodbury-reduced
//! closed form.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian_fisher::Param;
use crate::model::{DiffractionGeometry, SourcePair};
use crate::special::ln_factorial;

/// Sign of the Gaussian prefactor in `β_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaExponent {
    /// `exp(−d²/8ϖ²)`, which normalizes `Σβ_k² = 1`.
    #[default]
    Negative,
    /// `exp(+d²/8ϖ²)`; not normalized.
    Positive,
}

/// Highest HG index included in a measurement, or the full basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeCutoff {
    Finite(usize),
    Full,
}

/// `β_k(d)` for `d ≥ 0`.
pub fn hg_beta(k: usize, d: f64, varpi: f64) -> f64 {
    hg_beta_with(k, d, varpi, BetaExponent::Negative)
}

pub fn hg_beta_with(k: usize, d: f64, varpi: f64, exponent: BetaExponent) -> f64 {
    beta_from_ratio(k, d / varpi, exponent)
}

/// `β_k` as a function of `r = d/ϖ`, evaluated in log space.
fn beta_from_ratio(k: usize, r: f64, exponent: BetaExponent) -> f64 {
    let gauss = match exponent {
        BetaExponent::Negative => -r * r / 8.0,
        BetaExponent::Positive => r * r / 8.0,
    };
    if r.is_infinite() {
        return match exponent {
            BetaExponent::Negative => 0.0,
            BetaExponent::Positive => f64::INFINITY,
        };
    }
    if k == 0 {
        return gauss.exp();
    }
    if r == 0.0 {
        return 0.0;
    }
    (gauss + k as f64 * (0.5 * r).ln() - 0.5 * ln_factorial(k)).exp()
}

/// Number of HG modes `K` such that `1 − Σ_{k≤K} β_k² < tol`.
pub fn modes_for_tail(r: f64, tol: f64) -> usize {
    let mut acc = 0.0;
    let mut k = 0;
    loop {
        acc += beta_from_ratio(k, r, BetaExponent::Negative).powi(2);
        if 1.0 - acc < tol || k > 10_000 {
            return k;
        }
        k += 1;
    }
}

/// Scalars entering the closed-form sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HgMomentSummary {
    pub a_plus: f64,
    pub a_minus: f64,
    pub b: f64,
    /// `Σ_{k≤K} (−1)^k β_k²`.
    pub s1: f64,
    /// `Σ_{k≤K} β_k²`.
    pub s2: f64,
}

impl HgMomentSummary {
    pub fn det(&self) -> f64 {
        self.a_plus * self.a_minus - self.b * self.b
    }
}

fn beta_sums(geom: &DiffractionGeometry, cutoff: ModeCutoff, exponent: BetaExponent) -> (f64, f64) {
    match (cutoff, exponent) {
        (ModeCutoff::Full, BetaExponent::Negative) => (geom.s(), 1.0),
        // e^{+r²/4} Σ (r²/4)^k/k! (±1)^k gives S₁ = 1 and S₂ = e^{r²/2} = 1/s
        (ModeCutoff::Full, BetaExponent::Positive) => (1.0, 1.0 / geom.s()),
        (ModeCutoff::Finite(k_max), _) => {
            let r = geom.separation_ratio();
            (0..=k_max).fold((0.0, 0.0), |(s1, s2), k| {
                let b2 = beta_from_ratio(k, r, exponent).powi(2);
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                (s1 + sign * b2, s2 + b2)
            })
        }
    }
}

pub fn hg_moment_summary(
    pair: &SourcePair,
    geom: &DiffractionGeometry,
    cutoff: ModeCutoff,
) -> HgMomentSummary {
    hg_moment_summary_with(pair, geom, cutoff, BetaExponent::Negative)
}

pub fn hg_moment_summary_with(
    pair: &SourcePair,
    geom: &DiffractionGeometry,
    cutoff: ModeCutoff,
    exponent: BetaExponent,
) -> HgMomentSummary {
    let p = pair.params();
    let n_eta = p.n_total * pair.eta;
    let g2 = p.gamma * p.gamma;
    let (s1, s2) = beta_sums(geom, cutoff, exponent);
    HgMomentSummary {
        a_plus: 2.0 / (1.0 + g2) + 2.0 * n_eta * s2,
        a_minus: 2.0 / (1.0 - g2) + 2.0 * n_eta * s2,
        b: 2.0 * n_eta * s1,
        s1,
        s2,
    }
}

/// `⟨N_k⟩ = Nη(|f₊|² + |f₋|²) − γNη(|f₊|² − |f₋|²)` for a mode with source
/// amplitudes `f± = ∫υ_k*(x) ψ(x ± d/2) dx`.
pub fn mean_photon_from_amplitudes(pair: &SourcePair, f_plus: f64, f_minus: f64) -> f64 {
    let p = pair.params();
    let n_eta = p.n_total * pair.eta;
    let (a, b) = (f_plus * f_plus, f_minus * f_minus);
    n_eta * (a + b) - p.gamma * n_eta * (a - b)
}

/// Mean photon number in HG mode `k`, equal to `2Nηβ_k²`.
pub fn mean_photon_hg(k: usize, pair: &SourcePair, geom: &DiffractionGeometry) -> f64 {
    let beta = beta_from_ratio(k, geom.separation_ratio(), BetaExponent::Negative);
    let parity = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    mean_photon_from_amplitudes(pair, beta, parity * beta)
}

/// Result of optimizing a linear combination of observables.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSensitivity {
    /// Optimal weights `m ∝ Γ⁻¹D`.
    pub m_opt: DVector<f64>,
    /// `M = DᵀΓ⁻¹D`.
    pub sensitivity: f64,
    pub rank: usize,
    /// False when `Γ` was singular and the pseudo-inverse was used.
    pub full_rank: bool,
}

/// Error-transfer sensitivity `(m·D)²/(mᵀΓm)` of one fixed combination.
pub fn error_transfer(m: &DVector<f64>, d: &DVector<f64>, gamma: &DMatrix<f64>) -> f64 {
    let num = m.dot(d);
    num * num / m.dot(&(gamma * m))
}

pub fn moment_sensitivity(d: &DVector<f64>, gamma: &DMatrix<f64>) -> Result<MomentSensitivity> {
    let n = d.len();
    if gamma.nrows() != n || gamma.ncols() != n {
        return Err(Error::Domain(format!(
            "covariance is {}x{} but there are {n} observables",
            gamma.nrows(),
            gamma.ncols()
        )));
    }
    if let Some(chol) = gamma.clone().cholesky() {
        let m_opt = chol.solve(d);
        return Ok(MomentSensitivity {
            sensitivity: d.dot(&m_opt),
            m_opt,
            rank: n,
            full_rank: true,
        });
    }
    let svd = gamma.clone().svd(true, true);
    let tol = svd.singular_values.max() * n as f64 * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&v| v > tol).count();
    let pinv = svd
        .pseudo_inverse(tol)
        .map_err(|e| Error::Singular(format!("pseudo-inverse failed: {e}")))?;
    let m_opt = pinv * d;
    Ok(MomentSensitivity {
        sensitivity: d.dot(&m_opt),
        m_opt,
        rank,
        full_rank: false,
    })
}

/// `(2η∂ᵢN)²`, the common prefactor of every HG sensitivity.
fn prefactor(pair: &SourcePair, which: Param) -> f64 {
    let dn = pair.gradient().dn[which.index()];
    (2.0 * pair.eta * dn).powi(2)
}

/// Closed-form sensitivity for counting HG modes `0..=K`.
pub fn hg_sensitivity(
    pair: &SourcePair,
    geom: &DiffractionGeometry,
    k_max: usize,
    which: Param,
) -> Result<f64> {
    pair.validate()?;
    geom.validate()?;
    hg_sensitivity_from_summary(pair, &hg_moment_summary(pair, geom, ModeCutoff::Finite(k_max)), which)
}

/// Sensitivity for any cutoff and either sign convention of `β_k`.
pub fn hg_sensitivity_with(
    pair: &SourcePair,
    geom: &DiffractionGeometry,
    cutoff: ModeCutoff,
    which: Param,
    exponent: BetaExponent,
) -> Result<f64> {
    pair.validate()?;
    geom.validate()?;
    if cutoff == ModeCutoff::Full && exponent == BetaExponent::Positive && geom.s() == 0.0 {
        return Err(Error::Range(
            "positive beta exponent diverges in the full basis at s = 0".into(),
        ));
    }
    hg_sensitivity_from_summary(pair, &hg_moment_summary_with(pair, geom, cutoff, exponent), which)
}

fn hg_sensitivity_from_summary(
    pair: &SourcePair,
    m: &HgMomentSummary,
    which: Param,
) -> Result<f64> {
    let det = m.det();
    if det.is_nan() || det <= 0.0 {
        return Err(Error::Singular(format!(
            "count covariance is degenerate: A+A- - B^2 = {det}"
        )));
    }
    let n_eta = pair.params().n_total * pair.eta;
    let bracket = m.s2 / (2.0 * n_eta)
        - (m.a_plus * m.s1 * m.s1 - 2.0 * m.b * m.s1 * m.s2 + m.a_minus * m.s2 * m.s2) / det;
    Ok(prefactor(pair, which) * bracket)
}

/// Full-basis (`K → ∞`) sensitivity.
///
/// Obtained from the finite-`K` form with `S₂ = 1`, `S₁ = s`:
///
/// ```text
/// M = (2η∂ᵢN)² [ 1/(2Nη) − (2s²(1−γ²) + 2(1+γ²) + 2Nη(1−γ⁴)(1−s²))
///                          / (4 + 8Nη + 4N²η²(1−s²)(1−γ⁴)) ]
/// ```
pub fn hg_sensitivity_full(pair: &SourcePair, geom: &DiffractionGeometry, which: Param) -> f64 {
    full_basis_bracket(pair, geom, 1.0 - geom.s().powi(2)) * prefactor(pair, which)
}

/// Same as [`hg_sensitivity_full`] with `(s − 1)²` in place of `1 − s²` in
/// the numerator. Agrees only at `s ∈ {0, 1}`.
pub fn hg_sensitivity_full_alt_numerator(
    pair: &SourcePair,
    geom: &DiffractionGeometry,
    which: Param,
) -> f64 {
    full_basis_bracket(pair, geom, (geom.s() - 1.0).powi(2)) * prefactor(pair, which)
}

fn full_basis_bracket(pair: &SourcePair, geom: &DiffractionGeometry, numer_factor: f64) -> f64 {
    let p = pair.params();
    let n_eta = p.n_total * pair.eta;
    let s = geom.s();
    let g2 = p.gamma * p.gamma;
    let g4 = g2 * g2;
    let numer = 2.0 * s * s * (1.0 - g2) + 2.0 * (1.0 + g2) + 2.0 * n_eta * (1.0 - g4) * numer_factor;
    let denom = 4.0 + 8.0 * n_eta + 4.0 * n_eta * n_eta * (1.0 - s * s) * (1.0 - g4);
    1.0 / (2.0 * n_eta) - numer / denom
}

/// Means `D` and covariance `Γ` of the counts `N_0..N_K`, assembled from
/// the mode amplitudes and Gaussian moment factorization.
pub fn hg_count_moments(
    pair: &SourcePair,
    geom: &DiffractionGeometry,
    k_max: usize,
    which: Param,
) -> (DVector<f64>, DMatrix<f64>) {
    let p = pair.params();
    let dn = pair.gradient().dn[which.index()];
    let r = geom.separation_ratio();
    let betas2: Vec<f64> = (0..=k_max)
        .map(|k| beta_from_ratio(k, r, BetaExponent::Negative).powi(2))
        .collect();
    let means: Vec<f64> = betas2.iter().map(|b2| 2.0 * p.n_total * pair.eta * b2).collect();
    let d = DVector::from_iterator(betas2.len(), betas2.iter().map(|b2| 2.0 * pair.eta * dn * b2));
    let g2 = p.gamma * p.gamma;
    let gamma = DMatrix::from_fn(betas2.len(), betas2.len(), |k, l| {
        // |⟨b_k† b_l⟩|² is N_k N_l within one parity class and γ² N_k N_l across
        let coupling = if k % 2 == l % 2 { 1.0 } else { g2 };
        let shot = if k == l { means[k] } else { 0.0 };
        shot + coupling * means[k] * means[l]
    });
    (d, gamma)
}

/// Sensitivity for modes `0..=K` through the generic optimizer.
pub fn hg_sensitivity_assembled(
    pair: &SourcePair,
    geom: &DiffractionGeometry,
    k_max: usize,
    which: Param,
) -> Result<f64> {
    pair.validate()?;
    geom.validate()?;
    let (d, gamma) = hg_count_moments(pair, geom, k_max, which);
    Ok(moment_sensitivity(&d, &gamma)?.sensitivity)
}

/// Poisson Fisher information `Σ_k (∂ᵢN_k)²/N_k` of the HG counts, the
/// low-flux limit of the moment sensitivity.
pub fn low_flux_fisher(
    pair: &SourcePair,
    geom: &DiffractionGeometry,
    k_max: usize,
    which: Param,
) -> f64 {
    let p = pair.params();
    let dn = pair.gradient().dn[which.index()];
    let r = geom.separation_ratio();
    (0..=k_max)
        .map(|k| beta_from_ratio(k, r, BetaExponent::Negative).powi(2))
        .filter(|&b2| b2 > 0.0)
        .map(|b2| {
            let mean = 2.0 * p.n_total * pair.eta * b2;
            let dmean = 2.0 * pair.eta * dn * b2;
            dmean * dmean / mean
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gaussian_overlap;
    use approx::assert_relative_eq;

    #[test]
    fn aligned_sources_populate_only_the_fundamental() {
        assert_eq!(hg_beta(0, 0.0, 1.0), 1.0);
        for k in 1..10 {
            assert_eq!(hg_beta(k, 0.0, 1.0), 0.0);
        }
    }

    #[test]
    fn beta_sums_reproduce_normalization_and_overlap() {
        for r in [0.5, 1.0, 2.0, 3.0] {
            let total: f64 = (0..=40).map(|k| hg_beta(k, r, 1.0).powi(2)).sum();
            let alt: f64 = (0..=40)
                .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } * hg_beta(k, r, 1.0).powi(2))
                .sum();
            assert!((total - 1.0).abs() < 1e-13);
            assert!((alt - gaussian_overlap(r, 1.0).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn positive_exponent_breaks_normalization() {
        let total: f64 = (0..=40)
            .map(|k| hg_beta_with(k, 2.0, 1.0, BetaExponent::Positive).powi(2))
            .sum();
        // e^{r²/4} Σ (r²/4)^k/k! = e^{r²/2} at r = 2
        assert_relative_eq!(total, (2.0f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn large_index_in_log_space() {
        let b = hg_beta(400, 30.0, 1.0);
        assert!(b.is_finite() && b >= 0.0);
    }

    #[test]
    fn single_observable_is_plain_error_transfer() {
        let d = DVector::from_vec(vec![0.7]);
        let g = DMatrix::from_vec(1, 1, vec![2.5]);
        let m = moment_sensitivity(&d, &g).unwrap();
        assert_relative_eq!(m.sensitivity, 0.49 / 2.5);
    }

    #[test]
    fn zero_derivative_is_insensitive() {
        let d = DVector::zeros(3);
        let g = DMatrix::identity(3, 3);
        assert_eq!(moment_sensitivity(&d, &g).unwrap().sensitivity, 0.0);
    }

    #[test]
    fn singular_covariance_uses_pseudo_inverse() {
        let d = DVector::from_vec(vec![1.0, 1.0]);
        let g = DMatrix::from_vec(2, 2, vec![1.0, 1.0, 1.0, 1.0]);
        let m = moment_sensitivity(&d, &g).unwrap();
        assert!(!m.full_rank);
        assert_eq!(m.rank, 1);
        assert_relative_eq!(m.sensitivity, 1.0, max_relative = 1e-12);
        assert!(moment_sensitivity(&d, &DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn closed_form_matches_generic_optimizer() {
        for &(t1, t2, eta, s) in &[(1.0, 1.0, 0.5, 0.5), (0.8, 1.3, 0.9, 0.2), (2.0, 0.6, 0.1, 0.95)] {
            let pair = SourcePair::new(t1, t2, 1.0, eta).unwrap();
            let geom = DiffractionGeometry::Overlap(s);
            for k in [0, 1, 2, 5, 12] {
                for which in [Param::T1, Param::T2] {
                    let closed = hg_sensitivity(&pair, &geom, k, which).unwrap();
                    let generic = hg_sensitivity_assembled(&pair, &geom, k, which).unwrap();
                    assert_relative_eq!(closed, generic, max_relative = 1e-9);
                }
            }
        }
    }

    #[test]
    fn full_basis_is_the_large_k_limit() {
        let pair = SourcePair::new(0.8, 1.3, 1.0, 0.5).unwrap();
        let geom = DiffractionGeometry::gaussian_psf(1.0, 1.0).unwrap();
        let finite = hg_sensitivity(&pair, &geom, 60, Param::T1).unwrap();
        let full = hg_sensitivity_full(&pair, &geom, Param::T1);
        assert_relative_eq!(finite, full, max_relative = 1e-8);
        let alternate = hg_sensitivity_full_alt_numerator(&pair, &geom, Param::T1);
        assert!((alternate - full).abs() > 1e-6 * full);
    }

    #[test]
    fn sensitivity_grows_with_mode_count() {
        let pair = SourcePair::new(0.9, 1.1, 1.0, 0.5).unwrap();
        let geom = DiffractionGeometry::Overlap(0.3);
        let mut last = 0.0;
        for k in 0..30 {
            let m = hg_sensitivity(&pair, &geom, k, Param::T1).unwrap();
            assert!(m >= last * (1.0 - 1e-12));
            last = m;
        }
    }

    #[test]
    fn mean_photons_conserve_total() {
        let pair = SourcePair::new(0.9, 1.1, 1.0, 0.5).unwrap();
        let geom = DiffractionGeometry::Overlap(0.4);
        let p = pair.params();
        let total: f64 = (0..80).map(|k| mean_photon_hg(k, &pair, &geom)).sum();
        assert_relative_eq!(total, 2.0 * p.n_total * pair.eta, max_relative = 1e-12);
        let far = DiffractionGeometry::Overlap(0.0);
        assert_eq!(mean_photon_hg(3, &pair, &far), 0.0);
    }
}
