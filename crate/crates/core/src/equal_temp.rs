//! QFI for a single temperature shared by both sources.
//!
//! With `T₁ = T₂ = T` the image state factorizes into two thermal modes with
//! occupations `M± = η(1 ± s)/(e^{ω/T} − 1)` and the photon-number basis is
//! the eigenbasis, so the QFI reduces to the classical Fisher information of
//! the two geometric laws.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{bose_occupation, MAX_INVERSE_TEMPERATURE};

/// Symmetric (`+`) or antisymmetric (`−`) image mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

impl FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+" | "plus" => Ok(Branch::Plus),
            "-" | "minus" => Ok(Branch::Minus),
            other => Err(Error::Usage(format!(
                "unknown branch {other:?}, expected '+' or '-'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualTempResult {
    pub qfi: f64,
    /// `2ω²η/(T⁴ e^{ω/T})`, valid for `ω/T ≫ 1`.
    pub qfi_low_t: f64,
    /// High-temperature form, valid for `ω/T ≪ 1`.
    pub qfi_high_t: f64,
    pub m_plus: f64,
    pub m_minus: f64,
}

fn check_inputs(t: f64, omega: f64, eta: f64, s: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain(format!("temperature must be positive, got {t}")));
    }
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::Domain(format!("omega must be positive, got {omega}")));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Domain(format!("eta must lie in (0, 1], got {eta}")));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("s must lie in [0, 1], got {s}")));
    }
    if omega / t > MAX_INVERSE_TEMPERATURE {
        return Err(Error::Range(format!(
            "T = {t} is below omega/{MAX_INVERSE_TEMPERATURE}"
        )));
    }
    Ok(())
}

/// Occupation `M = η(1 ± s) n` of one image mode and its `T` derivative.
fn mode_occupation(branch: Branch, t: f64, omega: f64, eta: f64, s: f64) -> (f64, f64) {
    let n = bose_occupation(omega / t);
    let weight = eta * (1.0 + branch.sign() * s);
    let dn = omega / (t * t) * n * (n + 1.0);
    (weight * n, weight * dn)
}

/// `p±(n) = M±ⁿ/(M± + 1)^{n+1}`.
pub fn fock_prob(n: u64, branch: Branch, t: f64, omega: f64, eta: f64, s: f64) -> Result<f64> {
    check_inputs(t, omega, eta, s)?;
    let (m, _) = mode_occupation(branch, t, omega, eta, s);
    Ok(geometric_prob(n, m))
}

fn geometric_prob(n: u64, m: f64) -> f64 {
    if m == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    (nf * (m / (m + 1.0)).ln()).exp() / (m + 1.0)
}

/// Closed-form QFI together with its low- and high-temperature forms.
pub fn qfi_equal(t: f64, omega: f64, eta: f64, s: f64) -> Result<EqualTempResult> {
    check_inputs(t, omega, eta, s)?;
    let n = bose_occupation(omega / t);
    let (m_plus, _) = mode_occupation(Branch::Plus, t, omega, eta, s);
    let (m_minus, _) = mode_occupation(Branch::Minus, t, omega, eta, s);
    let t4 = t.powi(4);
    // 2χ²ω²η(χ−1+η−s²η)/((χ−1)²T⁴(χ−1+η−sη)(χ−1+η+sη)) rewritten through
    // n = 1/(χ−1) so that nothing overflows at low temperature
    let qfi = 2.0 * eta * omega * omega * n * (n + 1.0).powi(2) * (1.0 + eta * n * (1.0 - s * s))
        / (t4 * (1.0 + m_plus) * (1.0 + m_minus));
    let qfi_low_t = 2.0 * omega * omega * eta / (t4 * (omega / t).exp());
    let x = omega / t;
    let qfi_high_t = 2.0 * eta * (x + eta * (1.0 - s * s))
        / (t * t * (x + eta * (1.0 - s)) * (x + eta * (1.0 + s)));
    Ok(EqualTempResult {
        qfi,
        qfi_low_t,
        qfi_high_t,
        m_plus,
        m_minus,
    })
}

/// Number of terms `⌈ln(tol(1 − q))/ln q⌉` that leaves geometric mass below `tol`.
pub fn geometric_cutoff(q: f64, tol: f64) -> usize {
    if q <= 0.0 {
        return 1;
    }
    ((tol * (1.0 - q)).ln() / q.ln()).ceil().max(1.0) as usize
}

/// One branch of `Σₙ (∂_T p(n))²/p(n)` summed until the remainder, bounded by
/// a geometric envelope, falls below `tail_tol` relative to the partial sum.
fn branch_series(m: f64, dm: f64, tail_tol: f64) -> f64 {
    if m == 0.0 {
        return 0.0;
    }
    let q = m / (m + 1.0);
    let start = geometric_cutoff(q, tail_tol);
    let mut sum = 0.0;
    let mut n = 0usize;
    loop {
        let nf = n as f64;
        let p = geometric_prob(n as u64, m);
        // ∂_T ln p = (n/M − (n+1)/(M+1)) ∂_T M = (n − M)/(M(M+1)) ∂_T M
        let score = (nf - m) / (m * (m + 1.0)) * dm;
        let term = p * score * score;
        sum += term;
        n += 1;
        if n > start && nf > m + 1.0 {
            // successive terms shrink by at most q((n+1−M)/(n−M))²
            let r = q * ((nf + 1.0 - m) / (nf - m)).powi(2);
            if r < 1.0 && term * r / (1.0 - r) <= tail_tol * sum {
                return sum;
            }
        }
        if p == 0.0 && n > start {
            return sum;
        }
    }
}

/// Series form `Σₙ [∂_T p₊(n)]²/p₊(n) + [∂_T p₋(n)]²/p₋(n)`.
pub fn qfi_equal_series(t: f64, omega: f64, eta: f64, s: f64, tail_tol: f64) -> Result<f64> {
    check_inputs(t, omega, eta, s)?;
    if tail_tol.is_nan() || tail_tol <= 0.0 {
        return Err(Error::Domain(format!("tail_tol must be positive, got {tail_tol}")));
    }
    let (mp, dmp) = mode_occupation(Branch::Plus, t, omega, eta, s);
    let (mm, dmm) = mode_occupation(Branch::Minus, t, omega, eta, s);
    Ok(branch_series(mp, dmp, tail_tol) + branch_series(mm, dmm, tail_tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unscaled_closed_form(t: f64, omega: f64, eta: f64, s: f64) -> f64 {
        let chi = (omega / t).exp();
        2.0 * chi * chi * omega * omega * eta * (chi - 1.0 + eta - s * s * eta)
            / ((chi - 1.0).powi(2)
                * t.powi(4)
                * (-1.0 + chi + eta - s * eta)
                * (-1.0 + chi + eta + s * eta))
    }

    #[test]
    fn stable_form_equals_unscaled_form() {
        for &(t, omega, eta, s) in &[(1.0, 1.0, 0.5, 0.5), (0.3, 2.0, 0.9, 0.1), (5.0, 1.0, 0.2, 1.0)] {
            let r = qfi_equal(t, omega, eta, s).unwrap();
            assert_relative_eq!(r.qfi, unscaled_closed_form(t, omega, eta, s), max_relative = 1e-12);
        }
    }

    #[test]
    fn vacuum_branch_is_a_point_mass() {
        assert_eq!(fock_prob(0, Branch::Minus, 1.0, 1.0, 0.5, 1.0).unwrap(), 1.0);
        assert_eq!(fock_prob(3, Branch::Minus, 1.0, 1.0, 0.5, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let (t, omega, eta, s) = (2.0, 1.0, 0.8, 0.3);
        let m = qfi_equal(t, omega, eta, s).unwrap().m_plus;
        let q = m / (m + 1.0);
        let cut = geometric_cutoff(q, 1e-13);
        let total: f64 = (0..=cut as u64)
            .map(|n| fock_prob(n, Branch::Plus, t, omega, eta, s).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn branch_parsing() {
        assert_eq!("+".parse::<Branch>().unwrap(), Branch::Plus);
        assert_eq!("minus".parse::<Branch>().unwrap(), Branch::Minus);
        assert!(matches!("x".parse::<Branch>(), Err(Error::Usage(_))));
    }

    #[test]
    fn input_validation() {
        assert!(qfi_equal(1.0, 1.0, 0.5, 1.2).is_err());
        assert!(qfi_equal(1.0, 1.0, 0.0, 0.5).is_err());
        assert!(qfi_equal_series(1.0, 1.0, 0.5, 0.5, 0.0).is_err());
        assert!(matches!(qfi_equal(1e-3, 1.0, 0.5, 0.5), Err(Error::Range(_))));
    }

    #[test]
    fn maximum_diffraction_series_uses_symmetric_mode_only() {
        let (t, omega, eta) = (1.0, 1.0, 0.5);
        let r = qfi_equal(t, omega, eta, 1.0).unwrap();
        assert_eq!(r.m_minus, 0.0);
        let m = r.m_plus;
        let dm = 2.0 * eta * omega / (t * t) * {
            let n = bose_occupation(omega / t);
            n * (n + 1.0)
        };
        let single = dm * dm / (m * (m + 1.0));
        assert_relative_eq!(qfi_equal_series(t, omega, eta, 1.0, 1e-14).unwrap(), single, max_relative = 1e-10);
        assert!(r.qfi > 0.0 && r.qfi.is_finite());
    }

    #[test]
    fn no_diffraction_is_twice_one_mode() {
        let (t, omega, eta) = (0.7, 1.0, 0.5);
        let n = bose_occupation(omega / t);
        let m = eta * n;
        let dm = eta * omega / (t * t) * n * (n + 1.0);
        let single = dm * dm / (m * (m + 1.0));
        assert_relative_eq!(qfi_equal_series(t, omega, eta, 0.0, 1e-14).unwrap(), 2.0 * single, max_relative = 1e-10);
        assert_relative_eq!(qfi_equal(t, omega, eta, 0.0).unwrap().qfi, 2.0 * single, max_relative = 1e-12);
    }

    #[test]
    fn qfi_decreases_with_overlap() {
        for &(t, omega) in &[(1.0, 1.0), (0.1, 1.0), (10.0, 1.0)] {
            let mut last = f64::INFINITY;
            for k in 0..=200 {
                let q = qfi_equal(t, omega, 0.5, k as f64 / 200.0).unwrap().qfi;
                assert!(q <= last * (1.0 + 1e-15));
                last = q;
            }
        }
    }
}
