//! Simultaneous versus individual estimation of the two temperatures.
//!
//! With `ν` repetitions the simultaneous strategy spends all of them on a
//! joint measurement, the individual strategy `ν/2` on each temperature.

use serde::{Deserialize, Serialize};

use crate::equal_temp::qfi_equal;
use crate::error::Result;
use crate::gaussian_fisher::{qfi_equal_limit_closed, FisherMatrix};

/// Relative determinant below which the joint bound is reported as infinite.
pub const SINGULAR_DET: f64 = 1e-12;

/// Normalization of the ratio `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MuConvention {
    /// `μ = h11 h22 / (2 det H)`: both strategies use the same `ν`.
    #[default]
    ResourceConsistent,
    /// `μ = h11 h22 / det H`, the expression without the `ν/2` split.
    Unsplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrategyComparison {
    pub sim_bound: f64,
    pub ind_bound: f64,
    pub mu: f64,
    pub nu: f64,
    /// Set when the Fisher matrix is singular and the joint bound diverges.
    pub diagnostic: Option<&'static str>,
}

fn is_singular(h: &FisherMatrix) -> bool {
    h.det() <= SINGULAR_DET * h.h11 * h.h22
}

const NO_JOINT_INFORMATION: &str =
    "maximum diffraction: no simultaneous information about both temperatures";

/// `δ²T₁ + δ²T₂ ≥ (1/ν)(h11 + h22)/(h11 h22 − h12²)`, or `+∞` when singular.
pub fn simultaneous_bound(h: &FisherMatrix, nu: f64) -> f64 {
    if is_singular(h) {
        f64::INFINITY
    } else {
        h.trace() / (nu * h.det())
    }
}

/// `(2/ν)(1/h11 + 1/h22)`.
pub fn individual_bound(h: &FisherMatrix, nu: f64) -> f64 {
    2.0 / nu * (1.0 / h.h11 + 1.0 / h.h22)
}

pub fn ratio_mu(h: &FisherMatrix, convention: MuConvention) -> f64 {
    if is_singular(h) {
        return f64::INFINITY;
    }
    let mu = h.h11 * h.h22 / h.det();
    match convention {
        MuConvention::ResourceConsistent => 0.5 * mu,
        MuConvention::Unsplit => mu,
    }
}

pub fn compare(h: &FisherMatrix, nu: f64) -> StrategyComparison {
    let sim_bound = simultaneous_bound(h, nu);
    let ind_bound = individual_bound(h, nu);
    StrategyComparison {
        sim_bound,
        ind_bound,
        mu: ratio_mu(h, MuConvention::ResourceConsistent),
        nu,
        diagnostic: sim_bound.is_infinite().then_some(NO_JOINT_INFORMATION),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriorGain {
    /// QFI when `T₁ = T₂` is known in advance.
    pub f_prior: f64,
    /// `2 H¹¹(T₂ → T₁)`, the same quantity without that knowledge.
    pub two_h11: f64,
    pub gain: f64,
}

pub fn prior_gain(t1: f64, omega: f64, eta: f64, s: f64) -> Result<PriorGain> {
    let f_prior = qfi_equal(t1, omega, eta, s)?.qfi;
    let two_h11 = 2.0 * qfi_equal_limit_closed(t1, omega, eta, s);
    Ok(PriorGain {
        f_prior,
        two_h11,
        gain: f_prior / two_h11,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn independent_parameters() {
        let h = FisherMatrix::new(2.0, 5.0, 0.0);
        assert_relative_eq!(simultaneous_bound(&h, 1.0), 0.5 + 0.2);
        assert_relative_eq!(ratio_mu(&h, MuConvention::ResourceConsistent), 0.5);
        assert_relative_eq!(ratio_mu(&h, MuConvention::Unsplit), 1.0);
    }

    #[test]
    fn individual_bound_values() {
        let h = FisherMatrix::new(1.0, 1.0, 0.3);
        assert_relative_eq!(individual_bound(&h, 2.0), 2.0);
    }

    #[test]
    fn simultaneous_bound_is_inverse_trace() {
        let h = FisherMatrix::new(3.0, 2.0, 1.2);
        let inv = nalgebra::Matrix2::new(3.0, 1.2, 1.2, 2.0).try_inverse().unwrap();
        assert_relative_eq!(simultaneous_bound(&h, 1.0), inv.trace(), max_relative = 1e-14);
        assert_relative_eq!(simultaneous_bound(&h, 4.0), inv.trace() / 4.0, max_relative = 1e-14);
    }

    #[test]
    fn singular_matrix_gives_sentinel() {
        let h = FisherMatrix::new(4.0, 1.0, 2.0);
        let c = compare(&h, 1.0);
        assert!(c.sim_bound.is_infinite());
        assert!(c.mu.is_infinite());
        assert!(c.ind_bound.is_finite());
        assert!(c.diagnostic.is_some());
    }

    #[test]
    fn mu_links_the_two_bounds() {
        let h = FisherMatrix::new(3.0, 2.0, 1.2);
        let c = compare(&h, 1.0);
        assert_relative_eq!(c.mu * c.ind_bound, c.sim_bound, max_relative = 1e-14);
        assert!(c.diagnostic.is_none());
    }

    #[test]
    fn prior_gain_endpoints() {
        let g0 = prior_gain(1.0, 1.0, 0.5, 0.0).unwrap();
        let g1 = prior_gain(1.0, 1.0, 0.5, 1.0).unwrap();
        assert_relative_eq!(g0.gain, 1.0, max_relative = 1e-12);
        assert_relative_eq!(g1.gain, 2.0, max_relative = 1e-12);
        let mid = prior_gain(1.0, 1.0, 0.5, 0.5).unwrap().gain;
        assert!(mid > 1.0 && mid < 2.0);
    }
}
