//! Multiparameter QFI of the image-plane Gaussian state.
//!
//! In the complex form with `A = (a₊, a₋, a₊†, a₋†)` and `K = diag(1, 1, −1, −1)`
//! the QFI matrix, the SLDs and the weak-commutation functional are
//!
//! ```text
//! Hⁱʲ      = ½ vec[∂ᵢσ]† 𝓡⁻¹ vec[∂ⱼσ] + 2 ∂ᵢd† σ⁻¹ ∂ⱼd
//! 𝓛ᵢ       = ΔA† Φᵢ ΔA − ½ tr[σ Φᵢ] + 2 ΔA† σ⁻¹ ∂ᵢd,     vec[Φᵢ] = 𝓡⁻¹ vec[∂ᵢσ]
//! tr ρ[𝓛₁,𝓛₂] = vec[∂₁σ]† 𝓡⁻¹ (σ̄⊗K − K⊗σ) 𝓡⁻¹ vec[∂₂σ] + 4 ∂₁d† σ⁻¹ K σ⁻¹ ∂₂d
//! ```
//!
//! with `𝓡 = σ̄⊗σ − K⊗K`. At maximum diffraction the antisymmetric mode is
//! vacuum, `𝓡` loses rank and the QFI is taken from the single remaining
//! thermal mode instead.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_image_state, covariance_gradient, DiffractionGeometry, SourcePair};

/// Condition number of `𝓡` above which the maximum-diffraction limit is used.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Symmetric 2×2 Fisher information over `(T₁, T₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherMatrix {
    pub h11: f64,
    pub h22: f64,
    pub h12: f64,
}

impl FisherMatrix {
    pub fn new(h11: f64, h22: f64, h12: f64) -> Self {
        Self { h11, h22, h12 }
    }

    pub fn det(&self) -> f64 {
        self.h11 * self.h22 - self.h12 * self.h12
    }

    pub fn trace(&self) -> f64 {
        self.h11 + self.h22
    }

    /// Diagonal entry for parameter `i ∈ {0, 1}`.
    pub fn diag(&self, i: usize) -> f64 {
        if i == 0 {
            self.h11
        } else {
            self.h22
        }
    }

    /// `h12²/(h11 h22)`, the squared correlation between the two parameters.
    pub fn correlation_sq(&self) -> f64 {
        self.h12 * self.h12 / (self.h11 * self.h22)
    }

    /// Information about `T` when both temperatures move together.
    pub fn along_diagonal(&self) -> f64 {
        self.h11 + self.h22 + 2.0 * self.h12
    }
}

/// Estimated temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Param {
    T1,
    T2,
}

impl Param {
    pub fn index(self) -> usize {
        match self {
            Param::T1 => 0,
            Param::T2 => 1,
        }
    }
}

/// Which formula produced a [`QfiMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComputationPath {
    /// Dense solve of the 16×16 Kronecker system.
    Kronecker,
    /// Single thermal mode `a₊`; used at or numerically near `s = 1`.
    MaximumDiffraction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QfiMatrix {
    pub matrix: FisherMatrix,
    pub path: ComputationPath,
    /// Condition number of `𝓡`, infinite when the limit path was forced by `s = 1`.
    pub condition: f64,
}

type CMat4 = Matrix4<Complex64>;

fn complexify(m: &Matrix4<f64>) -> CMat4 {
    m.map(|x| Complex64::new(x, 0.0))
}

fn k_matrix() -> CMat4 {
    complexify(&Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, -1.0, -1.0)))
}

fn kron(a: &CMat4, b: &CMat4) -> DMatrix<Complex64> {
    DMatrix::from_fn(16, 16, |r, c| a[(r / 4, c / 4)] * b[(r % 4, c % 4)])
}

/// Column-stacking vectorization.
fn vec4(m: &CMat4) -> DVector<Complex64> {
    DVector::from_column_slice(m.as_slice())
}

fn unvec4(v: &DVector<Complex64>) -> CMat4 {
    CMat4::from_column_slice(v.as_slice())
}

/// `𝓡 = σ̄⊗σ − K⊗K`.
pub fn kronecker_system(sigma: &CMat4) -> DMatrix<Complex64> {
    let k = k_matrix();
    kron(&sigma.conjugate(), sigma) - kron(&k, &k)
}

fn condition_number(m: &DMatrix<Complex64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Factorized `𝓡` with its conditioning.
struct KroneckerSolver {
    lu: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    condition: f64,
}

impl KroneckerSolver {
    fn new(sigma: &CMat4) -> Result<Self> {
        let system = kronecker_system(sigma);
        let condition = condition_number(&system);
        if condition.is_nan() || condition >= CONDITION_LIMIT {
            return Err(Error::Singular(format!(
                "Kronecker system condition number {condition:.3e} exceeds {CONDITION_LIMIT:.0e}"
            )));
        }
        Ok(Self {
            lu: system.lu(),
            condition,
        })
    }

    fn solve(&self, rhs: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        self.lu
            .solve(rhs)
            .ok_or_else(|| Error::Singular("LU solve of the Kronecker system failed".into()))
    }
}

/// General Gaussian-state QFI matrix from `σ`, `∂ᵢσ` and `∂ᵢd`.
///
/// Returns the matrix and the condition number of `𝓡`.
pub fn gaussian_qfi(
    sigma: &CMat4,
    dsigma: &[CMat4],
    ddisp: &[Vector4<Complex64>],
) -> Result<(DMatrix<f64>, f64)> {
    let n = dsigma.len();
    let solver = KroneckerSolver::new(sigma)?;
    let sigma_inv = sigma
        .try_inverse()
        .ok_or_else(|| Error::Singular("covariance matrix is not invertible".into()))?;
    let vecs: Vec<_> = dsigma.iter().map(vec4).collect();
    let solved = vecs
        .iter()
        .map(|v| solver.solve(v))
        .collect::<Result<Vec<_>>>()?;
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut h = vecs[i].dotc(&solved[j]) * 0.5;
            if let (Some(di), Some(dj)) = (ddisp.get(i), ddisp.get(j)) {
                h += di.dotc(&(sigma_inv * dj)) * 2.0;
            }
            out[(i, j)] = h.re;
        }
    }
    Ok((out, solver.condition))
}

fn check_inputs(pair: &SourcePair, geom: &DiffractionGeometry) -> Result<()> {
    pair.validate()?;
    geom.validate()
}

/// QFI of the single thermal mode `a₊` with occupation `N₊`.
fn maximum_diffraction_matrix(pair: &SourcePair, geom: &DiffractionGeometry) -> FisherMatrix {
    let p = pair.params();
    let g = pair.gradient();
    let s = geom.s();
    let n_plus = p.n_total * pair.eta * (1.0 + s);
    let d = g.dn.map(|dn| pair.eta * (1.0 + s) * dn);
    let w = 1.0 / (n_plus * (n_plus + 1.0));
    FisherMatrix::new(d[0] * d[0] * w, d[1] * d[1] * w, d[0] * d[1] * w)
}

/// QFI matrix over `(T₁, T₂)`.
pub fn qfi_matrix(pair: &SourcePair, geom: &DiffractionGeometry) -> Result<QfiMatrix> {
    check_inputs(pair, geom)?;
    if geom.s() >= 1.0 {
        return Ok(QfiMatrix {
            matrix: maximum_diffraction_matrix(pair, geom),
            path: ComputationPath::MaximumDiffraction,
            condition: f64::INFINITY,
        });
    }
    let state = build_image_state(pair, geom)?;
    let sigma = complexify(&state.cov);
    let dsigma = covariance_gradient(pair, geom).map(|m| complexify(&m));
    // thermal light carries no displacement
    let ddisp = [Vector4::zeros(), Vector4::zeros()];
    match gaussian_qfi(&sigma, &dsigma, &ddisp) {
        Ok((h, condition)) => Ok(QfiMatrix {
            matrix: FisherMatrix::new(h[(0, 0)], h[(1, 1)], 0.5 * (h[(0, 1)] + h[(1, 0)])),
            path: ComputationPath::Kronecker,
            condition,
        }),
        Err(Error::Singular(_)) => Ok(QfiMatrix {
            matrix: maximum_diffraction_matrix(pair, geom),
            path: ComputationPath::MaximumDiffraction,
            condition: condition_number(&kronecker_system(&sigma)),
        }),
        Err(e) => Err(e),
    }
}

/// Quadratic-form representation of an SLD,
/// `𝓛 = ΔA† quad ΔA + offset + ΔA†·linear`.
#[derive(Debug, Clone, PartialEq)]
pub struct SldRep {
    pub quad: CMat4,
    pub offset: f64,
    pub linear: Vector4<Complex64>,
}

impl SldRep {
    /// Real part of the coefficient matrix.
    pub fn quad_real(&self) -> Matrix4<f64> {
        self.quad.map(|z| z.re)
    }
}

pub fn sld(pair: &SourcePair, geom: &DiffractionGeometry, which: Param) -> Result<SldRep> {
    check_inputs(pair, geom)?;
    let state = build_image_state(pair, geom)?;
    if state.n_minus == 0.0 {
        return Err(Error::Singular(
            "antisymmetric mode a₋ is vacuum at s = 1; its SLD block is undefined".into(),
        ));
    }
    let sigma = complexify(&state.cov);
    let solver = KroneckerSolver::new(&sigma).map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(format!("{msg}; mode a₋ is numerically vacuum")),
        other => other,
    })?;
    let dsigma = complexify(&covariance_gradient(pair, geom)[which.index()]);
    let quad = unvec4(&solver.solve(&vec4(&dsigma))?);
    let offset = -0.5 * (sigma * quad).trace().re;
    Ok(SldRep {
        quad,
        offset,
        linear: Vector4::zeros(),
    })
}

/// `tr[ρ[𝓛₁, 𝓛₂]]`; vanishes when the two-parameter QCRB is attainable.
pub fn weak_commutation(pair: &SourcePair, geom: &DiffractionGeometry) -> Result<Complex64> {
    check_inputs(pair, geom)?;
    let state = build_image_state(pair, geom)?;
    let sigma = complexify(&state.cov);
    let solver = KroneckerSolver::new(&sigma)?;
    let k = k_matrix();
    let middle = kron(&sigma.conjugate(), &k) - kron(&k, &sigma);
    let [d1, d2] = covariance_gradient(pair, geom).map(|m| vec4(&complexify(&m)));
    let left = solver.solve(&d1)?;
    let right = solver.solve(&d2)?;
    // 𝓡 is Hermitian, so vec[∂₁σ]†𝓡⁻¹ = (𝓡⁻¹vec[∂₁σ])†; displacement term is zero
    Ok(left.dotc(&(middle * right)))
}

/// `Hⁱⁱ(T₂ → T₁)` in closed form, `H¹¹ = H²²`.
///
/// This is `−½` times [`equal_limit_rational_form`]; see that function.
pub fn qfi_equal_limit_closed(t1: f64, omega: f64, eta: f64, s: f64) -> f64 {
    -0.5 * equal_limit_rational_form(t1, omega, eta, s)
}

/// The equal-temperature limit as an unsimplified rational function. It equals
/// `−2 H¹¹(T₂ → T₁)`; kept for comparison runs.
///
/// Evaluated with `r = e^{−ω/T}` after dividing numerator and denominator by
/// `χ⁴`, which leaves a prefactor `n(n+1)` and no overflow.
pub fn equal_limit_rational_form(t1: f64, omega: f64, eta: f64, s: f64) -> f64 {
    let x = omega / t1;
    let r = (-x).exp();
    let n = 1.0 / x.exp_m1();
    let s2 = s * s;
    let numer = (r * r + 1.0) * (s2 - 2.0) - 2.0 * (s2 - 1.0).powi(2) * eta * eta * r * r
        - 4.0 * (s2 - 1.0) * eta * r * r
        + r * (4.0 - 4.0 * eta + s2 * (4.0 * eta - 2.0));
    let d1 = (r - 1.0 - eta * r).powi(2) - s2 * eta * eta * r * r;
    let d2 = 1.0 - r + eta * r - s2 * eta * r;
    omega * omega * eta * n * (n + 1.0) / t1.powi(4) * numer / (d1 * d2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equal_temp::qfi_equal;
    use approx::assert_relative_eq;

    fn geom(s: f64) -> DiffractionGeometry {
        DiffractionGeometry::Overlap(s)
    }

    fn equal_limit_chi_form(t: f64, w: f64, eta: f64, s: f64) -> f64 {
        let c = (w / t).exp();
        let s2 = s * s;
        c * c * w * w * eta
            / (t.powi(4) * (c - 1.0).powi(2) * ((1.0 - c - eta).powi(2) - s2 * eta * eta) * (-1.0 + c + eta - s2 * eta))
            * ((1.0 + c * c) * (s2 - 2.0) - 2.0 * (s2 - 1.0).powi(2) * eta * eta - 4.0 * (s2 - 1.0) * eta
                + c * (4.0 - 4.0 * eta + s2 * (4.0 * eta - 2.0)))
    }

    #[test]
    fn rescaled_rational_form_is_overflow_safe_rewrite() {
        for &(t, w, eta, s) in &[(1.0, 1.0, 0.5, 0.5), (0.4, 1.0, 0.9, 0.0), (3.0, 1.0, 0.1, 1.0)] {
            assert_relative_eq!(equal_limit_rational_form(t, w, eta, s), equal_limit_chi_form(t, w, eta, s), max_relative = 1e-11);
        }
        assert!(equal_limit_rational_form(1.0 / 600.0, 1.0, 0.5, 0.5).is_finite());
    }

    #[test]
    fn no_diffraction_equal_temperatures() {
        let pair = SourcePair::equal(1.0, 1.0, 0.5).unwrap();
        let h = qfi_matrix(&pair, &geom(0.0)).unwrap();
        assert_eq!(h.path, ComputationPath::Kronecker);
        assert!(h.matrix.h12.abs() < 1e-12 * h.matrix.h11);
        let f = qfi_equal(1.0, 1.0, 0.5, 0.0).unwrap().qfi;
        assert_relative_eq!(f, 2.0 * h.matrix.h11, max_relative = 1e-10);
    }

    #[test]
    fn maximum_diffraction_equal_temperatures() {
        let pair = SourcePair::equal(1.0, 1.0, 0.5).unwrap();
        let h = qfi_matrix(&pair, &geom(1.0)).unwrap();
        assert_eq!(h.path, ComputationPath::MaximumDiffraction);
        let f = qfi_equal(1.0, 1.0, 0.5, 1.0).unwrap().qfi;
        assert_relative_eq!(f, 4.0 * h.matrix.h11, max_relative = 1e-12);
        assert!(h.matrix.det().abs() < 1e-14 * h.matrix.h11 * h.matrix.h22);
    }

    #[test]
    fn closed_form_limit_matches_kronecker_path() {
        for s in [0.0, 0.2, 0.5, 0.8, 0.99] {
            for &(t, w, eta) in &[(1.0, 1.0, 0.5), (8.0, 10.0, 0.3), (0.5, 1.0, 1.0)] {
                let pair = SourcePair::equal(t, w, eta).unwrap();
                let h = qfi_matrix(&pair, &geom(s)).unwrap().matrix;
                assert_relative_eq!(h.h11, h.h22, max_relative = 1e-9);
                assert_relative_eq!(qfi_equal_limit_closed(t, w, eta, s), h.h11, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn chain_rule_along_the_diagonal() {
        for s in [0.0, 0.3, 0.7, 0.99] {
            let pair = SourcePair::equal(1.3, 1.0, 0.6).unwrap();
            let h = qfi_matrix(&pair, &geom(s)).unwrap().matrix;
            let f = qfi_equal(1.3, 1.0, 0.6, s).unwrap().qfi;
            assert_relative_eq!(h.along_diagonal(), f, max_relative = 1e-9);
        }
    }

    #[test]
    fn single_mode_thermal_formula() {
        // one thermal mode with occupation n: F = (∂n)²/(n(n+1))
        let n = 0.7;
        let dn = 1.3;
        let sigma = complexify(&Matrix4::from_diagonal(&Vector4::new(2.0 * n + 1.0, 1.0 + 2.0 * 0.2, 2.0 * n + 1.0, 1.0 + 2.0 * 0.2)));
        let ds = complexify(&Matrix4::from_diagonal(&Vector4::new(2.0 * dn, 0.0, 2.0 * dn, 0.0)));
        let (h, _) = gaussian_qfi(&sigma, &[ds], &[]).unwrap();
        assert_relative_eq!(h[(0, 0)], dn * dn / (n * (n + 1.0)), max_relative = 1e-12);
    }

    #[test]
    fn displacement_term_contributes() {
        // real displacement of a thermal mode with n = ½: H = 4/(2n + 1) = 2
        let sigma = CMat4::identity() * Complex64::new(2.0, 0.0);
        let ds = CMat4::zeros();
        let dd = Vector4::new(1.0, 0.0, 1.0, 0.0).map(|x| Complex64::new(x, 0.0));
        let (h, _) = gaussian_qfi(&sigma, &[ds], &[dd]).unwrap();
        assert_relative_eq!(h[(0, 0)], 2.0, max_relative = 1e-14);
    }

    #[test]
    fn fisher_matrix_is_psd_on_grid() {
        for &t1 in &[0.5, 1.0, 3.0] {
            for &t2 in &[0.7, 1.0, 5.0] {
                for &s in &[0.0, 0.4, 0.9] {
                    let pair = SourcePair::new(t1, t2, 1.0, 0.5).unwrap();
                    let h = qfi_matrix(&pair, &geom(s)).unwrap().matrix;
                    assert!(h.h11 > 0.0 && h.h22 > 0.0);
                    assert!(h.det() >= -1e-12 * h.h11 * h.h22);
                }
            }
        }
    }

    #[test]
    fn determinant_vanishes_toward_maximum_diffraction() {
        let pair = SourcePair::new(8.0, 10.0, 10.0, 0.5).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..=100 {
            let s = 0.5 + 0.5 * k as f64 / 100.0;
            let h = qfi_matrix(&pair, &geom(s)).unwrap().matrix;
            let rel = h.det() / (h.h11 * h.h22);
            assert!(rel <= last + 1e-12, "s = {s}");
            last = rel;
        }
        assert!(last < 1e-12);
    }

    #[test]
    fn near_unit_overlap_switches_path() {
        let pair = SourcePair::new(0.8, 1.2, 1.0, 0.5).unwrap();
        let h = qfi_matrix(&pair, &geom(1.0 - 1e-15)).unwrap();
        assert_eq!(h.path, ComputationPath::MaximumDiffraction);
        let h = qfi_matrix(&pair, &geom(0.999)).unwrap();
        assert_eq!(h.path, ComputationPath::Kronecker);
    }

    #[test]
    fn weak_commutation_vanishes_and_sld_errors_at_vacuum() {
        let pair = SourcePair::new(0.8, 1.2, 1.0, 0.5).unwrap();
        assert!(weak_commutation(&pair, &geom(0.5)).unwrap().norm() < 1e-12);
        let eq = SourcePair::equal(1.0, 1.0, 0.5).unwrap();
        assert_eq!(weak_commutation(&eq, &geom(0.5)).unwrap().norm(), 0.0);
        assert!(matches!(sld(&pair, &geom(1.0), Param::T1), Err(Error::Singular(_))));
    }

    #[test]
    fn sld_is_number_conserving() {
        let pair = SourcePair::new(0.8, 1.2, 1.0, 0.5).unwrap();
        let rep = sld(&pair, &geom(0.5), Param::T2).unwrap();
        let q = rep.quad_real();
        for r in 0..2 {
            for c in 2..4 {
                assert!(q[(r, c)].abs() < 1e-12 && q[(c, r)].abs() < 1e-12);
            }
        }
        assert_eq!(rep.linear, Vector4::zeros());
    }
}
