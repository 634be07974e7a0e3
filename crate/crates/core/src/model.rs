//! Source parameters, diffraction geometry and the image-plane Gaussian state.
//!
//! Two thermal sources with temperatures `T₁`, `T₂` radiate at angular
//! frequency `ω`. After attenuation `η` and diffraction with PSF overlap `s`
//! the image plane holds a two-mode Gaussian state in the orthonormal
//! symmetric/antisymmetric modes `a₊`, `a₋` with
//!
//! ```text
//! N± = N η (1 ± s),     ⟨a₊† a₋⟩ = −γ √(N₊ N₋)
//! ```
//!
//! and covariance `σ = diag(2V + I, 2V + I)` in the ordering
//! `A = (a₊, a₋, a₊†, a₋†)`, where `V` is the normal-ordered correlation
//! matrix `V_ij = ⟨a_i† a_j⟩`.

use nalgebra::{Matrix2, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ω/T` above which `χ = exp(ω/T)` overflows once squared or multiplied.
pub const MAX_INVERSE_TEMPERATURE: f64 = 700.0;

/// How the population-asymmetry parameter `γ` is derived from the temperatures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaConvention {
    /// `γ = (n₂ − n₁)/(n₁ + n₂)` with `nᵢ = 1/(χᵢ − 1)`, so that source `i`
    /// carries exactly the Bose–Einstein occupation of temperature `Tᵢ`.
    #[default]
    Thermal,
    /// `γ = (χ₁ − χ₂)/(χ₁ + χ₂)` taken at face value. The per-source
    /// populations `N(1 ∓ γ)` then depend on both temperatures.
    Literal,
}

/// Physical parameters of the two sources and the attenuation of the optics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourcePair {
    pub t1: f64,
    pub t2: f64,
    pub omega: f64,
    pub eta: f64,
    #[serde(default)]
    pub convention: GammaConvention,
}

/// Occupancies derived from a [`SourcePair`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    pub chi1: f64,
    pub chi2: f64,
    /// Bose–Einstein occupations `1/(χᵢ − 1)`.
    pub n1: f64,
    pub n2: f64,
    pub gamma: f64,
    /// Mean photon number per source, `N = (n₁ + n₂)/2`.
    pub n_total: f64,
}

/// Partial derivatives of `N` and `γ` with respect to `(T₁, T₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamGradient {
    pub dn: [f64; 2],
    pub dgamma: [f64; 2],
}

impl SourcePair {
    pub fn new(t1: f64, t2: f64, omega: f64, eta: f64) -> Result<Self> {
        Self::with_convention(t1, t2, omega, eta, GammaConvention::Thermal)
    }

    pub fn with_convention(
        t1: f64,
        t2: f64,
        omega: f64,
        eta: f64,
        convention: GammaConvention,
    ) -> Result<Self> {
        let pair = Self {
            t1,
            t2,
            omega,
            eta,
            convention,
        };
        pair.validate()?;
        Ok(pair)
    }

    /// Both sources at the same temperature.
    pub fn equal(t: f64, omega: f64, eta: f64) -> Result<Self> {
        Self::new(t, t, omega, eta)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("t1", self.t1), ("t2", self.t2)] {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {t}")));
            }
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::Domain(format!(
                "omega must be positive, got {}",
                self.omega
            )));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::Domain(format!(
                "eta must lie in (0, 1], got {}",
                self.eta
            )));
        }
        for (name, t) in [("t1", self.t1), ("t2", self.t2)] {
            if self.omega / t > MAX_INVERSE_TEMPERATURE {
                return Err(Error::Range(format!(
                    "{name} = {t} is below omega/{MAX_INVERSE_TEMPERATURE}; exp(omega/T) overflows"
                )));
            }
        }
        Ok(())
    }

    /// Copy with the temperatures replaced.
    pub fn with_temperatures(&self, t1: f64, t2: f64) -> Self {
        Self { t1, t2, ..*self }
    }

    pub fn params(&self) -> DerivedParams {
        let x1 = self.omega / self.t1;
        let x2 = self.omega / self.t2;
        let n1 = bose_occupation(x1);
        let n2 = bose_occupation(x2);
        let gamma = match self.convention {
            GammaConvention::Thermal => (n2 - n1) / (n1 + n2),
            // (χ₁ − χ₂)/(χ₁ + χ₂) without forming the exponentials
            GammaConvention::Literal => (0.5 * (x1 - x2)).tanh(),
        };
        DerivedParams {
            chi1: x1.exp(),
            chi2: x2.exp(),
            n1,
            n2,
            gamma,
            n_total: 0.5 * (n1 + n2),
        }
    }

    pub fn gradient(&self) -> ParamGradient {
        let p = self.params();
        let dn1 = bose_occupation_dt(self.omega, self.t1);
        let dn2 = bose_occupation_dt(self.omega, self.t2);
        let dgamma = match self.convention {
            GammaConvention::Thermal => {
                let sum2 = (p.n1 + p.n2).powi(2);
                [-2.0 * p.n2 * dn1 / sum2, 2.0 * p.n1 * dn2 / sum2]
            }
            GammaConvention::Literal => {
                let w = 0.5 * (1.0 - p.gamma * p.gamma);
                [
                    -w * self.omega / (self.t1 * self.t1),
                    w * self.omega / (self.t2 * self.t2),
                ]
            }
        };
        ParamGradient {
            dn: [0.5 * dn1, 0.5 * dn2],
            dgamma,
        }
    }
}

/// `1/(e^x − 1)`.
pub fn bose_occupation(x: f64) -> f64 {
    1.0 / x.exp_m1()
}

/// `∂/∂T` of the Bose–Einstein occupation at `x = ω/T`: `(ω/T²) n (n + 1)`.
pub fn bose_occupation_dt(omega: f64, t: f64) -> f64 {
    let n = bose_occupation(omega / t);
    omega / (t * t) * n * (n + 1.0)
}

/// Derive `χ₁, χ₂, γ, N` after validating the inputs.
pub fn derive_params(pair: &SourcePair) -> Result<DerivedParams> {
    pair.validate()?;
    Ok(pair.params())
}

/// How strongly the two source images overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffractionGeometry {
    /// Overlap `s ∈ [0, 1]` given directly.
    Overlap(f64),
    /// Gaussian PSF of width `varpi` with the sources `d` apart.
    GaussianPsf { d: f64, varpi: f64 },
}

impl DiffractionGeometry {
    pub fn overlap(s: f64) -> Result<Self> {
        let geom = Self::Overlap(s);
        geom.validate()?;
        Ok(geom)
    }

    pub fn gaussian_psf(d: f64, varpi: f64) -> Result<Self> {
        let geom = Self::GaussianPsf { d, varpi };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Overlap(s) => {
                if !(0.0..=1.0).contains(&s) {
                    return Err(Error::Domain(format!("s must lie in [0, 1], got {s}")));
                }
            }
            Self::GaussianPsf { d, varpi } => {
                gaussian_overlap(d, varpi)?;
            }
        }
        Ok(())
    }

    /// The overlap `s`.
    pub fn s(&self) -> f64 {
        match *self {
            Self::Overlap(s) => s,
            Self::GaussianPsf { d, varpi } => gaussian_overlap_unchecked(d, varpi),
        }
    }

    /// Separation in units of the PSF width. When only `s` is known this
    /// inverts the Gaussian overlap; `s = 0` maps to `+∞`.
    pub fn separation_ratio(&self) -> f64 {
        match *self {
            Self::Overlap(s) => separation_ratio_for_overlap(s),
            Self::GaussianPsf { d, varpi } => d / varpi,
        }
    }
}

/// Overlap `s = ∫ψ(x + d/2) ψ(x − d/2) dx` of two copies of the
/// L²-normalized Gaussian PSF `ψ(x) = (2/πϖ²)^{1/4} exp(−x²/ϖ²)`.
pub fn gaussian_overlap(d: f64, varpi: f64) -> Result<f64> {
    if !(varpi.is_finite() && varpi > 0.0) {
        return Err(Error::Domain(format!("varpi must be positive, got {varpi}")));
    }
    if d.is_nan() || d < 0.0 {
        return Err(Error::Domain(format!("separation d must be >= 0, got {d}")));
    }
    Ok(gaussian_overlap_unchecked(d, varpi))
}

fn gaussian_overlap_unchecked(d: f64, varpi: f64) -> f64 {
    let r = d / varpi;
    (-0.5 * r * r).exp()
}

/// Inverse of [`gaussian_overlap`] in units of `ϖ`.
pub fn separation_ratio_for_overlap(s: f64) -> f64 {
    if s <= 0.0 {
        f64::INFINITY
    } else if s >= 1.0 {
        0.0
    } else {
        (-2.0 * s.ln()).sqrt()
    }
}

/// Image-plane Gaussian state of the two demultiplexed modes `a₊`, `a₋`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageState {
    pub n_plus: f64,
    pub n_minus: f64,
    pub gamma: f64,
    /// Normal-ordered correlation matrix `V_ij = ⟨a_i† a_j⟩`.
    pub pmatrix: Matrix2<f64>,
    /// `σ_ij = ⟨{ΔA_i, ΔA_j†}⟩` over `A = (a₊, a₋, a₊†, a₋†)`.
    pub cov: Matrix4<f64>,
    pub displacement: Vector4<f64>,
}

impl ImageState {
    /// Correlation `⟨a₊† a₋⟩ = −γ√(N₊N₋)`.
    pub fn cross_correlation(&self) -> f64 {
        self.pmatrix[(0, 1)]
    }
}

pub fn build_image_state(pair: &SourcePair, geom: &DiffractionGeometry) -> Result<ImageState> {
    pair.validate()?;
    geom.validate()?;
    let p = pair.params();
    let s = geom.s();
    let n_plus = p.n_total * pair.eta * (1.0 + s);
    let n_minus = p.n_total * pair.eta * (1.0 - s);
    let c = -p.gamma * (n_plus * n_minus).sqrt();
    let pmatrix = Matrix2::new(n_plus, c, c, n_minus);
    Ok(ImageState {
        n_plus,
        n_minus,
        gamma: p.gamma,
        pmatrix,
        cov: covariance_from_pmatrix(&pmatrix),
        displacement: Vector4::zeros(),
    })
}

/// `σ = diag(2V + I, 2V̄ + I)` for a state without pairing correlations.
pub fn covariance_from_pmatrix(v: &Matrix2<f64>) -> Matrix4<f64> {
    let block = v * 2.0 + Matrix2::identity();
    let mut cov = Matrix4::zeros();
    cov.fixed_view_mut::<2, 2>(0, 0).copy_from(&block);
    cov.fixed_view_mut::<2, 2>(2, 2).copy_from(&block.transpose());
    cov
}

/// Analytic `∂V/∂Tᵢ` for `i = 0, 1`.
pub fn pmatrix_gradient(pair: &SourcePair, geom: &DiffractionGeometry) -> [Matrix2<f64>; 2] {
    let p = pair.params();
    let g = pair.gradient();
    let s = geom.s();
    let eta = pair.eta;
    let root = (1.0 - s * s).max(0.0).sqrt();
    [0, 1].map(|i| {
        let dplus = eta * (1.0 + s) * g.dn[i];
        let dminus = eta * (1.0 - s) * g.dn[i];
        let dc = -eta * root * (g.dgamma[i] * p.n_total + p.gamma * g.dn[i]);
        Matrix2::new(dplus, dc, dc, dminus)
    })
}

/// Analytic `∂σ/∂Tᵢ` for `i = 0, 1`.
pub fn covariance_gradient(pair: &SourcePair, geom: &DiffractionGeometry) -> [Matrix4<f64>; 2] {
    pmatrix_gradient(pair, geom).map(|dv| {
        let mut out = covariance_from_pmatrix(&dv);
        // the identity is parameter independent
        for k in 0..4 {
            out[(k, k)] -= 1.0;
        }
        out
    })
}
