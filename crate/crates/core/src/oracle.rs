//! Brute-force ground truth for the closed forms elsewhere in the crate.
//!
//! The image state is built directly in the photon-number basis of
//! `(a₊, a₋)`: the correlation matrix `V` is diagonalized, a product of two
//! thermal states is prepared in the eigenmodes, and the passive two-mode
//! unitary that maps eigenmodes back onto `a±` is applied. This is exact per
//! truncation and avoids integrating the P-function, which is singular at
//! `s = 1`. Passive unitaries conserve total photon number, so the density
//! matrix is block diagonal in `n = n₊ + n₋`, and the truncation keeps blocks
//! `n ≤ n_max`.
//!
//! Derivatives of `ρ` come from central differences with Richardson
//! extrapolation; the QFI and the SLDs then follow from the spectral formula.
//! The module also carries an adaptive Gauss–Kronrod integrator for PSF
//! overlaps.

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};

use crate::error::{Error, Result};
use crate::gaussian_fisher::{FisherMatrix, Param};
use crate::model::{build_image_state, covariance_from_pmatrix, DiffractionGeometry, SourcePair};

/// Largest trace mass a [`fock_density`] call may leave outside its blocks.
pub const DEFAULT_TAIL: f64 = 1e-10;

/// Eigenvalue pairs with `p_a + p_b` below this are left out of spectral sums.
pub const SPECTRAL_FLOOR: f64 = 1e-12;

/// Discarded spectral weight above which a result carries a warning.
pub const DISCARD_WARNING: f64 = 1e-8;

/// Two-mode density matrix truncated to total photon number `n_max`.
///
/// `blocks[n]` is the `(n+1) × (n+1)` block on `span{|m, n−m⟩}`, indexed by
/// the `a₊` photon count `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    pub n_max: usize,
    pub blocks: Vec<DMatrix<f64>>,
    /// Exact probability of more than `n_max` photons.
    pub tail_bound: f64,
}

impl FockState {
    pub fn trace(&self) -> f64 {
        self.blocks.iter().map(|b| b.trace()).sum()
    }

    /// `⟨n₊, n₋|ρ|n₊, n₋⟩`, zero beyond the truncation.
    pub fn number_diagonal(&self, n_plus: usize, n_minus: usize) -> f64 {
        let n = n_plus + n_minus;
        if n > self.n_max {
            0.0
        } else {
            self.blocks[n][(n_plus, n_plus)]
        }
    }

    /// Normal-ordered moments `⟨a_i† a_j⟩` as a 2×2 matrix.
    pub fn pmatrix(&self) -> Matrix2<f64> {
        let (mut pp, mut mm, mut pm) = (0.0, 0.0, 0.0);
        for (n, b) in self.blocks.iter().enumerate() {
            for m in 0..=n {
                pp += m as f64 * b[(m, m)];
                mm += (n - m) as f64 * b[(m, m)];
                if m < n {
                    // a₊† a₋ |m, n−m⟩ = √((m+1)(n−m)) |m+1, n−m−1⟩
                    pm += b[(m, m + 1)] * (((m + 1) * (n - m)) as f64).sqrt();
                }
            }
        }
        Matrix2::new(pp, pm, pm, mm)
    }

    /// Covariance `σ` reconstructed from the Fock-space moments.
    pub fn covariance(&self) -> nalgebra::Matrix4<f64> {
        covariance_from_pmatrix(&self.pmatrix())
    }

    /// The state as a `dim² × dim²` matrix on `|n₊, n₋⟩`, index `n₊·dim + n₋`.
    /// Entries with either count `≥ dim` are dropped.
    pub fn dense(&self, dim: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(dim * dim, dim * dim);
        for (n, b) in self.blocks.iter().enumerate() {
            for m in 0..=n {
                for mp in 0..=n {
                    if m < dim && n - m < dim && mp < dim && n - mp < dim {
                        out[(m * dim + (n - m), mp * dim + (n - mp))] = b[(m, mp)];
                    }
                }
            }
        }
        out
    }
}

/// Eigen-occupations and eigenmode rotation of `V`.
struct Eigenmodes {
    occupations: [f64; 2],
    /// `b_k† = Σ_i w[(i, k)] a_i†`.
    w: Matrix2<f64>,
}

fn eigenmodes(pair: &SourcePair, geom: &DiffractionGeometry) -> Result<Eigenmodes> {
    let state = build_image_state(pair, geom)?;
    let eig = state.pmatrix.symmetric_eigen();
    Ok(Eigenmodes {
        occupations: [eig.eigenvalues[0].max(0.0), eig.eigenvalues[1].max(0.0)],
        w: eig.eigenvectors,
    })
}

fn ratio(n: f64) -> f64 {
    n / (1.0 + n)
}

/// `P(k₁ + k₂ > n)` for independent geometric counts with ratios `q₁`, `q₂`.
fn sum_tail(q1: f64, q2: f64, n: usize) -> f64 {
    let e = n as i32 + 1;
    if (q1 - q2).abs() <= 1e-9 * q1.max(q2) {
        let q = 0.5 * (q1 + q2);
        q.powi(e) * (1.0 + e as f64 * (1.0 - q))
    } else {
        ((1.0 - q2) * q1.powi(e + 1) - (1.0 - q1) * q2.powi(e + 1)) / (q1 - q2)
    }
}

/// Smallest `n_max` whose omitted trace is below `tol`.
pub fn required_cutoff(pair: &SourcePair, geom: &DiffractionGeometry, tol: f64) -> Result<usize> {
    let modes = eigenmodes(pair, geom)?;
    let [q1, q2] = modes.occupations.map(ratio);
    let mut n = 0;
    while sum_tail(q1, q2, n) >= tol {
        n += 1;
        if n > 100_000 {
            return Err(Error::Range(format!(
                "occupations {:?} need an impractically large Fock cutoff",
                modes.occupations
            )));
        }
    }
    Ok(n)
}

/// Applies `Σ_i c_i a_i†` to a vector in block `n − 1`, giving block `n`.
fn raise(v: &DVector<f64>, c: [f64; 2]) -> DVector<f64> {
    let n = v.len();
    let mut out = DVector::zeros(n + 1);
    for m in 0..n {
        // |m, n−1−m⟩ → √(m+1)|m+1, ·⟩ under a₊†, √(n−m)|m, ·⟩ under a₋†
        out[m + 1] += c[0] * ((m + 1) as f64).sqrt() * v[m];
        out[m] += c[1] * ((n - m) as f64).sqrt() * v[m];
    }
    out
}

fn geometric_prob(occupation: f64, k: usize) -> f64 {
    if occupation == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * ratio(occupation).ln()).exp() / (1.0 + occupation)
}

fn build_blocks(modes: &Eigenmodes, n_max: usize) -> Vec<DMatrix<f64>> {
    let c1 = [modes.w[(0, 0)], modes.w[(1, 0)]];
    let c2 = [modes.w[(0, 1)], modes.w[(1, 1)]];
    let [o1, o2] = modes.occupations;
    let mut blocks = Vec::with_capacity(n_max + 1);
    // columns[k₁] = |k₁, n−k₁⟩ in the eigenmode basis, expanded on |m, n−m⟩
    let mut columns = vec![DVector::from_element(1, 1.0)];
    for n in 0..=n_max {
        if n > 0 {
            let mut next = Vec::with_capacity(n + 1);
            next.push(raise(&columns[0], c2) / (n as f64).sqrt());
            for k1 in 1..=n {
                next.push(raise(&columns[k1 - 1], c1) / (k1 as f64).sqrt());
            }
            columns = next;
        }
        let u = DMatrix::from_columns(&columns);
        let p = DVector::from_fn(n + 1, |k1, _| geometric_prob(o1, k1) * geometric_prob(o2, n - k1));
        blocks.push(&u * DMatrix::from_diagonal(&p) * u.transpose());
    }
    blocks
}

/// Image-plane state truncated at total photon number `n_max`.
pub fn fock_density(pair: &SourcePair, geom: &DiffractionGeometry, n_max: usize) -> Result<FockState> {
    let modes = eigenmodes(pair, geom)?;
    let [q1, q2] = modes.occupations.map(ratio);
    let tail = sum_tail(q1, q2, n_max);
    if tail >= DEFAULT_TAIL {
        return Err(Error::Truncation {
            cutoff: n_max,
            required: required_cutoff(pair, geom, DEFAULT_TAIL)?,
            tail,
        });
    }
    Ok(FockState {
        n_max,
        blocks: build_blocks(&modes, n_max),
        tail_bound: tail,
    })
}

/// Central-difference estimate of a derivative with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdEstimate {
    pub value: f64,
    pub error: f64,
}

/// Central differences at `h`, `h/2`, `h/4` combined by two Richardson levels.
/// Returns the extrapolated vector and the largest change made by the last level.
fn richardson<F>(f: F, x: f64, h: f64) -> (Vec<f64>, f64)
where
    F: Fn(f64) -> Vec<f64>,
{
    let central = |step: f64| -> Vec<f64> {
        let (a, b) = (f(x + step), f(x - step));
        a.iter().zip(&b).map(|(a, b)| (a - b) / (2.0 * step)).collect()
    };
    let d = [central(h), central(0.5 * h), central(0.25 * h)];
    let level1 = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(a, b)| (4.0 * b - a) / 3.0).collect()
    };
    let r1a = level1(&d[0], &d[1]);
    let r1b = level1(&d[1], &d[2]);
    let r2: Vec<f64> = r1a.iter().zip(&r1b).map(|(a, b)| (16.0 * b - a) / 15.0).collect();
    let error = r2.iter().zip(&r1b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    (r2, error)
}

/// `f'(x)` by Richardson-extrapolated central differences.
pub fn fd_derivative<F: Fn(f64) -> f64>(f: F, x: f64, step: f64) -> FdEstimate {
    let (v, error) = richardson(|y| vec![f(y)], x, step);
    FdEstimate { value: v[0], error }
}

/// `∂ρ` along a direction in `(T₁, T₂)`, block by block.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDerivative {
    pub blocks: Vec<DMatrix<f64>>,
    /// Largest entrywise Richardson correction.
    pub error: f64,
}

/// `Σ dirᵢ ∂ρ/∂Tᵢ` at fixed truncation.
pub fn fock_derivative_along(
    pair: &SourcePair,
    geom: &DiffractionGeometry,
    n_max: usize,
    dir: [f64; 2],
) -> Result<FockDerivative> {
    eigenmodes(pair, geom)?;
    let scale = dir[0].abs() * pair.t1 + dir[1].abs() * pair.t2;
    let h = 0.02 * scale / (dir[0].abs() + dir[1].abs());
    let flatten = |t: f64| -> Vec<f64> {
        let shifted = pair.with_temperatures(pair.t1 + t * dir[0], pair.t2 + t * dir[1]);
        let modes = eigenmodes(&shifted, geom).expect("shifted temperatures stay valid");
        build_blocks(&modes, n_max)
            .iter()
            .flat_map(|b| b.as_slice().to_vec())
            .collect()
    };
    let (flat, error) = richardson(flatten, 0.0, h);
    let mut blocks = Vec::with_capacity(n_max + 1);
    let mut offset = 0;
    for n in 0..=n_max {
        let len = (n + 1) * (n + 1);
        blocks.push(DMatrix::from_column_slice(n + 1, n + 1, &flat[offset..offset + len]));
        offset += len;
    }
    Ok(FockDerivative { blocks, error })
}

pub fn fock_derivative(
    pair: &SourcePair,
    geom: &DiffractionGeometry,
    n_max: usize,
    which: Param,
) -> Result<FockDerivative> {
    let dir = match which {
        Param::T1 => [1.0, 0.0],
        Param::T2 => [0.0, 1.0],
    };
    fock_derivative_along(pair, geom, n_max, dir)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralQfi {
    pub value: f64,
    /// `Σ |∂ᵢρ_ab ∂ⱼρ_ab|` over the skipped eigenvalue pairs.
    pub discarded_weight: f64,
    pub warning: Option<String>,
}

fn block_spectra(state: &FockState) -> Vec<SymmetricEigen<f64, nalgebra::Dyn>> {
    state.blocks.iter().map(|b| b.clone().symmetric_eigen()).collect()
}

fn in_eigenbasis(eig: &SymmetricEigen<f64, nalgebra::Dyn>, m: &DMatrix<f64>) -> DMatrix<f64> {
    eig.eigenvectors.transpose() * m * &eig.eigenvectors
}

/// `2 Σ ⟨a|∂ᵢρ|b⟩⟨b|∂ⱼρ|a⟩ / (p_a + p_b)` over the eigenbasis of `ρ`.
pub fn spectral_qfi(state: &FockState, di: &FockDerivative, dj: &FockDerivative) -> SpectralQfi {
    let mut value = 0.0;
    let mut discarded = 0.0;
    for (eig, (bi, bj)) in block_spectra(state).iter().zip(di.blocks.iter().zip(&dj.blocks)) {
        let xi = in_eigenbasis(eig, bi);
        let xj = in_eigenbasis(eig, bj);
        let p = &eig.eigenvalues;
        for a in 0..p.len() {
            for b in 0..p.len() {
                let denom = p[a] + p[b];
                let prod = xi[(a, b)] * xj[(a, b)];
                if denom < SPECTRAL_FLOOR {
                    discarded += prod.abs();
                } else {
                    value += 2.0 * prod / denom;
                }
            }
        }
    }
    let warning = (discarded > DISCARD_WARNING).then(|| {
        format!("spectral sum skipped pairs carrying derivative weight {discarded:.3e}")
    });
    SpectralQfi {
        value,
        discarded_weight: discarded,
        warning,
    }
}

/// Full QFI matrix from the Fock construction, with the worst discarded weight.
pub fn spectral_qfi_matrix(
    pair: &SourcePair,
    geom: &DiffractionGeometry,
    n_max: usize,
) -> Result<(FisherMatrix, f64)> {
    let state = fock_density(pair, geom, n_max)?;
    let d1 = fock_derivative(pair, geom, n_max, Param::T1)?;
    let d2 = fock_derivative(pair, geom, n_max, Param::T2)?;
    let h11 = spectral_qfi(&state, &d1, &d1);
    let h22 = spectral_qfi(&state, &d2, &d2);
    let h12 = spectral_qfi(&state, &d1, &d2);
    let discarded = h11.discarded_weight.max(h22.discarded_weight).max(h12.discarded_weight);
    Ok((FisherMatrix::new(h11.value, h22.value, h12.value), discarded))
}

/// SLD `𝓛` with `∂ρ = ½(𝓛ρ + ρ𝓛)`, block by block in the number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SldBlocks {
    pub blocks: Vec<DMatrix<f64>>,
}

pub fn spectral_sld(state: &FockState, d: &FockDerivative) -> SldBlocks {
    let blocks = block_spectra(state)
        .iter()
        .zip(&d.blocks)
        .map(|(eig, db)| {
            let x = in_eigenbasis(eig, db);
            let p = &eig.eigenvalues;
            let l = DMatrix::from_fn(p.len(), p.len(), |a, b| {
                let denom = p[a] + p[b];
                if denom < SPECTRAL_FLOOR {
                    0.0
                } else {
                    2.0 * x[(a, b)] / denom
                }
            });
            &eig.eigenvectors * l * eig.eigenvectors.transpose()
        })
        .collect();
    SldBlocks { blocks }
}

/// `max_n ‖½(𝓛ρ + ρ𝓛) − ∂ρ‖_F` over the blocks.
pub fn anticommutator_residual(state: &FockState, sld: &SldBlocks, d: &FockDerivative) -> f64 {
    state
        .blocks
        .iter()
        .zip(&sld.blocks)
        .zip(&d.blocks)
        .map(|((rho, l), dr)| ((l * rho + rho * l) * 0.5 - dr).norm())
        .fold(0.0, f64::max)
}

/// `tr[ρ 𝓛ᵢ 𝓛ⱼ]`.
pub fn sld_product_expectation(state: &FockState, li: &SldBlocks, lj: &SldBlocks) -> f64 {
    state
        .blocks
        .iter()
        .zip(li.blocks.iter().zip(&lj.blocks))
        .map(|(rho, (a, b))| (rho * a * b).trace())
        .sum()
}

/// `tr[ρ[𝓛₁, 𝓛₂]]`.
pub fn commutator_expectation(state: &FockState, l1: &SldBlocks, l2: &SldBlocks) -> f64 {
    sld_product_expectation(state, l1, l2) - sld_product_expectation(state, l2, l1)
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
/// Gauss weights for the odd-indexed Kronrod nodes (7-point rule).
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = KRONROD_WEIGHTS[7] * fc;
    let mut gauss = GAUSS_WEIGHTS[3] * fc;
    for j in 0..7 {
        let x = h * GK_NODES[j];
        let pair = f(c - x) + f(c + x);
        kronrod += KRONROD_WEIGHTS[j] * pair;
        if j % 2 == 1 {
            gauss += GAUSS_WEIGHTS[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) quadrature on `[a, b]` to absolute `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<Quadrature> {
    const MAX_DEPTH: u32 = 40;
    // start from a uniform split so narrow features cannot fall between the
    // nodes of a single wide panel
    const INITIAL_PANELS: usize = 64;
    let panel = (b - a) / INITIAL_PANELS as f64;
    let mut stack: Vec<(f64, f64, u32)> = (0..INITIAL_PANELS)
        .rev()
        .map(|i| {
            let lo = a + panel * i as f64;
            let hi = if i + 1 == INITIAL_PANELS { b } else { lo + panel };
            (lo, hi, 0)
        })
        .collect();
    let mut value = 0.0;
    let mut error = 0.0;
    let mut intervals = 0;
    let mut failed = Vec::new();
    let width = b - a;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, e) = gk15(&f, lo, hi);
        let budget = tol * (hi - lo) / width;
        if e <= budget.max(f64::EPSILON * v.abs()) {
            value += v;
            error += e;
            intervals += 1;
        } else if depth >= MAX_DEPTH {
            failed.push(format!("[{lo:.6e}, {hi:.6e}] error {e:.3e}"));
            value += v;
            error += e;
            intervals += 1;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    if failed.is_empty() {
        Ok(Quadrature {
            value,
            error,
            intervals,
        })
    } else {
        Err(Error::Numerical(format!(
            "quadrature did not reach {tol:e} on {} interval(s): {}",
            failed.len(),
            failed.join("; ")
        )))
    }
}

/// `ψ(x) = (2/πϖ²)^{1/4} exp(−x²/ϖ²)`.
pub fn gaussian_psf(x: f64, varpi: f64) -> f64 {
    (2.0 / (std::f64::consts::PI * varpi * varpi)).powf(0.25) * (-(x * x) / (varpi * varpi)).exp()
}

/// Integration window outside which the shifted PSFs are below `e^{-200}`.
fn psf_window(d: f64, varpi: f64) -> (f64, f64) {
    let half = 0.5 * d.abs() + 15.0 * varpi;
    (-half, half)
}

fn check_psf(d: f64, varpi: f64) -> Result<()> {
    if !(varpi.is_finite() && varpi > 0.0 && d.is_finite()) {
        return Err(Error::Domain(format!("need finite d and varpi > 0, got d = {d}, varpi = {varpi}")));
    }
    Ok(())
}

/// `∫ ψ(x + d/2) ψ(x − d/2) dx` by quadrature.
pub fn quadrature_overlap(d: f64, varpi: f64) -> Result<Quadrature> {
    check_psf(d, varpi)?;
    let (a, b) = psf_window(d, varpi);
    integrate(
        |x| gaussian_psf(x + 0.5 * d, varpi) * gaussian_psf(x - 0.5 * d, varpi),
        a,
        b,
        1e-13,
    )
}

/// Normalized Hermite–Gauss mode `u_k` matched to the PSF, so `u₀ = ψ`.
pub fn hg_mode(k: usize, x: f64, varpi: f64) -> f64 {
    let a = varpi / std::f64::consts::SQRT_2;
    let y = x / a;
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * y * y).exp();
    for j in 0..k {
        let jf = j as f64;
        let next = (2.0 / (jf + 1.0)).sqrt() * y * cur - (jf / (jf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur / a.sqrt()
}

/// `∫ u_k(x) ψ(x − d/2) dx`, the amplitude of a source at `+d/2` in mode `k`.
pub fn quadrature_hg_amplitude(k: usize, d: f64, varpi: f64) -> Result<Quadrature> {
    check_psf(d, varpi)?;
    let (a, b) = psf_window(d, varpi);
    // the mode extends roughly √(2k+1) widths from the origin
    let reach = (2.0 * k as f64 + 1.0).sqrt() * varpi;
    integrate(
        |x| hg_mode(k, x, varpi) * gaussian_psf(x - 0.5 * d, varpi),
        a.min(-reach - 15.0 * varpi),
        b.max(reach + 15.0 * varpi),
        1e-13,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn geom(s: f64) -> DiffractionGeometry {
        DiffractionGeometry::Overlap(s)
    }

    #[test]
    fn sum_tail_matches_direct_sum() {
        for &(q1, q2) in &[(0.5f64, 0.2f64), (0.3, 0.3), (0.6, 0.0)] {
            for n in [0usize, 3, 10] {
                let mut inside = 0.0;
                for k1 in 0..=n {
                    for k2 in 0..=(n - k1) {
                        inside += (1.0 - q1) * q1.powi(k1 as i32) * (1.0 - q2) * q2.powi(k2 as i32);
                    }
                }
                assert_relative_eq!(sum_tail(q1, q2, n), 1.0 - inside, max_relative = 1e-9, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn uncorrelated_state_is_diagonal_product() {
        let pair = SourcePair::equal(1.0, 1.0, 0.5).unwrap();
        let g = geom(0.4);
        let n_max = required_cutoff(&pair, &g, DEFAULT_TAIL).unwrap();
        let state = fock_density(&pair, &g, n_max).unwrap();
        let img = build_image_state(&pair, &g).unwrap();
        for (n, b) in state.blocks.iter().enumerate() {
            for m in 0..=n {
                for mp in 0..=n {
                    if m != mp {
                        assert!(b[(m, mp)].abs() < 1e-15);
                    }
                }
                let expected = geometric_prob(img.n_plus, m) * geometric_prob(img.n_minus, n - m);
                assert_relative_eq!(b[(m, m)], expected, max_relative = 1e-12, epsilon = 1e-300);
            }
        }
    }

    #[test]
    fn maximum_diffraction_leaves_antisymmetric_mode_empty() {
        let pair = SourcePair::new(0.8, 1.2, 1.0, 0.5).unwrap();
        let g = geom(1.0);
        let state = fock_density(&pair, &g, required_cutoff(&pair, &g, 1e-12).unwrap()).unwrap();
        let v = state.pmatrix();
        assert!(v[(1, 1)].abs() < 1e-14);
        assert!(v[(0, 1)].abs() < 1e-14);
        for n in 1..=state.n_max {
            assert!(state.number_diagonal(0, n).abs() < 1e-15);
        }
    }

    #[test]
    fn moments_reproduce_covariance() {
        for &(t1, t2, s) in &[(0.8, 1.2, 0.5), (0.5, 1.5, 0.9), (1.0, 0.7, 0.1)] {
            let pair = SourcePair::new(t1, t2, 1.0, 0.5).unwrap();
            let g = geom(s);
            let state = fock_density(&pair, &g, required_cutoff(&pair, &g, 1e-13).unwrap()).unwrap();
            let expected = build_image_state(&pair, &g).unwrap().cov;
            assert!((state.covariance() - expected).amax() < 1e-8);
            assert!((state.trace() - 1.0).abs() <= state.tail_bound + 1e-14);
        }
    }

    #[test]
    fn blocks_are_positive_semidefinite() {
        let pair = SourcePair::new(0.5, 1.5, 1.0, 0.9).unwrap();
        let g = geom(0.7);
        let state = fock_density(&pair, &g, required_cutoff(&pair, &g, DEFAULT_TAIL).unwrap()).unwrap();
        for b in &state.blocks {
            assert!((b - b.transpose()).amax() < 1e-15);
            assert!(b.clone().symmetric_eigen().eigenvalues.min() > -1e-12);
        }
    }

    #[test]
    fn short_cutoff_reports_required_size() {
        let pair = SourcePair::new(0.8, 1.2, 1.0, 0.5).unwrap();
        match fock_density(&pair, &geom(0.5), 3) {
            Err(Error::Truncation { cutoff, required, tail }) => {
                assert_eq!(cutoff, 3);
                assert!(required > 3);
                assert!(tail > DEFAULT_TAIL);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn dense_layout_round_trips() {
        let pair = SourcePair::new(0.8, 1.2, 1.0, 0.5).unwrap();
        let g = geom(0.5);
        let state = fock_density(&pair, &g, required_cutoff(&pair, &g, DEFAULT_TAIL).unwrap()).unwrap();
        let dim = 4;
        let rho = state.dense(dim);
        assert_eq!(rho.nrows(), 16);
        assert_eq!(rho[(2 * dim + 1, 2 * dim + 1)], state.number_diagonal(2, 1));
        assert_eq!(rho[(2 * dim + 1, 3 * dim)], state.blocks[3][(2, 3)]);
    }

    #[test]
    fn fd_of_square() {
        let r = fd_derivative(|x| x * x, 3.0, 0.1);
        assert!((r.value - 6.0).abs() < 1e-9);
        let r = fd_derivative(f64::sin, 1.0, 0.1);
        assert!((r.value - 1f64.cos()).abs() < 1e-10);
        assert!(r.error < 1e-6);
    }

    #[test]
    fn vacuum_like_state_has_no_information() {
        // at omega/T = 600 both sources are in vacuum to double precision
        let pair = SourcePair::equal(1.0 / 600.0, 1.0, 0.5).unwrap();
        let g = geom(0.5);
        let state = fock_density(&pair, &g, 2).unwrap();
        let d = fock_derivative(&pair, &g, 2, Param::T1).unwrap();
        let q = spectral_qfi(&state, &d, &d);
        assert!(q.value.abs() < 1e-100);
    }

    #[test]
    fn sld_solves_lyapunov_equation() {
        let pair = SourcePair::new(0.8, 1.2, 1.0, 0.5).unwrap();
        let g = geom(0.5);
        let n_max = required_cutoff(&pair, &g, DEFAULT_TAIL).unwrap();
        let state = fock_density(&pair, &g, n_max).unwrap();
        let d1 = fock_derivative(&pair, &g, n_max, Param::T1).unwrap();
        let l1 = spectral_sld(&state, &d1);
        assert!(anticommutator_residual(&state, &l1, &d1) < 1e-9);
        let q = spectral_qfi(&state, &d1, &d1).value;
        assert_relative_eq!(sld_product_expectation(&state, &l1, &l1), q, max_relative = 1e-9);
    }

    #[test]
    fn quadrature_overlap_endpoints() {
        assert!((quadrature_overlap(0.0, 1.3).unwrap().value - 1.0).abs() < 1e-12);
        let r = quadrature_overlap(2.0, 1.0).unwrap();
        assert!((r.value - (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn hg_modes_are_orthonormal() {
        for (j, k) in [(0, 0), (3, 3), (2, 5), (1, 4)] {
            let r = integrate(|x| hg_mode(j, x, 0.8) * hg_mode(k, x, 0.8), -20.0, 20.0, 1e-13).unwrap();
            let expected = if j == k { 1.0 } else { 0.0 };
            assert!((r.value - expected).abs() < 1e-11, "({j},{k}) -> {}", r.value);
        }
    }

    #[test]
    fn integrator_reports_failure() {
        let err = integrate(|x: f64| 1.0 / x.abs().sqrt(), -1.0, 1.0, 1e-14).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn integrator_polynomial_exactness() {
        let r = integrate(|x| x.powi(6) - 3.0 * x, 0.0, 2.0, 1e-12).unwrap();
        assert_relative_eq!(r.value, 128.0 / 7.0 - 6.0, max_relative = 1e-14);
        assert_eq!(r.intervals, 64);
    }
}
