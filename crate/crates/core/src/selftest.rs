//! Quick agreement checks between the closed forms and the brute-force
//! oracle, run by `thermometry selftest`.

use serde::Serialize;

use crate::counting::count_distribution;
use crate::equal_temp::{qfi_equal, qfi_equal_series};
use crate::error::Result;
use crate::gaussian_fisher::qfi_matrix;
use crate::model::{build_image_state, gaussian_overlap, DiffractionGeometry, SourcePair};
use crate::oracle::{
    fock_density, fock_derivative_along, quadrature_overlap, required_cutoff, spectral_qfi_matrix,
    spectral_qfi, DEFAULT_TAIL,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Observed discrepancy and the tolerance it was held to.
    pub error: f64,
    pub tolerance: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn check(name: &'static str, error: f64, tolerance: f64) -> Check {
    Check {
        name,
        passed: error <= tolerance,
        error,
        tolerance,
    }
}

pub fn run() -> Result<Vec<Check>> {
    let mut out = Vec::new();

    let err = [0.0, 0.5, 0.9]
        .iter()
        .map(|&s| {
            let series = qfi_equal_series(1.0, 1.0, 0.5, s, 1e-14)?;
            Ok(rel(series, qfi_equal(1.0, 1.0, 0.5, s)?.qfi))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.push(check("equal-temperature series vs closed form", err, 1e-10));

    let pair = SourcePair::equal(1.0, 1.0, 0.5)?;
    let geom = DiffractionGeometry::overlap(0.5)?;
    let n_max = required_cutoff(&pair, &geom, DEFAULT_TAIL)?;
    let state = fock_density(&pair, &geom, n_max)?;
    let d = fock_derivative_along(&pair, &geom, n_max, [1.0, 1.0])?;
    let oracle = spectral_qfi(&state, &d, &d).value;
    out.push(check(
        "equal-temperature QFI vs Fock oracle",
        rel(oracle, qfi_equal(1.0, 1.0, 0.5, 0.5)?.qfi),
        1e-5,
    ));

    let pair = SourcePair::new(0.8, 1.2, 1.0, 0.5)?;
    let n_max = required_cutoff(&pair, &geom, DEFAULT_TAIL)?;
    let (fock, _) = spectral_qfi_matrix(&pair, &geom, n_max)?;
    let h = qfi_matrix(&pair, &geom)?.matrix;
    let err = rel(fock.h11, h.h11).max(rel(fock.h22, h.h22)).max(rel(fock.h12, h.h12));
    out.push(check("QFI matrix vs Fock oracle", err, 1e-5));

    let state = fock_density(&pair, &geom, n_max)?;
    let cov_err = (state.covariance() - build_image_state(&pair, &geom)?.cov).amax();
    out.push(check("covariance vs Fock moments", cov_err, 1e-8));

    let dist = count_distribution(&pair, &geom, 1e-12)?;
    let mut err: f64 = 0.0;
    for np in 0..=dist.cap_plus.min(20) {
        for nm in 0..=dist.cap_minus.min(20) {
            err = err.max((dist.get(np, nm) - state.number_diagonal(np, nm)).abs());
        }
    }
    out.push(check("photon-count distribution vs Fock diagonal", err, 1e-8));

    let err = [0.0, 1.0, 2.0]
        .iter()
        .map(|&d| Ok((quadrature_overlap(d, 1.0)?.value - gaussian_overlap(d, 1.0)?).abs()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.push(check("PSF overlap vs quadrature", err, 1e-10));

    Ok(out)
}
