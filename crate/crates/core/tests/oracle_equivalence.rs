//! Closed forms against the brute-force Fock-space construction.

use approx::assert_relative_eq;
use thermometry::counting::{count_distribution, counting_fi_matrix};
use thermometry::equal_temp::qfi_equal;
use thermometry::estimation::{ratio_mu, MuConvention};
use thermometry::gaussian_fisher::{qfi_matrix, weak_commutation};
use thermometry::oracle::{
    commutator_expectation, fock_density, fock_derivative, fock_derivative_along, required_cutoff,
    spectral_qfi, spectral_qfi_matrix, spectral_sld, DEFAULT_TAIL,
};
use thermometry::gaussian_fisher::Param;
use thermometry::{DiffractionGeometry, SourcePair};

fn geom(s: f64) -> DiffractionGeometry {
    DiffractionGeometry::overlap(s).unwrap()
}

fn cutoff(pair: &SourcePair, g: &DiffractionGeometry) -> usize {
    required_cutoff(pair, g, DEFAULT_TAIL).unwrap()
}

#[test]
fn selftest_passes() {
    for c in thermometry::selftest::run().unwrap() {
        assert!(c.passed, "{}: error {:e} > {:e}", c.name, c.error, c.tolerance);
    }
}

#[test]
fn equal_temperature_qfi_matches_spectral_formula() {
    for &(t, omega, eta) in &[(1.0, 1.0, 0.5), (0.5, 1.0, 1.0), (2.0, 1.0, 0.3), (8.0, 10.0, 0.9)] {
        for &s in &[0.0, 0.3, 0.8, 1.0] {
            let pair = SourcePair::equal(t, omega, eta).unwrap();
            let g = geom(s);
            let n = cutoff(&pair, &g);
            assert!(n <= 80, "cutoff {n}");
            let state = fock_density(&pair, &g, n).unwrap();
            let d = fock_derivative_along(&pair, &g, n, [1.0, 1.0]).unwrap();
            let q = spectral_qfi(&state, &d, &d);
            assert!(q.warning.is_none());
            let closed = qfi_equal(t, omega, eta, s).unwrap().qfi;
            assert_relative_eq!(q.value, closed, max_relative = 1e-6);
        }
    }
}

#[test]
fn qfi_matrix_matches_spectral_formula() {
    for &(t1, t2, eta, s) in &[
        (0.8, 1.2, 0.5, 0.5),
        (0.5, 1.5, 0.9, 0.2),
        (1.3, 0.6, 0.3, 0.95),
        (1.0, 1.0, 0.5, 0.7),
        (0.8, 1.2, 0.5, 1.0),
    ] {
        let pair = SourcePair::new(t1, t2, 1.0, eta).unwrap();
        let g = geom(s);
        let (fock, discarded) = spectral_qfi_matrix(&pair, &g, cutoff(&pair, &g)).unwrap();
        assert!(discarded < 1e-8);
        let h = qfi_matrix(&pair, &g).unwrap().matrix;
        assert_relative_eq!(fock.h11, h.h11, max_relative = 1e-5);
        assert_relative_eq!(fock.h22, h.h22, max_relative = 1e-5);
        assert_relative_eq!(fock.h12, h.h12, max_relative = 1e-5, epsilon = 1e-9 * h.h11);
    }
}

#[test]
fn weak_commutation_holds_in_fock_space() {
    for &(t1, t2, s) in &[(0.8, 1.2, 0.5), (0.5, 1.5, 0.9), (1.2, 0.7, 0.2)] {
        let pair = SourcePair::new(t1, t2, 1.0, 0.5).unwrap();
        let g = geom(s);
        let n = cutoff(&pair, &g);
        let state = fock_density(&pair, &g, n).unwrap();
        let l1 = spectral_sld(&state, &fock_derivative(&pair, &g, n, Param::T1).unwrap());
        let l2 = spectral_sld(&state, &fock_derivative(&pair, &g, n, Param::T2).unwrap());
        assert!(commutator_expectation(&state, &l1, &l2).abs() < 1e-6);
        assert!(weak_commutation(&pair, &g).unwrap().norm() < 1e-9);
    }
}

#[test]
fn count_distribution_matches_fock_diagonal() {
    let pair = SourcePair::new(0.8, 1.2, 1.0, 0.5).unwrap();
    let g = geom(0.5);
    let dist = count_distribution(&pair, &g, 1e-12).unwrap();
    let state = fock_density(&pair, &g, dist.cap_plus + dist.cap_minus).unwrap();
    let mut worst: f64 = 0.0;
    for np in 0..=dist.cap_plus {
        for nm in 0..=dist.cap_minus {
            worst = worst.max((dist.get(np, nm) - state.number_diagonal(np, nm)).abs());
        }
    }
    assert!(worst < 1e-8, "max deviation {worst:e}");
}

#[test]
fn counting_information_is_below_quantum_limit() {
    for &(t1, t2) in &[(1.0, 1.1), (0.8, 1.2), (0.5, 1.5)] {
        for k in 0..=10 {
            let s = k as f64 / 10.0;
            let pair = SourcePair::new(t1, t2, 1.0, 0.5).unwrap();
            let g = geom(s);
            let fc = counting_fi_matrix(&pair, &g, 1e-12).unwrap();
            let h = qfi_matrix(&pair, &g).unwrap().matrix;
            assert!(fc.h11 <= h.h11 + 1e-9 && fc.h22 <= h.h22 + 1e-9);
        }
    }
}

/// The `η` dependence of `1/μ` near `s = 1` is a property of the state, not
/// of the closed-form QFI: the Fock construction reproduces it.
#[test]
fn attenuation_dependence_of_mu_is_physical() {
    let inv_mu = |eta: f64, fock: bool| {
        let pair = SourcePair::new(8.0, 10.0, 10.0, eta).unwrap();
        let g = geom(0.98);
        let h = if fock {
            spectral_qfi_matrix(&pair, &g, cutoff(&pair, &g)).unwrap().0
        } else {
            qfi_matrix(&pair, &g).unwrap().matrix
        };
        1.0 / ratio_mu(&h, MuConvention::ResourceConsistent)
    };
    let closed = inv_mu(0.1, false) - inv_mu(0.9, false);
    let oracle = inv_mu(0.1, true) - inv_mu(0.9, true);
    assert_relative_eq!(closed, oracle, max_relative = 1e-4);
    assert!(closed.abs() > 0.1);
}
