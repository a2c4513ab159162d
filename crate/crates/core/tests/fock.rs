mod common;

use std::f64::consts::PI;

use cavity_reservoir::fock::*;
use cavity_reservoir::linalg::{self, c, CMatrix, C64};
use cavity_reservoir::metrics;
use common::{assert_density, hilbert, random_state};
use proptest::prelude::*;

#[test]
fn ladder_matrices() {
    let l = make_ladder(&hilbert(1));
    assert_eq!(l.a.matrix(), &CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]));
    assert_eq!(l.n.matrix()[(1, 1)], c(1.0, 0.0));
    let h = hilbert(59);
    let l = make_ladder(&h);
    assert_eq!(l.n.matrix()[(4, 4)], c(4.0, 0.0));
    assert!(linalg::max_abs(&(l.a_dagger.matrix() * l.a.matrix() - l.n.matrix())) < 1e-12);
    // [a, a†] = 1 except in the last row and column
    let comm = l.a.matrix() * l.a_dagger.matrix() - l.a_dagger.matrix() * l.a.matrix();
    let inner = comm.view((0, 0), (59, 59)).into_owned();
    assert!(linalg::max_abs(&(inner - CMatrix::identity(59, 59))) < 1e-12);
    for n in 1..h.dim() {
        let ket = PureFieldState::fock(&h, n).unwrap();
        let lowered = l.a.apply(&ket);
        assert!((lowered[n - 1] - c((n as f64).sqrt(), 0.0)).norm() < 1e-14);
    }
}

#[test]
fn coherent_state_statistics() {
    let h = hilbert(59);
    assert_eq!(coherent_state(c(0.0, 0.0), &h).unwrap(), PureFieldState::vacuum(&h));
    let psi = coherent_state(c(2.0, 0.0), &h).unwrap();
    let rho = psi.to_density();
    assert!((metrics::mean_photon(&rho) - 4.0).abs() < 1e-6);
    let mut poisson = (-4.0f64).exp();
    for n in 0..h.dim() {
        assert!((rho.population(n) - poisson).abs() < 1e-8, "n = {n}");
        poisson *= 4.0 / (n + 1) as f64;
    }
    assert!(coherent_state(c(6.0, 0.0), &h).is_err());
    // truncation loss at a typical amplitude
    let r2: f64 = 20.0;
    let psi = coherent_state(c(r2.sqrt(), 0.0), &h).unwrap();
    let kept: f64 = (0..h.dim())
        .map(|n| (-r2 + n as f64 * r2.ln() - linalg::ln_factorial(n)).exp())
        .sum();
    assert!((1.0 - kept).abs() < 1e-6);
    assert!((psi.amplitudes().norm() - 1.0).abs() < 1e-10);
}

#[test]
fn kerr_propagator_special_phases() {
    let h = hilbert(30);
    let id = CMatrix::identity(31, 31);
    assert!(linalg::max_abs(&(kerr_propagator(&KerrParams::new(0.0).unwrap(), &h).matrix() - &id)) == 0.0);
    assert!(linalg::max_abs(&(kerr_propagator(&KerrParams::new(PI).unwrap(), &h).matrix() - &id)) < 1e-10);
    assert!(KerrParams::new(f64::NAN).is_err());
}

#[test]
fn quarter_kerr_turn_makes_a_cat() {
    let h = hilbert(59);
    let alpha = c(1.65, 0.0);
    let evolved = kerr_propagator(&KerrParams::new(PI / 2.0).unwrap(), &h).apply(&coherent_state(alpha, &h).unwrap());
    // (|−iα⟩ + i|iα⟩)/√2 written as components −iα and −iα·e^{iπ}
    let cat = ideal_mfss(alpha * c(0.0, -1.0), 2, &[PI / 2.0], &h).unwrap();
    let overlap = cat.amplitudes().dotc(&evolved).norm();
    assert!(overlap > 1.0 - 1e-6, "overlap {overlap}");
}

#[test]
fn mfss_constructor_cases() {
    let h = hilbert(59);
    let alpha = c(1.3, 0.4);
    assert_eq!(ideal_mfss(alpha, 1, &[], &h).unwrap(), coherent_state(alpha, &h).unwrap());
    assert!((mfss_normalization(c(5.0, 0.0), 2, &[0.3]).unwrap() - 0.5f64.sqrt()).abs() < 1e-10);
    assert!(ideal_mfss(alpha, 0, &[], &h).is_err());
    assert!(ideal_mfss(alpha, 3, &[1.0], &h).is_err());
    // phase convention: c_0 real and non-negative
    let psi = ideal_mfss(c(1.0, 1.0), 3, &[0.4, 2.0], &h).unwrap();
    assert!(psi.amplitudes()[0].im == 0.0 && psi.amplitudes()[0].re >= 0.0);
}

#[test]
fn rotated_cat_with_quarter_phase() {
    // (|αe^{−iφ}⟩ + i|−αe^{−iφ}⟩)/√2 for real α
    let h = hilbert(59);
    let (alpha, phi) = (1.8, 0.3);
    let rot = C64::from_polar(1.0, -phi);
    let a = coherent_state(alpha * rot, &h).unwrap();
    let b = coherent_state(-alpha * rot, &h).unwrap();
    let sum = a.amplitudes() + b.amplitudes() * c(0.0, 1.0);
    let expected = PureFieldState::from_amplitudes(sum).unwrap();
    let cat = ideal_mfss(alpha * rot, 2, &[PI / 2.0], &h).unwrap();
    assert!((cat.inner(&expected).norm() - 1.0).abs() < 1e-10);
}

#[test]
fn thermal_and_mixed_states() {
    let h = hilbert(40);
    let th = FieldState::thermal(&h, 0.05).unwrap();
    assert!((metrics::mean_photon(&th) - 0.05).abs() < 1e-12);
    let mm = FieldState::maximally_mixed(&h);
    assert!((metrics::purity(&mm) - 1.0 / 41.0).abs() < 1e-14);
    assert!(FieldState::new(CMatrix::identity(3, 3)).is_err());
}

fn poly(coeffs: &[f64], n: usize) -> C64 {
    let x = n as f64;
    c(coeffs.iter().rev().fold(0.0, |acc, k| acc * x + k), 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn number_function_commutes_through_a(coeffs in proptest::collection::vec(-2.0f64..2.0, 1..5)) {
        let h = hilbert(20);
        let l = make_ladder(&h);
        let f = FieldOperator::diagonal_fn(&h, |n| poly(&coeffs, n));
        let f_shift = FieldOperator::diagonal_fn(&h, |n| poly(&coeffs, n + 1));
        let lhs = l.a.matrix() * f.matrix();
        let rhs = f_shift.matrix() * l.a.matrix();
        let scale = 1.0 + linalg::max_abs(&lhs);
        prop_assert!(linalg::max_abs(&(lhs - rhs)) < 1e-12 * scale);
    }

    #[test]
    fn kerr_propagator_is_unitary(phi0 in -10.0f64..10.0) {
        let u = kerr_propagator(&KerrParams::new(phi0).unwrap(), &hilbert(59));
        prop_assert!(linalg::unitarity_error(u.matrix()) < 1e-12);
    }

    #[test]
    fn coherent_mean_field(re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let h = hilbert(59);
        let alpha = c(re, im);
        prop_assume!(alpha.norm_sqr() <= h.max_mean_photons());
        let rho = coherent_state(alpha, &h).unwrap().to_density();
        prop_assert!((metrics::expect_a(&rho) - alpha).norm() < 1e-6);
    }

    #[test]
    fn state_operations_keep_invariants(seed in 0u64..1000, p in 0.0f64..1.0, phi0 in -3.0f64..3.0) {
        let h = hilbert(25);
        let a = random_state(&h, 3, seed);
        let b = random_state(&h, 1, seed + 7);
        assert_density(a.mix(&b, p).unwrap().matrix(), "mix");
        let u = kerr_propagator(&KerrParams::new(phi0).unwrap(), &h);
        assert_density(a.conjugate_by(&u).matrix(), "conjugate");
        prop_assert!(a.validate().is_ok());
    }
}
