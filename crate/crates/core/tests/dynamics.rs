mod common;

use std::f64::consts::PI;

use cavity_reservoir::dynamics::*;
use cavity_reservoir::fock::{self, FieldState};
use cavity_reservoir::linalg::{self, c, CMatrix, C64};
use cavity_reservoir::lindblad::Dissipator;
use cavity_reservoir::reservoir::CavityParams;
use common::{assert_density, hilbert, random_ket};
use proptest::prelude::*;
use statrs::function::erf::erf;

fn cat2_profile() -> TransitProfile {
    TransitProfile::new(OMEGA0_REFERENCE, 6e-3, 70.0, 2.2 * OMEGA0_REFERENCE, 5e-6).unwrap()
}

fn squeeze_profile() -> TransitProfile {
    TransitProfile::new(
        OMEGA0_REFERENCE,
        6e-3,
        300.0,
        70.0 * OMEGA0_REFERENCE,
        1.7e-6,
    )
    .unwrap()
}

/// `∫ Ω(t) dt` over `[a, b]` in closed form.
fn gaussian_integral(p: &TransitProfile, a: f64, b: f64) -> f64 {
    let tau = p.w / p.v;
    p.omega0 * tau * PI.sqrt() / 2.0 * (erf(b / tau) - erf(a / tau))
}

/// `∫ Ω(t)² dt` over `[a, b]` in closed form.
fn gaussian_sq_integral(p: &TransitProfile, a: f64, b: f64) -> f64 {
    let tau = p.w / p.v / 2f64.sqrt();
    p.omega0 * p.omega0 * tau * PI.sqrt() / 2.0 * (erf(b / tau) - erf(a / tau))
}

fn lossless() -> Dissipator {
    Dissipator::new(0.0, 0.0)
}

fn pure_joint(d: usize, seed: u64) -> CMatrix {
    let psi = random_ket(2 * d, seed);
    &psi * psi.adjoint()
}

#[test]
fn theta_matches_erf_closed_form() {
    for p in [cat2_profile(), squeeze_profile()] {
        let exact = gaussian_integral(&p, -0.5 * p.t_r, 0.5 * p.t_r);
        assert!((theta_of(&p) - exact).abs() < 1e-9 * exact);
    }
    // "Θ ≈ π/2" and "Θ ≈ 0.17π"
    assert!((theta_of(&cat2_profile()) - PI / 2.0).abs() < 1e-3);
    assert!((theta_of(&squeeze_profile()) - 0.17 * PI).abs() < 3e-3);
}

#[test]
fn phi0_matches_erf_closed_form() {
    let p = cat2_profile();
    let half = 0.5 * p.t_r;
    let integral = gaussian_sq_integral(&p, half, p.end());
    let second = phi0_of(&p, DispersiveSegment::Second).unwrap();
    let expected = integral / (4.0 * p.delta_disp);
    assert!((second - expected).abs() < 1e-9 * expected);
    let first = phi0_of(&p, DispersiveSegment::First).unwrap();
    assert!((first + expected).abs() < 1e-9 * expected);
    // frozen regression value for scenario (a)
    assert!((second - 1.82317).abs() < 1e-4, "phi0 = {second}");
}

#[test]
fn resonant_constant_drive_matches_closed_form() {
    let h = hilbert(20);
    for (omega, t) in [(OMEGA0_REFERENCE, 5e-6), (2.0, 1.9), (0.7, 13.0)] {
        let drive = ConstantDrive {
            omega,
            delta: 0.0,
            duration: t,
        };
        let numeric = PairBlocks::for_drive(&drive, h.dim(), 0.05).to_operator();
        let exact = u_resonant(omega * t, &h);
        let err = linalg::operator_norm(&(numeric.matrix() - exact.matrix()));
        assert!(err < 1e-6, "Θ = {}: {err:e}", omega * t);
    }
}

#[test]
fn resonant_constant_drive_rk4_matches_closed_form() {
    let h = hilbert(12);
    let drive = ConstantDrive {
        omega: 1.0,
        delta: 0.0,
        duration: 2.3,
    };
    let options = TransitOptions {
        integrator: Integrator::Rk4,
        max_phase_per_step: 0.002,
        loss_slices: 1,
    };
    let prop = TransitPropagator::numeric(&drive, &h, lossless(), &options).unwrap();
    let u = u_resonant(2.3, &h);
    let rho = pure_joint(h.dim(), 5);
    let exact = u.matrix() * &rho * u.matrix().adjoint();
    assert!(linalg::max_abs(&(prop.apply_joint(&rho) - exact)) < 1e-8);
}

/// Phases of the numeric dispersive transit, with the bare atomic phases
/// `∓δT/2` removed, against `U_d(φ₀)` for the adiabatic `φ₀`.
fn dispersive_phase_error(delta_factor: f64, n_check: usize) -> f64 {
    let h = hilbert(20);
    let d = h.dim();
    let p = cat2_profile();
    let delta = delta_factor * p.omega0;
    let drive = FixedDetuning { profile: p, delta };
    let u = PairBlocks::for_drive(&drive, d, 0.02).to_operator();
    let total = p.t_i();
    let phi0 = -gaussian_sq_integral(&p, p.start(), p.end()) / (4.0 * delta);
    let expected = u_dispersive(phi0, &h);
    let bare = 0.5 * delta * total;
    let mut worst: f64 = 0.0;
    for n in 0..=n_check {
        for (s, sign) in [(G, 1.0), (E, -1.0)] {
            let i = s * d + n;
            let got = u.matrix()[(i, i)] * C64::from_polar(1.0, -sign * bare);
            let want = expected.matrix()[(i, i)];
            worst = worst.max((got * want.conj()).arg().abs());
        }
    }
    worst
}

#[test]
fn far_detuned_transit_matches_dispersive_phases() {
    let err70 = dispersive_phase_error(70.0, 10);
    assert!(err70 < 2e-2, "phase error {err70:e}");
    // and the approximation improves with the detuning
    let err20 = dispersive_phase_error(20.0, 10);
    assert!(err70 < err20);
}

#[test]
fn time_reversal_returns_initial_state() {
    let h = hilbert(15);
    let p = cat2_profile();
    let forward =
        TransitPropagator::numeric(&p, &h, lossless(), &TransitOptions::default()).unwrap();
    // −H(−t): the detuning ladder is odd in t, so only the coupling flips sign
    let back_drive = ScaledCoupling {
        inner: &p,
        scale: -1.0,
    };
    let backward =
        TransitPropagator::numeric(&back_drive, &h, lossless(), &TransitOptions::default())
            .unwrap();
    let rho = pure_joint(h.dim(), 17);
    let there = forward.apply_joint(&rho);
    assert!(linalg::max_abs(&(&there - &rho)) > 1e-2);
    let back = backward.apply_joint(&there);
    assert!(linalg::max_abs(&(back - rho)) < 1e-9);
}

#[test]
fn lossless_numeric_transit_keeps_pure_states_pure() {
    let h = hilbert(20);
    for seed in 0..4 {
        let rho = JointState::new(pure_joint(h.dim(), seed), &h).unwrap();
        let out = transit_propagate(
            &rho,
            &cat2_profile(),
            &h,
            &CavityParams::lossless(),
            Backend::Numeric,
        )
        .unwrap();
        let purity = linalg::trace_of_product(out.matrix(), out.matrix()).re;
        assert!((purity - 1.0).abs() < 1e-6, "purity {purity}");
    }
}

#[test]
fn lossy_transit_preserves_density_invariants() {
    let h = hilbert(20);
    let field = fock::coherent_state(c(1.2, 0.4), &h).unwrap().to_density();
    let rho = JointState::product(&field, &AtomPreparation::new(0.45 * PI));
    let out = transit_propagate(
        &rho,
        &cat2_profile(),
        &h,
        &CavityParams::default(),
        Backend::Numeric,
    )
    .unwrap();
    assert_density(out.matrix(), "joint state");
    assert_density(out.field().matrix(), "field");
}

#[test]
fn analytic_backend_requires_lossless_cavity() {
    let h = hilbert(10);
    let rho = JointState::product(&FieldState::vacuum(&h), &AtomPreparation::new(1.0));
    let err = transit_propagate(
        &rho,
        &cat2_profile(),
        &h,
        &CavityParams::default(),
        Backend::Analytic,
    );
    assert!(err.is_err());
    let ok = transit_propagate(
        &rho,
        &cat2_profile(),
        &h,
        &CavityParams::lossless(),
        Backend::Analytic,
    )
    .unwrap();
    let (theta, phi) = analytic_angles(&cat2_profile()).unwrap();
    let u = u_composite(theta, phi, &h);
    let expected = u.matrix() * rho.matrix() * u.matrix().adjoint();
    assert!(linalg::max_abs(&(ok.matrix() - expected)) < 1e-14);
}

#[test]
fn dressed_blocks_agree_with_rk4_on_scenario_a() {
    let h = hilbert(30);
    let p = cat2_profile();
    let diss = CavityParams::default().dissipator();
    let field = fock::ideal_mfss(c(1.7, 0.0), 2, &[PI / 2.0], &h)
        .unwrap()
        .to_density();
    let atom = AtomPreparation::new(0.45 * PI);
    let dressed = TransitPropagator::numeric(&p, &h, diss, &TransitOptions::default()).unwrap();
    let rk4 = TransitPropagator::numeric(
        &p,
        &h,
        diss,
        &TransitOptions {
            integrator: Integrator::Rk4,
            max_phase_per_step: 0.01,
            loss_slices: 1,
        },
    )
    .unwrap();
    let a = dressed.apply_field(field.matrix(), &atom);
    let b = rk4.apply_field(field.matrix(), &atom);
    let err = linalg::max_abs(&(a - b));
    assert!(err < 1e-5, "dressed vs RK4: {err:e}");
}

#[test]
fn step_halving_check_passes_for_default_steps() {
    let h = hilbert(20);
    let field = fock::coherent_state(c(1.5, 0.0), &h).unwrap().to_density();
    check_convergence(
        &cat2_profile(),
        &h,
        CavityParams::default().dissipator(),
        &TransitOptions::default(),
        field.matrix(),
        &AtomPreparation::new(0.45 * PI),
        1e-4,
    )
    .unwrap();
    // absurdly coarse steps are caught
    let coarse = TransitOptions {
        integrator: Integrator::Rk4,
        max_phase_per_step: 2.0,
        loss_slices: 1,
    };
    let err = check_convergence(
        &cat2_profile(),
        &h,
        CavityParams::default().dissipator(),
        &coarse,
        field.matrix(),
        &AtomPreparation::new(0.45 * PI),
        1e-4,
    );
    assert!(err.is_err());
}

#[test]
fn atom_preparation_amplitudes() {
    let a = AtomPreparation::new(0.45 * PI).amplitudes();
    assert!((a[0] - (0.225 * PI).cos()).abs() < 1e-15);
    assert!((a[1] - (0.225 * PI).sin()).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn kerr_conjugation_identity(theta in -8.0f64..8.0, phi0 in -4.0f64..4.0) {
        let h = hilbert(20);
        let lhs = u_composite(theta, phi0, &h);
        let rhs = &(&kerr_conjugator(phi0, -1.0, &h) * &u_resonant(theta, &h)) * &kerr_conjugator(phi0, 1.0, &h);
        prop_assert!(linalg::max_abs(&(lhs.matrix() - rhs.matrix())) < 1e-12);
    }

    #[test]
    fn analytic_propagators_are_unitary(theta in -8.0f64..8.0, phi0 in -4.0f64..4.0) {
        let h = hilbert(20);
        prop_assert!(u_resonant(theta, &h).unitarity_error() < 1e-10);
        prop_assert!(u_dispersive(phi0, &h).unitarity_error() < 1e-10);
        prop_assert!(u_composite(theta, phi0, &h).unitarity_error() < 1e-10);
    }

    #[test]
    fn detuning_is_odd_outside_resonant_window(x in 0.0f64..1.0) {
        let p = cat2_profile();
        let t = 0.5 * p.t_r + x * (p.end() - 0.5 * p.t_r);
        if t > 0.5 * p.t_r {
            prop_assert_eq!(detuning_schedule(-t, &p).unwrap(), -detuning_schedule(t, &p).unwrap());
        }
    }
}
