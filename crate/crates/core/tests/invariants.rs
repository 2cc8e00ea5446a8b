use std::f64::consts::PI;
use std::sync::Arc;

use paraxial_core::hydro::{march_fixed, HydroOptions, HydroScheme};
use paraxial_core::kuznetsov::{density_correctors, kuznetsov_residuals, PotentialState};
use paraxial_core::kzk::{gaussian_beam, solve_kzk, tau_mean_defect, TrigProfile, TrigTerm};
use paraxial_core::kzk::paraxial_operator_identity_check;
use paraxial_core::npe::solve_npe;
use paraxial_core::validate::{l2_diff_states, scaling_fit};
use paraxial_core::{Axis, ConeSpec, ConservedState, Field, Grid, ModelParams};
use proptest::prelude::*;

fn plane(nx2: usize, nx1: usize, l2: f64, l1: f64) -> Arc<Grid> {
    Grid::new(vec![Axis::periodic("x2", nx2, l2), Axis::periodic("x1", nx1, l1)]).unwrap()
}

/// A few random low modes `Σ a cos(k₂x₂ + k₁x₁ + φ)` on the 2π-periodic plane.
fn trig_field(grid: &Arc<Grid>, modes: &[(f64, i32, i32, f64)]) -> Field {
    Field::from_fn(grid.clone(), |x| modes.iter().map(|&(a, k2, k1, ph)| a * (k2 as f64 * x[0] + k1 as f64 * x[1] + ph).cos()).sum())
        .unwrap()
}

fn modes() -> impl Strategy<Value = Vec<(f64, i32, i32, f64)>> {
    prop::collection::vec((-0.1f64..0.1, -3i32..=3, -3i32..=3, 0.0f64..(2.0 * PI)), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn matched_correctors_cancel_momentum_brackets(phi in modes(), phi_t in modes(), eps in 0.01f64..0.3, nu in 0.0f64..0.5) {
        let grid = plane(32, 32, 2.0 * PI, 2.0 * PI);
        let p = ModelParams { rho0: 1.2, c: 1.5, gamma: 1.4, nu, eps, period: 2.0 * PI };
        let s = PotentialState::new(trig_field(&grid, &phi), trig_field(&grid, &phi_t), 0.0).unwrap();
        let zero = Field::zeros(grid.clone());
        let (rho1, rho2) = density_correctors(&s, &p).unwrap();
        let (_, matched) = kuznetsov_residuals(&s, &zero, &rho1, &rho2, &p).unwrap();
        let (_, bare) = kuznetsov_residuals(&s, &zero, &zero, &zero, &p).unwrap();
        let scale = bare.iter().map(Field::max_abs).fold(0.0, f64::max);
        prop_assume!(scale > 1e-8);
        let worst = matched.iter().map(Field::max_abs).fold(0.0, f64::max);
        prop_assert!(worst / scale < 1e-10, "relative residual {}", worst / scale);
    }

    #[test]
    fn scaling_fit_recovers_planted_exponent(slope in 0.5f64..4.0, log_c in -5.0f64..5.0, noise in prop::collection::vec(-1e-3f64..1e-3, 4)) {
        let eps = [0.2f64, 0.1, 0.05, 0.025];
        let pairs: Vec<(f64, f64)> = eps.iter().zip(&noise).map(|(e, n)| (*e, (log_c + slope * e.ln() + n).exp())).collect();
        let r = scaling_fit(&pairs).unwrap();
        prop_assert!((r.fitted_slope - slope).abs() < 5e-3);
        prop_assert!(r.residual_of_fit < 2e-3);
    }

    #[test]
    fn cone_difference_is_symmetric_and_zero_on_itself(a in modes(), b in modes(), t in 0.0f64..2.0) {
        let grid = plane(16, 64, 2.0 * PI, 40.0);
        let state = |m: &[(f64, i32, i32, f64)]| {
            let rho = trig_field(&grid, m).map(|v| 1.0 + 0.5 * v).unwrap();
            let mom = vec![trig_field(&grid, m).scale(0.3).unwrap(), trig_field(&grid, m)];
            ConservedState::new(rho, mom).unwrap()
        };
        let (ua, ub) = (state(&a), state(&b));
        let spec = ConeSpec::new(1.0, 1.2, 0.1, 20.0).unwrap();
        let ab = l2_diff_states(&ua, &ub, &spec, t).unwrap();
        let ba = l2_diff_states(&ub, &ua, &spec, t).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(l2_diff_states(&ua, &ua, &spec, t).unwrap(), 0.0);
    }

    #[test]
    fn kzk_and_npe_keep_zero_mean(amp in 0.01f64..0.3, width in 0.5f64..2.0, nu in 0.0f64..0.05) {
        let grid = Grid::new(vec![Axis::periodic("y", 16, 8.0), Axis::periodic("tau", 32, 1.0)]).unwrap();
        let p = ModelParams::nondim(0.1).with_nu(nu);
        let i0 = gaussian_beam(&grid, amp, width).unwrap();
        for s in &solve_kzk(&i0, &p, 0.2, 0.002).unwrap().slices {
            prop_assert!(tau_mean_defect(&s.values[0]).unwrap() < 1e-12);
        }
        let ngrid = Grid::new(vec![Axis::periodic("y", 16, 8.0), Axis::periodic("z", 32, 1.0)]).unwrap();
        let q0 = gaussian_beam(&ngrid, amp, width).unwrap();
        for s in &solve_npe(&q0, &p, 0.2, 0.002).unwrap().slices {
            prop_assert!(tau_mean_defect(&s.values[0]).unwrap() < 1e-12);
        }
    }
}

#[test]
fn paraxial_identity_holds_on_trig_profiles() {
    let term = |amplitude, tau_rate, z_rate, ky: f64, phase| TrigTerm { amplitude, tau_rate, z_rate, y_rates: vec![ky], phase };
    let profiles = [
        vec![term(1.0, 2.0 * PI, 0.0, 0.0, 0.0)],
        vec![term(0.7, 2.0 * PI, 1.3, 0.8, 0.2)],
        vec![term(1.0, 4.0 * PI, -0.5, 1.5, 1.0), term(0.3, 2.0 * PI, 2.0, -0.7, 0.0)],
        vec![term(0.2, 6.0 * PI, 0.4, 2.5, 2.2), term(0.5, 2.0 * PI, -1.1, 0.0, 0.4), term(0.1, 8.0 * PI, 3.0, 1.0, 0.0)],
        vec![term(2.0, 2.0 * PI, 0.25, 3.0, -0.3)],
    ];
    for (k, terms) in profiles.into_iter().enumerate() {
        for p in [ModelParams::nondim(0.1), ModelParams::nondim(0.02).with_nu(0.1), ModelParams { c: 1.7, ..ModelParams::nondim(0.2) }] {
            let d = paraxial_operator_identity_check(&TrigProfile { terms: terms.clone() }, &p);
            assert!(d < 1e-10, "profile {k}: discrepancy {d:e}");
        }
    }
}

fn conservation_drift(scheme: HydroScheme) -> (f64, f64) {
    let grid = plane(16, 32, 4.0, 8.0);
    let p = ModelParams::nondim(0.1).with_nu(0.05);
    let rho = Field::from_fn(grid.clone(), |x| 1.0 + 0.02 * (PI * x[1] / 4.0).sin() * (PI * x[0] / 2.0).cos()).unwrap();
    let m1 = Field::from_fn(grid.clone(), |x| 0.02 * (PI * x[1] / 4.0).sin() + 0.01).unwrap();
    let m2 = Field::from_fn(grid.clone(), |x| 0.01 * (PI * x[0] / 2.0).sin()).unwrap();
    let u0 = ConservedState::new(rho, vec![m2, m1]).unwrap();
    let opts = HydroOptions { scheme, cfl: 0.5, viscous: true };
    let (_, ledger) = march_fixed(&u0, &p, 0.02, 10_000, &opts).unwrap();
    let first = ledger[0];
    let mass_scale = first.mass;
    let mom_scale = first.momentum.iter().map(|m| m.abs()).fold(0.0, f64::max).max(1e-3 * mass_scale);
    let mut worst = (0.0f64, 0.0f64);
    for row in &ledger {
        worst.0 = worst.0.max((row.mass - first.mass).abs() / mass_scale);
        for d in 0..2 {
            worst.1 = worst.1.max((row.momentum[d] - first.momentum[d]).abs() / mom_scale);
        }
    }
    worst
}

#[test]
fn hydro_conserves_mass_and_momentum_over_ten_thousand_steps() {
    for scheme in [HydroScheme::Muscl, HydroScheme::Pseudospectral] {
        let (mass, mom) = conservation_drift(scheme);
        assert!(mass < 1e-12, "{scheme:?}: relative mass drift {mass:e}");
        assert!(mom < 1e-12, "{scheme:?}: relative momentum drift {mom:e}");
    }
}
