use gridsync::transient::*;
use proptest::prelude::*;
use std::f64::consts::PI;

// setpoints are drawn as a fraction of the curve amplitude so an SEP exists
fn any_case() -> impl Strategy<Value = TwoInverterCase> {
    let gfm = (0.2..2.0f64, -0.9..0.9f64, 1e-3..0.5f64)
        .prop_map(|(x, r, j)| TwoInverterCase::gfm_gfm(1.0, 1.0, x, r / (2.0 * x), -r / (2.0 * x), j, 0.0).unwrap());
    let gfl = (0.5..1.2f64, 0.5..2.0f64, -0.9..0.9f64, 1e-3..0.5f64)
        .prop_map(|(i2, g, r, j)| TwoInverterCase::gfl_gfl(1.0, i2, g, -r * i2 / g, 0.0, j, 0.0).unwrap());
    let mixed = (0.5..1.0f64, -0.9..0.9f64, 1e-3..0.1f64).prop_map(|(i1, r, j)| {
        TwoInverterCase::gfm_gfl(i1, 1.0, 0.1, -0.2, r * i1, f64::INFINITY, j, 1.0, 1.0).unwrap()
    });
    prop_oneof![gfm, gfl, mixed]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn undamped_energy_is_conserved(case in any_case(), f in 0.05..0.5f64) {
        let case = case.undamped();
        let (sep, uep) = sep_uep(&case).unwrap();
        let th0 = sep + f * (uep - sep);
        let w = (case.ds(sep) / case.j).sqrt();
        let dt = (0.01 / w).min(1e-3);
        let tr = swing_ode(&case, th0, 0.0, 10.0, dt, 1e9).unwrap();
        let e0 = case.energy(th0, 0.0);
        let scale = e0.abs().max(case.amplitude);
        for (t, w) in tr.theta.iter().zip(&tr.dtheta) {
            let e = case.energy(*t, *w);
            prop_assert!((e - e0).abs() / scale < 1e-6, "energy {e} vs {e0}");
        }
    }

    #[test]
    fn mda_matches_quadrature(case in any_case()) {
        let (sep, uep) = sep_uep(&case).unwrap();
        let closed = max_decel_area(&case).unwrap();
        let quad = quadrature::integrate(|t| case.s(t) - case.s_ref, sep, uep, 1e-14).integral;
        prop_assert!((closed - quad).abs() <= 1e-9 * quad.abs().max(1e-3), "{closed} vs {quad}");
    }

    #[test]
    fn small_oscillation_frequency(case in any_case()) {
        let case = case.undamped();
        let (sep, _) = sep_uep(&case).unwrap();
        let w = (case.ds(sep) / case.j).sqrt();
        let period = 2.0 * PI / w;
        let dt = period / 2000.0;
        let tr = swing_ode(&case, sep + 1e-4, 0.0, 5.0 * period, dt, 1e9).unwrap();
        // downward zero crossings of θ − SEP, linearly interpolated
        let mut cross = Vec::new();
        for k in 1..tr.t.len() {
            let (a, b) = (tr.theta[k - 1] - sep, tr.theta[k] - sep);
            if a > 0.0 && b <= 0.0 {
                cross.push(tr.t[k - 1] + dt * a / (a - b));
            }
        }
        prop_assert!(cross.len() >= 3);
        let measured = (cross[cross.len() - 1] - cross[0]) / (cross.len() - 1) as f64;
        prop_assert!((measured - period).abs() / period < 0.01, "{measured} vs {period}");
    }
}

fn sine(s_ref: f64) -> TwoInverterCase {
    TwoInverterCase::gfm_gfm(1.0, 1.0, 1.0, s_ref / 2.0, -s_ref / 2.0, 0.1, 0.0).unwrap()
}

#[test]
fn smaller_sep_angle_means_larger_mda() {
    let mut last: Option<(f64, f64)> = None;
    for k in 0..40 {
        let case = sine(-0.95 + 1.9 * k as f64 / 39.0);
        let (sep, _) = sep_uep(&case).unwrap();
        let a = max_decel_area(&case).unwrap();
        if let Some((s0, a0)) = last {
            assert!(sep > s0 && a < a0, "SEP {s0} -> {sep}, MDA {a0} -> {a}");
        }
        last = Some((sep, a));
    }
}

#[test]
fn sep_perturbation_stays_bounded_uep_perturbation_runs_away() {
    let case = sine(0.5);
    let (sep, uep) = sep_uep(&case).unwrap();
    let near_sep = swing_ode(&case, sep + 1e-3, 0.0, 5.0, 1e-3, 1e6).unwrap();
    assert!(near_sep.theta.iter().all(|t| (t - sep).abs() < 2e-3));
    let near_uep = swing_ode(&case, uep + 1e-3, 0.0, 5.0, 1e-3, 1e6).unwrap();
    assert!(near_uep.theta.iter().any(|t| (t - uep).abs() > 1.0));
}

#[test]
fn pll_gains_to_zero_move_the_angle_to_the_other_quadrant() {
    let out = inertia_swap(&InertiaSwap::default()).unwrap();
    let (a, b) = (out.sep1.to_degrees(), out.sep2.to_degrees());
    assert!(a > 0.0 && a < 90.0, "SEP1 {a}");
    assert!(b > -90.0 && b < 0.0, "SEP2 {b}");
    assert!(!out.trajectory.diverged);
    let fin = out.trajectory.theta.last().unwrap().to_degrees();
    assert!(fin > -90.0 && fin < 0.0, "final θ {fin}");
}

#[test]
fn setpoint_beyond_amplitude_has_no_equilibrium() {
    let case = sine(1.5);
    assert!(equilibria(&case).none);
    assert!(max_decel_area(&case).is_err());
}
