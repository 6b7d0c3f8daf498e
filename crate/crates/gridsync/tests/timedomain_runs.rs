use gridsync::network::{ieee14, siib, Ieee14Options};
use gridsync::smallsignal::{preset, SiibCase};
use gridsync::timedomain::*;

#[test]
fn island_gfl_three_phases() {
    let tr = island_gfl_case().unwrap();
    assert!(tr.diverged_at.is_none());
    let ph = island_phases(&tr, 0.4, 0.8, 5e-3).unwrap();
    assert!((ph.v_d_phase1 - 0.5).abs() <= 0.05, "v_d = {}", ph.v_d_phase1);
    assert!(ph.increasing_phase2, "{ph:?}");
    assert!(ph.f_phase2.1 > ph.f_phase2.0 + 1.0);
    let settle = ph.settle_time.expect("frequency never settles");
    assert!(settle <= 0.2, "settled after {settle} s");
}

#[test]
fn two_gfl_island_resynchronizes() {
    let tr = two_gfl_fault_case().unwrap();
    assert!(tr.diverged_at.is_none());
    let (a, b) = (&tr.devices[0], &tr.devices[1]);
    let k = tr.index_at(1.0);
    let pre = (b.theta[0] - a.theta[0]).to_degrees();
    let post = (b.theta[k] - a.theta[k]).to_degrees();
    assert!((post - pre).abs() < 5.0, "{pre}° -> {post}°");
}

fn fault14(opt: Ieee14Options) -> Recovery {
    let (top, devs) = ieee14(&opt);
    let cfg = SimConfig { duration: 1.5, decimation: 50, ..SimConfig::default() };
    recovery(&simulate(top, devs, &fault_case(6, 0.2, 3), &cfg).unwrap(), 1.2)
}

#[test]
fn droop_gain_decides_fault_recovery() {
    assert!(fault14(Ieee14Options { gfm_m: [0.01; 3], ..Default::default() }).recovered);
    assert!(!fault14(Ieee14Options { gfm_m: [0.08; 3], ..Default::default() }).recovered);
}

#[test]
fn pll_integral_gain_decides_fault_recovery() {
    let base = Ieee14Options { gfm_m: [0.015; 3], ..Default::default() };
    assert!(fault14(Ieee14Options { gfl_ki_scale: 0.1, ..base }).recovered);
    assert!(!fault14(Ieee14Options { gfl_ki_scale: 10.0, ..base }).recovered);
}

#[test]
fn halving_the_step_barely_moves_a_stable_run() {
    let spec = preset("gfm-droop").unwrap();
    let (dev, c) = spec.at(spec.start);
    let events = [Event { time: 0.05, action: Action::StepRef { device: 0, name: "p_ref".into(), value: -0.7 } }];
    let end = |dt: f64| {
        let (top, devs) = siib(dev, c);
        simulate(top, devs, &events, &SimConfig { dt, duration: 0.3, decimation: 100, ..SimConfig::default() })
            .unwrap()
            .final_state
    };
    let (a, b) = (end(2e-5), end(1e-5));
    let d = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(d < 1e-6, "end states differ by {d:e}");
}

#[test]
fn recorded_powers_match_their_definitions() {
    let tr = two_gfl_fault_case().unwrap();
    for d in &tr.devices {
        for k in 0..tr.t.len() {
            assert_eq!(d.p[k], d.v_d[k] * d.i_d[k] + d.v_q[k] * d.i_q[k]);
            assert_eq!(d.q[k], d.v_q[k] * d.i_d[k] - d.v_d[k] * d.i_q[k]);
        }
    }
}

#[test]
fn step_runs_oscillate_at_the_predicted_mode() {
    for name in ["gfl-grid-scale", "gfm-droop", "gfl-pll-bandwidth", "gfl-i-loop"] {
        let spec = preset(name).unwrap();
        let (dev, c) = spec.at(spec.end);
        let want = SiibCase::new(dev, c).unwrap().report().unwrap().frequency_hz;
        let tr = sweep_step_case(&spec, 0.2, 0.4, &SimConfig { duration: 0.6, decimation: 5, ..SimConfig::default() })
            .unwrap();
        let got = oscillation_hz(&tr.t, &tr.devices[0].f_hz, 0.2, 0.4, 200.0).unwrap();
        assert!((got - want).abs() / want < 0.05, "{name}: {got} Hz vs {want} Hz");
        // grows while the parameter is out, decays once it is restored
        let d = &tr.devices[0];
        let amp = |a: f64, b: f64| {
            d.f_hz[tr.index_at(a)..tr.index_at(b)].iter().map(|f| (f - d.f_hz[0]).abs()).fold(0.0, f64::max)
        };
        assert!(amp(0.3, 0.4) > amp(0.2, 0.3), "{name}");
        assert!(amp(0.5, 0.6) < amp(0.3, 0.4), "{name}");
    }
}

#[test]
fn island_equilibrium_is_a_fixed_point() {
    let (top, devs) = island_gfl_system();
    let tr = simulate(top, devs, &[], &SimConfig { duration: 0.2, ..SimConfig::default() }).unwrap();
    let d = &tr.devices[0];
    let spread = d.f_hz.iter().fold(0.0f64, |m, f| m.max((f - d.f_hz[0]).abs()));
    assert!(spread < 1e-6, "{spread}");
}
