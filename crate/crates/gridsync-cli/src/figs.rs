//! Reproduction harness: one directory per figure, each with CSV, SVG and
//! a `check.txt` PASS/FAIL line, plus a summary table at the root.

use std::path::Path;

use gridsync::devices::{swing_char_gfl, DeviceParams, GflParams, GfmParams, SwingCoefficients};
use gridsync::dqframe::OperatingPoint;
use gridsync::network::{Device, NetworkTopology};
use gridsync::smallsignal::{preset, SiibCase, Verdict};
use gridsync::timedomain::{fault_case, oscillation_hz, sweep_step_case, Action, Event, SimConfig};
use gridsync::transient::{max_decel_area, sep_uep, swing_ode, TwoInverterCase};
use gridsync::C64;

use crate::commands::{self, TransientJson};
use crate::config;
use crate::error::{CliError, Result};
use crate::output::{Cell, OutDir, Plot, RunManifest, Series};

/// Figure directories in run order.
pub const FIGURES: [&str; 10] =
    ["swing", "fig7", "fig8", "fig9", "fig11", "fig12", "fig13", "fig14", "fig15", "power_angle"];

/// Outcome of one figure.
#[derive(Clone, Debug, PartialEq)]
pub struct FigResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

type Check = Result<(bool, String)>;

/// Run the selected figures into `root`. A failing figure is recorded and
/// the run continues; only an unknown `--only` name or an unwritable root
/// is an error.
pub fn paper_figs(root: &Path, data: &Path, only: Option<&str>) -> Result<Vec<FigResult>> {
    let selected: Vec<&str> = match only {
        None => FIGURES.to_vec(),
        Some(o) => {
            let names: Vec<&str> = o.split(',').map(str::trim).collect();
            if let Some(bad) = names.iter().find(|n| !FIGURES.contains(n)) {
                return Err(CliError::Input(format!("--only: unknown figure {bad:?} (known: {})", FIGURES.join(", "))));
            }
            FIGURES.iter().copied().filter(|f| names.contains(f)).collect()
        }
    };
    let mut out = OutDir::create(root)?;
    let mut results = Vec::new();
    for name in selected {
        let mut dir = out.subdir(name)?;
        let checked = match name {
            "swing" => swing(&mut dir),
            "fig7" => loci(&mut dir, ["gfm-grid-scale", "gfl-grid-scale"]),
            "fig8" => loci(&mut dir, ["gfm-droop", "gfl-pll-bandwidth"]),
            "fig9" => loci(&mut dir, ["gfm-v-loop", "gfl-i-loop"]),
            "fig11" => fig11(&mut dir, data),
            "fig12" => fig12(&mut dir, data),
            "fig13" => fig13(&mut dir),
            "fig14" => fig14(&mut dir, data),
            "fig15" => fig15(&mut dir, data),
            _ => power_angle(&mut dir),
        };
        let (pass, detail) = match checked {
            Ok(r) => r,
            Err(e) => (false, e.to_string()),
        };
        dir.write_text("check.txt", &format!("{} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" }))?;
        out.adopt(name, &dir);
        results.push(FigResult { name: name.into(), pass, detail });
    }
    let rows: Vec<Vec<Cell>> = results
        .iter()
        .map(|r| {
            vec![Cell::from(r.name.as_str()), (if r.pass { "PASS" } else { "FAIL" }).into(), r.detail.as_str().into()]
        })
        .collect();
    out.write_csv("summary.csv", &["figure", "result", "detail"], &rows)?;
    let text: String = results
        .iter()
        .map(|r| format!("{:<12} {}  {}\n", r.name, if r.pass { "PASS" } else { "FAIL" }, r.detail))
        .collect();
    out.write_text("summary.txt", &text)?;
    let mut m = RunManifest::new("paper-figs", root);
    m.inputs = ["ieee14.json", "island_gfl.json", "two_gfl_fault.json"]
        .iter()
        .map(|f| data.join(f).display().to_string())
        .collect();
    m.param("only", only.unwrap_or("all"));
    out.write_manifest(&m)?;
    Ok(results)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

// Ideal-source swing coefficients against hand-evaluated formulas, and the
// PLL double root against the quadratic formula on s² + kp·s + ki.
fn swing(out: &mut OutDir) -> Check {
    let gfm = GfmParams::default();
    let op = OperatingPoint::new(1.0, 0.0, -0.8, -0.2);
    let c = SwingCoefficients::gfm(&gfm, &op)?;
    let mt = gfm.m * gfm.omega0;
    let want_gfm = [(1.0 / gfm.omega_f) / mt, 1.0 / mt, -op.i_q0];
    let gfl = GflParams::default();
    let opl = OperatingPoint::new(1.0, 0.0, -0.8, 0.0);
    let l = SwingCoefficients::gfl(&gfl, &opl)?;
    let want_gfl = [1.0 / gfl.ki, gfl.kp * opl.v_d0 / gfl.ki, opl.v_d0];
    let mut rows = Vec::new();
    let mut exact = true;
    for (dev, got, want) in [("gfm", [c.j, c.k_d, c.k_s], want_gfm), ("gfl", [l.j, l.k_d, l.k_s], want_gfl)] {
        for (k, name) in ["J", "K_D", "K_S"].iter().enumerate() {
            exact &= got[k] == want[k];
            rows.push(vec![Cell::from(dev), (*name).into(), got[k].into(), want[k].into()]);
        }
    }
    out.write_csv("coefficients.csv", &["device", "coefficient", "computed", "formula"], &rows)?;

    let mut roots = Vec::new();
    let mut worst: f64 = 0.0;
    for f in [5.0, 10.0, 15.0, 30.0, 60.0] {
        let p = GflParams::default().with_pll_bandwidth(gridsync::hz(f));
        let got = swing_char_gfl(&p, &opl)?.zeros()?;
        let (b, cc) = (p.kp * opl.v_d0, p.ki * opl.v_d0);
        let disc = b * b - 4.0 * cc;
        let oracle = [(-b + disc.max(0.0).sqrt()) / 2.0, (-b - disc.max(0.0).sqrt()) / 2.0];
        for (z, o) in got.iter().zip(oracle) {
            let e = (*z - C64::new(o, 0.0)).norm() / o.abs();
            worst = worst.max(e);
            roots.push(vec![Cell::from(f), z.re.into(), z.im.into(), o.into(), e.into()]);
        }
        if got.len() != 2 {
            return Ok((false, format!("S_vθ has {} zeros at {f} Hz, expected 2", got.len())));
        }
    }
    out.write_csv("pll_double_root.csv", &["omega_pll_hz", "re", "im", "quadratic_formula", "rel_err"], &roots)?;
    let pass = exact && worst < 1e-10;
    Ok((pass, format!("coefficients exact = {exact}; double root max rel err {worst:.2e} (tol 1e-10)")))
}

// Root loci of two presets with the endpoint verdict check, and a step run
// of each into the end value for a time-domain view of the same mode.
fn loci(out: &mut OutDir, names: [&str; 2]) -> Check {
    let mut pass = true;
    let mut notes = Vec::new();
    let mut rows = Vec::new();
    for name in names {
        let spec = preset(name)?;
        let mut sub = out.subdir(name)?;
        let locus = commands::rootlocus(&spec, &mut sub)?;
        let (first, last) = (&locus[0].1, &locus[locus.len() - 1].1);
        let ok = first.verdict == Verdict::Stable && last.verdict == Verdict::Unstable;
        pass &= ok;
        let (dev_end, c_end) = spec.at(spec.end);
        let end = SiibCase::new(dev_end, c_end)?.report()?;
        let cfg = SimConfig { duration: 0.8, decimation: 5, ..SimConfig::default() };
        let tr = sweep_step_case(&spec, 0.2, 0.4, &cfg)?;
        commands::write_traces(&tr, &mut sub, "step", &format!("{name}: step to {} and back", spec.end))?;
        let est = oscillation_hz(&tr.t, &tr.devices[0].f_hz, 0.2, 0.4, 200.0).unwrap_or(f64::NAN);
        out.adopt(name, &sub);
        rows.push(vec![
            Cell::from(name),
            spec.start.into(),
            first.verdict.as_str().into(),
            first.dominant.re.into(),
            spec.end.into(),
            last.verdict.as_str().into(),
            last.dominant.re.into(),
            end.frequency_hz.into(),
            est.into(),
        ]);
        notes.push(format!(
            "{name}: {} at {} -> {} at {} (max Re {:.3} -> {:.3})",
            first.verdict.as_str(),
            spec.start,
            last.verdict.as_str(),
            spec.end,
            first.dominant.re,
            last.dominant.re
        ));
    }
    out.write_csv(
        "endpoints.csv",
        &[
            "preset",
            "start",
            "start_verdict",
            "start_max_re",
            "end",
            "end_verdict",
            "end_max_re",
            "end_mode_hz",
            "step_run_hz",
        ],
        &rows,
    )?;
    Ok((pass, notes.join("; ")))
}

fn fig11(out: &mut OutDir, data: &Path) -> Check {
    let sc = config::load_scenario(&data.join("island_gfl.json"))?;
    let (tr, ph) = commands::island(&sc, out)?;
    let vd_ok = (ph.v_d_phase1 - 0.5).abs() <= 0.05;
    let settle_ok = ph.settle_time.is_some_and(|s| s <= 0.2);
    let pass = tr.diverged_at.is_none() && vd_ok && ph.increasing_phase2 && settle_ok;
    Ok((
        pass,
        format!(
            "v_d phase 1 = {:.4} (0.5 ± 10%); f rises {:.3} -> {:.3} Hz, increasing = {}; settled {} after the PLL change",
            ph.v_d_phase1,
            ph.f_phase2.0,
            ph.f_phase2.1,
            ph.increasing_phase2,
            ph.settle_time.map(|s| format!("{s:.3} s")).unwrap_or("never".into())
        ),
    ))
}

const WEAK_LINES: [(usize, usize); 2] = [(1, 2), (1, 5)];

fn load_14(data: &Path) -> Result<(NetworkTopology, Vec<Device>)> {
    config::load_topology(&data.join("ieee14.json"))
}

fn fig12(out: &mut OutDir, data: &Path) -> Check {
    let (top, devs) = load_14(data)?;
    let base = commands::poles(top.clone(), devs.clone(), out, "poles_base")?;
    let mut short = top.clone();
    config::scale_lines(&mut short, &WEAK_LINES, 0.2)?;
    let scaled = commands::poles(short.clone(), devs.clone(), out, "poles_scaled")?;
    let f = scaled.frequency_hz;
    let band = (17.3 * 0.7, 17.3 * 1.3);
    let pass = base.verdict == Verdict::Stable
        && scaled.verdict == Verdict::Unstable
        && scaled.dominant.im.abs() > 1e-6
        && f >= band.0
        && f <= band.1;

    // time-domain view: shorten the lines at 0.3 s, restore them at 0.7 s
    let mut events = Vec::new();
    for (time, t) in [(0.3, &short), (0.7, &top)] {
        for &(a, b) in &WEAK_LINES {
            let l = &t.lines[t.line_index(a, b)?];
            events.push(Event { time, action: Action::SetLine { from: a, to: b, r: l.r, x: l.x } });
        }
    }
    let sc = commands::scenario(top, devs, events, SimConfig { duration: 1.2, decimation: 50, ..SimConfig::default() });
    let tr = commands::run_scenario(&sc)?;
    commands::write_traces(&tr, out, "traces", "14-bus: weak lines shortened 0.3 to 0.7 s")?;
    let est = oscillation_hz(&tr.t, &tr.devices[0].f_hz, 0.3, 0.7, 100.0).unwrap_or(f64::NAN);
    Ok((
        pass,
        format!(
            "base {} (max Re {:.3}); one-fifth {} at {:.3}{:+.3}j, {f:.2} Hz (band {:.2}-{:.2}); time-domain estimate {est:.2} Hz",
            base.verdict.as_str(),
            base.dominant.re,
            scaled.verdict.as_str(),
            scaled.dominant.re,
            scaled.dominant.im.abs(),
            band.0,
            band.1
        ),
    ))
}

fn fig13(out: &mut OutDir) -> Check {
    let rep = commands::transient(&TransientJson::default(), out)?;
    let (sep1, sep2) = rep.swap.ok_or_else(|| CliError::Numerical("inertia swap produced no SEPs".into()))?;
    let fin = rep.trajectory.theta.last().copied().unwrap_or(f64::NAN).to_degrees();
    let (a, b) = (sep1.to_degrees(), sep2.to_degrees());
    let pass = !rep.trajectory.diverged && a > 0.0 && a < 90.0 && b > -90.0 && b < 0.0 && fin > -90.0 && fin < 0.0;
    Ok((pass, format!("SEP1 {a:.2}° in (0°, 90°), SEP2 {b:.2}° in (-90°, 0°), final θ {fin:.2}°")))
}

fn fig14(out: &mut OutDir, data: &Path) -> Check {
    let sc = config::load_scenario(&data.join("two_gfl_fault.json"))?;
    let tr = commands::run_scenario(&sc)?;
    commands::write_traces(&tr, out, "traces", "Two GFLs: fault and re-synchronization")?;
    if tr.devices.len() < 2 {
        return Err(CliError::Input("two_gfl_fault.json needs two devices".into()));
    }
    let (a, b) = (&tr.devices[0], &tr.devices[1]);
    let diff: Vec<f64> = (0..tr.t.len()).map(|k| (b.theta[k] - a.theta[k]).to_degrees()).collect();
    let rows: Vec<Vec<Cell>> = tr.t.iter().zip(&diff).map(|(&t, &d)| vec![t.into(), d.into()]).collect();
    out.write_csv("angle_difference.csv", &["t", "theta_diff_deg"], &rows)?;
    let mut p = Plot::new("Angle difference gfl2 − gfl1", "t (s)", "Δθ (deg)");
    p.series.push(Series::line("Δθ", tr.t.iter().copied().zip(diff.iter().copied()).collect()));
    out.write_text("angle_difference.svg", &p.render())?;
    let k1 = tr.index_at(1.0);
    let (pre, post) = (diff[0], diff[k1]);
    let pass = tr.diverged_at.is_none() && tr.t[k1] >= 1.0 - 1e-9 && (post - pre).abs() < 5.0;
    Ok((
        pass,
        format!(
            "angle difference {pre:.3}° before, {post:.3}° at 1 s (limit 5°); diverged = {}",
            tr.diverged_at.is_some()
        ),
    ))
}

// Fault at bus 6 for three periods. Droop pair with uniform m; PLL pair
// with the integral gain scaled on a uniform m = 0.015 base.
fn fig15(out: &mut OutDir, data: &Path) -> Check {
    let (top, devs) = load_14(data)?;
    let cases: [(&str, f64, f64, bool); 4] = [
        ("m0.01", 0.01, 1.0, true),
        ("m0.08", 0.08, 1.0, false),
        ("ki_div10", 0.015, 0.1, true),
        ("ki_x10", 0.015, 10.0, false),
    ];
    let runs: Vec<Result<(gridsync::timedomain::SimTrace, bool)>> = std::thread::scope(|s| {
        let handles: Vec<_> = cases
            .iter()
            .map(|&(_, m, ks, _)| {
                let (top, mut devs) = (top.clone(), devs.clone());
                s.spawn(move || -> Result<_> {
                    for d in devs.iter_mut() {
                        match d.params {
                            DeviceParams::Gfm(_) => d.params.set_param("m", m)?,
                            DeviceParams::Gfl(p) => d.params.set_param("ki", p.ki * ks)?,
                        }
                    }
                    let cfg = SimConfig { duration: 1.5, decimation: 50, ..SimConfig::default() };
                    let sc = commands::scenario(top, devs, fault_case(6, 0.2, 3).to_vec(), cfg);
                    let tr = commands::run_scenario(&sc)?;
                    let ok = commands::recovered(&tr, 1.2).recovered;
                    Ok((tr, ok))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(CliError::Numerical("worker panicked".into()))))
            .collect()
    });
    let mut pass = true;
    let mut notes = Vec::new();
    let mut rows = Vec::new();
    for ((name, m, ks, want), run) in cases.iter().zip(runs) {
        let (tr, ok) = run?;
        commands::write_traces(&tr, out, name, &format!("14-bus fault at bus 6: {name}"))?;
        let rec = commands::recovered(&tr, 1.2);
        pass &= ok == *want;
        notes.push(format!("{name} {}", if ok { "recovers" } else { "does not recover" }));
        rows.push(vec![
            Cell::from(*name),
            (*m).into(),
            (*ks).into(),
            (if ok { "yes" } else { "no" }).into(),
            (if *want { "yes" } else { "no" }).into(),
            rec.max_angle_shift.into(),
            rec.max_freq_dev_hz.into(),
        ]);
    }
    out.write_csv(
        "outcomes.csv",
        &["case", "m", "ki_scale", "recovered", "expected", "max_angle_shift_rad", "late_freq_dev_hz"],
        &rows,
    )?;
    Ok((pass, notes.join(", ")))
}

// Undamped energy drift over 10 s and closed-form MDA against quadrature.
fn power_angle(out: &mut OutDir) -> Check {
    let gfm = GfmParams::default();
    let j_gfm = (1.0 / gfm.omega_f) / (gfm.m * gfm.omega0);
    let gfl = GflParams::default();
    let cases = [
        ("gfm_gfm", TwoInverterCase::gfm_gfm(1.0, 1.0, 0.5, 0.4, -0.4, j_gfm, 1.0 / (gfm.m * gfm.omega0))?),
        ("gfl_gfl", TwoInverterCase::gfl_gfl(1.0, 0.8, 1.0, 0.1, -0.2, 1.0 / gfl.ki, gfl.kp / gfl.ki)?),
    ];
    let mut worst_e: f64 = 0.0;
    let mut worst_a: f64 = 0.0;
    let mut rows = Vec::new();
    for (name, case) in cases {
        let mut sub = out.subdir(name)?;
        let (sep, uep) = sep_uep(&case)?;
        let mda = max_decel_area(&case)?;
        let quad = quadrature::integrate(|t| case.s(t) - case.s_ref, sep, uep, 1e-14).integral;
        let ea = rel_err(mda, quad);
        let free = case.undamped();
        let th0 = sep + 0.5;
        let tr = swing_ode(&free, th0, 0.0, 10.0, 1e-4, 1e6)?;
        let e0 = free.energy(th0, 0.0);
        let ee = tr.theta.iter().zip(&tr.dtheta).map(|(&t, &w)| rel_err(free.energy(t, w), e0)).fold(0.0, f64::max);
        let rows_e: Vec<Vec<Cell>> = (0..tr.t.len())
            .step_by(100)
            .map(|k| {
                vec![
                    tr.t[k].into(),
                    tr.theta[k].to_degrees().into(),
                    tr.dtheta[k].into(),
                    free.energy(tr.theta[k], tr.dtheta[k]).into(),
                ]
            })
            .collect();
        sub.write_csv("undamped.csv", &["t", "theta_deg", "dtheta_rad_s", "energy"], &rows_e)?;
        let cfg = match name {
            "gfm_gfm" => TransientJson::GfmGfm {
                v1: 1.0,
                v2: 1.0,
                x: 0.5,
                p1_ref: 0.4,
                p2_ref: -0.4,
                j: case.j,
                k_d: case.k_d,
                theta0_deg: Some(th0.to_degrees()),
                dtheta0: 0.0,
                duration: 2.0,
            },
            _ => TransientJson::GflGfl {
                i1: 1.0,
                i2: 0.8,
                g: 1.0,
                q1_ref: 0.1,
                q2_ref: -0.2,
                j: case.j,
                k_d: case.k_d,
                theta0_deg: Some(th0.to_degrees()),
                dtheta0: 0.0,
                duration: 2.0,
            },
        };
        commands::transient(&cfg, &mut sub)?;
        out.adopt(name, &sub);
        worst_e = worst_e.max(ee);
        worst_a = worst_a.max(ea);
        rows.push(vec![Cell::from(name), sep.into(), uep.into(), mda.into(), quad.into(), ea.into(), ee.into()]);
    }
    out.write_csv(
        "mda.csv",
        &["case", "sep_rad", "uep_rad", "mda_closed", "mda_quadrature", "rel_err", "energy_drift"],
        &rows,
    )?;
    let pass = worst_e < 1e-6 && worst_a < 1e-9;
    Ok((pass, format!("energy drift {worst_e:.2e} over 10 s (tol 1e-6); MDA vs quadrature {worst_a:.2e} (tol 1e-9)")))
}
