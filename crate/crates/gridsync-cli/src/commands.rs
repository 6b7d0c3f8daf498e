//! Subcommand bodies. Each writes into an [`OutDir`] and returns a
//! short report for the terminal.

use std::path::Path;

use gridsync::linalg;
use gridsync::network::{assemble, Device, NetworkTopology};
use gridsync::smallsignal::{pair_loci, root_locus, ModeReport, SweepSpec};
use gridsync::timedomain::{island_phases, recovery, simulate, Event, IslandPhases, Recovery, SimConfig, SimTrace};
use gridsync::transient::{
    angle_curve, equilibria, inertia_swap, max_decel_area, sep_uep, swing_ode, EqClass, InertiaSwap, SwingTrajectory,
    TwoInverterCase,
};
use serde::{Deserialize, Serialize};

use crate::config::{self, Scenario};
use crate::error::{CliError, Result};
use crate::output::{Cell, OutDir, Plot, Series};

/// Root locus of one sweep: `locus.csv`, `locus.svg`.
pub fn rootlocus(spec: &SweepSpec, out: &mut OutDir) -> Result<Vec<(f64, ModeReport)>> {
    let locus = root_locus(spec)?;
    let mut rows = Vec::new();
    for (v, rep) in &locus {
        for p in &rep.poles {
            let damping = if p.norm() > 0.0 { -p.re / p.norm() } else { 1.0 };
            rows.push(vec![
                Cell::from(*v),
                p.re.into(),
                p.im.into(),
                (p.im.abs() / (2.0 * std::f64::consts::PI)).into(),
                damping.into(),
                rep.verdict.as_str().into(),
            ]);
        }
    }
    out.write_csv("locus.csv", &["param", "re", "im", "freq_hz", "damping", "verdict"], &rows)?;
    let mut plot = Plot::new(&format!("Root locus: {}", spec.name), "Re (1/s)", "Im (rad/s)");
    for (k, track) in pair_loci(&locus).iter().enumerate() {
        // keep the plot readable: only tracks that come within 400 1/s of the axis
        if track.iter().all(|p| p.re < -400.0) {
            continue;
        }
        plot.series.push(Series::dots(&format!("pole {k}"), track.iter().map(|p| (p.re, p.im)).collect()));
    }
    plot.vlines.push(0.0);
    if let (Some(first), Some(last)) = (locus.first(), locus.last()) {
        plot.markers.push((first.1.dominant.re, first.1.dominant.im, format!("{} = {}", spec.param.id(), first.0)));
        plot.markers.push((last.1.dominant.re, last.1.dominant.im, format!("{} = {}", spec.param.id(), last.0)));
    }
    out.write_text("locus.svg", &plot.render())?;
    Ok(locus)
}

/// Whole-system poles: `poles.csv`, `poles.svg`.
pub fn poles(top: NetworkTopology, devices: Vec<Device>, out: &mut OutDir, stem: &str) -> Result<ModeReport> {
    let model = assemble(top, devices)?;
    let ev = linalg::eigenvalues(&model.a)?;
    let rep = ModeReport::from_poles(ev)?;
    let rows: Vec<Vec<Cell>> = rep
        .poles
        .iter()
        .map(|p| {
            let damping = if p.norm() > 0.0 { -p.re / p.norm() } else { 1.0 };
            vec![p.re.into(), p.im.into(), (p.im.abs() / (2.0 * std::f64::consts::PI)).into(), damping.into()]
        })
        .collect();
    out.write_csv(&format!("{stem}.csv"), &["re", "im", "freq_hz", "damping"], &rows)?;
    let mut plot = Plot::new(
        &format!("System poles ({}, dominant {:.2} Hz)", rep.verdict.as_str(), rep.frequency_hz),
        "Re (1/s)",
        "Im (rad/s)",
    );
    let near: Vec<(f64, f64)> =
        rep.poles.iter().filter(|p| p.re > -100.0 && p.im.abs() < 1000.0).map(|p| (p.re, p.im)).collect();
    plot.series.push(Series::dots("poles", near));
    plot.vlines.push(0.0);
    plot.markers.push((rep.dominant.re, rep.dominant.im, "dominant".into()));
    out.write_text(&format!("{stem}.svg"), &plot.render())?;
    Ok(rep)
}

/// Run a scenario from its equilibrium.
pub fn run_scenario(sc: &Scenario) -> Result<SimTrace> {
    Ok(simulate(sc.topology.clone(), sc.devices.clone(), &sc.events, &sc.sim)?)
}

/// Traces: `<stem>.csv`, `<stem>_frequency.svg`, `<stem>_power.svg`.
pub fn write_traces(tr: &SimTrace, out: &mut OutDir, stem: &str, title: &str) -> Result<()> {
    let mut header = vec!["t".to_string()];
    for d in &tr.devices {
        for q in ["f_hz", "theta", "v_d", "v_q", "i_d", "i_q", "p", "q"] {
            header.push(format!("{}_{q}", d.name));
        }
    }
    let rows: Vec<Vec<Cell>> = (0..tr.t.len())
        .map(|k| {
            let mut r = vec![Cell::from(tr.t[k])];
            for d in &tr.devices {
                for v in [d.f_hz[k], d.theta[k], d.v_d[k], d.v_q[k], d.i_d[k], d.i_q[k], d.p[k], d.q[k]] {
                    r.push(v.into());
                }
            }
            r
        })
        .collect();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write_csv(&format!("{stem}.csv"), &h, &rows)?;
    let mut pf = Plot::new(&format!("{title}: frequency"), "t (s)", "f (Hz)");
    let mut pp = Plot::new(&format!("{title}: active power (generated)"), "t (s)", "P (pu)");
    for d in &tr.devices {
        pf.series.push(Series::line(&d.name, tr.t.iter().zip(&d.f_hz).map(|(&t, &f)| (t, f)).collect()));
        pp.series.push(Series::line(&d.name, tr.t.iter().zip(&d.p).map(|(&t, &p)| (t, -p)).collect()));
    }
    if let Some(t) = tr.diverged_at {
        pf.vlines.push(t);
    }
    out.write_text(&format!("{stem}_frequency.svg"), &pf.render())?;
    out.write_text(&format!("{stem}_power.svg"), &pp.render())?;
    Ok(())
}

/// One-line summary of a trace.
pub fn describe(tr: &SimTrace, rec: &Recovery) -> String {
    let mut s = format!(
        "{} samples to t = {:.3} s; recovered = {}, max relative angle shift {:.3} rad, max |Δf| late {:.4} Hz",
        tr.t.len(),
        tr.t.last().copied().unwrap_or(0.0),
        rec.recovered,
        rec.max_angle_shift,
        rec.max_freq_dev_hz
    );
    if let Some(t) = tr.diverged_at {
        s += &format!("; diverged at {t:.4} s");
    }
    s
}

/// Island GFL report.
pub fn island(sc: &Scenario, out: &mut OutDir) -> Result<(SimTrace, IslandPhases)> {
    let tr = run_scenario(sc)?;
    write_traces(&tr, out, "traces", "Island GFL")?;
    let mut times: Vec<f64> = sc.events.iter().map(|e| e.time).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    if times.len() < 2 {
        return Err(CliError::Input("island scenario needs an i_q step and a later PLL change".into()));
    }
    let ph = island_phases(&tr, times[0], times[1], 5e-3)?;
    let rows = vec![
        vec![Cell::from("v_d_phase1"), ph.v_d_phase1.into()],
        vec![Cell::from("f_phase2_start_hz"), ph.f_phase2.0.into()],
        vec![Cell::from("f_phase2_end_hz"), ph.f_phase2.1.into()],
        vec![Cell::from("increasing_phase2"), (if ph.increasing_phase2 { 1.0 } else { 0.0 }).into()],
        vec![Cell::from("settle_time_s"), ph.settle_time.unwrap_or(f64::NAN).into()],
        vec![Cell::from("f_final_hz"), ph.f_final.into()],
    ];
    out.write_csv("phases.csv", &["quantity", "value"], &rows)?;
    Ok((tr, ph))
}

/// Two-inverter case file for `transient`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransientJson {
    InertiaSwap {
        i1: Option<f64>,
        v2: Option<f64>,
        x: Option<f64>,
        q1_ref: Option<f64>,
        p2_ref: Option<f64>,
        pll_bandwidth_hz: Option<f64>,
        m: Option<f64>,
        omega_f_hz: Option<f64>,
        t_switch: Option<f64>,
        duration: Option<f64>,
    },
    GfmGfm {
        v1: f64,
        v2: f64,
        x: f64,
        p1_ref: f64,
        p2_ref: f64,
        j: f64,
        #[serde(default)]
        k_d: f64,
        #[serde(default)]
        theta0_deg: Option<f64>,
        #[serde(default)]
        dtheta0: f64,
        #[serde(default = "ten")]
        duration: f64,
    },
    GflGfl {
        i1: f64,
        i2: f64,
        g: f64,
        q1_ref: f64,
        q2_ref: f64,
        j: f64,
        #[serde(default)]
        k_d: f64,
        #[serde(default)]
        theta0_deg: Option<f64>,
        #[serde(default)]
        dtheta0: f64,
        #[serde(default = "ten")]
        duration: f64,
    },
}

fn ten() -> f64 {
    10.0
}

impl Default for TransientJson {
    fn default() -> Self {
        TransientJson::InertiaSwap {
            i1: None,
            v2: None,
            x: None,
            q1_ref: None,
            p2_ref: None,
            pll_bandwidth_hz: None,
            m: None,
            omega_f_hz: None,
            t_switch: None,
            duration: None,
        }
    }
}

/// Outcome of `transient`.
#[derive(Clone, Debug)]
pub struct TransientReport {
    pub lines: Vec<String>,
    pub trajectory: SwingTrajectory,
    /// `(SEP1, SEP2)` for the inertia swap.
    pub swap: Option<(f64, f64)>,
}

fn curve_plot(case: &TwoInverterCase, title: &str) -> Result<Plot> {
    let c = angle_curve(case, 721);
    let mut p = Plot::new(title, "θ (deg)", "S (pu)");
    if let Ok((sep, uep)) = sep_uep(case) {
        let n = 200;
        let mut poly: Vec<(f64, f64)> = (0..=n)
            .map(|k| {
                let t = sep + (uep - sep) * k as f64 / n as f64;
                (t.to_degrees(), case.s(t))
            })
            .collect();
        poly.push((uep.to_degrees(), case.s_ref));
        poly.push((sep.to_degrees(), case.s_ref));
        // keep the shading inside the plotted (−180°, 180°] window
        if uep.to_degrees() <= 180.0 {
            p.shades.push(poly);
        }
    }
    p.series.push(Series::line("S(θ)", c.theta.iter().zip(&c.s).map(|(t, s)| (t.to_degrees(), *s)).collect()));
    p.series.push(Series::line("S*", vec![(-180.0, case.s_ref), (180.0, case.s_ref)]));
    for (t, cls) in &equilibria(case).points {
        let label = if *cls == EqClass::Sep { "SEP" } else { "UEP" };
        p.markers.push((t.to_degrees(), case.s(*t), format!("{label} {:.1}°", t.to_degrees())));
    }
    Ok(p)
}

fn write_curve(case: &TwoInverterCase, out: &mut OutDir, stem: &str, title: &str) -> Result<()> {
    let c = angle_curve(case, 721);
    let rows: Vec<Vec<Cell>> =
        c.theta.iter().zip(&c.s).map(|(t, s)| vec![t.to_degrees().into(), (*s).into()]).collect();
    out.write_csv(&format!("{stem}.csv"), &["theta_deg", "s_pu"], &rows)?;
    out.write_text(&format!("{stem}.svg"), &curve_plot(case, title)?.render())
}

fn write_trajectory(tr: &SwingTrajectory, out: &mut OutDir, stride: usize) -> Result<()> {
    let idx: Vec<usize> = (0..tr.t.len()).step_by(stride.max(1)).collect();
    let rows: Vec<Vec<Cell>> =
        idx.iter().map(|&k| vec![tr.t[k].into(), tr.theta[k].to_degrees().into(), tr.dtheta[k].into()]).collect();
    out.write_csv("trajectory.csv", &["t", "theta_deg", "dtheta_rad_s"], &rows)?;
    let mut p = Plot::new("Angle trajectory", "t (s)", "θ (deg)");
    p.series.push(Series::line("θ", idx.iter().map(|&k| (tr.t[k], tr.theta[k].to_degrees())).collect()));
    out.write_text("trajectory.svg", &p.render())
}

/// Power-angle analysis and swing trajectory.
pub fn transient(cfg: &TransientJson, out: &mut OutDir) -> Result<TransientReport> {
    let mut lines = Vec::new();
    match cfg {
        TransientJson::InertiaSwap {
            i1,
            v2,
            x,
            q1_ref,
            p2_ref,
            pll_bandwidth_hz,
            m,
            omega_f_hz,
            t_switch,
            duration,
        } => {
            let mut p = InertiaSwap::default();
            p.i1 = i1.unwrap_or(p.i1);
            p.v2 = v2.unwrap_or(p.v2);
            p.x = x.unwrap_or(p.x);
            p.q1_ref = q1_ref.unwrap_or(p.q1_ref);
            p.p2_ref = p2_ref.unwrap_or(p.p2_ref);
            if let Some(f) = pll_bandwidth_hz {
                p.kp = gridsync::hz(*f);
                p.ki = p.kp * p.kp / 4.0;
            }
            p.m = m.unwrap_or(p.m);
            p.omega_f = omega_f_hz.map(gridsync::hz).unwrap_or(p.omega_f);
            p.t_switch = t_switch.unwrap_or(p.t_switch);
            p.duration = duration.unwrap_or(p.duration);
            let o = inertia_swap(&p)?;
            write_curve(&o.before, out, "curve_before", "Before the switch: GFL follows")?;
            write_curve(&o.after, out, "curve_after", "After the switch: GFM swings")?;
            write_trajectory(&o.trajectory, out, 100)?;
            let fin = o.trajectory.theta.last().copied().unwrap_or(f64::NAN);
            lines.push(format!("SEP1 = {:.3}°, SEP2 = {:.3}°", o.sep1.to_degrees(), o.sep2.to_degrees()));
            let k = o.trajectory.t.iter().position(|&t| t >= p.t_switch).unwrap_or(0);
            let at_switch = o.trajectory.theta.get(k).copied().unwrap_or(f64::NAN);
            lines.push(format!("θ at switch = {:.3}°, final θ = {:.3}°", at_switch.to_degrees(), fin.to_degrees()));
            for (name, c) in [("before", &o.before), ("after", &o.after)] {
                if let Ok(a) = max_decel_area(c) {
                    lines.push(format!("MDA {name} = {a:.6}"));
                }
            }
            Ok(TransientReport { lines, swap: Some((o.sep1, o.sep2)), trajectory: o.trajectory })
        }
        TransientJson::GfmGfm { v1, v2, x, p1_ref, p2_ref, j, k_d, theta0_deg, dtheta0, duration } => {
            let case = TwoInverterCase::gfm_gfm(*v1, *v2, *x, *p1_ref, *p2_ref, *j, *k_d)?;
            single(case, *theta0_deg, *dtheta0, *duration, out, lines)
        }
        TransientJson::GflGfl { i1, i2, g, q1_ref, q2_ref, j, k_d, theta0_deg, dtheta0, duration } => {
            let case = TwoInverterCase::gfl_gfl(*i1, *i2, *g, *q1_ref, *q2_ref, *j, *k_d)?;
            single(case, *theta0_deg, *dtheta0, *duration, out, lines)
        }
    }
}

fn single(
    case: TwoInverterCase,
    theta0_deg: Option<f64>,
    dtheta0: f64,
    duration: f64,
    out: &mut OutDir,
    mut lines: Vec<String>,
) -> Result<TransientReport> {
    write_curve(&case, out, "curve", "Power-angle curve")?;
    let eq = equilibria(&case);
    if eq.none {
        lines.push("no equilibrium: setpoint exceeds the curve amplitude".into());
    }
    for (t, c) in &eq.points {
        lines.push(format!("{:?} at {:.4}°", c, t.to_degrees()));
    }
    if let Ok(a) = max_decel_area(&case) {
        lines.push(format!("MDA = {a:.6}"));
    }
    let th0 = match theta0_deg {
        Some(d) => d.to_radians(),
        None => eq.sep().unwrap_or(0.0),
    };
    let dt = 1e-4;
    let tr = swing_ode(&case, th0, dtheta0, duration, dt, 1e4)?;
    if tr.diverged {
        lines.push("trajectory diverged (pole slip)".into());
    }
    write_trajectory(&tr, out, 10)?;
    Ok(TransientReport { lines, trajectory: tr, swap: None })
}

/// Read an optional transient case file.
pub fn load_transient(path: Option<&Path>) -> Result<TransientJson> {
    match path {
        None => Ok(TransientJson::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            config::parse(&text, &p.display().to_string())
        }
    }
}

/// Scenario from core objects, with simulation settings.
pub fn scenario(top: NetworkTopology, devices: Vec<Device>, events: Vec<Event>, sim: SimConfig) -> Scenario {
    Scenario { topology: top, devices, events, sim }
}

/// [`recovery`] re-exported for the figure harness.
pub fn recovered(tr: &SimTrace, t_check: f64) -> Recovery {
    recovery(tr, t_check)
}
