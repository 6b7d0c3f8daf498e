//! Fixed-step RK4 simulation of the nonlinear system with events.

use alloc::{format, string::String, vec, vec::Vec};

#[allow(unused_imports)] // shadowed by the inherent f64 methods whenever std is linked
use num_traits::Float;

use crate::devices::{DeviceParams, GflParams};
use crate::linalg::Mat;
use crate::network::{siib, Bus, Device, Line, Load, NetworkTopology, System};
use crate::smallsignal::{SweepParam, SweepSpec};
use crate::{Error, Result, F0_HZ};

/// Integrator settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    /// Step, s.
    pub dt: f64,
    /// End time, s.
    pub duration: f64,
    /// Record every `decimation`-th step.
    pub decimation: usize,
    /// A state magnitude above this counts as divergence.
    pub divergence_bound: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { dt: 2e-5, duration: 1.0, decimation: 50, divergence_bound: 1e6 }
    }
}

impl SimConfig {
    /// Check the invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidInput("dt must be > 0".into()));
        }
        if !(self.duration >= self.dt && self.duration.is_finite()) {
            return Err(Error::InvalidInput("duration must be ≥ dt".into()));
        }
        if self.decimation == 0 {
            return Err(Error::InvalidInput("decimation must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// What an event does.
#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    /// Change a controller parameter of device `device` (index).
    SetParam {
        /// Device index.
        device: usize,
        /// Parameter name, see [`DeviceParams::set_param`].
        name: String,
        /// New value.
        value: f64,
    },
    /// Step a reference (`p_ref`, `v_ref`, `id_ref`, `iq_ref`).
    StepRef {
        /// Device index.
        device: usize,
        /// Reference name.
        name: String,
        /// New value.
        value: f64,
    },
    /// Shunt resistance at a bus.
    Fault {
        /// Bus id.
        bus: usize,
        /// Fault resistance, pu.
        r_fault: f64,
    },
    /// Remove the faults at a bus.
    ClearFault {
        /// Bus id.
        bus: usize,
    },
    /// Take a line out of service.
    TripLine {
        /// From bus id.
        from: usize,
        /// To bus id.
        to: usize,
    },
    /// Put a line back into service.
    CloseLine {
        /// From bus id.
        from: usize,
        /// To bus id.
        to: usize,
    },
    /// Change a line's series impedance.
    SetLine {
        /// From bus id.
        from: usize,
        /// To bus id.
        to: usize,
        /// New resistance, pu.
        r: f64,
        /// New reactance, pu.
        x: f64,
    },
}

/// An action at a time.
#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    /// Time, s.
    pub time: f64,
    /// Action.
    pub action: Action,
}

/// Fault at `t_start` cleared `periods` fundamental periods later.
pub fn fault_case(bus: usize, t_start: f64, periods: u32) -> [Event; 2] {
    let clear = t_start + periods as f64 / F0_HZ;
    [
        Event { time: t_start, action: Action::Fault { bus, r_fault: 1e-3 } },
        Event { time: clear, action: Action::ClearFault { bus } },
    ]
}

/// Recorded signals of one device (load convention currents).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DeviceTrace {
    /// Device name.
    pub name: String,
    /// Frequency, Hz.
    pub f_hz: Vec<f64>,
    /// Frame angle, rad.
    pub theta: Vec<f64>,
    /// d-axis voltage.
    pub v_d: Vec<f64>,
    /// q-axis voltage.
    pub v_q: Vec<f64>,
    /// d-axis current.
    pub i_d: Vec<f64>,
    /// q-axis current.
    pub i_q: Vec<f64>,
    /// Active power.
    pub p: Vec<f64>,
    /// Reactive power.
    pub q: Vec<f64>,
}

/// Simulation output.
#[derive(Clone, Debug, PartialEq)]
pub struct SimTrace {
    /// Sample times, s.
    pub t: Vec<f64>,
    /// One trace per device.
    pub devices: Vec<DeviceTrace>,
    /// Time of the first non-finite or out-of-bound state, if any.
    pub diverged_at: Option<f64>,
    /// State at the last completed step.
    pub final_state: Vec<f64>,
}

impl SimTrace {
    /// Index of the first sample at or after `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.t.iter().position(|&s| s >= t - 1e-12).unwrap_or(self.t.len())
    }

    /// Trace of the device called `name`.
    pub fn device(&self, name: &str) -> Option<&DeviceTrace> {
        self.devices.iter().find(|d| d.name == name)
    }
}

fn record(sys: &System, x: &[f64], t: f64, tr: &mut SimTrace) {
    tr.t.push(t);
    for (k, d) in tr.devices.iter_mut().enumerate() {
        let o = sys.device_outputs(x, k);
        d.f_hz.push(o.omega / (2.0 * core::f64::consts::PI));
        d.theta.push(o.theta);
        d.v_d.push(o.v.re);
        d.v_q.push(o.v.im);
        d.i_d.push(o.i.re);
        d.i_q.push(o.i.im);
        d.p.push(o.p());
        d.q.push(o.q());
    }
}

fn apply(sys: &mut System, x: &mut [f64], a: &Action) -> Result<()> {
    match a {
        Action::SetParam { device, name, value } => sys.device_params_mut(*device)?.set_param(name, *value),
        Action::StepRef { device, name, value } => {
            if !matches!(name.as_str(), "p_ref" | "v_ref" | "id_ref" | "iq_ref") {
                return Err(Error::InvalidInput(format!("{name:?} is not a reference")));
            }
            sys.device_params_mut(*device)?.set_param(name, *value)
        }
        Action::Fault { bus, r_fault } => sys.apply_fault(*bus, *r_fault),
        Action::ClearFault { bus } => sys.clear_fault(*bus),
        Action::TripLine { from, to } => sys.set_line_service(x, *from, *to, false),
        Action::CloseLine { from, to } => sys.set_line_service(x, *from, *to, true),
        Action::SetLine { from, to, r, x: xl } => sys.set_line(*from, *to, *r, *xl),
    }
}

fn rk4(sys: &System, x: &mut [f64], h: f64, k: &mut [Vec<f64>; 4], tmp: &mut [f64]) {
    let n = x.len();
    sys.rhs(x, &mut k[0]);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k[0][i];
    }
    sys.rhs(tmp, &mut k[1]);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k[1][i];
    }
    sys.rhs(tmp, &mut k[2]);
    for i in 0..n {
        tmp[i] = x[i] + h * k[2][i];
    }
    sys.rhs(tmp, &mut k[3]);
    for i in 0..n {
        x[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
    }
}

/// Integrate `sys` from `x0`. Events fire at the first step boundary at
/// or after their time, in the order given. While large algebraic
/// conductances (faults) are present the step is subdivided so that RK4
/// stays stable on the fast node modes.
pub fn run(mut sys: System, x0: &[f64], events: &[Event], cfg: &SimConfig) -> Result<SimTrace> {
    cfg.validate()?;
    if x0.len() != sys.n_states() {
        return Err(Error::InvalidInput("initial state has the wrong length".into()));
    }
    for e in events {
        if !(e.time >= 0.0 && e.time <= cfg.duration) {
            return Err(Error::InvalidInput(format!("event at {} s is outside the run", e.time)));
        }
    }
    let n = x0.len();
    let steps = (cfg.duration / cfg.dt).round() as usize;
    let mut order: Vec<(usize, usize)> =
        events.iter().enumerate().map(|(i, e)| ((e.time / cfg.dt).round() as usize, i)).collect();
    order.sort();
    let mut next_ev = 0;
    let mut x = x0.to_vec();
    let mut tr = SimTrace {
        t: Vec::new(),
        devices: sys.devices().iter().map(|d| DeviceTrace { name: d.name.clone(), ..Default::default() }).collect(),
        diverged_at: None,
        final_state: Vec::new(),
    };
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tmp = vec![0.0; n];
    let sub_for = |s: &System| ((cfg.dt * s.conductance_rate() / 2.0).ceil() as usize).max(1);
    let mut n_sub = sub_for(&sys);
    for step in 0..=steps {
        let t = step as f64 * cfg.dt;
        let mut changed = false;
        while next_ev < order.len() && order[next_ev].0 == step {
            apply(&mut sys, &mut x, &events[order[next_ev].1].action)?;
            next_ev += 1;
            changed = true;
        }
        if changed {
            n_sub = sub_for(&sys);
        }
        if step % cfg.decimation == 0 {
            record(&sys, &x, t, &mut tr);
        }
        if step == steps {
            break;
        }
        let h = cfg.dt / n_sub as f64;
        for _ in 0..n_sub {
            rk4(&sys, &mut x, h, &mut k, &mut tmp);
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > cfg.divergence_bound) {
            tr.diverged_at = Some(t + cfg.dt);
            tr.final_state = x;
            return Ok(tr);
        }
    }
    tr.final_state = x;
    Ok(tr)
}

/// Build the system, initialise at its equilibrium and integrate.
pub fn simulate(top: NetworkTopology, devices: Vec<Device>, events: &[Event], cfg: &SimConfig) -> Result<SimTrace> {
    let mut sys = System::new(top, devices)?;
    let eq = sys.equilibrium(None)?;
    run(sys, &eq.x, events, cfg)
}

/// Central-difference Jacobian of the simulator right-hand side.
pub fn numerical_jacobian(sys: &System, x: &[f64]) -> Mat {
    let n = x.len();
    let mut out = Mat::zeros(n, n);
    let (mut fp, mut fm) = (vec![0.0; n], vec![0.0; n]);
    let mut xp = x.to_vec();
    for c in 0..n {
        let h = 1e-6 * x[c].abs().max(1e-2);
        xp[c] = x[c] + h;
        sys.rhs(&xp, &mut fp);
        xp[c] = x[c] - h;
        sys.rhs(&xp, &mut fm);
        xp[c] = x[c];
        for r in 0..n {
            out[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    out
}

/// Single-inverter-infinite-bus run for a sweep: the swept parameter jumps
/// from `spec.start` to `spec.end` at `t_on` and back at `t_off`. A 1e-3 pu
/// power reference step at `t_on` seeds the oscillation, since parameter
/// changes alone leave the equilibrium undisturbed.
pub fn sweep_step_case(spec: &SweepSpec, t_on: f64, t_off: f64, cfg: &SimConfig) -> Result<SimTrace> {
    spec.validate()?;
    let (dev0, c0) = spec.at(spec.start);
    let (dev1, c1) = spec.at(spec.end);
    let change = |d: &DeviceParams, c: f64| -> Action {
        let set = |name: &str, value: f64| Action::SetParam { device: 0, name: name.into(), value };
        match (spec.param, d) {
            (SweepParam::DroopM, DeviceParams::Gfm(p)) => set("m", p.m),
            (SweepParam::VLoopBw, DeviceParams::Gfm(p)) => set("omega_v", p.omega_v),
            (SweepParam::PllBandwidth, DeviceParams::Gfl(p)) => set("omega_pll", p.omega_pll),
            (SweepParam::ILoopBw, DeviceParams::Gfl(p)) => set("omega_i", p.omega_i),
            _ => Action::SetLine { from: 0, to: 1, r: c / 5.0, x: c },
        }
    };
    let kick = match dev0 {
        DeviceParams::Gfm(p) => ("p_ref", p.p_ref + 1e-3),
        DeviceParams::Gfl(p) => ("id_ref", p.id_ref + 1e-3),
    };
    let events = [
        Event { time: t_on, action: change(&dev1, c1) },
        Event { time: t_on, action: Action::StepRef { device: 0, name: kick.0.into(), value: kick.1 } },
        Event { time: t_off, action: change(&dev0, c0) },
    ];
    let (top, devs) = siib(dev0, c0);
    simulate(top, devs, &events, cfg)
}

/// Dominant oscillation frequency of `y` over `[t0, t1]`, Hz: the peak of
/// the Hann-windowed spectrum of the linearly detrended samples, scanned
/// from 1 to `f_max` Hz in 0.05 Hz steps. `None` with fewer than 8 samples
/// or a flat signal.
pub fn oscillation_hz(t: &[f64], y: &[f64], t0: f64, t1: f64, f_max: f64) -> Option<f64> {
    let idx: Vec<usize> = (0..t.len().min(y.len())).filter(|&k| t[k] >= t0 && t[k] <= t1).collect();
    if idx.len() < 8 {
        return None;
    }
    let n = idx.len() as f64;
    let mt = idx.iter().map(|&k| t[k]).sum::<f64>() / n;
    let my = idx.iter().map(|&k| y[k]).sum::<f64>() / n;
    let stt: f64 = idx.iter().map(|&k| (t[k] - mt) * (t[k] - mt)).sum();
    let slope = idx.iter().map(|&k| (t[k] - mt) * (y[k] - my)).sum::<f64>() / stt;
    let span = t[idx[idx.len() - 1]] - t[idx[0]];
    let tau = 2.0 * core::f64::consts::PI;
    let v: Vec<(f64, f64)> = idx
        .iter()
        .map(|&k| {
            let w = 0.5 - 0.5 * (tau * (t[k] - t[idx[0]]) / span).cos();
            (t[k], w * (y[k] - my - slope * (t[k] - mt)))
        })
        .collect();
    let mut best = (0.0, 0.0);
    let steps = ((f_max - 1.0) / 0.05).floor() as usize;
    for m in 0..=steps {
        let f = 1.0 + 0.05 * m as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for &(tk, vk) in &v {
            let (sn, cs) = (tau * f * tk).sin_cos();
            re += vk * cs;
            im += vk * sn;
        }
        let pw = re * re + im * im;
        if pw > best.1 {
            best = (f, pw);
        }
    }
    (best.1 > 0.0).then_some(best.0)
}

/// Single GFL feeding an RL load `1 + j0.2` pu in an island:
/// `i_q*` 0.09 → 0 at 0.4 s, PLL integral gain → 0 at 0.8 s, end at 1.2 s.
pub fn island_gfl_case() -> Result<SimTrace> {
    let (top, devs) = island_gfl_system();
    let events = [
        Event { time: 0.4, action: Action::StepRef { device: 0, name: "iq_ref".into(), value: 0.0 } },
        Event { time: 0.8, action: Action::SetParam { device: 0, name: "ki".into(), value: 0.0 } },
    ];
    simulate(top, devs, &events, &SimConfig { duration: 1.2, decimation: 10, ..SimConfig::default() })
}

/// Topology and device of [`island_gfl_case`].
pub fn island_gfl_system() -> (NetworkTopology, Vec<Device>) {
    let mut bus = Bus::new(1);
    bus.load = Some(Load { r: 1.0, x: 0.2 });
    let p = GflParams { id_ref: -0.5, iq_ref: 0.09, ..GflParams::default() };
    let top = NetworkTopology { omega0: crate::OMEGA0, buses: vec![bus], lines: Vec::new() };
    (top, vec![Device { name: "gfl".into(), bus: 1, rating: 1.0, params: DeviceParams::Gfl(p) }])
}

/// Two GFLs with local RL loads joined by a resistive line, in an island.
pub fn two_gfl_system() -> (NetworkTopology, Vec<Device>) {
    let mut b1 = Bus::new(1);
    b1.load = Some(Load { r: 1.0, x: 0.2 });
    let mut b2 = Bus::new(2);
    b2.load = Some(Load { r: 1.25, x: 0.25 });
    let top = NetworkTopology { omega0: crate::OMEGA0, buses: vec![b1, b2], lines: vec![Line::new(1, 2, 0.1, 0.1)] };
    let g1 = GflParams { id_ref: -0.5, iq_ref: 0.09, ..GflParams::default() };
    let g2 = GflParams { id_ref: -0.4, iq_ref: 0.072, ..GflParams::default() };
    (
        top,
        vec![
            Device { name: "gfl1".into(), bus: 1, rating: 1.0, params: DeviceParams::Gfl(g1) },
            Device { name: "gfl2".into(), bus: 2, rating: 1.0, params: DeviceParams::Gfl(g2) },
        ],
    )
}

/// [`two_gfl_system`] with a three-period fault at bus 2 from 0.2 s, to 1 s.
pub fn two_gfl_fault_case() -> Result<SimTrace> {
    let (top, devs) = two_gfl_system();
    simulate(top, devs, &fault_case(2, 0.2, 3), &SimConfig { duration: 1.0, decimation: 10, ..SimConfig::default() })
}

/// Three-phase summary of an island GFL run with an `i_q*` step at `t_iq`
/// and the PLL integral gain removed at `t_ki`.
#[derive(Clone, Debug, PartialEq)]
pub struct IslandPhases {
    /// Mean `v_d` over the 0.1 s before `t_iq`, pu.
    pub v_d_phase1: f64,
    /// Frequency at `t_iq` and at `t_ki`, Hz.
    pub f_phase2: (f64, f64),
    /// Frequency strictly increasing on a `resolution` grid over
    /// `[t_iq, t_ki]`.
    pub increasing_phase2: bool,
    /// Time after `t_ki` from which `|df/dt| < 1e-3 Hz/s` holds to the end.
    pub settle_time: Option<f64>,
    /// Final frequency, Hz.
    pub f_final: f64,
}

/// Evaluate [`IslandPhases`] on device 0 of `tr`.
pub fn island_phases(tr: &SimTrace, t_iq: f64, t_ki: f64, resolution: f64) -> Result<IslandPhases> {
    let d = tr.devices.first().ok_or_else(|| Error::InvalidInput("trace has no device".into()))?;
    let last = tr.t.len().saturating_sub(1);
    if tr.t.is_empty() || tr.t[last] < t_ki || resolution <= 0.0 {
        return Err(Error::InvalidInput("trace too short for the phase checks".into()));
    }
    let (a, b) = (tr.index_at(t_iq - 0.1), tr.index_at(t_iq));
    let v_d_phase1 = d.v_d[a..b.max(a + 1)].iter().sum::<f64>() / (b.max(a + 1) - a) as f64;
    let steps = ((t_ki - t_iq) / resolution).floor() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| d.f_hz[tr.index_at(t_iq + k as f64 * resolution)]).collect();
    let increasing_phase2 = grid.windows(2).all(|w| w[1] > w[0]);
    let mut settle = None;
    for k in (tr.index_at(t_ki) + 1..=last).rev() {
        let slope = (d.f_hz[k] - d.f_hz[k - 1]) / (tr.t[k] - tr.t[k - 1]);
        if slope.abs() >= 1e-3 {
            break;
        }
        settle = Some(tr.t[k - 1] - t_ki);
    }
    Ok(IslandPhases {
        v_d_phase1,
        f_phase2: (d.f_hz[tr.index_at(t_iq)], d.f_hz[tr.index_at(t_ki)]),
        increasing_phase2,
        settle_time: settle.map(|s: f64| s.max(0.0)),
        f_final: d.f_hz[last],
    })
}

/// Outcome of a disturbance as seen after clearing.
#[derive(Clone, Debug, PartialEq)]
pub struct Recovery {
    /// All criteria met.
    pub recovered: bool,
    /// Largest change of a device angle relative to device 0, rad,
    /// between the first and the last sample.
    pub max_angle_shift: f64,
    /// Largest `|f − f(0)|` over samples after `t_check`, Hz.
    pub max_freq_dev_hz: f64,
    /// Whether the run diverged.
    pub diverged: bool,
}

/// Recovery: no divergence, every relative angle back within π of its
/// pre-disturbance value (no pole slip), and every frequency within
/// 0.1 Hz of its pre-disturbance value from `t_check` on.
pub fn recovery(tr: &SimTrace, t_check: f64) -> Recovery {
    let diverged = tr.diverged_at.is_some();
    let last = tr.t.len().saturating_sub(1);
    let mut shift: f64 = 0.0;
    let mut fdev: f64 = 0.0;
    if let Some(r) = tr.devices.first() {
        for d in &tr.devices {
            let pre = d.theta[0] - r.theta[0];
            let post = d.theta[last] - r.theta[last];
            shift = shift.max((post - pre).abs());
            for k in tr.index_at(t_check)..tr.t.len() {
                fdev = fdev.max((d.f_hz[k] - d.f_hz[0]).abs());
            }
        }
    }
    let late = tr.index_at(t_check) < tr.t.len();
    Recovery {
        recovered: !diverged && late && shift < core::f64::consts::PI && fdev < 0.1,
        max_angle_shift: shift,
        max_freq_dev_hz: fdev,
        diverged,
    }
}
