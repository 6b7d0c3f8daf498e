//! Network topology, dynamic nodal admittance, and the whole-system model.
//!
//! Everything is expressed in a global frame rotating at `W` (Ω0 unless
//! the system is an island). States:
//!
//! - each device's own states ([`DeviceParams`]), currents on its rating;
//! - a voltage pair per non-stiff bus (node capacitance from line charging,
//!   bus shunts and device filter capacitors);
//! - a current pair per series line and per inductive load.
//!
//! Stiff buses hold a fixed phasor. Purely resistive loads and faults are
//! algebraic conductances at their node.

use alloc::{format, string::String, vec, vec::Vec};

#[allow(unused_imports)] // shadowed by the inherent f64 methods whenever std is linked
use num_traits::Float;

use crate::devices::{DeviceOutputs, DeviceParams, GflParams, GfmParams};
use crate::dqframe::{RationalTransfer, TransferMatrix2, Unit};
use crate::linalg::{self, Mat};
use crate::poly::Poly;
use crate::{Error, Result, C64, J};

/// Series RL load `R + jX` (X at Ω0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Load {
    /// Resistance, pu.
    pub r: f64,
    /// Reactance at Ω0, pu.
    pub x: f64,
}

/// A bus.
#[derive(Clone, Debug, PartialEq)]
pub struct Bus {
    /// Bus number (unique).
    pub id: usize,
    /// Shunt RL load.
    pub load: Option<Load>,
    /// Shunt capacitive susceptance at Ω0, pu.
    pub shunt_b: f64,
    /// Fixed voltage phasor for an infinite bus.
    pub stiff: Option<C64>,
}

impl Bus {
    /// A plain bus with nothing attached.
    pub fn new(id: usize) -> Self {
        Bus { id, load: None, shunt_b: 0.0, stiff: None }
    }
}

/// A π-model line.
#[derive(Clone, Debug, PartialEq)]
pub struct Line {
    /// From bus id.
    pub from: usize,
    /// To bus id.
    pub to: usize,
    /// Series resistance, pu.
    pub r: f64,
    /// Series reactance at Ω0, pu.
    pub x: f64,
    /// Total charging susceptance, pu (half at each end).
    pub b: f64,
    /// Whether the line carries current.
    pub in_service: bool,
}

impl Line {
    /// In-service line without charging.
    pub fn new(from: usize, to: usize, r: f64, x: f64) -> Self {
        Line { from, to, r, x, b: 0.0, in_service: true }
    }
}

/// An inverter attached to a bus.
#[derive(Clone, Debug, PartialEq)]
pub struct Device {
    /// Label used in traces.
    pub name: String,
    /// Bus id.
    pub bus: usize,
    /// Rating on the system base.
    pub rating: f64,
    /// Controller parameters on the device base.
    pub params: DeviceParams,
}

/// Buses and lines with a base frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkTopology {
    /// Base angular frequency, rad/s.
    pub omega0: f64,
    /// Buses.
    pub buses: Vec<Bus>,
    /// Lines.
    pub lines: Vec<Line>,
}

impl NetworkTopology {
    /// Position of bus `id` in `buses`.
    pub fn bus_index(&self, id: usize) -> Result<usize> {
        self.buses.iter().position(|b| b.id == id).ok_or(Error::UnknownBus(id))
    }

    /// Check ids, element values and connectivity of in-service lines.
    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::InvalidInput("Ω0 must be positive".into()));
        }
        if self.buses.is_empty() {
            return Err(Error::InvalidInput("topology has no buses".into()));
        }
        for (k, b) in self.buses.iter().enumerate() {
            if self.buses[..k].iter().any(|o| o.id == b.id) {
                return Err(Error::InvalidInput(format!("duplicate bus id {}", b.id)));
            }
            if let Some(l) = b.load {
                if !(l.r >= 0.0 && l.x >= 0.0 && l.r.is_finite() && l.x.is_finite()) || (l.r == 0.0 && l.x == 0.0) {
                    return Err(Error::InvalidInput(format!("bus {}: load needs R, X ≥ 0, not both zero", b.id)));
                }
            }
            if !(b.shunt_b.is_finite() && b.shunt_b >= 0.0) {
                return Err(Error::InvalidInput(format!("bus {}: shunt B must be ≥ 0", b.id)));
            }
        }
        for l in &self.lines {
            self.bus_index(l.from)?;
            self.bus_index(l.to)?;
            if l.from == l.to {
                return Err(Error::InvalidInput(format!("line {}-{} is a self loop", l.from, l.to)));
            }
            if !(l.r >= 0.0 && l.b >= 0.0 && l.r.is_finite() && l.b.is_finite() && l.x.is_finite()) {
                return Err(Error::InvalidInput(format!("line {}-{}: R, B must be ≥ 0", l.from, l.to)));
            }
            if l.x <= 0.0 {
                let what = if l.r == 0.0 { "zero-impedance branch" } else { "X must be > 0" };
                return Err(Error::InvalidInput(format!("line {}-{}: {what}", l.from, l.to)));
            }
        }
        // connectivity over in-service lines
        let n = self.buses.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(k) = stack.pop() {
            let id = self.buses[k].id;
            for l in self.lines.iter().filter(|l| l.in_service) {
                let other = if l.from == id {
                    l.to
                } else if l.to == id {
                    l.from
                } else {
                    continue;
                };
                let j = self.bus_index(other)?;
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Disconnected);
        }
        Ok(())
    }

    /// Index of the line joining `a` and `b` (either orientation).
    pub fn line_index(&self, a: usize, b: usize) -> Result<usize> {
        self.lines
            .iter()
            .position(|l| (l.from == a && l.to == b) || (l.from == b && l.to == a))
            .ok_or_else(|| Error::InvalidInput(format!("no line between {a} and {b}")))
    }
}

/// Bus-indexed dq± nodal admittance. Only the forward channel is stored;
/// the backward channel is its conjugate mirror.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalAdmittance {
    /// Bus ids in matrix order.
    pub ids: Vec<usize>,
    /// `Y+` entries.
    pub plus: Vec<Vec<RationalTransfer>>,
}

impl NodalAdmittance {
    /// Entry `(i, j)` as a diagonal dq± transfer matrix.
    pub fn entry_dqpm(&self, i: usize, j: usize) -> TransferMatrix2 {
        TransferMatrix2::dqpm_diagonal(self.plus[i][j].clone())
    }
}

// 1/(R + (s + jΩ0)L)
fn branch_admittance(r: f64, x: f64, omega0: f64) -> Result<RationalTransfer> {
    let l = x / omega0;
    RationalTransfer::new(Poly::one(), Poly::new(vec![C64::new(l, 0.0), C64::new(r, x)]), Unit::Admittance)
}

// (s + jΩ0)·B/Ω0
fn shunt_admittance(b: f64, omega0: f64) -> RationalTransfer {
    RationalTransfer::poly(Poly::new(vec![C64::new(b / omega0, 0.0), C64::new(0.0, b)]), Unit::Admittance)
}

/// Dynamic nodal admittance of lines, line charging, bus shunts and loads.
/// Entry `(k,k)` sums incident branch admittances, `(k,m)` is minus the
/// branch admittance; each channel uses `1/(R + (s ± jΩ0)L)`.
pub fn nodal_admittance(top: &NetworkTopology) -> Result<NodalAdmittance> {
    top.validate()?;
    let n = top.buses.len();
    let mut y = vec![vec![RationalTransfer::zero(Unit::Admittance); n]; n];
    for l in top.lines.iter().filter(|l| l.in_service) {
        let (a, b) = (top.bus_index(l.from)?, top.bus_index(l.to)?);
        let yb = branch_admittance(l.r, l.x, top.omega0)?;
        y[a][a] = &y[a][a] + &yb;
        y[b][b] = &y[b][b] + &yb;
        y[a][b] = &y[a][b] - &yb;
        y[b][a] = &y[b][a] - &yb;
        if l.b > 0.0 {
            let ys = shunt_admittance(l.b / 2.0, top.omega0);
            y[a][a] = &y[a][a] + &ys;
            y[b][b] = &y[b][b] + &ys;
        }
    }
    for (k, bus) in top.buses.iter().enumerate() {
        if bus.shunt_b > 0.0 {
            y[k][k] = &y[k][k] + &shunt_admittance(bus.shunt_b, top.omega0);
        }
        if let Some(ld) = bus.load {
            let yl = if ld.x == 0.0 {
                RationalTransfer::gain(C64::new(1.0 / ld.r, 0.0), Unit::Admittance)
            } else {
                branch_admittance(ld.r, ld.x, top.omega0)?
            };
            y[k][k] = &y[k][k] + &yl;
        }
    }
    Ok(NodalAdmittance { ids: top.buses.iter().map(|b| b.id).collect(), plus: y })
}

/// What a state belongs to.
#[derive(Clone, Debug, PartialEq)]
pub enum StateOwner {
    /// Device by name.
    Device(String),
    /// Bus voltage by id.
    Bus(usize),
    /// Line current `(from, to)`.
    Line(usize, usize),
    /// Load current at a bus.
    Load(usize),
}

/// Label of one state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateLabel {
    /// Owner.
    pub owner: StateOwner,
    /// State name within the owner.
    pub name: &'static str,
}

/// The nonlinear interconnected system.
#[derive(Clone, Debug)]
pub struct System {
    top: NetworkTopology,
    devices: Vec<Device>,
    /// Global frame speed, rad/s.
    pub w: f64,
    faults: Vec<(usize, f64)>,
    dev_bus: Vec<usize>,
    dev_off: Vec<usize>,
    node: Vec<Option<usize>>,
    node_c: Vec<f64>,
    line_off: Vec<usize>,
    load_off: Vec<Option<usize>>,
    n: usize,
    reference: Option<usize>,
}

/// Result of an equilibrium solve.
#[derive(Clone, Debug, PartialEq)]
pub struct Equilibrium {
    /// State vector.
    pub x: Vec<f64>,
    /// Frame speed, rad/s.
    pub w: f64,
    /// Newton iterations used.
    pub iterations: usize,
    /// Final residual infinity norm.
    pub residual: f64,
}

impl System {
    /// Build and validate. Islands (no stiff bus) use the first GFM (or the
    /// first device) as the angle reference.
    pub fn new(top: NetworkTopology, devices: Vec<Device>) -> Result<Self> {
        top.validate()?;
        if devices.is_empty() {
            return Err(Error::InvalidInput("no devices attached".into()));
        }
        let mut dev_bus = Vec::new();
        for d in &devices {
            d.params.validate()?;
            if !(d.rating > 0.0 && d.rating.is_finite()) {
                return Err(Error::InvalidInput(format!("device {}: rating must be > 0", d.name)));
            }
            if (d.params.omega0() - top.omega0).abs() > 1e-9 * top.omega0 {
                return Err(Error::InvalidInput(format!("device {}: Ω0 differs from the network", d.name)));
            }
            dev_bus.push(top.bus_index(d.bus)?);
        }
        let mut off = 0;
        let mut dev_off = Vec::new();
        for d in &devices {
            dev_off.push(off);
            off += d.params.n_states();
        }
        let nb = top.buses.len();
        let mut node = vec![None; nb];
        let mut node_c = vec![0.0; nb];
        for (k, b) in top.buses.iter().enumerate() {
            let mut c = b.shunt_b / top.omega0;
            for l in &top.lines {
                if l.from == b.id || l.to == b.id {
                    c += l.b / 2.0 / top.omega0;
                }
            }
            for (d, &db) in devices.iter().zip(&dev_bus) {
                if db == k {
                    c += d.rating * d.params.filter_c();
                }
            }
            node_c[k] = c;
            if b.stiff.is_none() {
                if c <= 0.0 {
                    return Err(Error::Singular(format!("bus {} has no capacitance", b.id)));
                }
                node[k] = Some(off);
                off += 2;
            }
        }
        let mut line_off = Vec::new();
        for _ in &top.lines {
            line_off.push(off);
            off += 2;
        }
        let mut load_off = Vec::new();
        for b in &top.buses {
            match b.load {
                Some(l) if l.x > 0.0 => {
                    load_off.push(Some(off));
                    off += 2;
                }
                _ => load_off.push(None),
            }
        }
        let island = top.buses.iter().all(|b| b.stiff.is_none());
        let reference = if island {
            Some(devices.iter().position(|d| matches!(d.params, DeviceParams::Gfm(_))).unwrap_or(0))
        } else {
            None
        };
        let w = top.omega0;
        Ok(System {
            top,
            devices,
            w,
            faults: Vec::new(),
            dev_bus,
            dev_off,
            node,
            node_c,
            line_off,
            load_off,
            n: off,
            reference,
        })
    }

    /// Number of states.
    pub fn n_states(&self) -> usize {
        self.n
    }

    /// Topology.
    pub fn topology(&self) -> &NetworkTopology {
        &self.top
    }

    /// Devices.
    pub fn devices(&self) -> &[Device] {
        &self.devices
    }

    /// True when no bus is stiff.
    pub fn is_island(&self) -> bool {
        self.reference.is_some()
    }

    /// Island angle reference device.
    pub fn reference(&self) -> Option<usize> {
        self.reference
    }

    /// Offset of device `k`'s states.
    pub fn device_offset(&self, k: usize) -> usize {
        self.dev_off[k]
    }

    /// Offset of a bus voltage pair (None for stiff buses).
    pub fn node_offset(&self, bus_index: usize) -> Option<usize> {
        self.node[bus_index]
    }

    /// Offset of line `k`'s current pair.
    pub fn line_offset(&self, k: usize) -> usize {
        self.line_off[k]
    }

    /// Labels in state order.
    pub fn labels(&self) -> Vec<StateLabel> {
        let mut out = Vec::with_capacity(self.n);
        for d in &self.devices {
            for name in d.params.state_names() {
                out.push(StateLabel { owner: StateOwner::Device(d.name.clone()), name });
            }
        }
        for (k, b) in self.top.buses.iter().enumerate() {
            if self.node[k].is_some() {
                out.push(StateLabel { owner: StateOwner::Bus(b.id), name: "v_re" });
                out.push(StateLabel { owner: StateOwner::Bus(b.id), name: "v_im" });
            }
        }
        for l in &self.top.lines {
            out.push(StateLabel { owner: StateOwner::Line(l.from, l.to), name: "i_re" });
            out.push(StateLabel { owner: StateOwner::Line(l.from, l.to), name: "i_im" });
        }
        for (k, b) in self.top.buses.iter().enumerate() {
            if self.load_off[k].is_some() {
                out.push(StateLabel { owner: StateOwner::Load(b.id), name: "i_re" });
                out.push(StateLabel { owner: StateOwner::Load(b.id), name: "i_im" });
            }
        }
        out
    }

    /// Voltage phasor of bus index `k`.
    pub fn bus_voltage(&self, x: &[f64], k: usize) -> C64 {
        match (self.node[k], self.top.buses[k].stiff) {
            (Some(o), _) => C64::new(x[o], x[o + 1]),
            (None, Some(v)) => v,
            (None, None) => C64::new(0.0, 0.0),
        }
    }

    /// Terminal quantities of device `k`.
    pub fn device_outputs(&self, x: &[f64], k: usize) -> DeviceOutputs {
        let o = self.dev_off[k];
        let d = &self.devices[k].params;
        d.outputs(&x[o..o + d.n_states()], self.bus_voltage(x, self.dev_bus[k]))
    }

    /// Mutable device parameters (for events).
    pub fn device_params_mut(&mut self, k: usize) -> Result<&mut DeviceParams> {
        self.devices.get_mut(k).map(|d| &mut d.params).ok_or_else(|| Error::InvalidInput(format!("no device {k}")))
    }

    /// Apply a shunt fault of resistance `r` at bus id `bus`.
    pub fn apply_fault(&mut self, bus: usize, r: f64) -> Result<()> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidInput("fault resistance must be > 0".into()));
        }
        let k = self.top.bus_index(bus)?;
        self.faults.push((k, r));
        Ok(())
    }

    /// Remove all faults at bus id `bus`.
    pub fn clear_fault(&mut self, bus: usize) -> Result<()> {
        let k = self.top.bus_index(bus)?;
        self.faults.retain(|f| f.0 != k);
        Ok(())
    }

    /// Change a line's series impedance. The current state is unaffected.
    pub fn set_line(&mut self, a: usize, b: usize, r: f64, x: f64) -> Result<()> {
        let k = self.top.line_index(a, b)?;
        if !(r >= 0.0 && x > 0.0 && r.is_finite() && x.is_finite()) {
            return Err(Error::InvalidInput(format!("line {a}-{b}: need R ≥ 0 and X > 0")));
        }
        self.top.lines[k].r = r;
        self.top.lines[k].x = x;
        Ok(())
    }

    /// Take a line out of or into service. Tripping zeroes its current.
    pub fn set_line_service(&mut self, x: &mut [f64], a: usize, b: usize, on: bool) -> Result<()> {
        let k = self.top.line_index(a, b)?;
        self.top.lines[k].in_service = on;
        if !on {
            let o = self.line_off[k];
            x[o] = 0.0;
            x[o + 1] = 0.0;
        }
        Ok(())
    }

    /// Largest `G/C` over nodes with algebraic conductances (loads, faults),
    /// the fastest real mode explicit integrators must resolve.
    pub fn conductance_rate(&self) -> f64 {
        let mut g = vec![0.0; self.top.buses.len()];
        for &(k, r) in &self.faults {
            g[k] += 1.0 / r;
        }
        for (k, b) in self.top.buses.iter().enumerate() {
            if let Some(l) = b.load {
                if l.x == 0.0 {
                    g[k] += 1.0 / l.r;
                }
            }
        }
        (0..g.len()).filter(|&k| self.node[k].is_some()).map(|k| g[k] / self.node_c[k]).fold(0.0, f64::max)
    }

    /// `ẋ = f(x)` at the current frame speed.
    pub fn rhs(&self, x: &[f64], dx: &mut [f64]) {
        let nb = self.top.buses.len();
        let w = self.w;
        let mut inj = vec![C64::new(0.0, 0.0); nb];
        let v: Vec<C64> = (0..nb).map(|k| self.bus_voltage(x, k)).collect();
        for (k, d) in self.devices.iter().enumerate() {
            let o = self.dev_off[k];
            let ns = d.params.n_states();
            let b = self.dev_bus[k];
            let i = d.params.rhs(&x[o..o + ns], v[b], w, &mut dx[o..o + ns]);
            inj[b] += i * d.rating;
        }
        for (k, l) in self.top.lines.iter().enumerate() {
            let o = self.line_off[k];
            if !l.in_service {
                dx[o] = 0.0;
                dx[o + 1] = 0.0;
                continue;
            }
            let (a, b) = (self.top.bus_index(l.from).unwrap_or(0), self.top.bus_index(l.to).unwrap_or(0));
            let ll = l.x / self.top.omega0;
            let i = C64::new(x[o], x[o + 1]);
            let di = (v[a] - v[b] - i * C64::new(l.r, w * ll)) / ll;
            dx[o] = di.re;
            dx[o + 1] = di.im;
            inj[a] -= i;
            inj[b] += i;
        }
        for (k, bus) in self.top.buses.iter().enumerate() {
            if let Some(ld) = bus.load {
                match self.load_off[k] {
                    Some(o) => {
                        let ll = ld.x / self.top.omega0;
                        let i = C64::new(x[o], x[o + 1]);
                        let di = (v[k] - i * C64::new(ld.r, w * ll)) / ll;
                        dx[o] = di.re;
                        dx[o + 1] = di.im;
                        inj[k] -= i;
                    }
                    None => inj[k] -= v[k] / ld.r,
                }
            }
        }
        for &(k, r) in &self.faults {
            inj[k] -= v[k] / r;
        }
        for k in 0..nb {
            if let Some(o) = self.node[k] {
                let c = self.node_c[k];
                let dv = (inj[k] - J * (w * c) * v[k]) / c;
                dx[o] = dv.re;
                dx[o + 1] = dv.im;
            }
        }
    }

    /// Hand-assembled Jacobian `∂f/∂x`.
    pub fn jacobian(&self, x: &[f64]) -> Mat {
        let n = self.n;
        let w = self.w;
        let mut a = Mat::zeros(n, n);
        // 2x2 block helper: multiplication by a complex constant
        let put = |a: &mut Mat, r: usize, c: usize, z: C64| {
            a[(r, c)] += z.re;
            a[(r, c + 1)] -= z.im;
            a[(r + 1, c)] += z.im;
            a[(r + 1, c + 1)] += z.re;
        };
        for (k, d) in self.devices.iter().enumerate() {
            let o = self.dev_off[k];
            let ns = d.params.n_states();
            let b = self.dev_bus[k];
            let lin = d.params.linear(&x[o..o + ns], self.bus_voltage(x, b));
            for r in 0..ns {
                for c in 0..ns {
                    a[(o + r, o + c)] += lin.a[(r, c)];
                }
            }
            if let Some(vo) = self.node[b] {
                let cn = self.node_c[b];
                for r in 0..ns {
                    for c in 0..2 {
                        a[(o + r, vo + c)] += lin.b[(r, c)];
                    }
                }
                for r in 0..2 {
                    for c in 0..ns {
                        a[(vo + r, o + c)] += d.rating * lin.c[(r, c)] / cn;
                    }
                    for c in 0..2 {
                        a[(vo + r, vo + c)] += d.rating * lin.d[(r, c)] / cn;
                    }
                }
            }
        }
        for (k, l) in self.top.lines.iter().enumerate() {
            if !l.in_service {
                continue;
            }
            let o = self.line_off[k];
            let (ia, ib) = (self.top.bus_index(l.from).unwrap_or(0), self.top.bus_index(l.to).unwrap_or(0));
            let ll = l.x / self.top.omega0;
            put(&mut a, o, o, -C64::new(l.r, w * ll) / ll);
            if let Some(va) = self.node[ia] {
                put(&mut a, o, va, C64::new(1.0 / ll, 0.0));
                put(&mut a, va, o, C64::new(-1.0 / self.node_c[ia], 0.0));
            }
            if let Some(vb) = self.node[ib] {
                put(&mut a, o, vb, C64::new(-1.0 / ll, 0.0));
                put(&mut a, vb, o, C64::new(1.0 / self.node_c[ib], 0.0));
            }
        }
        for (k, bus) in self.top.buses.iter().enumerate() {
            let vo = self.node[k];
            if let (Some(ld), Some(vo)) = (bus.load, vo) {
                match self.load_off[k] {
                    Some(o) => {
                        let ll = ld.x / self.top.omega0;
                        put(&mut a, o, o, -C64::new(ld.r, w * ll) / ll);
                        put(&mut a, o, vo, C64::new(1.0 / ll, 0.0));
                        put(&mut a, vo, o, C64::new(-1.0 / self.node_c[k], 0.0));
                    }
                    None => put(&mut a, vo, vo, C64::new(-1.0 / (ld.r * self.node_c[k]), 0.0)),
                }
            }
            if let Some(vo) = vo {
                put(&mut a, vo, vo, -J * w);
            }
        }
        for &(k, r) in &self.faults {
            if let Some(vo) = self.node[k] {
                put(&mut a, vo, vo, C64::new(-1.0 / (r * self.node_c[k]), 0.0));
            }
        }
        a
    }

    /// `∂f/∂W`.
    pub fn dfdw(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        let mut rot = |o: usize| {
            g[o] = x[o + 1];
            g[o + 1] = -x[o];
        };
        for (k, l) in self.top.lines.iter().enumerate() {
            if l.in_service {
                rot(self.line_off[k]);
            }
        }
        for o in self.load_off.iter().flatten() {
            rot(*o);
        }
        for o in self.node.iter().flatten() {
            rot(*o);
        }
        for (k, d) in self.devices.iter().enumerate() {
            g[self.dev_off[k] + d.params.angle_index()] = -1.0;
        }
        g
    }

    /// Tangent of a rigid rotation of the global frame: network phasors
    /// turn, device angles shift, device-frame states stay.
    pub fn rotation_generator(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        let mut rot = |o: usize| {
            g[o] = -x[o + 1];
            g[o + 1] = x[o];
        };
        for o in &self.line_off {
            rot(*o);
        }
        for o in self.load_off.iter().flatten() {
            rot(*o);
        }
        for o in self.node.iter().flatten() {
            rot(*o);
        }
        for (k, d) in self.devices.iter().enumerate() {
            g[self.dev_off[k] + d.params.angle_index()] = 1.0;
        }
        g
    }

    /// Flat start: unit voltages, load currents from Ohm's law, device
    /// guesses, zero line currents.
    pub fn initial_guess(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        let v0 = self.top.buses.iter().find_map(|b| b.stiff).unwrap_or(C64::new(1.0, 0.0));
        for (k, d) in self.devices.iter().enumerate() {
            let o = self.dev_off[k];
            let g = d.params.initial_guess();
            x[o..o + g.len()].copy_from_slice(&g);
            x[o + d.params.angle_index()] = v0.arg();
        }
        for o in self.node.iter().flatten() {
            x[*o] = v0.re;
            x[*o + 1] = v0.im;
        }
        for (k, b) in self.top.buses.iter().enumerate() {
            if let (Some(o), Some(l)) = (self.load_off[k], b.load) {
                let i = v0 / C64::new(l.r, l.x);
                x[o] = i.re;
                x[o + 1] = i.im;
            }
        }
        x
    }

    /// Solve `f(x) = 0` by damped Newton from `x0` (or the flat start). For
    /// islands the frame speed `W` is an extra unknown and the reference
    /// device angle is pinned to zero. On success `self.w` is updated.
    pub fn equilibrium(&mut self, x0: Option<&[f64]>) -> Result<Equilibrium> {
        let n = self.n;
        let mut x = match x0 {
            Some(v) if v.len() == n => v.to_vec(),
            Some(_) => return Err(Error::InvalidInput("initial state has the wrong length".into())),
            None => self.initial_guess(),
        };
        let pin = self.reference.map(|r| self.dev_off[r] + self.devices[r].params.angle_index());
        let m = n + usize::from(pin.is_some());
        let resid = |s: &mut System, x: &[f64]| -> Vec<f64> {
            let mut f = vec![0.0; m];
            s.rhs(x, &mut f[..n]);
            if let Some(p) = pin {
                f[n] = x[p];
            }
            f
        };
        let norm = |f: &[f64]| f.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut f = resid(self, &x);
        let mut iterations = 0;
        let max_iter = 100;
        loop {
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::NoConvergence { what: "equilibrium".into(), residual: f64::INFINITY });
            }
            let jac = self.jacobian(&x);
            let jm = if let Some(p) = pin {
                let g = self.dfdw(&x);
                let mut big = Mat::zeros(m, m);
                big.view_mut((0, 0), (n, n)).copy_from(&jac);
                for r in 0..n {
                    big[(r, n)] = g[r];
                }
                big[(n, p)] = 1.0;
                big
            } else {
                jac
            };
            let neg: Vec<f64> = f.iter().map(|v| -v).collect();
            let dz = linalg::solve(&jm, &neg)?;
            let step_size = dz.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
            let f0 = norm(&f);
            let mut lambda = 1.0;
            let (x_old, w_old) = (x.clone(), self.w);
            loop {
                for k in 0..n {
                    x[k] = x_old[k] + lambda * dz[k];
                }
                if pin.is_some() {
                    self.w = w_old + lambda * dz[n];
                }
                let fn_ = resid(self, &x);
                let n1 = norm(&fn_);
                if n1.is_finite() && (n1 < f0 || lambda < 1e-4) {
                    f = fn_;
                    break;
                }
                lambda *= 0.5;
            }
            iterations += 1;
            let res = f.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
            if step_size * lambda < 1e-11 && res < 1e-6 {
                return Ok(Equilibrium { x, w: self.w, iterations, residual: res });
            }
            if iterations >= max_iter {
                return Err(Error::NoConvergence { what: "equilibrium".into(), residual: res });
            }
        }
    }
}

/// Linearized interconnected system.
#[derive(Clone, Debug)]
pub struct WholeSystemModel {
    /// State matrix. For islands this is the quotient by the frame
    /// rotation (one state fewer than `labels`).
    pub a: Mat,
    /// Labels of the full state vector.
    pub labels: Vec<StateLabel>,
    /// Bus ids in state-matrix order of bus nodes.
    pub bus_map: Vec<usize>,
    /// Equilibrium it was linearized at.
    pub equilibrium: Equilibrium,
    /// Whether the rotation quotient was applied.
    pub island: bool,
}

/// Build the system, find its equilibrium and linearize it.
pub fn assemble(top: NetworkTopology, devices: Vec<Device>) -> Result<WholeSystemModel> {
    let mut sys = System::new(top, devices)?;
    let eq = sys.equilibrium(None)?;
    linearize(&sys, eq)
}

/// Linearize `sys` at a known equilibrium (its `w` must match).
pub fn linearize(sys: &System, eq: Equilibrium) -> Result<WholeSystemModel> {
    let j = sys.jacobian(&eq.x);
    if j.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite Jacobian".into()));
    }
    let a = if sys.is_island() {
        let g = sys.rotation_generator(&eq.x);
        let q = linalg::complement_basis(&g);
        q.transpose() * &j * &q
    } else {
        j
    };
    Ok(WholeSystemModel {
        a,
        labels: sys.labels(),
        bus_map: sys.topology().buses.iter().map(|b| b.id).collect(),
        equilibrium: eq,
        island: sys.is_island(),
    })
}

/// Single-inverter-infinite-bus layout: stiff bus 0 at 1∠0 behind
/// `Z_g = c·(1/5 + j)` to the device bus 1.
pub fn siib(params: DeviceParams, grid_scale: f64) -> (NetworkTopology, Vec<Device>) {
    let mut inf = Bus::new(0);
    inf.stiff = Some(C64::new(1.0, 0.0));
    let top = NetworkTopology {
        omega0: params.omega0(),
        buses: vec![inf, Bus::new(1)],
        lines: vec![Line::new(0, 1, grid_scale / 5.0, grid_scale)],
    };
    let name = match params {
        DeviceParams::Gfm(_) => "gfm",
        DeviceParams::Gfl(_) => "gfl",
    };
    (top, vec![Device { name: name.into(), bus: 1, rating: 1.0, params }])
}

const IEEE14_LINES: [(usize, usize, f64, f64, f64); 20] = [
    (1, 2, 0.01938, 0.05917, 0.0528),
    (1, 5, 0.05403, 0.22304, 0.0492),
    (2, 3, 0.04699, 0.19797, 0.0438),
    (2, 4, 0.05811, 0.17632, 0.0340),
    (2, 5, 0.05695, 0.17388, 0.0346),
    (3, 4, 0.06701, 0.17103, 0.0128),
    (4, 5, 0.01335, 0.04211, 0.0),
    (4, 7, 0.0, 0.20912, 0.0),
    (4, 9, 0.0, 0.55618, 0.0),
    (5, 6, 0.0, 0.25202, 0.0),
    (6, 11, 0.09498, 0.19890, 0.0),
    (6, 12, 0.12291, 0.25581, 0.0),
    (6, 13, 0.06615, 0.13027, 0.0),
    (7, 8, 0.0, 0.17615, 0.0),
    (7, 9, 0.0, 0.11001, 0.0),
    (9, 10, 0.03181, 0.08450, 0.0),
    (9, 14, 0.12711, 0.27038, 0.0),
    (10, 11, 0.08205, 0.19207, 0.0),
    (12, 13, 0.22092, 0.19988, 0.0),
    (13, 14, 0.17093, 0.34802, 0.0),
];

// MW, MVAr on a 100 MVA base.
const IEEE14_LOADS: [(usize, f64, f64); 11] = [
    (2, 21.7, 12.7),
    (3, 94.2, 19.0),
    (4, 47.8, -3.9),
    (5, 7.6, 1.6),
    (6, 11.2, 7.5),
    (9, 29.5, 16.6),
    (10, 9.0, 5.8),
    (11, 3.5, 1.8),
    (12, 6.1, 1.6),
    (13, 13.5, 5.8),
    (14, 14.9, 5.0),
];

/// Options for [`ieee14`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ieee14Options {
    /// Factor on the impedances of lines 1-2 and 1-5.
    pub line_scale: f64,
    /// Droop gains of the GFMs at buses 1, 3 and 6.
    pub gfm_m: [f64; 3],
    /// Factor on the PLL integral gain of both GFLs.
    pub gfl_ki_scale: f64,
}

impl Default for Ieee14Options {
    fn default() -> Self {
        Ieee14Options { line_scale: 1.0, gfm_m: [0.1, 0.05, 0.05], gfl_ki_scale: 1.0 }
    }
}

/// The 14-bus benchmark as an island: GFMs at buses 1, 3, 6, GFLs at
/// buses 2, 8, loads as constant series RL impedances (capacitive parts
/// dropped), line R floored at 0.05·X, 0.01 pu shunt at every bus.
pub fn ieee14(opt: &Ieee14Options) -> (NetworkTopology, Vec<Device>) {
    let mut buses: Vec<Bus> = (1..=14).map(Bus::new).collect();
    for b in &mut buses {
        b.shunt_b = 0.01;
    }
    buses[8].shunt_b += 0.19;
    for &(k, p, q) in &IEEE14_LOADS {
        let z = C64::new(1.0, 0.0) / C64::new(p, q.max(0.0)).scale(0.01).conj();
        buses[k - 1].load = Some(Load { r: z.re, x: z.im });
    }
    let lines = IEEE14_LINES
        .iter()
        .map(|&(a, b, r, x, bc)| {
            let sc = if a == 1 && (b == 2 || b == 5) { opt.line_scale } else { 1.0 };
            Line { from: a, to: b, r: r.max(0.05 * x) * sc, x: x * sc, b: bc, in_service: true }
        })
        .collect();
    let top = NetworkTopology { omega0: crate::OMEGA0, buses, lines };
    let mut devs = Vec::new();
    for (k, &(bus, disp, rating)) in [(1, 1.0, 6.0), (3, 0.8, 4.0), (6, 0.5, 6.0)].iter().enumerate() {
        let p = GfmParams { m: opt.gfm_m[k], p_ref: -disp / rating, ..GfmParams::default() };
        devs.push(Device { name: format!("gfm{bus}"), bus, rating, params: DeviceParams::Gfm(p) });
    }
    for &(bus, disp, rating) in &[(2, 0.4, 1.0), (8, 0.0, 0.5)] {
        let mut p = GflParams { id_ref: -disp / rating, ..GflParams::default() };
        p.ki *= opt.gfl_ki_scale;
        devs.push(Device { name: format!("gfl{bus}"), bus, rating, params: DeviceParams::Gfl(p) });
    }
    (top, devs)
}
