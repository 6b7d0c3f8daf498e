//! JSON topology, scenario and two-inverter case files.
//!
//! Topology: `{omega0_hz, buses:[{id, load_r_pu?, load_x_pu?, shunt_b_pu?,
//! stiff?}], lines:[{from, to, r_pu, x_pu, b_pu?}], devices:[{bus, kind,
//! name?, rating?, params?}]}`. A scenario adds `sim` and `events`.

use std::path::Path;

use gridsync::devices::{DeviceParams, GflParams, GfmParams};
use gridsync::network::{Bus, Device, Line, Load, NetworkTopology};
use gridsync::timedomain::{Action, Event, SimConfig};
use gridsync::{hz, C64};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StiffJson {
    pub v_pu: f64,
    #[serde(default)]
    pub angle_deg: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusJson {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_r_pu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_x_pu: Option<f64>,
    #[serde(default)]
    pub shunt_b_pu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stiff: Option<StiffJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineJson {
    pub from: usize,
    pub to: usize,
    pub r_pu: f64,
    pub x_pu: f64,
    #[serde(default)]
    pub b_pu: f64,
}

/// Controller settings; unset fields keep the defaults. Bandwidths in Hz.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsJson {
    pub m: Option<f64>,
    pub omega_f_hz: Option<f64>,
    pub omega_v_hz: Option<f64>,
    pub p_ref: Option<f64>,
    pub v_ref: Option<f64>,
    pub omega_pll_hz: Option<f64>,
    pub kp: Option<f64>,
    pub ki: Option<f64>,
    pub omega_i_hz: Option<f64>,
    pub id_ref: Option<f64>,
    pub iq_ref: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindJson {
    Gfm,
    Gfl,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceJson {
    pub bus: usize,
    pub kind: KindJson,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "one")]
    pub rating: f64,
    #[serde(default)]
    pub params: ParamsJson,
}

fn one() -> f64 {
    1.0
}

fn fifty() -> f64 {
    50.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyJson {
    #[serde(default = "fifty")]
    pub omega0_hz: f64,
    pub buses: Vec<BusJson>,
    #[serde(default)]
    pub lines: Vec<LineJson>,
    #[serde(default)]
    pub devices: Vec<DeviceJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimJson {
    pub dt: Option<f64>,
    pub duration: Option<f64>,
    pub decimation: Option<usize>,
    pub divergence_bound: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActionJson {
    SetParam { time: f64, device: usize, name: String, value: f64 },
    StepRef { time: f64, device: usize, name: String, value: f64 },
    Fault { time: f64, bus: usize, r_fault_pu: f64 },
    ClearFault { time: f64, bus: usize },
    TripLine { time: f64, from: usize, to: usize },
    CloseLine { time: f64, from: usize, to: usize },
    SetLine { time: f64, from: usize, to: usize, r_pu: f64, x_pu: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioJson {
    #[serde(default = "fifty")]
    pub omega0_hz: f64,
    pub buses: Vec<BusJson>,
    #[serde(default)]
    pub lines: Vec<LineJson>,
    #[serde(default)]
    pub devices: Vec<DeviceJson>,
    #[serde(default)]
    pub sim: Option<SimJson>,
    #[serde(default)]
    pub events: Vec<ActionJson>,
}

/// Parse JSON text, reporting the field path, line and column on failure.
pub fn parse<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CliError::Input(format!("{origin}:{}:{}: field `{path}`: {inner}", inner.line(), inner.column()))
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

impl ParamsJson {
    fn apply(&self, kind: KindJson, omega0: f64, origin: &str) -> Result<DeviceParams> {
        let bad = |f: &str| CliError::Input(format!("{origin}: `{f}` does not apply to a {kind:?} device"));
        match kind {
            KindJson::Gfm => {
                for (f, v) in [
                    ("omega_pll_hz", self.omega_pll_hz),
                    ("kp", self.kp),
                    ("ki", self.ki),
                    ("omega_i_hz", self.omega_i_hz),
                    ("id_ref", self.id_ref),
                    ("iq_ref", self.iq_ref),
                ] {
                    if v.is_some() {
                        return Err(bad(f));
                    }
                }
                let mut p = GfmParams {
                    omega0,
                    l: gridsync::devices::filter_l(omega0),
                    c: gridsync::devices::filter_c(omega0),
                    ..GfmParams::default()
                };
                if let Some(v) = self.m {
                    p.m = v;
                }
                if let Some(v) = self.omega_f_hz {
                    p.omega_f = hz(v);
                }
                if let Some(v) = self.omega_v_hz {
                    p.omega_v = hz(v);
                }
                if let Some(v) = self.p_ref {
                    p.p_ref = v;
                }
                if let Some(v) = self.v_ref {
                    p.v_ref = v;
                }
                Ok(DeviceParams::Gfm(p))
            }
            KindJson::Gfl => {
                for (f, v) in [
                    ("m", self.m),
                    ("omega_f_hz", self.omega_f_hz),
                    ("omega_v_hz", self.omega_v_hz),
                    ("p_ref", self.p_ref),
                    ("v_ref", self.v_ref),
                ] {
                    if v.is_some() {
                        return Err(bad(f));
                    }
                }
                let mut p = GflParams {
                    omega0,
                    l: gridsync::devices::filter_l(omega0),
                    c: gridsync::devices::filter_c(omega0),
                    ..GflParams::default()
                };
                if let Some(v) = self.omega_pll_hz {
                    p = p.with_pll_bandwidth(hz(v));
                }
                if let Some(v) = self.kp {
                    p.kp = v;
                }
                if let Some(v) = self.ki {
                    p.ki = v;
                }
                if let Some(v) = self.omega_i_hz {
                    p.omega_i = hz(v);
                }
                if let Some(v) = self.id_ref {
                    p.id_ref = v;
                }
                if let Some(v) = self.iq_ref {
                    p.iq_ref = v;
                }
                Ok(DeviceParams::Gfl(p))
            }
        }
    }
}

fn build(
    omega0_hz: f64,
    buses: &[BusJson],
    lines: &[LineJson],
    devices: &[DeviceJson],
    origin: &str,
) -> Result<(NetworkTopology, Vec<Device>)> {
    if !(omega0_hz > 0.0 && omega0_hz.is_finite()) {
        return Err(CliError::Input(format!("{origin}: omega0_hz must be > 0")));
    }
    let omega0 = hz(omega0_hz);
    let mut out_buses = Vec::with_capacity(buses.len());
    for (k, b) in buses.iter().enumerate() {
        let load = match (b.load_r_pu, b.load_x_pu) {
            (None, None) => None,
            (r, x) => Some(Load { r: r.unwrap_or(0.0), x: x.unwrap_or(0.0) }),
        };
        let stiff = b.stiff.as_ref().map(|s| C64::from_polar(s.v_pu, s.angle_deg.to_radians()));
        if load.is_some_and(|l| l.r < 0.0 || l.x < 0.0 || l.r == 0.0 && l.x == 0.0) {
            return Err(CliError::Input(format!(
                "{origin}: buses[{k}]: load impedance must be non-negative and non-zero"
            )));
        }
        out_buses.push(Bus { id: b.id, load, shunt_b: b.shunt_b_pu, stiff });
    }
    let out_lines = lines
        .iter()
        .map(|l| Line { from: l.from, to: l.to, r: l.r_pu, x: l.x_pu, b: l.b_pu, in_service: true })
        .collect();
    let top = NetworkTopology { omega0, buses: out_buses, lines: out_lines };
    let mut devs = Vec::with_capacity(devices.len());
    for (k, d) in devices.iter().enumerate() {
        let at = format!("{origin}: devices[{k}]");
        let params = d.params.apply(d.kind, omega0, &at)?;
        params.validate().map_err(|e| CliError::Input(format!("{at}: {e}")))?;
        let name = d
            .name
            .clone()
            .unwrap_or_else(|| format!("{}{}", if d.kind == KindJson::Gfm { "gfm" } else { "gfl" }, d.bus));
        devs.push(Device { name, bus: d.bus, rating: d.rating, params });
    }
    top.validate().map_err(|e| CliError::Input(format!("{origin}: {e}")))?;
    Ok((top, devs))
}

impl TopologyJson {
    /// Core topology and devices.
    pub fn to_model(&self, origin: &str) -> Result<(NetworkTopology, Vec<Device>)> {
        build(self.omega0_hz, &self.buses, &self.lines, &self.devices, origin)
    }
}

impl ActionJson {
    fn to_event(&self) -> Event {
        let (time, action) = match self.clone() {
            ActionJson::SetParam { time, device, name, value } => (time, Action::SetParam { device, name, value }),
            ActionJson::StepRef { time, device, name, value } => (time, Action::StepRef { device, name, value }),
            ActionJson::Fault { time, bus, r_fault_pu } => (time, Action::Fault { bus, r_fault: r_fault_pu }),
            ActionJson::ClearFault { time, bus } => (time, Action::ClearFault { bus }),
            ActionJson::TripLine { time, from, to } => (time, Action::TripLine { from, to }),
            ActionJson::CloseLine { time, from, to } => (time, Action::CloseLine { from, to }),
            ActionJson::SetLine { time, from, to, r_pu, x_pu } => {
                (time, Action::SetLine { from, to, r: r_pu, x: x_pu })
            }
        };
        Event { time, action }
    }
}

/// A loaded scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub topology: NetworkTopology,
    pub devices: Vec<Device>,
    pub events: Vec<Event>,
    pub sim: SimConfig,
}

impl ScenarioJson {
    /// Core objects, with events checked against the device and bus lists.
    pub fn to_scenario(&self, origin: &str) -> Result<Scenario> {
        let (topology, devices) = build(self.omega0_hz, &self.buses, &self.lines, &self.devices, origin)?;
        let mut sim = SimConfig::default();
        if let Some(s) = &self.sim {
            sim.dt = s.dt.unwrap_or(sim.dt);
            sim.duration = s.duration.unwrap_or(sim.duration);
            sim.decimation = s.decimation.unwrap_or(sim.decimation);
            sim.divergence_bound = s.divergence_bound.unwrap_or(sim.divergence_bound);
        }
        sim.validate().map_err(|e| CliError::Input(format!("{origin}: sim: {e}")))?;
        let mut events = Vec::with_capacity(self.events.len());
        for (k, a) in self.events.iter().enumerate() {
            let ev = a.to_event();
            let at = format!("{origin}: events[{k}]");
            if !(ev.time >= 0.0 && ev.time.is_finite()) {
                return Err(CliError::Input(format!("{at}: time must be ≥ 0")));
            }
            match &ev.action {
                Action::SetParam { device, .. } | Action::StepRef { device, .. } if *device >= devices.len() => {
                    return Err(CliError::Input(format!("{at}: no device {device}")));
                }
                Action::SetParam { device, name, value } | Action::StepRef { device, name, value } => {
                    let mut p = devices[*device].params;
                    p.set_param(name, *value).map_err(|e| CliError::Input(format!("{at}: {e}")))?;
                }
                Action::Fault { bus, .. } | Action::ClearFault { bus } => {
                    topology.bus_index(*bus).map_err(|e| CliError::Input(format!("{at}: {e}")))?;
                }
                Action::TripLine { from, to } | Action::CloseLine { from, to } | Action::SetLine { from, to, .. } => {
                    topology.line_index(*from, *to).map_err(|e| CliError::Input(format!("{at}: {e}")))?;
                }
            }
            events.push(ev);
        }
        Ok(Scenario { topology, devices, events, sim })
    }
}

/// Read and convert a topology file.
pub fn load_topology(path: &Path) -> Result<(NetworkTopology, Vec<Device>)> {
    let origin = path.display().to_string();
    parse::<TopologyJson>(&read(path)?, &origin)?.to_model(&origin)
}

/// Read and convert a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let origin = path.display().to_string();
    parse::<ScenarioJson>(&read(path)?, &origin)?.to_scenario(&origin)
}

/// Parse `1-2,1-5:0.2` into line pairs and a factor.
pub fn parse_line_scaling(s: &str) -> Result<(Vec<(usize, usize)>, f64)> {
    let bad = || CliError::Input(format!("--scale-lines {s:?}: expected FROM-TO[,FROM-TO...]:FACTOR"));
    let (pairs, factor) = s.rsplit_once(':').ok_or_else(bad)?;
    let factor: f64 = factor.trim().parse().map_err(|_| bad())?;
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(CliError::Input("--scale-lines factor must be > 0".into()));
    }
    let mut out = Vec::new();
    for p in pairs.split(',') {
        let (a, b) = p.split_once('-').ok_or_else(bad)?;
        out.push((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?));
    }
    Ok((out, factor))
}

/// Multiply the series impedance of the listed lines by `factor`.
pub fn scale_lines(top: &mut NetworkTopology, pairs: &[(usize, usize)], factor: f64) -> Result<()> {
    for &(a, b) in pairs {
        let k = top.line_index(a, b).map_err(|e| CliError::Input(format!("--scale-lines: {e}")))?;
        top.lines[k].r *= factor;
        top.lines[k].x *= factor;
    }
    Ok(())
}

/// Apply `DEVICE.PARAM=VALUE` overrides; DEVICE is an index or a name.
pub fn apply_overrides(devices: &mut [Device], sets: &[String]) -> Result<()> {
    for s in sets {
        let bad = || CliError::Input(format!("--set {s:?}: expected DEVICE.PARAM=VALUE"));
        let (lhs, v) = s.split_once('=').ok_or_else(bad)?;
        let (dev, name) = lhs.split_once('.').ok_or_else(bad)?;
        let value: f64 = v.trim().parse().map_err(|_| bad())?;
        let k = match dev.parse::<usize>() {
            Ok(k) if k < devices.len() => k,
            _ => devices
                .iter()
                .position(|d| d.name == dev)
                .ok_or_else(|| CliError::Input(format!("--set {s:?}: no device {dev:?}")))?,
        };
        // bandwidths may be given in Hz, as in the JSON files
        let (name, value) = match name.strip_suffix("_hz") {
            Some(base) => (base, gridsync::hz(value)),
            None => (name, value),
        };
        devices[k].params.set_param(name, value).map_err(|e| CliError::Input(format!("--set {s:?}: {e}")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_field_reports_path_and_line() {
        let text = "{\n  \"buses\": [{\"id\": 1, \"lod_r_pu\": 1.0}]\n}";
        let err = parse::<TopologyJson>(text, "t.json").unwrap_err().to_string();
        assert!(err.contains("t.json:2:"), "{err}");
        assert!(err.contains("buses[0]"), "{err}");
    }

    #[test]
    fn line_scaling_syntax() {
        let (p, f) = parse_line_scaling("1-2,1-5:0.2").unwrap();
        assert_eq!(p, vec![(1, 2), (1, 5)]);
        assert_eq!(f, 0.2);
        assert!(parse_line_scaling("1-2").is_err());
        assert!(parse_line_scaling("1-2:-1").is_err());
    }

    #[test]
    fn gfl_fields_rejected_on_gfm() {
        let text = r#"{"buses":[{"id":1,"load_r_pu":1}],"devices":[{"bus":1,"kind":"gfm","params":{"ki":1}}]}"#;
        let t: TopologyJson = parse(text, "x").unwrap();
        assert!(t.to_model("x").is_err());
    }
}
