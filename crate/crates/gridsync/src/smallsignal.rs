//! Root-locus sweeps and stability verdicts for a single inverter behind a
//! grid impedance `Z_g = c·(1/5 + j)` pu.

use alloc::{format, string::String, vec::Vec};

use crate::devices::{modified_swing, DeviceModel, DeviceParams, GflParams, GfmParams};
use crate::dqframe::{OperatingPoint, RationalTransfer, TransferMatrix2, Unit};
use crate::network::{self, Equilibrium, System};
use crate::poly::Poly;
use crate::{hz, Error, Result, C64};

/// Poles with `|Re| ≤ MARGINAL_BAND` rad/s count as marginal.
pub const MARGINAL_BAND: f64 = 1e-6;

/// Stability verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// All poles strictly in the left half plane.
    Stable,
    /// Rightmost pole inside the marginal band.
    Marginal,
    /// Some pole to the right of the band.
    Unstable,
}

impl Verdict {
    /// Lower-case name.
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Marginal => "marginal",
            Verdict::Unstable => "unstable",
        }
    }
}

/// Classify a pole set by its largest real part.
pub fn classify(poles: &[C64]) -> Result<Verdict> {
    if poles.is_empty() {
        return Err(Error::InvalidInput("empty pole list".into()));
    }
    let max = poles.iter().map(|p| p.re).fold(f64::NEG_INFINITY, f64::max);
    Ok(if max > MARGINAL_BAND {
        Verdict::Unstable
    } else if max >= -MARGINAL_BAND {
        Verdict::Marginal
    } else {
        Verdict::Stable
    })
}

/// Poles with the dominant one summarised.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeReport {
    /// All poles, rad/s, sorted by descending real part.
    pub poles: Vec<C64>,
    /// Pole with the largest real part (positive imaginary part on ties).
    pub dominant: C64,
    /// `|Im(dominant)|/2π`.
    pub frequency_hz: f64,
    /// `−Re/|p|` of the dominant pole.
    pub damping_ratio: f64,
    /// Verdict.
    pub verdict: Verdict,
}

impl ModeReport {
    /// Summarise a pole set.
    pub fn from_poles(mut poles: Vec<C64>) -> Result<Self> {
        let verdict = classify(&poles)?;
        crate::poly::sort_modes(&mut poles);
        let dominant = poles[0];
        let mag = dominant.norm();
        Ok(ModeReport {
            dominant,
            frequency_hz: dominant.im.abs() / (2.0 * core::f64::consts::PI),
            damping_ratio: if mag > 0.0 { -dominant.re / mag } else { 0.0 },
            verdict,
            poles,
        })
    }

    /// Rightmost oscillatory pole (positive imaginary part), if any.
    pub fn dominant_oscillatory(&self) -> Option<C64> {
        self.poles.iter().copied().find(|p| p.im > 1e-6)
    }
}

/// Parameter swept by a [`SweepSpec`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    /// Grid scale `c` in `Z_g = c·(1/5 + j)` pu.
    GridScale,
    /// GFM droop gain, pu.
    DroopM,
    /// GFL PLL bandwidth, Hz.
    PllBandwidth,
    /// GFM voltage-loop bandwidth, Hz.
    VLoopBw,
    /// GFL current-loop bandwidth, Hz.
    ILoopBw,
}

impl SweepParam {
    /// Identifier used in files.
    pub fn id(&self) -> &'static str {
        match self {
            SweepParam::GridScale => "grid_scale",
            SweepParam::DroopM => "droop_m",
            SweepParam::PllBandwidth => "pll_bandwidth",
            SweepParam::VLoopBw => "v_loop_bw",
            SweepParam::ILoopBw => "i_loop_bw",
        }
    }

    /// Parse an identifier.
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "grid_scale" => SweepParam::GridScale,
            "droop_m" => SweepParam::DroopM,
            "pll_bandwidth" => SweepParam::PllBandwidth,
            "v_loop_bw" => SweepParam::VLoopBw,
            "i_loop_bw" => SweepParam::ILoopBw,
            _ => {
                return Err(Error::InvalidInput(format!(
                    "unknown sweep parameter {s:?} (grid_scale, droop_m, pll_bandwidth, v_loop_bw, i_loop_bw)"
                )))
            }
        })
    }
}

/// A one-parameter sweep of a single-inverter-infinite-bus system.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    /// Preset name.
    pub name: String,
    /// Swept parameter.
    pub param: SweepParam,
    /// First value.
    pub start: f64,
    /// Last value.
    pub end: f64,
    /// Number of points, ≥ 2.
    pub points: usize,
    /// Device template.
    pub device: DeviceParams,
    /// Grid scale used when the grid is not the swept parameter.
    pub grid_scale: f64,
}

impl SweepSpec {
    /// Check the invariants. A sweep with `start == end` is allowed only as
    /// a determinism probe with exactly two points.
    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::InvalidInput("a sweep needs at least 2 points".into()));
        }
        if !(self.start.is_finite() && self.end.is_finite() && self.grid_scale > 0.0) {
            return Err(Error::InvalidInput("sweep bounds must be finite and the grid scale > 0".into()));
        }
        if self.start == self.end && self.points != 2 {
            return Err(Error::InvalidInput("start equals end".into()));
        }
        let ok = matches!(
            (self.param, &self.device),
            (SweepParam::GridScale, _)
                | (SweepParam::DroopM | SweepParam::VLoopBw, DeviceParams::Gfm(_))
                | (SweepParam::PllBandwidth | SweepParam::ILoopBw, DeviceParams::Gfl(_))
        );
        if !ok {
            return Err(Error::InvalidInput(format!("{} does not apply to this device kind", self.param.id())));
        }
        Ok(())
    }

    /// Evenly spaced parameter values.
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n).map(|k| self.start + (self.end - self.start) * k as f64 / (n - 1) as f64).collect()
    }

    /// Device and grid scale at one sweep value.
    pub fn at(&self, value: f64) -> (DeviceParams, f64) {
        let mut dev = self.device;
        let mut c = self.grid_scale;
        match (self.param, &mut dev) {
            (SweepParam::GridScale, _) => c = value,
            (SweepParam::DroopM, DeviceParams::Gfm(p)) => p.m = value,
            (SweepParam::VLoopBw, DeviceParams::Gfm(p)) => p.omega_v = hz(value),
            (SweepParam::PllBandwidth, DeviceParams::Gfl(p)) => *p = p.with_pll_bandwidth(hz(value)),
            (SweepParam::ILoopBw, DeviceParams::Gfl(p)) => p.omega_i = hz(value),
            _ => {}
        }
        (dev, c)
    }
}

/// `Z_g+ = R + (s + jΩ0)L` for `Z_g = c·(1/5 + j)`.
pub fn grid_impedance(grid_scale: f64, omega0: f64) -> TransferMatrix2 {
    let (r, x) = (grid_scale / 5.0, grid_scale);
    let z = RationalTransfer::poly(Poly::new(alloc::vec![C64::new(x / omega0, 0.0), C64::new(r, x)]), Unit::Impedance);
    TransferMatrix2::dqpm_diagonal(z)
}

/// Single-inverter-infinite-bus case at its nonlinear equilibrium.
#[derive(Clone, Debug)]
pub struct SiibCase {
    /// Port model at the equilibrium.
    pub device: DeviceModel,
    /// `Z_g` in dq±.
    pub grid: TransferMatrix2,
    /// Nonlinear system.
    pub system: System,
    /// Its equilibrium.
    pub equilibrium: Equilibrium,
}

impl SiibCase {
    /// Build the system, solve for the equilibrium and read the operating
    /// point in the device frame.
    pub fn new(params: DeviceParams, grid_scale: f64) -> Result<Self> {
        if !(grid_scale > 0.0 && grid_scale.is_finite()) {
            return Err(Error::InvalidInput("grid scale must be > 0".into()));
        }
        let (top, devs) = network::siib(params, grid_scale);
        let mut system = System::new(top, devs)?;
        let equilibrium = system.equilibrium(None)?;
        let out = system.device_outputs(&equilibrium.x, 0);
        let mut op = OperatingPoint::new(out.v.re, out.v.im, out.i.re, out.i.im);
        op.theta0 = out.theta;
        op.omega0 = params.omega0();
        let device = match params {
            DeviceParams::Gfm(p) => DeviceModel::gfm(p, op)?,
            DeviceParams::Gfl(p) => DeviceModel::gfl(p, op)?,
        };
        Ok(SiibCase { device, grid: grid_impedance(grid_scale, params.omega0()), system, equilibrium })
    }

    /// `S′` of the case.
    pub fn swing(&self) -> Result<RationalTransfer> {
        modified_swing(&self.device, &self.grid)
    }

    /// Modes from the roots of `S′`.
    pub fn report(&self) -> Result<ModeReport> {
        ModeReport::from_poles(self.swing()?.zeros()?)
    }
}

/// Evaluate every sweep point; results ordered by parameter value as given.
pub fn root_locus(spec: &SweepSpec) -> Result<Vec<(f64, ModeReport)>> {
    spec.validate()?;
    spec.values()
        .into_iter()
        .map(|v| {
            let (dev, c) = spec.at(v);
            let rep = SiibCase::new(dev, c).and_then(|case| case.report()).map_err(|e| {
                let at = format!("{} = {v}", spec.param.id());
                match e {
                    Error::InvalidInput(m) => Error::InvalidInput(format!("{at}: {m}")),
                    Error::NoConvergence { what, residual } => {
                        Error::NoConvergence { what: format!("{at}: {what}"), residual }
                    }
                    other => Error::Numerical(format!("{at}: {other}")),
                }
            })?;
            Ok((v, rep))
        })
        .collect()
}

/// Default GFM template for sweeps: default parameters with 0.8 pu generation.
pub fn sweep_gfm() -> DeviceParams {
    DeviceParams::Gfm(GfmParams { p_ref: -0.8, ..GfmParams::default() })
}

/// Default GFL template for sweeps: default parameters with 0.8 pu generation.
pub fn sweep_gfl() -> DeviceParams {
    DeviceParams::Gfl(GflParams { id_ref: -0.8, ..GflParams::default() })
}

/// The six figure sweeps (fig7 to fig9), 21 points each.
pub fn paper_sweeps() -> Vec<SweepSpec> {
    let mk = |name: &str, param, start, end, device, grid_scale| SweepSpec {
        name: name.into(),
        param,
        start,
        end,
        points: 21,
        device,
        grid_scale,
    };
    alloc::vec![
        mk("gfm-grid-scale", SweepParam::GridScale, 0.3, 0.1, sweep_gfm(), 0.3),
        mk("gfl-grid-scale", SweepParam::GridScale, 0.4, 0.6, sweep_gfl(), 0.4),
        mk("gfm-droop", SweepParam::DroopM, 0.05, 0.2, sweep_gfm(), 0.3),
        mk("gfl-pll-bandwidth", SweepParam::PllBandwidth, 15.0, 60.0, sweep_gfl(), 0.4),
        mk("gfm-v-loop", SweepParam::VLoopBw, 250.0, 150.0, sweep_gfm(), 0.3),
        mk("gfl-i-loop", SweepParam::ILoopBw, 250.0, 150.0, sweep_gfl(), 0.4),
    ]
}

/// Preset by name.
pub fn preset(name: &str) -> Result<SweepSpec> {
    paper_sweeps()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::InvalidInput(format!("unknown preset {name:?}")))
}

/// Continuous tracks through a locus: each track follows its nearest pole
/// at the next sweep point (greedy, closest pairs first).
pub fn pair_loci(locus: &[(f64, ModeReport)]) -> Vec<Vec<C64>> {
    let Some(first) = locus.first() else { return Vec::new() };
    let mut tracks: Vec<Vec<C64>> = first.1.poles.iter().map(|p| alloc::vec![*p]).collect();
    for (_, rep) in &locus[1..] {
        let next = &rep.poles;
        let mut pairs = Vec::new();
        for (t, tr) in tracks.iter().enumerate() {
            let last = tr[tr.len() - 1];
            for (k, p) in next.iter().enumerate() {
                pairs.push(((last - p).norm(), t, k));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut used_t = alloc::vec![false; tracks.len()];
        let mut used_k = alloc::vec![false; next.len()];
        let mut assign = alloc::vec![None; tracks.len()];
        for (_, t, k) in pairs {
            if !used_t[t] && !used_k[k] {
                used_t[t] = true;
                used_k[k] = true;
                assign[t] = Some(k);
            }
        }
        for (t, a) in assign.into_iter().enumerate() {
            if let Some(k) = a {
                tracks[t].push(next[k]);
            }
        }
    }
    tracks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&[C64::new(-1.0, 2.0), C64::new(-1.0, -2.0)]).unwrap(), Verdict::Stable);
        assert_eq!(classify(&[C64::new(0.5, 0.0)]).unwrap(), Verdict::Unstable);
        assert_eq!(classify(&[C64::new(0.0, 0.0)]).unwrap(), Verdict::Marginal);
        assert!(classify(&[]).is_err());
    }

    #[test]
    fn sweep_spec_checks_device_kind() {
        let mut s = preset("gfm-droop").unwrap();
        s.device = sweep_gfl();
        assert!(s.validate().is_err());
        let mut s = preset("gfm-droop").unwrap();
        s.points = 1;
        assert!(s.validate().is_err());
    }

    #[test]
    fn pairing_follows_moving_poles() {
        let mk = |a: f64| ModeReport::from_poles(alloc::vec![C64::new(-1.0 + a, 10.0), C64::new(-5.0, 0.0)]).unwrap();
        let tracks = pair_loci(&[(0.0, mk(0.0)), (1.0, mk(0.5)), (2.0, mk(1.0))]);
        assert_eq!(tracks.len(), 2);
        assert!(tracks.iter().any(|t| t.iter().all(|p| p.im == 10.0)));
    }
}
