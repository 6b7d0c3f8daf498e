//! Inverter parameters, synchronization transfers, swing characteristics,
//! inner-loop port models and the modified swing equations.
//!
//! Sign conventions: port currents are positive *into* the inverter (load
//! convention), so a generating inverter has `i_d0 < 0`. GFM power
//! references follow the same convention.

mod dynamics;
mod swing;

pub use dynamics::{DeviceOutputs, DeviceParams, LinearDevice};
pub use swing::modified_swing;

use alloc::format;

use crate::dqframe::{OperatingPoint, RationalTransfer, TransferMatrix2, Unit};
use crate::poly::Poly;
use crate::{Error, Result, C64, J, OMEGA0};

/// Filter inductance in pu·s (0.05 pu reactance at Ω0).
pub fn filter_l(omega0: f64) -> f64 {
    0.05 / omega0
}

/// Filter capacitance in pu·s (0.02 pu susceptance at Ω0).
pub fn filter_c(omega0: f64) -> f64 {
    0.02 / omega0
}

/// Grid-forming (droop) inverter parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GfmParams {
    /// Droop gain, pu frequency per pu power.
    pub m: f64,
    /// Power-measurement filter bandwidth, rad/s. `INFINITY` removes the
    /// filter (transfer-function use only).
    pub omega_f: f64,
    /// Voltage-loop bandwidth, rad/s.
    pub omega_v: f64,
    /// Filter inductance, pu·s.
    pub l: f64,
    /// Filter capacitance, pu·s.
    pub c: f64,
    /// Active-power reference, load convention.
    pub p_ref: f64,
    /// Voltage magnitude reference.
    pub v_ref: f64,
    /// Base angular frequency.
    pub omega0: f64,
}

impl Default for GfmParams {
    fn default() -> Self {
        GfmParams {
            m: 0.05,
            omega_f: crate::hz(15.0),
            omega_v: crate::hz(250.0),
            l: filter_l(OMEGA0),
            c: filter_c(OMEGA0),
            p_ref: -0.8,
            v_ref: 1.0,
            omega0: OMEGA0,
        }
    }
}

/// PI gains derived from the loop bandwidths.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PiGains {
    /// Voltage-loop proportional gain (zero for GFL).
    pub kpv: f64,
    /// Voltage-loop integral gain (zero for GFL).
    pub kiv: f64,
    /// Current-loop proportional gain.
    pub kpi: f64,
    /// Current-loop integral gain.
    pub kii: f64,
}

impl GfmParams {
    /// Reject non-physical values.
    pub fn validate(&self) -> Result<()> {
        let finite = [self.m, self.omega_v, self.l, self.c, self.p_ref, self.v_ref, self.omega0];
        if finite.iter().any(|v| !v.is_finite()) || self.omega_f.is_nan() {
            return Err(Error::InvalidInput("non-finite GFM parameter".into()));
        }
        if self.m <= 0.0 {
            return Err(Error::InvalidInput(format!("droop gain m must be > 0, got {}", self.m)));
        }
        if self.omega_f <= 0.0 || self.omega_v < 0.0 || self.l <= 0.0 || self.c <= 0.0 {
            return Err(Error::InvalidInput("GFM bandwidths and filter values must be positive".into()));
        }
        if self.omega0 <= 0.0 {
            return Err(Error::InvalidInput("Ω0 must be positive".into()));
        }
        Ok(())
    }

    /// Filter time constant `T_f = 1/ω_f` (0 without filter).
    pub fn t_f(&self) -> f64 {
        if self.omega_f.is_finite() {
            1.0 / self.omega_f
        } else {
            0.0
        }
    }

    /// Droop gain in rad/s per pu power, `m·Ω0`.
    pub fn m_theta(&self) -> f64 {
        self.m * self.omega0
    }

    /// Voltage PI: `kpv = 4ω_v·C`, `kiv = 4ω_v²·C`; current PI at 16ω_v.
    pub fn gains(&self) -> PiGains {
        let wv = self.omega_v;
        let wc = 16.0 * wv;
        PiGains { kpv: 4.0 * wv * self.c, kiv: 4.0 * wv * wv * self.c, kpi: wc * self.l, kii: wc * wc * self.l / 4.0 }
    }
}

/// Grid-following (PLL) inverter parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GflParams {
    /// PLL bandwidth, rad/s (sets the default gains).
    pub omega_pll: f64,
    /// PLL proportional gain, rad/s per pu voltage.
    pub kp: f64,
    /// PLL integral gain.
    pub ki: f64,
    /// Current-loop bandwidth, rad/s.
    pub omega_i: f64,
    /// Filter inductance, pu·s.
    pub l: f64,
    /// Filter capacitance, pu·s.
    pub c: f64,
    /// d-axis current reference, load convention.
    pub id_ref: f64,
    /// q-axis current reference, load convention.
    pub iq_ref: f64,
    /// Base angular frequency.
    pub omega0: f64,
}

impl Default for GflParams {
    fn default() -> Self {
        GflParams {
            omega_pll: 0.0,
            kp: 0.0,
            ki: 0.0,
            omega_i: crate::hz(250.0),
            l: filter_l(OMEGA0),
            c: filter_c(OMEGA0),
            id_ref: -0.8,
            iq_ref: 0.0,
            omega0: OMEGA0,
        }
        .with_pll_bandwidth(crate::hz(15.0))
    }
}

impl GflParams {
    /// Set `ω_PLL` and the gains `kp = ω_PLL`, `ki = ω_PLL²/4`.
    pub fn with_pll_bandwidth(mut self, w: f64) -> Self {
        self.omega_pll = w;
        self.kp = w;
        self.ki = w * w / 4.0;
        self
    }

    /// Reject non-physical values. `kp = ki = 0` is allowed here (open PLL);
    /// analyses that need a synchronization loop check it themselves.
    pub fn validate(&self) -> Result<()> {
        let vals = [self.kp, self.ki, self.omega_i, self.l, self.c, self.id_ref, self.iq_ref, self.omega0];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite GFL parameter".into()));
        }
        if self.kp < 0.0 || self.ki < 0.0 || self.omega_i < 0.0 {
            return Err(Error::InvalidInput("PLL gains and bandwidths must be non-negative".into()));
        }
        if self.l <= 0.0 || self.c <= 0.0 || self.omega0 <= 0.0 {
            return Err(Error::InvalidInput("filter values and Ω0 must be positive".into()));
        }
        Ok(())
    }

    /// Current PI: `kpi = ω_i·L`, `kii = ω_i²·L/4`.
    pub fn gains(&self) -> PiGains {
        let wi = self.omega_i;
        PiGains { kpv: 0.0, kiv: 0.0, kpi: wi * self.l, kii: wi * wi * self.l / 4.0 }
    }
}

/// Frequency-droop synchronization `G_FD(s) = m/(1 + s·T_f)`.
pub fn g_fd(p: &GfmParams) -> Result<RationalTransfer> {
    p.validate()?;
    RationalTransfer::new(Poly::real(&[p.m]), Poly::real(&[p.t_f(), 1.0]), Unit::AngleGain)
}

/// PLL synchronization `G_PLL(s) = (kp·s + ki)/s`; a pure gain when `ki = 0`.
pub fn g_pll(p: &GflParams) -> Result<RationalTransfer> {
    p.validate()?;
    if p.ki == 0.0 {
        return Ok(RationalTransfer::gain(C64::new(p.kp, 0.0), Unit::AngleGain));
    }
    RationalTransfer::new(Poly::real(&[p.kp, p.ki]), Poly::real(&[1.0, 0.0]), Unit::AngleGain)
}

/// Swing coefficients `J·s² + K_D·s + K_S` of a characteristic polynomial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwingCoefficients {
    /// Inertia-like coefficient.
    pub j: f64,
    /// Damping-like coefficient.
    pub k_d: f64,
    /// Synchronizing coefficient.
    pub k_s: f64,
}

impl SwingCoefficients {
    /// GFM on an ideal source: `J = T_f/(mΩ0)`, `K_D = 1/(mΩ0)`,
    /// `K_S = −Im(conj(V0)·I0)`, which is `−I_q0` at unit voltage.
    pub fn gfm(p: &GfmParams, op: &OperatingPoint) -> Result<Self> {
        p.validate()?;
        op.validate()?;
        let mt = p.m_theta();
        Ok(SwingCoefficients { j: p.t_f() / mt, k_d: 1.0 / mt, k_s: -(op.v().conj() * op.i()).im })
    }

    /// GFL on an ideal source, normalised by `ki`: `J = 1/ki`,
    /// `K_D = kp·V_d0/ki`, `K_S = V_d0`. With `ki = 0` the common `s`
    /// is removed: `J = 1`, `K_D = kp·V_d0`, `K_S = 0`.
    pub fn gfl(p: &GflParams, op: &OperatingPoint) -> Result<Self> {
        p.validate()?;
        op.validate()?;
        if p.kp == 0.0 && p.ki == 0.0 {
            return Err(Error::Degenerate("PLL with kp = ki = 0 has no swing equation".into()));
        }
        if p.ki == 0.0 {
            return Ok(SwingCoefficients { j: 1.0, k_d: p.kp * op.v_d0, k_s: 0.0 });
        }
        Ok(SwingCoefficients { j: 1.0 / p.ki, k_d: p.kp * op.v_d0 / p.ki, k_s: op.v_d0 })
    }

    fn poly(&self) -> Poly {
        Poly::real(&[self.j, self.k_d, self.k_s])
    }
}

/// `S_iθ(s)` of a GFM on an ideal voltage source: a swing polynomial.
pub fn swing_char_gfm(p: &GfmParams, op: &OperatingPoint) -> Result<RationalTransfer> {
    let c = SwingCoefficients::gfm(p, op)?;
    Ok(RationalTransfer::poly(c.poly(), Unit::Characteristic))
}

/// `S_vθ(s)` of a GFL on an ideal voltage source.
///
/// `(s² + kp·V_d0·s + ki·V_d0)/(kp·s + ki)` written with coefficients
/// normalised by `ki`; for `ki = 0` it is `(s + kp·V_d0)/kp`.
pub fn swing_char_gfl(p: &GflParams, op: &OperatingPoint) -> Result<RationalTransfer> {
    let c = SwingCoefficients::gfl(p, op)?;
    if p.ki == 0.0 {
        return RationalTransfer::new(Poly::real(&[1.0, c.k_d]), Poly::real(&[p.kp]), Unit::Characteristic);
    }
    RationalTransfer::new(c.poly(), Poly::real(&[p.kp / p.ki, 1.0]), Unit::Characteristic)
}

// s·(L s² + kpi s + kii) and (kpi s + kii)((±jΩ0C − kpv)s − kiv): the
// inner-loop admittance Y_l± = N±/Dc seen from the capacitor voltage, in the
// generator direction.
pub(crate) fn gfm_inner_polys(p: &GfmParams) -> (Poly, Poly, Poly) {
    let g = p.gains();
    let dq = Poly::real(&[p.l, g.kpi, g.kii]);
    let dc = &dq * &Poly::s();
    let pi = Poly::real(&[g.kpi, g.kii]);
    let n = |sign: f64| {
        let f = Poly::new(alloc::vec![C64::new(-g.kpv, sign * p.omega0 * p.c), C64::new(-g.kiv, 0.0)]);
        &pi * &f
    };
    (dc, n(1.0), n(-1.0))
}

/// Inner-loop port impedance of a GFM with the frame frozen:
/// `Z_c± = 1/((s ± jΩ0)·C − Y_l±)`, diagonal in dq±.
///
/// At high frequency the filter capacitor dominates, so `Z_c → 1/(sC)`.
pub fn inner_impedance_gfm(p: &GfmParams, op: &OperatingPoint) -> Result<TransferMatrix2> {
    p.validate()?;
    op.validate()?;
    let (dc, n_plus, _) = gfm_inner_polys(p);
    let cap = Poly::new(alloc::vec![C64::new(p.c, 0.0), J * (p.omega0 * p.c)]);
    let y_den = &(&cap * &dc) - &n_plus;
    let z = RationalTransfer::new(dc, y_den, Unit::Impedance)?;
    Ok(TransferMatrix2::dqpm_diagonal(z))
}

/// Inner-loop port admittance of a GFL with the frame frozen:
/// `Y_c± = (s ± jΩ0)·C + s/(L s² + kpi·s + kii)`, diagonal in dq±.
pub fn inner_admittance_gfl(p: &GflParams, op: &OperatingPoint) -> Result<TransferMatrix2> {
    p.validate()?;
    op.validate()?;
    let g = p.gains();
    let dq = Poly::real(&[p.l, g.kpi, g.kii]);
    let cap = Poly::new(alloc::vec![C64::new(p.c, 0.0), J * (p.omega0 * p.c)]);
    let num = &(&cap * &dq) + &Poly::s();
    let y = RationalTransfer::new(num, dq, Unit::Admittance)?;
    Ok(TransferMatrix2::dqpm_diagonal(y))
}

/// Which synchronization a device model carries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeviceKind {
    /// Droop-controlled voltage source.
    Gfm(GfmParams),
    /// PLL-synchronized current source.
    Gfl(GflParams),
}

/// Small-signal port model of one inverter.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceModel {
    /// Parameters.
    pub kind: DeviceKind,
    /// Operating point in the device frame.
    pub op: OperatingPoint,
    /// `G_FD` or `G_PLL`.
    pub sync: RationalTransfer,
    /// `Z_FD + Z_c` (GFM, impedance) or `Y_PLL + Y_c` (GFL, admittance), dq±.
    pub port: TransferMatrix2,
}

impl DeviceModel {
    /// GFM port: the virtual impedance of the droop loop plus the inner loops.
    pub fn gfm(p: GfmParams, op: OperatingPoint) -> Result<Self> {
        let kind = DeviceKind::Gfm(p);
        let port = sync_virtual_port(&kind, &op)?.add(&inner_impedance_gfm(&p, &op)?)?;
        Ok(DeviceModel { kind, op, sync: g_fd(&p)?, port })
    }

    /// GFL port: the virtual admittance of the PLL plus the inner loop.
    pub fn gfl(p: GflParams, op: OperatingPoint) -> Result<Self> {
        let kind = DeviceKind::Gfl(p);
        let port = sync_virtual_port(&kind, &op)?.add(&inner_admittance_gfl(&p, &op)?)?;
        Ok(DeviceModel { kind, op, sync: g_pll(&p)?, port })
    }
}

/// Virtual synchronization port of a device.
///
/// GFM: `Z_FD = u·wᵀ/S_iθ`, `u = [jV0+, −jV0−]`, `w = ½[V0−, V0+]`.
/// GFL: `Y_PLL = u·cᵀ/S_vθ`, `u = [jI0+, −jI0−]`, `c = [1/2j, −1/2j]`.
/// Both are rank one in dq±. A zero steady voltage (GFM) or current (GFL)
/// leaves the synchronization undefined and is rejected.
pub fn sync_virtual_port(kind: &DeviceKind, op: &OperatingPoint) -> Result<TransferMatrix2> {
    op.validate()?;
    let (u, w, s_char, unit) = match kind {
        DeviceKind::Gfm(p) => {
            let v = op.v();
            if v.norm() == 0.0 {
                return Err(Error::Degenerate("zero steady voltage: synchronization undefined".into()));
            }
            let s = swing_char_gfm(p, op)?;
            ([J * v, -J * v.conj()], [0.5 * v.conj(), 0.5 * v], s, Unit::Impedance)
        }
        DeviceKind::Gfl(p) => {
            let i = op.i();
            if i.norm() == 0.0 {
                return Err(Error::Degenerate("zero steady current: synchronization undefined".into()));
            }
            if p.kp == 0.0 && p.ki == 0.0 {
                return Ok(TransferMatrix2::zeros(crate::dqframe::Frame::DqPm, Unit::Admittance));
            }
            let s = swing_char_gfl(p, op)?;
            let c = C64::new(0.0, -0.5);
            ([J * i, -J * i.conj()], [c, -c], s, Unit::Admittance)
        }
    };
    let inv = s_char.inv()?.with_unit(unit);
    let e = |a: usize, b: usize| inv.scale(u[a] * w[b]);
    TransferMatrix2::new([[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]], crate::dqframe::Frame::DqPm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gfm_swing_coefficients_exact() {
        let p = GfmParams::default();
        let op = OperatingPoint::new(1.0, 0.0, -0.8, 0.3);
        let s = swing_char_gfm(&p, &op).unwrap();
        let mt = p.m * OMEGA0;
        assert_eq!(s.num().coeff(2).re, (1.0 / p.omega_f) / mt);
        assert_eq!(s.num().coeff(1).re, 1.0 / mt);
        assert_eq!(s.num().coeff(0).re, -0.3);
    }

    #[test]
    fn gfl_without_integral_is_first_order() {
        let p = GflParams { ki: 0.0, ..GflParams::default() };
        let op = OperatingPoint::new(1.0, 0.0, -0.8, 0.0);
        let s = swing_char_gfl(&p, &op).unwrap();
        assert_eq!(s.num().degree(), 1);
        let g = g_pll(&p).unwrap();
        assert_eq!(g.den().degree(), 0);
        let both_zero = GflParams { kp: 0.0, ki: 0.0, ..p };
        assert!(swing_char_gfl(&both_zero, &op).is_err());
    }

    #[test]
    fn virtual_ports_are_rank_one_and_mirrored() {
        let op = OperatingPoint::new(0.98, 0.05, -0.7, 0.2);
        let s = C64::new(0.3, 40.0);
        for kind in [DeviceKind::Gfm(GfmParams::default()), DeviceKind::Gfl(GflParams::default())] {
            let z = sync_virtual_port(&kind, &op).unwrap();
            assert!(z.mirror_error() < 1e-12);
            let g = z.eval(s);
            let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            assert!(det.norm() < 1e-12 * g[0][0].norm().max(1.0));
        }
        let zero = OperatingPoint::new(0.0, 0.0, 0.0, 0.0);
        assert!(sync_virtual_port(&DeviceKind::Gfm(GfmParams::default()), &zero).is_err());
        assert!(sync_virtual_port(&DeviceKind::Gfl(GflParams::default()), &zero).is_err());
    }

    #[test]
    fn gfm_inner_impedance_is_capacitive_at_high_frequency() {
        let p = GfmParams::default();
        let z = inner_impedance_gfm(&p, &OperatingPoint::new(1.0, 0.0, -0.8, 0.0)).unwrap();
        let s = C64::new(0.0, 1e7);
        let zc = z.get(0, 0).eval(s);
        let cap = 1.0 / ((s + J * OMEGA0) * p.c);
        assert!((zc - cap).norm() / cap.norm() < 1e-3);
    }
}
