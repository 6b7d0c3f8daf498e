//! Large-signal angle analysis of two-inverter systems.
//!
//! Every case reduces to one swing equation in the angle difference
//! `θ = θ1 − θ2`:
//!
//! ```text
//! J·θ̈ = S* − S(θ) − K_D·θ̇,   S(θ) = A·sin θ  or  A·cos θ
//! ```
//!
//! Inertias are in rad-consistent units: a droop GFM has
//! `J = T_f/(m·Ω0)`, `K_D = 1/(m·Ω0)`; a PLL GFL has `J = 1/k_i`,
//! `K_D = k_p·V/k_i`.

use alloc::{format, vec::Vec};

#[allow(unused_imports)] // shadowed by the inherent f64 methods whenever std is linked
use num_traits::Float;

use crate::{Error, Result};

use core::f64::consts::PI;

/// Which pair of inverters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseKind {
    /// Two droop-controlled voltage sources through a reactance.
    GfmGfm,
    /// Two PLL current sources across a shunt conductance.
    GflGfl,
    /// GFL (inverter 1) and GFM (inverter 2) through a reactance.
    GfmGfl,
}

/// Shape of `S(θ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// `A·sin θ`.
    Sine,
    /// `A·cos θ`.
    Cosine,
}

/// Two-inverter case with all signs resolved at construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoInverterCase {
    /// Kind.
    pub kind: CaseKind,
    /// Curve family of the governing equation.
    pub family: Family,
    /// Curve amplitude, pu.
    pub amplitude: f64,
    /// Setpoint `S*`, pu.
    pub s_ref: f64,
    /// Inertia of inverter 1 (may be `INFINITY`).
    pub j1: f64,
    /// Inertia of inverter 2 (may be `INFINITY`).
    pub j2: f64,
    /// Effective inertia of the governing equation.
    pub j: f64,
    /// Damping of the governing equation (0 = undamped).
    pub k_d: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be > 0")))
    }
}

impl TwoInverterCase {
    /// Two GFMs: `P_Δ = (V1V2/X)·sin θ`, `S* = P1* − P2*`.
    pub fn gfm_gfm(v1: f64, v2: f64, x: f64, p1_ref: f64, p2_ref: f64, j: f64, k_d: f64) -> Result<Self> {
        positive("X", x)?;
        positive("J", j)?;
        Ok(TwoInverterCase {
            kind: CaseKind::GfmGfm,
            family: Family::Sine,
            amplitude: v1 * v2 / x,
            s_ref: p1_ref - p2_ref,
            j1: j,
            j2: j,
            j,
            k_d,
        })
    }

    /// Two GFLs: `Q_Δ = (I1I2/G)·sin θ`, `S* = −(Q1* − Q2*)`.
    pub fn gfl_gfl(i1: f64, i2: f64, g: f64, q1_ref: f64, q2_ref: f64, j: f64, k_d: f64) -> Result<Self> {
        positive("G", g)?;
        positive("J", j)?;
        Ok(TwoInverterCase {
            kind: CaseKind::GflGfl,
            family: Family::Sine,
            amplitude: i1 * i2 / g,
            s_ref: -(q1_ref - q2_ref),
            j1: j,
            j2: j,
            j,
            k_d,
        })
    }

    /// GFL 1 (current `I1`) with GFM 2 (voltage `V2`) through `X`.
    ///
    /// `J1 ≥ 3·J2`: the GFL barely moves and the GFM swings,
    /// `J2·θ̈ = P2* − V2·I1·cos θ`. `J2 ≥ 3·J1`: the GFL follows the GFM,
    /// `J1·θ̈ = (−Q1* + X·I1²) − V2·I1·sin θ`. Anything in between has no
    /// dominant inertia and is rejected. `d1`, `d2` are the damping-to-inertia
    /// ratios `K_D/J` of each inverter.
    #[allow(clippy::too_many_arguments)]
    pub fn gfm_gfl(
        i1: f64,
        v2: f64,
        x: f64,
        q1_ref: f64,
        p2_ref: f64,
        j1: f64,
        j2: f64,
        d1: f64,
        d2: f64,
    ) -> Result<Self> {
        positive("X", x)?;
        positive("J1", j1)?;
        positive("J2", j2)?;
        let base = TwoInverterCase {
            kind: CaseKind::GfmGfl,
            family: Family::Sine,
            amplitude: v2 * i1,
            s_ref: 0.0,
            j1,
            j2,
            j: 0.0,
            k_d: 0.0,
        };
        if j1 >= 3.0 * j2 {
            Ok(TwoInverterCase { family: Family::Cosine, s_ref: p2_ref, j: j2, k_d: d2 * j2, ..base })
        } else if j2 >= 3.0 * j1 {
            Ok(TwoInverterCase { s_ref: -q1_ref + x * i1 * i1, j: j1, k_d: d1 * j1, ..base })
        } else {
            Err(Error::InvalidInput(format!(
                "inertias {j1:.3e} and {j2:.3e} are within a factor 3: integrate both swing equations instead"
            )))
        }
    }

    /// Same case without damping.
    pub fn undamped(mut self) -> Self {
        self.k_d = 0.0;
        self
    }

    /// `S(θ)`.
    pub fn s(&self, theta: f64) -> f64 {
        match self.family {
            Family::Sine => self.amplitude * theta.sin(),
            Family::Cosine => self.amplitude * theta.cos(),
        }
    }

    /// `dS/dθ`.
    pub fn ds(&self, theta: f64) -> f64 {
        match self.family {
            Family::Sine => self.amplitude * theta.cos(),
            Family::Cosine => -self.amplitude * theta.sin(),
        }
    }

    // antiderivative of S
    fn s_int(&self, theta: f64) -> f64 {
        match self.family {
            Family::Sine => -self.amplitude * theta.cos(),
            Family::Cosine => self.amplitude * theta.sin(),
        }
    }

    /// `½Jθ̇² − ∫(S* − S)dθ`, constant along undamped trajectories.
    pub fn energy(&self, theta: f64, dtheta: f64) -> f64 {
        0.5 * self.j * dtheta * dtheta - self.s_ref * theta + self.s_int(theta)
    }
}

/// Sampled `S(θ)` over one period.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleCurve {
    /// Family.
    pub family: Family,
    /// Amplitude.
    pub amplitude: f64,
    /// Angles on `(−π, π]`.
    pub theta: Vec<f64>,
    /// `S(θ)`.
    pub s: Vec<f64>,
}

/// Sample the governing curve at `points` angles.
pub fn angle_curve(case: &TwoInverterCase, points: usize) -> AngleCurve {
    let n = points.max(2);
    let theta: Vec<f64> = (0..n).map(|k| -PI + 2.0 * PI * (k + 1) as f64 / n as f64).collect();
    let s = theta.iter().map(|&t| case.s(t)).collect();
    AngleCurve { family: case.family, amplitude: case.amplitude, theta, s }
}

/// Class of an equilibrium.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EqClass {
    /// `dS/dθ > 0`.
    Sep,
    /// `dS/dθ ≤ 0`.
    Uep,
}

/// Equilibria on `(−π, π]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Equilibria {
    /// `(θ, class)` sorted by angle.
    pub points: Vec<(f64, EqClass)>,
    /// `|S*|` exceeds the amplitude.
    pub none: bool,
}

impl Equilibria {
    /// The SEP, if any.
    pub fn sep(&self) -> Option<f64> {
        self.points.iter().find(|p| p.1 == EqClass::Sep).map(|p| p.0)
    }

    /// The UEP, if any.
    pub fn uep(&self) -> Option<f64> {
        self.points.iter().find(|p| p.1 == EqClass::Uep).map(|p| p.0)
    }
}

fn wrap(t: f64) -> f64 {
    let mut t = t % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Solve `S(θ) = S*`.
pub fn equilibria(case: &TwoInverterCase) -> Equilibria {
    let r = case.s_ref / case.amplitude;
    if r.is_nan() || r.abs() > 1.0 {
        return Equilibria { points: Vec::new(), none: true };
    }
    let (a, b) = match case.family {
        Family::Sine => (r.asin(), PI - r.asin()),
        Family::Cosine => (-r.acos(), r.acos()),
    };
    let mut pts: Vec<f64> = alloc::vec![wrap(a)];
    if (wrap(b) - wrap(a)).abs() > 1e-15 {
        pts.push(wrap(b));
    }
    pts.sort_by(|x, y| x.total_cmp(y));
    let points = pts.into_iter().map(|t| (t, if case.ds(t) > 0.0 { EqClass::Sep } else { EqClass::Uep })).collect();
    Equilibria { points, none: false }
}

/// `∫(S − S*)dθ` from the SEP up to the next UEP, in closed form.
pub fn max_decel_area(case: &TwoInverterCase) -> Result<f64> {
    let (sep, uep) = sep_uep(case)?;
    Ok(case.s_int(uep) - case.s_int(sep) - case.s_ref * (uep - sep))
}

/// SEP and the UEP above it (`uep > sep`).
pub fn sep_uep(case: &TwoInverterCase) -> Result<(f64, f64)> {
    let eq = equilibria(case);
    match (eq.sep(), eq.uep()) {
        (Some(s), Some(u)) => Ok((s, if u > s { u } else { u + 2.0 * PI })),
        _ => Err(Error::Degenerate("no SEP/UEP pair: setpoint beyond the curve amplitude".into())),
    }
}

/// A swing trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct SwingTrajectory {
    /// Time, s.
    pub t: Vec<f64>,
    /// `θ`, rad.
    pub theta: Vec<f64>,
    /// `θ̇`, rad/s.
    pub dtheta: Vec<f64>,
    /// `|θ̇|` exceeded the bound (pole slip).
    pub diverged: bool,
}

fn accel(case: &TwoInverterCase, th: f64, w: f64) -> f64 {
    (case.s_ref - case.s(th) - case.k_d * w) / case.j
}

/// Integrate with RK4 at step `dt` until `duration`, stopping when
/// `|θ̇| > bound`.
pub fn swing_ode(
    case: &TwoInverterCase,
    theta0: f64,
    dtheta0: f64,
    duration: f64,
    dt: f64,
    bound: f64,
) -> Result<SwingTrajectory> {
    let mut tr = SwingTrajectory { t: Vec::new(), theta: Vec::new(), dtheta: Vec::new(), diverged: false };
    integrate(case, theta0, dtheta0, 0.0, duration, dt, bound, &mut tr)?;
    Ok(tr)
}

#[allow(clippy::too_many_arguments)]
fn integrate(
    case: &TwoInverterCase,
    theta0: f64,
    dtheta0: f64,
    t0: f64,
    duration: f64,
    dt: f64,
    bound: f64,
    tr: &mut SwingTrajectory,
) -> Result<()> {
    if !(dt > 0.0 && duration >= 0.0 && case.j > 0.0 && case.j.is_finite()) {
        return Err(Error::InvalidInput("swing_ode needs dt > 0, duration ≥ 0 and a finite J > 0".into()));
    }
    let steps = (duration / dt).round() as usize;
    let (mut th, mut w) = (theta0, dtheta0);
    let skip_first = !tr.t.is_empty();
    for k in 0..=steps {
        if !(k == 0 && skip_first) {
            tr.t.push(t0 + k as f64 * dt);
            tr.theta.push(th);
            tr.dtheta.push(w);
        }
        if k == steps {
            break;
        }
        let (k1t, k1w) = (w, accel(case, th, w));
        let (k2t, k2w) = (w + 0.5 * dt * k1w, accel(case, th + 0.5 * dt * k1t, w + 0.5 * dt * k1w));
        let (k3t, k3w) = (w + 0.5 * dt * k2w, accel(case, th + 0.5 * dt * k2t, w + 0.5 * dt * k2w));
        let (k4t, k4w) = (w + dt * k3w, accel(case, th + dt * k3t, w + dt * k3w));
        th += dt / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
        w += dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        if !w.is_finite() || w.abs() > bound {
            tr.diverged = true;
            return Ok(());
        }
    }
    Ok(())
}

/// Parameters of the GFM-GFL inertia-swap experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InertiaSwap {
    /// GFL current magnitude.
    pub i1: f64,
    /// GFM voltage magnitude.
    pub v2: f64,
    /// Branch reactance.
    pub x: f64,
    /// GFL reactive reference.
    pub q1_ref: f64,
    /// GFM active reference.
    pub p2_ref: f64,
    /// GFL PLL gains.
    pub kp: f64,
    /// GFL PLL integral gain.
    pub ki: f64,
    /// GFM droop gain, pu.
    pub m: f64,
    /// GFM filter bandwidth, rad/s.
    pub omega_f: f64,
    /// Base angular frequency.
    pub omega0: f64,
    /// Switch time, s.
    pub t_switch: f64,
    /// End time, s.
    pub duration: f64,
}

impl Default for InertiaSwap {
    fn default() -> Self {
        let w = crate::hz(15.0);
        InertiaSwap {
            i1: 1.0,
            v2: 1.0,
            x: 0.1,
            q1_ref: -0.4,
            p2_ref: 0.5,
            kp: w,
            ki: w * w / 4.0,
            m: 0.01,
            omega_f: w,
            omega0: crate::OMEGA0,
            t_switch: 1.0,
            duration: 3.0,
        }
    }
}

/// Result of [`inertia_swap`].
#[derive(Clone, Debug, PartialEq)]
pub struct SwapOutcome {
    /// Trajectory through both phases.
    pub trajectory: SwingTrajectory,
    /// Governing case before the switch.
    pub before: TwoInverterCase,
    /// Governing case after the switch.
    pub after: TwoInverterCase,
    /// SEP before the switch, rad.
    pub sep1: f64,
    /// SEP after the switch, rad.
    pub sep2: f64,
}

/// GFL-GFM pair starting at the SEP of the GFL-follows-GFM equation; at
/// `t_switch` the PLL gains go to zero (`J1 → ∞`) and the angle moves to
/// the SEP of the GFM-swings equation.
pub fn inertia_swap(p: &InertiaSwap) -> Result<SwapOutcome> {
    let j1 = 1.0 / p.ki;
    let j2 = 1.0 / (p.omega_f * p.m * p.omega0);
    let d1 = p.kp * p.v2;
    let before = TwoInverterCase::gfm_gfl(p.i1, p.v2, p.x, p.q1_ref, p.p2_ref, j1, j2, d1, p.omega_f)?;
    let after = TwoInverterCase::gfm_gfl(p.i1, p.v2, p.x, p.q1_ref, p.p2_ref, f64::INFINITY, j2, d1, p.omega_f)?;
    let sep1 = sep_uep(&before)?.0;
    let sep2 = sep_uep(&after)?.0;
    let dt = 1e-5;
    let mut tr = SwingTrajectory { t: Vec::new(), theta: Vec::new(), dtheta: Vec::new(), diverged: false };
    integrate(&before, sep1, 0.0, 0.0, p.t_switch, dt, 1e6, &mut tr)?;
    let (th, w) = (tr.theta[tr.theta.len() - 1], tr.dtheta[tr.dtheta.len() - 1]);
    if !tr.diverged {
        integrate(&after, th, w, p.t_switch, p.duration - p.t_switch, dt, 1e6, &mut tr)?;
    }
    Ok(SwapOutcome { trajectory: tr, before, after, sep1, sep2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(a: f64, s: f64) -> TwoInverterCase {
        TwoInverterCase::gfm_gfm(1.0, a, 1.0, s, 0.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn equilibria_of_sine() {
        let e = equilibria(&sine(1.0, 0.5));
        assert_eq!(e.points.len(), 2);
        assert!((e.sep().unwrap() - PI / 6.0).abs() < 1e-12);
        assert!((e.uep().unwrap() - 5.0 * PI / 6.0).abs() < 1e-12);
        let z = equilibria(&sine(1.0, 0.0));
        assert!(z.sep().unwrap().abs() < 1e-15);
        assert!((z.uep().unwrap() - PI).abs() < 1e-12);
        assert!(equilibria(&sine(1.0, 1.2)).none);
    }

    #[test]
    fn mda_closed_forms() {
        assert!((max_decel_area(&sine(1.0, 0.0)).unwrap() - 2.0).abs() < 1e-12);
        assert!((max_decel_area(&sine(2.0, 0.0)).unwrap() - 4.0).abs() < 1e-12);
        let want = 3f64.sqrt() - PI / 3.0;
        assert!((max_decel_area(&sine(1.0, 0.5)).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn mixed_case_needs_dominant_inertia() {
        assert!(TwoInverterCase::gfm_gfl(1.0, 1.0, 0.1, 0.0, 0.5, 1.0, 2.0, 1.0, 1.0).is_err());
        let c = TwoInverterCase::gfm_gfl(1.0, 1.0, 0.1, -0.4, 0.5, 1e-3, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(c.family, Family::Sine);
        assert!((c.s_ref - 0.5).abs() < 1e-12);
    }
}
