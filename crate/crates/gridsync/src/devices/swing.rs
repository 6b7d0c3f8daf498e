//! Modified swing characteristic of one inverter behind a grid impedance.
//!
//! The swing polynomial of the ideal-source case is extended with the grid
//! and the inner loops; its zeros are the closed-loop modes of the
//! single-inverter system (device, filter capacitor and grid branch).

use alloc::format;

use super::{gfm_inner_polys, DeviceKind, DeviceModel};
use crate::dqframe::{Frame, RationalTransfer, TransferMatrix2, Unit};
use crate::poly::Poly;
use crate::{Error, Result, C64, J};

/// `S'(s)` for a device connected to the grid `grid` (dq±, diagonal,
/// impedance or admittance).
///
/// The result is `X(s)/(P+(s)·P−(s))` where `P±` are the closed-loop inner
/// characteristics with the frame frozen and `X` carries the synchronization
/// loop. Zeros of the result are the modes of the interconnection.
pub fn modified_swing(dev: &DeviceModel, grid: &TransferMatrix2) -> Result<RationalTransfer> {
    if grid.frame() != Frame::DqPm {
        return Err(Error::WrongFrame);
    }
    if !grid.is_diagonal() {
        return Err(Error::InvalidInput("grid model must be diagonal in dq±".into()));
    }
    let zg = match grid.get(0, 0).unit() {
        Unit::Admittance => grid.get(0, 0).inv()?,
        Unit::Impedance => grid.get(0, 0).clone(),
        u => return Err(Error::InvalidInput(format!("grid transfer has unit {u:?}"))),
    };
    if zg.num().is_zero() {
        return Err(Error::Degenerate("ideal stiff grid: use the swing characteristic".into()));
    }
    let (n_p, d_p) = (zg.num().clone(), zg.den().clone());
    let (n_m, d_m) = (n_p.conj(), d_p.conj());
    dev.op.validate()?;
    match dev.kind {
        DeviceKind::Gfm(p) => gfm(&p, dev, [(&n_p, &d_p), (&n_m, &d_m)]),
        DeviceKind::Gfl(p) => gfl(&p, dev, [(&n_p, &d_p), (&n_m, &d_m)]),
    }
}

// (s ± jΩ0)·C
fn cap_poly(c: f64, omega0: f64, sign: f64) -> Poly {
    Poly::new(alloc::vec![C64::new(c, 0.0), J * (sign * omega0 * c)])
}

fn gfm(p: &super::GfmParams, dev: &DeviceModel, grid: [(&Poly, &Poly); 2]) -> Result<RationalTransfer> {
    p.validate()?;
    if !p.omega_f.is_finite() {
        return Err(Error::InvalidInput("modified swing needs a finite ω_f".into()));
    }
    let (dc, n_p, n_m) = gfm_inner_polys(p);
    let v = dev.op.v();
    // generator-direction current
    let i = -dev.op.i();
    let (v_p, v_m, i_p, i_m) = (v, v.conj(), i, i.conj());
    let a_p = (&n_p * v_m + &dc * i_m) * C64::new(-0.5, 0.0);
    let a_m = (&n_m * v_p + &dc * i_p) * C64::new(-0.5, 0.0);
    let b_p = (&dc * i_p - &n_p * v_p) * J;
    let b_m = (&dc * i_m - &n_m * v_m) * (-J);
    let k = (&a_p * v_p - &a_m * v_m) * J;
    let gi = Poly::real(&[p.t_f(), 1.0, 0.0]) * (1.0 / p.m_theta());
    let pp = &(&(&cap_poly(p.c, p.omega0, 1.0) * grid[0].0) + grid[0].1) * &dc - &n_p * grid[0].0;
    let pm = &(&(&cap_poly(p.c, p.omega0, -1.0) * grid[1].0) + grid[1].1) * &dc - &n_m * grid[1].0;
    let q =
        &(&(&(&gi * &dc) + &k) * &pp) * &pm - &(&(grid[0].0 * &a_p) * &b_p) * &pm - &(&(grid[1].0 * &a_m) * &b_m) * &pp;
    let x = divide_exact(&q, &dc)?;
    RationalTransfer::new(x, &pp * &pm, Unit::Characteristic)
}

fn gfl(p: &super::GflParams, dev: &DeviceModel, grid: [(&Poly, &Poly); 2]) -> Result<RationalTransfer> {
    p.validate()?;
    if p.kp == 0.0 && p.ki == 0.0 {
        return Err(Error::Degenerate("PLL with kp = ki = 0 has no swing equation".into()));
    }
    let g = p.gains();
    let dq = Poly::real(&[p.l, g.kpi, g.kii]);
    let v = dev.op.v();
    let i = -dev.op.i();
    let s = Poly::s();
    let b_p = (&dq * i + &s * v) * J;
    let b_m = (&dq * i.conj() + &s * v.conj()) * (-J);
    let pp = &(&(&cap_poly(p.c, p.omega0, 1.0) * grid[0].0) + grid[0].1) * &dq + &s * grid[0].0;
    let pm = &(&(&cap_poly(p.c, p.omega0, -1.0) * grid[1].0) + grid[1].1) * &dq + &s * grid[1].0;
    let vd = dev.op.v_d0;
    let (sn, sd) = if p.ki == 0.0 {
        (Poly::real(&[1.0, vd * p.kp]), Poly::real(&[p.kp]))
    } else {
        (Poly::real(&[1.0, vd * p.kp, vd * p.ki]), Poly::real(&[p.kp, p.ki]))
    };
    let cross = &(&(&b_p * grid[0].0) * &pm) - &(&(&b_m * grid[1].0) * &pp);
    let num = &(&sn * &pp) * &pm - &(&sd * &cross) * C64::new(0.0, -0.5);
    RationalTransfer::new(num, &(&sd * &pp) * &pm, Unit::Characteristic)
}

// Division known to be exact in exact arithmetic. Zero roots of the divisor
// are removed by dropping the (round-off sized) low coefficients of `q`,
// the rest by deflation from the constant term.
fn divide_exact(q: &Poly, d: &Poly) -> Result<Poly> {
    let z = d.zero_root_multiplicity();
    let scale = q.max_abs();
    for k in 0..z {
        if q.coeff(k).norm() > 1e-9 * scale {
            return Err(Error::Numerical("modified swing: expected factor s is missing".into()));
        }
    }
    let qs = Poly::new(q.coeffs()[..q.coeffs().len() - z].to_vec());
    let ds = d.strip_zero_roots(z)?;
    if ds.degree() == 0 {
        return Ok(qs * (C64::new(1.0, 0.0) / ds.lead()));
    }
    let (x, rem) = qs.deflate(&ds)?;
    if rem > 1e-6 {
        return Err(Error::Numerical(format!("modified swing: inexact inner-loop factor (rel. {rem:.1e})")));
    }
    Ok(x)
}
