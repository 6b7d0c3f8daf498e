//! Nonlinear averaged device models and their hand-derived linearizations.
//!
//! Each device has its own dq frame at angle `θ` relative to the global
//! frame rotating at `W`. Inputs are the global-frame terminal voltage in
//! pu of the device rating; the output is the global-frame filter-inductor
//! current in the generator direction. The filter capacitor belongs to the
//! network node the device is connected to.
//!
//! GFM states: `[i_d, i_q, xv_d, xv_q, xi_d, xi_q, P_f, θ]`.
//! GFL states: `[i_d, i_q, xi_d, xi_q, x_pll, θ]`.
//! Integrator states hold the integral-path output, so gain changes
//! during a run are bumpless.

use alloc::{format, vec, vec::Vec};

use super::{GflParams, GfmParams};
use crate::linalg::Mat;
use crate::{Error, Result, C64, J};

/// Parameters of a device taking part in a network simulation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeviceParams {
    /// Droop-controlled voltage source.
    Gfm(GfmParams),
    /// PLL-synchronized current source.
    Gfl(GflParams),
}

/// Terminal quantities in the device's own frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeviceOutputs {
    /// Controller frequency, rad/s.
    pub omega: f64,
    /// Frame angle relative to the global frame, rad.
    pub theta: f64,
    /// Terminal voltage `v_d + j·v_q`.
    pub v: C64,
    /// Terminal current, load convention.
    pub i: C64,
}

impl DeviceOutputs {
    /// `P = v_d·i_d + v_q·i_q` (load convention).
    pub fn p(&self) -> f64 {
        self.v.re * self.i.re + self.v.im * self.i.im
    }

    /// `Q = v_q·i_d − v_d·i_q` (load convention).
    pub fn q(&self) -> f64 {
        self.v.im * self.i.re - self.v.re * self.i.im
    }
}

/// Linearization `ẋ = A·x + B·v`, `i = C·x + D·v` with real 2-vectors for
/// the global-frame voltage and current.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearDevice {
    /// n×n.
    pub a: Mat,
    /// n×2.
    pub b: Mat,
    /// 2×n.
    pub c: Mat,
    /// 2×2.
    pub d: Mat,
}

impl DeviceParams {
    /// Number of states.
    pub fn n_states(&self) -> usize {
        match self {
            DeviceParams::Gfm(_) => 8,
            DeviceParams::Gfl(_) => 6,
        }
    }

    /// State names, in state order.
    pub fn state_names(&self) -> &'static [&'static str] {
        match self {
            DeviceParams::Gfm(_) => &["i_d", "i_q", "xv_d", "xv_q", "xi_d", "xi_q", "p_f", "theta"],
            DeviceParams::Gfl(_) => &["i_d", "i_q", "xi_d", "xi_q", "x_pll", "theta"],
        }
    }

    /// Index of `θ`.
    pub fn angle_index(&self) -> usize {
        self.n_states() - 1
    }

    /// Filter capacitance, pu·s on the device base.
    pub fn filter_c(&self) -> f64 {
        match self {
            DeviceParams::Gfm(p) => p.c,
            DeviceParams::Gfl(p) => p.c,
        }
    }

    /// Base angular frequency.
    pub fn omega0(&self) -> f64 {
        match self {
            DeviceParams::Gfm(p) => p.omega0,
            DeviceParams::Gfl(p) => p.omega0,
        }
    }

    /// Validate the parameters for time-domain use.
    pub fn validate(&self) -> Result<()> {
        match self {
            DeviceParams::Gfm(p) => {
                p.validate()?;
                if !p.omega_f.is_finite() {
                    return Err(Error::InvalidInput("time-domain GFM needs a finite ω_f".into()));
                }
                Ok(())
            }
            DeviceParams::Gfl(p) => p.validate(),
        }
    }

    /// Change one named parameter. GFM: `m`, `p_ref`, `v_ref`, `omega_f`,
    /// `omega_v`. GFL: `kp`, `ki`, `omega_pll` (resets kp and ki), `id_ref`,
    /// `iq_ref`, `omega_i`.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        let old = *self;
        match self {
            DeviceParams::Gfm(p) => match name {
                "m" => p.m = value,
                "p_ref" => p.p_ref = value,
                "v_ref" => p.v_ref = value,
                "omega_f" => p.omega_f = value,
                "omega_v" => p.omega_v = value,
                _ => return Err(Error::InvalidInput(format!("unknown GFM parameter {name:?}"))),
            },
            DeviceParams::Gfl(p) => match name {
                "kp" => p.kp = value,
                "ki" => p.ki = value,
                "omega_pll" => *p = p.with_pll_bandwidth(value),
                "id_ref" => p.id_ref = value,
                "iq_ref" => p.iq_ref = value,
                "omega_i" => p.omega_i = value,
                _ => return Err(Error::InvalidInput(format!("unknown GFL parameter {name:?}"))),
            },
        }
        if let Err(e) = self.validate() {
            *self = old;
            return Err(e);
        }
        Ok(())
    }

    /// A starting point for equilibrium iterations at unit voltage.
    pub fn initial_guess(&self) -> Vec<f64> {
        match self {
            DeviceParams::Gfm(p) => {
                let i = C64::new(-p.p_ref / p.v_ref.max(0.1), 0.0);
                let xv = i - J * (p.omega0 * p.c * p.v_ref);
                vec![i.re, i.im, xv.re, xv.im, 0.0, 0.0, p.p_ref, 0.0]
            }
            DeviceParams::Gfl(p) => {
                vec![-p.id_ref, -p.iq_ref, 1.0, 0.0, 0.0, 0.0]
            }
        }
    }

    /// Terminal quantities for states `x` and global voltage `vg`.
    pub fn outputs(&self, x: &[f64], vg: C64) -> DeviceOutputs {
        let th = x[self.angle_index()];
        let vl = vg * C64::from_polar(1.0, -th);
        let i = -C64::new(x[0], x[1]);
        let omega = match self {
            DeviceParams::Gfm(p) => p.omega0 + p.omega0 * p.m * (x[6] - p.p_ref),
            DeviceParams::Gfl(p) => p.omega0 + p.kp * vl.im + x[4],
        };
        DeviceOutputs { omega, theta: th, v: vl, i }
    }

    /// Write `ẋ` into `dx` and return the global-frame generator current.
    pub fn rhs(&self, x: &[f64], vg: C64, w_frame: f64, dx: &mut [f64]) -> C64 {
        let th = x[self.angle_index()];
        let rot = C64::from_polar(1.0, th);
        let vl = vg * rot.conj();
        let i = C64::new(x[0], x[1]);
        match self {
            DeviceParams::Gfm(p) => {
                let g = p.gains();
                let xv = C64::new(x[2], x[3]);
                let xi = C64::new(x[4], x[5]);
                let w = p.omega0 + p.omega0 * p.m * (x[6] - p.p_ref);
                let pw = -(vl * i.conj()).re;
                let i_ref = (C64::new(p.v_ref, 0.0) - vl) * g.kpv + xv + J * (p.omega0 * p.c) * vl;
                let eps = i_ref - i;
                let e = vl + eps * g.kpi + xi + J * (w * p.l) * i;
                let di = (e - vl - J * (w * p.l) * i) / p.l;
                let dxv = (C64::new(p.v_ref, 0.0) - vl) * g.kiv;
                let dxi = eps * g.kii;
                dx[0] = di.re;
                dx[1] = di.im;
                dx[2] = dxv.re;
                dx[3] = dxv.im;
                dx[4] = dxi.re;
                dx[5] = dxi.im;
                dx[6] = p.omega_f * (pw - x[6]);
                dx[7] = w - w_frame;
            }
            DeviceParams::Gfl(p) => {
                let g = p.gains();
                let xi = C64::new(x[2], x[3]);
                let w = p.omega0 + p.kp * vl.im + x[4];
                let eps = C64::new(-p.id_ref, -p.iq_ref) - i;
                let e = eps * g.kpi + xi + J * (w * p.l) * i;
                let di = (e - vl - J * (w * p.l) * i) / p.l;
                dx[0] = di.re;
                dx[1] = di.im;
                dx[2] = g.kii * eps.re;
                dx[3] = g.kii * eps.im;
                dx[4] = p.ki * vl.im;
                dx[5] = w - w_frame;
            }
        }
        rot * i
    }

    /// Jacobians of [`DeviceParams::rhs`] at `(x, vg)`.
    pub fn linear(&self, x: &[f64], vg: C64) -> LinearDevice {
        let n = self.n_states();
        let th_i = self.angle_index();
        let th = x[th_i];
        let rot = C64::from_polar(1.0, th);
        let vl0 = vg * rot.conj();
        let i0 = C64::new(x[0], x[1]);
        // linear forms over z = [x, vg_re, vg_im]
        let nz = n + 2;
        let theta = Lr::unit(nz, th_i);
        let dvl = Lc::input(nz, n).scale(rot.conj()).add(&Lc::real(&theta, -J * vl0));
        let di_state = Lc::state(nz, 0);
        let mut rows = vec![Lr::zero(nz); n];
        match self {
            DeviceParams::Gfm(p) => {
                let g = p.gains();
                let dpw = dvl.scale(i0.conj()).re().scale(-1.0).add(&di_state.scale(vl0.conj()).re().scale(-1.0));
                let di_ref = dvl.scale(C64::new(-g.kpv, p.omega0 * p.c)).add(&Lc::state(nz, 2));
                let eps = di_ref.add(&di_state.scale(C64::new(-1.0, 0.0)));
                let ddi = eps.scale(C64::new(g.kpi / p.l, 0.0)).add(&Lc::state(nz, 4).scale(C64::new(1.0 / p.l, 0.0)));
                let ddxv = dvl.scale(C64::new(-g.kiv, 0.0));
                let pf = Lr::unit(nz, 6);
                rows[0] = ddi.re.clone();
                rows[1] = ddi.im.clone();
                rows[2] = ddxv.re.clone();
                rows[3] = ddxv.im.clone();
                rows[4] = eps.re.scale(g.kii);
                rows[5] = eps.im.scale(g.kii);
                rows[6] = dpw.add(&pf.scale(-1.0)).scale(p.omega_f);
                rows[7] = pf.scale(p.omega0 * p.m);
            }
            DeviceParams::Gfl(p) => {
                let g = p.gains();
                let eps = di_state.scale(C64::new(-1.0, 0.0));
                let ddi = eps
                    .scale(C64::new(g.kpi / p.l, 0.0))
                    .add(&Lc::state(nz, 2).scale(C64::new(1.0 / p.l, 0.0)))
                    .add(&dvl.scale(C64::new(-1.0 / p.l, 0.0)));
                let vq = dvl.im.clone();
                rows[0] = ddi.re.clone();
                rows[1] = ddi.im.clone();
                rows[2] = eps.re.scale(g.kii);
                rows[3] = eps.im.scale(g.kii);
                rows[4] = vq.scale(p.ki);
                rows[5] = vq.scale(p.kp).add(&Lr::unit(nz, 4));
            }
        }
        let out = di_state.add(&Lc::real(&theta, J * i0)).scale(rot);
        let a = Mat::from_fn(n, n, |r, c| rows[r].0[c]);
        let b = Mat::from_fn(n, 2, |r, c| rows[r].0[n + c]);
        let c = Mat::from_fn(2, n, |r, k| if r == 0 { out.re.0[k] } else { out.im.0[k] });
        let d = Mat::from_fn(2, 2, |r, k| if r == 0 { out.re.0[n + k] } else { out.im.0[n + k] });
        LinearDevice { a, b, c, d }
    }
}

// Real linear form.
#[derive(Clone, Debug)]
struct Lr(Vec<f64>);

impl Lr {
    fn zero(n: usize) -> Self {
        Lr(vec![0.0; n])
    }
    fn unit(n: usize, k: usize) -> Self {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        Lr(v)
    }
    fn scale(&self, a: f64) -> Self {
        Lr(self.0.iter().map(|x| a * x).collect())
    }
    fn add(&self, o: &Lr) -> Self {
        Lr(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }
}

// Complex-valued linear form: re + j·im.
#[derive(Clone, Debug)]
struct Lc {
    re: Lr,
    im: Lr,
}

impl Lc {
    fn pair(n: usize, k: usize) -> Self {
        Lc { re: Lr::unit(n, k), im: Lr::unit(n, k + 1) }
    }
    fn state(n: usize, k: usize) -> Self {
        Self::pair(n, k)
    }
    fn input(n: usize, k: usize) -> Self {
        Self::pair(n, k)
    }
    // c·r for a real form r
    fn real(r: &Lr, c: C64) -> Self {
        Lc { re: r.scale(c.re), im: r.scale(c.im) }
    }
    fn scale(&self, c: C64) -> Self {
        Lc { re: self.re.scale(c.re).add(&self.im.scale(-c.im)), im: self.im.scale(c.re).add(&self.re.scale(c.im)) }
    }
    fn add(&self, o: &Lc) -> Self {
        Lc { re: self.re.add(&o.re), im: self.im.add(&o.im) }
    }
    fn re(&self) -> Lr {
        self.re.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(dev: DeviceParams, x: &[f64], vg: C64) {
        let n = dev.n_states();
        let lin = dev.linear(x, vg);
        let w = dev.omega0() * 1.001;
        let mut f0 = vec![0.0; n];
        dev.rhs(x, vg, w, &mut f0);
        let mut z: Vec<f64> = x.to_vec();
        z.extend([vg.re, vg.im]);
        for k in 0..n + 2 {
            let h = 1e-7 * z[k].abs().max(1.0);
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[k] += h;
            zm[k] -= h;
            let (mut fp, mut fm) = (vec![0.0; n], vec![0.0; n]);
            let ip = dev.rhs(&zp[..n], C64::new(zp[n], zp[n + 1]), w, &mut fp);
            let im = dev.rhs(&zm[..n], C64::new(zm[n], zm[n + 1]), w, &mut fm);
            for r in 0..n {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                let an = if k < n { lin.a[(r, k)] } else { lin.b[(r, k - n)] };
                assert!((fd - an).abs() < 1e-5 * (1.0 + an.abs()), "row {r} col {k}: {fd} vs {an}");
            }
            let fo = (ip - im) / (2.0 * h);
            let an = if k < n {
                C64::new(lin.c[(0, k)], lin.c[(1, k)])
            } else {
                C64::new(lin.d[(0, k - n)], lin.d[(1, k - n)])
            };
            assert!((fo - an).norm() < 1e-6 * (1.0 + an.norm()));
        }
    }

    #[test]
    fn gfm_jacobian_matches_finite_differences() {
        let x = [0.7, -0.1, 2e-4, -1e-4, 1e-3, 2e-3, -0.75, 0.3];
        fd_check(DeviceParams::Gfm(GfmParams::default()), &x, C64::new(0.97, 0.12));
    }

    #[test]
    fn gfl_jacobian_matches_finite_differences() {
        let x = [0.8, 0.05, 1e-3, -2e-3, 1.5, -0.2];
        fd_check(DeviceParams::Gfl(GflParams::default()), &x, C64::new(1.01, -0.08));
    }

    #[test]
    fn set_param_rejects_invalid_values() {
        let mut d = DeviceParams::Gfm(GfmParams::default());
        assert!(d.set_param("m", -1.0).is_err());
        assert_eq!(d, DeviceParams::Gfm(GfmParams::default()));
        assert!(d.set_param("nope", 1.0).is_err());
        let mut g = DeviceParams::Gfl(GflParams::default());
        g.set_param("omega_pll", crate::hz(60.0)).unwrap();
        if let DeviceParams::Gfl(p) = g {
            assert!((p.kp - crate::hz(60.0)).abs() < 1e-12);
        }
    }
}
