//! Complex dq± frame algebra.
//!
//! A real dq pair `(u_d, u_q)` maps to the forward/backward complex vectors
//! `u± = u_d ± j·u_q`. A real 2×2 dq model `G` maps to `T_j·G·T_j⁻¹` with
//! `T_j = [[1, j], [1, −j]]`, whose lower row mirrors the upper one
//! (conjugated and swapped).

use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use crate::poly::Poly;
use crate::{Error, Result, C64, J};

/// Physical meaning of a transfer function; carried for bookkeeping only.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unit {
    /// Plain gain.
    Dimensionless,
    /// Voltage over current, pu.
    Impedance,
    /// Current over voltage, pu.
    Admittance,
    /// Angle over power (or voltage), rad/pu.
    AngleGain,
    /// Characteristic function whose numerator roots are modes.
    Characteristic,
}

/// Rational function of `s` with complex coefficients.
///
/// No pole/zero cancellation is ever performed implicitly.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalTransfer {
    num: Poly,
    den: Poly,
    unit: Unit,
}

impl RationalTransfer {
    /// `num/den`; the denominator must be nonzero.
    pub fn new(num: Poly, den: Poly, unit: Unit) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::Degenerate("zero denominator".into()));
        }
        if !num.is_finite() || !den.is_finite() {
            return Err(Error::Numerical("non-finite transfer coefficient".into()));
        }
        Ok(RationalTransfer { num, den, unit })
    }

    /// Constant gain.
    pub fn gain(k: C64, unit: Unit) -> Self {
        RationalTransfer { num: Poly::constant(k), den: Poly::one(), unit }
    }

    /// Zero transfer.
    pub fn zero(unit: Unit) -> Self {
        RationalTransfer::gain(C64::new(0.0, 0.0), unit)
    }

    /// Polynomial transfer (unit denominator).
    pub fn poly(p: Poly, unit: Unit) -> Self {
        RationalTransfer { num: p, den: Poly::one(), unit }
    }

    /// Numerator polynomial.
    pub fn num(&self) -> &Poly {
        &self.num
    }

    /// Denominator polynomial.
    pub fn den(&self) -> &Poly {
        &self.den
    }

    /// Unit tag.
    pub fn unit(&self) -> Unit {
        self.unit
    }

    /// Same function with a different unit tag.
    pub fn with_unit(mut self, unit: Unit) -> Self {
        self.unit = unit;
        self
    }

    /// True when the numerator is identically zero.
    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Value at `s`.
    pub fn eval(&self, s: C64) -> C64 {
        self.num.eval(s) / self.den.eval(s)
    }

    /// Multiplicative inverse; fails on a zero numerator.
    pub fn inv(&self) -> Result<Self> {
        if self.num.is_zero() {
            return Err(Error::Degenerate("inverse of the zero transfer".into()));
        }
        let unit = match self.unit {
            Unit::Impedance => Unit::Admittance,
            Unit::Admittance => Unit::Impedance,
            u => u,
        };
        Ok(RationalTransfer { num: self.den.clone(), den: self.num.clone(), unit })
    }

    /// Scalar multiple.
    pub fn scale(&self, k: C64) -> Self {
        RationalTransfer { num: self.num.scale(k), den: self.den.clone(), unit: self.unit }
    }

    /// Coefficient-wise conjugate, `conj(G(conj(s)))`.
    pub fn conj(&self) -> Self {
        RationalTransfer { num: self.num.conj(), den: self.den.conj(), unit: self.unit }
    }

    /// Poles (denominator roots).
    pub fn poles(&self) -> Result<Vec<C64>> {
        self.den.roots()
    }

    /// Zeros (numerator roots).
    pub fn zeros(&self) -> Result<Vec<C64>> {
        self.num.roots()
    }
}

impl Add for &RationalTransfer {
    type Output = RationalTransfer;
    fn add(self, o: &RationalTransfer) -> RationalTransfer {
        if o.num.is_zero() {
            return self.clone();
        }
        if self.num.is_zero() {
            return RationalTransfer { unit: self.unit, ..o.clone() };
        }
        if self.den == o.den {
            return RationalTransfer { num: &self.num + &o.num, den: self.den.clone(), unit: self.unit };
        }
        RationalTransfer { num: &self.num * &o.den + &o.num * &self.den, den: &self.den * &o.den, unit: self.unit }
    }
}

impl Neg for &RationalTransfer {
    type Output = RationalTransfer;
    fn neg(self) -> RationalTransfer {
        RationalTransfer { num: -&self.num, den: self.den.clone(), unit: self.unit }
    }
}

impl Sub for &RationalTransfer {
    type Output = RationalTransfer;
    fn sub(self, o: &RationalTransfer) -> RationalTransfer {
        self + &(-o)
    }
}

impl Mul for &RationalTransfer {
    type Output = RationalTransfer;
    fn mul(self, o: &RationalTransfer) -> RationalTransfer {
        let unit = match (self.unit, o.unit) {
            (Unit::Dimensionless, u) => u,
            (u, _) => u,
        };
        if self.num.is_zero() || o.num.is_zero() {
            return RationalTransfer::zero(unit);
        }
        RationalTransfer { num: &self.num * &o.num, den: &self.den * &o.den, unit }
    }
}

/// Frame tag of a 2×2 model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    /// Real dq components.
    Dq,
    /// Complex forward/backward components.
    DqPm,
}

/// 2×2 matrix of transfers with a frame tag.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferMatrix2 {
    m: [[RationalTransfer; 2]; 2],
    frame: Frame,
}

/// Test points for the mirror check; chosen away from typical poles.
const MIRROR_PROBES: [C64; 4] =
    [C64 { re: 0.37, im: 1.3 }, C64 { re: -2.1, im: 17.0 }, C64 { re: 5.3, im: -41.0 }, C64 { re: 0.9, im: 230.0 }];

impl TransferMatrix2 {
    /// Build and, for dq±, verify the conjugate-mirror structure to 1e-12.
    pub fn new(m: [[RationalTransfer; 2]; 2], frame: Frame) -> Result<Self> {
        let out = TransferMatrix2 { m, frame };
        if frame == Frame::DqPm {
            let err = out.mirror_error();
            if err > 1e-12 {
                return Err(Error::InvalidInput(alloc::format!(
                    "dq± matrix violates conjugate-mirror structure (error {err:.2e})"
                )));
            }
        }
        Ok(out)
    }

    /// Diagonal dq± matrix `diag(g, conj(g))`.
    pub fn dqpm_diagonal(g: RationalTransfer) -> Self {
        let lower = g.conj();
        let z = RationalTransfer::zero(g.unit());
        TransferMatrix2 { m: [[g, z.clone()], [z, lower]], frame: Frame::DqPm }
    }

    /// dq± matrix from its upper row `[g_pp, g_pm]`; the lower row is the mirror.
    pub fn dqpm_from_upper(g_pp: RationalTransfer, g_pm: RationalTransfer) -> Self {
        let l0 = g_pm.conj();
        let l1 = g_pp.conj();
        TransferMatrix2 { m: [[g_pp, g_pm], [l0, l1]], frame: Frame::DqPm }
    }

    /// Identity in the given frame.
    pub fn identity(frame: Frame) -> Self {
        let one = RationalTransfer::gain(C64::new(1.0, 0.0), Unit::Dimensionless);
        let z = RationalTransfer::zero(Unit::Dimensionless);
        TransferMatrix2 { m: [[one.clone(), z.clone()], [z, one]], frame }
    }

    /// Zero matrix in the given frame.
    pub fn zeros(frame: Frame, unit: Unit) -> Self {
        let z = RationalTransfer::zero(unit);
        TransferMatrix2 { m: [[z.clone(), z.clone()], [z.clone(), z]], frame }
    }

    /// Entry `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> &RationalTransfer {
        &self.m[i][j]
    }

    /// All entries.
    pub fn entries(&self) -> &[[RationalTransfer; 2]; 2] {
        &self.m
    }

    /// Frame tag.
    pub fn frame(&self) -> Frame {
        self.frame
    }

    /// Evaluate every entry at `s`.
    pub fn eval(&self, s: C64) -> [[C64; 2]; 2] {
        [[self.m[0][0].eval(s), self.m[0][1].eval(s)], [self.m[1][0].eval(s), self.m[1][1].eval(s)]]
    }

    /// True when both off-diagonal entries vanish identically.
    pub fn is_diagonal(&self) -> bool {
        self.m[0][1].is_zero() && self.m[1][0].is_zero()
    }

    /// Spectral norm (largest singular value) at one point `s`.
    pub fn norm_at(&self, s: C64) -> f64 {
        let g = self.eval(s);
        // largest singular value of a 2x2 complex matrix
        let a = g[0][0].norm_sqr() + g[0][1].norm_sqr() + g[1][0].norm_sqr() + g[1][1].norm_sqr();
        let det = (g[0][0] * g[1][1] - g[0][1] * g[1][0]).norm();
        let disc = (a * a - 4.0 * det * det).max(0.0);
        num_traits::Float::sqrt(0.5 * (a + num_traits::Float::sqrt(disc)))
    }

    /// Entrywise sum; frames must agree.
    pub fn add(&self, o: &TransferMatrix2) -> Result<Self> {
        if self.frame != o.frame {
            return Err(Error::WrongFrame);
        }
        Ok(TransferMatrix2 {
            m: [
                [&self.m[0][0] + &o.m[0][0], &self.m[0][1] + &o.m[0][1]],
                [&self.m[1][0] + &o.m[1][0], &self.m[1][1] + &o.m[1][1]],
            ],
            frame: self.frame,
        })
    }

    /// Largest deviation from the conjugate-mirror structure over the probe
    /// points, relative to the entry size.
    pub fn mirror_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for &s in &MIRROR_PROBES {
            let g = self.eval(s);
            let gc = self.eval(s.conj());
            let pairs = [(g[1][1], gc[0][0]), (g[1][0], gc[0][1])];
            for (lo, up) in pairs {
                let want = up.conj();
                let scale = 1.0 + want.norm();
                if want.re.is_finite() && want.im.is_finite() {
                    worst = worst.max((lo - want).norm() / scale);
                }
            }
        }
        worst
    }

    // out_ab = Σ l_ai g_ij r_jb with constant l, r
    fn sandwich(&self, l: [[C64; 2]; 2], r: [[C64; 2]; 2], frame: Frame) -> Self {
        let unit = self.m[0][0].unit();
        let mut out: [[RationalTransfer; 2]; 2] = [
            [RationalTransfer::zero(unit), RationalTransfer::zero(unit)],
            [RationalTransfer::zero(unit), RationalTransfer::zero(unit)],
        ];
        for (a, row) in out.iter_mut().enumerate() {
            for (b, cell) in row.iter_mut().enumerate() {
                let mut acc = RationalTransfer::zero(unit);
                #[allow(clippy::needless_range_loop)]
                for i in 0..2 {
                    for j in 0..2 {
                        let k = l[a][i] * r[j][b];
                        if k != C64::new(0.0, 0.0) && !self.m[i][j].is_zero() {
                            acc = &acc + &self.m[i][j].scale(k);
                        }
                    }
                }
                *cell = acc;
            }
        }
        TransferMatrix2 { m: out, frame }
    }
}

const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const T_J: [[C64; 2]; 2] = [[ONE, J], [ONE, C64 { re: 0.0, im: -1.0 }]];
const T_J_INV: [[C64; 2]; 2] =
    [[C64 { re: 0.5, im: 0.0 }, C64 { re: 0.5, im: 0.0 }], [C64 { re: 0.0, im: -0.5 }, C64 { re: 0.0, im: 0.5 }]];

/// Map a real dq pair to `(u+, u−) = (u_d + j·u_q, u_d − j·u_q)`.
pub fn signal_to_dqpm(u_d: f64, u_q: f64) -> (C64, C64) {
    (C64::new(u_d, u_q), C64::new(u_d, -u_q))
}

/// Inverse of [`signal_to_dqpm`] for a mirrored pair.
pub fn signal_from_dqpm(u_plus: C64, u_minus: C64) -> (f64, f64) {
    let d = 0.5 * (u_plus + u_minus);
    let q = (u_plus - u_minus) / (2.0 * J);
    (d.re, q.re)
}

/// `G_dq± = T_j·G_dq·T_j⁻¹`.
pub fn model_to_dqpm(g: &TransferMatrix2) -> Result<TransferMatrix2> {
    if g.frame() != Frame::Dq {
        return Err(Error::WrongFrame);
    }
    let out = g.sandwich(T_J, T_J_INV, Frame::DqPm);
    let err = out.mirror_error();
    if err > 1e-12 {
        return Err(Error::InvalidInput(alloc::format!(
            "dq model with complex coefficients has no mirrored dq± form (error {err:.2e})"
        )));
    }
    Ok(out)
}

/// `G_dq = T_j⁻¹·G_dq±·T_j`.
pub fn model_from_dqpm(g: &TransferMatrix2) -> Result<TransferMatrix2> {
    if g.frame() != Frame::DqPm {
        return Err(Error::WrongFrame);
    }
    Ok(g.sandwich(T_J_INV, T_J, Frame::Dq))
}

/// Steady-state quantities a linearization is anchored to.
///
/// Currents use load convention: positive into the inverter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatingPoint {
    /// d-axis voltage, pu.
    pub v_d0: f64,
    /// q-axis voltage, pu.
    pub v_q0: f64,
    /// d-axis current, pu.
    pub i_d0: f64,
    /// q-axis current, pu.
    pub i_q0: f64,
    /// Steady synchronization angle, rad.
    pub theta0: f64,
    /// Steady angular frequency, rad/s.
    pub omega0: f64,
}

impl OperatingPoint {
    /// Operating point at the base frequency with zero angle.
    pub fn new(v_d0: f64, v_q0: f64, i_d0: f64, i_q0: f64) -> Self {
        OperatingPoint { v_d0, v_q0, i_d0, i_q0, theta0: 0.0, omega0: crate::OMEGA0 }
    }

    /// Check finiteness and `Ω0 > 0`.
    pub fn validate(&self) -> Result<()> {
        let vals = [self.v_d0, self.v_q0, self.i_d0, self.i_q0, self.theta0, self.omega0];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite operating point".into()));
        }
        if self.omega0 <= 0.0 {
            return Err(Error::InvalidInput("Ω0 must be positive".into()));
        }
        Ok(())
    }

    /// `V_d0 + j·V_q0`.
    pub fn v(&self) -> C64 {
        C64::new(self.v_d0, self.v_q0)
    }

    /// `I_d0 + j·I_q0` (load convention).
    pub fn i(&self) -> C64 {
        C64::new(self.i_d0, self.i_q0)
    }
}

/// Perturbation of a rotated signal per unit angle perturbation:
/// `(û+, û−) = (plus·θ̂, minus·θ̂)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameEmbedding {
    /// Forward-channel gain `−j·U+0`.
    pub plus: C64,
    /// Backward-channel gain `+j·U−0`.
    pub minus: C64,
}

impl FrameEmbedding {
    /// The same gains as real `(û_d/θ̂, û_q/θ̂)`.
    pub fn dq(&self) -> (f64, f64) {
        signal_from_dqpm(self.plus, self.minus)
    }

    /// Constant dq± column usable in transfer-matrix algebra.
    pub fn as_transfers(&self) -> [RationalTransfer; 2] {
        [
            RationalTransfer::gain(self.plus, Unit::Dimensionless),
            RationalTransfer::gain(self.minus, Unit::Dimensionless),
        ]
    }
}

/// Linearized frame embedding of a signal with steady dq± value `steady`
/// seen from a frame rotated by `θ̂`.
pub fn frame_rotation(op: &OperatingPoint, steady: (C64, C64)) -> Result<FrameEmbedding> {
    op.validate()?;
    Ok(FrameEmbedding { plus: -J * steady.0, minus: J * steady.1 })
}

/// Poles of a transfer, sorted by descending real part.
pub fn poles_of(tf: &RationalTransfer) -> Result<Vec<C64>> {
    tf.poles()
}

/// Zeros of a transfer (the modes of a characteristic function).
pub fn zeros_of(tf: &RationalTransfer) -> Result<Vec<C64>> {
    tf.zeros()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(k: f64) -> RationalTransfer {
        RationalTransfer::gain(C64::new(k, 0.0), Unit::Dimensionless)
    }

    #[test]
    fn unit_vectors() {
        assert_eq!(signal_to_dqpm(1.0, 0.0), (C64::new(1.0, 0.0), C64::new(1.0, 0.0)));
        assert_eq!(signal_to_dqpm(0.0, 1.0), (J, -J));
        assert_eq!(signal_to_dqpm(0.5, -0.3), (C64::new(0.5, -0.3), C64::new(0.5, 0.3)));
    }

    #[test]
    fn cross_coupling_becomes_diagonal() {
        let x = 0.7;
        let m = TransferMatrix2::new([[g(0.0), g(-x)], [g(x), g(0.0)]], Frame::Dq).unwrap();
        let p = model_to_dqpm(&m).unwrap();
        let s = C64::new(0.1, 3.0);
        let e = p.eval(s);
        assert!((e[0][0] - J * x).norm() < 1e-15);
        assert!((e[1][1] + J * x).norm() < 1e-15);
        assert!(e[0][1].norm() < 1e-15 && e[1][0].norm() < 1e-15);
    }

    #[test]
    fn rotation_of_d_axis_unit() {
        let op = OperatingPoint::new(1.0, 0.0, 0.0, 0.0);
        let e = frame_rotation(&op, signal_to_dqpm(1.0, 0.0)).unwrap();
        let (d, q) = e.dq();
        assert!(d.abs() < 1e-15);
        assert!((q + 1.0).abs() < 1e-15);
    }

    #[test]
    fn wrong_frame_rejected() {
        let m = TransferMatrix2::identity(Frame::DqPm);
        assert_eq!(model_to_dqpm(&m), Err(Error::WrongFrame));
    }
}
