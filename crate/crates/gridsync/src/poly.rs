//! Complex polynomials in the Laplace variable, stored in descending powers.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

#[allow(unused_imports)] // shadowed by the inherent f64 methods whenever std is linked
use num_traits::Float;

use crate::linalg;
use crate::{Error, Result, C64};

/// Polynomial with complex coefficients, highest power first.
///
/// Leading zeros are stripped on construction; the zero polynomial is `[0]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    c: Vec<C64>,
}

impl Poly {
    /// Build from descending coefficients, stripping exact leading zeros.
    pub fn new(mut c: Vec<C64>) -> Self {
        let lead = c.iter().position(|z| *z != C64::new(0.0, 0.0));
        match lead {
            Some(k) => {
                c.drain(..k);
            }
            None => c = vec![C64::new(0.0, 0.0)],
        }
        Poly { c }
    }

    /// Build from real descending coefficients.
    pub fn real(c: &[f64]) -> Self {
        Poly::new(c.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Constant polynomial.
    pub fn constant(k: C64) -> Self {
        Poly::new(vec![k])
    }

    /// The zero polynomial.
    pub fn zero() -> Self {
        Poly::constant(C64::new(0.0, 0.0))
    }

    /// The unit constant.
    pub fn one() -> Self {
        Poly::constant(C64::new(1.0, 0.0))
    }

    /// The monomial `s`.
    pub fn s() -> Self {
        Poly::real(&[1.0, 0.0])
    }

    /// `s + a`.
    pub fn s_plus(a: C64) -> Self {
        Poly::new(vec![C64::new(1.0, 0.0), a])
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[C64]) -> Self {
        let mut c = vec![C64::new(1.0, 0.0)];
        for &r in roots {
            c.push(C64::new(0.0, 0.0));
            for k in (1..c.len()).rev() {
                let prev = c[k - 1];
                c[k] -= r * prev;
            }
        }
        Poly::new(c)
    }

    /// Coefficients, highest power first.
    pub fn coeffs(&self) -> &[C64] {
        &self.c
    }

    /// Degree (0 for constants, including the zero polynomial).
    pub fn degree(&self) -> usize {
        self.c.len() - 1
    }

    /// True for the zero polynomial.
    pub fn is_zero(&self) -> bool {
        self.c.len() == 1 && self.c[0] == C64::new(0.0, 0.0)
    }

    /// Leading coefficient.
    pub fn lead(&self) -> C64 {
        self.c[0]
    }

    /// Coefficient of `s^k`.
    pub fn coeff(&self, k: usize) -> C64 {
        let n = self.degree();
        if k > n {
            C64::new(0.0, 0.0)
        } else {
            self.c[n - k]
        }
    }

    /// Horner evaluation.
    pub fn eval(&self, s: C64) -> C64 {
        self.c.iter().fold(C64::new(0.0, 0.0), |acc, &a| acc * s + a)
    }

    /// First derivative.
    pub fn derivative(&self) -> Poly {
        let n = self.degree();
        if n == 0 {
            return Poly::zero();
        }
        Poly::new(self.c[..n].iter().enumerate().map(|(i, &a)| a * (n - i) as f64).collect())
    }

    /// Coefficient-wise conjugate, i.e. `conj(p(conj(s)))`.
    pub fn conj(&self) -> Poly {
        Poly { c: self.c.iter().map(|z| z.conj()).collect() }
    }

    /// Multiply by a scalar.
    pub fn scale(&self, k: C64) -> Poly {
        Poly::new(self.c.iter().map(|&a| a * k).collect())
    }

    /// Substitute `s = w·σ`, returning the polynomial in `σ`.
    pub fn scale_var(&self, w: f64) -> Poly {
        let n = self.degree();
        let mut out = self.c.clone();
        let mut p = 1.0;
        for k in 0..=n {
            out[n - k] *= p;
            p *= w;
        }
        Poly::new(out)
    }

    /// All coefficients finite.
    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.c.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Number of exact zero roots (trailing zero coefficients).
    pub fn zero_root_multiplicity(&self) -> usize {
        if self.is_zero() {
            return 0;
        }
        self.c.iter().rev().take_while(|z| **z == C64::new(0.0, 0.0)).count()
    }

    /// Remove `k` exact zero roots; fails if fewer are present.
    pub fn strip_zero_roots(&self, k: usize) -> Result<Poly> {
        if self.zero_root_multiplicity() < k {
            return Err(Error::Degenerate("not enough zero roots to strip".into()));
        }
        Ok(Poly::new(self.c[..self.c.len() - k].to_vec()))
    }

    /// Long division from the leading coefficient: `self = q·d + r`.
    pub fn div_rem(&self, d: &Poly) -> Result<(Poly, Poly)> {
        if d.is_zero() {
            return Err(Error::Degenerate("division by the zero polynomial".into()));
        }
        let (n, m) = (self.degree(), d.degree());
        if n < m {
            return Ok((Poly::zero(), self.clone()));
        }
        let mut r = self.c.clone();
        let mut q = vec![C64::new(0.0, 0.0); n - m + 1];
        for k in 0..=(n - m) {
            let f = r[k] / d.c[0];
            q[k] = f;
            for (j, &dj) in d.c.iter().enumerate() {
                r[k + j] -= f * dj;
            }
        }
        Ok((Poly::new(q), Poly::new(r[n - m + 1..].to_vec())))
    }

    /// Exact division started from the constant term.
    ///
    /// Numerically stable when the divisor's roots are large compared with
    /// the quotient's, which is the case for fast inner-loop factors. Returns
    /// the quotient and the remainder size relative to `max_abs(self)`.
    pub fn deflate(&self, d: &Poly) -> Result<(Poly, f64)> {
        let d0 = d.coeff(0);
        if d0 == C64::new(0.0, 0.0) {
            return Err(Error::Degenerate("divisor has a zero root; strip it first".into()));
        }
        let (n, m) = (self.degree(), d.degree());
        if n < m {
            return Err(Error::Degenerate("divisor degree exceeds dividend".into()));
        }
        // ascending copies
        let a: Vec<C64> = (0..=n).map(|k| self.coeff(k)).collect();
        let b: Vec<C64> = (0..=m).map(|k| d.coeff(k)).collect();
        let mut r = a.clone();
        let mut q = vec![C64::new(0.0, 0.0); n - m + 1];
        for k in 0..=(n - m) {
            let f = r[k] / d0;
            q[k] = f;
            for (j, &bj) in b.iter().enumerate() {
                r[k + j] -= f * bj;
            }
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let rem = r[n - m + 1..].iter().map(|z| z.norm()).fold(0.0, f64::max) / scale;
        q.reverse();
        Ok((Poly::new(q), rem))
    }

    /// All roots (closed form for quadratics, companion-matrix eigenvalues
    /// otherwise), sorted with [`sort_modes`].
    ///
    /// Exact zero roots are split off first; the remaining polynomial is
    /// rescaled in `s` so the coefficients are balanced before the companion
    /// matrix is formed.
    pub fn roots(&self) -> Result<Vec<C64>> {
        if !self.is_finite() {
            return Err(Error::Numerical("non-finite polynomial coefficient".into()));
        }
        if self.degree() == 0 {
            return Err(Error::Degenerate("degree-0 polynomial has no roots".into()));
        }
        let nz = self.zero_root_multiplicity();
        let mut out = vec![C64::new(0.0, 0.0); nz];
        let p = Poly::new(self.c[..self.c.len() - nz].to_vec());
        let n = p.degree();
        if n == 2 {
            out.extend(quadratic_roots(p.c[0], p.c[1], p.c[2]));
        } else if n > 0 {
            let w = (p.coeff(0).norm() / p.lead().norm()).powf(1.0 / n as f64);
            let w = if w.is_finite() && w > 0.0 { w } else { 1.0 };
            let q = p.scale_var(w);
            let lead = q.lead();
            let mut comp = nalgebra::DMatrix::<C64>::zeros(n, n);
            for j in 0..n {
                comp[(0, j)] = -q.c[j + 1] / lead;
            }
            for i in 1..n {
                comp[(i, i - 1)] = C64::new(1.0, 0.0);
            }
            for z in linalg::complex_eigenvalues(comp)? {
                out.push(z * w);
            }
        }
        sort_modes(&mut out);
        Ok(out)
    }
}

// Stable quadratic formula. A discriminant within rounding of zero is taken
// as a double root; the companion route only resolves those to sqrt(eps).
fn quadratic_roots(a: C64, b: C64, c: C64) -> [C64; 2] {
    let disc = b * b - a * c * 4.0;
    let tol = 64.0 * f64::EPSILON * (b * b).norm().max((a * c * 4.0).norm());
    if disc.norm() <= tol {
        let r = -b / (a * 2.0);
        return [r, r];
    }
    let mut sq = disc.sqrt();
    if (b.conj() * sq).re < 0.0 {
        sq = -sq;
    }
    let q = -(b + sq) * 0.5;
    if q.norm() == 0.0 {
        return [C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
    }
    [q / a, c / q]
}

/// Sort by descending real part; real parts equal to within a relative
/// 1e-9 are ordered by descending imaginary part.
pub fn sort_modes(z: &mut [C64]) {
    z.sort_by(|a, b| b.re.total_cmp(&a.re));
    let mut i = 0;
    while i < z.len() {
        let mut j = i + 1;
        while j < z.len() {
            let scale = 1.0f64.max(z[i].norm()).max(z[j].norm());
            if (z[j].re - z[i].re).abs() > 1e-9 * scale {
                break;
            }
            j += 1;
        }
        z[i..j].sort_by(|a, b| b.im.total_cmp(&a.im));
        i = j;
    }
}

fn add_desc(a: &[C64], b: &[C64], sign: f64) -> Poly {
    let n = a.len().max(b.len());
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (k, &x) in a.iter().enumerate() {
        out[n - a.len() + k] += x;
    }
    for (k, &x) in b.iter().enumerate() {
        out[n - b.len() + k] += x * sign;
    }
    Poly::new(out)
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        add_desc(&self.c, &o.c, 1.0)
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        add_desc(&self.c, &o.c, -1.0)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        let mut out = vec![C64::new(0.0, 0.0); self.c.len() + o.c.len() - 1];
        for (i, &a) in self.c.iter().enumerate() {
            for (j, &b) in o.c.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly { c: self.c.iter().map(|&z| -z).collect() }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Poly {
            type Output = Poly;
            fn $m(self, o: Poly) -> Poly {
                (&self).$m(&o)
            }
        }
        impl $tr<&Poly> for Poly {
            type Output = Poly;
            fn $m(self, o: &Poly) -> Poly {
                (&self).$m(o)
            }
        }
        impl $tr<Poly> for &Poly {
            type Output = Poly;
            fn $m(self, o: Poly) -> Poly {
                self.$m(&o)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        -&self
    }
}

impl Mul<C64> for &Poly {
    type Output = Poly;
    fn mul(self, k: C64) -> Poly {
        self.scale(k)
    }
}

impl Mul<C64> for Poly {
    type Output = Poly;
    fn mul(self, k: C64) -> Poly {
        self.scale(k)
    }
}

impl Mul<f64> for &Poly {
    type Output = Poly;
    fn mul(self, k: f64) -> Poly {
        self.scale(C64::new(k, 0.0))
    }
}

impl Mul<f64> for Poly {
    type Output = Poly;
    fn mul(self, k: f64) -> Poly {
        self.scale(C64::new(k, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn strips_leading_zeros() {
        let p = Poly::real(&[0.0, 0.0, 1.0, 2.0]);
        assert_eq!(p.degree(), 1);
        assert!(Poly::real(&[0.0, 0.0]).is_zero());
    }

    #[test]
    fn roots_of_unit_circle_pair() {
        let r = Poly::real(&[1.0, 0.0, 1.0]).roots().unwrap();
        assert!((r[0] - c(0.0, 1.0)).norm() < 1e-12);
        assert!((r[1] - c(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn roots_of_cubic_sorted() {
        let r = Poly::real(&[1.0, -6.0, 11.0, -6.0]).roots().unwrap();
        for (z, want) in r.iter().zip([3.0, 2.0, 1.0]) {
            assert!((z - c(want, 0.0)).norm() < 1e-10, "{z}");
        }
    }

    #[test]
    fn zero_roots_are_exact() {
        let p = Poly::real(&[1.0, 3.0, 0.0, 0.0]);
        let r = p.roots().unwrap();
        assert_eq!(r.iter().filter(|z| **z == c(0.0, 0.0)).count(), 2);
    }

    #[test]
    fn deflate_matches_div_rem_on_exact_factor() {
        let a = Poly::from_roots(&[c(-1.0, 2.0), c(-3.0, 0.0), c(-100.0, 0.0)]);
        let d = Poly::from_roots(&[c(-100.0, 0.0)]);
        let (q, rem) = a.deflate(&d).unwrap();
        let (q2, r2) = a.div_rem(&d).unwrap();
        assert!(rem < 1e-14);
        assert!(r2.max_abs() < 1e-10);
        for k in 0..=q.degree() {
            assert!((q.coeff(k) - q2.coeff(k)).norm() < 1e-10);
        }
    }

    #[test]
    fn derivative_and_scale_var() {
        let p = Poly::real(&[2.0, 3.0, 5.0]);
        assert_eq!(p.derivative(), Poly::real(&[4.0, 3.0]));
        let q = p.scale_var(10.0);
        let s = c(0.3, -0.2);
        assert!((q.eval(s) - p.eval(s * 10.0)).norm() < 1e-12);
    }

    #[test]
    fn degree_zero_has_no_roots() {
        assert!(Poly::real(&[4.0]).roots().is_err());
    }
}
