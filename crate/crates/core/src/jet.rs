//! Truncated multivariate Taylor polynomials in `(x, y, z, t)`.
//!
//! A [`Jet`] of order `k` carries the value of a scalar function and all of its
//! partial derivatives up to total order `k`, stored as Taylor coefficients
//! `∂^α f / α!` in graded monomial order. Arithmetic on jets is exact
//! truncated polynomial arithmetic, so composing fields and then reading off a
//! derivative gives the derivative of the composition to rounding error.
//!
//! Constants carry an unbounded order and a single coefficient.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use crate::exterior::{Real, Scalar};

pub const NVARS: usize = 4;
/// Highest order any jet may carry.
pub const MAX_ORDER: usize = 6;

const CONST_ORDER: u8 = u8::MAX;

struct Tables {
    monos: Vec<[u8; NVARS]>,
    /// `sizes[k]` = number of monomials of total degree ≤ k.
    sizes: Vec<usize>,
    lookup: HashMap<[u8; NVARS], usize>,
    /// `(i, j, l)` with `mono[i] + mono[j] = mono[l]`, sorted by `l`.
    products: Vec<(u16, u16, u16)>,
    /// `product_prefix[k]` = number of product triples with `l < sizes[k]`.
    product_prefix: Vec<usize>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut monos = Vec::new();
        let mut sizes = Vec::new();
        for total in 0..=MAX_ORDER as u8 {
            for a in (0..=total).rev() {
                for b in (0..=total - a).rev() {
                    for c in (0..=total - a - b).rev() {
                        let d = total - a - b - c;
                        monos.push([a, b, c, d]);
                    }
                }
            }
            sizes.push(monos.len());
        }
        let lookup: HashMap<_, _> = monos.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        let mut products = Vec::new();
        for (i, mi) in monos.iter().enumerate() {
            for (j, mj) in monos.iter().enumerate() {
                let s = [mi[0] + mj[0], mi[1] + mj[1], mi[2] + mj[2], mi[3] + mj[3]];
                if let Some(&l) = lookup.get(&s) {
                    products.push((i as u16, j as u16, l as u16));
                }
            }
        }
        products.sort_by_key(|&(i, j, l)| (l, i, j));
        let product_prefix = sizes
            .iter()
            .map(|&n| products.partition_point(|&(_, _, l)| (l as usize) < n))
            .collect();
        Tables {
            monos,
            sizes,
            lookup,
            products,
            product_prefix,
        }
    })
}

/// Number of Taylor coefficients of an order-`k` jet.
pub fn coefficient_count(order: usize) -> usize {
    tables().sizes[order]
}

/// Exponent tuple of the `i`-th monomial.
pub fn monomial(i: usize) -> [u8; NVARS] {
    tables().monos[i]
}

pub fn monomial_index(m: [u8; NVARS]) -> Option<usize> {
    tables().lookup.get(&m).copied()
}

#[derive(Clone, PartialEq)]
pub struct Jet {
    order: u8,
    c: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_constant() {
            write!(f, "Jet(const {})", self.c[0])
        } else {
            write!(f, "Jet(order {}, {:?})", self.order, self.c)
        }
    }
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        Jet {
            order: CONST_ORDER,
            c: vec![v],
        }
    }

    /// The coordinate function `var` (0..4 for x, y, z, t) expanded at `value`.
    pub fn variable(var: usize, value: f64, order: usize) -> Self {
        assert!(var < NVARS && order <= MAX_ORDER);
        let mut c = vec![0.0; coefficient_count(order)];
        c[0] = value;
        if order >= 1 {
            let mut m = [0u8; NVARS];
            m[var] = 1;
            c[monomial_index(m).unwrap()] = 1.0;
        }
        Jet {
            order: order as u8,
            c,
        }
    }

    /// Builds a jet from Taylor coefficients (`∂^α f / α!`) in graded order.
    pub fn from_coefficients(order: usize, c: Vec<f64>) -> Self {
        assert!(order <= MAX_ORDER);
        assert_eq!(c.len(), coefficient_count(order));
        Jet {
            order: order as u8,
            c,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.order == CONST_ORDER
    }

    /// Order of the jet; `None` for exact constants.
    pub fn order(&self) -> Option<usize> {
        (!self.is_constant()).then_some(self.order as usize)
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    /// Taylor coefficient of the monomial `m`, zero when beyond the order.
    pub fn coefficient(&self, m: [u8; NVARS]) -> f64 {
        monomial_index(m)
            .and_then(|i| self.c.get(i).copied())
            .unwrap_or(0.0)
    }

    /// Partial derivative `∂^m f` (not divided by `m!`).
    pub fn derivative(&self, m: [u8; NVARS]) -> f64 {
        let fact: f64 = m.iter().map(|&e| (1..=e as u32).product::<u32>() as f64).product();
        self.coefficient(m) * fact
    }

    fn len_for(order: u8) -> usize {
        if order == CONST_ORDER {
            1
        } else {
            coefficient_count(order as usize)
        }
    }

    /// Drops coefficients above order `k`.
    pub fn truncate(&self, k: usize) -> Jet {
        if self.is_constant() || self.order as usize <= k {
            return self.clone();
        }
        let n = coefficient_count(k);
        Jet {
            order: k as u8,
            c: self.c[..n.min(self.c.len())].to_vec(),
        }
    }

    /// Partial derivative with respect to variable `var`; the order drops by one.
    pub fn partial(&self, var: usize) -> Jet {
        if self.is_constant() {
            return Jet::constant(0.0);
        }
        assert!(self.order >= 1, "derivative requested beyond the jet order");
        let k = self.order as usize - 1;
        let t = tables();
        let n = coefficient_count(k);
        let mut c = vec![0.0; n];
        if self.c.len() > 1 {
            for (i, slot) in c.iter_mut().enumerate() {
                let mut m = t.monos[i];
                m[var] += 1;
                let j = t.lookup[&m];
                *slot = (m[var] as f64) * self.c[j];
            }
        }
        Jet {
            order: k as u8,
            c,
        }
    }

    fn zip(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let order = self.order.min(other.order);
        let n = if self.c.len() == 1 && other.c.len() == 1 {
            1
        } else {
            Jet::len_for(order)
        };
        let c = (0..n)
            .map(|i| {
                f(
                    self.c.get(i).copied().unwrap_or(0.0),
                    other.c.get(i).copied().unwrap_or(0.0),
                )
            })
            .collect();
        Jet { order, c }
    }

    fn mul_jet(&self, other: &Jet) -> Jet {
        let order = self.order.min(other.order);
        if self.c.len() == 1 {
            return Jet {
                order,
                c: other.c.iter().take(Jet::len_for(order)).map(|v| v * self.c[0]).collect(),
            };
        }
        if other.c.len() == 1 {
            return Jet {
                order,
                c: self.c.iter().take(Jet::len_for(order)).map(|v| v * other.c[0]).collect(),
            };
        }
        let t = tables();
        let n = Jet::len_for(order);
        let mut c = vec![0.0; n];
        for &(i, j, l) in &t.products[..t.product_prefix[order as usize]] {
            c[l as usize] += self.c[i as usize] * other.c[j as usize];
        }
        Jet { order, c }
    }

    /// Evaluates `Σ_n coeffs[n] (self − value)^n`, the composition of a
    /// univariate Taylor series with this jet.
    pub fn compose(&self, coeffs: &[f64]) -> Jet {
        if self.c.len() == 1 {
            return Jet {
                order: self.order,
                c: vec![coeffs[0]],
            };
        }
        let mut delta = self.clone();
        delta.c[0] = 0.0;
        let k = self.order as usize;
        let mut r = Jet::constant(coeffs.get(k).copied().unwrap_or(0.0));
        for n in (0..k).rev() {
            r = r.mul_jet(&delta);
            r.c[0] += coeffs[n];
        }
        if r.c.len() == 1 {
            // k == 0: promote to the jet's order
            r.order = self.order;
        }
        r
    }

    fn series_order(&self) -> usize {
        if self.c.len() == 1 {
            0
        } else {
            self.order as usize
        }
    }

    pub fn recip(&self) -> Jet {
        let a = self.value();
        let k = self.series_order();
        let coeffs: Vec<f64> = (0..=k)
            .map(|n| {
                let s = if n % 2 == 0 { 1.0 } else { -1.0 };
                s / a.powi(n as i32 + 1)
            })
            .collect();
        self.compose(&coeffs)
    }

    pub fn exp(&self) -> Jet {
        let ea = self.value().exp();
        let k = self.series_order();
        let mut coeffs = Vec::with_capacity(k + 1);
        let mut fact = 1.0;
        for n in 0..=k {
            if n > 0 {
                fact *= n as f64;
            }
            coeffs.push(ea / fact);
        }
        self.compose(&coeffs)
    }

    pub fn ln(&self) -> Jet {
        let a = self.value();
        let k = self.series_order();
        let coeffs: Vec<f64> = (0..=k)
            .map(|n| {
                if n == 0 {
                    a.ln()
                } else {
                    let s = if n % 2 == 1 { 1.0 } else { -1.0 };
                    s / (n as f64 * a.powi(n as i32))
                }
            })
            .collect();
        self.compose(&coeffs)
    }

    fn trig(&self, phase: usize) -> Jet {
        let a = self.value();
        let (s, c) = a.sin_cos();
        let cycle = [s, c, -s, -c];
        let k = self.series_order();
        let mut coeffs = Vec::with_capacity(k + 1);
        let mut fact = 1.0;
        for n in 0..=k {
            if n > 0 {
                fact *= n as f64;
            }
            coeffs.push(cycle[(n + phase) % 4] / fact);
        }
        self.compose(&coeffs)
    }

    pub fn sin(&self) -> Jet {
        self.trig(0)
    }

    pub fn cos(&self) -> Jet {
        self.trig(1)
    }

    pub fn tan(&self) -> Jet {
        self.sin().mul_jet(&self.cos().recip())
    }

    /// Real power with a constant exponent; the base value must be positive
    /// unless the exponent is a non-negative integer.
    pub fn powf(&self, p: f64) -> Jet {
        if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
            return self.powi(p as i32);
        }
        let a = self.value();
        let k = self.series_order();
        let mut coeffs = Vec::with_capacity(k + 1);
        let mut binom = 1.0;
        for n in 0..=k {
            if n > 0 {
                binom *= (p - (n as f64 - 1.0)) / n as f64;
            }
            coeffs.push(binom * a.powf(p - n as f64));
        }
        self.compose(&coeffs)
    }

    pub fn powi(&self, n: i32) -> Jet {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut result = Jet::constant(1.0);
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_jet(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_jet(&base);
            }
        }
        if result.is_constant() && !self.is_constant() {
            result.order = self.order;
        }
        result
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    /// `|f|`, differentiated as `sign(f) f'` with `sign(0) = 0`.
    pub fn abs(&self) -> Jet {
        let a = self.value();
        let s = if a > 0.0 {
            1.0
        } else if a < 0.0 {
            -1.0
        } else {
            0.0
        };
        let mut r = self.scale(s);
        r.c[0] = a.abs();
        r
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }

    /// Largest coefficient magnitude (zero for an all-zero jet).
    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        self.zip(&rhs, |a, b| a + b)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self.zip(&rhs, |a, b| a - b)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.mul_jet(&rhs)
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        for v in &mut self.c {
            *v = -*v;
        }
        self
    }
}

impl Scalar for Jet {
    fn zero() -> Self {
        Jet::constant(0.0)
    }
    fn one() -> Self {
        Jet::constant(1.0)
    }
}

impl Real for Jet {
    fn from_f64(v: f64) -> Self {
        Jet::constant(v)
    }
    fn scale(&self, k: f64) -> Self {
        Jet {
            order: self.order,
            c: self.c.iter().map(|v| v * k).collect(),
        }
    }
}

/// Determinant and inverse of a 3×3 matrix over any real ring, using cofactors.
/// Returns `None` when `|det| < min_det` at the expansion point.
pub fn invert3<S: Real>(m: &[[S; 3]; 3], det_value: impl Fn(&S) -> f64, min_det: f64) -> Option<(S, [[S; 3]; 3])> {
    let c = |i: usize, j: usize| m[i][j].clone();
    let cof = |i0: usize, i1: usize, j0: usize, j1: usize| c(i0, j0) * c(i1, j1) - c(i0, j1) * c(i1, j0);
    // cofactor matrix entries C_ij
    let c00 = cof(1, 2, 1, 2);
    let c01 = -cof(1, 2, 0, 2);
    let c02 = cof(1, 2, 0, 1);
    let c10 = -cof(0, 2, 1, 2);
    let c11 = cof(0, 2, 0, 2);
    let c12 = -cof(0, 2, 0, 1);
    let c20 = cof(0, 1, 1, 2);
    let c21 = -cof(0, 1, 0, 2);
    let c22 = cof(0, 1, 0, 1);
    let det = c(0, 0) * c00.clone() + c(0, 1) * c01.clone() + c(0, 2) * c02.clone();
    if !(det_value(&det).abs() >= min_det) {
        return None;
    }
    let inv_det = recip_generic(&det, &det_value);
    let f = |x: S| x * inv_det.clone();
    // inverse = adjugate / det, adjugate = transpose of cofactors
    let inv = [
        [f(c00), f(c10), f(c20)],
        [f(c01), f(c11), f(c21)],
        [f(c02), f(c12), f(c22)],
    ];
    Some((det, inv))
}

fn recip_generic<S: Real>(x: &S, value: &impl Fn(&S) -> f64) -> S {
    // Newton iteration on the reciprocal converges quadratically in the
    // truncation order for jets, and exactly in one step for plain numbers.
    let mut y = S::from_f64(1.0 / value(x));
    for _ in 0..=MAX_ORDER.ilog2() + 2 {
        y = y.clone() * (S::from_f64(2.0) - x.clone() * y.clone());
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(i: usize, v: f64, k: usize) -> Jet {
        Jet::variable(i, v, k)
    }

    #[test]
    fn table_sizes() {
        assert_eq!(coefficient_count(0), 1);
        assert_eq!(coefficient_count(1), 5);
        assert_eq!(coefficient_count(2), 15);
        assert_eq!(coefficient_count(3), 35);
    }

    #[test]
    fn product_rule() {
        let x = var(0, 0.3, 3);
        let y = var(1, -0.7, 3);
        let f = x.clone() * y.clone() * x.clone();
        // f = x^2 y
        assert!((f.value() - 0.09 * -0.7).abs() < 1e-15);
        assert!((f.derivative([1, 0, 0, 0]) - 2.0 * 0.3 * -0.7).abs() < 1e-15);
        assert!((f.derivative([2, 1, 0, 0]) - 2.0).abs() < 1e-15);
        assert!((f.derivative([1, 1, 0, 0]) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn transcendental_derivatives() {
        let a = 0.4;
        let x = var(0, a, 4);
        let s = x.sin();
        assert!((s.derivative([3, 0, 0, 0]) + a.cos()).abs() < 1e-14);
        let e = (x.clone() * x.clone()).exp();
        // d/dx e^{x^2} = 2x e^{x^2}
        assert!((e.derivative([1, 0, 0, 0]) - 2.0 * a * (a * a).exp()).abs() < 1e-14);
        let l = x.ln();
        assert!((l.derivative([2, 0, 0, 0]) + 1.0 / (a * a)).abs() < 1e-12);
        let q = x.powf(1.5);
        assert!((q.derivative([2, 0, 0, 0]) - 0.75 / a.sqrt()).abs() < 1e-12);
        let t = x.tan();
        assert!((t.derivative([1, 0, 0, 0]) - 1.0 / (a.cos() * a.cos())).abs() < 1e-12);
    }

    #[test]
    fn partial_lowers_order() {
        let x = var(0, 1.0, 2);
        let y = var(1, 2.0, 2);
        let f = x.clone() * y.clone();
        let fx = f.partial(0);
        assert_eq!(fx.order(), Some(1));
        assert!((fx.value() - 2.0).abs() < 1e-15);
        assert!((fx.partial(1).value() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constants_absorb_order() {
        let c = Jet::constant(2.0);
        let x = var(2, 1.0, 2);
        let s = c.clone() + x.clone();
        assert_eq!(s.order(), Some(2));
        assert_eq!((c.clone() * c).order(), None);
    }

    #[test]
    fn invert_matches_identity() {
        let x = var(0, 0.5, 2);
        let one = Jet::constant(1.0);
        let zero = Jet::constant(0.0);
        let m = [
            [one.clone() + x.clone() * x.clone(), x.clone(), zero.clone()],
            [zero.clone(), one.clone(), x.sin()],
            [x.clone(), zero.clone(), one.clone() + x.clone()],
        ];
        let (_, inv) = invert3(&m, |d: &Jet| d.value(), 1e-8).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = Jet::constant(0.0);
                for k in 0..3 {
                    acc = acc + m[i][k].clone() * inv[k][j].clone();
                }
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((acc.value() - target).abs() < 1e-13);
                assert!(acc.partial(0).max_abs() < 1e-12);
            }
        }
    }
}
