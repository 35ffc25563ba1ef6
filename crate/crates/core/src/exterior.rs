//! Pointwise exterior algebra on an oriented Euclidean 3-frame.
//!
//! Component ordering is lexicographic by multi-index and is relied upon by
//! every other module:
//!
//! | degree | components            |
//! |--------|-----------------------|
//! | 0      | `()`                  |
//! | 1      | `(1) (2) (3)`         |
//! | 2      | `(12) (13) (23)`      |
//! | 3      | `(123)`               |
//!
//! The orientation is fixed by `ε_123 = +1`, so `*1 = e^123`, `*e^1 = e^23`,
//! `*e^2 = -e^13` and `*e^3 = e^12`. Indices are raised and lowered with the
//! identity.
//!
//! [`KForm`] is generic over its coefficient ring so that the same code runs on
//! plain numbers, integers (exact basis tests), truncated Taylor jets and
//! symbolic expressions.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

/// Coefficient ring for [`KForm`].
pub trait Scalar:
    Clone
    + fmt::Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
}

/// Real-valued coefficient rings.
pub trait Real: Scalar {
    fn from_f64(v: f64) -> Self;
    fn scale(&self, k: f64) -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn scale(&self, k: f64) -> Self {
        self * k
    }
}

impl Scalar for i64 {
    fn zero() -> Self {
        0
    }
    fn one() -> Self {
        1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormError {
    #[error("exterior product of degrees {0} and {1} exceeds 3")]
    DegreeOverflow(usize, usize),
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),
    #[error("degree {0} is not in 0..=3")]
    InvalidDegree(usize),
    #[error("degree {degree} form needs {expected} components, got {got}")]
    ComponentCount {
        degree: usize,
        expected: usize,
        got: usize,
    },
    #[error("frame index {0} is not in 1..=3")]
    InvalidIndex(usize),
}

/// Index `a` of a frame vector or coframe 1-form, stored 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FrameIndex(u8);

impl FrameIndex {
    pub const ALL: [FrameIndex; 3] = [FrameIndex(0), FrameIndex(1), FrameIndex(2)];

    /// One-based constructor matching the usual `a = 1, 2, 3` notation.
    pub fn new(value: usize) -> Result<Self, FormError> {
        if (1..=3).contains(&value) {
            Ok(FrameIndex((value - 1) as u8))
        } else {
            Err(FormError::InvalidIndex(value))
        }
    }

    pub fn from_zero_based(i: usize) -> Self {
        assert!(i < 3, "frame index out of range: {i}");
        FrameIndex(i as u8)
    }

    /// One-based value.
    pub fn value(self) -> usize {
        self.0 as usize + 1
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

const IDX0: [&[usize]; 1] = [&[]];
const IDX1: [&[usize]; 3] = [&[0], &[1], &[2]];
const IDX2: [&[usize]; 3] = [&[0, 1], &[0, 2], &[1, 2]];
const IDX3: [&[usize]; 1] = [&[0, 1, 2]];

/// Sorted multi-indices of the basis `p`-forms, in storage order.
pub fn multi_indices(degree: usize) -> &'static [&'static [usize]] {
    match degree {
        0 => &IDX0,
        1 => &IDX1,
        2 => &IDX2,
        3 => &IDX3,
        _ => &[],
    }
}

/// `C(3, degree)`.
pub fn component_count(degree: usize) -> usize {
    multi_indices(degree).len()
}

fn position(sorted: &[usize]) -> usize {
    multi_indices(sorted.len())
        .iter()
        .position(|m| *m == sorted)
        .expect("sorted multi-index")
}

/// Sorts a list of distinct indices, returning the permutation sign.
/// Returns `None` when an index repeats.
fn sort_with_sign(idx: &mut [usize]) -> Option<i32> {
    let mut sign = 1;
    for i in 0..idx.len() {
        for j in 0..idx.len() - 1 - i {
            if idx[j] == idx[j + 1] {
                return None;
            }
            if idx[j] > idx[j + 1] {
                idx.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some(sign)
}

fn signed<S: Scalar>(sign: i32, v: S) -> S {
    if sign < 0 {
        -v
    } else {
        v
    }
}

/// A `p`-form at a point, `p ∈ {0, 1, 2, 3}`.
#[derive(Clone, PartialEq)]
pub struct KForm<S = f64> {
    degree: usize,
    comps: Vec<S>,
}

impl<S: fmt::Debug> fmt::Debug for KForm<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KForm<{}>{:?}", self.degree, self.comps)
    }
}

impl<S: Scalar> KForm<S> {
    pub fn new(degree: usize, comps: Vec<S>) -> Result<Self, FormError> {
        if degree > 3 {
            return Err(FormError::InvalidDegree(degree));
        }
        let expected = component_count(degree);
        if comps.len() != expected {
            return Err(FormError::ComponentCount {
                degree,
                expected,
                got: comps.len(),
            });
        }
        Ok(KForm { degree, comps })
    }

    pub fn zero(degree: usize) -> Self {
        assert!(degree <= 3, "form degree {degree} out of range");
        KForm {
            degree,
            comps: vec![S::zero(); component_count(degree)],
        }
    }

    pub fn scalar(v: S) -> Self {
        KForm {
            degree: 0,
            comps: vec![v],
        }
    }

    /// Basis form `e^I` where `I` is the `index`-th multi-index of `degree`.
    pub fn basis(degree: usize, index: usize) -> Self {
        let mut f = Self::zero(degree);
        f.comps[index] = S::one();
        f
    }

    /// Basis 1-form `e^a`.
    pub fn e(a: FrameIndex) -> Self {
        Self::basis(1, a.index())
    }

    /// The volume form `*1 = e^123`.
    pub fn volume() -> Self {
        Self::basis(3, 0)
    }

    pub fn from_vector(v: [S; 3]) -> Self {
        KForm {
            degree: 1,
            comps: v.to_vec(),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> &[S] {
        &self.comps
    }

    pub fn components_mut(&mut self) -> &mut [S] {
        &mut self.comps
    }

    pub fn into_components(self) -> Vec<S> {
        self.comps
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> KForm<T> {
        KForm {
            degree: self.degree,
            comps: self.comps.iter().map(f).collect(),
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, FormError> {
        if self.degree != other.degree {
            return Err(FormError::DegreeMismatch(self.degree, other.degree));
        }
        Ok(KForm {
            degree: self.degree,
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, FormError> {
        self.checked_add(&-other.clone())
    }

    /// Multiplication by a 0-form coefficient.
    pub fn mul_scalar(&self, k: &S) -> Self {
        self.map(|c| k.clone() * c.clone())
    }

    /// Exterior product `self ∧ other`.
    pub fn wedge(&self, other: &Self) -> Result<Self, FormError> {
        let p = self.degree;
        let q = other.degree;
        if p + q > 3 {
            return Err(FormError::DegreeOverflow(p, q));
        }
        if p == 0 {
            return Ok(other.mul_scalar(&self.comps[0]));
        }
        if q == 0 {
            return Ok(self.mul_scalar(&other.comps[0]));
        }
        let mut out = Self::zero(p + q);
        let mut buf = [0usize; 3];
        for (i, a) in multi_indices(p).iter().enumerate() {
            for (j, b) in multi_indices(q).iter().enumerate() {
                let n = a.len() + b.len();
                buf[..a.len()].copy_from_slice(a);
                buf[a.len()..n].copy_from_slice(b);
                let Some(sign) = sort_with_sign(&mut buf[..n]) else {
                    continue;
                };
                let k = position(&buf[..n]);
                let term = self.comps[i].clone() * other.comps[j].clone();
                out.comps[k] = out.comps[k].clone() + signed(sign, term);
            }
        }
        Ok(out)
    }

    /// Euclidean Hodge dual, `p → 3 − p`.
    pub fn hodge(&self) -> Self {
        let p = self.degree;
        let mut out = Self::zero(3 - p);
        for (i, a) in multi_indices(p).iter().enumerate() {
            let mut perm = [0usize; 3];
            perm[..p].copy_from_slice(a);
            let mut n = p;
            for c in 0..3 {
                if !a.contains(&c) {
                    perm[n] = c;
                    n += 1;
                }
            }
            let complement = &perm[p..];
            let k = position(complement);
            let mut sorted = perm;
            let sign = sort_with_sign(&mut sorted).expect("permutation");
            out.comps[k] = out.comps[k].clone() + signed(sign, self.comps[i].clone());
        }
        out
    }

    /// Contraction `ι_a` with the `a`-th frame vector.
    pub fn interior(&self, a: FrameIndex) -> Self {
        let p = self.degree;
        if p == 0 {
            return Self::zero(0);
        }
        let a = a.index();
        let mut out = Self::zero(p - 1);
        let mut rest = [0usize; 2];
        for (i, m) in multi_indices(p).iter().enumerate() {
            let Some(k) = m.iter().position(|&c| c == a) else {
                continue;
            };
            let mut n = 0;
            for &c in m.iter() {
                if c != a {
                    rest[n] = c;
                    n += 1;
                }
            }
            let j = position(&rest[..n]);
            let sign = if k % 2 == 0 { 1 } else { -1 };
            out.comps[j] = out.comps[j].clone() + signed(sign, self.comps[i].clone());
        }
        out
    }

    /// Contraction with the vector `Σ_a v^a ∂_a`.
    pub fn interior_vector(&self, v: &[S; 3]) -> Self {
        if self.degree == 0 {
            return Self::zero(0);
        }
        let mut out = Self::zero(self.degree - 1);
        for a in FrameIndex::ALL {
            let t = self.interior(a).mul_scalar(&v[a.index()]);
            out = out + t;
        }
        out
    }

    /// Re-expresses the form in a new basis. Row `i` of `basis` holds the
    /// components of the old basis 1-form `θ^i` in the new basis `φ^j`,
    /// i.e. `θ^i = Σ_j basis[i][j] φ^j`.
    pub fn rebase(&self, basis: &[[S; 3]; 3]) -> Self {
        let rows: Vec<KForm<S>> = basis
            .iter()
            .map(|r| KForm::from_vector(r.clone()))
            .collect();
        let mut out = Self::zero(self.degree);
        for (i, m) in multi_indices(self.degree).iter().enumerate() {
            let mut term = KForm::scalar(self.comps[i].clone());
            for &c in m.iter() {
                term = term.wedge(&rows[c]).expect("degree stays within 3");
            }
            out = out + term;
        }
        out
    }
}

impl<S: Real> KForm<S> {
    pub fn scale(&self, k: f64) -> Self {
        self.map(|c| c.scale(k))
    }
}

impl KForm<f64> {
    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// Panics on a degree mismatch; use [`KForm::checked_add`] for a fallible
/// version.
impl<S: Scalar> Add for KForm<S> {
    type Output = KForm<S>;
    fn add(self, rhs: Self) -> Self {
        assert_eq!(self.degree, rhs.degree, "adding forms of unequal degree");
        KForm {
            degree: self.degree,
            comps: self
                .comps
                .into_iter()
                .zip(rhs.comps)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl<S: Scalar> Sub for KForm<S> {
    type Output = KForm<S>;
    fn sub(self, rhs: Self) -> Self {
        assert_eq!(self.degree, rhs.degree, "subtracting forms of unequal degree");
        KForm {
            degree: self.degree,
            comps: self
                .comps
                .into_iter()
                .zip(rhs.comps)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl<S: Scalar> Neg for KForm<S> {
    type Output = KForm<S>;
    fn neg(self) -> Self {
        KForm {
            degree: self.degree,
            comps: self.comps.into_iter().map(|c| -c).collect(),
        }
    }
}

/// Levi-Civita symbol `ε_abc` on 0-based indices.
pub fn epsilon(a: usize, b: usize, c: usize) -> f64 {
    let mut idx = [a, b, c];
    match sort_with_sign(&mut idx) {
        Some(s) => s as f64,
        None => 0.0,
    }
}

/// Kronecker delta.
pub fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_basis() -> Vec<KForm<i64>> {
        (0..=3)
            .flat_map(|p| (0..component_count(p)).map(move |i| KForm::basis(p, i)))
            .collect()
    }

    fn e(i: usize) -> KForm<f64> {
        KForm::e(FrameIndex::new(i).unwrap())
    }

    #[test]
    fn wedge_of_basis_one_forms() {
        let w = e(1).wedge(&e(2)).unwrap();
        assert_eq!(w.components(), &[1.0, 0.0, 0.0]);
        let w = e(2).wedge(&e(1)).unwrap();
        assert_eq!(w.components(), &[-1.0, 0.0, 0.0]);
    }

    #[test]
    fn bilinear_antisymmetric_example() {
        let a = e(1) + e(2);
        let b = e(1) - e(2);
        assert_eq!(a.wedge(&b).unwrap().components(), &[-2.0, 0.0, 0.0]);
    }

    #[test]
    fn wedge_overflow_is_an_error() {
        let two = KForm::<f64>::basis(2, 0);
        assert_eq!(two.wedge(&two), Err(FormError::DegreeOverflow(2, 2)));
    }

    #[test]
    fn hodge_table() {
        let vol = KForm::<f64>::scalar(1.0).hodge();
        assert_eq!(vol, KForm::volume());
        assert_eq!(e(1).hodge().components(), &[0.0, 0.0, 1.0]);
        assert_eq!(e(2).hodge().components(), &[0.0, -1.0, 0.0]);
        assert_eq!(e(3).hodge().components(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn interior_examples() {
        let one = FrameIndex::new(1).unwrap();
        assert_eq!(e(1).interior(one).components(), &[1.0]);
        let w = e(1).wedge(&e(2)).unwrap();
        assert_eq!(w.interior(one), e(2));
        assert_eq!(KForm::scalar(3.0).interior(one), KForm::zero(0));
    }

    #[test]
    fn exhaustive_basis_identities() {
        let basis = all_basis();
        for a in &basis {
            assert_eq!(a.hodge().hodge(), *a);
            for i in FrameIndex::ALL {
                assert_eq!(a.interior(i).interior(i), KForm::zero(a.degree().saturating_sub(2)));
            }
            for b in &basis {
                if a.degree() + b.degree() > 3 {
                    assert!(a.wedge(b).is_err());
                    continue;
                }
                let sign = if (a.degree() * b.degree()) % 2 == 0 { 1 } else { -1 };
                let ab = a.wedge(b).unwrap();
                let ba = b.wedge(a).unwrap();
                assert_eq!(ab, ba.map(|c| c * sign));
                for i in FrameIndex::ALL {
                    let sa = if a.degree() % 2 == 0 { 1 } else { -1 };
                    let lhs = ab.interior(i);
                    let r1 = if a.degree() > 0 { a.interior(i).wedge(b).unwrap() } else { KForm::zero(lhs.degree()) };
                    let r2 = if b.degree() > 0 { a.wedge(&b.interior(i)).unwrap().map(|c| c * sa) } else { KForm::zero(lhs.degree()) };
                    assert_eq!(lhs, r1 + r2);
                }
            }
        }
    }

    #[test]
    fn euler_identity_for_interior() {
        // Σ_a e^a ∧ ι_a α = p α on every basis form
        for p in 1..=3 {
            for k in 0..component_count(p) {
                let alpha = KForm::<f64>::basis(p, k);
                let mut acc = KForm::zero(p);
                for a in FrameIndex::ALL {
                    acc = acc + KForm::e(a).wedge(&alpha.interior(a)).unwrap();
                }
                assert_eq!(acc, alpha.scale(p as f64));
            }
        }
    }

    #[test]
    fn rebase_round_trip() {
        let m = [[2.0, 1.0, 0.0], [0.0, 1.0, 3.0], [1.0, 0.0, 1.0]];
        // inverse of m
        let det = 2.0 * (1.0 - 0.0) - 1.0 * (0.0 - 3.0) + 0.0;
        let inv = [
            [1.0 / det, -1.0 / det, 3.0 / det],
            [3.0 / det, 2.0 / det, -6.0 / det],
            [-1.0 / det, 1.0 / det, 2.0 / det],
        ];
        let alpha = KForm::new(2, vec![0.5, -1.0, 2.0]).unwrap();
        let back = alpha.rebase(&m).rebase(&inv);
        for (x, y) in back.components().iter().zip(alpha.components()) {
            assert!((x - y).abs() < 1e-12);
        }
        let vol = KForm::<f64>::volume().rebase(&m);
        assert!((vol.components()[0] - det).abs() < 1e-12);
    }

    #[test]
    fn frame_index_range() {
        assert!(FrameIndex::new(0).is_err());
        assert!(FrameIndex::new(4).is_err());
        assert_eq!(FrameIndex::new(3).unwrap().index(), 2);
    }

    #[test]
    fn component_count_is_checked() {
        assert!(KForm::<f64>::new(2, vec![1.0]).is_err());
        assert!(KForm::<f64>::new(4, vec![]).is_err());
    }
}
