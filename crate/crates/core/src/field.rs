//! Fields of forms over ℝ³ (optionally time-dependent).
//!
//! A [`Field`] is an indexed collection of form fields sharing one degree:
//! a plain form field has no index slots, a connection has an up and a down
//! slot, and so on. Components are stored row-major over the slots.
//!
//! Evaluation is lazy and returns Taylor jets, so every derived field (`d`,
//! wedge products, contractions) carries exact derivatives as long as its
//! leaves do. The `max_order` of a field is the highest jet order it can
//! produce; each exterior derivative consumes one order. Leaves defined by
//! expressions differentiate exactly up to [`MAX_ORDER`]; finite-difference
//! leaves stop at [`FD_MAX_ORDER`].
//!
//! Form components are coordinate components (`dx`, `dy`, `dz`). With the
//! identity coframe they coincide with orthonormal frame components; the
//! frame-dependent operations in [`crate::geometry`] convert explicitly.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::expr::{Expr, Var};
use crate::exterior::{component_count, FrameIndex, KForm};
use crate::jet::{coefficient_count, monomial, Jet, MAX_ORDER, NVARS};
use crate::{Error, Result};

/// Highest derivative order available to finite-difference leaves.
pub const FD_MAX_ORDER: usize = 3;

/// Default finite-difference step.
pub const DEFAULT_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub t: f64,
}

impl Point {
    pub fn new(x: f64, y: f64, z: f64, t: f64) -> Self {
        Point { x, y, z, t }
    }

    pub fn spatial(x: f64, y: f64, z: f64) -> Self {
        Point { x, y, z, t: 0.0 }
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.x, self.y, self.z, self.t]
    }

    pub fn from_coords(c: [f64; 4]) -> Self {
        Point::new(c[0], c[1], c[2], c[3])
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|c| c.is_finite())
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, t={})", self.x, self.y, self.z, self.t)
    }
}

/// How a leaf field obtains derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    /// Exact derivatives of an expression tree.
    Symbolic,
    /// Value and first partials given by the caller; higher orders by
    /// central differences of the partials.
    ExactUserSupplied { h: f64 },
    /// Central differences of point values with step `h`.
    FiniteDifference { h: f64 },
}

impl Strategy {
    fn rank(&self) -> u8 {
        match self {
            Strategy::Symbolic => 0,
            Strategy::ExactUserSupplied { .. } => 1,
            Strategy::FiniteDifference { .. } => 2,
        }
    }

    /// The less accurate of two strategies.
    pub fn weakest(self, other: Strategy) -> Strategy {
        if other.rank() > self.rank() {
            other
        } else {
            self
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Symbolic => "symbolic",
            Strategy::ExactUserSupplied { .. } => "exact-user-supplied",
            Strategy::FiniteDifference { .. } => "finite-difference",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Up,
    Down,
}

type EvalFn = dyn Fn(&Point, usize) -> Result<Vec<KForm<Jet>>> + Send + Sync;

/// Lazily evaluated, indexed collection of form fields of one degree.
#[derive(Clone)]
pub struct Field {
    degree: usize,
    slots: Vec<Slot>,
    strategy: Strategy,
    max_order: usize,
    eval: Arc<EvalFn>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("degree", &self.degree)
            .field("slots", &self.slots)
            .field("strategy", &self.strategy)
            .field("max_order", &self.max_order)
            .finish()
    }
}

/// Number of components of a field with `n` index slots.
pub fn slot_len(n: usize) -> usize {
    3usize.pow(n as u32)
}

impl Field {
    pub fn new(
        degree: usize,
        slots: Vec<Slot>,
        strategy: Strategy,
        max_order: usize,
        eval: impl Fn(&Point, usize) -> Result<Vec<KForm<Jet>>> + Send + Sync + 'static,
    ) -> Field {
        Field {
            degree,
            slots,
            strategy,
            max_order: max_order.min(MAX_ORDER),
            eval: Arc::new(eval),
        }
    }

    pub fn constant(degree: usize, slots: Vec<Slot>, values: Vec<KForm<f64>>) -> Result<Field> {
        if values.len() != slot_len(slots.len()) || values.iter().any(|v| v.degree() != degree) {
            return Err(Error::Shape("constant field values do not match its shape".into()));
        }
        let jets: Vec<KForm<Jet>> = values.iter().map(|v| v.map(|c| Jet::constant(*c))).collect();
        Ok(Field::new(degree, slots, Strategy::Symbolic, MAX_ORDER, move |_, _| {
            Ok(jets.clone())
        }))
    }

    pub fn zero(degree: usize, slots: Vec<Slot>) -> Field {
        let n = slot_len(slots.len());
        Field::constant(degree, slots, vec![KForm::zero(degree); n]).expect("shape is consistent")
    }

    /// Constant scalar 0-form.
    pub fn constant_scalar(v: f64) -> Field {
        Field::constant(0, vec![], vec![KForm::scalar(v)]).expect("shape is consistent")
    }

    /// Leaf defined by expressions, one list of form components per tensor
    /// component.
    pub fn from_exprs(degree: usize, slots: Vec<Slot>, exprs: Vec<Vec<Expr>>, strategy: Strategy) -> Result<Field> {
        let n = slot_len(slots.len());
        let k = component_count(degree);
        if exprs.len() != n || exprs.iter().any(|c| c.len() != k) {
            return Err(Error::Shape(format!(
                "expected {n} components of {k} expressions each"
            )));
        }
        let flat: Vec<Expr> = exprs.into_iter().flatten().collect();
        match strategy {
            Strategy::Symbolic | Strategy::ExactUserSupplied { .. } => {
                let flat = Arc::new(flat);
                Ok(Field::new(degree, slots, Strategy::Symbolic, MAX_ORDER, move |p, order| {
                    let jets = flat
                        .iter()
                        .map(|e| e.eval_jet(p, order))
                        .collect::<std::result::Result<Vec<_>, _>>()?;
                    Ok(pack(degree, n, jets))
                }))
            }
            Strategy::FiniteDifference { h } => {
                let time = flat.iter().any(|e| e.depends_on(Var::T));
                let f = move |p: &Point| -> Result<Vec<f64>> {
                    flat.iter().map(|e| e.eval(p).map_err(Error::from)).collect()
                };
                Ok(Field::from_values(degree, slots, h, time, f))
            }
        }
    }

    pub fn scalar_expr(e: Expr) -> Field {
        Field::from_exprs(0, vec![], vec![vec![e]], Strategy::Symbolic).expect("one expression")
    }

    /// Parses a scalar expression into a symbolic 0-form field.
    pub fn parse_scalar(text: &str) -> Result<Field> {
        Ok(Field::scalar_expr(Expr::parse(text)?))
    }

    /// Symbolic 1-form `Σ w_i dx^i`.
    pub fn one_form(components: [&str; 3]) -> Result<Field> {
        let exprs = components.iter().map(|s| Expr::parse(s)).collect::<std::result::Result<Vec<_>, _>>()?;
        Field::from_exprs(1, vec![], vec![exprs], Strategy::Symbolic)
    }

    /// Symbolic vector field (three 0-form components on an up slot).
    pub fn vector(components: [&str; 3]) -> Result<Field> {
        let exprs = components
            .iter()
            .map(|s| Expr::parse(s).map(|e| vec![e]))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Field::from_exprs(0, vec![Slot::Up], exprs, Strategy::Symbolic)
    }

    /// Leaf from point values, differentiated by central differences.
    /// `values` returns all scalar components, tensor-major.
    pub fn from_values(
        degree: usize,
        slots: Vec<Slot>,
        h: f64,
        time_dependent: bool,
        values: impl Fn(&Point) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Field {
        assert!(h > 0.0, "finite-difference step must be positive");
        let n = slot_len(slots.len());
        let values = Arc::new(values);
        Field::new(
            degree,
            slots,
            Strategy::FiniteDifference { h },
            FD_MAX_ORDER,
            move |p, order| {
                let jets = fd_jets(values.as_ref(), p, order, h, time_dependent)?;
                Ok(pack(degree, n, jets))
            },
        )
    }

    /// Scalar leaf with caller-supplied value and first partials
    /// `(∂x, ∂y, ∂z, ∂t)`. Higher orders difference the partials.
    pub fn exact_scalar(
        value: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        partials: impl Fn(&Point) -> [f64; 4] + Send + Sync + 'static,
        h: f64,
    ) -> Field {
        assert!(h > 0.0, "finite-difference step must be positive");
        let grad = move |p: &Point| -> Result<Vec<f64>> { Ok(partials(p).to_vec()) };
        Field::new(
            0,
            vec![],
            Strategy::ExactUserSupplied { h },
            FD_MAX_ORDER,
            move |p, order| {
                let mut c = vec![0.0; coefficient_count(order)];
                c[0] = value(p);
                if order >= 1 {
                    let g = fd_jets(&grad, p, order - 1, h, true)?;
                    for (i, slot) in c.iter_mut().enumerate().skip(1) {
                        let m = monomial(i);
                        let v = m.iter().position(|&e| e > 0).expect("non-constant monomial");
                        let mut rest = m;
                        rest[v] -= 1;
                        *slot = g[v].derivative(rest) / factorial(m);
                    }
                }
                Ok(vec![KForm::scalar(Jet::from_coefficients(order, c))])
            },
        )
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        slot_len(self.slots.len())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Highest jet order this field can produce.
    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Jets of every component at `p`, truncated to `order`.
    pub fn eval(&self, p: &Point, order: usize) -> Result<Vec<KForm<Jet>>> {
        if order > self.max_order {
            return Err(Error::DerivativeDepthExceeded {
                requested: order,
                available: self.max_order,
            });
        }
        let out = (self.eval)(p, order)?;
        debug_assert_eq!(out.len(), self.len());
        Ok(out
            .into_iter()
            .map(|f| f.map(|j| j.truncate(order)))
            .collect())
    }

    /// Point values of every component.
    pub fn values(&self, p: &Point) -> Result<Vec<KForm<f64>>> {
        Ok(self.eval(p, 0)?.iter().map(|f| f.map(|j| j.value())).collect())
    }

    /// Point value of a single-component field.
    pub fn value(&self, p: &Point) -> Result<KForm<f64>> {
        Ok(self.values(p)?.swap_remove(0))
    }

    /// Builds a field from evaluated inputs. Input `i` is requested at order
    /// `k + extra_i` when the result is requested at order `k`.
    pub fn combine(
        inputs: &[(&Field, usize)],
        degree: usize,
        slots: Vec<Slot>,
        f: impl Fn(&Point, &[Vec<KForm<Jet>>]) -> Result<Vec<KForm<Jet>>> + Send + Sync + 'static,
    ) -> Result<Field> {
        let mut max_order = MAX_ORDER;
        let mut strategy = Strategy::Symbolic;
        for (field, extra) in inputs {
            if field.max_order < *extra {
                return Err(Error::DerivativeDepthExceeded {
                    requested: *extra,
                    available: field.max_order,
                });
            }
            max_order = max_order.min(field.max_order - extra);
            strategy = strategy.weakest(field.strategy);
        }
        let owned: Vec<(Field, usize)> = inputs.iter().map(|(f, e)| ((*f).clone(), *e)).collect();
        Ok(Field::new(degree, slots, strategy, max_order, move |p, order| {
            let vals = owned
                .iter()
                .map(|(field, extra)| field.eval(p, order + extra))
                .collect::<Result<Vec<_>>>()?;
            f(p, &vals)
        }))
    }

    /// Applies a component-wise map that needs no derivatives.
    pub fn map_components(
        &self,
        degree: usize,
        f: impl Fn(&KForm<Jet>) -> Result<KForm<Jet>> + Send + Sync + 'static,
    ) -> Field {
        Field::combine(&[(self, 0)], degree, self.slots.clone(), move |_, v| {
            v[0].iter().map(&f).collect()
        })
        .expect("no derivative consumed")
    }

    /// Exterior derivative. `d` of a 3-form is the zero 3-form field.
    pub fn d(&self) -> Result<Field> {
        if self.degree == 3 {
            return Ok(Field::zero(3, self.slots.clone()));
        }
        Field::combine(&[(self, 1)], self.degree + 1, self.slots.clone(), |_, v| {
            v[0].iter().map(exterior_derivative).collect()
        })
    }

    /// Partial derivative in `var` (0..4 for x, y, z, t), component-wise.
    pub fn partial(&self, var: usize) -> Result<Field> {
        Field::combine(&[(self, 1)], self.degree, self.slots.clone(), move |_, v| {
            Ok(v[0].iter().map(|f| f.map(|j| j.partial(var))).collect())
        })
    }

    fn zip_same(&self, other: &Field, f: fn(KForm<Jet>, KForm<Jet>) -> KForm<Jet>) -> Result<Field> {
        if self.degree != other.degree || self.slots != other.slots {
            return Err(Error::Shape(format!(
                "cannot combine {:?} and {:?}",
                (self.degree, &self.slots),
                (other.degree, &other.slots)
            )));
        }
        Field::combine(&[(self, 0), (other, 0)], self.degree, self.slots.clone(), move |_, v| {
            Ok(v[0].iter().zip(&v[1]).map(|(a, b)| f(a.clone(), b.clone())).collect())
        })
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_same(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_same(other, |a, b| a - b)
    }

    pub fn scale(&self, k: f64) -> Field {
        self.map_components(self.degree, move |f| Ok(f.scale(k)))
    }

    pub fn neg(&self) -> Field {
        self.scale(-1.0)
    }

    /// Wedge product; either factor may be a single-component field, which
    /// is broadcast over the other's components.
    pub fn wedge(&self, other: &Field) -> Result<Field> {
        let slots = if self.slots.is_empty() {
            other.slots.clone()
        } else if other.slots.is_empty() || other.slots == self.slots {
            self.slots.clone()
        } else {
            return Err(Error::Shape("wedge of fields with different slots".into()));
        };
        let degree = self.degree + other.degree;
        if degree > 3 {
            return Err(crate::FormError::DegreeOverflow(self.degree, other.degree).into());
        }
        let n = slot_len(slots.len());
        Field::combine(&[(self, 0), (other, 0)], degree, slots, move |_, v| {
            (0..n)
                .map(|i| {
                    let a = &v[0][if v[0].len() == 1 { 0 } else { i }];
                    let b = &v[1][if v[1].len() == 1 { 0 } else { i }];
                    Ok(a.wedge(b)?)
                })
                .collect()
        })
    }

    /// Selects one component as a slot-free field.
    pub fn component(&self, i: usize) -> Field {
        assert!(i < self.len());
        Field::combine(&[(self, 0)], self.degree, vec![], move |_, v| Ok(vec![v[0][i].clone()]))
            .expect("no derivative consumed")
    }

    /// Stacks slot-free fields of equal degree into an indexed field.
    pub fn stack(parts: &[Field], slots: Vec<Slot>) -> Result<Field> {
        if parts.len() != slot_len(slots.len()) {
            return Err(Error::Shape("wrong number of parts to stack".into()));
        }
        let degree = parts[0].degree;
        if parts.iter().any(|p| p.degree != degree || !p.slots.is_empty()) {
            return Err(Error::Shape("stacked parts must be slot-free and of equal degree".into()));
        }
        let inputs: Vec<(&Field, usize)> = parts.iter().map(|p| (p, 0)).collect();
        Field::combine(&inputs, degree, slots, |_, v| Ok(v.iter().map(|c| c[0].clone()).collect()))
    }

    /// Euclidean Hodge dual in the coordinate basis (identity coframe).
    pub fn hodge(&self) -> Field {
        self.map_components(3 - self.degree, |f| Ok(f.hodge()))
    }

    /// Contraction `ι_V` with a vector field given by coordinate components.
    pub fn interior(&self, v: &Field) -> Result<Field> {
        check_vector(v)?;
        let degree = self.degree.saturating_sub(1);
        Field::combine(&[(self, 0), (v, 0)], degree, self.slots.clone(), |_, x| {
            let w = vector_jets(&x[1]);
            Ok(x[0].iter().map(|f| f.interior_vector(&w)).collect())
        })
    }

    /// Lie derivative `ℒ_V α = ι_V dα + d ι_V α`.
    pub fn lie_derivative(&self, v: &Field) -> Result<Field> {
        let a = self.d()?.interior(v)?;
        if self.degree == 0 {
            return Ok(a);
        }
        let b = self.interior(v)?.d()?;
        a.add(&b)
    }
}

/// `dα = Σ_i dx^i ∧ ∂_i α` on jets; the order drops by one.
pub fn exterior_derivative(f: &KForm<Jet>) -> Result<KForm<Jet>> {
    let mut out: Option<KForm<Jet>> = None;
    for i in FrameIndex::ALL {
        let di = f.map(|j| j.partial(i.index()));
        let term = KForm::<Jet>::e(i).wedge(&di)?;
        out = Some(match out {
            None => term,
            Some(acc) => acc + term,
        });
    }
    Ok(out.expect("three terms"))
}

fn check_vector(v: &Field) -> Result<()> {
    if v.degree != 0 || v.slots != [Slot::Up] {
        return Err(Error::Shape("expected a vector field (0-forms on one up slot)".into()));
    }
    Ok(())
}

/// The three component jets of an evaluated vector field.
pub fn vector_jets(v: &[KForm<Jet>]) -> [Jet; 3] {
    [
        v[0].components()[0].clone(),
        v[1].components()[0].clone(),
        v[2].components()[0].clone(),
    ]
}

fn pack(degree: usize, n: usize, jets: Vec<Jet>) -> Vec<KForm<Jet>> {
    let k = component_count(degree);
    let mut it = jets.into_iter();
    (0..n)
        .map(|_| KForm::new(degree, it.by_ref().take(k).collect()).expect("component count"))
        .collect()
}

fn factorial(m: [u8; NVARS]) -> f64 {
    m.iter().map(|&e| (1..=e as u32).product::<u32>() as f64).product()
}

fn binomial(n: u8, k: u8) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Taylor jets of a vector-valued function by tensor-product central
/// differences: `∂^m f ≈ Π_v δ_h^{m_v} f / h^{|m|}`, with `δ^n` the `n`-th
/// central difference on half steps. Time derivatives vanish unless
/// `time_dependent`.
pub fn fd_jets(
    f: &(dyn Fn(&Point) -> Result<Vec<f64>> + Send + Sync),
    p: &Point,
    order: usize,
    h: f64,
    time_dependent: bool,
) -> Result<Vec<Jet>> {
    if order > FD_MAX_ORDER {
        return Err(Error::DerivativeDepthExceeded {
            requested: order,
            available: FD_MAX_ORDER,
        });
    }
    let mut cache: HashMap<[i32; NVARS], Vec<f64>> = HashMap::new();
    let base = p.coords();
    let mut sample = |offset: [i32; NVARS]| -> Result<Vec<f64>> {
        if let Some(v) = cache.get(&offset) {
            return Ok(v.clone());
        }
        let mut c = base;
        for v in 0..NVARS {
            c[v] += offset[v] as f64 * h * 0.5;
        }
        let r = f(&Point::from_coords(c))?;
        cache.insert(offset, r.clone());
        Ok(r)
    };
    let centre = sample([0; NVARS])?;
    let nout = centre.len();
    let ncoef = coefficient_count(order);
    let mut coeffs = vec![vec![0.0; ncoef]; nout];
    for (o, c) in coeffs.iter_mut().enumerate() {
        c[0] = centre[o];
    }
    for i in 1..ncoef {
        let m = monomial(i);
        if m[3] > 0 && !time_dependent {
            continue;
        }
        // tensor product of one-dimensional stencils
        let mut terms: Vec<([i32; NVARS], f64)> = vec![([0; NVARS], 1.0)];
        for v in 0..NVARS {
            let n = m[v];
            if n == 0 {
                continue;
            }
            let mut next = Vec::with_capacity(terms.len() * (n as usize + 1));
            for (off, w) in &terms {
                for j in 0..=n {
                    let mut o = *off;
                    o[v] += n as i32 - 2 * j as i32;
                    let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                    next.push((o, w * s * binomial(n, j)));
                }
            }
            terms = next;
        }
        let total: u8 = m.iter().sum();
        let scale = 1.0 / (h.powi(total as i32) * factorial(m));
        let mut acc = vec![0.0; nout];
        for (off, w) in terms {
            let vals = sample(off)?;
            for (a, v) in acc.iter_mut().zip(vals) {
                *a += w * v;
            }
        }
        for (o, c) in coeffs.iter_mut().enumerate() {
            c[i] = acc[o] * scale;
        }
    }
    Ok(coeffs.into_iter().map(|c| Jet::from_coefficients(order, c)).collect())
}

/// 1-form `Σ v^a dx^a` with the components of a vector field.
pub fn vector_to_form(v: &Field) -> Result<Field> {
    check_vector(v)?;
    Field::combine(&[(v, 0)], 1, vec![], |_, x| Ok(vec![KForm::from_vector(vector_jets(&x[0]))]))
}

/// Vector field with the components of a slot-free 1-form.
pub fn form_to_vector(w: &Field) -> Result<Field> {
    if w.degree != 1 || !w.slots.is_empty() {
        return Err(Error::Shape("expected a slot-free 1-form".into()));
    }
    Field::combine(&[(w, 0)], 0, vec![Slot::Up], |_, x| {
        Ok(x[0][0].components().iter().map(|c| KForm::scalar(c.clone())).collect())
    })
}

/// `grad f ↔ df`.
pub fn grad(f: &Field) -> Result<Field> {
    form_to_vector(&f.d()?)
}

/// `curl w ↔ *(d w̃)`.
pub fn curl(w: &Field) -> Result<Field> {
    form_to_vector(&vector_to_form(w)?.d()?.hodge())
}

/// `div w ↔ *(d * w̃)`.
pub fn div(w: &Field) -> Result<Field> {
    Ok(vector_to_form(w)?.hodge().d()?.hodge())
}

/// Plain component values of a vector field at a point.
pub fn vector_value(v: &Field, p: &Point) -> Result<[f64; 3]> {
    let vals = v.values(p)?;
    Ok([vals[0].components()[0], vals[1].components()[0], vals[2].components()[0]])
}

/// Plain value of a scalar field at a point.
pub fn scalar_value(f: &Field, p: &Point) -> Result<f64> {
    Ok(f.value(p)?.components()[0])
}
