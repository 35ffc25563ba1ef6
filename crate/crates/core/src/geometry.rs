//! Metric-affine geometry on ℝ³: coframes, connections, torsion,
//! non-metricity, curvature and their identities.
//!
//! Index conventions: a connection is a field of 1-forms with slots
//! `[Up, Down]`, component `a*3 + b` holding `ω^a_b`. Frame indices are raised
//! and lowered with `δ`, so `ω_ab` is the same component. Torsion `T^a` has one
//! up slot, non-metricity `Q_ab` two down slots, curvature `R^a_b` is laid out
//! like the connection.
//!
//! All stored components are coordinate components (see [`crate::field`]).
//! Operations that need the orthonormal frame (`ι_a`, `*`) convert through
//! the triad `h` with `e^a = h^a_b dx^b`.

use crate::exterior::{FrameIndex, KForm, Real};
use crate::field::{exterior_derivative, Field, Point, Slot};
use crate::jet::{invert3, Jet};
use crate::{Error, Result};

/// Smallest admissible `|det|` of a triad or gauge matrix.
pub const MIN_DET: f64 = 1e-8;

type Mat<S> = [[S; 3]; 3];

fn mat_from<S: Clone>(v: &[S]) -> Mat<S> {
    std::array::from_fn(|a| std::array::from_fn(|b| v[a * 3 + b].clone()))
}

/// Scalar matrix from an evaluated 0-form field with two slots.
pub fn scalar_matrix(v: &[KForm<Jet>]) -> Mat<Jet> {
    std::array::from_fn(|a| std::array::from_fn(|b| v[a * 3 + b].components()[0].clone()))
}

fn flatten<S>(m: Mat<S>) -> Vec<S> {
    m.into_iter().flatten().collect()
}

fn sum<S: Real>(terms: impl IntoIterator<Item = KForm<S>>, degree: usize) -> KForm<S> {
    terms.into_iter().fold(KForm::zero(degree), |a, b| a + b)
}

fn wedge<S: Real>(a: &KForm<S>, b: &KForm<S>) -> KForm<S> {
    // every caller keeps the total degree within 3
    a.wedge(b).unwrap_or_else(|_| KForm::zero(3))
}

fn identity_matrix() -> Mat<Jet> {
    std::array::from_fn(|a| std::array::from_fn(|b| Jet::constant(if a == b { 1.0 } else { 0.0 })))
}

/// Orthonormal coframe `e^a = h^a_b dx^b`.
#[derive(Clone, Debug)]
pub struct CoFrame {
    triad: Field,
    identity: bool,
}

/// Triad and inverse triad jets at one point.
#[derive(Clone, Debug)]
pub struct FrameJets {
    pub h: Mat<Jet>,
    pub hinv: Mat<Jet>,
    pub det: Jet,
    identity: bool,
}

impl FrameJets {
    pub fn identity() -> Self {
        FrameJets {
            h: identity_matrix(),
            hinv: identity_matrix(),
            det: Jet::constant(1.0),
            identity: true,
        }
    }

    /// Coordinate components → orthonormal frame components.
    pub fn to_frame(&self, f: &KForm<Jet>) -> KForm<Jet> {
        if self.identity || f.degree() == 0 {
            f.clone()
        } else {
            f.rebase(&self.hinv)
        }
    }

    /// Orthonormal frame components → coordinate components.
    pub fn to_coord(&self, f: &KForm<Jet>) -> KForm<Jet> {
        if self.identity || f.degree() == 0 {
            f.clone()
        } else {
            f.rebase(&self.h)
        }
    }

    /// `e^a` in coordinate components.
    pub fn e(&self, a: usize) -> KForm<Jet> {
        KForm::from_vector(self.h[a].clone())
    }

    /// Hodge dual with respect to the coframe, coordinate in and out.
    pub fn hodge(&self, f: &KForm<Jet>) -> KForm<Jet> {
        self.to_coord(&self.to_frame(f).hodge())
    }

    /// `ι_a` with respect to the frame dual to the coframe.
    pub fn interior(&self, a: usize, f: &KForm<Jet>) -> KForm<Jet> {
        self.to_coord(&self.to_frame(f).interior(FrameIndex::from_zero_based(a)))
    }
}

impl CoFrame {
    pub fn identity() -> CoFrame {
        let vals = (0..9)
            .map(|i| KForm::scalar(if i % 4 == 0 { 1.0 } else { 0.0 }))
            .collect();
        CoFrame {
            triad: Field::constant(0, vec![Slot::Up, Slot::Down], vals).expect("identity triad"),
            identity: true,
        }
    }

    /// Coframe from a triad field (0-forms on `[Up, Down]`), row `a` holding
    /// the coordinate components of `e^a`.
    pub fn from_triad(triad: Field) -> Result<CoFrame> {
        if triad.degree() != 0 || triad.slots() != [Slot::Up, Slot::Down] {
            return Err(Error::Shape("triad must be 0-forms on [Up, Down]".into()));
        }
        Ok(CoFrame { triad, identity: false })
    }

    /// Coframe from symbolic triad rows.
    pub fn from_rows(rows: [[&str; 3]; 3]) -> Result<CoFrame> {
        let exprs = rows
            .iter()
            .flat_map(|r| r.iter())
            .map(|s| crate::expr::Expr::parse(s).map(|e| vec![e]))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        CoFrame::from_triad(Field::from_exprs(
            0,
            vec![Slot::Up, Slot::Down],
            exprs,
            crate::Strategy::Symbolic,
        )?)
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn triad(&self) -> &Field {
        &self.triad
    }

    /// Triad jets at `p`, failing with `SingularTriad` when `|det h| < 1e-8`.
    pub fn at(&self, p: &Point, order: usize) -> Result<FrameJets> {
        if self.identity {
            return Ok(FrameJets::identity());
        }
        frame_jets(&self.triad.eval(p, order)?, p)
    }

    /// The coframe 1-forms `e^a` as a field with one up slot.
    pub fn forms(&self) -> Field {
        Field::combine(&[(&self.triad, 0)], 1, vec![Slot::Up], |_, v| {
            let h = scalar_matrix(&v[0]);
            Ok(h.into_iter().map(KForm::from_vector).collect())
        })
        .expect("no derivative consumed")
    }

    /// Checks invertibility at every point.
    pub fn check(&self, points: &[Point]) -> Result<()> {
        for p in points {
            self.at(p, 0)?;
        }
        Ok(())
    }
}

fn frame_jets(v: &[KForm<Jet>], p: &Point) -> Result<FrameJets> {
    let h = scalar_matrix(v);
    let (det, hinv) = invert3(&h, |d: &Jet| d.value(), MIN_DET).ok_or_else(|| {
        let m = h.clone().map(|r| r.map(|j| j.value()));
        Error::SingularTriad(*p, det3(&m).abs())
    })?;
    Ok(FrameJets {
        h,
        hinv,
        det,
        identity: false,
    })
}

pub fn det3(m: &Mat<f64>) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn frame_from_eval(e: &CoFrame, v: &[KForm<Jet>], p: &Point) -> Result<FrameJets> {
    if e.identity {
        Ok(FrameJets::identity())
    } else {
        frame_jets(v, p)
    }
}

fn connection_slots() -> Vec<Slot> {
    vec![Slot::Up, Slot::Down]
}

fn check_connection(w: &Field) -> Result<()> {
    if w.degree() != 1 || w.slots() != [Slot::Up, Slot::Down] {
        return Err(Error::Shape("a connection is a 1-form field on [Up, Down]".into()));
    }
    Ok(())
}

/// Levi-Civita connection in frame components:
/// `γ_ab = ½[ι_b de_a − ι_a de_b + (ι_a ι_b de_c) e^c]`.
pub fn levi_civita_frame(de: &[KForm<Jet>; 3]) -> Mat<KForm<Jet>> {
    let fi = FrameIndex::from_zero_based;
    std::array::from_fn(|a| {
        std::array::from_fn(|b| {
            let mut g = de[a].interior(fi(b)) - de[b].interior(fi(a));
            for (c, dec) in de.iter().enumerate() {
                let coef = dec.interior(fi(b)).interior(fi(a));
                g = g + KForm::<Jet>::e(fi(c)).mul_scalar(&coef.components()[0]);
            }
            g.scale(0.5)
        })
    })
}

/// The unique antisymmetric connection with `γ^a_b ∧ e^b = −de^a`.
pub fn levi_civita(e: &CoFrame) -> Result<Field> {
    let e2 = e.clone();
    Field::combine(&[(e.triad(), 1)], 1, connection_slots(), move |p, v| {
        let fj = frame_from_eval(&e2, &v[0], p)?;
        let de: [KForm<Jet>; 3] = std::array::from_fn(|a| {
            let d = exterior_derivative(&fj.e(a)).expect("d of a 1-form");
            fj.to_frame(&d)
        });
        let g = levi_civita_frame(&de);
        Ok(flatten(g).iter().map(|f| fj.to_coord(f)).collect())
    })
}

/// `T^a = de^a + ω^a_b ∧ e^b`.
pub fn torsion(e: &CoFrame, omega: &Field) -> Result<Field> {
    check_connection(omega)?;
    let e2 = e.clone();
    Field::combine(&[(e.triad(), 1), (omega, 0)], 2, vec![Slot::Up], move |p, v| {
        let fj = frame_from_eval(&e2, &v[0], p)?;
        let w = mat_from(&v[1]);
        (0..3)
            .map(|a| {
                let mut t = exterior_derivative(&fj.e(a))?;
                for (b, wab) in w[a].iter().enumerate() {
                    t = t + wedge(wab, &fj.e(b));
                }
                Ok(t)
            })
            .collect()
    })
}

/// `Q_ab = ω_(ab)`, all nine components stored.
pub fn nonmetricity(omega: &Field) -> Result<Field> {
    check_connection(omega)?;
    Field::combine(&[(omega, 0)], 1, vec![Slot::Down, Slot::Down], |_, v| {
        let w = mat_from(&v[0]);
        Ok((0..9)
            .map(|i| {
                let (a, b) = (i / 3, i % 3);
                (w[a][b].clone() + w[b][a].clone()).scale(0.5)
            })
            .collect())
    })
}

/// `R^a_b = dω^a_b + ω^a_c ∧ ω^c_b`.
pub fn curvature(omega: &Field) -> Result<Field> {
    check_connection(omega)?;
    Field::combine(&[(omega, 1)], 2, connection_slots(), |_, v| {
        let w = mat_from(&v[0]);
        (0..9)
            .map(|i| {
                let (a, b) = (i / 3, i % 3);
                let mut r = exterior_derivative(&w[a][b])?;
                for c in 0..3 {
                    r = r + wedge(&w[a][c], &w[c][b]);
                }
                Ok(r)
            })
            .collect()
    })
}

/// Flat connection `ω = Λ⁻¹ dΛ` generated by an invertible matrix field.
pub fn pure_gauge(lambda: &Field) -> Result<Field> {
    check_gauge(lambda)?;
    Field::combine(&[(lambda, 1)], 1, connection_slots(), |p, v| {
        let m = scalar_matrix(&v[0]);
        let inv = invert_gauge(&m, p)?;
        let dm: Mat<KForm<Jet>> =
            std::array::from_fn(|a| std::array::from_fn(|b| exterior_derivative(&KForm::scalar(m[a][b].clone())).expect("d")));
        Ok((0..9)
            .map(|i| {
                let (a, b) = (i / 3, i % 3);
                sum((0..3).map(|c| dm[c][b].mul_scalar(&inv[a][c])), 1)
            })
            .collect())
    })
}

fn check_gauge(lambda: &Field) -> Result<()> {
    if lambda.degree() != 0 || lambda.slots() != [Slot::Up, Slot::Down] {
        return Err(Error::Shape("a gauge field is 0-forms on [Up, Down]".into()));
    }
    Ok(())
}

fn invert_gauge(m: &Mat<Jet>, p: &Point) -> Result<Mat<Jet>> {
    let (_, inv) = invert3(m, |d: &Jet| d.value(), MIN_DET).ok_or_else(|| {
        let v = m.clone().map(|r| r.map(|j| j.value()));
        Error::SingularGauge(*p, det3(&v).abs())
    })?;
    Ok(inv)
}

/// Checks a gauge matrix for invertibility at every point.
pub fn check_gauge_points(lambda: &Field, points: &[Point]) -> Result<()> {
    check_gauge(lambda)?;
    for p in points {
        invert_gauge(&scalar_matrix(&lambda.eval(p, 0)?), p)?;
    }
    Ok(())
}

/// Multi-index of component `i` of a field with `n` slots.
fn multi(i: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    let mut r = i;
    for s in (0..n).rev() {
        out[s] = r % 3;
        r /= 3;
    }
    out
}

fn flat(idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| acc * 3 + i)
}

/// `DX = dX + Σ_up ω^a_c ∧ X^{..c..} − Σ_down ω^c_b ∧ X_{..c..}` on jets.
pub fn covariant_d_jets(x: &[KForm<Jet>], dx: &[KForm<Jet>], w: &Mat<KForm<Jet>>, slots: &[Slot]) -> Vec<KForm<Jet>> {
    let n = slots.len();
    (0..x.len())
        .map(|i| {
            let idx = multi(i, n);
            let mut out = dx[i].clone();
            for (s, slot) in slots.iter().enumerate() {
                for c in 0..3 {
                    let mut j = idx.clone();
                    j[s] = c;
                    let xc = &x[flat(&j)];
                    out = match slot {
                        Slot::Up => out + wedge(&w[idx[s]][c], xc),
                        Slot::Down => out - wedge(&w[c][idx[s]], xc),
                    };
                }
            }
            out
        })
        .collect()
}

/// Covariant exterior derivative of an indexed form field.
pub fn covariant_exterior_derivative(x: &Field, omega: &Field) -> Result<Field> {
    check_connection(omega)?;
    let slots = x.slots().to_vec();
    if x.degree() == 3 {
        return Ok(Field::zero(3, slots));
    }
    let s2 = slots.clone();
    Field::combine(&[(x, 1), (omega, 0)], x.degree() + 1, slots, move |_, v| {
        let dx = v[0].iter().map(exterior_derivative).collect::<Result<Vec<_>>>()?;
        let w = mat_from(&v[1]);
        Ok(covariant_d_jets(&v[0], &dx, &w, &s2))
    })
}

/// Constant `δ` on the given two slots.
pub fn delta_field(slots: [Slot; 2]) -> Field {
    let vals = (0..9)
        .map(|i| KForm::scalar(if i % 4 == 0 { 1.0 } else { 0.0 }))
        .collect();
    Field::constant(0, slots.to_vec(), vals).expect("delta")
}

/// Defect 1-form in frame components:
/// `L_ab = ½[ι_aT_b − ι_bT_a − (ι_aι_bT_c)e^c] + (ι_bQ_ac − ι_aQ_bc)e^c + Q_ab`.
pub fn defect_one_form_frame(t: &[KForm<Jet>], q: &Mat<KForm<Jet>>) -> Mat<KForm<Jet>> {
    let fi = FrameIndex::from_zero_based;
    let e = |c: usize| KForm::<Jet>::e(fi(c));
    std::array::from_fn(|a| {
        std::array::from_fn(|b| {
            let mut k = t[b].interior(fi(a)) - t[a].interior(fi(b));
            for (c, tc) in t.iter().enumerate() {
                let coef = tc.interior(fi(b)).interior(fi(a));
                k = k - e(c).mul_scalar(&coef.components()[0]);
            }
            let mut l = k.scale(0.5) + q[a][b].clone();
            for c in 0..3 {
                let coef = q[a][c].interior(fi(b)) - q[b][c].interior(fi(a));
                l = l + e(c).mul_scalar(&coef.components()[0]);
            }
            l
        })
    })
}

/// Defect 1-form `L^a_b` from torsion `T^a` and non-metricity `Q_ab`.
pub fn defect_one_form(t: &Field, q: &Field, e: &CoFrame) -> Result<Field> {
    if t.degree() != 2 || t.slots() != [Slot::Up] {
        return Err(Error::Shape("torsion must be 2-forms on one up slot".into()));
    }
    if q.degree() != 1 || q.slots() != [Slot::Down, Slot::Down] {
        return Err(Error::Shape("non-metricity must be 1-forms on two down slots".into()));
    }
    let e2 = e.clone();
    Field::combine(&[(e.triad(), 0), (t, 0), (q, 0)], 1, connection_slots(), move |p, v| {
        let fj = frame_from_eval(&e2, &v[0], p)?;
        let tf: Vec<KForm<Jet>> = v[1].iter().map(|f| fj.to_frame(f)).collect();
        let qf: Vec<KForm<Jet>> = v[2].iter().map(|f| fj.to_frame(f)).collect();
        let l = defect_one_form_frame(&tf, &mat_from(&qf));
        Ok(flatten(l).iter().map(|f| fj.to_coord(f)).collect())
    })
}

/// Builds a field from a pointwise rule written in orthonormal frame
/// components: inputs are converted to the frame, the output back to
/// coordinate components.
pub fn in_frame(
    e: &CoFrame,
    inputs: &[&Field],
    degree: usize,
    slots: Vec<Slot>,
    f: impl Fn(&[Vec<KForm<Jet>>]) -> Vec<KForm<Jet>> + Send + Sync + 'static,
) -> Result<Field> {
    let mut all: Vec<(&Field, usize)> = vec![(e.triad(), 0)];
    all.extend(inputs.iter().map(|x| (*x, 0)));
    let e2 = e.clone();
    Field::combine(&all, degree, slots, move |p, v| {
        let fj = frame_from_eval(&e2, &v[0], p)?;
        let framed: Vec<Vec<KForm<Jet>>> = v[1..]
            .iter()
            .map(|c| c.iter().map(|x| fj.to_frame(x)).collect())
            .collect();
        Ok(f(&framed).iter().map(|x| fj.to_coord(x)).collect())
    })
}

/// Result of a change of frame.
#[derive(Clone, Debug)]
pub struct Transformed {
    pub coframe: CoFrame,
    pub connection: Field,
    pub tensors: Vec<Field>,
}

/// Applies `e' = h e`, `ω' = h ω h⁻¹ + h d(h⁻¹)` and the homogeneous law
/// (`h` on up slots, `h⁻¹` on down slots) to each tensor.
pub fn frame_transform(h: &Field, e: &CoFrame, omega: &Field, tensors: &[Field]) -> Result<Transformed> {
    check_gauge(h)?;
    check_connection(omega)?;
    let triad = Field::combine(&[(h, 0), (e.triad(), 0)], 0, connection_slots(), |p, v| {
        let hm = scalar_matrix(&v[0]);
        invert_gauge(&hm, p)?;
        let tm = scalar_matrix(&v[1]);
        Ok((0..9)
            .map(|i| {
                let (a, b) = (i / 3, i % 3);
                let s = (0..3).fold(Jet::constant(0.0), |acc, c| acc + &hm[a][c] * &tm[c][b]);
                KForm::scalar(s)
            })
            .collect())
    })?;
    let connection = Field::combine(&[(h, 1), (omega, 0)], 1, connection_slots(), |p, v| {
        let hm = scalar_matrix(&v[0]);
        let inv = invert_gauge(&hm, p)?;
        let dinv: Mat<KForm<Jet>> = std::array::from_fn(|a| {
            std::array::from_fn(|b| exterior_derivative(&KForm::scalar(inv[a][b].clone())).expect("d"))
        });
        let w = mat_from(&v[1]);
        Ok((0..9)
            .map(|i| {
                let (a, b) = (i / 3, i % 3);
                let mut out = KForm::zero(1);
                for c in 0..3 {
                    for d in 0..3 {
                        out = out + w[c][d].mul_scalar(&(&hm[a][c] * &inv[d][b]));
                    }
                    out = out + dinv[c][b].mul_scalar(&hm[a][c]);
                }
                out
            })
            .collect())
    })?;
    let tensors = tensors
        .iter()
        .map(|x| transform_tensor(h, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(Transformed {
        coframe: CoFrame::from_triad(triad)?,
        connection,
        tensors,
    })
}

/// Homogeneous transformation of an indexed form field.
pub fn transform_tensor(h: &Field, x: &Field) -> Result<Field> {
    check_gauge(h)?;
    let slots = x.slots().to_vec();
    let s2 = slots.clone();
    Field::combine(&[(h, 0), (x, 0)], x.degree(), slots, move |p, v| {
        let hm = scalar_matrix(&v[0]);
        let inv = invert_gauge(&hm, p)?;
        let mut cur: Vec<KForm<Jet>> = v[1].clone();
        let n = s2.len();
        for (s, slot) in s2.iter().enumerate() {
            cur = (0..cur.len())
                .map(|i| {
                    let idx = multi(i, n);
                    let terms = (0..3).map(|c| {
                        let mut j = idx.clone();
                        j[s] = c;
                        let coef = match slot {
                            Slot::Up => hm[idx[s]][c].clone(),
                            Slot::Down => inv[c][idx[s]].clone(),
                        };
                        cur[flat(&j)].mul_scalar(&coef)
                    });
                    sum(terms, x_degree(&cur))
                })
                .collect();
        }
        Ok(cur)
    })
}

fn x_degree(v: &[KForm<Jet>]) -> usize {
    v[0].degree()
}

/// The three Bianchi residual fields.
#[derive(Clone, Debug)]
pub struct BianchiResiduals {
    /// `DR^a_b`
    pub curvature: Field,
    /// `DT^a − R^a_b ∧ e^b`
    pub torsion: Field,
    /// `DQ_ab − R_(ab)`
    pub nonmetricity: Field,
}

impl BianchiResiduals {
    pub fn fields(&self) -> [(&'static str, &Field); 3] {
        [
            ("DR", &self.curvature),
            ("DT-R^e", &self.torsion),
            ("DQ-R(ab)", &self.nonmetricity),
        ]
    }
}

pub fn bianchi_residuals(e: &CoFrame, omega: &Field) -> Result<BianchiResiduals> {
    let r = curvature(omega)?;
    let dr = covariant_exterior_derivative(&r, omega)?;
    let t = torsion(e, omega)?;
    let dt = covariant_exterior_derivative(&t, omega)?;
    let e2 = e.clone();
    let torsion_res = Field::combine(&[(&dt, 0), (&r, 0), (e.triad(), 0)], 3, vec![Slot::Up], move |p, v| {
        let fj = frame_from_eval(&e2, &v[2], p)?;
        let rm = mat_from(&v[1]);
        Ok((0..3)
            .map(|a| {
                let re = sum((0..3).map(|b| wedge(&rm[a][b], &fj.e(b))), 3);
                v[0][a].clone() - re
            })
            .collect())
    })?;
    let q = nonmetricity(omega)?;
    let dq = covariant_exterior_derivative(&q, omega)?;
    let q_res = Field::combine(&[(&dq, 0), (&r, 0)], 2, vec![Slot::Down, Slot::Down], |_, v| {
        let rm = mat_from(&v[1]);
        Ok((0..9)
            .map(|i| {
                let (a, b) = (i / 3, i % 3);
                v[0][i].clone() - (rm[a][b].clone() + rm[b][a].clone()).scale(0.5)
            })
            .collect())
    })?;
    Ok(BianchiResiduals {
        curvature: dr,
        torsion: torsion_res,
        nonmetricity: q_res,
    })
}

/// `R(γ+L) − [R(γ) + D(γ)L + L∧L]`, which vanishes identically.
pub fn curvature_decomposition_residual(e: &CoFrame, t: &Field, q: &Field) -> Result<Field> {
    let gamma = levi_civita(e)?;
    let l = defect_one_form(t, q, e)?;
    let omega = gamma.add(&l)?;
    let full = curvature(&omega)?;
    let riem = curvature(&gamma)?;
    let dl = covariant_exterior_derivative(&l, &gamma)?;
    Field::combine(&[(&full, 0), (&riem, 0), (&dl, 0), (&l, 0)], 2, connection_slots(), |_, v| {
        let lm = mat_from(&v[3]);
        Ok((0..9)
            .map(|i| {
                let (a, b) = (i / 3, i % 3);
                let ll = sum((0..3).map(|c| wedge(&lm[a][c], &lm[c][b])), 2);
                v[0][i].clone() - v[1][i].clone() - v[2][i].clone() - ll
            })
            .collect())
    })
}

/// `γ^a_b ∧ e^b + de^a` and `γ_(ab)`, the two Levi-Civita contract residuals.
pub fn levi_civita_residuals(e: &CoFrame, gamma: &Field) -> Result<(Field, Field)> {
    let t = torsion(e, gamma)?;
    let sym = nonmetricity(gamma)?;
    Ok((t, sym))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::max_abs;

    fn pt() -> Point {
        Point::spatial(0.4, -0.3, 0.25)
    }

    fn e(i: usize) -> KForm<f64> {
        KForm::e(FrameIndex::from_zero_based(i))
    }

    fn connection(entries: &[(usize, usize, [&str; 3])]) -> Field {
        let mut parts: Vec<Field> = (0..9).map(|_| Field::zero(1, vec![])).collect();
        for (a, b, c) in entries {
            parts[a * 3 + b] = Field::one_form(*c).unwrap();
        }
        Field::stack(&parts, vec![Slot::Up, Slot::Down]).unwrap()
    }

    #[test]
    fn levi_civita_of_identity_vanishes() {
        let g = levi_civita(&CoFrame::identity()).unwrap();
        assert_eq!(max_abs(&g.values(&pt()).unwrap()), 0.0);
    }

    #[test]
    fn levi_civita_polar_like_frame() {
        let cf = CoFrame::from_rows([["1", "0", "0"], ["0", "x", "0"], ["0", "0", "1"]]).unwrap();
        let g = levi_civita(&cf).unwrap().values(&pt()).unwrap();
        // γ^2_1 = dy, γ^1_2 = −dy
        assert!((g[3].components()[1] - 1.0).abs() < 1e-14);
        assert!((g[1].components()[1] + 1.0).abs() < 1e-14);
        for (i, f) in g.iter().enumerate() {
            if i != 1 && i != 3 {
                assert!(f.max_abs() < 1e-14);
            }
        }
    }

    #[test]
    fn torsion_direct_substitution() {
        // ω^1_2 = e^3
        let w = connection(&[(0, 1, ["0", "0", "1"])]);
        let t = torsion(&CoFrame::identity(), &w).unwrap().values(&pt()).unwrap();
        assert_eq!(t[0], e(2).wedge(&e(1)).unwrap());
        assert_eq!(t[1].max_abs(), 0.0);
    }

    #[test]
    fn nonmetricity_examples() {
        let w = connection(&[(0, 0, ["0", "1", "0"]), (0, 1, ["x", "y", "z"]), (1, 0, ["-x", "-y", "-z"])]);
        let q = nonmetricity(&w).unwrap().values(&pt()).unwrap();
        assert_eq!(q[0], e(1));
        assert_eq!(q[1].max_abs(), 0.0);
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(q[a * 3 + b], q[b * 3 + a]);
            }
        }
    }

    #[test]
    fn curvature_of_constant_connection() {
        let w = connection(&[(0, 1, ["1", "0", "0"]), (1, 0, ["0", "1", "0"])]);
        let r = curvature(&w).unwrap().values(&pt()).unwrap();
        assert_eq!(r[0], e(0).wedge(&e(1)).unwrap());
    }

    #[test]
    fn pure_gauge_examples() {
        let rot = Field::from_exprs(
            0,
            vec![Slot::Up, Slot::Down],
            ["cos(x^2)", "-sin(x^2)", "0", "sin(x^2)", "cos(x^2)", "0", "0", "0", "1"]
                .iter()
                .map(|s| vec![crate::expr::Expr::parse(s).unwrap()])
                .collect(),
            crate::Strategy::Symbolic,
        )
        .unwrap();
        let w = pure_gauge(&rot).unwrap();
        let v = w.values(&pt()).unwrap();
        let theta_p = 2.0 * pt().x;
        assert!((v[1].components()[0] + theta_p).abs() < 1e-14);
        assert!((v[3].components()[0] - theta_p).abs() < 1e-14);
        let r = curvature(&w).unwrap().values(&pt()).unwrap();
        assert!(max_abs(&r) < 1e-13);

        let diag = Field::from_exprs(
            0,
            vec![Slot::Up, Slot::Down],
            ["1+x^2", "0", "0", "0", "1", "0", "0", "0", "1"]
                .iter()
                .map(|s| vec![crate::expr::Expr::parse(s).unwrap()])
                .collect(),
            crate::Strategy::Symbolic,
        )
        .unwrap();
        let v = pure_gauge(&diag).unwrap().values(&pt()).unwrap();
        let x = pt().x;
        assert!((v[0].components()[0] - 2.0 * x / (1.0 + x * x)).abs() < 1e-15);
    }

    #[test]
    fn delta_identities() {
        let w = connection(&[(0, 1, ["x*y", "z", "1"]), (2, 2, ["y", "x^2", "0"]), (1, 0, ["0", "z", "x"])]);
        let q = nonmetricity(&w).unwrap().values(&pt()).unwrap();
        let dd = covariant_exterior_derivative(&delta_field([Slot::Down, Slot::Down]), &w).unwrap();
        let du = covariant_exterior_derivative(&delta_field([Slot::Up, Slot::Up]), &w).unwrap();
        let dm = covariant_exterior_derivative(&delta_field([Slot::Up, Slot::Down]), &w).unwrap();
        let (dd, du, dm) = (dd.values(&pt()).unwrap(), du.values(&pt()).unwrap(), dm.values(&pt()).unwrap());
        for i in 0..9 {
            assert!((dd[i].clone() + q[i].scale(2.0)).max_abs() < 1e-14);
            assert!((du[i].clone() - q[i].scale(2.0)).max_abs() < 1e-14);
            assert!(dm[i].max_abs() < 1e-14);
        }
    }

    #[test]
    fn singular_triad_is_reported() {
        let cf = CoFrame::from_rows([["1", "0", "0"], ["0", "x", "0"], ["0", "0", "1"]]).unwrap();
        let err = cf.check(&[Point::spatial(0.0, 0.2, 0.1)]).unwrap_err();
        assert!(matches!(err, Error::SingularTriad(..)));
    }
}
