//! Irreducible pieces of torsion and non-metricity and the defect densities
//! built from them.
//!
//! Identifications: Burgers covector `b̃ = T` (torsion trace), Frank covector
//! `Ω̃ = P / FRANK_SCALE`, point-defect covector `m̃ = Q` (non-metricity
//! trace), scalar `ρ = *S`, generalized Burgers `B̃ = b̃ + c₁Ω̃ + c₂m̃`.
//!
//! Applying the `P` extraction to the restricted non-metricity
//! `Q_ab = (9/10)(Ω_a e_b + Ω_b e_a − ⅔δ_ab Ω̃) + ⅓δ_ab m̃` returns `3Ω̃`, not
//! `Ω̃`. [`FrankMode::Calibrated`] divides by that factor so extraction
//! inverts reconstruction; [`FrankMode::Raw`] reports `P` itself.
//!
//! The kernels in this module work on orthonormal frame components and are
//! generic over the coefficient ring.

use crate::exterior::{FrameIndex, KForm, Real};
use crate::field::{Field, Slot};
use crate::geometry::{in_frame, nonmetricity, torsion, CoFrame};
use crate::jet::Jet;
use crate::{Error, Result};

/// Ratio `P / Ω̃` on the restricted non-metricity.
pub const FRANK_SCALE: f64 = 3.0;
/// Default `c₁` in `B̃ = b̃ + c₁Ω̃ + c₂m̃`.
pub const C1: f64 = -3.0;
/// Default `c₂` in `B̃ = b̃ + c₁Ω̃ + c₂m̃`.
pub const C2: f64 = 2.0 / 3.0;

fn fi(a: usize) -> FrameIndex {
    FrameIndex::from_zero_based(a)
}

fn e<S: Real>(a: usize) -> KForm<S> {
    KForm::e(fi(a))
}

fn w<S: Real>(a: &KForm<S>, b: &KForm<S>) -> KForm<S> {
    a.wedge(b).expect("degree within 3")
}

fn scalar_of<S: Real>(f: &KForm<S>) -> S {
    f.components()[0].clone()
}

/// `(T, S) = (ι_a T^a, e_a ∧ T^a)`.
pub fn torsion_traces_frame<S: Real>(t: &[KForm<S>]) -> (KForm<S>, KForm<S>) {
    let mut trace = KForm::zero(1);
    let mut s = KForm::zero(3);
    for a in 0..3 {
        trace = trace + t[a].interior(fi(a));
        s = s + w(&e(a), &t[a]);
    }
    (trace, s)
}

/// `[piece1, piece2, piece3]`, each three 2-forms.
pub fn torsion_pieces_frame<S: Real>(t: &[KForm<S>]) -> [Vec<KForm<S>>; 3] {
    let (trace, s) = torsion_traces_frame(t);
    let p2: Vec<KForm<S>> = (0..3).map(|a| w(&e(a), &trace).scale(0.5)).collect();
    let p3: Vec<KForm<S>> = (0..3).map(|a| s.interior(fi(a)).scale(1.0 / 3.0)).collect();
    let p1 = (0..3).map(|a| t[a].clone() - p2[a].clone() - p3[a].clone()).collect();
    [p1, p2, p3]
}

/// Non-metricity traces in frame components.
#[derive(Clone, Debug)]
pub struct NonmetricityTraces<S> {
    /// `Q = δ^{ab} Q_ab`
    pub q: KForm<S>,
    /// `Q̄_ab = Q_ab − ⅓δ_ab Q`
    pub qbar: Vec<KForm<S>>,
    /// `N_a = Q̄_ab ∧ e^b`
    pub n: Vec<KForm<S>>,
    /// `P = (ι^a Q̄_ab) e^b`
    pub p: KForm<S>,
}

pub fn nonmetricity_traces_frame<S: Real>(q: &[KForm<S>]) -> NonmetricityTraces<S> {
    let tr = (0..3).fold(KForm::zero(1), |acc, a| acc + q[a * 4].clone());
    let qbar: Vec<KForm<S>> = (0..9)
        .map(|i| {
            if i % 4 == 0 {
                q[i].clone() - tr.scale(1.0 / 3.0)
            } else {
                q[i].clone()
            }
        })
        .collect();
    let n = (0..3)
        .map(|a| (0..3).fold(KForm::zero(2), |acc, b| acc + w(&qbar[a * 3 + b], &e(b))))
        .collect();
    let mut p = KForm::zero(1);
    for a in 0..3 {
        for b in 0..3 {
            p = p + e::<S>(b).mul_scalar(&scalar_of(&qbar[a * 3 + b].interior(fi(a))));
        }
    }
    NonmetricityTraces { q: tr, qbar, n, p }
}

/// `[piece1, piece2, piece3, piece4]`, each nine 1-forms.
pub fn nonmetricity_pieces_frame<S: Real>(q: &[KForm<S>]) -> [Vec<KForm<S>>; 4] {
    let tr = nonmetricity_traces_frame(q);
    let delta = |a: usize, b: usize, f: &KForm<S>| if a == b { f.clone() } else { KForm::zero(1) };
    let p2: Vec<KForm<S>> = (0..9)
        .map(|i| {
            let (a, b) = (i / 3, i % 3);
            (tr.n[b].interior(fi(a)) + tr.n[a].interior(fi(b)) - delta(a, b, &tr.p).scale(2.0 / 3.0))
                .scale(-1.0 / 3.0)
        })
        .collect();
    let p3: Vec<KForm<S>> = (0..9)
        .map(|i| {
            let (a, b) = (i / 3, i % 3);
            let pa = scalar_of(&tr.p.interior(fi(a)));
            let pb = scalar_of(&tr.p.interior(fi(b)));
            (e::<S>(b).mul_scalar(&pa) + e::<S>(a).mul_scalar(&pb) - delta(a, b, &tr.p).scale(2.0 / 3.0))
                .scale(2.0 / 15.0)
        })
        .collect();
    let p4: Vec<KForm<S>> = (0..9).map(|i| delta(i / 3, i % 3, &tr.q).scale(1.0 / 3.0)).collect();
    let p1 = (0..9)
        .map(|i| q[i].clone() - p2[i].clone() - p3[i].clone() - p4[i].clone())
        .collect();
    [p1, p2, p3, p4]
}

/// `T^a = ½ e^a ∧ b̃ + (ρ/3) *e^a`.
pub fn reconstruct_torsion_frame<S: Real>(b: &KForm<S>, rho: &S) -> Vec<KForm<S>> {
    (0..3)
        .map(|a| w(&e(a), b).scale(0.5) + e::<S>(a).hodge().mul_scalar(rho).scale(1.0 / 3.0))
        .collect()
}

/// `Q_ab = (9/10)(Ω_a e_b + Ω_b e_a − ⅔δ_ab Ω̃) + ⅓δ_ab m̃`.
pub fn reconstruct_nonmetricity_frame<S: Real>(omega: &KForm<S>, m: &KForm<S>) -> Vec<KForm<S>> {
    (0..9)
        .map(|i| {
            let (a, b) = (i / 3, i % 3);
            let oa = scalar_of(&omega.interior(fi(a)));
            let ob = scalar_of(&omega.interior(fi(b)));
            let mut q = e::<S>(b).mul_scalar(&oa) + e::<S>(a).mul_scalar(&ob);
            if a == b {
                q = q - omega.scale(2.0 / 3.0);
            }
            q = q.scale(0.9);
            if a == b {
                q = q + m.scale(1.0 / 3.0);
            }
            q
        })
        .collect()
}

fn check(f: &Field, degree: usize, slots: &[Slot], what: &str) -> Result<()> {
    if f.degree() != degree || f.slots() != slots {
        return Err(Error::Shape(format!("{what} has degree {} and slots {:?}", f.degree(), f.slots())));
    }
    Ok(())
}

/// Torsion trace 1-form and scalar 3-form.
pub fn torsion_traces(t: &Field, e: &CoFrame) -> Result<(Field, Field)> {
    check(t, 2, &[Slot::Up], "torsion")?;
    let trace = in_frame(e, &[t], 1, vec![], |v| vec![torsion_traces_frame(&v[0]).0])?;
    let s = in_frame(e, &[t], 3, vec![], |v| vec![torsion_traces_frame(&v[0]).1])?;
    Ok((trace, s))
}

#[derive(Clone, Debug)]
pub struct TorsionPieces {
    pub piece1: Field,
    pub piece2: Field,
    pub piece3: Field,
    pub trace: Field,
    pub scalar: Field,
}

pub fn torsion_pieces(t: &Field, e: &CoFrame) -> Result<TorsionPieces> {
    check(t, 2, &[Slot::Up], "torsion")?;
    let piece = |k: usize| {
        in_frame(e, &[t], 2, vec![Slot::Up], move |v| {
            let [p1, p2, p3] = torsion_pieces_frame(&v[0]);
            [p1, p2, p3][k].clone()
        })
    };
    let (trace, scalar) = torsion_traces(t, e)?;
    Ok(TorsionPieces {
        piece1: piece(0)?,
        piece2: piece(1)?,
        piece3: piece(2)?,
        trace,
        scalar,
    })
}

#[derive(Clone, Debug)]
pub struct NonmetricityPieces {
    pub piece1: Field,
    pub piece2: Field,
    pub piece3: Field,
    pub piece4: Field,
    /// `Q = δ^{ab} Q_ab`
    pub trace: Field,
    /// `N_a`, 2-forms on one down slot
    pub n: Field,
    /// `P`
    pub p: Field,
}

pub fn nonmetricity_pieces(q: &Field, e: &CoFrame) -> Result<NonmetricityPieces> {
    check(q, 1, &[Slot::Down, Slot::Down], "non-metricity")?;
    let dd = vec![Slot::Down, Slot::Down];
    let piece = |k: usize| {
        in_frame(e, &[q], 1, dd.clone(), move |v| nonmetricity_pieces_frame(&v[0])[k].clone())
    };
    Ok(NonmetricityPieces {
        piece1: piece(0)?,
        piece2: piece(1)?,
        piece3: piece(2)?,
        piece4: piece(3)?,
        trace: in_frame(e, &[q], 1, vec![], |v| vec![nonmetricity_traces_frame(&v[0]).q])?,
        n: in_frame(e, &[q], 2, vec![Slot::Down], |v| nonmetricity_traces_frame(&v[0]).n)?,
        p: in_frame(e, &[q], 1, vec![], |v| vec![nonmetricity_traces_frame(&v[0]).p])?,
    })
}

pub fn reconstruct_torsion(b: &Field, rho: &Field, e: &CoFrame) -> Result<Field> {
    check(b, 1, &[], "Burgers covector")?;
    check(rho, 0, &[], "scalar defect")?;
    in_frame(e, &[b, rho], 2, vec![Slot::Up], |v| {
        reconstruct_torsion_frame(&v[0][0], &scalar_of(&v[1][0]))
    })
}

pub fn reconstruct_nonmetricity(omega: &Field, m: &Field, e: &CoFrame) -> Result<Field> {
    check(omega, 1, &[], "Frank covector")?;
    check(m, 1, &[], "point-defect covector")?;
    in_frame(e, &[omega, m], 1, vec![Slot::Down, Slot::Down], |v| {
        reconstruct_nonmetricity_frame(&v[0][0], &v[1][0])
    })
}

/// How the Frank covector is read off `P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrankMode {
    /// `Ω̃ = P / FRANK_SCALE`, so extraction inverts reconstruction.
    #[default]
    Calibrated,
    /// `Ω̃ = P`.
    Raw,
}

/// Defect densities as coordinate-component form fields.
#[derive(Clone, Debug)]
pub struct DefectFields {
    pub burgers: Field,
    pub frank: Field,
    pub point: Field,
    pub scalar: Field,
    pub c1: f64,
    pub c2: f64,
}

impl DefectFields {
    pub fn new(burgers: Field, frank: Field, point: Field, scalar: Field) -> Result<DefectFields> {
        check(&burgers, 1, &[], "Burgers covector")?;
        check(&frank, 1, &[], "Frank covector")?;
        check(&point, 1, &[], "point-defect covector")?;
        check(&scalar, 0, &[], "scalar defect")?;
        Ok(DefectFields {
            burgers,
            frank,
            point,
            scalar,
            c1: C1,
            c2: C2,
        })
    }

    pub fn zero() -> DefectFields {
        DefectFields::new(
            Field::zero(1, vec![]),
            Field::zero(1, vec![]),
            Field::zero(1, vec![]),
            Field::zero(0, vec![]),
        )
        .expect("shapes")
    }

    /// Symbolic defect fields from component expressions.
    pub fn from_strs(b: [&str; 3], omega: [&str; 3], m: [&str; 3], rho: &str) -> Result<DefectFields> {
        DefectFields::new(
            Field::one_form(b)?,
            Field::one_form(omega)?,
            Field::one_form(m)?,
            Field::parse_scalar(rho)?,
        )
    }

    /// `B̃ = b̃ + c₁Ω̃ + c₂m̃`.
    pub fn generalized_burgers(&self) -> Field {
        let (c1, c2) = (self.c1, self.c2);
        Field::combine(
            &[(&self.burgers, 0), (&self.frank, 0), (&self.point, 0)],
            1,
            vec![],
            move |_, v| Ok(vec![v[0][0].clone() + v[1][0].scale(c1) + v[2][0].scale(c2)]),
        )
        .expect("no derivative consumed")
    }

    /// Reconstructed torsion and non-metricity.
    pub fn torsion_nonmetricity(&self, e: &CoFrame) -> Result<(Field, Field)> {
        Ok((
            reconstruct_torsion(&self.burgers, &self.scalar, e)?,
            reconstruct_nonmetricity(&self.frank, &self.point, e)?,
        ))
    }

    /// Component fields in the order used by reports.
    pub fn named(&self) -> [(&'static str, Field); 5] {
        [
            ("b", self.burgers.clone()),
            ("Omega", self.frank.clone()),
            ("m", self.point.clone()),
            ("rho", self.scalar.clone()),
            ("B", self.generalized_burgers()),
        ]
    }
}

/// Defect densities of the geometry `(e, ω)`.
pub fn extract_defects(e: &CoFrame, omega: &Field, mode: FrankMode) -> Result<DefectFields> {
    let t = torsion(e, omega)?;
    let q = nonmetricity(omega)?;
    extract_from(&t, &q, e, mode)
}

/// Defect densities of given torsion and non-metricity fields.
pub fn extract_from(t: &Field, q: &Field, e: &CoFrame, mode: FrankMode) -> Result<DefectFields> {
    let (b, s) = torsion_traces(t, e)?;
    let rho = in_frame(e, &[&s], 0, vec![], |v| vec![v[0][0].hodge()])?;
    let pieces = nonmetricity_pieces(q, e)?;
    let scale = match mode {
        FrankMode::Calibrated => 1.0 / FRANK_SCALE,
        FrankMode::Raw => 1.0,
    };
    DefectFields::new(b, pieces.p.scale(scale), pieces.trace, rho)
}

/// Hodge dual of a field with respect to the coframe.
pub fn hodge(f: &Field, e: &CoFrame) -> Result<Field> {
    in_frame(e, &[f], 3 - f.degree(), f.slots().to_vec(), |v| v[0].iter().map(|x| x.hodge()).collect())
}

/// Frame components of a 1-form at jet level, as a vector.
pub fn jet_vector(f: &KForm<Jet>) -> [Jet; 3] {
    std::array::from_fn(|i| f.components()[i].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Point;
    use crate::geometry::{defect_one_form, levi_civita};
    use crate::sampling::max_abs;

    fn pt() -> Point {
        Point::spatial(0.2, -0.5, 0.35)
    }

    fn ef(i: usize) -> KForm<f64> {
        e(i)
    }

    #[test]
    fn torsion_trace_examples() {
        // T^a = ½ e^a ∧ β
        let beta = KForm::from_vector([0.3, -1.2, 0.7]);
        let t: Vec<KForm<f64>> = (0..3).map(|a| w(&ef(a), &beta).scale(0.5)).collect();
        let (tr, s) = torsion_traces_frame(&t);
        assert!((tr - beta).max_abs() < 1e-15);
        assert!(s.max_abs() < 1e-15);
        // T^a = σ *e^a
        let t: Vec<KForm<f64>> = (0..3).map(|a| ef(a).hodge().scale(1.7)).collect();
        let (tr, s) = torsion_traces_frame(&t);
        assert!(tr.max_abs() < 1e-15);
        assert!((s.components()[0] - 3.0 * 1.7).abs() < 1e-15);
    }

    #[test]
    fn reconstruction_examples() {
        let t = reconstruct_torsion_frame(&ef(0), &0.0);
        assert_eq!(t[0].max_abs(), 0.0);
        assert_eq!(t[1], w(&ef(0), &ef(1)).scale(-0.5));
        assert_eq!(t[2], w(&ef(0), &ef(2)).scale(-0.5));
        let t = reconstruct_torsion_frame(&KForm::zero(1), &3.0);
        for a in 0..3 {
            assert!((t[a].clone() - ef(a).hodge()).max_abs() < 1e-15);
        }
        let q = reconstruct_nonmetricity_frame(&KForm::zero(1), &ef(2));
        for i in 0..9 {
            let expect = if i % 4 == 0 { ef(2).scale(1.0 / 3.0) } else { KForm::zero(1) };
            assert!((q[i].clone() - expect).max_abs() < 1e-15);
        }
        let q = reconstruct_nonmetricity_frame(&ef(0), &KForm::zero(1));
        assert!((q[0].components()[0] - 1.2).abs() < 1e-15);
    }

    #[test]
    fn frank_scale_on_ansatz() {
        let omega = KForm::from_vector([0.4, -0.9, 1.3]);
        let q = reconstruct_nonmetricity_frame(&omega, &KForm::zero(1));
        let tr = nonmetricity_traces_frame(&q);
        assert!((tr.p - omega.scale(FRANK_SCALE)).max_abs() < 1e-14);
    }

    #[test]
    fn pure_trace_nonmetricity_is_piece4() {
        let mu = KForm::from_vector([0.4, -0.9, 1.3]);
        let q: Vec<KForm<f64>> = (0..9)
            .map(|i| if i % 4 == 0 { mu.scale(1.0 / 3.0) } else { KForm::zero(1) })
            .collect();
        let [p1, p2, p3, p4] = nonmetricity_pieces_frame(&q);
        assert!(max_abs(&p1) < 1e-15 && max_abs(&p2) < 1e-15 && max_abs(&p3) < 1e-15);
        for i in 0..9 {
            assert!((p4[i].clone() - q[i].clone()).max_abs() < 1e-15);
        }
        assert!((nonmetricity_traces_frame(&q).q - mu).max_abs() < 1e-15);
    }

    #[test]
    fn generalized_burgers_combination() {
        let d = DefectFields::from_strs(["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"], "0").unwrap();
        let big = d.generalized_burgers().value(&pt()).unwrap();
        assert!((big - KForm::from_vector([1.0, -3.0, 2.0 / 3.0])).max_abs() < 1e-15);
    }

    #[test]
    fn extraction_examples() {
        let e = CoFrame::identity();
        let g = levi_civita(&e).unwrap();
        let d = extract_defects(&e, &g, FrankMode::Calibrated).unwrap();
        for (_, f) in d.named() {
            assert_eq!(max_abs(&f.values(&pt()).unwrap()), 0.0);
        }
        let b = Field::one_form(["1", "0", "0"]).unwrap();
        let t = reconstruct_torsion(&b, &Field::zero(0, vec![]), &e).unwrap();
        let l = defect_one_form(&t, &Field::zero(1, vec![Slot::Down, Slot::Down]), &e).unwrap();
        let d = extract_defects(&e, &g.add(&l).unwrap(), FrankMode::Calibrated).unwrap();
        assert!((d.burgers.value(&pt()).unwrap() - ef(0)).max_abs() < 1e-15);
        assert!(d.frank.value(&pt()).unwrap().max_abs() < 1e-15);
        assert!(d.point.value(&pt()).unwrap().max_abs() < 1e-15);
        assert!(d.scalar.value(&pt()).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn n_factor_on_ansatz() {
        let omega = KForm::from_vector([0.4, -0.9, 1.3]);
        let tr = nonmetricity_traces_frame(&reconstruct_nonmetricity_frame(&omega, &KForm::zero(1)));
        for a in 0..3 {
            let ep = w(&ef(a), &tr.p);
            assert!((tr.n[a].clone() - ep.scale(0.5)).max_abs() < 1e-14);
        }
    }
}
