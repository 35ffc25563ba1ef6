//! Defect free-energy Lagrangian, quadratic-invariant relations, coupling
//! map and dislocation energy coefficients.

use crate::defects::{nonmetricity_traces_frame, torsion_traces_frame, DefectFields};
use crate::elasticity::MaterialConstants;
use crate::exterior::{FrameIndex, KForm, Real};
use crate::field::{Field, Point};
use crate::geometry::{in_frame, CoFrame};
use crate::jet::Jet;
use crate::kinematics::{fit, Calibration};
use crate::sampling::{max_residual, midpoint_box, richardson};
use crate::{Error, Result};

/// Coupling constants `κ1..κ7`, plus the optional parity-odd coefficient of
/// `(b×Ω)·m`, which is off unless set.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Couplings {
    pub kappa: [f64; 7],
    pub parity: Option<f64>,
}

impl Couplings {
    pub fn new(kappa: [f64; 7]) -> Couplings {
        Couplings { kappa, parity: None }
    }

    /// Only `κ_i` (one-based) set to `v`.
    pub fn single(i: usize, v: f64) -> Couplings {
        let mut kappa = [0.0; 7];
        kappa[i - 1] = v;
        Couplings::new(kappa)
    }
}

/// Couplings of the general quadratic teleparallel Lagrangian.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MappedCouplings {
    pub k: [f64; 3],
    pub c: [f64; 5],
    pub l: [f64; 3],
}

pub fn map_couplings(k: &Couplings) -> MappedCouplings {
    let [k1, k2, k3, k4, k5, k6, k7] = k.kappa;
    MappedCouplings {
        k: [k1, k2, -k1],
        c: [k3, 0.0, -k3, -5.0 / 9.0 * k3 + k4 + 2.0 / 3.0 * k5, 2.0 / 3.0 * k3 - k5],
        l: [-k6, -2.0 / 3.0 * k6 - k7, k6],
    }
}

fn w(a: &KForm<Jet>, b: &KForm<Jet>) -> KForm<Jet> {
    a.wedge(b).expect("degree within 3")
}

fn e(a: usize) -> KForm<Jet> {
    KForm::e(FrameIndex::from_zero_based(a))
}

/// `α ∧ *β`.
fn ip(a: &KForm<Jet>, b: &KForm<Jet>) -> KForm<Jet> {
    w(a, &b.hodge())
}

fn lagrangian_inputs(d: &DefectFields) -> [&Field; 4] {
    [&d.burgers, &d.scalar, &d.frank, &d.point]
}

/// `κ1 T∧*T + κ2 S∧*S + κ3 P∧*P + κ4 Q∧*Q + κ5 P∧*Q + κ6 T∧*P + κ7 T∧*Q`
/// with `T = b̃`, `S = ρ*1`, `P = Ω̃`, `Q = m̃`, by wedge and Hodge.
pub fn lagrangian_form(d: &DefectFields, k: &Couplings, co: &CoFrame) -> Result<Field> {
    let k = *k;
    in_frame(co, &lagrangian_inputs(d), 3, vec![], move |v| {
        let (t, s, p, q) = (&v[0][0], KForm::<Jet>::volume().mul_scalar(&v[1][0].components()[0]), &v[2][0], &v[3][0]);
        let c = k.kappa;
        let mut l = ip(t, t).scale(c[0])
            + ip(&s, &s).scale(c[1])
            + ip(p, p).scale(c[2])
            + ip(q, q).scale(c[3])
            + ip(p, q).scale(c[4])
            + ip(t, p).scale(c[5])
            + ip(t, q).scale(c[6]);
        if let Some(kp) = k.parity {
            l = l + w(&w(t, p), q).scale(kp);
        }
        vec![l]
    })
}

/// The same Lagrangian from dot products of frame components.
pub fn lagrangian_vector(d: &DefectFields, k: &Couplings, co: &CoFrame) -> Result<Field> {
    let k = *k;
    in_frame(co, &lagrangian_inputs(d), 3, vec![], move |v| {
        let comps = |f: &KForm<Jet>| -> [Jet; 3] { std::array::from_fn(|i| f.components()[i].clone()) };
        let (b, rho, om, m) = (comps(&v[0][0]), v[1][0].components()[0].clone(), comps(&v[2][0]), comps(&v[3][0]));
        let dot = |x: &[Jet; 3], y: &[Jet; 3]| (0..3).fold(Jet::constant(0.0), |acc, i| acc + &x[i] * &y[i]);
        let c = k.kappa;
        let mut l = dot(&b, &b).scale(c[0])
            + (&rho * &rho).scale(c[1])
            + dot(&om, &om).scale(c[2])
            + dot(&m, &m).scale(c[3])
            + dot(&om, &m).scale(c[4])
            + dot(&b, &om).scale(c[5])
            + dot(&b, &m).scale(c[6]);
        if let Some(kp) = k.parity {
            let cross: [Jet; 3] =
                std::array::from_fn(|i| &b[(i + 1) % 3] * &om[(i + 2) % 3] - &b[(i + 2) % 3] * &om[(i + 1) % 3]);
            l = l + dot(&cross, &m).scale(kp);
        }
        vec![KForm::volume().mul_scalar(&l)]
    })
}

/// One quadratic-invariant relation, both sides as 3-form fields.
#[derive(Clone, Debug)]
pub struct Relation {
    pub name: &'static str,
    pub lhs: Field,
    pub rhs: Field,
    /// Asserted relations must hold; the others are only measured.
    pub asserted: bool,
}

/// Measured outcome of a relation over a point sample.
#[derive(Clone, Debug)]
pub struct RelationReport {
    pub name: &'static str,
    pub asserted: bool,
    pub max_deviation: f64,
    /// Fit `lhs ≈ μ rhs`.
    pub calibration: Calibration,
}

/// Left and right sides of the six quadratic relations for torsion and
/// non-metricity (frame components, Euclidean index placement). `P` here is
/// the raw trace extracted from `Q`; `e_{ac}` reads `e_a ∧ e_c`.
pub fn quadratic_invariants(t: &Field, q: &Field, co: &CoFrame) -> Result<Vec<Relation>> {
    type Side = fn(&[KForm<Jet>], &[KForm<Jet>]) -> KForm<Jet>;
    let rel = |name: &'static str, lhs: Side, rhs: Side, asserted: bool| -> Result<Relation> {
        let side = |f: Side| in_frame(co, &[t, q], 3, vec![], move |v| vec![f(&v[0], &v[1])]);
        Ok(Relation {
            name,
            lhs: side(lhs)?,
            rhs: side(rhs)?,
            asserted,
        })
    };
    Ok(vec![
        rel("T^*T", |t, _| {
            let tr = torsion_traces_frame(t).0;
            ip(&tr, &tr)
        }, |t, _| {
            let mut r = KForm::zero(3);
            for a in 0..3 {
                r = r + ip(&t[a], &t[a]);
                for b in 0..3 {
                    r = r - ip(&w(&t[a], &e(b)), &w(&t[b], &e(a)));
                }
            }
            r
        }, true)?,
        rel("S^*S", |t, _| {
            let s = torsion_traces_frame(t).1;
            ip(&s, &s)
        }, |t, _| {
            let s = (0..3).fold(KForm::zero(3), |acc, a| acc + w(&t[a], &e(a)));
            ip(&s, &s)
        }, true)?,
        rel("P^*P", |_, q| {
            let p = nonmetricity_traces_frame(q).p;
            ip(&p, &p)
        }, |_, q| {
            let tr = nonmetricity_traces_frame(q).q;
            let mut r = ip(&tr, &tr).scale(-5.0 / 9.0);
            for a in 0..3 {
                for b in 0..3 {
                    r = r + ip(&q[a * 3 + b], &q[a * 3 + b]);
                    for c in 0..3 {
                        r = r - ip(&w(&q[a * 3 + b], &e(c)), &w(&q[a * 3 + c], &e(b)));
                    }
                    r = r + ip(&w(&tr, &e(b)), &w(&q[a * 3 + b], &e(a))).scale(2.0 / 3.0);
                }
            }
            r
        }, false)?,
        rel("P^*Q", |_, q| {
            let tr = nonmetricity_traces_frame(q);
            ip(&tr.p, &tr.q)
        }, |_, q| {
            let tr = nonmetricity_traces_frame(q).q;
            let mut r = ip(&tr, &tr).scale(2.0 / 3.0);
            for a in 0..3 {
                for b in 0..3 {
                    r = r - ip(&w(&tr, &e(b)), &w(&q[a * 3 + b], &e(a)));
                }
            }
            r
        }, true)?,
        rel("T^*P", |t, q| {
            let tt = torsion_traces_frame(t).0;
            ip(&tt, &nonmetricity_traces_frame(q).p)
        }, |t, q| {
            let tr = nonmetricity_traces_frame(q).q;
            let mut r = KForm::zero(3);
            for a in 0..3 {
                r = r - ip(&w(&tr, &e(a)), &t[a]).scale(2.0 / 3.0);
                for b in 0..3 {
                    r = r + ip(&w(&q[a * 3 + b], &e(b)), &t[a]);
                    for c in 0..3 {
                        let eac = w(&e(a), &e(c));
                        r = r - ip(&w(&q[a * 3 + b], &eac), &w(&t[c], &e(b)));
                    }
                }
            }
            r
        }, false)?,
        rel("T^*Q", |t, q| {
            let tt = torsion_traces_frame(t).0;
            ip(&tt, &nonmetricity_traces_frame(q).q)
        }, |t, q| {
            let tr = nonmetricity_traces_frame(q).q;
            (0..3).fold(KForm::zero(3), |acc, a| acc - ip(&w(&tr, &e(a)), &t[a]))
        }, true)?,
    ])
}

/// Evaluates every relation over the points.
pub fn relation_reports(relations: &[Relation], points: &[Point]) -> Result<Vec<RelationReport>> {
    relations
        .iter()
        .map(|r| {
            Ok(RelationReport {
                name: r.name,
                asserted: r.asserted,
                max_deviation: max_residual(&r.lhs.sub(&r.rhs)?, points)?,
                calibration: fit(&r.lhs, &r.rhs, points)?,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DislocationKind {
    Screw,
    Edge,
}

/// `κ1 = G ln(R/r₀) / 4π` for screw and the same over `(1 − ν)` for edge
/// dislocations.
pub fn dislocation_energy_coefficient(kind: DislocationKind, mat: &MaterialConstants) -> Result<f64> {
    mat.validate_dislocation()?;
    let screw = mat.g / (4.0 * std::f64::consts::PI) * (mat.r_outer / mat.r_core).ln();
    Ok(match kind {
        DislocationKind::Screw => screw,
        DislocationKind::Edge => screw / (1.0 - mat.nu),
    })
}

/// Midpoint integral of the Lagrangian over `[lo, hi]` with `n` cells per axis.
pub fn total_free_energy(d: &DefectFields, k: &Couplings, co: &CoFrame, lo: [f64; 3], hi: [f64; 3], n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Shape(format!("quadrature resolution must be at least 2, got {n}")));
    }
    let l = lagrangian_form(d, k, co)?;
    midpoint_box(lo, hi, n, |p| Ok(l.value(p)?.components()[0]))
}

/// Free energy at two resolutions with the extrapolated value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyEstimate {
    pub coarse: f64,
    pub fine: f64,
    pub extrapolated: f64,
    /// `|extrapolated − fine|`
    pub error_estimate: f64,
}

pub fn free_energy_estimate(
    d: &DefectFields,
    k: &Couplings,
    co: &CoFrame,
    lo: [f64; 3],
    hi: [f64; 3],
    n: usize,
) -> Result<EnergyEstimate> {
    let coarse = total_free_energy(d, k, co, lo, hi, n)?;
    let fine = total_free_energy(d, k, co, lo, hi, 2 * n)?;
    let extrapolated = richardson(coarse, fine);
    Ok(EnergyEstimate {
        coarse,
        fine,
        extrapolated,
        error_estimate: (extrapolated - fine).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::Grid;

    fn pts() -> Vec<Point> {
        Grid::cube(-0.7, 0.6, 3).points()
    }

    #[test]
    fn coupling_columns() {
        let m = map_couplings(&Couplings::single(1, 1.0));
        assert_eq!(m, MappedCouplings { k: [1.0, 0.0, -1.0], c: [0.0; 5], l: [0.0; 3] });
        let m = map_couplings(&Couplings::single(3, 1.0));
        assert_eq!(m.c, [1.0, 0.0, -1.0, -5.0 / 9.0, 2.0 / 3.0]);
        assert_eq!((m.k, m.l), ([0.0; 3], [0.0; 3]));
        let m = map_couplings(&Couplings::single(6, 1.0));
        assert_eq!(m.l, [-1.0, -2.0 / 3.0, 1.0]);
    }

    #[test]
    fn simple_lagrangians() {
        let d = DefectFields::from_strs(["1", "0", "0"], ["1", "0", "0"], ["0", "0", "0"], "2").unwrap();
        let p = Point::spatial(0.1, 0.2, 0.3);
        let co = CoFrame::identity();
        let l = |c: Couplings| lagrangian_form(&d, &c, &co).unwrap().value(&p).unwrap().components()[0];
        assert_eq!(l(Couplings::single(1, 1.0)), 1.0);
        assert_eq!(l(Couplings::single(6, 1.0)), 1.0);
        assert_eq!(l(Couplings::single(2, 1.0)), 4.0);
    }

    #[test]
    fn form_equals_vector() {
        let d = DefectFields::from_strs(["x", "y*z", "0.3"], ["sin(x)", "0.2", "z"], ["y", "x*x", "-0.5"], "1+x*y")
            .unwrap();
        let mut k = Couplings::new([0.3, -1.2, 0.7, 2.1, -0.4, 0.9, 1.5]);
        k.parity = Some(0.8);
        let co = CoFrame::from_rows([["1", "0.2*x", "0"], ["0", "1+y^2", "0.1"], ["0.3*z", "0", "2"]]).unwrap();
        let a = lagrangian_form(&d, &k, &co).unwrap();
        let b = lagrangian_vector(&d, &k, &co).unwrap();
        assert!(max_residual(&a.sub(&b).unwrap(), &pts()).unwrap() < 1e-12);
    }

    #[test]
    fn energy_coefficients() {
        let mat = MaterialConstants {
            g: 4.0 * std::f64::consts::PI,
            nu: 0.5,
            r_outer: std::f64::consts::E,
            r_core: 1.0,
            ..Default::default()
        };
        let s = dislocation_energy_coefficient(DislocationKind::Screw, &mat).unwrap();
        let e = dislocation_energy_coefficient(DislocationKind::Edge, &mat).unwrap();
        assert!((s - 1.0).abs() < 1e-15);
        assert!((e - 2.0).abs() < 1e-15);
        let bad = MaterialConstants { r_core: 3.0, ..mat };
        assert!(matches!(
            dislocation_energy_coefficient(DislocationKind::Screw, &bad),
            Err(Error::InvalidMaterial(_))
        ));
    }

    #[test]
    fn constant_integrand() {
        let d = DefectFields::from_strs(["1", "0", "0"], ["0", "0", "0"], ["0", "0", "0"], "0").unwrap();
        let v = total_free_energy(&d, &Couplings::single(1, 1.0), &CoFrame::identity(), [0.0; 3], [1.0; 3], 4).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    fn mixed() -> DefectFields {
        DefectFields::from_strs(
            ["0.3 + x*y", "sin(z) - 0.2*x", "0.1*y^2 + 0.4"],
            ["0.2*z + 0.1", "0.3*x*y", "cos(y) * 0.25"],
            ["0.5*x", "y*z - 0.3", "0.2 + 0.1*x*z"],
            "0.4 + 0.3*x - 0.2*y*z",
        )
        .unwrap()
    }

    #[test]
    fn relations_hold_on_ansatz() {
        let co = CoFrame::from_rows([["1", "0.1*z", "0"], ["0", "1", "0.2*x"], ["0", "0", "1+0.1*y"]]).unwrap();
        let (t, q) = mixed().torsion_nonmetricity(&co).unwrap();
        let reports = relation_reports(&quadratic_invariants(&t, &q, &co).unwrap(), &pts()).unwrap();
        assert_eq!(reports.len(), 6);
        for r in reports {
            assert!(r.max_deviation < 1e-12, "{}: {}", r.name, r.max_deviation);
            assert!((r.calibration.mu - 1.0).abs() < 1e-12, "{}", r.name);
        }
    }

    #[test]
    fn polarization() {
        let d1 = mixed();
        let d2 = DefectFields::from_strs(["y", "0.2", "x*z"], ["0.1", "z", "-x"], ["x*y", "0.3", "z"], "x - y").unwrap();
        let comb = |s: f64| {
            DefectFields::new(
                d1.burgers.add(&d2.burgers.scale(s)).unwrap(),
                d1.frank.add(&d2.frank.scale(s)).unwrap(),
                d1.point.add(&d2.point.scale(s)).unwrap(),
                d1.scalar.add(&d2.scalar.scale(s)).unwrap(),
            )
            .unwrap()
        };
        let k = Couplings::new([0.3, -1.2, 0.7, 2.1, -0.4, 0.9, 1.5]);
        let co = CoFrame::identity();
        let l = |d: &DefectFields| lagrangian_vector(d, &k, &co).unwrap();
        let lhs = l(&comb(1.0)).add(&l(&comb(-1.0))).unwrap();
        let rhs = l(&d1).add(&l(&d2)).unwrap().scale(2.0);
        assert!(max_residual(&lhs.sub(&rhs).unwrap(), &pts()).unwrap() < 1e-12);
    }

    #[test]
    fn parity_term_is_odd() {
        // d'(x) = P d(Px) with P = diag(−1, 1, 1)
        let d = DefectFields::from_strs(["0.3 + x*y", "sin(z)", "x"], ["0.2*z", "x*y", "cos(y)"], ["x", "y*z", "0.2"], "x")
            .unwrap();
        let r = DefectFields::from_strs(
            ["-(0.3 - x*y)", "sin(z)", "-x"],
            ["-(0.2*z)", "-x*y", "cos(y)"],
            ["-(-x)", "y*z", "0.2"],
            "-x",
        )
        .unwrap();
        let co = CoFrame::identity();
        let mut k = Couplings::new([0.3, -1.2, 0.7, 2.1, -0.4, 0.9, 1.5]);
        let at = |f: &Field, p: Point| f.value(&p).unwrap().components()[0];
        for p in pts() {
            let mirror = Point::spatial(-p.x, p.y, p.z);
            let std_d = at(&lagrangian_form(&d, &k, &co).unwrap(), mirror);
            let std_r = at(&lagrangian_form(&r, &k, &co).unwrap(), p);
            assert!((std_d - std_r).abs() < 1e-12);
            k.parity = Some(1.0);
            let odd_d = at(&lagrangian_form(&d, &k, &co).unwrap(), mirror) - std_d;
            let odd_r = at(&lagrangian_form(&r, &k, &co).unwrap(), p) - std_r;
            assert!((odd_d + odd_r).abs() < 1e-12);
            k.parity = None;
        }
    }
}
