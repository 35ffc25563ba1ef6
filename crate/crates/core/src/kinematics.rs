//! Kinematic relations among defect densities, evaluated as residual fields.
//!
//! With `ω = γ + L(T, Q)` built from arbitrary defect densities the
//! curvature is generically non-zero, so the Bianchi substitution cannot be
//! asserted to vanish. Instead [`bianchi_consistency`] fits the balance
//! expressions against `R^a_b ∧ e^b` and `R_(ab)` and reports the fitted
//! constant together with the fit residual.
//!
//! Vector-calculus forms (`∇×`, `∇`) use the coordinate basis and therefore
//! assume the identity coframe.

use crate::defects::{reconstruct_nonmetricity, reconstruct_torsion, DefectFields};
use crate::exterior::{epsilon, FrameIndex, KForm, Real};
use crate::field::{curl, div, form_to_vector, grad, Field, Point, Slot};
use crate::geometry::{covariant_exterior_derivative, curvature, defect_one_form, in_frame, levi_civita, CoFrame};
use crate::jet::Jet;
use crate::sampling::{midpoint_ball, par_map};
use crate::Result;

fn e(a: usize) -> KForm<Jet> {
    KForm::e(FrameIndex::from_zero_based(a))
}

fn w(a: &KForm<Jet>, b: &KForm<Jet>) -> KForm<Jet> {
    a.wedge(b).expect("degree within 3")
}

fn s(f: &KForm<Jet>) -> Jet {
    f.components()[0].clone()
}

fn iota(f: &KForm<Jet>, a: usize) -> KForm<Jet> {
    f.interior(FrameIndex::from_zero_based(a))
}

/// Dislocation balance as three 3-forms (one per frame index):
/// `db̃∧e^a + ⅓ρ b̃∧*e^a − 4ρ Ω̃∧*e^a − ⅔ dρ∧*e^a + (2/9)ρ m̃∧*e^a`.
pub fn dislocation_balance_form(d: &DefectFields, co: &CoFrame) -> Result<Field> {
    let db = d.burgers.d()?;
    let drho = d.scalar.d()?;
    in_frame(
        co,
        &[&db, &d.burgers, &d.frank, &d.point, &d.scalar, &drho],
        3,
        vec![Slot::Up],
        |v| {
            let (db, b, om, m, rho, drho) = (&v[0][0], &v[1][0], &v[2][0], &v[3][0], s(&v[4][0]), &v[5][0]);
            (0..3)
                .map(|a| {
                    let star = e(a).hodge();
                    let rest = b.scale(1.0 / 3.0) - om.scale(4.0) + m.scale(2.0 / 9.0);
                    w(db, &e(a)) + w(&rest, &star).mul_scalar(&rho) - w(drho, &star).scale(2.0 / 3.0)
                })
                .collect()
        },
    )
}

/// Dislocation balance in vector notation:
/// `∇×b + ⅓ρb − 4ρΩ − ⅔∇ρ + (2/9)ρm`.
pub fn dislocation_balance_vector(d: &DefectFields) -> Result<Field> {
    let cb = curl(&form_to_vector(&d.burgers)?)?;
    let gr = grad(&d.scalar)?;
    let b = form_to_vector(&d.burgers)?;
    let om = form_to_vector(&d.frank)?;
    let m = form_to_vector(&d.point)?;
    Field::combine(
        &[(&cb, 0), (&gr, 0), (&b, 0), (&om, 0), (&m, 0), (&d.scalar, 0)],
        0,
        vec![Slot::Up],
        |_, v| {
            let rho = s(&v[5][0]);
            Ok((0..3)
                .map(|i| {
                    let lin = s(&v[2][i]).scale(1.0 / 3.0) - s(&v[3][i]).scale(4.0) + s(&v[4][i]).scale(2.0 / 9.0);
                    KForm::scalar(s(&v[0][i]) + &rho * &lin - s(&v[1][i]).scale(2.0 / 3.0))
                })
                .collect())
        },
    )
}

/// Form and vector dislocation residuals.
pub fn dislocation_balance(d: &DefectFields, co: &CoFrame) -> Result<(Field, Field)> {
    Ok((dislocation_balance_form(d, co)?, dislocation_balance_vector(d)?))
}

/// Residuals of the disclination and point-defect relations.
#[derive(Clone, Debug)]
pub struct DisclinationResiduals {
    /// `∇×m`
    pub point_curl: Field,
    /// `∇×Ω − ρΩ`
    pub beltrami: Field,
    /// `18[(Ω·Ω)δ_ac − 3Ω_aΩ_c] − 5[(b·Ω)δ_ac − (3/2)(b_aΩ_c + b_cΩ_a)]`, nine 0-forms
    pub algebraic: Field,
}

pub fn disclination_point_balance(d: &DefectFields) -> Result<DisclinationResiduals> {
    let point_curl = curl(&form_to_vector(&d.point)?)?;
    let om = form_to_vector(&d.frank)?;
    let co = curl(&om)?;
    let beltrami = Field::combine(&[(&co, 0), (&om, 0), (&d.scalar, 0)], 0, vec![Slot::Up], |_, v| {
        let rho = s(&v[2][0]);
        Ok((0..3).map(|i| KForm::scalar(s(&v[0][i]) - &rho * &s(&v[1][i]))).collect())
    })?;
    let algebraic = Field::combine(
        &[(&d.burgers, 0), (&d.frank, 0)],
        0,
        vec![Slot::Down, Slot::Down],
        |_, v| {
            let b = v[0][0].components();
            let o = v[1][0].components();
            let oo = (0..3).fold(Jet::constant(0.0), |acc, k| acc + &o[k] * &o[k]);
            let bo = (0..3).fold(Jet::constant(0.0), |acc, k| acc + &b[k] * &o[k]);
            Ok((0..9)
                .map(|i| {
                    let (a, c) = (i / 3, i % 3);
                    let mut r = (&o[a] * &o[c]).scale(-54.0) + (&b[a] * &o[c] + &b[c] * &o[a]).scale(7.5);
                    if a == c {
                        r = r + oo.scale(18.0) - bo.scale(5.0);
                    }
                    KForm::scalar(r)
                })
                .collect())
        },
    )?;
    Ok(DisclinationResiduals {
        point_curl,
        beltrami,
        algebraic,
    })
}

/// The tensor `S_(ab)c`, 27 0-forms with component index `(a*3 + b)*3 + c`.
///
/// Thirteen terms: the curl terms, the `b Ω ε` terms, the `ρΩ` terms and the
/// `ΩΩε` terms.
pub fn algebraic_tensor(d: &DefectFields) -> Result<Field> {
    let om = form_to_vector(&d.frank)?;
    let com = curl(&om)?;
    let cm = curl(&form_to_vector(&d.point)?)?;
    Field::combine(
        &[(&com, 0), (&cm, 0), (&d.burgers, 0), (&d.frank, 0), (&d.scalar, 0)],
        0,
        vec![Slot::Down, Slot::Down, Slot::Down],
        |_, v| {
            let cw: Vec<Jet> = v[0].iter().map(s).collect();
            let cmv: Vec<Jet> = v[1].iter().map(s).collect();
            let b = v[2][0].components();
            let o = v[3][0].components();
            let rho = s(&v[4][0]);
            let dl = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
            let mut out = Vec::with_capacity(27);
            for a in 0..3 {
                for bb in 0..3 {
                    for c in 0..3 {
                        let mut t = cw[bb].scale(-0.45 * dl(a, c)) + cw[a].scale(-0.45 * dl(bb, c))
                            + cw[c].scale(0.3 * dl(a, bb))
                            + cmv[c].scale(dl(a, bb) / 3.0);
                        for k in 0..3 {
                            let (ekbc, ekac) = (epsilon(k, bb, c), epsilon(k, a, c));
                            t = t + (&b[k] * &o[a]).scale(-0.225 * ekbc) + (&b[k] * &o[bb]).scale(-0.225 * ekac)
                                + (&b[a] * &o[k]).scale(-0.225 * ekbc)
                                + (&b[bb] * &o[k]).scale(-0.225 * ekac)
                                + (&o[k] * &o[a]).scale(1.62 * ekbc)
                                + (&o[k] * &o[bb]).scale(1.62 * ekac);
                        }
                        let ro = o[bb].scale(0.45 * dl(a, c)) + o[a].scale(0.45 * dl(bb, c)) - o[c].scale(0.3 * dl(a, bb));
                        t = t + &rho * &ro;
                        out.push(KForm::scalar(t));
                    }
                }
            }
            Ok(out)
        },
    )
}

/// Least-squares fit `A ≈ μ B` over a point sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    /// Global least-squares constant.
    pub mu: f64,
    /// Standard deviation of the pointwise constants, relative to `|μ|`.
    pub relative_std: f64,
    /// `‖A − μB‖ / ‖B‖` over all points.
    pub relative_residual: f64,
    /// `‖B‖` over all points.
    pub norm_b: f64,
    /// `‖A‖` over all points.
    pub norm_a: f64,
}

/// Fits `a ≈ μ b` componentwise over the points.
pub fn fit(a: &Field, b: &Field, points: &[Point]) -> Result<Calibration> {
    let pairs = par_map(points, |p| {
        let av: Vec<f64> = a.values(p)?.iter().flat_map(|f| f.components().to_vec()).collect();
        let bv: Vec<f64> = b.values(p)?.iter().flat_map(|f| f.components().to_vec()).collect();
        Ok((av, bv))
    })?;
    let (mut ab, mut bb, mut aa) = (0.0, 0.0, 0.0);
    let mut local = Vec::new();
    for (av, bv) in &pairs {
        let pab: f64 = av.iter().zip(bv).map(|(x, y)| x * y).sum();
        let pbb: f64 = bv.iter().map(|y| y * y).sum();
        ab += pab;
        bb += pbb;
        aa += av.iter().map(|x| x * x).sum::<f64>();
        if pbb > 1e-20 {
            local.push(pab / pbb);
        }
    }
    let mu = if bb > 0.0 { ab / bb } else { 0.0 };
    let res2: f64 = pairs
        .iter()
        .map(|(av, bv)| av.iter().zip(bv).map(|(x, y)| (x - mu * y).powi(2)).sum::<f64>())
        .sum();
    let relative_residual = if bb > 0.0 { (res2 / bb).sqrt() } else { res2.sqrt() };
    let relative_std = if local.len() > 1 && mu != 0.0 {
        let mean = local.iter().sum::<f64>() / local.len() as f64;
        let var = local.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / local.len() as f64;
        var.sqrt() / mu.abs()
    } else {
        0.0
    };
    Ok(Calibration {
        mu,
        relative_std,
        relative_residual,
        norm_b: bb.sqrt(),
        norm_a: aa.sqrt(),
    })
}

/// Disclination combination
/// `(9/10)[DΩ_a∧e_b + Ω_a De_b + (a↔b)] + (6/5)Q_ab∧Ω̃ − (3/5)δ_ab dΩ̃ − ⅔Q_ab∧m̃ + ⅓δ_ab dm̃`
/// with `DΩ_a = ½Ω_b ι_aT^b − ½ι_a dΩ̃`, evaluated on the reconstructed
/// torsion and non-metricity. With `substituted = false` the true covariant
/// derivative `DΩ_a = dΩ_a − ω^c_a Ω_c` is used instead.
pub fn disclination_form(d: &DefectFields, co: &CoFrame, omega: &Field, substituted: bool) -> Result<Field> {
    let (t, q) = d.torsion_nonmetricity(co)?;
    let om_down = in_frame(co, &[&d.frank], 0, vec![Slot::Down], |v| {
        v[0][0].components().iter().map(|c| KForm::scalar(c.clone())).collect()
    })?;
    let cov = covariant_exterior_derivative(&om_down, omega)?;
    let e_down = Field::combine(&[(&co.forms(), 0)], 1, vec![Slot::Down], |_, v| Ok(v[0].clone()))?;
    let de = covariant_exterior_derivative(&e_down, omega)?;
    let dom = d.frank.d()?;
    let dm = d.point.d()?;
    in_frame(co, &[&t, &q, &de, &d.frank, &d.point, &dom, &dm, &cov], 2, vec![Slot::Down, Slot::Down], move |v| {
        let (t, q, de, om, m, dom, dm) = (&v[0], &v[1], &v[2], &v[3][0], &v[4][0], &v[5][0], &v[6][0]);
        let oc: Vec<Jet> = (0..3).map(|a| s(&iota(om, a))).collect();
        let d_om: Vec<KForm<Jet>> = (0..3)
            .map(|a| {
                if !substituted {
                    return v[7][a].clone();
                }
                let mut acc = iota(dom, a).scale(-0.5);
                for b in 0..3 {
                    acc = acc + iota(&t[b], a).mul_scalar(&oc[b]).scale(0.5);
                }
                acc
            })
            .collect();
        (0..9)
            .map(|i| {
                let (a, b) = (i / 3, i % 3);
                let sym = w(&d_om[a], &e(b)) + de[b].mul_scalar(&oc[a]) + w(&d_om[b], &e(a)) + de[a].mul_scalar(&oc[b]);
                let mut r = sym.scale(0.9) + w(&q[i], om).scale(1.2) - w(&q[i], m).scale(2.0 / 3.0);
                if a == b {
                    r = r - dom.scale(0.6) + dm.scale(1.0 / 3.0);
                }
                r
            })
            .collect()
    })
}

/// Calibration of the Bianchi substitution against curvature.
#[derive(Clone, Debug)]
pub struct BianchiConsistency {
    /// Dislocation form residual against `R^a_b ∧ e^b`.
    pub dislocation: Calibration,
    /// Disclination combination against `R_(ab)`, with the substituted `DΩ_a`.
    pub disclination: Calibration,
    /// The same with the true covariant derivative `DΩ_a`.
    pub disclination_covariant: Calibration,
}

/// `R^a_b ∧ e^b` and `R_(ab)` of the connection `γ + L(T, Q)` built from `d`.
pub fn substitution_curvature(d: &DefectFields, co: &CoFrame) -> Result<(Field, Field, Field)> {
    let (t, q) = d.torsion_nonmetricity(co)?;
    let omega = levi_civita(co)?.add(&defect_one_form(&t, &q, co)?)?;
    let r = curvature(&omega)?;
    let forms = co.forms();
    let re = Field::combine(&[(&r, 0), (&forms, 0)], 3, vec![Slot::Up], |_, v| {
        Ok((0..3)
            .map(|a| (0..3).fold(KForm::zero(3), |acc, b| acc + w(&v[0][a * 3 + b], &v[1][b])))
            .collect())
    })?;
    let rsym = Field::combine(&[(&r, 0)], 2, vec![Slot::Down, Slot::Down], |_, v| {
        Ok((0..9)
            .map(|i| (v[0][i].clone() + v[0][(i % 3) * 3 + i / 3].clone()).scale(0.5))
            .collect())
    })?;
    Ok((omega, re, rsym))
}

pub fn bianchi_consistency(co: &CoFrame, d: &DefectFields, points: &[Point]) -> Result<BianchiConsistency> {
    let (omega, re, rsym) = substitution_curvature(d, co)?;
    let a = dislocation_balance_form(d, co)?;
    let c = disclination_form(d, co, &omega, true)?;
    let c_cov = disclination_form(d, co, &omega, false)?;
    Ok(BianchiConsistency {
        dislocation: fit(&a, &re, points)?,
        disclination: fit(&c, &rsym, points)?,
        disclination_covariant: fit(&c_cov, &rsym, points)?,
    })
}

/// Extra-matter totals over a ball.
#[derive(Clone, Debug)]
pub struct ExtraMatter {
    /// `ρ_exmt = *(d*dφ)`
    pub density: Field,
    /// `∫ ρ_exmt` over the ball.
    pub volume_total: f64,
    /// `∮ *dφ` over the sphere.
    pub flux_total: f64,
}

/// Volume and surface totals of the extra-matter density of `φ` on the ball
/// `|x − centre| ≤ radius`: midpoint cells on an `n_vol³` bounding grid and
/// an `n_lat × n_lon` latitude–longitude grid.
pub fn extra_matter(
    phi: &Field,
    centre: [f64; 3],
    radius: f64,
    n_vol: usize,
    n_lat: usize,
    n_lon: usize,
) -> Result<ExtraMatter> {
    if radius <= 0.0 {
        return Err(crate::Error::Shape(format!("radius must be positive, got {radius}")));
    }
    let g = grad(phi)?;
    let density = div(&g)?;
    let volume_total = midpoint_ball(centre, radius, n_vol, |p| Ok(density.value(p)?.components()[0]))?;
    let (dt, dl) = (std::f64::consts::PI / n_lat as f64, 2.0 * std::f64::consts::PI / n_lon as f64);
    let mut nodes = Vec::with_capacity(n_lat * n_lon);
    for i in 0..n_lat {
        for j in 0..n_lon {
            let th = (i as f64 + 0.5) * dt;
            let la = (j as f64 + 0.5) * dl;
            nodes.push(([th.sin() * la.cos(), th.sin() * la.sin(), th.cos()], th.sin()));
        }
    }
    let pts: Vec<Point> = nodes
        .iter()
        .map(|(n, _)| Point::spatial(centre[0] + radius * n[0], centre[1] + radius * n[1], centre[2] + radius * n[2]))
        .collect();
    let vals = par_map(&pts, |p| {
        let v = g.values(p)?;
        Ok([v[0].components()[0], v[1].components()[0], v[2].components()[0]])
    })?;
    let flux_total = vals
        .iter()
        .zip(&nodes)
        .map(|(gv, (n, sin))| (gv[0] * n[0] + gv[1] * n[1] + gv[2] * n[2]) * sin)
        .sum::<f64>()
        * radius
        * radius
        * dt
        * dl;
    Ok(ExtraMatter {
        density,
        volume_total,
        flux_total,
    })
}

/// Reconstructed torsion and non-metricity, re-exported for reports.
pub fn reconstructed(d: &DefectFields, co: &CoFrame) -> Result<(Field, Field)> {
    Ok((
        reconstruct_torsion(&d.burgers, &d.scalar, co)?,
        reconstruct_nonmetricity(&d.frank, &d.point, co)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{max_abs, max_residual, Grid};

    fn pts() -> Vec<Point> {
        Grid::cube(-0.8, 0.7, 4).points()
    }

    fn random_defects() -> DefectFields {
        DefectFields::from_strs(
            ["0.3 + x*y", "sin(z) - 0.2*x", "0.1*y^2 + 0.4"],
            ["0.2*z + 0.1", "0.3*x*y", "cos(y) * 0.25"],
            ["0.5*x", "y*z - 0.3", "0.2 + 0.1*x*z"],
            "0.4 + 0.3*x - 0.2*y*z",
        )
        .unwrap()
    }

    #[test]
    fn zero_fields_give_zero_residuals() {
        let d = DefectFields::zero();
        let (f, v) = dislocation_balance(&d, &CoFrame::identity()).unwrap();
        assert_eq!(max_residual(&f, &pts()).unwrap(), 0.0);
        assert_eq!(max_residual(&v, &pts()).unwrap(), 0.0);
    }

    #[test]
    fn form_matches_vector() {
        let d = random_defects();
        let (f, v) = dislocation_balance(&d, &CoFrame::identity()).unwrap();
        for p in pts() {
            let fv = f.values(&p).unwrap();
            let vv = v.values(&p).unwrap();
            for a in 0..3 {
                assert!((fv[a].components()[0] - vv[a].components()[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn beltrami_and_exact_point_defects() {
        let d = DefectFields::from_strs(["0", "0", "0"], ["sin(2*z)", "cos(2*z)", "0"], ["2*x/(1+x^2)", "0", "0"], "2")
            .unwrap();
        let r = disclination_point_balance(&d).unwrap();
        assert!(max_residual(&r.beltrami, &pts()).unwrap() < 1e-12);
        assert!(max_residual(&r.point_curl, &pts()).unwrap() < 1e-12);
    }

    #[test]
    fn algebraic_tensor_traces() {
        let d = random_defects();
        let t = algebraic_tensor(&d).unwrap();
        let r = disclination_point_balance(&d).unwrap();
        for p in pts() {
            let tv = t.values(&p).unwrap();
            let c1: Vec<f64> = r.point_curl.values(&p).unwrap().iter().map(|f| f.components()[0]).collect();
            let c2: Vec<f64> = r.beltrami.values(&p).unwrap().iter().map(|f| f.components()[0]).collect();
            for c in 0..3 {
                let tab: f64 = (0..3).map(|a| tv[(a * 3 + a) * 3 + c].components()[0]).sum();
                let tac: f64 = (0..3).map(|a| tv[(a * 3 + c) * 3 + a].components()[0]).sum();
                assert!((tab - c1[c]).abs() < 1e-12);
                assert!((tac - (-1.5 * c2[c] + c1[c] / 3.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn extra_matter_totals() {
        let phi = Field::parse_scalar("(x^2+y^2+z^2)/6").unwrap();
        let x = extra_matter(&phi, [0.0; 3], 1.0, 32, 64, 128).unwrap();
        let v = 4.0 * std::f64::consts::PI / 3.0;
        assert!((x.flux_total - v).abs() < 0.01 * v);
        assert!((x.volume_total - v).abs() < 0.03 * v);
        assert!(max_abs(&x.density.values(&Point::spatial(0.3, 0.1, 0.2)).unwrap()) - 1.0 < 1e-12);
    }

    #[test]
    fn dislocation_balance_is_minus_two_torsion_bianchi() {
        let c = bianchi_consistency(&CoFrame::identity(), &random_defects(), &pts()).unwrap();
        assert!((c.dislocation.mu + 2.0).abs() < 1e-10);
        assert!(c.dislocation.relative_residual < 1e-10);
        assert!((c.disclination_covariant.mu - 1.0).abs() < 1e-10);
        assert!(c.disclination_covariant.relative_residual < 1e-10);
        // the substituted DΩ_a does not reproduce R_(ab)
        assert!(c.disclination.relative_residual > 0.1);
    }

    #[test]
    fn dilatation_gauge_has_no_kinematic_residual() {
        // Λ = e^ψ·I with ψ = 0.3x + 0.2yz gives b̃ = −2dψ, m̃ = 3dψ, ρ = Ω̃ = 0 and R = 0
        let d = DefectFields::from_strs(["-0.6", "-0.4*z", "-0.4*y"], ["0", "0", "0"], ["0.9", "0.6*z", "0.6*y"], "0")
            .unwrap();
        let lam = crate::field::Field::from_exprs(
            0,
            vec![Slot::Up, Slot::Down],
            (0..9)
                .map(|i| vec![crate::expr::Expr::parse(if i % 4 == 0 { "exp(0.3*x + 0.2*y*z)" } else { "0" }).unwrap()])
                .collect(),
            crate::Strategy::Symbolic,
        )
        .unwrap();
        let omega = crate::geometry::pure_gauge(&lam).unwrap();
        let ex = crate::defects::extract_defects(&CoFrame::identity(), &omega, crate::defects::FrankMode::Calibrated).unwrap();
        for (x, y) in d.named().iter().zip(ex.named().iter()) {
            assert!(max_residual(&x.1.sub(&y.1).unwrap(), &pts()).unwrap() < 1e-12);
        }
        let a = dislocation_balance_form(&d, &CoFrame::identity()).unwrap();
        assert!(max_residual(&a, &pts()).unwrap() < 1e-12);
        let c = disclination_form(&d, &CoFrame::identity(), &omega, true).unwrap();
        assert!(max_residual(&c, &pts()).unwrap() < 1e-12);
    }
}
