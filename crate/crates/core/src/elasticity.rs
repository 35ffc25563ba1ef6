//! Riemannian elastic pipeline: deformation gradients, Euler strain,
//! isotropic Hooke stress and the balance-law residuals.
//!
//! Scenarios supply the inverse map `X^A(x)` directly (Eulerian
//! description). A forward map `x = F(X)` is inverted point by point with a
//! damped Newton solve; the solution is then refined on jets with the
//! Jacobian frozen at the root, which recovers exact derivatives of the
//! inverse order by order.
//!
//! Body triads are the identity, so coordinate and orthonormal deformation
//! gradients coincide up to the spatial triad `h`.

use crate::exterior::{KForm, Real};
use crate::expr::Expr;
use crate::field::{Field, Point, Slot, Strategy};
use crate::geometry::{covariant_exterior_derivative, det3, in_frame, levi_civita, scalar_matrix, CoFrame, MIN_DET};
use crate::jet::{invert3, Jet, MAX_ORDER};
use crate::{Error, Result};

/// Iteration cap for forward-map inversion.
pub const NEWTON_MAX_ITER: usize = 50;
/// Residual tolerance for forward-map inversion, relative to `1 + |x|`.
pub const NEWTON_TOL: f64 = 1e-12;

/// A deformation map, held as the three scalar fields `X^A(x, y, z, t)`.
#[derive(Clone, Debug)]
pub struct DeformationMap {
    inverse: [Field; 3],
}

fn s(f: &KForm<Jet>) -> Jet {
    f.components()[0].clone()
}

fn sc(j: Jet) -> KForm<Jet> {
    KForm::scalar(j)
}

impl DeformationMap {
    /// From the inverse map `X^A(x)`.
    pub fn from_inverse(x: [Field; 3]) -> Result<DeformationMap> {
        for f in &x {
            if f.degree() != 0 || !f.slots().is_empty() {
                return Err(Error::Shape("inverse map components must be scalar fields".into()));
            }
        }
        Ok(DeformationMap { inverse: x })
    }

    pub fn from_inverse_strs(x: [&str; 3]) -> Result<DeformationMap> {
        DeformationMap::from_inverse([
            Field::parse_scalar(x[0])?,
            Field::parse_scalar(x[1])?,
            Field::parse_scalar(x[2])?,
        ])
    }

    /// From a forward map `x^a = F^a(X, t)`; expressions use `x, y, z` for
    /// the body coordinates.
    pub fn from_forward(f: [Expr; 3]) -> DeformationMap {
        let f = std::sync::Arc::new(f);
        let inverse = std::array::from_fn(|component| {
            let f = f.clone();
            Field::new(0, vec![], Strategy::Symbolic, MAX_ORDER, move |p, order| {
                let x = invert_forward(&f, p, order)?;
                Ok(vec![sc(x[component].clone())])
            })
        });
        DeformationMap { inverse }
    }

    pub fn from_forward_strs(f: [&str; 3]) -> Result<DeformationMap> {
        Ok(DeformationMap::from_forward([
            Expr::parse(f[0])?,
            Expr::parse(f[1])?,
            Expr::parse(f[2])?,
        ]))
    }

    pub fn inverse(&self) -> &[Field; 3] {
        &self.inverse
    }
}

fn forward_jacobian(f: &[Expr; 3], x: [f64; 3], t: f64) -> Result<([f64; 3], [[f64; 3]; 3])> {
    let p = Point::new(x[0], x[1], x[2], t);
    let mut val = [0.0; 3];
    let mut jac = [[0.0; 3]; 3];
    for i in 0..3 {
        let j = f[i].eval_jet(&p, 1)?;
        val[i] = j.value();
        for (k, row) in jac[i].iter_mut().enumerate() {
            *row = j.partial(k).value();
        }
    }
    Ok((val, jac))
}

/// Solves `F(X, t) = x` for `X` at `p` and returns `X` as jets in
/// `(x, y, z, t)` truncated at `order`.
fn invert_forward(f: &[Expr; 3], p: &Point, order: usize) -> Result<[Jet; 3]> {
    let target = [p.x, p.y, p.z];
    let scale = 1.0 + target.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut x = target;
    let resid = |x: [f64; 3]| -> Result<([f64; 3], f64)> {
        let mut r = [0.0; 3];
        for i in 0..3 {
            r[i] = f[i].eval(&Point::new(x[0], x[1], x[2], p.t))? - target[i];
        }
        Ok((r, r.iter().fold(0.0f64, |m, v| m.max(v.abs()))))
    };
    let (mut r, mut norm) = resid(x)?;
    let mut iter = 0;
    while norm > NEWTON_TOL * scale {
        if iter == NEWTON_MAX_ITER {
            return Err(Error::NewtonFailure(*p, norm));
        }
        iter += 1;
        let (_, jac) = forward_jacobian(f, x, p.t)?;
        let (_, inv) = invert3(&jac, |d| *d, MIN_DET).ok_or(Error::SingularDeformation(*p, det3(&jac).abs()))?;
        let step: [f64; 3] = std::array::from_fn(|i| (0..3).map(|k| inv[i][k] * r[k]).sum());
        let mut lambda = 1.0;
        loop {
            let trial: [f64; 3] = std::array::from_fn(|i| x[i] - lambda * step[i]);
            let (rt, nt) = resid(trial)?;
            if nt < norm || lambda < 1e-4 {
                x = trial;
                r = rt;
                norm = nt;
                break;
            }
            lambda *= 0.5;
        }
    }
    let (_, jac) = forward_jacobian(f, x, p.t)?;
    let (_, inv) = invert3(&jac, |d| *d, MIN_DET).ok_or(Error::SingularDeformation(*p, det3(&jac).abs()))?;
    let vars: [Jet; 4] = std::array::from_fn(|v| Jet::variable(v, p.coords()[v], order));
    let mut xj: [Jet; 3] = std::array::from_fn(|i| Jet::constant(x[i]));
    // each sweep with the frozen Jacobian fixes one more order
    for _ in 0..=order {
        let env = [xj[0].clone(), xj[1].clone(), xj[2].clone(), vars[3].clone()];
        let mut res = Vec::with_capacity(3);
        for i in 0..3 {
            res.push(f[i].eval_on(&env, p)? - vars[i].clone());
        }
        xj = std::array::from_fn(|i| {
            let corr = (0..3).fold(Jet::constant(0.0), |acc, k| acc + res[k].scale(inv[i][k]));
            (xj[i].clone() - corr).truncate(order)
        });
    }
    Ok(xj)
}

/// Push-forward `F^A_a` and pull-back `F^a_A`, both 0-forms on `[Up, Down]`.
#[derive(Clone, Debug)]
pub struct Gradients {
    /// `F^A_a = (∂X^A/∂x^b) (h⁻¹)^b_a`
    pub push: Field,
    /// `F^a_A = h^a_b ∂x^b/∂X^A`
    pub pull: Field,
}

/// Deformation gradients in orthonormal components on the spatial coframe.
pub fn deformation_gradients(map: &DeformationMap, co: &CoFrame) -> Result<Gradients> {
    let [x0, x1, x2] = &map.inverse;
    let coord = Field::combine(&[(x0, 1), (x1, 1), (x2, 1)], 0, vec![Slot::Up, Slot::Down], |_, v| {
        Ok((0..9).map(|i| sc(s(&v[i / 3][0]).partial(i % 3))).collect())
    })?;
    let co2 = co.clone();
    let push = Field::combine(&[(&coord, 0), (co.triad(), 0)], 0, vec![Slot::Up, Slot::Down], move |p, v| {
        let fh = scalar_matrix(&v[0]);
        if co2.is_identity() {
            return Ok(fh.into_iter().flatten().map(sc).collect());
        }
        let h = scalar_matrix(&v[1]);
        let (_, hinv) = invert3(&h, |d: &Jet| d.value(), MIN_DET)
            .ok_or_else(|| Error::SingularTriad(*p, det3(&h.clone().map(|r| r.map(|j| j.value()))).abs()))?;
        Ok((0..9)
            .map(|i| {
                let (aa, a) = (i / 3, i % 3);
                sc((0..3).fold(Jet::constant(0.0), |acc, b| acc + &fh[aa][b] * &hinv[b][a]))
            })
            .collect())
    })?;
    let pull = Field::combine(&[(&push, 0)], 0, vec![Slot::Up, Slot::Down], |p, v| {
        let m = scalar_matrix(&v[0]);
        let (_, inv) = invert3(&m, |d: &Jet| d.value(), MIN_DET)
            .ok_or_else(|| Error::SingularDeformation(*p, det3(&m.clone().map(|r| r.map(|j| j.value()))).abs()))?;
        Ok(inv.into_iter().flatten().map(sc).collect())
    })?;
    Ok(Gradients { push, pull })
}

/// Euler strain `𝕖_ab = ½(δ_ab − δ_AB F^A_a F^B_b)`, 0-forms on `[Down, Down]`.
pub fn euler_strain(g: &Gradients) -> Result<Field> {
    Field::combine(&[(&g.push, 0)], 0, vec![Slot::Down, Slot::Down], |_, v| {
        let f = scalar_matrix(&v[0]);
        Ok((0..9)
            .map(|i| {
                let (a, b) = (i / 3, i % 3);
                let ff = (0..3).fold(Jet::constant(0.0), |acc, k| acc + &f[k][a] * &f[k][b]);
                let d = if a == b { 1.0 } else { 0.0 };
                sc((Jet::constant(d) - ff).scale(0.5))
            })
            .collect())
    })
}

/// Material constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialConstants {
    pub lambda: f64,
    pub mu: f64,
    pub kappa: f64,
    /// Shear modulus.
    pub g: f64,
    /// Poisson ratio.
    pub nu: f64,
    pub r_outer: f64,
    pub r_core: f64,
}

impl Default for MaterialConstants {
    fn default() -> Self {
        MaterialConstants {
            lambda: 1.0,
            mu: 1.0,
            kappa: 0.0,
            g: 1.0,
            nu: 0.3,
            r_outer: std::f64::consts::E,
            r_core: 1.0,
        }
    }
}

impl MaterialConstants {
    /// Checks the Lamé constants used by the constitutive law.
    pub fn validate_lame(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidMaterial(format!("need mu > 0 and finite lambda, got mu = {}", self.mu)));
        }
        if self.kappa != 0.0 {
            return Err(Error::AnisotropyNotSupported(self.kappa));
        }
        Ok(())
    }

    /// Checks the constants used by dislocation energies. `ν = 0.5` is
    /// accepted (incompressible limit).
    pub fn validate_dislocation(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 0.5) {
            return Err(Error::InvalidMaterial(format!("Poisson ratio {} outside (0, 0.5]", self.nu)));
        }
        if !(self.r_core > 0.0 && self.r_outer > self.r_core) {
            return Err(Error::InvalidMaterial(format!(
                "need R_outer > r_core > 0, got {} and {}",
                self.r_outer, self.r_core
            )));
        }
        if !(self.g.is_finite()) {
            return Err(Error::InvalidMaterial("shear modulus must be finite".into()));
        }
        Ok(())
    }

    /// `C_abcd = λδ_abδ_cd + μ(δ_acδ_bd + δ_adδ_bc) + κ(δ_acδ_bd − δ_adδ_bc)`.
    pub fn stiffness(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let dl = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        self.lambda * dl(a, b) * dl(c, d)
            + self.mu * (dl(a, c) * dl(b, d) + dl(a, d) * dl(b, c))
            + self.kappa * (dl(a, c) * dl(b, d) - dl(a, d) * dl(b, c))
    }
}

fn check_strain(strain: &Field) -> Result<()> {
    if strain.degree() != 0 || strain.slots() != [Slot::Down, Slot::Down] {
        return Err(Error::Shape("strain must be 0-forms on [Down, Down]".into()));
    }
    Ok(())
}

/// `σ^{ab} = 2μ𝕖^{ab} + λ(tr 𝕖)δ^{ab}`, 0-forms on `[Up, Up]`.
pub fn isotropic_stress(strain: &Field, mat: &MaterialConstants) -> Result<Field> {
    check_strain(strain)?;
    mat.validate_lame()?;
    let (l, m) = (mat.lambda, mat.mu);
    Field::combine(&[(strain, 0)], 0, vec![Slot::Up, Slot::Up], move |_, v| {
        let tr = s(&v[0][0]) + s(&v[0][4]) + s(&v[0][8]);
        Ok((0..9)
            .map(|i| {
                let mut x = s(&v[0][i]).scale(2.0 * m);
                if i % 4 == 0 {
                    x = x + tr.scale(l);
                }
                sc(x)
            })
            .collect())
    })
}

/// `σ^{ab} = C^{ab}_{cd} 𝕖^{cd}` by full summation.
pub fn stiffness_stress(strain: &Field, mat: &MaterialConstants) -> Result<Field> {
    check_strain(strain)?;
    let mat = *mat;
    Field::combine(&[(strain, 0)], 0, vec![Slot::Up, Slot::Up], move |_, v| {
        Ok((0..9)
            .map(|i| {
                let (a, b) = (i / 3, i % 3);
                let mut x = Jet::constant(0.0);
                for c in 0..3 {
                    for d in 0..3 {
                        x = x + s(&v[0][c * 3 + d]).scale(mat.stiffness(a, b, c, d));
                    }
                }
                sc(x)
            })
            .collect())
    })
}

/// Cauchy stress 2-forms `τ^a = σ^{ab} *e_b`.
pub fn stress_forms(sigma: &Field, co: &CoFrame) -> Result<Field> {
    in_frame(co, &[sigma], 2, vec![Slot::Up], |v| {
        (0..3)
            .map(|a| {
                (0..3).fold(KForm::zero(2), |acc, b| {
                    acc + KForm::<Jet>::e(crate::FrameIndex::from_zero_based(b))
                        .hodge()
                        .mul_scalar(&s(&v[0][a * 3 + b]))
                })
            })
            .collect()
    })
}

/// `∂_t ρ_m + ∇·(ρ_m v)`.
pub fn mass_conservation_residual(rho: &Field, v: &Field) -> Result<Field> {
    Field::combine(&[(rho, 1), (v, 1)], 0, vec![], |_, x| {
        let r = s(&x[0][0]);
        let mut out = r.partial(3);
        for i in 0..3 {
            out = out + (&r * &s(&x[1][i])).partial(i);
        }
        Ok(vec![sc(out)])
    })
}

/// `ρ_m(∂_t v^a + ι_v Dv^a − f^a) *1 − Dτ^a` with `D` the Levi-Civita
/// covariant exterior derivative and `τ^a = σ^{ab} *e_b`.
pub fn cauchy_motion_residual(rho: &Field, v: &Field, f: &Field, sigma: &Field, co: &CoFrame) -> Result<Field> {
    let gamma = levi_civita(co)?;
    let dv = covariant_exterior_derivative(v, &gamma)?;
    let dtv = v.partial(3)?;
    let tau = stress_forms(sigma, co)?;
    let dtau = covariant_exterior_derivative(&tau, &gamma)?;
    in_frame(co, &[rho, v, &dtv, &dv, f, &dtau], 3, vec![Slot::Up], |x| {
        let r = s(&x[0][0]);
        let vel: [Jet; 3] = std::array::from_fn(|i| s(&x[1][i]));
        (0..3)
            .map(|a| {
                let adv = s(&x[3][a].interior_vector(&vel));
                let acc = s(&x[2][a]) + adv - s(&x[4][a]);
                KForm::volume().mul_scalar(&(&r * &acc)) - x[5][a].clone()
            })
            .collect()
    })
}

/// `det(F^a_A) − (*1 coefficient)/(*𝟙 coefficient)`: the volume-form ratio is
/// `det h / det(∂X/∂x)` with identity body triads.
pub fn volume_relation_residual(map: &DeformationMap, co: &CoFrame) -> Result<Field> {
    let g = deformation_gradients(map, co)?;
    let [x0, x1, x2] = map.inverse();
    Field::combine(&[(&g.pull, 0), (co.triad(), 0), (x0, 1), (x1, 1), (x2, 1)], 0, vec![], |_, v| {
        let det = |m: &[[Jet; 3]; 3]| {
            &m[0][0] * &(&m[1][1] * &m[2][2] - &m[1][2] * &m[2][1]) - &m[0][1] * &(&m[1][0] * &m[2][2] - &m[1][2] * &m[2][0])
                + &m[0][2] * &(&m[1][0] * &m[2][1] - &m[1][1] * &m[2][0])
        };
        let fx: [[Jet; 3]; 3] = std::array::from_fn(|aa| std::array::from_fn(|b| s(&v[2 + aa][0]).partial(b)));
        let ratio = det(&scalar_matrix(&v[1])) * det(&fx).recip();
        Ok(vec![sc(det(&scalar_matrix(&v[0])) - ratio)])
    })
}

/// `𝕕_ab = (∂_t + v·∇)𝕖_ab + 𝕖_cb ∂_a v^c + 𝕖_ac ∂_b v^c` (coordinate
/// basis, identity coframe).
pub fn deformation_rate(strain: &Field, v: &Field) -> Result<Field> {
    check_strain(strain)?;
    Field::combine(&[(strain, 1), (v, 1)], 0, vec![Slot::Down, Slot::Down], |_, x| {
        let e: Vec<Jet> = x[0].iter().map(s).collect();
        let vel: Vec<Jet> = x[1].iter().map(s).collect();
        Ok((0..9)
            .map(|i| {
                let (a, b) = (i / 3, i % 3);
                let mut out = e[i].partial(3);
                for k in 0..3 {
                    out = out + &vel[k] * &e[i].partial(k);
                }
                for c in 0..3 {
                    out = out + &e[c * 3 + b] * &vel[c].partial(a) + &e[a * 3 + c] * &vel[c].partial(b);
                }
                sc(out)
            })
            .collect())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{max_residual, Grid};

    fn pts() -> Vec<Point> {
        Grid::cube(-0.6, 0.8, 4).points()
    }

    fn matrix_at(f: &Field, p: &Point) -> Vec<f64> {
        f.values(p).unwrap().iter().map(|k| k.components()[0]).collect()
    }

    #[test]
    fn dilation() {
        let map = DeformationMap::from_inverse_strs(["x/2", "y/2", "z/2"]).unwrap();
        let g = deformation_gradients(&map, &CoFrame::identity()).unwrap();
        let p = Point::spatial(0.3, -0.2, 0.7);
        let push = matrix_at(&g.push, &p);
        let pull = matrix_at(&g.pull, &p);
        for i in 0..9 {
            let d = if i % 4 == 0 { 1.0 } else { 0.0 };
            assert_eq!(push[i], 0.5 * d);
            assert_eq!(pull[i], 2.0 * d);
        }
        let e = euler_strain(&g).unwrap();
        let sig = isotropic_stress(&e, &MaterialConstants::default()).unwrap();
        let ev = matrix_at(&e, &p);
        let sv = matrix_at(&sig, &p);
        for i in 0..9 {
            let d = if i % 4 == 0 { 1.0 } else { 0.0 };
            assert!((ev[i] - 0.375 * d).abs() < 1e-15);
            assert!((sv[i] - 1.875 * d).abs() < 1e-15);
        }
        let vr = volume_relation_residual(&map, &CoFrame::identity()).unwrap();
        assert!(max_residual(&vr, &pts()).unwrap() < 1e-14);
    }

    #[test]
    fn forward_map_matches_inverse() {
        let fwd = DeformationMap::from_forward_strs(["x + 0.3*y", "y + 0.1*sin(z)", "z + 0.05*x^2"]).unwrap();
        let p = Point::spatial(0.4, -0.3, 0.2);
        let g = deformation_gradients(&fwd, &CoFrame::identity()).unwrap();
        // pull-back is the Jacobian of the forward map at X(p)
        let xs: Vec<f64> = fwd.inverse().iter().map(|f| f.value(&p).unwrap().components()[0]).collect();
        let pull = matrix_at(&g.pull, &p);
        let expect = [1.0, 0.3, 0.0, 0.0, 1.0, 0.1 * xs[2].cos(), 0.1 * xs[0], 0.0, 1.0];
        for i in 0..9 {
            assert!((pull[i] - expect[i]).abs() < 1e-12, "{i}: {} vs {}", pull[i], expect[i]);
        }
        let vr = volume_relation_residual(&fwd, &CoFrame::identity()).unwrap();
        assert!(max_residual(&vr, &pts()).unwrap() < 1e-10);
    }

    #[test]
    fn newton_failure_is_reported() {
        let fwd = DeformationMap::from_forward_strs(["x^2 + 1", "y", "z"]).unwrap();
        let err = fwd.inverse()[0].value(&Point::spatial(0.0, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::NewtonFailure(..) | Error::SingularDeformation(..)));
    }

    #[test]
    fn stiffness_path_agrees() {
        let e = Field::from_exprs(
            0,
            vec![Slot::Down, Slot::Down],
            ["x", "0.2*y", "z^2", "0.2*y", "x*y", "0.1", "z^2", "0.1", "sin(x)"]
                .iter()
                .map(|t| vec![Expr::parse(t).unwrap()])
                .collect(),
            Strategy::Symbolic,
        )
        .unwrap();
        let mat = MaterialConstants {
            lambda: 1.7,
            mu: 0.6,
            ..Default::default()
        };
        let a = isotropic_stress(&e, &mat).unwrap();
        let b = stiffness_stress(&e, &mat).unwrap();
        assert!(max_residual(&a.sub(&b).unwrap(), &pts()).unwrap() < 1e-12);
        let bad = MaterialConstants { kappa: 0.1, ..mat };
        assert!(matches!(isotropic_stress(&e, &bad), Err(Error::AnisotropyNotSupported(_))));
    }

    #[test]
    fn conservation_scenarios() {
        let rho = Field::parse_scalar("exp(-3*t)").unwrap();
        let v = Field::vector(["x", "y", "z"]).unwrap();
        let r = mass_conservation_residual(&rho, &v).unwrap();
        assert!(max_residual(&r, &pts()).unwrap() < 1e-14);
        // σ = −(x+y+z)δ balances the body force (1, 1, 1)
        let sigma = Field::from_exprs(
            0,
            vec![Slot::Up, Slot::Up],
            (0..9)
                .map(|i| vec![Expr::parse(if i % 4 == 0 { "-(x+y+z)" } else { "0" }).unwrap()])
                .collect(),
            Strategy::Symbolic,
        )
        .unwrap();
        let res = cauchy_motion_residual(
            &Field::constant_scalar(1.0),
            &Field::vector(["0", "0", "0"]).unwrap(),
            &Field::vector(["1", "1", "1"]).unwrap(),
            &sigma,
            &CoFrame::identity(),
        )
        .unwrap();
        assert!(max_residual(&res, &pts()).unwrap() < 1e-14);
    }

    #[test]
    fn rate_of_time_linear_strain() {
        let e = Field::from_exprs(
            0,
            vec![Slot::Down, Slot::Down],
            (0..9)
                .map(|i| vec![Expr::parse(if i % 4 == 0 { "t" } else { "0" }).unwrap()])
                .collect(),
            Strategy::Symbolic,
        )
        .unwrap();
        let d = deformation_rate(&e, &Field::vector(["0", "0", "0"]).unwrap()).unwrap();
        let v = matrix_at(&d, &Point::new(0.1, 0.2, 0.3, 0.7));
        for i in 0..9 {
            assert_eq!(v[i], if i % 4 == 0 { 1.0 } else { 0.0 });
        }
    }
}
