//! Seeded random inputs shared by the integration tests.

#![allow(dead_code)]

use defectgeo::defects::DefectFields;
use defectgeo::geometry::CoFrame;
use defectgeo::Point;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn coef(r: &mut ChaCha8Rng, scale: f64) -> String {
    format!("{:.3}", r.gen_range(-scale..scale))
}

/// Polynomial of total degree ≤ 2 in x, y, z with coefficients in
/// `(-scale, scale)`.
pub fn poly(r: &mut ChaCha8Rng, scale: f64) -> String {
    let monomials = ["1", "x", "y", "z", "x*y", "y*z", "x*z", "x^2", "y^2", "z^2"];
    let mut terms = Vec::new();
    for m in monomials {
        if r.gen_bool(0.6) {
            terms.push(format!("({})*{m}", coef(r, scale)));
        }
    }
    if terms.is_empty() {
        coef(r, scale)
    } else {
        terms.join(" + ")
    }
}

/// Smooth expression of nesting depth ≤ `depth`, well defined on all of R³
/// (logarithms and quotients are shifted away from their singularities).
pub fn expr(r: &mut ChaCha8Rng, depth: usize) -> String {
    let vars = ["x", "y", "z"];
    if depth == 0 || r.gen_bool(0.25) {
        return if r.gen_bool(0.7) {
            format!("{}*{}", coef(r, 2.0), vars.choose(r).unwrap())
        } else {
            coef(r, 2.0)
        };
    }
    let a = expr(r, depth - 1);
    match r.gen_range(0..11) {
        0 => format!("({a}) + ({})", expr(r, depth - 1)),
        1 => format!("({a}) - ({})", expr(r, depth - 1)),
        2 => format!("({a})*({})", expr(r, depth - 1)),
        3 => format!("({a})/(2 + sin({}))", expr(r, depth - 1)),
        4 => format!("sin({a})"),
        5 => format!("cos({a})"),
        6 => format!("exp(0.3*sin({a}))"),
        7 => format!("ln(2 + cos({a}))"),
        8 => format!("sqrt(1 + ({a})^2)"),
        9 => format!("({a})^{}", r.gen_range(2..4)),
        _ => format!("-({a})"),
    }
}

/// Triad close to a rotation-free identity: invertible on `[-1, 1]³`.
pub fn triad_rows(r: &mut ChaCha8Rng) -> [[String; 3]; 3] {
    std::array::from_fn(|a| {
        std::array::from_fn(|b| {
            let p = poly(r, 0.08);
            if a == b {
                format!("1 + {p}")
            } else {
                p
            }
        })
    })
}

pub fn coframe(r: &mut ChaCha8Rng) -> CoFrame {
    let rows = triad_rows(r);
    let refs: [[&str; 3]; 3] = std::array::from_fn(|a| std::array::from_fn(|b| rows[a][b].as_str()));
    CoFrame::from_rows(refs).unwrap()
}

/// Random smooth defect densities.
pub fn defects(r: &mut ChaCha8Rng) -> DefectFields {
    let v: Vec<String> = (0..10).map(|_| poly(r, 0.6)).collect();
    DefectFields::from_strs(
        [&v[0], &v[1], &v[2]],
        [&v[3], &v[4], &v[5]],
        [&v[6], &v[7], &v[8]],
        &v[9],
    )
    .unwrap()
}

pub fn points(r: &mut ChaCha8Rng, n: usize, half_width: f64) -> Vec<Point> {
    (0..n)
        .map(|_| {
            Point::spatial(
                r.gen_range(-half_width..half_width),
                r.gen_range(-half_width..half_width),
                r.gen_range(-half_width..half_width),
            )
        })
        .collect()
}

/// Non-comment lines of a file under `tests/data`.
pub fn data_lines(name: &str) -> Vec<String> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name);
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}
