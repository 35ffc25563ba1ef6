//! Grids, residual norms and quadrature.
//!
//! Every reduction collects per-point results in grid order before folding,
//! so results are bit-identical regardless of the thread count.

use rayon::prelude::*;

use crate::exterior::KForm;
use crate::field::{Field, Point};
use crate::Result;

/// Axis-aligned box `[lo, hi]` sampled at `n` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub n: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            lo: [-1.0; 3],
            hi: [1.0; 3],
            n: 9,
        }
    }
}

impl Grid {
    pub fn cube(min: f64, max: f64, n: usize) -> Grid {
        Grid {
            lo: [min; 3],
            hi: [max; 3],
            n,
        }
    }

    fn node(&self, axis: usize, i: usize) -> f64 {
        if self.n <= 1 {
            return 0.5 * (self.lo[axis] + self.hi[axis]);
        }
        self.lo[axis] + (self.hi[axis] - self.lo[axis]) * i as f64 / (self.n - 1) as f64
    }

    /// Grid nodes, with z varying fastest.
    pub fn points(&self) -> Vec<Point> {
        let mut out = Vec::with_capacity(self.n.pow(3));
        for i in 0..self.n {
            for j in 0..self.n {
                for k in 0..self.n {
                    out.push(Point::spatial(self.node(0, i), self.node(1, j), self.node(2, k)));
                }
            }
        }
        out
    }
}

/// Largest absolute component over a list of forms.
pub fn max_abs(v: &[KForm<f64>]) -> f64 {
    v.iter().fold(0.0, |m, f| m.max(f.max_abs()))
}

/// Evaluates `f` at every point in parallel, keeping point order.
pub fn par_map<T: Send>(points: &[Point], f: impl Fn(&Point) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    points.par_iter().map(f).collect()
}

/// Largest absolute residual component over the points.
pub fn max_residual(residual: &Field, points: &[Point]) -> Result<f64> {
    let v = par_map(points, |p| Ok(max_abs(&residual.values(p)?)))?;
    Ok(v.into_iter().fold(0.0, f64::max))
}

/// `max_p |residual(p)| / (1 + max |input(p)|)`: residual normalised by the
/// size of the inputs at the same point.
pub fn normalized_residual(residual: &Field, inputs: &[&Field], points: &[Point]) -> Result<f64> {
    let v = par_map(points, |p| {
        let r = max_abs(&residual.values(p)?);
        let mut scale: f64 = 0.0;
        for f in inputs {
            scale = scale.max(max_abs(&f.values(p)?));
        }
        Ok(r / (1.0 + scale))
    })?;
    Ok(v.into_iter().fold(0.0, f64::max))
}

/// Midpoint rule over `[lo, hi]` with `n` cells per axis.
pub fn midpoint_box(
    lo: [f64; 3],
    hi: [f64; 3],
    n: usize,
    f: impl Fn(&Point) -> Result<f64> + Sync + Send,
) -> Result<f64> {
    let h: [f64; 3] = std::array::from_fn(|a| (hi[a] - lo[a]) / n as f64);
    let centres = cell_centres(lo, h, n);
    let vals = par_map(&centres, f)?;
    Ok(vals.into_iter().sum::<f64>() * h[0] * h[1] * h[2])
}

fn cell_centres(lo: [f64; 3], h: [f64; 3], n: usize) -> Vec<Point> {
    let mut out = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out.push(Point::spatial(
                    lo[0] + (i as f64 + 0.5) * h[0],
                    lo[1] + (j as f64 + 0.5) * h[1],
                    lo[2] + (k as f64 + 0.5) * h[2],
                ));
            }
        }
    }
    out
}

/// Midpoint rule over the ball: cells of the bounding cube whose centres lie
/// inside contribute their full volume.
pub fn midpoint_ball(centre: [f64; 3], radius: f64, n: usize, f: impl Fn(&Point) -> Result<f64> + Sync + Send) -> Result<f64> {
    let lo = centre.map(|c| c - radius);
    let h = [2.0 * radius / n as f64; 3];
    let inside: Vec<Point> = cell_centres(lo, h, n)
        .into_iter()
        .filter(|p| {
            let d = [p.x - centre[0], p.y - centre[1], p.z - centre[2]];
            d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= radius * radius
        })
        .collect();
    let vals = par_map(&inside, f)?;
    Ok(vals.into_iter().sum::<f64>() * h[0] * h[1] * h[2])
}

/// Richardson extrapolation for a second-order rule: `(4 I_2n − I_n) / 3`.
pub fn richardson(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes_include_bounds() {
        let g = Grid::default();
        let pts = g.points();
        assert_eq!(pts.len(), 729);
        assert_eq!(pts[0], Point::spatial(-1.0, -1.0, -1.0));
        assert_eq!(pts[728], Point::spatial(1.0, 1.0, 1.0));
    }

    #[test]
    fn midpoint_is_exact_for_linear() {
        let v = midpoint_box([0.0; 3], [1.0; 3], 4, |p| Ok(p.x + 2.0 * p.y)).unwrap();
        assert!((v - 1.5).abs() < 1e-14);
    }

    #[test]
    fn ball_volume_converges() {
        let v = midpoint_ball([0.0; 3], 1.0, 64, |_| Ok(1.0)).unwrap();
        assert!((v - 4.0 * std::f64::consts::PI / 3.0).abs() < 0.01 * 4.19);
    }
}
