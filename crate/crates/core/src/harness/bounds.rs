//! Numeric checks of the spider distinguisher bounds.
//!
//! Each inequality is evaluated on a grid of `(q, d, n, L)` values, points on
//! the relevant curve and random label-difference vectors `a = x1 - x2` with
//! entries in {-1, 0, 1}. The checks are:
//!
//! * `a`: `|(1-q^d) w^d + q^d| >= exp(-2 pi^2 q^d (1-q^d) d^2 / L^2)` on the arc
//!   `|theta| <= pi/L` of the unit circle.
//! * `b`: `|A~(w0)| >= (1-q) (1-2 alpha)/(1-alpha) alpha^(l* mod d)` at the
//!   parity-dependent point `w0`, with `alpha = |q + (1-q) w0|`.
//! * `c`: `|A~(w)| <= 1 / ((1-q)(1-|w|))` inside the unit disc.
//! * `d`: `1 - |w| >= (theta - theta0)^4 / 64` on the shifted half-disc boundary
//!   `w = 1/2 + h_L + e^{i theta}/2`, `theta0 <= theta <= pi/2`.
//! * `e`: `sup_arc |A~| >= (1-2q)^L q^(dL) n^(-L)` for `q < 1/2`, compared in
//!   log space.
//! * `f`: `max_j |E1_j - E2_j| >= sup_arc |A| / n`, linking the bounds back to
//!   trace means.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::counts::random_bits;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::spider_recon::{factored_generating_function, first_nonzero, generating_function, MeanOperator};
use crate::trees::SpiderShape;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundsGrid {
    pub q_values: Vec<f64>,
    pub depths: Vec<usize>,
    /// Numbers of paths; `n = paths * d`.
    pub paths: Vec<usize>,
    pub l_values: Vec<usize>,
    /// Points per curve.
    pub grid_points: usize,
    pub label_vectors: usize,
    pub seed: u64,
    /// Relative slack for floating point comparisons.
    pub tolerance: f64,
}

impl Default for BoundsGrid {
    fn default() -> Self {
        BoundsGrid {
            q_values: vec![0.1, 0.2, 0.3, 0.45, 0.65],
            depths: vec![20, 21],
            paths: vec![1, 2, 3],
            l_values: vec![20, 40],
            grid_points: 1000,
            label_vectors: 50,
            seed: 2024,
            tolerance: 1e-12,
        }
    }
}

impl BoundsGrid {
    pub fn from_json(s: &str) -> Result<Self> {
        let grid: BoundsGrid = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_values.is_empty() || self.depths.is_empty() || self.paths.is_empty() || self.l_values.is_empty() {
            return Err(Error::Config("every grid axis needs at least one value".into()));
        }
        if self.grid_points < 2 || self.label_vectors < 1 {
            return Err(Error::Config("need at least 2 grid points and 1 label vector".into()));
        }
        for &q in &self.q_values {
            if !(q > 0.0 && q < 0.7) {
                return Err(Error::Hypothesis(format!("q = {q} outside (0, 0.7)")));
            }
        }
        for &d in &self.depths {
            if d < 20 {
                return Err(Error::Hypothesis(format!("d = {d} below 20")));
            }
        }
        if self.paths.contains(&0) {
            return Err(Error::Config("paths must be positive".into()));
        }
        for &l in &self.l_values {
            if l < 20 {
                return Err(Error::Hypothesis(format!("L = {l} below 20")));
            }
            if shifted_disc(l).h > 0.1 {
                return Err(Error::Hypothesis(format!("h_L above 1/10 at L = {l}")));
            }
            for &q in &self.q_values {
                for &d in &self.depths {
                    let qd = q.powi(d as i32);
                    let x = qd * (1.0 - qd) * (d as f64).powi(2) * PI * PI / (l * l) as f64;
                    if x > 0.9 {
                        return Err(Error::Hypothesis(format!(
                            "q^d (1-q^d) d^2 theta^2 = {x} exceeds 0.9 at q = {q}, d = {d}, L = {l}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityResult {
    pub id: char,
    pub points: usize,
    pub violations: usize,
    /// Smallest `lhs - rhs` (in log space for `e`), oriented so that
    /// negative means violated.
    pub worst_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub results: Vec<InequalityResult>,
}

impl BoundsReport {
    pub fn violations(&self) -> usize {
        self.results.iter().map(|r| r.violations).sum()
    }

    pub fn get(&self, id: char) -> Option<&InequalityResult> {
        self.results.iter().find(|r| r.id == id)
    }
}

#[derive(Clone, Copy, Debug)]
struct Tally {
    points: usize,
    violations: usize,
    worst: f64,
}

impl Tally {
    fn new() -> Self {
        Tally { points: 0, violations: 0, worst: f64::INFINITY }
    }

    /// Records `lhs >= rhs` with relative slack `tol`.
    fn geq(&mut self, lhs: f64, rhs: f64, tol: f64) {
        self.points += 1;
        let margin = lhs - rhs;
        self.worst = self.worst.min(margin);
        if margin < -tol * rhs.abs().max(1.0) {
            self.violations += 1;
        }
    }

    fn result(self, id: char) -> InequalityResult {
        InequalityResult { id, points: self.points, violations: self.violations, worst_margin: self.worst }
    }
}

/// Geometry of the disc `D_L = D_{1/2}(1/2) + h_L` through `e^{i pi/L}`.
#[derive(Clone, Copy, Debug)]
pub struct ShiftedDisc {
    pub h: f64,
    pub theta0: f64,
}

pub fn shifted_disc(l: usize) -> ShiftedDisc {
    let phi = PI / l as f64;
    let centre = phi.cos() - (phi.cos().powi(2) - 0.75).sqrt();
    ShiftedDisc { h: centre - 0.5, theta0: phi.sin().atan2(phi.cos() - centre) }
}

/// The point `w0` used for the lower bound at a single point.
pub fn lba0_point(d: usize, q: f64) -> Complex64 {
    if d % 2 == 1 {
        Complex64::new(-q, 0.0)
    } else {
        Complex64::from_polar(q, PI * (d - 1) as f64 / d as f64)
    }
}

fn arc_points(l: usize, count: usize) -> Vec<Complex64> {
    let half = PI / l as f64;
    (0..count).map(|i| Complex64::from_polar(1.0, -half + 2.0 * half * i as f64 / (count - 1) as f64)).collect()
}

/// Points strictly inside the unit disc on a sunflower spiral.
fn disc_points(count: usize) -> Vec<Complex64> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let r = 0.999 * ((i as f64 + 0.5) / count as f64).sqrt();
            Complex64::from_polar(r, golden * i as f64)
        })
        .collect()
}

fn difference_vectors(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let (x1, x2) = (random_bits(n, &mut rng), random_bits(n, &mut rng));
        let a: Vec<f64> = x1.iter().zip(&x2).map(|(&u, &v)| u as i8 as f64 - v as i8 as f64).collect();
        if first_nonzero(&a).is_some() {
            out.push(a);
        }
    }
    out
}

pub fn verify_bounds(grid: &BoundsGrid) -> Result<BoundsReport> {
    grid.validate()?;
    let tol = grid.tolerance;
    let [mut ta, mut tb, mut tc, mut td, mut te, mut tf] = [Tally::new(); 6];

    for &l in &grid.l_values {
        let disc = shifted_disc(l);
        for i in 0..grid.grid_points {
            let theta = disc.theta0 + (PI / 2.0 - disc.theta0) * i as f64 / (grid.grid_points - 1) as f64;
            let w = Complex64::new(0.5 + disc.h, 0.0) + Complex64::from_polar(0.5, theta);
            td.geq(1.0 - w.norm(), (theta - disc.theta0).powi(4) / 64.0, tol);
        }
    }

    let inside = disc_points(grid.grid_points);
    for (qi, &q) in grid.q_values.iter().enumerate() {
        for (di, &d) in grid.depths.iter().enumerate() {
            let qd = q.powi(d as i32);
            for &l in &grid.l_values {
                let rhs = (-2.0 * PI * PI * qd * (1.0 - qd) * (d * d) as f64 / (l * l) as f64).exp();
                for w in arc_points(l, grid.grid_points) {
                    ta.geq((qd + (1.0 - qd) * w.powi(d as i32)).norm(), rhs, tol);
                }
            }
            for &paths in &grid.paths {
                let shape = SpiderShape { n: paths * d, d };
                let n = shape.n;
                let seed = grid.seed ^ ((qi as u64) << 32 | (di as u64) << 16 | paths as u64);
                let op = MeanOperator::spider(&shape, q)?;
                for a in difference_vectors(n, grid.label_vectors, seed) {
                    let ell = first_nonzero(&a).expect("nonzero");

                    let w0 = lba0_point(d, q);
                    let alpha = (q + (1.0 - q) * w0).norm();
                    let bound = (1.0 - q) * (1.0 - 2.0 * alpha) / (1.0 - alpha) * alpha.powi((ell % d) as i32);
                    tb.geq(factored_generating_function(&a, &shape, q, w0)?.norm(), bound, tol);

                    for &w in &inside {
                        let lhs = factored_generating_function(&a, &shape, q, w)?.norm();
                        let rhs = 1.0 / ((1.0 - q) * (1.0 - w.norm()));
                        tc.geq(rhs, lhs, tol);
                    }

                    let gap = op.apply(&a).0.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                    for &l in &grid.l_values {
                        let arc = arc_points(l, grid.grid_points);
                        let mut sup_tilde = 0.0f64;
                        let mut sup_a = 0.0f64;
                        for &w in &arc {
                            sup_tilde = sup_tilde.max(factored_generating_function(&a, &shape, q, w)?.norm());
                            sup_a = sup_a.max(generating_function(&a, &shape, q, w).norm());
                        }
                        if q < 0.5 {
                            let lf = l as f64;
                            let log_rhs = lf * (1.0 - 2.0 * q).ln() + (d as f64) * lf * q.ln() - lf * (n as f64).ln();
                            te.geq(sup_tilde.ln(), log_rhs, tol);
                        }
                        tf.geq(gap, sup_a / n as f64, tol);
                    }
                }
            }
        }
    }

    Ok(BoundsReport {
        results: vec![ta.result('a'), tb.result('b'), tc.result('c'), td.result('d'), te.result('e'), tf.result('f')],
    })
}
