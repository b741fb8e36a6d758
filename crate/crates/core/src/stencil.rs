//! Configuration equations: moment-matching linear systems over lifted
//! neighbor coordinates, solved by the minimal-norm pseudo-inverse.
//!
//! Two families are used. The five-row first-order system matches the rows
//! `x, y, xy, x^2 - y^2, 1` against `(0, 0, 0, 0, 1)` and feeds the
//! normalized Laplacian formula `2 sum a_j (f_j - f_0) / sum a_j x_j^2`.
//! The general degree-k system matches every scaled monomial
//! `x^(d-m) y^m / ((d-m)! m!)`, `1 <= d <= k`, against an arbitrary target
//! and yields one-shot derivative functionals and jet coefficients.
//!
//! Coordinates are pre-scaled by the largest neighbor radius before
//! solving; the solution set is unchanged (the scaling only conditions the
//! least-squares problem) and targets are rescaled accordingly.

use crate::linalg;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Normalized per-row residual above which a solve is rejected and the
/// caller is asked to enlarge the neighborhood.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Largest ring numerator callers should retry before giving up.
pub const MAX_RING: u32 = 8;

#[derive(Debug, Error)]
pub enum StencilError {
    #[error("{got} points provided, at least {need} required")]
    TooFewPoints { need: usize, got: usize },
    #[error("configuration system unsolvable (residual {residual:.3e}); enlarge the neighborhood")]
    RankDeficient { residual: f64 },
    #[error("normalizer sum a_j x_j^2 vanishes; enlarge the neighborhood")]
    ZeroNormalizer,
    #[error("value count {values} does not match weight count {weights}")]
    LengthMismatch { weights: usize, values: usize },
    #[error("target length {got} does not match coefficient count {need} for degree {degree}")]
    BadTarget {
        degree: usize,
        need: usize,
        got: usize,
    },
}

impl StencilError {
    /// True for failures that a larger neighborhood can repair.
    pub fn wants_larger_neighborhood(&self) -> bool {
        matches!(
            self,
            StencilError::TooFewPoints { .. }
                | StencilError::RankDeficient { .. }
                | StencilError::ZeroNormalizer
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilKind {
    /// First-order Laplacian weights; apply divides by the normalizer.
    LaplaceFirstOrder,
    /// Same weights, used in the product-rule form for the weighted
    /// divergence.
    ProductRule,
    /// Degree-k moment weights; apply is a plain weighted difference sum.
    MomentGeneral,
}

/// Moment-matched coefficients for one vertex.
#[derive(Debug, Clone)]
pub struct StencilWeights {
    pub weights: Vec<f64>,
    /// `sum a_j x_j^2` for the normalized kinds, 1 for pre-normalized ones.
    pub normalizer: f64,
    pub kind: StencilKind,
    /// Largest normalized violation of the moment constraints.
    pub residual: f64,
}

/// Monomial exponents (d - m, m) in the fixed enumeration order:
/// d = 1..=k, m = 0..=d.
pub fn moment_indices(degree: usize) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity(coefficient_count(degree));
    for d in 1..=degree {
        for m in 0..=d {
            out.push(((d - m) as u32, m as u32));
        }
    }
    out
}

/// Number of coefficients of a degree-k expansion without the constant:
/// (k+1)(k+2)/2 - 1.
pub fn coefficient_count(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2 - 1
}

/// Right-hand side for the degree-k system: one entry per monomial in
/// [`moment_indices`] order.
#[derive(Debug, Clone)]
pub struct MomentTarget {
    pub degree: usize,
    pub target: Vec<f64>,
}

impl MomentTarget {
    pub fn new(degree: usize, target: Vec<f64>) -> Result<Self, StencilError> {
        let need = coefficient_count(degree);
        if degree < 2 || target.len() != need || target.iter().all(|&t| t == 0.0) {
            return Err(StencilError::BadTarget {
                degree,
                need,
                got: target.len(),
            });
        }
        Ok(Self { degree, target })
    }

    /// Unit target on the monomial (d - m, m): the resulting weights read
    /// off the fitted Taylor coefficient e_{d,m}.
    pub fn unit(degree: usize, d: u32, m: u32) -> Result<Self, StencilError> {
        let idx = moment_indices(degree)
            .iter()
            .position(|&(dd, mm)| dd == d - m && mm == m)
            .ok_or(StencilError::BadTarget {
                degree,
                need: coefficient_count(degree),
                got: 0,
            })?;
        let mut target = vec![0.0; coefficient_count(degree)];
        target[idx] = 1.0;
        Self::new(degree, target)
    }

    /// Ones on the x^2/2 and y^2/2 rows: a one-shot degree-k Laplacian.
    pub fn laplacian(degree: usize) -> Result<Self, StencilError> {
        let mut target = vec![0.0; coefficient_count(degree)];
        for (i, &(p, q)) in moment_indices(degree).iter().enumerate() {
            if (p, q) == (2, 0) || (p, q) == (0, 2) {
                target[i] = 1.0;
            }
        }
        Self::new(degree, target)
    }
}

fn local_radius(coords: &[[f64; 2]]) -> f64 {
    coords
        .iter()
        .map(|c| (c[0] * c[0] + c[1] * c[1]).sqrt())
        .fold(0.0, f64::max)
}

/// Worst per-row violation of `m x = rhs`, each row normalized by its own
/// magnitude. Rows far below the global matrix scale are measured against
/// a fraction of that scale instead, so numerically nil rows (an all-zero
/// mixed moment, say) cannot inflate the residual.
fn normalized_residual(m: &DMatrix<f64>, rhs: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let violation = m * x - rhs;
    let global = m.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1e-300);
    let mut residual = 0.0f64;
    for r in 0..m.nrows() {
        let row_scale = (0..m.ncols())
            .map(|c| m[(r, c)].abs())
            .fold(rhs[r].abs(), f64::max)
            .max(1e-3 * global);
        residual = residual.max(violation[r].abs() / row_scale);
    }
    residual
}

/// Solve `m x = rhs`, record the worst normalized row violation, and
/// reject above [`RESIDUAL_TOL`].
fn solve_checked(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<(Vec<f64>, f64), StencilError> {
    let (x, _) = linalg::min_norm_solve(m, rhs);
    let residual = normalized_residual(m, rhs, &x);
    if residual > RESIDUAL_TOL {
        return Err(StencilError::RankDeficient { residual });
    }
    Ok((x.iter().copied().collect(), residual))
}

fn first_order_system(coords: &[[f64; 2]]) -> (DMatrix<f64>, DVector<f64>) {
    let r = local_radius(coords).max(1e-300);
    let n = coords.len();
    let mut m = DMatrix::zeros(5, n);
    for (j, c) in coords.iter().enumerate() {
        let (x, y) = (c[0] / r, c[1] / r);
        m[(0, j)] = x;
        m[(1, j)] = y;
        m[(2, j)] = x * y;
        m[(3, j)] = x * x - y * y;
        m[(4, j)] = 1.0;
    }
    let rhs = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 1.0]);
    (m, rhs)
}

fn first_order_stencil(
    coords: &[[f64; 2]],
    kind: StencilKind,
) -> Result<StencilWeights, StencilError> {
    if coords.len() < 5 {
        return Err(StencilError::TooFewPoints {
            need: 5,
            got: coords.len(),
        });
    }
    let (m, rhs) = first_order_system(coords);
    let (weights, residual) = solve_checked(&m, &rhs)?;
    let normalizer: f64 = weights
        .iter()
        .zip(coords)
        .map(|(&a, c)| a * c[0] * c[0])
        .sum();
    let magnitude: f64 = weights
        .iter()
        .zip(coords)
        .map(|(&a, c)| a.abs() * c[0] * c[0])
        .sum();
    if normalizer.abs() <= 1e-12 * magnitude.max(1e-300) {
        return Err(StencilError::ZeroNormalizer);
    }
    Ok(StencilWeights {
        weights,
        normalizer,
        kind,
        residual,
    })
}

/// First-order Laplacian weights from the five-row configuration system.
pub fn laplace_stencil(coords: &[[f64; 2]]) -> Result<StencilWeights, StencilError> {
    first_order_stencil(coords, StencilKind::LaplaceFirstOrder)
}

/// Product-rule weights: the identical system, kept as a distinct kind for
/// the weighted-divergence assembly.
pub fn product_stencil(coords: &[[f64; 2]]) -> Result<StencilWeights, StencilError> {
    first_order_stencil(coords, StencilKind::ProductRule)
}

/// Scaled degree-k moment system shared by one-shot stencils and jet fits.
///
/// Rows follow [`moment_indices`]; the pseudo-inverse is computed once so
/// that many targets (or all unit targets at once) reuse it.
pub struct MomentSystem {
    degree: usize,
    n_points: usize,
    radius: f64,
    matrix: DMatrix<f64>,
    pinv: DMatrix<f64>,
    rank: usize,
}

impl MomentSystem {
    pub fn new(coords: &[[f64; 2]], degree: usize) -> Result<Self, StencilError> {
        let rows = coefficient_count(degree);
        if coords.len() < rows {
            return Err(StencilError::TooFewPoints {
                need: rows,
                got: coords.len(),
            });
        }
        let radius = local_radius(coords).max(1e-300);
        let indices = moment_indices(degree);
        let mut matrix = DMatrix::zeros(rows, coords.len());
        for (j, c) in coords.iter().enumerate() {
            let (x, y) = (c[0] / radius, c[1] / radius);
            for (r, &(p, q)) in indices.iter().enumerate() {
                matrix[(r, j)] = x.powi(p as i32) * y.powi(q as i32)
                    / (factorial(p) * factorial(q));
            }
        }
        let (pinv, rank) = linalg::pseudo_inverse(&matrix);
        Ok(Self {
            degree,
            n_points: coords.len(),
            radius,
            matrix,
            pinv,
            rank,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// True when every unit target is reachable (full row rank).
    pub fn full_rank(&self) -> bool {
        self.rank == self.matrix.nrows()
    }

    /// Minimal-norm weights matching `target`.
    pub fn solve(&self, target: &MomentTarget) -> Result<StencilWeights, StencilError> {
        if target.degree != self.degree {
            return Err(StencilError::BadTarget {
                degree: self.degree,
                need: coefficient_count(self.degree),
                got: target.target.len(),
            });
        }
        // Rescale targets into the normalized coordinates: a degree-d row
        // of the matrix shrinks by radius^d, so the target does too.
        let indices = moment_indices(self.degree);
        let scaled: Vec<f64> = target
            .target
            .iter()
            .zip(&indices)
            .map(|(&t, &(p, q))| t / self.radius.powi((p + q) as i32))
            .collect();
        let rhs = DVector::from_vec(scaled);
        let x = &self.pinv * &rhs;
        let residual = normalized_residual(&self.matrix, &rhs, &x);
        if residual > RESIDUAL_TOL {
            return Err(StencilError::RankDeficient { residual });
        }
        Ok(StencilWeights {
            weights: x.iter().copied().collect(),
            normalizer: 1.0,
            kind: StencilKind::MomentGeneral,
            residual,
        })
    }

    /// All fitted Taylor coefficients e_{d,m} of the sample differences
    /// `delta[j] = f(x_j, y_j) - f(0, 0)` at once, in [`moment_indices`]
    /// order. Equivalent to applying every unit-target stencil.
    pub fn fit_coefficients(&self, delta: &[f64]) -> Result<Vec<f64>, StencilError> {
        if !self.full_rank() {
            return Err(StencilError::RankDeficient { residual: f64::NAN });
        }
        if delta.len() != self.n_points {
            return Err(StencilError::LengthMismatch {
                weights: self.n_points,
                values: delta.len(),
            });
        }
        let d = DVector::from_column_slice(delta);
        let scaled = self.pinv.transpose() * d;
        // scaled entries are coefficients of the radius-normalized basis
        Ok(moment_indices(self.degree)
            .iter()
            .zip(scaled.iter())
            .map(|(&(p, q), &e)| e / self.radius.powi((p + q) as i32))
            .collect())
    }

    /// Worst l-inf misfit of the fitted expansion against the samples.
    pub fn fit_residual(&self, coefficients: &[f64], delta: &[f64]) -> f64 {
        let indices = moment_indices(self.degree);
        let mut worst = 0.0f64;
        for j in 0..self.n_points {
            let mut value = 0.0;
            for (r, &(p, q)) in indices.iter().enumerate() {
                // matrix holds the scaled monomials; undo the row scaling
                value += coefficients[r] * self.matrix[(r, j)]
                    * self.radius.powi((p + q) as i32);
            }
            worst = worst.max((value - delta[j]).abs());
        }
        worst
    }
}

/// One-shot degree-k stencil for an arbitrary moment target.
pub fn moment_stencil(
    coords: &[[f64; 2]],
    target: &MomentTarget,
) -> Result<StencilWeights, StencilError> {
    MomentSystem::new(coords, target.degree)?.solve(target)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Evaluate a Laplacian-style stencil:
/// `2 sum w_j (v_j - center) / normalizer` for the normalized kinds,
/// `sum w_j (v_j - center)` for general moment weights.
pub fn apply_laplace_stencil(
    w: &StencilWeights,
    values: &[f64],
    center: f64,
) -> Result<f64, StencilError> {
    if values.len() != w.weights.len() {
        return Err(StencilError::LengthMismatch {
            weights: w.weights.len(),
            values: values.len(),
        });
    }
    let sum: f64 = w
        .weights
        .iter()
        .zip(values)
        .map(|(&a, &v)| a * (v - center))
        .sum();
    Ok(match w.kind {
        StencilKind::LaplaceFirstOrder | StencilKind::ProductRule => 2.0 * sum / w.normalizer,
        StencilKind::MomentGeneral => sum,
    })
}

/// Evaluate the product-rule form
/// `sum w_j (f_j - f_0)(g_j + g_0) / normalizer`, which approximates
/// `grad g . grad f + g laplace f` at the origin.
pub fn apply_product_stencil(
    w: &StencilWeights,
    f_values: &[f64],
    f_center: f64,
    g_values: &[f64],
    g_center: f64,
) -> Result<f64, StencilError> {
    if f_values.len() != w.weights.len() || g_values.len() != w.weights.len() {
        return Err(StencilError::LengthMismatch {
            weights: w.weights.len(),
            values: f_values.len().max(g_values.len()),
        });
    }
    let sum: f64 = w
        .weights
        .iter()
        .zip(f_values.iter().zip(g_values))
        .map(|(&b, (&f, &g))| b * (f - f_center) * (g + g_center))
        .sum();
    Ok(sum / w.normalizer)
}
