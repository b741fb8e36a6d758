//! Eigenpairs of the assembled (nonsymmetric) operators.
//!
//! The solver runs block subspace iteration on the shift-inverted matrix
//! `(A - sigma I)^{-1}` using the banded factorization from [`crate::sparse`],
//! so the smallest-magnitude eigenvalues of `A` dominate. Ritz values come
//! from the projected small matrix; Ritz vectors are realified and every
//! reported pair is certified by a plain matrix–vector residual that does
//! not depend on the solver internals.

use crate::operator::SparseOperator;
use crate::sparse::{BandedLu, CsrMatrix};
use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

type C64 = Complex<f64>;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("requested {count} eigenpairs from a dimension-{dim} operator")]
    CountTooLarge { count: usize, dim: usize },
    #[error("reference basis and computed vectors have mismatched dimensions")]
    DimensionMismatch,
    #[error("empty vector set")]
    Empty,
}

/// Residual bound certified for every reported pair.
pub const RESIDUAL_BOUND: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct EigenCluster {
    /// Representative value (cluster mean of real parts).
    pub value: f64,
    /// Indices into the eigenvalue list.
    pub members: Vec<usize>,
    pub multiplicity: usize,
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    /// Sorted by |lambda| ascending.
    pub eigenvalues: Vec<C64>,
    /// Real parts of the Ritz vectors, each of unit Euclidean norm.
    pub eigenvectors: Vec<Vec<f64>>,
    /// Imaginary-to-real norm ratio of each Ritz vector before realifying.
    pub im_norms: Vec<f64>,
    /// ||A x - Re(lambda) x||_2 per pair (x has unit norm).
    pub residuals: Vec<f64>,
    pub clusters: Vec<EigenCluster>,
    /// False when the iteration budget ran out; results are then partial.
    pub converged: bool,
    pub im_leakage_max: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Spectral shift; must avoid the spectrum. Dissipative operators have
    /// spectra on the negative half-axis, so a positive shift is safe.
    pub shift: f64,
    pub max_iterations: usize,
    /// Extra subspace columns beyond the requested count.
    pub block_extra: usize,
    pub seed: u64,
    /// Override the adaptive cluster tolerance.
    pub cluster_tol: Option<f64>,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            shift: 1.0,
            max_iterations: 240,
            block_extra: 0, // derived from count when 0
            seed: 0x17_5eed,
            cluster_tol: None,
        }
    }
}

/// The `count` smallest-magnitude eigenpairs of `op` with default options.
pub fn eigenpairs(op: &SparseOperator, count: usize) -> Result<EigenResult, SpectralError> {
    eigenpairs_with(op, count, &EigenOptions::default())
}

pub fn eigenpairs_with(
    op: &SparseOperator,
    count: usize,
    opts: &EigenOptions,
) -> Result<EigenResult, SpectralError> {
    let n = op.dim();
    if count == 0 || count > n {
        return Err(SpectralError::CountTooLarge { count, dim: n });
    }
    let csr = op.to_csr();
    let sigma = opts.shift;
    let shifted = csr.diagonal_shifted(-sigma);
    let lu = BandedLu::factor(&shifted);

    let extra = if opts.block_extra > 0 {
        opts.block_extra
    } else {
        (count / 2).clamp(8, 24)
    };
    let m = (count + extra).min(n);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    orthonormalize(&mut q, &mut rng);

    let mut best: Option<Vec<RitzPair>> = None;
    let mut converged = false;
    for iter in 0..opts.max_iterations {
        // B Q with B = (A - sigma I)^{-1}
        let z: Vec<Vec<f64>> = q.par_iter().map(|col| lu.solve(col)).collect();

        let check = iter % 4 == 3 || iter == opts.max_iterations - 1;
        if check {
            let h = project(&q, &z);
            let mut pairs = ritz_pairs(&h, &q, sigma, &csr);
            pairs.truncate(count);
            let ok = pairs.len() == count
                && pairs.iter().all(|p| p.residual <= RESIDUAL_BOUND * 0.5);
            best = Some(pairs);
            if ok {
                converged = true;
                break;
            }
        }
        q = z;
        orthonormalize(&mut q, &mut rng);
    }

    let pairs = best.expect("at least one Ritz extraction runs");
    let lam_max = pairs
        .iter()
        .map(|p| p.value.norm())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let im_leakage_max = pairs
        .iter()
        .map(|p| p.value.im.abs() / p.value.norm().max(1e-6 * lam_max))
        .fold(0.0, f64::max);

    let values: Vec<f64> = pairs.iter().map(|p| p.value.re).collect();
    let clusters = match opts.cluster_tol {
        Some(tol) => cluster_indexed(&values, |_| tol),
        None => cluster_indexed(&values, adaptive_tol),
    };

    Ok(EigenResult {
        eigenvalues: pairs.iter().map(|p| p.value).collect(),
        eigenvectors: pairs.iter().map(|p| p.vector.clone()).collect(),
        im_norms: pairs.iter().map(|p| p.im_norm).collect(),
        residuals: pairs.iter().map(|p| p.residual).collect(),
        clusters,
        converged,
        im_leakage_max,
    })
}

struct RitzPair {
    value: C64,
    vector: Vec<f64>,
    im_norm: f64,
    residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Two-pass modified Gram–Schmidt; collapsed columns are re-randomized.
fn orthonormalize(block: &mut [Vec<f64>], rng: &mut ChaCha8Rng) {
    let n = block.first().map_or(0, Vec::len);
    for j in 0..block.len() {
        let mut attempts = 0;
        loop {
            for _ in 0..2 {
                let (head, tail) = block.split_at_mut(j);
                let v = &mut tail[0];
                for u in head.iter() {
                    let c = dot(u, v);
                    for (vk, &uk) in v.iter_mut().zip(u) {
                        *vk -= c * uk;
                    }
                }
            }
            let len = norm(&block[j]);
            if len > 1e-12 {
                for x in block[j].iter_mut() {
                    *x /= len;
                }
                break;
            }
            attempts += 1;
            assert!(attempts < 8, "orthonormalization collapsed");
            block[j] = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        }
    }
}

/// H = Q^T Z
fn project(q: &[Vec<f64>], z: &[Vec<f64>]) -> DMatrix<f64> {
    let m = q.len();
    DMatrix::from_fn(m, m, |i, j| dot(&q[i], &z[j]))
}

/// Eigen-decompose the projected matrix, lift to Ritz vectors, realify and
/// certify against the original matrix. Sorted by |lambda| ascending.
fn ritz_pairs(h: &DMatrix<f64>, q: &[Vec<f64>], sigma: f64, csr: &CsrMatrix) -> Vec<RitzPair> {
    let m = h.nrows();
    let n = q.first().map_or(0, Vec::len);
    let thetas = h.complex_eigenvalues();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        thetas[b]
            .norm()
            .partial_cmp(&thetas[a].norm())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let hc = h.map(|x| C64::new(x, 0.0));
    let h_scale = h.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1e-300);
    let close_tol = 1e-6 * h_scale;

    let mut small_vectors: Vec<DVector<C64>> = Vec::with_capacity(m);
    let mut pairs = Vec::with_capacity(m);
    for &idx in &order {
        let theta = thetas[idx];
        // deflate against previously found vectors of nearby Ritz values
        let deflate: Vec<usize> = order
            .iter()
            .take(small_vectors.len())
            .enumerate()
            .filter(|&(_, &other)| (thetas[other] - theta).norm() <= close_tol)
            .map(|(pos, _)| pos)
            .collect();
        let y = small_eigvec(&hc, theta, h_scale, &small_vectors, &deflate);

        // x = Q y, phase-aligned so the real part dominates
        let mut x: Vec<C64> = vec![C64::new(0.0, 0.0); n];
        for (qc, &yk) in q.iter().zip(y.iter()) {
            for (xk, &qk) in x.iter_mut().zip(qc) {
                *xk += yk * qk;
            }
        }
        let lead = x
            .iter()
            .cloned()
            .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
            .unwrap_or(C64::new(1.0, 0.0));
        let phase = lead / lead.norm().max(1e-300);
        let mut re: Vec<f64> = Vec::with_capacity(n);
        let mut im_sq = 0.0;
        for xk in &x {
            let aligned = xk * phase.conj();
            re.push(aligned.re);
            im_sq += aligned.im * aligned.im;
        }
        let re_norm = norm(&re).max(1e-300);
        let im_norm = im_sq.sqrt() / re_norm;
        for v in re.iter_mut() {
            *v /= re_norm;
        }

        // Rayleigh quotient of the realified vector, then certification
        let ax = csr.matvec(&re);
        let lambda_re = dot(&re, &ax);
        let residual = ax
            .iter()
            .zip(&re)
            .map(|(&a, &x)| (a - lambda_re * x).powi(2))
            .sum::<f64>()
            .sqrt();
        let lambda_theta = C64::new(sigma, 0.0) + theta.inv();

        small_vectors.push(y);
        pairs.push(RitzPair {
            value: C64::new(lambda_re, lambda_theta.im),
            vector: re,
            im_norm,
            residual,
        });
    }
    pairs.sort_by(|a, b| {
        a.value
            .norm()
            .partial_cmp(&b.value.norm())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    pairs
}

/// Inverse iteration on the complex projected matrix; `deflate` lists
/// previously computed vectors belonging to (numerically) the same Ritz
/// value, which the iterate is kept orthogonal to.
fn small_eigvec(
    hc: &DMatrix<C64>,
    theta: C64,
    scale: f64,
    found: &[DVector<C64>],
    deflate: &[usize],
) -> DVector<C64> {
    let m = hc.nrows();
    let pert = C64::new(1e-13 * scale, 1e-14 * scale);
    let shifted = hc - DMatrix::<C64>::identity(m, m) * (theta + pert);
    let lu = shifted.lu();

    let mut y = DVector::from_fn(m, |i, _| C64::new(1.0 + 0.3 * (i as f64).sin(), 0.0));
    normalize_c(&mut y);
    for _ in 0..3 {
        deflate_against(&mut y, found, deflate);
        y = lu.solve(&y).unwrap_or_else(|| {
            DVector::from_fn(m, |i, _| C64::new((i as f64 + 1.0).cos(), 0.1))
        });
        normalize_c(&mut y);
    }
    deflate_against(&mut y, found, deflate);
    normalize_c(&mut y);
    y
}

fn deflate_against(y: &mut DVector<C64>, found: &[DVector<C64>], deflate: &[usize]) {
    for &k in deflate {
        let u = &found[k];
        let c: C64 = u.iter().zip(y.iter()).map(|(&a, &b)| a.conj() * b).sum();
        for (yi, &ui) in y.iter_mut().zip(u.iter()) {
            *yi -= c * ui;
        }
    }
}

fn normalize_c(y: &mut DVector<C64>) {
    let len = y.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
    for v in y.iter_mut() {
        *v /= C64::new(len, 0.0);
    }
}

/// Adaptive cluster tolerance: at least 0.05, at least 2% of the running
/// cluster mean.
fn adaptive_tol(mean: f64) -> f64 {
    (0.02 * mean.abs()).max(0.05)
}

/// Greedy gap clustering over values sorted ascending: a value joins the
/// current cluster when its gap to the previous value stays within the
/// tolerance.
pub fn cluster_eigenvalues(values: &[f64], tol: f64) -> Vec<EigenCluster> {
    cluster_indexed(values, |_| tol)
}

/// As [`cluster_eigenvalues`] with the adaptive default tolerance.
pub fn cluster_eigenvalues_auto(values: &[f64]) -> Vec<EigenCluster> {
    cluster_indexed(values, adaptive_tol)
}

fn cluster_indexed(values: &[f64], tol_of_mean: impl Fn(f64) -> f64) -> Vec<EigenCluster> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));

    let mut clusters: Vec<EigenCluster> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    let mut sum = 0.0;
    let mut last = f64::NAN;
    for &i in &order {
        let v = values[i];
        let join = !current.is_empty() && {
            let mean = sum / current.len() as f64;
            (v - last).abs() <= tol_of_mean(mean)
        };
        if join {
            current.push(i);
            sum += v;
        } else {
            if !current.is_empty() {
                clusters.push(close_cluster(&current, sum));
            }
            current = vec![i];
            sum = v;
        }
        last = v;
    }
    if !current.is_empty() {
        clusters.push(close_cluster(&current, sum));
    }
    clusters.sort_by(|a, b| {
        a.value
            .abs()
            .partial_cmp(&b.value.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    clusters
}

fn close_cluster(members: &[usize], sum: f64) -> EigenCluster {
    EigenCluster {
        value: sum / members.len() as f64,
        members: members.to_vec(),
        multiplicity: members.len(),
    }
}

/// Worst l-inf distance between each computed vector (normalized to unit
/// sup norm) and its least-squares projection onto the reference span.
pub fn subspace_align_error(
    reference: &[Vec<f64>],
    computed: &[Vec<f64>],
) -> Result<f64, SpectralError> {
    if reference.is_empty() || computed.is_empty() {
        return Err(SpectralError::Empty);
    }
    let n = reference[0].len();
    if reference.iter().chain(computed).any(|v| v.len() != n) {
        return Err(SpectralError::DimensionMismatch);
    }
    let k = reference.len();
    let basis = DMatrix::from_fn(n, k, |i, j| reference[j][i]);
    let svd = basis.clone().svd(true, true);

    let mut worst = 0.0f64;
    for phi in computed {
        let sup = phi.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1e-300);
        let target = DVector::from_fn(n, |i, _| phi[i] / sup);
        let beta = svd.solve(&target, 1e-12).expect("SVD solve");
        let projected = &basis * beta;
        let err = (0..n)
            .map(|i| (projected[i] - target[i]).abs())
            .fold(0.0f64, f64::max);
        worst = worst.max(err);
    }
    Ok(worst)
}

#[derive(Serialize)]
struct EigenJson<'a> {
    eigenvalues: Vec<f64>,
    clusters: &'a [EigenCluster],
    residual_max: f64,
    im_leakage_max: f64,
    converged: bool,
}

/// Serialize the summary JSON: real eigenvalues, clusters, residual and
/// imaginary-leakage maxima.
pub fn eigen_json(result: &EigenResult) -> String {
    let doc = EigenJson {
        eigenvalues: result.eigenvalues.iter().map(|c| c.re).collect(),
        clusters: &result.clusters,
        residual_max: result.residuals.iter().cloned().fold(0.0, f64::max),
        im_leakage_max: result.im_leakage_max,
        converged: result.converged,
    };
    serde_json::to_string_pretty(&doc).expect("eigen summary serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, Model, NeighborhoodSpec};
    use crate::operator::{assemble_laplacian, read_matrix_market};

    /// Triangular test matrix: eigenvalues are the diagonal entries.
    fn triangular_operator(diag: &[f64]) -> SparseOperator {
        let n = diag.len();
        let mut text = String::from("%%MatrixMarket matrix coordinate real general\n");
        let mut entries = Vec::new();
        for i in 0..n {
            entries.push((i + 1, i + 1, diag[i]));
            if i + 1 < n {
                entries.push((i + 1, i + 2, 0.3));
            }
        }
        text.push_str(&format!("{n} {n} {}\n", entries.len()));
        for (r, c, v) in entries {
            text.push_str(&format!("{r} {c} {v}\n"));
        }
        read_matrix_market(text.as_bytes()).unwrap()
    }

    #[test]
    fn triangular_matrix_eigenvalues_recovered() {
        let diag = [-0.5, -2.0, -3.5, -8.0, -13.0, -21.0];
        let op = triangular_operator(&diag);
        let result = eigenpairs(&op, 4).unwrap();
        assert!(result.converged);
        let got: Vec<f64> = result.eigenvalues.iter().map(|c| c.re).collect();
        for (g, w) in got.iter().zip(&diag) {
            assert!((g - w).abs() < 1e-8, "{g} vs {w}");
        }
        for &r in &result.residuals {
            assert!(r <= RESIDUAL_BOUND);
        }
    }

    #[test]
    fn residuals_match_independent_recomputation() {
        let op = triangular_operator(&[-1.0, -2.0, -4.0, -7.0, -11.0]);
        let result = eigenpairs(&op, 3).unwrap();
        let csr = op.to_csr();
        for (i, x) in result.eigenvectors.iter().enumerate() {
            let lambda = result.eigenvalues[i].re;
            let ax = csr.matvec(x);
            let r: f64 = ax
                .iter()
                .zip(x)
                .map(|(&a, &xi)| (a - lambda * xi).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!((r - result.residuals[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_sphere_has_constant_zero_mode() {
        let mesh = generate_mesh(Model::Sphere, 0.45).unwrap();
        let op = assemble_laplacian(&mesh, &NeighborhoodSpec::one_ring()).unwrap();
        let result = eigenpairs(&op, 5).unwrap();
        assert!(result.converged);
        let zero = &result.eigenvalues[0];
        assert!(zero.norm() < 1e-6, "zero mode at {zero}");
        let x = &result.eigenvectors[0];
        let mean: f64 = x.iter().sum::<f64>() / x.len() as f64;
        for &v in x {
            assert!((v - mean).abs() < 1e-6, "zero mode must be constant");
        }
    }

    #[test]
    fn coarse_sphere_first_cluster_multiplicity() {
        let mesh = generate_mesh(Model::Sphere, 0.45).unwrap();
        let op = assemble_laplacian(&mesh, &NeighborhoodSpec::one_ring()).unwrap();
        let result = eigenpairs(&op, 5).unwrap();
        // zero mode + triple cluster near -2
        let nonzero: Vec<&EigenCluster> = result
            .clusters
            .iter()
            .filter(|c| c.value.abs() > 0.5)
            .collect();
        assert_eq!(nonzero[0].multiplicity, 3, "clusters: {:?}", result.clusters);
        assert!((nonzero[0].value - -2.0).abs() < 0.2);
        assert!(result.im_leakage_max <= 1e-3);
    }

    #[test]
    fn clustering_trivial_examples() {
        let one = cluster_eigenvalues(&[-2.01, -2.0, -1.99], 0.05);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].multiplicity, 3);
        assert!((one[0].value - -2.0).abs() < 1e-12);

        let three = cluster_eigenvalues(&[0.0, -2.0, -6.0], 0.05);
        assert_eq!(three.len(), 3);
        assert!(three.iter().all(|c| c.multiplicity == 1));
        // sorted by |value| ascending
        assert_eq!(three[0].value, 0.0);
        assert_eq!(three[1].value, -2.0);
        assert_eq!(three[2].value, -6.0);
    }

    #[test]
    fn alignment_error_vanishes_in_span() {
        let reference = vec![
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.0, 1.0, -1.0, 0.5],
        ];
        let computed = vec![reference[0]
            .iter()
            .zip(&reference[1])
            .map(|(&a, &b)| 2.0 * a - 0.7 * b)
            .collect::<Vec<f64>>()];
        let e = subspace_align_error(&reference, &computed).unwrap();
        assert!(e < 1e-10, "error {e}");

        let constant = vec![vec![1.0; 4]];
        let e2 = subspace_align_error(&constant, &vec![vec![3.0; 4]]).unwrap();
        assert!(e2 < 1e-12);
    }

    #[test]
    fn alignment_error_detects_orthogonal_component() {
        let reference = vec![vec![1.0, 0.0, 0.0]];
        let computed = vec![vec![0.0, 1.0, 0.0]];
        let e = subspace_align_error(&reference, &computed).unwrap();
        assert!(e > 0.9);
    }

    #[test]
    fn count_larger_than_dim_rejected() {
        let op = triangular_operator(&[-1.0, -2.0]);
        assert!(matches!(
            eigenpairs(&op, 5),
            Err(SpectralError::CountTooLarge { .. })
        ));
    }
}
