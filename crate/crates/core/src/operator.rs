//! Global sparse operators assembled from per-vertex stencils: the
//! Laplace–Beltrami matrix (the diagonal normalizer times the
//! configuration mask) and the h-weighted divergence form, plus diffusion
//! time stepping.
//!
//! Rows are stored in difference form: the action of row `i` on a field
//! `u` is `sum_j w_ij (u_j - u_i) + extra_i u_i`, which annihilates
//! constants exactly when `extra_i = 0`. The materialized matrix has
//! off-diagonal entries `w_ij` and diagonal `-sum_j w_ij + extra_i`.

use crate::lifting::{lift_neighborhood, tangent_frame, LiftError};
use crate::mesh::{neighborhood_with_ring, MeshError, NeighborhoodSpec, TriMesh};
use crate::sparse::{BandedLu, CsrMatrix};
use crate::stencil::{laplace_stencil, product_stencil, StencilError, MAX_RING};
use rayon::prelude::*;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("vertex {vertex}: {source}")]
    Stencil {
        vertex: usize,
        source: StencilError,
    },
    #[error("vertex {vertex}: {source}")]
    Lift { vertex: usize, source: LiftError },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("field length {got} does not match operator dimension {want}")]
    DimensionMismatch { want: usize, got: usize },
    #[error("time step {dt} is above the explicit stability bound {bound}")]
    UnstableTimeStep { dt: f64, bound: f64 },
    #[error("diffusion diverged at step {step} (sup norm {norm:.3e})")]
    Diverged { step: usize, norm: f64 },
    #[error("implicit solve residual {residual:.3e} above tolerance {tol:.3e}")]
    SolveTolerance { residual: f64, tol: f64 },
    #[error("matrix market parse failure at line {line}: {message}")]
    MatrixMarket { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-vertex scalar samples; length must match the operator dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn constant(mesh: &TriMesh, c: f64) -> Self {
        Self {
            values: vec![c; mesh.n_vertices()],
        }
    }

    pub fn from_fn<F: Fn(&nalgebra::Point3<f64>) -> f64>(mesh: &TriMesh, f: F) -> Self {
        Self {
            values: (0..mesh.n_vertices()).map(|v| f(&mesh.vertex(v))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    None,
    DirichletZero,
}

/// Assembly provenance of one row.
#[derive(Debug, Clone, Copy)]
pub struct RowMeta {
    /// Ring numerator actually used after enlargement.
    pub ring: u32,
    /// Stencil residual.
    pub residual: f64,
    /// Row normalizer (omega_i).
    pub normalizer: f64,
}

#[derive(Debug, Clone)]
pub struct OpRow {
    /// Off-diagonal column indices, ascending.
    pub cols: Vec<usize>,
    pub weights: Vec<f64>,
    /// Deviation of the diagonal from `-sum(weights)`.
    pub diag_extra: f64,
}

impl OpRow {
    fn sorted(cols: Vec<usize>, weights: Vec<f64>, diag_extra: f64) -> Self {
        let mut order: Vec<usize> = (0..cols.len()).collect();
        order.sort_unstable_by_key(|&k| cols[k]);
        Self {
            cols: order.iter().map(|&k| cols[k]).collect(),
            weights: order.iter().map(|&k| weights[k]).collect(),
            diag_extra,
        }
    }

    /// Materialized diagonal entry.
    pub fn diagonal(&self) -> f64 {
        self.diag_extra - self.weights.iter().sum::<f64>()
    }
}

/// Row-compressed square operator over mesh vertices (or the interior
/// subset under Dirichlet reduction).
#[derive(Debug, Clone)]
pub struct SparseOperator {
    dim: usize,
    rows: Vec<OpRow>,
    row_meta: Vec<RowMeta>,
    boundary_mode: BoundaryMode,
    /// Dimension before reduction.
    full_dim: usize,
    /// Reduced index -> original vertex id, present under reduction.
    index_map: Option<Vec<usize>>,
}

impl SparseOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn full_dim(&self) -> usize {
        self.full_dim
    }

    pub fn boundary_mode(&self) -> BoundaryMode {
        self.boundary_mode
    }

    pub fn rows(&self) -> &[OpRow] {
        &self.rows
    }

    pub fn row_meta(&self) -> &[RowMeta] {
        &self.row_meta
    }

    /// Reduced-to-original vertex ids under Dirichlet reduction.
    pub fn index_map(&self) -> Option<&[usize]> {
        self.index_map.as_deref()
    }

    /// Apply to a field. Row arithmetic runs in ascending column order.
    pub fn apply(&self, u: &ScalarField) -> Result<ScalarField, OperatorError> {
        if u.len() != self.dim {
            return Err(OperatorError::DimensionMismatch {
                want: self.dim,
                got: u.len(),
            });
        }
        let values = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let ui = u.values[i];
                let mut acc = 0.0;
                for (&c, &w) in row.cols.iter().zip(&row.weights) {
                    acc += w * (u.values[c] - ui);
                }
                acc + row.diag_extra * ui
            })
            .collect();
        Ok(ScalarField::new(values))
    }

    /// Materialize as CSR, diagonal included.
    pub fn to_csr(&self) -> CsrMatrix {
        let mut rows = Vec::with_capacity(self.dim);
        for (i, row) in self.rows.iter().enumerate() {
            let mut entries: Vec<(usize, f64)> = Vec::with_capacity(row.cols.len() + 1);
            let diag = row.diagonal();
            let mut placed = false;
            for (&c, &w) in row.cols.iter().zip(&row.weights) {
                if !placed && c > i {
                    entries.push((i, diag));
                    placed = true;
                }
                entries.push((c, w));
            }
            if !placed {
                entries.push((i, diag));
            }
            rows.push(entries);
        }
        CsrMatrix::from_rows(self.dim, rows)
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.diagonal().abs())
            .fold(0.0, f64::max)
    }

    /// Remove boundary rows and columns; removed columns keep contributing
    /// to the diagonal so the reduced action equals the full action on
    /// fields vanishing at the boundary.
    pub fn dirichlet_reduced(&self, boundary: &[bool]) -> SparseOperator {
        assert_eq!(boundary.len(), self.dim, "boundary flags must match dim");
        let keep: Vec<usize> = (0..self.dim).filter(|&i| !boundary[i]).collect();
        let mut remap = vec![usize::MAX; self.dim];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let rows = keep
            .iter()
            .map(|&old| {
                let row = &self.rows[old];
                let mut cols = Vec::new();
                let mut weights = Vec::new();
                let mut dropped = 0.0;
                for (&c, &w) in row.cols.iter().zip(&row.weights) {
                    if boundary[c] {
                        dropped += w;
                    } else {
                        cols.push(remap[c]);
                        weights.push(w);
                    }
                }
                OpRow {
                    cols,
                    weights,
                    diag_extra: row.diag_extra - dropped,
                }
            })
            .collect();
        let row_meta = keep.iter().map(|&old| self.row_meta[old]).collect();
        let index_map = match &self.index_map {
            Some(map) => keep.iter().map(|&old| map[old]).collect(),
            None => keep.clone(),
        };
        SparseOperator {
            dim: keep.len(),
            rows,
            row_meta,
            boundary_mode: BoundaryMode::DirichletZero,
            full_dim: self.full_dim,
            index_map: Some(index_map),
        }
    }
}

/// Build rows in parallel from a per-vertex closure; `skip` rows come out
/// empty.
pub(crate) fn assemble_rows<F>(
    n: usize,
    skip: &[bool],
    build: F,
) -> Result<SparseOperator, OperatorError>
where
    F: Fn(usize) -> Result<(Vec<usize>, Vec<f64>, RowMeta), OperatorError> + Sync,
{
    let built: Result<Vec<(OpRow, RowMeta)>, OperatorError> = (0..n)
        .into_par_iter()
        .map(|i| {
            if skip[i] {
                return Ok((
                    OpRow {
                        cols: Vec::new(),
                        weights: Vec::new(),
                        diag_extra: 0.0,
                    },
                    RowMeta {
                        ring: 0,
                        residual: 0.0,
                        normalizer: 0.0,
                    },
                ));
            }
            let (cols, weights, meta) = build(i)?;
            Ok((OpRow::sorted(cols, weights, 0.0), meta))
        })
        .collect();
    let (rows, row_meta) = built?.into_iter().unzip();
    Ok(SparseOperator {
        dim: n,
        rows,
        row_meta,
        boundary_mode: BoundaryMode::None,
        full_dim: n,
        index_map: None,
    })
}

/// Run the enlarge-on-failure protocol: try rings from `spec` upward until
/// the stencil accepts or [`MAX_RING`] is exhausted.
pub(crate) fn with_enlargement<T>(
    mesh: &TriMesh,
    vertex: usize,
    spec: &NeighborhoodSpec,
    mut attempt: impl FnMut(&[usize]) -> Result<T, StencilError>,
) -> Result<(T, u32), OperatorError> {
    let mut ring = spec.ring_numerator;
    loop {
        let (ids, used) = neighborhood_with_ring(
            mesh,
            vertex,
            &NeighborhoodSpec {
                ring_numerator: ring,
                min_count: spec.min_count,
            },
        )?;
        match attempt(&ids) {
            Ok(value) => return Ok((value, used)),
            Err(e) if e.wants_larger_neighborhood() && used < MAX_RING => ring = used + 1,
            Err(e) => return Err(OperatorError::Stencil { vertex, source: e }),
        }
    }
}

/// Assemble the first-order Laplace–Beltrami operator: row i applies
/// `omega_i sum_j a_ij (u_j - u_i)` with `omega_i = 2 / sum_j a_ij x_ij^2`.
pub fn assemble_laplacian(
    mesh: &TriMesh,
    spec: &NeighborhoodSpec,
) -> Result<SparseOperator, OperatorError> {
    assemble_laplacian_rows(mesh, spec, &vec![false; mesh.n_vertices()])
}

/// Dirichlet variant: boundary rows are never assembled and the operator
/// is reduced to the interior index set.
pub fn assemble_laplacian_dirichlet(
    mesh: &TriMesh,
    spec: &NeighborhoodSpec,
) -> Result<SparseOperator, OperatorError> {
    let boundary: Vec<bool> = (0..mesh.n_vertices())
        .map(|v| mesh.is_boundary(v))
        .collect();
    let full = assemble_laplacian_rows(mesh, spec, &boundary)?;
    Ok(full.dirichlet_reduced(&boundary))
}

fn assemble_laplacian_rows(
    mesh: &TriMesh,
    spec: &NeighborhoodSpec,
    skip: &[bool],
) -> Result<SparseOperator, OperatorError> {
    assemble_rows(mesh.n_vertices(), skip, |i| {
        let frame = tangent_frame(mesh, i)
            .map_err(|source| OperatorError::Lift { vertex: i, source })?;
        let ((cols, weights, residual, omega), used) =
            with_enlargement(mesh, i, spec, |ids| {
                let polygon = lift_neighborhood(mesh, &frame, ids, None);
                let stencil = laplace_stencil(&polygon.coords)?;
                let omega = 2.0 / stencil.normalizer;
                let weights: Vec<f64> =
                    stencil.weights.iter().map(|&a| omega * a).collect();
                Ok((ids.to_vec(), weights, stencil.residual, omega))
            })?;
        Ok((
            cols,
            weights,
            RowMeta {
                ring: used,
                residual,
                normalizer: omega,
            },
        ))
    })
}

/// Assemble the h-weighted divergence form: row i applies
/// `omega_i sum_j b_ij (u_j - u_i)(h_j + h_i)` with
/// `omega_i = 1 / sum_j b_ij x_ij^2`.
pub fn assemble_weighted_divgrad(
    mesh: &TriMesh,
    h: &ScalarField,
    spec: &NeighborhoodSpec,
) -> Result<SparseOperator, OperatorError> {
    if h.len() != mesh.n_vertices() {
        return Err(OperatorError::DimensionMismatch {
            want: mesh.n_vertices(),
            got: h.len(),
        });
    }
    assemble_rows(mesh.n_vertices(), &vec![false; mesh.n_vertices()], |i| {
        let frame = tangent_frame(mesh, i)
            .map_err(|source| OperatorError::Lift { vertex: i, source })?;
        let ((cols, weights, residual, omega), used) =
            with_enlargement(mesh, i, spec, |ids| {
                let polygon = lift_neighborhood(mesh, &frame, ids, None);
                let stencil = product_stencil(&polygon.coords)?;
                let omega = 1.0 / stencil.normalizer;
                let hi = h.values[i];
                let weights: Vec<f64> = stencil
                    .weights
                    .iter()
                    .zip(ids)
                    .map(|(&b, &j)| omega * b * (h.values[j] + hi))
                    .collect();
                Ok((ids.to_vec(), weights, stencil.residual, omega))
            })?;
        Ok((
            cols,
            weights,
            RowMeta {
                ring: used,
                residual,
                normalizer: omega,
            },
        ))
    })
}

/// Apply `op` to `u`; thin wrapper kept for symmetry with the assembly
/// functions.
pub fn apply_operator(op: &SparseOperator, u: &ScalarField) -> Result<ScalarField, OperatorError> {
    op.apply(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScheme {
    Explicit,
    Implicit,
}

/// March `u_t = op u + f` for `steps` steps of size `dt`.
///
/// Explicit: `u <- u + dt (op u + f)`, guarded by the stability bound
/// `dt < 2 / max |diag|`. Implicit: `(I - dt op) u_next = u + dt f`,
/// solved by a banded factorization with iterative refinement to 1e-10.
pub fn diffusion_solve(
    op: &SparseOperator,
    u0: &ScalarField,
    f: &ScalarField,
    dt: f64,
    steps: usize,
    scheme: TimeScheme,
) -> Result<ScalarField, OperatorError> {
    if u0.len() != op.dim() || f.len() != op.dim() {
        return Err(OperatorError::DimensionMismatch {
            want: op.dim(),
            got: u0.len().max(f.len()),
        });
    }
    let sup0 = norm_inf(&u0.values).max(1.0);
    let guard = 1e6 * sup0;

    match scheme {
        TimeScheme::Explicit => {
            let bound = 2.0 / op.max_abs_diagonal().max(1e-300);
            if dt >= bound {
                return Err(OperatorError::UnstableTimeStep { dt, bound });
            }
            let mut u = u0.clone();
            for step in 0..steps {
                let du = op.apply(&u)?;
                for ((x, &d), &src) in u.values.iter_mut().zip(&du.values).zip(&f.values) {
                    *x += dt * (d + src);
                }
                let norm = norm_inf(&u.values);
                if !norm.is_finite() || norm > guard {
                    return Err(OperatorError::Diverged { step, norm });
                }
            }
            Ok(u)
        }
        TimeScheme::Implicit => {
            // I - dt op, materialized
            let csr = op.to_csr().scaled(-dt).plus_identity();
            let lu = BandedLu::factor(&csr);
            let tol = 1e-10;
            let mut u = u0.values.clone();
            for step in 0..steps {
                let rhs: Vec<f64> = u
                    .iter()
                    .zip(&f.values)
                    .map(|(&x, &src)| x + dt * src)
                    .collect();
                let mut x = lu.solve(&rhs);
                // one refinement pass, then certify
                let mut residual = csr.residual_norm(&x, &rhs);
                if residual > tol * norm_inf(&rhs).max(1.0) {
                    let r = csr.residual_vector(&x, &rhs);
                    let dx = lu.solve(&r);
                    for (xi, di) in x.iter_mut().zip(&dx) {
                        *xi += di;
                    }
                    residual = csr.residual_norm(&x, &rhs);
                }
                if residual > tol * norm_inf(&rhs).max(1.0) {
                    return Err(OperatorError::SolveTolerance { residual, tol });
                }
                u = x;
                let norm = norm_inf(&u);
                if !norm.is_finite() || norm > guard {
                    return Err(OperatorError::Diverged { step, norm });
                }
            }
            Ok(ScalarField::new(u))
        }
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
}

/// Write the materialized operator as MatrixMarket coordinate text,
/// entries sorted by (row, column).
pub fn write_matrix_market<W: Write>(
    op: &SparseOperator,
    mut writer: W,
) -> Result<(), OperatorError> {
    let csr = op.to_csr();
    writeln!(writer, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(writer, "{} {} {}", csr.dim(), csr.dim(), csr.nnz())?;
    for i in 0..csr.dim() {
        for &(j, v) in csr.row(i) {
            writeln!(writer, "{} {} {:.17e}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}

/// Read a square MatrixMarket coordinate matrix back into an operator.
pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<SparseOperator, OperatorError> {
    let mm_err = |line: usize, message: &str| OperatorError::MatrixMarket {
        line,
        message: message.to_string(),
    };
    let mut lines = reader.lines().enumerate();
    let (ln, header) = match lines.next() {
        Some((i, l)) => (i + 1, l?),
        None => return Err(mm_err(0, "empty stream")),
    };
    if !header.starts_with("%%MatrixMarket matrix coordinate real general") {
        return Err(mm_err(ln, "unsupported MatrixMarket header"));
    }
    let mut dims: Option<usize> = None;
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('%') {
            continue;
        }
        let mut tok = text.split_whitespace();
        if dims.is_none() {
            let m: usize = tok
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| mm_err(i + 1, "bad size line"))?;
            let n: usize = tok
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| mm_err(i + 1, "bad size line"))?;
            if m != n {
                return Err(mm_err(i + 1, "matrix must be square"));
            }
            dims = Some(m);
            continue;
        }
        let r: usize = tok
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| mm_err(i + 1, "bad entry"))?;
        let c: usize = tok
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| mm_err(i + 1, "bad entry"))?;
        let v: f64 = tok
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| mm_err(i + 1, "bad entry"))?;
        if r == 0 || c == 0 {
            return Err(mm_err(i + 1, "indices are 1-based"));
        }
        entries.push((r - 1, c - 1, v));
    }
    let n = dims.ok_or_else(|| mm_err(0, "missing size line"))?;

    let mut offdiag: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut diag = vec![0.0; n];
    for (r, c, v) in entries {
        if r >= n || c >= n {
            return Err(mm_err(0, "entry index out of range"));
        }
        if r == c {
            diag[r] += v;
        } else {
            offdiag[r].push((c, v));
        }
    }
    let rows: Vec<OpRow> = offdiag
        .into_iter()
        .zip(&diag)
        .map(|(mut entries, &d)| {
            entries.sort_unstable_by_key(|&(c, _)| c);
            let weights: Vec<f64> = entries.iter().map(|&(_, v)| v).collect();
            let cols: Vec<usize> = entries.iter().map(|&(c, _)| c).collect();
            let wsum: f64 = weights.iter().sum();
            OpRow {
                cols,
                weights,
                diag_extra: d + wsum,
            }
        })
        .collect();
    Ok(SparseOperator {
        dim: n,
        rows,
        row_meta: vec![
            RowMeta {
                ring: 0,
                residual: 0.0,
                normalizer: 0.0,
            };
            n
        ],
        boundary_mode: BoundaryMode::None,
        full_dim: n,
        index_map: None,
    })
}
