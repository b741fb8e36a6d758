//! Convergence studies: error metrics, experimental orders of convergence,
//! and the study runner that reproduces the eigenvalue and invariant
//! ladders on the generated test surfaces.

pub mod analytic;
mod report;

pub use report::{ConvergenceReport, ReportRow};

use crate::highorder::{self, fit_height, invariants_from_fit, ring_spec_for_degree, HighOrderError};
use crate::mesh::{generate_mesh, MeshError, Model, NeighborhoodSpec, TriMesh};
use crate::operator::{
    assemble_laplacian, assemble_laplacian_dirichlet, OperatorError, ScalarField,
};
use crate::spectral::{self, EigenResult, SpectralError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    HighOrder(#[from] HighOrderError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("empty vertex mask")]
    EmptyMask,
    #[error("reference vanishes at masked vertex {0}")]
    ZeroReference(usize),
    #[error("error and size ladders must have equal length >= 2")]
    BadLadder,
    #[error("sizes must be positive and strictly decreasing")]
    BadSizes,
    #[error("negative error entry {0}")]
    NegativeError(f64),
    #[error("metric {metric} is not defined for model {model:?}")]
    UnsupportedStudy { metric: String, model: Model },
    #[error("ladder point (size {size}): {source}")]
    LadderPoint {
        size: f64,
        #[source]
        source: Box<HarnessError>,
    },
    #[error("the first-order pipeline has no degree-k variant of this metric")]
    NeedsHighOrder,
}

/// Worst relative deviation over the masked vertices.
pub fn linf_relative_error(
    numeric: &ScalarField,
    reference: &ScalarField,
    mask: &[bool],
) -> Result<f64, HarnessError> {
    assert_eq!(numeric.len(), reference.len());
    assert_eq!(numeric.len(), mask.len());
    let mut worst = None;
    for i in 0..numeric.len() {
        if !mask[i] {
            continue;
        }
        let r = reference.values[i];
        if r == 0.0 {
            return Err(HarnessError::ZeroReference(i));
        }
        let e = (numeric.values[i] - r).abs() / r.abs();
        worst = Some(worst.map_or(e, |w: f64| w.max(e)));
    }
    worst.ok_or(HarnessError::EmptyMask)
}

/// Interior vertices whose reference value is at least 1e-8 of the largest
/// reference magnitude.
pub fn reference_mask(mesh: &TriMesh, reference: &ScalarField) -> Vec<bool> {
    let max = reference
        .values
        .iter()
        .fold(0.0f64, |a, &v| a.max(v.abs()));
    let floor = 1e-8 * max;
    (0..mesh.n_vertices())
        .map(|v| !mesh.is_boundary(v) && reference.values[v].abs() >= floor)
        .collect()
}

/// Pairwise experimental orders of convergence
/// `log(e1/e2) / log(h1/h2)` for adjacent ladder points. A zero error
/// produces an infinite sentinel rather than an error.
pub fn eoc(errors: &[f64], sizes: &[f64]) -> Result<Vec<f64>, HarnessError> {
    if errors.len() != sizes.len() || errors.len() < 2 {
        return Err(HarnessError::BadLadder);
    }
    if sizes.windows(2).any(|w| w[1] >= w[0]) || sizes.iter().any(|&s| s <= 0.0) {
        return Err(HarnessError::BadSizes);
    }
    if let Some(&bad) = errors.iter().find(|&&e| e < 0.0) {
        return Err(HarnessError::NegativeError(bad));
    }
    Ok(errors
        .windows(2)
        .zip(sizes.windows(2))
        .map(|(e, h)| {
            if e[1] == 0.0 {
                f64::INFINITY
            } else if e[0] == 0.0 {
                f64::NEG_INFINITY
            } else {
                (e[0] / e[1]).ln() / (h[0] / h[1]).ln()
            }
        })
        .collect())
}

/// Discretization pipeline selector: the one-ring first-order operator or
/// the degree-k jet pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    FirstOrder,
    HighOrder { degree: usize },
}

impl Pipeline {
    pub fn degree(&self) -> Option<usize> {
        match self {
            Pipeline::FirstOrder => None,
            Pipeline::HighOrder { degree } => Some(*degree),
        }
    }
}

/// What a study measures at each ladder point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// |representative of the nth nonzero cluster - exact| on the sphere,
    /// or |i-th Dirichlet eigenvalue - exact| on the hemisphere.
    EigenvalueError { index: usize },
    /// l-inf relative error of the discrete Laplacian of the model field.
    LaplacianField,
    /// l-inf distance of fitted unit normals to exact normals.
    NormalError,
    /// l-inf relative error of the Gaussian curvature.
    GaussianError,
    /// l-inf relative error of |mean curvature|.
    MeanError,
    /// Subspace alignment error E_n of the nth sphere eigencluster.
    SubspaceError { index: usize },
}

impl Metric {
    pub fn name(&self) -> String {
        match self {
            Metric::EigenvalueError { index } => format!("eigenvalue_{index}"),
            Metric::LaplacianField => "laplacian_field".into(),
            Metric::NormalError => "normal".into(),
            Metric::GaussianError => "gaussian".into(),
            Metric::MeanError => "mean".into(),
            Metric::SubspaceError { index } => format!("subspace_{index}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub model: Model,
    pub metric: Metric,
    pub pipeline: Pipeline,
    /// Target mesh sizes, strictly decreasing.
    pub sizes: Vec<f64>,
    /// Ring numerator override; defaults to the pipeline's natural ring.
    pub ring: Option<u32>,
}

pub fn model_name(model: &Model) -> &'static str {
    match model {
        Model::Sphere => "sphere",
        Model::Hemisphere => "hemisphere",
        Model::Torus { .. } => "torus",
        Model::Dumbbell => "dumbbell",
        Model::Wave => "wave",
    }
}

/// Run the full ladder for one configuration. Every ladder point is a pure
/// function of the configuration, so identical configurations reproduce
/// identical reports.
pub fn convergence_study(config: &StudyConfig) -> Result<ConvergenceReport, HarnessError> {
    if config.sizes.len() < 2 {
        return Err(HarnessError::BadLadder);
    }
    let mut rows = Vec::with_capacity(config.sizes.len());
    for &target in &config.sizes {
        let point = ladder_point(config, target).map_err(|source| HarnessError::LadderPoint {
            size: target,
            source: Box::new(source),
        })?;
        rows.push(point);
    }
    let sizes: Vec<f64> = rows.iter().map(|r: &ReportRow| r.size).collect();
    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let eoc = eoc(&errors, &sizes)?;
    Ok(ConvergenceReport {
        study: format!("{}-{}", model_name(&config.model), config.metric.name()),
        model: model_name(&config.model).to_string(),
        metric: config.metric.name(),
        degree: config.pipeline.degree(),
        ring: effective_ring(config),
        rows,
        eoc,
    })
}

fn effective_ring(config: &StudyConfig) -> u32 {
    config.ring.unwrap_or(match config.pipeline {
        Pipeline::FirstOrder => 2,
        Pipeline::HighOrder { degree } => (degree as u32).max(2),
    })
}

fn spec_for(config: &StudyConfig) -> NeighborhoodSpec {
    let base = match config.pipeline {
        Pipeline::FirstOrder => NeighborhoodSpec::one_ring(),
        Pipeline::HighOrder { degree } => ring_spec_for_degree(degree),
    };
    match config.ring {
        Some(ring) => NeighborhoodSpec::new(ring, base.min_count),
        None => base,
    }
}

fn ladder_point(config: &StudyConfig, target: f64) -> Result<ReportRow, HarnessError> {
    let mesh = generate_mesh(config.model, target)?;
    let size = mesh.mesh_size()?;
    let error = match config.metric {
        Metric::EigenvalueError { index } => eigenvalue_error(config, &mesh, index)?,
        Metric::LaplacianField => laplacian_field_error(config, &mesh)?,
        Metric::NormalError | Metric::GaussianError | Metric::MeanError => {
            invariant_error(config, &mesh)?
        }
        Metric::SubspaceError { index } => subspace_error(config, &mesh, index)?,
    };
    Ok(ReportRow { size, error })
}

fn assemble(config: &StudyConfig, mesh: &TriMesh, dirichlet: bool) -> Result<crate::operator::SparseOperator, HarnessError> {
    let spec = spec_for(config);
    let op = match (config.pipeline, dirichlet) {
        (Pipeline::FirstOrder, false) => assemble_laplacian(mesh, &spec)?,
        (Pipeline::FirstOrder, true) => assemble_laplacian_dirichlet(mesh, &spec)?,
        (Pipeline::HighOrder { degree }, false) => {
            highorder::assemble_laplacian(mesh, degree, &spec)?
        }
        (Pipeline::HighOrder { degree }, true) => {
            highorder::assemble_laplacian_dirichlet(mesh, degree, &spec)?
        }
    };
    Ok(op)
}

fn eigen_for(
    config: &StudyConfig,
    mesh: &TriMesh,
    count: usize,
    dirichlet: bool,
) -> Result<EigenResult, HarnessError> {
    let op = assemble(config, mesh, dirichlet)?;
    Ok(spectral::eigenpairs(&op, count)?)
}

/// Representative of the nth nonzero cluster; clusters with |value| below
/// 0.5 are the numerical zero modes of closed surfaces.
pub fn nonzero_cluster<'a>(
    result: &'a EigenResult,
    index: usize,
) -> Option<&'a spectral::EigenCluster> {
    result
        .clusters
        .iter()
        .filter(|c| c.value.abs() > 0.5)
        .nth(index - 1)
}

fn eigenvalue_error(
    config: &StudyConfig,
    mesh: &TriMesh,
    index: usize,
) -> Result<f64, HarnessError> {
    match config.model {
        Model::Sphere => {
            let count = (index + 1) * (index + 1);
            let result = eigen_for(config, mesh, count, false)?;
            let cluster =
                nonzero_cluster(&result, index).ok_or(HarnessError::UnsupportedStudy {
                    metric: config.metric.name(),
                    model: config.model,
                })?;
            Ok((cluster.value - analytic::sphere_eigenvalue(index)).abs())
        }
        Model::Hemisphere => {
            let count = index + 4;
            let result = eigen_for(config, mesh, count, true)?;
            let target = analytic::hemisphere_eigenvalues(index)[index - 1];
            Ok((result.eigenvalues[index - 1].re - target).abs())
        }
        _ => Err(HarnessError::UnsupportedStudy {
            metric: config.metric.name(),
            model: config.model,
        }),
    }
}

fn laplacian_field_error(config: &StudyConfig, mesh: &TriMesh) -> Result<f64, HarnessError> {
    let (field, reference) = match config.model {
        Model::Wave => (
            ScalarField::from_fn(mesh, analytic::wave_field),
            ScalarField::from_fn(mesh, |p| analytic::wave_laplacian_reference(p)),
        ),
        Model::Sphere => (
            ScalarField::from_fn(mesh, |p| p.z),
            ScalarField::from_fn(mesh, |p| -2.0 * p.z),
        ),
        _ => {
            return Err(HarnessError::UnsupportedStudy {
                metric: config.metric.name(),
                model: config.model,
            })
        }
    };
    let op = assemble(config, mesh, false)?;
    let numeric = op.apply(&field)?;
    let mask = reference_mask(mesh, &reference);
    linf_relative_error(&numeric, &reference, &mask)
}

fn invariant_error(config: &StudyConfig, mesh: &TriMesh) -> Result<f64, HarnessError> {
    let degree = match config.pipeline {
        Pipeline::HighOrder { degree } => degree,
        Pipeline::FirstOrder => return Err(HarnessError::NeedsHighOrder),
    };
    let reference: fn(&nalgebra::Point3<f64>) -> (nalgebra::Vector3<f64>, f64, f64) =
        match config.model {
            Model::Sphere => analytic::sphere_reference,
            Model::Torus { .. } => analytic::torus_reference,
            Model::Dumbbell => analytic::dumbbell_reference,
            _ => {
                return Err(HarnessError::UnsupportedStudy {
                    metric: config.metric.name(),
                    model: config.model,
                })
            }
        };
    let spec = spec_for(config);

    // reference magnitudes drive the near-zero mask for relative errors
    let mut ref_values = Vec::with_capacity(mesh.n_vertices());
    for v in 0..mesh.n_vertices() {
        let (_, k, h) = reference(&mesh.vertex(v));
        ref_values.push(match config.metric {
            Metric::GaussianError => k,
            Metric::MeanError => h,
            _ => 1.0,
        });
    }
    let ref_field = ScalarField::new(ref_values);
    let mask = reference_mask(mesh, &ref_field);

    let mut worst = None;
    for v in 0..mesh.n_vertices() {
        if !mask[v] {
            continue;
        }
        let fit = fit_height(mesh, v, degree, &spec)?;
        let inv = invariants_from_fit(&fit)?;
        let (n_exact, k_exact, h_exact) = reference(&mesh.vertex(v));
        let e = match config.metric {
            Metric::NormalError => {
                let d_plus = (inv.normal.into_inner() - n_exact).norm();
                let d_minus = (inv.normal.into_inner() + n_exact).norm();
                d_plus.min(d_minus)
            }
            Metric::GaussianError => (inv.gaussian - k_exact).abs() / k_exact.abs(),
            Metric::MeanError => (inv.mean.abs() - h_exact).abs() / h_exact.abs(),
            _ => unreachable!("invariant_error handles invariant metrics"),
        };
        worst = Some(worst.map_or(e, |w: f64| w.max(e)));
    }
    worst.ok_or(HarnessError::EmptyMask)
}

fn subspace_error(
    config: &StudyConfig,
    mesh: &TriMesh,
    index: usize,
) -> Result<f64, HarnessError> {
    if !matches!(config.model, Model::Sphere) {
        return Err(HarnessError::UnsupportedStudy {
            metric: config.metric.name(),
            model: config.model,
        });
    }
    let count = (index + 1) * (index + 1);
    let result = eigen_for(config, mesh, count, false)?;
    let cluster = nonzero_cluster(&result, index).ok_or(HarnessError::UnsupportedStudy {
        metric: config.metric.name(),
        model: config.model,
    })?;
    let computed: Vec<Vec<f64>> = cluster
        .members
        .iter()
        .map(|&i| result.eigenvectors[i].clone())
        .collect();
    let reference = analytic::sphere_harmonics(index, mesh);
    Ok(spectral::subspace_align_error(&reference, &computed)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linf_relative_error_basics() {
        let mesh = generate_mesh(Model::Sphere, 0.7).unwrap();
        let reference = ScalarField::from_fn(&mesh, |p| 1.0 + p.z * p.z);
        let mask = vec![true; mesh.n_vertices()];
        let same = linf_relative_error(&reference, &reference, &mask).unwrap();
        assert_eq!(same, 0.0);

        let scaled = ScalarField::new(reference.values.iter().map(|v| 1.1 * v).collect());
        let ten_percent = linf_relative_error(&scaled, &reference, &mask).unwrap();
        assert!((ten_percent - 0.1).abs() < 1e-12);
    }

    #[test]
    fn linf_empty_mask_is_error() {
        let mesh = generate_mesh(Model::Sphere, 0.7).unwrap();
        let f = ScalarField::constant(&mesh, 1.0);
        let mask = vec![false; mesh.n_vertices()];
        assert!(matches!(
            linf_relative_error(&f, &f, &mask),
            Err(HarnessError::EmptyMask)
        ));
    }

    #[test]
    fn eoc_known_ratios() {
        assert_eq!(eoc(&[4.0, 1.0], &[2.0, 1.0]).unwrap(), vec![2.0]);
        assert_eq!(eoc(&[8.0, 1.0], &[2.0, 1.0]).unwrap(), vec![3.0]);
        let inf = eoc(&[1.0, 0.0], &[2.0, 1.0]).unwrap();
        assert!(inf[0].is_infinite() && inf[0] > 0.0);
    }

    #[test]
    fn eoc_input_validation() {
        assert!(eoc(&[1.0], &[1.0]).is_err());
        assert!(eoc(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(eoc(&[1.0, -1.0], &[2.0, 1.0]).is_err());
    }

    #[test]
    fn sphere_eigen_study_first_order() {
        let config = StudyConfig {
            model: Model::Sphere,
            metric: Metric::EigenvalueError { index: 1 },
            pipeline: Pipeline::FirstOrder,
            sizes: vec![0.5, 0.25],
            ring: None,
        };
        let report = convergence_study(&config).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.finest_error_is_min());
        assert!(
            report.eoc[0] > 1.2,
            "first eigenvalue should converge at second order, got {}",
            report.eoc[0]
        );
        // report bytes reproduce
        let again = convergence_study(&config).unwrap();
        assert_eq!(report.to_csv(), again.to_csv());
        // EOC is recomputable from the report's own rows
        let sizes: Vec<f64> = report.rows.iter().map(|r| r.size).collect();
        let errors: Vec<f64> = report.rows.iter().map(|r| r.error).collect();
        assert_eq!(eoc(&errors, &sizes).unwrap(), report.eoc);
    }

    #[test]
    fn sphere_subspace_error_decreases() {
        let run = |target: f64| {
            let config = StudyConfig {
                model: Model::Sphere,
                metric: Metric::SubspaceError { index: 1 },
                pipeline: Pipeline::FirstOrder,
                sizes: vec![0.8, target],
                ring: None,
            };
            convergence_study(&config).unwrap()
        };
        let report = run(0.3);
        assert!(report.rows[1].error < report.rows[0].error);
        assert!(report.rows[1].error < 0.2, "E_1 = {}", report.rows[1].error);
    }

    #[test]
    fn torus_gaussian_study_high_order() {
        let config = StudyConfig {
            model: Model::default_torus(),
            metric: Metric::GaussianError,
            pipeline: Pipeline::HighOrder { degree: 3 },
            sizes: vec![0.3, 0.15],
            ring: None,
        };
        let report = convergence_study(&config).unwrap();
        assert!(report.rows[1].error < report.rows[0].error);
        assert!(report.eoc[0] > 0.5, "EOC {}", report.eoc[0]);
    }

    #[test]
    fn curvature_metric_requires_high_order() {
        let config = StudyConfig {
            model: Model::default_torus(),
            metric: Metric::GaussianError,
            pipeline: Pipeline::FirstOrder,
            sizes: vec![0.3, 0.15],
            ring: None,
        };
        assert!(matches!(
            convergence_study(&config),
            Err(HarnessError::LadderPoint { .. })
        ));
    }
}
