//! Degree-k polynomial jets of the height function and of scalar fields in
//! the lifted frame, and the graph-surface formulas they feed: normals,
//! fundamental forms, Gaussian/mean curvature, surface gradients and
//! Laplacians. A high-order Laplace–Beltrami operator assembly closes the
//! loop: the Laplacian expansion is linear in the scalar jet, so each
//! vertex contributes one sparse row.

use crate::lifting::{lift_neighborhood, tangent_frame, LiftError, LocalFrame};
use crate::mesh::{MeshError, NeighborhoodSpec, TriMesh};
use crate::operator::{
    assemble_rows, with_enlargement, OperatorError, RowMeta, ScalarField, SparseOperator,
};
use crate::stencil::{coefficient_count, moment_indices, MomentSystem, MomentTarget, StencilError};
use nalgebra::{Unit, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HighOrderError {
    #[error("vertex {vertex}: {source}")]
    Stencil {
        vertex: usize,
        source: StencilError,
    },
    #[error("vertex {vertex}: {source}")]
    Lift { vertex: usize, source: LiftError },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("jet degree {got} too low: {need} required for this quantity")]
    InsufficientDegree { need: usize, got: usize },
    #[error("fits must share one frame (origins {a} and {b})")]
    FrameMismatch { a: usize, b: usize },
    #[error("field length {got} does not match vertex count {want}")]
    DimensionMismatch { want: usize, got: usize },
}

/// Neighborhood request sized for a degree-k fit: ring numerator k and at
/// least as many vertices as the expansion has coefficients.
pub fn ring_spec_for_degree(degree: usize) -> NeighborhoodSpec {
    NeighborhoodSpec::new((degree as u32).max(2), coefficient_count(degree).max(5))
}

/// Truncated Taylor expansion recovered at a vertex. Coefficients follow
/// [`moment_indices`] order in the factorial-normalized basis
/// `x^(d-m) y^m / ((d-m)! m!)`, so each entry estimates the corresponding
/// partial derivative at the origin.
#[derive(Debug, Clone)]
pub struct JetFit {
    pub degree: usize,
    pub coefficients: Vec<f64>,
    pub center_value: f64,
    /// Worst sample misfit of the fitted expansion.
    pub residual: f64,
    pub frame: LocalFrame,
}

impl JetFit {
    /// Estimated partial derivative of order d with m derivatives in y.
    pub fn coefficient(&self, d: u32, m: u32) -> f64 {
        debug_assert!(m <= d);
        moment_indices(self.degree)
            .iter()
            .position(|&(p, q)| p == d - m && q == m)
            .map(|i| self.coefficients[i])
            .unwrap_or(0.0)
    }

    /// Fit samples given in an existing frame: `delta[i]` is the sample at
    /// `coords[i]` minus the center value.
    pub fn from_samples(
        frame: &LocalFrame,
        coords: &[[f64; 2]],
        delta: &[f64],
        center_value: f64,
        degree: usize,
    ) -> Result<Self, StencilError> {
        let system = MomentSystem::new(coords, degree)?;
        if !system.full_rank() {
            return Err(StencilError::RankDeficient { residual: f64::NAN });
        }
        let coefficients = system.fit_coefficients(delta)?;
        let residual = system.fit_residual(&coefficients, delta);
        Ok(Self {
            degree,
            coefficients,
            center_value,
            residual,
            frame: frame.clone(),
        })
    }
}

/// Degree-k jet of the height function over the tangent plane at `v`.
pub fn fit_height(
    mesh: &TriMesh,
    v: usize,
    degree: usize,
    spec: &NeighborhoodSpec,
) -> Result<JetFit, HighOrderError> {
    let frame = tangent_frame(mesh, v).map_err(|source| HighOrderError::Lift {
        vertex: v,
        source,
    })?;
    let spec = widen(spec, degree);
    let (fit, _) = with_enlargement(mesh, v, &spec, |ids| {
        let polygon = lift_neighborhood(mesh, &frame, ids, None);
        JetFit::from_samples(&frame, &polygon.coords, &polygon.heights, 0.0, degree)
    })
    .map_err(lower(v))?;
    Ok(fit)
}

/// Degree-k jet of a scalar field in the tangent plane at `v`.
pub fn fit_scalar(
    mesh: &TriMesh,
    v: usize,
    degree: usize,
    field: &ScalarField,
    spec: &NeighborhoodSpec,
) -> Result<JetFit, HighOrderError> {
    if field.len() != mesh.n_vertices() {
        return Err(HighOrderError::DimensionMismatch {
            want: mesh.n_vertices(),
            got: field.len(),
        });
    }
    let frame = tangent_frame(mesh, v).map_err(|source| HighOrderError::Lift {
        vertex: v,
        source,
    })?;
    let spec = widen(spec, degree);
    let center = field.values[v];
    let (fit, _) = with_enlargement(mesh, v, &spec, |ids| {
        let polygon = lift_neighborhood(mesh, &frame, ids, Some(&field.values));
        let lifted = polygon.lifted_values.as_ref().expect("field supplied");
        let delta: Vec<f64> = lifted.iter().map(|&value| value - center).collect();
        JetFit::from_samples(&frame, &polygon.coords, &delta, center, degree)
    })
    .map_err(lower(v))?;
    Ok(fit)
}

fn widen(spec: &NeighborhoodSpec, degree: usize) -> NeighborhoodSpec {
    NeighborhoodSpec::new(
        spec.ring_numerator,
        spec.min_count.max(coefficient_count(degree)),
    )
}

fn lower(vertex: usize) -> impl Fn(OperatorError) -> HighOrderError {
    move |e| match e {
        OperatorError::Stencil { source, .. } => HighOrderError::Stencil { vertex, source },
        OperatorError::Lift { source, .. } => HighOrderError::Lift { vertex, source },
        OperatorError::Mesh(m) => HighOrderError::Mesh(m),
        other => panic!("unexpected assembly error in fit path: {other}"),
    }
}

/// Pointwise geometric data of the fitted graph surface at the origin.
#[derive(Debug, Clone)]
pub struct GeometricInvariants {
    pub normal: Unit<Vector3<f64>>,
    /// (E, F, G)
    pub first_form: (f64, f64, f64),
    /// (e, f, g)
    pub second_form: (f64, f64, f64),
    pub gaussian: f64,
    pub mean: f64,
}

/// First and second fundamental forms, normal and curvatures of the graph
/// `z = h(x, y)` at the origin of `fit`.
pub fn invariants_from_fit(fit: &JetFit) -> Result<GeometricInvariants, HighOrderError> {
    if fit.degree < 2 {
        return Err(HighOrderError::InsufficientDegree {
            need: 2,
            got: fit.degree,
        });
    }
    let hu = fit.coefficient(1, 0);
    let hv = fit.coefficient(1, 1);
    let huu = fit.coefficient(2, 0);
    let huv = fit.coefficient(2, 1);
    let hvv = fit.coefficient(2, 2);

    let w2 = 1.0 + hu * hu + hv * hv;
    let w = w2.sqrt();
    let normal_world = fit.frame.unproject(-hu / w, -hv / w, 1.0 / w);
    let gaussian = (huu * hvv - huv * huv) / (w2 * w2);
    let mean = ((1.0 + hu * hu) * hvv - 2.0 * hu * hv * huv + (1.0 + hv * hv) * huu)
        / (2.0 * w2.powf(1.5));
    Ok(GeometricInvariants {
        normal: Unit::new_normalize(normal_world),
        first_form: (1.0 + hu * hu, hu * hv, 1.0 + hv * hv),
        second_form: (huu / w, huv / w, hvv / w),
        gaussian,
        mean,
    })
}

/// Coefficients of the Laplace–Beltrami expansion at the origin:
/// `lap phi = c_u phi_u + c_v phi_v + c_uu phi_uu + c_uv phi_uv + c_vv phi_vv`,
/// all built from the height jet alone.
#[derive(Debug, Clone, Copy)]
pub struct LaplaceCoefficients {
    pub c_u: f64,
    pub c_v: f64,
    pub c_uu: f64,
    pub c_uv: f64,
    pub c_vv: f64,
}

/// Expand the divergence-form Laplacian of the graph metric at the origin.
/// The metric derivatives need second height derivatives, hence height
/// degree at least 3 for a convergent estimate.
pub fn laplace_coefficients(height: &JetFit) -> Result<LaplaceCoefficients, HighOrderError> {
    if height.degree < 3 {
        return Err(HighOrderError::InsufficientDegree {
            need: 3,
            got: height.degree,
        });
    }
    let hu = height.coefficient(1, 0);
    let hv = height.coefficient(1, 1);
    let huu = height.coefficient(2, 0);
    let huv = height.coefficient(2, 1);
    let hvv = height.coefficient(2, 2);

    let e = 1.0 + hu * hu;
    let f = hu * hv;
    let g = 1.0 + hv * hv;
    let det = 1.0 + hu * hu + hv * hv;
    let w = det.sqrt();

    let e_v = 2.0 * hu * huv;
    let f_u = huu * hv + hu * huv;
    let f_v = huv * hv + hu * hvv;
    let g_u = 2.0 * hv * huv;
    let det_u = 2.0 * (hu * huu + hv * huv);
    let det_v = 2.0 * (hu * huv + hv * hvv);

    // d/du (G / w) and friends, with w = sqrt(det)
    let du_g_over_w = g_u / w - g * det_u / (2.0 * w * det);
    let dv_f_over_w = f_v / w - f * det_v / (2.0 * w * det);
    let dv_e_over_w = e_v / w - e * det_v / (2.0 * w * det);
    let du_f_over_w = f_u / w - f * det_u / (2.0 * w * det);

    Ok(LaplaceCoefficients {
        c_u: (du_g_over_w - dv_f_over_w) / w,
        c_v: (dv_e_over_w - du_f_over_w) / w,
        c_uu: g / det,
        c_uv: -2.0 * f / det,
        c_vv: e / det,
    })
}

/// Surface gradient (world coordinates) and Laplace–Beltrami value of a
/// scalar jet over a height jet sharing the same frame.
///
/// The gradient needs both degrees >= 2; the Laplacian additionally needs
/// height degree >= 3.
pub fn surface_differentials(
    height: &JetFit,
    scalar: &JetFit,
) -> Result<(Vector3<f64>, f64), HighOrderError> {
    if height.frame.origin != scalar.frame.origin {
        return Err(HighOrderError::FrameMismatch {
            a: height.frame.origin,
            b: scalar.frame.origin,
        });
    }
    if height.degree < 2 || scalar.degree < 2 {
        return Err(HighOrderError::InsufficientDegree {
            need: 2,
            got: height.degree.min(scalar.degree),
        });
    }
    let hu = height.coefficient(1, 0);
    let hv = height.coefficient(1, 1);
    let pu = scalar.coefficient(1, 0);
    let pv = scalar.coefficient(1, 1);
    let puu = scalar.coefficient(2, 0);
    let puv = scalar.coefficient(2, 1);
    let pvv = scalar.coefficient(2, 2);

    let e = 1.0 + hu * hu;
    let f = hu * hv;
    let g = 1.0 + hv * hv;
    let det = 1.0 + hu * hu + hv * hv;

    // grad = a X_u + b X_v with X_u = (1, 0, h_u), X_v = (0, 1, h_v)
    let a = (pu * g - pv * f) / det;
    let b = (pv * e - pu * f) / det;
    let gradient = height.frame.unproject(a, b, a * hu + b * hv);

    let c = laplace_coefficients(height)?;
    let laplacian = c.c_u * pu + c.c_v * pv + c.c_uu * puu + c.c_uv * puv + c.c_vv * pvv;
    Ok((gradient, laplacian))
}

/// Assemble the degree-k Laplace–Beltrami operator. Row i feeds the
/// coefficient-extraction stencils of the scalar jet into the Laplacian
/// expansion of the height jet (fitted at degree max(k, 3)).
pub fn assemble_laplacian(
    mesh: &TriMesh,
    degree: usize,
    spec: &NeighborhoodSpec,
) -> Result<SparseOperator, OperatorError> {
    assemble_laplacian_rows(mesh, degree, spec, &vec![false; mesh.n_vertices()])
}

/// Dirichlet variant: boundary rows are skipped and the operator reduced
/// to interior vertices.
pub fn assemble_laplacian_dirichlet(
    mesh: &TriMesh,
    degree: usize,
    spec: &NeighborhoodSpec,
) -> Result<SparseOperator, OperatorError> {
    let boundary: Vec<bool> = (0..mesh.n_vertices())
        .map(|v| mesh.is_boundary(v))
        .collect();
    let full = assemble_laplacian_rows(mesh, degree, spec, &boundary)?;
    Ok(full.dirichlet_reduced(&boundary))
}

fn assemble_laplacian_rows(
    mesh: &TriMesh,
    degree: usize,
    spec: &NeighborhoodSpec,
    skip: &[bool],
) -> Result<SparseOperator, OperatorError> {
    let height_degree = degree.max(3);
    let spec = NeighborhoodSpec::new(
        spec.ring_numerator,
        spec.min_count
            .max(coefficient_count(degree))
            .max(coefficient_count(height_degree)),
    );
    assemble_rows(mesh.n_vertices(), skip, |i| {
        let frame = tangent_frame(mesh, i)
            .map_err(|source| OperatorError::Lift { vertex: i, source })?;
        let ((cols, weights, residual), used) = with_enlargement(mesh, i, &spec, |ids| {
            let polygon = lift_neighborhood(mesh, &frame, ids, None);
            let height_system = MomentSystem::new(&polygon.coords, height_degree)?;
            if !height_system.full_rank() {
                return Err(StencilError::RankDeficient { residual: f64::NAN });
            }
            let coefficients = height_system.fit_coefficients(&polygon.heights)?;
            let residual = height_system.fit_residual(&coefficients, &polygon.heights);
            let height_fit = JetFit {
                degree: height_degree,
                coefficients,
                center_value: 0.0,
                residual,
                frame: frame.clone(),
            };
            let c = laplace_coefficients(&height_fit)
                .expect("height degree is at least 3 by construction");

            let scalar_system;
            let system = if degree == height_degree {
                &height_system
            } else {
                scalar_system = MomentSystem::new(&polygon.coords, degree)?;
                if !scalar_system.full_rank() {
                    return Err(StencilError::RankDeficient { residual: f64::NAN });
                }
                &scalar_system
            };

            // five coefficient-extraction stencils feed the expansion
            let mut worst = 0.0f64;
            let mut weights = vec![0.0f64; ids.len()];
            for (d, m, factor) in [
                (1u32, 0u32, c.c_u),
                (1, 1, c.c_v),
                (2, 0, c.c_uu),
                (2, 1, c.c_uv),
                (2, 2, c.c_vv),
            ] {
                let stencil = system.solve(&MomentTarget::unit(degree, d, m)?)?;
                worst = worst.max(stencil.residual);
                for (w, &alpha) in weights.iter_mut().zip(&stencil.weights) {
                    *w += factor * alpha;
                }
            }
            Ok((ids.to_vec(), weights, worst))
        })?;
        Ok((
            cols,
            weights,
            RowMeta {
                ring: used,
                residual,
                normalizer: 1.0,
            },
        ))
    })
}
