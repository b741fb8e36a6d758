//! Closed-form reference data for the generated test surfaces: exact
//! normals and curvatures, eigenvalue targets, spherical-harmonic bases,
//! and a finite-difference reference for the wave-surface Laplacian.

use crate::mesh::TriMesh;
use nalgebra::{Point3, Vector3};

/// Exact unit normal, Gaussian curvature and |mean curvature| of the unit
/// sphere at a surface point.
pub fn sphere_reference(p: &Point3<f64>) -> (Vector3<f64>, f64, f64) {
    (p.coords.normalize(), 1.0, 1.0)
}

/// Torus with tube-center radius 0.75 and tube radius 0.25.
pub fn torus_reference(p: &Point3<f64>) -> (Vector3<f64>, f64, f64) {
    let (c, a) = (0.75, 0.25);
    let rho = p.x.hypot(p.y).max(1e-300);
    let cos_v = (rho - c) / a;
    let sin_v = p.z / a;
    let normal = Vector3::new(cos_v * p.x / rho, cos_v * p.y / rho, sin_v);
    let k = cos_v / (a * (c + a * cos_v));
    let h = (c + 2.0 * a * cos_v).abs() / (2.0 * a * (c + a * cos_v));
    (normal, k, h)
}

/// Dumbbell profile radius as a function of the polar angle.
pub fn dumbbell_radius(v: f64) -> f64 {
    let c = 0.9_f64;
    (c * c * (2.0 * v).cos() + (1.0 - c.powi(4) * (2.0 * v).sin().powi(2)).sqrt()).sqrt()
}

fn dumbbell_point(u: f64, v: f64) -> Vector3<f64> {
    let r = dumbbell_radius(v);
    Vector3::new(r * v.sin() * u.cos(), r * v.sin() * u.sin(), r * v.cos())
}

/// Reference normal and curvatures of the dumbbell, recovered from its
/// parametrization by high-order finite differences of the chart.
pub fn dumbbell_reference(p: &Point3<f64>) -> (Vector3<f64>, f64, f64) {
    let u = p.y.atan2(p.x);
    let v = p.x.hypot(p.y).atan2(p.z);
    parametric_curvature(&dumbbell_point, u, v)
}

/// First/second fundamental forms of an arbitrary chart by five-point
/// finite differences; returns (unit normal, K, |H|).
pub fn parametric_curvature(
    chart: &dyn Fn(f64, f64) -> Vector3<f64>,
    u: f64,
    v: f64,
) -> (Vector3<f64>, f64, f64) {
    let h = 1e-4;
    let d1 = |f: &dyn Fn(f64) -> Vector3<f64>, x: f64| {
        (f(x - 2.0 * h) - f(x + 2.0 * h) + 8.0 * (f(x + h) - f(x - h))) / (12.0 * h)
    };
    let d2 = |f: &dyn Fn(f64) -> Vector3<f64>, x: f64| {
        (-f(x - 2.0 * h) - f(x + 2.0 * h) + 16.0 * (f(x + h) + f(x - h)) - 30.0 * f(x))
            / (12.0 * h * h)
    };
    let xu = d1(&|t| chart(t, v), u);
    let xv = d1(&|t| chart(u, t), v);
    let xuu = d2(&|t| chart(t, v), u);
    let xvv = d2(&|t| chart(u, t), v);
    // mixed derivative by nested first differences
    let xuv = d1(&|t| d1(&|s| chart(s, t), u), v);

    let normal = xu.cross(&xv).normalize();
    let (e1, f1, g1) = (xu.dot(&xu), xu.dot(&xv), xv.dot(&xv));
    let (l, m, n) = (xuu.dot(&normal), xuv.dot(&normal), xvv.dot(&normal));
    let det = e1 * g1 - f1 * f1;
    let k = (l * n - m * m) / det;
    let h_mean = (e1 * n + g1 * l - 2.0 * f1 * m) / (2.0 * det);
    (normal, k, h_mean.abs())
}

/// The scalar field for the wave-surface study, evaluated from vertex
/// coordinates (u = x, v = y on the graph).
pub fn wave_field(p: &Point3<f64>) -> f64 {
    (0.5 * p.x.sin() + p.y.cos().powi(3)).exp()
}

/// Reference surface Laplacian of [`wave_field`] on the wave surface
/// `z = sin(u) cos(v)`, via the divergence form of the graph metric. The
/// inner fluxes are exact; the outer derivatives use Richardson-style
/// five-point differences.
pub fn wave_laplacian_reference(p: &Point3<f64>) -> f64 {
    let (u, v) = (p.x, p.y);
    let sqrt_det = |u: f64, v: f64| {
        let hu = u.cos() * v.cos();
        let hv = -u.sin() * v.sin();
        (1.0 + hu * hu + hv * hv).sqrt()
    };
    let phi = |u: f64, v: f64| (0.5 * u.sin() + v.cos().powi(3)).exp();
    let flux_u = |u: f64, v: f64| {
        let hu = u.cos() * v.cos();
        let hv = -u.sin() * v.sin();
        let g = 1.0 + hv * hv;
        let f = hu * hv;
        let w = (1.0 + hu * hu + hv * hv).sqrt();
        let pu = phi(u, v) * 0.5 * u.cos();
        let pv = phi(u, v) * (-3.0) * v.cos().powi(2) * v.sin();
        (g * pu - f * pv) / w
    };
    let flux_v = |u: f64, v: f64| {
        let hu = u.cos() * v.cos();
        let hv = -u.sin() * v.sin();
        let e = 1.0 + hu * hu;
        let f = hu * hv;
        let w = (1.0 + hu * hu + hv * hv).sqrt();
        let pu = phi(u, v) * 0.5 * u.cos();
        let pv = phi(u, v) * (-3.0) * v.cos().powi(2) * v.sin();
        (e * pv - f * pu) / w
    };
    let h = 1e-4;
    let d_u = (flux_u(u - 2.0 * h, v) - flux_u(u + 2.0 * h, v)
        + 8.0 * (flux_u(u + h, v) - flux_u(u - h, v)))
        / (12.0 * h);
    let d_v = (flux_v(u, v - 2.0 * h) - flux_v(u, v + 2.0 * h)
        + 8.0 * (flux_v(u, v + h) - flux_v(u, v - h)))
        / (12.0 * h);
    (d_u + d_v) / sqrt_det(u, v)
}

/// Nonzero Laplace–Beltrami eigenvalues of the unit sphere: the nth is
/// -n(n+1) with multiplicity 2n+1.
pub fn sphere_eigenvalue(n: usize) -> f64 {
    -((n * (n + 1)) as f64)
}

/// Dirichlet eigenvalues of the unit hemisphere, ascending in magnitude:
/// spherical harmonics odd across the equator survive, giving -n(n+1)
/// with multiplicity n.
pub fn hemisphere_eigenvalues(count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut n = 1;
    while out.len() < count {
        for _ in 0..n {
            out.push(-((n * (n + 1)) as f64));
            if out.len() == count {
                break;
            }
        }
        n += 1;
    }
    out
}

/// Real spherical harmonics of degree n sampled at mesh vertices; the
/// reference eigenbasis for the nth sphere cluster.
pub fn sphere_harmonics(n: usize, mesh: &TriMesh) -> Vec<Vec<f64>> {
    let polys: Vec<Box<dyn Fn(f64, f64, f64) -> f64>> = match n {
        1 => vec![
            Box::new(|x, _, _| x),
            Box::new(|_, y, _| y),
            Box::new(|_, _, z| z),
        ],
        2 => vec![
            Box::new(|x, y, _| x * y),
            Box::new(|_, y, z| y * z),
            Box::new(|x, _, z| z * x),
            Box::new(|x, y, _| x * x - y * y),
            Box::new(|_, _, z| 3.0 * z * z - 1.0),
        ],
        3 => vec![
            Box::new(|_, _, z| z * (5.0 * z * z - 3.0)),
            Box::new(|x, _, z| x * (5.0 * z * z - 1.0)),
            Box::new(|_, y, z| y * (5.0 * z * z - 1.0)),
            Box::new(|x, y, z| z * (x * x - y * y)),
            Box::new(|x, y, z| x * y * z),
            Box::new(|x, y, _| x * (x * x - 3.0 * y * y)),
            Box::new(|x, y, _| y * (3.0 * x * x - y * y)),
        ],
        _ => panic!("harmonic basis implemented for n = 1, 2, 3"),
    };
    polys
        .iter()
        .map(|p| {
            (0..mesh.n_vertices())
                .map(|v| {
                    let q = mesh.vertex(v);
                    p(q.x, q.y, q.z)
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, Model};

    #[test]
    fn torus_curvature_at_equators() {
        // outer equator: K = 4, |H| = 2.5
        let (_, k, h) = torus_reference(&Point3::new(1.0, 0.0, 0.0));
        assert!((k - 4.0).abs() < 1e-12);
        assert!((h - 2.5).abs() < 1e-12);
        // top circle: K = 0
        let (_, k, _) = torus_reference(&Point3::new(0.75, 0.0, 0.25));
        assert!(k.abs() < 1e-12);
    }

    #[test]
    fn parametric_curvature_matches_sphere() {
        let chart = |u: f64, v: f64| {
            Vector3::new(v.sin() * u.cos(), v.sin() * u.sin(), v.cos())
        };
        let (n, k, h) = parametric_curvature(&chart, 0.7, 1.1);
        assert!((k - 1.0).abs() < 1e-7, "K = {k}");
        assert!((h - 1.0).abs() < 1e-7, "H = {h}");
        let p = chart(0.7, 1.1);
        assert!((n.dot(&p.normalize()).abs() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn hemisphere_targets_first_six() {
        assert_eq!(
            hemisphere_eigenvalues(6),
            vec![-2.0, -6.0, -6.0, -12.0, -12.0, -12.0]
        );
    }

    #[test]
    fn harmonics_have_expected_counts() {
        let mesh = generate_mesh(Model::Sphere, 0.6).unwrap();
        assert_eq!(sphere_harmonics(1, &mesh).len(), 3);
        assert_eq!(sphere_harmonics(2, &mesh).len(), 5);
        assert_eq!(sphere_harmonics(3, &mesh).len(), 7);
    }

    /// Symbolic spot check at u = pi/2, v = 0, where the chart gradient
    /// vanishes (h_u = h_v = 0) and all metric-derivative terms drop out,
    /// so the surface Laplacian is exactly phi_uu + phi_vv:
    /// phi_uu = phi (0.25 cos^2 u - 0.5 sin u) = -0.5 phi and
    /// phi_vv = phi (9 cos^4 v sin^2 v - 3 (cos^3 v - 2 cos v sin^2 v)) = -3 phi.
    #[test]
    fn wave_reference_spot_check() {
        let u = std::f64::consts::FRAC_PI_2;
        let v = 0.0;
        let phi = (1.5f64).exp();
        let expected = -0.5 * phi - 3.0 * phi;
        let got = wave_laplacian_reference(&Point3::new(u, v, u.sin() * v.cos()));
        assert!(
            (got - expected).abs() < 1e-8 * expected.abs(),
            "{got} vs {expected}"
        );
    }

    #[test]
    fn dumbbell_reference_is_finite_and_unit_normal() {
        let mesh = generate_mesh(Model::Dumbbell, 0.3).unwrap();
        for v in (0..mesh.n_vertices()).step_by(17) {
            let p = mesh.vertex(v);
            // skip poles where the chart is singular
            if p.x.hypot(p.y) < 0.05 {
                continue;
            }
            let (n, k, h) = dumbbell_reference(&p);
            assert!((n.norm() - 1.0).abs() < 1e-6);
            assert!(k.is_finite() && h.is_finite());
        }
    }
}
