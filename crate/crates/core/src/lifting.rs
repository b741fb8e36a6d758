//! Per-vertex approximating normals, tangent frames, and lifting of
//! neighborhoods and scalar fields into the tangent plane.
//!
//! The approximating normal at a vertex is the centroid-weighted average of
//! incident face normals (weights proportional to the inverse squared
//! distance from the vertex to each face centroid), with the face normals
//! sign-aligned against the first incident face.

use crate::mesh::{MeshError, TriMesh};
use nalgebra::{Unit, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LiftError {
    #[error("vertex {0} has no incident triangle")]
    IsolatedVertex(usize),
    #[error("triangle {tri} at vertex {vertex} is degenerate")]
    DegenerateTriangle { vertex: usize, tri: usize },
    #[error("vertex {0}: face normals span more than a hemisphere, sign alignment impossible")]
    SignAlignment(usize),
    #[error("vertex {0}: weighted face normals cancel to zero")]
    DegenerateStar(usize),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Orthonormal right-handed frame at a vertex: `e1 x e2 = normal`.
#[derive(Debug, Clone)]
pub struct LocalFrame {
    pub origin: usize,
    pub normal: Unit<Vector3<f64>>,
    pub e1: Unit<Vector3<f64>>,
    pub e2: Unit<Vector3<f64>>,
}

impl LocalFrame {
    /// Tangential coordinates and height of a world displacement.
    pub fn project(&self, d: &Vector3<f64>) -> (f64, f64, f64) {
        (d.dot(&self.e1), d.dot(&self.e2), d.dot(&self.normal))
    }

    /// World vector from tangential components and height.
    pub fn unproject(&self, x: f64, y: f64, z: f64) -> Vector3<f64> {
        self.e1.as_ref() * x + self.e2.as_ref() * y + self.normal.as_ref() * z
    }
}

/// A vertex's lifted neighborhood: tangential coordinates of each neighbor
/// and, optionally, the lifted scalar values.
#[derive(Debug, Clone)]
pub struct TangentPolygon {
    pub frame: LocalFrame,
    pub neighbor_ids: Vec<usize>,
    pub coords: Vec<[f64; 2]>,
    /// Heights of the neighbors over the tangent plane.
    pub heights: Vec<f64>,
    pub lifted_values: Option<Vec<f64>>,
    pub center_value: Option<f64>,
}

/// Centroid-weighted approximating normal at `v`.
pub fn vertex_normal(mesh: &TriMesh, v: usize) -> Result<Unit<Vector3<f64>>, LiftError> {
    let tris = mesh.incident_triangles(v);
    if tris.is_empty() {
        return Err(LiftError::IsolatedVertex(v));
    }
    let p = mesh.vertex(v);

    let mut normals = Vec::with_capacity(tris.len());
    let mut weights = Vec::with_capacity(tris.len());
    for &t in tris {
        let n = mesh
            .triangle_normal(t)
            .ok_or(LiftError::DegenerateTriangle { vertex: v, tri: t })?;
        let d2 = (mesh.triangle_centroid(t) - p).norm_squared();
        if d2 == 0.0 {
            return Err(LiftError::DegenerateTriangle { vertex: v, tri: t });
        }
        normals.push(n);
        weights.push(1.0 / d2);
    }

    // Align signs against the first face, then require pairwise positive
    // inner products across the star.
    let reference = normals[0];
    for n in normals.iter_mut().skip(1) {
        if n.dot(&reference) < 0.0 {
            *n = -*n;
        }
    }
    for (i, a) in normals.iter().enumerate() {
        for b in normals.iter().skip(i + 1) {
            if a.dot(b) <= 0.0 {
                return Err(LiftError::SignAlignment(v));
            }
        }
    }

    let sum: Vector3<f64> = normals
        .iter()
        .zip(&weights)
        .map(|(n, &w)| n * w)
        .sum();
    Unit::try_new(sum, 1e-300).ok_or(LiftError::DegenerateStar(v))
}

/// Deterministic tangent frame: `e1` is the global axis least aligned with
/// the normal, projected onto the tangent plane; `e2 = normal x e1`.
pub fn tangent_frame(mesh: &TriMesh, v: usize) -> Result<LocalFrame, LiftError> {
    let normal = vertex_normal(mesh, v)?;
    let n = normal.as_ref();
    let axes = [Vector3::x(), Vector3::y(), Vector3::z()];
    let mut best = 0;
    for i in 1..3 {
        if n.dot(&axes[i]).abs() < n.dot(&axes[best]).abs() {
            best = i;
        }
    }
    let seed = axes[best];
    let e1 = Unit::new_normalize(seed - n * n.dot(&seed));
    let e2 = Unit::new_normalize(n.cross(&e1));
    Ok(LocalFrame {
        origin: v,
        normal,
        e1,
        e2,
    })
}

/// Project neighbors into the frame's tangent plane and copy field values.
///
/// `field`, when given, is a per-vertex sequence over the whole mesh; the
/// lifted values are `field[neighbor]` and the center value `field[origin]`.
pub fn lift_neighborhood(
    mesh: &TriMesh,
    frame: &LocalFrame,
    neighbors: &[usize],
    field: Option<&[f64]>,
) -> TangentPolygon {
    let origin = mesh.vertex(frame.origin);
    let mut coords = Vec::with_capacity(neighbors.len());
    let mut heights = Vec::with_capacity(neighbors.len());
    for &u in neighbors {
        let (x, y, z) = frame.project(&(mesh.vertex(u) - origin));
        coords.push([x, y]);
        heights.push(z);
    }
    TangentPolygon {
        frame: frame.clone(),
        neighbor_ids: neighbors.to_vec(),
        coords,
        heights,
        lifted_values: field.map(|f| neighbors.iter().map(|&u| f[u]).collect()),
        center_value: field.map(|f| f[frame.origin]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, neighborhood, Model, NeighborhoodSpec};
    use nalgebra::Point3;

    /// Flat hexagonal star in the z = 0 plane.
    fn flat_star() -> TriMesh {
        let mut vertices = vec![Point3::new(0.0, 0.0, 0.0)];
        for k in 0..6 {
            let a = std::f64::consts::PI / 3.0 * k as f64;
            vertices.push(Point3::new(a.cos(), a.sin(), 0.0));
        }
        let triangles = (0..6).map(|k| [0, 1 + k, 1 + (k + 1) % 6]).collect();
        TriMesh::new(vertices, triangles).unwrap()
    }

    /// Four-sided pyramid, apex on the z-axis.
    fn pyramid(height: f64) -> TriMesh {
        let vertices = vec![
            Point3::new(0.0, 0.0, height),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(-1.0, 0.0, 0.0),
            Point3::new(0.0, -1.0, 0.0),
        ];
        let triangles = vec![[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 1]];
        TriMesh::new(vertices, triangles).unwrap()
    }

    #[test]
    fn flat_star_normal_is_z() {
        let m = flat_star();
        let n = vertex_normal(&m, 0).unwrap();
        assert!((n.z.abs() - 1.0).abs() < 1e-15);
        assert!(n.x.abs() < 1e-15 && n.y.abs() < 1e-15);
    }

    #[test]
    fn pyramid_apex_normal_is_axis() {
        let m = pyramid(0.7);
        let n = vertex_normal(&m, 0).unwrap();
        assert!(n.x.abs() < 1e-14 && n.y.abs() < 1e-14);
        assert!((n.z.abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_normals_stay_within_first_order_of_radial() {
        // Icosphere stars are nearly symmetric, so the centroid-weighted
        // normal is far better than O(r) there; assert the O(r) envelope.
        for target in [0.4, 0.2] {
            let m = generate_mesh(Model::Sphere, target).unwrap();
            let r = m.mesh_size().unwrap();
            let max_angle = (0..m.n_vertices())
                .map(|v| {
                    let n = vertex_normal(&m, v).unwrap();
                    let radial = m.vertex(v).coords.normalize();
                    n.dot(&radial).abs().min(1.0).acos()
                })
                .fold(0.0, f64::max);
            assert!(max_angle < 0.5 * r, "angle {max_angle} vs r {r}");
        }
    }

    #[test]
    fn torus_normals_converge_at_first_order_or_better() {
        // Exact torus normal: radial from the tube-center circle.
        let exact = |p: &Point3<f64>| {
            let rho = (p.x * p.x + p.y * p.y).sqrt();
            let axis = nalgebra::Vector3::new(p.x / rho * 0.75, p.y / rho * 0.75, 0.0);
            (p.coords - axis).normalize()
        };
        let max_angle = |target: f64| {
            let m = generate_mesh(Model::default_torus(), target).unwrap();
            let worst = (0..m.n_vertices())
                .map(|v| {
                    let n = vertex_normal(&m, v).unwrap();
                    n.dot(&exact(&m.vertex(v))).abs().min(1.0).acos()
                })
                .fold(0.0, f64::max);
            (m.mesh_size().unwrap(), worst)
        };
        let (r1, e1) = max_angle(0.4);
        let (r2, e2) = max_angle(0.2);
        assert!(e2 < e1);
        let order = (e1 / e2).ln() / (r1 / r2).ln();
        assert!(order >= 1.0, "measured order {order}");
    }

    #[test]
    fn frame_axis_selection_rule() {
        // normal = z: least-aligned axis is x, so e1 = x, e2 = y
        let m = flat_star();
        let f = tangent_frame(&m, 0).unwrap();
        assert!((f.e1.x.abs() - 1.0).abs() < 1e-14);
        assert!((f.e2.y.abs() - 1.0).abs() < 1e-14);
        // right-handed
        let cross = f.e1.cross(&f.e2);
        assert!((cross - f.normal.into_inner()).norm() < 1e-14);
    }

    #[test]
    fn frame_is_orthonormal_everywhere() {
        let m = generate_mesh(Model::default_torus(), 0.4).unwrap();
        for v in (0..m.n_vertices()).step_by(7) {
            let f = tangent_frame(&m, v).unwrap();
            assert!(f.e1.dot(&f.e2).abs() < 1e-12);
            assert!(f.e1.dot(&f.normal).abs() < 1e-12);
            assert!(f.e2.dot(&f.normal).abs() < 1e-12);
            assert!((f.e1.cross(&f.e2) - f.normal.into_inner()).norm() < 1e-12);
        }
    }

    #[test]
    fn frames_are_deterministic() {
        let a = generate_mesh(Model::Sphere, 0.3).unwrap();
        let b = generate_mesh(Model::Sphere, 0.3).unwrap();
        for v in 0..a.n_vertices() {
            let fa = tangent_frame(&a, v).unwrap();
            let fb = tangent_frame(&b, v).unwrap();
            assert_eq!(fa.normal.as_ref(), fb.normal.as_ref());
            assert_eq!(fa.e1.as_ref(), fb.e1.as_ref());
            assert_eq!(fa.e2.as_ref(), fb.e2.as_ref());
        }
    }

    #[test]
    fn planar_lift_is_identity_on_the_plane() {
        let m = flat_star();
        let f = tangent_frame(&m, 0).unwrap();
        let neighbors: Vec<usize> = (1..7).collect();
        let lifted = lift_neighborhood(&m, &f, &neighbors, None);
        for (i, &u) in neighbors.iter().enumerate() {
            let d = m.vertex(u) - m.vertex(0);
            let rebuilt = f.unproject(lifted.coords[i][0], lifted.coords[i][1], 0.0);
            assert!((rebuilt - d).norm() < 1e-14);
            assert!(lifted.heights[i].abs() < 1e-14);
        }
    }

    #[test]
    fn lift_reconstruction_on_curved_mesh() {
        let m = generate_mesh(Model::Sphere, 0.4).unwrap();
        let v = 3;
        let f = tangent_frame(&m, v).unwrap();
        let ids = neighborhood(&m, v, &NeighborhoodSpec::one_ring()).unwrap();
        let lifted = lift_neighborhood(&m, &f, &ids, None);
        for (i, &u) in ids.iter().enumerate() {
            let d = m.vertex(u) - m.vertex(v);
            let rebuilt = f.unproject(lifted.coords[i][0], lifted.coords[i][1], lifted.heights[i]);
            assert!((rebuilt - d).norm() < 1e-12);
            // tangential projection never grows the norm
            let planar = (lifted.coords[i][0].powi(2) + lifted.coords[i][1].powi(2)).sqrt();
            assert!(planar <= d.norm() + 1e-15);
        }
    }

    #[test]
    fn constant_field_lifts_to_constant() {
        let m = flat_star();
        let f = tangent_frame(&m, 0).unwrap();
        let field = vec![2.5; m.n_vertices()];
        let lifted = lift_neighborhood(&m, &f, &[1, 2, 3, 4, 5, 6], Some(&field));
        assert!(lifted.lifted_values.unwrap().iter().all(|&x| x == 2.5));
        assert_eq!(lifted.center_value, Some(2.5));
    }
}
