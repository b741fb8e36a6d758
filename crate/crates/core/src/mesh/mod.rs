//! Triangle-mesh representation, I/O, analytic test-surface generators and
//! neighborhood queries including half-integer rings.

mod generate;
mod io;
mod neighborhood;

pub use generate::{generate_mesh, Model};
pub use io::{load_mesh, write_off, MeshFormat};
pub use neighborhood::{neighborhood, neighborhood_with_ring};

use nalgebra::{Point3, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("parse failure at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("triangle {tri} references vertex {vertex} out of range (n_v = {n_vertices})")]
    IndexOutOfRange {
        tri: usize,
        vertex: usize,
        n_vertices: usize,
    },
    #[error("triangle {tri} is degenerate (repeated vertex index)")]
    DegenerateTriangle { tri: usize },
    #[error("non-manifold edge ({a}, {b}) with {count} incident triangles")]
    NonManifoldEdge { a: usize, b: usize, count: usize },
    #[error("mesh has no edges")]
    Empty,
    #[error("mesh too small: {got} neighbors available, {requested} requested")]
    TooSmall { requested: usize, got: usize },
    #[error("invalid generator parameters: {0}")]
    BadParams(String),
    #[error("vertex index {0} out of range")]
    VertexOutOfRange(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How far a neighborhood query reaches: `ring_numerator = j` means the
/// j/2-ring, expanded by further half-rings until `min_count` vertices are
/// collected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborhoodSpec {
    pub ring_numerator: u32,
    pub min_count: usize,
}

impl NeighborhoodSpec {
    /// `j >= 2` and `min_count >= 5`; both are clamped up to those floors.
    pub fn new(ring_numerator: u32, min_count: usize) -> Self {
        Self {
            ring_numerator: ring_numerator.max(2),
            min_count: min_count.max(5),
        }
    }

    /// One-ring with the five-point minimum.
    pub fn one_ring() -> Self {
        Self::new(2, 5)
    }
}

impl Default for NeighborhoodSpec {
    fn default() -> Self {
        Self::one_ring()
    }
}

/// Indexed triangle mesh with per-vertex adjacency and boundary flags.
///
/// Immutable after construction; all queries are read-only.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[usize; 3]>,
    /// Per-vertex one-ring vertex ids, ascending.
    vertex_rings: Vec<Vec<usize>>,
    /// Per-vertex incident triangle ids, ascending.
    vertex_tris: Vec<Vec<usize>>,
    boundary: Vec<bool>,
}

impl TriMesh {
    /// Build a mesh from raw vertices and triangles, validating indices,
    /// degeneracy and edge manifoldness, and deriving adjacency and
    /// boundary flags.
    pub fn new(
        vertices: Vec<Point3<f64>>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self, MeshError> {
        let n = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= n {
                    return Err(MeshError::IndexOutOfRange {
                        tri: t,
                        vertex: v,
                        n_vertices: n,
                    });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::DegenerateTriangle { tri: t });
            }
        }

        // Undirected edge -> incident triangle count, for manifoldness and
        // boundary detection.
        let mut edge_count = std::collections::HashMap::new();
        for tri in &triangles {
            for (a, b) in tri_edges(tri) {
                let key = (a.min(b), a.max(b));
                *edge_count.entry(key).or_insert(0usize) += 1;
            }
        }
        for (&(a, b), &count) in &edge_count {
            if count > 2 {
                return Err(MeshError::NonManifoldEdge { a, b, count });
            }
        }

        let mut vertex_rings = vec![Vec::new(); n];
        let mut vertex_tris = vec![Vec::new(); n];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                vertex_tris[v].push(t);
            }
        }
        for (&(a, b), _) in &edge_count {
            vertex_rings[a].push(b);
            vertex_rings[b].push(a);
        }
        for ring in &mut vertex_rings {
            ring.sort_unstable();
        }
        for tris in &mut vertex_tris {
            tris.sort_unstable();
        }

        let mut boundary = vec![false; n];
        for (&(a, b), &count) in &edge_count {
            if count == 1 {
                boundary[a] = true;
                boundary[b] = true;
            }
        }

        Ok(Self {
            vertices,
            triangles,
            vertex_rings,
            vertex_tris,
            boundary,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertex(&self, i: usize) -> Point3<f64> {
        self.vertices[i]
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// One-ring vertex ids of `v`, ascending.
    pub fn one_ring(&self, v: usize) -> &[usize] {
        &self.vertex_rings[v]
    }

    /// Incident triangle ids of `v`, ascending.
    pub fn incident_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_tris[v]
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    /// Vertices incident to an edge with exactly one incident triangle,
    /// ascending.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.n_vertices()).filter(|&v| self.boundary[v]).collect()
    }

    /// Unit normal of triangle `t` from its oriented vertex order.
    pub fn triangle_normal(&self, t: usize) -> Option<Vector3<f64>> {
        let [a, b, c] = self.triangles[t];
        let n = (self.vertices[b] - self.vertices[a])
            .cross(&(self.vertices[c] - self.vertices[a]));
        let len = n.norm();
        if len == 0.0 {
            None
        } else {
            Some(n / len)
        }
    }

    pub fn triangle_centroid(&self, t: usize) -> Point3<f64> {
        let [a, b, c] = self.triangles[t];
        Point3::from(
            (self.vertices[a].coords + self.vertices[b].coords + self.vertices[c].coords) / 3.0,
        )
    }

    /// Iterator over undirected edges (a < b), each exactly once.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.vertex_rings
            .iter()
            .enumerate()
            .flat_map(|(a, ring)| ring.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
    }

    /// Maximum edge length; the mesh width used across convergence studies.
    pub fn mesh_size(&self) -> Result<f64, MeshError> {
        self.edges()
            .map(|(a, b)| (self.vertices[a] - self.vertices[b]).norm())
            .fold(None, |acc: Option<f64>, l| Some(acc.map_or(l, |m| m.max(l))))
            .ok_or(MeshError::Empty)
    }

    /// True when every interior edge appears once per direction in the
    /// triangle list (globally consistent orientation).
    pub fn is_consistently_oriented(&self) -> bool {
        let mut directed = std::collections::HashMap::new();
        for tri in &self.triangles {
            for (a, b) in tri_edges(tri) {
                *directed.entry((a, b)).or_insert(0usize) += 1;
            }
        }
        directed.iter().all(|(&(a, b), &c)| {
            c == 1 && directed.get(&(b, a)).copied().unwrap_or(0) <= 1
        })
    }

    /// Recompute adjacency from the triangle list and compare with the
    /// stored tables.
    pub fn adjacency_consistent(&self) -> bool {
        match Self::new(self.vertices.clone(), self.triangles.clone()) {
            Ok(rebuilt) => {
                rebuilt.vertex_rings == self.vertex_rings
                    && rebuilt.vertex_tris == self.vertex_tris
                    && rebuilt.boundary == self.boundary
            }
            Err(_) => false,
        }
    }
}

fn tri_edges(tri: &[usize; 3]) -> [(usize, usize); 3] {
    [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_triangle() -> TriMesh {
        TriMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn single_triangle_is_all_boundary() {
        let m = single_triangle();
        assert_eq!(m.n_vertices(), 3);
        assert_eq!(m.n_triangles(), 1);
        assert_eq!(m.boundary_vertices(), vec![0, 1, 2]);
    }

    #[test]
    fn tetrahedron_is_closed() {
        let m = TriMesh::new(
            vec![
                Point3::new(1.0, 1.0, 1.0),
                Point3::new(1.0, -1.0, -1.0),
                Point3::new(-1.0, 1.0, -1.0),
                Point3::new(-1.0, -1.0, 1.0),
            ],
            vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
        )
        .unwrap();
        assert!(m.boundary_vertices().is_empty());
        assert!(m.is_consistently_oriented());
        assert!(m.adjacency_consistent());
    }

    #[test]
    fn unit_right_triangle_mesh_size_is_sqrt2() {
        let m = single_triangle();
        assert!((m.mesh_size().unwrap() - 2.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn empty_mesh_size_errors() {
        let m = TriMesh::new(vec![Point3::origin()], vec![]).unwrap();
        assert!(matches!(m.mesh_size(), Err(MeshError::Empty)));
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let r = TriMesh::new(
            vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)],
            vec![[0, 1, 0]],
        );
        assert!(matches!(r, Err(MeshError::DegenerateTriangle { .. })));
    }

    #[test]
    fn non_manifold_edge_rejected() {
        let r = TriMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(0.0, -1.0, 0.0),
                Point3::new(0.0, 0.0, 1.0),
            ],
            vec![[0, 1, 2], [0, 1, 3], [0, 1, 4]],
        );
        assert!(matches!(r, Err(MeshError::NonManifoldEdge { .. })));
    }

    #[test]
    fn out_of_range_index_rejected() {
        let r = TriMesh::new(vec![Point3::origin()], vec![[0, 1, 2]]);
        assert!(matches!(r, Err(MeshError::IndexOutOfRange { .. })));
    }
}
