//! Analytic test-surface generators: unit sphere, unit hemisphere, torus,
//! dumbbell and wave surface, each meshed so that the maximum edge length
//! stays within 10% above a requested target.

use super::{MeshError, TriMesh};
use nalgebra::Point3;
use std::collections::HashMap;
use std::f64::consts::PI;

/// Generator models. Radii of the torus are distances from the symmetry
/// axis, so `inner = 0.5, outer = 1.0` gives tube center 0.75 and tube
/// radius 0.25.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Sphere,
    Hemisphere,
    Torus { inner: f64, outer: f64 },
    Dumbbell,
    Wave,
}

impl Model {
    pub fn default_torus() -> Self {
        Model::Torus {
            inner: 0.5,
            outer: 1.0,
        }
    }
}

/// Build a mesh for `model` with `mesh_size <= target_edge * 1.1`.
pub fn generate_mesh(model: Model, target_edge: f64) -> Result<TriMesh, MeshError> {
    if !(target_edge > 0.0) {
        return Err(MeshError::BadParams("target edge must be positive".into()));
    }
    match model {
        Model::Sphere => subdivided_sphere(target_edge),
        Model::Hemisphere => hemisphere(target_edge),
        Model::Torus { inner, outer } => torus(inner, outer, target_edge),
        Model::Dumbbell => dumbbell(target_edge),
        Model::Wave => wave(target_edge),
    }
}

/// The classic icosahedron with outward, consistently oriented faces,
/// scaled to the unit sphere.
fn icosahedron() -> (Vec<Point3<f64>>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ];
    let vertices = raw
        .iter()
        .map(|&(x, y, z)| {
            let n = (x * x + y * y + z * z).sqrt();
            Point3::new(x / n, y / n, z / n)
        })
        .collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (vertices, faces)
}

/// Octahedron oriented so that its equator is an exact edge loop in the
/// z = 0 plane.
fn octahedron() -> (Vec<Point3<f64>>, Vec<[usize; 3]>) {
    let vertices = vec![
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(-1.0, 0.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
        Point3::new(0.0, -1.0, 0.0),
        Point3::new(0.0, 0.0, 1.0),
        Point3::new(0.0, 0.0, -1.0),
    ];
    let faces = vec![
        [4, 0, 2],
        [4, 2, 1],
        [4, 1, 3],
        [4, 3, 0],
        [5, 2, 0],
        [5, 1, 2],
        [5, 3, 1],
        [5, 0, 3],
    ];
    (vertices, faces)
}

/// Subdivide each base face into `f * f` triangles on a barycentric lattice
/// and project every vertex back onto the unit sphere. Shared lattice points
/// along base edges are deduplicated so the result is watertight.
fn geodesic_subdivide(
    base_vertices: &[Point3<f64>],
    base_faces: &[[usize; 3]],
    f: usize,
) -> TriMesh {
    assert!(f >= 1);
    let mut vertices: Vec<Point3<f64>> = base_vertices.to_vec();
    let mut triangles = Vec::new();
    // Corner points reuse the base vertex id; edge points are keyed on the
    // canonical (low, high, step) triple; interior points are unique.
    let mut edge_points: HashMap<(usize, usize, usize), usize> = HashMap::new();

    for face in base_faces {
        let [a, b, c] = *face;
        let pa = base_vertices[a].coords;
        let pb = base_vertices[b].coords;
        let pc = base_vertices[c].coords;

        // grid[i][j] with i + j <= f holds the vertex id of the lattice
        // point (f - i - j, i, j) in barycentric steps toward (b, c).
        let mut grid: Vec<Vec<usize>> = vec![vec![usize::MAX; f + 1]; f + 1];
        for i in 0..=f {
            for j in 0..=(f - i) {
                let k = f - i - j;
                let id = if k == f {
                    a
                } else if i == f {
                    b
                } else if j == f {
                    c
                } else if j == 0 {
                    // edge a-b, step i from a
                    edge_point(a, b, i, f, &pa, &pb, &mut edge_points, &mut vertices)
                } else if i == 0 {
                    // edge a-c, step j from a
                    edge_point(a, c, j, f, &pa, &pc, &mut edge_points, &mut vertices)
                } else if k == 0 {
                    // edge b-c, step j from b
                    edge_point(b, c, j, f, &pb, &pc, &mut edge_points, &mut vertices)
                } else {
                    let p = (pa * k as f64 + pb * i as f64 + pc * j as f64) / f as f64;
                    vertices.push(Point3::from(p.normalize()));
                    vertices.len() - 1
                };
                grid[i][j] = id;
            }
        }

        for i in 0..f {
            for j in 0..(f - i) {
                triangles.push([grid[i][j], grid[i + 1][j], grid[i][j + 1]]);
                if i + j < f - 1 {
                    triangles.push([grid[i + 1][j], grid[i + 1][j + 1], grid[i][j + 1]]);
                }
            }
        }
    }

    TriMesh::new(vertices, triangles).expect("geodesic subdivision is manifold")
}

#[allow(clippy::too_many_arguments)]
fn edge_point(
    u: usize,
    v: usize,
    step: usize,
    f: usize,
    pu: &nalgebra::Vector3<f64>,
    pv: &nalgebra::Vector3<f64>,
    cache: &mut HashMap<(usize, usize, usize), usize>,
    vertices: &mut Vec<Point3<f64>>,
) -> usize {
    let key = if u < v { (u, v, step) } else { (v, u, f - step) };
    if let Some(&id) = cache.get(&key) {
        return id;
    }
    let t = step as f64 / f as f64;
    let p = (pu * (1.0 - t) + pv * t).normalize();
    let id = vertices.len();
    vertices.push(Point3::from(p));
    cache.insert(key, id);
    id
}

/// Smallest subdivision frequency whose maximum edge meets the target.
fn pick_frequency(
    base: &(Vec<Point3<f64>>, Vec<[usize; 3]>),
    target_edge: f64,
    clip_upper: bool,
) -> TriMesh {
    let base_edge = (base.0[base.1[0][0]] - base.0[base.1[0][1]]).norm();
    let mut f = ((base_edge / (target_edge * 1.1)).ceil() as usize).max(1);
    loop {
        let mesh = geodesic_subdivide(&base.0, &base.1, f);
        let mesh = if clip_upper { clip_z_nonnegative(&mesh) } else { mesh };
        if mesh.mesh_size().expect("sphere has edges") <= target_edge * 1.1 {
            return mesh;
        }
        f += 1;
    }
}

fn subdivided_sphere(target_edge: f64) -> Result<TriMesh, MeshError> {
    Ok(pick_frequency(&icosahedron(), target_edge, false))
}

/// Keep the triangles of a geodesic sphere whose vertices satisfy z >= 0.
/// The octahedral base guarantees the equator is an exact vertex loop, so
/// no triangle straddles the plane.
fn clip_z_nonnegative(mesh: &TriMesh) -> TriMesh {
    let keep: Vec<bool> = mesh
        .triangles()
        .iter()
        .map(|t| t.iter().all(|&v| mesh.vertex(v).z >= -1e-12))
        .collect();
    let mut remap = vec![usize::MAX; mesh.n_vertices()];
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if !keep[t] {
            continue;
        }
        let mut new_tri = [0usize; 3];
        for (slot, &v) in new_tri.iter_mut().zip(tri.iter()) {
            if remap[v] == usize::MAX {
                remap[v] = vertices.len();
                let mut p = mesh.vertex(v);
                if p.z.abs() < 1e-12 {
                    p.z = 0.0;
                }
                vertices.push(p);
            }
            *slot = remap[v];
        }
        triangles.push(new_tri);
    }
    TriMesh::new(vertices, triangles).expect("clipped sphere is manifold")
}

fn hemisphere(target_edge: f64) -> Result<TriMesh, MeshError> {
    Ok(pick_frequency(&octahedron(), target_edge, true))
}

/// Tensor-product grid over a doubly periodic parametrization, split into
/// triangles along a fixed diagonal.
fn periodic_grid<P>(nu: usize, nv: usize, point: P) -> TriMesh
where
    P: Fn(f64, f64) -> Point3<f64>,
{
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = 2.0 * PI * i as f64 / nu as f64;
        for j in 0..nv {
            let v = 2.0 * PI * j as f64 / nv as f64;
            vertices.push(point(u, v));
        }
    }
    let at = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut triangles = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            triangles.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
            triangles.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
    TriMesh::new(vertices, triangles).expect("periodic grid is manifold")
}

fn torus(inner: f64, outer: f64, target_edge: f64) -> Result<TriMesh, MeshError> {
    if !(inner > 0.0 && outer > 0.0) {
        return Err(MeshError::BadParams("torus radii must be positive".into()));
    }
    if inner >= outer {
        return Err(MeshError::BadParams(
            "torus inner radius must be smaller than outer radius".into(),
        ));
    }
    let center = (inner + outer) / 2.0;
    let tube = (outer - inner) / 2.0;
    let point = |u: f64, v: f64| {
        Point3::new(
            (center + tube * v.cos()) * u.cos(),
            (center + tube * v.cos()) * u.sin(),
            tube * v.sin(),
        )
    };
    let mut nu = ((2.0 * PI * outer / target_edge).ceil() as usize).max(8);
    let mut nv = ((2.0 * PI * tube / target_edge).ceil() as usize).max(8);
    loop {
        let mesh = periodic_grid(nu, nv, point);
        if mesh.mesh_size()? <= target_edge * 1.1 {
            return Ok(mesh);
        }
        nu += nu / 10 + 1;
        nv += nv / 10 + 1;
    }
}

/// Dumbbell radius profile; the polar coordinate drives the profile.
fn dumbbell_radius(v: f64) -> f64 {
    let c = 0.9_f64;
    (c * c * (2.0 * v).cos() + (1.0 - c.powi(4) * (2.0 * v).sin().powi(2)).sqrt()).sqrt()
}

fn dumbbell(target_edge: f64) -> Result<TriMesh, MeshError> {
    let point = |u: f64, v: f64| {
        let r = dumbbell_radius(v);
        Point3::new(r * v.sin() * u.cos(), r * v.sin() * u.sin(), r * v.cos())
    };
    let mut nu = ((2.0 * PI * 1.4 / target_edge).ceil() as usize).max(8);
    let mut nv = ((PI * 1.4 / target_edge).ceil() as usize).max(8);
    loop {
        let mesh = polar_grid(nu, nv, point);
        if mesh.mesh_size()? <= target_edge * 1.1 {
            return Ok(mesh);
        }
        nu += nu / 10 + 1;
        nv += nv / 10 + 1;
    }
}

/// Sphere-like (u periodic, v in [0, pi]) grid with the two pole rows
/// collapsed to single vertices and capped by triangle fans.
fn polar_grid<P>(nu: usize, nv: usize, point: P) -> TriMesh
where
    P: Fn(f64, f64) -> Point3<f64>,
{
    let mut vertices = Vec::new();
    let north = {
        vertices.push(point(0.0, 0.0));
        0usize
    };
    // interior rows j = 1..nv-1
    let row0 = vertices.len();
    for j in 1..nv {
        let v = PI * j as f64 / nv as f64;
        for i in 0..nu {
            let u = 2.0 * PI * i as f64 / nu as f64;
            vertices.push(point(u, v));
        }
    }
    let south = {
        vertices.push(point(0.0, PI));
        vertices.len() - 1
    };
    let at = |j: usize, i: usize| row0 + (j - 1) * nu + (i % nu);

    let mut triangles = Vec::new();
    for i in 0..nu {
        triangles.push([north, at(1, i), at(1, i + 1)]);
    }
    for j in 1..nv - 1 {
        for i in 0..nu {
            triangles.push([at(j, i), at(j + 1, i), at(j + 1, i + 1)]);
            triangles.push([at(j, i), at(j + 1, i + 1), at(j, i + 1)]);
        }
    }
    for i in 0..nu {
        triangles.push([south, at(nv - 1, i + 1), at(nv - 1, i)]);
    }
    TriMesh::new(vertices, triangles).expect("polar grid is manifold")
}

fn wave(target_edge: f64) -> Result<TriMesh, MeshError> {
    let point = |u: f64, v: f64| Point3::new(u, v, u.sin() * v.cos());
    let mut n = ((2.0 * PI * 1.5 / target_edge).ceil() as usize).max(4);
    loop {
        let mesh = open_grid(n, n, point);
        if mesh.mesh_size()? <= target_edge * 1.1 {
            return Ok(mesh);
        }
        n += n / 10 + 1;
    }
}

/// Open grid over [0, 2pi]^2, n cells per side.
fn open_grid<P>(nu: usize, nv: usize, point: P) -> TriMesh
where
    P: Fn(f64, f64) -> Point3<f64>,
{
    let mut vertices = Vec::with_capacity((nu + 1) * (nv + 1));
    for i in 0..=nu {
        let u = 2.0 * PI * i as f64 / nu as f64;
        for j in 0..=nv {
            let v = 2.0 * PI * j as f64 / nv as f64;
            vertices.push(point(u, v));
        }
    }
    let at = |i: usize, j: usize| i * (nv + 1) + j;
    let mut triangles = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            triangles.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
            triangles.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
    TriMesh::new(vertices, triangles).expect("open grid is manifold")
}
