//! Half-integer ring neighborhoods. `j` even is the ordinary j/2-ring by
//! graph distance; `j` odd extends the (j-1)/2-ring by every vertex sharing
//! a triangle with its outermost shell.

use super::{MeshError, NeighborhoodSpec, TriMesh};

/// Vertices of the j/2-ring around `v`, expanded by half-rings until
/// `spec.min_count` is reached. Ordered by ascending graph distance, then
/// Euclidean distance to `v`, then index; excludes `v` itself.
pub fn neighborhood(
    mesh: &TriMesh,
    v: usize,
    spec: &NeighborhoodSpec,
) -> Result<Vec<usize>, MeshError> {
    neighborhood_with_ring(mesh, v, spec).map(|(ids, _)| ids)
}

/// As [`neighborhood`], also reporting the ring numerator actually used
/// after min-count expansion.
pub fn neighborhood_with_ring(
    mesh: &TriMesh,
    v: usize,
    spec: &NeighborhoodSpec,
) -> Result<(Vec<usize>, u32), MeshError> {
    if v >= mesh.n_vertices() {
        return Err(MeshError::VertexOutOfRange(v));
    }
    let mut j = spec.ring_numerator.max(2);
    loop {
        let ids = ring(mesh, v, j);
        if ids.len() >= spec.min_count {
            return Ok((order(mesh, v, ids), j));
        }
        // A ring covering every other vertex cannot grow further.
        if ids.len() + 1 >= mesh.n_vertices() {
            return Err(MeshError::TooSmall {
                requested: spec.min_count,
                got: ids.len(),
            });
        }
        j += 1;
    }
}

/// Members of the j/2-ring together with their graph distance.
fn ring(mesh: &TriMesh, v: usize, j: u32) -> Vec<(usize, u32)> {
    let full = j / 2;
    let half = j % 2 == 1;

    // BFS out to the full ring depth.
    let mut dist: std::collections::HashMap<usize, u32> = std::collections::HashMap::new();
    dist.insert(v, 0);
    let mut frontier = vec![v];
    for d in 1..=full {
        let mut next = Vec::new();
        for &u in &frontier {
            for &w in mesh.one_ring(u) {
                if !dist.contains_key(&w) {
                    dist.insert(w, d);
                    next.push(w);
                }
            }
        }
        frontier = next;
    }

    let mut members: Vec<(usize, u32)> = dist
        .iter()
        .filter(|&(&u, &d)| u != v && d <= full)
        .map(|(&u, &d)| (u, d))
        .collect();

    if half {
        // Vertices sharing a triangle with the outermost shell join at
        // distance full + 1.
        let mut extension = std::collections::BTreeSet::new();
        for (&u, &d) in &dist {
            if d != full {
                continue;
            }
            for &t in mesh.incident_triangles(u) {
                for &w in &mesh.triangle(t) {
                    if w != v && !dist.contains_key(&w) {
                        extension.insert(w);
                    }
                }
            }
        }
        members.extend(extension.into_iter().map(|w| (w, full + 1)));
    }
    members
}

fn order(mesh: &TriMesh, v: usize, mut ids: Vec<(usize, u32)>) -> Vec<usize> {
    let origin = mesh.vertex(v);
    ids.sort_by(|&(a, da), &(b, db)| {
        da.cmp(&db)
            .then_with(|| {
                let ea = (mesh.vertex(a) - origin).norm();
                let eb = (mesh.vertex(b) - origin).norm();
                ea.partial_cmp(&eb).unwrap_or(std::cmp::Ordering::Equal)
            })
            .then_with(|| a.cmp(&b))
    });
    ids.into_iter().map(|(u, _)| u).collect()
}
