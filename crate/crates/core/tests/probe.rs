use ltl_core::lifting::vertex_normal;
use ltl_core::mesh::{generate_mesh, Model};
use nalgebra::Vector3;

fn torus_normal(p: &nalgebra::Point3<f64>) -> Vector3<f64> {
    let rho = (p.x * p.x + p.y * p.y).sqrt();
    let axis_point = Vector3::new(p.x / rho * 0.75, p.y / rho * 0.75, 0.0);
    (p.coords - axis_point).normalize()
}

#[test]
fn probe_normal_error_torus() {
    for target in [0.4, 0.2, 0.1, 0.05] {
        let m = generate_mesh(Model::default_torus(), target).unwrap();
        let r = m.mesh_size().unwrap();
        let max_angle = (0..m.n_vertices())
            .map(|v| {
                let n = vertex_normal(&m, v).unwrap();
                let exact = torus_normal(&m.vertex(v));
                n.dot(&exact).abs().min(1.0).acos()
            })
            .fold(0.0f64, f64::max);
        println!("torus target {target:5} nv {:6} r {r:.4} max_angle {max_angle:.6e}", m.n_vertices());
    }
}

#[test]
fn probe_normal_error_wave() {
    for target in [0.6, 0.3, 0.15] {
        let m = generate_mesh(Model::Wave, target).unwrap();
        let r = m.mesh_size().unwrap();
        let max_angle = (0..m.n_vertices())
            .filter(|&v| !m.is_boundary(v))
            .map(|v| {
                let p = m.vertex(v);
                let n = vertex_normal(&m, v).unwrap();
                let hu = p.x.cos() * p.y.cos();
                let hv = -p.x.sin() * p.y.sin();
                let exact = Vector3::new(-hu, -hv, 1.0).normalize();
                n.dot(&exact).abs().min(1.0).acos()
            })
            .fold(0.0f64, f64::max);
        println!("wave target {target:5} nv {:6} r {r:.4} max_angle {max_angle:.6e}", m.n_vertices());
    }
}
