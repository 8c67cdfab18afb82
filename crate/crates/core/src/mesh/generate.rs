use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{signed_area, Mesh2D, MeshError};

const SEED: u64 = 0x5eed_d15c;

/// Triangulated disk with boundary marker "circle" and domain marker "domain".
///
/// Boundary nodes are equally spaced on the circle at 0.6 maxh, interior nodes come from a
/// slightly jittered hexagonal lattice, connectivity from a Delaunay triangulation, followed by a few
/// smoothing sweeps.
pub fn generate_disk(center: [f64; 2], radius: f64, maxh: f64) -> Result<Mesh2D, MeshError> {
    if !(radius > 0.0 && maxh > 0.0 && radius.is_finite() && maxh.is_finite()) {
        return Err(MeshError::InvalidParameter(format!("disk radius {radius}, maxh {maxh}")));
    }
    if radius / maxh > 2000.0 {
        return Err(MeshError::InvalidParameter("maxh too small relative to the radius".into()));
    }
    let h = 0.9 * maxh;
    // A finer boundary spacing keeps the polygonal area deficit small.
    let nb = ((2.0 * std::f64::consts::PI * radius / (0.6 * maxh)).ceil() as usize).max(8);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut points = Vec::new();
    for i in 0..nb {
        let phi = 2.0 * std::f64::consts::PI * i as f64 / nb as f64;
        points.push([center[0] + radius * phi.cos(), center[1] + radius * phi.sin()]);
    }
    let dy = h * 3f64.sqrt() / 2.0;
    let rows = (radius / dy).ceil() as i64 + 1;
    let cols = (radius / h).ceil() as i64 + 1;
    for r in -rows..=rows {
        let shift = if r.rem_euclid(2) == 1 { 0.5 * h } else { 0.0 };
        for c in -cols..=cols {
            let x = c as f64 * h + shift;
            let y = r as f64 * dy;
            if x.hypot(y) <= radius - 0.45 * h {
                let jx = rng.gen_range(-1.0..1.0) * 1e-3 * h;
                let jy = rng.gen_range(-1.0..1.0) * 1e-3 * h;
                points.push([center[0] + x + jx, center[1] + y + jy]);
            }
        }
    }
    // Boundary nodes are all cocircular; perturb them radially for the triangulation only.
    let mut tri_points = points.clone();
    for p in tri_points.iter_mut().take(nb) {
        let s = 1.0 + rng.gen_range(-1.0..1.0) * 1e-9;
        p[0] = center[0] + (p[0] - center[0]) * s;
        p[1] = center[1] + (p[1] - center[1]) * s;
    }
    let tris = delaunay(&tri_points)?;
    let triangles = tris.into_iter().map(|t| (t, "domain".to_string())).collect();
    let boundary = (0..nb).map(|i| ([i, (i + 1) % nb], "circle".to_string())).collect();
    let mut mesh = Mesh2D::new(points, triangles, boundary)?;
    mesh.smooth(4);
    Ok(mesh)
}

/// Structured triangulation of a rectangle with markers "left", "right", "bottom", "top".
///
/// The grid spacing is at most maxh/sqrt(2) in each direction so that diagonals stay below
/// maxh.
pub fn generate_rect(x: [f64; 2], y: [f64; 2], maxh: f64) -> Result<Mesh2D, MeshError> {
    let (w, h) = (x[1] - x[0], y[1] - y[0]);
    if !(w > 0.0 && h > 0.0 && maxh > 0.0 && maxh.is_finite()) {
        return Err(MeshError::InvalidParameter(format!("rectangle {x:?} x {y:?}, maxh {maxh}")));
    }
    let s = maxh / 2f64.sqrt();
    let nx = ((w / s).ceil() as usize).max(1);
    let ny = ((h / s).ceil() as usize).max(1);
    if nx * ny > 4_000_000 {
        return Err(MeshError::InvalidParameter("maxh too small for the rectangle".into()));
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let px = if i == nx { x[1] } else { x[0] + w * i as f64 / nx as f64 };
            let py = if j == ny { y[1] } else { y[0] + h * j as f64 / ny as f64 };
            vertices.push([px, py]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push(([a, b, c], "domain".to_string()));
            triangles.push(([a, c, d], "domain".to_string()));
        }
    }
    let mut boundary = Vec::new();
    for i in 0..nx {
        boundary.push(([id(i, 0), id(i + 1, 0)], "bottom".to_string()));
    }
    for j in 0..ny {
        boundary.push(([id(nx, j), id(nx, j + 1)], "right".to_string()));
    }
    for i in (0..nx).rev() {
        boundary.push(([id(i + 1, ny), id(i, ny)], "top".to_string()));
    }
    for j in (0..ny).rev() {
        boundary.push(([id(0, j + 1), id(0, j)], "left".to_string()));
    }
    Mesh2D::new(vertices, triangles, boundary)
}

struct Tri {
    v: [usize; 3],
    center: [f64; 2],
    r2: f64,
    alive: bool,
}

fn circumcircle(p: &[[f64; 2]], v: [usize; 3]) -> ([f64; 2], f64) {
    let (a, b, c) = (p[v[0]], p[v[1]], p[v[2]]);
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    let (a2, b2, c2) = (a[0] * a[0] + a[1] * a[1], b[0] * b[0] + b[1] * b[1], c[0] * c[0] + c[1] * c[1]);
    let ux = (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d;
    let uy = (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d;
    let r2 = (a[0] - ux).powi(2) + (a[1] - uy).powi(2);
    ([ux, uy], r2)
}

/// Bowyer-Watson Delaunay triangulation of a point set, counter-clockwise triangles.
pub(crate) fn delaunay(points: &[[f64; 2]]) -> Result<Vec<[usize; 3]>, MeshError> {
    let n = points.len();
    if n < 3 {
        return Err(MeshError::InvalidParameter("need at least three points".into()));
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-300);
    let mid = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let mut p = points.to_vec();
    p.push([mid[0] - 20.0 * span, mid[1] - 10.0 * span]);
    p.push([mid[0] + 20.0 * span, mid[1] - 10.0 * span]);
    p.push([mid[0], mid[1] + 20.0 * span]);
    let make = |p: &[[f64; 2]], v: [usize; 3]| {
        let (center, r2) = circumcircle(p, v);
        Tri { v, center, r2, alive: true }
    };
    let mut tris = vec![make(&p, [n, n + 1, n + 2])];
    let mut bad = Vec::new();
    let mut poly: Vec<[usize; 2]> = Vec::new();
    for i in 0..n {
        let q = p[i];
        bad.clear();
        for (k, t) in tris.iter().enumerate() {
            if t.alive {
                let d2 = (q[0] - t.center[0]).powi(2) + (q[1] - t.center[1]).powi(2);
                if d2 < t.r2 * (1.0 + 1e-12) {
                    bad.push(k);
                }
            }
        }
        poly.clear();
        for &k in &bad {
            let v = tris[k].v;
            for e in [[v[0], v[1]], [v[1], v[2]], [v[2], v[0]]] {
                if let Some(pos) = poly.iter().position(|f| f[0] == e[1] && f[1] == e[0]) {
                    poly.swap_remove(pos);
                } else {
                    poly.push(e);
                }
            }
            tris[k].alive = false;
        }
        for e in &poly {
            let v = [e[0], e[1], i];
            if signed_area(p[v[0]], p[v[1]], p[v[2]]) <= 0.0 {
                return Err(MeshError::Topology("degenerate point configuration in triangulation".into()));
            }
            tris.push(make(&p, v));
        }
        if tris.len() > 4 * (tris.iter().filter(|t| t.alive).count() + 16) {
            tris.retain(|t| t.alive);
        }
    }
    Ok(tris.into_iter().filter(|t| t.alive && t.v.iter().all(|&v| v < n)).map(|t| t.v).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_area_and_markers() {
        let m = generate_rect([0.0, 1.0], [0.0, 1.0], 0.1).unwrap();
        assert!(m.nt() > 200);
        assert!((m.area().unwrap() - 1.0).abs() < 1e-14);
        for b in m.boundary_edges_with("left") {
            let [a, c] = m.boundary_edges()[b];
            assert_eq!(m.vertices()[a][0], 0.0);
            assert_eq!(m.vertices()[c][0], 0.0);
        }
        assert!(m.max_edge_length() <= 0.1 + 1e-12);
    }

    #[test]
    fn disk_is_valid_and_close_to_pi_r_squared() {
        let m = generate_disk([0.5, 0.5], 0.5, 0.05).unwrap();
        let area = m.area().unwrap();
        assert!((area - std::f64::consts::PI / 4.0).abs() < 2e-3, "{area}");
        assert!(m.max_edge_length() <= 1.5 * 0.05, "{}", m.max_edge_length());
        for t in 0..m.nt() {
            let [a, b, c] = m.triangles()[t].map(|i| m.vertices()[i]);
            assert!(signed_area(a, b, c) > 0.0);
        }
        assert_eq!(m.boundary_names(), &["circle".to_string()]);
        assert!(m.min_angle() > 20f64.to_radians(), "{}", m.min_angle().to_degrees());
    }

    #[test]
    fn disk_generation_is_deterministic() {
        let a = generate_disk([0.0, 0.0], 1.0, 0.2).unwrap();
        let b = generate_disk([0.0, 0.0], 1.0, 0.2).unwrap();
        assert_eq!(a.vertices(), b.vertices());
        assert_eq!(a.triangles(), b.triangles());
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(generate_disk([0.0, 0.0], -1.0, 0.1).is_err());
        assert!(generate_rect([0.0, 0.0], [0.0, 1.0], 0.1).is_err());
    }
}
