use super::{signed_area, triangle_angles, Mesh2D};

/// Angle statistics before and after smoothing, in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub min_angle_before: f64,
    pub max_angle_before: f64,
    pub min_angle_after: f64,
    pub max_angle_after: f64,
    pub moved: usize,
}

impl Mesh2D {
    /// Laplacian smoothing of interior vertices.
    ///
    /// Each vertex moves to the mean of its neighbours unless that lowers the smallest angle
    /// of the surrounding triangles, in which case the move is rolled back. Boundary vertices
    /// stay fixed, so the minimum angle never decreases.
    pub fn smooth(&mut self, sweeps: usize) -> QualityReport {
        let min_before = self.min_angle().to_degrees();
        let max_before = self.max_angle().to_degrees();
        let nv = self.nv();
        let boundary = self.is_boundary_vertex();
        let mut vtris: Vec<Vec<usize>> = vec![Vec::new(); nv];
        let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for (t, v) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                vtris[v[k]].push(t);
                for l in 0..3 {
                    if l != k && !nbrs[v[k]].contains(&v[l]) {
                        nbrs[v[k]].push(v[l]);
                    }
                }
            }
        }
        let triangles = self.triangles.clone();
        let local_min = |verts: &[[f64; 2]], ts: &[usize]| -> Option<f64> {
            let mut m = f64::INFINITY;
            for &t in ts {
                let p = triangles[t].map(|i| verts[i]);
                if signed_area(p[0], p[1], p[2]) <= 0.0 {
                    return None;
                }
                m = triangle_angles(p).into_iter().fold(m, f64::min);
            }
            Some(m)
        };
        let mut moved = 0;
        for _ in 0..sweeps {
            let mut changed = false;
            for v in 0..nv {
                if boundary[v] || nbrs[v].is_empty() {
                    continue;
                }
                let verts = self.vertices_mut();
                let old = verts[v];
                let before = local_min(verts, &vtris[v]).unwrap_or(f64::NEG_INFINITY);
                let k = nbrs[v].len() as f64;
                let mean = nbrs[v].iter().fold([0.0, 0.0], |a, &u| [a[0] + verts[u][0] / k, a[1] + verts[u][1] / k]);
                if (mean[0] - old[0]).hypot(mean[1] - old[1]) <= 1e-14 * (1.0 + old[0].abs() + old[1].abs()) {
                    continue;
                }
                verts[v] = mean;
                match local_min(verts, &vtris[v]) {
                    Some(after) if after > before => {
                        moved += 1;
                        changed = true;
                    }
                    _ => verts[v] = old,
                }
            }
            if !changed {
                break;
            }
        }
        QualityReport {
            min_angle_before: min_before,
            max_angle_before: max_before,
            min_angle_after: self.min_angle().to_degrees(),
            max_angle_after: self.max_angle().to_degrees(),
            moved,
        }
    }
}
