//! Straight-edged triangular meshes with named regions and an optional deformation field.

mod generate;
mod io;
mod smooth;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::fem::basis::{self, ShapeValues, LOCAL_EDGES};

pub use generate::{generate_disk, generate_rect};
pub use smooth::QualityReport;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid mesh parameter: {0}")]
    InvalidParameter(String),
    #[error("triangle {element} is not positively oriented (signed area {area:e})")]
    Inverted { element: usize, area: f64 },
    #[error("deformed Jacobian determinant {det:e} <= 0 in triangle {element}")]
    NonPositiveJacobian { element: usize, det: f64 },
    #[error("inconsistent topology: {0}")]
    Topology(String),
    #[error("deformation has {found} coefficients, expected {expected}")]
    DeformationSize { expected: usize, found: usize },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

static NEXT_TOPOLOGY: AtomicU64 = AtomicU64::new(1);

/// Displacement field applied on the fly during integration.
///
/// Coefficients follow the vector H1 numbering of the mesh: vertex dofs first, then (order 2)
/// edge dofs, two interleaved components per scalar dof.
#[derive(Debug, Clone, PartialEq)]
pub struct Deformation {
    pub order: usize,
    pub coeffs: Vec<f64>,
}

/// Geometry of the (possibly deformed) map at one reference point.
#[derive(Debug, Clone, Copy)]
pub struct PointGeometry {
    pub pos: [f64; 2],
    /// d(pos)/d(reference coordinates), row-major
    pub jac: [[f64; 2]; 2],
    pub det: f64,
}

impl PointGeometry {
    /// Inverse transpose of the Jacobian, mapping reference to physical gradients.
    pub fn inv_t(&self) -> [[f64; 2]; 2] {
        let j = self.jac;
        let d = self.det;
        [[j[1][1] / d, -j[1][0] / d], [-j[0][1] / d, j[0][0] / d]]
    }

    pub fn physical_grad(&self, g: [f64; 2]) -> [f64; 2] {
        let m = self.inv_t();
        [m[0][0] * g[0] + m[0][1] * g[1], m[1][0] * g[0] + m[1][1] * g[1]]
    }
}

#[derive(Debug, Clone)]
pub struct Mesh2D {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    tri_marker: Vec<usize>,
    domain_names: Vec<String>,
    bnd_edges: Vec<[usize; 2]>,
    bnd_marker: Vec<usize>,
    bnd_names: Vec<String>,
    edges: Vec<[usize; 2]>,
    tri_edges: Vec<[usize; 3]>,
    /// adjacent triangle and its local edge for every boundary edge
    bnd_elem: Vec<(usize, usize)>,
    deformation: Option<Deformation>,
    topology_id: u64,
}

fn intern(names: &mut Vec<String>, s: &str) -> usize {
    match names.iter().position(|n| n == s) {
        Some(i) => i,
        None => {
            names.push(s.to_string());
            names.len() - 1
        }
    }
}

pub(crate) fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh2D {
    /// Builds a mesh from vertex coordinates, marked triangles and marked boundary edges.
    ///
    /// Triangles must be counter-clockwise. Every edge with a single adjacent triangle must be
    /// listed exactly once as a boundary edge; boundary edges are reoriented to run
    /// counter-clockwise around the domain.
    pub fn new(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<([usize; 3], String)>,
        boundary: Vec<([usize; 2], String)>,
    ) -> Result<Self, MeshError> {
        let nv = vertices.len();
        if nv < 3 || triangles.is_empty() {
            return Err(MeshError::InvalidParameter("mesh needs at least one triangle".into()));
        }
        let mut domain_names = Vec::new();
        let mut tris = Vec::with_capacity(triangles.len());
        let mut tri_marker = Vec::with_capacity(triangles.len());
        for (t, (v, m)) in triangles.iter().enumerate() {
            if v.iter().any(|&i| i >= nv) || v[0] == v[1] || v[1] == v[2] || v[0] == v[2] {
                return Err(MeshError::Topology(format!("triangle {t} has invalid vertices {v:?}")));
            }
            let area = signed_area(vertices[v[0]], vertices[v[1]], vertices[v[2]]);
            if area <= 0.0 {
                return Err(MeshError::Inverted { element: t, area });
            }
            tris.push(*v);
            tri_marker.push(intern(&mut domain_names, m));
        }
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_tris: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut tri_edges = Vec::with_capacity(tris.len());
        for (t, v) in tris.iter().enumerate() {
            let mut te = [0; 3];
            for (k, &[a, b]) in LOCAL_EDGES.iter().enumerate() {
                let (p, q) = (v[a].min(v[b]), v[a].max(v[b]));
                let e = *edge_index.entry((p, q)).or_insert_with(|| {
                    edges.push([p, q]);
                    edge_tris.push(Vec::new());
                    edges.len() - 1
                });
                edge_tris[e].push((t, k));
                te[k] = e;
            }
            tri_edges.push(te);
        }
        for (e, ts) in edge_tris.iter().enumerate() {
            if ts.len() > 2 {
                return Err(MeshError::Topology(format!("edge {:?} shared by {} triangles", edges[e], ts.len())));
            }
        }
        let mut bnd_names = Vec::new();
        let mut bnd_edges = Vec::with_capacity(boundary.len());
        let mut bnd_marker = Vec::with_capacity(boundary.len());
        let mut bnd_elem = Vec::with_capacity(boundary.len());
        let mut seen = vec![false; edges.len()];
        for ([a, b], m) in &boundary {
            let key = ((*a).min(*b), (*a).max(*b));
            let e = *edge_index
                .get(&key)
                .ok_or_else(|| MeshError::Topology(format!("boundary edge ({a}, {b}) is not a mesh edge")))?;
            if edge_tris[e].len() != 1 {
                return Err(MeshError::Topology(format!("boundary edge ({a}, {b}) borders two triangles")));
            }
            if seen[e] {
                return Err(MeshError::Topology(format!("boundary edge ({a}, {b}) listed twice")));
            }
            seen[e] = true;
            let (t, k) = edge_tris[e][0];
            let [la, lb] = LOCAL_EDGES[k];
            bnd_edges.push([tris[t][la], tris[t][lb]]);
            bnd_marker.push(intern(&mut bnd_names, m));
            bnd_elem.push((t, k));
        }
        if let Some(e) = (0..edges.len()).find(|&e| edge_tris[e].len() == 1 && !seen[e]) {
            return Err(MeshError::Topology(format!("edge {:?} lies on the boundary but has no marker", edges[e])));
        }
        Ok(Self {
            vertices,
            triangles: tris,
            tri_marker,
            domain_names,
            bnd_edges,
            bnd_marker,
            bnd_names,
            edges,
            tri_edges,
            bnd_elem,
            deformation: None,
            topology_id: NEXT_TOPOLOGY.fetch_add(1, Ordering::Relaxed),
        })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.bnd_edges
    }

    pub fn nv(&self) -> usize {
        self.vertices.len()
    }

    pub fn nt(&self) -> usize {
        self.triangles.len()
    }

    pub fn ne(&self) -> usize {
        self.edges.len()
    }

    /// Identifies the connectivity; node moves keep it, rebuilding a mesh changes it.
    pub fn topology_id(&self) -> u64 {
        self.topology_id
    }

    pub fn domain_marker(&self, t: usize) -> &str {
        &self.domain_names[self.tri_marker[t]]
    }

    pub fn boundary_marker(&self, b: usize) -> &str {
        &self.bnd_names[self.bnd_marker[b]]
    }

    pub fn domain_names(&self) -> &[String] {
        &self.domain_names
    }

    pub fn boundary_names(&self) -> &[String] {
        &self.bnd_names
    }

    /// Boundary edges carrying the given marker.
    pub fn boundary_edges_with(&self, marker: &str) -> Vec<usize> {
        (0..self.bnd_edges.len()).filter(|&b| self.boundary_marker(b) == marker).collect()
    }

    /// Global edge ids of the three local edges of a triangle.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    /// Adjacent triangle and local edge index of a boundary edge.
    pub fn boundary_element(&self, b: usize) -> (usize, usize) {
        self.bnd_elem[b]
    }

    pub fn is_boundary_vertex(&self) -> Vec<bool> {
        let mut m = vec![false; self.nv()];
        for [a, b] in &self.bnd_edges {
            m[*a] = true;
            m[*b] = true;
        }
        m
    }

    /// Global scalar H1 dofs of a triangle: vertices, then edges for order 2.
    pub fn element_dofs(&self, t: usize, order: usize) -> ([usize; 6], usize) {
        let v = self.triangles[t];
        let mut d = [v[0], v[1], v[2], 0, 0, 0];
        if order == 2 {
            for k in 0..3 {
                d[3 + k] = self.nv() + self.tri_edges[t][k];
            }
        }
        (d, basis::local_count(order))
    }

    /// Number of scalar H1 dofs for the given order.
    pub fn scalar_dofs(&self, order: usize) -> usize {
        match order {
            1 => self.nv(),
            2 => self.nv() + self.ne(),
            _ => panic!("unsupported order {order}"),
        }
    }

    pub fn deformation(&self) -> Option<&Deformation> {
        self.deformation.as_ref()
    }

    pub fn set_deformation(&mut self, d: Deformation) -> Result<(), MeshError> {
        if d.order != 1 && d.order != 2 {
            return Err(MeshError::InvalidParameter(format!("deformation order {}", d.order)));
        }
        let expected = 2 * self.scalar_dofs(d.order);
        if d.coeffs.len() != expected {
            return Err(MeshError::DeformationSize { expected, found: d.coeffs.len() });
        }
        self.deformation = Some(d);
        Ok(())
    }

    pub fn unset_deformation(&mut self) -> Option<Deformation> {
        self.deformation.take()
    }

    /// Affine part of the element map: origin vertex and Jacobian.
    pub fn affine(&self, t: usize) -> ([f64; 2], [[f64; 2]; 2]) {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        (a, [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]])
    }

    /// Position and Jacobian of the current configuration at a reference point, including
    /// the deformation if one is set. `shapes` may supply precomputed deformation shape
    /// functions at `xi`.
    pub fn geometry(&self, t: usize, xi: [f64; 2], shapes: Option<&ShapeValues>) -> Result<PointGeometry, MeshError> {
        let (o, j0) = self.affine(t);
        let mut pos = [o[0] + j0[0][0] * xi[0] + j0[0][1] * xi[1], o[1] + j0[1][0] * xi[0] + j0[1][1] * xi[1]];
        let mut jac = j0;
        if let Some(d) = &self.deformation {
            let own;
            let s = match shapes {
                Some(s) => s,
                None => {
                    own = basis::shape_values(d.order, xi);
                    &own
                }
            };
            let (dofs, n) = self.element_dofs(t, d.order);
            for k in 0..n {
                for c in 0..2 {
                    let v = d.coeffs[2 * dofs[k] + c];
                    pos[c] += v * s.vals[k];
                    jac[c][0] += v * s.grads[k][0];
                    jac[c][1] += v * s.grads[k][1];
                }
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det <= 0.0 {
            return Err(MeshError::NonPositiveJacobian { element: t, det });
        }
        Ok(PointGeometry { pos, jac, det })
    }

    /// Reference coordinates of the endpoints of a local edge, in counter-clockwise order.
    pub fn local_edge_points(k: usize) -> ([f64; 2], [f64; 2]) {
        let nodes = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let [a, b] = LOCAL_EDGES[k];
        (nodes[a], nodes[b])
    }

    /// Area of the current configuration (exact for affine and order-1 deformations).
    pub fn area(&self) -> Result<f64, MeshError> {
        let Some(order) = self.deformation.as_ref().map(|d| d.order) else {
            return Ok(self.triangles.iter().map(|v| signed_area(self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]])).sum());
        };
        let rule = crate::fem::quadrature::triangle_rule(2 * order).expect("low degree rule");
        let mut total = 0.0;
        for t in 0..self.nt() {
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                total += w * self.geometry(t, *p, None)?.det;
            }
        }
        Ok(total)
    }

    /// Checks that the current configuration keeps every element positively oriented, by
    /// sampling the Jacobian determinant on a lattice of `n + 1` points per edge.
    pub fn check_orientation(&self, n: usize) -> Result<(), MeshError> {
        let n = n.max(1);
        let pts: Vec<[f64; 2]> = (0..=n)
            .flat_map(|i| (0..=n - i).map(move |j| [i as f64 / n as f64, j as f64 / n as f64]))
            .collect();
        for t in 0..self.nt() {
            for &p in &pts {
                self.geometry(t, p, None)?;
            }
        }
        Ok(())
    }

    /// Vertex positions after applying the vertex values of a displacement.
    fn displaced_vertices(&self, d: &Deformation) -> Result<Vec<[f64; 2]>, MeshError> {
        let expected = 2 * self.scalar_dofs(d.order);
        if d.coeffs.len() != expected {
            return Err(MeshError::DeformationSize { expected, found: d.coeffs.len() });
        }
        Ok(self.vertices.iter().enumerate().map(|(i, p)| [p[0] + d.coeffs[2 * i], p[1] + d.coeffs[2 * i + 1]]).collect())
    }

    /// Moves every vertex by the displacement value at that vertex and clears any active
    /// deformation. Fails without touching the mesh if a triangle would invert.
    pub fn move_nodes(&mut self, d: &Deformation) -> Result<(), MeshError> {
        let moved = self.displaced_vertices(d)?;
        for (t, v) in self.triangles.iter().enumerate() {
            let area = signed_area(moved[v[0]], moved[v[1]], moved[v[2]]);
            if area <= 0.0 {
                return Err(MeshError::Inverted { element: t, area });
            }
        }
        self.vertices = moved;
        self.deformation = None;
        Ok(())
    }

    /// Interior angles of a triangle in radians, for the reference configuration.
    pub fn angles(&self, t: usize) -> [f64; 3] {
        triangle_angles(self.triangles[t].map(|i| self.vertices[i]))
    }

    pub fn min_angle(&self) -> f64 {
        (0..self.nt()).flat_map(|t| self.angles(t)).fold(f64::INFINITY, f64::min)
    }

    pub fn max_angle(&self) -> f64 {
        (0..self.nt()).flat_map(|t| self.angles(t)).fold(0.0, f64::max)
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges
            .iter()
            .map(|[a, b]| {
                let (p, q) = (self.vertices[*a], self.vertices[*b]);
                (p[0] - q[0]).hypot(p[1] - q[1])
            })
            .fold(0.0, f64::max)
    }

    pub(crate) fn vertices_mut(&mut self) -> &mut Vec<[f64; 2]> {
        &mut self.vertices
    }
}

pub(crate) fn triangle_angles(p: [[f64; 2]; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        let (a, b, c) = (p[i], p[(i + 1) % 3], p[(i + 2) % 3]);
        let u = [b[0] - a[0], b[1] - a[1]];
        let v = [c[0] - a[0], c[1] - a[1]];
        let cross = u[0] * v[1] - u[1] * v[0];
        let dot = u[0] * v[0] + u[1] * v[1];
        out[i] = cross.atan2(dot);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> Mesh2D {
        Mesh2D::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![([0, 1, 2], "d".into()), ([0, 2, 3], "d".into())],
            vec![
                ([0, 1], "bottom".into()),
                ([1, 2], "right".into()),
                ([3, 2], "top".into()),
                ([3, 0], "left".into()),
            ],
        )
        .unwrap()
    }

    #[test]
    fn boundary_edges_are_reoriented_counter_clockwise() {
        let m = two_triangles();
        assert_eq!(m.ne(), 5);
        assert_eq!(m.boundary_edges()[2], [2, 3]);
        assert_eq!(m.boundary_edges()[3], [3, 0]);
        assert_eq!(m.boundary_edges_with("left"), vec![3]);
        assert_eq!(m.area().unwrap(), 1.0);
    }

    #[test]
    fn invalid_meshes_are_rejected() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let cw = Mesh2D::new(v.clone(), vec![([0, 2, 1], "d".into())], vec![]);
        assert!(matches!(cw, Err(MeshError::Inverted { .. })));
        let unmarked = Mesh2D::new(v, vec![([0, 1, 2], "d".into())], vec![([0, 1], "b".into())]);
        assert!(matches!(unmarked, Err(MeshError::Topology(_))));
    }

    #[test]
    fn doubling_deformation_quadruples_area() {
        let mut m = two_triangles();
        let coeffs: Vec<f64> = m.vertices().iter().flat_map(|p| [p[0], p[1]]).collect();
        let d = Deformation { order: 1, coeffs };
        m.set_deformation(d.clone()).unwrap();
        assert!((m.area().unwrap() - 4.0).abs() < 1e-12);
        m.unset_deformation();
        assert_eq!(m.area().unwrap(), 1.0);
        m.move_nodes(&d).unwrap();
        assert!((m.area().unwrap() - 4.0).abs() < 1e-13);
    }

    #[test]
    fn inverting_move_leaves_mesh_unchanged() {
        let mut m = two_triangles();
        let mut coeffs = vec![0.0; 8];
        coeffs[2 * 2] = -2.0;
        let before = m.vertices().to_vec();
        assert!(m.move_nodes(&Deformation { order: 1, coeffs: coeffs.clone() }).is_err());
        assert_eq!(m.vertices(), &before[..]);
        m.set_deformation(Deformation { order: 1, coeffs }).unwrap();
        assert!(matches!(m.area(), Err(MeshError::NonPositiveJacobian { .. })));
    }
}
