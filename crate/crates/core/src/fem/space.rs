use std::sync::Arc;

use super::basis;
use super::FemError;
use crate::mesh::{Deformation, Mesh2D};
use crate::symbolic::{fresh_id, Expr, FnRef, Value};

#[derive(Debug)]
struct SpaceData {
    id: u64,
    topology_id: u64,
    order: usize,
    vdim: usize,
    nscalar: usize,
    dirichlet: Vec<String>,
    free: Vec<bool>,
}

/// Continuous Lagrange space, scalar or 2-vector valued.
///
/// Dofs: vertex dofs, then one dof per edge for order 2. Vector spaces interleave the two
/// components, so scalar dof `d` owns vector dofs `2d` and `2d + 1`. Cloning is cheap and
/// keeps the identity of the space.
#[derive(Debug, Clone)]
pub struct FESpace(Arc<SpaceData>);

impl PartialEq for FESpace {
    fn eq(&self, other: &Self) -> bool {
        self.0.id == other.0.id
    }
}

impl FESpace {
    /// Scalar H1 space with homogeneous Dirichlet conditions on the given boundary markers.
    pub fn h1(mesh: &Mesh2D, order: usize, dirichlet: &[&str]) -> Result<Self, FemError> {
        Self::new(mesh, order, 1, dirichlet)
    }

    pub fn vector_h1(mesh: &Mesh2D, order: usize, dirichlet: &[&str]) -> Result<Self, FemError> {
        Self::new(mesh, order, 2, dirichlet)
    }

    fn new(mesh: &Mesh2D, order: usize, vdim: usize, dirichlet: &[&str]) -> Result<Self, FemError> {
        if order != 1 && order != 2 {
            return Err(FemError::InvalidSpace(format!("order {order} is not supported")));
        }
        for m in dirichlet {
            if !mesh.boundary_names().iter().any(|b| b == m) {
                return Err(FemError::UnknownMarker(m.to_string()));
            }
        }
        let nscalar = mesh.scalar_dofs(order);
        let dirichlet: Vec<String> = dirichlet.iter().map(|s| s.to_string()).collect();
        let mut free = vec![true; vdim * nscalar];
        if !dirichlet.is_empty() {
            for (d, fixed) in boundary_scalar_dofs(mesh, order, &dirichlet).into_iter().enumerate() {
                if fixed {
                    free[vdim * d..vdim * (d + 1)].fill(false);
                }
            }
        }
        Ok(Self(Arc::new(SpaceData {
            id: fresh_id(),
            topology_id: mesh.topology_id(),
            order,
            vdim,
            nscalar,
            dirichlet,
            free,
        })))
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn order(&self) -> usize {
        self.0.order
    }

    pub fn vdim(&self) -> usize {
        self.0.vdim
    }

    pub fn ndof(&self) -> usize {
        self.0.vdim * self.0.nscalar
    }

    pub fn topology_id(&self) -> u64 {
        self.0.topology_id
    }

    pub fn dirichlet_markers(&self) -> &[String] {
        &self.0.dirichlet
    }

    /// Dofs not constrained by Dirichlet conditions.
    pub fn free_dofs(&self) -> &[bool] {
        &self.0.free
    }

    pub fn fn_ref(&self) -> FnRef {
        FnRef::new(self.0.id, self.0.vdim, if self.0.vdim == 1 { "u" } else { "V" })
    }

    pub fn trial(&self) -> Expr {
        Expr::trial(self.fn_ref())
    }

    pub fn test(&self) -> Expr {
        Expr::test(self.fn_ref())
    }

    /// Mask of dofs supported on boundary edges with the given markers (all edges if empty).
    pub fn boundary_dofs(&self, mesh: &Mesh2D, markers: &[&str]) -> Result<Vec<bool>, FemError> {
        self.check_mesh(mesh)?;
        for m in markers {
            if !mesh.boundary_names().iter().any(|b| b == m) {
                return Err(FemError::UnknownMarker(m.to_string()));
            }
        }
        let markers: Vec<String> = markers.iter().map(|s| s.to_string()).collect();
        let vd = self.0.vdim;
        let mut mask = vec![false; self.ndof()];
        for (d, on) in boundary_scalar_dofs(mesh, self.0.order, &markers).into_iter().enumerate() {
            if on {
                mask[vd * d..vd * (d + 1)].fill(true);
            }
        }
        Ok(mask)
    }

    pub(crate) fn check_mesh(&self, mesh: &Mesh2D) -> Result<(), FemError> {
        if mesh.topology_id() != self.0.topology_id {
            return Err(FemError::SpaceMismatch("space was built on a different mesh".into()));
        }
        Ok(())
    }

    /// Global dof index of local basis function `k`, component `c`.
    #[inline]
    pub(crate) fn global(&self, scalar: usize, c: usize) -> usize {
        self.0.vdim * scalar + c
    }
}

fn boundary_scalar_dofs(mesh: &Mesh2D, order: usize, markers: &[String]) -> Vec<bool> {
    let mut mask = vec![false; mesh.scalar_dofs(order)];
    for b in 0..mesh.boundary_edges().len() {
        if !markers.is_empty() && !markers.iter().any(|m| m == mesh.boundary_marker(b)) {
            continue;
        }
        let [p, q] = mesh.boundary_edges()[b];
        mask[p] = true;
        mask[q] = true;
        if order == 2 {
            let (t, k) = mesh.boundary_element(b);
            mask[mesh.nv() + mesh.triangle_edges(t)[k]] = true;
        }
    }
    mask
}

/// Coefficient vector over a space.
///
/// Each grid function carries its own symbol id; clones share it, so a clone can stand in
/// for the original in a compiled expression.
#[derive(Debug, Clone)]
pub struct GridFunction {
    space: FESpace,
    pub coeffs: Vec<f64>,
    fnref: FnRef,
}

impl GridFunction {
    pub fn new(space: &FESpace, name: &str) -> Self {
        Self {
            space: space.clone(),
            coeffs: vec![0.0; space.ndof()],
            fnref: FnRef::new(fresh_id(), space.vdim(), name),
        }
    }

    pub fn from_coeffs(space: &FESpace, name: &str, coeffs: Vec<f64>) -> Result<Self, FemError> {
        if coeffs.len() != space.ndof() {
            return Err(FemError::SpaceMismatch(format!("{} coefficients for {} dofs", coeffs.len(), space.ndof())));
        }
        let mut g = Self::new(space, name);
        g.coeffs = coeffs;
        Ok(g)
    }

    pub fn space(&self) -> &FESpace {
        &self.space
    }

    pub fn fn_ref(&self) -> &FnRef {
        &self.fnref
    }

    /// Symbol standing for this function in expressions.
    pub fn expr(&self) -> Expr {
        Expr::grid_func(self.fnref.clone())
    }

    pub fn set_coeffs(&mut self, c: &[f64]) -> Result<(), FemError> {
        if c.len() != self.coeffs.len() {
            return Err(FemError::SpaceMismatch(format!("{} coefficients for {} dofs", c.len(), self.coeffs.len())));
        }
        self.coeffs.copy_from_slice(c);
        Ok(())
    }

    /// The field as a mesh deformation (2-vector spaces only).
    pub fn deformation(&self) -> Result<Deformation, FemError> {
        if self.space.vdim() != 2 {
            return Err(FemError::SpaceMismatch("a deformation needs a 2-vector field".into()));
        }
        Ok(Deformation { order: self.space.order(), coeffs: self.coeffs.clone() })
    }

    /// Vertex values, one entry per vertex (second component zero for scalar fields).
    pub fn vertex_values(&self, mesh: &Mesh2D) -> Vec<[f64; 2]> {
        let vd = self.space.vdim();
        (0..mesh.nv())
            .map(|v| if vd == 1 { [self.coeffs[v], 0.0] } else { [self.coeffs[2 * v], self.coeffs[2 * v + 1]] })
            .collect()
    }

    /// Value and physical gradient inside triangle `t` at reference point `xi`, in the
    /// current configuration of the mesh.
    pub fn eval(&self, mesh: &Mesh2D, t: usize, xi: [f64; 2]) -> Result<(Value, Value), FemError> {
        self.space.check_mesh(mesh)?;
        let g = mesh.geometry(t, xi, None)?;
        let s = basis::shape_values(self.space.order(), xi);
        Ok(self.eval_with(mesh, t, &s, &|r| g.physical_grad(r)))
    }

    pub(crate) fn eval_with(
        &self,
        mesh: &Mesh2D,
        t: usize,
        s: &basis::ShapeValues,
        to_phys: &dyn Fn([f64; 2]) -> [f64; 2],
    ) -> (Value, Value) {
        let (dofs, n) = mesh.element_dofs(t, self.space.order());
        if self.space.vdim() == 1 {
            let (mut v, mut g) = (0.0, [0.0; 2]);
            for k in 0..n {
                let c = self.coeffs[dofs[k]];
                v += c * s.vals[k];
                g[0] += c * s.grads[k][0];
                g[1] += c * s.grads[k][1];
            }
            (Value::Scalar(v), Value::Vector(to_phys(g)))
        } else {
            let (mut v, mut g) = ([0.0; 2], [[0.0; 2]; 2]);
            for k in 0..n {
                for i in 0..2 {
                    let c = self.coeffs[2 * dofs[k] + i];
                    v[i] += c * s.vals[k];
                    g[i][0] += c * s.grads[k][0];
                    g[i][1] += c * s.grads[k][1];
                }
            }
            (Value::Vector(v), Value::Matrix([to_phys(g[0]), to_phys(g[1])]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_rect;

    #[test]
    fn dof_counts_and_dirichlet_mask() {
        let m = generate_rect([0.0, 1.0], [0.0, 1.0], 0.5).unwrap();
        let p1 = FESpace::h1(&m, 1, &["left"]).unwrap();
        assert_eq!(p1.ndof(), m.nv());
        let fixed: Vec<usize> = (0..p1.ndof()).filter(|&d| !p1.free_dofs()[d]).collect();
        assert!(fixed.iter().all(|&d| m.vertices()[d][0] == 0.0));
        assert_eq!(fixed.len(), m.boundary_edges_with("left").len() + 1);
        let p2 = FESpace::vector_h1(&m, 2, &[]).unwrap();
        assert_eq!(p2.ndof(), 2 * (m.nv() + m.ne()));
        assert!(p2.free_dofs().iter().all(|&f| f));
        assert!(FESpace::h1(&m, 3, &[]).is_err());
        assert!(matches!(FESpace::h1(&m, 1, &["nope"]), Err(FemError::UnknownMarker(_))));
    }

    #[test]
    fn boundary_dofs_cover_edge_midpoints() {
        let m = generate_rect([0.0, 1.0], [0.0, 1.0], 0.5).unwrap();
        let s = FESpace::vector_h1(&m, 2, &[]).unwrap();
        let mask = s.boundary_dofs(&m, &[]).unwrap();
        let nb = m.boundary_edges().len();
        // nb boundary vertices plus nb boundary edge midpoints, two components each
        assert_eq!(mask.iter().filter(|&&b| b).count(), 2 * 2 * nb);
    }
}
