//! Shape derivatives on a space-time cylinder where only the spatial coordinate moves.

use super::{descent_loop, Direction, OptConfig, OptHistory};
use crate::fem::{assemble_bilinear, assemble_linear, Bindings, FESpace, GridFunction};
use crate::linalg::{dot, solve_dirichlet, DenseVector};
use crate::mesh::Mesh2D;
use crate::shapecalc::{ShapeError, ShapeProblem};
use crate::symbolic::{Expr, FormTerm, Kind};

/// Parameter names of the entries of the deformation gradient, row-major.
pub const F_PARAMS: [&str; 4] = ["F11", "F12", "F21", "F22"];

/// Deformation gradient built from the four parameters, for hand-written pullbacks whose
/// derivative is taken entry by entry.
pub fn parametric_shape_f() -> Expr {
    let p = F_PARAMS.map(Expr::parameter);
    Expr::stack_matrix([&p[0], &p[1], &p[2], &p[3]]).expect("scalar entries")
}

fn identity_params(b: &mut Bindings) {
    b.params.retain(|(n, _)| !F_PARAMS.contains(&n.as_str()));
    for (n, v) in F_PARAMS.iter().zip([1.0, 0.0, 0.0, 1.0]) {
        b.params.push((n.to_string(), v));
    }
}

/// Derivative of the hand-pulled Lagrangian for deformations `(x, tau) -> (x + V, tau)` with a
/// scalar field `V` from `scalar`: the sum of its derivatives in x along V, in F11 along
/// `dV/dx` and in F12 along `dV/dtau`.
pub fn restricted_first_order(prob: &ShapeProblem, scalar: &FESpace) -> Result<DenseVector, ShapeError> {
    let pulled = prob.pulled_lagrangian().ok_or(ShapeError::NoPulledForm)?;
    let uses_f = pulled.iter().any(|t| t.integrand.contains(&|e| matches!(e.kind(), Kind::Parameter(n) if &**n == "F11")));
    if !uses_f {
        return Err(ShapeError::Invalid("the pulled-back Lagrangian does not use the parametric F".into()));
    }
    if scalar.vdim() != 1 {
        return Err(ShapeError::Invalid("restricted directions live in a scalar space".into()));
    }
    let v = scalar.test();
    let gv = v.grad()?;
    let (f11, f12) = (Expr::parameter(F_PARAMS[0]), Expr::parameter(F_PARAMS[1]));
    let mut terms = Vec::new();
    for t in pulled {
        for d in [t.diff(&Expr::x(), &v)?, t.diff(&f11, &gv.component(0)?)?, t.diff(&f12, &gv.component(1)?)?] {
            if !d.integrand.is_zero() {
                terms.push(d);
            }
        }
    }
    let mut b = prob.bindings();
    identity_params(&mut b);
    Ok(assemble_linear(prob.mesh(), &terms, scalar, &b)?)
}

/// Average over the time direction (second coordinate) of a piecewise linear field on a
/// mesh whose vertices form full columns of equal x, using the trapezoidal rule along each
/// column of the reference mesh.
pub fn time_average_field(mesh: &Mesh2D, w: &GridFunction) -> Result<GridFunction, ShapeError> {
    let s = w.space();
    if s.vdim() != 1 || s.order() != 1 {
        return Err(ShapeError::Invalid("time averaging needs a scalar order-1 field".into()));
    }
    let verts = mesh.vertices();
    let mut order: Vec<usize> = (0..verts.len()).collect();
    order.sort_by(|&a, &b| verts[a][0].total_cmp(&verts[b][0]).then(verts[a][1].total_cmp(&verts[b][1])));
    let scale = verts.iter().fold(0.0f64, |m, p| m.max(p[0].abs()).max(p[1].abs())).max(1.0);
    let tol = 1e-10 * scale;
    let mut columns: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match columns.last_mut() {
            Some(c) if (verts[c[0]][0] - verts[i][0]).abs() <= tol => c.push(i),
            _ => columns.push(vec![i]),
        }
    }
    let span = |c: &[usize]| (verts[c[0]][1], verts[c[c.len() - 1]][1]);
    let (t0, t1) = span(&columns[0]);
    if t1 - t0 <= tol {
        return Err(ShapeError::Invalid("mesh has no extent in time".into()));
    }
    let mut out = vec![0.0; s.ndof()];
    for c in &columns {
        let (a, b) = span(c);
        if c.len() < 2 || (a - t0).abs() > tol || (b - t1).abs() > tol {
            return Err(ShapeError::Invalid("mesh vertices do not form full time columns".into()));
        }
        let mut integral = 0.0;
        for k in 1..c.len() {
            let dt = verts[c[k]][1] - verts[c[k - 1]][1];
            integral += 0.5 * dt * (w.coeffs[c[k]] + w.coeffs[c[k - 1]]);
        }
        for &i in c {
            out[i] = integral / (t1 - t0);
        }
    }
    Ok(GridFunction::from_coeffs(s, "time average", out)?)
}

/// Gradient descent for a space-time problem: the restricted derivative is turned into a
/// time-dependent gradient with the H1 inner product on `scalar`, averaged in time, and used
/// as the x-component of the step.
pub fn spacetime_descent(
    prob: &mut ShapeProblem,
    scalar: &FESpace,
    cfg: &OptConfig,
    on_accept: impl FnMut(&ShapeProblem, usize) -> Result<(), ShapeError>,
) -> Result<OptHistory, ShapeError> {
    if prob.vec_space().order() != scalar.order() || prob.vec_space().ndof() != 2 * scalar.ndof() {
        return Err(ShapeError::Invalid("scalar and vector spaces must share the dof layout".into()));
    }
    descent_loop(
        prob,
        cfg,
        |p| {
            let (x, slope) = spacetime_direction(p, scalar)?;
            Ok(Direction { x, slope })
        },
        on_accept,
    )
}

/// Time-averaged descent field embedded as the x-component of a vector field, and the slope
/// `dJ . W`.
pub fn spacetime_direction(prob: &ShapeProblem, scalar: &FESpace) -> Result<(DenseVector, f64), ShapeError> {
    let dj = restricted_first_order(prob, scalar)?;
    let (w, v) = (scalar.trial(), scalar.test());
    let h1 = FormTerm::volume(w.grad()?.inner(&v.grad()?)? + w.clone() * v.clone())?;
    let a = assemble_bilinear(prob.mesh(), &[h1], scalar, scalar, &Bindings::new())?;
    let wt = solve_dirichlet(&a, &dj, &vec![true; scalar.ndof()], false)?;
    let avg = time_average_field(prob.mesh(), &GridFunction::from_coeffs(scalar, "gradient", wt)?)?;
    let slope = dot(&dj, &avg.coeffs);
    let x = avg.coeffs.iter().flat_map(|&c| [c, 0.0]).collect();
    Ok((x, slope))
}
