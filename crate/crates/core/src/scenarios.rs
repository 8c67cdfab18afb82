//! Ready-made problems: a volume plus boundary functional, Poisson tracking, the clover and
//! ellipse level-set functionals, and tracking for the heat equation on a space-time cylinder.
//!
//! Each problem also carries its Lagrangian pulled back by hand, so both differentiation
//! modes are available.

use crate::fem::FESpace;
use crate::mesh::{generate_disk, generate_rect};
use crate::optimize::parametric_shape_f;
use crate::shapecalc::{ShapeError, ShapeProblem};
use crate::symbolic::{Expr, ExprError, FormTerm};

fn xy() -> (Expr, Expr) {
    (Expr::x(), Expr::y())
}

/// `det F` and `det F |F^-T n|`.
fn measures(f: &Expr) -> Result<(Expr, Expr), ExprError> {
    let det = f.det()?;
    let bnd = det.clone() * f.inv()?.transpose()?.matvec(&Expr::normal())?.norm()?;
    Ok((det, bnd))
}

/// `(0.5 + |x|)^2 (0.5 - |x|)^2`.
pub fn bump() -> Expr {
    let (x, y) = xy();
    let r = (&x * &x + &y * &y).sqrt().unwrap();
    (Expr::scalar(0.5) + r.clone()).pow(2.0).unwrap() * (Expr::scalar(0.5) - r).pow(2.0).unwrap()
}

/// Perturbation field `(x^2 y e^y, y^2 x e^x)` used for Taylor tests.
pub fn taylor_field() -> Expr {
    let (x, y) = xy();
    Expr::stack_vector(&(&x * &x * &y * y.exp().unwrap()), &(&y * &y * &x * x.exp().unwrap())).unwrap()
}

/// `int_Omega f + int_dOmega f` for [`bump`] on the disk of radius 1/2 around (1/2, 1/2).
pub fn volume_boundary(maxh: f64, order: usize) -> Result<ShapeProblem, ShapeError> {
    let mesh = generate_disk([0.5, 0.5], 0.5, maxh)?;
    let vec = FESpace::vector_h1(&mesh, order, &[])?;
    let f = bump();
    let cost = vec![FormTerm::volume(f.clone())?, FormTerm::boundary(f.clone())?];
    let mut p = ShapeProblem::unconstrained(mesh, &vec, cost)?;
    let (dv, db) = measures(&Expr::shape_f())?;
    p.set_pulled_lagrangian(vec![FormTerm::volume(f.clone() * dv)?, FormTerm::boundary(f * db)?]);
    Ok(p)
}

/// Volume functional `int_Omega f` on a disk, with its hand-pulled form.
pub fn level_set(f: Expr, center: [f64; 2], radius: f64, maxh: f64, order: usize) -> Result<ShapeProblem, ShapeError> {
    let mesh = generate_disk(center, radius, maxh)?;
    let vec = FESpace::vector_h1(&mesh, order, &[])?;
    let mut p = ShapeProblem::unconstrained(mesh, &vec, vec![FormTerm::volume(f.clone())?])?;
    let (dv, _) = measures(&Expr::shape_f())?;
    p.set_pulled_lagrangian(vec![FormTerm::volume(f * dv)?]);
    Ok(p)
}

/// Product of four shifted ellipse distances minus `eps`; its negative set is a
/// four-leaf clover.
pub fn clover_function(a: f64, b: f64, eps: f64) -> Expr {
    let (x, y) = xy();
    let leaf = |cx: f64, cy: f64, wx: f64, wy: f64| {
        let dx = &x - cx;
        let dy = &y - cy;
        (wx * (&dx * &dx) + wy * (&dy * &dy)).sqrt().unwrap() - 1.0
    };
    leaf(a, 0.0, 1.0, b) * leaf(-a, 0.0, 1.0, b) * leaf(0.0, a, b, 1.0) * leaf(0.0, -a, b, 1.0) - eps
}

/// Clover functional with a = 4/5, b = 2, eps = 1e-3 starting from the unit disk.
pub fn clover(maxh: f64, order: usize) -> Result<ShapeProblem, ShapeError> {
    level_set(clover_function(0.8, 2.0, 1e-3), [0.0, 0.0], 1.0, maxh, order)
}

/// `x^2/a^2 + y^2/b^2 - 1`.
pub fn ellipse_function(a: f64, b: f64) -> Expr {
    let (x, y) = xy();
    &x * &x * (1.0 / (a * a)) + &y * &y * (1.0 / (b * b)) - 1.0
}

/// Ellipse functional with semi-axes `a` and `1/a`, starting from the unit disk.
pub fn ellipse(a: f64, maxh: f64, order: usize) -> Result<ShapeProblem, ShapeError> {
    level_set(ellipse_function(a, 1.0 / a), [0.0, 0.0], 1.0, maxh, order)
}

/// Desired state `x(1-x)y(1-y)` and matching source `2y(1-y) + 2x(1-x)`.
pub fn poisson_data() -> (Expr, Expr) {
    let (x, y) = xy();
    let (bx, by) = (&x * (1.0 - &x), &y * (1.0 - &y));
    (&bx * &by, 2.0 * &by + 2.0 * &bx)
}

/// `int (u - u_d)^2` subject to `-Laplace u = f`, u = 0 on the boundary, starting from the
/// disk of radius 1/2 around (1/2, 1/2). `order` is used for both the state and the
/// directions.
pub fn poisson(maxh: f64, order: usize) -> Result<ShapeProblem, ShapeError> {
    let mesh = generate_disk([0.5, 0.5], 0.5, maxh)?;
    let vec = FESpace::vector_h1(&mesh, order, &[])?;
    let fes = FESpace::h1(&mesh, order, &["circle"])?;
    let (ud, f) = poisson_data();
    let (ud2, f2) = (ud.clone(), f.clone());
    let mut p = ShapeProblem::constrained(mesh, &vec, &fes, move |u, p| {
        let e = u.clone() - ud2;
        let cost = vec![FormTerm::volume(&e * &e)?];
        let eq = vec![FormTerm::volume(u.grad()?.inner(&p.grad()?)? - f2 * p.clone())?];
        Ok((cost, eq))
    })?;
    let (u, q) = (p.state_expr().expect("constrained"), p.adjoint_expr().expect("constrained"));
    let fm = Expr::shape_f();
    let (det, _) = measures(&fm)?;
    let fit = fm.inv()?.transpose()?;
    let e = u.clone() - ud;
    let g = (&e * &e) * det.clone() + (fit.matvec(&u.grad()?)?.inner(&fit.matvec(&q.grad()?)?)? - f * q) * det;
    p.set_pulled_lagrangian(vec![FormTerm::volume(g)?]);
    Ok(p)
}

/// Desired state `x(1-x) tau` and source `x(1-x) + 2 tau` on the space-time cylinder.
pub fn heat_data() -> (Expr, Expr) {
    let (x, t) = xy();
    let b = &x * (1.0 - &x);
    (&b * &t, b + 2.0 * &t)
}

/// Tracking of the heat equation on `(x0, x1) x (0, 1)`, second coordinate being time. The
/// state vanishes on the lateral sides and at time zero. The hand-pulled Lagrangian uses the
/// parametric F of [`parametric_shape_f`]; the returned scalar space holds the restricted
/// directions.
pub fn heat(x: [f64; 2], maxh: f64) -> Result<(ShapeProblem, FESpace), ShapeError> {
    let mesh = generate_rect(x, [0.0, 1.0], maxh)?;
    let vec = FESpace::vector_h1(&mesh, 1, &[])?;
    let scalar = FESpace::h1(&mesh, 1, &[])?;
    let fes = FESpace::h1(&mesh, 1, &["left", "right", "bottom"])?;
    let (ud, f) = heat_data();
    let (ud2, f2) = (ud.clone(), f.clone());
    let mut p = ShapeProblem::constrained(mesh, &vec, &fes, move |u, p| {
        let e = u.clone() - ud2;
        let (gu, gp) = (u.grad()?, p.grad()?);
        let cost = vec![FormTerm::volume(&e * &e)?];
        let eq = gu.component(1)? * p.clone() + gu.component(0)? * gp.component(0)? - f2 * p.clone();
        Ok((cost, vec![FormTerm::volume(eq)?]))
    })?;
    let (u, q) = (p.state_expr().expect("constrained"), p.adjoint_expr().expect("constrained"));
    let fm = parametric_shape_f();
    let det = fm.det()?;
    let fit = fm.inv()?.transpose()?;
    let (gu, gq) = (fit.matvec(&u.grad()?)?, fit.matvec(&q.grad()?)?);
    let e = u.clone() - ud;
    let g = (&e * &e + gu.component(1)? * q.clone() + gu.component(0)? * gq.component(0)? - f * q) * det;
    p.set_pulled_lagrangian(vec![FormTerm::volume(g)?]);
    for (n, v) in crate::optimize::F_PARAMS.iter().zip([1.0, 0.0, 0.0, 1.0]) {
        p.set_param(n, v);
    }
    Ok((p, scalar))
}
