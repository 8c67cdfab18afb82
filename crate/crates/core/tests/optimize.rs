use shapediff::fem::{integrate, project, Bindings, FESpace, GridFunction};
use shapediff::linalg::{dot, norm_inf, solve_dirichlet};
use shapediff::optimize::{
    extend_boundary_field, gradient_descent, newton_loop, restricted_first_order, shape_gradient, spacetime_direction,
    time_average_field, InnerProduct, OptConfig, StopReason,
};
use shapediff::scenarios;
use shapediff::shapecalc::{DiffMode, Regularization};
use shapediff::symbolic::{Expr, FormTerm};

fn zeros(n: usize) -> Vec<f64> {
    vec![0.0; n]
}

#[test]
fn shape_gradients_are_descent_directions() {
    let mut p = scenarios::poisson(0.1, 1).unwrap();
    p.solve().unwrap();
    let dj = p.first_order(DiffMode::Full).unwrap();
    let (h1, n1) = shape_gradient(p.mesh(), p.vec_space(), InnerProduct::H1, &dj).unwrap();
    let (cr, n2) = shape_gradient(p.mesh(), p.vec_space(), InnerProduct::ElasticityCr(10.0), &dj).unwrap();
    for (g, n) in [(&h1, n1), (&cr, n2)] {
        let pairing = -dot(&dj, &g.coeffs);
        assert!(pairing < 0.0);
        assert!((pairing + n * n).abs() <= 1e-12 * n * n);
    }
    let diff: Vec<f64> = h1.coeffs.iter().zip(&cr.coeffs).map(|(a, b)| a - b).collect();
    assert!(norm_inf(&diff) > 1e-3 * norm_inf(&h1.coeffs));
    let (z, nz) = shape_gradient(p.mesh(), p.vec_space(), InnerProduct::H1, &zeros(dj.len())).unwrap();
    assert_eq!(norm_inf(&z.coeffs), 0.0);
    assert_eq!(nz, 0.0);
}

#[test]
fn scaling_the_inner_product_keeps_the_direction() {
    let p = scenarios::volume_boundary(0.1, 1).unwrap();
    let dj = p.first_order(DiffMode::Full).unwrap();
    let a = InnerProduct::Elasticity.matrix(p.mesh(), p.vec_space()).unwrap();
    let free = vec![true; dj.len()];
    let g = solve_dirichlet(&a, &dj, &free, false).unwrap();
    let c = 7.5;
    let gc = solve_dirichlet(&a.scale(c), &dj, &free, false).unwrap();
    let (n, nc) = (dot(&g, &a.mul_vec(&g)).sqrt(), dot(&gc, &a.mul_vec(&gc)).sqrt());
    for (x, y) in g.iter().zip(&gc) {
        assert!((x / c - y).abs() <= 1e-10 * norm_inf(&g));
        assert!((x / n - y / nc).abs() <= 1e-10);
    }
}

#[test]
fn cauchy_riemann_penalty_reduces_the_residual_of_the_gradient() {
    let p = scenarios::clover(0.1, 1).unwrap();
    let dj = p.first_order(DiffMode::Full).unwrap();
    let residual = |gamma: f64| {
        let (g, n) = shape_gradient(p.mesh(), p.vec_space(), InnerProduct::ElasticityCr(gamma), &dj).unwrap();
        let scaled = GridFunction::from_coeffs(p.vec_space(), "g", g.coeffs.iter().map(|x| x / n).collect()).unwrap();
        shapediff::optimize::conformality_residual(p.mesh(), &scaled).unwrap()
    };
    assert!(residual(10.0) < residual(0.0));
}

#[test]
fn extension_keeps_boundary_values_and_minimizes_energy() {
    let p = scenarios::poisson(0.1, 2).unwrap();
    let (mesh, vec) = (p.mesh(), p.vec_space());
    let v = project(mesh, vec, &scenarios::taylor_field(), &Bindings::new()).unwrap();
    let ext = extend_boundary_field(mesh, vec, &v.coeffs).unwrap();
    let bnd = vec.boundary_dofs(mesh, &[]).unwrap();
    for ((a, b), on) in v.coeffs.iter().zip(&ext.coeffs).zip(&bnd) {
        if *on {
            assert!((a - b).abs() <= 1e-12);
        }
    }
    let energy = |g: &GridFunction| {
        let e = g.expr();
        let ge = e.grad().unwrap();
        let s = ge.clone() + ge.transpose().unwrap();
        let t = FormTerm::volume(s.inner(&ge).unwrap() + e.inner(&e).unwrap()).unwrap();
        integrate(mesh, &[t], &Bindings::new().func(g)).unwrap()
    };
    assert!(energy(&ext) <= energy(&v) * (1.0 + 1e-12));
    let z = extend_boundary_field(mesh, vec, &zeros(vec.ndof())).unwrap();
    assert_eq!(norm_inf(&z.coeffs), 0.0);
    assert!(extend_boundary_field(mesh, vec, &[0.0]).is_err());
}

#[test]
fn descent_accepts_only_decreasing_steps() {
    let mut p = scenarios::poisson(0.1, 1).unwrap();
    let cfg = OptConfig { max_iter: 15, ..Default::default() };
    let mut calls = 0;
    let h = gradient_descent(&mut p, InnerProduct::H1, &cfg, |_, _| {
        calls += 1;
        Ok(())
    })
    .unwrap();
    let costs = h.accepted_costs();
    assert!(costs.windows(2).all(|w| w[1] < w[0]), "{costs:?}");
    assert_eq!(calls, h.iterations);
    assert!(h.j_final < h.j_initial);
    assert_eq!(p.cost().unwrap(), h.j_final);
    let mut out = Vec::new();
    h.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("iter,J,gradnorm,alpha,accepted\n"));
    assert_eq!(text.lines().count(), h.records.len() + 1);
}

#[test]
fn stationary_start_takes_no_steps() {
    let mut p = scenarios::level_set(scenarios::bump(), [0.0, 0.0], 0.5, 0.1, 1).unwrap();
    let cfg = OptConfig { eps_grad: 1e-4, ..Default::default() };
    let h = gradient_descent(&mut p, InnerProduct::H1, &cfg, |_, _| Ok(())).unwrap();
    assert_eq!(h.stop, StopReason::Converged);
    assert_eq!(h.iterations, 0);
    assert!(h.records.is_empty());
    let h = newton_loop(&mut p, Regularization::BoundaryTangential(100.0), &cfg, |_, _| Ok(())).unwrap();
    assert_eq!(h.iterations, 0);
    assert!(h.converged());
}

#[test]
fn restricted_derivative_matches_moving_only_x() {
    let (mut p, scalar) = scenarios::heat([0.2, 0.8], 0.1).unwrap();
    p.solve().unwrap();
    let (x, t) = (Expr::x(), Expr::y());
    let v = project(p.mesh(), &scalar, &(&x * (1.0 - &x) * (1.0 + &t)), &Bindings::new()).unwrap();
    let dj = dot(&restricted_first_order(&p, &scalar).unwrap(), &v.coeffs);
    let embed = |s: f64| -> Vec<f64> { v.coeffs.iter().flat_map(|&c| [s * c, 0.0]).collect() };
    let h = 1e-3;
    let fd = (p.cost_at(&embed(h)).unwrap() - p.cost_at(&embed(-h)).unwrap()) / (2.0 * h);
    assert!((dj - fd).abs() <= 1e-2 * fd.abs(), "{dj} vs {fd}");
    let z = dot(&restricted_first_order(&p, &scalar).unwrap(), &zeros(scalar.ndof()));
    assert_eq!(z, 0.0);
}

#[test]
fn time_averaged_field_descends() {
    let (mut p, scalar) = scenarios::heat([0.2, 0.8], 0.1).unwrap();
    p.solve().unwrap();
    let (x, slope) = spacetime_direction(&p, &scalar).unwrap();
    assert!(slope > 0.0);
    let dj = restricted_first_order(&p, &scalar).unwrap();
    let w: Vec<f64> = x.iter().step_by(2).map(|c| -c).collect();
    assert!(dot(&dj, &w) < 0.0);
    // the averaged field is constant along each time column
    let g = GridFunction::from_coeffs(&scalar, "w", w.clone()).unwrap();
    let again = time_average_field(p.mesh(), &g).unwrap();
    for (a, b) in again.coeffs.iter().zip(&w) {
        assert!((a - b).abs() <= 1e-14 * norm_inf(&w));
    }
    assert!(restricted_first_order(&scenarios::poisson(0.2, 1).unwrap(), &scalar).is_err());
}

#[test]
fn node_moving_mode_matches_deformation_mode_at_first_step() {
    let run = |move_nodes: bool| {
        let mut p = scenarios::poisson(0.15, 1).unwrap();
        let cfg = OptConfig { max_iter: 1, move_nodes, ..Default::default() };
        gradient_descent(&mut p, InnerProduct::H1, &cfg, |_, _| Ok(())).unwrap().j_final
    };
    let (a, b) = (run(false), run(true));
    assert!((a - b).abs() <= 1e-12 * a, "{a} {b}");
}

#[test]
fn scalar_space_size_is_checked() {
    let (mut p, _) = scenarios::heat([0.2, 0.8], 0.2).unwrap();
    let other = FESpace::h1(p.mesh(), 2, &[]).unwrap();
    let cfg = OptConfig::default();
    assert!(shapediff::optimize::spacetime_descent(&mut p, &other, &cfg, |_, _| Ok(())).is_err());
}
