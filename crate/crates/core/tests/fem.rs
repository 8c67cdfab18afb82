use shapediff::fem::{assemble_bilinear, assemble_linear, integrate, project, Bindings, FESpace, GridFunction};
use shapediff::linalg::{dot, solve_dirichlet};
use shapediff::mesh::{generate_disk, generate_rect, Mesh2D};
use shapediff::symbolic::{diff_shape, pullback, simplify, substitute, Expr, FormTerm};

fn unit_square_two_triangles() -> Mesh2D {
    Mesh2D::new(
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        vec![([0, 1, 2], "domain".into()), ([0, 2, 3], "domain".into())],
        vec![
            ([0, 1], "bottom".into()),
            ([1, 2], "right".into()),
            ([2, 3], "top".into()),
            ([3, 0], "left".into()),
        ],
    )
    .unwrap()
}

fn laplace(s: &FESpace) -> FormTerm {
    FormTerm::volume(s.trial().grad().unwrap() * s.test().grad().unwrap()).unwrap()
}

fn one() -> Vec<FormTerm> {
    vec![FormTerm::volume(Expr::scalar(1.0)).unwrap()]
}

#[test]
fn laplace_matrix_matches_hand_assembly() {
    let m = unit_square_two_triangles();
    let s = FESpace::h1(&m, 1, &[]).unwrap();
    let a = assemble_bilinear(&m, &[laplace(&s)], &s, &s, &Bindings::new()).unwrap();
    // right angles at vertex 1 (first triangle) and vertex 3 (second triangle)
    let expected = [
        [1.0, -0.5, 0.0, -0.5],
        [-0.5, 1.0, -0.5, 0.0],
        [0.0, -0.5, 1.0, -0.5],
        [-0.5, 0.0, -0.5, 1.0],
    ];
    for i in 0..4 {
        for j in 0..4 {
            assert!((a.get(i, j) - expected[i][j]).abs() < 1e-14, "({i},{j}) {}", a.get(i, j));
        }
    }
}

#[test]
fn stiffness_kills_constants_and_mass_makes_it_spd() {
    let m = generate_rect([0.0, 1.0], [0.0, 1.0], 0.2).unwrap();
    for order in [1, 2] {
        let s = FESpace::h1(&m, order, &[]).unwrap();
        let k = assemble_bilinear(&m, &[laplace(&s)], &s, &s, &Bindings::new()).unwrap();
        let ones = vec![1.0; s.ndof()];
        assert!(k.mul_vec(&ones).iter().all(|r| r.abs() < 1e-12));
        let mass = FormTerm::volume(s.trial() * s.test()).unwrap();
        let a = assemble_bilinear(&m, &[laplace(&s), mass], &s, &s, &Bindings::new()).unwrap();
        assert!(a.is_symmetric(1e-14));
        assert!(shapediff::linalg::cholesky_solve(&a, &ones).is_ok());
        // total mass equals the area
        let mass_only = assemble_bilinear(&m, &[FormTerm::volume(s.trial() * s.test()).unwrap()], &s, &s, &Bindings::new()).unwrap();
        assert!((mass_only.bilinear(&ones, &ones) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn deformed_disk_area_matches_reference_value() {
    let mut m = generate_disk([0.5, 0.5], 0.5, 0.2).unwrap();
    let vec = FESpace::vector_h1(&m, 2, &[]).unwrap();
    let (x, y) = (Expr::x(), Expr::y());
    let field = Expr::stack_vector(&(&x * &x * &y), &(&y * &y * &x)).unwrap();
    let v = project(&m, &vec, &field, &Bindings::new()).unwrap();
    let before = integrate(&m, &one(), &Bindings::new()).unwrap();
    m.set_deformation(v.deformation().unwrap()).unwrap();
    let deformed = integrate(&m, &one(), &Bindings::new()).unwrap();
    m.unset_deformation();
    let after = integrate(&m, &one(), &Bindings::new()).unwrap();
    assert!((deformed - 1.7924529046862627).abs() < 2e-2, "{deformed}");
    assert!((after - 0.7854072970684544).abs() < 2e-2, "{after}");
    assert_eq!(before.to_bits(), after.to_bits());
}

#[test]
fn zero_deformation_is_bit_exact() {
    let mut m = generate_disk([0.0, 0.0], 1.0, 0.3).unwrap();
    let vec = FESpace::vector_h1(&m, 1, &[]).unwrap();
    let f = vec![FormTerm::volume(Expr::x() * Expr::x() + Expr::y()).unwrap()];
    let a = integrate(&m, &f, &Bindings::new()).unwrap();
    m.set_deformation(GridFunction::new(&vec, "V").deformation().unwrap()).unwrap();
    let b = integrate(&m, &f, &Bindings::new()).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn node_move_and_deformation_agree_for_linear_fields() {
    let mut m = generate_disk([0.5, 0.5], 0.5, 0.1).unwrap();
    let vec = FESpace::vector_h1(&m, 1, &[]).unwrap();
    let field = Expr::stack_vector(&(0.2 * Expr::x() * Expr::y()), &(-0.1 * Expr::x())).unwrap();
    let v = project(&m, &vec, &field, &Bindings::new()).unwrap();
    let f = vec![FormTerm::volume(Expr::x() * Expr::x() + 1.0).unwrap()];
    m.set_deformation(v.deformation().unwrap()).unwrap();
    let a = integrate(&m, &f, &Bindings::new()).unwrap();
    m.unset_deformation();
    m.move_nodes(&v.deformation().unwrap()).unwrap();
    let b = integrate(&m, &f, &Bindings::new()).unwrap();
    assert!((a - b).abs() < 1e-13, "{a} {b}");
}

/// Replaces F by I + grad(V) and positions by X + V in a pulled-back integrand.
fn on_reference(e: &Expr, v: &GridFunction) -> Expr {
    let ve = v.expr();
    let f = Expr::identity() + ve.grad().unwrap();
    let mut r = substitute(e, &Expr::shape_f(), &f).unwrap();
    r = substitute(&r, &Expr::position(), &(Expr::position() + &ve)).unwrap();
    r = substitute(&r, &Expr::x(), &(Expr::x() + ve.component(0).unwrap())).unwrap();
    r = substitute(&r, &Expr::y(), &(Expr::y() + ve.component(1).unwrap())).unwrap();
    simplify(&r)
}

#[test]
fn deformed_assembly_equals_pulled_back_assembly() {
    let mut m = generate_disk([0.0, 0.0], 1.0, 0.25).unwrap();
    let vec = FESpace::vector_h1(&m, 2, &[]).unwrap();
    let s = FESpace::h1(&m, 2, &[]).unwrap();
    let field = Expr::stack_vector(&(0.1 * Expr::x() * Expr::y()), &(0.15 * Expr::x() * Expr::x())).unwrap();
    let v = project(&m, &vec, &field, &Bindings::new()).unwrap();
    let (u, w) = (s.trial(), s.test());
    let vol = FormTerm::volume(u.grad().unwrap() * w.grad().unwrap() + Expr::x() * &u * &w).unwrap();
    let bnd = FormTerm::boundary(Expr::y() * Expr::normal().component(0).unwrap() * &u * &w).unwrap();
    let lin = FormTerm::volume(Expr::x() * Expr::y() * &w).unwrap();
    let bind = Bindings::new().func(&v);
    let ref_terms: Vec<FormTerm> = [&vol, &bnd]
        .iter()
        .map(|t| FormTerm { integrand: on_reference(&pullback(t).unwrap(), &v), ..(*t).clone() }.with_bonus(4))
        .collect();
    let ref_lin = FormTerm { integrand: on_reference(&pullback(&lin).unwrap(), &v), ..lin.clone() }.with_bonus(4);
    let a_ref = assemble_bilinear(&m, &ref_terms, &s, &s, &bind).unwrap();
    let b_ref = assemble_linear(&m, &[ref_lin], &s, &bind).unwrap();
    m.set_deformation(v.deformation().unwrap()).unwrap();
    let terms: Vec<FormTerm> = [vol, bnd].into_iter().map(|t| t.with_bonus(4)).collect();
    let a_def = assemble_bilinear(&m, &terms, &s, &s, &bind).unwrap();
    let b_def = assemble_linear(&m, &[lin.with_bonus(4)], &s, &bind).unwrap();
    let diff = a_def.add_scaled(&a_ref, -1.0).unwrap();
    let worst = diff.values().iter().fold(0.0f64, |a, b| a.max(b.abs()));
    assert!(worst < 1e-12, "matrix entries differ by {worst:e}");
    let worst = b_def.iter().zip(&b_ref).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    assert!(worst < 1e-12, "vector entries differ by {worst:e}");
}

#[test]
fn divergence_of_identity_field_gives_twice_the_area() {
    for (m, order) in [(generate_disk([0.5, 0.5], 0.5, 0.1).unwrap(), 1), (generate_rect([0.0, 2.0], [0.0, 1.0], 0.3).unwrap(), 2)] {
        let vec = FESpace::vector_h1(&m, order, &[]).unwrap();
        let d = diff_shape(&FormTerm::volume(Expr::scalar(1.0)).unwrap(), &vec.test()).unwrap();
        let l = assemble_linear(&m, &[d], &vec, &Bindings::new()).unwrap();
        let id = project(&m, &vec, &Expr::position(), &Bindings::new()).unwrap();
        let area = integrate(&m, &one(), &Bindings::new()).unwrap();
        assert!((dot(&l, &id.coeffs) - 2.0 * area).abs() < 1e-10);
    }
}

#[test]
fn volume_and_boundary_forms_of_the_derivative_agree() {
    let m = generate_disk([0.0, 0.0], 1.0, 0.05).unwrap();
    let vec = FESpace::vector_h1(&m, 1, &[]).unwrap();
    let (x, y) = (Expr::x(), Expr::y());
    let f = &x * &x + &y * &y - 0.25;
    let v = vec.test();
    let vol = FormTerm::volume(Expr::stack_vector(&(2.0 * &x), &(2.0 * &y)).unwrap() * &v + &f * v.grad().unwrap().trace().unwrap()).unwrap();
    let bnd = FormTerm::boundary(&f * (&v * Expr::normal())).unwrap();
    let field = Expr::stack_vector(&(&x * &y + 1.0), &(&y * &y)).unwrap();
    let pv = project(&m, &vec, &field, &Bindings::new()).unwrap();
    let a = dot(&assemble_linear(&m, &[vol], &vec, &Bindings::new()).unwrap(), &pv.coeffs);
    let b = dot(&assemble_linear(&m, &[bnd], &vec, &Bindings::new()).unwrap(), &pv.coeffs);
    assert!(((a - b) / b).abs() < 2e-2, "{a} {b}");
}

#[test]
fn projection_is_idempotent_and_converges() {
    let m = generate_disk([0.0, 0.0], 1.0, 0.2).unwrap();
    let s = FESpace::h1(&m, 2, &[]).unwrap();
    let q = project(&m, &s, &(Expr::x() * Expr::y() + Expr::x()), &Bindings::new()).unwrap();
    let q2 = project(&m, &s, &q.expr(), &Bindings::new().func(&q)).unwrap();
    assert!(q.coeffs.iter().zip(&q2.coeffs).all(|(a, b)| (a - b).abs() < 1e-12));
    let z = project(&m, &s, &Expr::scalar(0.0), &Bindings::new()).unwrap();
    assert!(z.coeffs.iter().all(|&c| c == 0.0));

    let target = Expr::x() * Expr::x() * Expr::y();
    let mut errs = Vec::new();
    for h in [0.2, 0.1, 0.05] {
        let m = generate_rect([0.0, 1.0], [0.0, 1.0], h).unwrap();
        let s = FESpace::h1(&m, 1, &[]).unwrap();
        let p = project(&m, &s, &target, &Bindings::new()).unwrap();
        let e = p.expr() - &target;
        let err = integrate(&m, &[FormTerm::volume(&e * &e).unwrap()], &Bindings::new().func(&p)).unwrap().sqrt();
        errs.push(err);
    }
    for w in errs.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!(rate > 1.8, "rate {rate} from {errs:?}");
    }
}

#[test]
fn poisson_on_square_converges_quadratically() {
    let (x, y) = (Expr::x(), Expr::y());
    let f = 2.0 * &y * (1.0 - &y) + 2.0 * &x * (1.0 - &x);
    let exact = &x * (1.0 - &x) * &y * (1.0 - &y);
    let mut errs = Vec::new();
    for h in [0.1, 0.05, 0.025] {
        let m = generate_rect([0.0, 1.0], [0.0, 1.0], h).unwrap();
        let s = FESpace::h1(&m, 1, &["left", "right", "bottom", "top"]).unwrap();
        let a = assemble_bilinear(&m, &[laplace(&s)], &s, &s, &Bindings::new()).unwrap();
        let b = assemble_linear(&m, &[FormTerm::volume(&f * s.test()).unwrap()], &s, &Bindings::new()).unwrap();
        let free = s.free_dofs().to_vec();
        let u = solve_dirichlet(&a, &b, &free, false).unwrap();
        let r = a.mul_vec(&u);
        for i in (0..u.len()).filter(|&i| free[i]) {
            assert!((r[i] - b[i]).abs() < 1e-10 * shapediff::linalg::norm2(&b));
        }
        for i in (0..u.len()).filter(|&i| !free[i]) {
            assert_eq!(u[i], 0.0);
        }
        let u = GridFunction::from_coeffs(&s, "u", u).unwrap();
        let e = u.expr() - &exact;
        errs.push(integrate(&m, &[FormTerm::volume(&e * &e).unwrap()], &Bindings::new().func(&u)).unwrap().sqrt());
    }
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() > 1.8, "{errs:?}");
    }
}

#[test]
fn unknown_markers_and_foreign_spaces_are_errors() {
    let m = unit_square_two_triangles();
    let s = FESpace::h1(&m, 1, &[]).unwrap();
    let t = FormTerm::boundary(s.test()).unwrap().on(&["nowhere"]);
    assert!(assemble_linear(&m, &[t], &s, &Bindings::new()).is_err());
    let other = generate_rect([0.0, 1.0], [0.0, 1.0], 0.5).unwrap();
    let s2 = FESpace::h1(&other, 1, &[]).unwrap();
    assert!(assemble_linear(&m, &[FormTerm::volume(s2.test()).unwrap()], &s2, &Bindings::new()).is_err());
    // nonlinear in the test function
    assert!(assemble_linear(&m, &[FormTerm::volume(s.test() * s.test()).unwrap()], &s, &Bindings::new()).is_err());
}

#[test]
fn raising_bonus_order_does_not_change_polynomial_shape_derivatives() {
    let m = generate_disk([0.5, 0.5], 0.5, 0.1).unwrap();
    let vec = FESpace::vector_h1(&m, 2, &[]).unwrap();
    let f = Expr::x() * Expr::x() * Expr::y();
    let d = diff_shape(&FormTerm::volume(f).unwrap(), &vec.test()).unwrap();
    let a = assemble_linear(&m, &[d.clone()], &vec, &Bindings::new()).unwrap();
    let b = assemble_linear(&m, &[d.with_bonus(2)], &vec, &Bindings::new()).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
}
