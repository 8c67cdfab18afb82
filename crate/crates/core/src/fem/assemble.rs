use rayon::prelude::*;

use super::basis::{self, ShapeValues};
use super::quadrature::{line_rule, triangle_rule, LineRule, TriangleRule};
use super::{FESpace, FemError, GridFunction};
use crate::linalg::{solve_dirichlet, CsrMatrix, DenseVector};
use crate::mesh::{Mesh2D, PointGeometry};
use crate::symbolic::{Expr, FnRef, FormKind, FormTerm, Plan, PlanOutput, PointData, Shape, Value};

/// Grid functions and parameter values referenced by the integrands.
#[derive(Debug, Clone, Default)]
pub struct Bindings<'a> {
    pub funcs: Vec<&'a GridFunction>,
    pub params: Vec<(String, f64)>,
}

impl<'a> Bindings<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn func(mut self, g: &'a GridFunction) -> Self {
        self.funcs.push(g);
        self
    }

    pub fn param(mut self, name: &str, v: f64) -> Self {
        self.params.push((name.to_string(), v));
        self
    }
}

/// Something to integrate over: a triangle, or one edge of it.
#[derive(Clone, Copy)]
struct Item {
    tri: usize,
    edge: Option<usize>,
}

struct Job {
    plan: Plan,
    tri_rule: TriangleRule,
    line_rule: LineRule,
    items: Vec<Item>,
}

struct Point {
    xi: [f64; 2],
    /// quadrature weight times the measure
    w: f64,
    geo: PointGeometry,
    normal: Option<[f64; 2]>,
    tangent: Option<[f64; 2]>,
}

fn prepare(
    mesh: &Mesh2D,
    term: &FormTerm,
    kind: FormKind,
    test: Option<&FESpace>,
    trial: Option<&FESpace>,
    bind: &Bindings,
) -> Result<Job, FemError> {
    let boundary = term.is_boundary();
    let names = if boundary { mesh.boundary_names() } else { mesh.domain_names() };
    for m in term.region.markers() {
        if !names.iter().any(|n| n == m) {
            return Err(FemError::UnknownMarker(m.clone()));
        }
    }
    let refs: Vec<FnRef> = bind.funcs.iter().map(|g| g.fn_ref().clone()).collect();
    let (tr, te) = (trial.map(FESpace::fn_ref), test.map(FESpace::fn_ref));
    let plan = Plan::new(&term.integrand, kind, te.as_ref(), tr.as_ref(), &refs, &bind.params, boundary)?;
    let mut order = 1;
    for s in test.iter().chain(trial.iter()) {
        order = order.max(s.order());
    }
    for g in &bind.funcs {
        order = order.max(g.space().order());
    }
    if let Some(d) = mesh.deformation() {
        order = order.max(d.order);
    }
    let degree = 2 * order + 2 + term.bonus_quad_order;
    let items = if boundary {
        (0..mesh.boundary_edges().len())
            .filter(|&b| term.region.includes(mesh.boundary_marker(b)))
            .map(|b| {
                let (tri, k) = mesh.boundary_element(b);
                Item { tri, edge: Some(k) }
            })
            .collect()
    } else {
        (0..mesh.nt()).filter(|&t| term.region.includes(mesh.domain_marker(t))).map(|tri| Item { tri, edge: None }).collect()
    };
    Ok(Job { plan, tri_rule: triangle_rule(degree)?, line_rule: line_rule(degree)?, items })
}

fn check_spaces(mesh: &Mesh2D, spaces: &[&FESpace], bind: &Bindings) -> Result<(), FemError> {
    for s in spaces {
        s.check_mesh(mesh)?;
    }
    for g in &bind.funcs {
        g.space().check_mesh(mesh)?;
    }
    Ok(())
}

fn points(mesh: &Mesh2D, job: &Job, item: Item) -> Result<Vec<Point>, FemError> {
    let t = item.tri;
    match item.edge {
        None => job
            .tri_rule
            .points
            .iter()
            .zip(&job.tri_rule.weights)
            .map(|(&xi, &w)| {
                let geo = mesh.geometry(t, xi, None)?;
                Ok(Point { xi, w: w * geo.det, geo, normal: None, tangent: None })
            })
            .collect(),
        Some(k) => {
            let (a, b) = Mesh2D::local_edge_points(k);
            let d = [b[0] - a[0], b[1] - a[1]];
            job.line_rule
                .points
                .iter()
                .zip(&job.line_rule.weights)
                .map(|(&s, &w)| {
                    let xi = [a[0] + s * d[0], a[1] + s * d[1]];
                    let geo = mesh.geometry(t, xi, None)?;
                    let j = geo.jac;
                    let tp = [j[0][0] * d[0] + j[0][1] * d[1], j[1][0] * d[0] + j[1][1] * d[1]];
                    let len = tp[0].hypot(tp[1]);
                    let tau = [tp[0] / len, tp[1] / len];
                    Ok(Point { xi, w: w * len, geo, normal: Some([tau[1], -tau[0]]), tangent: Some(tau) })
                })
                .collect()
        }
    }
}

fn func_values(mesh: &Mesh2D, t: usize, p: &Point, bind: &Bindings, out: &mut Vec<(Value, Value)>) {
    out.clear();
    let mut cache: [Option<ShapeValues>; 2] = [None, None];
    for g in &bind.funcs {
        let o = g.space().order();
        let s = *cache[o - 1].get_or_insert_with(|| basis::shape_values(o, p.xi));
        out.push(g.eval_with(mesh, t, &s, &|r| p.geo.physical_grad(r)));
    }
}

/// Slot indices and values of every local basis function of a space at a point:
/// (value slot, value, gradient slots, physical gradient).
struct LocalBasis {
    n: usize,
    vd: usize,
    dofs: [usize; 6],
    vals: [f64; 6],
    grads: [[f64; 2]; 6],
}

impl LocalBasis {
    fn new(mesh: &Mesh2D, space: &FESpace, t: usize, p: &Point) -> Self {
        let s = basis::shape_values(space.order(), p.xi);
        let (dofs, n) = mesh.element_dofs(t, space.order());
        let mut grads = [[0.0; 2]; 6];
        for k in 0..n {
            grads[k] = p.geo.physical_grad(s.grads[k]);
        }
        Self { n, vd: space.vdim(), dofs, vals: s.vals, grads }
    }

    fn len(&self) -> usize {
        self.n * self.vd
    }

    /// Slots touched by local function `i` (shape `i / vd`, component `i % vd`) with values.
    #[inline]
    fn slots(&self, i: usize) -> [(usize, f64); 3] {
        let (k, c) = (i / self.vd, i % self.vd);
        let g = self.grads[k];
        if self.vd == 1 {
            [(0, self.vals[k]), (1, g[0]), (2, g[1])]
        } else {
            [(c, self.vals[k]), (2 + 2 * c, g[0]), (3 + 2 * c, g[1])]
        }
    }

    fn global(&self, space: &FESpace, i: usize) -> usize {
        space.global(self.dofs[i / self.vd], i % self.vd)
    }
}

fn eval_point<'a>(
    job: &'a Job,
    buf: &'a mut [Value],
    p: &Point,
    funcs: &[(Value, Value)],
) -> Result<PlanOutput<'a>, FemError> {
    let pd = PointData { pos: p.geo.pos, normal: p.normal, tangent: p.tangent, funcs };
    Ok(job.plan.eval(buf, &pd)?)
}

/// Assembles the load vector of a sum of terms, each linear in the test function of `test`.
pub fn assemble_linear(
    mesh: &Mesh2D,
    terms: &[FormTerm],
    test: &FESpace,
    bind: &Bindings,
) -> Result<DenseVector, FemError> {
    check_spaces(mesh, &[test], bind)?;
    let mut out = vec![0.0; test.ndof()];
    for term in terms {
        let job = prepare(mesh, term, FormKind::Linear, Some(test), None, bind)?;
        let locals: Vec<Vec<(usize, f64)>> = job
            .items
            .par_iter()
            .map_init(
                || (job.plan.buffer(), Vec::new()),
                |(buf, fv), &item| -> Result<Vec<(usize, f64)>, FemError> {
                    let mut loc = [0.0; 12];
                    let mut nloc = 0;
                    let mut dofs = [0usize; 12];
                    for p in points(mesh, &job, item)? {
                        func_values(mesh, item.tri, &p, bind, fv);
                        let lb = LocalBasis::new(mesh, test, item.tri, &p);
                        nloc = lb.len();
                        for (i, d) in dofs.iter_mut().enumerate().take(nloc) {
                            *d = lb.global(test, i);
                        }
                        let r = eval_point(&job, buf, &p, fv)?;
                        if !r.has_test_part() {
                            continue;
                        }
                        for (i, l) in loc.iter_mut().enumerate().take(nloc) {
                            let s: f64 = lb.slots(i).iter().map(|&(q, v)| r.test_coeff(q) * v).sum();
                            *l += p.w * s;
                        }
                    }
                    Ok((0..nloc).map(|i| (dofs[i], loc[i])).collect())
                },
            )
            .collect::<Result<_, _>>()?;
        for l in locals {
            for (d, v) in l {
                out[d] += v;
            }
        }
    }
    Ok(out)
}

/// Assembles the matrix of a sum of bilinear terms; rows belong to `test`, columns to `trial`.
pub fn assemble_bilinear(
    mesh: &Mesh2D,
    terms: &[FormTerm],
    trial: &FESpace,
    test: &FESpace,
    bind: &Bindings,
) -> Result<CsrMatrix, FemError> {
    check_spaces(mesh, &[test, trial], bind)?;
    let mut triplets = Vec::new();
    for term in terms {
        let job = prepare(mesh, term, FormKind::Bilinear, Some(test), Some(trial), bind)?;
        let (nts, nrs) = (job.plan.test_slots(), job.plan.trial_slots());
        let locals: Vec<Vec<(usize, usize, f64)>> = job
            .items
            .par_iter()
            .map_init(
                || (job.plan.buffer(), Vec::new()),
                |(buf, fv), &item| -> Result<Vec<(usize, usize, f64)>, FemError> {
                    let mut loc = [[0.0; 12]; 12];
                    let (mut ni, mut nj) = (0, 0);
                    let (mut ri, mut cj) = ([0usize; 12], [0usize; 12]);
                    let mut bmat = vec![0.0; nts * nrs];
                    for p in points(mesh, &job, item)? {
                        func_values(mesh, item.tri, &p, bind, fv);
                        let te = LocalBasis::new(mesh, test, item.tri, &p);
                        let tr = LocalBasis::new(mesh, trial, item.tri, &p);
                        (ni, nj) = (te.len(), tr.len());
                        for i in 0..ni {
                            ri[i] = te.global(test, i);
                        }
                        for j in 0..nj {
                            cj[j] = tr.global(trial, j);
                        }
                        let r = eval_point(&job, buf, &p, fv)?;
                        if !r.has_bilinear_part() {
                            continue;
                        }
                        for s in 0..nts {
                            for q in 0..nrs {
                                bmat[s * nrs + q] = r.bilinear_coeff(s, q);
                            }
                        }
                        for j in 0..nj {
                            let sj = tr.slots(j);
                            let mut col = [0.0; 6];
                            for (s, c) in col.iter_mut().enumerate().take(nts) {
                                *c = sj.iter().map(|&(q, v)| bmat[s * nrs + q] * v).sum();
                            }
                            for i in 0..ni {
                                let v: f64 = te.slots(i).iter().map(|&(s, v)| col[s] * v).sum();
                                loc[i][j] += p.w * v;
                            }
                        }
                    }
                    let mut out = Vec::with_capacity(ni * nj);
                    for i in 0..ni {
                        for j in 0..nj {
                            out.push((ri[i], cj[j], loc[i][j]));
                        }
                    }
                    Ok(out)
                },
            )
            .collect::<Result<_, _>>()?;
        triplets.extend(locals.into_iter().flatten());
    }
    Ok(CsrMatrix::from_triplets(test.ndof(), trial.ndof(), &triplets)?)
}

/// Integral of a sum of terms free of test and trial functions.
pub fn integrate(mesh: &Mesh2D, terms: &[FormTerm], bind: &Bindings) -> Result<f64, FemError> {
    check_spaces(mesh, &[], bind)?;
    let mut total = 0.0;
    for term in terms {
        let job = prepare(mesh, term, FormKind::Functional, None, None, bind)?;
        let parts: Vec<f64> = job
            .items
            .par_iter()
            .map_init(
                || (job.plan.buffer(), Vec::new()),
                |(buf, fv), &item| -> Result<f64, FemError> {
                    let mut s = 0.0;
                    for p in points(mesh, &job, item)? {
                        func_values(mesh, item.tri, &p, bind, fv);
                        s += p.w * eval_point(&job, buf, &p, fv)?.value().scalar();
                    }
                    Ok(s)
                },
            )
            .collect::<Result<_, _>>()?;
        total += parts.iter().sum::<f64>();
    }
    Ok(total)
}

/// Pairing that matches the operand shapes: product of scalars, inner product of vectors.
fn pair(a: &Expr, b: &Expr) -> Result<Expr, FemError> {
    Ok(if a.shape() == Shape::Scalar { a.scale(b)? } else { a.inner(b)? })
}

/// L2 projection of an expression onto a space (global mass solve, no boundary conditions).
pub fn project(mesh: &Mesh2D, space: &FESpace, expr: &Expr, bind: &Bindings) -> Result<GridFunction, FemError> {
    let want = if space.vdim() == 1 { Shape::Scalar } else { Shape::Vector };
    if expr.shape() != want {
        return Err(FemError::SpaceMismatch(format!("projecting a {:?} expression onto a {want:?} space", expr.shape())));
    }
    let mass = assemble_bilinear(mesh, &[FormTerm::volume(pair(&space.trial(), &space.test())?)?], space, space, bind)?;
    let rhs = assemble_linear(mesh, &[FormTerm::volume(pair(expr, &space.test())?)?], space, bind)?;
    let x = solve_dirichlet(&mass, &rhs, &vec![true; space.ndof()], false)?;
    GridFunction::from_coeffs(space, "projection", x)
}
