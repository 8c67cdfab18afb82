//! Shape derivatives of domain functionals, optionally constrained by a linear PDE.
//!
//! A problem is a cost functional plus, for constrained problems, an equation residual
//! written with the state `u` and the multiplier `p` as grid functions. Their sum is the
//! Lagrangian; its shape derivative at the state/adjoint pair is the derivative of the
//! reduced functional.

use std::sync::OnceLock;

use thiserror::Error;

use crate::fem::{assemble_bilinear, assemble_linear, integrate, Bindings, FESpace, FemError, GridFunction};
use crate::linalg::{dot, CsrMatrix, DenseVector, DirichletSolver, LinalgError, LuFactor};
use crate::mesh::{Mesh2D, MeshError};
use crate::symbolic::{diff_shape, diff_shape_pulled, Expr, ExprError, FormTerm};

#[derive(Debug, Error)]
pub enum ShapeError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{0} needs a PDE constraint")]
    Unconstrained(&'static str),
    #[error("{0} is only defined for unconstrained problems")]
    Constrained(&'static str),
    #[error("no hand-written pulled-back Lagrangian was supplied")]
    NoPulledForm,
    #[error("coefficient vector has {found} entries, expected {expected}")]
    Size { expected: usize, found: usize },
    #[error("{0}")]
    Invalid(String),
}

impl From<MeshError> for ShapeError {
    fn from(e: MeshError) -> Self {
        ShapeError::Fem(FemError::Mesh(e))
    }
}

impl ShapeError {
    /// Whether the error comes from a deformation that folds the mesh.
    pub fn is_invalid_shape(&self) -> bool {
        matches!(
            self,
            ShapeError::Fem(FemError::Mesh(MeshError::NonPositiveJacobian { .. } | MeshError::Inverted { .. }))
        )
    }
}

/// How the first shape derivative is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffMode {
    /// From a Lagrangian pulled back by hand, differentiated in X and F.
    Semi,
    /// From the Lagrangian as written, pulled back automatically.
    Full,
}

/// Regularization added to the shape Hessian for a Newton step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularization {
    /// `delta * int_{dOmega} (V.tau)(W.tau)`, solved on boundary dofs only.
    BoundaryTangential(f64),
    /// `delta * int_Omega dV:dW + V.W`, solved on all dofs.
    H1(f64),
}

#[derive(Debug, Clone)]
pub struct MaterialDerivatives {
    pub state: GridFunction,
    pub adjoint: GridFunction,
}

/// Lattice resolution per edge for the orientation check after every shape update.
const ORIENTATION_SAMPLES: usize = 6;

/// Assembled regularized Newton system `H x = rhs` in the unknowns
/// (direction, state variation, adjoint variation), the last two absent without a constraint.
#[derive(Debug, Clone)]
pub struct NewtonSystem {
    pub matrix: CsrMatrix,
    pub rhs: DenseVector,
    pub free: Vec<bool>,
    /// number of leading unknowns belonging to the direction field
    pub nvec: usize,
}

impl NewtonSystem {
    /// Solves on the free dofs and returns the direction part.
    pub fn solve(&self) -> Result<DenseVector, ShapeError> {
        let idx: Vec<usize> = (0..self.rhs.len()).filter(|&i| self.free[i]).collect();
        let sub = self.matrix.submatrix(&idx, &idx)?;
        let b: Vec<f64> = idx.iter().map(|&i| self.rhs[i]).collect();
        let y = LuFactor::new(&sub)?.solve(&b, false)?;
        let mut x = vec![0.0; self.rhs.len()];
        for (k, &i) in idx.iter().enumerate() {
            x[i] = y[k];
        }
        x.truncate(self.nvec);
        Ok(x)
    }
}

struct Constraint {
    equation: Vec<FormTerm>,
    space: FESpace,
    state: GridFunction,
    adjoint: GridFunction,
}

/// Derived forms, built once on first use.
#[derive(Default)]
struct Forms {
    full: OnceLock<Vec<FormTerm>>,
    semi: OnceLock<Vec<FormTerm>>,
    state_lin: OnceLock<Vec<FormTerm>>,
    state_bil: OnceLock<Vec<FormTerm>>,
    cost_u: OnceLock<Vec<FormTerm>>,
    hess: OnceLock<HessForms>,
}

struct HessForms {
    vv: Vec<FormTerm>,
    vu: Vec<FormTerm>,
    vp: Vec<FormTerm>,
    uv: Vec<FormTerm>,
    uu: Vec<FormTerm>,
    up: Vec<FormTerm>,
    pv: Vec<FormTerm>,
}

pub struct ShapeProblem {
    mesh: Mesh2D,
    vec: FESpace,
    cost: Vec<FormTerm>,
    constraint: Option<Constraint>,
    pulled: Option<Vec<FormTerm>>,
    params: Vec<(String, f64)>,
    shape: GridFunction,
    forms: Forms,
}

fn nonzero(terms: Vec<FormTerm>) -> Vec<FormTerm> {
    terms.into_iter().filter(|t| !t.integrand.is_zero()).collect()
}

fn map_terms(terms: &[FormTerm], f: impl Fn(&FormTerm) -> Result<FormTerm, ExprError>) -> Vec<FormTerm> {
    nonzero(terms.iter().map(f).collect::<Result<Vec<_>, _>>().expect("derived form of a validated problem"))
}

fn check_len(v: &[f64], n: usize) -> Result<(), ShapeError> {
    if v.len() != n {
        return Err(ShapeError::Size { expected: n, found: v.len() });
    }
    Ok(())
}

/// Stacks blocks `(row offset, column offset, matrix)` into one `n x n` matrix.
fn block_matrix(n: usize, blocks: &[(usize, usize, &CsrMatrix)]) -> Result<CsrMatrix, LinalgError> {
    let mut trip = Vec::new();
    for &(r0, c0, m) in blocks {
        for i in 0..m.nrows() {
            for (j, v) in m.row(i) {
                trip.push((r0 + i, c0 + j, v));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &trip)
}

impl ShapeProblem {
    /// Problem `min J(Omega)` without a state equation.
    pub fn unconstrained(mesh: Mesh2D, vec: &FESpace, cost: Vec<FormTerm>) -> Result<Self, ShapeError> {
        Self::build(mesh, vec, cost, None)
    }

    /// PDE-constrained problem. `build` receives the state and multiplier symbols and
    /// returns the cost terms and the equation residual (linear in the multiplier, affine in
    /// the state).
    pub fn constrained(
        mesh: Mesh2D,
        vec: &FESpace,
        state_space: &FESpace,
        build: impl FnOnce(&Expr, &Expr) -> Result<(Vec<FormTerm>, Vec<FormTerm>), ExprError>,
    ) -> Result<Self, ShapeError> {
        if state_space.vdim() != 1 {
            return Err(ShapeError::Invalid("the state space must be scalar".into()));
        }
        state_space.check_mesh(&mesh)?;
        let state = GridFunction::new(state_space, "u");
        let adjoint = GridFunction::new(state_space, "p");
        let (cost, equation) = build(&state.expr(), &adjoint.expr())?;
        if equation.is_empty() {
            return Err(ShapeError::Invalid("empty equation; use ShapeProblem::unconstrained".into()));
        }
        let c = Constraint { equation, space: state_space.clone(), state, adjoint };
        Self::build(mesh, vec, cost, Some(c))
    }

    fn build(mesh: Mesh2D, vec: &FESpace, cost: Vec<FormTerm>, constraint: Option<Constraint>) -> Result<Self, ShapeError> {
        if vec.vdim() != 2 {
            return Err(ShapeError::Invalid("directions need a 2-vector space".into()));
        }
        vec.check_mesh(&mesh)?;
        if cost.is_empty() {
            return Err(ShapeError::Invalid("empty cost functional".into()));
        }
        let shape = GridFunction::new(vec, "shape");
        let mut p = Self { mesh, vec: vec.clone(), cost, constraint, pulled: None, params: Vec::new(), shape, forms: Forms::default() };
        p.mesh.set_deformation(p.shape.deformation()?)?;
        Ok(p)
    }

    /// Supplies the Lagrangian pulled back by hand (with the symbol F for the deformation
    /// gradient and coordinates meaning transported positions), used by [`DiffMode::Semi`].
    pub fn set_pulled_lagrangian(&mut self, terms: Vec<FormTerm>) {
        self.pulled = Some(terms);
        self.forms.semi = OnceLock::new();
    }

    pub fn set_param(&mut self, name: &str, v: f64) {
        match self.params.iter_mut().find(|(n, _)| n == name) {
            Some(p) => p.1 = v,
            None => self.params.push((name.to_string(), v)),
        }
    }

    pub fn mesh(&self) -> &Mesh2D {
        &self.mesh
    }

    pub fn vec_space(&self) -> &FESpace {
        &self.vec
    }

    pub fn cost_terms(&self) -> &[FormTerm] {
        &self.cost
    }

    pub fn is_constrained(&self) -> bool {
        self.constraint.is_some()
    }

    pub fn state_space(&self) -> Option<&FESpace> {
        self.constraint.as_ref().map(|c| &c.space)
    }

    pub fn state(&self) -> Option<&GridFunction> {
        self.constraint.as_ref().map(|c| &c.state)
    }

    pub fn adjoint(&self) -> Option<&GridFunction> {
        self.constraint.as_ref().map(|c| &c.adjoint)
    }

    pub fn state_expr(&self) -> Option<Expr> {
        self.state().map(GridFunction::expr)
    }

    pub fn adjoint_expr(&self) -> Option<Expr> {
        self.adjoint().map(GridFunction::expr)
    }

    /// Accumulated deformation of the initial mesh describing the current shape.
    pub fn shape(&self) -> &GridFunction {
        &self.shape
    }

    /// Sets the current shape to `Id + d` applied to the initial mesh. Fails if an element
    /// inverts anywhere, in which case the invalid shape stays set.
    pub fn set_shape(&mut self, d: &[f64]) -> Result<(), ShapeError> {
        self.shape.set_coeffs(d)?;
        self.mesh.set_deformation(self.shape.deformation()?)?;
        self.mesh.check_orientation(ORIENTATION_SAMPLES)?;
        Ok(())
    }

    /// Moves the mesh nodes by the vertex values of the current shape, resets the shape to
    /// zero and optionally smooths the interior nodes.
    pub fn move_nodes(&mut self, smooth_sweeps: usize) -> Result<(), ShapeError> {
        let d = self.shape.deformation()?;
        self.mesh.move_nodes(&d)?;
        if smooth_sweeps > 0 {
            self.mesh.smooth(smooth_sweeps);
        }
        let zero = vec![0.0; self.vec.ndof()];
        self.set_shape(&zero)
    }

    /// Hand-written pulled-back Lagrangian, if supplied.
    pub fn pulled_lagrangian(&self) -> Option<&[FormTerm]> {
        self.pulled.as_deref()
    }

    /// Cost terms followed by equation terms.
    pub fn lagrangian(&self) -> Vec<FormTerm> {
        let mut g = self.cost.clone();
        if let Some(c) = &self.constraint {
            g.extend(c.equation.iter().cloned());
        }
        g
    }

    pub fn bindings(&self) -> Bindings<'_> {
        let mut b = Bindings::new();
        if let Some(c) = &self.constraint {
            b = b.func(&c.state).func(&c.adjoint);
        }
        b.params = self.params.clone();
        b
    }

    fn need(&self, what: &'static str) -> Result<&Constraint, ShapeError> {
        self.constraint.as_ref().ok_or(ShapeError::Unconstrained(what))
    }

    fn state_forms(&self) -> Result<(&[FormTerm], &[FormTerm]), ShapeError> {
        let c = self.need("state solve")?;
        let lin = self.forms.state_lin.get_or_init(|| map_terms(&c.equation, |t| t.diff(&c.adjoint.expr(), &c.space.test())));
        let bil = self.forms.state_bil.get_or_init(|| map_terms(lin, |t| t.diff(&c.state.expr(), &c.space.trial())));
        Ok((lin, bil))
    }

    /// Value of the cost functional on the current shape with the current state.
    pub fn cost(&self) -> Result<f64, ShapeError> {
        Ok(integrate(&self.mesh, &self.cost, &self.bindings())?)
    }

    /// Value of the Lagrangian on the current shape (cost plus equation residual at p).
    pub fn lagrangian_value(&self) -> Result<f64, ShapeError> {
        Ok(integrate(&self.mesh, &self.lagrangian(), &self.bindings())?)
    }

    /// Equation operator A with rows for the multiplier (test) and columns for the state.
    pub fn state_operator(&self) -> Result<CsrMatrix, ShapeError> {
        let c = self.need("state operator")?;
        let (_, bil) = self.state_forms()?;
        Ok(assemble_bilinear(&self.mesh, bil, &c.space, &c.space, &self.bindings())?)
    }

    /// Residual of the state equation at the current state, entries on free dofs only.
    pub fn state_residual(&self) -> Result<DenseVector, ShapeError> {
        let c = self.need("state residual")?;
        let (lin, _) = self.state_forms()?;
        let mut r = assemble_linear(&self.mesh, lin, &c.space, &self.bindings())?;
        for (v, &f) in r.iter_mut().zip(c.space.free_dofs()) {
            if !f {
                *v = 0.0;
            }
        }
        Ok(r)
    }

    /// Right-hand side of the adjoint equation, `-dJ/du`, on free dofs.
    fn adjoint_rhs(&self) -> Result<DenseVector, ShapeError> {
        let c = self.need("adjoint solve")?;
        let cu = self.forms.cost_u.get_or_init(|| map_terms(&self.cost, |t| t.diff(&c.state.expr(), &c.space.test())));
        let mut r = assemble_linear(&self.mesh, cu, &c.space, &self.bindings())?;
        for v in r.iter_mut() {
            *v = -*v;
        }
        Ok(r)
    }

    /// Solves the state equation on the current shape. No-op without a constraint.
    pub fn solve_state(&mut self) -> Result<(), ShapeError> {
        if self.constraint.is_none() {
            return Ok(());
        }
        let a = self.state_operator()?;
        let solver = DirichletSolver::new(&a, self.need("state solve")?.space.free_dofs())?;
        self.state_step(&solver)
    }

    fn state_step(&mut self, solver: &DirichletSolver) -> Result<(), ShapeError> {
        // the equation is affine in u, so one Newton step from any guess is exact
        let r = self.state_residual()?;
        let du = solver.solve(&r, false)?;
        let c = self.constraint.as_mut().expect("checked");
        for (u, d) in c.state.coeffs.iter_mut().zip(du) {
            *u -= d;
        }
        Ok(())
    }

    /// Solves `A^T p = -dJ/du` on the current shape, with the current state.
    pub fn solve_adjoint(&mut self) -> Result<(), ShapeError> {
        if self.constraint.is_none() {
            return Ok(());
        }
        let a = self.state_operator()?;
        let solver = DirichletSolver::new(&a, self.need("adjoint solve")?.space.free_dofs())?;
        self.adjoint_step(&solver)
    }

    fn adjoint_step(&mut self, solver: &DirichletSolver) -> Result<(), ShapeError> {
        let rhs = self.adjoint_rhs()?;
        let p = solver.solve(&rhs, true)?;
        self.constraint.as_mut().expect("checked").adjoint.coeffs = p;
        Ok(())
    }

    /// State and adjoint with one factorization of the state operator.
    pub fn solve(&mut self) -> Result<(), ShapeError> {
        if self.constraint.is_none() {
            return Ok(());
        }
        let a = self.state_operator()?;
        let solver = DirichletSolver::new(&a, self.need("solve")?.space.free_dofs())?;
        self.state_step(&solver)?;
        self.adjoint_step(&solver)
    }

    /// Residual of the adjoint equation `dG/du (phi) = 0` on free dofs.
    pub fn adjoint_residual(&self) -> Result<DenseVector, ShapeError> {
        let c = self.need("adjoint residual")?;
        let a = self.state_operator()?;
        let mut r = a.mul_vec_transpose(&c.adjoint.coeffs);
        for ((v, b), &f) in r.iter_mut().zip(self.adjoint_rhs()?).zip(c.space.free_dofs()) {
            *v = if f { *v - b } else { 0.0 };
        }
        Ok(r)
    }

    /// Reduced cost on the shape `Id + d`: sets the shape, solves the state, evaluates the
    /// cost. The adjoint is left stale.
    pub fn cost_at(&mut self, d: &[f64]) -> Result<f64, ShapeError> {
        self.set_shape(d)?;
        self.solve_state()?;
        self.cost()
    }

    /// Vector `L` over the direction space with `L . v = DJ(Omega)(V_h)`.
    pub fn first_order(&self, mode: DiffMode) -> Result<DenseVector, ShapeError> {
        let terms = self.first_order_forms(mode)?;
        Ok(assemble_linear(&self.mesh, terms, &self.vec, &self.bindings())?)
    }

    /// Symbolic first-order forms, linear in the test function of the direction space.
    pub fn first_order_forms(&self, mode: DiffMode) -> Result<&[FormTerm], ShapeError> {
        let v = self.vec.test();
        Ok(match mode {
            DiffMode::Full => self.forms.full.get_or_init(|| map_terms(&self.lagrangian(), |t| diff_shape(t, &v))),
            DiffMode::Semi => {
                let pulled = self.pulled.as_ref().ok_or(ShapeError::NoPulledForm)?;
                self.forms.semi.get_or_init(|| map_terms(pulled, |t| diff_shape_pulled(t, &v)))
            }
        })
    }

    fn hess_forms(&self) -> &HessForms {
        self.forms.hess.get_or_init(|| {
            let vr = self.vec.trial();
            let first = self.first_order_forms(DiffMode::Full).expect("full mode always available");
            let vv = map_terms(first, |t| diff_shape(t, &vr));
            match &self.constraint {
                None => HessForms { vv, vu: vec![], vp: vec![], uv: vec![], uu: vec![], up: vec![], pv: vec![] },
                Some(c) => {
                    let (u, p) = (c.state.expr(), c.adjoint.expr());
                    let (st, sr) = (c.space.test(), c.space.trial());
                    let g = self.lagrangian();
                    let gu = map_terms(&g, |t| t.diff(&u, &st));
                    let gp = map_terms(&g, |t| t.diff(&p, &st));
                    HessForms {
                        vv,
                        vu: map_terms(first, |t| t.diff(&u, &sr)),
                        vp: map_terms(first, |t| t.diff(&p, &sr)),
                        uv: map_terms(&gu, |t| diff_shape(t, &vr)),
                        uu: map_terms(&gu, |t| t.diff(&u, &sr)),
                        up: map_terms(&gu, |t| t.diff(&p, &sr)),
                        pv: map_terms(&gp, |t| diff_shape(t, &vr)),
                    }
                }
            }
        })
    }

    fn bil(&self, terms: &[FormTerm], trial: &FESpace, test: &FESpace) -> Result<CsrMatrix, ShapeError> {
        Ok(assemble_bilinear(&self.mesh, terms, trial, test, &self.bindings())?)
    }

    /// Second shape derivative of the Lagrangian with the state and multiplier held fixed,
    /// rows for the first direction (test), columns for the second (trial). For
    /// unconstrained problems this is the full shape Hessian.
    pub fn shape_shape_block(&self) -> Result<CsrMatrix, ShapeError> {
        self.bil(&self.hess_forms().vv, &self.vec, &self.vec)
    }

    /// Assembled `D^2 J(Omega)(V)(W)` for an unconstrained problem.
    pub fn second_order_unconstrained(&self) -> Result<CsrMatrix, ShapeError> {
        if self.constraint.is_some() {
            return Err(ShapeError::Constrained("second_order_unconstrained"));
        }
        self.shape_shape_block()
    }

    /// Material derivatives of state and adjoint in direction `v` (coefficients over the
    /// direction space), from the 2x2 block system of the second derivatives of the
    /// Lagrangian.
    pub fn material_derivatives(&self, v: &[f64]) -> Result<MaterialDerivatives, ShapeError> {
        let c = self.need("material derivatives")?;
        check_len(v, self.vec.ndof())?;
        let h = self.hess_forms();
        let s = &c.space;
        let n = s.ndof();
        let uu = self.bil(&h.uu, s, s)?;
        let up = self.bil(&h.up, s, s)?;
        let pu = self.state_operator()?;
        let uv = self.bil(&h.uv, &self.vec, s)?;
        let pv = self.bil(&h.pv, &self.vec, s)?;
        let k = block_matrix(2 * n, &[(0, 0, &uu), (0, n, &up), (n, 0, &pu)])?;
        let mut rhs: Vec<f64> = uv.mul_vec(v).into_iter().chain(pv.mul_vec(v)).map(|x| -x).collect();
        let free: Vec<bool> = s.free_dofs().iter().chain(s.free_dofs()).copied().collect();
        for (r, &f) in rhs.iter_mut().zip(&free) {
            if !f {
                *r = 0.0;
            }
        }
        let x = NewtonSystem { matrix: k, rhs, free, nvec: 2 * n }.solve()?;
        Ok(MaterialDerivatives {
            state: GridFunction::from_coeffs(s, "du", x[..n].to_vec())?,
            adjoint: GridFunction::from_coeffs(s, "dp", x[n..].to_vec())?,
        })
    }

    /// `D^2 J(Omega)(V)(W)` for a constrained problem, given the material derivatives for
    /// `v`.
    pub fn second_order_constrained(&self, v: &[f64], w: &[f64], md: &MaterialDerivatives) -> Result<f64, ShapeError> {
        let c = self.need("second_order_constrained")?;
        check_len(v, self.vec.ndof())?;
        check_len(w, self.vec.ndof())?;
        let h = self.hess_forms();
        let vv = self.bil(&h.vv, &self.vec, &self.vec)?;
        let vu = self.bil(&h.vu, &c.space, &self.vec)?;
        let vp = self.bil(&h.vp, &c.space, &self.vec)?;
        Ok(vv.bilinear(w, v) + vu.bilinear(w, &md.state.coeffs) + vp.bilinear(w, &md.adjoint.coeffs))
    }

    /// `D^2 J(Omega)(V)(V)` for either kind of problem.
    pub fn second_order(&self, v: &[f64]) -> Result<f64, ShapeError> {
        check_len(v, self.vec.ndof())?;
        if self.constraint.is_none() {
            return Ok(self.shape_shape_block()?.bilinear(v, v));
        }
        let md = self.material_derivatives(v)?;
        self.second_order_constrained(v, v, &md)
    }

    fn regularization(&self, reg: Regularization) -> Result<(CsrMatrix, Vec<bool>), ShapeError> {
        let (w, v) = (self.vec.trial(), self.vec.test());
        match reg {
            Regularization::BoundaryTangential(d) => {
                let tau = Expr::tangent();
                let term = FormTerm::boundary(w.inner(&tau)? * v.inner(&tau)?)?.scaled(d);
                let m = self.bil(&[term], &self.vec, &self.vec)?;
                Ok((m, self.vec.boundary_dofs(&self.mesh, &[])?))
            }
            Regularization::H1(d) => {
                let term = FormTerm::volume(w.grad()?.inner(&v.grad()?)? + w.inner(&v)?)?.scaled(d);
                let m = self.bil(&[term], &self.vec, &self.vec)?;
                Ok((m, vec![true; self.vec.ndof()]))
            }
        }
    }

    /// Regularized Newton system for the current shape, state and adjoint. Its solution's
    /// direction part is the Newton update to add to the shape.
    pub fn newton_operator(&self, reg: Regularization) -> Result<NewtonSystem, ShapeError> {
        let h = self.hess_forms();
        let nv = self.vec.ndof();
        let (r, mut free) = self.regularization(reg)?;
        let vv = self.shape_shape_block()?.add_scaled(&r, 1.0)?;
        let mut rhs: Vec<f64> = self.first_order(DiffMode::Full)?.into_iter().map(|x| -x).collect();
        let matrix = match &self.constraint {
            None => vv,
            Some(c) => {
                let s = &c.space;
                let n = s.ndof();
                let blocks = [
                    self.bil(&h.vu, s, &self.vec)?,
                    self.bil(&h.vp, s, &self.vec)?,
                    self.bil(&h.uv, &self.vec, s)?,
                    self.bil(&h.uu, s, s)?,
                    self.bil(&h.up, s, s)?,
                    self.bil(&h.pv, &self.vec, s)?,
                    self.state_operator()?,
                ];
                rhs.resize(nv + 2 * n, 0.0);
                free.extend(s.free_dofs().iter().chain(s.free_dofs()));
                block_matrix(
                    nv + 2 * n,
                    &[
                        (0, 0, &vv),
                        (0, nv, &blocks[0]),
                        (0, nv + n, &blocks[1]),
                        (nv, 0, &blocks[2]),
                        (nv, nv, &blocks[3]),
                        (nv, nv + n, &blocks[4]),
                        (nv + n, 0, &blocks[5]),
                        (nv + n, nv, &blocks[6]),
                    ],
                )?
            }
        };
        for (x, &f) in rhs.iter_mut().zip(&free) {
            if !f {
                *x = 0.0;
            }
        }
        Ok(NewtonSystem { matrix, rhs, free, nvec: nv })
    }

    /// `dJ . v` for the full-mode derivative.
    pub fn directional(&self, v: &[f64]) -> Result<f64, ShapeError> {
        check_len(v, self.vec.ndof())?;
        Ok(dot(&self.first_order(DiffMode::Full)?, v))
    }
}
