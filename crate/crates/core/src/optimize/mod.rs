//! Shape gradients under several inner products and the descent and Newton loops.

mod spacetime;

use std::io::Write;

use crate::fem::{assemble_bilinear, integrate, Bindings, FESpace, GridFunction};
use crate::linalg::{dot, solve_dirichlet, CsrMatrix, DenseVector};
use crate::mesh::Mesh2D;
use crate::shapecalc::{DiffMode, Regularization, ShapeError, ShapeProblem};
use crate::symbolic::{Expr, ExprError, FormTerm};

pub use spacetime::{
    parametric_shape_f, restricted_first_order, spacetime_descent, spacetime_direction, time_average_field, F_PARAMS,
};

/// Inner product on vector fields defining the shape gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerProduct {
    /// `int dW:dV + W.V`
    H1,
    /// `int eps(W):eps(V) + W.V`
    Elasticity,
    /// elasticity plus `gamma * int BW.BV` with the Cauchy-Riemann operator B
    ElasticityCr(f64),
}

impl InnerProduct {
    /// Parses `h1`, `ela` or `elacr` (the latter with the given weight).
    pub fn parse(s: &str, gamma_cr: f64) -> Option<Self> {
        match s {
            "h1" => Some(Self::H1),
            "ela" => Some(Self::Elasticity),
            "elacr" => Some(Self::ElasticityCr(gamma_cr)),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::H1 => "h1",
            Self::Elasticity => "ela",
            Self::ElasticityCr(_) => "elacr",
        }
    }

    pub fn terms(&self, vec: &FESpace) -> Result<Vec<FormTerm>, ExprError> {
        let (w, v) = (vec.trial(), vec.test());
        let (gw, gv) = (w.grad()?, v.grad()?);
        let mass = w.inner(&v)?;
        let main = match self {
            Self::H1 => gw.inner(&gv)?,
            Self::Elasticity | Self::ElasticityCr(_) => sym(&gw)?.inner(&sym(&gv)?)?,
        };
        let mut terms = vec![FormTerm::volume(main + mass)?];
        if let Self::ElasticityCr(g) = *self {
            let (bw, bv) = (cauchy_riemann(&gw)?, cauchy_riemann(&gv)?);
            terms.push(FormTerm::volume(bw.inner(&bv)?)?.scaled(g));
        }
        Ok(terms)
    }

    pub fn matrix(&self, mesh: &Mesh2D, vec: &FESpace) -> Result<CsrMatrix, ShapeError> {
        Ok(assemble_bilinear(mesh, &self.terms(vec)?, vec, vec, &Bindings::new())?)
    }
}

fn sym(g: &Expr) -> Result<Expr, ExprError> {
    Ok(Expr::scalar(0.5) * (g.clone() + g.transpose()?))
}

/// Cauchy-Riemann residuals `(dy V2 - dx V1, dx V2 + dy V1)` of a vector field, from its
/// gradient `G[i][j] = d_j V_i`.
pub fn cauchy_riemann(g: &Expr) -> Result<Expr, ExprError> {
    let a = g.entry(1, 1)? - g.entry(0, 0)?;
    let b = g.entry(1, 0)? + g.entry(0, 1)?;
    Expr::stack_vector(&a, &b)
}

/// `int |B V|^2` on the current configuration.
pub fn conformality_residual(mesh: &Mesh2D, field: &GridFunction) -> Result<f64, ShapeError> {
    let b = cauchy_riemann(&field.expr().grad()?)?;
    Ok(integrate(mesh, &[FormTerm::volume(b.inner(&b)?)?], &Bindings::new().func(field))?)
}

/// Riesz representative of `dj` in the inner product, with its norm `sqrt(dj . X)`.
pub fn shape_gradient(
    mesh: &Mesh2D,
    vec: &FESpace,
    ip: InnerProduct,
    dj: &[f64],
) -> Result<(GridFunction, f64), ShapeError> {
    let a = ip.matrix(mesh, vec)?;
    let x = solve_dirichlet(&a, dj, &vec![true; vec.ndof()], false)?;
    let n = dot(dj, &x).max(0.0).sqrt();
    Ok((GridFunction::from_coeffs(vec, "gradient", x)?, n))
}

/// Extends a field given on the boundary dofs into the interior by the elasticity-type form
/// `int (dU + dU^T):dV + U.V`, keeping boundary values fixed. Interior entries of `bnd` are
/// ignored.
pub fn extend_boundary_field(mesh: &Mesh2D, vec: &FESpace, bnd: &[f64]) -> Result<GridFunction, ShapeError> {
    if bnd.len() != vec.ndof() {
        return Err(ShapeError::Size { expected: vec.ndof(), found: bnd.len() });
    }
    let (u, v) = (vec.trial(), vec.test());
    let gu = u.grad()?;
    let term = FormTerm::volume((gu.clone() + gu.transpose()?).inner(&v.grad()?)? + u.inner(&v)?)?;
    let a = assemble_bilinear(mesh, &[term], vec, vec, &Bindings::new())?;
    let on_bnd = vec.boundary_dofs(mesh, &[])?;
    let mut x: Vec<f64> = bnd.iter().zip(&on_bnd).map(|(&b, &o)| if o { b } else { 0.0 }).collect();
    let r: Vec<f64> = a.mul_vec(&x).into_iter().map(|v| -v).collect();
    let interior: Vec<bool> = on_bnd.iter().map(|b| !b).collect();
    let dx = solve_dirichlet(&a, &r, &interior, false)?;
    for (xi, d) in x.iter_mut().zip(dx) {
        *xi += d;
    }
    Ok(GridFunction::from_coeffs(vec, "extension", x)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptConfig {
    pub alpha0: f64,
    pub alpha_incr: f64,
    pub alpha_decr: f64,
    /// Armijo constant
    pub gamma: f64,
    pub max_iter: usize,
    pub eps_grad: f64,
    pub alpha_max: f64,
    /// consecutive rejections before the line search gives up
    pub max_rejections: usize,
    /// bake accepted steps into the node positions instead of accumulating a deformation
    pub move_nodes: bool,
    pub smooth_sweeps: usize,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            alpha0: 1.0,
            alpha_incr: 1.2,
            alpha_decr: 0.5,
            gamma: 1e-4,
            max_iter: 100,
            eps_grad: 1e-7,
            alpha_max: 1e4,
            max_rejections: 60,
            move_nodes: false,
            smooth_sweeps: 0,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<(), ShapeError> {
        let ok = self.gamma > 0.0
            && self.gamma < 1.0
            && self.alpha_incr >= 1.0
            && self.alpha_decr > 0.0
            && self.alpha_decr < 1.0
            && self.alpha0 > 0.0
            && self.alpha_max >= self.alpha0
            && self.eps_grad >= 0.0;
        if !ok {
            return Err(ShapeError::Invalid(format!("invalid optimizer configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub iter: usize,
    /// cost of the candidate shape (infinite if the mesh folded)
    pub j: f64,
    /// gradient norm at the shape the step started from
    pub gradnorm: f64,
    pub alpha: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIterations,
    LineSearchFailed,
    Diverging,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptHistory {
    pub records: Vec<StepRecord>,
    pub j_initial: f64,
    pub j_final: f64,
    pub gradnorm_initial: f64,
    pub gradnorm_final: f64,
    /// accepted steps
    pub iterations: usize,
    pub stop: StopReason,
}

impl OptHistory {
    fn new(j: f64) -> Self {
        Self {
            records: Vec::new(),
            j_initial: j,
            j_final: j,
            gradnorm_initial: f64::NAN,
            gradnorm_final: f64::NAN,
            iterations: 0,
            stop: StopReason::MaxIterations,
        }
    }

    fn gradnorm(&mut self, g: f64) {
        if self.gradnorm_initial.is_nan() {
            self.gradnorm_initial = g;
        }
        self.gradnorm_final = g;
    }

    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }

    /// Costs of the accepted shapes, starting with the initial one.
    pub fn accepted_costs(&self) -> Vec<f64> {
        std::iter::once(self.j_initial).chain(self.records.iter().filter(|r| r.accepted).map(|r| r.j)).collect()
    }

    /// Writes `iter,J,gradnorm,alpha,accepted`.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["iter", "J", "gradnorm", "alpha", "accepted"])?;
        for r in &self.records {
            out.write_record([
                r.iter.to_string(),
                format!("{:e}", r.j),
                format!("{:e}", r.gradnorm),
                format!("{:e}", r.alpha),
                (r.accepted as u8).to_string(),
            ])?;
        }
        out.flush()
    }
}

/// A descent direction over the direction space and the slope `dJ . X > 0` along it.
pub struct Direction {
    pub x: DenseVector,
    pub slope: f64,
}

/// Armijo loop: candidate `shape - alpha X`, accepted when
/// `J < J_old - gamma alpha slope`. The gradient norm reported and tested is `sqrt(slope)`.
pub fn descent_loop(
    prob: &mut ShapeProblem,
    cfg: &OptConfig,
    mut direction: impl FnMut(&mut ShapeProblem) -> Result<Direction, ShapeError>,
    mut on_accept: impl FnMut(&ShapeProblem, usize) -> Result<(), ShapeError>,
) -> Result<OptHistory, ShapeError> {
    cfg.validate()?;
    prob.solve()?;
    let mut j_old = prob.cost()?;
    let mut hist = OptHistory::new(j_old);
    let mut alpha = cfg.alpha0;
    for k in 0..cfg.max_iter {
        let dir = direction(prob)?;
        let norm = dir.slope.max(0.0).sqrt();
        hist.gradnorm(norm);
        if norm <= cfg.eps_grad {
            hist.stop = StopReason::Converged;
            return Ok(hist);
        }
        let base = prob.shape().coeffs.clone();
        let mut rejections = 0;
        loop {
            let cand: Vec<f64> = base.iter().zip(&dir.x).map(|(s, x)| s - alpha * x).collect();
            let j_new = match prob.cost_at(&cand) {
                Ok(j) => j,
                Err(e) if e.is_invalid_shape() => f64::INFINITY,
                Err(e) => return Err(e),
            };
            let accepted = j_new < j_old - cfg.gamma * alpha * dir.slope;
            hist.records.push(StepRecord { iter: k + 1, j: j_new, gradnorm: norm, alpha, accepted });
            if accepted {
                j_old = j_new;
                hist.j_final = j_new;
                hist.iterations += 1;
                alpha = (alpha * cfg.alpha_incr).min(cfg.alpha_max);
                if cfg.move_nodes {
                    prob.move_nodes(cfg.smooth_sweeps)?;
                    prob.solve_state()?;
                }
                prob.solve_adjoint()?;
                on_accept(prob, k + 1)?;
                break;
            }
            alpha *= cfg.alpha_decr;
            rejections += 1;
            if rejections >= cfg.max_rejections {
                prob.set_shape(&base)?;
                prob.solve()?;
                hist.stop = StopReason::LineSearchFailed;
                return Ok(hist);
            }
        }
    }
    let dir = direction(prob)?;
    hist.gradnorm(dir.slope.max(0.0).sqrt());
    if hist.gradnorm_final <= cfg.eps_grad {
        hist.stop = StopReason::Converged;
    }
    Ok(hist)
}

/// Gradient descent with the shape gradient of the given inner product as direction.
pub fn gradient_descent(
    prob: &mut ShapeProblem,
    ip: InnerProduct,
    cfg: &OptConfig,
    on_accept: impl FnMut(&ShapeProblem, usize) -> Result<(), ShapeError>,
) -> Result<OptHistory, ShapeError> {
    descent_loop(
        prob,
        cfg,
        |p| {
            let dj = p.first_order(DiffMode::Full)?;
            let (g, _) = shape_gradient(p.mesh(), p.vec_space(), ip, &dj)?;
            let slope = dot(&dj, &g.coeffs);
            Ok(Direction { x: g.coeffs, slope })
        },
        on_accept,
    )
}

/// Newton direction for the current shape: solves the regularized Newton system, extends the
/// boundary part into the interior for the tangential variant, and returns it with the
/// Newton decrement `sqrt(|dJ . step|)`.
pub fn newton_direction(prob: &ShapeProblem, reg: Regularization) -> Result<(GridFunction, f64), ShapeError> {
    let sys = prob.newton_operator(reg)?;
    let step = sys.solve()?;
    let dec = dot(&sys.rhs[..sys.nvec], &step).abs().sqrt();
    let g = match reg {
        Regularization::BoundaryTangential(_) => extend_boundary_field(prob.mesh(), prob.vec_space(), &step)?,
        Regularization::H1(_) => GridFunction::from_coeffs(prob.vec_space(), "step", step)?,
    };
    Ok((g, dec))
}

/// Newton iteration with full steps. Stops when the Newton decrement drops below
/// `cfg.eps_grad`, after `cfg.max_iter` steps, or when the cost rises three times in a row.
pub fn newton_loop(
    prob: &mut ShapeProblem,
    reg: Regularization,
    cfg: &OptConfig,
    mut on_step: impl FnMut(&ShapeProblem, usize) -> Result<(), ShapeError>,
) -> Result<OptHistory, ShapeError> {
    prob.solve()?;
    let mut j = prob.cost()?;
    let mut hist = OptHistory::new(j);
    let mut rises = 0;
    for k in 0..=cfg.max_iter {
        let (step, dec) = newton_direction(prob, reg)?;
        hist.gradnorm(dec);
        if dec <= cfg.eps_grad {
            hist.stop = StopReason::Converged;
            return Ok(hist);
        }
        if k == cfg.max_iter {
            break;
        }
        let cand: Vec<f64> = prob.shape().coeffs.iter().zip(&step.coeffs).map(|(s, x)| s + x).collect();
        let j_new = prob.cost_at(&cand)?;
        prob.solve_adjoint()?;
        hist.records.push(StepRecord { iter: k + 1, j: j_new, gradnorm: dec, alpha: 1.0, accepted: true });
        hist.iterations += 1;
        hist.j_final = j_new;
        rises = if j_new > j { rises + 1 } else { 0 };
        j = j_new;
        on_step(prob, k + 1)?;
        if rises >= 3 {
            hist.stop = StopReason::Diverging;
            return Ok(hist);
        }
    }
    hist.stop = StopReason::MaxIterations;
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::project;
    use crate::mesh::generate_disk;

    #[test]
    fn inner_products_are_spd_and_parse() {
        let m = generate_disk([0.0, 0.0], 1.0, 0.3).unwrap();
        let vec = FESpace::vector_h1(&m, 1, &[]).unwrap();
        for ip in [InnerProduct::H1, InnerProduct::Elasticity, InnerProduct::ElasticityCr(10.0)] {
            let a = ip.matrix(&m, &vec).unwrap();
            assert!(a.is_symmetric(1e-13));
            assert!(crate::linalg::cholesky_solve(&a, &vec![1.0; vec.ndof()]).is_ok());
            assert_eq!(InnerProduct::parse(ip.name(), 10.0), Some(ip));
        }
        assert_eq!(InnerProduct::parse("l2", 1.0), None);
    }

    #[test]
    fn conformal_fields_have_no_residual() {
        let m = generate_disk([0.0, 0.0], 1.0, 0.3).unwrap();
        let vec = FESpace::vector_h1(&m, 2, &[]).unwrap();
        // z^2 = (x^2 - y^2, 2xy) is holomorphic
        let (x, y) = (Expr::x(), Expr::y());
        let f = Expr::stack_vector(&(&x * &x - &y * &y), &(Expr::scalar(2.0) * &x * &y)).unwrap();
        let g = project(&m, &vec, &f, &Bindings::new()).unwrap();
        assert!(conformality_residual(&m, &g).unwrap() < 1e-20);
        let f = Expr::stack_vector(&(&x * &x), &y).unwrap();
        let g = project(&m, &vec, &f, &Bindings::new()).unwrap();
        assert!(conformality_residual(&m, &g).unwrap() > 0.1);
    }

    #[test]
    fn config_validation() {
        assert!(OptConfig::default().validate().is_ok());
        assert!(OptConfig { gamma: 1.0, ..Default::default() }.validate().is_err());
        assert!(OptConfig { alpha_decr: 1.0, ..Default::default() }.validate().is_err());
        assert!(OptConfig { alpha_incr: 0.9, ..Default::default() }.validate().is_err());
    }
}
