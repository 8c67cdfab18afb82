use std::collections::HashMap;
use std::sync::Arc;

use super::{Expr, ExprError, FnRef, Kind};

/// Differentiation variable.
enum Var {
    Position,
    Coordinate(usize),
    ShapeF,
    Parameter(Arc<str>),
    GridFunc(FnRef),
}

fn classify(var: &Expr) -> Result<Var, ExprError> {
    Ok(match var.kind() {
        Kind::Position => Var::Position,
        Kind::Coordinate(i) => Var::Coordinate(*i),
        Kind::ShapeF => Var::ShapeF,
        Kind::Parameter(n) => Var::Parameter(n.clone()),
        Kind::GridFunc(f) => Var::GridFunc(f.clone()),
        _ => return Err(ExprError::UnsupportedVariable(var.to_string())),
    })
}

/// Directional derivative of `e` with respect to `var` in direction `dir`.
///
/// `var` may be the coordinate bundle X, a single coordinate, the shape symbol F, a
/// parameter, or a grid function. Trial, test and grid functions as well as normals and
/// tangents do not depend on the spatial variables. Constant factors of products are not
/// differentiated, so `diff(2*x, x, v)` is `2*v`; no other simplification is applied.
pub fn diff(e: &Expr, var: &Expr, dir: &Expr) -> Result<Expr, ExprError> {
    let v = classify(var)?;
    if var.shape() != dir.shape() {
        return Err(ExprError::DirectionShape { expected: var.shape(), found: dir.shape() });
    }
    let mut d = Differ { var: v, dir: dir.clone(), memo: HashMap::new() };
    d.run(e)
}

struct Differ {
    var: Var,
    dir: Expr,
    memo: HashMap<usize, Expr>,
}

impl Differ {
    fn run(&mut self, e: &Expr) -> Result<Expr, ExprError> {
        if let Some(r) = self.memo.get(&e.node_id()) {
            return Ok(r.clone());
        }
        let r = self.rule(e)?;
        self.memo.insert(e.node_id(), r.clone());
        Ok(r)
    }

    /// Product rule for a bilinear operation `op(a, b)`, skipping literal factors.
    fn product(
        &mut self,
        e: &Expr,
        op: impl Fn(&Expr, &Expr) -> Result<Expr, ExprError>,
    ) -> Result<Expr, ExprError> {
        let (a, b) = (&e.children()[0], &e.children()[1]);
        let left = if a.is_literal() { None } else { Some(op(&self.run(a)?, b)?) };
        let right = if b.is_literal() { None } else { Some(op(a, &self.run(b)?)?) };
        match (left, right) {
            (Some(l), Some(r)) => l.try_add(&r),
            (Some(t), None) | (None, Some(t)) => Ok(t),
            (None, None) => Ok(Expr::zero(e.shape())),
        }
    }

    fn rule(&mut self, e: &Expr) -> Result<Expr, ExprError> {
        let zero = || Ok(Expr::zero(e.shape()));
        let ch = e.children();
        match e.kind() {
            Kind::Scalar(_) | Kind::Const(_) => zero(),
            Kind::Coordinate(i) => match &self.var {
                Var::Position => self.dir.component(*i),
                Var::Coordinate(j) if j == i => Ok(self.dir.clone()),
                _ => zero(),
            },
            Kind::Position => match &self.var {
                Var::Position => Ok(self.dir.clone()),
                Var::Coordinate(j) => {
                    let z = Expr::scalar(0.0);
                    if *j == 0 {
                        Expr::stack_vector(&self.dir, &z)
                    } else {
                        Expr::stack_vector(&z, &self.dir)
                    }
                }
                _ => zero(),
            },
            Kind::Parameter(n) => match &self.var {
                Var::Parameter(m) if m == n => Ok(self.dir.clone()),
                _ => zero(),
            },
            Kind::ShapeF => match &self.var {
                Var::ShapeF => Ok(self.dir.clone()),
                _ => zero(),
            },
            Kind::Normal | Kind::Tangent | Kind::Trial(_) | Kind::Test(_) => zero(),
            Kind::GridFunc(f) => match &self.var {
                Var::GridFunc(g) if g == f => Ok(self.dir.clone()),
                _ => zero(),
            },
            Kind::Grad { traced } => match (&self.var, ch[0].kind()) {
                (Var::GridFunc(g), Kind::GridFunc(f)) if g == f => {
                    if *traced {
                        self.dir.grad_traced()
                    } else {
                        self.dir.grad()
                    }
                }
                _ => zero(),
            },
            Kind::Add => self.run(&ch[0])?.try_add(&self.run(&ch[1])?),
            Kind::Sub => self.run(&ch[0])?.try_sub(&self.run(&ch[1])?),
            Kind::Neg => Ok(self.run(&ch[0])?.neg()),
            Kind::Mul => self.product(e, |a, b| a.scale(b)),
            Kind::MatVec => self.product(e, |a, b| a.matvec(b)),
            Kind::MatMat => self.product(e, |a, b| a.matmat(b)),
            Kind::Inner => self.product(e, |a, b| a.inner(b)),
            Kind::Outer => self.product(e, |a, b| a.outer(b)),
            Kind::Transpose => self.run(&ch[0])?.transpose(),
            Kind::Trace => self.run(&ch[0])?.trace(),
            Kind::Component(i) => self.run(&ch[0])?.component(*i),
            Kind::Entry(i, j) => self.run(&ch[0])?.entry(*i, *j),
            Kind::Inverse => {
                // d(M^-1) = -M^-1 dM M^-1
                let dm = self.run(&ch[0])?;
                Ok(e.matmat(&dm)?.matmat(e)?.neg())
            }
            Kind::Det => {
                // d det M = det M tr(M^-1 dM)
                let dm = self.run(&ch[0])?;
                e.scale(&ch[0].inv()?.matmat(&dm)?.trace()?)
            }
            Kind::Norm => {
                // d|v| = (v . dv) / |v|
                let dv = self.run(&ch[0])?;
                e.pow(-1.0)?.scale(&ch[0].inner(&dv)?)
            }
            Kind::Pow(p) => {
                let da = self.run(&ch[0])?;
                if *p == 0.0 {
                    return zero();
                }
                let coef = if *p == 1.0 {
                    return Ok(da);
                } else if *p == 2.0 {
                    Expr::scalar(2.0).scale(&ch[0])?
                } else {
                    Expr::scalar(*p).scale(&ch[0].pow(p - 1.0)?)?
                };
                coef.scale(&da)
            }
            Kind::Exp => e.scale(&self.run(&ch[0])?),
            Kind::Sqrt => {
                let da = self.run(&ch[0])?;
                Expr::scalar(0.5).scale(&e.pow(-1.0)?)?.scale(&da)
            }
            Kind::StackVector => Expr::stack_vector(&self.run(&ch[0])?, &self.run(&ch[1])?),
            Kind::StackMatrix => {
                let d: Vec<Expr> = ch.iter().map(|c| self.run(c)).collect::<Result<_, _>>()?;
                Expr::stack_matrix([&d[0], &d[1], &d[2], &d[3]])
            }
        }
    }
}

fn is_leaf_match(e: &Expr, var: &Expr) -> bool {
    if !e.children().is_empty() {
        return false;
    }
    match (e.kind(), var.kind()) {
        (Kind::Scalar(_), _) | (Kind::Const(_), _) => false,
        (a, b) => a == b,
    }
}

/// Replaces every leaf equal to `var` by `repl`. Gradients of a replaced function are
/// rebuilt on the replacement, which must then itself be a function reference.
pub fn substitute(e: &Expr, var: &Expr, repl: &Expr) -> Result<Expr, ExprError> {
    if var.shape() != repl.shape() {
        return Err(ExprError::DirectionShape { expected: var.shape(), found: repl.shape() });
    }
    if !var.children().is_empty() || var.is_literal() {
        return Err(ExprError::UnsupportedVariable(var.to_string()));
    }
    let mut memo = HashMap::new();
    subst_rec(e, var, repl, &mut memo)
}

fn subst_rec(
    e: &Expr,
    var: &Expr,
    repl: &Expr,
    memo: &mut HashMap<usize, Expr>,
) -> Result<Expr, ExprError> {
    if let Some(r) = memo.get(&e.node_id()) {
        return Ok(r.clone());
    }
    let r = if is_leaf_match(e, var) {
        repl.clone()
    } else if e.children().is_empty() {
        e.clone()
    } else {
        let mut changed = false;
        let mut ch = Vec::with_capacity(e.children().len());
        for c in e.children() {
            let n = subst_rec(c, var, repl, memo)?;
            changed |= !n.ptr_eq(c);
            ch.push(n);
        }
        if changed {
            e.rebuild(ch)?
        } else {
            e.clone()
        }
    };
    memo.insert(e.node_id(), r.clone());
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{evaluate, EvalContext, Value};

    fn eval(e: &Expr, ctx: &EvalContext) -> Value {
        evaluate(e, ctx).unwrap()
    }

    #[test]
    fn polynomial_derivative_prints_like_reference() {
        let x = Expr::x();
        let e = 2.0 * &x * &x + 3.0 * Expr::y();
        let v = Expr::parameter("v");
        let d = diff(&e, &x, &v).unwrap();
        assert_eq!(d.to_string(), "(2*v*x + 2*x*v) + 3*0");
    }

    #[test]
    fn constants_and_functions_are_spatially_independent() {
        let v = Expr::test(FnRef::new(9, 2, "V"));
        let c = Expr::scalar(4.0);
        assert!(diff(&c, &Expr::x(), &Expr::scalar(1.0)).unwrap().is_zero());
        for f in [
            Expr::trial(FnRef::new(3, 1, "u")),
            Expr::test(FnRef::new(3, 1, "w")),
            Expr::grid_func(FnRef::new(4, 1, "g")),
        ] {
            let d = diff(&f, &Expr::position(), &v).unwrap();
            assert!(d.is_zero(), "{d}");
            let dg = diff(&f.grad().unwrap(), &Expr::position(), &v).unwrap();
            assert!(dg.is_zero());
        }
    }

    #[test]
    fn direction_shape_is_checked() {
        let e = Expr::shape_f().det().unwrap();
        assert!(diff(&e, &Expr::shape_f(), &Expr::vector([1.0, 0.0])).is_err());
        assert!(diff(&e, &Expr::normal(), &Expr::vector([1.0, 0.0])).is_err());
    }

    #[test]
    fn det_derivative_at_identity_is_trace() {
        let h = Expr::matrix([[1.0, 2.0], [3.0, 4.0]]);
        let d = diff(&Expr::shape_f().det().unwrap(), &Expr::shape_f(), &h).unwrap();
        assert!((eval(&d, &EvalContext::default()).scalar() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn grid_function_derivative_replaces_function_and_gradient() {
        let g = FnRef::new(11, 1, "u");
        let u = Expr::grid_func(g.clone());
        let w = Expr::test(FnRef::new(12, 1, "w"));
        let e = &u * &u + u.grad().unwrap() * u.grad().unwrap();
        let d = diff(&e, &u, &w).unwrap();
        assert!(d.contains(&|n| matches!(n.kind(), Kind::Grad { .. })
            && matches!(n.children()[0].kind(), Kind::Test(_))));
    }

    #[test]
    fn substitute_rebuilds_gradients() {
        let w = Expr::test(FnRef::new(21, 1, "w"));
        let p = Expr::grid_func(FnRef::new(22, 1, "p"));
        let e = w.grad().unwrap() * Expr::vector([1.0, 2.0]) + &w;
        let s = substitute(&e, &w, &p).unwrap();
        assert!(!s.contains(&|n| matches!(n.kind(), Kind::Test(_))));
        assert!(substitute(&e, &w, &Expr::x()).is_err());
    }
}
