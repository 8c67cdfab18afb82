use std::collections::HashMap;

use super::{Expr, ExprError, Kind, Value};

/// Conservative, value-preserving simplification.
///
/// Removes additions of zero, multiplications by zero and one, identity factors, and
/// evaluates `det(I)`, `inv(I)`, `trans(I)`, `trace(I)`. Operations whose operands are all
/// literals are folded. Sums are never reassociated.
pub fn simplify(e: &Expr) -> Expr {
    let mut memo = HashMap::new();
    simp(e, &mut memo)
}

fn simp(e: &Expr, memo: &mut HashMap<usize, Expr>) -> Expr {
    if let Some(r) = memo.get(&e.node_id()) {
        return r.clone();
    }
    let r = if e.children().is_empty() {
        e.clone()
    } else {
        let ch: Vec<Expr> = e.children().iter().map(|c| simp(c, memo)).collect();
        rule(e, ch).expect("simplification preserves shapes")
    };
    memo.insert(e.node_id(), r.clone());
    r
}

fn lit(e: &Expr) -> Option<Value> {
    match e.kind() {
        Kind::Scalar(c) => Some(Value::Scalar(*c)),
        Kind::Const(v) => Some(*v),
        _ => None,
    }
}

fn rule(e: &Expr, ch: Vec<Expr>) -> Result<Expr, ExprError> {
    let shape = e.shape();
    let zero = || Ok(Expr::zero(shape));
    let c = |i: usize| &ch[i];
    let folded = |v: Value| Ok(Expr::constant(v));
    match e.kind() {
        Kind::Add => {
            if c(0).is_zero() {
                return Ok(c(1).clone());
            }
            if c(1).is_zero() {
                return Ok(c(0).clone());
            }
            if let (Some(a), Some(b)) = (lit(c(0)), lit(c(1))) {
                return folded(a.add(b));
            }
        }
        Kind::Sub => {
            if c(1).is_zero() {
                return Ok(c(0).clone());
            }
            if c(0).is_zero() {
                return Ok(c(1).neg());
            }
            if let (Some(a), Some(b)) = (lit(c(0)), lit(c(1))) {
                return folded(a.sub(b));
            }
        }
        Kind::Neg => {
            if c(0).is_zero() {
                return Ok(c(0).clone());
            }
            if let Kind::Neg = c(0).kind() {
                return Ok(c(0).children()[0].clone());
            }
            if let Some(a) = lit(c(0)) {
                return folded(a.neg());
            }
        }
        Kind::Mul => {
            if c(0).is_zero() || c(1).is_zero() {
                return zero();
            }
            if c(0).is_one() {
                return Ok(c(1).clone());
            }
            if c(1).is_one() {
                return Ok(c(0).clone());
            }
            if let (Some(a), Some(b)) = (lit(c(0)), lit(c(1))) {
                return folded(b.scaled(a.scalar()));
            }
        }
        Kind::MatVec => {
            if c(0).is_zero() || c(1).is_zero() {
                return zero();
            }
            if c(0).is_identity() {
                return Ok(c(1).clone());
            }
            if let (Some(a), Some(b)) = (lit(c(0)), lit(c(1))) {
                return folded(a.matvec(b));
            }
        }
        Kind::MatMat => {
            if c(0).is_zero() || c(1).is_zero() {
                return zero();
            }
            if c(0).is_identity() {
                return Ok(c(1).clone());
            }
            if c(1).is_identity() {
                return Ok(c(0).clone());
            }
            if let (Some(a), Some(b)) = (lit(c(0)), lit(c(1))) {
                return folded(a.matmat(b));
            }
        }
        Kind::Inner => {
            if c(0).is_zero() || c(1).is_zero() {
                return zero();
            }
            if let (Some(a), Some(b)) = (lit(c(0)), lit(c(1))) {
                return folded(Value::Scalar(a.inner(b)));
            }
        }
        Kind::Outer => {
            if c(0).is_zero() || c(1).is_zero() {
                return zero();
            }
            if let (Some(a), Some(b)) = (lit(c(0)), lit(c(1))) {
                return folded(a.outer(b));
            }
        }
        Kind::Transpose => {
            if let Some(a) = lit(c(0)) {
                return folded(a.transpose());
            }
        }
        Kind::Trace => {
            if let Some(a) = lit(c(0)) {
                return folded(Value::Scalar(a.trace()));
            }
        }
        Kind::Det => {
            if let Some(a) = lit(c(0)) {
                return folded(Value::Scalar(a.det()));
            }
        }
        Kind::Inverse => {
            if c(0).is_identity() {
                return Ok(c(0).clone());
            }
        }
        Kind::Component(i) => {
            if let Some(a) = lit(c(0)) {
                return folded(Value::Scalar(a.vector()[*i]));
            }
            if let Kind::StackVector = c(0).kind() {
                return Ok(c(0).children()[*i].clone());
            }
        }
        Kind::Entry(i, j) => {
            if let Some(a) = lit(c(0)) {
                return folded(Value::Scalar(a.matrix()[*i][*j]));
            }
            if let Kind::StackMatrix = c(0).kind() {
                return Ok(c(0).children()[2 * i + j].clone());
            }
        }
        Kind::Pow(p) => {
            if *p == 1.0 {
                return Ok(c(0).clone());
            }
            if let Some(a) = lit(c(0)) {
                return folded(Value::Scalar(a.scalar().powf(*p)));
            }
        }
        Kind::Exp => {
            if let Some(a) = lit(c(0)) {
                return folded(Value::Scalar(a.scalar().exp()));
            }
        }
        Kind::Sqrt => {
            if let Some(a) = lit(c(0)) {
                return folded(Value::Scalar(a.scalar().sqrt()));
            }
        }
        Kind::StackVector => {
            if let (Some(a), Some(b)) = (lit(c(0)), lit(c(1))) {
                return folded(Value::Vector([a.scalar(), b.scalar()]));
            }
        }
        Kind::StackMatrix => {
            let l: Option<Vec<f64>> = ch.iter().map(|x| lit(x).map(|v| v.scalar())).collect();
            if let Some(v) = l {
                return folded(Value::Matrix([[v[0], v[1]], [v[2], v[3]]]));
            }
        }
        _ => {}
    }
    if ch.iter().zip(e.children()).all(|(a, b)| a.ptr_eq(b)) {
        Ok(e.clone())
    } else {
        e.rebuild(ch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::FnRef;

    #[test]
    fn basic_rules() {
        let three_zero = Expr::scalar(3.0) * Expr::scalar(0.0);
        assert!(simplify(&three_zero).is_zero());
        assert!(simplify(&Expr::identity().det().unwrap()).is_one());
        let e = Expr::x() + Expr::scalar(0.0);
        assert!(matches!(simplify(&e).kind(), Kind::Coordinate(0)));
        assert!(simplify(&Expr::identity().inv().unwrap()).is_identity());
        let v = Expr::test(FnRef::new(1, 2, "V"));
        let iv = Expr::identity().transpose().unwrap().matvec(&v).unwrap();
        assert!(matches!(simplify(&iv).kind(), Kind::Test(_)));
    }

    #[test]
    fn sums_are_not_reassociated() {
        let e = (Expr::x() + Expr::y()) + Expr::x();
        let s = simplify(&e);
        assert!(s.ptr_eq(&e));
    }
}
