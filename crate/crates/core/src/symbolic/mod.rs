//! Immutable tensor expression trees in two space dimensions.
//!
//! An [`Expr`] is a reference-counted node carrying its value shape (scalar, 2-vector or
//! 2x2 matrix). Subtrees may be shared freely; every transformation (differentiation,
//! substitution, simplification) returns a new tree and memoizes on node identity so shared
//! subtrees stay shared.

mod diff;
mod eval;
mod print;
mod pullback;
mod simplify;
mod value;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

pub use diff::{diff, substitute};
pub use eval::{evaluate, EvalContext, FormKind, Plan, PlanOutput, PointData};
pub use pullback::{diff_shape, diff_shape_pulled, pullback, FormTerm, Region};
pub use simplify::simplify;
pub use value::Value;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("cannot differentiate with respect to {0}")]
    UnsupportedVariable(String),
    #[error("direction has shape {found:?}, variable has shape {expected:?}")]
    DirectionShape { expected: Shape, found: Shape },
    #[error("gradient requires a trial, test or grid function, found {0}")]
    NotFunction(String),
    #[error("integrand already contains the shape symbol F")]
    AlreadyPulledBack,
    #[error("direction must be a 2-vector function reference")]
    InvalidShapeDirection,
    #[error("form is not {expected}: {detail}")]
    NotLinear { expected: &'static str, detail: String },
    #[error("unbound reference: {0}")]
    Unbound(String),
    #[error("{0} is only available on boundary integrals")]
    BoundaryOnly(&'static str),
    #[error("singular evaluation: {0}")]
    Singular(String),
}

/// Value shape of a node; the spatial dimension is fixed to 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Scalar,
    Vector,
    Matrix,
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Allocates a process-wide unique id for spaces and grid functions.
pub(crate) fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// Reference to a finite element function: a space (for trial/test functions) or a grid
/// function, identified by id, with its value dimension.
#[derive(Debug, Clone)]
pub struct FnRef {
    pub id: u64,
    pub vdim: usize,
    pub name: Arc<str>,
}

impl FnRef {
    pub fn new(id: u64, vdim: usize, name: &str) -> Self {
        Self { id, vdim, name: Arc::from(name) }
    }

    pub fn value_shape(&self) -> Shape {
        if self.vdim == 1 {
            Shape::Scalar
        } else {
            Shape::Vector
        }
    }

    pub fn grad_shape(&self) -> Shape {
        if self.vdim == 1 {
            Shape::Vector
        } else {
            Shape::Matrix
        }
    }
}

impl PartialEq for FnRef {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.vdim == other.vdim
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kind {
    Scalar(f64),
    /// constant vector or matrix
    Const(Value),
    Coordinate(usize),
    Position,
    Parameter(Arc<str>),
    /// Jacobian of the transformation; evaluates to the identity
    ShapeF,
    Normal,
    Tangent,
    Trial(FnRef),
    Test(FnRef),
    GridFunc(FnRef),
    Grad { traced: bool },
    Add,
    Sub,
    Neg,
    /// scalar (first child) times anything
    Mul,
    MatVec,
    MatMat,
    Transpose,
    Inverse,
    Det,
    Trace,
    Inner,
    Outer,
    Norm,
    Pow(f64),
    Exp,
    Sqrt,
    Component(usize),
    Entry(usize, usize),
    StackVector,
    StackMatrix,
}

#[derive(Debug)]
pub struct Node {
    kind: Kind,
    children: Vec<Expr>,
    shape: Shape,
}

#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

fn mismatch(op: &'static str, detail: String) -> ExprError {
    ExprError::ShapeMismatch { op, detail }
}

impl Expr {
    fn node(kind: Kind, children: Vec<Expr>, shape: Shape) -> Expr {
        Expr(Arc::new(Node { kind, children, shape }))
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    pub fn children(&self) -> &[Expr] {
        &self.0.children
    }

    pub fn shape(&self) -> Shape {
        self.0.shape
    }

    /// Identity of the underlying node, used for memoization.
    pub fn node_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    // ---- leaves ----

    pub fn scalar(c: f64) -> Expr {
        Expr::node(Kind::Scalar(c), vec![], Shape::Scalar)
    }

    pub fn constant(v: Value) -> Expr {
        match v {
            Value::Scalar(c) => Expr::scalar(c),
            _ => Expr::node(Kind::Const(v), vec![], v.shape()),
        }
    }

    pub fn vector(v: [f64; 2]) -> Expr {
        Expr::constant(Value::Vector(v))
    }

    pub fn matrix(m: [[f64; 2]; 2]) -> Expr {
        Expr::constant(Value::Matrix(m))
    }

    pub fn identity() -> Expr {
        Expr::matrix([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn zero(shape: Shape) -> Expr {
        Expr::constant(Value::zero(shape))
    }

    pub fn coordinate(i: usize) -> Expr {
        assert!(i < 2, "coordinate index {i} out of range");
        Expr::node(Kind::Coordinate(i), vec![], Shape::Scalar)
    }

    /// First material coordinate.
    pub fn x() -> Expr {
        Expr::coordinate(0)
    }

    /// Second material coordinate.
    pub fn y() -> Expr {
        Expr::coordinate(1)
    }

    /// The coordinate bundle X = (x, y).
    pub fn position() -> Expr {
        Expr::node(Kind::Position, vec![], Shape::Vector)
    }

    pub fn parameter(name: &str) -> Expr {
        Expr::node(Kind::Parameter(Arc::from(name)), vec![], Shape::Scalar)
    }

    pub fn shape_f() -> Expr {
        Expr::node(Kind::ShapeF, vec![], Shape::Matrix)
    }

    pub fn normal() -> Expr {
        Expr::node(Kind::Normal, vec![], Shape::Vector)
    }

    pub fn tangent() -> Expr {
        Expr::node(Kind::Tangent, vec![], Shape::Vector)
    }

    pub fn trial(f: FnRef) -> Expr {
        let s = f.value_shape();
        Expr::node(Kind::Trial(f), vec![], s)
    }

    pub fn test(f: FnRef) -> Expr {
        let s = f.value_shape();
        Expr::node(Kind::Test(f), vec![], s)
    }

    pub fn grid_func(f: FnRef) -> Expr {
        let s = f.value_shape();
        Expr::node(Kind::GridFunc(f), vec![], s)
    }

    /// The function reference of a trial/test/grid-function leaf.
    pub fn fn_ref(&self) -> Option<&FnRef> {
        match self.kind() {
            Kind::Trial(f) | Kind::Test(f) | Kind::GridFunc(f) => Some(f),
            _ => None,
        }
    }

    pub fn is_fn_ref(&self) -> bool {
        self.fn_ref().is_some()
    }

    pub fn grad(&self) -> Result<Expr, ExprError> {
        self.grad_with(false)
    }

    /// Gradient evaluated as the trace of the volume function on a boundary.
    pub fn grad_traced(&self) -> Result<Expr, ExprError> {
        self.grad_with(true)
    }

    fn grad_with(&self, traced: bool) -> Result<Expr, ExprError> {
        let f = self.fn_ref().ok_or_else(|| ExprError::NotFunction(self.to_string()))?;
        let s = f.grad_shape();
        Ok(Expr::node(Kind::Grad { traced }, vec![self.clone()], s))
    }

    // ---- predicates ----

    pub fn is_zero(&self) -> bool {
        match self.kind() {
            Kind::Scalar(c) => *c == 0.0,
            Kind::Const(v) => v.is_zero(),
            _ => false,
        }
    }

    pub fn is_one(&self) -> bool {
        matches!(self.kind(), Kind::Scalar(c) if *c == 1.0)
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind(), Kind::Const(Value::Matrix(m)) if *m == [[1.0, 0.0], [0.0, 1.0]])
    }

    /// Literal constant leaf (scalar, vector or matrix).
    pub fn is_literal(&self) -> bool {
        matches!(self.kind(), Kind::Scalar(_) | Kind::Const(_))
    }

    /// Whether any node of the tree satisfies `pred`.
    pub fn contains(&self, pred: &dyn Fn(&Expr) -> bool) -> bool {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.node_id()) {
                continue;
            }
            if pred(&e) {
                return true;
            }
            stack.extend(e.children().iter().cloned());
        }
        false
    }

    pub fn contains_shape_f(&self) -> bool {
        self.contains(&|e| matches!(e.kind(), Kind::ShapeF))
    }

    /// Number of distinct nodes.
    pub fn node_count(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if seen.insert(e.node_id()) {
                stack.extend(e.children().iter().cloned());
            }
        }
        seen.len()
    }

    // ---- operations ----

    pub fn try_add(&self, other: &Expr) -> Result<Expr, ExprError> {
        if self.shape() != other.shape() {
            return Err(mismatch("add", format!("{:?} + {:?}", self.shape(), other.shape())));
        }
        Ok(Expr::node(Kind::Add, vec![self.clone(), other.clone()], self.shape()))
    }

    pub fn try_sub(&self, other: &Expr) -> Result<Expr, ExprError> {
        if self.shape() != other.shape() {
            return Err(mismatch("sub", format!("{:?} - {:?}", self.shape(), other.shape())));
        }
        Ok(Expr::node(Kind::Sub, vec![self.clone(), other.clone()], self.shape()))
    }

    pub fn neg(&self) -> Expr {
        Expr::node(Kind::Neg, vec![self.clone()], self.shape())
    }

    /// Scalar multiplication; at least one side must be scalar.
    pub fn scale(&self, other: &Expr) -> Result<Expr, ExprError> {
        let (s, a) = if self.shape() == Shape::Scalar {
            (self, other)
        } else if other.shape() == Shape::Scalar {
            (other, self)
        } else {
            return Err(mismatch("mul", format!("{:?} * {:?}", self.shape(), other.shape())));
        };
        Ok(Expr::node(Kind::Mul, vec![s.clone(), a.clone()], a.shape()))
    }

    pub fn matvec(&self, v: &Expr) -> Result<Expr, ExprError> {
        if self.shape() != Shape::Matrix || v.shape() != Shape::Vector {
            return Err(mismatch("matvec", format!("{:?} * {:?}", self.shape(), v.shape())));
        }
        Ok(Expr::node(Kind::MatVec, vec![self.clone(), v.clone()], Shape::Vector))
    }

    pub fn matmat(&self, m: &Expr) -> Result<Expr, ExprError> {
        if self.shape() != Shape::Matrix || m.shape() != Shape::Matrix {
            return Err(mismatch("matmat", format!("{:?} * {:?}", self.shape(), m.shape())));
        }
        Ok(Expr::node(Kind::MatMat, vec![self.clone(), m.clone()], Shape::Matrix))
    }

    /// Product with the natural meaning for the operand shapes: scaling, matrix-vector,
    /// matrix-matrix, or the inner product of two vectors.
    pub fn try_mul(&self, other: &Expr) -> Result<Expr, ExprError> {
        use Shape::*;
        match (self.shape(), other.shape()) {
            (Scalar, _) | (_, Scalar) => self.scale(other),
            (Matrix, Vector) => self.matvec(other),
            (Matrix, Matrix) => self.matmat(other),
            (Vector, Vector) => self.inner(other),
            (a, b) => Err(mismatch("mul", format!("{a:?} * {b:?}"))),
        }
    }

    fn square(&self, op: &'static str) -> Result<(), ExprError> {
        if self.shape() != Shape::Matrix {
            return Err(mismatch(op, format!("needs a square matrix, found {:?}", self.shape())));
        }
        Ok(())
    }

    pub fn transpose(&self) -> Result<Expr, ExprError> {
        self.square("transpose")?;
        Ok(Expr::node(Kind::Transpose, vec![self.clone()], Shape::Matrix))
    }

    pub fn inv(&self) -> Result<Expr, ExprError> {
        self.square("inverse")?;
        Ok(Expr::node(Kind::Inverse, vec![self.clone()], Shape::Matrix))
    }

    pub fn det(&self) -> Result<Expr, ExprError> {
        self.square("det")?;
        Ok(Expr::node(Kind::Det, vec![self.clone()], Shape::Scalar))
    }

    pub fn trace(&self) -> Result<Expr, ExprError> {
        self.square("trace")?;
        Ok(Expr::node(Kind::Trace, vec![self.clone()], Shape::Scalar))
    }

    /// Euclidean inner product; Frobenius product for matrices.
    pub fn inner(&self, other: &Expr) -> Result<Expr, ExprError> {
        if self.shape() != other.shape() {
            return Err(mismatch("inner", format!("{:?} . {:?}", self.shape(), other.shape())));
        }
        Ok(Expr::node(Kind::Inner, vec![self.clone(), other.clone()], Shape::Scalar))
    }

    pub fn outer(&self, other: &Expr) -> Result<Expr, ExprError> {
        if self.shape() != Shape::Vector || other.shape() != Shape::Vector {
            return Err(mismatch("outer", format!("{:?} x {:?}", self.shape(), other.shape())));
        }
        Ok(Expr::node(Kind::Outer, vec![self.clone(), other.clone()], Shape::Matrix))
    }

    pub fn norm(&self) -> Result<Expr, ExprError> {
        if self.shape() != Shape::Vector {
            return Err(mismatch("norm", format!("needs a vector, found {:?}", self.shape())));
        }
        Ok(Expr::node(Kind::Norm, vec![self.clone()], Shape::Scalar))
    }

    fn scalar_arg(&self, op: &'static str) -> Result<(), ExprError> {
        if self.shape() != Shape::Scalar {
            return Err(mismatch(op, format!("needs a scalar, found {:?}", self.shape())));
        }
        Ok(())
    }

    pub fn pow(&self, p: f64) -> Result<Expr, ExprError> {
        self.scalar_arg("pow")?;
        Ok(Expr::node(Kind::Pow(p), vec![self.clone()], Shape::Scalar))
    }

    pub fn exp(&self) -> Result<Expr, ExprError> {
        self.scalar_arg("exp")?;
        Ok(Expr::node(Kind::Exp, vec![self.clone()], Shape::Scalar))
    }

    pub fn sqrt(&self) -> Result<Expr, ExprError> {
        self.scalar_arg("sqrt")?;
        Ok(Expr::node(Kind::Sqrt, vec![self.clone()], Shape::Scalar))
    }

    pub fn component(&self, i: usize) -> Result<Expr, ExprError> {
        if self.shape() != Shape::Vector || i > 1 {
            return Err(mismatch("component", format!("index {i} of {:?}", self.shape())));
        }
        Ok(Expr::node(Kind::Component(i), vec![self.clone()], Shape::Scalar))
    }

    pub fn entry(&self, i: usize, j: usize) -> Result<Expr, ExprError> {
        if self.shape() != Shape::Matrix || i > 1 || j > 1 {
            return Err(mismatch("entry", format!("index ({i},{j}) of {:?}", self.shape())));
        }
        Ok(Expr::node(Kind::Entry(i, j), vec![self.clone()], Shape::Scalar))
    }

    pub fn stack_vector(a: &Expr, b: &Expr) -> Result<Expr, ExprError> {
        if a.shape() != Shape::Scalar || b.shape() != Shape::Scalar {
            return Err(mismatch("stack_vector", "entries must be scalar".into()));
        }
        Ok(Expr::node(Kind::StackVector, vec![a.clone(), b.clone()], Shape::Vector))
    }

    /// Row-major 2x2 matrix from four scalar entries.
    pub fn stack_matrix(entries: [&Expr; 4]) -> Result<Expr, ExprError> {
        if entries.iter().any(|e| e.shape() != Shape::Scalar) {
            return Err(mismatch("stack_matrix", "entries must be scalar".into()));
        }
        let ch = entries.iter().map(|e| (*e).clone()).collect();
        Ok(Expr::node(Kind::StackMatrix, ch, Shape::Matrix))
    }

    /// Rebuilds this node with new children, re-checking shapes.
    pub(crate) fn rebuild(&self, ch: Vec<Expr>) -> Result<Expr, ExprError> {
        let c = |i: usize| &ch[i];
        match self.kind() {
            Kind::Grad { traced } => c(0).grad_with(*traced),
            Kind::Add => c(0).try_add(c(1)),
            Kind::Sub => c(0).try_sub(c(1)),
            Kind::Neg => Ok(c(0).neg()),
            Kind::Mul => c(0).scale(c(1)),
            Kind::MatVec => c(0).matvec(c(1)),
            Kind::MatMat => c(0).matmat(c(1)),
            Kind::Transpose => c(0).transpose(),
            Kind::Inverse => c(0).inv(),
            Kind::Det => c(0).det(),
            Kind::Trace => c(0).trace(),
            Kind::Inner => c(0).inner(c(1)),
            Kind::Outer => c(0).outer(c(1)),
            Kind::Norm => c(0).norm(),
            Kind::Pow(p) => c(0).pow(*p),
            Kind::Exp => c(0).exp(),
            Kind::Sqrt => c(0).sqrt(),
            Kind::Component(i) => c(0).component(*i),
            Kind::Entry(i, j) => c(0).entry(*i, *j),
            Kind::StackVector => Expr::stack_vector(c(0), c(1)),
            Kind::StackMatrix => Expr::stack_matrix([c(0), c(1), c(2), c(3)]),
            _ => Ok(self.clone()),
        }
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::scalar(c)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $call:ident) => {
        impl std::ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$call(&self, &rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl std::ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                Expr::$call(self, rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl std::ops::$tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                Expr::$call(&self, rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl std::ops::$tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$call(self, &rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl std::ops::$tr<f64> for Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr {
                Expr::$call(&self, &Expr::scalar(rhs)).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl std::ops::$tr<f64> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr {
                Expr::$call(self, &Expr::scalar(rhs)).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl std::ops::$tr<Expr> for f64 {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$call(&Expr::scalar(self), &rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl std::ops::$tr<&Expr> for f64 {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                Expr::$call(&Expr::scalar(self), rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
    };
}

// Operators panic on shape mismatch; use the named methods for fallible construction.
binop!(Add, add, try_add);
binop!(Sub, sub, try_sub);
binop!(Mul, mul, try_mul);

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_are_checked() {
        let v = Expr::vector([1.0, 2.0]);
        let m = Expr::identity();
        assert!(v.try_add(&m).is_err());
        assert!(v.det().is_err());
        assert!(m.norm().is_err());
        assert!(v.matvec(&m).is_err());
        assert_eq!(m.matvec(&v).unwrap().shape(), Shape::Vector);
        assert_eq!((v.clone() * v).shape(), Shape::Scalar);
        assert!(Expr::x().grad().is_err());
    }

    #[test]
    fn gradient_shapes_follow_value_dimension() {
        let s = Expr::test(FnRef::new(1, 1, "u"));
        let v = Expr::test(FnRef::new(2, 2, "V"));
        assert_eq!(s.grad().unwrap().shape(), Shape::Vector);
        assert_eq!(v.grad().unwrap().shape(), Shape::Matrix);
    }
}
