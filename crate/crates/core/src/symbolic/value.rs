use super::{ExprError, Shape};

/// Numeric value of a node: scalar, 2-vector or row-major 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Scalar(f64),
    Vector([f64; 2]),
    Matrix([[f64; 2]; 2]),
}

const I2: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];

impl Value {
    pub fn zero(shape: Shape) -> Value {
        match shape {
            Shape::Scalar => Value::Scalar(0.0),
            Shape::Vector => Value::Vector([0.0; 2]),
            Shape::Matrix => Value::Matrix([[0.0; 2]; 2]),
        }
    }

    pub fn identity() -> Value {
        Value::Matrix(I2)
    }

    pub fn shape(&self) -> Shape {
        match self {
            Value::Scalar(_) => Shape::Scalar,
            Value::Vector(_) => Shape::Vector,
            Value::Matrix(_) => Shape::Matrix,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_slice().iter().all(|&v| v == 0.0)
    }

    /// Entries in row-major order.
    pub fn as_slice(&self) -> &[f64] {
        match self {
            Value::Scalar(s) => std::slice::from_ref(s),
            Value::Vector(v) => v,
            Value::Matrix(m) => m.as_flattened(),
        }
    }

    pub fn scalar(&self) -> f64 {
        match self {
            Value::Scalar(s) => *s,
            other => panic!("expected a scalar value, found {other:?}"),
        }
    }

    pub fn vector(&self) -> [f64; 2] {
        match self {
            Value::Vector(v) => *v,
            other => panic!("expected a vector value, found {other:?}"),
        }
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        match self {
            Value::Matrix(m) => *m,
            other => panic!("expected a matrix value, found {other:?}"),
        }
    }

    fn zip(self, o: Value, f: impl Fn(f64, f64) -> f64) -> Value {
        match (self, o) {
            (Value::Scalar(a), Value::Scalar(b)) => Value::Scalar(f(a, b)),
            (Value::Vector(a), Value::Vector(b)) => Value::Vector([f(a[0], b[0]), f(a[1], b[1])]),
            (Value::Matrix(a), Value::Matrix(b)) => Value::Matrix([
                [f(a[0][0], b[0][0]), f(a[0][1], b[0][1])],
                [f(a[1][0], b[1][0]), f(a[1][1], b[1][1])],
            ]),
            (a, b) => panic!("shape mismatch {:?} vs {:?}", a.shape(), b.shape()),
        }
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Value {
        match self {
            Value::Scalar(a) => Value::Scalar(f(a)),
            Value::Vector(a) => Value::Vector([f(a[0]), f(a[1])]),
            Value::Matrix(a) => Value::Matrix([[f(a[0][0]), f(a[0][1])], [f(a[1][0]), f(a[1][1])]]),
        }
    }

    pub fn add(self, o: Value) -> Value {
        self.zip(o, |a, b| a + b)
    }

    pub fn sub(self, o: Value) -> Value {
        self.zip(o, |a, b| a - b)
    }

    pub fn neg(self) -> Value {
        self.map(|a| -a)
    }

    /// `s * self` for a scalar `s`.
    pub fn scaled(self, s: f64) -> Value {
        self.map(|a| s * a)
    }

    pub fn matvec(self, v: Value) -> Value {
        let (m, v) = (self.matrix(), v.vector());
        Value::Vector([m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]])
    }

    pub fn matmat(self, o: Value) -> Value {
        let (a, b) = (self.matrix(), o.matrix());
        let mut c = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Value::Matrix(c)
    }

    pub fn transpose(self) -> Value {
        let m = self.matrix();
        Value::Matrix([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn det(self) -> f64 {
        let m = self.matrix();
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(self) -> f64 {
        let m = self.matrix();
        m[0][0] + m[1][1]
    }

    pub fn inverse(self) -> Result<Value, ExprError> {
        let m = self.matrix();
        let d = self.det();
        let scale = m.as_flattened().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if d == 0.0 || d.abs() <= 1e-300 * scale * scale {
            return Err(ExprError::Singular(format!("inverse of singular matrix {m:?}")));
        }
        Ok(Value::Matrix([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]))
    }

    pub fn inner(self, o: Value) -> f64 {
        self.as_slice().iter().zip(o.as_slice()).map(|(a, b)| a * b).sum()
    }

    pub fn outer(self, o: Value) -> Value {
        let (a, b) = (self.vector(), o.vector());
        Value::Matrix([[a[0] * b[0], a[0] * b[1]], [a[1] * b[0], a[1] * b[1]]])
    }

    pub fn norm(self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Generic product used by the evaluator: scalar scaling, matrix-vector, matrix-matrix,
    /// inner or outer product depending on `op`.
    pub(crate) fn product(op: Product, a: Value, b: Value) -> Value {
        match op {
            Product::Scale => b.scaled(a.scalar()),
            Product::MatVec => a.matvec(b),
            Product::MatMat => a.matmat(b),
            Product::Inner => Value::Scalar(a.inner(b)),
            Product::Outer => a.outer(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Product {
    Scale,
    MatVec,
    MatMat,
    Inner,
    Outer,
}
