use std::fmt::{self, Write as _};

use super::{Expr, Kind, Value};

fn fmt_value(v: &Value) -> String {
    match v {
        Value::Scalar(s) => format!("{s}"),
        Value::Vector(a) => format!("({}, {})", a[0], a[1]),
        Value::Matrix(m) => format!("[[{}, {}], [{}, {}]]", m[0][0], m[0][1], m[1][0], m[1][1]),
    }
}

impl Expr {
    /// Short label of this node alone, as used in the tree dump.
    pub fn label(&self) -> String {
        match self.kind() {
            Kind::Scalar(c) => format!("{c}"),
            Kind::Const(v) => fmt_value(v),
            Kind::Coordinate(0) => "x".into(),
            Kind::Coordinate(_) => "y".into(),
            Kind::Position => "X".into(),
            Kind::Parameter(n) => n.to_string(),
            Kind::ShapeF => "F".into(),
            Kind::Normal => "n".into(),
            Kind::Tangent => "tau".into(),
            Kind::Trial(f) => format!("trial {}", f.name),
            Kind::Test(f) => format!("test {}", f.name),
            Kind::GridFunc(f) => format!("gridfunction {}", f.name),
            Kind::Grad { traced: false } => "grad".into(),
            Kind::Grad { traced: true } => "grad (trace)".into(),
            Kind::Add => "+".into(),
            Kind::Sub => "-".into(),
            Kind::Neg => "neg".into(),
            Kind::Mul => "scale".into(),
            Kind::MatVec => "matvec".into(),
            Kind::MatMat => "matmat".into(),
            Kind::Transpose => "trans".into(),
            Kind::Inverse => "inv".into(),
            Kind::Det => "det".into(),
            Kind::Trace => "trace".into(),
            Kind::Inner => "inner".into(),
            Kind::Outer => "outer".into(),
            Kind::Norm => "norm".into(),
            Kind::Pow(p) => format!("pow {p}"),
            Kind::Exp => "exp".into(),
            Kind::Sqrt => "sqrt".into(),
            Kind::Component(i) => format!("component {i}"),
            Kind::Entry(i, j) => format!("entry ({i},{j})"),
            Kind::StackVector => "vector".into(),
            Kind::StackMatrix => "matrix".into(),
        }
    }

    /// Indented node-per-line dump of the tree, children indented by two spaces.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        self.pretty_rec(0, &mut out);
        out
    }

    fn pretty_rec(&self, depth: usize, out: &mut String) {
        let _ = writeln!(out, "{:width$}{} ({:?})", "", self.label(), self.shape(), width = 2 * depth);
        for c in self.children() {
            c.pretty_rec(depth + 1, out);
        }
    }
}

fn is_sum(e: &Expr) -> bool {
    matches!(e.kind(), Kind::Add | Kind::Sub)
}

fn operand(e: &Expr, f: &mut fmt::Formatter<'_>, paren_sums: bool) -> fmt::Result {
    if is_sum(e) && paren_sums || matches!(e.kind(), Kind::Neg) {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    /// Compact infix form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ch = self.children();
        match self.kind() {
            Kind::Trial(g) | Kind::Test(g) | Kind::GridFunc(g) => write!(f, "{}", g.name),
            Kind::Grad { .. } => write!(f, "grad({})", ch[0]),
            Kind::Add | Kind::Sub => {
                let op = if matches!(self.kind(), Kind::Add) { "+" } else { "-" };
                operand(&ch[0], f, true)?;
                write!(f, " {op} ")?;
                operand(&ch[1], f, true)
            }
            Kind::Neg => {
                write!(f, "-")?;
                operand(&ch[0], f, true)
            }
            Kind::Mul | Kind::MatVec | Kind::MatMat => {
                operand(&ch[0], f, true)?;
                write!(f, "*")?;
                operand(&ch[1], f, true)
            }
            Kind::Pow(p) => {
                if ch[0].children().is_empty() {
                    write!(f, "{}^{p}", ch[0])
                } else {
                    write!(f, "({})^{p}", ch[0])
                }
            }
            Kind::Component(i) => write!(f, "({})[{i}]", ch[0]),
            Kind::Entry(i, j) => write!(f, "({})[{i},{j}]", ch[0]),
            Kind::Inner | Kind::Outer | Kind::StackVector | Kind::StackMatrix => {
                write!(f, "{}(", self.label())?;
                for (k, c) in ch.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
            _ if ch.len() == 1 => write!(f, "{}({})", self.label(), ch[0]),
            _ => write!(f, "{}", self.label()),
        }
    }
}
