//! Pointwise evaluation of expression trees.
//!
//! A [`Plan`] flattens a tree into topological order once, then evaluates it at many
//! points. Forms that are linear in a test function (and possibly a trial function) are
//! evaluated symbolically in those arguments: every node value is split into a constant
//! part, a part linear in the test slots, a part linear in the trial slots and a bilinear
//! part. Slots are the value components and gradient entries of the function, so the
//! element matrix follows by contracting the root coefficients with basis function data.

use std::collections::HashMap;

use super::value::Product;
use super::{Expr, ExprError, FnRef, Kind, Shape, Value};

/// What a plan evaluates to at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormKind {
    /// a plain value; no test or trial functions allowed
    Functional,
    /// linear in the test function
    Linear,
    /// bilinear in trial and test function
    Bilinear,
}

/// Point data handed to [`Plan::eval`].
#[derive(Debug, Clone, Copy)]
pub struct PointData<'a> {
    pub pos: [f64; 2],
    pub normal: Option<[f64; 2]>,
    pub tangent: Option<[f64; 2]>,
    /// value and physical gradient of every bound grid function, in binding order
    pub funcs: &'a [(Value, Value)],
}

#[derive(Debug, Clone, Copy, Default)]
struct Flags {
    /// constant part possibly nonzero
    c: bool,
    t: bool,
    r: bool,
    b: bool,
}

#[derive(Debug, Clone)]
enum Op {
    /// value fixed at plan construction (constants and test/trial leaves)
    Static,
    Coord(usize),
    Position,
    Normal,
    Tangent,
    FuncValue(usize),
    FuncGrad(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Neg(usize),
    Prod(Product, usize, usize),
    Transpose(usize),
    Trace(usize),
    Component(usize, usize),
    Entry(usize, usize, usize),
    StackVector(usize, usize),
    StackMatrix([usize; 4]),
    Inverse(usize),
    Det(usize),
    Norm(usize),
    Pow(usize, f64),
    Exp(usize),
    Sqrt(usize),
}

#[derive(Debug, Clone)]
struct PNode {
    op: Op,
    shape: Shape,
    flags: Flags,
    c: usize,
    t: usize,
    r: usize,
    b: usize,
}

/// Compiled evaluation order of one expression tree.
#[derive(Debug, Clone)]
pub struct Plan {
    nodes: Vec<PNode>,
    size: usize,
    nt: usize,
    nr: usize,
    kind: FormKind,
    init: Vec<Value>,
}

/// Number of slots (value components plus gradient entries) of a function.
fn slot_count(f: &FnRef) -> usize {
    3 * f.vdim
}

fn value_slots(f: &FnRef, grad: bool) -> Vec<Value> {
    let n = slot_count(f);
    let mut parts = Vec::with_capacity(n);
    for s in 0..n {
        parts.push(match (f.vdim, grad) {
            (1, false) => Value::Scalar(if s == 0 { 1.0 } else { 0.0 }),
            (1, true) => {
                let mut v = [0.0; 2];
                if s >= 1 {
                    v[s - 1] = 1.0;
                }
                Value::Vector(v)
            }
            (_, false) => {
                let mut v = [0.0; 2];
                if s < 2 {
                    v[s] = 1.0;
                }
                Value::Vector(v)
            }
            (_, true) => {
                let mut m = [[0.0; 2]; 2];
                if s >= 2 {
                    m[(s - 2) / 2][(s - 2) % 2] = 1.0;
                }
                Value::Matrix(m)
            }
        });
    }
    parts
}

struct Builder<'a> {
    kind: FormKind,
    test: Option<&'a FnRef>,
    trial: Option<&'a FnRef>,
    funcs: &'a [FnRef],
    params: &'a [(String, f64)],
    boundary: bool,
    nt: usize,
    nr: usize,
    nodes: Vec<PNode>,
    init: Vec<(usize, Value)>,
    size: usize,
    index: HashMap<usize, usize>,
}

fn not_linear(expected: &'static str, detail: impl Into<String>) -> ExprError {
    ExprError::NotLinear { expected, detail: detail.into() }
}

impl<'a> Builder<'a> {
    fn expected(&self) -> &'static str {
        match self.kind {
            FormKind::Functional => "a functional",
            FormKind::Linear => "linear in the test function",
            FormKind::Bilinear => "bilinear in trial and test function",
        }
    }

    fn push(&mut self, op: Op, shape: Shape, flags: Flags) -> usize {
        let c = self.size;
        self.size += 1;
        let mut alloc = |on: bool, n: usize| {
            if on {
                let o = self.size;
                self.size += n;
                o
            } else {
                usize::MAX
            }
        };
        let t = alloc(flags.t, self.nt);
        let r = alloc(flags.r, self.nr);
        let b = alloc(flags.b, self.nt * self.nr);
        self.nodes.push(PNode { op, shape, flags, c, t, r, b });
        self.nodes.len() - 1
    }

    fn constant(&mut self, v: Value) -> usize {
        let flags = Flags { c: !v.is_zero(), ..Flags::default() };
        let id = self.push(Op::Static, v.shape(), flags);
        let c = self.nodes[id].c;
        self.init.push((c, v));
        id
    }

    fn leaf_fn(&mut self, e: &Expr, f: &FnRef, grad: bool, test: bool) -> Result<usize, ExprError> {
        let (expect, what) = if test { (self.test, "test") } else { (self.trial, "trial") };
        match expect {
            Some(g) if g == f => {}
            Some(_) => {
                return Err(not_linear(self.expected(), format!("{what} function {} of another space", f.name)))
            }
            None => return Err(not_linear(self.expected(), format!("unexpected {what} function {}", f.name))),
        }
        let flags = Flags { t: test, r: !test, ..Flags::default() };
        let id = self.push(Op::Static, e.shape(), flags);
        let node = self.nodes[id].clone();
        self.init.push((node.c, Value::zero(e.shape())));
        let base = if test { node.t } else { node.r };
        for (s, v) in value_slots(f, grad).into_iter().enumerate() {
            self.init.push((base + s, v));
        }
        Ok(id)
    }

    fn func_index(&self, f: &FnRef) -> Result<usize, ExprError> {
        self.funcs
            .iter()
            .position(|g| g.id == f.id)
            .ok_or_else(|| ExprError::Unbound(format!("grid function {}", f.name)))
    }

    fn visit(&mut self, e: &Expr) -> Result<usize, ExprError> {
        if let Some(&i) = self.index.get(&e.node_id()) {
            return Ok(i);
        }
        let id = self.build(e)?;
        self.index.insert(e.node_id(), id);
        Ok(id)
    }

    fn build(&mut self, e: &Expr) -> Result<usize, ExprError> {
        let dense = Flags { c: true, ..Flags::default() };
        let shape = e.shape();
        let ch = e.children();
        let id = match e.kind() {
            Kind::Scalar(c) => self.constant(Value::Scalar(*c)),
            Kind::Const(v) => self.constant(*v),
            Kind::ShapeF => self.constant(Value::identity()),
            Kind::Parameter(n) => {
                let v = self
                    .params
                    .iter()
                    .find(|(k, _)| k.as_str() == &**n)
                    .map(|p| p.1)
                    .ok_or_else(|| ExprError::Unbound(format!("parameter {n}")))?;
                self.constant(Value::Scalar(v))
            }
            Kind::Coordinate(i) => self.push(Op::Coord(*i), shape, dense),
            Kind::Position => self.push(Op::Position, shape, dense),
            Kind::Normal | Kind::Tangent => {
                let is_normal = matches!(e.kind(), Kind::Normal);
                if !self.boundary {
                    return Err(ExprError::BoundaryOnly(if is_normal { "normal" } else { "tangent" }));
                }
                self.push(if is_normal { Op::Normal } else { Op::Tangent }, shape, dense)
            }
            Kind::GridFunc(f) => {
                let k = self.func_index(f)?;
                self.push(Op::FuncValue(k), shape, dense)
            }
            Kind::Test(f) => self.leaf_fn(e, f, false, true)?,
            Kind::Trial(f) => self.leaf_fn(e, f, false, false)?,
            Kind::Grad { .. } => match ch[0].kind() {
                Kind::GridFunc(f) => {
                    let k = self.func_index(f)?;
                    self.push(Op::FuncGrad(k), shape, dense)
                }
                Kind::Test(f) => self.leaf_fn(e, f, true, true)?,
                Kind::Trial(f) => self.leaf_fn(e, f, true, false)?,
                _ => unreachable!("gradient of a non-function"),
            },
            Kind::Add | Kind::Sub => {
                let a = self.visit(&ch[0])?;
                let b = self.visit(&ch[1])?;
                let (fa, fb) = (self.nodes[a].flags, self.nodes[b].flags);
                let f = Flags { c: fa.c || fb.c, t: fa.t || fb.t, r: fa.r || fb.r, b: fa.b || fb.b };
                let op = if matches!(e.kind(), Kind::Add) { Op::Add(a, b) } else { Op::Sub(a, b) };
                self.push(op, shape, f)
            }
            Kind::Mul | Kind::MatVec | Kind::MatMat | Kind::Inner | Kind::Outer => {
                let p = match e.kind() {
                    Kind::Mul => Product::Scale,
                    Kind::MatVec => Product::MatVec,
                    Kind::MatMat => Product::MatMat,
                    Kind::Inner => Product::Inner,
                    _ => Product::Outer,
                };
                let a = self.visit(&ch[0])?;
                let b = self.visit(&ch[1])?;
                let (x, y) = (self.nodes[a].flags, self.nodes[b].flags);
                if (x.t && y.t) || (x.r && y.r) || (x.b && (y.t || y.r || y.b)) || (y.b && (x.t || x.r)) {
                    return Err(not_linear(self.expected(), format!("product {e}")));
                }
                let f = Flags {
                    c: x.c && y.c,
                    t: (x.t && y.c) || (x.c && y.t),
                    r: (x.r && y.c) || (x.c && y.r),
                    b: (x.b && y.c) || (x.c && y.b) || (x.t && y.r) || (x.r && y.t),
                };
                self.push(Op::Prod(p, a, b), shape, f)
            }
            Kind::Neg | Kind::Transpose | Kind::Trace | Kind::Component(_) | Kind::Entry(..) => {
                let a = self.visit(&ch[0])?;
                let f = self.nodes[a].flags;
                let op = match e.kind() {
                    Kind::Neg => Op::Neg(a),
                    Kind::Transpose => Op::Transpose(a),
                    Kind::Trace => Op::Trace(a),
                    Kind::Component(i) => Op::Component(a, *i),
                    Kind::Entry(i, j) => Op::Entry(a, *i, *j),
                    _ => unreachable!(),
                };
                self.push(op, shape, f)
            }
            Kind::StackVector | Kind::StackMatrix => {
                let ids: Vec<usize> = ch.iter().map(|c| self.visit(c)).collect::<Result<_, _>>()?;
                let mut f = Flags::default();
                for &i in &ids {
                    let g = self.nodes[i].flags;
                    f = Flags { c: f.c || g.c, t: f.t || g.t, r: f.r || g.r, b: f.b || g.b };
                }
                let op = if ids.len() == 2 {
                    Op::StackVector(ids[0], ids[1])
                } else {
                    Op::StackMatrix([ids[0], ids[1], ids[2], ids[3]])
                };
                self.push(op, shape, f)
            }
            Kind::Inverse | Kind::Det | Kind::Norm | Kind::Pow(_) | Kind::Exp | Kind::Sqrt => {
                let a = self.visit(&ch[0])?;
                let g = self.nodes[a].flags;
                if g.t || g.r || g.b {
                    return Err(not_linear(
                        self.expected(),
                        format!("nonlinear operation {} applied to a test or trial function", e.label()),
                    ));
                }
                let op = match e.kind() {
                    Kind::Inverse => Op::Inverse(a),
                    Kind::Det => Op::Det(a),
                    Kind::Norm => Op::Norm(a),
                    Kind::Pow(p) => Op::Pow(a, *p),
                    Kind::Exp => Op::Exp(a),
                    _ => Op::Sqrt(a),
                };
                self.push(op, shape, dense)
            }
        };
        Ok(id)
    }
}

/// Result of evaluating a plan's root at one point, borrowed from the work buffer.
pub struct PlanOutput<'a> {
    plan: &'a Plan,
    buf: &'a [Value],
}

impl PlanOutput<'_> {
    fn root(&self) -> &PNode {
        self.plan.nodes.last().expect("plan has a root")
    }

    /// Value of a functional.
    pub fn value(&self) -> Value {
        self.buf[self.root().c]
    }

    /// Coefficient of test slot `s` (scalar forms).
    pub fn test_coeff(&self, s: usize) -> f64 {
        let r = self.root();
        if r.flags.t {
            self.buf[r.t + s].scalar()
        } else {
            0.0
        }
    }

    /// Coefficient of the product of test slot `s` and trial slot `q`.
    pub fn bilinear_coeff(&self, s: usize, q: usize) -> f64 {
        let r = self.root();
        if r.flags.b {
            self.buf[r.b + s * self.plan.nr + q].scalar()
        } else {
            0.0
        }
    }

    pub fn has_test_part(&self) -> bool {
        self.root().flags.t
    }

    pub fn has_bilinear_part(&self) -> bool {
        self.root().flags.b
    }
}

impl Plan {
    /// Compiles `e` for evaluation.
    ///
    /// `funcs` lists the grid functions that will be supplied (in this order) by
    /// [`PointData::funcs`]; `params` binds parameter symbols. Normals and tangents are only
    /// permitted when `boundary` is set.
    pub fn new(
        e: &Expr,
        kind: FormKind,
        test: Option<&FnRef>,
        trial: Option<&FnRef>,
        funcs: &[FnRef],
        params: &[(String, f64)],
        boundary: bool,
    ) -> Result<Plan, ExprError> {
        if e.shape() != Shape::Scalar && kind != FormKind::Functional {
            return Err(ExprError::ShapeMismatch { op: "form", detail: "integrand must be scalar".into() });
        }
        let (test, trial) = match kind {
            FormKind::Functional => (None, None),
            FormKind::Linear => (test, None),
            FormKind::Bilinear => (test, trial),
        };
        let mut b = Builder {
            kind,
            test,
            trial,
            funcs,
            params,
            boundary,
            nt: test.map_or(0, slot_count),
            nr: trial.map_or(0, slot_count),
            nodes: Vec::new(),
            init: Vec::new(),
            size: 0,
            index: HashMap::new(),
        };
        b.visit(e)?;
        let root = b.nodes.last().expect("nonempty").flags;
        let expected = b.expected();
        match kind {
            FormKind::Functional => {}
            FormKind::Linear => {
                if root.c {
                    return Err(not_linear(expected, "integrand has a part without the test function"));
                }
            }
            FormKind::Bilinear => {
                if root.c || root.t || root.r {
                    return Err(not_linear(expected, "integrand has a part that is not bilinear"));
                }
            }
        }
        let mut init = vec![Value::Scalar(0.0); b.size];
        for n in &b.nodes {
            let z = Value::zero(n.shape);
            init[n.c] = z;
            for (on, off, len) in [(n.flags.t, n.t, b.nt), (n.flags.r, n.r, b.nr), (n.flags.b, n.b, b.nt * b.nr)] {
                if on {
                    init[off..off + len].fill(z);
                }
            }
        }
        for (i, v) in b.init {
            init[i] = v;
        }
        Ok(Plan { nodes: b.nodes, size: b.size, nt: b.nt, nr: b.nr, kind, init })
    }

    pub fn kind(&self) -> FormKind {
        self.kind
    }

    pub fn test_slots(&self) -> usize {
        self.nt
    }

    pub fn trial_slots(&self) -> usize {
        self.nr
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Fresh work buffer with all static values in place.
    pub fn buffer(&self) -> Vec<Value> {
        debug_assert_eq!(self.init.len(), self.size);
        self.init.clone()
    }

    /// Evaluates the plan at a point using `buf` (from [`Plan::buffer`]) as workspace.
    pub fn eval<'a>(&'a self, buf: &'a mut [Value], pt: &PointData) -> Result<PlanOutput<'a>, ExprError> {
        for n in &self.nodes {
            self.eval_node(n, buf, pt)?;
        }
        Ok(PlanOutput { plan: self, buf })
    }

    fn eval_node(&self, n: &PNode, buf: &mut [Value], pt: &PointData) -> Result<(), ExprError> {
        let nodes = &self.nodes;
        let (nt, nr) = (self.nt, self.nr);
        match n.op {
            Op::Static => {}
            Op::Coord(i) => buf[n.c] = Value::Scalar(pt.pos[i]),
            Op::Position => buf[n.c] = Value::Vector(pt.pos),
            Op::Normal => buf[n.c] = Value::Vector(pt.normal.ok_or(ExprError::BoundaryOnly("normal"))?),
            Op::Tangent => buf[n.c] = Value::Vector(pt.tangent.ok_or(ExprError::BoundaryOnly("tangent"))?),
            Op::FuncValue(k) => buf[n.c] = pt.funcs[k].0,
            Op::FuncGrad(k) => buf[n.c] = pt.funcs[k].1,
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sub = matches!(n.op, Op::Sub(..));
                let (a, b) = (&nodes[a], &nodes[b]);
                let z = Value::zero(n.shape);
                let comb = |x: Value, y: Value| if sub { x.sub(y) } else { x.add(y) };
                buf[n.c] = comb(buf[a.c], buf[b.c]);
                let parts = [
                    (n.flags.t, n.t, a.flags.t, a.t, b.flags.t, b.t, nt),
                    (n.flags.r, n.r, a.flags.r, a.r, b.flags.r, b.r, nr),
                    (n.flags.b, n.b, a.flags.b, a.b, b.flags.b, b.b, nt * nr),
                ];
                for (on, off, ha, oa, hb, ob, len) in parts {
                    if !on {
                        continue;
                    }
                    for s in 0..len {
                        let x = if ha { buf[oa + s] } else { z };
                        let y = if hb { buf[ob + s] } else { z };
                        buf[off + s] = comb(x, y);
                    }
                }
            }
            Op::Neg(a) => self.unary_linear(n, &nodes[a], buf, |v| v.neg()),
            Op::Transpose(a) => self.unary_linear(n, &nodes[a], buf, |v| v.transpose()),
            Op::Trace(a) => self.unary_linear(n, &nodes[a], buf, |v| Value::Scalar(v.trace())),
            Op::Component(a, i) => self.unary_linear(n, &nodes[a], buf, |v| Value::Scalar(v.vector()[i])),
            Op::Entry(a, i, j) => self.unary_linear(n, &nodes[a], buf, |v| Value::Scalar(v.matrix()[i][j])),
            Op::StackVector(a, b) => {
                let ids = [a, b];
                self.stack(n, &ids, buf, |v| Value::Vector([v[0], v[1]]))
            }
            Op::StackMatrix(ids) => self.stack(n, &ids, buf, |v| Value::Matrix([[v[0], v[1]], [v[2], v[3]]])),
            Op::Prod(p, a, b) => {
                let (a, b) = (&nodes[a], &nodes[b]);
                let f = |x: Value, y: Value| Value::product(p, x, y);
                let (ac, bc) = (buf[a.c], buf[b.c]);
                buf[n.c] = f(ac, bc);
                let z = Value::zero(n.shape);
                if n.flags.t {
                    for s in 0..nt {
                        let mut v = z;
                        if a.flags.t {
                            v = v.add(f(buf[a.t + s], bc));
                        }
                        if b.flags.t {
                            v = v.add(f(ac, buf[b.t + s]));
                        }
                        buf[n.t + s] = v;
                    }
                }
                if n.flags.r {
                    for q in 0..nr {
                        let mut v = z;
                        if a.flags.r {
                            v = v.add(f(buf[a.r + q], bc));
                        }
                        if b.flags.r {
                            v = v.add(f(ac, buf[b.r + q]));
                        }
                        buf[n.r + q] = v;
                    }
                }
                if n.flags.b {
                    for s in 0..nt {
                        for q in 0..nr {
                            let k = s * nr + q;
                            let mut v = z;
                            if a.flags.b {
                                v = v.add(f(buf[a.b + k], bc));
                            }
                            if b.flags.b {
                                v = v.add(f(ac, buf[b.b + k]));
                            }
                            if a.flags.t && b.flags.r {
                                v = v.add(f(buf[a.t + s], buf[b.r + q]));
                            }
                            if a.flags.r && b.flags.t {
                                v = v.add(f(buf[a.r + q], buf[b.t + s]));
                            }
                            buf[n.b + k] = v;
                        }
                    }
                }
            }
            Op::Inverse(a) => buf[n.c] = buf[nodes[a].c].inverse()?,
            Op::Det(a) => buf[n.c] = Value::Scalar(buf[nodes[a].c].det()),
            Op::Norm(a) => buf[n.c] = Value::Scalar(buf[nodes[a].c].norm()),
            Op::Pow(a, p) => {
                let x = buf[nodes[a].c].scalar();
                if p < 0.0 && x.abs() < 1e-300 {
                    return Err(ExprError::Singular(format!("negative power {p} of {x:e}")));
                }
                buf[n.c] = Value::Scalar(if p == 2.0 { x * x } else { x.powf(p) });
            }
            Op::Exp(a) => buf[n.c] = Value::Scalar(buf[nodes[a].c].scalar().exp()),
            Op::Sqrt(a) => {
                let x = buf[nodes[a].c].scalar();
                if x < 0.0 {
                    return Err(ExprError::Singular(format!("square root of {x:e}")));
                }
                buf[n.c] = Value::Scalar(x.sqrt());
            }
        }
        Ok(())
    }

    fn unary_linear(&self, n: &PNode, a: &PNode, buf: &mut [Value], g: impl Fn(Value) -> Value) {
        buf[n.c] = g(buf[a.c]);
        for (on, off, src, len) in [(n.flags.t, n.t, a.t, self.nt), (n.flags.r, n.r, a.r, self.nr), (n.flags.b, n.b, a.b, self.nt * self.nr)] {
            if on {
                for s in 0..len {
                    buf[off + s] = g(buf[src + s]);
                }
            }
        }
    }

    fn stack(&self, n: &PNode, ids: &[usize], buf: &mut [Value], g: impl Fn(&[f64]) -> Value) {
        let mut e = [0.0; 4];
        for (k, &i) in ids.iter().enumerate() {
            e[k] = buf[self.nodes[i].c].scalar();
        }
        buf[n.c] = g(&e[..ids.len()]);
        let parts = [(n.flags.t, 0usize, self.nt), (n.flags.r, 1, self.nr), (n.flags.b, 2, self.nt * self.nr)];
        for (on, which, len) in parts {
            if !on {
                continue;
            }
            for s in 0..len {
                for (k, &i) in ids.iter().enumerate() {
                    let c = &self.nodes[i];
                    let (has, off) = match which {
                        0 => (c.flags.t, c.t),
                        1 => (c.flags.r, c.r),
                        _ => (c.flags.b, c.b),
                    };
                    e[k] = if has { buf[off + s].scalar() } else { 0.0 };
                }
                let off = match which {
                    0 => n.t,
                    1 => n.r,
                    _ => n.b,
                };
                buf[off + s] = g(&e[..ids.len()]);
            }
        }
    }
}

/// Point context for [`evaluate`].
#[derive(Debug, Clone, Default)]
pub struct EvalContext {
    pub pos: [f64; 2],
    pub normal: Option<[f64; 2]>,
    pub tangent: Option<[f64; 2]>,
    /// grid function values and gradients keyed by grid function id
    pub funcs: HashMap<u64, (Value, Value)>,
    pub params: HashMap<String, f64>,
}

impl EvalContext {
    pub fn at(x: f64, y: f64) -> Self {
        Self { pos: [x, y], ..Self::default() }
    }
}

/// Evaluates an expression free of test and trial functions at a single point.
pub fn evaluate(e: &Expr, ctx: &EvalContext) -> Result<Value, ExprError> {
    let mut ids: Vec<u64> = ctx.funcs.keys().copied().collect();
    ids.sort_unstable();
    let refs: Vec<FnRef> = ids.iter().map(|&id| FnRef::new(id, 1, "")).collect();
    let vals: Vec<(Value, Value)> = ids.iter().map(|id| ctx.funcs[id]).collect();
    let mut params: Vec<(String, f64)> = ctx.params.iter().map(|(k, v)| (k.clone(), *v)).collect();
    params.sort_by(|a, b| a.0.cmp(&b.0));
    let plan = Plan::new(e, FormKind::Functional, None, None, &refs, &params, ctx.normal.is_some())?;
    let mut buf = plan.buffer();
    let pt = PointData { pos: ctx.pos, normal: ctx.normal, tangent: ctx.tangent, funcs: &vals };
    let out = plan.eval(&mut buf, &pt)?;
    Ok(out.value())
}
