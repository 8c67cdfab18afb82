use std::collections::HashMap;

use super::{diff, simplify, substitute, Expr, ExprError, Kind, Shape};

/// Integration region of a form term. An empty marker list means every marker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Region {
    Volume(Vec<String>),
    Boundary(Vec<String>),
}

impl Region {
    pub fn is_boundary(&self) -> bool {
        matches!(self, Region::Boundary(_))
    }

    pub fn markers(&self) -> &[String] {
        match self {
            Region::Volume(m) | Region::Boundary(m) => m,
        }
    }

    /// Whether a mesh region labelled `marker` belongs to this region.
    pub fn includes(&self, marker: &str) -> bool {
        let m = self.markers();
        m.is_empty() || m.iter().any(|s| s == marker)
    }
}

/// Scalar integrand over a volume or boundary region.
///
/// `pulled` keeps the integrand written on the reference domain (with the deformation
/// gradient symbol F still present) after a shape derivative, so a second shape derivative
/// can be taken from it.
#[derive(Debug, Clone)]
pub struct FormTerm {
    pub integrand: Expr,
    pub region: Region,
    pub bonus_quad_order: usize,
    pub pulled: Option<Expr>,
}

impl FormTerm {
    /// Volume term. Normals and tangents are not available inside the domain.
    pub fn volume(integrand: Expr) -> Result<Self, ExprError> {
        check_scalar(&integrand)?;
        if integrand.contains(&|n| matches!(n.kind(), Kind::Normal | Kind::Tangent)) {
            return Err(ExprError::BoundaryOnly("normal or tangent in a volume term"));
        }
        Ok(Self { integrand, region: Region::Volume(Vec::new()), bonus_quad_order: 0, pulled: None })
    }

    pub fn boundary(integrand: Expr) -> Result<Self, ExprError> {
        check_scalar(&integrand)?;
        Ok(Self { integrand, region: Region::Boundary(Vec::new()), bonus_quad_order: 0, pulled: None })
    }

    /// Restricts the term to the given region markers.
    pub fn on(mut self, markers: &[&str]) -> Self {
        let m = markers.iter().map(|s| s.to_string()).collect();
        self.region = match self.region {
            Region::Volume(_) => Region::Volume(m),
            Region::Boundary(_) => Region::Boundary(m),
        };
        self
    }

    pub fn with_bonus(mut self, k: usize) -> Self {
        self.bonus_quad_order = k;
        self
    }

    fn map(&self, f: impl Fn(&Expr) -> Result<Expr, ExprError>) -> Result<Self, ExprError> {
        Ok(Self {
            integrand: simplify(&f(&self.integrand)?),
            region: self.region.clone(),
            bonus_quad_order: self.bonus_quad_order,
            pulled: self.pulled.as_ref().map(|p| f(p).map(|e| simplify(&e))).transpose()?,
        })
    }

    /// Directional derivative of the term with respect to a grid function, parameter or
    /// coordinate.
    pub fn diff(&self, var: &Expr, dir: &Expr) -> Result<Self, ExprError> {
        self.map(|e| diff(e, var, dir))
    }

    pub fn substitute(&self, var: &Expr, repl: &Expr) -> Result<Self, ExprError> {
        self.map(|e| substitute(e, var, repl))
    }

    pub fn scaled(&self, c: f64) -> Self {
        let s = Expr::scalar(c);
        self.map(|e| s.scale(e)).expect("scaling a scalar term")
    }

    pub fn is_boundary(&self) -> bool {
        self.region.is_boundary()
    }
}

fn check_scalar(e: &Expr) -> Result<(), ExprError> {
    if e.shape() != Shape::Scalar {
        return Err(ExprError::ShapeMismatch { op: "form term", detail: format!("integrand {e} is not scalar") });
    }
    Ok(())
}

/// Rewrites the integrand on the reference domain.
///
/// Function gradients pick up the inverse deformation gradient, normals and tangents are
/// mapped to the deformed boundary, and the measure is multiplied by `det F` (volume) or
/// `det F |F^-T n|` (boundary). Coordinates keep their meaning as positions in the
/// deformed domain, so their shape derivative is the transport of data along the field.
pub fn pullback(term: &FormTerm) -> Result<Expr, ExprError> {
    if term.integrand.contains_shape_f() {
        return Err(ExprError::AlreadyPulledBack);
    }
    let f = Expr::shape_f();
    let finv = f.inv()?;
    let finv_t = finv.transpose()?;
    let boundary = term.is_boundary();
    let mapped_normal = if boundary {
        let m = finv_t.matvec(&Expr::normal())?;
        Some(m.scale(&m.norm()?.pow(-1.0)?)?)
    } else {
        None
    };
    let mut memo = HashMap::new();
    let body = pull_rec(&term.integrand, &f, &finv, &finv_t, mapped_normal.as_ref(), &mut memo)?;
    let measure = if boundary {
        f.det()?.scale(&finv_t.matvec(&Expr::normal())?.norm()?)?
    } else {
        f.det()?
    };
    body.scale(&measure)
}

fn pull_rec(
    e: &Expr,
    f: &Expr,
    finv: &Expr,
    finv_t: &Expr,
    normal: Option<&Expr>,
    memo: &mut HashMap<usize, Expr>,
) -> Result<Expr, ExprError> {
    if let Some(r) = memo.get(&e.node_id()) {
        return Ok(r.clone());
    }
    let r = match e.kind() {
        Kind::Grad { .. } => {
            if e.shape() == Shape::Vector {
                finv_t.matvec(e)?
            } else {
                e.matmat(finv)?
            }
        }
        Kind::Normal => normal.cloned().ok_or(ExprError::BoundaryOnly("normal"))?,
        Kind::Tangent => {
            let m = f.matvec(e)?;
            m.scale(&m.norm()?.pow(-1.0)?)?
        }
        _ if e.children().is_empty() => e.clone(),
        _ => {
            let ch: Vec<Expr> =
                e.children().iter().map(|c| pull_rec(c, f, finv, finv_t, normal, memo)).collect::<Result<_, _>>()?;
            if ch.iter().zip(e.children()).all(|(a, b)| a.ptr_eq(b)) {
                e.clone()
            } else {
                e.rebuild(ch)?
            }
        }
    };
    memo.insert(e.node_id(), r.clone());
    Ok(r)
}

/// Shape derivative of a term in direction `dir`, a vector valued function.
///
/// The returned term holds the derivative evaluated on the current domain (F = I) and keeps
/// the reference-domain form for a further shape derivative.
pub fn diff_shape(term: &FormTerm, dir: &Expr) -> Result<FormTerm, ExprError> {
    let raw = match &term.pulled {
        Some(p) => p.clone(),
        None => pullback(term)?,
    };
    shape_derivative(term, raw, dir)
}

/// Shape derivative of a term whose integrand was already written on the reference domain
/// by hand, using the symbol F for the deformation gradient.
pub fn diff_shape_pulled(term: &FormTerm, dir: &Expr) -> Result<FormTerm, ExprError> {
    let raw = term.pulled.clone().unwrap_or_else(|| term.integrand.clone());
    shape_derivative(term, raw, dir)
}

fn shape_derivative(term: &FormTerm, raw: Expr, dir: &Expr) -> Result<FormTerm, ExprError> {
    match dir.fn_ref() {
        Some(r) if r.vdim == 2 => {}
        _ => return Err(ExprError::InvalidShapeDirection),
    }
    let grad_dir = if term.is_boundary() { dir.grad_traced()? } else { dir.grad()? };
    let by_position = diff(&raw, &Expr::position(), dir)?;
    let by_f = diff(&raw, &Expr::shape_f(), &grad_dir)?;
    let d = simplify(&by_position.try_add(&by_f)?);
    let integrand = simplify(&substitute(&d, &Expr::shape_f(), &Expr::identity())?);
    Ok(FormTerm {
        integrand,
        region: term.region.clone(),
        bonus_quad_order: term.bonus_quad_order,
        pulled: Some(d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{evaluate, EvalContext, FnRef, Value};

    #[test]
    fn pullback_at_identity_matches_original() {
        let u = Expr::grid_func(FnRef::new(31, 1, "u"));
        let e = u.grad().unwrap() * u.grad().unwrap() + Expr::x() * &u;
        let t = FormTerm::volume(e.clone()).unwrap();
        let p = pullback(&t).unwrap();
        let at_id = simplify(&substitute(&p, &Expr::shape_f(), &Expr::identity()).unwrap());
        let mut ctx = EvalContext::at(0.3, 0.4);
        ctx.funcs.insert(31, (Value::Scalar(1.5), Value::Vector([0.2, -0.7])));
        let a = evaluate(&e, &ctx).unwrap().scalar();
        let b = evaluate(&at_id, &ctx).unwrap().scalar();
        assert!((a - b).abs() < 1e-14);
        assert!(matches!(pullback(&FormTerm { integrand: p, ..t }), Err(ExprError::AlreadyPulledBack)));
    }

    #[test]
    fn volume_terms_reject_normals_and_vectors() {
        assert!(FormTerm::volume(Expr::normal().component(0).unwrap()).is_err());
        assert!(FormTerm::volume(Expr::position()).is_err());
        assert!(FormTerm::boundary(Expr::normal().component(0).unwrap()).is_ok());
    }

    #[test]
    fn shape_derivative_of_area_is_divergence() {
        let v = Expr::grid_func(FnRef::new(41, 2, "V"));
        let t = FormTerm::volume(Expr::scalar(1.0)).unwrap();
        let d = diff_shape(&t, &v).unwrap();
        let mut ctx = EvalContext::default();
        ctx.funcs.insert(41, (Value::Vector([0.0; 2]), Value::Matrix([[2.0, 5.0], [-1.0, 3.0]])));
        assert!((evaluate(&d.integrand, &ctx).unwrap().scalar() - 5.0).abs() < 1e-14);
        assert!(d.pulled.as_ref().unwrap().contains_shape_f());
        assert!(diff_shape(&t, &Expr::x()).is_err());
    }
}
