//! Taylor remainder tests for first and second shape derivatives and the check that both
//! differentiation modes assemble the same derivative vector.

use std::io::Write;

use thiserror::Error;

use crate::linalg::norm_inf;
use crate::shapecalc::{DiffMode, ShapeError, ShapeProblem};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("invalid step list: {0}")]
    Steps(String),
    #[error("perturbed mesh is invalid at t = {t}")]
    InvalidDeformation { t: f64 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Remainders relative to a first (and optionally second) order expansion of
/// `t -> J((Id + tV)(Omega))`.
#[derive(Debug, Clone)]
pub struct TaylorReport {
    /// strictly decreasing steps
    pub t: Vec<f64>,
    /// `|J_t - J - t DJ(V)|`
    pub delta1: Vec<f64>,
    /// `|J_t - J - t DJ(V) - t^2/2 D2J(V)(V)|`, only for second-order runs
    pub delta2: Option<Vec<f64>>,
    pub j: f64,
    pub dj: f64,
    pub d2j: Option<f64>,
    pub slope1: Option<f64>,
    pub slope2: Option<f64>,
}

impl TaylorReport {
    /// Writes `t,delta1,delta2`; delta2 is empty for first-order runs.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), VerifyError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "delta1", "delta2"]).map_err(csv_io)?;
        for (k, t) in self.t.iter().enumerate() {
            let d2 = self.delta2.as_ref().map(|d| format!("{:e}", d[k])).unwrap_or_default();
            out.write_record([format!("{t:e}"), format!("{:e}", self.delta1[k]), d2]).map_err(csv_io)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> VerifyError {
    VerifyError::Io(e.into())
}

/// `0.1 * 2^-k` for k = 0..7.
pub fn default_steps() -> Vec<f64> {
    (0..8).map(|k| 0.1 * 0.5f64.powi(k)).collect()
}

fn check_steps(t: &[f64]) -> Result<(), VerifyError> {
    if t.len() < 4 {
        return Err(VerifyError::Steps(format!("need at least 4 steps, got {}", t.len())));
    }
    if t.iter().any(|&x| !(1e-4..=1e-1).contains(&x)) {
        return Err(VerifyError::Steps("steps must lie in [1e-4, 1e-1]".into()));
    }
    if t.windows(2).any(|w| w[1] >= w[0]) {
        return Err(VerifyError::Steps("steps must be strictly decreasing".into()));
    }
    Ok(())
}

/// Least-squares slope of `log d` against `log t`, after dropping trailing points with
/// `d < floor`. `None` if fewer than two points remain.
pub fn fit_slope(t: &[f64], d: &[f64], floor: f64) -> Option<f64> {
    let keep = d.iter().rposition(|&x| x >= floor && x > 0.0)? + 1;
    let pts: Vec<(f64, f64)> = t[..keep].iter().zip(&d[..keep]).filter(|(_, &y)| y > 0.0).map(|(&x, &y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    Some(sxy / sxx)
}

/// Remainders below this fraction of |J| count as roundoff and are trimmed from the fit.
const ROUNDOFF: f64 = 1e-12;

fn run(prob: &mut ShapeProblem, v: &[f64], steps: &[f64], second: bool) -> Result<TaylorReport, VerifyError> {
    check_steps(steps)?;
    let base = prob.shape().coeffs.clone();
    if v.len() != base.len() {
        return Err(ShapeError::Size { expected: base.len(), found: v.len() }.into());
    }
    prob.solve()?;
    let j = prob.cost()?;
    let dj = prob.directional(v)?;
    let d2j = if second { Some(prob.second_order(v)?) } else { None };
    let mut values = Vec::with_capacity(steps.len());
    for &t in steps {
        let d: Vec<f64> = base.iter().zip(v).map(|(b, x)| b + t * x).collect();
        match prob.cost_at(&d) {
            Ok(jt) => values.push(jt),
            Err(e) if e.is_invalid_shape() => {
                prob.set_shape(&base)?;
                prob.solve()?;
                return Err(VerifyError::InvalidDeformation { t });
            }
            Err(e) => return Err(e.into()),
        }
    }
    prob.set_shape(&base)?;
    prob.solve()?;
    let delta1: Vec<f64> = steps.iter().zip(&values).map(|(t, jt)| (jt - j - t * dj).abs()).collect();
    let delta2 = d2j.map(|h| steps.iter().zip(&values).map(|(t, jt)| (jt - j - t * dj - 0.5 * t * t * h).abs()).collect::<Vec<_>>());
    let floor = ROUNDOFF * j.abs();
    Ok(TaylorReport {
        slope1: fit_slope(steps, &delta1, floor),
        slope2: delta2.as_ref().and_then(|d| fit_slope(steps, d, floor)),
        t: steps.to_vec(),
        delta1,
        delta2,
        j,
        dj,
        d2j,
    })
}

/// First-order remainders along `v` (coefficients over the direction space). The shape of
/// `prob` is restored afterwards.
pub fn taylor_first(prob: &mut ShapeProblem, v: &[f64], steps: &[f64]) -> Result<TaylorReport, VerifyError> {
    run(prob, v, steps, false)
}

/// First- and second-order remainders along `v`.
pub fn taylor_second(prob: &mut ShapeProblem, v: &[f64], steps: &[f64]) -> Result<TaylorReport, VerifyError> {
    run(prob, v, steps, true)
}

/// Largest componentwise difference between the derivative vectors assembled from the
/// hand-pulled form and by full differentiation. Requires solved state and adjoint for
/// constrained problems.
pub fn automation_audit(prob: &ShapeProblem) -> Result<f64, ShapeError> {
    let semi = prob.first_order(DiffMode::Semi)?;
    let full = prob.first_order(DiffMode::Full)?;
    let d: Vec<f64> = semi.iter().zip(&full).map(|(a, b)| a - b).collect();
    Ok(norm_inf(&d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let t = default_steps();
        let d: Vec<f64> = t.iter().map(|x| 3.0 * x.powi(3)).collect();
        assert!((fit_slope(&t, &d, 0.0).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn trailing_roundoff_is_trimmed() {
        let t = default_steps();
        let mut d: Vec<f64> = t.iter().map(|x| x * x).collect();
        d[6] = 1e-17;
        d[7] = 3e-17;
        assert!((fit_slope(&t, &d, 1e-12).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(fit_slope(&t, &[0.0; 8], 1e-12), None);
    }

    #[test]
    fn step_lists_are_validated() {
        assert!(check_steps(&default_steps()).is_ok());
        assert!(check_steps(&[0.1, 0.05, 0.025]).is_err());
        assert!(check_steps(&[0.1, 0.05, 0.05, 0.01]).is_err());
        assert!(check_steps(&[0.2, 0.1, 0.05, 0.01]).is_err());
    }
}
