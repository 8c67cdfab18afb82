//! Scenario drivers writing `history.csv`, `taylor.csv`, VTK snapshots and `summary.txt`.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use shapediff::fem::{project, Bindings};
use shapediff::optimize::{gradient_descent, newton_loop, spacetime_descent, OptHistory, StepRecord, StopReason};
use shapediff::scenarios;
use shapediff::shapecalc::{ShapeError, ShapeProblem};
use shapediff::verify::{automation_audit, default_steps, taylor_second};

use crate::config::{RunConfig, Scenario, TaylorProblem};

const SLOPE1: f64 = 1.9;
const SLOPE2: f64 = 2.9;
const AUDIT: f64 = 1e-12;

/// Result lines for the summary and whether the run met its targets.
struct Report {
    lines: Vec<(String, String)>,
    ok: bool,
}

impl Report {
    fn push(&mut self, k: &str, v: impl ToString) {
        self.lines.push((k.to_string(), v.to_string()));
    }
}

/// Runs the configured scenario. Returns `false` when the run finished but missed its
/// targets (Taylor slopes or audit); errors abort the run after the summary is written.
pub fn run(cfg: &RunConfig) -> Result<bool> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let mut report = Report { lines: Vec::new(), ok: true };
    let res = match cfg.scenario {
        Scenario::Taylor => taylor(cfg, &mut report),
        Scenario::Clover => descent(cfg, scenarios::clover(cfg.maxh, cfg.order)?, &mut report),
        Scenario::Poisson => descent(cfg, scenarios::poisson(cfg.maxh, cfg.order)?, &mut report),
        Scenario::EllipseNewton => newton(cfg, &mut report),
        Scenario::SpacetimeHeat => heat(cfg, &mut report),
    };
    if let Err(e) = &res {
        report.push("status", format!("failed: {e:#}"));
        report.ok = false;
    } else {
        report.push("status", if report.ok { "ok" } else { "targets missed" });
    }
    write_summary(cfg, &report)?;
    res.map(|_| report.ok)
}

fn write_summary(cfg: &RunConfig, report: &Report) -> Result<()> {
    let mut s = String::from("# results\n");
    for (k, v) in &report.lines {
        let _ = writeln!(s, "{k} = {v}");
    }
    s.push_str("\n# configuration (defaults included)\n");
    for (k, v) in cfg.entries() {
        let _ = writeln!(s, "{k} = {v}");
    }
    let path = cfg.out.join("summary.txt");
    fs::write(&path, s).with_context(|| format!("writing {}", path.display()))
}

fn snapshot(prob: &ShapeProblem, path: &Path) -> Result<(), ShapeError> {
    let nv = prob.mesh().nv();
    let c = &prob.shape().coeffs;
    // vertex dofs come first, components interleaved
    let disp: Vec<[f64; 2]> = (0..nv).map(|i| [c[2 * i], c[2 * i + 1]]).collect();
    let f = File::create(path).map_err(|e| ShapeError::Invalid(format!("{}: {e}", path.display())))?;
    prob.mesh().write_vtk(BufWriter::new(f), &[("deformation", &disp)])?;
    Ok(())
}

fn snapshots<'a>(cfg: &'a RunConfig) -> impl FnMut(&ShapeProblem, usize) -> Result<(), ShapeError> + 'a {
    move |p, k| {
        if cfg.snapshot_every > 0 && k % cfg.snapshot_every == 0 {
            snapshot(p, &cfg.out.join(format!("shape_{k:04}.vtk")))?;
        }
        Ok(())
    }
}

fn write_history(cfg: &RunConfig, h: &OptHistory) -> Result<()> {
    let path = cfg.out.join("history.csv");
    h.write_csv(BufWriter::new(File::create(&path)?)).with_context(|| format!("writing {}", path.display()))
}

fn history_lines(report: &mut Report, h: &OptHistory) {
    report.push("j_initial", format!("{:e}", h.j_initial));
    report.push("j_final", format!("{:e}", h.j_final));
    report.push("gradnorm_initial", format!("{:e}", h.gradnorm_initial));
    report.push("gradnorm_final", format!("{:e}", h.gradnorm_final));
    report.push("iterations", h.iterations);
    report.push("stop", format!("{:?}", h.stop));
}

fn finish(cfg: &RunConfig, prob: &ShapeProblem, h: &OptHistory, report: &mut Report) -> Result<()> {
    snapshot(prob, &cfg.out.join("shape_final.vtk"))?;
    write_history(cfg, h)?;
    history_lines(report, h);
    Ok(())
}

fn descent(cfg: &RunConfig, mut prob: ShapeProblem, report: &mut Report) -> Result<()> {
    snapshot(&prob, &cfg.out.join("shape_0000.vtk"))?;
    let h = gradient_descent(&mut prob, cfg.ip, &cfg.opt, snapshots(cfg))?;
    finish(cfg, &prob, &h, report)?;
    if cfg.scenario == Scenario::Clover {
        let r = shapediff::optimize::conformality_residual(prob.mesh(), prob.shape())?;
        report.push("conformality_residual", format!("{r:e}"));
    }
    Ok(())
}

fn heat(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let (mut prob, scalar) = scenarios::heat([0.2, 0.8], cfg.maxh)?;
    snapshot(&prob, &cfg.out.join("shape_0000.vtk"))?;
    let h = spacetime_descent(&mut prob, &scalar, &cfg.opt, snapshots(cfg))?;
    finish(cfg, &prob, &h, report)
}

fn newton(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let mut prob = scenarios::ellipse(cfg.ellipse_a, cfg.maxh, cfg.order)?;
    snapshot(&prob, &cfg.out.join("shape_0000.vtk"))?;
    prob.solve()?;
    let j0 = prob.cost()?;
    // kept separately so a failed run still leaves its steps behind
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut snap = snapshots(cfg);
    let res = newton_loop(&mut prob, cfg.regularization(), &cfg.opt, |p, k| {
        steps.push(StepRecord { iter: k, j: p.cost()?, gradnorm: f64::NAN, alpha: 1.0, accepted: true });
        snap(p, k)
    });
    match res {
        Ok(h) => finish(cfg, &prob, &h, report),
        Err(e) => {
            let h = OptHistory {
                j_final: steps.last().map_or(j0, |r| r.j),
                iterations: steps.len(),
                records: steps,
                j_initial: j0,
                gradnorm_initial: f64::NAN,
                gradnorm_final: f64::NAN,
                stop: StopReason::Diverging,
            };
            write_history(cfg, &h)?;
            report.push("j_initial", format!("{j0:e}"));
            report.push("iterations", h.iterations);
            Err(e).context(format!("Newton step {} failed", h.iterations + 1))
        }
    }
}

fn taylor(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let mut prob = match cfg.taylor_problem {
        TaylorProblem::VolumeBoundary => scenarios::volume_boundary(cfg.maxh, cfg.order)?,
        TaylorProblem::Poisson => scenarios::poisson(cfg.maxh, cfg.order)?,
    };
    let v = project(prob.mesh(), prob.vec_space(), &scenarios::taylor_field(), &Bindings::new())?;
    let r = taylor_second(&mut prob, &v.coeffs, &default_steps())?;
    let path = cfg.out.join("taylor.csv");
    r.write_csv(BufWriter::new(File::create(&path)?)).with_context(|| format!("writing {}", path.display()))?;
    let audit = automation_audit(&prob)?;
    let (s1, s2) = (r.slope1.unwrap_or(f64::NAN), r.slope2.unwrap_or(f64::NAN));
    report.push("j", format!("{:e}", r.j));
    report.push("dj", format!("{:e}", r.dj));
    report.push("d2j", format!("{:e}", r.d2j.unwrap_or(f64::NAN)));
    report.push("slope1", format!("{s1:.4}"));
    report.push("slope2", format!("{s2:.4}"));
    report.push("automation_audit", format!("{audit:e}"));
    report.ok = s1 >= SLOPE1 && s2 >= SLOPE2 && audit <= AUDIT;
    Ok(())
}
