//! Subcommands. Each writes its artifacts under the output directory and
//! returns whether every inner solve converged and every hard check passed.

use std::path::{Path, PathBuf};

use thermistor_core::coupled::{divergence_defect, reconstruct_h, run_fixed_point, FixedPoint};
use thermistor_core::diagnostics::{
    campanato_seminorm, check_energy_bounds, contraction_probe, holder_pairs,
    holder_seminorm_pairs, uniqueness_threshold,
};
use thermistor_core::quadrature::{edge_norm, face_norm};
use thermistor_core::verification::{build_case, convergence_study, CATALOG};
use thermistor_core::{eval_sigma, Drive, JouleMode, ProblemSpec};

use crate::config::RunConfig;
use crate::output::{
    edge_vectors, face_vectors, float, opt_float, raw_edges, raw_faces, raw_nodes, vtk,
    write_atomic, Table,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Verify,
    ContractionStudy,
    RegularityStudy,
    Reconstruct,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::ContractionStudy => "contraction-study",
            Command::RegularityStudy => "regularity-study",
            Command::Reconstruct => "reconstruct",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Solver(#[from] thermistor_core::Error),
    #[error("writing artifacts: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub ok: bool,
    pub artifacts: Vec<PathBuf>,
    pub summary: Vec<String>,
}

/// Hard (pass/fail) and informational checks, written to `checks.csv`.
struct Checks {
    table: Table,
    ok: bool,
}

impl Checks {
    fn new() -> Self {
        Self {
            table: Table::new(&["check", "value", "limit", "pass"]),
            ok: true,
        }
    }

    fn hard(&mut self, name: &str, value: f64, limit: f64, pass: bool) {
        self.ok &= pass;
        self.table
            .push(vec![name.to_string(), float(value), float(limit), pass.to_string()]);
    }

    fn info(&mut self, name: &str, value: f64) {
        self.table
            .push(vec![name.to_string(), float(value), String::new(), String::new()]);
    }
}

struct Sink {
    dir: PathBuf,
    artifacts: Vec<PathBuf>,
    summary: Vec<String>,
}

impl Sink {
    fn table(&mut self, name: &str, t: &Table) -> std::io::Result<()> {
        let p = self.dir.join(name);
        t.write(&p)?;
        self.artifacts.push(p);
        Ok(())
    }

    fn text(&mut self, name: &str, s: &str) -> std::io::Result<()> {
        let p = self.dir.join(name);
        write_atomic(&p, s.as_bytes())?;
        self.artifacts.push(p);
        Ok(())
    }

    fn finish(mut self, checks: Checks) -> std::io::Result<Outcome> {
        self.table("checks.csv", &checks.table)?;
        for r in checks.table.rows() {
            if r[3] == "false" {
                self.summary.push(format!("FAILED {} = {} (limit {})", r[0], r[1], r[2]));
            }
        }
        Ok(Outcome {
            ok: checks.ok,
            artifacts: self.artifacts,
            summary: self.summary,
        })
    }
}

pub fn run(command: Command, config: &RunConfig, out: &Path, seed: u64) -> Result<Outcome, RunError> {
    let mut sink = Sink {
        dir: out.to_path_buf(),
        artifacts: vec![],
        summary: vec![],
    };
    std::fs::create_dir_all(out)?;
    let mut checks = Checks::new();
    match command {
        Command::Solve => solve(config, &mut sink, &mut checks)?,
        Command::Verify => verify(config, &mut sink, &mut checks)?,
        Command::ContractionStudy => contraction(config, seed, &mut sink, &mut checks)?,
        Command::RegularityStudy => regularity(config, seed, &mut sink, &mut checks)?,
        Command::Reconstruct => reconstruct(config, &mut sink, &mut checks)?,
    }
    Ok(sink.finish(checks)?)
}

const ITERATION_HEADER: [&str; 10] = [
    "iteration",
    "du_l2",
    "dj_l2",
    "contraction",
    "u_l2",
    "j_l2",
    "energy_ratio",
    "potential_iterations",
    "temperature_iterations",
    "linear_converged",
];

fn iteration_table(fp: &FixedPoint) -> Table {
    let mut t = Table::new(&ITERATION_HEADER);
    for r in &fp.diagnostics.records {
        t.push(vec![
            r.iteration.to_string(),
            float(r.du),
            float(r.dj),
            float(r.contraction),
            float(r.u_norm),
            float(r.j_norm),
            opt_float(r.energy_ratio),
            r.potential_iterations.to_string(),
            r.temperature_iterations.to_string(),
            r.linear_converged.to_string(),
        ]);
    }
    t
}

/// Checks every solve shares: convergence, current conservation, the
/// energy bounds and, for pointwise heating with nonnegative boundary data,
/// nonnegativity of the temperature.
fn solution_checks(spec: &ProblemSpec, fp: &FixedPoint, checks: &mut Checks, prefix: &str) -> Result<Table, RunError> {
    checks.hard(
        &format!("{prefix}picard-converged"),
        fp.diagnostics.iterations() as f64,
        spec.picard.max_iter as f64,
        fp.diagnostics.converged(),
    );
    let tol = spec.picard.linear.tol;
    let defect = divergence_defect(&fp.current);
    checks.hard(&format!("{prefix}current-conservation"), defect, 10.0 * tol, defect <= 10.0 * tol);
    let mut est = Table::new(&["name", "lhs", "rhs", "ratio", "pass"]);
    for r in check_energy_bounds(spec, fp)? {
        if let Some(pass) = r.pass {
            checks.hard(&format!("{prefix}{}", r.name), r.ratio, 1.0 + thermistor_core::diagnostics::SLACK, pass);
        }
        est.push(vec![
            r.name.to_string(),
            float(r.lhs),
            float(r.rhs),
            float(r.ratio),
            r.pass.map(|p| p.to_string()).unwrap_or_default(),
        ]);
    }
    let t = uniqueness_threshold(&spec.sigma).with_measured(edge_norm(&fp.current, 3.0));
    est.push(vec![
        "uniqueness-threshold".into(),
        opt_float(t.measured),
        float(t.kappa),
        opt_float(t.margin),
        String::new(),
    ]);
    if spec.joule == JouleMode::Pointwise && spec.u0.min() >= 0.0 {
        let m = fp.u.min();
        checks.hard(&format!("{prefix}min-temperature"), m, -1e-8, m >= -1e-8);
    }
    Ok(est)
}

fn write_fields(config: &RunConfig, spec: &ProblemSpec, fp: &FixedPoint, sink: &mut Sink) -> Result<(), RunError> {
    if config.output.vtk {
        let sigma = eval_sigma(&spec.sigma, &fp.u)?;
        let text = vtk(
            spec.grid(),
            &[("u", &fp.u), ("phi", &fp.phi), ("sigma", &sigma)],
            &[("J", edge_vectors(&fp.current))],
        );
        sink.text("fields.vtk", &text)?;
    }
    if config.output.raw {
        sink.artifacts.extend(raw_nodes(&sink.dir, "u", &fp.u)?);
        sink.artifacts.extend(raw_nodes(&sink.dir, "phi", &fp.phi)?);
        sink.artifacts.extend(raw_edges(&sink.dir, "J", &fp.current)?);
    }
    Ok(())
}

fn solve_and_report(config: &RunConfig, sink: &mut Sink, checks: &mut Checks) -> Result<(ProblemSpec, FixedPoint), RunError> {
    let spec = config.problem()?;
    let fp = run_fixed_point(&spec)?;
    sink.table("diagnostics.csv", &iteration_table(&fp))?;
    let est = solution_checks(&spec, &fp, checks, "")?;
    sink.table("estimates.csv", &est)?;
    write_fields(config, &spec, &fp, sink)?;
    sink.summary.push(format!(
        "{} mode, {} after {} iterations, |u|_inf = {:.6e}, |J|_2 = {:.6e}",
        spec.drive.name(),
        fp.diagnostics.status.as_str(),
        fp.diagnostics.iterations(),
        fp.u.max_abs(),
        edge_norm(&fp.current, 2.0)
    ));
    Ok((spec, fp))
}

fn solve(config: &RunConfig, sink: &mut Sink, checks: &mut Checks) -> Result<(), RunError> {
    solve_and_report(config, sink, checks)?;
    Ok(())
}

fn joule_name(j: JouleMode) -> &'static str {
    match j {
        JouleMode::Divergence => "divergence",
        JouleMode::Pointwise => "pointwise",
    }
}

fn verify(config: &RunConfig, sink: &mut Sink, checks: &mut Checks) -> Result<(), RunError> {
    let names: Vec<&str> = match config.study.case.as_deref() {
        None | Some("all") => CATALOG.to_vec(),
        Some(c) => vec![c],
    };
    let grids = config.study.grids.clone().unwrap_or_else(|| vec![8, 16, 32]);
    let joule = config.joule;
    let mut errors = Table::new(&[
        "case", "joule", "cells", "h", "u_l2", "u_max", "phi_l2", "phi_max", "j_l2", "j_max", "iterations", "valid",
    ]);
    let mut orders = Table::new(&[
        "case", "joule", "from", "to", "u_l2", "u_max", "phi_l2", "phi_max", "j_l2", "j_max",
    ]);
    for name in names {
        let case = build_case(name)?;
        let table = convergence_study(&case, &grids, joule)?;
        for r in &table.rows {
            errors.push(vec![
                name.to_string(),
                joule_name(joule).into(),
                r.cells.to_string(),
                float(r.h),
                float(r.u_l2),
                float(r.u_max),
                float(r.phi_l2),
                float(r.phi_max),
                float(r.j_l2),
                float(r.j_max),
                r.iterations.to_string(),
                r.valid.to_string(),
            ]);
            checks.hard(&format!("{name}/{}/converged", r.cells), r.iterations as f64, f64::NAN, r.valid);
        }
        let ord = table.orders();
        for (w, o) in table.rows.windows(2).zip(&ord) {
            orders.push(vec![
                name.to_string(),
                joule_name(joule).into(),
                w[0].cells.to_string(),
                w[1].cells.to_string(),
                float(o.u_l2),
                float(o.u_max),
                float(o.phi_l2),
                float(o.phi_max),
                float(o.j_l2),
                float(o.j_max),
            ]);
        }
        match name {
            "constant-sigma-uniform" => {
                let tol = 100.0 * thermistor_core::SolverControls::DEFAULT_TOL;
                let worst = table
                    .rows
                    .iter()
                    .map(|r| r.u_max.max(r.phi_max).max(r.j_max))
                    .fold(0.0, f64::max);
                checks.hard(&format!("{name}/max-error"), worst, tol, worst <= tol);
            }
            "smooth-nonlinear" => {
                for o in &ord {
                    checks.hard(&format!("{name}/u-l2-order"), o.u_l2, 1.8, o.u_l2 >= 1.8);
                    checks.hard(&format!("{name}/phi-l2-order"), o.phi_l2, 1.8, o.phi_l2 >= 1.8);
                }
            }
            _ => {
                for o in &ord {
                    checks.hard(&format!("{name}/j-l2-order"), o.j_l2, 1.8, o.j_l2 >= 1.8);
                }
            }
        }
        sink.summary.push(format!(
            "{name}: finest u L2 error {:.3e}",
            table.rows.last().map_or(f64::NAN, |r| r.u_l2)
        ));
    }
    sink.table("errors.csv", &errors)?;
    sink.table("orders.csv", &orders)?;
    Ok(())
}

fn forcing_norm(spec: &ProblemSpec) -> f64 {
    match &spec.drive {
        Drive::Electric(a) => edge_norm(&a.edge_field(), 2.0),
        Drive::Tangential(f) => f.source_curl().map_or(f.magnitude(), |c| face_norm(c, 2.0)),
    }
}

fn contraction(config: &RunConfig, seed: u64, sink: &mut Sink, checks: &mut Checks) -> Result<(), RunError> {
    let mut t = Table::new(&[
        "scale",
        "forcing_l2",
        "j_l3",
        "kappa",
        "margin",
        "max_factor",
        "limit_difference",
        "converged",
        "iterations",
    ]);
    let mut factors = vec![];
    for &s in &config.study.scales {
        let spec = config.problem_scaled(s)?;
        let rep = contraction_probe(&spec, config.study.perturbation, seed)?;
        let converged = rep.converged && rep.perturbed_converged;
        let f = rep.max_factor();
        factors.push(f);
        t.push(vec![
            float(s),
            float(forcing_norm(&spec)),
            opt_float(rep.threshold.measured),
            float(rep.threshold.kappa),
            opt_float(rep.threshold.margin),
            float(f),
            opt_float(rep.limit_difference),
            converged.to_string(),
            rep.solution.diagnostics.iterations().to_string(),
        ]);
        let tag = format!("scale={s}");
        checks.hard(&format!("{tag}/converged"), f, f64::NAN, converged);
        if rep.threshold.margin.is_some_and(|m| m < 0.5) {
            let d = rep.limit_difference.unwrap_or(f64::INFINITY);
            checks.hard(&format!("{tag}/limit-agreement"), d, 1e-8, d <= 1e-8);
            checks.hard(&format!("{tag}/max-factor"), f, 1.0, f < 1.0);
        }
    }
    let monotone = factors.windows(2).all(|w| w[1] >= w[0]);
    checks.info("factor-monotone", if monotone { 1.0 } else { 0.0 });
    sink.summary.push(format!(
        "{} scales, contraction factors {}",
        factors.len(),
        if monotone { "monotone" } else { "not monotone" }
    ));
    sink.table("contraction.csv", &t)?;
    Ok(())
}

fn regularity(config: &RunConfig, seed: u64, sink: &mut Sink, checks: &mut Checks) -> Result<(), RunError> {
    let grids = config.study.grids.clone().unwrap_or_else(|| vec![16, 32, 64]);
    let mut t = Table::new(&["cells", "holder", "campanato", "iterations", "converged"]);
    let mut values = vec![];
    for &n in &grids {
        let c = config.with_cells(n)?;
        let spec = c.problem()?;
        let fp = run_fixed_point(&spec)?;
        let pairs = holder_pairs(spec.grid(), config.study.lattice, config.study.random_pairs, seed);
        let holder = holder_seminorm_pairs(&fp.u, config.study.alpha, &pairs)?;
        let camp = campanato_seminorm(&fp.u, config.study.mu, config.study.lattice)?;
        values.push(holder);
        t.push(vec![
            n.to_string(),
            float(holder),
            float(camp),
            fp.diagnostics.iterations().to_string(),
            fp.diagnostics.converged().to_string(),
        ]);
        checks.hard(&format!("cells={n}/converged"), fp.diagnostics.iterations() as f64, f64::NAN, fp.diagnostics.converged());
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let variation = if lo > 0.0 { hi / lo - 1.0 } else if hi == 0.0 { 0.0 } else { f64::INFINITY };
    checks.hard("holder-variation", variation, 0.2, variation <= 0.2);
    sink.summary.push(format!("hoelder seminorm variation {:.3}%", 100.0 * variation));
    sink.table("regularity.csv", &t)?;
    Ok(())
}

fn reconstruct(config: &RunConfig, sink: &mut Sink, checks: &mut Checks) -> Result<(), RunError> {
    let (spec, fp) = solve_and_report(config, sink, checks)?;
    let n = spec.grid().cells();
    let (h, rep) = reconstruct_h(&fp.current, config.study.reconstruct_tol, 200 * (n[0] + n[1] + n[2]))?;
    let g = *spec.grid();
    let normal_max = (0..3)
        .flat_map(|d| {
            let l = g.faces(d);
            h.component(d)
                .iter()
                .enumerate()
                .filter(move |(f, _)| g.is_boundary_face(d, l.coords(*f)))
                .map(|(_, v)| v.abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);
    let mut t = Table::new(&["iterations", "curl_residual", "div_residual", "h_l2", "normal_max", "converged"]);
    t.push(vec![
        rep.iterations.to_string(),
        float(rep.curl_residual),
        float(rep.div_residual),
        float(face_norm(&h, 2.0)),
        float(normal_max),
        rep.converged.to_string(),
    ]);
    sink.table("reconstruction.csv", &t)?;
    checks.hard("reconstruction-converged", rep.curl_residual, config.study.reconstruct_tol, rep.converged);
    checks.hard("reconstruction-divergence", rep.div_residual, 1e-8, rep.div_residual <= 1e-8);
    checks.hard("reconstruction-normal-trace", normal_max, 0.0, normal_max == 0.0);
    if config.output.vtk {
        sink.text("magnetic.vtk", &vtk(&g, &[], &[("H", face_vectors(&h))]))?;
    }
    if config.output.raw {
        sink.artifacts.extend(raw_faces(&sink.dir, "H", &h)?);
    }
    sink.summary.push(format!("H reconstructed in {} iterations", rep.iterations));
    Ok(())
}
