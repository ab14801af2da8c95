//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermistor_core::boundary::{AppliedField, BoundaryFlux};
use thermistor_core::coupled::{picard_step, reconstruct_h, run_fixed_point};
use thermistor_core::diagnostics::{check_energy_bounds, contraction_probe, holder_seminorm};
use thermistor_core::ops::{curl_edge_to_face, div_face, grad};
use thermistor_core::quadrature::{face_norm, node_mean};
use thermistor_core::verification::{build_case, convergence_study, dense_oracle, swirl_case};
use thermistor_core::{
    ConductivityModel, Drive, EdgeField, Grid, JouleMode, NodeField, PicardControls, ProblemSpec,
    SolverControls,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn random_grid(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> Grid {
    let cells = [0; 3].map(|_| rng.gen_range(lo..=hi));
    let lengths = [0; 3].map(|_| rng.gen_range(0.5..2.0));
    Grid::new(lengths, cells).unwrap()
}

fn random_model(rng: &mut ChaCha8Rng) -> ConductivityModel {
    match rng.gen_range(0..3) {
        0 => ConductivityModel::constant(rng.gen_range(0.5..3.0)).unwrap(),
        1 => {
            let low = rng.gen_range(0.5..2.0);
            ConductivityModel::sigmoid(low, low + rng.gen_range(0.5..3.0), rng.gen_range(-0.5..0.5), rng.gen_range(0.2..1.0))
                .unwrap()
        }
        _ => {
            let mut s = rng.gen_range(0.5..2.0);
            let pts = (0..4)
                .map(|i| {
                    s += rng.gen_range(0.0..1.0);
                    (i as f64 * 0.3 - 0.3, s)
                })
                .collect();
            ConductivityModel::table(pts).unwrap()
        }
    }
}

fn smooth_field(g: Grid, rng: &mut ChaCha8Rng, amp: f64) -> NodeField {
    let k = [0; 3].map(|_| rng.gen_range(0.5..3.0));
    let p = [0; 3].map(|_| rng.gen_range(0.0..6.0));
    let c = rng.gen_range(-amp..amp);
    NodeField::from_fn(g, |x| c + amp * (k[0] * x[0] + p[0]).sin() * (k[1] * x[1] + p[1]).cos() * (k[2] * x[2] + p[2]).sin())
}

fn rel_max(a: &NodeField, b: &NodeField) -> f64 {
    a.add_scaled(-1.0, b).max_abs() / b.max_abs().max(1e-300)
}

fn structural_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut grids = (2..=16).map(|n| Grid::unit_cube(n).unwrap()).collect::<Vec<_>>();
    grids.extend((0..10).map(|_| random_grid(&mut rng, 2, 16)));
    for g in grids {
        let inv: f64 = g.spacing().iter().map(|h| 2.0 / h).sum();
        let phi = NodeField::from_values(g, (0..g.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let e = grad(&phi);
        let cg = curl_edge_to_face(&e).max_abs() / (inv * e.max_abs());
        let a = EdgeField::from_fn(g, |_, _| rng.gen_range(-1.0..1.0));
        let dc = div_face(&curl_edge_to_face(&a)).max_abs() / (inv * inv * a.max_abs());
        worst = worst.max(cg).max(dc);
    }
    let detail = format!("worst relative defect {worst:.2e}");
    if worst <= 1e-13 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_spec(rng: &mut ChaCha8Rng) -> (ProblemSpec, NodeField) {
    let g = random_grid(rng, 2, 5);
    let model = random_model(rng);
    let joule = if rng.gen_bool(0.5) { JouleMode::Divergence } else { JouleMode::Pointwise };
    let drive = if rng.gen_bool(0.6) {
        let e = [0; 3].map(|_| rng.gen_range(-1.0..1.0));
        let mut a = AppliedField::uniform(g, e);
        a.psi0 = smooth_field(g, rng, 0.3);
        Drive::Electric(a)
    } else {
        let mut side = [0; 6].map(|_| rng.gen_range(-1.0..1.0));
        let l = g.lengths();
        let area = [l[1] * l[2], l[1] * l[2], l[0] * l[2], l[0] * l[2], l[0] * l[1], l[0] * l[1]];
        let total: f64 = side.iter().zip(&area).map(|(s, a)| s * a).sum();
        side[5] -= total / area[5];
        Drive::Tangential(BoundaryFlux::uniform_sides(g, side))
    };
    let mut picard = PicardControls::for_grid(&g);
    picard.linear = SolverControls::for_grid(&g).with_tol(1e-12);
    let u0 = smooth_field(g, rng, 0.5);
    let spec = ProblemSpec::new(model, u0, drive, joule, picard).unwrap();
    let u = smooth_field(g, rng, 0.5);
    (spec, u)
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (spec, u) = random_spec(&mut rng);
        let (phi, next) = dense_oracle(&spec, &u).map_err(|e| e.to_string())?;
        let step = picard_step(&spec, &u).map_err(|e| e.to_string())?;
        let mut mf_phi = step.potential.phi.clone();
        let mut dense_phi = phi;
        if matches!(spec.drive, Drive::Tangential(_)) {
            mf_phi = mf_phi.map(|v| v - node_mean(&step.potential.phi));
            let m = node_mean(&dense_phi);
            dense_phi = dense_phi.map(|v| v - m);
        }
        worst = worst.max(rel_max(&step.u, &next)).max(rel_max(&mf_phi, &dense_phi));
    }
    let detail = format!("20 specs, worst relative difference {worst:.2e}");
    if worst <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mms_convergence() -> Outcome {
    let mut lines = vec![];
    let mut ok = true;
    for joule in [JouleMode::Divergence, JouleMode::Pointwise] {
        let case = build_case("smooth-nonlinear").map_err(|e| e.to_string())?;
        let t = convergence_study(&case, &[8, 16, 32], joule).map_err(|e| e.to_string())?;
        let orders = t.orders();
        let min_u = orders.iter().map(|o| o.u_l2).fold(f64::INFINITY, f64::min);
        let min_phi = orders.iter().map(|o| o.phi_l2).fold(f64::INFINITY, f64::min);
        ok &= t.rows.iter().all(|r| r.valid) && min_u >= 1.8 && min_phi >= 1.8;
        lines.push(format!("{joule:?} orders u {min_u:.3} phi {min_phi:.3}"));
        let case = build_case("constant-sigma-uniform").map_err(|e| e.to_string())?;
        let t = convergence_study(&case, &[8, 16, 32], joule).map_err(|e| e.to_string())?;
        let worst = t.rows.iter().map(|r| r.u_max.max(r.phi_max).max(r.j_max)).fold(0.0, f64::max);
        ok &= worst <= 100.0 * SolverControls::DEFAULT_TOL;
        lines.push(format!("constant error {worst:.2e}"));
    }
    if ok {
        Ok(lines.join(", "))
    } else {
        Err(lines.join(", "))
    }
}

fn suite_specs() -> Vec<ProblemSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut specs = vec![];
    for i in 0..8 {
        let g = random_grid(&mut rng, 6, 12);
        let model = random_model(&mut rng);
        let joule = if i % 2 == 0 { JouleMode::Pointwise } else { JouleMode::Divergence };
        let drive = if i < 5 {
            let e = [0; 3].map(|_| rng.gen_range(-1.5..1.5));
            let mut a = AppliedField::uniform(g, e);
            a.psi0 = smooth_field(g, &mut rng, 0.2);
            Drive::Electric(a)
        } else {
            let w = [0; 3].map(|_| rng.gen_range(-1.0..1.0));
            let c = g.center();
            Drive::Tangential(BoundaryFlux::from_tangential_field(g, move |x| {
                let r = [x[0] - c[0], x[1] - c[1], x[2] - c[2]];
                [w[1] * r[2] - w[2] * r[1], w[2] * r[0] - w[0] * r[2], w[0] * r[1] - w[1] * r[0]]
            }))
        };
        let lo = rng.gen_range(0.0..0.5);
        let slope = rng.gen_range(0.0..0.3);
        let u0 = NodeField::from_fn(g, |x| lo + slope * x[0]);
        specs.push(ProblemSpec::new(model, u0, drive, joule, PicardControls::for_grid(&g)).unwrap());
    }
    specs
}

fn energy_estimates() -> Outcome {
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for spec in suite_specs() {
        let fp = run_fixed_point(&spec).map_err(|e| e.to_string())?;
        if !fp.diagnostics.converged() {
            continue;
        }
        for r in check_energy_bounds(&spec, &fp).map_err(|e| e.to_string())? {
            if let Some(pass) = r.pass {
                checked += 1;
                worst = worst.max(r.ratio);
                if !pass {
                    return Err(format!("{} ratio {:.6}", r.name, r.ratio));
                }
            }
        }
    }
    if checked == 0 {
        return Err("no converged runs".into());
    }
    Ok(format!("{checked} bounds checked, worst ratio {worst:.6}"))
}

fn maximum_principle() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut runs = 0;
    for mut spec in suite_specs() {
        spec.joule = JouleMode::Pointwise;
        let fp = run_fixed_point(&spec).map_err(|e| e.to_string())?;
        runs += 1;
        worst = worst.min(fp.u.min());
    }
    let detail = format!("{runs} runs, smallest temperature {worst:.3e}");
    if worst >= -1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn small_data_uniqueness() -> Outcome {
    let g = Grid::unit_cube(16).unwrap();
    let model = ConductivityModel::sigmoid(1.0, 3.0, 0.0, 1.0).unwrap();
    let mut checked = 0;
    let mut worst_diff: f64 = 0.0;
    let mut worst_factor: f64 = 0.0;
    for scale in [0.05, 0.1, 0.2, 0.4] {
        let mut a = AppliedField::uniform(g, [0.5 * scale, 0.25 * scale, 0.0]);
        a.psi0 = NodeField::from_fn(g, |x| 0.1 * scale * (3.0 * x[0]).sin() * x[1]);
        let spec = ProblemSpec::new(model.clone(), NodeField::zeros(g), Drive::Electric(a), JouleMode::Divergence, PicardControls::for_grid(&g))
            .unwrap();
        let rep = contraction_probe(&spec, 0.2, 7).map_err(|e| e.to_string())?;
        if rep.threshold.margin.is_none_or(|m| m >= 0.5) {
            continue;
        }
        checked += 1;
        let d = rep.limit_difference.ok_or("probe did not converge")?;
        worst_diff = worst_diff.max(d);
        for f in rep.factors.iter().chain(&rep.perturbed_factors) {
            worst_factor = worst_factor.max(*f);
        }
    }
    let detail = format!("{checked} scales below half threshold, limit difference {worst_diff:.2e}, largest factor {worst_factor:.2e}");
    if checked > 0 && worst_diff <= 1e-8 && worst_factor < 1.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn cell_l2(c: &thermistor_core::CellField) -> f64 {
    let g = c.grid();
    (c.values().iter().map(|v| v * v).sum::<f64>() * g.cell_volume()).sqrt()
}

fn reconstruction() -> Outcome {
    let mut errs = vec![];
    let mut div: f64 = 0.0;
    let mut normal: f64 = 0.0;
    for n in [8, 16, 32] {
        let (j, exact) = swirl_case(n).map_err(|e| e.to_string())?;
        let (h, rep) = reconstruct_h(&j, 1e-11, 200 * 3 * n).map_err(|e| e.to_string())?;
        if !rep.converged {
            return Err(format!("{n}: not converged {rep:?}"));
        }
        let g = *j.grid();
        for d in 0..3 {
            let l = g.faces(d);
            for (f, v) in h.component(d).iter().enumerate() {
                if g.is_boundary_face(d, l.coords(f)) {
                    normal = normal.max(v.abs());
                }
            }
        }
        div = div.max(cell_l2(&div_face(&h)) / face_norm(&h, 2.0));
        errs.push(face_norm(&h.add_scaled(-1.0, &exact), 2.0));
    }
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let detail = format!("orders {orders:.3?}, normal trace {normal:e}, relative div {div:.2e}");
    if orders.iter().all(|o| *o >= 1.8) && normal == 0.0 && div <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn regularity_trend() -> Outcome {
    let model = ConductivityModel::sigmoid(1.0, 3.0, 0.0, 1.0).unwrap();
    let mut values = vec![];
    for n in [16, 32, 64] {
        let g = Grid::unit_cube(n).unwrap();
        let mut a = AppliedField::uniform(g, [0.5, 0.25, 0.0]);
        a.psi0 = NodeField::from_fn(g, |x| {
            0.1 * (std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * x[1]).sin() * (std::f64::consts::PI * x[2]).sin()
        });
        let spec = ProblemSpec::new(model.clone(), NodeField::zeros(g), Drive::Electric(a), JouleMode::Divergence, PicardControls::for_grid(&g))
            .unwrap();
        let fp = run_fixed_point(&spec).map_err(|e| e.to_string())?;
        if !fp.diagnostics.converged() {
            return Err(format!("{n}: not converged"));
        }
        values.push(holder_seminorm(&fp.u, 0.25, 8).map_err(|e| e.to_string())?);
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(0.0, f64::max);
    let variation = hi / lo - 1.0;
    let shown: Vec<String> = values.iter().map(|v| format!("{v:.4e}")).collect();
    let detail = format!("seminorms {}, variation {:.2}%", shown.join(" "), 100.0 * variation);
    if variation <= 0.2 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const DETERMINISM_CONFIG: &str = "\
[grid]
cells = 8
[sigma]
kind = sigmoid
sigma1 = 1
sigma2 = 3
width = 1
[boundary]
mode = electric
e = 0.5 0.25 0
psi0 = 0.1
[output]
vtk = false
raw = false
[study]
scales = 0.1 0.5
random_pairs = 500
grids = 8 12 16
";

fn run_binary(dir: &Path, command: &str, threads: usize) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_thermistor"))
        .arg(command)
        .arg("--config")
        .arg(dir.join("run.conf"))
        .arg("--out")
        .arg(dir.join(format!("{command}-{threads}")))
        .arg("--seed")
        .arg("11")
        .arg("--threads")
        .arg(threads.to_string())
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!("{command} exited with {}", status.status));
    }
    Ok(())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    std::fs::write(dir.path().join("run.conf"), DETERMINISM_CONFIG).map_err(|e| e.to_string())?;
    let mut compared = 0;
    for command in ["solve", "contraction-study", "regularity-study"] {
        for threads in [1, 4] {
            run_binary(dir.path(), command, threads)?;
        }
        let a = dir.path().join(format!("{command}-1"));
        let b = dir.path().join(format!("{command}-4"));
        let mut names: Vec<_> = std::fs::read_dir(&a)
            .map_err(|e| e.to_string())?
            .filter_map(|e| e.ok().map(|e| e.file_name()))
            .filter(|n| n.to_string_lossy().ends_with(".csv"))
            .collect();
        names.sort();
        for n in names {
            let x = std::fs::read(a.join(&n)).map_err(|e| e.to_string())?;
            let y = std::fs::read(b.join(&n)).map_err(|e| e.to_string())?;
            if x != y {
                return Err(format!("{command}/{} differs between runs", n.to_string_lossy()));
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} CSV files byte-identical across repeated runs with 1 and 4 threads"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("structural identities", structural_identities, Duration::from_secs(1)),
        ("oracle equivalence", oracle_equivalence, Duration::from_secs(30)),
        ("manufactured convergence", mms_convergence, Duration::from_secs(300)),
        ("energy estimates", energy_estimates, Duration::from_secs(300)),
        ("maximum principle", maximum_principle, Duration::from_secs(300)),
        ("small-data uniqueness", small_data_uniqueness, Duration::from_secs(120)),
        ("divergence-free reconstruction", reconstruction, Duration::from_secs(300)),
        ("regularity trend", regularity_trend, Duration::from_secs(300)),
        ("determinism", determinism, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(d) if elapsed <= *limit => (true, d),
            Ok(d) => (false, format!("{d}; exceeded {limit:?}")),
            Err(d) => (false, d),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {} {name}: {} ({detail}; {:.2}s)",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
