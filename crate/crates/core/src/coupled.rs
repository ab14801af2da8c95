//! The fixed-point map `u -> T(u)` and its Picard iteration, plus the div-curl
//! reconstruction of `H` from a converged current.

use crate::boundary::{AppliedField, BoundaryFlux};
use crate::conductivity::{eval_sigma, sigma_to_edges, ConductivityModel};
use crate::diagnostics::energy_ratio;
use crate::error::{Error, Result};
use crate::mesh::{same_grid, EdgeField, FaceField, Grid, NodeField};
use crate::ops::{avg_edge_to_node, curl_face_to_edge, div_edge, div_face, grad};
use crate::quadrature::{edge_norm, node_norm};
use crate::solve::{
    solve_poisson_dirichlet, solve_poisson_dirichlet_with, solve_weighted_dirichlet_with,
    solve_weighted_neumann_with, LinearSolveReport, PotentialOptions, SolverControls,
};

/// Boundary mode of the electromagnetic part.
#[derive(Debug, Clone, PartialEq)]
pub enum Drive {
    /// `nu x (sigma^-1 curl H) = nu x E0`: potential vanishes on the boundary.
    Electric(AppliedField),
    /// `nu x H = nu x H0`: Neumann potential problem with flux `nu . curl H0`.
    Tangential(BoundaryFlux),
}

impl Drive {
    pub fn name(&self) -> &'static str {
        match self {
            Drive::Electric(_) => "electric",
            Drive::Tangential(_) => "tangential",
        }
    }
}

/// Manufactured sources added at interior nodes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Sources {
    /// `div(sigma (grad phi + E0)) = f_phi`.
    pub f_phi: Option<NodeField>,
    /// `-Lap u = joule + f_u`.
    pub f_u: Option<NodeField>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JouleMode {
    /// `div((phi + phi0) J)` on the right-hand side.
    Divergence,
    /// Nodal `sigma^-1 |J|^2` by mean of squares.
    Pointwise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardControls {
    pub tol: f64,
    pub max_iter: usize,
    /// `u_{k+1} = (1 - damping) u_k + damping T(u_k)`.
    pub damping: f64,
    pub linear: SolverControls,
}

impl PicardControls {
    pub const DEFAULT_TOL: f64 = 1e-9;

    pub fn for_grid(grid: &Grid) -> Self {
        Self {
            tol: Self::DEFAULT_TOL,
            max_iter: 100,
            damping: 1.0,
            linear: SolverControls::for_grid(grid),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "damping must lie in (0,1], got {}",
                self.damping
            )));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "picard tolerance must lie in (0,1), got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("picard max_iter must be positive".into()));
        }
        if !(self.linear.tol > 0.0 && self.linear.tol < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "solver tolerance must lie in (0,1), got {}",
                self.linear.tol
            )));
        }
        Ok(())
    }
}

/// A complete steady problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    grid: Grid,
    pub sigma: ConductivityModel,
    /// Boundary temperature; interior entries are ignored.
    pub u0: NodeField,
    pub drive: Drive,
    pub sources: Sources,
    pub joule: JouleMode,
    pub picard: PicardControls,
}

impl ProblemSpec {
    pub fn new(
        sigma: ConductivityModel,
        u0: NodeField,
        drive: Drive,
        joule: JouleMode,
        picard: PicardControls,
    ) -> Result<Self> {
        Self::with_sources(sigma, u0, drive, Sources::default(), joule, picard)
    }

    pub fn with_sources(
        sigma: ConductivityModel,
        u0: NodeField,
        drive: Drive,
        sources: Sources,
        joule: JouleMode,
        picard: PicardControls,
    ) -> Result<Self> {
        let grid = *u0.grid();
        if let Some(i) = u0.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        match &drive {
            Drive::Electric(a) => same_grid(&grid, a.grid())?,
            Drive::Tangential(g) => {
                same_grid(&grid, g.grid())?;
                g.check_compatible()?;
                if sources.f_phi.is_some() {
                    return Err(Error::InvalidModel(
                        "potential sources are supported in electric mode only".into(),
                    ));
                }
            }
        }
        for f in [&sources.f_phi, &sources.f_u].into_iter().flatten() {
            same_grid(&grid, f.grid())?;
        }
        picard.validate()?;
        Ok(Self {
            grid,
            sigma,
            u0,
            drive,
            sources,
            joule,
            picard,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Potential `phi0` with `E0 = grad phi0`; zero in tangential mode.
    pub fn phi0(&self) -> NodeField {
        match &self.drive {
            Drive::Electric(a) => a.potential(),
            Drive::Tangential(_) => NodeField::zeros(self.grid),
        }
    }
}

/// Output of [`potential_solve`].
#[derive(Debug, Clone)]
pub struct PotentialSolution {
    pub phi: NodeField,
    pub current: EdgeField,
    pub sigma_e: EdgeField,
    pub report: LinearSolveReport,
}

pub fn potential_solve(spec: &ProblemSpec, u: &NodeField) -> Result<PotentialSolution> {
    potential_solve_with(spec, u, None)
}

/// Potential and current for the conductivity `sigma(u)`, warm-started from `guess`.
pub fn potential_solve_with(
    spec: &ProblemSpec,
    u: &NodeField,
    guess: Option<&NodeField>,
) -> Result<PotentialSolution> {
    same_grid(spec.grid(), u.grid())?;
    let sigma_e = sigma_to_edges(&eval_sigma(&spec.sigma, u)?)?;
    let linear = spec.picard.linear;
    let (phi, report, current) = match &spec.drive {
        Drive::Electric(applied) => {
            let e0 = applied.edge_field();
            let options = PotentialOptions {
                source: spec.sources.f_phi.as_ref(),
                guess,
            };
            let (phi, report) = solve_weighted_dirichlet_with(&sigma_e, &e0, linear, options)?;
            let current = sigma_e.mul(&grad(&phi).add_scaled(1.0, &e0));
            (phi, report, current)
        }
        Drive::Tangential(flux) => {
            let (phi, report) = solve_weighted_neumann_with(&sigma_e, flux, linear, guess)?;
            let current = sigma_e.mul(&grad(&phi));
            (phi, report, current)
        }
    };
    Ok(PotentialSolution {
        phi,
        current,
        sigma_e,
        report,
    })
}

/// Right-hand side of the temperature equation `-Lap u = node + div_edge(div)`.
#[derive(Debug, Clone)]
pub struct JouleRhs {
    pub node: NodeField,
    pub div: Option<EdgeField>,
}

/// Joule heating from a potential solution. In divergence mode the heating is
/// `div((phi + phi0) J) - (phi + phi0) div J`; the second term vanishes unless a
/// potential source is present.
pub fn joule_rhs(spec: &ProblemSpec, solution: &PotentialSolution) -> Result<JouleRhs> {
    let grid = *spec.grid();
    let f_u = spec.sources.f_u.clone().unwrap_or_else(|| NodeField::zeros(grid));
    match spec.joule {
        JouleMode::Pointwise => {
            let inv = EdgeField::from_components(
                grid,
                solution.sigma_e.components().clone().map(|c| c.into_iter().map(|s| 1.0 / s).collect()),
            )?;
            let density = avg_edge_to_node(&solution.current, Some(&inv))?;
            Ok(JouleRhs {
                node: density.add_scaled(1.0, &f_u),
                div: None,
            })
        }
        JouleMode::Divergence => {
            let psi = solution.phi.add_scaled(1.0, &spec.phi0());
            let nodes = grid.nodes();
            let pv = psi.values();
            let comps = [0, 1, 2].map(|d| {
                let edges = grid.edges(d);
                let s = nodes.stride(d);
                solution
                    .current
                    .component(d)
                    .iter()
                    .enumerate()
                    .map(|(e, j)| {
                        let c = edges.coords(e);
                        let n = nodes.index(c[0], c[1], c[2]);
                        0.5 * (pv[n] + pv[n + s]) * j
                    })
                    .collect()
            });
            let node = match &spec.sources.f_phi {
                Some(f) => NodeField::from_values(
                    grid,
                    f_u.values()
                        .iter()
                        .zip(f.values())
                        .zip(pv)
                        .map(|((a, b), p)| a - p * b)
                        .collect(),
                )?,
                None => f_u,
            };
            Ok(JouleRhs {
                node,
                div: Some(EdgeField::from_components(grid, comps)?),
            })
        }
    }
}

/// One damped application of the fixed-point map.
#[derive(Debug, Clone)]
pub struct PicardStep {
    pub u: NodeField,
    pub potential: PotentialSolution,
    pub temperature: LinearSolveReport,
}

pub fn picard_step(spec: &ProblemSpec, u: &NodeField) -> Result<PicardStep> {
    picard_step_with(spec, u, None, spec.picard.damping)
}

/// `u_next = (1 - damping) u + damping T(u)`, with the potential solve warm-started
/// from `phi_guess`.
pub fn picard_step_with(
    spec: &ProblemSpec,
    u: &NodeField,
    phi_guess: Option<&NodeField>,
    damping: f64,
) -> Result<PicardStep> {
    let potential = potential_solve_with(spec, u, phi_guess)?;
    let rhs = joule_rhs(spec, &potential)?;
    let (tu, temperature) = solve_poisson_dirichlet_with(
        &rhs.node,
        rhs.div.as_ref(),
        &spec.u0,
        spec.picard.linear,
        Some(u),
    )?;
    let grid = *spec.grid();
    let nodes = grid.nodes();
    let next = (0..nodes.len())
        .map(|n| {
            if grid.is_boundary_node(nodes.coords(n)) {
                spec.u0.values()[n]
            } else {
                (1.0 - damping) * u.values()[n] + damping * tu.values()[n]
            }
        })
        .collect();
    Ok(PicardStep {
        u: NodeField::from_values(grid, next)?,
        potential,
        temperature,
    })
}

/// Discrete harmonic extension of the boundary temperature.
pub fn harmonic_extension(spec: &ProblemSpec) -> Result<(NodeField, LinearSolveReport)> {
    let zero = NodeField::zeros(*spec.grid());
    solve_poisson_dirichlet(&zero, None, &spec.u0, spec.picard.linear)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `|u_{k+1} - u_k|_2`.
    pub du: f64,
    /// `|J_{k+1} - J_k|_2`; `NaN` on the first step.
    pub dj: f64,
    /// `du_k / du_{k-1}`; `NaN` on the first step.
    pub contraction: f64,
    pub u_norm: f64,
    pub j_norm: f64,
    /// Energy-bound ratio of the current, when the bound applies.
    pub energy_ratio: Option<f64>,
    pub potential_iterations: usize,
    pub temperature_iterations: usize,
    pub linear_converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PicardStatus {
    Converged,
    MaxIterations,
    LinearSolveFailed,
}

impl PicardStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PicardStatus::Converged => "converged",
            PicardStatus::MaxIterations => "not converged",
            PicardStatus::LinearSolveFailed => "linear solve failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardDiagnostics {
    pub records: Vec<IterationRecord>,
    pub status: PicardStatus,
}

impl PicardDiagnostics {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn converged(&self) -> bool {
        self.status == PicardStatus::Converged
    }
}

#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub u: NodeField,
    pub phi: NodeField,
    pub current: EdgeField,
    pub sigma_e: EdgeField,
    pub diagnostics: PicardDiagnostics,
}

pub fn run_fixed_point(spec: &ProblemSpec) -> Result<FixedPoint> {
    let (start, _) = harmonic_extension(spec)?;
    run_fixed_point_from(spec, start)
}

/// Picard iteration from `start`. Stops when the undamped update
/// `|u_{k+1} - u_k|_2 / damping` falls below `tol (1 + |u_k|_2)`.
pub fn run_fixed_point_from(spec: &ProblemSpec, start: NodeField) -> Result<FixedPoint> {
    same_grid(spec.grid(), start.grid())?;
    let controls = spec.picard;
    let mut u = start;
    let mut phi: Option<NodeField> = None;
    let mut prev_j: Option<EdgeField> = None;
    let mut prev_du = f64::NAN;
    let mut records = Vec::new();
    let mut status = PicardStatus::MaxIterations;
    let mut last: Option<PotentialSolution> = None;
    for iteration in 1..=controls.max_iter {
        let step = picard_step_with(spec, &u, phi.as_ref(), controls.damping)?;
        let du = node_norm(&step.u.add_scaled(-1.0, &u), 2.0);
        let u_norm = node_norm(&u, 2.0);
        let j = &step.potential.current;
        let dj = prev_j
            .as_ref()
            .map_or(f64::NAN, |p| edge_norm(&j.add_scaled(-1.0, p), 2.0));
        let linear_converged = step.potential.report.converged && step.temperature.converged;
        records.push(IterationRecord {
            iteration,
            du,
            dj,
            contraction: du / prev_du,
            u_norm,
            j_norm: edge_norm(j, 2.0),
            energy_ratio: energy_ratio(spec, j),
            potential_iterations: step.potential.report.iterations,
            temperature_iterations: step.temperature.iterations,
            linear_converged,
        });
        prev_du = du;
        prev_j = Some(j.clone());
        phi = Some(step.potential.phi.clone());
        u = step.u;
        last = Some(step.potential);
        if !linear_converged {
            status = PicardStatus::LinearSolveFailed;
            break;
        }
        if du / controls.damping <= controls.tol * (1.0 + u_norm) {
            status = PicardStatus::Converged;
            break;
        }
    }
    let last = last.expect("at least one iteration");
    Ok(FixedPoint {
        u,
        phi: last.phi,
        current: last.current,
        sigma_e: last.sigma_e,
        diagnostics: PicardDiagnostics { records, status },
    })
}

/// Residuals of a reconstructed magnetic field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionReport {
    pub iterations: usize,
    /// `|curl H - J|` over interior edges relative to `|J|`.
    pub curl_residual: f64,
    /// `|div H|` over cells relative to `|H|` (scaled by the smallest spacing).
    pub div_residual: f64,
    pub converged: bool,
}

fn interior_face_mask(grid: &Grid) -> [Vec<bool>; 3] {
    [0, 1, 2].map(|d| {
        let l = grid.faces(d);
        (0..l.len()).map(|f| !grid.is_boundary_face(d, l.coords(f))).collect()
    })
}

fn flat_dot(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .sum()
}

/// Relative size of the interior node divergence of `J`, `h |div J| / |J|`.
pub fn divergence_defect(j: &EdgeField) -> f64 {
    let grid = j.grid();
    let norm = edge_norm(j, 2.0);
    if norm == 0.0 {
        return 0.0;
    }
    grid.min_spacing() * node_norm(&div_edge(j), 2.0) / norm
}

/// Least-squares solution of `curl H = J` on interior edges and `div H = 0` on
/// cells, with `nu . H = 0` imposed by pinning boundary faces. Solved by
/// conjugate gradients on the normal equations (CGLS).
pub fn reconstruct_h(
    j: &EdgeField,
    tol: f64,
    max_iter: usize,
) -> Result<(FaceField, ReconstructionReport)> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "reconstruction tolerance must lie in (0,1), got {tol}"
        )));
    }
    let defect = divergence_defect(j);
    if defect > 1e-8 {
        return Err(Error::NotDivergenceFree { relative: defect });
    }
    let grid = *j.grid();
    let mask = interior_face_mask(&grid);
    let edge_mask: [Vec<bool>; 3] = [0, 1, 2].map(|d| {
        let l = grid.edges(d);
        (0..l.len()).map(|e| !grid.is_boundary_edge(d, l.coords(e))).collect()
    });
    // residual layout: [curl components (interior edges) .., div (cells)]
    let forward = |h: &FaceField| -> Vec<Vec<f64>> {
        let c = curl_face_to_edge(h);
        let mut out: Vec<Vec<f64>> = (0..3).map(|d| c.component(d).to_vec()).collect();
        out.push(div_face(h).values().to_vec());
        out
    };
    let adjoint = |r: &[Vec<f64>]| -> FaceField {
        let mut comps = [0, 1, 2].map(|d| vec![0.0; grid.faces(d).len()]);
        let h = grid.spacing();
        // curl_face_to_edge^T
        for d in 0..3 {
            let (p, q) = ((d + 1) % 3, (d + 2) % 3);
            let el = grid.edges(d);
            let (fp, fq) = (grid.faces(p), grid.faces(q));
            for (e, &v) in r[d].iter().enumerate() {
                if !edge_mask[d][e] || v == 0.0 {
                    continue;
                }
                let c = el.coords(e);
                let mut cp = c;
                cp[p] -= 1;
                let mut cq = c;
                cq[q] -= 1;
                comps[q][fq.index(c[0], c[1], c[2])] += v / h[p];
                comps[q][fq.index(cp[0], cp[1], cp[2])] -= v / h[p];
                comps[p][fp.index(c[0], c[1], c[2])] -= v / h[q];
                comps[p][fp.index(cq[0], cq[1], cq[2])] += v / h[q];
            }
        }
        // div_face^T
        let cells = grid.cell_layout();
        for (n, &v) in r[3].iter().enumerate() {
            let c = cells.coords(n);
            for d in 0..3 {
                let fl = grid.faces(d);
                let mut up = c;
                up[d] += 1;
                comps[d][fl.index(up[0], up[1], up[2])] += v / h[d];
                comps[d][fl.index(c[0], c[1], c[2])] -= v / h[d];
            }
        }
        for d in 0..3 {
            for (x, &keep) in comps[d].iter_mut().zip(&mask[d]) {
                if !keep {
                    *x = 0.0;
                }
            }
        }
        FaceField::from_raw(grid, comps)
    };
    let mut b: Vec<Vec<f64>> = (0..3)
        .map(|d| {
            j.component(d)
                .iter()
                .zip(&edge_mask[d])
                .map(|(v, &keep)| if keep { *v } else { 0.0 })
                .collect()
        })
        .collect();
    b.push(vec![0.0; grid.cell_layout().len()]);
    let b_norm = flat_dot(&b, &b).sqrt();
    let mut x = FaceField::zeros(grid);
    if b_norm == 0.0 {
        return Ok((
            x,
            ReconstructionReport {
                iterations: 0,
                curl_residual: 0.0,
                div_residual: 0.0,
                converged: true,
            },
        ));
    }
    let mut r = b.clone();
    let mut s = adjoint(&r);
    let mut p = s.clone();
    let mut gamma = flat_dot(s.components(), s.components());
    let gamma0 = gamma;
    let mut iterations = 0;
    while iterations < max_iter {
        let q = forward(&p);
        let qq = flat_dot(&q, &q);
        if !(qq > 0.0) {
            break;
        }
        let alpha = gamma / qq;
        x = x.add_scaled(alpha, &p);
        for (ri, qi) in r.iter_mut().zip(&q) {
            for (a, c) in ri.iter_mut().zip(qi) {
                *a -= alpha * c;
            }
        }
        // boundary-edge rows carry no equation
        for d in 0..3 {
            for (a, &keep) in r[d].iter_mut().zip(&edge_mask[d]) {
                if !keep {
                    *a = 0.0;
                }
            }
        }
        iterations += 1;
        if flat_dot(&r, &r).sqrt() <= tol * b_norm {
            break;
        }
        s = adjoint(&r);
        let gamma_new = flat_dot(s.components(), s.components());
        if gamma_new <= (1e-3 * tol).powi(2) * gamma0 {
            break;
        }
        p = s.add_scaled(gamma_new / gamma, &p);
        gamma = gamma_new;
    }
    // true residuals
    let fx = forward(&x);
    let curl_sq: f64 = (0..3)
        .map(|d| {
            fx[d]
                .iter()
                .zip(&b[d])
                .zip(&edge_mask[d])
                .filter(|(_, &keep)| keep)
                .map(|((a, c), _)| (a - c) * (a - c))
                .sum::<f64>()
        })
        .sum();
    let div_sq: f64 = fx[3].iter().map(|v| v * v).sum();
    let h_norm = flat_dot(x.components(), x.components()).sqrt();
    let curl_residual = curl_sq.sqrt() / b_norm;
    let div_residual = if h_norm > 0.0 {
        grid.min_spacing() * div_sq.sqrt() / h_norm
    } else {
        0.0
    };
    Ok((
        x,
        ReconstructionReport {
            iterations,
            curl_residual,
            div_residual,
            converged: (curl_sq + div_sq).sqrt() <= tol * b_norm,
        },
    ))
}
