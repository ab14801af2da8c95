//! Matrix-free preconditioned conjugate gradients for the potential and
//! temperature problems.
//!
//! All three operators have the form `(A x)_n = sum_{e ~ n} c_e (x_n - x_m)`
//! over the edges `e = (n, m)` touching node `n`; they differ only in the edge
//! coefficients and in whether boundary rows are pinned.

use rayon::prelude::*;

use crate::boundary::BoundaryFlux;
use crate::error::{Error, Result};
use crate::mesh::{same_grid, EdgeField, Grid, NodeField};
use crate::ops::div_edge;

/// Outcome of one linear solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    pub operator_applications: usize,
}

/// Relative tolerance and iteration cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverControls {
    pub tol: f64,
    pub max_iter: usize,
}

impl SolverControls {
    pub const DEFAULT_TOL: f64 = 1e-10;

    /// `tol = 1e-10`, `max_iter = 50 (n1 + n2 + n3)`.
    pub fn for_grid(grid: &Grid) -> Self {
        let n = grid.cells();
        Self {
            tol: Self::DEFAULT_TOL,
            max_iter: 50 * (n[0] + n[1] + n[2]),
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "solver tolerance must lie in (0,1), got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

const CHUNK: usize = 4096;

/// Chunked reduction; the summation order is fixed regardless of thread count.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect::<Vec<_>>()
        .iter()
        .sum()
}

fn sum(a: &[f64]) -> f64 {
    a.par_chunks(CHUNK)
        .map(|x| x.iter().sum::<f64>())
        .collect::<Vec<_>>()
        .iter()
        .sum()
}

/// Graph-Laplacian-type operator with per-edge coefficients.
struct EdgeOperator {
    grid: Grid,
    coeff: [Vec<f64>; 3],
    /// Boundary rows (and columns) removed: Dirichlet problems.
    pinned: bool,
}

impl EdgeOperator {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let grid = self.grid;
        let nodes = grid.nodes();
        let cells = grid.cells();
        let edge_layouts = [0, 1, 2].map(|d| grid.edges(d));
        y.par_iter_mut().enumerate().for_each(|(n, yn)| {
            let c = nodes.coords(n);
            if self.pinned && grid.is_boundary_node(c) {
                *yn = 0.0;
                return;
            }
            let xn = x[n];
            let mut acc = 0.0;
            for d in 0..3 {
                let s = nodes.stride(d);
                let el = &edge_layouts[d];
                if c[d] > 0 {
                    let e = el.index(c[0], c[1], c[2]) - el.stride(d);
                    acc += self.coeff[d][e] * (xn - x[n - s]);
                }
                if c[d] < cells[d] {
                    let e = el.index(c[0], c[1], c[2]);
                    acc += self.coeff[d][e] * (xn - x[n + s]);
                }
            }
            *yn = acc;
        });
    }

    fn diagonal(&self) -> Vec<f64> {
        let grid = self.grid;
        let nodes = grid.nodes();
        let cells = grid.cells();
        (0..nodes.len())
            .into_par_iter()
            .map(|n| {
                let c = nodes.coords(n);
                if self.pinned && grid.is_boundary_node(c) {
                    return 1.0;
                }
                let mut acc = 0.0;
                for d in 0..3 {
                    let el = grid.edges(d);
                    if c[d] > 0 {
                        acc += self.coeff[d][el.index(c[0], c[1], c[2]) - el.stride(d)];
                    }
                    if c[d] < cells[d] {
                        acc += self.coeff[d][el.index(c[0], c[1], c[2])];
                    }
                }
                acc
            })
            .collect()
    }
}

fn remove_mean(v: &mut [f64]) {
    let m = sum(v) / v.len() as f64;
    v.par_iter_mut().for_each(|x| *x -= m);
}

/// Preconditioned CG from the initial `x`. Stops when `|b - A x| <= tol * reference`.
/// With `project`, the residual is kept orthogonal to constants (singular Neumann
/// operator whose null space is the constants).
fn pcg(
    op: &EdgeOperator,
    b: &[f64],
    x: &mut [f64],
    reference: f64,
    controls: SolverControls,
    project: bool,
) -> Result<LinearSolveReport> {
    let inv_diag: Vec<f64> = op.diagonal().into_iter().map(|d| 1.0 / d).collect();
    let mut total = LinearSolveReport {
        iterations: 0,
        relative_residual: f64::INFINITY,
        converged: false,
        operator_applications: 0,
    };
    // restart from the true residual when the recursion has drifted
    for _ in 0..=MAX_RESTARTS {
        let remaining = SolverControls {
            max_iter: controls.max_iter - total.iterations,
            ..controls
        };
        let pass = pcg_pass(op, &inv_diag, b, x, reference, remaining, project)?;
        total.iterations += pass.iterations;
        total.operator_applications += pass.operator_applications;
        total.relative_residual = pass.relative_residual;
        total.converged = pass.converged;
        if pass.converged || pass.iterations == 0 || total.iterations >= controls.max_iter {
            break;
        }
    }
    Ok(total)
}

const MAX_RESTARTS: usize = 3;

fn pcg_pass(
    op: &EdgeOperator,
    inv_diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    reference: f64,
    controls: SolverControls,
    project: bool,
) -> Result<LinearSolveReport> {
    let n = b.len();
    let mut applications = 0;
    let mut r = vec![0.0; n];
    op.apply(x, &mut r);
    applications += 1;
    r.par_iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    if project {
        remove_mean(&mut r);
    }
    let threshold = controls.tol * reference;
    let mut rnorm = dot(&r, &r).sqrt();
    if reference == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        rnorm = 0.0;
    }
    if rnorm <= threshold {
        return Ok(LinearSolveReport {
            iterations: 0,
            relative_residual: if reference == 0.0 { 0.0 } else { rnorm / reference },
            converged: true,
            operator_applications: applications,
        });
    }
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, m)| a * m).collect();
    if project {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    while iterations < controls.max_iter {
        op.apply(&p, &mut ap);
        applications += 1;
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return Err(Error::Indefinite {
                iteration: iterations,
                curvature,
            });
        }
        let alpha = rz / curvature;
        x.par_iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= alpha * ai);
        if project {
            remove_mean(&mut r);
        }
        iterations += 1;
        rnorm = dot(&r, &r).sqrt();
        if rnorm <= threshold {
            break;
        }
        z.par_iter_mut()
            .zip(&r)
            .zip(inv_diag)
            .for_each(|((zi, ri), mi)| *zi = ri * mi);
        if project {
            remove_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    // recompute the true residual rather than trusting the recursion
    op.apply(x, &mut ap);
    applications += 1;
    let mut true_r: Vec<f64> = b.iter().zip(&ap).map(|(bi, ai)| bi - ai).collect();
    if project {
        remove_mean(&mut true_r);
    }
    let relative_residual = dot(&true_r, &true_r).sqrt() / reference;
    Ok(LinearSolveReport {
        iterations,
        relative_residual,
        converged: relative_residual <= controls.tol,
        operator_applications: applications,
    })
}

fn check_positive(sigma_e: &EdgeField) -> Result<()> {
    for d in 0..3 {
        if let Some(e) = sigma_e.component(d).iter().position(|v| !(*v > 0.0)) {
            return Err(Error::NonPositiveConductivity {
                index: e,
                value: sigma_e.component(d)[e],
            });
        }
    }
    Ok(())
}

fn dirichlet_operator(sigma_e: &EdgeField) -> EdgeOperator {
    let grid = *sigma_e.grid();
    let h = grid.spacing();
    let coeff = [0, 1, 2].map(|d| {
        let inv = 1.0 / (h[d] * h[d]);
        sigma_e.component(d).iter().map(|s| s * inv).collect()
    });
    EdgeOperator {
        grid,
        coeff,
        pinned: true,
    }
}

fn laplace_operator(grid: Grid) -> EdgeOperator {
    let h = grid.spacing();
    let coeff = [0, 1, 2].map(|d| vec![1.0 / (h[d] * h[d]); grid.edges(d).len()]);
    EdgeOperator {
        grid,
        coeff,
        pinned: true,
    }
}

fn interior_norm(grid: &Grid, v: &[f64]) -> f64 {
    let l = grid.nodes();
    v.iter()
        .enumerate()
        .filter(|(n, _)| !grid.is_boundary_node(l.coords(*n)))
        .map(|(_, x)| x * x)
        .sum::<f64>()
        .sqrt()
}

/// Options for [`solve_weighted_dirichlet_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct PotentialOptions<'a> {
    /// Manufactured source: solves `div(sigma (grad phi + E0)) = source`.
    pub source: Option<&'a NodeField>,
    /// Warm start; boundary entries are ignored.
    pub guess: Option<&'a NodeField>,
}

/// `div(sigma_e (grad phi + E0)) = 0` at interior nodes, `phi = 0` on the boundary.
pub fn solve_weighted_dirichlet(
    sigma_e: &EdgeField,
    e0: &EdgeField,
    controls: SolverControls,
) -> Result<(NodeField, LinearSolveReport)> {
    solve_weighted_dirichlet_with(sigma_e, e0, controls, PotentialOptions::default())
}

pub fn solve_weighted_dirichlet_with(
    sigma_e: &EdgeField,
    e0: &EdgeField,
    controls: SolverControls,
    options: PotentialOptions<'_>,
) -> Result<(NodeField, LinearSolveReport)> {
    controls.validate()?;
    same_grid(sigma_e.grid(), e0.grid())?;
    check_positive(sigma_e)?;
    let grid = *sigma_e.grid();
    // b = div(sigma E0) - f
    let mut b = div_edge(&sigma_e.mul(e0)).into_values();
    if let Some(f) = options.source {
        same_grid(&grid, f.grid())?;
        let l = grid.nodes();
        for (n, (bn, fn_)) in b.iter_mut().zip(f.values()).enumerate() {
            if !grid.is_boundary_node(l.coords(n)) {
                *bn -= fn_;
            }
        }
    }
    let mut x = interior_guess(&grid, options.guess)?;
    let reference = interior_norm(&grid, &b);
    let op = dirichlet_operator(sigma_e);
    let report = pcg(&op, &b, &mut x, reference, controls, false)?;
    Ok((NodeField::from_raw(grid, x), report))
}

fn interior_guess(grid: &Grid, guess: Option<&NodeField>) -> Result<Vec<f64>> {
    let l = grid.nodes();
    match guess {
        None => Ok(vec![0.0; l.len()]),
        Some(g) => {
            same_grid(grid, g.grid())?;
            Ok(g.values()
                .iter()
                .enumerate()
                .map(|(n, &v)| if grid.is_boundary_node(l.coords(n)) { 0.0 } else { v })
                .collect())
        }
    }
}

/// Neumann potential problem `sum_e W_e sigma_e (grad phi)_e (grad v)_e = sum_boundary g v`
/// for all `v`, i.e. `div(sigma grad phi) = 0` with `nu . sigma grad phi = g`.
/// The returned potential has zero weighted mean.
pub fn solve_weighted_neumann(
    sigma_e: &EdgeField,
    flux: &BoundaryFlux,
    controls: SolverControls,
) -> Result<(NodeField, LinearSolveReport)> {
    solve_weighted_neumann_with(sigma_e, flux, controls, None)
}

pub fn solve_weighted_neumann_with(
    sigma_e: &EdgeField,
    flux: &BoundaryFlux,
    controls: SolverControls,
    guess: Option<&NodeField>,
) -> Result<(NodeField, LinearSolveReport)> {
    controls.validate()?;
    same_grid(sigma_e.grid(), flux.grid())?;
    check_positive(sigma_e)?;
    flux.check_compatible()?;
    let grid = *sigma_e.grid();
    let op = neumann_operator(sigma_e);
    let mut b = flux.node_loads();
    remove_mean(&mut b);
    let mut x = match guess {
        Some(g) => {
            same_grid(&grid, g.grid())?;
            g.values().to_vec()
        }
        None => vec![0.0; grid.node_count()],
    };
    let reference = dot(&b, &b).sqrt();
    let report = pcg(&op, &b, &mut x, reference, controls, true)?;
    let phi = NodeField::from_raw(grid, x);
    let mean = crate::quadrature::node_mean(&phi);
    Ok((phi.map(|v| v - mean), report))
}

fn neumann_operator(sigma_e: &EdgeField) -> EdgeOperator {
    let grid = *sigma_e.grid();
    let h = grid.spacing();
    let coeff = [0, 1, 2].map(|d| {
        let l = grid.edges(d);
        sigma_e
            .component(d)
            .iter()
            .enumerate()
            .map(|(e, s)| s * grid.edge_weight(d, l.coords(e)) / (h[d] * h[d]))
            .collect()
    });
    EdgeOperator {
        grid,
        coeff,
        pinned: false,
    }
}

/// `-Lap u = rhs_node + div_edge(rhs_div)` at interior nodes, `u = u0` on the boundary.
pub fn solve_poisson_dirichlet(
    rhs_node: &NodeField,
    rhs_div: Option<&EdgeField>,
    u0: &NodeField,
    controls: SolverControls,
) -> Result<(NodeField, LinearSolveReport)> {
    solve_poisson_dirichlet_with(rhs_node, rhs_div, u0, controls, None)
}

pub fn solve_poisson_dirichlet_with(
    rhs_node: &NodeField,
    rhs_div: Option<&EdgeField>,
    u0: &NodeField,
    controls: SolverControls,
    guess: Option<&NodeField>,
) -> Result<(NodeField, LinearSolveReport)> {
    controls.validate()?;
    same_grid(rhs_node.grid(), u0.grid())?;
    let grid = *rhs_node.grid();
    let l = grid.nodes();
    let mut f = rhs_node.values().to_vec();
    if let Some(q) = rhs_div {
        same_grid(&grid, q.grid())?;
        for (fi, di) in f.iter_mut().zip(div_edge(q).values()) {
            *fi += di;
        }
    }
    let op = laplace_operator(grid);
    // lift: boundary values from u0, interior from the guess (or zero)
    if let Some(g) = guess {
        same_grid(&grid, g.grid())?;
    }
    let lift_with = |interior: Option<&NodeField>| -> Vec<f64> {
        (0..l.len())
            .map(|n| {
                if grid.is_boundary_node(l.coords(n)) {
                    u0.values()[n]
                } else {
                    interior.map_or(0.0, |g| g.values()[n])
                }
            })
            .collect()
    };
    // the pinned operator applied to a lift gives the interior stencil rows
    // including boundary couplings, and zero boundary rows
    let residual_of = |lift: &[f64]| -> Vec<f64> {
        let mut tmp = vec![0.0; l.len()];
        op.apply(lift, &mut tmp);
        (0..l.len())
            .map(|n| if grid.is_boundary_node(l.coords(n)) { 0.0 } else { f[n] - tmp[n] })
            .collect()
    };
    let cold = residual_of(&lift_with(None));
    let reference = interior_norm(&grid, &cold);
    let guess = guess.filter(|_| reference > 0.0);
    let lift = lift_with(guess);
    let b = if guess.is_some() { residual_of(&lift) } else { cold };
    let mut v = vec![0.0; l.len()];
    let mut report = pcg(&op, &b, &mut v, reference, controls, false)?;
    report.operator_applications += 1 + guess.is_some() as usize;
    let u = lift.iter().zip(&v).map(|(a, b)| a + b).collect();
    Ok((NodeField::from_raw(grid, u), report))
}
