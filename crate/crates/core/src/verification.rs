//! Manufactured solutions, refinement studies and a dense direct-solve oracle.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

use crate::boundary::AppliedField;
use crate::conductivity::ConductivityModel;
use crate::coupled::{
    run_fixed_point, Drive, JouleMode, PicardControls, ProblemSpec, Sources,
};
use crate::error::{Error, Result};
use crate::mesh::{EdgeField, FaceField, Grid, NodeField};
use crate::quadrature::{edge_norm, node_norm};

/// Names accepted by [`build_case`].
pub const CATALOG: [&str; 3] = ["constant-sigma-uniform", "slab-sigma", "smooth-nonlinear"];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    ConstantUniform,
    Slab,
    SmoothNonlinear,
}

/// A closed-form `(phi*, u*)` on the unit cube with the sources that make it
/// an exact solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedCase {
    pub name: &'static str,
    kind: Kind,
    pub model: ConductivityModel,
    /// Uniform part of `E0`.
    pub field: [f64; 3],
}

// constant-sigma-uniform
const SIGMA0: f64 = 2.0;
const UNIFORM_E: [f64; 3] = [0.3, 0.2, -0.1];
// slab-sigma: sigmoid in u = x1
const SLAB: (f64, f64, f64, f64) = (1.0, 3.0, 0.5, 0.2);
// smooth-nonlinear
const SMOOTH_E: [f64; 3] = [0.5, 0.25, 0.0];

/// Current and magnetic field of the swirl `H = curl(chi e3)` with
/// `chi = sin(pi x) sin(pi y)` on the unit cube, sampled on edges and faces.
/// `H` is divergence free with vanishing normal trace.
pub fn swirl_case(n: usize) -> Result<(EdgeField, FaceField)> {
    let g = Grid::unit_cube(n)?;
    let chi = |x: [f64; 3]| (PI * x[0]).sin() * (PI * x[1]).sin();
    let j = EdgeField::from_fn(g, |d, x| if d == 2 { -2.0 * PI * PI * chi(x) } else { 0.0 });
    let h = FaceField::from_fn(g, |d, x| match d {
        0 => -PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
        1 => PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
        _ => 0.0,
    });
    Ok((j, h))
}

pub fn build_case(name: &str) -> Result<ManufacturedCase> {
    let case = match name {
        "constant-sigma-uniform" => ManufacturedCase {
            name: "constant-sigma-uniform",
            kind: Kind::ConstantUniform,
            model: ConductivityModel::constant(SIGMA0)?,
            field: UNIFORM_E,
        },
        "slab-sigma" => ManufacturedCase {
            name: "slab-sigma",
            kind: Kind::Slab,
            model: ConductivityModel::sigmoid(SLAB.0, SLAB.1, SLAB.2, SLAB.3)?,
            field: [1.0, 0.0, 0.0],
        },
        "smooth-nonlinear" => ManufacturedCase {
            name: "smooth-nonlinear",
            kind: Kind::SmoothNonlinear,
            model: ConductivityModel::sigmoid(1.0, 3.0, 0.0, 1.0)?,
            field: SMOOTH_E,
        },
        other => return Err(Error::UnknownCase(other.to_string())),
    };
    Ok(case)
}

/// `int_0^x dt / sigma(t)` for the logistic slab profile, in closed form:
/// `1/sigma = (1/high - 1/low) d/dz ln(high e^z + low) + 1/low`, `z = (t - c)/w`.
fn slab_resistance(x: f64) -> f64 {
    let (low, high, c, w) = SLAB;
    let prim = |t: f64| {
        let z = (t - c) / w;
        // ln(high e^z + low) without overflow
        let lg = if z > 0.0 {
            z + (high + low * (-z).exp()).ln()
        } else {
            (high * z.exp() + low).ln()
        };
        w * ((1.0 / high - 1.0 / low) * lg + z / low)
    };
    prim(x) - prim(0.0)
}

fn slab_current() -> f64 {
    1.0 / slab_resistance(1.0)
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl ManufacturedCase {
    pub fn exact_phi(&self, x: [f64; 3]) -> f64 {
        match self.kind {
            Kind::ConstantUniform | Kind::Slab => 0.0,
            Kind::SmoothNonlinear => (PI * x[0]).sin() * (PI * x[1]).sin() * (PI * x[2]).sin(),
        }
    }

    pub fn grad_phi(&self, x: [f64; 3]) -> [f64; 3] {
        match self.kind {
            Kind::ConstantUniform | Kind::Slab => [0.0; 3],
            Kind::SmoothNonlinear => {
                let (s, c) = (x.map(|t| (PI * t).sin()), x.map(|t| (PI * t).cos()));
                [PI * c[0] * s[1] * s[2], PI * s[0] * c[1] * s[2], PI * s[0] * s[1] * c[2]]
            }
        }
    }

    pub fn exact_u(&self, x: [f64; 3]) -> f64 {
        match self.kind {
            Kind::ConstantUniform => {
                1.0 + 0.5 * x[1] - 0.25 * x[2]
                    + SIGMA0 * dot(UNIFORM_E, UNIFORM_E) * x[0] * (1.0 - x[0]) / 2.0
            }
            Kind::Slab => x[0],
            Kind::SmoothNonlinear => (PI * x[0]).cos() * (PI * x[1]).cos() * (PI * x[2]).cos(),
        }
    }

    pub fn grad_u(&self, x: [f64; 3]) -> [f64; 3] {
        match self.kind {
            Kind::ConstantUniform => {
                let a = SIGMA0 * dot(UNIFORM_E, UNIFORM_E);
                [a * (0.5 - x[0]), 0.5, -0.25]
            }
            Kind::Slab => [1.0, 0.0, 0.0],
            Kind::SmoothNonlinear => {
                let (s, c) = (x.map(|t| (PI * t).sin()), x.map(|t| (PI * t).cos()));
                [-PI * s[0] * c[1] * c[2], -PI * c[0] * s[1] * c[2], -PI * c[0] * c[1] * s[2]]
            }
        }
    }

    /// Exact `E0` at a point.
    pub fn applied(&self, x: [f64; 3]) -> [f64; 3] {
        match self.kind {
            Kind::Slab => [slab_current() / self.model.eval(x[0]), 0.0, 0.0],
            _ => self.field,
        }
    }

    /// Exact current `sigma(u*) (grad phi* + E0)`.
    pub fn exact_current(&self, x: [f64; 3]) -> [f64; 3] {
        let s = self.model.eval(self.exact_u(x));
        let g = self.grad_phi(x);
        let e = self.applied(x);
        [0, 1, 2].map(|d| s * (g[d] + e[d]))
    }

    /// `div(sigma(u*) (grad phi* + E0))`.
    pub fn f_phi(&self, x: [f64; 3]) -> f64 {
        match self.kind {
            Kind::ConstantUniform | Kind::Slab => 0.0,
            Kind::SmoothNonlinear => {
                let u = self.exact_u(x);
                let g = self.grad_phi(x);
                let e = self.field;
                let flux = [g[0] + e[0], g[1] + e[1], g[2] + e[2]];
                self.model.derivative(u) * dot(self.grad_u(x), flux)
                    - 3.0 * PI * PI * self.model.eval(u) * self.exact_phi(x)
            }
        }
    }

    /// `-Lap u* - sigma(u*) |grad phi* + E0|^2`.
    pub fn f_u(&self, x: [f64; 3]) -> f64 {
        let j = self.exact_current(x);
        let joule = dot(j, j) / self.model.eval(self.exact_u(x));
        let lap = match self.kind {
            Kind::ConstantUniform => -SIGMA0 * dot(UNIFORM_E, UNIFORM_E),
            Kind::Slab => 0.0,
            Kind::SmoothNonlinear => -3.0 * PI * PI * self.exact_u(x),
        };
        -lap - joule
    }

    fn has_sources(&self) -> bool {
        !matches!(self.kind, Kind::ConstantUniform)
    }

    /// Discrete problem on an `n^3` unit cube.
    pub fn spec(&self, n: usize, joule: JouleMode) -> Result<ProblemSpec> {
        let grid = Grid::unit_cube(n)?;
        let applied = match self.kind {
            Kind::Slab => {
                let jbar = slab_current();
                AppliedField {
                    psi0: NodeField::from_fn(grid, |x| jbar * slab_resistance(x[0]) - x[0]),
                    uniform: self.field,
                }
            }
            _ => AppliedField::uniform(grid, self.field),
        };
        let sources = if self.has_sources() {
            Sources {
                f_phi: matches!(self.kind, Kind::SmoothNonlinear)
                    .then(|| NodeField::from_fn(grid, |x| self.f_phi(x))),
                f_u: Some(NodeField::from_fn(grid, |x| self.f_u(x))),
            }
        } else {
            Sources::default()
        };
        let mut picard = PicardControls::for_grid(&grid);
        picard.tol = 1e-10;
        ProblemSpec::with_sources(
            self.model.clone(),
            NodeField::from_fn(grid, |x| self.exact_u(x)),
            Drive::Electric(applied),
            sources,
            joule,
            picard,
        )
    }
}

/// Errors of one run against the manufactured truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub cells: usize,
    pub h: f64,
    pub u_l2: f64,
    pub u_max: f64,
    pub phi_l2: f64,
    pub phi_max: f64,
    pub j_l2: f64,
    pub j_max: f64,
    pub iterations: usize,
    /// Picard converged with every inner solve converged.
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub case: &'static str,
    pub rows: Vec<ConvergenceRow>,
}

/// `log2(e_coarse / e_fine)` between consecutive rows for each error column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderRow {
    pub u_l2: f64,
    pub u_max: f64,
    pub phi_l2: f64,
    pub phi_max: f64,
    pub j_l2: f64,
    pub j_max: f64,
}

fn order(a: f64, b: f64) -> f64 {
    (a / b).log2()
}

impl ConvergenceTable {
    pub fn orders(&self) -> Vec<OrderRow> {
        self.rows
            .windows(2)
            .map(|w| OrderRow {
                u_l2: order(w[0].u_l2, w[1].u_l2),
                u_max: order(w[0].u_max, w[1].u_max),
                phi_l2: order(w[0].phi_l2, w[1].phi_l2),
                phi_max: order(w[0].phi_max, w[1].phi_max),
                j_l2: order(w[0].j_l2, w[1].j_l2),
                j_max: order(w[0].j_max, w[1].j_max),
            })
            .collect()
    }
}

pub fn convergence_study(
    case: &ManufacturedCase,
    grids: &[usize],
    joule: JouleMode,
) -> Result<ConvergenceTable> {
    if grids.len() < 3 || grids.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::InvalidParameter(format!(
            "a study needs at least three doubling grids, got {grids:?}"
        )));
    }
    let mut rows = vec![];
    for &n in grids {
        let spec = case.spec(n, joule)?;
        let grid = *spec.grid();
        let fp = run_fixed_point(&spec)?;
        let u_err = fp.u.add_scaled(-1.0, &NodeField::from_fn(grid, |x| case.exact_u(x)));
        let phi_err = fp.phi.add_scaled(-1.0, &NodeField::from_fn(grid, |x| case.exact_phi(x)));
        let j_err = fp
            .current
            .add_scaled(-1.0, &EdgeField::from_fn(grid, |d, x| case.exact_current(x)[d]));
        let valid = fp.diagnostics.converged()
            && fp.diagnostics.records.iter().all(|r| r.linear_converged);
        rows.push(ConvergenceRow {
            cells: n,
            h: 1.0 / n as f64,
            u_l2: node_norm(&u_err, 2.0),
            u_max: u_err.max_abs(),
            phi_l2: node_norm(&phi_err, 2.0),
            phi_max: phi_err.max_abs(),
            j_l2: edge_norm(&j_err, 2.0),
            j_max: j_err.max_abs(),
            iterations: fp.diagnostics.iterations(),
            valid,
        });
    }
    Ok(ConvergenceTable {
        case: case.name,
        rows,
    })
}

/// Largest grid the dense oracle accepts.
pub const DENSE_LIMIT: usize = 5000;

/// One Picard step computed by assembling every operator as a dense matrix and
/// factorizing directly. Returns `(phi, u_next)`.
pub fn dense_oracle(spec: &ProblemSpec, u: &NodeField) -> Result<(NodeField, NodeField)> {
    let grid = *spec.grid();
    let [n0, n1, n2] = grid.cells();
    let (d0, d1, d2) = (n0 + 1, n1 + 1, n2 + 1);
    let total = d0 * d1 * d2;
    if total > DENSE_LIMIT {
        return Err(Error::TooLarge { nodes: total, limit: DENSE_LIMIT });
    }
    let h = grid.spacing();
    let id = |i: usize, j: usize, k: usize| i + d0 * (j + d1 * k);
    let boundary = |i: usize, j: usize, k: usize| i == 0 || j == 0 || k == 0 || i == n0 || j == n1 || k == n2;
    let sig: Vec<f64> = u.values().iter().map(|&s| spec.sigma.eval(s)).collect();
    // edges as (from, to, axis, midpoint index coords)
    let mut edges = vec![];
    for k in 0..d2 {
        for j in 0..d1 {
            for i in 0..d0 {
                let a = id(i, j, k);
                if i < n0 {
                    edges.push((a, id(i + 1, j, k), 0, [i, j, k]));
                }
                if j < n1 {
                    edges.push((a, id(i, j + 1, k), 1, [i, j, k]));
                }
                if k < n2 {
                    edges.push((a, id(i, j, k + 1), 2, [i, j, k]));
                }
            }
        }
    }
    let harmonic = |a: usize, b: usize| 2.0 * sig[a] * sig[b] / (sig[a] + sig[b]);
    let phi0 = spec.phi0();
    let e0: Vec<f64> = edges
        .iter()
        .map(|&(a, b, d, _)| (phi0.values()[b] - phi0.values()[a]) / h[d])
        .collect();
    let electric = matches!(spec.drive, Drive::Electric(_));

    // potential
    let phi: Vec<f64> = if electric {
        let mut m = DMatrix::<f64>::zeros(total, total);
        let mut b = DVector::<f64>::zeros(total);
        for (e, &(p, q, d, _)) in edges.iter().enumerate() {
            let c = harmonic(p, q) / (h[d] * h[d]);
            // row p: + sigma (phi_q - phi_p + h E)/h^2 contributes to div
            for (row, other, sign) in [(p, q, 1.0), (q, p, -1.0)] {
                m[(row, row)] += c;
                m[(row, other)] -= c;
                b[row] += sign * c * h[d] * e0[e];
            }
        }
        for k in 0..d2 {
            for j in 0..d1 {
                for i in 0..d0 {
                    let n = id(i, j, k);
                    if boundary(i, j, k) {
                        m.row_mut(n).fill(0.0);
                        m[(n, n)] = 1.0;
                        b[n] = 0.0;
                    } else if let Some(f) = &spec.sources.f_phi {
                        b[n] -= f.values()[n];
                    }
                }
            }
        }
        // the boundary columns multiply zero values
        m.lu().solve(&b).ok_or(Error::Singular)?.iter().cloned().collect()
    } else {
        let Drive::Tangential(flux) = &spec.drive else { unreachable!() };
        // bordered system with the weighted-mean constraint
        let mut m = DMatrix::<f64>::zeros(total + 1, total + 1);
        let mut b = DVector::<f64>::zeros(total + 1);
        for &(p, q, d, c) in &edges {
            let w = grid.edge_weight(d, c);
            let s = harmonic(p, q) * w / (h[d] * h[d]);
            m[(p, p)] += s;
            m[(q, q)] += s;
            m[(p, q)] -= s;
            m[(q, p)] -= s;
        }
        for (n, l) in flux.node_loads().iter().enumerate() {
            b[n] = *l;
        }
        for k in 0..d2 {
            for j in 0..d1 {
                for i in 0..d0 {
                    let n = id(i, j, k);
                    let w = grid.node_weight([i, j, k]);
                    m[(total, n)] = w;
                    m[(n, total)] = w;
                }
            }
        }
        let x = m.lu().solve(&b).ok_or(Error::Singular)?;
        x.iter().take(total).cloned().collect()
    };
    let current: Vec<f64> = edges
        .iter()
        .enumerate()
        .map(|(e, &(p, q, d, _))| {
            let field = if electric { e0[e] } else { 0.0 };
            harmonic(p, q) * ((phi[q] - phi[p]) / h[d] + field)
        })
        .collect();

    // joule heating
    let mut rhs = match &spec.sources.f_u {
        Some(f) => f.values().to_vec(),
        None => vec![0.0; total],
    };
    match spec.joule {
        JouleMode::Pointwise => {
            let mut sum = vec![[0.0f64; 3]; total];
            let mut count = vec![[0.0f64; 3]; total];
            for (e, &(p, q, d, _)) in edges.iter().enumerate() {
                let v = current[e] * current[e] / harmonic(p, q);
                for n in [p, q] {
                    sum[n][d] += v;
                    count[n][d] += 1.0;
                }
            }
            for n in 0..total {
                rhs[n] += (0..3).map(|d| sum[n][d] / count[n][d]).sum::<f64>();
            }
        }
        JouleMode::Divergence => {
            let psi: Vec<f64> = phi.iter().zip(phi0.values()).map(|(a, b)| a + b).collect();
            for (e, &(p, q, d, _)) in edges.iter().enumerate() {
                let flux = 0.5 * (psi[p] + psi[q]) * current[e] / h[d];
                rhs[p] += flux;
                rhs[q] -= flux;
            }
            if let Some(f) = &spec.sources.f_phi {
                for n in 0..total {
                    rhs[n] -= psi[n] * f.values()[n];
                }
            }
        }
    }

    // temperature
    let mut m = DMatrix::<f64>::zeros(total, total);
    let mut b = DVector::<f64>::zeros(total);
    for k in 0..d2 {
        for j in 0..d1 {
            for i in 0..d0 {
                let n = id(i, j, k);
                if boundary(i, j, k) {
                    m[(n, n)] = 1.0;
                    b[n] = spec.u0.values()[n];
                    continue;
                }
                b[n] = rhs[n];
                let c = [i, j, k];
                for d in 0..3 {
                    let inv = 1.0 / (h[d] * h[d]);
                    let mut lo = c;
                    lo[d] -= 1;
                    let mut hi = c;
                    hi[d] += 1;
                    m[(n, n)] += 2.0 * inv;
                    m[(n, id(lo[0], lo[1], lo[2]))] -= inv;
                    m[(n, id(hi[0], hi[1], hi[2]))] -= inv;
                }
            }
        }
    }
    let tu = m.lu().solve(&b).ok_or(Error::Singular)?;
    let theta = spec.picard.damping;
    let next: Vec<f64> = (0..total)
        .map(|n| {
            let c = grid.nodes().coords(n);
            if boundary(c[0], c[1], c[2]) {
                spec.u0.values()[n]
            } else {
                (1.0 - theta) * u.values()[n] + theta * tu[n]
            }
        })
        .collect();
    Ok((NodeField::from_values(grid, phi)?, NodeField::from_values(grid, next)?))
}

/// Sixth-order central first derivative along `axis`.
pub fn fd6_first(f: &dyn Fn([f64; 3]) -> f64, x: [f64; 3], axis: usize, step: f64) -> f64 {
    const C: [f64; 3] = [45.0, -9.0, 1.0];
    let mut acc = 0.0;
    for (m, c) in C.iter().enumerate() {
        let s = (m + 1) as f64 * step;
        let mut p = x;
        p[axis] += s;
        let mut q = x;
        q[axis] -= s;
        acc += c * (f(p) - f(q));
    }
    acc / (60.0 * step)
}

/// Sixth-order central second derivative along `axis`.
pub fn fd6_second(f: &dyn Fn([f64; 3]) -> f64, x: [f64; 3], axis: usize, step: f64) -> f64 {
    const C: [f64; 3] = [270.0, -27.0, 2.0];
    let mut acc = -490.0 * f(x);
    for (m, c) in C.iter().enumerate() {
        let s = (m + 1) as f64 * step;
        let mut p = x;
        p[axis] += s;
        let mut q = x;
        q[axis] -= s;
        acc += c * (f(p) + f(q));
    }
    acc / (180.0 * step * step)
}
