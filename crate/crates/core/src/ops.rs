//! Mimetic difference operators on the staggered grid.
//!
//! The primal chain `grad: nodes -> edges`, `curl_edge_to_face: edges -> faces`,
//! `div_face: faces -> cells` satisfies `curl . grad = 0` and `div . curl = 0`
//! exactly. The dual operators `curl_face_to_edge` and `div_edge` are the
//! (negative) transposes on interior entities, so `div_edge . curl_face_to_edge = 0`
//! at every interior node.

use crate::error::Result;
use crate::mesh::{same_grid, CellField, EdgeField, FaceField, Grid, Layout, NodeField};

/// Boundary flags for every node, edge and face of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMask {
    pub nodes: Vec<bool>,
    pub edges: [Vec<bool>; 3],
    pub faces: [Vec<bool>; 3],
}

impl BoundaryMask {
    pub fn new(grid: &Grid) -> Self {
        let nl = grid.nodes();
        let nodes = (0..nl.len())
            .map(|n| grid.is_boundary_node(nl.coords(n)))
            .collect();
        let edges = [0, 1, 2].map(|d| {
            let l = grid.edges(d);
            (0..l.len())
                .map(|e| grid.is_boundary_edge(d, l.coords(e)))
                .collect()
        });
        let faces = [0, 1, 2].map(|d| {
            let l = grid.faces(d);
            (0..l.len())
                .map(|f| grid.is_boundary_face(d, l.coords(f)))
                .collect()
        });
        Self {
            nodes,
            edges,
            faces,
        }
    }
}

#[inline]
fn shifted(c: [usize; 3], axis: usize) -> [usize; 3] {
    let mut s = c;
    s[axis] += 1;
    s
}

#[inline]
fn back(c: [usize; 3], axis: usize) -> [usize; 3] {
    let mut s = c;
    s[axis] -= 1;
    s
}

#[inline]
fn at(l: &Layout, c: [usize; 3]) -> usize {
    l.index(c[0], c[1], c[2])
}

/// Two-point difference along each edge.
pub fn grad(phi: &NodeField) -> EdgeField {
    let grid = *phi.grid();
    let h = grid.spacing();
    let nodes = grid.nodes();
    let v = phi.values();
    let comps = [0, 1, 2].map(|d| {
        let edges = grid.edges(d);
        let step = nodes.stride(d);
        (0..edges.len())
            .map(|e| {
                let n = at(&nodes, edges.coords(e));
                (v[n + step] - v[n]) / h[d]
            })
            .collect()
    });
    EdgeField::from_raw(grid, comps)
}

/// Node divergence of an edge field at interior nodes; boundary entries are zero.
pub fn div_edge(j: &EdgeField) -> NodeField {
    let grid = *j.grid();
    let h = grid.spacing();
    let nodes = grid.nodes();
    let values = (0..nodes.len())
        .map(|n| {
            let c = nodes.coords(n);
            if grid.is_boundary_node(c) {
                return 0.0;
            }
            (0..3)
                .map(|d| {
                    let edges = grid.edges(d);
                    let comp = j.component(d);
                    (comp[at(&edges, c)] - comp[at(&edges, back(c, d))]) / h[d]
                })
                .sum()
        })
        .collect();
    NodeField::from_raw(grid, values)
}

/// Primal circulation: edge field to face field.
pub fn curl_edge_to_face(a: &EdgeField) -> FaceField {
    let grid = *a.grid();
    let h = grid.spacing();
    let comps = [0, 1, 2].map(|d| {
        let (p, q) = ((d + 1) % 3, (d + 2) % 3);
        let faces = grid.faces(d);
        let (ep, eq) = (grid.edges(p), grid.edges(q));
        let (ap, aq) = (a.component(p), a.component(q));
        (0..faces.len())
            .map(|f| {
                let c = faces.coords(f);
                (aq[at(&eq, shifted(c, p))] - aq[at(&eq, c)]) / h[p]
                    - (ap[at(&ep, shifted(c, q))] - ap[at(&ep, c)]) / h[q]
            })
            .collect()
    });
    FaceField::from_raw(grid, comps)
}

/// Dual circulation: face field to edge field on interior edges. Edges lying in a
/// boundary plane are missing half their faces and are set to zero.
pub fn curl_face_to_edge(hf: &FaceField) -> EdgeField {
    let grid = *hf.grid();
    let h = grid.spacing();
    let comps = [0, 1, 2].map(|d| {
        let (p, q) = ((d + 1) % 3, (d + 2) % 3);
        let edges = grid.edges(d);
        let (fp, fq) = (grid.faces(p), grid.faces(q));
        let (hp, hq) = (hf.component(p), hf.component(q));
        (0..edges.len())
            .map(|e| {
                let c = edges.coords(e);
                if grid.is_boundary_edge(d, c) {
                    return 0.0;
                }
                (hq[at(&fq, c)] - hq[at(&fq, back(c, p))]) / h[p]
                    - (hp[at(&fp, c)] - hp[at(&fp, back(c, q))]) / h[q]
            })
            .collect()
    });
    EdgeField::from_raw(grid, comps)
}

/// Cell divergence of a face field.
pub fn div_face(hf: &FaceField) -> CellField {
    let grid = *hf.grid();
    let h = grid.spacing();
    let cells = grid.cell_layout();
    let values = (0..cells.len())
        .map(|n| {
            let c = cells.coords(n);
            (0..3)
                .map(|d| {
                    let faces = grid.faces(d);
                    let comp = hf.component(d);
                    (comp[at(&faces, shifted(c, d))] - comp[at(&faces, c)]) / h[d]
                })
                .sum()
        })
        .collect();
    CellField::from_raw(grid, values)
}

/// Seven-point `-Laplacian` at interior nodes; boundary rows are the identity
/// rows of the pinned system, returned as the residual `u - u0`.
pub fn laplacian_dirichlet(u: &NodeField, u0: &NodeField) -> Result<NodeField> {
    same_grid(u.grid(), u0.grid())?;
    let grid = *u.grid();
    let nodes = grid.nodes();
    let inv_h2 = grid.spacing().map(|h| 1.0 / (h * h));
    let v = u.values();
    let b = u0.values();
    let values = (0..nodes.len())
        .map(|n| {
            let c = nodes.coords(n);
            if grid.is_boundary_node(c) {
                return v[n] - b[n];
            }
            (0..3)
                .map(|d| {
                    let s = nodes.stride(d);
                    (2.0 * v[n] - v[n + s] - v[n - s]) * inv_h2[d]
                })
                .sum()
        })
        .collect();
    Ok(NodeField::from_raw(grid, values))
}

/// Mean of squares over the adjacent edges of each direction, summed over
/// directions. With `weights`, each square is multiplied by the edge weight first
/// (pass `1/sigma_e` to obtain the nodal Joule density from a current).
pub fn avg_edge_to_node(q: &EdgeField, weights: Option<&EdgeField>) -> Result<NodeField> {
    let grid = *q.grid();
    if let Some(w) = weights {
        same_grid(&grid, w.grid())?;
    }
    let nodes = grid.nodes();
    let cells = grid.cells();
    let values = (0..nodes.len())
        .map(|n| {
            let c = nodes.coords(n);
            let mut total = 0.0;
            for d in 0..3 {
                let edges = grid.edges(d);
                let comp = q.component(d);
                let mut sum = 0.0;
                let mut count = 0.0;
                let mut add = |cc: [usize; 3]| {
                    let e = at(&edges, cc);
                    let w = weights.map_or(1.0, |w| w.component(d)[e]);
                    sum += w * comp[e] * comp[e];
                    count += 1.0;
                };
                if c[d] > 0 {
                    add(back(c, d));
                }
                if c[d] < cells[d] {
                    add(c);
                }
                total += sum / count;
            }
            total
        })
        .collect();
    Ok(NodeField::from_raw(grid, values))
}

/// Arithmetic mean of each component over adjacent edges, one node field per
/// component. Used only for visualization.
pub fn edge_field_at_nodes(q: &EdgeField) -> [NodeField; 3] {
    let grid = *q.grid();
    let nodes = grid.nodes();
    let cells = grid.cells();
    [0, 1, 2].map(|d| {
        let edges = grid.edges(d);
        let comp = q.component(d);
        let values = (0..nodes.len())
            .map(|n| {
                let c = nodes.coords(n);
                match (c[d] > 0, c[d] < cells[d]) {
                    (true, true) => 0.5 * (comp[at(&edges, back(c, d))] + comp[at(&edges, c)]),
                    (true, false) => comp[at(&edges, back(c, d))],
                    _ => comp[at(&edges, c)],
                }
            })
            .collect();
        NodeField::from_raw(grid, values)
    })
}

/// Arithmetic mean of each component over the faces touching a node.
pub fn face_field_at_nodes(hf: &FaceField) -> [NodeField; 3] {
    let grid = *hf.grid();
    let nodes = grid.nodes();
    let cells = grid.cells();
    [0, 1, 2].map(|d| {
        let faces = grid.faces(d);
        let comp = hf.component(d);
        let (p, q) = ((d + 1) % 3, (d + 2) % 3);
        let values = (0..nodes.len())
            .map(|n| {
                let c = nodes.coords(n);
                let mut sum = 0.0;
                let mut count = 0.0;
                for sp in [0usize, 1] {
                    for sq in [0usize, 1] {
                        if (sp == 1 && c[p] == 0) || (sp == 0 && c[p] == cells[p]) {
                            continue;
                        }
                        if (sq == 1 && c[q] == 0) || (sq == 0 && c[q] == cells[q]) {
                            continue;
                        }
                        let mut f = c;
                        f[p] -= sp;
                        f[q] -= sq;
                        sum += comp[at(&faces, f)];
                        count += 1.0;
                    }
                }
                sum / count
            })
            .collect();
        NodeField::from_raw(grid, values)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{edge_inner, node_inner};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_nodes(grid: Grid, rng: &mut ChaCha8Rng, zero_boundary: bool) -> NodeField {
        let l = grid.nodes();
        let v = (0..l.len())
            .map(|n| {
                if zero_boundary && grid.is_boundary_node(l.coords(n)) {
                    0.0
                } else {
                    rng.gen_range(-1.0..1.0)
                }
            })
            .collect();
        NodeField::from_values(grid, v).unwrap()
    }

    fn random_edges(grid: Grid, rng: &mut ChaCha8Rng) -> EdgeField {
        EdgeField::from_fn(grid, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn random_faces(grid: Grid, rng: &mut ChaCha8Rng) -> FaceField {
        FaceField::from_fn(grid, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn grad_of_constant_and_linear() {
        let g = Grid::unit_cube(4).unwrap();
        assert_eq!(grad(&NodeField::constant(g, 3.0)).max_abs(), 0.0);
        let e = grad(&NodeField::from_fn(g, |x| x[0]));
        for d in 0..3 {
            let expect = if d == 0 { 1.0 } else { 0.0 };
            assert!(e.component(d).iter().all(|&v| (v - expect).abs() < 1e-14));
        }
    }

    #[test]
    fn grad_of_bilinear_is_exact_at_midpoints() {
        let g = Grid::unit_cube(4).unwrap();
        let e = grad(&NodeField::from_fn(g, |x| x[0] * x[1]));
        let exact = EdgeField::from_fn(g, |d, x| match d {
            0 => x[1],
            1 => x[0],
            _ => 0.0,
        });
        assert!(e.add_scaled(-1.0, &exact).max_abs() < 1e-14);
    }

    #[test]
    fn div_of_constant_and_second_difference() {
        let g = Grid::unit_cube(5).unwrap();
        assert_eq!(div_edge(&EdgeField::uniform(g, [1.0, -2.0, 0.5])).max_abs(), 0.0);
        let d = div_edge(&grad(&NodeField::from_fn(g, |x| x[0] * x[0])));
        let l = g.nodes();
        for n in 0..l.len() {
            let expect = if g.is_boundary_node(l.coords(n)) { 0.0 } else { 2.0 };
            assert!((d.values()[n] - expect).abs() < 1e-11);
        }
    }

    #[test]
    fn div_is_negative_adjoint_of_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [2, 3, 5] {
            let g = Grid::new([1.0, 0.7, 1.3], [n, n + 1, n]).unwrap();
            let phi = random_nodes(g, &mut rng, true);
            let j = random_edges(g, &mut rng);
            let lhs = edge_inner(&grad(&phi), &j);
            let rhs = node_inner(&phi, &div_edge(&j));
            let scale = crate::quadrature::edge_norm(&grad(&phi), 2.0)
                * crate::quadrature::edge_norm(&j, 2.0);
            assert!((lhs + rhs).abs() <= 1e-13 * scale, "{lhs} {rhs}");
        }
    }

    #[test]
    fn structural_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [2, 3, 4, 7] {
            let g = Grid::new([1.0, 2.0, 0.5], [n, n + 1, n + 2]).unwrap();
            let psi = random_nodes(g, &mut rng, false);
            let cg = curl_edge_to_face(&grad(&psi));
            assert!(cg.max_abs() <= 1e-13 * grad(&psi).max_abs() / g.min_spacing());

            let a = random_edges(g, &mut rng);
            let dc = div_face(&curl_edge_to_face(&a));
            assert!(dc.max_abs() <= 1e-13 * a.max_abs() / g.min_spacing().powi(2));

            let hf = random_faces(g, &mut rng);
            let dd = div_edge(&curl_face_to_edge(&hf));
            assert!(dd.max_abs() <= 1e-13 * hf.max_abs() / g.min_spacing().powi(2));
        }
        let g = Grid::unit_cube(3).unwrap();
        assert_eq!(curl_edge_to_face(&EdgeField::zeros(g)).max_abs(), 0.0);
        assert_eq!(curl_face_to_edge(&FaceField::uniform(g, [1.0, 2.0, 3.0])).max_abs(), 0.0);
    }

    #[test]
    fn dual_curl_is_transpose_of_primal_curl_on_interior() {
        // <C a, H> over interior faces == <a, C* H> over interior edges when `a`
        // vanishes on boundary-plane edges and H vanishes on boundary faces.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = Grid::new([1.0, 1.0, 1.0], [3, 4, 5]).unwrap();
        let a = EdgeField::from_fn(g, |_, _| rng.gen_range(-1.0..1.0));
        let a = {
            let mask = BoundaryMask::new(&g);
            let comps = [0, 1, 2].map(|d| {
                a.component(d)
                    .iter()
                    .zip(&mask.edges[d])
                    .map(|(v, &b)| if b { 0.0 } else { *v })
                    .collect()
            });
            EdgeField::from_components(g, comps).unwrap()
        };
        let mask = BoundaryMask::new(&g);
        let hf = FaceField::from_fn(g, |_, _| rng.gen_range(-1.0..1.0));
        let comps = [0, 1, 2].map(|d| {
            hf.component(d)
                .iter()
                .zip(&mask.faces[d])
                .map(|(v, &b)| if b { 0.0 } else { *v })
                .collect()
        });
        let hf = FaceField::from_components(g, comps).unwrap();
        let ca = curl_edge_to_face(&a);
        let lhs: f64 = (0..3)
            .map(|d| ca.component(d).iter().zip(hf.component(d)).map(|(x, y)| x * y).sum::<f64>())
            .sum();
        let ch = curl_face_to_edge(&hf);
        let rhs: f64 = (0..3)
            .map(|d| a.component(d).iter().zip(ch.component(d)).map(|(x, y)| x * y).sum::<f64>())
            .sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn laplacian_exactness() {
        let g = Grid::unit_cube(6).unwrap();
        let u = NodeField::from_fn(g, |x| 0.5 * x[0] * (1.0 - x[0]));
        let r = laplacian_dirichlet(&u, &u).unwrap();
        let l = g.nodes();
        for n in 0..l.len() {
            let expect = if g.is_boundary_node(l.coords(n)) { 0.0 } else { 1.0 };
            assert!((r.values()[n] - expect).abs() < 1e-11);
        }
        let lin = NodeField::from_fn(g, |x| 2.0 * x[0] - x[1] + 0.3 * x[2] + 1.0);
        assert!(laplacian_dirichlet(&lin, &lin).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn laplacian_matches_dense_stencil() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = Grid::new([1.0, 2.0, 1.5], [3, 3, 3]).unwrap();
        let u = random_nodes(g, &mut rng, false);
        let u0 = random_nodes(g, &mut rng, false);
        let r = laplacian_dirichlet(&u, &u0).unwrap();
        let h = g.spacing();
        let l = g.nodes();
        let nn = l.len();
        // dense matrix with identity boundary rows
        let mut a = vec![vec![0.0; nn]; nn];
        let mut b = vec![0.0; nn];
        for n in 0..nn {
            let c = l.coords(n);
            if g.is_boundary_node(c) {
                a[n][n] = 1.0;
                b[n] = u0.values()[n];
                continue;
            }
            for d in 0..3 {
                let s = l.stride(d);
                a[n][n] += 2.0 / (h[d] * h[d]);
                a[n][n + s] -= 1.0 / (h[d] * h[d]);
                a[n][n - s] -= 1.0 / (h[d] * h[d]);
            }
        }
        for n in 0..nn {
            let au: f64 = (0..nn).map(|m| a[n][m] * u.values()[m]).sum();
            assert!((au - b[n] - r.values()[n]).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_is_spd_on_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Grid::unit_cube(5).unwrap();
        let zero = NodeField::zeros(g);
        for _ in 0..10 {
            let u = random_nodes(g, &mut rng, true);
            let v = random_nodes(g, &mut rng, true);
            let lu = laplacian_dirichlet(&u, &zero).unwrap();
            let lv = laplacian_dirichlet(&v, &zero).unwrap();
            let a = node_inner(&lu, &v);
            let b = node_inner(&u, &lv);
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
            assert!(node_inner(&lu, &u) > 0.0);
        }
    }

    #[test]
    fn joule_average() {
        let g = Grid::unit_cube(3).unwrap();
        let e = [0.3, -1.0, 2.0];
        let q = avg_edge_to_node(&EdgeField::uniform(g, e), None).unwrap();
        let expect = e.iter().map(|v| v * v).sum::<f64>();
        assert!(q.values().iter().all(|v| (v - expect).abs() < 1e-14));
        assert_eq!(avg_edge_to_node(&EdgeField::zeros(g), None).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn joule_average_matches_direct_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = Grid::unit_cube(2).unwrap();
        let q = random_edges(g, &mut rng);
        let w = EdgeField::from_fn(g, |_, _| rng.gen_range(0.5..2.0));
        let r = avg_edge_to_node(&q, Some(&w)).unwrap();
        for k in 0..3usize {
            for j in 0..3usize {
                for i in 0..3usize {
                    let c = [i, j, k];
                    let mut total = 0.0;
                    for d in 0..3 {
                        let mut vals = vec![];
                        if c[d] >= 1 {
                            let mut b = c;
                            b[d] -= 1;
                            vals.push(w.get(d, b[0], b[1], b[2]) * q.get(d, b[0], b[1], b[2]).powi(2));
                        }
                        if c[d] <= 1 {
                            vals.push(w.get(d, i, j, k) * q.get(d, i, j, k).powi(2));
                        }
                        total += vals.iter().sum::<f64>() / vals.len() as f64;
                    }
                    assert!((r.get(i, j, k) - total).abs() < 1e-14);
                }
            }
        }
    }

    fn chi(x: [f64; 3]) -> f64 {
        (PI * x[0]).sin() * (PI * x[1]).sin()
    }

    fn swirl(grid: Grid) -> FaceField {
        FaceField::from_fn(grid, |d, x| match d {
            0 => -PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
            1 => PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
            _ => 0.0,
        })
    }

    fn order(errors: &[f64]) -> Vec<f64> {
        errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
    }

    #[test]
    fn dual_curl_of_swirl_converges_second_order() {
        let mut errs = vec![];
        for n in [8, 16, 32] {
            let g = Grid::unit_cube(n).unwrap();
            let c = curl_face_to_edge(&swirl(g));
            let mut err: f64 = 0.0;
            let l = g.edges(2);
            for e in 0..l.len() {
                let cc = l.coords(e);
                if g.is_boundary_edge(2, cc) {
                    continue;
                }
                let x = g.edge_midpoint(2, cc[0], cc[1], cc[2]);
                err = err.max((c.component(2)[e] + 2.0 * PI * PI * chi(x)).abs());
            }
            assert!(c.component(0).iter().chain(c.component(1)).all(|v| v.abs() < 1e-12));
            errs.push(err);
        }
        assert!(order(&errs).iter().all(|&p| p >= 1.9), "{errs:?}");
    }

    #[test]
    fn operators_converge_second_order() {
        let f = |x: [f64; 3]| (1.0 + x[0]) * (0.8 * x[1]).cos() * (0.6 * x[2]).exp();
        let mut grad_err = vec![];
        let mut lap_err = vec![];
        for n in [8, 16, 32] {
            let g = Grid::unit_cube(n).unwrap();
            let u = NodeField::from_fn(g, f);
            let gu = grad(&u);
            let exact = EdgeField::from_fn(g, |d, x| {
                let (cy, sy) = ((0.8 * x[1]).cos(), (0.8 * x[1]).sin());
                let ez = (0.6 * x[2]).exp();
                match d {
                    0 => cy * ez,
                    1 => -0.8 * (1.0 + x[0]) * sy * ez,
                    _ => 0.6 * (1.0 + x[0]) * cy * ez,
                }
            });
            grad_err.push(gu.add_scaled(-1.0, &exact).max_abs());
            let l = laplacian_dirichlet(&u, &u).unwrap();
            let exact_lap = NodeField::from_fn(g, |x| (0.64 - 0.36) * f(x));
            let nl = g.nodes();
            let mut e: f64 = 0.0;
            let stride = n / 8;
            for n in 0..nl.len() {
                let c = nl.coords(n);
                if !g.is_boundary_node(c) && c.iter().all(|&i| i % stride == 0) {
                    e = e.max((l.values()[n] - exact_lap.values()[n]).abs());
                }
            }
            lap_err.push(e);
        }
        assert!(order(&grad_err).iter().all(|&p| p >= 1.9), "{grad_err:?}");
        assert!(order(&lap_err).iter().all(|&p| p >= 1.9), "{lap_err:?}");
    }

    #[test]
    fn visualization_averages_of_constants() {
        let g = Grid::new([1.0, 1.0, 1.0], [2, 3, 4]).unwrap();
        let e = edge_field_at_nodes(&EdgeField::uniform(g, [1.0, 2.0, 3.0]));
        let f = face_field_at_nodes(&FaceField::uniform(g, [1.0, 2.0, 3.0]));
        for d in 0..3 {
            assert!(e[d].values().iter().all(|&v| v == (d + 1) as f64));
            assert!(f[d].values().iter().all(|&v| (v - (d + 1) as f64).abs() < 1e-15));
        }
    }
}
