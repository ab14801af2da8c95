//! Discrete L^p norms and inner products with trapezoidal boundary weights.

use crate::mesh::{EdgeField, FaceField, NodeField};
use crate::ops::avg_edge_to_node;

pub fn node_inner(a: &NodeField, b: &NodeField) -> f64 {
    let grid = a.grid();
    let l = grid.nodes();
    a.values()
        .iter()
        .zip(b.values())
        .enumerate()
        .map(|(n, (x, y))| grid.node_weight(l.coords(n)) * x * y)
        .sum()
}

/// `(sum w |f|^p)^(1/p)`; `p = f64::INFINITY` gives the max norm.
pub fn node_norm(f: &NodeField, p: f64) -> f64 {
    if p.is_infinite() {
        return f.max_abs();
    }
    let grid = f.grid();
    let l = grid.nodes();
    f.values()
        .iter()
        .enumerate()
        .map(|(n, v)| grid.node_weight(l.coords(n)) * v.abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

/// Weighted mean over the box.
pub fn node_mean(f: &NodeField) -> f64 {
    let grid = f.grid();
    let l = grid.nodes();
    f.values()
        .iter()
        .enumerate()
        .map(|(n, v)| grid.node_weight(l.coords(n)) * v)
        .sum::<f64>()
        / grid.volume()
}

pub fn edge_inner(a: &EdgeField, b: &EdgeField) -> f64 {
    let grid = a.grid();
    (0..3)
        .map(|d| {
            let l = grid.edges(d);
            a.component(d)
                .iter()
                .zip(b.component(d))
                .enumerate()
                .map(|(e, (x, y))| grid.edge_weight(d, l.coords(e)) * x * y)
                .sum::<f64>()
        })
        .sum()
}

/// L^p norm of an edge field. For `p = 2` each component is integrated on its
/// own edges with the edge dual volumes. For other `p` the pointwise magnitude is
/// formed at nodes (mean of squares over adjacent edges per direction) and
/// integrated with node weights, so that `|q|^p` sees all three components.
pub fn edge_norm(q: &EdgeField, p: f64) -> f64 {
    if p.is_infinite() {
        return q.max_abs();
    }
    let grid = q.grid();
    if p == 2.0 {
        return (0..3)
            .map(|d| {
                let l = grid.edges(d);
                q.component(d)
                    .iter()
                    .enumerate()
                    .map(|(e, v)| grid.edge_weight(d, l.coords(e)) * v * v)
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt();
    }
    let squares = avg_edge_to_node(q, None).expect("single grid");
    node_norm(&squares.map(f64::sqrt), p)
}

pub fn face_norm(q: &FaceField, p: f64) -> f64 {
    if p.is_infinite() {
        return q.max_abs();
    }
    let grid = q.grid();
    (0..3)
        .map(|d| {
            let l = grid.faces(d);
            q.component(d)
                .iter()
                .enumerate()
                .map(|(f, v)| grid.face_weight(d, l.coords(f)) * v.abs().powf(p))
                .sum::<f64>()
        })
        .sum::<f64>()
        .powf(1.0 / p)
}
