//! Box grid and staggered field containers.
//!
//! Degrees of freedom follow the Yee/MAC layout on the primal grid:
//!
//! ```text
//! nodes        (n1+1) x (n2+1) x (n3+1)      scalars u, phi
//! edges  d     node dims with axis d reduced by one   E0, grad phi, J
//! faces  d     cell dims with axis d grown by one     H
//! cells        n1 x n2 x n3                           div H
//! ```
//!
//! All arrays are stored x-fastest: `index = i + dims[0] * (j + dims[1] * k)`.

use crate::error::{Error, Result};

/// Shape of one staggered array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub dims: [usize; 3],
}

impl Layout {
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let rest = idx / self.dims[0];
        [i, rest % self.dims[1], rest / self.dims[1]]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index offset of a unit step along `axis`.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => 1,
            1 => self.dims[0],
            _ => self.dims[0] * self.dims[1],
        }
    }
}

/// Axis-aligned box `[0,L1] x [0,L2] x [0,L3]` split into `n1 x n2 x n3` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    lengths: [f64; 3],
    cells: [usize; 3],
}

impl Grid {
    pub fn new(lengths: [f64; 3], cells: [usize; 3]) -> Result<Self> {
        for d in 0..3 {
            if cells[d] < 2 {
                return Err(Error::InvalidGrid(format!(
                    "axis {d} has {} cells, need at least 2",
                    cells[d]
                )));
            }
            if !(lengths[d].is_finite() && lengths[d] > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "axis {d} has length {}, need a positive finite value",
                    lengths[d]
                )));
            }
        }
        Ok(Self { lengths, cells })
    }

    /// Unit cube with `n` cells per axis.
    pub fn unit_cube(n: usize) -> Result<Self> {
        Self::new([1.0; 3], [n; 3])
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.lengths
    }

    pub fn cells(&self) -> [usize; 3] {
        self.cells
    }

    pub fn spacing(&self) -> [f64; 3] {
        [
            self.lengths[0] / self.cells[0] as f64,
            self.lengths[1] / self.cells[1] as f64,
            self.lengths[2] / self.cells[2] as f64,
        ]
    }

    pub fn min_spacing(&self) -> f64 {
        let h = self.spacing();
        h[0].min(h[1]).min(h[2])
    }

    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        h[0] * h[1] * h[2]
    }

    pub fn volume(&self) -> f64 {
        self.lengths[0] * self.lengths[1] * self.lengths[2]
    }

    pub fn diameter(&self) -> f64 {
        self.lengths.iter().map(|l| l * l).sum::<f64>().sqrt()
    }

    pub fn center(&self) -> [f64; 3] {
        [
            0.5 * self.lengths[0],
            0.5 * self.lengths[1],
            0.5 * self.lengths[2],
        ]
    }

    pub fn nodes(&self) -> Layout {
        Layout {
            dims: [self.cells[0] + 1, self.cells[1] + 1, self.cells[2] + 1],
        }
    }

    /// Edges parallel to `axis`.
    pub fn edges(&self, axis: usize) -> Layout {
        let mut dims = self.nodes().dims;
        dims[axis] -= 1;
        Layout { dims }
    }

    /// Faces normal to `axis`.
    pub fn faces(&self, axis: usize) -> Layout {
        let mut dims = self.cells;
        dims[axis] += 1;
        Layout { dims }
    }

    pub fn cell_layout(&self) -> Layout {
        Layout { dims: self.cells }
    }

    pub fn node_count(&self) -> usize {
        self.nodes().len()
    }

    pub fn node_position(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let h = self.spacing();
        [i as f64 * h[0], j as f64 * h[1], k as f64 * h[2]]
    }

    pub fn edge_midpoint(&self, axis: usize, i: usize, j: usize, k: usize) -> [f64; 3] {
        let mut x = self.node_position(i, j, k);
        x[axis] += 0.5 * self.spacing()[axis];
        x
    }

    pub fn face_center(&self, axis: usize, i: usize, j: usize, k: usize) -> [f64; 3] {
        let h = self.spacing();
        let mut x = [
            (i as f64 + 0.5) * h[0],
            (j as f64 + 0.5) * h[1],
            (k as f64 + 0.5) * h[2],
        ];
        x[axis] -= 0.5 * h[axis];
        x
    }

    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let h = self.spacing();
        [
            (i as f64 + 0.5) * h[0],
            (j as f64 + 0.5) * h[1],
            (k as f64 + 0.5) * h[2],
        ]
    }

    #[inline]
    pub fn on_boundary(&self, axis: usize, index: usize) -> bool {
        index == 0 || index == self.cells[axis]
    }

    #[inline]
    pub fn is_boundary_node(&self, c: [usize; 3]) -> bool {
        (0..3).any(|d| self.on_boundary(d, c[d]))
    }

    /// An edge lies in a boundary plane iff one of its transverse node indices is extremal.
    #[inline]
    pub fn is_boundary_edge(&self, axis: usize, c: [usize; 3]) -> bool {
        (0..3).any(|d| d != axis && self.on_boundary(d, c[d]))
    }

    /// A face is a boundary face iff it is normal to `axis` at an extremal index.
    #[inline]
    pub fn is_boundary_face(&self, axis: usize, c: [usize; 3]) -> bool {
        self.on_boundary(axis, c[axis])
    }

    /// Trapezoidal quadrature weight of a node.
    pub fn node_weight(&self, c: [usize; 3]) -> f64 {
        let mut w = self.cell_volume();
        for d in 0..3 {
            if self.on_boundary(d, c[d]) {
                w *= 0.5;
            }
        }
        w
    }

    /// Dual volume of an edge: full length along the edge, trapezoidal across it.
    pub fn edge_weight(&self, axis: usize, c: [usize; 3]) -> f64 {
        let mut w = self.cell_volume();
        for d in 0..3 {
            if d != axis && self.on_boundary(d, c[d]) {
                w *= 0.5;
            }
        }
        w
    }

    /// Dual volume of a face: trapezoidal along its normal.
    pub fn face_weight(&self, axis: usize, c: [usize; 3]) -> f64 {
        let w = self.cell_volume();
        if self.on_boundary(axis, c[axis]) {
            0.5 * w
        } else {
            w
        }
    }

    pub fn face_area(&self, axis: usize) -> f64 {
        self.cell_volume() / self.spacing()[axis]
    }
}

fn check_values(values: &[f64], expected: usize) -> Result<()> {
    if values.len() != expected {
        return Err(Error::ShapeMismatch {
            expected,
            actual: values.len(),
        });
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(())
}

/// Scalar samples at grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeField {
    grid: Grid,
    values: Vec<f64>,
}

impl NodeField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.node_count()],
        }
    }

    /// Samples `f` at every node position.
    pub fn from_fn(grid: Grid, mut f: impl FnMut([f64; 3]) -> f64) -> Self {
        let layout = grid.nodes();
        let values = (0..layout.len())
            .map(|n| {
                let [i, j, k] = layout.coords(n);
                f(grid.node_position(i, j, k))
            })
            .collect();
        Self { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        check_values(&values, grid.node_count())?;
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.nodes().index(i, j, k)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, a: f64, other: &NodeField) -> Self {
        Self::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x + a * y)
                .collect(),
        )
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

}

pub(crate) fn same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a != b {
        return Err(Error::InvalidGrid(format!(
            "fields live on different grids ({:?} vs {:?})",
            a.cells(),
            b.cells()
        )));
    }
    Ok(())
}

macro_rules! vector_field {
    ($(#[$meta:meta])* $name:ident, $layout:ident, $position:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            grid: Grid,
            comps: [Vec<f64>; 3],
        }

        impl $name {
            pub fn zeros(grid: Grid) -> Self {
                Self::uniform(grid, [0.0; 3])
            }

            pub fn uniform(grid: Grid, v: [f64; 3]) -> Self {
                let comps = [0, 1, 2].map(|d| vec![v[d]; grid.$layout(d).len()]);
                Self { grid, comps }
            }

            /// Samples component `d` of `f` at the staggered location of each component.
            pub fn from_fn(grid: Grid, mut f: impl FnMut(usize, [f64; 3]) -> f64) -> Self {
                let comps = [0, 1, 2].map(|d| {
                    let layout = grid.$layout(d);
                    (0..layout.len())
                        .map(|n| {
                            let [i, j, k] = layout.coords(n);
                            f(d, grid.$position(d, i, j, k))
                        })
                        .collect()
                });
                Self { grid, comps }
            }

            pub fn from_components(grid: Grid, comps: [Vec<f64>; 3]) -> Result<Self> {
                for d in 0..3 {
                    check_values(&comps[d], grid.$layout(d).len())?;
                }
                Ok(Self { grid, comps })
            }

            pub(crate) fn from_raw(grid: Grid, comps: [Vec<f64>; 3]) -> Self {
                Self { grid, comps }
            }

            pub fn grid(&self) -> &Grid {
                &self.grid
            }

            pub fn component(&self, d: usize) -> &[f64] {
                &self.comps[d]
            }

            pub fn components(&self) -> &[Vec<f64>; 3] {
                &self.comps
            }

            pub fn into_components(self) -> [Vec<f64>; 3] {
                self.comps
            }

            pub fn get(&self, d: usize, i: usize, j: usize, k: usize) -> f64 {
                self.comps[d][self.grid.$layout(d).index(i, j, k)]
            }

            /// `self + a * other`.
            pub fn add_scaled(&self, a: f64, other: &Self) -> Self {
                let comps = [0, 1, 2].map(|d| {
                    self.comps[d]
                        .iter()
                        .zip(&other.comps[d])
                        .map(|(x, y)| x + a * y)
                        .collect()
                });
                Self::from_raw(self.grid, comps)
            }

            /// Componentwise product.
            pub fn mul(&self, other: &Self) -> Self {
                let comps = [0, 1, 2].map(|d| {
                    self.comps[d]
                        .iter()
                        .zip(&other.comps[d])
                        .map(|(x, y)| x * y)
                        .collect()
                });
                Self::from_raw(self.grid, comps)
            }

            pub fn max_abs(&self) -> f64 {
                self.comps
                    .iter()
                    .flatten()
                    .fold(0.0, |m: f64, v| m.max(v.abs()))
            }
        }
    };
}

vector_field!(
    /// Vector field with component `d` on edges parallel to axis `d`.
    EdgeField,
    edges,
    edge_midpoint
);

vector_field!(
    /// Vector field with component `d` on faces normal to axis `d`.
    FaceField,
    faces,
    face_center
);

/// Cell-centered scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    grid: Grid,
    values: Vec<f64>,
}

impl CellField {
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
