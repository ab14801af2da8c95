//! Boundary data: the applied field `E0` of the electric mode and the normal
//! flux `g = nu . curl H0` of the tangential mode.

use crate::error::{Error, Result};
use crate::mesh::{EdgeField, FaceField, Grid, NodeField};
use crate::ops::{curl_edge_to_face, grad};

/// `E0 = grad psi0 + uniform`, curl-free on the grid by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct AppliedField {
    pub psi0: NodeField,
    pub uniform: [f64; 3],
}

impl AppliedField {
    pub fn uniform(grid: Grid, e: [f64; 3]) -> Self {
        Self {
            psi0: NodeField::zeros(grid),
            uniform: e,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.psi0.grid()
    }

    /// `E0` sampled on edges.
    pub fn edge_field(&self) -> EdgeField {
        grad(&self.psi0).add_scaled(1.0, &EdgeField::uniform(*self.grid(), self.uniform))
    }

    /// Scalar potential of `E0`: `psi0 + uniform . (x - center)`.
    pub fn potential(&self) -> NodeField {
        let grid = *self.grid();
        let c = grid.center();
        let e = self.uniform;
        let lin = NodeField::from_fn(grid, |x| {
            e[0] * (x[0] - c[0]) + e[1] * (x[1] - c[1]) + e[2] * (x[2] - c[2])
        });
        self.psi0.add_scaled(1.0, &lin)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            psi0: self.psi0.map(|v| s * v),
            uniform: self.uniform.map(|v| s * v),
        }
    }
}

/// Outward normal flux density on boundary faces. Entries of interior faces are
/// ignored and kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFlux {
    values: FaceField,
    /// Face values of `curl H0` when the flux was derived from a tangential field.
    source_curl: Option<FaceField>,
}

/// Side ordering used by [`BoundaryFlux::uniform_sides`]: x-, x+, y-, y+, z-, z+.
pub const SIDES: [&str; 6] = ["x-", "x+", "y-", "y+", "z-", "z+"];

impl BoundaryFlux {
    pub fn zero(grid: Grid) -> Self {
        Self {
            values: FaceField::zeros(grid),
            source_curl: None,
        }
    }

    /// `g(axis, upper, x)` sampled at boundary face centers; `upper` selects the
    /// face plane at the far end of `axis`.
    pub fn from_fn(grid: Grid, g: impl Fn(usize, bool, [f64; 3]) -> f64) -> Self {
        let cells = grid.cells();
        let values = FaceField::from_fn(grid, |d, x| {
            let i = (x[d] / grid.spacing()[d]).round() as usize;
            if i == 0 {
                g(d, false, x)
            } else if i == cells[d] {
                g(d, true, x)
            } else {
                0.0
            }
        });
        Self {
            values,
            source_curl: None,
        }
    }

    /// Constant outward flux per side, ordered as [`SIDES`].
    pub fn uniform_sides(grid: Grid, g: [f64; 6]) -> Self {
        Self::from_fn(grid, |d, upper, _| g[2 * d + upper as usize])
    }

    /// Flux `nu . curl H0` of a tangential field `H0`. The tangential components
    /// are sampled on edges and curled with the primal circulation, so the total
    /// boundary flux vanishes to rounding.
    pub fn from_tangential_field(grid: Grid, h0: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let a = EdgeField::from_fn(grid, |d, x| h0(x)[d]);
        let curl = curl_edge_to_face(&a);
        let cells = grid.cells();
        let comps = [0, 1, 2].map(|d| {
            let l = grid.faces(d);
            curl.component(d)
                .iter()
                .enumerate()
                .map(|(f, v)| {
                    let c = l.coords(f);
                    if c[d] == 0 {
                        -v
                    } else if c[d] == cells[d] {
                        *v
                    } else {
                        0.0
                    }
                })
                .collect()
        });
        Self {
            values: FaceField::from_raw(grid, comps),
            source_curl: Some(curl),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.values.grid()
    }

    pub fn values(&self) -> &FaceField {
        &self.values
    }

    pub fn source_curl(&self) -> Option<&FaceField> {
        self.source_curl.as_ref()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let scale = |f: &FaceField| {
            FaceField::from_raw(*f.grid(), f.components().clone().map(|c| c.into_iter().map(|v| s * v).collect()))
        };
        Self {
            values: scale(&self.values),
            source_curl: self.source_curl.as_ref().map(scale),
        }
    }

    fn boundary_faces(&self) -> impl Iterator<Item = (usize, [usize; 3], f64)> + '_ {
        let grid = *self.grid();
        (0..3).flat_map(move |d| {
            let l = grid.faces(d);
            let comp = self.values.component(d);
            (0..l.len()).filter_map(move |f| {
                let c = l.coords(f);
                grid.is_boundary_face(d, c).then(|| (d, c, comp[f]))
            })
        })
    }

    /// `sum g * area` over boundary faces.
    pub fn total(&self) -> f64 {
        let grid = self.grid();
        self.boundary_faces()
            .map(|(d, _, g)| g * grid.face_area(d))
            .sum()
    }

    /// `sum |g| * area` over boundary faces.
    pub fn magnitude(&self) -> f64 {
        let grid = self.grid();
        self.boundary_faces()
            .map(|(d, _, g)| g.abs() * grid.face_area(d))
            .sum()
    }

    /// Rejects data whose total flux exceeds `1e-10` of its magnitude.
    pub fn check_compatible(&self) -> Result<()> {
        let total = self.total();
        let limit = 1e-10 * self.magnitude();
        if total.abs() > limit {
            return Err(Error::IncompatibleFlux { total, limit });
        }
        Ok(())
    }

    /// Nodal loads: each boundary face hands a quarter of `g * area` to each corner.
    pub fn node_loads(&self) -> Vec<f64> {
        let grid = *self.grid();
        let nodes = grid.nodes();
        let mut loads = vec![0.0; nodes.len()];
        for (d, c, g) in self.boundary_faces() {
            let q = 0.25 * g * grid.face_area(d);
            let (a, b) = ((d + 1) % 3, (d + 2) % 3);
            for (sa, sb) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let mut n = c;
                n[a] += sa;
                n[b] += sb;
                loads[nodes.index(n[0], n[1], n[2])] += q;
            }
        }
        loads
    }
}
