//! Temperature-dependent electrical conductivity with certified bounds.

use crate::error::{Error, Result};
use crate::mesh::{EdgeField, NodeField};

#[derive(Debug, Clone, PartialEq)]
pub enum ConductivityKind {
    Constant {
        value: f64,
    },
    /// `low + (high - low) / (1 + exp(-(s - center) / width))`
    Sigmoid {
        low: f64,
        high: f64,
        center: f64,
        width: f64,
    },
    /// Piecewise linear through `points`, clamped to the end values outside.
    Table {
        points: Vec<(f64, f64)>,
    },
}

/// A conductivity law `sigma(s)` together with bounds `lower <= sigma <= upper`
/// and a Lipschitz constant, all derived from the parameters at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityModel {
    kind: ConductivityKind,
    lower: f64,
    upper: f64,
    lipschitz: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl ConductivityModel {
    pub fn constant(value: f64) -> Result<Self> {
        positive("conductivity", value)?;
        Ok(Self {
            kind: ConductivityKind::Constant { value },
            lower: value,
            upper: value,
            lipschitz: 0.0,
        })
    }

    pub fn sigmoid(low: f64, high: f64, center: f64, width: f64) -> Result<Self> {
        positive("lower bound", low)?;
        positive("upper bound", high)?;
        positive("width", width)?;
        if !center.is_finite() {
            return Err(Error::InvalidModel("center must be finite".into()));
        }
        if high < low {
            return Err(Error::InvalidModel(format!(
                "upper bound {high} is below lower bound {low}"
            )));
        }
        Ok(Self {
            kind: ConductivityKind::Sigmoid {
                low,
                high,
                center,
                width,
            },
            lower: low,
            upper: high,
            // max of the logistic derivative is 1/4 at the center
            lipschitz: (high - low) / (4.0 * width),
        })
    }

    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidModel("table needs at least one point".into()));
        }
        for &(s, v) in &points {
            if !s.is_finite() {
                return Err(Error::InvalidModel(format!("abscissa {s} is not finite")));
            }
            positive("table value", v)?;
        }
        let mut lipschitz: f64 = 0.0;
        for w in points.windows(2) {
            let (s0, v0) = w[0];
            let (s1, v1) = w[1];
            if s1 <= s0 {
                return Err(Error::InvalidModel(format!(
                    "table abscissae must increase strictly ({s0} then {s1})"
                )));
            }
            lipschitz = lipschitz.max((v1 - v0).abs() / (s1 - s0));
        }
        let lower = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let upper = points.iter().map(|p| p.1).fold(0.0, f64::max);
        Ok(Self {
            kind: ConductivityKind::Table { points },
            lower,
            upper,
            lipschitz,
        })
    }

    pub fn kind(&self) -> &ConductivityKind {
        &self.kind
    }

    /// Certified lower bound `sigma_1`.
    pub fn lower(&self) -> f64 {
        self.lower
    }

    /// Certified upper bound `sigma_2`.
    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// Certified Lipschitz constant `L`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn is_constant(&self) -> bool {
        self.lipschitz == 0.0
    }

    pub fn eval(&self, s: f64) -> f64 {
        let v = match &self.kind {
            ConductivityKind::Constant { value } => *value,
            ConductivityKind::Sigmoid {
                low,
                high,
                center,
                width,
            } => low + (high - low) * logistic((s - center) / width),
            ConductivityKind::Table { points } => {
                let n = points.len();
                if s <= points[0].0 {
                    points[0].1
                } else if s >= points[n - 1].0 {
                    points[n - 1].1
                } else {
                    let seg = points.partition_point(|p| p.0 <= s) - 1;
                    let (s0, v0) = points[seg];
                    let (s1, v1) = points[seg + 1];
                    v0 + (v1 - v0) * (s - s0) / (s1 - s0)
                }
            }
        };
        // rounding in the interpolation formulas may step past the bounds by an ulp
        v.clamp(self.lower, self.upper)
    }

    /// `d sigma / ds`; one-sided (right) at table knots.
    pub fn derivative(&self, s: f64) -> f64 {
        match &self.kind {
            ConductivityKind::Constant { .. } => 0.0,
            ConductivityKind::Sigmoid {
                low,
                high,
                center,
                width,
            } => {
                let t = logistic((s - center) / width);
                (high - low) * t * (1.0 - t) / width
            }
            ConductivityKind::Table { points } => {
                let n = points.len();
                if n < 2 || s < points[0].0 || s >= points[n - 1].0 {
                    0.0
                } else {
                    let seg = points.partition_point(|p| p.0 <= s) - 1;
                    let (s0, v0) = points[seg];
                    let (s1, v1) = points[seg + 1];
                    (v1 - v0) / (s1 - s0)
                }
            }
        }
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Pointwise `sigma(u)` at every node.
pub fn eval_sigma(model: &ConductivityModel, u: &NodeField) -> Result<NodeField> {
    if let Some(index) = u.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(u.map(|s| model.eval(s)))
}

/// Harmonic mean of the two endpoint values on every edge.
pub fn sigma_to_edges(sig_nodes: &NodeField) -> Result<EdgeField> {
    let values = sig_nodes.values();
    if let Some(index) = values.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::NonPositiveConductivity {
            index,
            value: values[index],
        });
    }
    let grid = *sig_nodes.grid();
    let nodes = grid.nodes();
    let comps = [0, 1, 2].map(|d| {
        let edges = grid.edges(d);
        let step = nodes.stride(d);
        (0..edges.len())
            .map(|e| {
                let [i, j, k] = edges.coords(e);
                let a = values[nodes.index(i, j, k)];
                let b = values[nodes.index(i, j, k) + step];
                2.0 * a * b / (a + b)
            })
            .collect()
    });
    Ok(EdgeField::from_raw(grid, comps))
}
