//! Logarithmic radial grids and positive radial functions sampled on them.
//!
//! A [`RadialFunction`] is interpolated in log-log coordinates with local
//! six-point Lagrange polynomials, so pure power laws are reproduced
//! exactly. Outside the grid it follows the power-law head and tail
//! exponents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest number of nodes a grid may have.
pub const MIN_NODES: usize = 8;

const STENCIL: usize = 6;
const DERIV_STENCIL: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RadialGrid {
    nodes: Vec<f64>,
    #[serde(skip)]
    logs: Vec<f64>,
}

impl RadialGrid {
    /// Strictly increasing positive radii, at least [`MIN_NODES`] of them.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < MIN_NODES {
            return Err(Error::TooFewNodes {
                needed: MIN_NODES,
                got: nodes.len(),
            });
        }
        if !(nodes[0] > 0.0) || nodes.iter().any(|r| !r.is_finite()) {
            return Err(Error::domain("grid radii must be positive and finite"));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("grid radii must be strictly increasing"));
        }
        let logs = nodes.iter().map(|r| r.ln()).collect();
        Ok(RadialGrid { nodes, logs })
    }

    /// `count` radii equally spaced in `ln r` on `[r_min, r_max]`, with the
    /// endpoints hit exactly.
    pub fn log_spaced(r_min: f64, r_max: f64, count: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min && r_max.is_finite()) {
            return Err(Error::domain(format!(
                "log grid needs 0 < r_min < r_max, got [{r_min}, {r_max}]"
            )));
        }
        if count < MIN_NODES {
            return Err(Error::TooFewNodes {
                needed: MIN_NODES,
                got: count,
            });
        }
        let (lo, hi) = (r_min.ln(), r_max.ln());
        let step = (hi - lo) / (count - 1) as f64;
        let mut nodes: Vec<f64> = (0..count).map(|i| (lo + step * i as f64).exp()).collect();
        nodes[0] = r_min;
        nodes[count - 1] = r_max;
        Self::from_nodes(nodes)
    }

    /// The default grid: 256 nodes on `[1e-4, 1e4]`.
    pub fn default_grid() -> Self {
        Self::log_spaced(1e-4, 1e4, 256).expect("default grid is valid")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn log_nodes(&self) -> &[f64] {
        &self.logs
    }

    pub fn first(&self) -> f64 {
        self.nodes[0]
    }

    pub fn last(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Every radius multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        Self::from_nodes(self.nodes.iter().map(|r| r * lambda).collect())
    }

    /// Index `k` of the cell `[r_k, r_{k+1}]` containing `ln r`.
    fn cell_of(&self, t: f64) -> usize {
        let k = self.logs.partition_point(|&x| x <= t);
        k.saturating_sub(1).min(self.len() - 2)
    }

    fn stencil_start(&self, k: usize, width: usize) -> usize {
        let half = (width - 1) / 2;
        k.saturating_sub(half).min(self.len() - width)
    }
}

impl TryFrom<Vec<f64>> for RadialGrid {
    type Error = Error;

    fn try_from(nodes: Vec<f64>) -> Result<Self> {
        RadialGrid::from_nodes(nodes)
    }
}

impl From<RadialGrid> for Vec<f64> {
    fn from(grid: RadialGrid) -> Self {
        grid.nodes
    }
}

/// Positive radial function sampled on a grid.
///
/// Extrapolation: `f(r) = f(r_1) (r/r_1)^head_exp` below the grid and
/// `f(r) = f(r_N) (r/r_N)^tail_exp` above it. A tail exponent of
/// `f64::NEG_INFINITY` means the function vanishes beyond `r_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialFunction {
    grid: RadialGrid,
    values: Vec<f64>,
    head_exp: f64,
    tail_exp: f64,
    #[serde(skip)]
    logs: Vec<f64>,
}

impl RadialFunction {
    pub fn new(grid: RadialGrid, values: Vec<f64>, head_exp: f64, tail_exp: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::domain(format!(
                "radial function values must be positive and finite, found {bad}"
            )));
        }
        if !head_exp.is_finite() {
            return Err(Error::domain("head exponent must be finite"));
        }
        if tail_exp.is_nan() || tail_exp == f64::INFINITY {
            return Err(Error::domain("tail exponent must be finite or -inf"));
        }
        let logs = values.iter().map(|v| v.ln()).collect();
        Ok(RadialFunction {
            grid,
            values,
            head_exp,
            tail_exp,
            logs,
        })
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64, head_exp: f64, tail_exp: f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values, head_exp, tail_exp)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn head_exp(&self) -> f64 {
        self.head_exp
    }

    pub fn tail_exp(&self) -> f64 {
        self.tail_exp
    }

    /// Whether the function is cut off (zero) beyond the last node.
    pub fn is_compact(&self) -> bool {
        self.tail_exp == f64::NEG_INFINITY
    }

    pub fn first_value(&self) -> f64 {
        self.values[0]
    }

    pub fn last_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `ln f(r)`; `-inf` beyond a cut-off tail.
    pub fn log_eval(&self, r: f64) -> f64 {
        let t = r.ln();
        let g = &self.grid;
        if r < g.first() {
            return self.logs[0] + self.head_exp * (t - g.log_nodes()[0]);
        }
        if r > g.last() {
            if self.is_compact() {
                return f64::NEG_INFINITY;
            }
            return self.logs[g.len() - 1] + self.tail_exp * (t - g.log_nodes()[g.len() - 1]);
        }
        let k = g.cell_of(t);
        let start = g.stencil_start(k, STENCIL);
        lagrange(
            &g.log_nodes()[start..start + STENCIL],
            &self.logs[start..start + STENCIL],
            t,
        )
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.log_eval(r).exp()
    }

    /// Logarithmic slope `d ln f / d ln r` of the interpolant.
    pub fn log_slope(&self, r: f64) -> f64 {
        let g = &self.grid;
        if r < g.first() {
            return self.head_exp;
        }
        if r > g.last() {
            return if self.is_compact() { 0.0 } else { self.tail_exp };
        }
        let t = r.ln();
        let k = g.cell_of(t);
        let start = g.stencil_start(k, STENCIL);
        lagrange_derivative(
            &g.log_nodes()[start..start + STENCIL],
            &self.logs[start..start + STENCIL],
            t,
        )
    }

    /// `f'(r)`, exact power-law derivative outside the grid.
    pub fn derivative_at(&self, r: f64) -> f64 {
        self.eval(r) / r * self.log_slope(r)
    }

    /// `f^p` for `p > 0`.
    pub fn powf(&self, p: f64) -> Self {
        let values = self.values.iter().map(|v| v.powf(p)).collect();
        let logs = self.logs.iter().map(|l| l * p).collect();
        RadialFunction {
            grid: self.grid.clone(),
            values,
            head_exp: self.head_exp * p,
            tail_exp: self.tail_exp * p,
            logs,
        }
    }

    /// `c f` for `c > 0`.
    pub fn scale(&self, c: f64) -> Self {
        let values = self.values.iter().map(|v| v * c).collect();
        let lc = c.ln();
        let logs = self.logs.iter().map(|l| l + lc).collect();
        RadialFunction {
            grid: self.grid.clone(),
            values,
            logs,
            ..self.clone()
        }
    }

    /// Pointwise product of two functions on the same grid.
    pub fn product(&self, other: &RadialFunction) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("product of functions on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Self::new(
            self.grid.clone(),
            values,
            self.head_exp + other.head_exp,
            self.tail_exp + other.tail_exp,
        )
    }

    /// Geometric interpolation `f^(1-theta) g^theta` on a shared grid,
    /// with exponents combined the same way.
    pub fn geometric_blend(&self, other: &RadialFunction, theta: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("blend of functions on different grids".into()));
        }
        let values = self
            .logs
            .iter()
            .zip(&other.logs)
            .map(|(a, b)| ((1.0 - theta) * a + theta * b).exp())
            .collect();
        let mix = |x: f64, y: f64| {
            if theta == 1.0 {
                y
            } else if theta == 0.0 {
                x
            } else {
                (1.0 - theta) * x + theta * y
            }
        };
        Self::new(
            self.grid.clone(),
            values,
            mix(self.head_exp, other.head_exp),
            mix(self.tail_exp, other.tail_exp),
        )
    }
}

/// Derivative samples `f'(r_i)` at the grid nodes.
///
/// Five-point log-log differences (centered in the interior, one-sided at
/// the two ends of the grid), converted by `f' = f/r · d ln f / d ln r`.
pub fn radial_derivative(f: &RadialFunction) -> Result<Vec<f64>> {
    let g = f.grid();
    if g.len() < 4 {
        return Err(Error::TooFewNodes {
            needed: 4,
            got: g.len(),
        });
    }
    let width = DERIV_STENCIL.min(g.len());
    Ok((0..g.len())
        .map(|i| {
            let start = i.saturating_sub(width / 2).min(g.len() - width);
            let slope = lagrange_derivative(
                &g.log_nodes()[start..start + width],
                &f.logs[start..start + width],
                g.log_nodes()[i],
            );
            f.values[i] / g.nodes()[i] * slope
        })
        .collect())
}

fn lagrange(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut total = 0.0;
    for (j, (&xj, &yj)) in xs.iter().zip(ys).enumerate() {
        let mut basis = 1.0;
        for (k, &xk) in xs.iter().enumerate() {
            if k != j {
                basis *= (x - xk) / (xj - xk);
            }
        }
        total += yj * basis;
    }
    total
}

fn lagrange_derivative(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let mut total = 0.0;
    for j in 0..n {
        let mut dj = 0.0;
        for k in 0..n {
            if k == j {
                continue;
            }
            let mut term = 1.0 / (xs[j] - xs[k]);
            for m in 0..n {
                if m != j && m != k {
                    term *= (x - xs[m]) / (xs[j] - xs[m]);
                }
            }
            dj += term;
        }
        total += ys[j] * dj;
    }
    total
}
