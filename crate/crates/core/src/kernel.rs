//! Weighted Riesz potentials of radial functions.
//!
//! For radial `f` the potential `∫ f(|y|) |x-y|^(alpha-n) |y|^(-sigma) dy`
//! reduces to `P[f](r) = ∫_0^∞ s^(n-1-sigma) A(r,s) f(s) ds` with the
//! angular kernel
//!
//! ```text
//! A(r,s) = |S^(n-2)| ∫_{-1}^{1} (r² + s² - 2rst)^((alpha-n)/2) (1-t²)^((n-3)/2) dt.
//! ```
//!
//! The radial integral is computed in `t = ln s` with Gauss–Legendre panels
//! on the grid cells, dyadic grading toward `s = r`, numerically integrated
//! buffer zones beyond both ends of the grid, and analytic far-field
//! closures past the buffers.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{RadialFunction, RadialGrid};
use crate::params::{sphere_area, Params};
use crate::quadrature::{beta_fn, Rule};

const ANGULAR_POINTS: usize = 14;
const ZONE_PANEL: f64 = 0.5;

/// Accuracy controls for the radial quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// Target relative accuracy per potential value.
    pub tol: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { tol: 1e-8 }
    }
}

impl QuadratureOptions {
    pub fn new(tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol < 1e-2) {
            return Err(Error::domain(format!(
                "quadrature tolerance {tol} must lie in (0, 1e-2)"
            )));
        }
        Ok(QuadratureOptions { tol })
    }

    /// Gauss–Legendre points per radial panel. A panel whose nearest
    /// singularity sits one panel length away converges like `5.83^(-2m)`.
    fn radial_points(&self) -> usize {
        let m = ((100.0 / self.tol).ln() / (2.0 * 5.83f64.ln())).ceil() as usize;
        m.max(4)
    }

    /// Ratio between the grid ends and the start of the analytic closures.
    fn buffer(&self) -> f64 {
        (10.0 / self.tol.sqrt()).max(1e2)
    }

    /// Smallest graded panel, relative to the panel being graded. The
    /// diagonal behaves like `|r-s|^(alpha-1)`, so the cut-off shrinks as
    /// that cusp gets sharper.
    fn grading_floor(&self, alpha: f64) -> f64 {
        (1e-2 * self.tol).powf(1.0 / alpha.min(2.0))
    }
}

fn check_order(n: u32, alpha: f64) -> Result<()> {
    if n < 3 {
        return Err(Error::domain(format!("dimension n = {n} must be at least 3")));
    }
    if !(alpha > 1.0 && alpha < n as f64) {
        return Err(Error::domain(format!(
            "quadrature needs 1 < alpha < n, got alpha = {alpha}, n = {n}"
        )));
    }
    Ok(())
}

/// Precomputed rules and constants for `A(r,s)` at fixed `(n, alpha)`.
#[derive(Debug, Clone)]
pub struct AngularKernel {
    n: u32,
    alpha: f64,
    a: f64,
    beta: f64,
    measure: f64,
    far: f64,
    diagonal: f64,
    jacobi: Rule,
    legendre: Rule,
}

impl AngularKernel {
    pub fn new(n: u32, alpha: f64) -> Result<Self> {
        check_order(n, alpha)?;
        let nf = n as f64;
        let a = (nf - 3.0) / 2.0;
        let beta = (alpha - nf) / 2.0;
        // ∫_{-1}^{1} (1-t)^(beta+a) (1+t)^a dt
        let diagonal = 2f64.powf(beta + 2.0 * a + 1.0) * beta_fn((alpha - 1.0) / 2.0, a + 1.0);
        Ok(AngularKernel {
            n,
            alpha,
            a,
            beta,
            measure: sphere_area(n - 2),
            far: sphere_area(n - 1),
            diagonal,
            jacobi: Rule::gauss_jacobi(ANGULAR_POINTS, 0.0, a),
            legendre: Rule::gauss_legendre(ANGULAR_POINTS),
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `|S^(n-1)|`, the far-field constant: `A(r,s) -> |S^(n-1)| max(r,s)^(alpha-n)`.
    pub fn far_constant(&self) -> f64 {
        self.far
    }

    /// `A(r,s)` for `r, s >= 0`, not both zero.
    pub fn eval(&self, r: f64, s: f64) -> f64 {
        if r == 0.0 || s == 0.0 {
            return self.far * r.max(s).powf(self.alpha - self.n as f64);
        }
        let rs = r * s;
        let d = r - s;
        let d2 = d * d;
        if d2 == 0.0 {
            return self.measure * (2.0 * rs).powf(self.beta) * self.diagonal;
        }
        let (a, beta) = (self.a, self.beta);
        let sum2 = (r + s) * (r + s);
        let two_rs = 2.0 * rs;
        // t in [-1, 0], y = 1 + t
        let left = self
            .jacobi
            .integrate(0.0, 1.0, |y| (sum2 - two_rs * y).powf(beta) * pow_or_one(2.0 - y, a));
        // t in [0, 1], x = 1 - t, r² + s² - 2rst = 2rs (x + eps)
        let eps = d2 / two_rs;
        let right = two_rs.powf(beta) * self.near_part(eps);
        self.measure * (left + right)
    }

    /// `∫_0^1 x^a (2-x)^a (x + eps)^beta dx`.
    fn near_part(&self, eps: f64) -> f64 {
        let (a, beta) = (self.a, self.beta);
        let g = |x: f64| pow_or_one(2.0 - x, a) * (x + eps).powf(beta);
        if eps >= 1.0 {
            return self.jacobi.integrate(0.0, 1.0, g);
        }
        let mut total = self.jacobi.integrate(0.0, eps, g);
        let mut lower = eps;
        const SWITCH: f64 = 0.25;
        if eps < SWITCH {
            // x = e^u: the pole of (x + eps)^beta moves to Im u = ±π, so
            // wide panels stay accurate across many decades.
            let (u0, u1) = (eps.ln(), SWITCH.ln());
            let panels = ((u1 - u0) / 2.0).ceil().max(1.0) as usize;
            let width = (u1 - u0) / panels as f64;
            for k in 0..panels {
                let lo = u0 + width * k as f64;
                let hi = if k + 1 == panels { u1 } else { lo + width };
                total += self.legendre.integrate(lo, hi, |u| {
                    let x = u.exp();
                    x * pow_or_one(x, a) * g(x)
                });
            }
            lower = SWITCH;
        }
        while lower < 1.0 {
            let hi = (2.0 * lower).min(1.0);
            total += self.legendre.integrate(lower, hi, |x| pow_or_one(x, a) * g(x));
            lower = hi;
        }
        total
    }
}

#[inline]
fn pow_or_one(x: f64, a: f64) -> f64 {
    if a == 0.0 {
        1.0
    } else {
        x.powf(a)
    }
}

/// `A(r,s)` including the full `(n-2)`-sphere measure.
///
/// `A(0,s) = |S^(n-1)| s^(alpha-n)`. Requires `1 < alpha < n`.
pub fn angular_kernel(r: f64, s: f64, n: u32, alpha: f64) -> Result<f64> {
    if !(r >= 0.0 && s >= 0.0 && r.is_finite() && s.is_finite()) || (r == 0.0 && s == 0.0) {
        return Err(Error::domain(format!(
            "kernel radii must be nonnegative and not both zero, got ({r}, {s})"
        )));
    }
    Ok(AngularKernel::new(n, alpha)?.eval(r, s))
}

/// Quadrature row for one target radius.
struct Row {
    entries: Vec<(f64, f64)>,
    head_cut: f64,
    tail_cut: f64,
}

/// Discretized weighted potential operator from a source grid to a target
/// grid.
///
/// Each row holds nonnegative weights against `f` sampled at a shared pool
/// of quadrature radii, plus the far-field closure data for the parts of
/// `(0, ∞)` outside the numerically integrated range.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    n: u32,
    alpha: f64,
    sigma: f64,
    source: RadialGrid,
    target: RadialGrid,
    pool: Vec<f64>,
    offsets: Vec<usize>,
    indices: Vec<u32>,
    weights: Vec<f64>,
    head_cut: Vec<f64>,
    tail_cut: Vec<f64>,
    far: f64,
}

struct RowBuilder<'a> {
    kernel: &'a AngularKernel,
    source: &'a RadialGrid,
    sigma: f64,
    rule: Rule,
    buffer: f64,
    floor: f64,
}

impl RowBuilder<'_> {
    fn build(&self, r: f64) -> Row {
        let src = self.source;
        let head_cut = src.first().min(r) / self.buffer;
        let tail_cut = src.last().max(r) * self.buffer;

        let logs = src.log_nodes();
        let mut breaks = Vec::with_capacity(src.len() + 64);
        breaks.push(head_cut.ln());
        push_zone(&mut breaks, head_cut.ln(), logs[0]);
        breaks.extend_from_slice(&logs[1..]);
        push_zone(&mut breaks, logs[logs.len() - 1], tail_cut.ln());

        let ts = r.ln();
        let mut nodes = Vec::with_capacity(breaks.len() * (self.rule.len() + 4));
        for w in breaks.windows(2) {
            self.panel(w[0], w[1], ts, &mut nodes);
        }
        let power = self.kernel.n as f64 - self.sigma;
        let entries = nodes
            .into_iter()
            .map(|(t, w)| {
                let s = t.exp();
                (s, w * s.powf(power) * self.kernel.eval(r, s))
            })
            .collect();
        Row {
            entries,
            head_cut,
            tail_cut,
        }
    }

    fn panel(&self, lo: f64, hi: f64, ts: f64, out: &mut Vec<(f64, f64)>) {
        let h = hi - lo;
        let floor = self.floor * h;
        if ts > lo && ts < hi {
            self.graded(ts, lo, floor, out);
            self.graded(ts, hi, floor, out);
            return;
        }
        let dist = if ts <= lo { lo - ts } else { ts - hi };
        // a singularity at least 0.9 panel lengths away is resolved by the
        // plain rule; the margin keeps uniform-grid neighbours off the threshold
        if dist < 0.9 * h {
            let (near, far) = if ts <= lo { (lo, hi) } else { (hi, lo) };
            self.graded(near, far, floor.max(dist), out);
        } else {
            self.plain(lo, hi, out);
        }
    }

    /// Dyadic panels on the interval between `near` and `far`, refined
    /// toward `near` until the innermost panel is no longer than `floor`.
    /// Panels are placed by their offsets from `near` so that tiny widths
    /// carry no cancellation error.
    fn graded(&self, near: f64, far: f64, floor: f64, out: &mut Vec<(f64, f64)>) {
        let dir = (far - near).signum();
        let mut len = (far - near).abs();
        while len > floor {
            let inner = 0.5 * len;
            self.offset_panel(near, dir, inner, len, out);
            len = inner;
        }
        self.offset_panel(near, dir, 0.0, len, out);
    }

    fn offset_panel(&self, near: f64, dir: f64, from: f64, to: f64, out: &mut Vec<(f64, f64)>) {
        let mid = 0.5 * (from + to);
        let half = 0.5 * (to - from);
        out.extend(
            self.rule
                .nodes()
                .iter()
                .zip(self.rule.weights())
                .map(|(&x, &w)| (near + dir * (mid + half * x), half * w)),
        );
    }

    fn plain(&self, lo: f64, hi: f64, out: &mut Vec<(f64, f64)>) {
        out.extend(self.rule.mapped(lo, hi));
    }
}

/// Appends the break points after `lo` that split `[lo, hi]` into panels
/// of at most [`ZONE_PANEL`], ending exactly at `hi`.
fn push_zone(breaks: &mut Vec<f64>, lo: f64, hi: f64) {
    let count = ((hi - lo) / ZONE_PANEL).ceil().max(1.0) as usize;
    let step = (hi - lo) / count as f64;
    breaks.extend((1..count).map(|k| lo + step * k as f64));
    breaks.push(hi);
}

impl KernelMatrix {
    /// Assembles the operator `f -> P_sigma[f]` from `source` to `target`.
    pub fn assemble(
        source: &RadialGrid,
        target: &RadialGrid,
        n: u32,
        alpha: f64,
        sigma: f64,
        opts: &QuadratureOptions,
    ) -> Result<Self> {
        check_order(n, alpha)?;
        if !(sigma.is_finite() && sigma < n as f64) {
            return Err(Error::domain(format!("weight sigma = {sigma} must be below n = {n}")));
        }
        let kernel = AngularKernel::new(n, alpha)?;
        let builder = RowBuilder {
            kernel: &kernel,
            source,
            sigma,
            rule: Rule::gauss_legendre(opts.radial_points()),
            buffer: opts.buffer(),
            floor: opts.grading_floor(alpha),
        };
        let rows: Vec<Row> = target.nodes().par_iter().map(|&r| builder.build(r)).collect();

        let mut pool = Vec::new();
        let mut lookup: HashMap<u64, u32> = HashMap::new();
        let total: usize = rows.iter().map(|row| row.entries.len()).sum();
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut head_cut = Vec::with_capacity(rows.len());
        let mut tail_cut = Vec::with_capacity(rows.len());
        offsets.push(0);
        for row in rows {
            for (s, w) in row.entries {
                let idx = *lookup.entry(s.to_bits()).or_insert_with(|| {
                    pool.push(s);
                    (pool.len() - 1) as u32
                });
                indices.push(idx);
                weights.push(w);
            }
            offsets.push(indices.len());
            head_cut.push(row.head_cut);
            tail_cut.push(row.tail_cut);
        }
        Ok(KernelMatrix {
            n,
            alpha,
            sigma,
            source: source.clone(),
            target: target.clone(),
            pool,
            offsets,
            indices,
            weights,
            head_cut,
            tail_cut,
            far: kernel.far_constant(),
        })
    }

    pub fn source(&self) -> &RadialGrid {
        &self.source
    }

    pub fn target(&self) -> &RadialGrid {
        &self.target
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Quadrature radii and weights of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        self.indices[range.clone()]
            .iter()
            .zip(&self.weights[range])
            .map(|(&k, &w)| (self.pool[k as usize], w))
    }

    /// Number of distinct quadrature radii.
    pub fn pool_size(&self) -> usize {
        self.pool.len()
    }

    /// Radii below which (resp. above which) row `i` uses the analytic
    /// far-field closure.
    pub fn closure_cuts(&self, i: usize) -> (f64, f64) {
        (self.head_cut[i], self.tail_cut[i])
    }

    /// Checks that the head and tail of `f` give a convergent integral.
    pub fn check_integrable(&self, f: &RadialFunction) -> Result<()> {
        let nf = self.n as f64;
        let head = nf - self.sigma + f.head_exp();
        if !(head > 0.0) {
            return Err(Error::divergence(format!(
                "integrand near 0 behaves like s^({head} - 1): need n - sigma + head_exp > 0"
            )));
        }
        if !f.is_compact() {
            let tail = self.alpha - self.sigma + f.tail_exp();
            if !(tail < 0.0) {
                return Err(Error::divergence(format!(
                    "integrand at infinity behaves like s^({tail} - 1): need alpha - sigma + tail_exp < 0"
                )));
            }
        }
        Ok(())
    }

    /// Potential values at the target radii.
    pub fn apply(&self, f: &RadialFunction) -> Result<Vec<f64>> {
        if f.grid() != &self.source {
            return Err(Error::GridMismatch(
                "function grid differs from the kernel source grid".into(),
            ));
        }
        self.check_integrable(f)?;
        let samples: Vec<f64> = self.pool.iter().map(|&s| f.eval(s)).collect();

        let nf = self.n as f64;
        let head_power = nf - self.sigma + f.head_exp();
        let log_head = f.first_value().ln() - f.head_exp() * self.source.first().ln();
        let tail_power = self.alpha - self.sigma + f.tail_exp();
        let log_tail = f.last_value().ln() - f.tail_exp() * self.source.last().ln();

        Ok(self
            .target
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let range = self.offsets[i]..self.offsets[i + 1];
                let mut sum = 0.0;
                for (&k, &w) in self.indices[range.clone()].iter().zip(&self.weights[range]) {
                    sum += w * samples[k as usize];
                }
                let a = self.head_cut[i];
                sum += self.far * r.powf(self.alpha - nf) * (log_head + head_power * a.ln()).exp() / head_power;
                if !f.is_compact() {
                    let b = self.tail_cut[i];
                    sum += self.far * (log_tail + tail_power * b.ln()).exp() / (-tail_power);
                }
                sum
            })
            .collect())
    }

    /// The potential as a radial function on the target grid, with head and
    /// tail exponents fitted from the two outermost values at each end.
    pub fn potential(&self, f: &RadialFunction) -> Result<RadialFunction> {
        let values = self.apply(f)?;
        fitted_function(self.target.clone(), values)
    }
}

/// Wraps positive samples with log-log slopes of the end pairs as
/// extrapolation exponents.
pub(crate) fn fitted_function(grid: RadialGrid, values: Vec<f64>) -> Result<RadialFunction> {
    let n = values.len();
    let t = grid.log_nodes();
    let head = (values[1] / values[0]).ln() / (t[1] - t[0]);
    let tail = (values[n - 1] / values[n - 2]).ln() / (t[n - 1] - t[n - 2]);
    RadialFunction::new(grid, values, head, tail)
}

/// Assembles a [`KernelMatrix`] with default quadrature options.
pub fn assemble_kernel(
    source: &RadialGrid,
    target: &RadialGrid,
    n: u32,
    alpha: f64,
    sigma: f64,
) -> Result<KernelMatrix> {
    KernelMatrix::assemble(source, target, n, alpha, sigma, &QuadratureOptions::default())
}

/// `P_sigma[f]` on the grid of `f`, with `(n, alpha)` taken from `params`.
pub fn riesz_potential(f: &RadialFunction, sigma: f64, params: &Params) -> Result<RadialFunction> {
    riesz_potential_on(f, sigma, params, f.grid(), &QuadratureOptions::default())
}

/// `P_sigma[f]` on an arbitrary target grid.
pub fn riesz_potential_on(
    f: &RadialFunction,
    sigma: f64,
    params: &Params,
    target: &RadialGrid,
    opts: &QuadratureOptions,
) -> Result<RadialFunction> {
    let matrix = KernelMatrix::assemble(f.grid(), target, params.n, params.alpha, sigma, opts)?;
    matrix.potential(f)
}

/// `P_sigma[f](r)` at a single radius.
pub fn riesz_potential_at(
    f: &RadialFunction,
    sigma: f64,
    params: &Params,
    r: f64,
    opts: &QuadratureOptions,
) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain(format!("evaluation radius must be positive, got {r}")));
    }
    // Replicate the single radius into a valid target grid.
    let target = RadialGrid::log_spaced(r, r * (1.0 + 1e-9), crate::grid::MIN_NODES)?;
    let matrix = KernelMatrix::assemble(f.grid(), &target, params.n, params.alpha, sigma, opts)?;
    Ok(matrix.apply(f)?[0])
}
