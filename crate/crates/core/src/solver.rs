//! Normalized Picard iteration for the radial system
//! `u = P_{σ1}[v^q]`, `v = P_{σ2}[u^p]`.
//!
//! Each step divides the two potentials by their values at the smallest
//! grid node, which removes the amplitude gauge of the system. Damping is
//! applied to `ln u` and `ln v`, so iterates stay positive.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::candidate::{candidate_exponents, candidate_profiles, Rate};
use crate::error::{Error, Result};
use crate::grid::{RadialFunction, RadialGrid};
use crate::kernel::{fitted_function, KernelMatrix, QuadratureOptions};
use crate::params::Params;

/// Growth of the residual over its running minimum that marks divergence.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    Diverged,
    MaxIterations,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Converged => "Converged",
            SolveStatus::Diverged => "Diverged",
            SolveStatus::MaxIterations => "MaxIterations",
        };
        f.write_str(s)
    }
}

/// Starting pair of a solve.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
pub enum Init {
    CandidateSlow,
    CandidateFast,
    Custom(RadialFunction, RadialFunction),
}

/// Normalization factors of one step: the potentials at the reference
/// radius before division.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepScales {
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub iterations: usize,
    pub u: RadialFunction,
    pub v: RadialFunction,
    /// `max|Δu|/max|u|` and the same for `v`, whichever is larger.
    pub residual_history: Vec<f64>,
    pub normalization_history: Vec<StepScales>,
}

impl SolveResult {
    pub fn final_residual(&self) -> Option<f64> {
        self.residual_history.last().copied()
    }

    /// Writes `r,u,v` rows at the grid nodes.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "u", "v"])?;
        for ((r, u), v) in self.u.grid().nodes().iter().zip(self.u.values()).zip(self.v.values()) {
            w.write_record([format!("{r:.16e}"), format!("{u:.16e}"), format!("{v:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pre-assembled operators for repeated steps on one grid.
#[derive(Debug, Clone)]
pub struct PicardOperator {
    params: Params,
    first: KernelMatrix,
    second: Option<KernelMatrix>,
}

impl PicardOperator {
    pub fn new(params: &Params, grid: &RadialGrid, opts: &QuadratureOptions) -> Result<Self> {
        params.validate()?;
        let first = KernelMatrix::assemble(grid, grid, params.n, params.alpha, params.sigma1, opts)?;
        let second = if params.sigma2 == params.sigma1 {
            None
        } else {
            Some(KernelMatrix::assemble(
                grid,
                grid,
                params.n,
                params.alpha,
                params.sigma2,
                opts,
            )?)
        };
        Ok(PicardOperator {
            params: *params,
            first,
            second,
        })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn grid(&self) -> &RadialGrid {
        self.first.source()
    }

    /// One normalized step `(u, v) -> (P_{σ1}[v^q], P_{σ2}[u^p])`, each
    /// divided by its value at the smallest node.
    pub fn step(&self, u: &RadialFunction, v: &RadialFunction) -> Result<(RadialFunction, RadialFunction, StepScales)> {
        let second = self.second.as_ref().unwrap_or(&self.first);
        let p = &self.params;
        let (pv, pu) = rayon::join(|| self.first.apply(&v.powf(p.q)), || second.apply(&u.powf(p.p)));
        let (pv, pu) = (pv?, pu?);
        let scales = StepScales { u: pv[0], v: pu[0] };
        let grid = self.grid().clone();
        let u_next = fitted_function(grid.clone(), pv.iter().map(|x| x / scales.u).collect())?;
        let v_next = fitted_function(grid, pu.iter().map(|x| x / scales.v).collect())?;
        Ok((u_next, v_next, scales))
    }
}

/// A single normalized Picard step; assembles the operators on the grid of
/// `u`.
pub fn picard_step(
    u: &RadialFunction,
    v: &RadialFunction,
    params: &Params,
    opts: &QuadratureOptions,
) -> Result<(RadialFunction, RadialFunction, StepScales)> {
    if u.grid() != v.grid() {
        return Err(Error::GridMismatch("u and v live on different grids".into()));
    }
    PicardOperator::new(params, u.grid(), opts)?.step(u, v)
}

fn relative_change(old: &RadialFunction, new: &RadialFunction) -> f64 {
    let diff = old
        .values()
        .iter()
        .zip(new.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = new.values().iter().copied().fold(0.0, f64::max);
    diff / scale
}

/// Iteration settings of [`picard_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            damping: 0.5,
            tol: 1e-6,
            max_iter: 100,
        }
    }
}

/// Damped normalized Picard iteration from `init`.
///
/// The status reflects observed residuals only: `Converged` once the
/// residual drops below `tol`, `Diverged` once it exceeds
/// [`DIVERGENCE_FACTOR`] times its running minimum, or once a later
/// iterate has a divergent potential. A divergent potential of the initial
/// pair is returned as an error.
pub fn picard_solve(
    params: &Params,
    init: Init,
    grid: &RadialGrid,
    settings: &SolveOptions,
    opts: &QuadratureOptions,
) -> Result<SolveResult> {
    params.validate()?;
    let theta = settings.damping;
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::domain(format!("damping must lie in (0, 1], got {theta}")));
    }
    if !(settings.tol > 0.0) {
        return Err(Error::domain(format!(
            "tolerance must be positive, got {}",
            settings.tol
        )));
    }
    let (mut u, mut v) = match init {
        Init::CandidateSlow | Init::CandidateFast => {
            let rate = if matches!(init, Init::CandidateSlow) {
                Rate::Slow
            } else {
                Rate::Fast
            };
            let (t1, t2) = candidate_exponents(params, rate)?;
            candidate_profiles(t1, t2, grid)?
        }
        Init::Custom(u, v) => {
            if u.grid() != grid || v.grid() != grid {
                return Err(Error::GridMismatch(
                    "initial iterates must live on the solve grid".into(),
                ));
            }
            (u, v)
        }
    };
    let op = PicardOperator::new(params, grid, opts)?;
    let mut residuals = Vec::new();
    let mut scales = Vec::new();
    let mut best = f64::INFINITY;
    let mut status = SolveStatus::MaxIterations;
    for _ in 0..settings.max_iter {
        let (su, sv, s) = match op.step(&u, &v) {
            Ok(x) => x,
            // the iterate decays too slowly for its potential to exist
            Err(e) if e.is_divergence() && !residuals.is_empty() => {
                status = SolveStatus::Diverged;
                break;
            }
            Err(e) => return Err(e),
        };
        let u_next = u.geometric_blend(&su, theta)?;
        let v_next = v.geometric_blend(&sv, theta)?;
        let res = relative_change(&u, &u_next).max(relative_change(&v, &v_next));
        u = u_next;
        v = v_next;
        residuals.push(res);
        scales.push(s);
        best = best.min(res);
        if res < settings.tol {
            status = SolveStatus::Converged;
            break;
        }
        if res > DIVERGENCE_FACTOR * best {
            status = SolveStatus::Diverged;
            break;
        }
    }
    Ok(SolveResult {
        status,
        iterations: residuals.len(),
        u,
        v,
        residual_history: residuals,
        normalization_history: scales,
    })
}
