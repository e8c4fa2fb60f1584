//! Explicit candidate solutions `u = (1+r²)^(-theta1)`, `v = (1+r²)^(-theta2)`
//! and a numerical check that the coefficients they induce are bounded
//! above and below.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::criteria;
use crate::error::{Error, Result};
use crate::grid::{RadialFunction, RadialGrid};
use crate::kernel::{KernelMatrix, QuadratureOptions};
use crate::params::Params;

/// Drift across the grid beyond which a monotone ratio is called unbounded.
pub const DRIFT_FACTOR: f64 = 1e3;
/// End log-slope below which a ratio counts as settled.
pub const STABLE_SLOPE: f64 = 0.02;
const LIMIT_NODES: usize = 5;

/// Tail decay of the candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rate {
    /// `2 theta_i` from the criterion ratios.
    Slow,
    /// `2 theta_1 = 2 theta_2 = n - alpha`.
    Fast,
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rate::Slow => "slow",
            Rate::Fast => "fast",
        })
    }
}

impl FromStr for Rate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slow" => Ok(Rate::Slow),
            "fast" => Ok(Rate::Fast),
            other => Err(Error::domain(format!("unknown rate {other:?}, expected slow or fast"))),
        }
    }
}

/// `(theta1, theta2)` for the requested rate, without regime checks.
pub fn candidate_exponents(params: &Params, rate: Rate) -> Result<(f64, f64)> {
    match rate {
        Rate::Slow => {
            let e = criteria::exponents(params)?;
            Ok((e.theta1, e.theta2))
        }
        Rate::Fast => {
            params.validate()?;
            let half = 0.5 * params.n_minus_alpha();
            Ok((half, half))
        }
    }
}

/// Checks the hypotheses under which the candidates are claimed to work.
pub fn check_regime(params: &Params, rate: Rate) -> Result<()> {
    params.validate()?;
    let x = params.n_minus_alpha();
    match rate {
        Rate::Slow => {
            if !(params.pq() > 1.0) {
                return Err(Error::Regime(format!("slow rate needs pq > 1, got {}", params.pq())));
            }
            let e = criteria::exponents(params)?;
            if !(e.m < x) {
                return Err(Error::Regime(format!(
                    "slow rate needs M < n - alpha, got M = {} and n - alpha = {x}",
                    e.m
                )));
            }
        }
        Rate::Fast => {
            let n = params.dim();
            if !(params.p > (n - params.sigma2) / x && params.q > (n - params.sigma1) / x) {
                return Err(Error::Regime(format!(
                    "fast rate needs p > (n - sigma2)/(n - alpha) = {} and q > (n - sigma1)/(n - alpha) = {}",
                    (n - params.sigma2) / x,
                    (n - params.sigma1) / x
                )));
            }
        }
    }
    Ok(())
}

/// Samples `(1+r²)^(-theta1)` and `(1+r²)^(-theta2)` on `grid`.
pub fn candidate_profiles(theta1: f64, theta2: f64, grid: &RadialGrid) -> Result<(RadialFunction, RadialFunction)> {
    let make = |theta: f64| RadialFunction::from_fn(grid.clone(), |r| (1.0 + r * r).powf(-theta), 0.0, -2.0 * theta);
    Ok((make(theta1)?, make(theta2)?))
}

/// Candidate pair for `rate`, rejecting parameters outside its regime.
pub fn build_candidate(params: &Params, rate: Rate, grid: &RadialGrid) -> Result<(RadialFunction, RadialFunction)> {
    check_regime(params, rate)?;
    let (t1, t2) = candidate_exponents(params, rate)?;
    candidate_profiles(t1, t2, grid)
}

/// `alpha < 2 theta1 p + sigma2 < n` and `alpha < 2 theta2 q + sigma1 < n`.
pub fn sandwich_check(params: &Params) -> Result<bool> {
    if !(params.pq() > 1.0) {
        return Err(Error::domain(format!(
            "sandwich bounds need pq > 1, got {}",
            params.pq()
        )));
    }
    let e = criteria::exponents(params)?;
    let n = params.dim();
    let a = params.alpha;
    let first = 2.0 * e.theta1 * params.p + params.sigma2;
    let second = 2.0 * e.theta2 * params.q + params.sigma1;
    Ok(a < first && first < n && a < second && second < n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundednessVerdict {
    DoubleBounded,
    Unbounded,
    Inconclusive,
}

/// Summary of one sampled coefficient ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub min: f64,
    pub max: f64,
    /// `max / min`.
    pub spread: f64,
    pub limit_zero: f64,
    pub limit_inf: f64,
    /// `d ln c / d ln r` fitted over the first and last few nodes.
    pub slope_zero: f64,
    pub slope_inf: f64,
    pub monotone: bool,
}

/// Coefficients `c1 = u / P_sigma1[v^q]` and `c2 = v / P_sigma2[u^p]`
/// induced by a candidate pair.
///
/// The drift factor [`DRIFT_FACTOR`] and the end-slope threshold
/// [`STABLE_SLOPE`] are heuristics, not theorems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub params: Params,
    pub rate: Rate,
    pub theta1: f64,
    pub theta2: f64,
    pub radii: Vec<f64>,
    pub ratios_c1: Vec<f64>,
    pub ratios_c2: Vec<f64>,
    pub c1_min: f64,
    pub c1_max: f64,
    pub c2_min: f64,
    pub c2_max: f64,
    pub c1: RatioSummary,
    pub c2: RatioSummary,
    /// Largest of the two spreads.
    pub spread: f64,
    pub verdict: BoundednessVerdict,
    pub note: String,
}

/// Limit of a geometric-like sequence from three samples (Aitken's delta
/// squared), falling back to the last sample when the differences do not
/// contract.
fn aitken(x0: f64, x1: f64, x2: f64) -> f64 {
    let d1 = x1 - x0;
    let d2 = x2 - x1;
    let denom = d2 - d1;
    if denom == 0.0 || d1 == 0.0 || (d2 / d1).abs() >= 1.0 || !(d2 / d1).is_finite() {
        return x2;
    }
    x2 - d2 * d2 / denom
}

fn log_slope(radii: &[f64], values: &[f64]) -> f64 {
    // least squares of ln c against ln r
    let n = radii.len() as f64;
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn summarize(radii: &[f64], c: &[f64]) -> RatioSummary {
    let n = c.len();
    let k = LIMIT_NODES;
    let min = c.iter().copied().fold(f64::INFINITY, f64::min);
    let max = c.iter().copied().fold(0.0, f64::max);
    let increasing = c.windows(2).all(|w| w[1] >= w[0]);
    let decreasing = c.windows(2).all(|w| w[1] <= w[0]);
    RatioSummary {
        min,
        max,
        spread: max / min,
        limit_zero: aitken(c[k - 1], c[(k - 1) / 2], c[0]),
        limit_inf: aitken(c[n - k], c[n - 1 - (k - 1) / 2], c[n - 1]),
        slope_zero: log_slope(&radii[..k], &c[..k]),
        slope_inf: log_slope(&radii[n - k..], &c[n - k..]),
        monotone: increasing || decreasing,
    }
}

/// Whether the end slope is a persistent power law: the slope over the
/// outermost decade agrees with the end slope to 10%.
fn persistent_slope(radii: &[f64], c: &[f64], at_tail: bool, end_slope: f64) -> bool {
    if end_slope.abs() < STABLE_SLOPE {
        return false;
    }
    let n = radii.len();
    let idx: Vec<usize> = if at_tail {
        let lo = radii[n - 1] / 10.0;
        (0..n).filter(|&i| radii[i] >= lo).collect()
    } else {
        let hi = radii[0] * 10.0;
        (0..n).filter(|&i| radii[i] <= hi).collect()
    };
    if idx.len() < 3 {
        return false;
    }
    let r: Vec<f64> = idx.iter().map(|&i| radii[i]).collect();
    let v: Vec<f64> = idx.iter().map(|&i| c[i]).collect();
    let decade = log_slope(&r, &v);
    (decade - end_slope).abs() <= 0.1 * end_slope.abs()
}

fn judge(radii: &[f64], c: &[f64], s: &RatioSummary) -> BoundednessVerdict {
    let settled = s.slope_zero.abs() < STABLE_SLOPE && s.slope_inf.abs() < STABLE_SLOPE;
    if s.min > 0.0 && s.spread.is_finite() && settled {
        return BoundednessVerdict::DoubleBounded;
    }
    if (s.spread > DRIFT_FACTOR && s.monotone)
        || persistent_slope(radii, c, false, s.slope_zero)
        || persistent_slope(radii, c, true, s.slope_inf)
    {
        return BoundednessVerdict::Unbounded;
    }
    BoundednessVerdict::Inconclusive
}

/// Evaluates both induced coefficients of the candidate pair on `grid`.
pub fn verify_double_bounded(
    params: &Params,
    rate: Rate,
    grid: &RadialGrid,
    opts: &QuadratureOptions,
) -> Result<BoundednessReport> {
    params.validate()?;
    let (theta1, theta2) = candidate_exponents(params, rate)?;
    let (u, v) = candidate_profiles(theta1, theta2, grid)?;

    let m1 = KernelMatrix::assemble(grid, grid, params.n, params.alpha, params.sigma1, opts)?;
    let pv = m1.apply(&v.powf(params.q))?;
    let pu = if params.sigma2 == params.sigma1 {
        m1.apply(&u.powf(params.p))?
    } else {
        KernelMatrix::assemble(grid, grid, params.n, params.alpha, params.sigma2, opts)?.apply(&u.powf(params.p))?
    };
    let c1: Vec<f64> = u.values().iter().zip(&pv).map(|(a, b)| a / b).collect();
    let c2: Vec<f64> = v.values().iter().zip(&pu).map(|(a, b)| a / b).collect();
    let radii = grid.nodes().to_vec();
    let s1 = summarize(&radii, &c1);
    let s2 = summarize(&radii, &c2);
    let verdict = match (judge(&radii, &c1, &s1), judge(&radii, &c2, &s2)) {
        (BoundednessVerdict::DoubleBounded, BoundednessVerdict::DoubleBounded) => BoundednessVerdict::DoubleBounded,
        (BoundednessVerdict::Unbounded, _) | (_, BoundednessVerdict::Unbounded) => BoundednessVerdict::Unbounded,
        _ => BoundednessVerdict::Inconclusive,
    };
    Ok(BoundednessReport {
        params: *params,
        rate,
        theta1,
        theta2,
        radii,
        c1_min: s1.min,
        c1_max: s1.max,
        c2_min: s2.min,
        c2_max: s2.max,
        spread: s1.spread.max(s2.spread),
        ratios_c1: c1,
        ratios_c2: c2,
        c1: s1,
        c2: s2,
        verdict,
        note: format!(
            "heuristic thresholds: settled when |end log-slope| < {STABLE_SLOPE}; \
             unbounded on monotone drift beyond {DRIFT_FACTOR:e} or a persistent end power law"
        ),
    })
}
