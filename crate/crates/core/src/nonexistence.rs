//! Exponent iteration behind the non-existence argument and the log-domain
//! blow-up recurrence.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::criteria;
use crate::error::{Error, Result};
use crate::params::Params;

const DEGENERATE_TOL: f64 = 1e-12;
const CONVERGED_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceVerdict {
    DivergesToMinusInfinity,
    ConvergesNegative,
    DivergesToPlusInfinity,
    Stationary,
}

/// Sequences `a_j, b_j` of the exponent iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentTrace {
    /// Parameters the recurrence ran with; equal to the input unless
    /// `swapped` is set.
    pub params: Params,
    /// Whether the roles `(p, sigma2) <-> (q, sigma1)` were exchanged so that
    /// the tracked ratio is the larger one.
    pub swapped: bool,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub verdict: TraceVerdict,
    /// Fixed point `G/(pq - 1)` of the affine map `a_j -> a_(j+1)`; absent
    /// when `pq = 1`.
    pub limit: Option<f64>,
    /// First index at which the trace crossed its detection threshold:
    /// `|a_j| > 10 (n - alpha)` for divergence, `|a_j - limit| < 1e-9` for
    /// convergence.
    pub decided_at: Option<usize>,
}

/// `G = alpha(1+q) - (sigma1 + sigma2 q)`.
fn growth(params: &Params) -> f64 {
    params.alpha * (1.0 + params.q) - (params.sigma1 + params.sigma2 * params.q)
}

/// One step `a -> (b, a')` with `b = p a - alpha + sigma2`,
/// `a' = q b - alpha + sigma1`.
pub fn exponent_recurrence(a: f64, params: &Params) -> (f64, f64) {
    let b = params.p * a - params.alpha + params.sigma2;
    (b, params.q * b - params.alpha + params.sigma1)
}

/// Runs the iteration from `a_0 = n - alpha` for `j_max` steps.
pub fn iterate_exponents(params: &Params, j_max: usize) -> Result<ExponentTrace> {
    params.validate()?;
    if j_max < 1 {
        return Err(Error::domain("j_max must be at least 1"));
    }
    for s in [params.sigma1, params.sigma2] {
        if !(s < params.alpha) {
            return Err(Error::domain(format!(
                "weight {s} must be below alpha = {}",
                params.alpha
            )));
        }
    }
    let pq = params.pq();
    let degenerate = (pq - 1.0).abs() < DEGENERATE_TOL;
    let swapped = !degenerate && {
        let e = criteria::exponents(params)?;
        e.ratio2 > e.ratio1
    };
    let run = if swapped { params.swapped() } else { *params };

    let x = run.n_minus_alpha();
    let mut a = Vec::with_capacity(j_max + 1);
    let mut b = Vec::with_capacity(j_max + 1);
    let mut cur = x;
    for _ in 0..=j_max {
        let (bk, next) = exponent_recurrence(cur, &run);
        a.push(cur);
        b.push(bk);
        cur = next;
    }

    let limit = (!degenerate).then(|| growth(&run) / (pq - 1.0));
    let band = 1e-12 * x.max(1.0);
    let verdict = match limit {
        None => TraceVerdict::DivergesToMinusInfinity,
        Some(l) if pq < 1.0 => {
            debug_assert!(l < 0.0);
            TraceVerdict::ConvergesNegative
        }
        Some(l) if (x - l).abs() <= band => TraceVerdict::Stationary,
        Some(l) if x < l => TraceVerdict::DivergesToMinusInfinity,
        Some(_) => TraceVerdict::DivergesToPlusInfinity,
    };
    let threshold = 10.0 * x;
    let decided_at = a.iter().position(|&aj| match verdict {
        TraceVerdict::DivergesToMinusInfinity => aj < -threshold,
        TraceVerdict::DivergesToPlusInfinity => aj > threshold,
        TraceVerdict::ConvergesNegative | TraceVerdict::Stationary => {
            (aj - limit.expect("limit exists")).abs() < CONVERGED_TOL
        }
    });

    Ok(ExponentTrace {
        params: run,
        swapped,
        a,
        b,
        verdict,
        limit,
        decided_at,
    })
}

/// `a_j = (pq)^j (a_0 - G/(pq-1)) + G/(pq-1)` with `a_0 = n - alpha`.
pub fn closed_form_a(j: usize, params: &Params) -> Result<f64> {
    let pq = params.pq();
    if (pq - 1.0).abs() < DEGENERATE_TOL {
        return Err(Error::Degenerate(format!(
            "pq = {pq}: use the arithmetic form a_j = a_0 - j G"
        )));
    }
    let l = growth(params) / (pq - 1.0);
    Ok(pq.powi(j as i32) * (params.n_minus_alpha() - l) + l)
}

/// `a_j = a_0 - j G`, valid when `pq = 1`.
pub fn arithmetic_a(j: usize, params: &Params) -> f64 {
    params.n_minus_alpha() - j as f64 * growth(params)
}

impl ExponentTrace {
    /// CSV with columns `j,a_j,b_j`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["j", "a_j", "b_j"])?;
        for (j, (a, b)) in self.a.iter().zip(&self.b).enumerate() {
            w.write_record([j.to_string(), format!("{a:.16e}"), format!("{b:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Blow-up sequences `beta_k, a_k` with the per-step induction inequality
/// `a_k^p >= (beta_k p)^(m(l+1))`, all in natural logarithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupTrace {
    pub p: f64,
    pub l: u32,
    pub m: f64,
    pub beta: Vec<f64>,
    pub log_beta: Vec<f64>,
    pub log_a: Vec<f64>,
    pub holds: Vec<bool>,
}

impl BlowupTrace {
    pub fn all_hold(&self) -> bool {
        self.holds.iter().all(|&h| h)
    }
}

/// Smallest admissible seed `beta_0 = 2^(1+l+p) p^l`.
pub fn minimal_beta0(p: f64, l: u32) -> f64 {
    2f64.powf(1.0 + l as f64 + p) * p.powi(l as i32)
}

/// Iterates `beta_(k+1) = 2 p beta_k`, `a_(k+1) = a_k^p / (2 beta_k p)^m`
/// with `m = n + alpha`, from the minimal admissible
/// `a_0 = (beta_0 p)^(m(l+1)/p)`.
pub fn blowup_recurrence(p: f64, n: u32, alpha: f64, l: u32, beta0: f64, k_max: usize) -> Result<BlowupTrace> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Precondition(format!("p = {p} must exceed 1")));
    }
    if !(l as f64 * (p - 1.0) > 2.0) {
        return Err(Error::Precondition(format!(
            "l (p - 1) = {} must exceed 2",
            l as f64 * (p - 1.0)
        )));
    }
    if !(alpha > 0.0 && alpha < n as f64 && alpha % 2.0 == 0.0) {
        return Err(Error::Precondition(format!(
            "alpha = {alpha} must be an even integer in (0, n)"
        )));
    }
    let floor = minimal_beta0(p, l);
    if !(beta0 >= floor * (1.0 - 1e-14)) {
        return Err(Error::Precondition(format!(
            "beta_0 = {beta0} is below 2^(1+l+p) p^l = {floor}"
        )));
    }
    let m = n as f64 + alpha;
    let exponent = m * (l as f64 + 1.0);
    let ln_p = p.ln();
    let ln_2p = (2.0 * p).ln();

    let mut log_beta = Vec::with_capacity(k_max + 1);
    let mut log_a = Vec::with_capacity(k_max + 1);
    let mut holds = Vec::with_capacity(k_max + 1);
    let mut lb = beta0.ln();
    let mut la = exponent / p * (lb + ln_p);
    for _ in 0..=k_max {
        let lhs = p * la;
        let rhs = exponent * (lb + ln_p);
        log_beta.push(lb);
        log_a.push(la);
        holds.push(lhs >= rhs - 1e-12 * rhs.abs());
        la = p * la - m * (ln_2p + lb);
        lb += ln_2p;
    }
    Ok(BlowupTrace {
        p,
        l,
        m,
        beta: log_beta.iter().map(|x| x.exp()).collect(),
        log_beta,
        log_a,
        holds,
    })
}
