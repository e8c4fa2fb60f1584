//! Closed-form existence and non-existence criteria and derived exponents.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Params;

const DEGENERATE_TOL: f64 = 1e-12;
const CRITICAL_TOL: f64 = 1e-12;

/// Exponents attached to a parameter set with `pq != 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedExponents {
    pub theta1: f64,
    pub theta2: f64,
    /// `(alpha(1+q) - (sigma1 + sigma2 q)) / (pq - 1)`, equal to `2 theta1`.
    pub ratio1: f64,
    /// `(alpha(1+p) - (sigma2 + sigma1 p)) / (pq - 1)`, equal to `2 theta2`.
    pub ratio2: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub hyperbola_lhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GeneralVerdict {
    Exists,
    NotExists,
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RadialVerdict {
    RadialNotExists,
    NoConclusion,
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Scalar,
    System,
}

impl fmt::Display for GeneralVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl fmt::Display for RadialVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Both verdicts for one parameter set.
///
/// A verdict is `None` when the parameters fall outside the hypotheses it
/// rests on: weights in `[0, alpha)` for the general verdict, `alpha` in
/// `[2, n)` with weights below `alpha` for the radial one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub mode: Mode,
    pub n_minus_alpha: f64,
    pub hyperbola_lhs: f64,
    /// Absent when `pq = 1`.
    pub exponents: Option<DerivedExponents>,
    pub general_verdict: Option<GeneralVerdict>,
    pub radial_verdict: Option<RadialVerdict>,
}

fn critical_band(n_minus_alpha: f64) -> f64 {
    CRITICAL_TOL * n_minus_alpha.max(1.0)
}

/// `(n - sigma1)/(1 + q) + (n - sigma2)/(1 + p)`.
pub fn hyperbola_lhs(params: &Params) -> f64 {
    let n = params.dim();
    (n - params.sigma1) / (1.0 + params.q) + (n - params.sigma2) / (1.0 + params.p)
}

/// Half-decay exponents and the criterion maximum.
pub fn exponents(params: &Params) -> Result<DerivedExponents> {
    params.validate()?;
    let Params {
        alpha,
        sigma1,
        sigma2,
        p,
        q,
        ..
    } = *params;
    let d = p * q - 1.0;
    if d.abs() < DEGENERATE_TOL {
        return Err(Error::Degenerate(format!("pq = {} is too close to 1", p * q)));
    }
    let ratio1 = (alpha * (1.0 + q) - (sigma1 + sigma2 * q)) / d;
    let ratio2 = (alpha * (1.0 + p) - (sigma2 + sigma1 * p)) / d;
    Ok(DerivedExponents {
        theta1: 0.5 * ratio1,
        theta2: 0.5 * ratio2,
        ratio1,
        ratio2,
        m: ratio1.max(ratio2),
        hyperbola_lhs: hyperbola_lhs(params),
    })
}

/// Evaluates the general and the radial criteria.
pub fn classify(params: &Params) -> Result<Classification> {
    params.validate()?;
    let alpha = params.alpha;
    for (name, s) in [("sigma1", params.sigma1), ("sigma2", params.sigma2)] {
        if !(s < alpha) {
            return Err(Error::domain(format!(
                "{name} = {s} must be below alpha = {alpha}; no criterion applies"
            )));
        }
    }
    let x = params.n_minus_alpha();
    let band = critical_band(x);
    let pq = params.pq();
    let exps = exponents(params).ok();
    let lhs = hyperbola_lhs(params);

    let general_verdict = params.in_general_domain().then(|| {
        if pq <= 1.0 {
            return GeneralVerdict::NotExists;
        }
        let m = exps.expect("pq > 1 away from 1").m;
        if (m - x).abs() <= band {
            GeneralVerdict::Critical
        } else if m < x {
            GeneralVerdict::Exists
        } else {
            GeneralVerdict::NotExists
        }
    });

    let radial_verdict = params.in_radial_domain().then(|| {
        if pq <= 1.0 {
            RadialVerdict::RadialNotExists
        } else if (lhs - x).abs() <= band {
            RadialVerdict::Critical
        } else if lhs > x {
            RadialVerdict::RadialNotExists
        } else {
            RadialVerdict::NoConclusion
        }
    });

    Ok(Classification {
        mode: if params.is_scalar() { Mode::Scalar } else { Mode::System },
        n_minus_alpha: x,
        hyperbola_lhs: lhs,
        exponents: exps,
        general_verdict,
        radial_verdict,
    })
}

fn check_scalar(n: u32, alpha: f64, sigma: f64) -> Result<()> {
    Params::scalar(n, alpha, sigma, 1.0)?;
    Ok(())
}

/// Existence for some double bounded coefficient in the scalar equation:
/// `p > (n - sigma)/(n - alpha)`.
pub fn scalar_criterion(n: u32, alpha: f64, sigma: f64, p: f64) -> Result<bool> {
    Params::scalar(n, alpha, sigma, p)?;
    if !(0.0..alpha).contains(&sigma) {
        return Err(Error::domain(format!("sigma = {sigma} must lie in [0, alpha)")));
    }
    let nf = n as f64;
    Ok(p > (nf - sigma) / (nf - alpha))
}

/// Both sides of
/// `(n-alpha)p + sigma2 - n + p(q(n-alpha) + sigma1 - n) = (pq-1)(n-alpha-ratio2)`.
pub fn exponent_balance(params: &Params) -> Result<(f64, f64)> {
    let e = exponents(params)?;
    let Params {
        sigma1, sigma2, p, q, ..
    } = *params;
    let n = params.dim();
    let x = params.n_minus_alpha();
    let lhs = x * p + sigma2 - n + p * (q * x + sigma1 - n);
    let rhs = (p * q - 1.0) * (x - e.ratio2);
    Ok((lhs, rhs))
}

/// `(n + alpha - 2 sigma)/(n - alpha)`, the scalar critical exponent.
pub fn critical_exponent(n: u32, alpha: f64, sigma: f64) -> Result<f64> {
    check_scalar(n, alpha, sigma)?;
    let nf = n as f64;
    Ok((nf + alpha - 2.0 * sigma) / (nf - alpha))
}

/// Whether `∫ u^(p+1) |x|^(-sigma)` converges for a solution decaying at the
/// slow rate: `n - sigma - (alpha - sigma)(p+1)/(p-1) < 0`.
pub fn finite_energy_predicate(n: u32, alpha: f64, sigma: f64, p: f64) -> Result<bool> {
    check_scalar(n, alpha, sigma)?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::domain(format!("finite energy test needs p > 1, got {p}")));
    }
    if !(sigma < alpha) {
        return Err(Error::domain(format!(
            "finite energy test needs sigma < alpha, got {sigma}"
        )));
    }
    let nf = n as f64;
    Ok(nf - sigma - (alpha - sigma) * (p + 1.0) / (p - 1.0) < 0.0)
}

/// `(n - sigma)/(1 + p) - (n - alpha)/2`: positive exactly in the
/// subcritical range, zero at the critical exponent.
pub fn contradiction_factor(n: u32, alpha: f64, sigma: f64, p: f64) -> f64 {
    let nf = n as f64;
    (nf - sigma) / (1.0 + p) - (nf - alpha) / 2.0
}

/// `hyperbola_lhs - (n - alpha)`, the system analogue of
/// [`contradiction_factor`].
pub fn system_closure_factor(params: &Params) -> f64 {
    hyperbola_lhs(params) - params.n_minus_alpha()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(n: u32, alpha: f64, s1: f64, s2: f64, p: f64, q: f64) -> Params {
        Params::new(n, alpha, s1, s2, p, q).unwrap()
    }

    #[test]
    fn reference_exponents() {
        let e = exponents(&sys(5, 2.0, 0.0, 0.0, 3.0, 3.0)).unwrap();
        assert!((e.theta1 - 0.5).abs() < 1e-15 && (e.theta2 - 0.5).abs() < 1e-15);
        assert!((e.m - 1.0).abs() < 1e-15);
        assert!((e.hyperbola_lhs - 2.5).abs() < 1e-15);
    }

    #[test]
    fn critical_bubble_exponent() {
        let e = exponents(&Params::scalar(3, 2.0, 0.0, 5.0).unwrap()).unwrap();
        assert!((2.0 * e.theta1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn swapping_equations_swaps_thetas() {
        let p = sys(6, 2.5, 0.3, 1.2, 2.0, 4.5);
        let (a, b) = (exponents(&p).unwrap(), exponents(&p.swapped()).unwrap());
        assert_eq!(a.theta1, b.theta2);
        assert_eq!(a.theta2, b.theta1);
    }

    #[test]
    fn degenerate_product() {
        assert!(matches!(
            exponents(&sys(5, 2.0, 0.0, 0.0, 2.0, 0.5)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn reference_classifications() {
        let c = classify(&sys(5, 2.0, 0.0, 0.0, 3.0, 3.0)).unwrap();
        assert_eq!(c.general_verdict, Some(GeneralVerdict::Exists));
        assert_eq!(c.mode, Mode::Scalar);

        let c = classify(&sys(5, 2.0, 0.0, 0.0, 1.0, 1.0)).unwrap();
        assert_eq!(c.general_verdict, Some(GeneralVerdict::NotExists));
        assert_eq!(c.radial_verdict, Some(RadialVerdict::RadialNotExists));
        assert!(c.exponents.is_none());

        let c = classify(&sys(5, 2.0, 0.0, 0.0, 1.5, 1.5)).unwrap();
        assert_eq!(c.general_verdict, Some(GeneralVerdict::NotExists));
        assert_eq!(c.radial_verdict, Some(RadialVerdict::RadialNotExists));
        assert!((c.exponents.unwrap().m - 4.0).abs() < 1e-14);
        assert!((c.hyperbola_lhs - 4.0).abs() < 1e-14);

        let c = classify(&sys(5, 2.0, 0.0, 0.0, 7.0 / 3.0, 7.0 / 3.0)).unwrap();
        assert_eq!(c.radial_verdict, Some(RadialVerdict::Critical));
    }

    #[test]
    fn verdict_domains() {
        // negative weight: only the radial verdict applies
        let c = classify(&sys(5, 2.0, -0.5, 0.0, 3.0, 3.0)).unwrap();
        assert!(c.general_verdict.is_none() && c.radial_verdict.is_some());
        // alpha below 2: only the general verdict applies
        let c = classify(&sys(5, 1.5, 0.0, 0.0, 3.0, 3.0)).unwrap();
        assert!(c.general_verdict.is_some() && c.radial_verdict.is_none());
        assert!(matches!(
            classify(&sys(5, 2.0, 2.0, 0.0, 3.0, 3.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn scalar_criterion_examples() {
        assert!(scalar_criterion(5, 2.0, 0.0, 2.0).unwrap());
        assert!(!scalar_criterion(5, 2.0, 0.0, 5.0 / 3.0).unwrap());
        assert!(scalar_criterion(5, 2.0, 2.5, 3.0).is_err());
    }

    #[test]
    fn balance_examples() {
        let (l, r) = exponent_balance(&sys(5, 2.0, 0.0, 0.0, 3.0, 3.0)).unwrap();
        assert!((l - 16.0).abs() < 1e-13 && (r - 16.0).abs() < 1e-13);
    }

    #[test]
    fn finite_energy_examples() {
        assert!(finite_energy_predicate(3, 2.0, 0.0, 3.0).unwrap());
        assert!(!finite_energy_predicate(3, 2.0, 0.0, 5.0).unwrap());
        assert!(finite_energy_predicate(3, 2.0, 0.0, 1.0).is_err());
        assert_eq!(critical_exponent(3, 2.0, 0.0).unwrap(), 5.0);
    }

    #[test]
    fn contradiction_factor_vanishes_at_criticality() {
        assert_eq!(contradiction_factor(3, 2.0, 0.0, 5.0), 0.0);
        assert!(contradiction_factor(3, 2.0, 0.0, 3.0) > 0.0);
        assert!(contradiction_factor(3, 2.0, 0.0, 6.0) < 0.0);
    }
}
