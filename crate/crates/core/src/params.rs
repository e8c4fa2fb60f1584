//! Problem parameters shared by every module.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Parameters `(n, alpha, sigma1, sigma2, p, q)` of the weighted system
///
/// ```text
/// u(x) = ∫ v(y)^q |x-y|^(alpha-n) |y|^(-sigma1) dy
/// v(x) = ∫ u(y)^p |x-y|^(alpha-n) |y|^(-sigma2) dy
/// ```
///
/// The scalar equation is the view `sigma1 = sigma2`, `p = q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n: u32,
    pub alpha: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub p: f64,
    pub q: f64,
}

impl Params {
    /// Validates `n >= 3`, `0 < alpha < n` and `p, q > 0`.
    pub fn new(n: u32, alpha: f64, sigma1: f64, sigma2: f64, p: f64, q: f64) -> Result<Self> {
        let params = Params {
            n,
            alpha,
            sigma1,
            sigma2,
            p,
            q,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn scalar(n: u32, alpha: f64, sigma: f64, p: f64) -> Result<Self> {
        Self::new(n, alpha, sigma, sigma, p, p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::domain(format!("dimension n = {} must be at least 3", self.n)));
        }
        let nf = self.dim();
        if !(self.alpha > 0.0 && self.alpha < nf) {
            return Err(Error::domain(format!(
                "order alpha = {} must lie in (0, n) = (0, {})",
                self.alpha, nf
            )));
        }
        for (name, v) in [("sigma1", self.sigma1), ("sigma2", self.sigma2)] {
            if !v.is_finite() {
                return Err(Error::domain(format!("{name} must be finite")));
            }
        }
        if !(self.p > 0.0 && self.p.is_finite() && self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::domain(format!(
                "exponents must be positive, got p = {}, q = {}",
                self.p, self.q
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> f64 {
        self.n as f64
    }

    /// `n - alpha`, the decay rate of the Riesz kernel.
    #[inline]
    pub fn n_minus_alpha(&self) -> f64 {
        self.dim() - self.alpha
    }

    #[inline]
    pub fn pq(&self) -> f64 {
        self.p * self.q
    }

    pub fn is_scalar(&self) -> bool {
        self.sigma1 == self.sigma2 && self.p == self.q
    }

    /// The same system with the roles of the two equations exchanged:
    /// `(p, sigma2) <-> (q, sigma1)`.
    pub fn swapped(&self) -> Self {
        Params {
            sigma1: self.sigma2,
            sigma2: self.sigma1,
            p: self.q,
            q: self.p,
            ..*self
        }
    }

    /// The weighted Riesz potential can be evaluated by quadrature only for
    /// `alpha > 1`.
    pub fn supports_quadrature(&self) -> bool {
        self.alpha > 1.0
    }

    /// Both weights in `[0, alpha)`.
    pub fn in_general_domain(&self) -> bool {
        (0.0..self.alpha).contains(&self.sigma1) && (0.0..self.alpha).contains(&self.sigma2)
    }

    /// `alpha in [2, n)` and both weights below `alpha`.
    pub fn in_radial_domain(&self) -> bool {
        self.alpha >= 2.0 && self.sigma1 < self.alpha && self.sigma2 < self.alpha
    }
}

/// Surface area of the unit sphere `S^k` in `R^(k+1)`.
pub fn sphere_area(k: u32) -> f64 {
    let h = (k as f64 + 1.0) / 2.0;
    2.0 * (h * std::f64::consts::PI.ln() - ln_gamma(h)).exp()
}
