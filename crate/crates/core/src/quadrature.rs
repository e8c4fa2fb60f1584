//! Gauss–Jacobi quadrature on `[-1, 1]` and its affine images.
//!
//! A rule with exponents `(a, b)` integrates `g(x) (1-x)^a (1+x)^b` exactly
//! for polynomials `g` of degree `2m - 1`. Gauss–Legendre is the case
//! `a = b = 0`. Nodes come from the Golub–Welsch eigenproblem and are then
//! polished by Newton steps on the three-term recurrence; weights use the
//! closed form in terms of `P'_m`.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

#[derive(Debug, Clone)]
pub struct Rule {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Rule {
    pub fn gauss_legendre(m: usize) -> Rule {
        Rule::gauss_jacobi(m, 0.0, 0.0)
    }

    /// `m`-point rule for the weight `(1-x)^a (1+x)^b`, `a, b > -1`.
    pub fn gauss_jacobi(m: usize, a: f64, b: f64) -> Rule {
        assert!(m >= 1, "quadrature rule needs at least one node");
        assert!(a > -1.0 && b > -1.0, "Jacobi exponents must exceed -1");

        let mut nodes = golub_welsch_nodes(m, a, b);
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let (pm, dpm) = jacobi_with_derivative(m, a, b, *x);
                let step = pm / dpm;
                if !step.is_finite() {
                    break;
                }
                *x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
        }
        nodes.sort_by(|x, y| x.partial_cmp(y).unwrap());

        let mf = m as f64;
        let log_c = ln_gamma(mf + a + 1.0) + ln_gamma(mf + b + 1.0) - ln_gamma(mf + a + b + 1.0) - ln_gamma(mf + 1.0)
            + (a + b + 1.0) * std::f64::consts::LN_2;
        let c = log_c.exp();
        let weights = nodes
            .iter()
            .map(|&x| {
                let (_, dp) = jacobi_with_derivative(m, a, b, x);
                c / ((1.0 - x * x) * dp * dp)
            })
            .collect();

        Rule { a, b, nodes, weights }
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

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights for `∫_lo^hi g(y) (hi-y)^a (y-lo)^b dy`.
    pub fn mapped(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let scale = half.powf(self.a + self.b + 1.0);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, w * scale))
    }

    /// Approximates `∫_lo^hi g(y) (hi-y)^a (y-lo)^b dy`.
    pub fn integrate(&self, lo: f64, hi: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(lo, hi).map(|(y, w)| w * g(y)).sum()
    }
}

/// Eigenvalues of the symmetric Jacobi matrix for the weight.
fn golub_welsch_nodes(m: usize, a: f64, b: f64) -> Vec<f64> {
    let ab = a + b;
    let mut jm = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        let jf = j as f64;
        let diag = if j == 0 {
            (b - a) / (ab + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * jf + ab) * (2.0 * jf + ab + 2.0))
        };
        jm[(j, j)] = diag;
        if j + 1 < m {
            let k = jf + 1.0;
            let off2 = if k == 1.0 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                4.0 * k * (k + a) * (k + b) * (k + ab)
                    / ((2.0 * k + ab).powi(2) * (2.0 * k + ab + 1.0) * (2.0 * k + ab - 1.0))
            };
            let off = off2.sqrt();
            jm[(j, j + 1)] = off;
            jm[(j + 1, j)] = off;
        }
    }
    SymmetricEigen::new(jm).eigenvalues.iter().copied().collect()
}

/// `(P_m(x), P_m'(x))` for the Jacobi polynomial with parameters `(a, b)`.
fn jacobi_with_derivative(m: usize, a: f64, b: f64, x: f64) -> (f64, f64) {
    let ab = a + b;
    let mut p_prev = 1.0;
    let mut p = 0.5 * (a - b + (ab + 2.0) * x);
    if m == 0 {
        return (1.0, 0.0);
    }
    for j in 1..m {
        let jf = j as f64;
        let c = 2.0 * jf + ab;
        let a1 = 2.0 * (jf + 1.0) * (jf + ab + 1.0) * c;
        let a2 = (c + 1.0) * (a * a - b * b);
        let a3 = c * (c + 1.0) * (c + 2.0);
        let a4 = 2.0 * (jf + a) * (jf + b) * (c + 2.0);
        let next = ((a2 + a3 * x) * p - a4 * p_prev) / a1;
        p_prev = p;
        p = next;
    }
    let mf = m as f64;
    let c = 2.0 * mf + ab;
    let dp = (mf * (a - b - c * x) * p + 2.0 * (mf + a) * (mf + b) * p_prev) / (c * (1.0 - x * x));
    (p, dp)
}

/// `B(x, y)` via log-gamma.
pub fn beta_fn(x: f64, y: f64) -> f64 {
    (ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y)).exp()
}
