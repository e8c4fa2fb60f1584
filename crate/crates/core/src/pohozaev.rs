//! Integral identities for radial functions: weighted energies, the virial
//! term `∫ u^p (x·∇u) |x|^(-sigma)`, the integration-by-parts and Pohozaev
//! identities, and tail decay fits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::criteria;
use crate::error::{Error, Result};
use crate::grid::{radial_derivative, RadialFunction, RadialGrid};
use crate::kernel::{riesz_potential_at, KernelMatrix, QuadratureOptions};
use crate::params::{sphere_area, Params};
use crate::quadrature::Rule;

const CELL_POINTS: usize = 8;
const RESIDUAL_FLOOR: f64 = 1e-300;

/// Residual below which a Pohozaev check certifies an approximate solution.
pub const SOLUTION_THRESHOLD: f64 = 1e-3;

/// Two sides of an integral identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity_name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs| / max(|lhs|, |rhs|)`.
    pub residual: f64,
    /// Auxiliary integrals and factors, keyed by name.
    pub terms: BTreeMap<String, f64>,
}

impl IdentityReport {
    fn new(name: &str, lhs: f64, rhs: f64) -> Self {
        IdentityReport {
            identity_name: name.to_string(),
            lhs,
            rhs,
            residual: relative_gap(lhs, rhs),
            terms: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.terms.insert(key.to_string(), value);
        self
    }

    /// Whether the residual is below [`SOLUTION_THRESHOLD`].
    pub fn certifies(&self) -> bool {
        self.residual < SOLUTION_THRESHOLD
    }
}

/// `|a - b| / max(|a|, |b|)`, floored to avoid `0/0`.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RESIDUAL_FLOOR)
}

/// `∫_{grid} g(r) dt` over the grid cells in `t = ln r`.
fn cells(u: &RadialFunction, g: impl Fn(f64) -> f64) -> f64 {
    let rule = Rule::gauss_legendre(CELL_POINTS);
    u.grid()
        .log_nodes()
        .windows(2)
        .map(|w| rule.integrate(w[0], w[1], |t| g(t.exp())))
        .sum()
}

fn check_power(head: f64, tail: Option<f64>, what: &str) -> Result<()> {
    if !(head > 0.0) {
        return Err(Error::divergence(format!(
            "{what}: integrand near 0 decays too slowly (exponent {head})"
        )));
    }
    if let Some(t) = tail {
        if !(t < 0.0) {
            return Err(Error::divergence(format!(
                "{what}: integrand at infinity decays too slowly (exponent {t})"
            )));
        }
    }
    Ok(())
}

/// `∫ u^s |x|^(-sigma) dx = |S^(n-1)| ∫_0^∞ r^(n-1-sigma) u(r)^s dr`,
/// with power-law closures outside the grid.
pub fn weighted_energy(u: &RadialFunction, n: u32, sigma: f64, s: f64) -> Result<f64> {
    let nf = n as f64;
    let w = nf - sigma;
    let head = w + u.head_exp() * s;
    let tail = (!u.is_compact()).then(|| w + u.tail_exp() * s);
    check_power(head, tail, "weighted energy")?;
    let g = u.grid();
    let (r1, rn) = (g.first(), g.last());
    let body = cells(u, |r| (w * r.ln() + s * u.log_eval(r)).exp());
    let head_part = (s * u.first_value().ln() + w * r1.ln()).exp() / head;
    let tail_part = tail.map_or(0.0, |t| (s * u.last_value().ln() + w * rn.ln()).exp() / (-t));
    Ok(sphere_area(n - 1) * (body + head_part + tail_part))
}

/// `∫ u^p (x·∇u) |x|^(-sigma) dx = |S^(n-1)| ∫_0^∞ r^(n-sigma) u^p u' dr`.
///
/// A cut-off tail contributes the jump term `-r_N^(n-sigma) u_N^(p+1)/(p+1)`.
pub fn virial_term(u: &RadialFunction, n: u32, sigma: f64, p: f64) -> Result<f64> {
    let nf = n as f64;
    let w = nf - sigma;
    let s = p + 1.0;
    let head = w + u.head_exp() * s;
    let tail = (!u.is_compact()).then(|| w + u.tail_exp() * s);
    check_power(head, tail, "virial term")?;
    let g = u.grid();
    let (r1, rn) = (g.first(), g.last());
    let body = cells(u, |r| (w * r.ln() + s * u.log_eval(r)).exp() * u.log_slope(r));
    let edge1 = (s * u.first_value().ln() + w * r1.ln()).exp();
    let edgen = (s * u.last_value().ln() + w * rn.ln()).exp();
    let head_part = u.head_exp() * edge1 / head;
    let tail_part = match tail {
        Some(t) => u.tail_exp() * edgen / (-t),
        None => -edgen / s,
    };
    Ok(sphere_area(n - 1) * (body + head_part + tail_part))
}

/// `virial = -(n - sigma)/(1 + p) · ∫ u^(p+1) |x|^(-sigma)`, valid for any
/// sufficiently decaying radial `u`.
pub fn ibp_identity(u: &RadialFunction, n: u32, sigma: f64, p: f64) -> Result<IdentityReport> {
    let v = virial_term(u, n, sigma, p)?;
    let e = weighted_energy(u, n, sigma, p + 1.0)?;
    let factor = (n as f64 - sigma) / (1.0 + p);
    Ok(IdentityReport::new("integration_by_parts", v, -factor * e)
        .with("energy", e)
        .with("factor", factor))
}

/// `∫ f |x|^(-sigma_f) P_sigma_p[g] dx` for radial `f, g` on one grid.
fn cross_energy(
    f: &RadialFunction,
    weight_f: f64,
    g: &RadialFunction,
    sigma_p: f64,
    params: &Params,
    opts: &QuadratureOptions,
) -> Result<f64> {
    let grid = g.grid();
    let potential = KernelMatrix::assemble(grid, grid, params.n, params.alpha, sigma_p, opts)?.potential(g)?;
    weighted_energy(&f.product(&potential)?, params.n, weight_f, 1.0)
}

/// Pohozaev identity for `u = P_sigma[u^p]`:
/// `∫ u^p (x·∇u) |x|^(-sigma) = -(n - alpha)/2 · ∫ u^p |x|^(-sigma) P_sigma[u^p]`.
///
/// The right side is the form obtained before substituting the equation,
/// so the residual is small only for (approximate) solutions. The report
/// also carries the energy, the integration-by-parts prediction and the
/// factor `(n - sigma)/(1 + p) - (n - alpha)/2`.
pub fn pohozaev_scalar(
    u: &RadialFunction,
    params: &Params,
    sigma: f64,
    opts: &QuadratureOptions,
) -> Result<IdentityReport> {
    params.validate()?;
    let (n, p) = (params.n, params.p);
    let x = params.n_minus_alpha();
    let virial = virial_term(u, n, sigma, p)?;
    let energy = weighted_energy(u, n, sigma, p + 1.0)?;
    let up = u.powf(p);
    let cross = cross_energy(&up, sigma, &up, sigma, params, opts)?;
    let factor = criteria::contradiction_factor(n, params.alpha, sigma, p);
    Ok(IdentityReport::new("pohozaev_scalar", virial, -0.5 * x * cross)
        .with("energy", energy)
        .with("cross_energy", cross)
        .with("ibp_prediction", -(n as f64 - sigma) / (1.0 + p) * energy)
        .with("contradiction_factor", factor)
        .with("equation_gap", relative_gap(cross, energy)))
}

/// The critical bubble `c (1 + r²)^(-(n-alpha)/2)` with `c` chosen so that
/// `u = P_0[u^p]` at `p = (n+alpha)/(n-alpha)`; `c` is fitted at `r = 1`.
pub fn normalized_bubble(n: u32, alpha: f64, grid: &RadialGrid, opts: &QuadratureOptions) -> Result<RadialFunction> {
    let x = n as f64 - alpha;
    let params = Params::scalar(n, alpha, 0.0, (n as f64 + alpha) / x)?;
    let w = RadialFunction::from_fn(grid.clone(), |r| (1.0 + r * r).powf(-0.5 * x), 0.0, -x)?;
    let ratio = riesz_potential_at(&w.powf(params.p), 0.0, &params, 1.0, opts)? / w.eval(1.0);
    Ok(w.scale(ratio.powf(-1.0 / (params.p - 1.0))))
}

/// Pohozaev identity for the pair `u = P_sigma1[v^q]`, `v = P_sigma2[u^p]`:
/// `∫ u^p (x·∇u)|x|^(-sigma2) + ∫ v^q (x·∇v)|x|^(-sigma1) = -(n - alpha) ∫ u^p |x|^(-sigma2) P_sigma1[v^q]`.
///
/// Also reports the energies `∫ u^(p+1)|x|^(-sigma2)` and
/// `∫ v^(q+1)|x|^(-sigma1)`, which agree for solution pairs, and the
/// closure factor `(n-sigma1)/(1+q) + (n-sigma2)/(1+p) - (n-alpha)`.
pub fn pohozaev_system(
    u: &RadialFunction,
    v: &RadialFunction,
    params: &Params,
    opts: &QuadratureOptions,
) -> Result<IdentityReport> {
    params.validate()?;
    let Params {
        n,
        sigma1,
        sigma2,
        p,
        q,
        ..
    } = *params;
    let virial_u = virial_term(u, n, sigma2, p)?;
    let virial_v = virial_term(v, n, sigma1, q)?;
    let energy_u = weighted_energy(u, n, sigma2, p + 1.0)?;
    let energy_v = weighted_energy(v, n, sigma1, q + 1.0)?;
    let cross = cross_energy(&u.powf(p), sigma2, &v.powf(q), sigma1, params, opts)?;
    let closure = criteria::system_closure_factor(params);
    Ok(
        IdentityReport::new("pohozaev_system", virial_u + virial_v, -params.n_minus_alpha() * cross)
            .with("virial_u", virial_u)
            .with("virial_v", virial_v)
            .with("energy_u", energy_u)
            .with("energy_v", energy_v)
            .with("cross_energy", cross)
            .with("cross_energy_residual", relative_gap(energy_u, energy_v))
            .with("closure_factor", closure)
            .with("closure_term", closure * energy_v),
    )
}

/// Least-squares log-log slope over the last decade of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub expected_rate: f64,
    /// `|slope + expected_rate|`.
    pub deviation: f64,
}

pub fn decay_check(u: &RadialFunction, expected_rate: f64) -> DecayFit {
    let g = u.grid();
    let cut = g.last() / 10.0;
    let pts: Vec<(f64, f64)> = g
        .log_nodes()
        .iter()
        .zip(u.values())
        .filter(|(t, _)| t.exp() >= cut)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    let pts = if pts.len() >= 2 {
        pts
    } else {
        let k = g.len();
        (k - 2..k).map(|i| (g.log_nodes()[i], u.values()[i].ln())).collect()
    };
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    DecayFit {
        slope,
        expected_rate,
        deviation: (slope + expected_rate).abs(),
    }
}

/// `(n - 2) u(r) + r u'(r)` at the grid nodes.
pub fn standard_identity_margin(u: &RadialFunction, n: u32) -> Result<Vec<f64>> {
    let d = radial_derivative(u)?;
    Ok(u.grid()
        .nodes()
        .iter()
        .zip(u.values())
        .zip(d)
        .map(|((r, v), dv)| (n as f64 - 2.0) * v + r * dv)
        .collect())
}

/// `z·(x-z) + x·(z-x) + |x-z|²`, identically zero.
pub fn symmetrization_residual(x: &[f64], z: &[f64]) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let xz: Vec<f64> = x.iter().zip(z).map(|(a, b)| a - b).collect();
    let zx: Vec<f64> = xz.iter().map(|d| -d).collect();
    dot(z, &xz) + dot(x, &zx) + dot(&xz, &xz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn bubble() -> RadialFunction {
        RadialFunction::from_fn(RadialGrid::default_grid(), |r| (1.0 + r * r).powf(-0.5), 0.0, -1.0).unwrap()
    }

    #[test]
    fn normalized_bubble_constant() {
        let g = RadialGrid::default_grid();
        let u = normalized_bubble(3, 2.0, &g, &QuadratureOptions::default()).unwrap();
        // c^4 (4π/3) = 1
        let c = (3.0 / (4.0 * PI)).powf(0.25);
        let rel = u.eval(1.0) / (c * 0.5f64.sqrt()) - 1.0;
        assert!(rel.abs() < 1e-7, "{rel}");
    }

    #[test]
    fn ball_volume() {
        let g = RadialGrid::log_spaced(1e-4, 1.0, 64).unwrap();
        let u = RadialFunction::from_fn(g, |_| 1.0, 0.0, f64::NEG_INFINITY).unwrap();
        let e = weighted_energy(&u, 3, 0.0, 1.0).unwrap();
        assert!((e - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn bubble_energy() {
        let e = weighted_energy(&bubble(), 3, 0.0, 6.0).unwrap();
        assert!((e - PI * PI / 4.0).abs() < 1e-7 * e);
    }

    #[test]
    fn energy_scaling() {
        let g = RadialGrid::default_grid();
        let lambda: f64 = 3.0;
        let f = |r: f64| (1.0 + r * r).powf(-2.0);
        let u = RadialFunction::from_fn(g.clone(), f, 0.0, -4.0).unwrap();
        let ul = RadialFunction::from_fn(g, |r| f(lambda * r), 0.0, -4.0).unwrap();
        let (n, sigma) = (5, 1.0);
        let e = weighted_energy(&u, n, sigma, 2.0).unwrap();
        let el = weighted_energy(&ul, n, sigma, 2.0).unwrap();
        assert!((el / (lambda.powf(sigma - n as f64) * e) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn bubble_virial_matches_ibp() {
        let u = bubble();
        let v = virial_term(&u, 3, 0.0, 5.0).unwrap();
        assert!(v < 0.0);
        assert!((v + 0.5 * PI * PI / 4.0).abs() < 1e-5);
    }

    #[test]
    fn compact_virial_is_the_jump() {
        // u = 1 on the unit ball: virial = -|S^2| / (p + 1)
        let g = RadialGrid::log_spaced(1e-4, 1.0, 64).unwrap();
        let u = RadialFunction::from_fn(g, |_| 1.0, 0.0, f64::NEG_INFINITY).unwrap();
        let v = virial_term(&u, 3, 0.0, 2.0).unwrap();
        assert!((v + 4.0 * PI / 3.0).abs() < 1e-12);
        assert!(ibp_identity(&u, 3, 0.0, 2.0).unwrap().residual < 1e-12);
    }

    #[test]
    fn boundary_tail_diverges() {
        // n - sigma + tail (p + 1) = 3 - 1 * 3 = 0
        let u = RadialFunction::from_fn(RadialGrid::default_grid(), |r| (1.0 + r * r).powf(-0.5), 0.0, -1.0).unwrap();
        assert!(ibp_identity(&u, 3, 0.0, 2.0).unwrap_err().is_divergence());
    }

    #[test]
    fn decay_of_power_law_and_candidate() {
        let g = RadialGrid::default_grid();
        let u = RadialFunction::from_fn(g.clone(), |r| r.powf(-2.5), -2.5, -2.5).unwrap();
        let fit = decay_check(&u, 2.5);
        assert!(fit.deviation < 1e-12);
        let c = RadialFunction::from_fn(g, |r| (1.0 + r * r).powf(-0.5), 0.0, -1.0).unwrap();
        assert!(decay_check(&c, 1.0).deviation < 1e-3);
    }

    #[test]
    fn bubble_standard_identity() {
        assert!(standard_identity_margin(&bubble(), 3)
            .unwrap()
            .iter()
            .all(|&m| m >= 0.0));
    }

    #[test]
    fn symmetrization_is_exact() {
        let x = [0.3, -1.2, 2.5];
        let z = [1.1, 0.4, -0.7];
        assert!(symmetrization_residual(&x, &z).abs() < 1e-14);
    }

    #[test]
    fn relative_gap_floor() {
        assert_eq!(relative_gap(0.0, 0.0), 0.0);
        assert!((relative_gap(1.0, 2.0) - 0.5).abs() < 1e-15);
    }
}
