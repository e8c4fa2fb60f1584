//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status
//! if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use hsys::candidate::{verify_double_bounded, BoundednessVerdict, Rate};
use hsys::cli::{run_sweep, SweepSpec};
use hsys::criteria::{classify, contradiction_factor, scalar_criterion, GeneralVerdict, RadialVerdict};
use hsys::grid::{RadialFunction, RadialGrid};
use hsys::kernel::{angular_kernel, KernelMatrix, QuadratureOptions};
use hsys::nonexistence::{blowup_recurrence, closed_form_a, iterate_exponents, minimal_beta0, TraceVerdict};
use hsys::params::Params;
use hsys::pohozaev::{ibp_identity, pohozaev_scalar};
use hsys::solver::{picard_solve, picard_step, Init, SolveOptions, SolveStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn opts() -> QuadratureOptions {
    QuadratureOptions::default()
}

/// Bubble `(1+r²)^(-1/2)` scaled so that `w = P[w^5]`: `c^4 · 4π/3 = 1`.
fn normalized_bubble(grid: &RadialGrid) -> RadialFunction {
    let c = (3.0 / (4.0 * PI)).powf(0.25);
    RadialFunction::from_fn(grid.clone(), |r| c * (1.0 + r * r).powf(-0.5), 0.0, -1.0).unwrap()
}

fn newtonian_oracle() -> Outcome {
    let start = Instant::now();
    let source = RadialGrid::log_spaced(1e-4, 1.0, 64).map_err(|e| e.to_string())?;
    let ball = RadialFunction::from_fn(source.clone(), |_| 1.0, 0.0, f64::NEG_INFINITY).unwrap();
    let target = RadialGrid::log_spaced(0.05, 20.0, 50).unwrap();
    let m = KernelMatrix::assemble(&source, &target, 3, 2.0, 0.0, &opts()).map_err(|e| e.to_string())?;
    let values = m.apply(&ball).map_err(|e| e.to_string())?;
    let worst = target
        .nodes()
        .iter()
        .zip(&values)
        .map(|(&r, v)| {
            let exact = if r <= 1.0 {
                2.0 * PI * (1.0 - r * r / 3.0)
            } else {
                4.0 * PI / (3.0 * r)
            };
            (v / exact - 1.0).abs()
        })
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();
    check(
        worst < 1e-6 && elapsed < Duration::from_secs(5),
        format!("max relative error {worst:.3e} at 50 radii, {elapsed:.2?}"),
    )
}

fn bubble_oracle() -> Outcome {
    let start = Instant::now();
    let grid = RadialGrid::default_grid();
    let w = RadialFunction::from_fn(grid.clone(), |r| (1.0 + r * r).powf(-0.5), 0.0, -1.0).unwrap();
    let m = KernelMatrix::assemble(&grid, &grid, 3, 2.0, 0.0, &opts()).map_err(|e| e.to_string())?;
    let pw = m.apply(&w.powf(5.0)).map_err(|e| e.to_string())?;
    let worst = grid
        .nodes()
        .iter()
        .zip(&pw)
        .zip(w.values())
        .filter(|((r, _), _)| (1e-2..=1e2).contains(*r))
        .map(|((_, p), w)| (p / w / (4.0 * PI / 3.0) - 1.0).abs())
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();
    check(
        worst < 1e-4 && elapsed < Duration::from_secs(30),
        format!("max relative deviation {worst:.3e} on [1e-2, 1e2], {elapsed:.2?}"),
    )
}

/// `2π((r+s)^γ - |r-s|^γ)/(rsγ)` with `γ = alpha - 1`, written through
/// `x = min/max` as `M^γ (1-x)^γ expm1(2γ atanh x)` to avoid cancellation.
fn three_dim_kernel(r: f64, s: f64, alpha: f64) -> f64 {
    let g = alpha - 1.0;
    let (lo, hi) = if r < s { (r, s) } else { (s, r) };
    let x = lo / hi;
    let diff = hi.powf(g) * (g * (-x).ln_1p()).exp() * (2.0 * g * x.atanh()).exp_m1();
    2.0 * PI * diff / (r * s * g)
}

fn closed_form_kernel() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for alpha in [1.5, 2.0, 2.5] {
        for _ in 0..1000 {
            let r = 10f64.powf(rng.gen_range(-3.0..3.0));
            let s = 10f64.powf(rng.gen_range(-3.0..3.0));
            let got = angular_kernel(r, s, 3, alpha).map_err(|e| e.to_string())?;
            worst = worst.max((got / three_dim_kernel(r, s, alpha) - 1.0).abs());
        }
    }
    check(worst < 1e-10, format!("max relative error {worst:.3e} over 3000 pairs"))
}

fn criterion_arithmetic() -> Outcome {
    let exists = classify(&Params::new(5, 2.0, 0.0, 0.0, 3.0, 3.0).unwrap()).map_err(|e| e.to_string())?;
    let not = classify(&Params::new(5, 2.0, 0.0, 0.0, 1.5, 1.5).unwrap()).map_err(|e| e.to_string())?;
    let m_exists = exists.exponents.map(|e| e.m);
    let m_not = not.exponents.map(|e| e.m);
    let examples = exists.general_verdict == Some(GeneralVerdict::Exists)
        && m_exists.is_some_and(|m| (m - 1.0).abs() < 1e-14)
        && not.general_verdict == Some(GeneralVerdict::NotExists)
        && m_not.is_some_and(|m| (m - 4.0).abs() < 1e-14);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(3..9u32);
        let alpha = rng.gen_range(0.2..n as f64 - 0.2);
        let sigma = rng.gen_range(0.0..alpha);
        let p = rng.gen_range(0.3..6.0);
        let c = classify(&Params::new(n, alpha, sigma, sigma, p, p).unwrap()).map_err(|e| e.to_string())?;
        let scalar = scalar_criterion(n, alpha, sigma, p).map_err(|e| e.to_string())?;
        if (c.general_verdict == Some(GeneralVerdict::Exists)) != scalar {
            mismatches += 1;
        }
    }
    check(
        examples && mismatches == 0,
        format!("M = {m_exists:?} / {m_not:?}, {mismatches} scalar/system mismatches in 1000"),
    )
}

fn exponent_iteration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut bad_verdicts = 0;
    for _ in 0..100 {
        let n = rng.gen_range(3..9u32);
        let alpha = rng.gen_range(0.2..n as f64 - 0.2);
        let s1 = rng.gen_range(0.0..alpha);
        let s2 = rng.gen_range(0.0..alpha);
        let (p, q) = loop {
            let p: f64 = rng.gen_range(0.2..4.0);
            let q: f64 = rng.gen_range(0.2..4.0);
            if (p * q - 1.0).abs() > 1e-3 {
                break (p, q);
            }
        };
        let params = Params::new(n, alpha, s1, s2, p, q).unwrap();
        let trace = iterate_exponents(&params, 40).map_err(|e| e.to_string())?;
        let run = trace.params;
        let pq = run.pq();
        for (j, a) in trace.a.iter().enumerate() {
            let exact = closed_form_a(j, &run).map_err(|e| e.to_string())?;
            worst = worst.max((a - exact).abs() / exact.abs());
        }
        let expected = if pq < 1.0 {
            TraceVerdict::ConvergesNegative
        } else {
            let m = classify(&params).unwrap().exponents.unwrap().m;
            if params.n_minus_alpha() - m > 0.0 {
                TraceVerdict::DivergesToPlusInfinity
            } else {
                TraceVerdict::DivergesToMinusInfinity
            }
        };
        if trace.verdict != expected {
            bad_verdicts += 1;
        }
    }
    check(
        worst < 1e-12 && bad_verdicts == 0,
        format!("max relative deviation {worst:.3e} for j <= 40, {bad_verdicts} verdict mismatches in 100"),
    )
}

fn blowup_induction() -> Outcome {
    let reference = blowup_recurrence(2.0, 5, 2.0, 3, 512.0, 50).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = 0;
    for _ in 0..20 {
        let p: f64 = rng.gen_range(1.1..4.0);
        let l = (2.0 / (p - 1.0)).floor() as u32 + rng.gen_range(1..4u32);
        let alpha = [2.0, 4.0][rng.gen_range(0..2)];
        let n = alpha as u32 + rng.gen_range(1..4u32);
        let beta0 = minimal_beta0(p, l) * rng.gen_range(1.0..10.0);
        let t = blowup_recurrence(p, n, alpha, l, beta0, 50).map_err(|e| e.to_string())?;
        if !t.all_hold() {
            failures += 1;
        }
    }
    check(
        reference.all_hold() && reference.holds.len() == 51 && failures == 0,
        format!("reference seed holds through k = 50, {failures} of 20 random seeds fail"),
    )
}

fn ibp_identity_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = RadialGrid::default_grid();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.gen_range(3..7u32);
        let amp = rng.gen_range(0.5..2.0);
        let rho = 10f64.powf(rng.gen_range(-0.5..0.5));
        let bump = rng.gen_range(0.0..1.5);
        // slowest decay kept integrable for every (sigma, p) below
        let theta = (n as f64) / 6.0 + rng.gen_range(0.1..1.0);
        let u = RadialFunction::from_fn(
            grid.clone(),
            |r| {
                let x = (r / rho).powi(2);
                amp * (1.0 + x).powf(-theta) * (1.0 + bump * x / (1.0 + x))
            },
            0.0,
            -2.0 * theta,
        )
        .unwrap();
        for sigma in [0.0, 0.5, 1.0] {
            for p in [2.0, 3.0, 5.0] {
                let rep = ibp_identity(&u, n, sigma, p).map_err(|e| e.to_string())?;
                worst = worst.max(rep.residual);
            }
        }
    }
    check(worst < 1e-5, format!("max residual {worst:.3e} over 180 evaluations"))
}

fn pohozaev_closure() -> Outcome {
    let grid = RadialGrid::default_grid();
    let params = Params::scalar(3, 2.0, 0.0, 5.0).unwrap();
    let rep = pohozaev_scalar(&normalized_bubble(&grid), &params, 0.0, &opts()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(3..9u32);
        let alpha = rng.gen_range(0.2..n as f64 - 0.2);
        let sigma = rng.gen_range(0.0..alpha);
        let p = (n as f64 + alpha - 2.0 * sigma) / (n as f64 - alpha);
        worst = worst.max(contradiction_factor(n, alpha, sigma, p).abs() / n as f64);
    }
    check(
        rep.residual < 1e-3 && worst <= 8.0 * f64::EPSILON,
        format!("bubble residual {:.3e}, max |factor|/n {worst:.3e}", rep.residual),
    )
}

fn double_boundedness() -> Outcome {
    let grid = RadialGrid::default_grid();
    let slow = verify_double_bounded(
        &Params::new(5, 2.0, 0.0, 0.0, 3.0, 3.0).unwrap(),
        Rate::Slow,
        &grid,
        &opts(),
    )
    .map_err(|e| e.to_string())?;
    let fast = verify_double_bounded(&Params::scalar(3, 2.0, 0.0, 5.0).unwrap(), Rate::Fast, &grid, &opts())
        .map_err(|e| e.to_string())?;
    let flat = |c: &[f64]| {
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(0.0, f64::max);
        hi / lo - 1.0
    };
    let drift = flat(&fast.ratios_c1).max(flat(&fast.ratios_c2));
    check(
        slow.verdict == BoundednessVerdict::DoubleBounded && slow.spread < 10.0 && drift < 1e-4,
        format!(
            "slow {:?} with spread {:.4}, bubble ratio variation {drift:.3e}",
            slow.verdict, slow.spread
        ),
    )
}

fn fixed_point() -> Outcome {
    let grid = RadialGrid::default_grid();
    let params = Params::scalar(3, 2.0, 0.0, 5.0).unwrap();
    let r1 = grid.first();
    let w = RadialFunction::from_fn(grid.clone(), |r| ((1.0 + r1 * r1) / (1.0 + r * r)).sqrt(), 0.0, -1.0).unwrap();
    let (u, v, _) = picard_step(&w, &w, &params, &opts()).map_err(|e| e.to_string())?;
    let gap = |a: &RadialFunction| {
        a.values()
            .iter()
            .zip(w.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let step_gap = gap(&u).max(gap(&v));
    let settings = SolveOptions {
        damping: 1.0,
        tol: 1e-6,
        max_iter: 5,
    };
    let res = picard_solve(&params, Init::Custom(w.clone(), w.clone()), &grid, &settings, &opts())
        .map_err(|e| e.to_string())?;
    check(
        step_gap < 5e-4 && res.status == SolveStatus::Converged && res.iterations <= 5,
        format!(
            "step gap {step_gap:.3e}, solve {} after {} iterations",
            res.status, res.iterations
        ),
    )
}

fn sweep_csv(spec: &SweepSpec, threads: usize) -> Result<Vec<u8>, String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    pool.install(|| run_sweep(spec, &mut buf)).map_err(|e| e.to_string())?;
    Ok(buf)
}

fn phase_diagram() -> Outcome {
    let spec = SweepSpec {
        n: 5,
        alpha: 2.0,
        sigma1: 0.0,
        sigma2: 0.0,
        p_range: (0.5, 5.0, 100),
        q_range: (0.5, 5.0, 100),
    };
    let first = sweep_csv(&spec, 1)?;
    let second = sweep_csv(&spec, 4)?;
    let identical = first == second;

    let mut reader = csv::Reader::from_reader(first.as_slice());
    let mut rows = 0;
    let mut partition_errors = 0;
    let mut containment_errors = 0;
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        rows += 1;
        let p: f64 = rec[0].parse().unwrap();
        let q: f64 = rec[1].parse().unwrap();
        let general = &rec[7];
        let radial = &rec[8];
        let expected = if p * q <= 1.0 || (p * q - 1.0).abs() < 1e-12 {
            "NotExists"
        } else {
            // M = max of the two ratios at sigma = 0
            let m = (2.0 * (1.0 + q)).max(2.0 * (1.0 + p)) / (p * q - 1.0);
            if m < 3.0 {
                "Exists"
            } else {
                "NotExists"
            }
        };
        if general != expected && general != GeneralVerdict::Critical.to_string() {
            partition_errors += 1;
        }
        if general == "NotExists" && radial != RadialVerdict::RadialNotExists.to_string() {
            containment_errors += 1;
        }
    }
    check(
        rows == 10_000 && identical && partition_errors == 0 && containment_errors == 0,
        format!(
            "{rows} rows, {partition_errors} partition and {containment_errors} containment errors, \
             byte-identical across thread counts: {identical}"
        ),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("1 newtonian oracle", newtonian_oracle),
        ("2 conformal bubble oracle", bubble_oracle),
        ("3 closed-form kernel", closed_form_kernel),
        ("4 criterion arithmetic", criterion_arithmetic),
        ("5 exponent iteration", exponent_iteration),
        ("6 blow-up induction", blowup_induction),
        ("7 integration by parts", ibp_identity_check),
        ("8 pohozaev closure", pohozaev_closure),
        ("9 double boundedness", double_boundedness),
        ("10 fixed point", fixed_point),
        ("11 phase diagram", phase_diagram),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
