//! Acceptance suite: one line per criterion with the measured value, the
//! pinned tolerance and the wall time against its budget.
//!
//! `HOLELAB_ACCEPTANCE=1,4,8` runs a subset. Criteria listed in
//! `KNOWN_RED` are reported as FAIL like any other, but do not fail the
//! process; every other failure does.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use holelab::corrector::{annulus_capacity, annulus_y, c0_constant, CorrectorField};
use holelab::covering::{build_random_covering_with, regime_parameters, verify_random_covering};
use holelab::mecke::{mecke_check, MeckeFunctional};
use holelab::partition::{overlap_pairs, partition, partition_lattice};
use holelab::pde::{homogenization_error, homogenized_solve, mu_hminus, solve_perforated, Grid};
use holelab::process::{sample_configuration, Domain, MarkDistribution, ProcessSpec};
use holelab::rates::{
    bad_capacity_exponent, ensemble_run, ensemble_run_many, evaluate, fit_rate, ols, theoretical_exponents,
    EnsembleStat, Quantity, QuantityParams, RateFit, SlopeCheck,
};
use holelab::spatial::SpatialHash;
use holelab::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Criteria that cannot pass as stated; the reasons are in the README.
const KNOWN_RED: &[(u32, &str)] = &[
    (
        3,
        "the cell-average defect is 16 pi / (1 - 4 eps^2), not constant at eps = 1/4",
    ),
    (
        5,
        "beta = 0.5 overlap means are carried by rare near-unit balls; 200 replicates do not resolve the slope",
    ),
    (11, "holes of radius eps^3 are far below the grid spacing"),
];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Result<Outcome>,
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("HOLELAB_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria = [
        Criterion {
            id: 1,
            name: "exponent table",
            budget: Duration::from_millis(1),
            run: exponent_table,
        },
        Criterion {
            id: 2,
            name: "capacity oracle",
            budget: secs(1),
            run: capacity_oracle,
        },
        Criterion {
            id: 3,
            name: "periodic cell average",
            budget: secs(1),
            run: cell_average,
        },
        Criterion {
            id: 4,
            name: "periodic H^-1 rate",
            budget: secs(900),
            run: periodic_rate,
        },
        Criterion {
            id: 5,
            name: "overlap clustering",
            budget: secs(600),
            run: overlap_clustering,
        },
        Criterion {
            id: 6,
            name: "annealed bad capacity",
            budget: secs(600),
            run: bad_capacity,
        },
        Criterion {
            id: 7,
            name: "cell average variance",
            budget: secs(300),
            run: variance_scaling,
        },
        Criterion {
            id: 8,
            name: "exchange formula",
            budget: secs(120),
            run: exchange_formula,
        },
        Criterion {
            id: 9,
            name: "covering soundness",
            budget: secs(300),
            run: covering_soundness,
        },
        Criterion {
            id: 10,
            name: "rate surrogate",
            budget: secs(1800),
            run: rate_surrogate,
        },
        Criterion {
            id: 11,
            name: "direct solve",
            budget: secs(600),
            run: direct_solve,
        },
        Criterion {
            id: 12,
            name: "property suites",
            budget: secs(300),
            run: property_suites,
        },
    ];
    let mut unexpected = 0;
    let mut ran = 0;
    for c in &criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&c.id)) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = (c.run)().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let took = start.elapsed();
        let in_time = took <= c.budget;
        let pass = outcome.pass && in_time;
        let known = KNOWN_RED.iter().find(|(id, _)| *id == c.id);
        let note = match (pass, known) {
            (false, Some((_, why))) => format!("  [known: {why}]"),
            (true, Some(_)) => "  [listed as known red]".into(),
            (false, None) => {
                unexpected += 1;
                String::new()
            }
            _ => String::new(),
        };
        println!(
            "criterion {:>2} {} {}: {} ({:.3} s, budget {} s{}){}",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            c.name,
            outcome.detail,
            took.as_secs_f64(),
            c.budget.as_secs_f64(),
            if in_time { "" } else { ", over budget" },
            note
        );
    }
    println!("acceptance: {ran} run, {unexpected} unexpected failures");
    if unexpected > 0 {
        std::process::exit(1);
    }
}

fn exponent_table() -> Result<Outcome> {
    let a = theoretical_exponents(3, 0.5);
    let b = theoretical_exponents(3, 2.0);
    let (k, kappa) = regime_parameters(3, 0.01)?;
    let eq = |x: f64, y: f64| (x - y).abs() < 1e-12;
    let pass = eq(a.delta, 0.8) && eq(a.rate, 0.3) && eq(b.delta, 1.4) && eq(b.rate, 0.6) && k == 6 && eq(kappa, 0.2);
    Ok(Outcome::new(
        pass,
        format!(
            "beta 0.5 -> ({}, {}), beta 2 -> ({}, {}), eps 0.01 -> k {k}, kappa {kappa}",
            a.delta, a.rate, b.delta, b.rate
        ),
    ))
}

fn capacity_oracle() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let d = rng.random_range(3..=5);
        let a = rng.random_range(0.01..1.0);
        let r = a * rng.random_range(1.05..20.0);
        let exact = annulus_capacity(a, r, d)?;
        worst = worst.max((common::radial_capacity(a, r, d, 4001) / exact - 1.0).abs());
    }
    Ok(Outcome::new(
        worst < 1e-3,
        format!("max relative error {worst:.2e} (limit 1e-3)"),
    ))
}

fn cell_average() -> Result<Outcome> {
    let marks = MarkDistribution::constant(1.0);
    let c0 = c0_constant(&ProcessSpec::lattice(3, 0.25, marks))?;
    let mut scaled = Vec::new();
    for eps in [0.25f64, 0.125, 0.0625] {
        let w = annulus_capacity(eps.powi(3), eps / 4.0, 3)?;
        scaled.push((w / eps.powi(3) - c0).abs() / (eps * eps));
    }
    let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scaled.iter().cloned().fold(0.0, f64::max);
    let spread = hi / lo - 1.0;
    let exact = (c0 - 4.0 * PI).abs() < 1e-12;
    Ok(Outcome::new(
        exact && spread <= 0.05,
        format!(
            "C0 = {c0:.12}, |weight/eps^3 - C0|/eps^2 = {:.4?}, spread {:.1}% (limit 5%)",
            scaled,
            100.0 * spread
        ),
    ))
}

fn periodic_rate() -> Result<Outcome> {
    let grid = [1.0 / 6.0, 1.0 / 8.0, 1.0 / 12.0, 1.0 / 16.0];
    let mut norms = Vec::new();
    for &eps in &grid {
        let spec = ProcessSpec::lattice(3, eps, MarkDistribution::constant(1.0))
            .with_domain(Domain::AxisCube { half_width: 0.375 });
        let c = sample_configuration(&spec, 0)?;
        norms.push(mu_hminus(&c, 0.8, 97)?);
    }
    let x: Vec<f64> = grid.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let (slope, _, r2) = ols(&x, &y);
    Ok(Outcome::new(
        (slope - 1.0).abs() <= 0.25,
        format!(
            "slope {slope:.3} (target 1.0 ± 0.25, r2 {r2:.3}), norms {}",
            sci(&norms)
        ),
    ))
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn describe(fit: &RateFit) -> String {
    let mut s = format!(
        "slope {:.3} [{:.3}, {:.3}], r2 {:.3}, means {}",
        fit.slope,
        fit.ci_lo,
        fit.ci_hi,
        fit.r2,
        sci(&fit.means)
    );
    for w in &fit.warnings {
        s.push_str(&format!("; {w}"));
    }
    s
}

const HEAVY_GRID: [f64; 4] = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];

/// Overlap and bad-capacity samples on the same lattice ensemble.
fn heavy_ensemble() -> Result<&'static [EnsembleStat]> {
    use std::sync::OnceLock;
    static CACHE: OnceLock<std::result::Result<Vec<EnsembleStat>, String>> = OnceLock::new();
    CACHE
        .get_or_init(|| {
            let spec = ProcessSpec::lattice(3, 0.125, MarkDistribution::pareto_normalized(3, 0.5, 0.05));
            let params = QuantityParams {
                delta: Some(0.8),
                ..Default::default()
            };
            ensemble_run_many(
                &spec,
                &[Quantity::OverlapPairs, Quantity::BadCapacitySum],
                &HEAVY_GRID,
                200,
                &params,
            )
            .map_err(|e| e.to_string())
        })
        .as_deref()
        .map_err(|e| holelab::Error::InvalidSpec(e.clone()))
}

fn overlap_clustering() -> Result<Outcome> {
    let stats = heavy_ensemble()?;
    let t = theoretical_exponents(3, 0.5);
    let fit = fit_rate(&stats[0], t.overlap_exponent, SlopeCheck::Within(0.2))?;
    Ok(Outcome::new(
        fit.pass,
        format!(
            "{} vs predicted {:.3} ± 0.2 (exact-mean exponent {:.3}, alternatives {:.3} / {:.3})",
            describe(&fit),
            t.overlap_exponent,
            t.overlap_mean_exponent,
            t.overlap_exponent_linear,
            t.overlap_exponent_scaled
        ),
    ))
}

fn bad_capacity() -> Result<Outcome> {
    let stats = heavy_ensemble()?;
    let target = bad_capacity_exponent(3, 0.5, 0.8);
    let fit = fit_rate(&stats[1], target, SlopeCheck::AtLeast(0.15))?;
    Ok(Outcome::new(
        fit.pass,
        format!("{} (need >= {:.2})", describe(&fit), target - 0.15),
    ))
}

fn variance_scaling() -> Result<Outcome> {
    let eps = 1.0 / 64.0;
    let spec = ProcessSpec::lattice(3, eps, MarkDistribution::uniform(0.5, 1.5))
        .with_domain(Domain::AxisCube { half_width: 0.375 });
    let ks = [4usize, 8, 16];
    let y = |r: f64| annulus_y(r, eps / 4.0, eps, 3);
    let m1 = common::simpson(y, 0.5, 1.5, 2000);
    let m2 = common::simpson(|r| y(r) * y(r), 0.5, 1.5, 2000);
    let var_y = m2 - m1 * m1;
    let per_rep: Vec<Vec<f64>> = (0..500u64)
        .into_par_iter()
        .map(|r| {
            let c = sample_configuration(&spec, r)?;
            ks.iter()
                .map(|&k| {
                    let params = QuantityParams {
                        delta: Some(0.8),
                        k: Some(k),
                        grid_n: None,
                    };
                    evaluate(&c, Quantity::SVariance, &params)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = ks
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let m = per_rep.iter().map(|v| v[j]).sum::<f64>() / per_rep.len() as f64;
            (k as f64).powi(3) * m / var_y
        })
        .collect();
    Ok(Outcome::new(
        ratios.iter().all(|r| (0.5..=2.0).contains(r)),
        format!("k^3 E[(S - E rho)^2] / Var Y = {ratios:.3?} for k = {ks:?} (window [0.5, 2])"),
    ))
}

fn exchange_formula() -> Result<Outcome> {
    let eps = 0.1;
    let spec = ProcessSpec::poisson(3, eps, 2.0, MarkDistribution::pareto_normalized(3, 2.0, 0.05)).with_seed(8);
    let mut pass = true;
    let mut parts = Vec::new();
    for f in [
        MeckeFunctional::One,
        MeckeFunctional::CappedCapacity { delta: 1.4 },
        MeckeFunctional::SpacedCapacity { t: eps * eps },
    ] {
        let r = mecke_check(&spec, &f, 10_000)?;
        pass &= r.z.abs() < 4.0;
        parts.push(format!("{} z = {:.2}", r.functional, r.z));
    }
    Ok(Outcome::new(pass, parts.join(", ")))
}

fn covering_soundness() -> Result<Outcome> {
    let eps = 1.0 / 16.0;
    let spec = ProcessSpec::poisson(3, eps, 1.0, MarkDistribution::pareto_normalized(3, 2.0, 0.05)).with_seed(9);
    let (k, kappa) = regime_parameters(3, eps)?;
    let reports: Vec<(usize, usize, usize)> = (0..100u64)
        .into_par_iter()
        .map(|r| {
            let c = sample_configuration(&spec, r)?;
            Ok(match build_random_covering_with(&c, k, kappa) {
                Ok(cov) => {
                    let rep = verify_random_covering(&c, &cov);
                    (
                        rep.volume_violations + rep.disjointness_violations,
                        rep.dichotomy_violations,
                        rep.pairs_checked,
                    )
                }
                Err(_) => (1, 0, 0),
            })
        })
        .collect::<Result<_>>()?;
    let vol: usize = reports.iter().map(|r| r.0).sum();
    let dich: usize = reports.iter().map(|r| r.1).sum();
    let pairs: usize = reports.iter().map(|r| r.2).sum();
    Ok(Outcome::new(
        vol == 0 && dich == 0,
        format!("k {k}, kappa {kappa}: {vol} volume/disjointness and {dich} dichotomy violations over {pairs} pairs"),
    ))
}

fn rate_surrogate() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for beta in [0.5, 2.0] {
        let spec = ProcessSpec::lattice(3, 0.125, MarkDistribution::pareto_normalized(3, beta, 0.05));
        let stat = ensemble_run(
            &spec,
            Quantity::DetEstimateRhs,
            &HEAVY_GRID,
            30,
            &QuantityParams::default(),
        )?;
        let target = (0.6 * beta).min(0.6);
        let fit = fit_rate(&stat, target, SlopeCheck::AtLeast(0.15))?;
        pass &= fit.pass;
        parts.push(format!(
            "beta {beta}: {} (need >= {:.2})",
            describe(&fit),
            target - 0.15
        ));
    }
    Ok(Outcome::new(pass, parts.join("; ")))
}

fn direct_solve() -> Result<Outcome> {
    let one = |_: &[f64; 3]| 1.0;
    let mut errs = Vec::new();
    let mut omitted = Vec::new();
    for eps in [1.0 / 6.0, 1.0 / 12.0] {
        let spec = ProcessSpec::lattice(3, eps, MarkDistribution::constant(1.0));
        let c = sample_configuration(&spec, 0)?;
        let p = partition_lattice(&c, 0.8)?;
        let grid = Grid::for_domain(&spec.domain, 97)?;
        let u_eps = solve_perforated(&c, &p, &one, &grid)?;
        let w = CorrectorField::lattice(&c, &p.good)?;
        let u = homogenized_solve(c0_constant(&spec)?, &one, &grid)?;
        errs.push(homogenization_error(&u_eps.u, &w, &u.u, &grid));
        omitted.push(u_eps.omitted_holes);
    }
    Ok(Outcome::new(
        errs[1] < errs[0],
        format!(
            "error at eps 1/6 = {:.4e}, at eps 1/12 = {:.4e}; holes without a grid node {omitted:?}",
            errs[0], errs[1]
        ),
    ))
}

fn property_suites() -> Result<Outcome> {
    let mut mismatches = 0;
    let mut max_points = 0;
    for seed in 0..100u64 {
        let spec = ProcessSpec::poisson(3, 0.2, 0.8, MarkDistribution::pareto_normalized(3, 0.5, 0.05))
            .with_domain(Domain::AxisCube { half_width: 1.0 })
            .with_seed(seed);
        let c = sample_configuration(&spec, 0)?;
        max_points = max_points.max(c.len());
        if partition(&c, 0.8)?.class != common::oracle_classes(&c, 0.8) {
            mismatches += 1;
        }
        if overlap_pairs(&c) != common::oracle_overlaps(&c) {
            mismatches += 1;
        }
    }
    let mut hash_mismatches = 0;
    for seed in 0..100u64 {
        let spec = ProcessSpec::poisson(3, 0.2, 0.8, MarkDistribution::constant(1.0)).with_seed(1000 + seed);
        let c = sample_configuration(&spec, 0)?;
        let hash = SpatialHash::build(c.coords(), 3, 1.0);
        for i in (0..c.len()).step_by(13) {
            let q = c.point(i);
            let r = 0.5 + (seed % 7) as f64 * 0.5;
            let brute: Vec<usize> = (0..c.len()).filter(|&j| common::dist(c.point(j), q) <= r).collect();
            if hash.within(c.coords(), q, r) != brute {
                hash_mismatches += 1;
            }
        }
    }
    let grid = HEAVY_GRID.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    for planted in [0.3, 0.6, 1.0, 2.5] {
        let values: Vec<Vec<f64>> = grid
            .iter()
            .map(|e| {
                (0..200)
                    .map(|_| 2.0 * e.powf(planted) * rng.random_range(0.95..1.05))
                    .collect()
            })
            .collect();
        let stat = EnsembleStat::from_samples(Quantity::BadCapacitySum, 3, 0.5, grid.clone(), values);
        let fit = fit_rate(&stat, planted, SlopeCheck::Within(0.01))?;
        worst = worst.max((fit.slope - planted).abs());
    }
    Ok(Outcome::new(
        mismatches == 0 && hash_mismatches == 0 && worst < 0.01 && max_points <= 1000,
        format!(
            "partition/overlap mismatches {mismatches} (<= {max_points} points), hash mismatches {hash_mismatches}, planted slope error {worst:.1e}"
        ),
    ))
}
