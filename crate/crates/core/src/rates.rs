//! Capacity-density statistics over replicate ensembles and log-log rate
//! fits against the predicted exponents.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::corrector::annulus_y;
use crate::covering::{build_random_covering_with, regime_parameters, RandomCovering};
use crate::error::{Error, Result};
use crate::export::write_atomic;
use crate::partition::{bad_capacity_sum, overlap_pairs, partition, HoleClass, HolePartition};
use crate::process::{sample_configuration, thin_phi_delta, MarkedConfiguration, ProcessSpec};

/// Exponents predicted for dimension `d` and moment gap `beta`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoreticalExponents {
    pub d: usize,
    pub beta: f64,
    pub delta: f64,
    pub rate: f64,
    pub k_exponent: f64,
    pub kappa: f64,
    /// Slope of `eps^-d P(eps^(d/(d-2)) rho > eps)` for the Pareto tail
    /// `alpha = d - 2 + beta + eta`: `-d + 2 alpha/(d-2)`.
    pub overlap_exponent: f64,
    /// Slope of the exact mean overlap count, which is carried by the rare
    /// balls of radius near 1: `-2d + d alpha/(d-2)` while `alpha < d`.
    pub overlap_mean_exponent: f64,
    /// `-d + 2 + beta`.
    pub overlap_exponent_linear: f64,
    /// `-d + 2 + 2 beta/(d-2)`.
    pub overlap_exponent_scaled: f64,
    pub overlap_formula: String,
}

/// `delta` and the rate for the given moment gap. Infinite `beta` stands for
/// bounded marks.
pub fn theoretical_exponents(d: usize, beta: f64) -> TheoreticalExponents {
    theoretical_exponents_with_margin(d, beta, crate::process::DEFAULT_ETA)
}

pub fn theoretical_exponents_with_margin(d: usize, beta: f64, eta: f64) -> TheoreticalExponents {
    let df = d as f64;
    let q = df * df - 4.0;
    let (delta, rate) = if beta <= df - 2.0 {
        (4.0 / q, df * beta / q)
    } else {
        let delta = if beta.is_infinite() {
            2.0 / (df - 2.0)
        } else {
            2.0 / (df - 2.0) - 2.0 * df / ((df + 2.0) * beta)
        };
        (delta, df / (df + 2.0))
    };
    let alpha = df - 2.0 + beta + eta;
    let (overlap, mean) = if beta.is_finite() {
        let mean = if alpha < df {
            -2.0 * df + df * alpha / (df - 2.0)
        } else {
            -2.0 * df + df * df / (df - 2.0)
        };
        (-df + 2.0 * alpha / (df - 2.0), mean)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    TheoreticalExponents {
        d,
        beta,
        delta,
        rate,
        k_exponent: 2.0 / (df + 2.0),
        kappa: 2.0 / ((df - 1.0) * (df + 2.0)),
        overlap_exponent: overlap,
        overlap_mean_exponent: mean,
        overlap_exponent_linear: -df + 2.0 + beta,
        overlap_exponent_scaled: -df + 2.0 + 2.0 * beta / (df - 2.0),
        overlap_formula: "-d + 2 alpha/(d-2), alpha = d - 2 + beta + eta".into(),
    }
}

/// Decay exponent of the mean bad capacity: `(2/(d-2) - delta) beta`.
pub fn bad_capacity_exponent(d: usize, beta: f64, delta: f64) -> f64 {
    (2.0 / (d as f64 - 2.0) - delta) * beta
}

/// Per-cell averages `S = eps^d / |K| Σ_{w in cell, thinned} Y_w`. On the
/// lattice `|K| = (k eps)^d` and the outer radius is `eps/4`.
pub fn compute_s(config: &MarkedConfiguration, covering: &RandomCovering, delta: f64) -> Result<Vec<f64>> {
    let d = config.d();
    let eps = config.epsilon();
    let keep = thinned_mask(config, delta);
    let mut s = vec![0.0; covering.cells.len()];
    for (c, cell) in covering.base.cells.iter().enumerate() {
        let mut sum = 0.0;
        for &w in &cell.points {
            if keep[w] {
                sum += y_term(config, covering, w)?;
            }
        }
        s[c] = eps.powi(d as i32) / covering.cells[c].volume * sum;
    }
    Ok(s)
}

fn thinned_mask(config: &MarkedConfiguration, delta: f64) -> Vec<bool> {
    let mut keep = vec![false; config.len()];
    for i in thin_phi_delta(config, delta) {
        keep[i] = true;
    }
    keep
}

fn y_term(config: &MarkedConfiguration, covering: &RandomCovering, w: usize) -> Result<f64> {
    let d = config.d();
    let eps = config.epsilon();
    let rho = config.rho()[w];
    let r = covering.tilde_r[w];
    let q = r.powi(d as i32 - 2);
    let denom = q - eps.powi(d as i32) * rho.powi(d as i32 - 2);
    if denom <= 0.0 {
        return Err(Error::BadAnnulus { index: w });
    }
    Ok(annulus_y(rho, r, eps, d))
}

/// Right-hand side of the quenched estimate for one realization.
pub fn det_estimate_rhs(
    config: &MarkedConfiguration,
    partition: &HolePartition,
    covering: &RandomCovering,
    delta: f64,
) -> Result<f64> {
    if config.is_empty() {
        return Ok(0.0);
    }
    let d = config.d();
    let p = d as i32 - 2;
    let eps = config.epsilon();
    let ed = eps.powi(d as i32);
    let ke = covering.base.side();
    let lattice = config.spec.is_lattice();
    let centre = config.spec.intensity() * config.spec.marks.moment(p as f64);
    if !centre.is_finite() {
        return Err(Error::DivergentMoment { p: p as f64 });
    }
    let rho = config.rho();
    let mut thinned = 0.0;
    for i in thin_phi_delta(config, delta) {
        let w = if lattice {
            1.0
        } else {
            (eps / covering.tilde_r[i]).powi(d as i32)
        };
        thinned += rho[i].powi(2 * p) * w;
    }
    let bad: f64 = partition
        .class
        .iter()
        .zip(rho)
        .filter(|(c, _)| **c != HoleClass::Good)
        .map(|(_, r)| r.powi(p))
        .sum();
    let first = (ke * ke * ed * thinned + ed * bad).sqrt();

    let s = compute_s(config, covering, delta)?;
    let (mut inner, mut ni, mut outer, mut no) = (0.0, 0usize, 0.0, 0usize);
    for (c, cell) in covering.base.cells.iter().enumerate() {
        let dev = (s[c] - centre).powi(2);
        if cell.interior {
            inner += dev;
            ni += 1;
        } else {
            outer += dev;
            no += 1;
        }
    }
    let avg = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    let second = (avg(inner, ni) + ke.powi(3) * avg(outer, no)).sqrt();

    let third = if lattice {
        0.0
    } else {
        let mut shell = 0.0;
        for (c, cell) in covering.base.cells.iter().enumerate() {
            for &w in &cell.points {
                let x: Vec<f64> = config.point(w).iter().map(|z| eps * z).collect();
                let q = &covering.base.cells[c];
                let dd = (0..d)
                    .map(|a| (x[a] - q.lo[a]).min(q.hi[a] - x[a]))
                    .fold(f64::INFINITY, f64::min);
                if dd < eps / 2.0 {
                    shell += rho[w].powi(2 * p);
                }
            }
        }
        let df = d as f64;
        (eps.powf(df + 2.0 * df / (df + 2.0)) * shell).sqrt()
    };
    Ok(first + second + third)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    BadCapacitySum,
    OverlapPairs,
    SVariance,
    DetEstimateRhs,
    MuHminus,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::BadCapacitySum => "bad_capacity_sum",
            Quantity::OverlapPairs => "overlap_pairs",
            Quantity::SVariance => "s_variance",
            Quantity::DetEstimateRhs => "det_estimate_rhs",
            Quantity::MuHminus => "mu_hminus",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "bad_capacity_sum" | "bad_capacity" => Quantity::BadCapacitySum,
            "overlap_pairs" | "overlap" => Quantity::OverlapPairs,
            "s_variance" | "S_variance" => Quantity::SVariance,
            "det_estimate_rhs" => Quantity::DetEstimateRhs,
            "mu_hminus" => Quantity::MuHminus,
            other => return Err(Error::InvalidSpec(format!("unknown quantity '{other}'"))),
        })
    }
}

/// Knobs shared by the ensemble quantities. Unset values follow the
/// predicted regime for the spec's marks.
#[derive(Clone, Debug, Default, Serialize)]
pub struct QuantityParams {
    pub delta: Option<f64>,
    /// Fixed mesoscale multiplier; otherwise `floor(eps^(-2/(d+2)))`.
    pub k: Option<usize>,
    /// Grid nodes per axis for `mu_hminus`.
    pub grid_n: Option<usize>,
}

impl QuantityParams {
    pub fn delta_for(&self, spec: &ProcessSpec) -> f64 {
        self.delta
            .unwrap_or_else(|| theoretical_exponents(spec.d, spec.marks.beta_eff).delta)
    }

    pub fn k_for(&self, spec: &ProcessSpec) -> Result<(usize, f64)> {
        let (k, kappa) = regime_parameters(spec.d, spec.epsilon)?;
        Ok((self.k.unwrap_or(k), kappa))
    }
}

/// Evaluates one quantity on one realization.
pub fn evaluate(config: &MarkedConfiguration, quantity: Quantity, params: &QuantityParams) -> Result<f64> {
    let spec = &config.spec;
    let delta = params.delta_for(spec);
    match quantity {
        Quantity::BadCapacitySum => {
            let p = partition(config, delta)?;
            Ok(bad_capacity_sum(config, &p))
        }
        Quantity::OverlapPairs => Ok(overlap_pairs(config) as f64),
        Quantity::SVariance => {
            let (k, kappa) = params.k_for(spec)?;
            let cov = build_random_covering_with(config, k, kappa)?;
            let origin = vec![0.0; spec.d];
            let c = cov
                .base
                .cell_containing(&origin)
                .ok_or_else(|| Error::Covering("no cell contains the origin".into()))?;
            let s = compute_s(config, &cov, delta)?;
            let centre = spec.intensity() * spec.marks.moment(spec.d as f64 - 2.0);
            Ok((s[c] - centre).powi(2))
        }
        Quantity::DetEstimateRhs => {
            let (k, kappa) = params.k_for(spec)?;
            let p = partition(config, delta)?;
            let cov = build_random_covering_with(config, k, kappa)?;
            det_estimate_rhs(config, &p, &cov, delta)
        }
        Quantity::MuHminus => crate::pde::mu_hminus(config, delta, params.grid_n.unwrap_or(97)),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReplicateFailure {
    pub epsilon: f64,
    pub replicate: u64,
    pub message: String,
}

/// Samples of one quantity over an epsilon grid.
#[derive(Clone, Debug, Serialize)]
pub struct EnsembleStat {
    pub quantity: Quantity,
    pub d: usize,
    pub beta_eff: f64,
    pub epsilon_grid: Vec<f64>,
    pub replicates: usize,
    /// `samples[e][r]`: value of replicate `r` at `epsilon_grid[e]`; failed
    /// replicates are absent and listed in `failures`.
    pub samples: Vec<Vec<(u64, f64)>>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub failures: Vec<ReplicateFailure>,
}

impl EnsembleStat {
    /// Builds the statistic from complete samples (no failures).
    pub fn from_samples(
        quantity: Quantity,
        d: usize,
        beta_eff: f64,
        epsilon_grid: Vec<f64>,
        values: Vec<Vec<f64>>,
    ) -> Self {
        let replicates = values.iter().map(Vec::len).max().unwrap_or(0);
        let samples = values
            .into_iter()
            .map(|v| v.into_iter().enumerate().map(|(r, x)| (r as u64, x)).collect())
            .collect();
        let mut s = EnsembleStat {
            quantity,
            d,
            beta_eff,
            epsilon_grid,
            replicates,
            samples,
            mean: Vec::new(),
            sd: Vec::new(),
            failures: Vec::new(),
        };
        s.summarize();
        s
    }

    fn summarize(&mut self) {
        self.mean.clear();
        self.sd.clear();
        for v in &self.samples {
            let n = v.len() as f64;
            let m = v.iter().map(|x| x.1).sum::<f64>() / n;
            let var = if v.len() > 1 {
                v.iter().map(|x| (x.1 - m).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            self.mean.push(m);
            self.sd.push(var.sqrt());
        }
    }

    pub fn values(&self, e: usize) -> Vec<f64> {
        self.samples[e].iter().map(|x| x.1).collect()
    }

    /// Raw samples as CSV: `quantity,d,beta_eff,epsilon,replicate,value`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["quantity", "d", "beta_eff", "epsilon", "replicate", "value"])?;
        for (e, eps) in self.epsilon_grid.iter().enumerate() {
            for (r, v) in &self.samples[e] {
                w.write_record([
                    self.quantity.name().to_string(),
                    self.d.to_string(),
                    self.beta_eff.to_string(),
                    eps.to_string(),
                    r.to_string(),
                    format!("{v:e}"),
                ])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        write_atomic(path, &bytes)
    }
}

/// Runs every quantity on the same realizations: one configuration per
/// `(epsilon, replicate)`, replicates in parallel. Aborts when more than
/// 1% of the replicates fail.
pub fn ensemble_run_many(
    spec: &ProcessSpec,
    quantities: &[Quantity],
    epsilon_grid: &[f64],
    replicates: usize,
    params: &QuantityParams,
) -> Result<Vec<EnsembleStat>> {
    let jobs: Vec<(usize, u64)> = (0..epsilon_grid.len())
        .flat_map(|e| (0..replicates as u64).map(move |r| (e, r)))
        .collect();
    let results: Vec<Result<Vec<f64>>> = jobs
        .par_iter()
        .map(|&(e, r)| {
            let spec = spec.clone().with_epsilon(epsilon_grid[e]);
            let config = sample_configuration(&spec, r)?;
            quantities.iter().map(|&q| evaluate(&config, q, params)).collect()
        })
        .collect();
    let total = results.len();
    let mut failures = Vec::new();
    let mut per_eps: Vec<Vec<(u64, Vec<f64>)>> = vec![Vec::new(); epsilon_grid.len()];
    for (&(e, r), res) in jobs.iter().zip(results) {
        match res {
            Ok(v) => per_eps[e].push((r, v)),
            Err(err) => failures.push(ReplicateFailure {
                epsilon: epsilon_grid[e],
                replicate: r,
                message: err.to_string(),
            }),
        }
    }
    if failures.len() * 100 > total {
        return Err(Error::Ensemble {
            failed: failures.len(),
            total,
            first: failures[0].message.clone(),
        });
    }
    Ok(quantities
        .iter()
        .enumerate()
        .map(|(qi, &q)| {
            let mut s = EnsembleStat {
                quantity: q,
                d: spec.d,
                beta_eff: spec.marks.beta_eff,
                epsilon_grid: epsilon_grid.to_vec(),
                replicates,
                samples: per_eps
                    .iter()
                    .map(|v| v.iter().map(|(r, x)| (*r, x[qi])).collect())
                    .collect(),
                mean: Vec::new(),
                sd: Vec::new(),
                failures: failures.clone(),
            };
            s.summarize();
            s
        })
        .collect())
}

pub fn ensemble_run(
    spec: &ProcessSpec,
    quantity: Quantity,
    epsilon_grid: &[f64],
    replicates: usize,
    params: &QuantityParams,
) -> Result<EnsembleStat> {
    Ok(ensemble_run_many(spec, &[quantity], epsilon_grid, replicates, params)?.remove(0))
}

/// How a fitted slope is judged against the prediction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeCheck {
    /// `|slope - theoretical| <= tol`.
    Within(f64),
    /// `slope >= theoretical - margin`.
    AtLeast(f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct RateFit {
    pub quantity: Quantity,
    pub slope: f64,
    pub intercept: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub r2: f64,
    pub theoretical: f64,
    pub check: SlopeCheck,
    pub pass: bool,
    pub epsilons: Vec<f64>,
    pub means: Vec<f64>,
    pub warnings: Vec<String>,
}

impl RateFit {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(self)?;
        write_atomic(path, &bytes)
    }
}

pub const MIN_FIT_POINTS: usize = 4;
pub const MIN_FIT_REPLICATES: usize = 30;
const BOOTSTRAP_ROUNDS: usize = 1000;
const BOOTSTRAP_SEED: u64 = 0x5EED_F17;

/// `(slope, intercept, r2)` of least squares on `(x, y)`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).min(1.0)
    };
    (slope, intercept, r2)
}

/// Fits `log mean` against `log epsilon` with a replicate bootstrap.
pub fn fit_rate(stat: &EnsembleStat, theoretical: f64, check: SlopeCheck) -> Result<RateFit> {
    let mut warnings = Vec::new();
    let mut keep = Vec::new();
    for (e, eps) in stat.epsilon_grid.iter().enumerate() {
        let n = stat.samples[e].len();
        if n < MIN_FIT_REPLICATES {
            return Err(Error::FitRefused(format!(
                "epsilon {eps} has {n} replicates, need at least {MIN_FIT_REPLICATES}"
            )));
        }
        if stat.mean[e] > 0.0 && stat.mean[e].is_finite() {
            keep.push(e);
        } else {
            warnings.push(format!("epsilon {eps} dropped: mean {} is not positive", stat.mean[e]));
        }
    }
    if keep.len() < MIN_FIT_POINTS {
        return Err(Error::FitRefused(format!(
            "{} epsilon values with positive mean, need at least {MIN_FIT_POINTS}",
            keep.len()
        )));
    }
    let x: Vec<f64> = keep.iter().map(|&e| stat.epsilon_grid[e].ln()).collect();
    let y: Vec<f64> = keep.iter().map(|&e| stat.mean[e].ln()).collect();
    let (slope, intercept, r2) = ols(&x, &y);

    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    let mut slopes = Vec::with_capacity(BOOTSTRAP_ROUNDS);
    let columns: Vec<Vec<f64>> = keep.iter().map(|&e| stat.values(e)).collect();
    let mut yb = vec![0.0; keep.len()];
    for _ in 0..BOOTSTRAP_ROUNDS {
        let mut ok = true;
        for (j, col) in columns.iter().enumerate() {
            let n = col.len();
            let m = (0..n).map(|_| col[rng.random_range(0..n)]).sum::<f64>() / n as f64;
            if m <= 0.0 {
                ok = false;
                break;
            }
            yb[j] = m.ln();
        }
        if ok {
            slopes.push(ols(&x, &yb).0);
        }
    }
    slopes.sort_by(f64::total_cmp);
    let (mut lo, mut hi) = if slopes.is_empty() {
        warnings.push("no bootstrap resample had all means positive".into());
        (slope, slope)
    } else {
        let q = |p: f64| slopes[((slopes.len() - 1) as f64 * p).round() as usize];
        (q(0.025), q(0.975))
    };
    lo = lo.min(slope);
    hi = hi.max(slope);
    let pass = match check {
        SlopeCheck::Within(tol) => (slope - theoretical).abs() <= tol,
        SlopeCheck::AtLeast(margin) => slope >= theoretical - margin,
    };
    Ok(RateFit {
        quantity: stat.quantity,
        slope,
        intercept,
        ci_lo: lo,
        ci_hi: hi,
        r2,
        theoretical,
        check,
        pass,
        epsilons: keep.iter().map(|&e| stat.epsilon_grid[e]).collect(),
        means: keep.iter().map(|&e| stat.mean[e]).collect(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrector::{build_mu_eps, capacity_constant, CorrectorField};
    use crate::covering::build_random_covering;
    use crate::partition::partition_lattice;
    use crate::process::{MarkDistribution, ProcessSpec};

    #[test]
    fn exponent_table() {
        let a = theoretical_exponents(3, 0.5);
        assert!((a.delta - 0.8).abs() < 1e-15 && (a.rate - 0.3).abs() < 1e-15);
        let b = theoretical_exponents(3, 2.0);
        assert!((b.delta - 1.4).abs() < 1e-15 && (b.rate - 0.6).abs() < 1e-15);
        let c = theoretical_exponents(3, f64::INFINITY);
        assert_eq!(c.rate, 0.6);
        assert_eq!(c.k_exponent, 0.4);
        assert_eq!(c.kappa, 0.2);
        assert!((a.overlap_exponent - 0.1).abs() < 1e-12);
        assert!((a.overlap_mean_exponent + 1.35).abs() < 1e-12);
    }

    #[test]
    fn constant_lattice_cell_average() {
        let eps = 0.1;
        let c = sample_configuration(&ProcessSpec::lattice(3, eps, MarkDistribution::constant(1.0)), 0).unwrap();
        let cov = build_random_covering_with(&c, 3, 0.2).unwrap();
        let s = compute_s(&c, &cov, 0.8).unwrap();
        let interior = cov.base.cell_containing(&[0.0; 3]).unwrap();
        assert_eq!(cov.base.cells[interior].points.len(), 27);
        assert!((s[interior] - 1.0 / 0.96).abs() < 1e-12);
    }

    #[test]
    fn empty_cells_average_zero() {
        let spec = ProcessSpec::poisson(3, 1.0 / 16.0, 1.0, MarkDistribution::constant(1.0));
        let c = MarkedConfiguration::from_points(spec, vec![0.0; 3], vec![1.0]).unwrap();
        let cov = build_random_covering(&c, 3).unwrap();
        let s = compute_s(&c, &cov, 0.8).unwrap();
        let own = cov.base.assignment[0];
        assert!(s.iter().enumerate().all(|(i, v)| (i == own) == (*v > 0.0)));
    }

    #[test]
    fn cell_average_matches_measure_weights() {
        let eps = 1.0 / 16.0;
        let spec = ProcessSpec::lattice(3, eps, MarkDistribution::uniform(0.5, 1.5)).with_seed(3);
        let c = sample_configuration(&spec, 0).unwrap();
        let cov = build_random_covering_with(&c, 4, 0.2).unwrap();
        let s = compute_s(&c, &cov, 0.8).unwrap();
        for (ci, cell) in cov.base.cells.iter().enumerate() {
            let pts: Vec<usize> = cell.points.clone();
            let field = CorrectorField::lattice(&c, &pts).unwrap();
            let mass = build_mu_eps(&field).total_weight() / cov.cells[ci].volume;
            let m = capacity_constant(3) * s[ci];
            assert!((m - mass).abs() <= 1e-12 * mass.max(1.0));
        }
    }

    #[test]
    fn lattice_constant_marks_rhs_is_order_k_eps() {
        let eps = 1.0 / 16.0;
        let c = sample_configuration(&ProcessSpec::lattice(3, eps, MarkDistribution::constant(1.0)), 0).unwrap();
        let p = partition_lattice(&c, 0.8).unwrap();
        let cov = build_random_covering_with(&c, 3, 0.2).unwrap();
        let v = det_estimate_rhs(&c, &p, &cov, 0.8).unwrap();
        let ke = 3.0 * eps;
        // the first term is (k eps) sqrt(|D|); the averages are tiny
        assert!(v > ke * 8f64.sqrt() && v < 1.2 * ke * 8f64.sqrt() + 0.1);
    }

    #[test]
    fn planted_slopes_recovered() {
        let grid = vec![0.125, 0.0625, 0.03125, 0.015625];
        for planted in [0.5, 0.0, 1.3] {
            let values: Vec<Vec<f64>> = grid.iter().map(|e: &f64| vec![e.powf(planted); 30]).collect();
            let st = EnsembleStat::from_samples(Quantity::DetEstimateRhs, 3, 0.5, grid.clone(), values);
            let f = fit_rate(&st, planted, SlopeCheck::Within(0.01)).unwrap();
            assert!((f.slope - planted).abs() < 1e-12);
            assert!((f.ci_hi - f.ci_lo).abs() < 1e-12);
            assert!(f.pass);
        }
    }

    #[test]
    fn zeros_refused() {
        let grid = vec![0.125, 0.0625, 0.03125, 0.015625];
        let st = EnsembleStat::from_samples(Quantity::BadCapacitySum, 3, 0.5, grid.clone(), vec![vec![0.0; 30]; 4]);
        assert!(matches!(
            fit_rate(&st, 0.3, SlopeCheck::AtLeast(0.15)),
            Err(Error::FitRefused(_))
        ));
        let few = EnsembleStat::from_samples(Quantity::BadCapacitySum, 3, 0.5, grid, vec![vec![1.0; 5]; 4]);
        assert!(fit_rate(&few, 0.3, SlopeCheck::AtLeast(0.15)).is_err());
    }
}
