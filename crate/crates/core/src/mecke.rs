//! Monte Carlo self-test of the Poisson exchange formula
//! `E[Σ_{z in Φ(A)} G(z, rho_z; Φ \ z)] = λ |A| E_rho[E[G(0, rho; Φ)]]`
//! with `A = [-1/2, 1/2]^d` in rescaled units.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::process::{
    mark_threshold, sample_configuration, unit_ball_volume, Domain, MarkDistribution, MarkLaw, ProcessSpec,
};

/// Built-in test functionals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeckeFunctional {
    /// `G = 1`.
    One,
    /// `G = rho`.
    Mark,
    /// `G = rho^(d-2) 1{rho < T}` with `T` the mark threshold for `delta`.
    CappedCapacity { delta: f64 },
    /// `G = 1{R >= t} rho^(d-2)`, `R` the minimal distance of the point.
    SpacedCapacity { t: f64 },
}

impl MeckeFunctional {
    pub fn name(&self) -> &'static str {
        match self {
            MeckeFunctional::One => "one",
            MeckeFunctional::Mark => "mark",
            MeckeFunctional::CappedCapacity { .. } => "capped_capacity",
            MeckeFunctional::SpacedCapacity { .. } => "spaced_capacity",
        }
    }

    /// Parses a name; `delta` and `t` fill the parameters.
    pub fn parse(name: &str, delta: f64, t: f64) -> Result<Self> {
        Ok(match name {
            "one" => MeckeFunctional::One,
            "mark" => MeckeFunctional::Mark,
            "capped_capacity" => MeckeFunctional::CappedCapacity { delta },
            "spaced_capacity" => MeckeFunctional::SpacedCapacity { t },
            other => return Err(Error::InvalidSpec(format!("unknown functional '{other}'"))),
        })
    }

    fn eval(&self, spec: &ProcessSpec, rho: f64, r: f64) -> f64 {
        let p = spec.d as i32 - 2;
        match *self {
            MeckeFunctional::One => 1.0,
            MeckeFunctional::Mark => rho,
            MeckeFunctional::CappedCapacity { delta } => {
                if rho < mark_threshold(spec.epsilon, spec.d, delta) {
                    rho.powi(p)
                } else {
                    0.0
                }
            }
            MeckeFunctional::SpacedCapacity { t } => {
                if r >= t {
                    rho.powi(p)
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MeckeReport {
    pub functional: String,
    pub trials: usize,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub rhs_method: &'static str,
    pub z: f64,
}

/// `E[rho^p 1{rho < t}]`.
pub fn truncated_moment(marks: &MarkDistribution, p: f64, t: f64) -> f64 {
    match marks.law {
        MarkLaw::Constant(r) => {
            if r < t {
                r.powf(p)
            } else {
                0.0
            }
        }
        MarkLaw::Uniform { lo, hi } => {
            let top = t.min(hi);
            if top <= lo {
                0.0
            } else {
                (top.powf(p + 1.0) - lo.powf(p + 1.0)) / ((p + 1.0) * (hi - lo))
            }
        }
        MarkLaw::Pareto { alpha, x_min } => {
            if t <= x_min {
                0.0
            } else {
                alpha * x_min.powf(p) / (alpha - p) * (1.0 - (x_min / t).powf(alpha - p))
            }
        }
    }
}

/// Closed-form right-hand side, when one exists.
pub fn mecke_rhs(spec: &ProcessSpec, functional: &MeckeFunctional) -> Option<f64> {
    let lambda = spec.intensity();
    let d = spec.d;
    let p = d as f64 - 2.0;
    let m = match *functional {
        MeckeFunctional::One => 1.0,
        MeckeFunctional::Mark => spec.marks.moment(1.0),
        MeckeFunctional::CappedCapacity { delta } => {
            truncated_moment(&spec.marks, p, mark_threshold(spec.epsilon, d, delta))
        }
        MeckeFunctional::SpacedCapacity { t } => {
            // R >= t iff the nearest neighbour is at rescaled distance
            // >= 4t/eps, which is only possible below the cap at 1
            let s = 4.0 * t / spec.epsilon;
            let prob = if s <= 0.0 {
                1.0
            } else if s <= 1.0 {
                (-lambda * unit_ball_volume(d) * s.powi(d as i32)).exp()
            } else {
                0.0
            };
            spec.marks.moment(p) * prob
        }
    };
    m.is_finite().then_some(lambda * m)
}

/// Spec whose domain is the rescaled cube `[-h, h]^d`.
fn window(spec: &ProcessSpec, h: f64, seed: u64) -> ProcessSpec {
    let mut w = spec.clone().with_domain(Domain::AxisCube {
        half_width: h * spec.epsilon,
    });
    w.master_seed = seed;
    w
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

/// Left-hand side samples: one per trial.
fn lhs_samples(spec: &ProcessSpec, functional: &MeckeFunctional, trials: usize) -> Result<Vec<f64>> {
    // points of A see neighbours up to distance 1
    let w = window(spec, 1.5, spec.master_seed);
    (0..trials as u64)
        .map(|j| {
            let c = sample_configuration(&w, j)?;
            let r = c.min_distances();
            let mut s = 0.0;
            for i in 0..c.len() {
                if c.point(i).iter().all(|z| z.abs() <= 0.5) {
                    s += functional.eval(spec, c.rho()[i], r[i]);
                }
            }
            Ok(s)
        })
        .collect()
}

/// Two-stage estimate of the right-hand side: a mark, then a fresh
/// configuration around the origin.
pub fn mecke_rhs_monte_carlo(spec: &ProcessSpec, functional: &MeckeFunctional, trials: usize) -> Result<(f64, f64)> {
    let seed = spec.master_seed ^ 0xD1B5_4A32_D192_ED03;
    let w = window(spec, 1.0, seed);
    let mut marks = ChaCha8Rng::seed_from_u64(seed);
    let q = spec.epsilon / 4.0;
    let v: Vec<f64> = (0..trials as u64)
        .map(|j| {
            let c = sample_configuration(&w, j)?;
            let nearest = (0..c.len())
                .map(|i| c.point(i).iter().map(|z| z * z).sum::<f64>().sqrt())
                .fold(1.0, f64::min);
            let rho = spec.marks.quantile(marks.random::<f64>());
            Ok(spec.intensity() * functional.eval(spec, rho, q * nearest))
        })
        .collect::<Result<_>>()?;
    Ok(mean_se(&v))
}

/// Compares the two sides; the right-hand side is analytic when possible.
pub fn mecke_check(spec: &ProcessSpec, functional: &MeckeFunctional, trials: usize) -> Result<MeckeReport> {
    if spec.is_lattice() {
        return Err(Error::WrongProcess(
            "the exchange formula holds for Poisson processes only",
        ));
    }
    spec.validate()?;
    if trials < 2 {
        return Err(Error::InvalidSpec("need at least 2 trials".into()));
    }
    let (lhs, lhs_se) = mean_se(&lhs_samples(spec, functional, trials)?);
    let (rhs, rhs_se, method) = match mecke_rhs(spec, functional) {
        Some(v) => (v, 0.0, "analytic"),
        None => {
            let (m, se) = mecke_rhs_monte_carlo(spec, functional, trials)?;
            (m, se, "monte_carlo")
        }
    };
    let se = (lhs_se * lhs_se + rhs_se * rhs_se).sqrt();
    let z = if se > 0.0 {
        (lhs - rhs) / se
    } else if lhs == rhs {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(MeckeReport {
        functional: functional.name().into(),
        trials,
        lhs,
        lhs_se,
        rhs,
        rhs_se,
        rhs_method: method,
        z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_and_mark() {
        let spec = ProcessSpec::poisson(3, 0.1, 2.0, MarkDistribution::constant(1.0));
        let r = mecke_check(&spec, &MeckeFunctional::One, 4000).unwrap();
        assert_eq!(r.rhs, 2.0);
        assert!(r.z.abs() < 4.0, "{r:?}");
        let spec = ProcessSpec::poisson(3, 0.1, 1.0, MarkDistribution::constant(3.0));
        let r = mecke_check(&spec, &MeckeFunctional::Mark, 4000).unwrap();
        assert_eq!(r.rhs, 3.0);
        assert!(r.z.abs() < 4.0, "{r:?}");
    }

    #[test]
    fn lattice_rejected() {
        let spec = ProcessSpec::lattice(3, 0.1, MarkDistribution::constant(1.0));
        assert!(matches!(
            mecke_check(&spec, &MeckeFunctional::One, 10),
            Err(Error::WrongProcess(_))
        ));
    }

    #[test]
    fn truncated_moments() {
        let m = MarkDistribution::uniform(0.0, 2.0);
        assert!((truncated_moment(&m, 1.0, 1.0) - 0.25).abs() < 1e-15);
        assert!((truncated_moment(&m, 1.0, 5.0) - 1.0).abs() < 1e-15);
        let p = MarkDistribution::pareto_normalized(3, 2.0, 0.05);
        assert!((truncated_moment(&p, 1.0, 1e12) - p.moment(1.0)).abs() < 1e-9);
    }
}
