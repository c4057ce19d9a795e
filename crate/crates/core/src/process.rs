//! Marked point processes restricted to a rescaled domain.
//!
//! Points live in rescaled coordinates `z`, so the physical centre of a hole
//! is `epsilon * z`. A configuration is either the integer lattice or a
//! homogeneous Poisson process, with i.i.d. marks.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::SpatialHash;

/// Largest supported dimension.
pub const MAX_DIM: usize = 8;

/// Default cap on the expected number of sampled points.
pub const DEFAULT_MAX_POINTS: u64 = 50_000_000;

/// Default gap between the Pareto tail index and the moment used for rates.
pub const DEFAULT_ETA: f64 = 0.05;

const STREAM_COUNT: u64 = 0;
const STREAM_MARKS: u64 = 1;
const STREAM_POSITIONS: u64 = 2;
const STREAM_BALL_BASE: u64 = 1 << 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    UnitBall,
    AxisCube { half_width: f64 },
}

impl Default for Domain {
    fn default() -> Self {
        Domain::AxisCube { half_width: 1.0 }
    }
}

const CONTAIN_TOL: f64 = 1e-12;

impl Domain {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Domain::UnitBall => Ok(()),
            Domain::AxisCube { half_width } if half_width > 0.0 && half_width.is_finite() => Ok(()),
            Domain::AxisCube { half_width } => Err(Error::InvalidSpec(format!(
                "cube half-width must be positive, got {half_width}"
            ))),
        }
    }

    /// Lebesgue measure in dimension `d`.
    pub fn volume(&self, d: usize) -> f64 {
        match *self {
            Domain::UnitBall => unit_ball_volume(d),
            Domain::AxisCube { half_width } => (2.0 * half_width).powi(d as i32),
        }
    }

    /// Half-width of the smallest centred cube containing the domain.
    pub fn extent(&self) -> f64 {
        match *self {
            Domain::UnitBall => 1.0,
            Domain::AxisCube { half_width } => half_width,
        }
    }

    /// Closed membership, with a relative tolerance so lattice points on the
    /// boundary are not lost to rounding.
    pub fn contains(&self, x: &[f64]) -> bool {
        match *self {
            Domain::UnitBall => norm2(x) <= 1.0 + 2.0 * CONTAIN_TOL,
            Domain::AxisCube { half_width } => {
                let lim = half_width * (1.0 + CONTAIN_TOL);
                x.iter().all(|v| v.abs() <= lim)
            }
        }
    }

    /// Side of the largest centred axis cube that fits inside the domain.
    pub fn max_cell_side(&self, d: usize) -> f64 {
        match *self {
            Domain::UnitBall => 2.0 / (d as f64).sqrt(),
            Domain::AxisCube { half_width } => 2.0 * half_width,
        }
    }

    /// Whether the box `[lo, hi]` lies in the domain, and if so its distance
    /// to the boundary.
    pub fn box_clearance(&self, lo: &[f64], hi: &[f64]) -> Option<f64> {
        match *self {
            Domain::UnitBall => {
                let far: f64 = lo
                    .iter()
                    .zip(hi)
                    .map(|(a, b)| {
                        let m = a.abs().max(b.abs());
                        m * m
                    })
                    .sum::<f64>()
                    .sqrt();
                (far <= 1.0).then_some(1.0 - far)
            }
            Domain::AxisCube { half_width } => {
                let mut clearance = f64::INFINITY;
                for (a, b) in lo.iter().zip(hi) {
                    clearance = clearance.min(half_width - b).min(a + half_width);
                }
                (clearance >= -CONTAIN_TOL * half_width).then_some(clearance.max(0.0))
            }
        }
    }
}

pub fn unit_ball_volume(d: usize) -> f64 {
    // V_d = pi^{d/2} / Gamma(d/2 + 1), via the two-step recursion.
    let mut v = [1.0, 2.0];
    for k in 2..=d {
        let next = 2.0 * std::f64::consts::PI / k as f64 * v[k % 2];
        v[k % 2] = next;
    }
    v[d % 2]
}

/// Surface area of the unit sphere in `R^d`.
pub fn unit_sphere_area(d: usize) -> f64 {
    d as f64 * unit_ball_volume(d)
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MarkLaw {
    Constant(f64),
    Uniform { lo: f64, hi: f64 },
    Pareto { alpha: f64, x_min: f64 },
}

/// Law of the radius factors together with the exponent used for rates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarkDistribution {
    pub law: MarkLaw,
    /// Effective moment gap; infinite for bounded laws.
    pub beta_eff: f64,
    pub eta_margin: f64,
}

impl MarkDistribution {
    pub fn constant(r: f64) -> Self {
        MarkDistribution {
            law: MarkLaw::Constant(r),
            beta_eff: f64::INFINITY,
            eta_margin: DEFAULT_ETA,
        }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        MarkDistribution {
            law: MarkLaw::Uniform { lo, hi },
            beta_eff: f64::INFINITY,
            eta_margin: DEFAULT_ETA,
        }
    }

    /// Pareto law with tail index `d - 2 + beta_eff + eta`, scaled so that
    /// `E[rho^(d-2+beta_eff)] = 1`.
    pub fn pareto_normalized(d: usize, beta_eff: f64, eta: f64) -> Self {
        let p = d as f64 - 2.0 + beta_eff;
        let alpha = p + eta;
        let x_min = ((alpha - p) / alpha).powf(1.0 / p);
        MarkDistribution {
            law: MarkLaw::Pareto { alpha, x_min },
            beta_eff,
            eta_margin: eta,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        match self.law {
            MarkLaw::Constant(r) if !(r >= 0.0 && r.is_finite()) => {
                bad(format!("constant mark must be finite and >= 0, got {r}"))
            }
            MarkLaw::Uniform { lo, hi } if !(0.0 <= lo && lo < hi && hi.is_finite()) => {
                bad(format!("uniform marks need 0 <= lo < hi, got [{lo}, {hi}]"))
            }
            MarkLaw::Pareto { alpha, x_min } => {
                let p = d as f64 - 2.0 + self.beta_eff;
                if !(x_min > 0.0 && x_min.is_finite()) {
                    return bad(format!("pareto x_min must be positive, got {x_min}"));
                }
                if !(alpha > d as f64 - 2.0) {
                    return bad(format!("pareto alpha must exceed d-2 = {}, got {alpha}", d - 2));
                }
                if !(self.beta_eff > 0.0) || !self.beta_eff.is_finite() {
                    return bad(format!("pareto beta_eff must be positive, got {}", self.beta_eff));
                }
                if (alpha - p - self.eta_margin).abs() > 1e-9 {
                    return bad(format!(
                        "pareto alpha {alpha} inconsistent with beta_eff {} and eta {}",
                        self.beta_eff, self.eta_margin
                    ));
                }
                let m = self.moment(p);
                if m > 1.0 + 1e-9 {
                    return bad(format!("pareto (d-2+beta_eff)-moment is {m} > 1"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `E[rho^p]`, or `+inf` when the tail integral diverges.
    pub fn moment(&self, p: f64) -> f64 {
        match self.law {
            MarkLaw::Constant(r) => r.powf(p),
            MarkLaw::Uniform { lo, hi } => (hi.powf(p + 1.0) - lo.powf(p + 1.0)) / ((p + 1.0) * (hi - lo)),
            MarkLaw::Pareto { alpha, x_min } => {
                if p >= alpha {
                    f64::INFINITY
                } else {
                    alpha * x_min.powf(p) / (alpha - p)
                }
            }
        }
    }

    /// Inverse CDF applied to `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self.law {
            MarkLaw::Constant(r) => r,
            MarkLaw::Uniform { lo, hi } => lo + (hi - lo) * u,
            MarkLaw::Pareto { alpha, x_min } => x_min * (1.0 - u).powf(-1.0 / alpha),
        }
    }

    /// `P(rho > t)`.
    pub fn survival(&self, t: f64) -> f64 {
        match self.law {
            MarkLaw::Constant(r) => f64::from(u8::from(r > t)),
            MarkLaw::Uniform { lo, hi } => ((hi - t) / (hi - lo)).clamp(0.0, 1.0),
            MarkLaw::Pareto { alpha, x_min } => {
                if t <= x_min {
                    1.0
                } else {
                    (x_min / t).powf(alpha)
                }
            }
        }
    }

    pub fn tail_index(&self) -> Option<f64> {
        match self.law {
            MarkLaw::Pareto { alpha, .. } => Some(alpha),
            _ => None,
        }
    }
}

/// Closed-form mark moment, `+inf` when divergent.
pub fn mark_moment(dist: &MarkDistribution, p: f64) -> f64 {
    dist.moment(p)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProcessKind {
    Lattice,
    Poisson { lambda: f64 },
}

/// Full description of one family of random configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProcessSpec", into = "RawProcessSpec")]
pub struct ProcessSpec {
    pub d: usize,
    pub epsilon: f64,
    pub process: ProcessKind,
    pub marks: MarkDistribution,
    pub domain: Domain,
    pub master_seed: u64,
    pub max_points: u64,
}

impl ProcessSpec {
    pub fn lattice(d: usize, epsilon: f64, marks: MarkDistribution) -> Self {
        ProcessSpec {
            d,
            epsilon,
            process: ProcessKind::Lattice,
            marks,
            domain: Domain::default(),
            master_seed: 0,
            max_points: DEFAULT_MAX_POINTS,
        }
    }

    pub fn poisson(d: usize, epsilon: f64, lambda: f64, marks: MarkDistribution) -> Self {
        ProcessSpec {
            process: ProcessKind::Poisson { lambda },
            ..ProcessSpec::lattice(d, epsilon, marks)
        }
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 3 || self.d > MAX_DIM {
            return Err(Error::InvalidSpec(format!(
                "dimension must be in 3..={MAX_DIM}, got {}",
                self.d
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if let ProcessKind::Poisson { lambda } = self.process {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "poisson intensity must be positive, got {lambda}"
                )));
            }
        }
        self.domain.validate()?;
        self.marks.validate(self.d)
    }

    pub fn is_lattice(&self) -> bool {
        matches!(self.process, ProcessKind::Lattice)
    }

    /// Intensity of the centres (1 for the lattice).
    pub fn intensity(&self) -> f64 {
        match self.process {
            ProcessKind::Lattice => 1.0,
            ProcessKind::Poisson { lambda } => lambda,
        }
    }

    /// Physical radius scale `epsilon^(d/(d-2))`.
    pub fn radius_scale(&self) -> f64 {
        radius_scale(self.epsilon, self.d)
    }

    pub fn expected_points(&self) -> f64 {
        self.intensity() * self.domain.volume(self.d) / self.epsilon.powi(self.d as i32)
    }
}

pub fn radius_scale(epsilon: f64, d: usize) -> f64 {
    epsilon.powf(d as f64 / (d as f64 - 2.0))
}

/// Mark threshold `epsilon^(-2/(d-2) + delta)`, equivalent to the radius
/// threshold `epsilon^(d/(d-2)) rho = epsilon^(1+delta)`.
pub fn mark_threshold(epsilon: f64, d: usize, delta: f64) -> f64 {
    epsilon.powf(-2.0 / (d as f64 - 2.0) + delta)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_eff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_margin: Option<f64>,
}

impl MarkSpec {
    pub fn resolve(&self, d: usize) -> Result<MarkDistribution> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::InvalidSpec(format!("marks.{name} is required for kind {}", self.kind)))
        };
        let reject = |present: bool, name: &str| {
            if present {
                Err(Error::InvalidSpec(format!(
                    "marks.{name} does not apply to kind {}",
                    self.kind
                )))
            } else {
                Ok(())
            }
        };
        match self.kind.as_str() {
            "constant" => {
                for (p, n) in [
                    (self.lo.is_some(), "lo"),
                    (self.hi.is_some(), "hi"),
                    (self.alpha.is_some(), "alpha"),
                    (self.x_min.is_some(), "x_min"),
                    (self.beta_eff.is_some(), "beta_eff"),
                ] {
                    reject(p, n)?;
                }
                Ok(MarkDistribution::constant(need(self.value, "value")?))
            }
            "uniform" => {
                for (p, n) in [
                    (self.value.is_some(), "value"),
                    (self.alpha.is_some(), "alpha"),
                    (self.x_min.is_some(), "x_min"),
                    (self.beta_eff.is_some(), "beta_eff"),
                ] {
                    reject(p, n)?;
                }
                Ok(MarkDistribution::uniform(need(self.lo, "lo")?, need(self.hi, "hi")?))
            }
            "pareto" => {
                reject(self.value.is_some(), "value")?;
                reject(self.lo.is_some() || self.hi.is_some(), "lo/hi")?;
                let eta = self.eta_margin.unwrap_or(DEFAULT_ETA);
                let dm2 = d as f64 - 2.0;
                let beta_eff = match (self.alpha, self.beta_eff) {
                    (_, Some(b)) => b,
                    (Some(a), None) => a - dm2 - eta,
                    (None, None) => return Err(Error::InvalidSpec("pareto marks need alpha or beta_eff".into())),
                };
                let mut dist = MarkDistribution::pareto_normalized(d, beta_eff, eta);
                if let MarkLaw::Pareto { alpha, x_min } = &mut dist.law {
                    if let Some(a) = self.alpha {
                        if (a - *alpha).abs() > 1e-9 {
                            return Err(Error::InvalidSpec(format!(
                                "pareto alpha {a} inconsistent with beta_eff {beta_eff} (expected {alpha})"
                            )));
                        }
                    }
                    if let Some(x) = self.x_min {
                        *x_min = x;
                    }
                }
                Ok(dist)
            }
            other => Err(Error::InvalidSpec(format!("unknown mark kind {other:?}"))),
        }
    }
}

impl From<&MarkDistribution> for MarkSpec {
    fn from(m: &MarkDistribution) -> Self {
        match m.law {
            MarkLaw::Constant(r) => MarkSpec {
                kind: "constant".into(),
                value: Some(r),
                ..Default::default()
            },
            MarkLaw::Uniform { lo, hi } => MarkSpec {
                kind: "uniform".into(),
                lo: Some(lo),
                hi: Some(hi),
                ..Default::default()
            },
            MarkLaw::Pareto { alpha, x_min } => MarkSpec {
                kind: "pareto".into(),
                alpha: Some(alpha),
                x_min: Some(x_min),
                beta_eff: Some(m.beta_eff),
                eta_margin: Some(m.eta_margin),
                ..Default::default()
            },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProcessSpec {
    pub d: usize,
    pub epsilon: f64,
    pub process: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub marks: MarkSpec,
    #[serde(default)]
    pub domain: Domain,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_points: Option<u64>,
}

impl TryFrom<RawProcessSpec> for ProcessSpec {
    type Error = Error;

    fn try_from(raw: RawProcessSpec) -> Result<Self> {
        let process = match (raw.process.as_str(), raw.lambda) {
            ("lattice", None) => ProcessKind::Lattice,
            ("lattice", Some(_)) => return Err(Error::InvalidSpec("lambda does not apply to the lattice".into())),
            ("poisson", Some(lambda)) => ProcessKind::Poisson { lambda },
            ("poisson", None) => return Err(Error::InvalidSpec("poisson needs lambda".into())),
            (other, _) => return Err(Error::InvalidSpec(format!("unknown process {other:?}"))),
        };
        let spec = ProcessSpec {
            d: raw.d,
            epsilon: raw.epsilon,
            process,
            marks: raw.marks.resolve(raw.d)?,
            domain: raw.domain,
            master_seed: raw.master_seed,
            max_points: raw.max_points.unwrap_or(DEFAULT_MAX_POINTS),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<ProcessSpec> for RawProcessSpec {
    fn from(s: ProcessSpec) -> Self {
        let (process, lambda) = match s.process {
            ProcessKind::Lattice => ("lattice".to_string(), None),
            ProcessKind::Poisson { lambda } => ("poisson".to_string(), Some(lambda)),
        };
        RawProcessSpec {
            d: s.d,
            epsilon: s.epsilon,
            process,
            lambda,
            marks: MarkSpec::from(&s.marks),
            domain: s.domain,
            master_seed: s.master_seed,
            max_points: Some(s.max_points),
        }
    }
}

/// Key of the random stream for one replicate.
fn replicate_key(master_seed: u64, replicate: u64) -> [u8; 32] {
    let mut state = master_seed ^ replicate.wrapping_mul(0xA076_1D64_78BD_642F);
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream(master_seed: u64, replicate: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(replicate_key(master_seed, replicate));
    rng.set_stream(id);
    rng
}

/// The mark of point `index` in a replicate, drawn directly from its counter
/// position. Sequential sampling produces the same values.
pub fn mark_at(spec: &ProcessSpec, replicate: u64, index: usize) -> f64 {
    let mut rng = stream(spec.master_seed, replicate, STREAM_MARKS);
    rng.set_word_pos(2 * index as u128);
    spec.marks.quantile(rng.random::<f64>())
}

/// A sampled realization in rescaled coordinates.
#[derive(Clone, Debug)]
pub struct MarkedConfiguration {
    pub spec: ProcessSpec,
    pub replicate: u64,
    coords: Vec<f64>,
    rho: Vec<f64>,
    index: SpatialHash,
    min_dist: OnceLock<Vec<f64>>,
}

impl MarkedConfiguration {
    /// Builds a configuration from explicit points (rescaled coordinates).
    pub fn from_points(spec: ProcessSpec, coords: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        let d = spec.d;
        if coords.len() != rho.len() * d {
            return Err(Error::InvalidSpec(format!(
                "{} coordinates do not match {} marks in dimension {d}",
                coords.len(),
                rho.len()
            )));
        }
        let eps = spec.epsilon;
        let mut x = vec![0.0; d];
        for (i, z) in coords.chunks(d).enumerate() {
            for (xi, zi) in x.iter_mut().zip(z) {
                *xi = eps * zi;
            }
            if !spec.domain.contains(&x) {
                return Err(Error::InvalidSpec(format!("point {i} lies outside the domain")));
            }
        }
        if let Some(i) = rho.iter().position(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::InvalidSpec(format!(
                "mark {i} is not a finite nonnegative number"
            )));
        }
        Ok(Self::assemble(spec, 0, coords, rho))
    }

    fn assemble(spec: ProcessSpec, replicate: u64, coords: Vec<f64>, rho: Vec<f64>) -> Self {
        let index = SpatialHash::build(&coords, spec.d, 1.0);
        MarkedConfiguration {
            spec,
            replicate,
            coords,
            rho,
            index,
            min_dist: OnceLock::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }

    pub fn epsilon(&self) -> f64 {
        self.spec.epsilon
    }

    /// Rescaled coordinates of point `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.spec.d;
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn index(&self) -> &SpatialHash {
        &self.index
    }

    /// Physical hole radius `epsilon^(d/(d-2)) rho_i` (not truncated).
    pub fn hole_radius(&self, i: usize) -> f64 {
        self.spec.radius_scale() * self.rho[i]
    }

    /// Minimal distances `R_{eps,z}` for all points.
    pub fn min_distances(&self) -> &[f64] {
        self.min_dist.get_or_init(|| {
            let q = self.spec.epsilon / 4.0;
            if self.spec.is_lattice() {
                return vec![q; self.len()];
            }
            (0..self.len())
                .map(|i| q * self.index.nearest_other(&self.coords, i, 1.0).unwrap_or(1.0))
                .collect()
        })
    }

    pub fn with_marks(&self, rho: Vec<f64>) -> Self {
        assert_eq!(rho.len(), self.len());
        MarkedConfiguration {
            spec: self.spec.clone(),
            replicate: self.replicate,
            coords: self.coords.clone(),
            rho,
            index: self.index.clone(),
            min_dist: self.min_dist.clone(),
        }
    }
}

/// `R_{eps,z} = (eps/4) min(min_{x != z} |z - x|, 1)`.
pub fn minimal_distance(config: &MarkedConfiguration, i: usize) -> f64 {
    config.min_distances()[i]
}

/// Indices of the thinned set: small marks whose ball sits well inside the
/// minimal-distance ball.
pub fn thin_phi_delta(config: &MarkedConfiguration, delta: f64) -> Vec<usize> {
    let d = config.d();
    let t = mark_threshold(config.epsilon(), d, delta);
    let scale = config.spec.radius_scale();
    let c = 2.0 * (d as f64).sqrt();
    let r = config.min_distances();
    (0..config.len())
        .filter(|&i| {
            let rho = config.rho[i];
            rho <= t && r[i] >= c * scale * rho
        })
        .collect()
}

/// Samples replicate `replicate` of `spec`.
pub fn sample_configuration(spec: &ProcessSpec, replicate: u64) -> Result<MarkedConfiguration> {
    spec.validate()?;
    let expected = spec.expected_points();
    if expected > spec.max_points as f64 {
        return Err(Error::TooManyPoints {
            expected,
            cap: spec.max_points,
        });
    }
    let coords = match spec.process {
        ProcessKind::Lattice => lattice_points(spec),
        ProcessKind::Poisson { .. } => poisson_points(spec, replicate, expected)?,
    };
    let n = coords.len() / spec.d;
    let mut marks = stream(spec.master_seed, replicate, STREAM_MARKS);
    let rho = (0..n).map(|_| spec.marks.quantile(marks.random::<f64>())).collect();
    Ok(MarkedConfiguration::assemble(spec.clone(), replicate, coords, rho))
}

fn lattice_points(spec: &ProcessSpec) -> Vec<f64> {
    let d = spec.d;
    let eps = spec.epsilon;
    let m = (spec.domain.extent() / eps * (1.0 + CONTAIN_TOL)).floor() as i64;
    let side = (2 * m + 1) as usize;
    let total = side.pow(d as u32);
    let mut coords = Vec::with_capacity(total * d);
    let mut z = vec![-m; d];
    let mut x = vec![0.0; d];
    for _ in 0..total {
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi = eps * *zi as f64;
        }
        if spec.domain.contains(&x) {
            coords.extend(z.iter().map(|&v| v as f64));
        }
        // odometer, last axis fastest
        for k in (0..d).rev() {
            z[k] += 1;
            if z[k] <= m {
                break;
            }
            z[k] = -m;
        }
    }
    coords
}

fn poisson_points(spec: &ProcessSpec, replicate: u64, expected: f64) -> Result<Vec<f64>> {
    let d = spec.d;
    let mut counter = stream(spec.master_seed, replicate, STREAM_COUNT);
    let n = if expected > 0.0 {
        Poisson::new(expected)
            .map_err(|e| Error::InvalidSpec(format!("poisson mean {expected}: {e}")))?
            .sample(&mut counter) as usize
    } else {
        0
    };
    if n as u64 > spec.max_points {
        return Err(Error::TooManyPoints {
            expected,
            cap: spec.max_points,
        });
    }
    let scale = spec.domain.extent() / spec.epsilon;
    let mut coords = Vec::with_capacity(n * d);
    match spec.domain {
        Domain::AxisCube { .. } => {
            let mut rng = stream(spec.master_seed, replicate, STREAM_POSITIONS);
            for _ in 0..n * d {
                coords.push(scale * (2.0 * rng.random::<f64>() - 1.0));
            }
        }
        Domain::UnitBall => {
            let mut p = vec![0.0; d];
            for i in 0..n {
                let mut rng = stream(spec.master_seed, replicate, STREAM_BALL_BASE + i as u64);
                loop {
                    for v in p.iter_mut() {
                        *v = 2.0 * rng.random::<f64>() - 1.0;
                    }
                    if norm2(&p) <= 1.0 {
                        break;
                    }
                }
                coords.extend(p.iter().map(|v| scale * v));
            }
        }
    }
    Ok(coords)
}
