//! Good/bad decomposition of the holes, overlap counts and the capacity
//! bound of the bad set.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::process::{mark_threshold, MarkedConfiguration};
use crate::spatial::dist2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HoleClass {
    Good,
    /// Oversized mark.
    J,
    /// Tiny neighbour distance.
    K,
    /// Radius comparable to the neighbour distance.
    C,
    /// Too close to an enlarged bad ball.
    I,
}

impl HoleClass {
    pub fn label(self) -> &'static str {
        match self {
            HoleClass::Good => "good",
            HoleClass::J => "J",
            HoleClass::K => "K",
            HoleClass::C => "C",
            HoleClass::I => "I",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SafetyBall {
    pub index: usize,
    pub centre: Vec<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HolePartition {
    pub good: Vec<usize>,
    pub bad_j: Vec<usize>,
    pub bad_k: Vec<usize>,
    pub bad_c: Vec<usize>,
    pub bad_i: Vec<usize>,
    pub class: Vec<HoleClass>,
    pub safety_balls: Vec<SafetyBall>,
    pub delta: f64,
    pub lattice: bool,
}

impl HolePartition {
    fn from_classes(config: &MarkedConfiguration, class: Vec<HoleClass>, delta: f64) -> Self {
        let mut p = HolePartition {
            good: Vec::new(),
            bad_j: Vec::new(),
            bad_k: Vec::new(),
            bad_c: Vec::new(),
            bad_i: Vec::new(),
            class,
            safety_balls: Vec::new(),
            delta,
            lattice: config.spec.is_lattice(),
        };
        for (i, c) in p.class.iter().enumerate() {
            match c {
                HoleClass::Good => p.good.push(i),
                HoleClass::J => p.bad_j.push(i),
                HoleClass::K => p.bad_k.push(i),
                HoleClass::C => p.bad_c.push(i),
                HoleClass::I => p.bad_i.push(i),
            }
        }
        p.safety_balls = p
            .class
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != HoleClass::Good)
            .map(|(i, _)| SafetyBall {
                index: i,
                centre: physical(config, i),
                radius: safety_radius(config, i),
            })
            .collect();
        p
    }

    pub fn bad_count(&self) -> usize {
        self.class.len() - self.good.len()
    }
}

fn physical(config: &MarkedConfiguration, i: usize) -> Vec<f64> {
    config.point(i).iter().map(|z| config.epsilon() * z).collect()
}

/// `2 (eps^(d/(d-2)) rho ∧ 1)`.
fn safety_radius(config: &MarkedConfiguration, i: usize) -> f64 {
    2.0 * config.hole_radius(i).min(1.0)
}

/// Largest admissible epsilon for the lattice construction.
pub fn epsilon_zero(delta: f64) -> f64 {
    0.25f64.powf(1.0 / delta)
}

fn check_delta(config: &MarkedConfiguration, delta: f64) -> Result<()> {
    let top = 2.0 / (config.d() as f64 - 2.0);
    if !(delta > 0.0 && delta <= top) {
        return Err(Error::InvalidSpec(format!("delta must lie in (0, {top}], got {delta}")));
    }
    Ok(())
}

/// Marks every not-yet-classified point whose test ball (radius
/// `test_radius[i]`, physical) meets one of the enlarged balls of `seeds`.
/// Touching counts as meeting.
fn contagion(config: &MarkedConfiguration, class: &mut [HoleClass], seeds: &[usize], test_radius: &[f64]) {
    let eps = config.epsilon();
    let d = config.d();
    let coords = config.coords();
    let max_test = test_radius.iter().cloned().fold(0.0, f64::max);
    for &w in seeds {
        let rb = safety_radius(config, w);
        let zw = config.point(w);
        let reach = (rb + max_test) / eps;
        config.index().for_each_candidate(zw, reach, |i| {
            if class[i] != HoleClass::Good {
                return;
            }
            let lim = (rb + test_radius[i]) / eps;
            if dist2(&coords[i * d..(i + 1) * d], zw) <= lim * lim {
                class[i] = HoleClass::I;
            }
        });
    }
}

/// Lattice decomposition: oversized marks and their neighbourhood.
pub fn partition_lattice(config: &MarkedConfiguration, delta: f64) -> Result<HolePartition> {
    if !config.spec.is_lattice() {
        return Err(Error::WrongProcess("partition_lattice needs a lattice configuration"));
    }
    check_delta(config, delta)?;
    let eps = config.epsilon();
    if eps.powf(delta) >= 0.25 {
        return Err(Error::EpsilonTooLarge {
            epsilon: eps,
            epsilon0: epsilon_zero(delta),
        });
    }
    let t = mark_threshold(eps, config.d(), delta);
    let mut class: Vec<HoleClass> = config
        .rho()
        .iter()
        .map(|&r| if r >= t { HoleClass::J } else { HoleClass::Good })
        .collect();
    let seeds: Vec<usize> = (0..class.len()).filter(|&i| class[i] == HoleClass::J).collect();
    let test = vec![eps / 4.0; class.len()];
    contagion(config, &mut class, &seeds, &test);
    Ok(HolePartition::from_classes(config, class, delta))
}

/// Poisson decomposition: oversized marks, clustered points, radii
/// comparable to the spacing, and their neighbourhood.
pub fn partition_poisson(config: &MarkedConfiguration, delta: f64) -> Result<HolePartition> {
    if config.spec.is_lattice() {
        return Err(Error::WrongProcess("partition_poisson needs a Poisson configuration"));
    }
    check_delta(config, delta)?;
    let eps = config.epsilon();
    let d = config.d();
    let t = mark_threshold(eps, d, delta);
    let scale = config.spec.radius_scale();
    let c = 2.0 * (d as f64).sqrt();
    let r = config.min_distances();
    let mut class: Vec<HoleClass> = config
        .rho()
        .iter()
        .zip(r)
        .map(|(&rho, &ri)| {
            if rho >= t {
                HoleClass::J
            } else if ri <= eps * eps {
                HoleClass::K
            } else if c * scale * rho >= ri {
                HoleClass::C
            } else {
                HoleClass::Good
            }
        })
        .collect();
    let seeds: Vec<usize> = (0..class.len()).filter(|&i| class[i] != HoleClass::Good).collect();
    contagion(config, &mut class, &seeds, r);
    Ok(HolePartition::from_classes(config, class, delta))
}

/// Dispatches on the process kind.
pub fn partition(config: &MarkedConfiguration, delta: f64) -> Result<HolePartition> {
    if config.spec.is_lattice() {
        partition_lattice(config, delta)
    } else {
        partition_poisson(config, delta)
    }
}

/// `eps^d Σ_{bad} rho^(d-2)`.
pub fn bad_capacity_sum(config: &MarkedConfiguration, partition: &HolePartition) -> f64 {
    let d = config.d() as i32;
    let rho = config.rho();
    let s: f64 = partition
        .class
        .iter()
        .zip(rho)
        .filter(|(c, _)| **c != HoleClass::Good)
        .map(|(_, r)| r.powi(d - 2))
        .sum();
    config.epsilon().powi(d) * s
}

/// Unordered pairs of truncated hole balls that intersect.
pub fn overlap_pairs(config: &MarkedConfiguration) -> u64 {
    let eps = config.epsilon();
    let d = config.d();
    let coords = config.coords();
    // truncated radii in rescaled units
    let radius: Vec<f64> = (0..config.len())
        .map(|i| config.hole_radius(i).min(1.0) / eps)
        .collect();
    let mut count = 0u64;
    for i in 0..config.len() {
        let ri = radius[i];
        // the larger ball of an overlapping pair reaches the other centre
        // within twice its radius; it alone reports the pair
        if ri <= 0.0 || (config.spec.is_lattice() && 2.0 * ri <= 1.0) {
            continue;
        }
        let zi = &coords[i * d..(i + 1) * d];
        config.index().for_each_candidate(zi, 2.0 * ri, |j| {
            let rj = radius[j];
            if j == i || rj > ri || (rj == ri && j < i) {
                return;
            }
            let s = ri + rj;
            if dist2(&coords[j * d..(j + 1) * d], zi) < s * s {
                count += 1;
            }
        });
    }
    count
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub passed: bool,
    pub counterexample: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PartitionReport {
    pub checks: Vec<InvariantCheck>,
}

impl PartitionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&InvariantCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Checks the conclusions of the decomposition exactly. Failures are
/// reported, not raised.
pub fn verify_partition(config: &MarkedConfiguration, p: &HolePartition) -> PartitionReport {
    let n = config.len();
    let eps = config.epsilon();
    let d = config.d();
    let scale = config.spec.radius_scale();
    let r = config.min_distances();
    let mut checks = Vec::new();
    let mut push = |name, first: Option<String>| {
        checks.push(InvariantCheck {
            name,
            passed: first.is_none(),
            counterexample: first,
        })
    };

    let mut seen = vec![0u8; n];
    let mut cover = None;
    for list in [&p.good, &p.bad_j, &p.bad_k, &p.bad_c, &p.bad_i] {
        for &i in list.iter() {
            if i >= n {
                cover.get_or_insert(format!("index {i} out of range"));
            } else {
                seen[i] += 1;
            }
        }
    }
    if cover.is_none() {
        if let Some(i) = seen.iter().position(|&s| s != 1) {
            cover = Some(format!("point {i} appears {} times", seen[i]));
        }
    }
    push("partition", cover);

    let t = mark_threshold(eps, d, p.delta);
    let small = p
        .good
        .iter()
        .find(|&&i| config.rho()[i] >= t)
        .map(|&i| format!("good point {i} has mark {} >= {t}", config.rho()[i]));
    push("good_radius", small);

    if !p.lattice {
        let c = 2.0 * (d as f64).sqrt();
        let spaced = p
            .good
            .iter()
            .find(|&&i| r[i] < eps * eps || c * scale * config.rho()[i] > r[i]);
        push(
            "good_spacing",
            spaced.map(|&i| format!("good point {i}: R = {}, radius = {}", r[i], scale * config.rho()[i])),
        );
    }

    let mut is_good = vec![false; n];
    for &i in &p.good {
        if i < n {
            is_good[i] = true;
        }
    }
    let mut clash = None;
    for b in &p.safety_balls {
        let zb: Vec<f64> = b.centre.iter().map(|x| x / eps).collect();
        let reach = (b.radius + eps / 4.0) / eps;
        config.index().for_each_candidate(&zb, reach, |i| {
            if clash.is_some() || !is_good[i] {
                return;
            }
            let test = if p.lattice { eps / 4.0 } else { r[i] };
            let lim = (b.radius + test) / eps;
            if dist2(config.point(i), &zb) <= lim * lim {
                clash = Some(format!("good point {i} meets safety ball of point {}", b.index));
            }
        });
    }
    push("good_clear_of_bad", clash);

    let far = p
        .safety_balls
        .iter()
        .find(|b| b.radius > 2.0)
        .map(|b| format!("safety ball of point {} has radius {}", b.index, b.radius));
    push("safety_within_two", far);

    PartitionReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{sample_configuration, MarkDistribution, ProcessSpec};

    fn lattice(eps: f64, marks: MarkDistribution) -> MarkedConfiguration {
        sample_configuration(&ProcessSpec::lattice(3, eps, marks), 0).unwrap()
    }

    #[test]
    fn unit_marks_all_good() {
        let c = lattice(0.1, MarkDistribution::constant(1.0));
        let p = partition_lattice(&c, 0.8).unwrap();
        assert_eq!(p.good.len(), c.len());
        assert_eq!(p.bad_count(), 0);
        assert_eq!(bad_capacity_sum(&c, &p), 0.0);
        assert_eq!(overlap_pairs(&c), 0);
    }

    #[test]
    fn threshold_mark_is_bad() {
        let c = lattice(0.1, MarkDistribution::constant(1.0));
        let mut rho = c.rho().to_vec();
        rho[5] = 0.1f64.powf(-2.0 + 0.8);
        let c = c.with_marks(rho);
        let p = partition_lattice(&c, 0.8).unwrap();
        assert!(p.bad_j.contains(&5));
    }

    #[test]
    fn epsilon_guard() {
        let c = lattice(0.25, MarkDistribution::constant(1.0));
        match partition_lattice(&c, 0.8) {
            Err(Error::EpsilonTooLarge { epsilon0, .. }) => assert!((epsilon0 - 0.25f64.powf(1.25)).abs() < 1e-12),
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn wrong_branch_rejected() {
        let c = lattice(0.1, MarkDistribution::constant(1.0));
        assert!(partition_poisson(&c, 0.8).is_err());
    }

    #[test]
    fn single_bad_capacity() {
        let spec = ProcessSpec::poisson(3, 0.1, 1.0, MarkDistribution::constant(1.0));
        let c = MarkedConfiguration::from_points(spec, vec![0.0; 3], vec![2.0]).unwrap();
        let mut p = partition_poisson(&c, 0.8).unwrap();
        p.class[0] = HoleClass::J;
        assert!((bad_capacity_sum(&c, &p) - 0.002).abs() < 1e-15);
    }

    #[test]
    fn close_pair_in_k_and_isolated_good() {
        let eps = 0.1;
        let spec = ProcessSpec::poisson(3, eps, 1.0, MarkDistribution::constant(1.0));
        // distance 0.2 rescaled -> R = eps/4 * 0.2 = 0.005 <= eps^2 = 0.01
        let c = MarkedConfiguration::from_points(
            spec,
            vec![0.0, 0.0, 0.0, 0.2, 0.0, 0.0, 5.0, 5.0, 5.0],
            vec![1.0, 1.0, 1.0],
        )
        .unwrap();
        let p = partition_poisson(&c, 0.8).unwrap();
        assert_eq!(p.bad_k, vec![0, 1]);
        assert_eq!(p.good, vec![2]);
        assert!(verify_partition(&c, &p).all_passed());
    }

    #[test]
    fn coincident_pair_overlaps() {
        let spec = ProcessSpec::poisson(3, 0.1, 1.0, MarkDistribution::constant(1.0));
        let c = MarkedConfiguration::from_points(spec, vec![0.0; 6], vec![1.0, 1.0]).unwrap();
        assert_eq!(overlap_pairs(&c), 1);
    }

    #[test]
    fn moving_bad_to_good_is_caught() {
        let c = lattice(0.1, MarkDistribution::constant(1.0));
        let mut rho = c.rho().to_vec();
        let centre = c.len() / 2;
        rho[centre] = 1e3;
        let c = c.with_marks(rho);
        let p = partition_lattice(&c, 0.8).unwrap();
        assert!(verify_partition(&c, &p).all_passed());
        assert!(!p.bad_i.is_empty());
        let moved = p.bad_i[0];
        let mut class = p.class.clone();
        class[moved] = HoleClass::Good;
        let forged = HolePartition::from_classes(&c, class, 0.8);
        let report = verify_partition(&c, &forged);
        assert!(!report.check("good_clear_of_bad").unwrap().passed);
        assert!(report.check("partition").unwrap().passed);
    }
}
