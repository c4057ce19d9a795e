//! Capacities of concentric balls, the explicit corrector and the capacity
//! measure carried by the outer spheres.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::process::{unit_sphere_area, MarkedConfiguration, ProcessSpec};

/// `c_d = (d - 2) |S^{d-1}|`.
pub fn capacity_constant(d: usize) -> f64 {
    (d as f64 - 2.0) * unit_sphere_area(d)
}

/// Capacity of `B_a` relative to `B_R`; `R = inf` gives the Newtonian
/// capacity `c_d a^(d-2)`.
pub fn annulus_capacity(a: f64, r: f64, d: usize) -> Result<f64> {
    if !(a > 0.0 && a < r) {
        return Err(Error::Domain(format!("annulus needs 0 < a < R, got a = {a}, R = {r}")));
    }
    let e = 2.0 - d as f64;
    let outer = if r.is_infinite() { 0.0 } else { r.powf(e) };
    Ok(capacity_constant(d) / (a.powf(e) - outer))
}

/// One harmonic annulus `a < |x - centre| < outer`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnnulusCell {
    pub centre: Vec<f64>,
    pub inner: f64,
    pub outer: f64,
}

impl AnnulusCell {
    pub fn new(centre: Vec<f64>, inner: f64, outer: f64) -> Result<Self> {
        if !(inner > 0.0 && inner < outer) {
            return Err(Error::Domain(format!(
                "annulus needs 0 < a < R, got a = {inner}, R = {outer}"
            )));
        }
        Ok(AnnulusCell { centre, inner, outer })
    }

    pub fn capacity(&self) -> f64 {
        let d = self.centre.len();
        let e = 2.0 - d as f64;
        capacity_constant(d) / (self.inner.powf(e) - self.outer.powf(e))
    }

    /// Radial profile: 0 in the hole, harmonic in the annulus, 1 outside.
    pub fn profile(&self, r: f64) -> f64 {
        if r <= self.inner {
            0.0
        } else if r >= self.outer {
            1.0
        } else {
            let e = 2.0 - self.centre.len() as f64;
            let ai = self.inner.powf(e);
            ((ai - r.powf(e)) / (ai - self.outer.powf(e))).clamp(0.0, 1.0)
        }
    }
}

/// The oscillating corrector: product of the annulus profiles.
#[derive(Clone, Debug, Default, Serialize)]
pub struct CorrectorField {
    pub d: usize,
    pub cells: Vec<AnnulusCell>,
}

impl CorrectorField {
    pub fn new(d: usize, cells: Vec<AnnulusCell>) -> Self {
        CorrectorField { d, cells }
    }

    /// Corrector over the given point indices with outer radii `outer[i]`.
    pub fn from_points(config: &MarkedConfiguration, points: &[usize], outer: &[f64]) -> Result<Self> {
        let eps = config.epsilon();
        let cells = points
            .iter()
            .zip(outer)
            .map(|(&i, &r)| {
                let centre = config.point(i).iter().map(|z| eps * z).collect();
                AnnulusCell::new(centre, config.hole_radius(i), r)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CorrectorField::new(config.d(), cells))
    }

    /// Lattice corrector: thinned points with outer radius `eps/4`.
    pub fn lattice(config: &MarkedConfiguration, points: &[usize]) -> Result<Self> {
        let r = vec![config.epsilon() / 4.0; points.len()];
        Self::from_points(config, points, &r)
    }

    /// Whether the outer balls are pairwise disjoint (brute force).
    pub fn is_disjoint(&self) -> bool {
        for (i, a) in self.cells.iter().enumerate() {
            for b in &self.cells[i + 1..] {
                let s: f64 = a.centre.iter().zip(&b.centre).map(|(x, y)| (x - y) * (x - y)).sum();
                if s.sqrt() < a.outer + b.outer {
                    return false;
                }
            }
        }
        true
    }
}

/// Evaluates `W` at a physical point. Cells are assumed disjoint, so at most
/// one differs from 1.
pub fn corrector_eval(field: &CorrectorField, x: &[f64]) -> f64 {
    for c in &field.cells {
        let s: f64 = c.centre.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        if s < c.outer * c.outer {
            return c.profile(s.sqrt());
        }
    }
    1.0
}

/// Dirichlet energy of the corrector, one capacity per cell.
pub fn corrector_energy(field: &CorrectorField) -> f64 {
    field.cells.iter().map(AnnulusCell::capacity).sum()
}

/// Uniform surface measure on a sphere with the given total weight.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SphereAtom {
    pub centre: Vec<f64>,
    pub radius: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CapacityMeasure {
    pub d: usize,
    pub atoms: Vec<SphereAtom>,
}

impl CapacityMeasure {
    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }
}

/// Normal derivatives of the annulus profiles on the outer spheres.
pub fn build_mu_eps(field: &CorrectorField) -> CapacityMeasure {
    let atoms = field
        .cells
        .iter()
        .map(|c| SphereAtom {
            centre: c.centre.clone(),
            radius: c.outer,
            weight: c.capacity(),
        })
        .collect();
    CapacityMeasure { d: field.d, atoms }
}

/// The constant of the homogenized zero-order term.
pub fn c0_constant(spec: &ProcessSpec) -> Result<f64> {
    let p = spec.d as f64 - 2.0;
    let m = spec.marks.moment(p);
    if !m.is_finite() {
        return Err(Error::DivergentMoment { p });
    }
    Ok(capacity_constant(spec.d) * spec.intensity() * m)
}

/// Lattice summand `rho^(d-2) / (1 - 4^(d-2) eps^2 rho^(d-2))`.
pub fn lattice_y(rho: f64, epsilon: f64, d: usize) -> f64 {
    let p = rho.powi(d as i32 - 2);
    p / (1.0 - 4f64.powi(d as i32 - 2) * epsilon * epsilon * p)
}

/// General summand `rho^(d-2) R^(d-2) / (R^(d-2) - eps^d rho^(d-2))`.
pub fn annulus_y(rho: f64, outer: f64, epsilon: f64, d: usize) -> f64 {
    let p = rho.powi(d as i32 - 2);
    let q = outer.powi(d as i32 - 2);
    p * q / (q - epsilon.powi(d as i32) * p)
}
