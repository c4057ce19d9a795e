#![allow(dead_code)]

use holelab::partition::HoleClass;
use holelab::process::{mark_threshold, unit_sphere_area, MarkedConfiguration};

/// Capacity of the annulus `a < |x| < r` in `R^d` from a finite-difference
/// solve of the radial problem in `s = ln |x|`:
/// `(e^((d-2)s) u')' = 0`, `u(ln a) = 0`, `u(ln r) = 1`.
pub fn radial_capacity(a: f64, r: f64, d: usize, nodes: usize) -> f64 {
    let (s0, s1) = (a.ln(), r.ln());
    let h = (s1 - s0) / (nodes - 1) as f64;
    let p = d as f64 - 2.0;
    // conductance between nodes i and i+1
    let c: Vec<f64> = (0..nodes - 1)
        .map(|i| (p * (s0 + (i as f64 + 0.5) * h)).exp() / h)
        .collect();
    // interior unknowns 1..nodes-1, tridiagonal system
    let m = nodes - 2;
    let mut diag: Vec<f64> = (0..m).map(|i| c[i] + c[i + 1]).collect();
    let off: Vec<f64> = (0..m.saturating_sub(1)).map(|i| -c[i + 1]).collect();
    let mut rhs = vec![0.0; m];
    rhs[m - 1] = c[m];
    // Thomas elimination
    for i in 1..m {
        let w = off[i - 1] / diag[i - 1];
        diag[i] -= w * off[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut u = vec![0.0; m];
    u[m - 1] = rhs[m - 1] / diag[m - 1];
    for i in (0..m - 1).rev() {
        u[i] = (rhs[i] - off[i] * u[i + 1]) / diag[i];
    }
    let mut full = vec![0.0];
    full.extend(u);
    full.push(1.0);
    let energy: f64 = c
        .iter()
        .enumerate()
        .map(|(i, ci)| ci * (full[i + 1] - full[i]).powi(2))
        .sum();
    unit_sphere_area(d) * energy
}

/// Simpson rule on `[lo, hi]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

pub fn phys(c: &MarkedConfiguration, i: usize) -> Vec<f64> {
    c.point(i).iter().map(|z| c.epsilon() * z).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn oracle_min_distance(c: &MarkedConfiguration, i: usize) -> f64 {
    let mut nn = f64::INFINITY;
    for j in 0..c.len() {
        if j != i {
            nn = nn.min(dist(c.point(i), c.point(j)));
        }
    }
    c.epsilon() / 4.0 * nn.min(1.0)
}

/// Labels straight from the definitions, all pairs examined.
pub fn oracle_classes(c: &MarkedConfiguration, delta: f64) -> Vec<HoleClass> {
    let eps = c.epsilon();
    let d = c.d();
    let t = mark_threshold(eps, d, delta);
    let lattice = c.spec.is_lattice();
    let a = |i: usize| eps.powf(d as f64 / (d as f64 - 2.0)) * c.rho()[i];
    let test: Vec<f64> = (0..c.len())
        .map(|i| if lattice { eps / 4.0 } else { oracle_min_distance(c, i) })
        .collect();
    let mut class: Vec<HoleClass> = (0..c.len())
        .map(|i| {
            if c.rho()[i] >= t {
                HoleClass::J
            } else if !lattice && test[i] <= eps * eps {
                HoleClass::K
            } else if !lattice && 2.0 * (d as f64).sqrt() * a(i) >= test[i] {
                HoleClass::C
            } else {
                HoleClass::Good
            }
        })
        .collect();
    let seeds: Vec<usize> = (0..c.len()).filter(|&i| class[i] != HoleClass::Good).collect();
    for i in 0..c.len() {
        if class[i] != HoleClass::Good {
            continue;
        }
        for &w in &seeds {
            let reach = 2.0 * a(w).min(1.0) + test[i];
            if dist(&phys(c, i), &phys(c, w)) <= reach * (1.0 + 1e-12) {
                class[i] = HoleClass::I;
                break;
            }
        }
    }
    class
}

pub fn oracle_overlaps(c: &MarkedConfiguration) -> u64 {
    let r: Vec<f64> = (0..c.len()).map(|i| c.hole_radius(i).min(1.0)).collect();
    let mut n = 0;
    for i in 0..c.len() {
        for j in i + 1..c.len() {
            if dist(&phys(c, i), &phys(c, j)) < r[i] + r[j] {
                n += 1;
            }
        }
    }
    n
}
