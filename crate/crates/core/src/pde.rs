//! Three-dimensional finite-difference backend on a uniform vertex grid.
//!
//! The stiffness matrix is assembled voxel by voxel: an edge inside the box
//! has conductance `h`, an edge on a face of the box (or of a cell) gets a
//! factor 1/2 per transverse axis on which it lies on that face. The
//! Dirichlet operator is then exactly the sum of the per-cell Neumann
//! operators, so energies split over cells without remainder.

use std::path::Path;

use serde::Serialize;

use crate::corrector::{build_mu_eps, c0_constant, corrector_eval, CapacityMeasure, CorrectorField};
use crate::covering::CubeCovering;
use crate::error::{Error, Result};
use crate::export::write_atomic;
use crate::partition::HolePartition;
use crate::process::{thin_phi_delta, Domain, MarkedConfiguration};

pub const DEFAULT_TOL: f64 = 1e-8;
const GRID_TOL: f64 = 1e-9;

/// Nodes `lo + h (i, j, k)`, `0 <= i, j, k < n`.
#[derive(Clone, Debug, Serialize)]
pub struct Grid {
    pub n: usize,
    pub lo: f64,
    pub h: f64,
    /// Nodes outside the unit ball are fixed when set.
    pub ball: bool,
}

/// Node classes of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NodeKind {
    Free,
    Boundary,
    Hole,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 3 || !(hi > lo) {
            return Err(Error::InvalidSpec(format!(
                "grid needs n >= 3 and lo < hi, got n = {n}, [{lo}, {hi}]"
            )));
        }
        Ok(Grid {
            n,
            lo,
            h: (hi - lo) / (n - 1) as f64,
            ball: false,
        })
    }

    /// Grid over the bounding cube of a domain.
    pub fn for_domain(domain: &Domain, n: usize) -> Result<Self> {
        let e = domain.extent();
        let mut g = Grid::new(-e, e, n)?;
        g.ball = matches!(domain, Domain::UnitBall);
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.h * (self.n - 1) as f64
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.lo + self.h * i as f64
    }

    pub fn position(&self, p: usize) -> [f64; 3] {
        let n = self.n;
        [self.coord(p / (n * n)), self.coord(p / n % n), self.coord(p % n)]
    }

    /// Trapezoid weight of node `p`; the weights sum to the box volume.
    pub fn node_volume(&self, p: usize) -> f64 {
        let n = self.n;
        let mut v = self.h.powi(3);
        for c in [p / (n * n), p / n % n, p % n] {
            if c == 0 || c == n - 1 {
                v *= 0.5;
            }
        }
        v
    }

    /// Free interior nodes and the fixed outer layer.
    pub fn base_mask(&self) -> Vec<NodeKind> {
        let n = self.n;
        let mut m = vec![NodeKind::Free; self.len()];
        for p in 0..self.len() {
            let (i, j, k) = (p / (n * n), p / n % n, p % n);
            let edge = |c: usize| c == 0 || c == n - 1;
            let outside = self.ball && {
                let x = self.position(p);
                x.iter().map(|v| v * v).sum::<f64>() >= 1.0
            };
            if edge(i) || edge(j) || edge(k) || outside {
                m[p] = NodeKind::Boundary;
            }
        }
        m
    }

    /// Index of the grid plane at coordinate `x`, if `x` lies on one.
    fn plane(&self, x: f64) -> Option<usize> {
        let t = (x - self.lo) / self.h;
        let r = t.round();
        ((t - r).abs() < GRID_TOL * self.n as f64 && r >= 0.0 && r <= (self.n - 1) as f64).then_some(r as usize)
    }
}

/// Node weights of a (signed) measure.
#[derive(Clone, Debug, Serialize)]
pub struct GriddedMeasure {
    pub weights: Vec<f64>,
}

impl GriddedMeasure {
    pub fn zeros(grid: &Grid) -> Self {
        GriddedMeasure {
            weights: vec![0.0; grid.len()],
        }
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        GriddedMeasure {
            weights: self.weights.iter().map(|w| s * w).collect(),
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        GriddedMeasure {
            weights: self.weights.iter().zip(&other.weights).map(|(a, b)| a + b).collect(),
        }
    }
}

/// Quasi-uniform points on the unit sphere.
pub fn fibonacci_sphere(m: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..m)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / m as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Number of surface samples for a sphere of radius `r`.
pub fn sphere_samples(r: f64, h: f64) -> usize {
    64usize.max((4.0 * std::f64::consts::PI * (r / h).powi(2)).ceil() as usize)
}

/// Trilinear deposit of `w` at `x` onto the node box `[lo, hi]` (node
/// indices per axis); positions are clamped into the box and `out` is
/// indexed lexicographically within the box.
fn deposit_point(grid: &Grid, out: &mut [f64], x: &[f64; 3], w: f64, lo: [usize; 3], hi: [usize; 3]) {
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        let t = ((x[a] - grid.lo) / grid.h).clamp(lo[a] as f64, hi[a] as f64);
        let i0 = (t.floor() as usize).min(hi[a].saturating_sub(1)).max(lo[a]);
        base[a] = i0;
        frac[a] = if hi[a] > lo[a] { t - i0 as f64 } else { 0.0 };
    }
    for c in 0..8 {
        let mut wt = w;
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let up = c >> a & 1 == 1;
            if up && hi[a] == lo[a] {
                wt = 0.0;
            }
            idx[a] = base[a] + usize::from(up);
            wt *= if up { frac[a] } else { 1.0 - frac[a] };
        }
        if wt != 0.0 {
            let dj = hi[1] - lo[1] + 1;
            let dk = hi[2] - lo[2] + 1;
            out[((idx[0] - lo[0]) * dj + idx[1] - lo[1]) * dk + idx[2] - lo[2]] += wt;
        }
    }
}

fn check_resolution(mu: &CapacityMeasure, grid: &Grid) -> Result<()> {
    if mu.d != 3 && !mu.atoms.is_empty() {
        return Err(Error::InvalidSpec("the grid backend is three-dimensional".into()));
    }
    let limit = 2.0 * grid.h;
    for (index, a) in mu.atoms.iter().enumerate() {
        if a.radius < limit * (1.0 - GRID_TOL) {
            return Err(Error::Unresolved {
                index,
                radius: a.radius,
                limit,
            });
        }
    }
    Ok(())
}

fn deposit_atom(
    grid: &Grid,
    out: &mut [f64],
    centre: &[f64],
    radius: f64,
    weight: f64,
    lo: [usize; 3],
    hi: [usize; 3],
) {
    let m = sphere_samples(radius, grid.h);
    let w = weight / m as f64;
    for u in fibonacci_sphere(m) {
        let x = [
            centre[0] + radius * u[0],
            centre[1] + radius * u[1],
            centre[2] + radius * u[2],
        ];
        deposit_point(grid, out, &x, w, lo, hi);
    }
}

/// Grids `mu - c0` with trapezoid node volumes for the constant part.
pub fn deposit_measure(mu: &CapacityMeasure, c0: f64, grid: &Grid) -> Result<GriddedMeasure> {
    check_resolution(mu, grid)?;
    let mut g = GriddedMeasure::zeros(grid);
    let top = [grid.n - 1; 3];
    for a in &mu.atoms {
        deposit_atom(grid, &mut g.weights, &a.centre, a.radius, a.weight, [0; 3], top);
    }
    if c0 != 0.0 {
        let mask = grid.base_mask();
        for (p, w) in g.weights.iter_mut().enumerate() {
            if !grid.ball || mask[p] == NodeKind::Free {
                *w -= c0 * grid.node_volume(p);
            }
        }
    }
    Ok(g)
}

/// Outcome of an iterative solve.
#[derive(Clone, Debug, Serialize)]
pub struct Solve {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Conjugate gradients for a symmetric positive semidefinite operator. With
/// `project` the iterates are kept orthogonal to constants.
fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    tol: f64,
    max_iter: usize,
    project: bool,
) -> Result<Solve> {
    let n = b.len();
    let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
    let centre = |v: &mut [f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|x| *x -= m);
    };
    let bn = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bn == 0.0 {
        return Ok(Solve {
            u: x,
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut r = b.to_vec();
    if project {
        centre(&mut r);
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut history = Vec::new();
    for it in 0..max_iter {
        let res = rr.sqrt() / bn;
        if history.len() < 4096 {
            history.push(res);
        }
        if res <= tol {
            if project {
                centre(&mut x);
            }
            return Ok(Solve {
                u: x,
                iterations: it,
                residual: res,
            });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if project {
            centre(&mut r);
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    let residual = rr.sqrt() / bn;
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
        history,
    })
}

fn max_iterations(grid: &Grid) -> usize {
    200 * grid.n + 1000
}

/// `-Δ + shift` with zero Dirichlet data on every non-free node.
fn dirichlet_apply(grid: &Grid, mask: &[NodeKind], shift: f64, x: &[f64], y: &mut [f64]) {
    let n = grid.n;
    let s = n * n;
    let h = grid.h;
    let m = shift * h.powi(3);
    y.iter_mut().for_each(|v| *v = 0.0);
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            let base = (i * n + j) * n;
            for k in 1..n - 1 {
                let p = base + k;
                if mask[p] != NodeKind::Free {
                    continue;
                }
                let xp = x[p];
                let lap = 6.0 * xp - x[p - 1] - x[p + 1] - x[p - n] - x[p + n] - x[p - s] - x[p + s];
                y[p] = h * lap + m * xp;
            }
        }
    }
}

/// Solves `(-Δ + shift) u = b` (b already integrated against nodes).
pub fn solve_dirichlet(grid: &Grid, mask: &[NodeKind], shift: f64, b: &[f64], tol: f64) -> Result<Solve> {
    let rhs: Vec<f64> = b
        .iter()
        .zip(mask)
        .map(|(v, m)| if *m == NodeKind::Free { *v } else { 0.0 })
        .collect();
    conjugate_gradient(
        |x, y| dirichlet_apply(grid, mask, shift, x, y),
        &rhs,
        tol,
        max_iterations(grid),
        false,
    )
}

/// Discrete Dirichlet energy `Σ_edges c_e (u_a - u_b)^2`.
pub fn energy(grid: &Grid, u: &[f64]) -> f64 {
    box_energy(grid, u, [0; 3], [grid.n - 1; 3])
}

/// Energy of `u` restricted to the node box `[lo, hi]` with the face
/// factors of that box.
fn box_energy(grid: &Grid, u: &[f64], lo: [usize; 3], hi: [usize; 3]) -> f64 {
    let mut e = 0.0;
    let strides = [grid.n * grid.n, grid.n, 1];
    for i in lo[0]..=hi[0] {
        for j in lo[1]..=hi[1] {
            for k in lo[2]..=hi[2] {
                let c = [i, j, k];
                let p = grid.index(i, j, k);
                for a in 0..3 {
                    if c[a] == hi[a] {
                        continue;
                    }
                    let mut w = grid.h;
                    for b in 0..3 {
                        if b != a && (c[b] == lo[b] || c[b] == hi[b]) {
                            w *= 0.5;
                        }
                    }
                    let d = u[p + strides[a]] - u[p];
                    e += w * d * d;
                }
            }
        }
    }
    e
}

/// `||g||_{H^-1}` as `sqrt(g · psi)` with `-Δ psi = g`, `psi = 0` on the
/// boundary.
pub fn hminus_norm(g: &GriddedMeasure, grid: &Grid) -> Result<f64> {
    hminus_norm_tol(g, grid, DEFAULT_TOL)
}

pub fn hminus_norm_tol(g: &GriddedMeasure, grid: &Grid, tol: f64) -> Result<f64> {
    let mask = grid.base_mask();
    let s = solve_dirichlet(grid, &mask, 0.0, &g.weights, tol)?;
    let v: f64 =
        s.u.iter()
            .zip(&g.weights)
            .zip(&mask)
            .filter(|(_, m)| **m == NodeKind::Free)
            .map(|((a, b), _)| a * b)
            .sum();
    Ok(v.max(0.0).sqrt())
}

/// `||mu - C0||_{H^-1}` for the corrector over the thinned set.
pub fn mu_hminus(config: &MarkedConfiguration, delta: f64, n: usize) -> Result<f64> {
    if config.d() != 3 {
        return Err(Error::InvalidSpec("the grid backend is three-dimensional".into()));
    }
    let grid = Grid::for_domain(&config.spec.domain, n)?;
    let pts = thin_phi_delta(config, delta);
    let r = config.min_distances();
    let outer: Vec<f64> = pts.iter().map(|&i| r[i]).collect();
    let field = CorrectorField::from_points(config, &pts, &outer)?;
    let mu = build_mu_eps(&field);
    let g = deposit_measure(&mu, c0_constant(&config.spec)?, &grid)?;
    hminus_norm(&g, &grid)
}

/// Per-cell Neumann data and energies of the covering.
#[derive(Clone, Debug, Serialize)]
pub struct KvCells {
    pub energies: Vec<f64>,
    /// Cell averages `m_j`.
    pub means: Vec<f64>,
    /// Assembled `M - m` over the whole grid.
    pub residual_measure: GriddedMeasure,
}

impl KvCells {
    pub fn total(&self) -> f64 {
        self.energies.iter().sum()
    }
}

/// Node box of a cell clipped to the grid; faces must sit on grid planes.
fn cell_nodes(grid: &Grid, lo: &[f64], hi: &[f64]) -> Result<Option<([usize; 3], [usize; 3])>> {
    let mut a = [0usize; 3];
    let mut b = [0usize; 3];
    for ax in 0..3 {
        let l = lo[ax].max(grid.lo);
        let u = hi[ax].min(grid.hi());
        if u <= l {
            return Ok(None);
        }
        match (grid.plane(l), grid.plane(u)) {
            (Some(p), Some(q)) => {
                a[ax] = p;
                b[ax] = q;
            }
            _ => {
                return Err(Error::Covering(format!(
                    "cell face [{l}, {u}] is not aligned with the grid (h = {})",
                    grid.h
                )))
            }
        }
        if b[ax] - a[ax] < 2 {
            return Err(Error::Covering(
                "cell is resolved by fewer than 3 nodes per axis".into(),
            ));
        }
    }
    Ok(Some((a, b)))
}

/// Solves `-Δ q_j = M_j - m_j` with zero-mean Neumann data on every box
/// cell. Atoms are attached to the cell containing their centre.
pub fn kv_cell_energies(covering: &CubeCovering, mu: &CapacityMeasure, grid: &Grid) -> Result<KvCells> {
    check_resolution(mu, grid)?;
    let ncell = covering.cells.len();
    let mut owned: Vec<Vec<usize>> = vec![Vec::new(); ncell];
    for (i, a) in mu.atoms.iter().enumerate() {
        let c = covering
            .cell_containing(&a.centre)
            .ok_or_else(|| Error::Covering(format!("atom {i} lies in no cell")))?;
        owned[c].push(i);
    }
    let mut energies = vec![0.0; ncell];
    let mut means = vec![0.0; ncell];
    let mut global = GriddedMeasure::zeros(grid);
    for (c, cell) in covering.cells.iter().enumerate() {
        let Some((lo, hi)) = cell_nodes(grid, &cell.lo, &cell.hi)? else {
            continue;
        };
        if owned[c].is_empty() {
            continue;
        }
        let dims = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
        let local_len = dims[0] * dims[1] * dims[2];
        let mut b = vec![0.0; local_len];
        for &i in &owned[c] {
            let a = &mu.atoms[i];
            deposit_atom(grid, &mut b, &a.centre, a.radius, a.weight, lo, hi);
        }
        let mass: f64 = owned[c].iter().map(|&i| mu.atoms[i].weight).sum();
        let volume: f64 = (0..3).map(|a| (hi[a] - lo[a]) as f64 * grid.h).product();
        let m = mass / volume;
        means[c] = m;
        let node_w = |idx: [usize; 3]| {
            let mut v = grid.h.powi(3);
            for a in 0..3 {
                if idx[a] == lo[a] || idx[a] == hi[a] {
                    v *= 0.5;
                }
            }
            v
        };
        let mut abs = 0.0;
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let g = [lo[0] + i, lo[1] + j, lo[2] + k];
                    let p = grid.index(g[0], g[1], g[2]);
                    let l = (i * dims[1] + j) * dims[2] + k;
                    let v = b[l] - m * node_w(g);
                    b[l] = v;
                    global.weights[p] += v;
                    abs += v.abs();
                }
            }
        }
        let sum: f64 = b.iter().sum();
        if sum.abs() > 1e-8 * abs.max(f64::MIN_POSITIVE) {
            return Err(Error::Incompatible {
                cell: c,
                residual: sum.abs() / abs,
            });
        }
        let h = grid.h;
        let apply = |x: &[f64], y: &mut [f64]| neumann_apply(dims, h, x, y);
        let s = conjugate_gradient(
            apply,
            &b,
            DEFAULT_TOL,
            200 * dims[0].max(dims[1]).max(dims[2]) + 1000,
            true,
        )?;
        energies[c] = s.u.iter().zip(&b).map(|(a, b)| a * b).sum::<f64>().max(0.0);
    }
    Ok(KvCells {
        energies,
        means,
        residual_measure: global,
    })
}

/// Neumann Laplacian on a node box with voxel conductances.
fn neumann_apply(dims: [usize; 3], h: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().for_each(|v| *v = 0.0);
    let strides = [dims[1] * dims[2], dims[2], 1];
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let c = [i, j, k];
                let p = (i * dims[1] + j) * dims[2] + k;
                for a in 0..3 {
                    if c[a] + 1 == dims[a] {
                        continue;
                    }
                    let mut w = h;
                    for b in 0..3 {
                        if b != a && (c[b] == 0 || c[b] + 1 == dims[b]) {
                            w *= 0.5;
                        }
                    }
                    let q = p + strides[a];
                    let f = w * (x[p] - x[q]);
                    y[p] += f;
                    y[q] -= f;
                }
            }
        }
    }
}

/// Solution of the perforated problem with the rasterized holes.
#[derive(Clone, Debug, Serialize)]
pub struct PerforatedSolve {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub hole_nodes: usize,
    /// Holes that contain no grid node and are left out of the mask.
    pub omitted_holes: usize,
}

/// Marks every node inside a closed hole ball `B_{a ∧ 1}(eps z)`.
pub fn hole_mask(config: &MarkedConfiguration, grid: &Grid) -> (Vec<NodeKind>, usize, usize) {
    let mut mask = grid.base_mask();
    let eps = config.epsilon();
    let mut omitted = 0;
    let mut nodes = 0;
    for i in 0..config.len() {
        let r = config.hole_radius(i).min(1.0);
        let c: Vec<f64> = config.point(i).iter().map(|z| eps * z).collect();
        let mut hit = false;
        let range = |x: f64| {
            let a = ((x - r - grid.lo) / grid.h).ceil().max(0.0) as usize;
            let b = (((x + r - grid.lo) / grid.h).floor().min((grid.n - 1) as f64)).max(-1.0);
            (a, b)
        };
        let (i0, i1) = range(c[0]);
        let (j0, j1) = range(c[1]);
        let (k0, k1) = range(c[2]);
        if i1 < 0.0 || j1 < 0.0 || k1 < 0.0 {
            omitted += 1;
            continue;
        }
        for a in i0..=i1 as usize {
            for b in j0..=j1 as usize {
                for k in k0..=k1 as usize {
                    let p = grid.index(a, b, k);
                    let x = grid.position(p);
                    let s: f64 = (0..3).map(|t| (x[t] - c[t]).powi(2)).sum();
                    if s <= r * r * (1.0 + 1e-12) {
                        hit = true;
                        if mask[p] == NodeKind::Free {
                            mask[p] = NodeKind::Hole;
                            nodes += 1;
                        }
                    }
                }
            }
        }
        if !hit {
            omitted += 1;
        }
    }
    (mask, nodes, omitted)
}

/// Lumped load `f(x) h^3` at every node.
fn load(grid: &Grid, f: &dyn Fn(&[f64; 3]) -> f64) -> Vec<f64> {
    let v = grid.h.powi(3);
    (0..grid.len()).map(|p| f(&grid.position(p)) * v).collect()
}

/// `-Δ u = f` in the box minus the holes, `u = 0` on the boundary and on
/// hole nodes. The partition only has to belong to the configuration; all
/// holes, good and bad, are rasterized.
pub fn solve_perforated(
    config: &MarkedConfiguration,
    partition: &HolePartition,
    f: &dyn Fn(&[f64; 3]) -> f64,
    grid: &Grid,
) -> Result<PerforatedSolve> {
    if partition.class.len() != config.len() {
        return Err(Error::InvalidSpec("partition does not match the configuration".into()));
    }
    let (mask, hole_nodes, omitted) = hole_mask(config, grid);
    let s = solve_dirichlet(grid, &mask, 0.0, &load(grid, f), DEFAULT_TOL)?;
    Ok(PerforatedSolve {
        u: s.u,
        iterations: s.iterations,
        residual: s.residual,
        hole_nodes,
        omitted_holes: omitted,
    })
}

/// `-Δ u + c0 u = f`, `u = 0` on the boundary.
pub fn homogenized_solve(c0: f64, f: &dyn Fn(&[f64; 3]) -> f64, grid: &Grid) -> Result<Solve> {
    if !(c0 >= 0.0) {
        return Err(Error::InvalidSpec(format!("c0 must be nonnegative, got {c0}")));
    }
    solve_dirichlet(grid, &grid.base_mask(), c0, &load(grid, f), DEFAULT_TOL)
}

/// Energy seminorm of `u_eps - W u` on the grid.
pub fn homogenization_error(u_eps: &[f64], corrector: &CorrectorField, u: &[f64], grid: &Grid) -> f64 {
    let e: Vec<f64> = (0..grid.len())
        .map(|p| u_eps[p] - corrector_eval(corrector, &grid.position(p)) * u[p])
        .collect();
    energy(grid, &e).sqrt()
}

/// Flat binary: `n` (u64), `h` (f64), `d` (u64), then node values in
/// lexicographic order, all little endian.
pub fn write_field(grid: &Grid, values: &[f64], path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(24 + 8 * values.len());
    out.extend_from_slice(&(grid.n as u64).to_le_bytes());
    out.extend_from_slice(&grid.h.to_le_bytes());
    out.extend_from_slice(&3u64.to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &out)
}

/// CSV slice `x, y, value` at the node plane `k` of the last axis.
pub fn write_slice(grid: &Grid, values: &[f64], k: usize, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "y", "value"])?;
    for i in 0..grid.n {
        for j in 0..grid.n {
            let p = grid.index(i, j, k);
            w.write_record([
                format!("{:e}", grid.coord(i)),
                format!("{:e}", grid.coord(j)),
                format!("{:e}", values[p]),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}
