//! Mesoscopic cubes of side `k epsilon` and the randomized covering whose
//! cells never cut through the neighbourhood of a point.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::process::{Domain, MarkedConfiguration, MAX_DIM};
use crate::spatial::dist2;

const FACE_TOL: f64 = 1e-9;

/// One cube `Q = epsilon * anchor + (k epsilon / 2)[-1, 1]^d`.
#[derive(Clone, Debug, Serialize)]
pub struct CubeCell {
    /// Lattice anchor (rescaled coordinates).
    pub anchor: Vec<i64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub interior: bool,
    /// Indices of the points assigned to this cell.
    pub points: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CubeCovering {
    pub d: usize,
    pub k: usize,
    pub epsilon: f64,
    /// Anchors are `k m + offset` per axis.
    pub offset: i64,
    pub cells: Vec<CubeCell>,
    pub interior_ids: Vec<usize>,
    /// Cell of each point.
    pub assignment: Vec<usize>,
    m_lo: Vec<i64>,
    m_dims: Vec<i64>,
    lookup: Vec<i64>,
}

impl CubeCovering {
    pub fn side(&self) -> f64 {
        self.k as f64 * self.epsilon
    }

    pub fn boundary_count(&self) -> usize {
        self.cells.len() - self.interior_ids.len()
    }

    /// Cell index of the multi-index `m` (anchor `k m + offset`).
    pub fn cell_at(&self, m: &[i64]) -> Option<usize> {
        let mut key = 0i64;
        for k in 0..self.d {
            let r = m[k] - self.m_lo[k];
            if r < 0 || r >= self.m_dims[k] {
                return None;
            }
            key = key * self.m_dims[k] + r;
        }
        let c = self.lookup[key as usize];
        (c >= 0).then_some(c as usize)
    }

    /// Multi-index of the smallest closed cube containing the rescaled
    /// coordinate `z`, axis by axis; the product of per-axis minima is the
    /// lexicographically smallest anchor.
    fn multi_index(&self, z: &[f64]) -> [i64; MAX_DIM] {
        let k = self.k as f64;
        let mut m = [0i64; MAX_DIM];
        for a in 0..self.d {
            m[a] = ((z[a] - self.offset as f64) / k - 0.5 - FACE_TOL).ceil() as i64;
        }
        m
    }

    /// Smallest existing cell whose closed cube holds the rescaled point.
    /// On the outer boundary the smaller anchor may not exist, so the
    /// larger neighbour on each face axis is tried next.
    fn locate(&self, z: &[f64]) -> Option<usize> {
        let d = self.d;
        let m = self.multi_index(z);
        if let Some(c) = self.cell_at(&m[..d]) {
            return Some(c);
        }
        let k = self.k as f64;
        let on_face: Vec<usize> = (0..d)
            .filter(|&a| {
                let upper = self.offset as f64 + k * m[a] as f64 + k / 2.0;
                (z[a] - upper).abs() <= FACE_TOL * k
            })
            .collect();
        for code in 1..(1usize << on_face.len()) {
            let mut alt = m;
            for (b, &a) in on_face.iter().enumerate() {
                if code >> b & 1 == 1 {
                    alt[a] += 1;
                }
            }
            if let Some(c) = self.cell_at(&alt[..d]) {
                return Some(c);
            }
        }
        None
    }

    /// Cell whose closed cube contains the physical point `x`, with the
    /// lexicographic tie-break on faces.
    pub fn cell_containing(&self, x: &[f64]) -> Option<usize> {
        let z: Vec<f64> = x.iter().map(|v| v / self.epsilon).collect();
        self.locate(&z)
    }

    fn multi_of_cell(&self, c: usize) -> Vec<i64> {
        self.cells[c]
            .anchor
            .iter()
            .map(|a| (a - self.offset).div_euclid(self.k as i64))
            .collect()
    }
}

/// Anchor offset putting cell faces on the boundary of a cube domain when
/// that is possible with integer anchors.
fn anchor_offset(domain: &Domain, epsilon: f64, k: usize) -> i64 {
    if let Domain::AxisCube { half_width } = *domain {
        let n = half_width / epsilon;
        if k % 2 == 0 && (n - n.round()).abs() < FACE_TOL {
            let k = k as i64;
            return (-(n.round() as i64) - k / 2).rem_euclid(k);
        }
    }
    0
}

/// Deterministic covering by cubes of side `k epsilon`.
pub fn build_cubes(config: &MarkedConfiguration, k: usize) -> Result<CubeCovering> {
    let d = config.d();
    let eps = config.epsilon();
    let domain = &config.spec.domain;
    if k == 0 {
        return Err(Error::InvalidSpec("mesoscale multiplier k must be at least 1".into()));
    }
    let side = k as f64 * eps;
    let limit = domain.max_cell_side(d);
    if side > limit * (1.0 + FACE_TOL) {
        return Err(Error::CellTooLarge { side, limit });
    }
    let offset = anchor_offset(domain, eps, k);
    let kf = k as f64;
    let e = domain.extent() / eps;
    // cells meeting (-e, e) with positive length
    let lo_m = ((-e - offset as f64 - kf / 2.0) / kf + FACE_TOL).floor() as i64 + 1;
    let hi_m = ((e - offset as f64 + kf / 2.0) / kf - FACE_TOL).ceil() as i64 - 1;
    let per_axis = hi_m - lo_m + 1;
    let total = per_axis.pow(d as u32);
    let mut cov = CubeCovering {
        d,
        k,
        epsilon: eps,
        offset,
        cells: Vec::new(),
        interior_ids: Vec::new(),
        assignment: Vec::new(),
        m_lo: vec![lo_m; d],
        m_dims: vec![per_axis; d],
        lookup: vec![-1; total as usize],
    };
    let mut m = vec![lo_m; d];
    for key in 0..total as usize {
        let anchor: Vec<i64> = m.iter().map(|v| v * k as i64 + offset).collect();
        let lo: Vec<f64> = anchor.iter().map(|a| eps * (*a as f64 - kf / 2.0)).collect();
        let hi: Vec<f64> = anchor.iter().map(|a| eps * (*a as f64 + kf / 2.0)).collect();
        let keep = match domain {
            Domain::AxisCube { .. } => true,
            Domain::UnitBall => {
                // nearest point of the cube to the centre
                let near: f64 = lo
                    .iter()
                    .zip(&hi)
                    .map(|(a, b)| {
                        let c = 0f64.clamp(*a, *b);
                        c * c
                    })
                    .sum();
                near < 1.0 - FACE_TOL
            }
        };
        if keep {
            let interior = domain
                .box_clearance(&lo, &hi)
                .is_some_and(|c| c >= eps * (1.0 - FACE_TOL));
            let id = cov.cells.len();
            if interior {
                cov.interior_ids.push(id);
            }
            cov.lookup[key] = id as i64;
            cov.cells.push(CubeCell {
                anchor,
                lo,
                hi,
                interior,
                points: Vec::new(),
            });
        }
        for a in (0..d).rev() {
            m[a] += 1;
            if m[a] <= hi_m {
                break;
            }
            m[a] = lo_m;
        }
    }
    let mut assignment = Vec::with_capacity(config.len());
    for i in 0..config.len() {
        let c = cov
            .locate(config.point(i))
            .ok_or_else(|| Error::Covering(format!("point {i} is not covered by any cell")))?;
        cov.cells[c].points.push(i);
        assignment.push(c);
    }
    cov.assignment = assignment;
    Ok(cov)
}

/// `k = floor(epsilon^(-2/(d+2)))` and `kappa = 2/((d-1)(d+2))`.
pub fn regime_parameters(d: usize, epsilon: f64) -> Result<(usize, f64)> {
    if d < 3 || !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidSpec(format!(
            "need d >= 3 and 0 < epsilon < 1, got d = {d}, epsilon = {epsilon}"
        )));
    }
    let df = d as f64;
    let k = (epsilon.powf(-2.0 / (df + 2.0)) + FACE_TOL).floor() as usize;
    if k == 0 {
        return Err(Error::RegimeUndefined(epsilon));
    }
    Ok((k, 2.0 / ((df - 1.0) * (df + 2.0))))
}

/// `(epsilon/4) min(min_{x != z} |z - x|_inf, 1)`: the minimal distance
/// measured in the sup norm, which keeps the point cubes disjoint.
pub fn sup_min_distances(config: &MarkedConfiguration) -> Vec<f64> {
    let q = config.epsilon() / 4.0;
    if config.spec.is_lattice() {
        return vec![q; config.len()];
    }
    let d = config.d();
    let coords = config.coords();
    (0..config.len())
        .map(|i| {
            let zi = config.point(i);
            let mut best: f64 = 1.0;
            config.index().for_each_candidate(zi, 1.0, |j| {
                if j != i {
                    let s = coords[j * d..(j + 1) * d]
                        .iter()
                        .zip(zi)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    best = best.min(s);
                }
            });
            q * best
        })
        .collect()
}

/// Distance from the physical point `x` to the boundary of cube `c`
/// (zero outside).
fn face_distance(cov: &CubeCovering, c: usize, x: &[f64]) -> f64 {
    let cell = &cov.cells[c];
    (0..cov.d)
        .map(|a| (x[a] - cell.lo[a]).min(cell.hi[a] - x[a]))
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
}

/// Which branch of the modified distance applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TildeBranch {
    /// Inside the shrunken cube of side `(k-1) epsilon`.
    Core,
    /// Within `epsilon^(1+kappa)` of the boundary.
    Boundary,
    /// On the dyadic shell `2^(n-1) t < dist <= 2^n t`.
    Shell(u32),
}

/// Three-case cutoff of the distance `r` for a point at physical position
/// `x` in cell `c`. Returns the value and the branch taken.
pub fn tilde_r_branch(cov: &CubeCovering, c: usize, x: &[f64], r: f64, kappa: f64) -> (f64, TildeBranch) {
    let eps = cov.epsilon;
    let t = eps.powf(1.0 + kappa);
    let dd = face_distance(cov, c, x);
    if dd >= eps / 2.0 {
        (r, TildeBranch::Core)
    } else if dd <= t {
        (t.min(r), TildeBranch::Boundary)
    } else {
        let mut n = (dd / t).log2().ceil().max(1.0) as u32;
        while dd > (1u64 << n) as f64 * t {
            n += 1;
        }
        while n > 1 && dd <= (1u64 << (n - 1)) as f64 * t {
            n -= 1;
        }
        (((1u64 << (n - 1)) as f64 * t).min(r), TildeBranch::Shell(n))
    }
}

/// Modified distance of point `i` in its assigned cell, with the cutoff
/// applied to the sup-norm minimal distance.
pub fn tilde_r(config: &MarkedConfiguration, covering: &CubeCovering, i: usize, kappa: f64) -> f64 {
    if config.spec.is_lattice() {
        return config.min_distances()[i];
    }
    let r = sup_min_distances_single(config, i);
    let x: Vec<f64> = config.point(i).iter().map(|z| config.epsilon() * z).collect();
    tilde_r_branch(covering, covering.assignment[i], &x, r, kappa).0
}

fn sup_min_distances_single(config: &MarkedConfiguration, i: usize) -> f64 {
    let d = config.d();
    let coords = config.coords();
    let zi = config.point(i);
    let mut best: f64 = 1.0;
    config.index().for_each_candidate(zi, 1.0, |j| {
        if j != i {
            let s = coords[j * d..(j + 1) * d]
                .iter()
                .zip(zi)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            best = best.min(s);
        }
    });
    config.epsilon() / 4.0 * best
}

/// A cell `K = (Q ∪ own point cubes) \ foreign point cubes`.
#[derive(Clone, Debug, Serialize)]
pub struct RandomCell {
    /// Own points whose cube leaves `Q`.
    pub added: Vec<usize>,
    /// Foreign points whose cube enters `Q`.
    pub removed: Vec<usize>,
    pub volume: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RandomCovering {
    pub base: CubeCovering,
    pub kappa: f64,
    pub tilde_r: Vec<f64>,
    pub cells: Vec<RandomCell>,
    /// Physical point positions.
    centres: Vec<f64>,
}

impl RandomCovering {
    /// Point cube of half-side `2 R~` (physical).
    pub fn point_cube(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        let d = self.base.d;
        let c = &self.centres[i * d..(i + 1) * d];
        let h = 2.0 * self.tilde_r[i];
        (c.iter().map(|v| v - h).collect(), c.iter().map(|v| v + h).collect())
    }

    /// Membership of the physical point `x` in cell `c`; point cubes are
    /// removed as open sets.
    pub fn contains(&self, c: usize, x: &[f64]) -> bool {
        let d = self.base.d;
        let inside_open = |i: usize| {
            let h = 2.0 * self.tilde_r[i];
            (0..d).all(|a| (x[a] - self.centres[i * d + a]).abs() < h)
        };
        let inside_closed = |i: usize| {
            let h = 2.0 * self.tilde_r[i];
            (0..d).all(|a| (x[a] - self.centres[i * d + a]).abs() <= h)
        };
        let q = &self.base.cells[c];
        let in_q = (0..d).all(|a| x[a] >= q.lo[a] && x[a] <= q.hi[a]);
        let own = in_q || self.cells[c].added.iter().any(|&i| inside_closed(i));
        own && !self.cells[c].removed.iter().any(|&i| inside_open(i))
    }

    pub fn total_volume(&self) -> f64 {
        self.cells.iter().map(|c| c.volume).sum()
    }

    pub fn centre(&self, i: usize) -> &[f64] {
        let d = self.base.d;
        &self.centres[i * d..(i + 1) * d]
    }
}

fn overlap_volume(alo: &[f64], ahi: &[f64], blo: &[f64], bhi: &[f64]) -> f64 {
    alo.iter()
        .zip(ahi)
        .zip(blo.iter().zip(bhi))
        .map(|((a0, a1), (b0, b1))| (a1.min(*b1) - a0.max(*b0)).max(0.0))
        .product()
}

/// Builds the randomized covering with the regime's `kappa` and checks it.
pub fn build_random_covering(config: &MarkedConfiguration, k: usize) -> Result<RandomCovering> {
    let (_, kappa) = regime_parameters(config.d(), config.epsilon())?;
    build_random_covering_with(config, k, kappa)
}

pub fn build_random_covering_with(config: &MarkedConfiguration, k: usize, kappa: f64) -> Result<RandomCovering> {
    let base = build_cubes(config, k)?;
    let d = config.d();
    let eps = config.epsilon();
    let n = config.len();
    let centres: Vec<f64> = config.coords().iter().map(|z| eps * z).collect();
    let side = base.side();
    let mut cells: Vec<RandomCell> = (0..base.cells.len())
        .map(|_| RandomCell {
            added: Vec::new(),
            removed: Vec::new(),
            volume: side.powi(d as i32),
        })
        .collect();
    if config.spec.is_lattice() {
        let tilde = config.min_distances().to_vec();
        return Ok(RandomCovering {
            base,
            kappa,
            tilde_r: tilde,
            cells,
            centres,
        });
    }
    let rinf = sup_min_distances(config);
    let mut tilde = vec![0.0; n];
    for i in 0..n {
        let x = &centres[i * d..(i + 1) * d];
        tilde[i] = tilde_r_branch(&base, base.assignment[i], x, rinf[i], kappa).0;
    }
    for i in 0..n {
        let x = &centres[i * d..(i + 1) * d];
        let h = 2.0 * tilde[i];
        let lo: Vec<f64> = x.iter().map(|v| v - h).collect();
        let hi: Vec<f64> = x.iter().map(|v| v + h).collect();
        let own = base.assignment[i];
        let cube_volume = (2.0 * h).powi(d as i32);
        let m0 = base.multi_of_cell(own);
        for_each_neighbour(&base, &m0, |c| {
            let q = &base.cells[c];
            let v = overlap_volume(&lo, &hi, &q.lo, &q.hi);
            if c == own {
                if v < cube_volume {
                    cells[c].added.push(i);
                    cells[c].volume += cube_volume - v;
                }
            } else if v > 0.0 {
                cells[c].removed.push(i);
                cells[c].volume -= v;
            }
        });
    }
    let cov = RandomCovering {
        base,
        kappa,
        tilde_r: tilde,
        cells,
        centres,
    };
    let report = verify_random_covering(config, &cov);
    if report.volume_violations > 0 || report.disjointness_violations > 0 {
        return Err(Error::Covering(report.first.unwrap_or_default()));
    }
    Ok(cov)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CoveringReport {
    pub cells: usize,
    pub volume_violations: usize,
    pub disjointness_violations: usize,
    pub dichotomy_violations: usize,
    pub pairs_checked: usize,
    pub first: Option<String>,
}

impl CoveringReport {
    pub fn violations(&self) -> usize {
        self.volume_violations + self.disjointness_violations + self.dichotomy_violations
    }
}

/// Checks the volume window of every cell, disjointness of the point cubes
/// and, for every point and every cell near it, that the small ball misses
/// the cell or the doubled ball lies inside it.
pub fn verify_random_covering(config: &MarkedConfiguration, cov: &RandomCovering) -> CoveringReport {
    let d = cov.base.d;
    let eps = cov.base.epsilon;
    let k = cov.base.k as f64;
    let ek = eps.powf(cov.kappa);
    let vmin = ((k - ek) * eps).max(0.0).powi(d as i32) * (1.0 - 1e-12);
    let vmax = ((k + ek) * eps).powi(d as i32) * (1.0 + 1e-12);
    let mut rep = CoveringReport {
        cells: cov.cells.len(),
        ..Default::default()
    };
    for (c, cell) in cov.cells.iter().enumerate() {
        if cell.volume < vmin || cell.volume > vmax {
            rep.volume_violations += 1;
            rep.first.get_or_insert(format!(
                "cell {c} volume {:.6e} outside [{vmin:.6e}, {vmax:.6e}]",
                cell.volume
            ));
        }
    }
    if config.spec.is_lattice() {
        return rep;
    }
    let n = config.len();
    let coords = config.coords();
    for i in 0..n {
        let zi = config.point(i);
        let hi_r = 2.0 * cov.tilde_r[i] / eps;
        // any overlapping cube has half-side at most eps/2, i.e. 1/2 rescaled
        config.index().for_each_candidate(zi, hi_r + 0.5, |j| {
            if j <= i {
                return;
            }
            let hj = 2.0 * cov.tilde_r[j] / eps;
            let zj = &coords[j * d..(j + 1) * d];
            let gap = zi.iter().zip(zj).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if gap < (hi_r + hj) * (1.0 - 1e-12) {
                rep.disjointness_violations += 1;
                rep.first.get_or_insert(format!("point cubes {i} and {j} overlap"));
            }
        });
    }
    // dichotomy by sampling the ball surfaces and centres exactly
    let dirs = probe_directions(d);
    for i in 0..n {
        let x = cov.centre(i);
        let r = cov.tilde_r[i];
        let own = cov.base.assignment[i];
        let m0 = cov.base.multi_of_cell(own);
        for_each_neighbour(&cov.base, &m0, |c| {
            rep.pairs_checked += 1;
            let q = &cov.base.cells[c];
            let meets_small = ball_meets_cell(cov, c, x, r, &dirs);
            if meets_small && !ball_inside_cell(cov, c, x, 2.0 * r) {
                rep.dichotomy_violations += 1;
                rep.first.get_or_insert(format!(
                    "point {i}: ball meets cell {c} (anchor {:?}) without the doubled ball inside",
                    q.anchor
                ));
            }
        });
    }
    rep
}

fn for_each_neighbour(base: &CubeCovering, m0: &[i64], mut f: impl FnMut(usize)) {
    let d = base.d;
    let count = 3usize.pow(d as u32);
    let mut m = vec![0i64; d];
    for code in 0..count {
        let mut r = code;
        for a in 0..d {
            m[a] = m0[a] + (r % 3) as i64 - 1;
            r /= 3;
        }
        if let Some(c) = base.cell_at(&m) {
            f(c);
        }
    }
}

/// Axis and diagonal unit directions used to probe spheres.
fn probe_directions(d: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for a in 0..d {
        for s in [-1.0, 1.0] {
            let mut v = vec![0.0; d];
            v[a] = s;
            out.push(v);
        }
    }
    let inv = 1.0 / (d as f64).sqrt();
    for code in 0..(1usize << d) {
        out.push((0..d).map(|a| if code >> a & 1 == 1 { inv } else { -inv }).collect());
    }
    out
}

/// Whether the open ball of radius `r` around `x` meets cell `c`. The ball
/// meets `K` iff it meets `Q` or an added cube, outside every removed cube.
/// Removed and added cubes are boxes, so the test is exact when the ball
/// lies inside a removed cube or misses all constituents; otherwise probe
/// points on the ball decide.
fn ball_meets_cell(cov: &RandomCovering, c: usize, x: &[f64], r: f64, dirs: &[Vec<f64>]) -> bool {
    let d = cov.base.d;
    let q = &cov.base.cells[c];
    let ball_box_dist = |lo: &[f64], hi: &[f64]| -> f64 {
        (0..d)
            .map(|a| {
                let v = (lo[a] - x[a]).max(0.0).max(x[a] - hi[a]);
                v * v
            })
            .sum::<f64>()
    };
    let near_q = ball_box_dist(&q.lo, &q.hi) < r * r;
    let near_added = cov.cells[c].added.iter().any(|&j| {
        let (lo, hi) = cov.point_cube(j);
        ball_box_dist(&lo, &hi) < r * r
    });
    if !near_q && !near_added {
        return false;
    }
    // swallowed by a removed cube: the open ball lies in its interior
    let swallowed = cov.cells[c].removed.iter().any(|&j| {
        let (lo, hi) = cov.point_cube(j);
        (0..d).all(|a| x[a] - r >= lo[a] - 1e-15 && x[a] + r <= hi[a] + 1e-15)
    });
    if swallowed {
        return false;
    }
    let mut p = vec![0.0; d];
    for s in [0.0, 0.5, 0.999_999] {
        for v in dirs {
            for a in 0..d {
                p[a] = x[a] + s * r * v[a];
            }
            if cov.contains(c, &p) {
                return true;
            }
            if s == 0.0 {
                break;
            }
        }
    }
    // meets a constituent in a region the probes missed: count as meeting
    near_q && q_ball_overlap_outside_removed(cov, c, x, r)
}

/// Conservative fallback: the ball meets `Q` in a point not covered by a
/// removed cube. Uses the nearest point of `Q` to the centre.
fn q_ball_overlap_outside_removed(cov: &RandomCovering, c: usize, x: &[f64], r: f64) -> bool {
    let d = cov.base.d;
    let q = &cov.base.cells[c];
    let p: Vec<f64> = (0..d).map(|a| x[a].clamp(q.lo[a], q.hi[a])).collect();
    let gap = dist2(&p, x).sqrt();
    if gap >= r {
        return false;
    }
    // nudge into the ball so the point is an interior point of it
    let inside: Vec<f64> = if gap > 0.0 {
        (0..d).map(|a| x[a] + (p[a] - x[a]) * (1.0 - 1e-9)).collect()
    } else {
        p
    };
    cov.contains(c, &inside)
}

/// Whether the closed ball of radius `r` lies in cell `c`. Exact: the ball
/// must sit in `Q` or in an added cube and avoid every removed cube.
fn ball_inside_cell(cov: &RandomCovering, c: usize, x: &[f64], r: f64) -> bool {
    let d = cov.base.d;
    let q = &cov.base.cells[c];
    let tol = 1e-12 * cov.base.side();
    let inside_box = |lo: &[f64], hi: &[f64]| (0..d).all(|a| x[a] - r >= lo[a] - tol && x[a] + r <= hi[a] + tol);
    let held = inside_box(&q.lo, &q.hi)
        || cov.cells[c].added.iter().any(|&j| {
            let (lo, hi) = cov.point_cube(j);
            inside_box(&lo, &hi)
        });
    if !held {
        return false;
    }
    // no removed cube may reach into the ball
    !cov.cells[c].removed.iter().any(|&j| {
        let (lo, hi) = cov.point_cube(j);
        let s: f64 = (0..d)
            .map(|a| {
                let v = (lo[a] - x[a]).max(0.0).max(x[a] - hi[a]);
                v * v
            })
            .sum();
        s < r * r * (1.0 - 1e-12)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{sample_configuration, MarkDistribution, ProcessSpec};

    fn lattice(eps: f64) -> MarkedConfiguration {
        sample_configuration(&ProcessSpec::lattice(3, eps, MarkDistribution::constant(1.0)), 0).unwrap()
    }

    #[test]
    fn regime_values() {
        assert_eq!(regime_parameters(3, 0.01).unwrap(), (6, 0.2));
        assert_eq!(regime_parameters(4, 0.01).unwrap().0, 4);
        assert_eq!(regime_parameters(3, 1.0 / 32.0).unwrap().0, 4);
        assert!(regime_parameters(2, 0.1).is_err());
    }

    #[test]
    fn eighth_with_k4() {
        let c = lattice(0.125);
        let cov = build_cubes(&c, 4).unwrap();
        assert_eq!(cov.cells.len(), 64);
        assert_eq!(cov.interior_ids.len(), 8);
        let total: usize = cov.cells.iter().map(|c| c.points.len()).sum();
        assert_eq!(total, c.len());
    }

    #[test]
    fn unit_cells_hold_one_point() {
        let c = lattice(0.25);
        let cov = build_cubes(&c, 1).unwrap();
        assert!(cov.cells.iter().all(|c| c.points.len() == 1));
        assert_eq!(cov.cells.len(), c.len());
    }

    #[test]
    fn too_coarse_refused() {
        let c = lattice(0.25);
        assert!(matches!(build_cubes(&c, 9), Err(Error::CellTooLarge { .. })));
    }

    #[test]
    fn tilde_branches() {
        let spec = ProcessSpec::poisson(3, 1.0 / 16.0, 1.0, MarkDistribution::constant(1.0));
        let c = MarkedConfiguration::from_points(spec, vec![0.0; 3], vec![1.0]).unwrap();
        let cov = build_cubes(&c, 3).unwrap();
        let eps = 1.0 / 16.0;
        let r = eps / 4.0;
        let cell = cov.assignment[0];
        assert_eq!(tilde_r_branch(&cov, cell, &[0.0; 3], r, 0.2), (r, TildeBranch::Core));
        let t = eps.powf(1.2);
        let x = [1.5 * eps - 0.5 * t, 0.0, 0.0];
        let (v, b) = tilde_r_branch(&cov, cell, &x, r, 0.2);
        assert_eq!(b, TildeBranch::Boundary);
        assert_eq!(v, t.min(r));
        // smaller kappa makes t small enough for a shell
        let t = eps.powf(1.9);
        let x = [1.5 * eps - 3.0 * t, 0.0, 0.0];
        let (v, b) = tilde_r_branch(&cov, cell, &x, 1.0, 0.9);
        assert_eq!(b, TildeBranch::Shell(2));
        assert!((v - 2.0 * t).abs() < 1e-15);
    }

    #[test]
    fn untouched_cells_keep_volume() {
        let spec = ProcessSpec::poisson(3, 1.0 / 16.0, 1.0, MarkDistribution::constant(1.0));
        let c = MarkedConfiguration::from_points(spec, vec![0.0; 3], vec![1.0]).unwrap();
        let cov = build_random_covering(&c, 3).unwrap();
        let side = 3.0 / 16.0;
        assert!(cov.cells.iter().all(|k| (k.volume - side * side * side).abs() < 1e-15));
    }

    #[test]
    fn straddling_point_moves_volume() {
        let eps = 1.0 / 16.0;
        let spec = ProcessSpec::poisson(3, eps, 1.0, MarkDistribution::constant(1.0));
        // on the face between anchors 0 and 3 along the first axis
        let c = MarkedConfiguration::from_points(spec, vec![1.5, 0.0, 0.0], vec![1.0]).unwrap();
        let cov = build_random_covering(&c, 3).unwrap();
        let left = cov.base.cell_at(&[0, 0, 0]).unwrap();
        let right = cov.base.cell_at(&[1, 0, 0]).unwrap();
        assert_eq!(cov.base.assignment[0], left);
        let q = (3.0 * eps).powi(3);
        let gain = cov.cells[left].volume - q;
        let loss = q - cov.cells[right].volume;
        assert!(gain > 0.0);
        assert!((gain - loss).abs() < 1e-15);
        let report = verify_random_covering(&c, &cov);
        assert_eq!(report.violations(), 0, "{:?}", report.first);
    }

    #[test]
    fn lattice_covering_is_deterministic() {
        let c = lattice(0.125);
        let cov = build_random_covering(&c, 3).unwrap();
        assert!(cov.cells.iter().all(|k| k.added.is_empty() && k.removed.is_empty()));
    }
}
