//! Uniform-grid spatial hash with exact radius queries.

use crate::process::MAX_DIM;

/// Bucket grid over the bounding box of a point set, stored in compressed
/// row form (points sorted by cell).
#[derive(Clone, Debug)]
pub struct SpatialHash {
    d: usize,
    cell: f64,
    origin: [f64; MAX_DIM],
    dims: [i64; MAX_DIM],
    strides: [usize; MAX_DIM],
    starts: Vec<u32>,
    order: Vec<u32>,
}

/// Hard limit on buckets; sparse inputs fall back to coarser cells.
const MAX_CELLS: usize = 1 << 26;

impl SpatialHash {
    /// Builds the hash with the requested cell side. The side is enlarged
    /// only when the bounding box would need more than `MAX_CELLS` buckets
    /// relative to the point count; queries stay exact either way.
    pub fn build(coords: &[f64], d: usize, cell: f64) -> Self {
        assert!((1..=MAX_DIM).contains(&d));
        let n = coords.len() / d;
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        if n > 0 {
            lo[..d].copy_from_slice(&coords[..d]);
            hi[..d].copy_from_slice(&coords[..d]);
            for p in coords.chunks_exact(d) {
                for k in 0..d {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
        }
        let budget = MAX_CELLS.min(8 * n + 1024);
        let mut cell = cell;
        let dims = loop {
            let mut dims = [1i64; MAX_DIM];
            let mut total = 1usize;
            for k in 0..d {
                dims[k] = ((hi[k] - lo[k]) / cell).floor() as i64 + 1;
                total = total.saturating_mul(dims[k] as usize);
            }
            if total <= budget.max(1) || n == 0 {
                break dims;
            }
            cell *= 2.0;
        };
        let mut strides = [0usize; MAX_DIM];
        let mut total = 1usize;
        for k in (0..d).rev() {
            strides[k] = total;
            total *= dims[k] as usize;
        }
        let mut hash = SpatialHash {
            d,
            cell,
            origin: lo,
            dims,
            strides,
            starts: vec![0; total + 1],
            order: vec![0; n],
        };
        let keys: Vec<usize> = coords.chunks_exact(d).map(|p| hash.key_of(p)).collect();
        for &k in &keys {
            hash.starts[k + 1] += 1;
        }
        for c in 0..total {
            hash.starts[c + 1] += hash.starts[c];
        }
        let mut fill = hash.starts.clone();
        for (i, &k) in keys.iter().enumerate() {
            hash.order[fill[k] as usize] = i as u32;
            fill[k] += 1;
        }
        hash
    }

    pub fn cell_side(&self) -> f64 {
        self.cell
    }

    fn axis_cell(&self, k: usize, v: f64) -> i64 {
        (((v - self.origin[k]) / self.cell).floor() as i64).clamp(0, self.dims[k] - 1)
    }

    fn key_of(&self, p: &[f64]) -> usize {
        (0..self.d)
            .map(|k| self.axis_cell(k, p[k]) as usize * self.strides[k])
            .sum()
    }

    /// Calls `f` on every point whose bucket meets the box `q ± r`. This is
    /// a superset of the points within distance `r`.
    pub fn for_each_candidate(&self, q: &[f64], r: f64, mut f: impl FnMut(usize)) {
        if self.order.is_empty() {
            return;
        }
        let d = self.d;
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        for k in 0..d {
            let a = ((q[k] - r - self.origin[k]) / self.cell).floor();
            let b = ((q[k] + r - self.origin[k]) / self.cell).floor();
            if b < 0.0 || a > (self.dims[k] - 1) as f64 {
                return;
            }
            lo[k] = (a as i64).max(0);
            hi[k] = (b as i64).min(self.dims[k] - 1);
        }
        let mut cur = lo;
        loop {
            // innermost axis is contiguous in key order
            let mut base = 0usize;
            for k in 0..d - 1 {
                base += cur[k] as usize * self.strides[k];
            }
            let s = self.starts[base + lo[d - 1] as usize] as usize;
            let e = self.starts[base + hi[d - 1] as usize + 1] as usize;
            for &i in &self.order[s..e] {
                f(i as usize);
            }
            let mut k = d - 1;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                cur[k] += 1;
                if cur[k] <= hi[k] {
                    break;
                }
                cur[k] = lo[k];
            }
        }
    }

    /// Indices of points with `|x - q| <= r`, in ascending order.
    pub fn within(&self, coords: &[f64], q: &[f64], r: f64) -> Vec<usize> {
        let r2 = r * r;
        let mut out = Vec::new();
        self.for_each_candidate(q, r, |i| {
            if dist2(&coords[i * self.d..(i + 1) * self.d], q) <= r2 {
                out.push(i);
            }
        });
        out.sort_unstable();
        out
    }

    /// Distance from point `i` to its nearest other point, if one lies
    /// within `max_r`.
    pub fn nearest_other(&self, coords: &[f64], i: usize, max_r: f64) -> Option<f64> {
        let d = self.d;
        let q = &coords[i * d..(i + 1) * d];
        let mut best = max_r * max_r;
        let mut found = false;
        self.for_each_candidate(q, max_r, |j| {
            if j != i {
                let s = dist2(&coords[j * d..(j + 1) * d], q);
                if s <= best {
                    best = s;
                    found = true;
                }
            }
        });
        found.then(|| best.sqrt())
    }
}

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
