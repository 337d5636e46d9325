//! Uniform hashed grid over low-dimensional proxy coordinates.
//!
//! Points of either backend are projected to at most four proxy coordinates
//! by maps that never increase distance, so the Chebyshev distance of two
//! proxies is a lower bound for the true metric distance. Range queries run
//! on the grid and return candidate supersets; callers confirm each
//! candidate with the exact backend metric.

use crate::spaces::SeqPoint;
use std::collections::HashMap;

/// Proxy coordinates are zero padded to this width.
pub const MAX_PROXY_DIM: usize = 4;

/// First coordinates of a Euclidean point, zero padded.
pub fn euclidean_proxy(coords: &[f64]) -> [f64; MAX_PROXY_DIM] {
    let mut p = [0.0; MAX_PROXY_DIM];
    for (slot, &c) in p.iter_mut().zip(coords.iter()) {
        *slot = c;
    }
    p
}

/// First coordinate and l1 norm; both move by at most the l1 distance.
pub fn sequence_proxy(p: &SeqPoint) -> [f64; MAX_PROXY_DIM] {
    [p.first_coord().to_f64(), p.l1_norm().to_f64(), 0.0, 0.0]
}

pub fn proxy_dim_for(ambient: Option<usize>) -> usize {
    match ambient {
        Some(d) => d.min(MAX_PROXY_DIM),
        None => 2,
    }
}

/// Hashed uniform grid over point proxies. Stores only ids; the caller owns
/// the points and supplies exact distances when asked.
pub struct SpatialIndex {
    cell: f64,
    dim: usize,
    proxies: Vec<[f64; MAX_PROXY_DIM]>,
    buckets: HashMap<[i64; MAX_PROXY_DIM], Vec<u32>>,
    min_cell: [i64; MAX_PROXY_DIM],
    max_cell: [i64; MAX_PROXY_DIM],
}

impl SpatialIndex {
    /// `cell` must be positive and finite; pick it near the typical query
    /// radius so range scans touch O(1) buckets.
    pub fn build(cell: f64, dim: usize, proxies: Vec<[f64; MAX_PROXY_DIM]>) -> Self {
        assert!(cell.is_finite() && cell > 0.0, "cell size must be positive");
        assert!(dim >= 1 && dim <= MAX_PROXY_DIM);
        let mut buckets: HashMap<[i64; MAX_PROXY_DIM], Vec<u32>> = HashMap::new();
        let mut min_cell = [i64::MAX; MAX_PROXY_DIM];
        let mut max_cell = [i64::MIN; MAX_PROXY_DIM];
        for (id, proxy) in proxies.iter().enumerate() {
            let key = cell_of(proxy, cell, dim);
            for j in 0..MAX_PROXY_DIM {
                min_cell[j] = min_cell[j].min(key[j]);
                max_cell[j] = max_cell[j].max(key[j]);
            }
            buckets.entry(key).or_default().push(id as u32);
        }
        SpatialIndex { cell, dim, proxies, buckets, min_cell, max_cell }
    }

    pub fn len(&self) -> usize {
        self.proxies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proxies.is_empty()
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    pub fn proxy(&self, id: u32) -> &[f64; MAX_PROXY_DIM] {
        &self.proxies[id as usize]
    }

    /// Ids of every stored point whose true distance to the query could be
    /// at most `radius`; a superset by the Lipschitz property of proxies.
    /// Output is sorted and deduplicated.
    pub fn candidates_within(&self, query: &[f64; MAX_PROXY_DIM], radius: f64, out: &mut Vec<u32>) {
        out.clear();
        if self.proxies.is_empty() {
            return;
        }
        let mut lo = [0i64; MAX_PROXY_DIM];
        let mut hi = [0i64; MAX_PROXY_DIM];
        for j in 0..self.dim {
            lo[j] = grid_floor((query[j] - radius) / self.cell).max(self.min_cell[j]);
            hi[j] = grid_floor((query[j] + radius) / self.cell).min(self.max_cell[j]);
            if lo[j] > hi[j] {
                return;
            }
        }
        let mut key = lo;
        loop {
            if let Some(bucket) = self.buckets.get(&key) {
                out.extend_from_slice(bucket);
            }
            // Odometer over the active axes, most significant first.
            let mut axis = self.dim;
            loop {
                if axis == 0 {
                    out.sort_unstable();
                    return;
                }
                axis -= 1;
                if key[axis] < hi[axis] {
                    key[axis] += 1;
                    break;
                }
                key[axis] = lo[axis];
            }
        }
    }

    /// Nearest stored point under the caller's exact metric. Proxy cells are
    /// scanned in expanding Chebyshev rings; a ring at index k only holds
    /// points at true distance above (k - 1) * cell, which bounds the scan.
    /// Ties go to the candidate found first in scan order.
    pub fn nearest_by<F>(&self, query: &[f64; MAX_PROXY_DIM], mut exact: F) -> Option<(u32, f64)>
    where
        F: FnMut(u32) -> f64,
    {
        if self.proxies.is_empty() {
            return None;
        }
        let qc = cell_of(query, self.cell, self.dim);
        let mut ring_start = 0i64;
        let mut ring_end = 0i64;
        for j in 0..self.dim {
            let below = self.min_cell[j] - qc[j];
            let above = qc[j] - self.max_cell[j];
            ring_start = ring_start.max(below).max(above);
            ring_end = ring_end.max(qc[j] - self.min_cell[j]).max(self.max_cell[j] - qc[j]);
        }
        let mut best: Option<(u32, f64)> = None;
        let mut ring = ring_start.max(0);
        while ring <= ring_end {
            if let Some((_, d)) = best {
                if d < (ring as f64 - 1.0) * self.cell {
                    break;
                }
            }
            self.scan_ring(&qc, ring, |id| {
                let d = exact(id);
                match best {
                    Some((_, bd)) if bd <= d => {}
                    _ => best = Some((id, d)),
                }
            });
            ring += 1;
        }
        best
    }

    fn scan_ring<G: FnMut(u32)>(&self, center: &[i64; MAX_PROXY_DIM], ring: i64, mut visit: G) {
        let mut key = [0i64; MAX_PROXY_DIM];
        self.scan_ring_axis(center, ring, 0, false, &mut key, &mut visit);
    }

    fn scan_ring_axis<G: FnMut(u32)>(
        &self,
        center: &[i64; MAX_PROXY_DIM],
        ring: i64,
        axis: usize,
        pinned: bool,
        key: &mut [i64; MAX_PROXY_DIM],
        visit: &mut G,
    ) {
        if axis == self.dim {
            // Without a pinned axis the offset has Chebyshev norm below the
            // ring index and was visited by an earlier ring.
            if pinned || ring == 0 {
                if let Some(bucket) = self.buckets.get(key) {
                    for &id in bucket {
                        visit(id);
                    }
                }
            }
            return;
        }
        let lo = (center[axis] - ring).max(self.min_cell[axis]);
        let hi = (center[axis] + ring).min(self.max_cell[axis]);
        for c in lo..=hi {
            key[axis] = c;
            let at_face = (c - center[axis]).abs() == ring;
            self.scan_ring_axis(center, ring, axis + 1, pinned || at_face, key, visit);
        }
    }
}

/// Set of occupied grid cells at one scale over proxy coordinates. Cell
/// keys are ordered, so iteration and counting are deterministic.
#[derive(Clone, Debug)]
pub struct CellCover {
    cell: f64,
    dim: usize,
    cells: std::collections::BTreeSet<[i64; MAX_PROXY_DIM]>,
}

impl CellCover {
    pub fn from_proxies<I>(cell: f64, dim: usize, proxies: I) -> Self
    where
        I: IntoIterator<Item = [f64; MAX_PROXY_DIM]>,
    {
        assert!(cell.is_finite() && cell > 0.0, "cell size must be positive");
        assert!(dim >= 1 && dim <= MAX_PROXY_DIM);
        let cells = proxies.into_iter().map(|p| cell_of(&p, cell, dim)).collect();
        CellCover { cell, dim, cells }
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.cells.len() as u64
    }

    pub fn contains_proxy(&self, p: &[f64; MAX_PROXY_DIM]) -> bool {
        self.cells.contains(&cell_of(p, self.cell, self.dim))
    }

    pub fn keys(&self) -> impl Iterator<Item = &[i64; MAX_PROXY_DIM]> {
        self.cells.iter()
    }

    /// Center coordinates of a cell key.
    pub fn key_center(&self, key: &[i64; MAX_PROXY_DIM]) -> [f64; MAX_PROXY_DIM] {
        let mut c = [0.0; MAX_PROXY_DIM];
        for j in 0..self.dim {
            c[j] = (key[j] as f64 + 0.5) * self.cell;
        }
        c
    }

    /// Occupied cells with an unoccupied face neighbor, in key order.
    pub fn exposed_keys(&self) -> Vec<[i64; MAX_PROXY_DIM]> {
        let mut out = Vec::new();
        for key in &self.cells {
            let mut exposed = false;
            'axes: for j in 0..self.dim {
                for delta in [-1i64, 1] {
                    let mut nb = *key;
                    nb[j] += delta;
                    if !self.cells.contains(&nb) {
                        exposed = true;
                        break 'axes;
                    }
                }
            }
            if exposed {
                out.push(*key);
            }
        }
        out
    }
}

fn grid_floor(x: f64) -> i64 {
    debug_assert!(x.is_finite(), "grid coordinate must be finite");
    debug_assert!(x.abs() < 9.0e15, "grid coordinate out of exact range");
    x.floor() as i64
}

fn cell_of(p: &[f64; MAX_PROXY_DIM], cell: f64, dim: usize) -> [i64; MAX_PROXY_DIM] {
    let mut key = [0i64; MAX_PROXY_DIM];
    for j in 0..dim {
        key[j] = grid_floor(p[j] / cell);
    }
    key
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, dim: usize, seed: u64) -> Vec<[f64; MAX_PROXY_DIM]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut p = [0.0; MAX_PROXY_DIM];
                for slot in p.iter_mut().take(dim) {
                    *slot = rng.random_range(-1.0..1.0);
                }
                p
            })
            .collect()
    }

    fn euclid(a: &[f64; MAX_PROXY_DIM], b: &[f64; MAX_PROXY_DIM]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    fn chebyshev(a: &[f64; MAX_PROXY_DIM], b: &[f64; MAX_PROXY_DIM], dim: usize) -> f64 {
        let mut m = 0.0f64;
        for j in 0..dim {
            m = m.max((a[j] - b[j]).abs());
        }
        m
    }

    #[test]
    fn range_query_matches_brute_force() {
        for dim in [1usize, 2, 3] {
            let pts = random_points(400, dim, 7 + dim as u64);
            let index = SpatialIndex::build(0.11, dim, pts.clone());
            let queries = random_points(60, dim, 99 + dim as u64);
            let mut out = Vec::new();
            for q in &queries {
                for radius in [0.05, 0.11, 0.3] {
                    index.candidates_within(q, radius, &mut out);
                    let confirmed: Vec<u32> = out
                        .iter()
                        .copied()
                        .filter(|&id| euclid(&pts[id as usize], q) <= radius)
                        .collect();
                    let brute: Vec<u32> = (0..pts.len() as u32)
                        .filter(|&id| euclid(&pts[id as usize], q) <= radius)
                        .collect();
                    assert_eq!(confirmed, brute);
                }
            }
        }
    }

    #[test]
    fn range_query_is_superset_even_with_coarse_cells() {
        let pts = random_points(300, 2, 3);
        let index = SpatialIndex::build(0.5, 2, pts.clone());
        let mut out = Vec::new();
        for q in random_points(40, 2, 4) {
            index.candidates_within(&q, 0.2, &mut out);
            for id in 0..pts.len() as u32 {
                if euclid(&pts[id as usize], &q) <= 0.2 {
                    assert!(out.binary_search(&id).is_ok());
                }
            }
        }
    }

    #[test]
    fn nearest_matches_brute_force() {
        for dim in [1usize, 2, 4] {
            let pts = random_points(500, dim, 21 + dim as u64);
            let index = SpatialIndex::build(0.07, dim, pts.clone());
            for q in random_points(80, dim, 55 + dim as u64) {
                let (id, d) = index.nearest_by(&q, |id| euclid(&pts[id as usize], &q)).unwrap();
                let brute = (0..pts.len() as u32)
                    .map(|i| euclid(&pts[i as usize], &q))
                    .fold(f64::INFINITY, f64::min);
                assert!((d - brute).abs() <= 1e-15, "dim {dim}: {d} vs {brute}");
                assert!((euclid(&pts[id as usize], &q) - d).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn nearest_handles_far_queries() {
        let pts = random_points(50, 2, 5);
        let index = SpatialIndex::build(0.01, 2, pts.clone());
        let q = [250.0, -310.0, 0.0, 0.0];
        let (_, d) = index.nearest_by(&q, |id| euclid(&pts[id as usize], &q)).unwrap();
        let brute = (0..pts.len() as u32)
            .map(|i| euclid(&pts[i as usize], &q))
            .fold(f64::INFINITY, f64::min);
        assert!((d - brute).abs() <= 1e-12);
    }

    #[test]
    fn empty_index_yields_nothing() {
        let index = SpatialIndex::build(1.0, 2, Vec::new());
        let mut out = vec![9];
        index.candidates_within(&[0.0; 4], 10.0, &mut out);
        assert!(out.is_empty());
        assert!(index.nearest_by(&[0.0; 4], |_| 0.0).is_none());
    }

    #[test]
    fn results_are_deterministic() {
        let pts = random_points(200, 3, 11);
        let a = SpatialIndex::build(0.09, 3, pts.clone());
        let b = SpatialIndex::build(0.09, 3, pts.clone());
        let mut out_a = Vec::new();
        let mut out_b = Vec::new();
        for q in random_points(30, 3, 12) {
            a.candidates_within(&q, 0.25, &mut out_a);
            b.candidates_within(&q, 0.25, &mut out_b);
            assert_eq!(out_a, out_b);
            let na = a.nearest_by(&q, |id| euclid(&pts[id as usize], &q));
            let nb = b.nearest_by(&q, |id| euclid(&pts[id as usize], &q));
            assert_eq!(na.map(|(i, _)| i), nb.map(|(i, _)| i));
        }
    }

    #[test]
    fn cell_cover_counts_and_exposure() {
        // 3 x 3 block of unit cells with the middle one absent.
        let mut proxies = Vec::new();
        for x in 0..3 {
            for y in 0..3 {
                if (x, y) != (1, 1) {
                    proxies.push([x as f64 + 0.5, y as f64 + 0.5, 0.0, 0.0]);
                }
            }
        }
        let cover = CellCover::from_proxies(1.0, 2, proxies);
        assert_eq!(cover.count(), 8);
        assert!(cover.contains_proxy(&[0.1, 0.1, 0.0, 0.0]));
        assert!(!cover.contains_proxy(&[1.5, 1.5, 0.0, 0.0]));
        // Every occupied cell touches either the hole or the outside.
        assert_eq!(cover.exposed_keys().len(), 8);
        let center = cover.key_center(&[0, 0, 0, 0]);
        assert_eq!(&center[..2], &[0.5, 0.5]);
    }

    #[test]
    fn cell_cover_interior_cells_are_not_exposed() {
        let mut proxies = Vec::new();
        for x in 0..5 {
            for y in 0..5 {
                proxies.push([x as f64 + 0.5, y as f64 + 0.5, 0.0, 0.0]);
            }
        }
        let cover = CellCover::from_proxies(1.0, 2, proxies);
        assert_eq!(cover.count(), 25);
        let exposed = cover.exposed_keys();
        assert_eq!(exposed.len(), 16, "only the ring of border cells");
        assert!(!exposed.contains(&[2, 2, 0, 0]));
    }

    #[test]
    fn sequence_proxy_is_distance_dominated() {
        use crate::dyadic::Dyadic;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let sample = |rng: &mut ChaCha8Rng| {
            let mut entries: std::collections::BTreeMap<u32, Dyadic> = Default::default();
            for _ in 0..rng.random_range(0..5) {
                entries.insert(rng.random_range(1..9u32), Dyadic::new(rng.random_range(-7i64..8), 3));
            }
            SeqPoint::from_entries(entries.into_iter().collect())
        };
        for _ in 0..200 {
            let p = sample(&mut rng);
            let q = sample(&mut rng);
            let true_d = p.l1_distance(&q).to_f64();
            let cheb = chebyshev(&sequence_proxy(&p), &sequence_proxy(&q), 2);
            assert!(cheb <= true_d + 1e-15, "proxy must not stretch distances");
        }
    }
}
