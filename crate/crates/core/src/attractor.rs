//! Certified attractor approximations.
//!
//! The depth-n approximation holds one representative per depth-n cylinder,
//! obtained by pushing the center of an invariant ball through every length-n
//! map composition. Each representative carries the radius of its cylinder
//! cell, so the set is a two-sided cover of the attractor: every attractor
//! point lies within the cell radius of its representative and every
//! representative lies on a cell of the attractor.

use std::collections::BTreeSet;

use crate::codespace::{address_at, cell_count, Address};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::grid::{
    euclidean_proxy, proxy_dim_for, sequence_proxy, CellCover, SpatialIndex, MAX_PROXY_DIM,
};
use crate::spaces::{euclid_distance, Backend, IfsSpec, Point, SeqPoint};

/// Pair-count ceiling under which Hausdorff distances are computed by the
/// quadratic scan instead of the grid.
pub const BRUTE_PAIR_LIMIT: u64 = 4_000_000;

/// Center and radius of a closed ball that every system map sends into
/// itself; the attractor is contained in it.
pub fn invariant_ball(ifs: &IfsSpec) -> Result<(Point, f64)> {
    let center = ifs.maps()[0].fixed_point()?;
    let mut radius = 0.0f64;
    for f in ifs.maps() {
        let d = f.apply(&center)?.distance(&center)?;
        radius = radius.max(d / (1.0 - f.ratio()));
    }
    Ok((center, radius))
}

// ---------------------------------------------------------------------------
// Point sets

/// Finite point collection in one backend. Euclidean coordinates are stored
/// flat to keep large sets compact.
#[derive(Clone, Debug)]
pub enum PointSet {
    Euclidean { dim: usize, coords: Vec<f64> },
    Sequence { points: Vec<SeqPoint> },
}

impl PointSet {
    pub fn empty_euclidean(dim: usize) -> Self {
        PointSet::Euclidean { dim, coords: Vec::new() }
    }

    pub fn empty_sequence() -> Self {
        PointSet::Sequence { points: Vec::new() }
    }

    pub fn from_points(points: &[Point]) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyInput)?;
        let mut set = match first {
            Point::Euclidean(c) => PointSet::empty_euclidean(c.len()),
            Point::Sequence(_) => PointSet::empty_sequence(),
        };
        for p in points {
            set.push(p)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, p: &Point) -> Result<()> {
        match (self, p) {
            (PointSet::Euclidean { dim, coords }, Point::Euclidean(c)) => {
                if c.len() != *dim {
                    return Err(Error::DimensionMismatch { expected: *dim, got: c.len() });
                }
                coords.extend_from_slice(c);
                Ok(())
            }
            (PointSet::Sequence { points }, Point::Sequence(s)) => {
                points.push(s.clone());
                Ok(())
            }
            (set, p) => Err(Error::BackendMismatch {
                expected: set.backend().name(),
                got: p.backend().name(),
            }),
        }
    }

    pub fn backend(&self) -> Backend {
        match self {
            PointSet::Euclidean { .. } => Backend::Euclidean,
            PointSet::Sequence { .. } => Backend::Sequence,
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            PointSet::Euclidean { dim, .. } => Some(*dim),
            PointSet::Sequence { .. } => None,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            PointSet::Euclidean { dim, coords } => {
                if *dim == 0 {
                    0
                } else {
                    coords.len() / dim
                }
            }
            PointSet::Sequence { points } => points.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, index: usize) -> Point {
        match self {
            PointSet::Euclidean { dim, coords } => {
                Point::Euclidean(coords[index * dim..(index + 1) * dim].to_vec())
            }
            PointSet::Sequence { points } => Point::Sequence(points[index].clone()),
        }
    }

    pub fn euclidean_coords(&self, index: usize) -> Option<&[f64]> {
        match self {
            PointSet::Euclidean { dim, coords } => Some(&coords[index * dim..(index + 1) * dim]),
            PointSet::Sequence { .. } => None,
        }
    }

    pub fn sequence_point(&self, index: usize) -> Option<&SeqPoint> {
        match self {
            PointSet::Sequence { points } => Some(&points[index]),
            PointSet::Euclidean { .. } => None,
        }
    }

    pub fn proxy_dim(&self) -> usize {
        proxy_dim_for(self.dim())
    }

    pub fn proxy(&self, index: usize) -> [f64; MAX_PROXY_DIM] {
        match self {
            PointSet::Euclidean { dim, coords } => {
                euclidean_proxy(&coords[index * dim..(index + 1) * dim])
            }
            PointSet::Sequence { points } => sequence_proxy(&points[index]),
        }
    }

    pub fn proxies(&self) -> Vec<[f64; MAX_PROXY_DIM]> {
        (0..self.len()).map(|i| self.proxy(i)).collect()
    }

    /// Distance between entry `i` here and entry `j` of a compatible set.
    pub fn cross_distance(&self, i: usize, other: &PointSet, j: usize) -> Result<f64> {
        match (self, other) {
            (
                PointSet::Euclidean { dim: da, coords: ca },
                PointSet::Euclidean { dim: db, coords: cb },
            ) => {
                if da != db {
                    return Err(Error::DimensionMismatch { expected: *da, got: *db });
                }
                Ok(euclid_distance(&ca[i * da..(i + 1) * da], &cb[j * db..(j + 1) * db]))
            }
            (PointSet::Sequence { points: pa }, PointSet::Sequence { points: pb }) => {
                Ok(pa[i].l1_distance(&pb[j]).to_f64())
            }
            (a, b) => Err(Error::BackendMismatch {
                expected: a.backend().name(),
                got: b.backend().name(),
            }),
        }
    }

    pub fn distance_to_point(&self, index: usize, p: &Point) -> Result<f64> {
        match (self, p) {
            (PointSet::Euclidean { dim, coords }, Point::Euclidean(c)) => {
                if c.len() != *dim {
                    return Err(Error::DimensionMismatch { expected: *dim, got: c.len() });
                }
                Ok(euclid_distance(&coords[index * dim..(index + 1) * dim], c))
            }
            (PointSet::Sequence { points }, Point::Sequence(s)) => {
                Ok(points[index].l1_distance(s).to_f64())
            }
            (set, p) => Err(Error::BackendMismatch {
                expected: set.backend().name(),
                got: p.backend().name(),
            }),
        }
    }

    /// Occupied-cell cover of the set at the given cell size, over proxy
    /// coordinates.
    pub fn cell_cover(&self, cell: f64) -> CellCover {
        CellCover::from_proxies(cell, self.proxy_dim(), (0..self.len()).map(|i| self.proxy(i)))
    }

    /// Index of the nearest entry to `p` together with the distance.
    pub fn nearest(&self, index: &SpatialIndex, p: &Point) -> Result<Option<(usize, f64)>> {
        if self.is_empty() {
            return Ok(None);
        }
        self.distance_to_point(0, p)?;
        let proxy = match p {
            Point::Euclidean(c) => euclidean_proxy(c),
            Point::Sequence(s) => sequence_proxy(s),
        };
        let hit = index.nearest_by(&proxy, |id| {
            self.distance_to_point(id as usize, p).expect("checked compatible")
        });
        Ok(hit.map(|(id, d)| (id as usize, d)))
    }

    pub fn spatial_index(&self, cell: f64) -> SpatialIndex {
        SpatialIndex::build(cell, self.proxy_dim(), self.proxies())
    }

    /// Cell size that spreads the set over about one point per bucket.
    pub fn auto_cell(&self) -> f64 {
        let dim = self.proxy_dim();
        let mut lo = [f64::INFINITY; MAX_PROXY_DIM];
        let mut hi = [f64::NEG_INFINITY; MAX_PROXY_DIM];
        for i in 0..self.len() {
            let p = self.proxy(i);
            for j in 0..dim {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
        let mut extent = 0.0f64;
        for j in 0..dim {
            if hi[j] >= lo[j] {
                extent = extent.max(hi[j] - lo[j]);
            }
        }
        if extent <= 0.0 || !extent.is_finite() {
            return 1.0;
        }
        let per_axis = (self.len().max(1) as f64).powf(1.0 / dim as f64).max(1.0);
        extent / per_axis
    }
}

// ---------------------------------------------------------------------------
// Attractor approximation

/// Depth-n cylinder representatives with certified radii, in the order of
/// the depth-n address enumeration.
#[derive(Clone, Debug)]
pub struct AttractorApprox {
    depth: u32,
    n_maps: u8,
    center: Point,
    ball_radius: f64,
    points: PointSet,
    radii: Vec<f64>,
    max_error: f64,
}

impl AttractorApprox {
    /// Push the invariant ball center through all depth-n compositions. The
    /// representative of address I is f_I(center) and its cell radius is
    /// r_I times the ball radius.
    pub fn compute(ifs: &IfsSpec, depth: u32, budget: u64) -> Result<Self> {
        let n = ifs.n_maps();
        cell_count(n, depth, budget)?;
        let (center, ball_radius) = invariant_ball(ifs)?;
        let mut level: Vec<Point> = vec![center.clone()];
        let mut radii: Vec<f64> = vec![ball_radius];
        for _ in 0..depth {
            let mut next = Vec::with_capacity(level.len() * n as usize);
            let mut next_radii = Vec::with_capacity(level.len() * n as usize);
            for f in ifs.maps() {
                for (p, e) in level.iter().zip(&radii) {
                    next.push(f.apply(p)?);
                    next_radii.push(f.ratio() * e);
                }
            }
            level = next;
            radii = next_radii;
        }
        let points = PointSet::from_points(&level)?;
        let max_error = radii.iter().cloned().fold(0.0f64, f64::max);
        Ok(AttractorApprox {
            depth,
            n_maps: n,
            center,
            ball_radius,
            points,
            radii,
            max_error,
        })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn n_maps(&self) -> u8 {
        self.n_maps
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn ball_radius(&self) -> f64 {
        self.ball_radius
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Largest cell radius; every attractor point is within this distance
    /// of some representative and conversely.
    pub fn max_error(&self) -> f64 {
        self.max_error
    }

    pub fn address_of(&self, rank: usize) -> Address {
        address_at(rank as u64, self.depth, self.n_maps)
    }

    pub fn point(&self, rank: usize) -> Point {
        self.points.point(rank)
    }

    pub fn error_radius(&self, rank: usize) -> f64 {
        self.radii[rank]
    }
}

/// One application of the system to a whole set, in map-major order.
pub fn hutchinson_image(ifs: &IfsSpec, set: &PointSet) -> Result<PointSet> {
    let mut out = match set.backend() {
        Backend::Euclidean => PointSet::empty_euclidean(set.dim().unwrap_or(0)),
        Backend::Sequence => PointSet::empty_sequence(),
    };
    for f in ifs.maps() {
        for i in 0..set.len() {
            out.push(&f.apply(&set.point(i))?)?;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Hausdorff distance

fn check_compatible(a: &PointSet, b: &PointSet) -> Result<()> {
    if a.backend() != b.backend() {
        return Err(Error::BackendMismatch {
            expected: a.backend().name(),
            got: b.backend().name(),
        });
    }
    if let (Some(da), Some(db)) = (a.dim(), b.dim()) {
        if da != db {
            return Err(Error::DimensionMismatch { expected: da, got: db });
        }
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

fn directed_brute(a: &PointSet, b: &PointSet) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.len() {
        let mut best = f64::INFINITY;
        for j in 0..b.len() {
            best = best.min(a.cross_distance(i, b, j).expect("checked compatible"));
        }
        worst = worst.max(best);
    }
    worst
}

fn directed_grid(a: &PointSet, b: &PointSet) -> f64 {
    let index = b.spatial_index(b.auto_cell());
    let mut worst = 0.0f64;
    for i in 0..a.len() {
        let (_, d) = index
            .nearest_by(&a.proxy(i), |id| {
                a.cross_distance(i, b, id as usize).expect("checked compatible")
            })
            .expect("b is nonempty");
        worst = worst.max(d);
    }
    worst
}

/// Quadratic-scan Hausdorff distance, the reference implementation.
pub fn hausdorff_distance_brute(a: &PointSet, b: &PointSet) -> Result<f64> {
    check_compatible(a, b)?;
    Ok(directed_brute(a, b).max(directed_brute(b, a)))
}

/// Hausdorff distance; grid accelerated above the pair-count ceiling. Both
/// paths evaluate the same exact point distances, so they agree.
pub fn hausdorff_distance(a: &PointSet, b: &PointSet) -> Result<f64> {
    check_compatible(a, b)?;
    if (a.len() as u64).saturating_mul(b.len() as u64) <= BRUTE_PAIR_LIMIT {
        Ok(directed_brute(a, b).max(directed_brute(b, a)))
    } else {
        Ok(directed_grid(a, b).max(directed_grid(b, a)))
    }
}

/// Hausdorff distance between the representatives and their image under one
/// more application of the system. Bounded by the largest cell radius.
pub fn self_consistency(ifs: &IfsSpec, approx: &AttractorApprox) -> Result<f64> {
    let image = hutchinson_image(ifs, approx.points())?;
    hausdorff_distance(approx.points(), &image)
}

/// Cover counts at geometrically shrinking cell sizes, for slope fitting.
/// Scale k uses cell size ball_radius * r_max^k over the last four depths.
///
/// Sequence points are quantized on their exact coordinates, one floor per
/// nonzero entry; the low-dimensional proxy would flatten the count.
pub fn box_cover_series(approx: &AttractorApprox, r_max: f64) -> Vec<(f64, u64)> {
    let depth = approx.depth();
    let lo = depth.saturating_sub(3);
    (lo..=depth)
        .map(|k| {
            let h = approx.ball_radius() * r_max.powi(k as i32);
            (h, box_count(approx, h))
        })
        .collect()
}

/// Occupied box count at one scale.
pub fn box_count(approx: &AttractorApprox, h: f64) -> u64 {
    match approx.points().backend() {
        Backend::Euclidean => approx.points().cell_cover(h).count(),
        Backend::Sequence => sequence_box_count(approx.points(), h),
    }
}

/// Number of side-h boxes hit by a sequence point set. Each nonzero entry
/// contributes (index, floor(value / h)); zero floors are dropped so the
/// key length stays bounded by the support.
fn sequence_box_count(points: &PointSet, h: f64) -> u64 {
    let h_dyadic = Dyadic::from_f64(h);
    let mut keys: BTreeSet<Vec<(u32, i64)>> = BTreeSet::new();
    for rank in 0..points.len() {
        let p = points.sequence_point(rank).expect("sequence backend");
        let mut key = Vec::with_capacity(p.entries().len());
        for (idx, value) in p.entries() {
            let cell = match h_dyadic {
                Some(hd) => dyadic_floor_div(*value, hd),
                None => (value.to_f64() / h).floor() as i64,
            };
            if cell != 0 {
                key.push((*idx, cell));
            }
        }
        keys.insert(key);
    }
    keys.len() as u64
}

/// floor((a_num / 2^a_exp) / (b_num / 2^b_exp)) without leaving integers.
fn dyadic_floor_div(a: Dyadic, b: Dyadic) -> i64 {
    let num = (a.numerator() as i128) << b.exponent().min(64);
    let den = (b.numerator() as i128) << a.exponent().min(64);
    num.div_euclid(den) as i64
}
