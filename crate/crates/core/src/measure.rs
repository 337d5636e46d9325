//! Interval estimates of the code-space image measure: mass of geometric
//! regions, branch masses, pairwise overlap masses, boundary mass, and the
//! scaling consistency check that ties cylinder masses together under
//! composition.
//!
//! Every estimate is a closed interval at a stated depth. Lower bounds only
//! count mass that provably lands in the target; upper bounds keep every
//! depth-n cell that cannot be ruled out. A cell is ruled out either
//! directly, when its certified ball keeps a gap from the target cover, or
//! by one bounded round of subdivision on both sides of the test.

use std::collections::HashSet;

use crate::attractor::AttractorApprox;
use crate::boundary::BoundaryApprox;
use crate::codespace::{rank_of, Address, RatioTable};
use crate::error::{Error, Result};
use crate::grid::{euclidean_proxy, sequence_proxy, SpatialIndex, MAX_PROXY_DIM};
use crate::spaces::{IfsSpec, Point};

/// Subdivision levels applied when a straddling cell might still be clear of
/// the target. Zero disables refinement.
pub const DEFAULT_REFINE: u32 = 3;

/// Cap on refined sub-cells per side of one refinement attempt.
const REFINE_SUB_CAP: u64 = 1_000;

/// Cap on refined point pairs for one cell; past this the cell just stays
/// in the upper bound.
const REFINE_PAIR_CAP: u64 = 2_000_000;

/// Absolute slack absorbing floating-point drift between a summed block
/// mass and the analytic cylinder mass of its prefix. Both approximate the
/// same exact value; bounds move apart by this much so the exact value
/// stays bracketed.
const FP_SLACK: f64 = 1e-13;

/// Closed interval bracketing the image measure of a region, together with
/// the resolution it was computed at.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalEstimate {
    pub lower: f64,
    pub upper: f64,
    pub depth: u32,
    pub region: String,
    pub inside_cells: u64,
    pub straddle_cells: u64,
}

impl IntervalEstimate {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn intersects(&self, other: &IntervalEstimate) -> bool {
        self.lower <= other.upper && other.lower <= self.upper
    }
}

/// Three-way conservative classification of a certified ball against a
/// region: `Inside` means the whole ball is contained, `Outside` means it is
/// disjoint, `Straddle` is everything the test cannot decide.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionClass {
    Inside,
    Outside,
    Straddle,
}

/// A region given by a conservative ball test. Implementations must only
/// answer `Inside` when ball(point, radius) is contained in the region and
/// only `Outside` when the ball misses the region entirely.
pub trait RegionPredicate {
    fn classify(&self, point: &Point, radius: f64) -> Result<RegionClass>;
    fn describe(&self) -> String;
}

/// The whole space; every ball is inside.
pub struct EverythingRegion;

impl RegionPredicate for EverythingRegion {
    fn classify(&self, _point: &Point, _radius: f64) -> Result<RegionClass> {
        Ok(RegionClass::Inside)
    }

    fn describe(&self) -> String {
        "everything".into()
    }
}

/// The empty region; every ball is outside.
pub struct EmptyRegion;

impl RegionPredicate for EmptyRegion {
    fn classify(&self, _point: &Point, _radius: f64) -> Result<RegionClass> {
        Ok(RegionClass::Outside)
    }

    fn describe(&self) -> String {
        "empty".into()
    }
}

/// Closed Euclidean ball.
pub struct EuclideanBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl RegionPredicate for EuclideanBall {
    fn classify(&self, point: &Point, radius: f64) -> Result<RegionClass> {
        let coords = euclidean_coords(point)?;
        if coords.len() != self.center.len() {
            return Err(Error::DimensionMismatch {
                expected: self.center.len(),
                got: coords.len(),
            });
        }
        let d = dist(&self.center, coords);
        if d + radius <= self.radius {
            Ok(RegionClass::Inside)
        } else if d - radius > self.radius {
            Ok(RegionClass::Outside)
        } else {
            Ok(RegionClass::Straddle)
        }
    }

    fn describe(&self) -> String {
        format!("ball r={}", self.radius)
    }
}

/// Closed axis-aligned Euclidean box.
pub struct EuclideanBox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl RegionPredicate for EuclideanBox {
    fn classify(&self, point: &Point, radius: f64) -> Result<RegionClass> {
        let coords = euclidean_coords(point)?;
        if coords.len() != self.min.len() || coords.len() != self.max.len() {
            return Err(Error::DimensionMismatch {
                expected: self.min.len(),
                got: coords.len(),
            });
        }
        // A Euclidean ball extends exactly `radius` along each axis, so the
        // ball sits inside the box iff the center clears every face by that
        // much. Disjointness uses the exact point-to-box distance.
        let mut inside = true;
        let mut gap_sq = 0.0;
        for k in 0..coords.len() {
            if coords[k] - radius < self.min[k] || coords[k] + radius > self.max[k] {
                inside = false;
            }
            let over = (self.min[k] - coords[k]).max(coords[k] - self.max[k]).max(0.0);
            gap_sq += over * over;
        }
        if inside {
            Ok(RegionClass::Inside)
        } else if gap_sq.sqrt() > radius {
            Ok(RegionClass::Outside)
        } else {
            Ok(RegionClass::Straddle)
        }
    }

    fn describe(&self) -> String {
        format!("box {:?}..{:?}", self.min, self.max)
    }
}

fn euclidean_coords(p: &Point) -> Result<&[f64]> {
    match p {
        Point::Euclidean(c) => Ok(c),
        Point::Sequence(_) => Err(Error::EuclideanOnly),
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn point_distance(a: &Point, b: &Point) -> Result<f64> {
    match (a, b) {
        (Point::Euclidean(x), Point::Euclidean(y)) => {
            if x.len() != y.len() {
                return Err(Error::DimensionMismatch {
                    expected: x.len(),
                    got: y.len(),
                });
            }
            Ok(dist(x, y))
        }
        (Point::Sequence(x), Point::Sequence(y)) => Ok(x.l1_distance(y).to_f64()),
        _ => Err(Error::BackendMismatch {
            expected: "matching point backends",
            got: "mixed",
        }),
    }
}

fn point_proxy(p: &Point) -> [f64; MAX_PROXY_DIM] {
    match p {
        Point::Euclidean(c) => euclidean_proxy(c),
        Point::Sequence(s) => sequence_proxy(s),
    }
}

/// Exact identity key for deduplicating coincident cover cells.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum PointKey {
    Euclidean(Vec<u64>),
    Sequence(Vec<(u32, i64, u32)>),
}

fn point_key(p: &Point) -> PointKey {
    match p {
        Point::Euclidean(c) => PointKey::Euclidean(c.iter().map(|x| x.to_bits()).collect()),
        Point::Sequence(s) => PointKey::Sequence(
            s.entries()
                .iter()
                .map(|(i, d)| (*i, d.numerator(), d.exponent()))
                .collect(),
        ),
    }
}

/// Sum the measure of every depth-n cell classified against a region
/// predicate, in rank order. Inside cells feed both bounds, straddling
/// cells only the upper one.
pub fn mu_region(
    approx: &AttractorApprox,
    table: &RatioTable,
    region: &dyn RegionPredicate,
) -> Result<IntervalEstimate> {
    let mut lower = 0.0;
    let mut upper = 0.0;
    let mut inside_cells = 0u64;
    let mut straddle_cells = 0u64;
    for rank in 0..approx.len() {
        let mass = table.cylinder_measure(&approx.address_of(rank));
        let p = approx.point(rank);
        match region.classify(&p, approx.error_radius(rank))? {
            RegionClass::Inside => {
                lower += mass;
                upper += mass;
                inside_cells += 1;
            }
            RegionClass::Straddle => {
                upper += mass;
                straddle_cells += 1;
            }
            RegionClass::Outside => {}
        }
    }
    Ok(IntervalEstimate {
        lower,
        upper: upper.min(1.0 + 1e-12),
        depth: approx.depth(),
        region: region.describe(),
        inside_cells,
        straddle_cells,
    })
}

/// Ball cover of one contiguous rank block, indexed for range queries.
struct CoverIndex {
    start: usize,
    e_max: f64,
    index: SpatialIndex,
}

impl CoverIndex {
    fn build(approx: &AttractorApprox, start: usize, len: usize) -> Self {
        let radii = &approx.radii()[start..start + len];
        let e_max = radii.iter().cloned().fold(0.0f64, f64::max);
        let points = approx.points();
        let proxies: Vec<_> = (start..start + len).map(|r| points.proxy(r)).collect();
        let cell = (approx.max_error() + e_max).max(1e-12);
        CoverIndex {
            start,
            e_max,
            index: SpatialIndex::build(cell, points.proxy_dim(), proxies),
        }
    }

    /// Conservative class of ball(p, e) against the union of cover balls,
    /// plus the cover ranks that keep the cell undecided.
    fn classify(
        &self,
        approx: &AttractorApprox,
        p: &Point,
        proxy: &[f64; MAX_PROXY_DIM],
        e: f64,
        scratch: &mut Vec<u32>,
        near: &mut Vec<usize>,
    ) -> Result<RegionClass> {
        near.clear();
        self.index.candidates_within(proxy, e + self.e_max, scratch);
        let mut straddle = false;
        for &local in scratch.iter() {
            let rank = self.start + local as usize;
            let d = approx.points().distance_to_point(rank, p)?;
            let ec = approx.error_radius(rank);
            if d + e <= ec {
                return Ok(RegionClass::Inside);
            }
            if d <= e + ec {
                straddle = true;
                near.push(rank);
            }
        }
        if straddle {
            Ok(RegionClass::Straddle)
        } else {
            Ok(RegionClass::Outside)
        }
    }
}

/// Depth-`levels` relative refinement: the image of the approximation
/// center under every length-`levels` composition, with its ratio product.
struct SubCells {
    points: Vec<Point>,
    ratios: Vec<f64>,
}

impl SubCells {
    fn build(ifs: &IfsSpec, center: &Point, levels: u32) -> Result<Self> {
        let n = ifs.n_maps() as u64;
        let mut count = 1u64;
        for _ in 0..levels {
            count = count.saturating_mul(n);
            if count > REFINE_SUB_CAP {
                return Err(Error::BudgetExceeded {
                    required: count,
                    budget: REFINE_SUB_CAP,
                });
            }
        }
        let mut points = vec![center.clone()];
        let mut ratios = vec![1.0];
        for _ in 0..levels {
            let mut next_points = Vec::with_capacity(points.len() * n as usize);
            let mut next_ratios = Vec::with_capacity(points.len() * n as usize);
            for map in ifs.maps() {
                for (p, r) in points.iter().zip(&ratios) {
                    next_points.push(map.apply(p)?);
                    next_ratios.push(map.ratio() * r);
                }
            }
            points = next_points;
            ratios = next_ratios;
        }
        Ok(SubCells { points, ratios })
    }

    fn len(&self) -> usize {
        self.points.len()
    }
}

/// Apply the address maps of `rank` to every sub-cell point, yielding the
/// refined cover of that cell with per-point radii.
fn refined_cover(
    ifs: &IfsSpec,
    approx: &AttractorApprox,
    sub: &SubCells,
    rank: usize,
) -> Result<Vec<(Point, f64)>> {
    let addr = approx.address_of(rank);
    let base = approx.error_radius(rank);
    let mut out = Vec::with_capacity(sub.len());
    for (p, r) in sub.points.iter().zip(&sub.ratios) {
        let mut q = p.clone();
        for &sym in addr.symbols().iter().rev() {
            q = ifs.map_for_symbol(sym)?.apply(&q)?;
        }
        out.push((q, base * r));
    }
    Ok(out)
}

/// True when every refined sub-cell of `rank` keeps a positive gap from
/// every refined sub-cell of every candidate cover cell. Candidates with
/// bitwise-identical geometry are collapsed first.
fn refined_clear_of_cells(
    ifs: &IfsSpec,
    approx: &AttractorApprox,
    sub: &SubCells,
    rank: usize,
    candidates: &[usize],
) -> Result<bool> {
    let mut seen = HashSet::new();
    let mut unique = Vec::new();
    for &c in candidates {
        let key = (
            point_key(&approx.point(c)),
            approx.error_radius(c).to_bits(),
        );
        if seen.insert(key) {
            unique.push(c);
        }
    }
    let pairs = (sub.len() as u64)
        .saturating_mul(sub.len() as u64)
        .saturating_mul(unique.len() as u64);
    if pairs > REFINE_PAIR_CAP {
        return Ok(false);
    }
    let own = refined_cover(ifs, approx, sub, rank)?;
    for c in unique {
        let other = refined_cover(ifs, approx, sub, c)?;
        for (pa, ea) in &own {
            for (pb, eb) in &other {
                if point_distance(pa, pb)? <= ea + eb {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// True when every refined sub-cell of `rank` keeps a positive gap from
/// every listed fixed ball.
fn refined_clear_of_balls(
    ifs: &IfsSpec,
    approx: &AttractorApprox,
    sub: &SubCells,
    rank: usize,
    balls: &[(Point, f64)],
) -> Result<bool> {
    let pairs = (sub.len() as u64).saturating_mul(balls.len() as u64);
    if pairs > REFINE_PAIR_CAP {
        return Ok(false);
    }
    let own = refined_cover(ifs, approx, sub, rank)?;
    for (pa, ea) in &own {
        for (pb, eb) in balls {
            if point_distance(pa, pb)? <= ea + eb {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Branch (or deeper cylinder) mass estimate. The certified lower bound is
/// the analytic cylinder mass: a foreign cell whose ball lands inside the
/// branch ball cover still cannot be credited to the branch set itself, so
/// such mass is reported separately and only widens the upper bound.
#[derive(Clone, Debug)]
pub struct BranchMeasure {
    pub estimate: IntervalEstimate,
    /// Cylinder mass of the prefix, the a-priori lower bound.
    pub analytic_lower: f64,
    /// True when the floating cell-by-cell sum fell below the analytic
    /// value and the lower bound was clamped up to it.
    pub clamped: bool,
    /// Mass of foreign cells whose balls sit inside the branch cover.
    pub foreign_inside: f64,
    pub foreign_inside_cells: u64,
    /// Mass of foreign cells that stayed undecided after refinement.
    pub straddle_mass: f64,
}

/// Interval estimate of the mass of the cylinder image named by `prefix`.
pub fn mu_prefix(
    ifs: &IfsSpec,
    approx: &AttractorApprox,
    table: &RatioTable,
    prefix: &Address,
    refine: u32,
) -> Result<BranchMeasure> {
    let depth = approx.depth();
    if prefix.len() as u32 > depth {
        return Err(Error::Invalid(format!(
            "prefix length {} exceeds depth {}",
            prefix.len(),
            depth
        )));
    }
    let n = ifs.n_maps();
    let mut block_len = approx.len();
    for _ in 0..prefix.len() {
        block_len /= n as usize;
    }
    let start = rank_of(prefix, n) as usize * block_len;
    let cover = CoverIndex::build(approx, start, block_len);
    let sub = if refine > 0 {
        Some(SubCells::build(ifs, approx.center(), refine)?)
    } else {
        None
    };

    let mut own_sum = 0.0;
    let mut foreign_inside = 0.0;
    let mut foreign_inside_cells = 0u64;
    let mut straddle_mass = 0.0;
    let mut straddle_cells = 0u64;
    let mut scratch = Vec::new();
    let mut near = Vec::new();
    for rank in 0..approx.len() {
        let mass = table.cylinder_measure(&approx.address_of(rank));
        if rank >= start && rank < start + block_len {
            own_sum += mass;
            continue;
        }
        let p = approx.point(rank);
        let proxy = point_proxy(&p);
        let e = approx.error_radius(rank);
        match cover.classify(approx, &p, &proxy, e, &mut scratch, &mut near)? {
            RegionClass::Inside => {
                foreign_inside += mass;
                foreign_inside_cells += 1;
            }
            RegionClass::Straddle => {
                let cleared = match &sub {
                    Some(sub) => refined_clear_of_cells(ifs, approx, sub, rank, &near)?,
                    None => false,
                };
                if !cleared {
                    straddle_mass += mass;
                    straddle_cells += 1;
                }
            }
            RegionClass::Outside => {}
        }
    }

    let analytic_lower = table.cylinder_measure(prefix);
    let clamped = own_sum < analytic_lower;
    let lower = (own_sum.min(analytic_lower) - FP_SLACK).max(0.0);
    let upper =
        (own_sum.max(analytic_lower) + foreign_inside + straddle_mass + FP_SLACK).min(1.0);
    Ok(BranchMeasure {
        estimate: IntervalEstimate {
            lower,
            upper,
            depth,
            region: format!("branch {}", prefix),
            inside_cells: block_len as u64,
            straddle_cells,
        },
        analytic_lower,
        clamped,
        foreign_inside,
        foreign_inside_cells,
        straddle_mass,
    })
}

/// Interval estimate of a single branch mass.
pub fn mu_branch(
    ifs: &IfsSpec,
    approx: &AttractorApprox,
    table: &RatioTable,
    branch: u8,
    refine: u32,
) -> Result<BranchMeasure> {
    mu_prefix(ifs, approx, table, &Address::new(vec![branch], ifs.n_maps())?, refine)
}

/// Upper bound on the mass of a pairwise branch intersection. The lower
/// bound is always zero: a point intersection carries no mass and positive
/// overlap mass is never certified at finite depth.
pub fn mu_overlap(
    ifs: &IfsSpec,
    approx: &AttractorApprox,
    table: &RatioTable,
    a: u8,
    b: u8,
    refine: u32,
) -> Result<IntervalEstimate> {
    if a == b || a == 0 || b == 0 || a > ifs.n_maps() || b > ifs.n_maps() {
        return Err(Error::Invalid(format!("bad branch pair ({a}, {b})")));
    }
    let block_len = approx.len() / ifs.n_maps() as usize;
    let start_a = (a as usize - 1) * block_len;
    let start_b = (b as usize - 1) * block_len;
    let cover_a = CoverIndex::build(approx, start_a, block_len);
    let cover_b = CoverIndex::build(approx, start_b, block_len);
    let sub = if refine > 0 {
        Some(SubCells::build(ifs, approx.center(), refine)?)
    } else {
        None
    };

    let mut upper = 0.0;
    let mut counted = 0u64;
    let mut scratch = Vec::new();
    let mut near = Vec::new();
    for rank in 0..approx.len() {
        let p = approx.point(rank);
        let proxy = point_proxy(&p);
        let e = approx.error_radius(rank);
        let mut meets = true;
        for (cover, start) in [(&cover_a, start_a), (&cover_b, start_b)] {
            if rank >= start && rank < start + block_len {
                continue;
            }
            match cover.classify(approx, &p, &proxy, e, &mut scratch, &mut near)? {
                RegionClass::Inside => {}
                RegionClass::Outside => {
                    meets = false;
                }
                RegionClass::Straddle => {
                    let cleared = match &sub {
                        Some(sub) => refined_clear_of_cells(ifs, approx, sub, rank, &near)?,
                        None => false,
                    };
                    if cleared {
                        meets = false;
                    }
                }
            }
            if !meets {
                break;
            }
        }
        if meets {
            upper += table.cylinder_measure(&approx.address_of(rank));
            counted += 1;
        }
    }
    Ok(IntervalEstimate {
        lower: 0.0,
        upper: upper.min(1.0),
        depth: approx.depth(),
        region: format!("overlap {a},{b}"),
        inside_cells: 0,
        straddle_cells: counted,
    })
}

/// Upper bound on the boundary mass: every cell that can meet the inflated
/// witness cover. The witness balls already cover the boundary, so the tau
/// inflation is pure slack. Lower bound is always zero.
pub fn mu_boundary(
    ifs: &IfsSpec,
    approx: &AttractorApprox,
    table: &RatioTable,
    boundary: &BoundaryApprox,
    refine: u32,
) -> Result<IntervalEstimate> {
    let region = format!("boundary tau={:e}", boundary.tau);
    if boundary.is_empty() {
        return Ok(IntervalEstimate {
            lower: 0.0,
            upper: 0.0,
            depth: approx.depth(),
            region,
            inside_cells: 0,
            straddle_cells: 0,
        });
    }
    let index = boundary
        .spatial_index()
        .expect("nonempty boundary always carries an index");
    let tau = boundary.tau;
    let max_rad = boundary.max_radius() + tau;
    let sub = if refine > 0 {
        Some(SubCells::build(ifs, approx.center(), refine)?)
    } else {
        None
    };

    let mut upper = 0.0;
    let mut inside_cells = 0u64;
    let mut counted = 0u64;
    let mut scratch = Vec::new();
    for rank in 0..approx.len() {
        let p = approx.point(rank);
        let proxy = point_proxy(&p);
        let e = approx.error_radius(rank);
        index.candidates_within(&proxy, e + max_rad, &mut scratch);
        let mut inside = false;
        let mut near: Vec<(Point, f64)> = Vec::new();
        for &w in scratch.iter() {
            let wp = boundary.point(w as usize);
            let rad = boundary.witness(w as usize).radius + tau;
            let d = point_distance(&p, &wp)?;
            if d + e <= rad {
                inside = true;
                break;
            }
            if d <= e + rad {
                near.push((wp, rad));
            }
        }
        if inside {
            upper += table.cylinder_measure(&approx.address_of(rank));
            inside_cells += 1;
            counted += 1;
            continue;
        }
        if near.is_empty() {
            continue;
        }
        let cleared = match &sub {
            Some(sub) => refined_clear_of_balls(ifs, approx, sub, rank, &near)?,
            None => false,
        };
        if !cleared {
            upper += table.cylinder_measure(&approx.address_of(rank));
            counted += 1;
        }
    }
    Ok(IntervalEstimate {
        lower: 0.0,
        upper: upper.min(1.0),
        depth: approx.depth(),
        region,
        inside_cells,
        straddle_cells: counted - inside_cells,
    })
}

/// Branch masses for every map plus overlap uppers for every pair, from one
/// classification pass per cell and cover.
#[derive(Clone, Debug)]
pub struct BranchMeasures {
    pub branches: Vec<BranchMeasure>,
    /// Upper-triangle overlap estimates keyed (a, b) with a < b, 1-based.
    pub overlaps: Vec<(u8, u8, IntervalEstimate)>,
}

impl BranchMeasures {
    pub fn overlap(&self, a: u8, b: u8) -> Option<&IntervalEstimate> {
        let key = if a < b { (a, b) } else { (b, a) };
        self.overlaps
            .iter()
            .find(|(x, y, _)| (*x, *y) == key)
            .map(|(_, _, e)| e)
    }

    pub fn max_branch_width(&self) -> f64 {
        self.branches
            .iter()
            .map(|b| b.estimate.width())
            .fold(0.0, f64::max)
    }

    pub fn max_overlap_upper(&self) -> f64 {
        self.overlaps
            .iter()
            .map(|(_, _, e)| e.upper)
            .fold(0.0, f64::max)
    }
}

/// One pass over all cells classifying each against every branch cover.
/// Produces the same numbers as per-branch `mu_branch` and per-pair
/// `mu_overlap` calls at a fraction of the cost.
pub fn branch_measures(
    ifs: &IfsSpec,
    approx: &AttractorApprox,
    table: &RatioTable,
    refine: u32,
) -> Result<BranchMeasures> {
    let n = ifs.n_maps() as usize;
    let block_len = approx.len() / n;
    let covers: Vec<CoverIndex> = (0..n)
        .map(|b| CoverIndex::build(approx, b * block_len, block_len))
        .collect();
    let sub = if refine > 0 {
        Some(SubCells::build(ifs, approx.center(), refine)?)
    } else {
        None
    };

    let mut own_sum = vec![0.0f64; n];
    let mut foreign_inside = vec![0.0f64; n];
    let mut foreign_cells = vec![0u64; n];
    let mut straddle_mass = vec![0.0f64; n];
    let mut straddle_cells = vec![0u64; n];
    let mut overlap_upper = vec![0.0f64; n * n];
    let mut overlap_cells = vec![0u64; n * n];
    let mut scratch = Vec::new();
    let mut near = Vec::new();
    let mut meets = vec![false; n];
    for rank in 0..approx.len() {
        let own = rank / block_len;
        let mass = table.cylinder_measure(&approx.address_of(rank));
        own_sum[own] += mass;
        let p = approx.point(rank);
        let proxy = point_proxy(&p);
        let e = approx.error_radius(rank);
        for b in 0..n {
            if b == own {
                meets[b] = true;
                continue;
            }
            meets[b] = match covers[b].classify(approx, &p, &proxy, e, &mut scratch, &mut near)? {
                RegionClass::Inside => {
                    foreign_inside[b] += mass;
                    foreign_cells[b] += 1;
                    true
                }
                RegionClass::Outside => false,
                RegionClass::Straddle => {
                    let cleared = match &sub {
                        Some(sub) => refined_clear_of_cells(ifs, approx, sub, rank, &near)?,
                        None => false,
                    };
                    if !cleared {
                        straddle_mass[b] += mass;
                        straddle_cells[b] += 1;
                    }
                    !cleared
                }
            };
        }
        for a in 0..n {
            if !meets[a] {
                continue;
            }
            for b in (a + 1)..n {
                if meets[b] {
                    overlap_upper[a * n + b] += mass;
                    overlap_cells[a * n + b] += 1;
                }
            }
        }
    }

    let depth = approx.depth();
    let mut branches = Vec::with_capacity(n);
    for b in 0..n {
        let prefix = Address::new(vec![b as u8 + 1], ifs.n_maps())?;
        let analytic_lower = table.cylinder_measure(&prefix);
        let clamped = own_sum[b] < analytic_lower;
        let lower = (own_sum[b].min(analytic_lower) - FP_SLACK).max(0.0);
        branches.push(BranchMeasure {
            estimate: IntervalEstimate {
                lower,
                upper: (own_sum[b].max(analytic_lower)
                    + foreign_inside[b]
                    + straddle_mass[b]
                    + FP_SLACK)
                    .min(1.0),
                depth,
                region: format!("branch {}", prefix),
                inside_cells: block_len as u64,
                straddle_cells: straddle_cells[b],
            },
            analytic_lower,
            clamped,
            foreign_inside: foreign_inside[b],
            foreign_inside_cells: foreign_cells[b],
            straddle_mass: straddle_mass[b],
        });
    }
    let mut overlaps = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            overlaps.push((
                a as u8 + 1,
                b as u8 + 1,
                IntervalEstimate {
                    lower: 0.0,
                    upper: overlap_upper[a * n + b].min(1.0),
                    depth,
                    region: format!("overlap {},{}", a + 1, b + 1),
                    inside_cells: 0,
                    straddle_cells: overlap_cells[a * n + b],
                },
            ));
        }
    }
    Ok(BranchMeasures { branches, overlaps })
}

/// The limit point of the eventually-constant symbol sequence
/// prefix, tail, tail, ... together with the radius of its prefix cell.
pub fn address_point(ifs: &IfsSpec, prefix: &Address, tail: u8) -> Result<(Point, f64)> {
    let mut p = ifs.map_for_symbol(tail)?.fixed_point()?;
    let mut ratio = 1.0;
    for &sym in prefix.symbols().iter().rev() {
        let map = ifs.map_for_symbol(sym)?;
        p = map.apply(&p)?;
        ratio *= map.ratio();
    }
    let (_, big_r) = crate::attractor::invariant_ball(ifs)?;
    Ok((p, ratio * big_r))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalingVerdict {
    Consistent,
    Inconsistent,
    Indeterminate,
}

/// Comparison of the composite cylinder mass against the prefix-scaled part
/// mass: the two intervals must intersect when branch masses scale.
#[derive(Clone, Debug)]
pub struct ScalingCheck {
    pub composite: IntervalEstimate,
    pub part: IntervalEstimate,
    pub factor: f64,
    pub scaled_lower: f64,
    pub scaled_upper: f64,
    pub verdict: ScalingVerdict,
}

/// Check that mass(prefix + cell) is consistent with
/// factor(prefix) * mass(cell). Verdict is indeterminate when the composite
/// cylinder has fewer than two levels of resolution below it.
pub fn check_scaling(
    ifs: &IfsSpec,
    approx: &AttractorApprox,
    table: &RatioTable,
    prefix: &Address,
    cell: &Address,
    refine: u32,
) -> Result<ScalingCheck> {
    let composite_addr = prefix.concat(cell);
    let composite = mu_prefix(ifs, approx, table, &composite_addr, refine)?.estimate;
    let part = mu_prefix(ifs, approx, table, cell, refine)?.estimate;
    let factor = table.cylinder_measure(prefix);
    let scaled_lower = factor * part.lower;
    let scaled_upper = factor * part.upper;
    let verdict = if approx.depth() < composite_addr.len() as u32 + 2 {
        ScalingVerdict::Indeterminate
    } else if composite.lower <= scaled_upper && scaled_lower <= composite.upper {
        ScalingVerdict::Consistent
    } else {
        ScalingVerdict::Inconsistent
    };
    Ok(ScalingCheck {
        composite,
        part,
        factor,
        scaled_lower,
        scaled_upper,
        verdict,
    })
}
