//! Overlap witnesses and the similarity boundary.
//!
//! Two depth-n cells from different first symbols can only intersect when
//! their representatives lie within the sum of the cell radii. Every such
//! pair is a witness; pulling a witness back through its first map lands on
//! the boundary side of that branch. The witness balls form an outer cover
//! of the boundary, which supports the derived verdicts: interior
//! complement, pullback stability, and the tile comparison.

use crate::attractor::{AttractorApprox, PointSet};
use crate::codespace::Address;
use crate::error::{Error, Result};
use crate::grid::{CellCover, SpatialIndex};
use crate::spaces::{Backend, IfsSpec, Point};
use std::collections::BTreeSet;

/// Merge tolerance used by the scan; pairs this close beyond exact touching
/// still count. Four fine-scale cell radii.
pub fn default_tau(ifs: &IfsSpec, approx: &AttractorApprox) -> f64 {
    4.0 * ifs.r_max().powi(approx.depth() as i32) * approx.ball_radius()
}

// ---------------------------------------------------------------------------
// Overlap scan

/// Cell pair from two branches whose balls meet within the tolerance.
#[derive(Clone, PartialEq, Debug)]
pub struct OverlapWitness {
    pub branch_a: u8,
    pub branch_b: u8,
    pub rank_a: usize,
    pub rank_b: usize,
    pub distance: f64,
}

#[derive(Clone, Debug)]
pub struct OverlapScan {
    pub tau: f64,
    pub depth: u32,
    pub n_maps: u8,
    pub witnesses: Vec<OverlapWitness>,
}

impl OverlapScan {
    pub fn pair_count(&self, a: u8, b: u8) -> usize {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.witnesses.iter().filter(|w| w.branch_a == a && w.branch_b == b).count()
    }

    pub fn pair_is_empty(&self, a: u8, b: u8) -> bool {
        self.pair_count(a, b) == 0
    }
}

fn branch_block(approx: &AttractorApprox) -> Result<usize> {
    if approx.depth() == 0 {
        return Err(Error::Invalid("overlap scan needs depth at least 1".into()));
    }
    Ok(approx.len() / approx.n_maps() as usize)
}

/// All cross-branch cell pairs within touching tolerance, grid accelerated.
/// Witnesses are ordered by branch pair, then rank, so runs are repeatable.
pub fn overlap_pairs(approx: &AttractorApprox, tau: f64) -> Result<OverlapScan> {
    let block = branch_block(approx)?;
    let n = approx.n_maps();
    let points = approx.points();
    let mut witnesses = Vec::new();
    let mut candidates = Vec::new();
    for a in 1..=n {
        let a_start = (a as usize - 1) * block;
        for b in (a + 1)..=n {
            let b_start = (b as usize - 1) * block;
            let e_a_max = slice_max(&approx.radii()[a_start..a_start + block]);
            let e_b_max = slice_max(&approx.radii()[b_start..b_start + block]);
            let radius = e_a_max + e_b_max + tau;
            let proxies: Vec<_> = (0..block).map(|k| points.proxy(b_start + k)).collect();
            let index = SpatialIndex::build(radius, points.proxy_dim(), proxies);
            for ka in 0..block {
                let rank_a = a_start + ka;
                index.candidates_within(&points.proxy(rank_a), radius, &mut candidates);
                for &kb in &candidates {
                    let rank_b = b_start + kb as usize;
                    let d = points.cross_distance(rank_a, points, rank_b)?;
                    let bound = approx.error_radius(rank_a) + approx.error_radius(rank_b) + tau;
                    if d <= bound {
                        witnesses.push(OverlapWitness {
                            branch_a: a,
                            branch_b: b,
                            rank_a,
                            rank_b,
                            distance: d,
                        });
                    }
                }
            }
        }
    }
    Ok(OverlapScan { tau, depth: approx.depth(), n_maps: n, witnesses })
}

/// Quadratic reference scan; must list exactly the same witnesses.
pub fn overlap_pairs_brute(approx: &AttractorApprox, tau: f64) -> Result<OverlapScan> {
    let block = branch_block(approx)?;
    let n = approx.n_maps();
    let points = approx.points();
    let mut witnesses = Vec::new();
    for a in 1..=n {
        let a_start = (a as usize - 1) * block;
        for b in (a + 1)..=n {
            let b_start = (b as usize - 1) * block;
            for ka in 0..block {
                let rank_a = a_start + ka;
                for kb in 0..block {
                    let rank_b = b_start + kb;
                    let d = points.cross_distance(rank_a, points, rank_b)?;
                    let bound = approx.error_radius(rank_a) + approx.error_radius(rank_b) + tau;
                    if d <= bound {
                        witnesses.push(OverlapWitness {
                            branch_a: a,
                            branch_b: b,
                            rank_a,
                            rank_b,
                            distance: d,
                        });
                    }
                }
            }
        }
    }
    Ok(OverlapScan { tau, depth: approx.depth(), n_maps: n, witnesses })
}

fn slice_max(xs: &[f64]) -> f64 {
    xs.iter().cloned().fold(0.0f64, f64::max)
}

// ---------------------------------------------------------------------------
// Similarity boundary

/// Pullback of one overlapping cell through its branch map. The true
/// boundary piece contributed by this cell lies within `radius` of `point`.
#[derive(Clone, Debug)]
pub struct BoundaryWitness {
    /// Map the cell was pulled back through.
    pub branch: u8,
    /// The other branch of the overlap pair that produced this witness.
    pub other: u8,
    /// Address of the pulled-back cell, one symbol shorter than the depth.
    pub tail: Address,
    pub radius: f64,
}

#[derive(Clone, Debug)]
pub struct BoundaryApprox {
    pub tau: f64,
    pub depth: u32,
    witnesses: Vec<BoundaryWitness>,
    points: PointSet,
}

impl BoundaryApprox {
    pub fn len(&self) -> usize {
        self.witnesses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.witnesses.is_empty()
    }

    pub fn witnesses(&self) -> &[BoundaryWitness] {
        &self.witnesses
    }

    pub fn witness(&self, index: usize) -> &BoundaryWitness {
        &self.witnesses[index]
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn point(&self, index: usize) -> Point {
        self.points.point(index)
    }

    pub fn max_radius(&self) -> f64 {
        self.witnesses.iter().map(|w| w.radius).fold(0.0f64, f64::max)
    }

    pub fn spatial_index(&self) -> Option<SpatialIndex> {
        if self.is_empty() {
            return None;
        }
        Some(self.points.spatial_index(self.points.auto_cell()))
    }
}

/// Pull every overlap witness back through both of its branch maps and
/// deduplicate by pulled-back cell. Order follows the scan.
pub fn similarity_boundary(
    ifs: &IfsSpec,
    approx: &AttractorApprox,
    scan: &OverlapScan,
) -> Result<BoundaryApprox> {
    let mut seen: BTreeSet<(u8, Vec<u8>)> = BTreeSet::new();
    let mut witnesses = Vec::new();
    let mut points = match approx.points().backend() {
        Backend::Euclidean => PointSet::empty_euclidean(approx.points().dim().unwrap_or(0)),
        Backend::Sequence => PointSet::empty_sequence(),
    };
    for w in &scan.witnesses {
        for (branch, other, rank) in
            [(w.branch_a, w.branch_b, w.rank_a), (w.branch_b, w.branch_a, w.rank_b)]
        {
            let addr = approx.address_of(rank);
            let tail = Address::from_symbols(&addr.symbols()[1..]);
            if !seen.insert((branch, tail.symbols().to_vec())) {
                continue;
            }
            let map = ifs.map_for_symbol(branch)?;
            let point = map.invert(&approx.point(rank))?;
            let radius = approx.error_radius(rank) / map.ratio();
            points.push(&point)?;
            witnesses.push(BoundaryWitness { branch, other, tail, radius });
        }
    }
    Ok(BoundaryApprox { tau: scan.tau, depth: approx.depth(), witnesses, points })
}

// ---------------------------------------------------------------------------
// Clustering

/// Connected component under single linkage distance.
#[derive(Clone, Debug)]
pub struct WitnessCluster {
    /// Witness indices, ascending.
    pub members: Vec<usize>,
}

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
    }
}

/// Single-linkage clusters of boundary witness points at the given linkage
/// distance. Clusters are ordered by their smallest member index.
pub fn cluster_witnesses(boundary: &BoundaryApprox, linkage: f64) -> Vec<WitnessCluster> {
    let n = boundary.len();
    if n == 0 {
        return Vec::new();
    }
    let points = boundary.points();
    let index = points.spatial_index(linkage.max(1e-300));
    let mut uf = UnionFind::new(n);
    let mut candidates = Vec::new();
    for i in 0..n {
        index.candidates_within(&points.proxy(i), linkage, &mut candidates);
        for &j in &candidates {
            let j = j as usize;
            if j <= i {
                continue;
            }
            let d = points.cross_distance(i, points, j).expect("same set");
            if d <= linkage {
                uf.union(i as u32, j as u32);
            }
        }
    }
    let mut roots: Vec<u32> = (0..n as u32).map(|i| uf.find(i)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (roots[i], i));
    let mut clusters: Vec<WitnessCluster> = Vec::new();
    let mut by_root: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
    for i in 0..n {
        by_root.entry(roots[i]).or_default().push(i);
    }
    for (_, members) in by_root {
        clusters.push(WitnessCluster { members });
    }
    clusters.sort_by_key(|c| c.members[0]);
    roots.clear();
    clusters
}

/// Largest distance from any member of the cluster to the anchor point.
pub fn cluster_spread(
    boundary: &BoundaryApprox,
    cluster: &WitnessCluster,
    anchor: &Point,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for &m in &cluster.members {
        worst = worst.max(boundary.points().distance_to_point(m, anchor)?);
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Interior complement

/// Flags the representatives that stay clear of every witness ball by the
/// given margin factor; those are interior in the sense that no detected
/// overlap reaches them.
pub fn interior_flags(
    approx: &AttractorApprox,
    boundary: &BoundaryApprox,
    margin_factor: f64,
) -> Vec<bool> {
    let n = approx.len();
    if boundary.is_empty() {
        return vec![true; n];
    }
    let bpoints = boundary.points();
    let max_margin =
        margin_factor * (boundary.tau + boundary.max_radius() + approx.max_error());
    let index = bpoints.spatial_index(max_margin.max(1e-300));
    let mut flags = vec![true; n];
    let mut candidates = Vec::new();
    let points = approx.points();
    for rank in 0..n {
        index.candidates_within(&points.proxy(rank), max_margin, &mut candidates);
        for &m in &candidates {
            let m = m as usize;
            let margin = margin_factor
                * (boundary.tau + boundary.witness(m).radius + approx.error_radius(rank));
            let d = points.cross_distance(rank, bpoints, m).expect("compatible sets");
            if d <= margin {
                flags[rank] = false;
                break;
            }
        }
    }
    flags
}

/// Ranks of the interior representatives at margin factor one.
pub fn complement_u(approx: &AttractorApprox, boundary: &BoundaryApprox) -> Vec<usize> {
    complement_u_with_margin(approx, boundary, 1.0)
}

pub fn complement_u_with_margin(
    approx: &AttractorApprox,
    boundary: &BoundaryApprox,
    margin_factor: f64,
) -> Vec<usize> {
    interior_flags(approx, boundary, margin_factor)
        .iter()
        .enumerate()
        .filter_map(|(rank, &inside)| inside.then_some(rank))
        .collect()
}

/// Independent route to the interior complement, with no witness input: a
/// representative is kept when one of its map images certifiably clears
/// every foreign branch cover by more than `tau`. The witness route and
/// this one may disagree only for representatives near a boundary witness,
/// within roughly twice the scan tolerance.
pub fn complement_u_exclusion(
    ifs: &IfsSpec,
    approx: &AttractorApprox,
    tau: f64,
) -> Result<Vec<usize>> {
    let block = branch_block(approx)?;
    let n = ifs.n_maps() as usize;
    let points = approx.points();
    let radius = tau + 3.0 * approx.max_error();
    let branch_index: Vec<SpatialIndex> = (0..n)
        .map(|b| {
            let proxies = (b * block..(b + 1) * block).map(|r| points.proxy(r)).collect();
            SpatialIndex::build(radius.max(1e-12), points.proxy_dim(), proxies)
        })
        .collect();
    let mut keep = Vec::new();
    let mut scratch = Vec::new();
    'rank: for rank in 0..approx.len() {
        let p = points.point(rank);
        let e_p = approx.error_radius(rank);
        'map: for i in 0..n {
            let map = ifs.map_for_symbol(i as u8 + 1)?;
            let image = map.apply(&p)?;
            let e_img = e_p * map.ratio();
            let proxy = match &image {
                Point::Euclidean(c) => crate::grid::euclidean_proxy(c),
                Point::Sequence(s) => crate::grid::sequence_proxy(s),
            };
            for (j, index) in branch_index.iter().enumerate() {
                if j == i {
                    continue;
                }
                index.candidates_within(&proxy, radius, &mut scratch);
                for &local in scratch.iter() {
                    let r = j * block + local as usize;
                    let d = points.distance_to_point(r, &image)?;
                    if d - approx.error_radius(r) - e_img <= tau {
                        continue 'map;
                    }
                }
            }
            keep.push(rank);
            continue 'rank;
        }
    }
    Ok(keep)
}

// ---------------------------------------------------------------------------
// Inverse invariance

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum InvarianceStatus {
    Invariant,
    Violated,
    Indeterminate,
}

impl InvarianceStatus {
    pub fn name(self) -> &'static str {
        match self {
            InvarianceStatus::Invariant => "invariant",
            InvarianceStatus::Violated => "violated",
            InvarianceStatus::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Clone, Debug)]
pub struct InvarianceViolation {
    pub map: u8,
    pub witness: usize,
    pub preimage: Point,
    pub boundary_distance: f64,
}

#[derive(Clone, Debug)]
pub struct InvarianceReport {
    pub status: InvarianceStatus,
    /// Pullbacks inside the set farther than this from the witness cover
    /// count as violations.
    pub threshold: f64,
    /// Largest witness cover distance seen over in-set pullbacks.
    pub max_deviation: f64,
    pub violations: Vec<InvarianceViolation>,
    pub checked: usize,
    pub outside: usize,
    pub ambiguous: usize,
}

/// Tests whether pulling the boundary back through each map stays on the
/// boundary wherever it stays in the set. Each witness point is pulled
/// through every inverse map; preimages clearly outside the set are
/// discarded, in-set preimages must land near the witness cover.
pub fn check_inverse_invariance(
    ifs: &IfsSpec,
    approx: &AttractorApprox,
    boundary: &BoundaryApprox,
) -> Result<InvarianceReport> {
    let threshold =
        (boundary.tau + 3.0 * approx.max_error()) / (ifs.r_min() * ifs.r_min());
    let mut report = InvarianceReport {
        status: InvarianceStatus::Invariant,
        threshold,
        max_deviation: 0.0,
        violations: Vec::new(),
        checked: 0,
        outside: 0,
        ambiguous: 0,
    };
    if boundary.is_empty() {
        return Ok(report);
    }
    let set = approx.points();
    let set_index = set.spatial_index(set.auto_cell());
    let bpoints = boundary.points();
    let b_index = bpoints.spatial_index(bpoints.auto_cell());
    let in_margin = approx.max_error() + boundary.tau;
    let out_margin = 3.0 * in_margin;
    for symbol in 1..=ifs.n_maps() {
        let map = ifs.map_for_symbol(symbol)?;
        for m in 0..boundary.len() {
            let x = match map.invert(&boundary.point(m)) {
                Ok(x) => x,
                Err(Error::PreimageOutsideSpace { .. }) => {
                    report.outside += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let d_set = set
                .nearest(&set_index, &x)?
                .map(|(_, d)| d)
                .unwrap_or(f64::INFINITY);
            if d_set > out_margin {
                report.outside += 1;
                continue;
            }
            let d_boundary = bpoints
                .nearest(&b_index, &x)?
                .map(|(_, d)| d)
                .unwrap_or(f64::INFINITY);
            if d_set <= in_margin {
                report.max_deviation = report.max_deviation.max(d_boundary);
            }
            if d_boundary <= threshold {
                report.checked += 1;
            } else if d_set <= in_margin {
                report.checked += 1;
                report.violations.push(InvarianceViolation {
                    map: symbol,
                    witness: m,
                    preimage: x,
                    boundary_distance: d_boundary,
                });
            } else {
                // Far from the cover but only weakly attached to the set;
                // neither a confirmation nor a violation.
                report.ambiguous += 1;
            }
        }
    }
    report.status = if !report.violations.is_empty() {
        InvarianceStatus::Violated
    } else if report.ambiguous > 0 {
        InvarianceStatus::Indeterminate
    } else {
        InvarianceStatus::Invariant
    };
    Ok(report)
}

// ---------------------------------------------------------------------------
// Tile comparison

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BoundaryRelation {
    EqualAtResolution,
    SimilarityInsideTopological,
    TopologicalInsideSimilarity,
    Mixed,
}

impl BoundaryRelation {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryRelation::EqualAtResolution => "equal",
            BoundaryRelation::SimilarityInsideTopological => "similarity-inside-topological",
            BoundaryRelation::TopologicalInsideSimilarity => "topological-inside-similarity",
            BoundaryRelation::Mixed => "mixed",
        }
    }
}

#[derive(Clone, Debug)]
pub struct TileCheck {
    pub alpha: f64,
    pub ambient: usize,
    pub cell: f64,
    pub topological_cells: usize,
    pub similarity_cells: usize,
    pub relation: BoundaryRelation,
}

/// Compares the topological boundary of a full-dimensional attractor with
/// the similarity boundary at cell resolution. The topological side is the
/// set of occupied cells with an unoccupied face neighbor; the similarity
/// side is the set of cells holding witness points. Containment slack
/// follows the witness localization bound (2 e_max + tau) / r_min.
pub fn tile_topological_boundary(
    ifs: &IfsSpec,
    approx: &AttractorApprox,
    boundary: &BoundaryApprox,
    alpha: f64,
) -> Result<TileCheck> {
    let ambient = match ifs.dim() {
        Some(d) => d,
        None => return Err(Error::EuclideanOnly),
    };
    if ambient > 4 {
        return Err(Error::Invalid("tile comparison supports dimension at most 4".into()));
    }
    if (alpha - ambient as f64).abs() > 1e-6 {
        return Err(Error::NotATile { alpha, ambient });
    }
    let cell = 2.0 * approx.max_error();
    let spread = (2.0 * approx.max_error() + boundary.tau) / ifs.r_min();
    let slack = (spread / cell).ceil() as i64 + 1;
    let cover = approx.points().cell_cover(cell);
    let topo = cover.exposed_keys();
    let sim_cover = CellCover::from_proxies(
        cell,
        approx.points().proxy_dim(),
        (0..boundary.len()).map(|m| boundary.points().proxy(m)),
    );
    let sim: Vec<[i64; 4]> = sim_cover.keys().cloned().collect();
    let topo_set: BTreeSet<[i64; 4]> = topo.iter().cloned().collect();
    let sim_set: BTreeSet<[i64; 4]> = sim.iter().cloned().collect();
    let dim = approx.points().proxy_dim();
    let sim_in_topo = sim.iter().all(|k| near_cell(&topo_set, k, dim, slack));
    let topo_in_sim = topo.iter().all(|k| near_cell(&sim_set, k, dim, slack));
    let relation = match (sim_in_topo, topo_in_sim) {
        (true, true) => BoundaryRelation::EqualAtResolution,
        (true, false) => BoundaryRelation::SimilarityInsideTopological,
        (false, true) => BoundaryRelation::TopologicalInsideSimilarity,
        (false, false) => BoundaryRelation::Mixed,
    };
    Ok(TileCheck {
        alpha,
        ambient,
        cell,
        topological_cells: topo.len(),
        similarity_cells: sim.len(),
        relation,
    })
}

/// Chebyshev neighborhood membership over the active axes.
fn near_cell(set: &BTreeSet<[i64; 4]>, key: &[i64; 4], dim: usize, slack: i64) -> bool {
    let mut offsets = vec![-slack; dim];
    loop {
        let mut probe = *key;
        for (j, o) in offsets.iter().enumerate() {
            probe[j] += o;
        }
        if set.contains(&probe) {
            return true;
        }
        let mut axis = 0;
        loop {
            if axis == dim {
                return false;
            }
            if offsets[axis] < slack {
                offsets[axis] += 1;
                break;
            }
            offsets[axis] = -slack;
            axis += 1;
        }
    }
}
