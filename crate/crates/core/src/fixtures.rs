//! Built-in example systems.
//!
//! The gallery spans both backends and the main structural cases: touching
//! pieces (koch, sierpinski), edge-sharing tiles (square4 and its rotated
//! variant, segment2), totally disconnected systems (cantor2) and an exact
//! sequence-space system (l1-schief). `random_digit_system` produces small
//! planar lattice digit systems for randomized cross-checks.

use crate::spaces::{IfsSpec, SequenceStep, Similitude};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const GALLERY: [&str; 7] = [
    "koch",
    "square4",
    "square4-rotated",
    "cantor2",
    "segment2",
    "sierpinski",
    "l1-schief",
];

pub fn by_name(name: &str) -> Option<IfsSpec> {
    match name {
        "koch" => Some(koch()),
        "square4" => Some(square4()),
        "square4-rotated" => Some(square4_rotated()),
        "cantor2" => Some(cantor2()),
        "segment2" => Some(segment2()),
        "sierpinski" => Some(sierpinski()),
        "l1-schief" => Some(l1_schief()),
        _ => None,
    }
}

/// Quartic curve generator on the unit interval; adjacent pieces meet in
/// single points.
pub fn koch() -> IfsSpec {
    let s3 = 3f64.sqrt();
    IfsSpec::new(
        "koch",
        vec![
            Similitude::euclidean_2d(1.0 / 3.0, 0.0, 0.0, 0.0).unwrap(),
            Similitude::euclidean_2d(1.0 / 3.0, 60.0, 1.0 / 3.0, 0.0).unwrap(),
            Similitude::euclidean_2d(1.0 / 3.0, -60.0, 0.5, s3 / 6.0).unwrap(),
            Similitude::euclidean_2d(1.0 / 3.0, 0.0, 2.0 / 3.0, 0.0).unwrap(),
        ],
    )
    .unwrap()
}

/// Unit square as four half-scale corner copies; pieces share full edges.
pub fn square4() -> IfsSpec {
    let corners = [[0.0, 1.0], [1.0, 1.0], [0.0, 0.0], [1.0, 0.0]];
    IfsSpec::new(
        "square4",
        corners.iter().map(|c| Similitude::homothety(0.5, c).unwrap()).collect(),
    )
    .unwrap()
}

/// Unit square again, but three pieces carry rotations. The attractor is
/// unchanged while the piece pullbacks move, which breaks the pullback
/// stability of the overlap boundary.
pub fn square4_rotated() -> IfsSpec {
    IfsSpec::new(
        "square4-rotated",
        vec![
            Similitude::homothety(0.5, &[0.0, 1.0]).unwrap(),
            Similitude::homothety(0.5, &[1.0, 1.0])
                .unwrap()
                .rotated_about(-90.0, &[0.75, 0.75])
                .unwrap(),
            Similitude::homothety(0.5, &[0.0, 0.0])
                .unwrap()
                .rotated_about(90.0, &[0.25, 0.25])
                .unwrap(),
            Similitude::homothety(0.5, &[1.0, 0.0])
                .unwrap()
                .rotated_about(180.0, &[0.75, 0.25])
                .unwrap(),
        ],
    )
    .unwrap()
}

/// Middle-thirds Cantor set on the line; the pieces are disjoint.
pub fn cantor2() -> IfsSpec {
    IfsSpec::new(
        "cantor2",
        vec![
            Similitude::homothety(1.0 / 3.0, &[0.0]).unwrap(),
            Similitude::homothety(1.0 / 3.0, &[1.0]).unwrap(),
        ],
    )
    .unwrap()
}

/// Unit interval as two halves meeting at the midpoint.
pub fn segment2() -> IfsSpec {
    IfsSpec::new(
        "segment2",
        vec![
            Similitude::homothety(0.5, &[0.0]).unwrap(),
            Similitude::homothety(0.5, &[1.0]).unwrap(),
        ],
    )
    .unwrap()
}

/// Corner triangle system; pieces meet pairwise in edge midpoints.
pub fn sierpinski() -> IfsSpec {
    let corners = [[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]];
    IfsSpec::new(
        "sierpinski",
        corners.iter().map(|c| Similitude::homothety(0.5, c).unwrap()).collect(),
    )
    .unwrap()
}

/// Sequence-space system with exact dyadic arithmetic. The interleave maps
/// send the space onto even and odd coordinate supports, the affine map
/// shifts into the slab with first coordinate at least one half; the two
/// interleave images share exactly the origin.
pub fn l1_schief() -> IfsSpec {
    IfsSpec::new(
        "l1-schief",
        vec![
            Similitude::sequence(SequenceStep::InterleaveEven),
            Similitude::sequence(SequenceStep::InterleaveOdd),
            Similitude::sequence(SequenceStep::AffineFirst),
        ],
    )
    .unwrap()
}

/// Planar digit system x -> (x + d)/m with digits d drawn from the m-by-m
/// integer lattice. Digits are distinct except for a seeded fraction of
/// systems where one digit is repeated, which forces two identical maps and
/// a full-measure overlap. Similarity dimension is log(count)/log(m).
pub fn random_digit_system(seed: u64) -> IfsSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(2..=4u32);
    let count = rng.random_range(2..=(m * m).min(5)) as usize;
    let mut pool: Vec<[u32; 2]> = (0..m * m).map(|k| [k % m, k / m]).collect();
    let mut digits = Vec::with_capacity(count);
    for _ in 0..count {
        digits.push(pool.remove(rng.random_range(0..pool.len())));
    }
    digits.sort_unstable();
    if rng.random_range(0.0..1.0) < 0.15 {
        digits[1] = digits[0];
    }
    let name = format!(
        "digits2d-m{}-{}",
        m,
        digits
            .iter()
            .map(|d| format!("{}{}", d[0], d[1]))
            .collect::<Vec<_>>()
            .join("-")
    );
    let span = (m - 1) as f64;
    let maps = digits
        .iter()
        .map(|d| {
            // The fixed point of x -> (x + d)/m is d/(m - 1).
            Similitude::homothety(1.0 / m as f64, &[d[0] as f64 / span, d[1] as f64 / span])
                .unwrap()
        })
        .collect();
    IfsSpec::new(name, maps).unwrap()
}
