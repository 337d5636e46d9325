//! Ambient spaces and contracting similitudes.
//!
//! Two backends share one interface: `Euclidean` points are dense f64
//! coordinate vectors under the l2 metric, `Sequence` points are finitely
//! supported exact dyadic sequences under the l1 metric. A similitude
//! satisfies d(f(x), f(y)) = r * d(x, y) with 0 < r < 1.

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;

/// Orthogonality defect at or below this is accepted as-is.
pub const ORTHO_ACCEPT: f64 = 1e-12;
/// Defect in (ORTHO_ACCEPT, ORTHO_REPAIR] is repaired by re-orthonormalization.
pub const ORTHO_REPAIR: f64 = 1e-8;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Backend {
    Euclidean,
    Sequence,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Euclidean => "euclidean",
            Backend::Sequence => "sequence",
        }
    }
}

// ---------------------------------------------------------------------------
// Points

/// Finitely supported sequence with exact dyadic entries, indices 1-based.
/// Invariant: entries sorted by index, values nonzero.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SeqPoint {
    entries: Vec<(u32, Dyadic)>,
}

impl SeqPoint {
    pub fn origin() -> Self {
        SeqPoint { entries: Vec::new() }
    }

    /// Standard unit vector e_index.
    pub fn unit(index: u32) -> Self {
        assert!(index >= 1, "sequence indices are 1-based");
        SeqPoint { entries: vec![(index, Dyadic::ONE)] }
    }

    pub fn from_entries(mut entries: Vec<(u32, Dyadic)>) -> Self {
        entries.retain(|(_, v)| !v.is_zero());
        entries.sort_by_key(|(i, _)| *i);
        for w in entries.windows(2) {
            assert!(w[0].0 < w[1].0, "duplicate sequence index {}", w[0].0);
        }
        for (i, _) in &entries {
            assert!(*i >= 1, "sequence indices are 1-based");
        }
        SeqPoint { entries }
    }

    pub fn entries(&self) -> &[(u32, Dyadic)] {
        &self.entries
    }

    pub fn get(&self, index: u32) -> Dyadic {
        match self.entries.binary_search_by_key(&index, |(i, _)| *i) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => Dyadic::ZERO,
        }
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn l1_norm(&self) -> Dyadic {
        let mut acc = Dyadic::ZERO;
        for (_, v) in &self.entries {
            acc = acc.add(v.abs());
        }
        acc
    }

    /// Exact l1 distance via a merge walk over both supports.
    pub fn l1_distance(&self, other: &SeqPoint) -> Dyadic {
        let (mut i, mut j) = (0usize, 0usize);
        let mut acc = Dyadic::ZERO;
        while i < self.entries.len() || j < other.entries.len() {
            let ia = self.entries.get(i).map(|e| e.0).unwrap_or(u32::MAX);
            let ib = other.entries.get(j).map(|e| e.0).unwrap_or(u32::MAX);
            if ia < ib {
                acc = acc.add(self.entries[i].1.abs());
                i += 1;
            } else if ib < ia {
                acc = acc.add(other.entries[j].1.abs());
                j += 1;
            } else {
                acc = acc.add(self.entries[i].1.sub(other.entries[j].1).abs());
                i += 1;
                j += 1;
            }
        }
        acc
    }

    /// First coordinate; zero when off the support.
    pub fn first_coord(&self) -> Dyadic {
        self.get(1)
    }
}

impl fmt::Display for SeqPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return write!(f, "{{0}}");
        }
        write!(f, "{{")?;
        for (n, (i, v)) in self.entries.iter().enumerate() {
            if n > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}:{}", i, v)?;
        }
        write!(f, "}}")
    }
}

#[derive(Clone, PartialEq, Debug)]
pub enum Point {
    Euclidean(Vec<f64>),
    Sequence(SeqPoint),
}

impl Point {
    pub fn euclidean(coords: Vec<f64>) -> Self {
        Point::Euclidean(coords)
    }

    pub fn sequence(p: SeqPoint) -> Self {
        Point::Sequence(p)
    }

    pub fn backend(&self) -> Backend {
        match self {
            Point::Euclidean(_) => Backend::Euclidean,
            Point::Sequence(_) => Backend::Sequence,
        }
    }

    pub fn as_euclidean(&self) -> Result<&[f64]> {
        match self {
            Point::Euclidean(c) => Ok(c),
            Point::Sequence(_) => Err(Error::BackendMismatch {
                expected: "euclidean",
                got: "sequence",
            }),
        }
    }

    pub fn as_sequence(&self) -> Result<&SeqPoint> {
        match self {
            Point::Sequence(p) => Ok(p),
            Point::Euclidean(_) => Err(Error::BackendMismatch {
                expected: "sequence",
                got: "euclidean",
            }),
        }
    }

    /// Metric of the ambient space: l2 for euclidean, l1 for sequences.
    pub fn distance(&self, other: &Point) -> Result<f64> {
        match (self, other) {
            (Point::Euclidean(a), Point::Euclidean(b)) => {
                if a.len() != b.len() {
                    return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
                }
                Ok(euclid_distance(a, b))
            }
            (Point::Sequence(a), Point::Sequence(b)) => Ok(a.l1_distance(b).to_f64()),
            (a, b) => Err(Error::BackendMismatch {
                expected: a.backend().name(),
                got: b.backend().name(),
            }),
        }
    }
}

pub(crate) fn euclid_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc.sqrt()
}

// ---------------------------------------------------------------------------
// Euclidean maps

/// f(x) = ratio * Q x + t with Q orthogonal.
#[derive(Clone, PartialEq, Debug)]
pub struct EuclideanMap {
    pub ratio: f64,
    pub dim: usize,
    /// Row-major dim x dim orthogonal matrix.
    pub rotation: Vec<f64>,
    pub translation: Vec<f64>,
}

impl EuclideanMap {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.rotation[i * n + j] * x[j];
            }
            out[i] = self.ratio * acc + self.translation[i];
        }
        out
    }

    fn invert(&self, p: &[f64]) -> Vec<f64> {
        // Q orthogonal, so the inverse linear part is the transpose.
        let n = self.dim;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.rotation[j * n + i] * (p[j] - self.translation[j]);
            }
            out[i] = acc / self.ratio;
        }
        out
    }

    fn compose(&self, inner: &EuclideanMap) -> EuclideanMap {
        let n = self.dim;
        let mut rotation = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.rotation[i * n + k] * inner.rotation[k * n + j];
                }
                rotation[i * n + j] = acc;
            }
        }
        let translation = self.apply(&inner.translation);
        EuclideanMap {
            ratio: self.ratio * inner.ratio,
            dim: n,
            rotation,
            translation,
        }
    }

    /// max |Q^T Q - I| over entries.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.rotation[k * n + i] * self.rotation[k * n + j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - target).abs());
            }
        }
        worst
    }

    fn reorthonormalized(&self) -> EuclideanMap {
        let n = self.dim;
        let m = nalgebra::DMatrix::from_row_slice(n, n, &self.rotation);
        let qr = m.qr();
        let mut q = qr.q();
        let r = qr.r();
        // Fix signs so the result is the orthogonal factor closest to Q.
        for j in 0..n {
            if r[(j, j)] < 0.0 {
                for i in 0..n {
                    q[(i, j)] = -q[(i, j)];
                }
            }
        }
        let mut rotation = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                rotation[i * n + j] = q[(i, j)];
            }
        }
        EuclideanMap { rotation, ..self.clone() }
    }

    fn fixed_point(&self) -> Result<Vec<f64>> {
        // Solve (I - r Q) x = t; contraction makes the system nonsingular.
        let n = self.dim;
        let mut m = nalgebra::DMatrix::identity(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] -= self.ratio * self.rotation[i * n + j];
            }
        }
        let t = nalgebra::DVector::from_column_slice(&self.translation);
        let lu = m.lu();
        let x = lu.solve(&t).ok_or(Error::NoSolution("fixed point solve failed"))?;
        Ok(x.iter().copied().collect())
    }
}

// ---------------------------------------------------------------------------
// Sequence maps

/// One generator of the sequence backend. Each step halves every entry and
/// relocates indices injectively; `AffineFirst` additionally adds 1/2 to the
/// first output coordinate, i.e. x_1 -> (x_1 + 1) / 2.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SequenceStep {
    /// x_k moves to index 2k (support on even indices).
    InterleaveEven,
    /// x_k moves to index 2k+1 (support on odd indices >= 3).
    InterleaveOdd,
    /// Identity relocation with the affine first coordinate.
    AffineFirst,
}

impl SequenceStep {
    pub fn name(self) -> &'static str {
        match self {
            SequenceStep::InterleaveEven => "interleave-even",
            SequenceStep::InterleaveOdd => "interleave-odd",
            SequenceStep::AffineFirst => "affine-first",
        }
    }

    fn apply(self, p: &SeqPoint) -> SeqPoint {
        match self {
            SequenceStep::InterleaveEven => SeqPoint {
                entries: p.entries.iter().map(|&(i, v)| (2 * i, v.half())).collect(),
            },
            SequenceStep::InterleaveOdd => SeqPoint {
                entries: p.entries.iter().map(|&(i, v)| (2 * i + 1, v.half())).collect(),
            },
            SequenceStep::AffineFirst => {
                let mut entries: Vec<(u32, Dyadic)> =
                    p.entries.iter().map(|&(i, v)| (i, v.half())).collect();
                let half = Dyadic::new(1, 1);
                match entries.binary_search_by_key(&1, |(i, _)| *i) {
                    Ok(pos) => {
                        let v = entries[pos].1.add(half);
                        if v.is_zero() {
                            entries.remove(pos);
                        } else {
                            entries[pos].1 = v;
                        }
                    }
                    Err(pos) => entries.insert(pos, (1, half)),
                }
                SeqPoint { entries }
            }
        }
    }

    fn invert(self, p: &SeqPoint) -> Result<SeqPoint> {
        match self {
            SequenceStep::InterleaveEven => {
                let mut entries = Vec::with_capacity(p.entries.len());
                for &(i, v) in &p.entries {
                    if i % 2 != 0 {
                        return Err(Error::PreimageOutsideSpace { index: i });
                    }
                    entries.push((i / 2, v.double()));
                }
                Ok(SeqPoint { entries })
            }
            SequenceStep::InterleaveOdd => {
                let mut entries = Vec::with_capacity(p.entries.len());
                for &(i, v) in &p.entries {
                    if i % 2 == 0 || i == 1 {
                        return Err(Error::PreimageOutsideSpace { index: i });
                    }
                    entries.push(((i - 1) / 2, v.double()));
                }
                Ok(SeqPoint { entries })
            }
            SequenceStep::AffineFirst => {
                let first = p.get(1).double().sub(Dyadic::ONE);
                let mut entries: Vec<(u32, Dyadic)> = p
                    .entries
                    .iter()
                    .filter(|(i, _)| *i != 1)
                    .map(|&(i, v)| (i, v.double()))
                    .collect();
                if !first.is_zero() {
                    entries.insert(0, (1, first));
                }
                Ok(SeqPoint { entries })
            }
        }
    }
}

/// Composition chain of sequence steps; ratio = 2^-len. The outermost map is
/// the first element, matching function composition order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SequenceMap {
    pub chain: Vec<SequenceStep>,
}

impl SequenceMap {
    fn apply(&self, p: &SeqPoint) -> SeqPoint {
        let mut cur = p.clone();
        for step in self.chain.iter().rev() {
            cur = step.apply(&cur);
        }
        cur
    }

    fn invert(&self, p: &SeqPoint) -> Result<SeqPoint> {
        let mut cur = p.clone();
        for step in &self.chain {
            cur = step.invert(&cur)?;
        }
        Ok(cur)
    }

    fn ratio(&self) -> f64 {
        2f64.powi(-(self.chain.len() as i32))
    }

    fn fixed_point(&self) -> Result<SeqPoint> {
        // Iterate from the origin; exact stabilization ends the search. A
        // stable support with moving values means the limit is the solution
        // of a per-coordinate affine equation, handled below.
        let mut cur = SeqPoint::origin();
        for _ in 0..40 {
            let next = self.apply(&cur);
            if next == cur {
                return Ok(cur);
            }
            let support_stable = next.entries.len() == cur.entries.len()
                && next.entries.iter().zip(&cur.entries).all(|(a, b)| a.0 == b.0);
            cur = next;
            if support_stable {
                break;
            }
        }
        // Support-stable affine case: with identity relocation on the
        // support, x = gamma * 2^m / (2^m - 1) where gamma = f(0).
        let gamma = self.apply(&SeqPoint::origin());
        let m = self.chain.len() as u32;
        if m >= 63 {
            return Err(Error::FixedPointUnrepresentable);
        }
        let denom = (1i64 << m) - 1;
        let mut entries = Vec::with_capacity(gamma.entries.len());
        for &(i, v) in gamma.entries() {
            if v.numerator() % denom != 0 {
                return Err(Error::FixedPointUnrepresentable);
            }
            let mut scaled = Dyadic::new(v.numerator() / denom, v.exponent());
            for _ in 0..m {
                scaled = scaled.double();
            }
            entries.push((i, scaled));
        }
        let candidate = SeqPoint::from_entries(entries);
        if self.apply(&candidate) == candidate {
            Ok(candidate)
        } else {
            Err(Error::FixedPointUnrepresentable)
        }
    }
}

// ---------------------------------------------------------------------------
// Similitude

#[derive(Clone, PartialEq, Debug)]
enum SimKind {
    Euclidean(EuclideanMap),
    Sequence(SequenceMap),
}

/// A contracting similitude in one of the two backends.
#[derive(Clone, PartialEq, Debug)]
pub struct Similitude {
    kind: SimKind,
}

impl Similitude {
    /// Validating constructor; repairs mild orthogonality drift, rejects worse.
    pub fn euclidean(ratio: f64, dim: usize, rotation: Vec<f64>, translation: Vec<f64>) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidRatio(ratio));
        }
        if rotation.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: rotation.len() });
        }
        if translation.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: translation.len() });
        }
        let mut map = EuclideanMap { ratio, dim, rotation, translation };
        let defect = map.orthogonality_defect();
        if defect > ORTHO_REPAIR {
            return Err(Error::NonOrthogonal { defect });
        }
        if defect > ORTHO_ACCEPT {
            map = map.reorthonormalized();
            let after = map.orthogonality_defect();
            if after > ORTHO_ACCEPT {
                return Err(Error::NonOrthogonal { defect: after });
            }
        }
        Ok(Similitude { kind: SimKind::Euclidean(map) })
    }

    /// Skips every check; for validation experiments only.
    pub fn euclidean_unchecked(ratio: f64, dim: usize, rotation: Vec<f64>, translation: Vec<f64>) -> Self {
        Similitude {
            kind: SimKind::Euclidean(EuclideanMap { ratio, dim, rotation, translation }),
        }
    }

    /// 2D map x -> ratio * R(angle) x + t.
    pub fn euclidean_2d(ratio: f64, angle_deg: f64, tx: f64, ty: f64) -> Result<Self> {
        let (s, c) = angle_deg.to_radians().sin_cos();
        Similitude::euclidean(ratio, 2, vec![c, -s, s, c], vec![tx, ty])
    }

    /// Contraction toward `center` with no rotation.
    pub fn homothety(ratio: f64, center: &[f64]) -> Result<Self> {
        let dim = center.len();
        let mut rotation = vec![0.0; dim * dim];
        for i in 0..dim {
            rotation[i * dim + i] = 1.0;
        }
        let translation = center.iter().map(|c| c * (1.0 - ratio)).collect();
        Similitude::euclidean(ratio, dim, rotation, translation)
    }

    /// Post-compose with a rotation about an arbitrary 2D point.
    pub fn rotated_about(self, angle_deg: f64, center: &[f64]) -> Result<Self> {
        let map = match self.kind {
            SimKind::Euclidean(m) => m,
            SimKind::Sequence(_) => {
                return Err(Error::BackendMismatch { expected: "euclidean", got: "sequence" })
            }
        };
        if map.dim != 2 || center.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: map.dim.max(center.len()) });
        }
        let (s, c) = angle_deg.to_radians().sin_cos();
        let rot = [c, -s, s, c];
        let mut rotation = vec![0.0; 4];
        for i in 0..2 {
            for j in 0..2 {
                rotation[i * 2 + j] =
                    rot[i * 2] * map.rotation[j] + rot[i * 2 + 1] * map.rotation[2 + j];
            }
        }
        // t' = p + R (t - p)
        let translation = vec![
            center[0] + rot[0] * (map.translation[0] - center[0]) + rot[1] * (map.translation[1] - center[1]),
            center[1] + rot[2] * (map.translation[0] - center[0]) + rot[3] * (map.translation[1] - center[1]),
        ];
        Similitude::euclidean(map.ratio, 2, rotation, translation)
    }

    pub fn sequence(step: SequenceStep) -> Self {
        Similitude { kind: SimKind::Sequence(SequenceMap { chain: vec![step] }) }
    }

    pub fn backend(&self) -> Backend {
        match &self.kind {
            SimKind::Euclidean(_) => Backend::Euclidean,
            SimKind::Sequence(_) => Backend::Sequence,
        }
    }

    pub fn ratio(&self) -> f64 {
        match &self.kind {
            SimKind::Euclidean(m) => m.ratio,
            SimKind::Sequence(m) => m.ratio(),
        }
    }

    /// Ambient dimension; None for the sequence backend.
    pub fn dim(&self) -> Option<usize> {
        match &self.kind {
            SimKind::Euclidean(m) => Some(m.dim),
            SimKind::Sequence(_) => None,
        }
    }

    pub fn as_euclidean(&self) -> Option<&EuclideanMap> {
        match &self.kind {
            SimKind::Euclidean(m) => Some(m),
            SimKind::Sequence(_) => None,
        }
    }

    pub fn as_sequence(&self) -> Option<&SequenceMap> {
        match &self.kind {
            SimKind::Sequence(m) => Some(m),
            SimKind::Euclidean(_) => None,
        }
    }

    pub fn apply(&self, p: &Point) -> Result<Point> {
        match (&self.kind, p) {
            (SimKind::Euclidean(m), Point::Euclidean(x)) => {
                if x.len() != m.dim {
                    return Err(Error::DimensionMismatch { expected: m.dim, got: x.len() });
                }
                Ok(Point::Euclidean(m.apply(x)))
            }
            (SimKind::Sequence(m), Point::Sequence(x)) => Ok(Point::Sequence(m.apply(x))),
            (_, p) => Err(Error::BackendMismatch {
                expected: self.backend().name(),
                got: p.backend().name(),
            }),
        }
    }

    /// Exact inverse; sequence preimages can leave the space pattern.
    pub fn invert(&self, p: &Point) -> Result<Point> {
        match (&self.kind, p) {
            (SimKind::Euclidean(m), Point::Euclidean(x)) => {
                if x.len() != m.dim {
                    return Err(Error::DimensionMismatch { expected: m.dim, got: x.len() });
                }
                Ok(Point::Euclidean(m.invert(x)))
            }
            (SimKind::Sequence(m), Point::Sequence(x)) => Ok(Point::Sequence(m.invert(x)?)),
            (_, p) => Err(Error::BackendMismatch {
                expected: self.backend().name(),
                got: p.backend().name(),
            }),
        }
    }

    /// self after other: (self.compose(g))(x) = self(g(x)).
    pub fn compose(&self, inner: &Similitude) -> Result<Similitude> {
        match (&self.kind, &inner.kind) {
            (SimKind::Euclidean(a), SimKind::Euclidean(b)) => {
                if a.dim != b.dim {
                    return Err(Error::DimensionMismatch { expected: a.dim, got: b.dim });
                }
                Ok(Similitude { kind: SimKind::Euclidean(a.compose(b)) })
            }
            (SimKind::Sequence(a), SimKind::Sequence(b)) => {
                let mut chain = a.chain.clone();
                chain.extend_from_slice(&b.chain);
                Ok(Similitude { kind: SimKind::Sequence(SequenceMap { chain }) })
            }
            _ => Err(Error::BackendMismatch {
                expected: self.backend().name(),
                got: inner.backend().name(),
            }),
        }
    }

    pub fn fixed_point(&self) -> Result<Point> {
        match &self.kind {
            SimKind::Euclidean(m) => Ok(Point::Euclidean(m.fixed_point()?)),
            SimKind::Sequence(m) => Ok(Point::Sequence(m.fixed_point()?)),
        }
    }
}

// ---------------------------------------------------------------------------
// Systems

/// Iterated function system of N >= 2 similitudes sharing one backend.
#[derive(Clone, PartialEq, Debug)]
pub struct IfsSpec {
    pub name: String,
    maps: Vec<Similitude>,
}

impl IfsSpec {
    pub fn new(name: impl Into<String>, maps: Vec<Similitude>) -> Result<Self> {
        if maps.len() < 2 {
            return Err(Error::TooFewMaps(maps.len()));
        }
        if maps.len() > u8::MAX as usize {
            return Err(Error::Invalid(format!("too many maps: {}", maps.len())));
        }
        let backend = maps[0].backend();
        let dim = maps[0].dim();
        for m in &maps[1..] {
            if m.backend() != backend {
                return Err(Error::BackendMismatch {
                    expected: backend.name(),
                    got: m.backend().name(),
                });
            }
            if m.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim.unwrap_or(0),
                    got: m.dim().unwrap_or(0),
                });
            }
        }
        Ok(IfsSpec { name: name.into(), maps })
    }

    pub fn n_maps(&self) -> u8 {
        self.maps.len() as u8
    }

    pub fn backend(&self) -> Backend {
        self.maps[0].backend()
    }

    pub fn dim(&self) -> Option<usize> {
        self.maps[0].dim()
    }

    pub fn maps(&self) -> &[Similitude] {
        &self.maps
    }

    /// Map for a 1-based address symbol.
    pub fn map_for_symbol(&self, symbol: u8) -> Result<&Similitude> {
        if symbol == 0 || symbol as usize > self.maps.len() {
            return Err(Error::BadSymbol { symbol, n_maps: self.n_maps() });
        }
        Ok(&self.maps[symbol as usize - 1])
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.maps.iter().map(|m| m.ratio()).collect()
    }

    pub fn r_max(&self) -> f64 {
        self.maps.iter().map(|m| m.ratio()).fold(0.0, f64::max)
    }

    pub fn r_min(&self) -> f64 {
        self.maps.iter().map(|m| m.ratio()).fold(1.0, f64::min)
    }
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub backend: Backend,
    pub samples: usize,
    pub max_relative_deviation: f64,
    pub pass: bool,
}

/// Empirically checks the scaling identity d(f(x), f(y)) = r d(x, y) on
/// seeded random point pairs. Euclidean tolerance 1e-9; sequence arithmetic
/// is exact so any deviation fails.
pub fn validate_similitude(f: &Similitude, samples: usize, seed: u64) -> ValidationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut used = 0usize;
    for _ in 0..samples {
        let (x, y) = match f.backend() {
            Backend::Euclidean => {
                let dim = f.dim().unwrap();
                let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
                let b: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
                (Point::Euclidean(a), Point::Euclidean(b))
            }
            Backend::Sequence => {
                let mk = |rng: &mut ChaCha8Rng| {
                    let support = rng.random_range(0..6usize);
                    let mut entries = Vec::new();
                    let mut idx = 0u32;
                    for _ in 0..support {
                        idx += rng.random_range(1..4u32);
                        let num = rng.random_range(-31i64..32) | 1;
                        let exp = rng.random_range(0..6u32);
                        entries.push((idx, Dyadic::new(num, exp)));
                    }
                    Point::Sequence(SeqPoint::from_entries(entries))
                };
                (mk(&mut rng), mk(&mut rng))
            }
        };
        let base = x.distance(&y).unwrap();
        if base == 0.0 {
            continue;
        }
        used += 1;
        let fx = f.apply(&x).unwrap();
        let fy = f.apply(&y).unwrap();
        let dev = match (&fx, &fy, &x, &y) {
            (Point::Sequence(a), Point::Sequence(b), Point::Sequence(px), Point::Sequence(py)) => {
                // Exact comparison: d(fx, fy) must equal d(x, y) halved
                // chain-length times.
                let mut scaled = px.l1_distance(py);
                let m = f.as_sequence().unwrap().chain.len();
                for _ in 0..m {
                    scaled = scaled.half();
                }
                if a.l1_distance(b) == scaled {
                    0.0
                } else {
                    (a.l1_distance(b).to_f64() / base - f.ratio()).abs()
                }
            }
            _ => (fx.distance(&fy).unwrap() / base - f.ratio()).abs(),
        };
        worst = worst.max(dev);
    }
    let tol = match f.backend() {
        Backend::Euclidean => 1e-9,
        Backend::Sequence => 0.0,
    };
    ValidationReport {
        backend: f.backend(),
        samples: used,
        max_relative_deviation: worst,
        pass: worst <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn koch_f2() -> Similitude {
        Similitude::euclidean_2d(1.0 / 3.0, 60.0, 1.0 / 3.0, 0.0).unwrap()
    }

    #[test]
    fn sequence_generator_moves_unit_vector() {
        // Interleave-even sends e_1 to e_2 / 2.
        let f = Similitude::sequence(SequenceStep::InterleaveEven);
        let p = Point::Sequence(SeqPoint::unit(1));
        let q = f.apply(&p).unwrap();
        let expect = SeqPoint::from_entries(vec![(2, Dyadic::new(1, 1))]);
        assert_eq!(q, Point::Sequence(expect));
    }

    #[test]
    fn euclidean_apply_hits_translation_at_origin() {
        let f = koch_f2();
        let q = f.apply(&Point::Euclidean(vec![0.0, 0.0])).unwrap();
        let c = q.as_euclidean().unwrap();
        assert!((c[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!(c[1].abs() < 1e-15);
    }

    #[test]
    fn invert_euclidean_recovers_preimage() {
        let f1 = Similitude::homothety(1.0 / 3.0, &[0.0, 0.0]).unwrap();
        let p = Point::Euclidean(vec![1.0 / 3.0, 0.0]);
        let q = f1.invert(&p).unwrap();
        let c = q.as_euclidean().unwrap();
        assert!((c[0] - 1.0).abs() < 1e-12 && c[1].abs() < 1e-12);
        // Round trip through a rotated map.
        let f = koch_f2();
        let x = Point::Euclidean(vec![0.37, -0.85]);
        let back = f.invert(&f.apply(&x).unwrap()).unwrap();
        assert!(x.distance(&back).unwrap() < 1e-12);
    }

    #[test]
    fn invert_affine_first_at_origin_has_negative_first_coord() {
        let f3 = Similitude::sequence(SequenceStep::AffineFirst);
        let q = f3.invert(&Point::Sequence(SeqPoint::origin())).unwrap();
        let p = q.as_sequence().unwrap();
        assert_eq!(p.first_coord(), Dyadic::from_int(-1));
        assert_eq!(p.support_len(), 1);
    }

    #[test]
    fn invert_interleave_rejects_wrong_parity() {
        let f1 = Similitude::sequence(SequenceStep::InterleaveEven);
        let odd = Point::Sequence(SeqPoint::from_entries(vec![(3, Dyadic::new(1, 1))]));
        assert!(matches!(
            f1.invert(&odd),
            Err(Error::PreimageOutsideSpace { index: 3 })
        ));
    }

    #[test]
    fn compose_multiplies_ratios_and_agrees_pointwise() {
        let f = koch_f2();
        let g = Similitude::euclidean_2d(1.0 / 3.0, -60.0, 0.5, 3f64.sqrt() / 6.0).unwrap();
        let fg = f.compose(&g).unwrap();
        assert_eq!(fg.ratio(), f.ratio() * g.ratio());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x = Point::Euclidean(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            let direct = fg.apply(&x).unwrap();
            let nested = f.apply(&g.apply(&x).unwrap()).unwrap();
            assert!(direct.distance(&nested).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn compose_sequence_agrees_with_nesting() {
        let f = Similitude::sequence(SequenceStep::AffineFirst);
        let g = Similitude::sequence(SequenceStep::InterleaveOdd);
        let fg = f.compose(&g).unwrap();
        assert_eq!(fg.ratio(), 0.25);
        let x = Point::Sequence(SeqPoint::from_entries(vec![
            (1, Dyadic::new(3, 2)),
            (4, Dyadic::new(-1, 1)),
        ]));
        let direct = fg.apply(&x).unwrap();
        let nested = f.apply(&g.apply(&x).unwrap()).unwrap();
        assert_eq!(direct, nested);
    }

    #[test]
    fn fixed_points_of_generators() {
        // Toward-origin homothety fixes the origin; toward (1, 0) fixes (1, 0).
        let f4 = Similitude::homothety(1.0 / 3.0, &[1.0, 0.0]).unwrap();
        let p = f4.fixed_point().unwrap();
        let c = p.as_euclidean().unwrap();
        assert!((c[0] - 1.0).abs() < 1e-12 && c[1].abs() < 1e-12);

        let s1 = Similitude::sequence(SequenceStep::InterleaveEven);
        assert_eq!(s1.fixed_point().unwrap(), Point::Sequence(SeqPoint::origin()));
        let s3 = Similitude::sequence(SequenceStep::AffineFirst);
        assert_eq!(s3.fixed_point().unwrap(), Point::Sequence(SeqPoint::unit(1)));
    }

    #[test]
    fn fixed_point_is_exactly_fixed() {
        let s3 = Similitude::sequence(SequenceStep::AffineFirst);
        let p = s3.fixed_point().unwrap();
        assert_eq!(s3.apply(&p).unwrap(), p);
        let f = koch_f2();
        let q = f.fixed_point().unwrap();
        assert!(f.apply(&q).unwrap().distance(&q).unwrap() < 1e-10);
    }

    #[test]
    fn sequence_distance_is_exact() {
        let a = SeqPoint::from_entries(vec![(2, Dyadic::new(1, 1))]);
        assert_eq!(a.l1_distance(&SeqPoint::origin()), Dyadic::new(1, 1));
        let b = SeqPoint::from_entries(vec![(2, Dyadic::new(1, 2)), (5, Dyadic::new(-1, 3))]);
        assert_eq!(a.l1_distance(&b), Dyadic::new(3, 3));
    }

    #[test]
    fn validation_accepts_true_similitudes() {
        let rep = validate_similitude(&koch_f2(), 64, 11);
        assert!(rep.pass, "deviation {}", rep.max_relative_deviation);
        assert!(rep.max_relative_deviation <= 1e-12);
        for step in [
            SequenceStep::InterleaveEven,
            SequenceStep::InterleaveOdd,
            SequenceStep::AffineFirst,
        ] {
            let rep = validate_similitude(&Similitude::sequence(step), 64, 13);
            assert!(rep.pass);
            assert_eq!(rep.max_relative_deviation, 0.0);
        }
    }

    #[test]
    fn validation_flags_shear() {
        let shear = Similitude::euclidean_unchecked(
            0.5,
            2,
            vec![1.0, 0.3, 0.0, 1.0],
            vec![0.0, 0.0],
        );
        let rep = validate_similitude(&shear, 64, 17);
        assert!(!rep.pass);
    }

    #[test]
    fn constructor_policy_on_orthogonality() {
        // Clean rotation accepted.
        assert!(Similitude::euclidean_2d(0.5, 30.0, 0.0, 0.0).is_ok());
        // Mild drift repaired.
        let eps = 5e-10;
        let drifted = Similitude::euclidean(
            0.5,
            2,
            vec![1.0 + eps, 0.0, 0.0, 1.0 - eps],
            vec![0.0, 0.0],
        )
        .unwrap();
        assert!(drifted.as_euclidean().unwrap().orthogonality_defect() <= 1e-12);
        // Shear rejected.
        assert!(matches!(
            Similitude::euclidean(0.5, 2, vec![1.0, 0.3, 0.0, 1.0], vec![0.0, 0.0]),
            Err(Error::NonOrthogonal { .. })
        ));
    }

    #[test]
    fn system_constructor_rejects_mixed_backends() {
        let e = Similitude::homothety(0.5, &[0.0]).unwrap();
        let s = Similitude::sequence(SequenceStep::InterleaveEven);
        assert!(IfsSpec::new("bad", vec![e, s]).is_err());
        let lone = Similitude::homothety(0.5, &[0.0]).unwrap();
        assert!(matches!(IfsSpec::new("one", vec![lone]), Err(Error::TooFewMaps(1))));
    }

    #[test]
    fn rotated_about_keeps_image_square_in_place() {
        // Contraction to the (1,1) corner of the unit square, then -90 deg
        // about the image cell center: corners of the image cell permute.
        let f = Similitude::homothety(0.5, &[1.0, 1.0])
            .unwrap()
            .rotated_about(-90.0, &[0.75, 0.75])
            .unwrap();
        let img = |x: f64, y: f64| {
            let p = f.apply(&Point::Euclidean(vec![x, y])).unwrap();
            p.as_euclidean().unwrap().to_vec()
        };
        let c = img(1.0, 1.0);
        assert!((c[0] - 1.0).abs() < 1e-12 && (c[1] - 0.5).abs() < 1e-12);
        let c = img(0.0, 0.0);
        assert!((c[0] - 0.5).abs() < 1e-12 && (c[1] - 1.0).abs() < 1e-12);
    }
}
