//! Symbolic address space over N map symbols.
//!
//! Addresses are finite words with 1-based symbols. The code space carries
//! the metric rho induced by a ratio table, the natural cylinder measure
//! nu(C_I) = r_I^alpha, and a streaming depth-n cylinder enumeration.

use crate::error::{Error, Result};
use crate::spaces::IfsSpec;
use std::fmt;

/// Default cap on the number of enumerated cells.
pub const DEFAULT_BUDGET: u64 = 5_000_000;

/// Finite word of 1-based map symbols.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Address(Vec<u8>);

impl Address {
    pub fn empty() -> Self {
        Address(Vec::new())
    }

    pub fn new(symbols: Vec<u8>, n_maps: u8) -> Result<Self> {
        for &s in &symbols {
            if s == 0 || s > n_maps {
                return Err(Error::BadSymbol { symbol: s, n_maps });
            }
        }
        Ok(Address(symbols))
    }

    /// Caller guarantees the symbols are valid for the system at hand.
    pub fn from_symbols(symbols: &[u8]) -> Self {
        Address(symbols.to_vec())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub fn first(&self) -> Option<u8> {
        self.0.first().copied()
    }

    pub fn push(&mut self, symbol: u8) {
        self.0.push(symbol);
    }

    /// New address with `symbol` in front.
    pub fn prepend(&self, symbol: u8) -> Address {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(symbol);
        v.extend_from_slice(&self.0);
        Address(v)
    }

    pub fn concat(&self, tail: &Address) -> Address {
        let mut v = self.0.clone();
        v.extend_from_slice(&tail.0);
        Address(v)
    }

    pub fn starts_with(&self, prefix: &Address) -> bool {
        self.0.starts_with(&prefix.0)
    }

    /// Neither word is a prefix of the other.
    pub fn incomparable(&self, other: &Address) -> bool {
        !self.starts_with(other) && !other.starts_with(self)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "-");
        }
        if self.0.iter().all(|&s| s <= 9) {
            for s in &self.0 {
                write!(f, "{}", s)?;
            }
            Ok(())
        } else {
            for (i, s) in self.0.iter().enumerate() {
                if i > 0 {
                    write!(f, ".")?;
                }
                write!(f, "{}", s)?;
            }
            Ok(())
        }
    }
}

/// Rank within the lexicographic depth-n enumeration.
pub fn address_at(rank: u64, depth: u32, n_maps: u8) -> Address {
    let n = n_maps as u64;
    let mut symbols = vec![0u8; depth as usize];
    let mut rest = rank;
    for slot in symbols.iter_mut().rev() {
        *slot = (rest % n) as u8 + 1;
        rest /= n;
    }
    debug_assert_eq!(rest, 0, "rank beyond enumeration");
    Address(symbols)
}

pub fn rank_of(addr: &Address, n_maps: u8) -> u64 {
    let n = n_maps as u64;
    let mut rank = 0u64;
    for &s in &addr.0 {
        rank = rank * n + (s as u64 - 1);
    }
    rank
}

/// Number of depth-n cells, checked against a budget.
pub fn cell_count(n_maps: u8, depth: u32, budget: u64) -> Result<u64> {
    let mut count: u64 = 1;
    for _ in 0..depth {
        count = count
            .checked_mul(n_maps as u64)
            .filter(|&c| c <= budget)
            .ok_or(Error::BudgetExceeded { required: u64::MAX, budget })?;
    }
    if count > budget {
        return Err(Error::BudgetExceeded { required: count, budget });
    }
    Ok(count)
}

/// Streaming lexicographic enumeration of all depth-n addresses.
pub struct CylinderFamily {
    n_maps: u8,
    depth: u32,
    next: u64,
    count: u64,
}

impl CylinderFamily {
    pub fn new(n_maps: u8, depth: u32, budget: u64) -> Result<Self> {
        let count = cell_count(n_maps, depth, budget)?;
        Ok(CylinderFamily { n_maps, depth, next: 0, count })
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

impl Iterator for CylinderFamily {
    type Item = Address;

    fn next(&mut self) -> Option<Address> {
        if self.next >= self.count {
            return None;
        }
        let addr = address_at(self.next, self.depth, self.n_maps);
        self.next += 1;
        Some(addr)
    }
}

// ---------------------------------------------------------------------------
// Ratio table

/// Contraction ratios together with the solved similarity dimension.
#[derive(Clone, Debug)]
pub struct RatioTable {
    ratios: Vec<f64>,
    alpha: f64,
}

impl RatioTable {
    pub fn new(ratios: Vec<f64>) -> Result<Self> {
        let alpha = crate::analysis::similarity_dimension(&ratios)?;
        Ok(RatioTable { ratios, alpha })
    }

    pub fn from_ifs(ifs: &IfsSpec) -> Result<Self> {
        RatioTable::new(ifs.ratios())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n_maps(&self) -> u8 {
        self.ratios.len() as u8
    }

    pub fn ratio(&self, symbol: u8) -> f64 {
        self.ratios[symbol as usize - 1]
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    /// r_I: left-to-right product of the ratios along the word; 1 for the
    /// empty word.
    pub fn cylinder_ratio(&self, addr: &Address) -> f64 {
        let mut acc = 1.0;
        for &s in addr.symbols() {
            acc *= self.ratio(s);
        }
        acc
    }

    /// Product over the word with the last symbol dropped; 1 for length one
    /// and infinity for the empty word.
    pub fn truncated_ratio(&self, addr: &Address) -> f64 {
        match addr.len() {
            0 => f64::INFINITY,
            _ => {
                let mut acc = 1.0;
                for &s in &addr.symbols()[..addr.len() - 1] {
                    acc *= self.ratio(s);
                }
                acc
            }
        }
    }

    /// nu(C_I) = r_I^alpha; the full space has measure 1.
    pub fn cylinder_measure(&self, addr: &Address) -> f64 {
        if addr.is_empty() {
            1.0
        } else {
            self.cylinder_ratio(addr).powf(self.alpha)
        }
    }
}

// ---------------------------------------------------------------------------
// Code points and the metric rho

/// Eventually constant symbol sequence: `prefix` then `tail` forever.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CodePoint {
    pub prefix: Address,
    pub tail: u8,
}

impl CodePoint {
    pub fn new(prefix: Address, tail: u8) -> Self {
        CodePoint { prefix, tail }
    }

    pub fn constant(tail: u8) -> Self {
        CodePoint { prefix: Address::empty(), tail }
    }

    /// Symbol at 0-based position k.
    pub fn symbol_at(&self, k: usize) -> u8 {
        if k < self.prefix.len() {
            self.prefix.symbols()[k]
        } else {
            self.tail
        }
    }

    pub fn prepend(&self, symbol: u8) -> CodePoint {
        CodePoint { prefix: self.prefix.prepend(symbol), tail: self.tail }
    }

    /// True when both encodings denote the same infinite sequence.
    pub fn same_sequence(&self, other: &CodePoint) -> bool {
        let horizon = self.prefix.len().max(other.prefix.len());
        (0..horizon).all(|k| self.symbol_at(k) == other.symbol_at(k)) && self.tail == other.tail
    }
}

/// Metric on the code space: 1 when the first symbols differ, the ratio
/// product over the longest common prefix otherwise, 0 for equal sequences.
pub fn code_distance(a: &CodePoint, b: &CodePoint, table: &RatioTable) -> f64 {
    if a.same_sequence(b) {
        return 0.0;
    }
    if a.symbol_at(0) != b.symbol_at(0) {
        return 1.0;
    }
    let mut acc = 1.0;
    let mut k = 0usize;
    loop {
        let (x, y) = (a.symbol_at(k), b.symbol_at(k));
        if x != y {
            return acc;
        }
        acc *= table.ratio(x);
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn koch_table() -> RatioTable {
        RatioTable::new(vec![1.0 / 3.0; 4]).unwrap()
    }

    #[test]
    fn ratio_products() {
        let t = koch_table();
        let i12 = Address::from_symbols(&[1, 2]);
        assert!((t.cylinder_ratio(&i12) - 1.0 / 9.0).abs() <= 1e-16);
        assert_eq!(t.cylinder_ratio(&Address::empty()), 1.0);
        assert_eq!(t.truncated_ratio(&Address::from_symbols(&[1])), 1.0);
        assert!((t.truncated_ratio(&i12) - 1.0 / 3.0).abs() <= 1e-16);
        assert!(t.truncated_ratio(&Address::empty()).is_infinite());
    }

    #[test]
    fn ratio_product_multiplicativity_exact_for_dyadic_ratios() {
        let t = RatioTable::new(vec![0.5, 0.25]).unwrap();
        for (i, j) in [(vec![1u8, 2, 1], vec![2u8, 2]), (vec![2, 2, 1, 1], vec![1, 2, 1])] {
            let a = Address::from_symbols(&i);
            let b = Address::from_symbols(&j);
            let ab = a.concat(&b);
            assert_eq!(t.cylinder_ratio(&ab), t.cylinder_ratio(&a) * t.cylinder_ratio(&b));
        }
    }

    #[test]
    fn incomparability() {
        let a = Address::from_symbols(&[1, 2]);
        let b = Address::from_symbols(&[1, 2, 1]);
        let c = Address::from_symbols(&[1, 3]);
        assert!(!a.incomparable(&b));
        assert!(a.incomparable(&c));
        assert!(!a.incomparable(&a));
        assert!(!Address::empty().incomparable(&c));
    }

    #[test]
    fn code_metric_examples() {
        let t = koch_table();
        let a = CodePoint::new(Address::from_symbols(&[1, 3, 2]), 2);
        let b = CodePoint::new(Address::from_symbols(&[1, 3]), 4);
        // Common prefix (1, 3), then 2 vs 4.
        assert!((code_distance(&a, &b, &t) - 1.0 / 9.0).abs() <= 1e-16);
        let c = CodePoint::constant(2);
        let d = CodePoint::constant(3);
        assert_eq!(code_distance(&c, &d, &t), 1.0);
        assert_eq!(code_distance(&c, &c, &t), 0.0);
        // Different encodings of one sequence.
        let e = CodePoint::new(Address::from_symbols(&[2, 2]), 2);
        assert_eq!(code_distance(&c, &e, &t), 0.0);
    }

    #[test]
    fn code_metric_prepend_scales_by_ratio() {
        let t = RatioTable::new(vec![0.5, 0.25, 0.125]).unwrap();
        let a = CodePoint::new(Address::from_symbols(&[2, 1]), 3);
        let b = CodePoint::new(Address::from_symbols(&[2, 3]), 1);
        let base = code_distance(&a, &b, &t);
        for s in 1..=3u8 {
            let lhs = code_distance(&a.prepend(s), &b.prepend(s), &t);
            assert!((lhs - t.ratio(s) * base).abs() <= 1e-12);
        }
    }

    #[test]
    fn code_metric_axioms_exhaustive() {
        // All eventually-constant sequences determined by their first 6
        // symbols over 3 letters: 3^6 canonical points.
        let t = RatioTable::new(vec![0.5, 1.0 / 3.0, 0.25]).unwrap();
        let mut points = Vec::new();
        for rank in 0..3u32.pow(6) {
            let word = address_at(rank as u64, 6, 3);
            let tail = *word.symbols().last().unwrap();
            let prefix = Address::from_symbols(&word.symbols()[..5]);
            points.push(CodePoint::new(prefix, tail));
        }
        let n = points.len();
        let mut d = vec![0.0f64; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = code_distance(&points[i], &points[j], &t);
                let w = code_distance(&points[j], &points[i], &t);
                assert_eq!(v, w, "symmetry must be exact");
                assert!(v > 0.0, "distinct sequences at positive distance");
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        // Triangle inequality over every unordered triple: the largest side
        // must not exceed the sum of the other two.
        for i in 0..n {
            for j in (i + 1)..n {
                let dij = d[i * n + j];
                for k in (j + 1)..n {
                    let dik = d[i * n + k];
                    let djk = d[j * n + k];
                    let hi = dij.max(dik).max(djk);
                    let sum = dij + dik + djk - hi;
                    assert!(hi <= sum + 1e-15, "triangle violated at {i},{j},{k}");
                }
            }
        }
    }

    #[test]
    fn cylinder_measures() {
        let t = koch_table();
        let m = t.cylinder_measure(&Address::from_symbols(&[1, 2]));
        assert!((m - 1.0 / 16.0).abs() <= 1e-12);
        assert_eq!(t.cylinder_measure(&Address::empty()), 1.0);
    }

    #[test]
    fn measure_additivity_on_gallery_tables() {
        for ratios in [vec![1.0 / 3.0; 4], vec![0.5; 3], vec![0.5, 0.25]] {
            let t = RatioTable::new(ratios).unwrap();
            let n = t.n_maps();
            for depth in 0..=6u32 {
                if (n as u64).pow(depth) > 5000 {
                    break;
                }
                for addr in CylinderFamily::new(n, depth, DEFAULT_BUDGET).unwrap() {
                    let whole = t.cylinder_measure(&addr);
                    let mut parts = 0.0;
                    for s in 1..=n {
                        let mut child = addr.clone();
                        child.push(s);
                        parts += t.cylinder_measure(&child);
                    }
                    assert!((whole - parts).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn prepend_scales_measure_by_symbol_weight() {
        let t = RatioTable::new(vec![0.5, 0.25]).unwrap();
        let addr = Address::from_symbols(&[2, 1, 1]);
        for s in 1..=2u8 {
            let lhs = t.cylinder_measure(&addr.prepend(s));
            let rhs = t.ratio(s).powf(t.alpha()) * t.cylinder_measure(&addr);
            assert!((lhs - rhs).abs() <= 1e-12);
        }
    }

    #[test]
    fn enumeration_is_lexicographic_and_complete() {
        let fam = CylinderFamily::new(3, 4, DEFAULT_BUDGET).unwrap();
        assert_eq!(fam.len(), 81);
        let all: Vec<Address> = fam.collect();
        assert_eq!(all.len(), 81);
        assert_eq!(all[0].symbols(), &[1, 1, 1, 1]);
        assert_eq!(all[80].symbols(), &[3, 3, 3, 3]);
        for w in all.windows(2) {
            assert!(w[0] < w[1], "lexicographic order");
        }
        for (rank, addr) in all.iter().enumerate() {
            assert_eq!(rank_of(addr, 3), rank as u64);
        }
    }

    #[test]
    fn enumeration_respects_budget() {
        assert!(matches!(
            CylinderFamily::new(10, 9, DEFAULT_BUDGET),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(CylinderFamily::new(2, 10, 1024).is_ok());
        assert!(CylinderFamily::new(2, 11, 1024).is_err());
    }

    #[test]
    fn depth_zero_enumerates_the_empty_word() {
        let all: Vec<Address> = CylinderFamily::new(4, 0, 10).unwrap().collect();
        assert_eq!(all, vec![Address::empty()]);
    }
}
