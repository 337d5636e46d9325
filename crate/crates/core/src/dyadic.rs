//! Exact dyadic rationals `num / 2^exp`.
//!
//! Invariant: `num` is odd or zero; zero is stored as `0 / 2^0`. All
//! arithmetic is exact; overflow of the i64 numerator panics rather than
//! silently rounding.

use std::cmp::Ordering;
use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: i64,
    exp: u32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, exp: 0 };
    pub const ONE: Dyadic = Dyadic { num: 1, exp: 0 };

    pub fn new(num: i64, exp: u32) -> Self {
        Dyadic { num, exp }.normalized()
    }

    pub fn from_int(n: i64) -> Self {
        Dyadic { num: n, exp: 0 }
    }

    /// Exact decomposition of a finite f64. Returns None for NaN, infinities
    /// and exponents outside the supported range.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        if x == 0.0 {
            return Some(Dyadic::ZERO);
        }
        let mut y = x;
        let mut exp = 0u32;
        while y.fract() != 0.0 {
            y *= 2.0;
            exp += 1;
            if exp > 1100 {
                return None;
            }
        }
        if y.abs() > i64::MAX as f64 / 4.0 {
            return None;
        }
        Some(Dyadic::new(y as i64, exp))
    }

    fn normalized(mut self) -> Self {
        if self.num == 0 {
            self.exp = 0;
        } else {
            while self.num & 1 == 0 && self.exp > 0 {
                self.num >>= 1;
                self.exp -= 1;
            }
        }
        self
    }

    pub fn numerator(self) -> i64 {
        self.num
    }

    pub fn exponent(self) -> u32 {
        self.exp
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    pub fn is_negative(self) -> bool {
        self.num < 0
    }

    pub fn abs(self) -> Self {
        Dyadic { num: self.num.abs(), exp: self.exp }
    }

    pub fn neg(self) -> Self {
        Dyadic { num: -self.num, exp: self.exp }
    }

    /// Exact division by two.
    pub fn half(self) -> Self {
        if self.num == 0 {
            self
        } else {
            assert!(self.exp < u32::MAX, "dyadic exponent overflow");
            Dyadic { num: self.num, exp: self.exp + 1 }
        }
    }

    /// Exact multiplication by two.
    pub fn double(self) -> Self {
        if self.num == 0 {
            self
        } else if self.exp > 0 {
            Dyadic { num: self.num, exp: self.exp - 1 }
        } else {
            Dyadic { num: self.num.checked_mul(2).expect("dyadic numerator overflow"), exp: 0 }
        }
    }

    pub fn add(self, rhs: Self) -> Self {
        let exp = self.exp.max(rhs.exp);
        let a = (self.num as i128) << (exp - self.exp);
        let b = (rhs.num as i128) << (exp - rhs.exp);
        let sum = a + b;
        assert!(
            sum >= i64::MIN as i128 && sum <= i64::MAX as i128,
            "dyadic numerator overflow"
        );
        Dyadic { num: sum as i64, exp }.normalized()
    }

    pub fn sub(self, rhs: Self) -> Self {
        self.add(rhs.neg())
    }

    /// Exact conversion; panics if the numerator exceeds the f64 mantissa.
    pub fn to_f64(self) -> f64 {
        debug_assert!(
            self.num.abs() < (1i64 << 53),
            "dyadic numerator exceeds exact f64 range"
        );
        self.num as f64 * 2f64.powi(-(self.exp as i32))
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let exp = self.exp.max(other.exp);
        let a = (self.num as i128) << (exp - self.exp);
        let b = (other.num as i128) << (exp - other.exp);
        a.cmp(&b)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else if self.exp < 63 {
            write!(f, "{}/{}", self.num, 1i64 << self.exp)
        } else {
            write!(f, "{}*2^-{}", self.num, self.exp)
        }
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalization_keeps_odd_numerator() {
        let d = Dyadic::new(6, 3);
        assert_eq!(d.numerator(), 3);
        assert_eq!(d.exponent(), 2);
        assert_eq!(Dyadic::new(0, 7), Dyadic::ZERO);
    }

    #[test]
    fn arithmetic_examples() {
        let half = Dyadic::new(1, 1);
        let quarter = Dyadic::new(1, 2);
        assert_eq!(half.add(quarter), Dyadic::new(3, 2));
        assert_eq!(half.sub(half), Dyadic::ZERO);
        assert_eq!(half.half(), quarter);
        assert_eq!(quarter.double(), half);
        assert_eq!(Dyadic::from_int(1).sub(Dyadic::new(1, 3)), Dyadic::new(7, 3));
    }

    #[test]
    fn ordering_crosses_exponents() {
        assert!(Dyadic::new(3, 2) > Dyadic::new(1, 1));
        assert!(Dyadic::new(-1, 1) < Dyadic::ZERO);
        assert_eq!(Dyadic::new(2, 1).cmp(&Dyadic::ONE), Ordering::Equal);
    }

    #[test]
    fn f64_round_trip_is_exact() {
        for x in [0.0, 1.0, -0.375, 0.015625, 3.5, -17.0] {
            let d = Dyadic::from_f64(x).unwrap();
            assert_eq!(d.to_f64(), x);
        }
        assert!(Dyadic::from_f64(f64::NAN).is_none());
        assert!(Dyadic::from_f64(f64::INFINITY).is_none());
    }

    proptest! {
        #[test]
        fn add_commutes_and_associates(a in -1000i64..1000, ea in 0u32..20,
                                       b in -1000i64..1000, eb in 0u32..20,
                                       c in -1000i64..1000, ec in 0u32..20) {
            let (x, y, z) = (Dyadic::new(a, ea), Dyadic::new(b, eb), Dyadic::new(c, ec));
            prop_assert_eq!(x.add(y), y.add(x));
            prop_assert_eq!(x.add(y).add(z), x.add(y.add(z)));
        }

        #[test]
        fn sub_then_add_round_trips(a in -1000i64..1000, ea in 0u32..20,
                                    b in -1000i64..1000, eb in 0u32..20) {
            let (x, y) = (Dyadic::new(a, ea), Dyadic::new(b, eb));
            prop_assert_eq!(x.sub(y).add(y), x);
        }

        #[test]
        fn to_f64_matches_rational_value(a in -4000i64..4000, ea in 0u32..30) {
            let x = Dyadic::new(a, ea);
            let expect = a as f64 / 2f64.powi(ea as i32);
            prop_assert_eq!(x.to_f64(), expect);
        }
    }
}
