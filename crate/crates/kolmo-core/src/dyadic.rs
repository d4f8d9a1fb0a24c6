//! Exact nonnegative dyadic rationals.
//!
//! Every weight in the workbench — halting probabilities, Kraft sums, request
//! ledger weights — is a finite sum of powers of two, so [`Dyadic`] keeps
//! `num / 2^exp` with an unbounded numerator and never rounds. Comparisons,
//! sums, and differences are exact; anything that would leave the dyadic
//! rationals simply isn't offered.

use num_bigint::BigUint;
use std::cmp::Ordering;
use std::fmt;

/// A nonnegative dyadic rational `num / 2^exp`, normalized so that either
/// `num` is odd or the value is exactly zero (`num = 0`, `exp = 0`).
#[derive(Clone, PartialEq, Eq, Default)]
pub struct Dyadic {
    num: BigUint,
    exp: u32,
}

impl Dyadic {
    /// Exactly zero.
    pub fn zero() -> Self {
        Dyadic::default()
    }

    /// The value `2^e` (negative `e` gives a proper fraction).
    pub fn pow2(e: i64) -> Self {
        if e >= 0 {
            Dyadic {
                num: BigUint::from(1u8) << (e as u64),
                exp: 0,
            }
        } else {
            Dyadic {
                num: BigUint::from(1u8),
                exp: u32::try_from(-e).expect("exponent out of range"),
            }
        }
    }

    /// The integer `n`.
    pub fn from_int(n: u64) -> Self {
        Dyadic {
            num: BigUint::from(n),
            exp: 0,
        }
        .normalized()
    }

    fn normalized(mut self) -> Self {
        if self.num == BigUint::default() {
            self.exp = 0;
            return self;
        }
        let tz = self.num.trailing_zeros().unwrap_or(0);
        let shift = tz.min(u64::from(self.exp));
        if shift > 0 {
            self.num >>= shift;
            self.exp -= shift as u32;
        }
        self
    }

    /// True iff exactly zero.
    pub fn is_zero(&self) -> bool {
        self.num == BigUint::default()
    }

    /// `self + other`, exact.
    pub fn add(&self, other: &Dyadic) -> Dyadic {
        let exp = self.exp.max(other.exp);
        let a = &self.num << u64::from(exp - self.exp);
        let b = &other.num << u64::from(exp - other.exp);
        Dyadic { num: a + b, exp }.normalized()
    }

    /// `self - other`, exact. Panics if the result would be negative.
    pub fn sub(&self, other: &Dyadic) -> Dyadic {
        assert!(self >= other, "dyadic subtraction would go negative");
        let exp = self.exp.max(other.exp);
        let a = &self.num << u64::from(exp - self.exp);
        let b = &other.num << u64::from(exp - other.exp);
        Dyadic { num: a - b, exp }.normalized()
    }

    /// `self * 2^shift`, exact.
    pub fn times_pow2(&self, shift: i64) -> Dyadic {
        if self.is_zero() {
            return Dyadic::zero();
        }
        let cur = -i64::from(self.exp);
        let new = cur + shift;
        if new >= 0 {
            Dyadic {
                num: &self.num << (new as u64),
                exp: 0,
            }
        } else {
            Dyadic {
                num: self.num.clone(),
                exp: u32::try_from(-new).expect("exponent out of range"),
            }
        }
        .normalized()
    }

    /// Largest integer `<= self`.
    pub fn floor(&self) -> BigUint {
        &self.num >> u64::from(self.exp)
    }

    /// Smallest integer `>= self`.
    pub fn ceil(&self) -> BigUint {
        if self.exp == 0 {
            self.num.clone()
        } else {
            // exp > 0 and num odd (normalized), so the value is never integral
            (&self.num >> u64::from(self.exp)) + 1u8
        }
    }

    /// True iff the value is an integer.
    pub fn is_integer(&self) -> bool {
        self.exp == 0
    }

    /// The first `k` binary digits after the point of `self`, truncated
    /// toward zero. Requires `self < 1`.
    pub fn frac_bits(&self, k: u32) -> crate::BitString {
        assert!(*self < Dyadic::from_int(1), "frac_bits requires a value < 1");
        let scaled = self.times_pow2(i64::from(k)).floor();
        let mut s = crate::BitString::with_capacity(k as usize);
        for j in (0..k).rev() {
            s.push(if scaled.bit(u64::from(j)) { 1 } else { 0 });
        }
        s
    }

    /// Canonical exact rendering: `num` when integral, `num/2^exp` otherwise.
    pub fn to_exact_string(&self) -> String {
        if self.exp == 0 {
            self.num.to_string()
        } else {
            format!("{}/2^{}", self.num, self.exp)
        }
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let exp = self.exp.max(other.exp);
        let a = &self.num << u64::from(exp - self.exp);
        let b = &other.num << u64::from(exp - other.exp);
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_exact_string())
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dyadic({self})")
    }
}
