//! The fixed codes everything else is built on.
//!
//! Three codes are pinned here and never vary:
//!
//! * the length-lexicographic bijection between naturals and bit strings
//!   (`ε, 0, 1, 00, 01, 10, 11, 000, …`), [`lex_string`] / [`lex_index`];
//! * the self-delimiting gamma code for positive integers, `⌊log₂ n⌋` zeros
//!   followed by the binary digits of `n`, [`gamma`] / [`gamma_decode`];
//! * the Cantor pairing `pair(a, b) = (a+b)(a+b+1)/2 + b` and the derived
//!   triple code `⟨x, p, t⟩ = pair(pair(lex_index(x), lex_index(p)), t)`.
//!
//! Every value is exact `u128` arithmetic; the desk-scale ranges (triple
//! codes near `2^101` for deep machine runs) fit with room to spare.

use crate::BitString;

/// The string with length-lexicographic index `n`: `lex_string(0) = ε`,
/// `lex_string(3) = "00"`, `lex_string(14) = "111"`.
pub fn lex_string(n: u128) -> BitString {
    // n + 1 written in binary is 1 followed by exactly the string's bits.
    let m = n.checked_add(1).expect("lex index out of u128 range");
    let len = 127 - m.leading_zeros();
    BitString::from_value_len(m - (1u128 << len), len)
}

/// The length-lexicographic index of `x`; inverse of [`lex_string`].
/// Panics for strings longer than 127 bits (beyond the exact `u128` range).
pub fn lex_index(x: &BitString) -> u128 {
    try_lex_index(x).expect("lex_index limited to 127-bit strings")
}

/// [`lex_index`] without the panic: `None` for strings past 127 bits.
pub fn try_lex_index(x: &BitString) -> Option<u128> {
    if x.len() > 127 {
        return None;
    }
    let value = x.to_value().unwrap();
    Some((1u128 << x.len()) - 1 + value)
}

/// Length of `gamma(n)` without materializing it: `2⌊log₂ n⌋ + 1`.
pub fn gamma_len(n: u128) -> usize {
    assert!(n >= 1, "gamma is defined for n >= 1");
    2 * (127 - n.leading_zeros()) as usize + 1
}

/// The self-delimiting gamma code of `n >= 1`: `⌊log₂ n⌋` zeros followed by
/// the binary digits of `n`. `gamma(1) = "1"`, `gamma(5) = "00101"`.
pub fn gamma(n: u128) -> BitString {
    assert!(n >= 1, "gamma is defined for n >= 1");
    let digits = 128 - n.leading_zeros();
    let mut s = BitString::with_capacity(2 * digits as usize - 1);
    for _ in 0..digits - 1 {
        s.push(0);
    }
    for j in (0..digits).rev() {
        s.push(((n >> j) & 1) as u8);
    }
    s
}

/// Error from [`gamma_decode`]: the stream ended inside the code.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("gamma code truncated at bit {at}")]
pub struct GammaTruncated {
    /// Index just past the last available bit.
    pub at: usize,
}

/// Decodes one gamma code starting at `bits[from]`; returns the value and the
/// number of bits consumed.
pub fn gamma_decode(bits: &BitString, from: usize) -> Result<(u128, usize), GammaTruncated> {
    let mut zeros = 0usize;
    loop {
        let i = from + zeros;
        if i >= bits.len() {
            return Err(GammaTruncated { at: bits.len() });
        }
        if bits.bit(i) == 1 {
            break;
        }
        zeros += 1;
    }
    if from + 2 * zeros + 1 > bits.len() {
        return Err(GammaTruncated { at: bits.len() });
    }
    assert!(zeros <= 126, "gamma value beyond u128 range");
    let mut n: u128 = 1;
    for j in 0..zeros {
        n = (n << 1) | u128::from(bits.bit(from + zeros + 1 + j));
    }
    Ok((n, 2 * zeros + 1))
}

/// Cantor pairing `(a + b)(a + b + 1)/2 + b`; a bijection ℕ² → ℕ.
pub fn pair(a: u128, b: u128) -> u128 {
    try_pair(a, b).expect("pair out of u128 range")
}

/// [`pair`] without the panic: `None` when the result exceeds `u128`.
pub fn try_pair(a: u128, b: u128) -> Option<u128> {
    let s = a.checked_add(b)?;
    let tri = s
        .checked_mul(s.checked_add(1)?)
        .map(|v| v / 2)
        .or_else(|| (s / 2).checked_mul(s + 1))
        .or_else(|| ((s + 1) / 2).checked_mul(s))?;
    tri.checked_add(b)
}

/// Inverse of [`pair`].
pub fn unpair(m: u128) -> (u128, u128) {
    // Largest s with s(s+1)/2 <= m, found by integer square root.
    let mut s = isqrt(m.checked_mul(2).expect("unpair out of range"));
    while tri(s) > m {
        s -= 1;
    }
    while tri(s + 1) <= m {
        s += 1;
    }
    let b = m - tri(s);
    (s - b, b)
}

fn tri(s: u128) -> u128 {
    if s % 2 == 0 {
        (s / 2) * (s + 1)
    } else {
        s * ((s + 1) / 2)
    }
}

fn isqrt(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut x = 1u128 << (64 - (n.leading_zeros() / 2).min(63));
    loop {
        let next = (x + n / x) / 2;
        if next >= x {
            return x;
        }
        x = next;
    }
}

/// The triple code `⟨x, p, t⟩ = pair(pair(lex_index(x), lex_index(p)), t)`.
pub fn triple_code(x: &BitString, p: &BitString, t: u128) -> u128 {
    try_triple_code(x, p, t).expect("triple code out of u128 range")
}

/// [`triple_code`] without the panic: `None` when a component or the pairing
/// leaves the exact `u128` range.
pub fn try_triple_code(x: &BitString, p: &BitString, t: u128) -> Option<u128> {
    try_pair(try_pair(try_lex_index(x)?, try_lex_index(p)?)?, t)
}

/// Inverse of [`triple_code`].
pub fn triple_decode(m: u128) -> (BitString, BitString, u128) {
    let (inner, t) = unpair(m);
    let (ix, ip) = unpair(inner);
    (lex_string(ix), lex_string(ip), t)
}
