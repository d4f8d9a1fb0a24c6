//! Finite binary strings.
//!
//! [`BitString`] is the universal currency of the workbench: machine programs,
//! machine outputs, codewords, and sequence prefixes are all bit strings. Bits
//! are stored packed, 64 per word, indexed from the first bit fed to a
//! machine (index 0) onward.
//!
//! Serialization convention: a bit string renders as a run of ASCII `'0'`/`'1'`
//! characters. The empty word renders as the empty run in machine-facing
//! records and as `"ε"` in human-facing tables (see
//! [`BitString::display_or_epsilon`]).

use std::fmt;

/// A finite string over {0, 1}, packed 64 bits per word.
///
/// Bit `i` lives in `words[i / 64]` at bit position `i % 64` (LSB-first within
/// a word); unused tail bits are kept zero so that `Eq`/`Hash` can derive from
/// the raw representation.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    /// The empty word.
    pub fn new() -> Self {
        BitString::default()
    }

    /// Builds from a slice of bit values (each must be 0 or 1).
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut s = BitString::with_capacity(bits.len());
        for &b in bits {
            s.push(b);
        }
        s
    }

    /// Empty word with room for `n` bits.
    pub fn with_capacity(n: usize) -> Self {
        BitString {
            words: Vec::with_capacity(n.div_ceil(64)),
            len: 0,
        }
    }

    /// The `len` most significant bits of `value`'s `len`-bit binary
    /// expansion, most significant first: `from_value_len(0b101, 3)` is
    /// `"101"`. Requires `len <= 128`; bits of `value` above `len` must be 0.
    pub fn from_value_len(value: u128, len: u32) -> Self {
        assert!(len <= 128, "packed constructor limited to 128 bits");
        if len < 128 {
            assert!(value >> len == 0, "value has bits above the stated length");
        }
        let mut s = BitString::with_capacity(len as usize);
        for j in (0..len).rev() {
            s.push(((value >> j) & 1) as u8);
        }
        s
    }

    /// Parses a run of `'0'`/`'1'` characters; `""` and `"ε"` parse to the
    /// empty word.
    pub fn parse(text: &str) -> Result<Self, ParseBitsError> {
        if text == "ε" {
            return Ok(BitString::new());
        }
        let mut s = BitString::with_capacity(text.len());
        for ch in text.chars() {
            match ch {
                '0' => s.push(0),
                '1' => s.push(1),
                other => return Err(ParseBitsError { offending: other }),
            }
        }
        Ok(s)
    }

    /// Number of bits.
    pub fn len(&self) -> usize {
        self.len
    }

    /// True for the empty word.
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The bit at index `i` (0 or 1). Panics if out of range.
    #[inline]
    pub fn bit(&self, i: usize) -> u8 {
        assert!(i < self.len, "bit index {i} out of range (len {})", self.len);
        ((self.words[i / 64] >> (i % 64)) & 1) as u8
    }

    /// Appends one bit (must be 0 or 1).
    #[inline]
    pub fn push(&mut self, bit: u8) {
        debug_assert!(bit <= 1);
        if self.len % 64 == 0 {
            self.words.push(0);
        }
        if bit != 0 {
            let w = self.words.last_mut().unwrap();
            *w |= 1u64 << (self.len % 64);
        }
        self.len += 1;
    }

    /// Removes and returns the last bit, if any.
    #[inline]
    pub fn pop(&mut self) -> Option<u8> {
        if self.len == 0 {
            return None;
        }
        self.len -= 1;
        let i = self.len;
        let bit = ((self.words[i / 64] >> (i % 64)) & 1) as u8;
        self.words[i / 64] &= !(1u64 << (i % 64));
        if i % 64 == 0 {
            self.words.pop();
        }
        Some(bit)
    }

    /// Appends all of `other`.
    pub fn extend(&mut self, other: &BitString) {
        for b in other.iter() {
            self.push(b);
        }
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &BitString) -> BitString {
        let mut s = self.clone();
        s.extend(other);
        s
    }

    /// The first `n` bits. Panics if `n > len`.
    pub fn prefix(&self, n: usize) -> BitString {
        assert!(n <= self.len);
        let mut s = BitString::with_capacity(n);
        for i in 0..n {
            s.push(self.bit(i));
        }
        s
    }

    /// True iff `self` is a prefix of `other` (equality counts).
    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        self.len <= other.len && (0..self.len).all(|i| self.bit(i) == other.bit(i))
    }

    /// Iterator over bit values.
    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len).map(move |i| self.bit(i))
    }

    /// The bits as an integer read most-significant-first. `None` if longer
    /// than 128 bits.
    pub fn to_value(&self) -> Option<u128> {
        if self.len > 128 {
            return None;
        }
        let mut v: u128 = 0;
        for b in self.iter() {
            v = (v << 1) | u128::from(b);
        }
        Some(v)
    }

    /// Renders `"ε"` for the empty word, the plain bit run otherwise.
    pub fn display_or_epsilon(&self) -> String {
        if self.is_empty() {
            "ε".to_string()
        } else {
            self.to_string()
        }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b == 0 { "0" } else { "1" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({})", self.display_or_epsilon())
    }
}

impl Ord for BitString {
    /// Length-lexicographic order: shorter strings first, ties broken
    /// lexicographically. This is the enumeration order used throughout.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.len
            .cmp(&other.len)
            .then_with(|| (0..self.len).map(|i| self.bit(i)).cmp((0..other.len).map(|i| other.bit(i))))
    }
}

impl PartialOrd for BitString {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl FromIterator<u8> for BitString {
    fn from_iter<T: IntoIterator<Item = u8>>(iter: T) -> Self {
        let mut s = BitString::new();
        for b in iter {
            s.push(b);
        }
        s
    }
}

/// A character other than `'0'`/`'1'` appeared while parsing a bit run.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid bit character {offending:?}")]
pub struct ParseBitsError {
    offending: char,
}
