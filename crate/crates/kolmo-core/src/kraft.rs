//! Online prefix-code allocation and decodable code trees.
//!
//! [`Allocator`] turns a stream of length requests into concrete codewords:
//! request `k` and you get a `k`-bit word prefix-incomparable with everything
//! issued before. The policy is fixed — split the leftmost adequate free
//! interval, always keeping the left half — which makes allocation
//! deterministic and *complete*: as long as the running weight `Σ 2^(−k_i)`
//! stays within capacity, no request ever fails. (The free list always holds
//! intervals of pairwise distinct sizes, increasing left to right, so the
//! total free weight is a sum of distinct powers of two; a request can only
//! fail when even that total is short.)
//!
//! [`CodeTree`] packages issued codewords with payloads as a binary tree that
//! the reference machine's tree-decoding builtin can walk bit by bit, and
//! [`compile_function`] connects the two: any summable length function
//! becomes a registered decoder, giving every payload an explicit program.
//!
//! All weight arithmetic is exact dyadic; there is no floating point here.

use crate::dyadic::Dyadic;
use crate::machine::MachineProfile;
use crate::BitString;

/// Errors from allocation and compilation.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KraftError {
    /// No free interval can host a codeword of the requested length; issuing
    /// it would push the total weight past capacity.
    #[error("insufficient budget for a length-{requested} codeword")]
    InsufficientBudget { requested: u32 },
}

/// Deterministic online codeword allocator over the unit interval.
pub struct Allocator {
    exponent: u32,
    /// Free intervals as cylinder strings: `σ` stands for the dyadic interval
    /// of width `2^(−|σ|)` starting at `0.σ`. Sorted by left endpoint; the
    /// lengths are pairwise distinct and strictly decrease left to right.
    free: Vec<BitString>,
    issued: Vec<BitString>,
}

impl Allocator {
    /// An allocator with capacity exactly 1 (budget exponent 0).
    pub fn new() -> Self {
        Allocator::with_exponent(0)
    }

    /// An allocator with budget exponent `c`: it accepts request streams with
    /// `Σ 2^(−k_i) ≤ 2^c`, issuing codewords of length `k + c` (the weights
    /// are normalized onto the unit interval).
    pub fn with_exponent(c: u32) -> Self {
        Allocator { exponent: c, free: vec![BitString::new()], issued: Vec::new() }
    }

    /// Issues the next codeword for a length-`k` request.
    pub fn request(&mut self, k: u32) -> Result<BitString, KraftError> {
        let need = (k as usize) + (self.exponent as usize);
        let slot = self
            .free
            .iter()
            .position(|s| s.len() <= need)
            .ok_or(KraftError::InsufficientBudget { requested: k })?;
        let stem = self.free.remove(slot);
        // Issue stem ++ 0…0; the split-off right halves re-enter the free
        // list in place, ordered smallest (leftmost) to largest.
        let mut word = stem.clone();
        for _ in stem.len()..need {
            word.push(0);
        }
        let mut inserts = Vec::with_capacity(need - stem.len());
        for cut in (stem.len()..need).rev() {
            let mut right = stem.clone();
            for _ in stem.len()..cut {
                right.push(0);
            }
            right.push(1);
            inserts.push(right);
        }
        self.free.splice(slot..slot, inserts);
        self.issued.push(word.clone());
        Ok(word)
    }

    /// All codewords issued so far, in issue order.
    pub fn issued(&self) -> &[BitString] {
        &self.issued
    }

    /// Exact weight still available, as `Σ 2^(−|σ|)` over free intervals.
    pub fn free_weight(&self) -> Dyadic {
        let mut total = Dyadic::zero();
        for s in &self.free {
            total = total.add(&Dyadic::pow2(-(s.len() as i64)));
        }
        total
    }
}

impl Default for Allocator {
    fn default() -> Self {
        Allocator::new()
    }
}

/// A binary code tree: leaves carry payloads, and following a codeword's bits
/// from the root lands on the payload it encodes. Walking into a missing
/// child is a decoding failure (the machine treats it as leaving the domain).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CodeTree {
    Leaf(u128),
    Node { zero: Option<Box<CodeTree>>, one: Option<Box<CodeTree>> },
}

/// Errors from building or parsing code trees.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("codeword set is not prefix-free at {word}")]
    Conflict { word: String },
    #[error("tree text is malformed near byte {at}")]
    Parse { at: usize },
}

impl CodeTree {
    /// The empty tree: no payloads, every walk fails.
    pub fn empty() -> Self {
        CodeTree::Node { zero: None, one: None }
    }

    /// Builds a tree from `(codeword, payload)` pairs; the codewords must be
    /// prefix-free (the empty codeword alone makes the root a leaf).
    pub fn from_codewords(pairs: &[(BitString, u128)]) -> Result<Self, TreeError> {
        let mut root = CodeTree::empty();
        for (word, payload) in pairs {
            root.insert(word, 0, *payload)?;
        }
        Ok(root)
    }

    fn insert(&mut self, word: &BitString, depth: usize, payload: u128) -> Result<(), TreeError> {
        if depth == word.len() {
            return match self {
                CodeTree::Node { zero: None, one: None } => {
                    *self = CodeTree::Leaf(payload);
                    Ok(())
                }
                _ => Err(TreeError::Conflict { word: word.display_or_epsilon() }),
            };
        }
        match self {
            CodeTree::Leaf(_) => Err(TreeError::Conflict { word: word.display_or_epsilon() }),
            CodeTree::Node { zero, one } => {
                let child = if word.bit(depth) == 0 { zero } else { one };
                child
                    .get_or_insert_with(|| Box::new(CodeTree::empty()))
                    .insert(word, depth + 1, payload)
            }
        }
    }

    /// The child reached by one bit, if present.
    pub fn child(&self, bit: u8) -> Option<&CodeTree> {
        match self {
            CodeTree::Leaf(_) => None,
            CodeTree::Node { zero, one } => {
                if bit == 0 { zero.as_deref() } else { one.as_deref() }
            }
        }
    }

    /// The payload if this node is a leaf.
    pub fn payload(&self) -> Option<u128> {
        match self {
            CodeTree::Leaf(v) => Some(*v),
            CodeTree::Node { .. } => None,
        }
    }

    /// Decodes one codeword from the front of `bits`; returns payload and
    /// bits consumed, or `None` on a walk into a missing child / short input.
    pub fn decode(&self, bits: &BitString) -> Option<(u128, usize)> {
        let mut node = self;
        let mut used = 0;
        loop {
            if let Some(v) = node.payload() {
                return Some((v, used));
            }
            if used == bits.len() {
                return None;
            }
            node = node.child(bits.bit(used))?;
            used += 1;
        }
    }

    /// Number of leaves.
    pub fn leaf_count(&self) -> usize {
        match self {
            CodeTree::Leaf(_) => 1,
            CodeTree::Node { zero, one } => {
                zero.as_ref().map_or(0, |t| t.leaf_count())
                    + one.as_ref().map_or(0, |t| t.leaf_count())
            }
        }
    }

    /// Canonical one-line text: leaves as decimal payloads, internal nodes as
    /// `(left right)`, absent children as `_`.
    pub fn to_text(&self) -> String {
        match self {
            CodeTree::Leaf(v) => v.to_string(),
            CodeTree::Node { zero, one } => {
                let part = |c: &Option<Box<CodeTree>>| match c {
                    Some(t) => t.to_text(),
                    None => "_".to_string(),
                };
                format!("({} {})", part(zero), part(one))
            }
        }
    }

    /// Parses the [`CodeTree::to_text`] format.
    pub fn parse(text: &str) -> Result<Self, TreeError> {
        let bytes = text.trim().as_bytes();
        let (tree, used) = Self::parse_at(bytes, 0)?;
        let tree = tree.ok_or(TreeError::Parse { at: 0 })?;
        if used != bytes.len() {
            return Err(TreeError::Parse { at: used });
        }
        Ok(tree)
    }

    fn parse_at(bytes: &[u8], at: usize) -> Result<(Option<CodeTree>, usize), TreeError> {
        match bytes.get(at) {
            Some(b'_') => Ok((None, at + 1)),
            Some(b'(') => {
                let (zero, mid) = Self::parse_at(bytes, at + 1)?;
                if bytes.get(mid) != Some(&b' ') {
                    return Err(TreeError::Parse { at: mid });
                }
                let (one, end) = Self::parse_at(bytes, mid + 1)?;
                if bytes.get(end) != Some(&b')') {
                    return Err(TreeError::Parse { at: end });
                }
                Ok((
                    Some(CodeTree::Node {
                        zero: zero.map(Box::new),
                        one: one.map(Box::new),
                    }),
                    end + 1,
                ))
            }
            Some(c) if c.is_ascii_digit() => {
                let mut end = at;
                while end < bytes.len() && bytes[end].is_ascii_digit() {
                    end += 1;
                }
                let text = std::str::from_utf8(&bytes[at..end]).unwrap();
                let value: u128 = text.parse().map_err(|_| TreeError::Parse { at })?;
                Ok((Some(CodeTree::Leaf(value)), end))
            }
            _ => Err(TreeError::Parse { at }),
        }
    }
}

/// Compiles the length function `f` on `0..=n_max` into a code tree and
/// registers it in `profile` under tree id `r`. Requires, exactly, that
/// `Σ_{n ≤ n_max} 2^(−f(n)) ≤ 2^c`; each payload `n` receives a codeword of
/// length `f(n) + c`, so the machine gains a program of length
/// `f(n) + c + overhead` printing the `n`-th string (the overhead is
/// [`MachineProfile::tree_decode_overhead`]).
pub fn compile_function<F: Fn(u128) -> u32>(
    f: F,
    c: u32,
    n_max: u128,
    profile: &mut MachineProfile,
    r: u32,
) -> Result<CodeTree, KraftError> {
    let mut weight = Dyadic::zero();
    let mut n = 0u128;
    loop {
        weight = weight.add(&Dyadic::pow2(-(f(n) as i64)));
        if n == n_max {
            break;
        }
        n += 1;
    }
    if Dyadic::pow2(c as i64) < weight {
        return Err(KraftError::InsufficientBudget { requested: f(0) + c });
    }
    let mut alloc = Allocator::new();
    let mut pairs = Vec::new();
    let mut n = 0u128;
    loop {
        let word = alloc.request(f(n) + c)?;
        pairs.push((word, n));
        if n == n_max {
            break;
        }
        n += 1;
    }
    let tree = CodeTree::from_codewords(&pairs).expect("allocator output is prefix-free");
    profile.register_tree(r, tree.clone());
    Ok(tree)
}
