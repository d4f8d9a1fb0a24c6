//! Desk-scale algorithmic-information workbench.
//!
//! The crate is organized around one fixed reference machine: a bit-exact
//! universal prefix-free machine (and its plain sibling) whose domain grounds
//! every complexity value the other modules produce. On top of it sit a
//! stage-bounded enumerator for `K_s`/`C_s`/`Ω_s`, an online Kraft–Chaitin
//! codeword allocator, the Solovay upper-bound-function toolkit, randomness
//! deficiency monitors, the insertion/selection machinery for no-gap
//! sequences, and a request-ledger builder for the K-triviality strategy.
//!
//! Everything numeric is exact: weights and `Ω` approximations are dyadic
//! rationals with unbounded precision, and all emitted files are
//! byte-deterministic functions of their inputs.

pub mod bits;
pub mod dyadic;
pub mod encodings;
pub mod enumerate;
pub mod guide;
pub mod kraft;
pub mod ktrivial;
pub mod machine;
pub mod monitors;
pub mod nogap;
pub mod solovay;

pub use bits::BitString;
pub use dyadic::Dyadic;
