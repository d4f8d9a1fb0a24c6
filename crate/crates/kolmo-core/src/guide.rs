//! The workbench guide, compiled.
//!
//! Each module below is one chapter of the book under `book/`, included
//! verbatim, so the guide's code samples build and run as doc-tests of
//! this crate. `cargo test --doc` is what keeps the book honest: a sample
//! that drifts from the library fails the build instead of the reader.
//!
//! Render the same sources as a website with `mdbook build book`.

#[doc = include_str!("../../../book/src/ch01-the-workbench.md")]
pub mod ch01_the_workbench {}

#[doc = include_str!("../../../book/src/ch02-bits-and-codes.md")]
pub mod ch02_bits_and_codes {}

#[doc = include_str!("../../../book/src/ch03-exact-arithmetic.md")]
pub mod ch03_exact_arithmetic {}

#[doc = include_str!("../../../book/src/ch04-the-reference-machine.md")]
pub mod ch04_the_reference_machine {}

#[doc = include_str!("../../../book/src/ch05-enumeration.md")]
pub mod ch05_enumeration {}

#[doc = include_str!("../../../book/src/ch06-kraft-chaitin.md")]
pub mod ch06_kraft_chaitin {}

#[doc = include_str!("../../../book/src/ch07-solovay-functions.md")]
pub mod ch07_solovay_functions {}

#[doc = include_str!("../../../book/src/ch08-weighing-the-limit.md")]
pub mod ch08_weighing_the_limit {}

#[doc = include_str!("../../../book/src/ch09-randomness-monitors.md")]
pub mod ch09_randomness_monitors {}

#[doc = include_str!("../../../book/src/ch10-the-no-gap-construction.md")]
pub mod ch10_the_no_gap_construction {}

#[doc = include_str!("../../../book/src/ch11-the-k-triviality-strategy.md")]
pub mod ch11_the_k_triviality_strategy {}

#[doc = include_str!("../../../book/src/ch12-the-command-line.md")]
pub mod ch12_the_command_line {}
