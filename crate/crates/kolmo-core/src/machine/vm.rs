//! The interpreter: both run modes, step accounting, and the host builtins.
//!
//! A program is `γ(L) ++ bytecode (L bits) ++ data`. The header and bytecode
//! are consumed eagerly — a halting run always counts them among its consumed
//! bits — while data bits are read one at a time, on demand, by `READOUT`,
//! `READWORK`, and the builtins. Each executed instruction costs one step;
//! the builtins add their own documented surcharges. Outcomes:
//!
//! * `Halted { output, consumed, steps }` — the run reached `HALT` (or, in
//!   plain mode, a data read past the end of the input, which halts with the
//!   output produced so far at the cost of that one instruction).
//! * `NeedsInput` — prefix mode only: the run tried to read past the
//!   provided bits (header, bytecode, or data alike), so the input is a
//!   proper prefix of longer programs and decides nothing by itself.
//! * `Undefined` — the input is outside the machine's domain: an unparsable
//!   or incomplete header in plain mode, a program counter leaving the
//!   bytecode without `HALT`, an operand overrunning the bytecode, a
//!   disabled builtin, a walk into a missing tree child, or a quantity past
//!   the machine's exact-arithmetic range.
//! * `OutOfBudget` — the step budget ran out first. Raising the budget never
//!   changes a `Halted` outcome, only resolves `OutOfBudget` ones.
//!
//! Structural checks are made before budget checks at every instruction, so
//! whether an input is `Undefined` never depends on the budget it was run
//! with (only on whether the offending instruction is reached at all).
//!
//! # Builtins
//!
//! `ESCAPE j` is terminal: builtin `j` performs its effect and the machine
//! halts. The four standard builtins:
//!
//! 1. **print-index** — reads `γ(n)` from data, outputs the `n`-th string in
//!    length-lexicographic order. Costs 1 step.
//! 2. **bounded search** — reads `γ(ℓ)`, an `ℓ`-bit bytecode `F`, and
//!    `γ(n)` from data; finds the length-lexicographically least `x` whose
//!    `F`-value is at least `n`, where the `F`-value of `x` is the
//!    length-lex index of the output of `F` run in plain mode on the data
//!    stream `γ(lex_index(x) + 1)` (that stream is exactly `0^|x| 1 x`, so
//!    `F` sees the candidate's length in unary and then its bits). Candidates
//!    that diverge within the profile's inner search budget, or leave the
//!    domain, are skipped. Costs 1 + the number of candidates examined —
//!    charged as if the search ran candidate by candidate, although the
//!    interpreter decides whole subtrees at once whenever `F` halts without
//!    exhausting a candidate prefix.
//! 3. **trace-wrap** — runs a nested prefix-mode simulation on the remaining
//!    data stream; when the inner program halts with output `x`, having
//!    consumed `p` and taken `t` steps, outputs the string with length-lex
//!    index `⟨x, p, t⟩`. Costs 1 + the inner steps; the inner simulation
//!    inherits the outer budget. Inner `NeedsInput`/`Undefined`/`OutOfBudget`
//!    propagate (in plain mode an inner over-read halts the outer machine,
//!    like any other data read past the end, at a cost of 1).
//! 4. **tree-decode** — reads `γ(r)` from data, walks registered code tree
//!    `r` consuming one data bit per branch, outputs the string whose
//!    length-lex index is the leaf payload. Costs 1 step.

use super::MachineProfile;
use crate::encodings::{lex_string, try_lex_index, try_triple_code};
use crate::BitString;

/// Hard cap on nested simulations (trace-wrap inside trace-wrap, search
/// probes inside search probes, …). Exceeding it leaves the domain.
const MAX_DEPTH: u32 = 64;

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunOutcome {
    /// The run halted; `consumed` counts every input bit read (header,
    /// bytecode, and data), `steps` every executed instruction with builtin
    /// surcharges included.
    Halted { output: BitString, consumed: usize, steps: u64 },
    /// Prefix mode: the input ran out before the program decided.
    NeedsInput,
    /// The input is outside the machine's domain.
    Undefined,
    /// The step budget ran out first.
    OutOfBudget,
}

/// Input discipline for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Prefix,
    Plain,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Prefix => write!(f, "prefix"),
            Mode::Plain => write!(f, "plain"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "prefix" => Ok(Mode::Prefix),
            "plain" => Ok(Mode::Plain),
            _ => Err(()),
        }
    }
}

/// Runs a self-delimiting program in prefix mode.
pub fn run_prefix(profile: &MachineProfile, input: &BitString, budget: u64) -> RunOutcome {
    run_mode(profile, input, Mode::Prefix, budget)
}

/// Runs a whole input as a program in plain mode.
pub fn run_plain(profile: &MachineProfile, input: &BitString, budget: u64) -> RunOutcome {
    run_mode(profile, input, Mode::Plain, budget)
}

fn run_mode(profile: &MachineProfile, input: &BitString, mode: Mode, budget: u64) -> RunOutcome {
    let mut cur = Cursor { src: Bits::Slice(input), pos: 0 };
    let mut out = BitString::new();
    let (flow, steps) = run_stream(profile, 0, &mut cur, mode, budget, &mut out);
    finish(flow, out, cur.pos, steps)
}

/// Runs bare bytecode (no length header) in plain mode over an explicit data
/// stream; `consumed` counts data bits only. This is exactly how the bounded
/// search builtin evaluates its function bytecode on a candidate.
pub fn run_bytecode_plain(
    profile: &MachineProfile,
    bytecode: &BitString,
    data: &BitString,
    budget: u64,
) -> RunOutcome {
    let mut cur = Cursor { src: Bits::Slice(data), pos: 0 };
    let mut out = BitString::new();
    let (flow, steps) = exec_body(
        profile,
        0,
        Bits::Slice(bytecode),
        0,
        bytecode.len(),
        &mut cur,
        Mode::Plain,
        budget,
        &mut out,
    );
    finish(flow, out, cur.pos, steps)
}

fn finish(flow: Flow, output: BitString, consumed: usize, steps: u64) -> RunOutcome {
    match flow {
        Flow::Halt { .. } => RunOutcome::Halted { output, consumed, steps },
        Flow::NeedsInput => RunOutcome::NeedsInput,
        Flow::Undefined => RunOutcome::Undefined,
        Flow::OutOfBudget => RunOutcome::OutOfBudget,
    }
}

/// Compact outcome for the enumerator's hot path: output packed into a
/// `u128` (desk-scale runs never output more).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum CompactOutcome {
    Halted { out_bits: u128, out_len: u32, consumed: u32, steps: u64 },
    NeedsInput,
    Undefined,
    OutOfBudget,
}

/// Runs a program given as the `len` low-order bits of `bits` (MSB of the
/// program first), without allocating. Outputs longer than 127 bits are a
/// desk-scale overflow and panic; enumeration budgets keep them far shorter.
pub(crate) fn run_compact(
    profile: &MachineProfile,
    bits: u64,
    len: u32,
    mode: Mode,
    budget: u64,
) -> CompactOutcome {
    let mut cur = Cursor { src: Bits::Packed { bits, len }, pos: 0 };
    let mut out = PackedOut { bits: 0, len: 0 };
    let (flow, steps) = run_stream(profile, 0, &mut cur, mode, budget, &mut out);
    match flow {
        Flow::Halt { .. } => CompactOutcome::Halted {
            out_bits: out.take_bits(),
            out_len: out.len,
            consumed: cur.pos as u32,
            steps,
        },
        Flow::NeedsInput => CompactOutcome::NeedsInput,
        Flow::Undefined => CompactOutcome::Undefined,
        Flow::OutOfBudget => CompactOutcome::OutOfBudget,
    }
}

/// An output accumulator; the enumerator's is packed, the public one a
/// `BitString`.
trait Sink {
    fn put(&mut self, bit: u8);
}

impl Sink for BitString {
    #[inline]
    fn put(&mut self, bit: u8) {
        self.push(bit);
    }
}

struct PackedOut {
    bits: u128,
    len: u32,
}

impl Sink for PackedOut {
    #[inline]
    fn put(&mut self, bit: u8) {
        assert!(self.len < 128, "compact run output exceeded 128 bits");
        if bit != 0 {
            self.bits |= 1u128 << (127 - self.len);
        }
        self.len += 1;
    }
}

impl PackedOut {
    fn take_bits(&self) -> u128 {
        // Stored MSB-first from the top; shift down to a right-aligned value.
        if self.len == 0 { 0 } else { self.bits >> (128 - self.len) }
    }
}

/// Read-only bit source, either packed (MSB of the string in the high
/// position of the low `len` bits) or a borrowed `BitString`.
#[derive(Clone, Copy)]
enum Bits<'a> {
    Packed { bits: u64, len: u32 },
    Slice(&'a BitString),
}

impl Bits<'_> {
    #[inline]
    fn len(&self) -> usize {
        match self {
            Bits::Packed { len, .. } => *len as usize,
            Bits::Slice(s) => s.len(),
        }
    }

    #[inline]
    fn at(&self, i: usize) -> u8 {
        match self {
            Bits::Packed { bits, len } => ((bits >> (*len as usize - 1 - i)) & 1) as u8,
            Bits::Slice(s) => s.bit(i),
        }
    }

    fn extract(&self, start: usize, end: usize) -> BitString {
        let mut out = BitString::with_capacity(end - start);
        for i in start..end {
            out.push(self.at(i));
        }
        out
    }
}

/// One-way read head over a bit source.
struct Cursor<'a> {
    src: Bits<'a>,
    pos: usize,
}

impl Cursor<'_> {
    #[inline]
    fn read(&mut self) -> Option<u8> {
        if self.pos < self.src.len() {
            let b = self.src.at(self.pos);
            self.pos += 1;
            Some(b)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Flow {
    /// `eof` marks a plain-mode halt caused by a data read past the end.
    Halt { eof: bool },
    NeedsInput,
    Undefined,
    OutOfBudget,
}

/// What a failed data read means: in prefix mode the program is incomplete;
/// in plain mode the reading instruction halts the machine.
#[inline]
fn eof_flow(mode: Mode) -> Flow {
    match mode {
        Mode::Prefix => Flow::NeedsInput,
        Mode::Plain => Flow::Halt { eof: true },
    }
}

/// Parses the header off the cursor, then executes the bytecode. All reads —
/// header, bytecode, data — come from the one stream, which is how the
/// trace-wrap builtin nests a whole simulation inside another program's data.
fn run_stream<S: Sink>(
    profile: &MachineProfile,
    depth: u32,
    cur: &mut Cursor<'_>,
    mode: Mode,
    budget: u64,
    out: &mut S,
) -> (Flow, u64) {
    if depth > MAX_DEPTH {
        return (Flow::Undefined, 0);
    }
    // In plain mode a missing or truncated header is not a data read: the
    // input simply fails to be a program.
    let header_fail = match mode {
        Mode::Prefix => Flow::NeedsInput,
        Mode::Plain => Flow::Undefined,
    };
    let mut zeros = 0u32;
    loop {
        match cur.read() {
            None => return (header_fail, 0),
            Some(0) => {
                zeros += 1;
                if zeros > 63 {
                    return (Flow::Undefined, 0);
                }
            }
            Some(_) => break,
        }
    }
    let mut code_len = 1u64;
    for _ in 0..zeros {
        match cur.read() {
            None => return (header_fail, 0),
            Some(b) => code_len = code_len << 1 | b as u64,
        }
    }
    let code_len = code_len as usize;
    if cur.src.len() - cur.pos < code_len {
        return (header_fail, 0);
    }
    let code_start = cur.pos;
    cur.pos += code_len;
    exec_body(profile, depth, cur.src, code_start, code_len, cur, mode, budget, out)
}

/// The instruction loop over a bytecode window; data reads continue from
/// `cur`. Returns the flow and the steps charged.
#[allow(clippy::too_many_arguments)]
fn exec_body<S: Sink>(
    profile: &MachineProfile,
    depth: u32,
    code: Bits<'_>,
    code_start: usize,
    code_len: usize,
    cur: &mut Cursor<'_>,
    mode: Mode,
    budget: u64,
    out: &mut S,
) -> (Flow, u64) {
    if depth > MAX_DEPTH {
        return (Flow::Undefined, 0);
    }
    let mut steps: u64 = 0;
    let mut pc: usize = 0;
    let mut tape: Vec<u8> = Vec::new();
    let mut head: usize = 0;
    let mut ctr: u64 = 0;
    loop {
        // Structural checks first (PC escape, operand overruns), budget after.
        if pc + 4 > code_len {
            return (Flow::Undefined, steps);
        }
        let mut op = 0u8;
        for i in 0..4 {
            op = op << 1 | code.at(code_start + pc + i);
        }
        let (operand, op_width) = if op >= 10 {
            match code_gamma(code, code_start, code_len, pc + 4) {
                Some(v) => v,
                None => return (Flow::Undefined, steps),
            }
        } else {
            (0, 0)
        };
        if steps == budget {
            return (Flow::OutOfBudget, steps);
        }
        steps += 1;
        let after = pc + 4 + op_width;
        pc = after;
        match op {
            0 => return (Flow::Halt { eof: false }, steps),
            1 => out.put(0),
            2 => out.put(1),
            3 => match cur.read() {
                Some(b) => out.put(b),
                None => return (eof_flow(mode), steps),
            },
            4 => match cur.read() {
                Some(b) => write_cell(&mut tape, head, b),
                None => return (eof_flow(mode), steps),
            },
            5 => write_cell(&mut tape, head, 0),
            6 => write_cell(&mut tape, head, 1),
            7 => head = head.saturating_sub(1),
            8 => head += 1,
            9 => out.put(read_cell(&tape, head)),
            10 => ctr = operand,
            11 => {
                if ctr > 0 {
                    ctr -= 1;
                    if ctr > 0 {
                        let d = operand as usize;
                        if d > after {
                            return (Flow::Undefined, steps);
                        }
                        pc = after - d;
                    }
                }
            }
            12 => {
                if read_cell(&tape, head) == 0 {
                    pc = after.saturating_add(operand as usize);
                }
            }
            13 => {
                if read_cell(&tape, head) == 0 {
                    let d = operand as usize;
                    if d > after {
                        return (Flow::Undefined, steps);
                    }
                    pc = after - d;
                }
            }
            14 => {
                let d = operand as usize;
                if d > after {
                    return (Flow::Undefined, steps);
                }
                pc = after - d;
            }
            _ => {
                // ESCAPE j: terminal builtin dispatch.
                if operand > u32::MAX as u64 || !profile.builtin_enabled(operand as u32) {
                    return (Flow::Undefined, steps);
                }
                return builtin(profile, depth, operand as u32, cur, mode, budget, steps, out);
            }
        }
    }
}

#[inline]
fn read_cell(tape: &[u8], head: usize) -> u8 {
    tape.get(head).copied().unwrap_or(0)
}

#[inline]
fn write_cell(tape: &mut Vec<u8>, head: usize, bit: u8) {
    if head >= tape.len() {
        tape.resize(head + 1, 0);
    }
    tape[head] = bit;
}

/// Gamma decode inside a bytecode window; `None` on overrun or a value past
/// `u64` (64 or more leading zeros).
fn code_gamma(code: Bits<'_>, base: usize, len: usize, at: usize) -> Option<(u64, usize)> {
    let mut zeros = 0usize;
    let mut i = at;
    loop {
        if i >= len {
            return None;
        }
        if code.at(base + i) == 1 {
            break;
        }
        zeros += 1;
        if zeros > 63 {
            return None;
        }
        i += 1;
    }
    if i + zeros >= len {
        return None;
    }
    let mut v: u64 = 1;
    for j in 1..=zeros {
        v = v << 1 | code.at(base + i + j) as u64;
    }
    Some((v, 2 * zeros + 1))
}

enum DataGamma {
    Value(u128),
    Eof,
    /// 127 or more leading zeros: past the machine's exact range.
    Overlong,
}

/// Gamma decode from the data stream.
fn data_gamma(cur: &mut Cursor<'_>) -> DataGamma {
    let mut zeros = 0u32;
    loop {
        match cur.read() {
            None => return DataGamma::Eof,
            Some(0) => {
                zeros += 1;
                if zeros > 126 {
                    return DataGamma::Overlong;
                }
            }
            Some(_) => break,
        }
    }
    let mut v: u128 = 1;
    for _ in 0..zeros {
        match cur.read() {
            None => return DataGamma::Eof,
            Some(b) => v = v << 1 | b as u128,
        }
    }
    DataGamma::Value(v)
}

fn put_lex_string<S: Sink>(out: &mut S, n: u128) {
    let s = lex_string(n);
    for b in s.iter() {
        out.put(b);
    }
}

/// Executes builtin `j`. `steps` already includes the `ESCAPE` instruction's
/// own cost of 1; surcharges are added here. Every builtin is terminal.
#[allow(clippy::too_many_arguments)]
fn builtin<S: Sink>(
    profile: &MachineProfile,
    depth: u32,
    j: u32,
    cur: &mut Cursor<'_>,
    mode: Mode,
    budget: u64,
    steps: u64,
    out: &mut S,
) -> (Flow, u64) {
    match j {
        1 => {
            let n = match data_gamma(cur) {
                DataGamma::Value(v) => v,
                DataGamma::Eof => return (eof_flow(mode), steps),
                DataGamma::Overlong => return (Flow::Undefined, steps),
            };
            put_lex_string(out, n);
            (Flow::Halt { eof: false }, steps)
        }
        2 => search_ge(profile, depth, cur, mode, budget, steps, out),
        3 => trace_wrap(profile, depth, cur, mode, budget, steps, out),
        4 => {
            let r = match data_gamma(cur) {
                DataGamma::Value(v) => v,
                DataGamma::Eof => return (eof_flow(mode), steps),
                DataGamma::Overlong => return (Flow::Undefined, steps),
            };
            if r > u32::MAX as u128 {
                return (Flow::Undefined, steps);
            }
            let Some(mut node) = profile.tree(r as u32) else {
                return (Flow::Undefined, steps);
            };
            loop {
                if let Some(payload) = node.payload() {
                    put_lex_string(out, payload);
                    return (Flow::Halt { eof: false }, steps);
                }
                let bit = match cur.read() {
                    Some(b) => b,
                    None => return (eof_flow(mode), steps),
                };
                node = match node.child(bit) {
                    Some(child) => child,
                    None => return (Flow::Undefined, steps),
                };
            }
        }
        _ => (Flow::Undefined, steps),
    }
}

/// Builtin 3: nested prefix-mode simulation on the remaining stream.
fn trace_wrap<S: Sink>(
    profile: &MachineProfile,
    depth: u32,
    cur: &mut Cursor<'_>,
    mode: Mode,
    budget: u64,
    steps: u64,
    out: &mut S,
) -> (Flow, u64) {
    let remaining = budget - steps;
    let inner_start = cur.pos;
    let mut inner_out = BitString::new();
    let (flow, inner_steps) =
        run_stream(profile, depth + 1, cur, Mode::Prefix, remaining, &mut inner_out);
    match flow {
        Flow::Halt { .. } => {
            let p = cur.src.extract(inner_start, cur.pos);
            let Some(m) = try_triple_code(&inner_out, &p, inner_steps as u128) else {
                return (Flow::Undefined, steps);
            };
            put_lex_string(out, m);
            (Flow::Halt { eof: false }, steps + inner_steps)
        }
        // The inner simulation reading past the end is a data read past the
        // end of the outer input.
        Flow::NeedsInput => (eof_flow(mode), steps),
        Flow::Undefined => (Flow::Undefined, steps),
        Flow::OutOfBudget => (Flow::OutOfBudget, steps),
    }
}

/// Builtin 2: least `x` (length-lex) whose `F`-value reaches `n`.
fn search_ge<S: Sink>(
    profile: &MachineProfile,
    depth: u32,
    cur: &mut Cursor<'_>,
    mode: Mode,
    budget: u64,
    steps: u64,
    out: &mut S,
) -> (Flow, u64) {
    let f_len = match data_gamma(cur) {
        DataGamma::Value(v) => v,
        DataGamma::Eof => return (eof_flow(mode), steps),
        DataGamma::Overlong => return (Flow::Undefined, steps),
    };
    if f_len > u32::MAX as u128 {
        return (Flow::Undefined, steps);
    }
    let mut f = BitString::with_capacity(f_len as usize);
    for _ in 0..f_len {
        match cur.read() {
            Some(b) => f.push(b),
            None => return (eof_flow(mode), steps),
        }
    }
    let n = match data_gamma(cur) {
        DataGamma::Value(v) => v,
        DataGamma::Eof => return (eof_flow(mode), steps),
        DataGamma::Overlong => return (Flow::Undefined, steps),
    };
    if depth + 1 > MAX_DEPTH {
        return (Flow::Undefined, steps);
    }
    // The remaining budget bounds how many candidates may be examined: the
    // first candidate of block k is globally candidate number 2^k.
    let remaining = (budget - steps) as u128;
    let search = Search { profile, depth: depth + 1, f: &f, n };
    let mut k = 0u32;
    loop {
        if (1u128 << k) > remaining {
            return (Flow::OutOfBudget, steps);
        }
        let mut prefix = BitString::new();
        match search.explore(k, &mut prefix) {
            Explored::Found(x) => {
                let examined = try_lex_index(&x).expect("block depth is bounded") + 1;
                if examined > remaining {
                    return (Flow::OutOfBudget, steps);
                }
                for b in x.iter() {
                    out.put(b);
                }
                return (Flow::Halt { eof: false }, steps + examined as u64);
            }
            Explored::NotHere => k += 1,
            Explored::Abort => return (Flow::Undefined, steps),
        }
    }
}

struct Search<'a> {
    profile: &'a MachineProfile,
    depth: u32,
    f: &'a BitString,
    n: u128,
}

enum Explored {
    Found(BitString),
    NotHere,
    Abort,
}

enum Probe {
    /// `F` halted early or left the domain: the whole candidate subtree
    /// under this prefix shares one verdict.
    Decided { hit: bool },
    /// `F` demanded a candidate bit beyond the prefix: split on it.
    Branch,
    Abort,
}

impl Search<'_> {
    /// Depth-first over candidate prefixes of block `k`, leftmost first;
    /// returns the least candidate whose value reaches `n`.
    fn explore(&self, k: u32, prefix: &mut BitString) -> Explored {
        match self.probe(k, prefix) {
            Probe::Decided { hit: true } => {
                // Least candidate under this prefix: pad with zeros.
                let mut x = prefix.clone();
                while x.len() < k as usize {
                    x.push(0);
                }
                Explored::Found(x)
            }
            Probe::Decided { hit: false } => Explored::NotHere,
            Probe::Abort => Explored::Abort,
            Probe::Branch => {
                for bit in [0, 1] {
                    prefix.push(bit);
                    match self.explore(k, prefix) {
                        Explored::NotHere => {}
                        found_or_abort => {
                            prefix.pop();
                            return found_or_abort;
                        }
                    }
                    prefix.pop();
                }
                Explored::NotHere
            }
        }
    }

    /// Runs `F` on `0^k 1 prefix` in plain mode under the inner budget.
    fn probe(&self, k: u32, prefix: &BitString) -> Probe {
        let mut input = BitString::with_capacity(k as usize + 1 + prefix.len());
        for _ in 0..k {
            input.push(0);
        }
        input.push(1);
        input.extend(prefix);
        let mut cur = Cursor { src: Bits::Slice(&input), pos: 0 };
        let mut f_out = BitString::new();
        let (flow, _) = exec_body(
            self.profile,
            self.depth,
            Bits::Slice(self.f),
            0,
            self.f.len(),
            &mut cur,
            Mode::Plain,
            self.profile.inner_search_budget(),
            &mut f_out,
        );
        match flow {
            Flow::Halt { eof: true } if prefix.len() < k as usize => Probe::Branch,
            Flow::Halt { .. } => match try_lex_index(&f_out) {
                Some(v) => Probe::Decided { hit: v >= self.n },
                // Output past the exact range: skip these candidates.
                None => Probe::Decided { hit: false },
            },
            // Divergent or out-of-domain candidates are skipped, and the
            // verdict covers the whole subtree (it cannot depend on unread
            // candidate bits).
            Flow::OutOfBudget | Flow::Undefined => Probe::Decided { hit: false },
            Flow::NeedsInput => Probe::Abort,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encodings::{gamma, triple_code};
    use crate::kraft::CodeTree;
    use crate::machine::asm::{assemble_program, Instr};

    fn profile() -> MachineProfile {
        MachineProfile::standard()
    }

    fn program(instrs: &[Instr], data: &str) -> BitString {
        let mut p = assemble_program(instrs).unwrap();
        if !data.is_empty() {
            p.extend(&BitString::parse(data).unwrap());
        }
        p
    }

    fn halted(out: &str, consumed: usize, steps: u64) -> RunOutcome {
        RunOutcome::Halted {
            output: BitString::parse(out).unwrap(),
            consumed,
            steps,
        }
    }

    #[test]
    fn print_101_pencil_trace() {
        let p = program(&[Instr::Out1, Instr::Out0, Instr::Out1, Instr::Halt], "");
        assert_eq!(p.len(), 25);
        assert_eq!(run_prefix(&profile(), &p, 100), halted("101", 25, 4));
        assert_eq!(run_prefix(&profile(), &p, 4), halted("101", 25, 4));
        assert_eq!(run_prefix(&profile(), &p, 3), RunOutcome::OutOfBudget);
        assert_eq!(run_plain(&profile(), &p, 100), halted("101", 25, 4));
    }

    #[test]
    fn empty_and_truncated_inputs() {
        let empty = BitString::new();
        assert_eq!(run_prefix(&profile(), &empty, 10), RunOutcome::NeedsInput);
        assert_eq!(run_plain(&profile(), &empty, 10), RunOutcome::Undefined);
        // A header promising more bytecode than provided.
        let short = BitString::parse("00100").unwrap();
        assert_eq!(run_prefix(&profile(), &short, 10), RunOutcome::NeedsInput);
        assert_eq!(run_plain(&profile(), &short, 10), RunOutcome::Undefined);
    }

    #[test]
    fn minimal_halting_program_is_nine_bits() {
        let p = program(&[Instr::Halt], "");
        assert_eq!(p.len(), 9);
        assert_eq!(run_prefix(&profile(), &p, 1), halted("", 9, 1));
        // No shorter input halts: exhaustively check all of them.
        for len in 0..9u32 {
            for code in 0u64..1 << len {
                let out = run_compact(&profile(), code, len, Mode::Prefix, 50);
                assert!(
                    !matches!(out, CompactOutcome::Halted { .. }),
                    "unexpected halt at len {len} code {code:b}"
                );
            }
        }
    }

    #[test]
    fn copy_three_pencil_trace() {
        let instrs =
            [Instr::SetCtr(3), Instr::ReadOut, Instr::DecJnzB(15), Instr::Halt];
        let p = program(&instrs, "101");
        assert_eq!(p.len(), 38);
        assert_eq!(run_prefix(&profile(), &p, 100), halted("101", 38, 8));
        assert_eq!(run_prefix(&profile(), &p, 8), halted("101", 38, 8));
        assert_eq!(run_prefix(&profile(), &p, 7), RunOutcome::OutOfBudget);
        // Short data: prefix mode wants more; plain mode halts on the read.
        let p = program(&instrs, "10");
        assert_eq!(run_prefix(&profile(), &p, 100), RunOutcome::NeedsInput);
        assert_eq!(run_plain(&profile(), &p, 100), halted("10", 37, 6));
    }

    #[test]
    fn copy_all_plain_bound() {
        // READOUT; JMPB 15 — copies the entire data stream, then the failing
        // read halts it: plain complexity of any x is at most |x| + 22.
        let instrs = [Instr::ReadOut, Instr::JmpB(15)];
        for x in ["", "1", "00", "10110", "111000111000"] {
            let p = program(&instrs, x);
            assert_eq!(p.len(), x.len() + 22);
            let budget = 2 * x.len() as u64 + 1;
            assert_eq!(
                run_plain(&profile(), &p, budget),
                halted(x, x.len() + 22, budget)
            );
            assert_eq!(run_plain(&profile(), &p, budget - 1), RunOutcome::OutOfBudget);
            // In prefix mode the same input never halts — it always wants
            // one more bit.
            assert_eq!(run_prefix(&profile(), &p, 1000), RunOutcome::NeedsInput);
        }
    }

    #[test]
    fn work_tape_and_moves() {
        // W1 at cell 0; RIGHT onto a fresh zero cell; OUTW both.
        let p = program(
            &[Instr::W1, Instr::Right, Instr::OutW, Instr::Left, Instr::OutW, Instr::Halt],
            "",
        );
        assert_eq!(run_prefix(&profile(), &p, 100), halted("01", 33, 6));
        // LEFT at cell 0 stays put.
        let p = program(&[Instr::Left, Instr::Left, Instr::OutW, Instr::Halt], "");
        assert_eq!(run_prefix(&profile(), &p, 100), halted("0", 25, 4));
    }

    #[test]
    fn conditional_jumps() {
        // W0; JZF 4 skips the OUT1.
        let p = program(&[Instr::W0, Instr::JzF(4), Instr::Out1, Instr::Halt], "");
        assert_eq!(run_prefix(&profile(), &p, 100), halted("", 30, 3));
        // W1; JZF 4 does not.
        let p = program(&[Instr::W1, Instr::JzF(4), Instr::Out1, Instr::Halt], "");
        assert_eq!(run_prefix(&profile(), &p, 100), halted("1", 30, 4));
        // A forward jump out of the bytecode leaves the domain.
        let p = program(&[Instr::W0, Instr::JzF(50), Instr::Halt], "");
        assert_eq!(run_prefix(&profile(), &p, 100), RunOutcome::Undefined);
        // A backward jump past the start does too.
        let p = program(&[Instr::W0, Instr::JzB(50), Instr::Halt], "");
        assert_eq!(run_prefix(&profile(), &p, 100), RunOutcome::Undefined);
    }

    #[test]
    fn missing_halt_is_undefined() {
        let p = program(&[Instr::Out1, Instr::Out0], "");
        assert_eq!(run_prefix(&profile(), &p, 100), RunOutcome::Undefined);
    }

    #[test]
    fn print_index_builtin() {
        // ESCAPE 1 with γ(5): prints the 5th string, "10".
        let mut p = program(&[Instr::Escape(1)], "");
        assert_eq!(p.len(), 10);
        p.extend(&gamma(5));
        assert_eq!(p.len(), 15);
        assert_eq!(run_prefix(&profile(), &p, 10), halted("10", 15, 1));
        // Without its argument the program is a proper prefix.
        let p = program(&[Instr::Escape(1)], "");
        assert_eq!(run_prefix(&profile(), &p, 10), RunOutcome::NeedsInput);
        assert_eq!(run_plain(&profile(), &p, 10), halted("", 10, 1));
        // Builtins can be disabled wholesale.
        let mut p = program(&[Instr::Escape(1)], "");
        p.extend(&gamma(5));
        assert_eq!(run_prefix(&MachineProfile::bytecode_only(), &p, 10), RunOutcome::Undefined);
    }

    #[test]
    fn trace_wrap_builtin() {
        // Wrap the 9-bit HALT program: inner halts with empty output after
        // 1 step having consumed 9 bits.
        let inner = program(&[Instr::Halt], "");
        let mut p = program(&[Instr::Escape(3)], "");
        assert_eq!(p.len(), 12);
        p.extend(&inner);
        let m = triple_code(&BitString::new(), &inner, 1);
        let expect = lex_string(m);
        let out = run_prefix(&profile(), &p, 100);
        assert_eq!(out, halted(&expect.to_string(), 21, 2));
        // The inner simulation inherits the budget: inner needs 1 step, the
        // escape costs 1 more.
        assert_eq!(run_prefix(&profile(), &p, 1), RunOutcome::OutOfBudget);
        // Truncated inner program: outer prefix run is itself incomplete.
        let p = program(&[Instr::Escape(3)], "");
        assert_eq!(run_prefix(&profile(), &p, 100), RunOutcome::NeedsInput);
        assert_eq!(run_plain(&profile(), &p, 100), halted("", 12, 1));
    }

    #[test]
    fn tree_decode_builtin() {
        let mut prof = profile();
        prof.register_tree(
            1,
            CodeTree::from_codewords(&[
                (BitString::parse("0").unwrap(), 7),
                (BitString::parse("10").unwrap(), 3),
            ])
            .unwrap(),
        );
        let make = |data: &str| {
            let mut p = program(&[Instr::Escape(4)], "");
            p.extend(&gamma(1));
            if !data.is_empty() {
                p.extend(&BitString::parse(data).unwrap());
            }
            p
        };
        // Overhead check: 16 header+bytecode bits, γ(1) = 1 bit, then the
        // codeword.
        let p = make("10");
        assert_eq!(p.len(), MachineProfile::tree_decode_overhead(1) + 2);
        assert_eq!(run_prefix(&prof, &p, 10), halted("00", 19, 1));
        assert_eq!(run_prefix(&prof, &make("0"), 10), halted("000", 18, 1));
        // Missing child: out of the domain. Missing tree: same.
        assert_eq!(run_prefix(&prof, &make("11"), 10), RunOutcome::Undefined);
        assert_eq!(run_prefix(&profile(), &make("0"), 10), RunOutcome::Undefined);
        // Codeword cut short: needs input.
        assert_eq!(run_prefix(&prof, &make("1"), 10), RunOutcome::NeedsInput);
    }

    /// Bounded search driven by a two-read bytecode: F outputs the first two
    /// bits of its stream, so on 0^k 1 x… its value is ι(first two bits).
    #[test]
    fn search_ge_block_decided() {
        let f = crate::machine::asm::assemble(&[Instr::ReadOut, Instr::ReadOut, Instr::Halt])
            .unwrap();
        let make = |n: u128| {
            let mut p = program(&[Instr::Escape(2)], "");
            p.extend(&gamma(f.len() as u128));
            p.extend(&f);
            p.extend(&gamma(n));
            p
        };
        // n = 3: block 0 gives ι("1") = 2 (the stream "1" ends early — its
        // one candidate really does halt with output "1"); block 1 streams
        // start 0,1 so every candidate has value ι("01") = 4 ≥ 3; least is
        // x = "0", the 2nd candidate examined overall.
        assert_eq!(run_prefix(&profile(), &make(3), 100), halted("0", make(3).len(), 3));
        // n = 5 is unreachable (max value ι("11") = 6 needs first bits 11,
        // impossible past block 0... block 0's sole candidate gives 2):
        // value 5 or 6 never occurs, so the search burns its budget.
        assert_eq!(run_prefix(&profile(), &make(7), 100), RunOutcome::OutOfBudget);
        // n = 1: the very first candidate (empty string, stream "1") gives
        // 2 ≥ 1 — one candidate examined, total cost 2.
        assert_eq!(run_prefix(&profile(), &make(1), 100), halted("", make(1).len(), 2));
    }

    /// A three-read F forces real branching inside block 1: the two
    /// candidates of that block have different values.
    #[test]
    fn search_ge_branches_within_block() {
        let f = crate::machine::asm::assemble(&[
            Instr::ReadOut,
            Instr::ReadOut,
            Instr::ReadOut,
            Instr::Halt,
        ])
        .unwrap();
        let make = |n: u128| {
            let mut p = program(&[Instr::Escape(2)], "");
            p.extend(&gamma(f.len() as u128));
            p.extend(&f);
            p.extend(&gamma(n));
            p
        };
        // Block 0: stream "1", value ι("1") = 2. Block 1: stream "01x",
        // so x = "0" has value ι("010") = 9 and x = "1" has ι("011") = 10.
        // n = 10 is first reached by x = "1", candidate number 3.
        assert_eq!(run_prefix(&profile(), &make(10), 100), halted("1", make(10).len(), 4));
        assert_eq!(run_prefix(&profile(), &make(9), 100), halted("0", make(9).len(), 3));
        // Tight budgets: examining 3 candidates costs 4 steps total.
        assert_eq!(run_prefix(&profile(), &make(10), 3), RunOutcome::OutOfBudget);
    }

    #[test]
    fn budget_monotonicity_small_programs() {
        let prof = profile();
        for len in 1..=14u32 {
            for code in 0u64..1 << len {
                for mode in [Mode::Prefix, Mode::Plain] {
                    let low = run_compact(&prof, code, len, mode, 5);
                    if matches!(low, CompactOutcome::Halted { .. }) {
                        assert_eq!(low, run_compact(&prof, code, len, mode, 14));
                    }
                    if matches!(low, CompactOutcome::Undefined) {
                        assert_eq!(low, run_compact(&prof, code, len, mode, 14));
                    }
                }
            }
        }
    }

    #[test]
    fn prefix_halts_agree_with_plain() {
        // Whenever a prefix run halts consuming its whole input, the plain
        // run of the same string halts identically.
        let prof = profile();
        let mut checked = 0u64;
        for len in 1..=16u32 {
            for code in 0u64..1 << len {
                if let CompactOutcome::Halted { out_bits, out_len, consumed, steps } =
                    run_compact(&prof, code, len, Mode::Prefix, 16)
                {
                    if consumed == len {
                        let plain = run_compact(&prof, code, len, Mode::Plain, 16);
                        assert_eq!(
                            plain,
                            CompactOutcome::Halted { out_bits, out_len, consumed, steps }
                        );
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn compact_matches_bitstring_runs() {
        let prof = profile();
        for len in 9..=13u32 {
            for code in 0u64..1 << len {
                let s = BitString::from_value_len(code as u128, len);
                let full = run_prefix(&prof, &s, 13);
                let compact = run_compact(&prof, code, len, Mode::Prefix, 13);
                match (full, compact) {
                    (
                        RunOutcome::Halted { output, consumed, steps },
                        CompactOutcome::Halted {
                            out_bits,
                            out_len,
                            consumed: c2,
                            steps: s2,
                        },
                    ) => {
                        assert_eq!(output.len(), out_len as usize);
                        assert_eq!(output.to_value().unwrap_or(0), out_bits);
                        assert_eq!(consumed, c2 as usize);
                        assert_eq!(steps, s2);
                    }
                    (RunOutcome::NeedsInput, CompactOutcome::NeedsInput) => {}
                    (RunOutcome::Undefined, CompactOutcome::Undefined) => {}
                    (RunOutcome::OutOfBudget, CompactOutcome::OutOfBudget) => {}
                    (a, b) => panic!("mismatch at len {len} code {code:b}: {a:?} vs {b:?}"),
                }
            }
        }
    }

    #[test]
    fn bytecode_plain_runner() {
        let f = crate::machine::asm::assemble(&[Instr::ReadOut, Instr::ReadOut, Instr::Halt])
            .unwrap();
        let data = BitString::parse("10").unwrap();
        assert_eq!(
            run_bytecode_plain(&profile(), &f, &data, 10),
            halted("10", 2, 3)
        );
        // EOF mid-read halts with what was copied.
        let data = BitString::parse("1").unwrap();
        assert_eq!(run_bytecode_plain(&profile(), &f, &data, 10), halted("1", 1, 2));
    }
}
