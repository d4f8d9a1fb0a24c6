//! Staged enumeration of both machine domains, producing the monotone
//! complexity tables and the domain-weight accumulator.
//!
//! The schedule is canonical and recomputed from scratch: at stage `s`,
//! every input of length at most `s` is run in both modes with step budget
//! `s`. A halting run becomes an *event* exactly when `max(|p|, steps) = s`
//! — so each program's event is recorded at the first stage that could have
//! discovered it, exactly once, and the final state depends only on the
//! stage watermark, not on how `advance` calls were sliced.
//!
//! Prefix-mode events require the run to consume its entire input (the
//! input *is* a domain element); halting runs that consume a proper prefix
//! are extensions of an earlier program and are skipped. Plain-mode events
//! take the whole input as the program, whatever was read.
//!
//! From the event set derive: `k(x)`/`c(x)` — the least program length per
//! output, per mode, with stage-indexed history for monotonicity queries;
//! the domain weight `Ω_s = Σ 2^(−|p|)` over prefix events, kept exact; and
//! the counting report behind the complexity-counting experiments.
//!
//! State persists as a line-oriented ledger (`mode p x t stage` records
//! under a fingerprinted header) and restores only under the same machine
//! profile.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use crate::bits::BitString;
use crate::dyadic::Dyadic;
use crate::encodings::lex_string;
use crate::machine::vm::{run_compact, CompactOutcome, Mode};
use crate::machine::MachineProfile;

/// Default cap on per-stage work units (`2^(s+1)·s`); admits stage 22.
pub const DEFAULT_WORK_CAP: u64 = 1 << 28;

/// A discovered halting computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HaltEvent {
    pub mode: Mode,
    /// The program: in prefix mode a domain element, in plain mode the
    /// whole input string.
    pub p: BitString,
    pub x: BitString,
    /// Steps the halting run took.
    pub t: u64,
    /// The stage that recorded the event: `max(|p|, t)`.
    pub stage: u32,
}

/// Packed event record; outputs at desk scale fit 127 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Record {
    mode: Mode,
    p_len: u8,
    p_bits: u32,
    x_len: u8,
    x_bits: u128,
    t: u64,
    stage: u32,
}

impl Record {
    fn event(&self) -> HaltEvent {
        HaltEvent {
            mode: self.mode,
            p: BitString::from_value_len(self.p_bits as u128, self.p_len as u32),
            x: BitString::from_value_len(self.x_bits, self.x_len as u32),
            t: self.t,
            stage: self.stage,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EnumError {
    #[error(
        "stage {stage} needs {work} work units, over the cap {cap}; raise the cap to proceed"
    )]
    ResourceLimit { stage: u32, work: u128, cap: u64 },
    #[error("ledger was produced under profile {found}, not the current profile {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("ledger line {line}: {reason}")]
    CorruptLedger { line: usize, reason: String },
}

/// Complexity lookups shared by the monitors and gap reports: least known
/// program length per output, or `None` while undiscovered.
pub trait ComplexityView {
    /// Prefix-mode complexity bound for `x` at the current stage.
    fn k(&self, x: &BitString) -> Option<u32>;
    /// Plain-mode complexity bound for `x` at the current stage.
    fn c(&self, x: &BitString) -> Option<u32>;
    /// Stage watermark the bounds were computed at.
    fn stage(&self) -> u32;
}

/// Output-keyed improvement history: (stage, shorter length, event index),
/// stages ascending, lengths strictly decreasing.
type BestTable = HashMap<(u8, u128), Vec<(u32, u8, u32)>>;

/// Enumeration state: events, exact `Ω` history, and derived tables.
pub struct EnumState {
    profile: MachineProfile,
    work_cap: u64,
    watermark: u32,
    events: Vec<Record>,
    /// `omega_history[s-1]` = domain weight after stage `s`.
    omega_history: Vec<Dyadic>,
    best_k: BestTable,
    best_c: BestTable,
}

impl EnumState {
    pub fn new(profile: MachineProfile) -> Self {
        EnumState {
            profile,
            work_cap: DEFAULT_WORK_CAP,
            watermark: 0,
            events: Vec::new(),
            omega_history: Vec::new(),
            best_k: HashMap::new(),
            best_c: HashMap::new(),
        }
    }

    pub fn profile(&self) -> &MachineProfile {
        &self.profile
    }

    /// Last completed stage; 0 before any work.
    pub fn watermark(&self) -> u32 {
        self.watermark
    }

    pub fn set_work_cap(&mut self, cap: u64) {
        self.work_cap = cap;
    }

    /// Runs every stage from the watermark up to `stage` inclusive.
    pub fn advance(&mut self, stage: u32) -> Result<(), EnumError> {
        while self.watermark < stage {
            let s = self.watermark + 1;
            let work = (1u128 << (s + 1)) * s as u128;
            if work > self.work_cap as u128 {
                return Err(EnumError::ResourceLimit { stage: s, work, cap: self.work_cap });
            }
            self.run_stage(s);
            self.watermark = s;
            let omega = self.omega_history.last().cloned().unwrap_or_else(Dyadic::zero);
            let omega = self
                .events
                .iter()
                .rev()
                .take_while(|r| r.stage == s)
                .filter(|r| r.mode == Mode::Prefix)
                .fold(omega, |acc, r| acc.add(&Dyadic::pow2(-(r.p_len as i64))));
            self.omega_history.push(omega);
        }
        Ok(())
    }

    fn run_stage(&mut self, s: u32) {
        for mode in [Mode::Prefix, Mode::Plain] {
            for len in 1..=s {
                for code in 0..1u64 << len {
                    let outcome = run_compact(&self.profile, code, len, mode, s as u64);
                    let CompactOutcome::Halted { out_bits, out_len, consumed, steps } = outcome
                    else {
                        continue;
                    };
                    if mode == Mode::Prefix && consumed != len {
                        continue;
                    }
                    if (len as u64).max(steps) != s as u64 {
                        continue;
                    }
                    let record = Record {
                        mode,
                        p_len: len as u8,
                        p_bits: code as u32,
                        x_len: out_len as u8,
                        x_bits: out_bits,
                        t: steps,
                        stage: s,
                    };
                    let idx = self.events.len() as u32;
                    self.events.push(record);
                    index_record(&mut self.best_k, &mut self.best_c, &record, idx);
                }
            }
        }
    }

    /// All events in canonical order (stage, then prefix before plain, then
    /// length, then program bits).
    pub fn events(&self) -> impl Iterator<Item = HaltEvent> + '_ {
        self.events.iter().map(Record::event)
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    /// Least prefix-program length for `x` known by stage `s`.
    pub fn k_at(&self, x: &BitString, s: u32) -> Option<u32> {
        best_at(&self.best_k, x, s)
    }

    /// Least plain-program length for `x` known by stage `s`.
    pub fn c_at(&self, x: &BitString, s: u32) -> Option<u32> {
        best_at(&self.best_c, x, s)
    }

    /// The event behind the current `k(x)` bound.
    pub fn witness_k(&self, x: &BitString) -> Option<HaltEvent> {
        self.witness(&self.best_k, x)
    }

    /// The event behind the current `c(x)` bound.
    pub fn witness_c(&self, x: &BitString) -> Option<HaltEvent> {
        self.witness(&self.best_c, x)
    }

    fn witness(&self, table: &BestTable, x: &BitString) -> Option<HaltEvent> {
        let key = table_key(x)?;
        let history = table.get(&key)?;
        let &(_, _, idx) = history.last()?;
        Some(self.events[idx as usize].event())
    }

    /// Domain weight `Σ 2^(−|p|)` after the last completed stage.
    pub fn omega(&self) -> Dyadic {
        self.omega_history.last().cloned().unwrap_or_else(Dyadic::zero)
    }

    /// Domain weight after stage `s` (1-based; `s ≤ watermark`).
    pub fn omega_at(&self, s: u32) -> Option<&Dyadic> {
        if s == 0 || s > self.watermark {
            return None;
        }
        self.omega_history.get(s as usize - 1)
    }

    /// Derived weight `Σ_x 2^(−k(x))` over discovered outputs.
    pub fn table_weight(&self) -> Dyadic {
        self.best_k
            .values()
            .map(|history| history.last().expect("histories are never empty").1)
            .fold(Dyadic::zero(), |acc, len| acc.add(&Dyadic::pow2(-(len as i64))))
    }

    /// How many strings of length `n` have `k` within `c` of the `n`-th
    /// string's `k`. Undiscovered strings never count; an undiscovered
    /// threshold makes the bound vacuous (every discovered string counts).
    pub fn counting_report(&self, n: u32, c: u32) -> u64 {
        let threshold = self.k(&lex_string(n as u128)).map(|k| k as u64 + c as u64);
        let mut count = 0;
        for code in 0..1u128 << n {
            let w = BitString::from_value_len(code, n);
            if let Some(k) = self.k(&w) {
                if threshold.is_none_or(|limit| k as u64 <= limit) {
                    count += 1;
                }
            }
        }
        count
    }

    /// The matrix of implied counting constants `⌈log₂ max(count,1)⌉ − c`
    /// for `n ≤ n_max`, `c ≤ c_max`, with its maximum.
    pub fn counting_constants(&self, n_max: u32, c_max: u32) -> (Vec<Vec<i64>>, i64) {
        let mut rows = Vec::new();
        let mut max = i64::MIN;
        for n in 0..=n_max {
            let mut row = Vec::new();
            for c in 0..=c_max {
                let count = self.counting_report(n, c);
                let chat = (64 - count.max(1).next_power_of_two().leading_zeros() as i64 - 1)
                    - c as i64;
                max = max.max(chat);
                row.push(chat);
            }
            rows.push(row);
        }
        (rows, max)
    }

    /// Serializes the full state: a fingerprinted header, then one line per
    /// event in canonical order.
    pub fn write_ledger(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(
            w,
            "# kolmo-ledger v1 profile={} watermark={}",
            self.profile.fingerprint(),
            self.watermark
        )?;
        for r in &self.events {
            let e = r.event();
            writeln!(w, "{} {} {} {} {}", e.mode, e.p, display_plain(&e.x), e.t, e.stage)?;
        }
        Ok(())
    }

    /// Restores a state from a ledger produced under the same profile.
    /// Events are validated structurally (parseable, canonically ordered,
    /// within the watermark); the tables and `Ω` history are rebuilt.
    pub fn read_ledger(profile: MachineProfile, r: impl BufRead) -> Result<Self, EnumError> {
        let corrupt = |line: usize, reason: &str| EnumError::CorruptLedger {
            line,
            reason: reason.to_string(),
        };
        let mut lines = r.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| corrupt(1, "empty ledger"))?;
        let header = header.map_err(|e| corrupt(1, &e.to_string()))?;
        let rest = header
            .strip_prefix("# kolmo-ledger v1 profile=")
            .ok_or_else(|| corrupt(1, "missing or malformed header"))?;
        let (fingerprint, watermark) = rest
            .split_once(" watermark=")
            .ok_or_else(|| corrupt(1, "header lacks watermark"))?;
        if fingerprint != profile.fingerprint() {
            return Err(EnumError::FingerprintMismatch {
                expected: profile.fingerprint(),
                found: fingerprint.to_string(),
            });
        }
        let watermark: u32 = watermark
            .parse()
            .map_err(|_| corrupt(1, "watermark is not a number"))?;

        let mut state = EnumState::new(profile);
        let mut prev_key: Option<(u32, u8, u8, u32)> = None;
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| corrupt(lineno, &e.to_string()))?;
            let fields: Vec<&str> = line.split(' ').collect();
            if fields.len() != 5 {
                return Err(corrupt(lineno, "expected 5 fields: mode p x t stage"));
            }
            let mode: Mode = fields[0]
                .parse()
                .map_err(|_| corrupt(lineno, "mode must be prefix or plain"))?;
            let p = BitString::parse(fields[1])
                .map_err(|_| corrupt(lineno, "program is not a bit string"))?;
            let x = BitString::parse(fields[2])
                .map_err(|_| corrupt(lineno, "output is not a bit string"))?;
            let t: u64 = fields[3].parse().map_err(|_| corrupt(lineno, "bad step count"))?;
            let stage: u32 =
                fields[4].parse().map_err(|_| corrupt(lineno, "bad stage"))?;
            if p.is_empty() || p.len() > 32 {
                return Err(corrupt(lineno, "program length out of range"));
            }
            if x.len() > 127 {
                return Err(corrupt(lineno, "output too long"));
            }
            if stage > watermark || (p.len() as u64).max(t) != stage as u64 {
                return Err(corrupt(lineno, "stage does not match the event"));
            }
            let key = (stage, mode as u8, p.len() as u8, p.to_value().unwrap() as u32);
            if prev_key.is_some_and(|prev| prev >= key) {
                return Err(corrupt(lineno, "events out of canonical order"));
            }
            prev_key = Some(key);
            let record = Record {
                mode,
                p_len: p.len() as u8,
                p_bits: p.to_value().unwrap() as u32,
                x_len: x.len() as u8,
                x_bits: x.to_value().unwrap_or(0),
                t,
                stage,
            };
            let idx = state.events.len() as u32;
            state.events.push(record);
            index_record(&mut state.best_k, &mut state.best_c, &record, idx);
        }
        state.watermark = watermark;
        let mut omega = Dyadic::zero();
        let mut iter = state.events.iter().peekable();
        for s in 1..=watermark {
            while let Some(r) = iter.peek() {
                if r.stage != s {
                    break;
                }
                if r.mode == Mode::Prefix {
                    omega = omega.add(&Dyadic::pow2(-(r.p_len as i64)));
                }
                iter.next();
            }
            state.omega_history.push(omega.clone());
        }
        Ok(state)
    }

    /// Structural equality of the persisted content (profile, watermark,
    /// events, `Ω` history); derived tables follow from these.
    pub fn same_state(&self, other: &EnumState) -> bool {
        self.profile.fingerprint() == other.profile.fingerprint()
            && self.watermark == other.watermark
            && self.events == other.events
            && self.omega_history == other.omega_history
    }
}

impl ComplexityView for EnumState {
    fn k(&self, x: &BitString) -> Option<u32> {
        self.k_at(x, self.watermark)
    }

    fn c(&self, x: &BitString) -> Option<u32> {
        self.c_at(x, self.watermark)
    }

    fn stage(&self) -> u32 {
        self.watermark
    }
}

fn table_key(x: &BitString) -> Option<(u8, u128)> {
    if x.len() > 127 {
        return None;
    }
    Some((x.len() as u8, x.to_value().unwrap_or(0)))
}

fn best_at(table: &BestTable, x: &BitString, s: u32) -> Option<u32> {
    let history = table.get(&table_key(x)?)?;
    history
        .iter()
        .take_while(|&&(stage, _, _)| stage <= s)
        .last()
        .map(|&(_, len, _)| len as u32)
}

fn index_record(best_k: &mut BestTable, best_c: &mut BestTable, r: &Record, idx: u32) {
    let table = match r.mode {
        Mode::Prefix => best_k,
        Mode::Plain => best_c,
    };
    let history = table.entry((r.x_len, r.x_bits)).or_default();
    if history.last().is_none_or(|&(_, len, _)| r.p_len < len) {
        history.push((r.stage, r.p_len, idx));
    }
}

/// Machine-facing serialization: the empty word is an empty field, not "ε".
fn display_plain(x: &BitString) -> String {
    if x.is_empty() {
        String::new()
    } else {
        x.to_string()
    }
}
