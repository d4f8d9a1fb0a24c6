//! The no-gap construction suite: stitch a sequence β by inserting zeros
//! into α at scheduled positions `n_k = h⁻¹(k) + t(k)`, where `t` is the
//! running time of an oracle machine computing `h⁻¹`, and then demonstrate
//! that a total staged selection rule recovers exactly the inserted
//! zeros — a computable selection bias, produced while β's initial-segment
//! complexity stays within `h` of α's. Concrete oracle-machine instances
//! with declared cost models stand in for the general coding argument;
//! the selection-rule correctness claim is oracle-agnostic and is what
//! gets tested. A settling-time variant derives approximate insertion
//! positions from the enumerator's Ω history.

use std::fmt::Write as _;

use crate::bits::BitString;
use crate::dyadic::Dyadic;
use crate::enumerate::{ComplexityView, EnumState};
use crate::monitors::{MonitorError, SequenceSource};

/// Scan cap for computing `h⁻¹` by minimization.
const INVERSE_SCAN_CAP: u64 = 1 << 22;

#[derive(Debug, thiserror::Error)]
pub enum NogapError {
    #[error("oracle machine answered {got:?} at k={k}, but h⁻¹(k)={expected}")]
    OracleDisagreement {
        k: u64,
        expected: u64,
        got: Option<u64>,
    },
    #[error("schedule stalls at k={k}: position {position} does not exceed its predecessor")]
    NonIncreasingSchedule { k: u64, position: u64 },
    #[error("h never reaches {k} within the scan range")]
    InverseOutOfRange { k: u64 },
    #[error("source refused: {0}")]
    Source(#[from] MonitorError),
    #[error("unreadable schedule record at line {line}")]
    Corrupt { line: usize },
}

#[derive(Debug, Clone)]
enum HRule {
    Identity,
    HalfFloor,
    CeilSqrt,
    CeilLog,
    Const(u64),
    DualLog(Box<HRule>),
}

fn ceil_sqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while (r as u128) * (r as u128) < n as u128 {
        r += 1;
    }
    while r >= 1 && ((r - 1) as u128) * ((r - 1) as u128) >= n as u128 {
        r -= 1;
    }
    r
}

impl HRule {
    fn eval(&self, n: u64) -> u64 {
        match self {
            HRule::Identity => n,
            HRule::HalfFloor => n / 2,
            HRule::CeilSqrt => ceil_sqrt(n),
            // ⌈log₂(n+2)⌉ = bit length of n+1
            HRule::CeilLog => (u64::BITS - (n + 1).leading_zeros()) as u64,
            HRule::Const(c) => *c,
            HRule::DualLog(inner) => {
                let w = inner.eval(n);
                (u64::BITS - (w + 1).leading_zeros()) as u64
            }
        }
    }

    fn label(&self) -> String {
        match self {
            HRule::Identity => "identity".into(),
            HRule::HalfFloor => "floor-half".into(),
            HRule::CeilSqrt => "ceil-sqrt".into(),
            HRule::CeilLog => "ceil-log2".into(),
            HRule::Const(c) => format!("const-{c}"),
            HRule::DualLog(inner) => format!("log2-of-({})", inner.label()),
        }
    }

    fn unbounded(&self) -> bool {
        match self {
            HRule::Const(_) => false,
            HRule::DualLog(inner) => inner.unbounded(),
            _ => true,
        }
    }
}

/// A declared nondecreasing scale function `h` with its generalized
/// inverse `h⁻¹(k) = min{n : h(n) ≥ k}`.
#[derive(Debug, Clone)]
pub struct NondecreasingFn {
    rule: HRule,
}

impl NondecreasingFn {
    /// `h(n) = n`.
    pub fn identity() -> Self {
        NondecreasingFn {
            rule: HRule::Identity,
        }
    }

    /// `h(n) = ⌊n/2⌋`.
    pub fn half_floor() -> Self {
        NondecreasingFn {
            rule: HRule::HalfFloor,
        }
    }

    /// `h(n) = ⌈√n⌉`.
    pub fn ceil_sqrt() -> Self {
        NondecreasingFn {
            rule: HRule::CeilSqrt,
        }
    }

    /// `h(n) = ⌈log₂(n+2)⌉`.
    pub fn ceil_log() -> Self {
        NondecreasingFn {
            rule: HRule::CeilLog,
        }
    }

    /// `h(n) = c` — bounded, so its inverse dies past `c`; useful as a
    /// degenerate comparison rule.
    pub fn constant(c: u64) -> Self {
        NondecreasingFn {
            rule: HRule::Const(c),
        }
    }

    /// The dual composition `h(n) = ⌈log₂(h'(n) + 2)⌉`: squashes a fast
    /// scale into a slow one for the dual experiment.
    pub fn dual_compose(fast: &NondecreasingFn) -> Self {
        NondecreasingFn {
            rule: HRule::DualLog(Box::new(fast.rule.clone())),
        }
    }

    /// `h(n)`.
    pub fn eval(&self, n: u64) -> u64 {
        self.rule.eval(n)
    }

    /// `h⁻¹(k) = min{n : h(n) ≥ k}`, by scan; `None` when the declared
    /// unboundedness fails to show within the scan range.
    pub fn inverse(&self, k: u64) -> Option<u64> {
        (0..=INVERSE_SCAN_CAP).find(|&n| self.eval(n) >= k)
    }

    /// Display label for provenance lines.
    pub fn label(&self) -> String {
        self.rule.label()
    }

    /// Whether the rule is declared unbounded (a constant rule is not,
    /// and a composition inherits the defect).
    pub fn declared_unbounded(&self) -> bool {
        self.rule.unbounded()
    }

    /// Checks monotonicity on an initial range.
    pub fn verify_monotone(&self, n_max: u64) -> bool {
        (1..=n_max).all(|n| self.eval(n - 1) <= self.eval(n))
    }
}

#[derive(Debug, Clone)]
enum PhiKind {
    Immediate,
    LinearDelay,
    OracleReading,
    Scripted(Vec<u64>),
    Broken { at: u64 },
}

/// What a terminating oracle-machine run reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhiOutcome {
    pub value: u64,
    pub steps: u64,
    /// How many oracle bits the run read; truncating the oracle to this
    /// length never changes the outcome.
    pub use_len: usize,
}

/// A concrete oracle machine computing `h⁻¹` under a declared cost model.
/// `run` answers `None` when the step budget is too small, the scripted
/// delay is exhausted, or the oracle prefix is shorter than the read the
/// cost model performs — the three desk-scale forms of divergence.
#[derive(Debug, Clone)]
pub struct OracleMachine {
    kind: PhiKind,
    h: NondecreasingFn,
}

impl OracleMachine {
    /// Answers in one step, reads nothing.
    pub fn immediate(h: NondecreasingFn) -> Self {
        OracleMachine {
            kind: PhiKind::Immediate,
            h,
        }
    }

    /// Answers in `2k + 1` steps, reads nothing.
    pub fn linear_delay(h: NondecreasingFn) -> Self {
        OracleMachine {
            kind: PhiKind::LinearDelay,
            h,
        }
    }

    /// Reads `2k` oracle bits before answering in `2k + 1` steps.
    pub fn oracle_reading(h: NondecreasingFn) -> Self {
        OracleMachine {
            kind: PhiKind::OracleReading,
            h,
        }
    }

    /// Takes its step counts from a finite script (made usable by the
    /// schedule builder's running-max adjustment); diverges past its end.
    pub fn scripted(h: NondecreasingFn, delays: Vec<u64>) -> Self {
        OracleMachine {
            kind: PhiKind::Scripted(delays),
            h,
        }
    }

    /// Misbehaves at one input — for exercising the disagreement check.
    pub fn broken(h: NondecreasingFn, at: u64) -> Self {
        OracleMachine {
            kind: PhiKind::Broken { at },
            h,
        }
    }

    /// Display label for provenance lines.
    pub fn label(&self) -> String {
        match &self.kind {
            PhiKind::Immediate => "immediate".into(),
            PhiKind::LinearDelay => "linear-delay".into(),
            PhiKind::OracleReading => "oracle-reading".into(),
            PhiKind::Scripted(s) => format!("scripted-{}", s.len()),
            PhiKind::Broken { at } => format!("broken-at-{at}"),
        }
    }

    /// One run against an oracle prefix under a step budget.
    pub fn run(&self, oracle: &BitString, k: u64, budget: u64) -> Option<PhiOutcome> {
        let (steps, use_len) = match &self.kind {
            PhiKind::Immediate | PhiKind::Broken { .. } => (1, 0),
            PhiKind::LinearDelay => (2 * k + 1, 0),
            PhiKind::OracleReading => (2 * k + 1, 2 * k as usize),
            PhiKind::Scripted(delays) => (*delays.get(k as usize)?, 0),
        };
        if steps > budget || use_len > oracle.len() {
            return None;
        }
        let mut value = self.h.inverse(k)?;
        if let PhiKind::Broken { at } = self.kind {
            if k == at {
                value += 1;
            }
        }
        Some(PhiOutcome {
            value,
            steps,
            use_len,
        })
    }
}

/// Strictly increasing insertion positions with their provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InsertionSchedule {
    positions: Vec<u64>,
    pub provenance: String,
}

impl InsertionSchedule {
    /// Wraps explicit positions, insisting on strict increase.
    pub fn from_positions(positions: Vec<u64>, provenance: String) -> Result<Self, NogapError> {
        for (k, pair) in positions.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(NogapError::NonIncreasingSchedule {
                    k: k as u64 + 1,
                    position: pair[1],
                });
            }
        }
        Ok(InsertionSchedule {
            positions,
            provenance,
        })
    }

    /// The positions, strictly increasing.
    pub fn positions(&self) -> &[u64] {
        &self.positions
    }

    /// Whether `j` is an insertion position.
    pub fn is_position(&self, j: u64) -> bool {
        self.positions.binary_search(&j).is_ok()
    }

    /// Number of insertion positions below `n`.
    pub fn insertions_below(&self, n: u64) -> u64 {
        self.positions.partition_point(|&p| p < n) as u64
    }

    /// Largest excess of insertions-below-`n` over `h(n)` on the range —
    /// the schedule-side constant of the construction (at most 1 for any
    /// schedule built from `h` itself).
    pub fn insertion_defect(&self, h: &NondecreasingFn, n_max: u64) -> i64 {
        (1..=n_max)
            .map(|n| self.insertions_below(n) as i64 - h.eval(n) as i64)
            .max()
            .unwrap_or(0)
    }

    /// Line-oriented rendering: a provenance header, then one position
    /// per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("# schedule provenance={}\n", self.provenance);
        for p in &self.positions {
            let _ = writeln!(out, "{p}");
        }
        out
    }

    /// Parses the [`Self::to_text`] format.
    pub fn parse(text: &str) -> Result<Self, NogapError> {
        let mut provenance = String::new();
        let mut positions = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if let Some(rest) = line.strip_prefix("# schedule provenance=") {
                provenance = rest.to_string();
            } else if !line.trim().is_empty() {
                positions.push(
                    line.trim()
                        .parse::<u64>()
                        .map_err(|_| NogapError::Corrupt { line: i + 1 })?,
                );
            }
        }
        Self::from_positions(positions, provenance)
    }
}

/// Builds the insertion schedule `n_k = h⁻¹(k) + t(k)` for `k < count`,
/// verifying the machine really computes `h⁻¹` on α and taking `t` as the
/// running max of the observed step counts (so `t` is nondecreasing, as
/// the construction assumes).
pub fn build_schedule(
    h: &NondecreasingFn,
    phi: &OracleMachine,
    alpha: &SequenceSource,
    count: u64,
) -> Result<InsertionSchedule, NogapError> {
    let oracle = alpha.prefix(2 * count as usize + 8)?;
    let mut positions = Vec::new();
    let mut t = 0u64;
    for k in 0..count {
        let expected = h.inverse(k).ok_or(NogapError::InverseOutOfRange { k })?;
        let outcome = phi.run(&oracle, k, u64::MAX);
        match outcome {
            Some(o) if o.value == expected => t = t.max(o.steps),
            other => {
                return Err(NogapError::OracleDisagreement {
                    k,
                    expected,
                    got: other.map(|o| o.value),
                })
            }
        }
        let n_k = expected + t;
        if let Some(&last) = positions.last() {
            if n_k <= last {
                return Err(NogapError::NonIncreasingSchedule { k, position: n_k });
            }
        }
        positions.push(n_k);
    }
    Ok(InsertionSchedule {
        positions,
        provenance: format!(
            "h={} phi={} alpha={}",
            h.label(),
            phi.label(),
            alpha.label()
        ),
    })
}

/// The stitched prefix β↾n: zeros at scheduled positions, α's bits in
/// order everywhere else.
pub fn insert_zeros(
    alpha: &SequenceSource,
    schedule: &InsertionSchedule,
    n: usize,
) -> Result<BitString, NogapError> {
    let needed = n - schedule.insertions_below(n as u64) as usize;
    let source = alpha.prefix(needed)?;
    let mut beta = BitString::with_capacity(n);
    let mut next = 0;
    for j in 0..n {
        if schedule.is_position(j as u64) {
            beta.push(0);
        } else {
            beta.push(source.bit(next));
            next += 1;
        }
    }
    Ok(beta)
}

/// The inverse stitch: drops the scheduled positions, recovering the α
/// prefix that [`insert_zeros`] consumed.
pub fn delete_positions(beta: &BitString, schedule: &InsertionSchedule) -> BitString {
    let mut alpha = BitString::with_capacity(beta.len());
    for j in 0..beta.len() {
        if !schedule.is_position(j as u64) {
            alpha.push(beta.bit(j));
        }
    }
    alpha
}

/// Per-stage record of the selection run: the state before deciding
/// position `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionStage {
    pub n: u64,
    /// Bits selected so far.
    pub k: u64,
    /// Oracle content accumulated so far; `x_len + k = n` always.
    pub x_len: u64,
}

/// Full transcript of a staged selection run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionTrace {
    /// States at `n = 0..=N` (the last entry is final).
    pub stages: Vec<SelectionStage>,
    /// Selected positions, in order.
    pub selected: Vec<u64>,
    /// The source bits at the selected positions.
    pub selected_bits: BitString,
    /// The accumulated non-selected bits `x_N`.
    pub final_x: BitString,
    pub provenance: String,
}

impl SelectionTrace {
    /// Line-oriented rendering: provenance, then `n k x_len selected`.
    pub fn to_text(&self) -> String {
        let mut out = format!("# trace provenance={}\n", self.provenance);
        for s in &self.stages {
            let sel = u8::from(self.selected.binary_search(&s.n).is_ok());
            let _ = writeln!(out, "{} {} {} {}", s.n, s.k, s.x_len, sel);
        }
        out
    }
}

/// The staged selection rule, verbatim: at stage `n` run the machine on
/// the oracle gathered so far with input `k_n` under step budget `n`; if
/// it halts in `s` steps with `value + s = n`, select position `n`
/// (keeping the oracle as is, crediting `k`); otherwise read ξ(n) into
/// the oracle. Total, deterministic, and oblivious to whether ξ really is
/// a stitched sequence — that is what the exact-recovery property tests.
pub fn selection_rule(
    xi: &SequenceSource,
    phi: &OracleMachine,
    n_max: usize,
) -> Result<SelectionTrace, NogapError> {
    let bits = xi.prefix(n_max)?;
    let mut x = BitString::with_capacity(n_max);
    let mut k = 0u64;
    let mut stages = Vec::with_capacity(n_max + 1);
    let mut selected = Vec::new();
    let mut selected_bits = BitString::new();
    for n in 0..n_max {
        stages.push(SelectionStage {
            n: n as u64,
            k,
            x_len: x.len() as u64,
        });
        let hit = matches!(
            phi.run(&x, k, n as u64),
            Some(o) if o.value + o.steps == n as u64
        );
        if hit {
            selected.push(n as u64);
            selected_bits.push(bits.bit(n));
            k += 1;
        } else {
            x.push(bits.bit(n));
        }
    }
    stages.push(SelectionStage {
        n: n_max as u64,
        k,
        x_len: x.len() as u64,
    });
    Ok(SelectionTrace {
        stages,
        selected,
        selected_bits,
        final_x: x,
        provenance: format!("phi={} xi={}", phi.label(), xi.label()),
    })
}

/// Selected-bit tallies for the Church-stochasticity observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiasReport {
    pub selected: u64,
    pub zeros: u64,
    pub ones: u64,
}

impl BiasReport {
    /// Empirical frequency of ones among the selected bits; `None` flags
    /// an empty selection.
    pub fn frequency_of_ones(&self) -> Option<f64> {
        (self.selected > 0).then(|| self.ones as f64 / self.selected as f64)
    }

    /// One-row CSV; the frequency cell stays empty on no selection.
    pub fn to_csv(&self, provenance: &str) -> String {
        let freq = self
            .frequency_of_ones()
            .map(|f| format!("{f:.6}"))
            .unwrap_or_default();
        format!(
            "# {provenance}\nselected,zeros,ones,frequency_of_ones\n{},{},{},{freq}\n",
            self.selected, self.zeros, self.ones
        )
    }
}

/// Tallies the selected bits of a trace.
pub fn bias_report(trace: &SelectionTrace) -> BiasReport {
    let ones = trace.selected_bits.iter().filter(|&b| b == 1).count() as u64;
    BiasReport {
        selected: trace.selected.len() as u64,
        zeros: trace.selected.len() as u64 - ones,
        ones,
    }
}

/// One row of a [`ConsistencyReport`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistencyRow {
    pub n: u64,
    pub h_n: u64,
    /// Snapshot bound for β↾n; `None` while undiscovered.
    pub k_s: Option<u32>,
    /// `n − h(n) − K_s(β↾n)` where defined.
    pub c: Option<i64>,
    pub running_max: Option<i64>,
}

/// The empirical constant profile for `K(β↾n) ≥ n − h(n) − O(1)`: since
/// stage bounds over-estimate `K`, any row with `c(n) > c₀` refutes the
/// constant `c₀` for the true `K` as well.
#[derive(Debug)]
pub struct ConsistencyReport {
    pub stage: u32,
    pub rows: Vec<ConsistencyRow>,
}

impl ConsistencyReport {
    /// Final running maximum — the constant the run refutes everything
    /// below.
    pub fn max_c(&self) -> Option<i64> {
        self.rows.last().and_then(|r| r.running_max)
    }

    /// CSV rendering with a provenance comment header.
    pub fn to_csv(&self, fingerprint: &str, provenance: &str) -> String {
        let cell = |v: Option<i64>| v.map(|v| v.to_string()).unwrap_or_default();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# profile={fingerprint} watermark={} {provenance}",
            self.stage
        );
        let _ = writeln!(out, "n,h,k_s,c,running_max");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.n,
                r.h_n,
                r.k_s.map(|v| v.to_string()).unwrap_or_default(),
                cell(r.c),
                cell(r.running_max)
            );
        }
        out
    }
}

/// Tabulates `c(n) = n − h(n) − K_s(β↾n)` with its running maximum over
/// `1 ≤ n ≤ min(n_max, |β|)`.
pub fn complexity_consistency(
    beta: &BitString,
    view: &impl ComplexityView,
    h: &NondecreasingFn,
    n_max: u64,
) -> ConsistencyReport {
    let mut rows = Vec::new();
    let mut running = None;
    for n in 1..=n_max.min(beta.len() as u64) {
        let h_n = h.eval(n);
        let k_s = view.k(&beta.prefix(n as usize));
        let c = k_s.map(|k| n as i64 - h_n as i64 - k as i64);
        if let Some(v) = c {
            running = Some(running.map_or(v, |r: i64| r.max(v)));
        }
        rows.push(ConsistencyRow {
            n,
            h_n,
            k_s,
            c,
            running_max: running,
        });
    }
    ConsistencyReport {
        stage: view.stage(),
        rows,
    }
}

/// The settling time of the Ω approximation at precision `n`, per stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SettlingEntry {
    pub n: u32,
    /// Least stage whose Ω value already agreed with the watermark's to
    /// `n` bits.
    pub settled_at: u32,
}

/// Approximate insertion positions from enumeration settling times. All
/// of it is a snapshot: later stages can push every number up (never
/// down), so the whole schedule is flagged unstable.
#[derive(Debug)]
pub struct SettlingSchedule {
    /// The stage the snapshot was taken at.
    pub stage: u32,
    /// Per precision `n = 1, 2, …`: the settling stage, or `None` when
    /// only the watermark itself agrees — beyond the snapshot's power.
    pub settled: Vec<Option<SettlingEntry>>,
    /// The strictly increasing prefix of the defined settling times,
    /// usable as insertion positions.
    pub positions: Vec<u64>,
    /// Always false: nothing here is final.
    pub stable: bool,
}

/// Computes settling times `t_s(n)` = least stage `s'` with
/// `Ω_s − Ω_{s'} < 2^(−n)` against the state's watermark `s`, for
/// `n = 1..=n_max`.
pub fn settling_schedule(state: &EnumState, n_max: u32) -> SettlingSchedule {
    let s = state.watermark();
    let omega = state.omega();
    let at = |sp: u32| -> Dyadic {
        if sp == 0 {
            Dyadic::zero()
        } else {
            state
                .omega_at(sp)
                .cloned()
                .expect("history covers every completed stage")
        }
    };
    let mut settled = Vec::new();
    let mut positions = Vec::new();
    for n in 1..=n_max {
        let bound = Dyadic::pow2(-(n as i64));
        let hit = (0..s).find(|&sp| omega.sub(&at(sp)) < bound);
        let entry = hit.map(|settled_at| SettlingEntry { n, settled_at });
        if let Some(e) = entry {
            let p = e.settled_at as u64;
            if positions.last().is_none_or(|&last| p > last) {
                positions.push(p);
            }
        }
        settled.push(entry);
    }
    SettlingSchedule {
        stage: s,
        settled,
        positions,
        stable: false,
    }
}
