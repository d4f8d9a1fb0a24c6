//! Computable upper bounds on prefix complexity and the constructions
//! around them. The central object is [`UpperBoundFn`]: a total rule
//! `n ↦ f(n)` whose weight `Σ_n 2^(−f(n))` is finite — the hallmark of the
//! computable upper bounds of `K` up to additive constants. The module
//! provides the machine-derived trace bound [`f_solovay`] (a Solovay
//! function: it matches the shortest-program length exactly on every
//! halting triple), exact partial sums with certified tail enclosures,
//! gap statistics against enumeration snapshots, finite repair of a bound,
//! and the shortest-string demonstrator that compresses "the least `x`
//! with `f(x) ≥ n`" into a program of length `O(log n)`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Mutex;

use num_bigint::BigUint;

use crate::bits::BitString;
use crate::dyadic::Dyadic;
use crate::encodings::{gamma, gamma_len, lex_string, triple_decode, try_lex_index};
use crate::enumerate::ComplexityView;
use crate::machine::asm::{assemble, assemble_program, Instr};
use crate::machine::vm::{run_bytecode_plain, run_prefix, RunOutcome};
use crate::machine::MachineProfile;

/// Index scan cap in [`berry_x`] for rules without a length-uniform fast
/// path.
const SEARCH_INDEX_CAP: u128 = 1 << 22;
/// Length scan cap in [`berry_x`] for length-uniform rules.
const SEARCH_LENGTH_CAP: usize = 4096;
/// [`certified_bits`] gives up once a tail cutoff asks for more terms.
const CERT_TERM_CAP: u128 = 1 << 20;
/// How many tightening windows [`certified_bits`] tries past the requested
/// precision before refusing.
const CERT_WINDOWS: u32 = 64;

#[derive(Debug, thiserror::Error)]
pub enum SolovayError {
    #[error("index {n} has no discovered complexity bound below the patch point")]
    UndiscoveredPrefix { n: u128 },
    #[error("every tried enclosure still straddles a dyadic boundary at precision {precision}")]
    BoundaryAmbiguity { precision: u32 },
    #[error("the bound carries no tail certificate")]
    MissingCertificate,
    #[error("certified weight reaches 1; there is no fractional digit stream to report")]
    ValueAboveOne,
    #[error("no string reached value {target} within the search budget")]
    SearchBudgetExceeded { target: u128 },
    #[error("target 0 has no γ encoding to place in a program")]
    UnencodableTarget,
    #[error("the bytecode rule gave no value at index {n}")]
    Partial { n: u128 },
    #[error("index or value out of the desk-scale range")]
    IndexOverflow,
    #[error("host rule and machine disagree at target {n}: host {host}, machine {machine}")]
    HostMachineMismatch {
        n: u128,
        host: String,
        machine: String,
    },
}

/// The machine-derived trace bound. Decodes `m` as a triple `(x, p, t)`
/// and answers `|p|` when the machine really does output `x` on program
/// `p` in exactly `t` steps consuming all of `p`; otherwise a coarse total
/// fallback `2|x| + 2|p| + ⌈2·log₂(t+2)⌉`. Total and pure; the halting
/// branch makes it agree with the shortest-program length on every
/// enumerated halting triple.
pub fn f_solovay(profile: &MachineProfile, m: u128) -> u32 {
    let (x, p, t) = triple_decode(m);
    // Step targets beyond the step counter cannot be simulated; such a
    // triple takes the fallback bound.
    if t >= 1 && t <= u64::MAX as u128 {
        if let RunOutcome::Halted {
            output,
            consumed,
            steps,
        } = run_prefix(profile, &p, t as u64)
        {
            if output == x && consumed == p.len() && steps as u128 == t {
                return p.len() as u32;
            }
        }
    }
    // ⌈2·log₂(t+2)⌉ = bit length of (t+2)² − 1; the +2 keeps the log
    // defined at t ∈ {0, 1}.
    let b = BigUint::from(t) + 2u32;
    let sq = &b * &b - 1u32;
    2 * (x.len() as u32 + p.len() as u32) + sq.bits() as u32
}

/// Tail cutoff schedules with a closed-form guarantee.
#[derive(Debug, Clone)]
enum CutoffRule {
    /// For `f(n) = n + c`: the tail past `N` is exactly `2^(−N−c)`.
    NPlusC(u32),
    /// For `f(n) = 2⌈log₂(n+2)⌉`: the values `n` with `⌈log₂(n+2)⌉ = j`
    /// form blocks of mass `≤ 2^(−j−1)`.
    TwoCeilLog,
    /// Reshaped by [`shift_and_patch`]: lowering a bound by `shift`
    /// inflates its tail by `2^shift`, so the cutoff asks the inner
    /// schedule for `shift` more bits and never undercuts the patch point.
    Patched {
        inner: Box<CutoffRule>,
        shift: u32,
        floor: u128,
    },
}

/// A declared tail guarantee `Σ_{n > cutoff(k)} 2^(−f(n)) ≤ 2^(−k)`, with
/// a note on where the guarantee comes from.
#[derive(Debug, Clone)]
pub struct TailCertificate {
    rule: CutoffRule,
    /// Analytic provenance of the guarantee.
    pub note: String,
}

impl TailCertificate {
    /// Certificate for `f(n) = n + c`.
    pub fn n_plus_c(c: u32) -> Self {
        TailCertificate {
            rule: CutoffRule::NPlusC(c),
            note: format!("geometric tail: Σ_{{n>N}} 2^(−n−{c}) = 2^(−N−{c})"),
        }
    }

    /// Certificate for `f(n) = 2⌈log₂(n+2)⌉`.
    pub fn two_ceil_log() -> Self {
        TailCertificate {
            rule: CutoffRule::TwoCeilLog,
            note: "dyadic blocks: the 2^(j−1) indices at level j carry mass ≤ 2^(−j−1)".into(),
        }
    }

    /// Least `N` with the declared tail bound `2^(−k)`; nondecreasing in
    /// `k`.
    pub fn cutoff(&self, k: u32) -> u128 {
        match &self.rule {
            CutoffRule::NPlusC(c) => (k.max(*c) - c) as u128,
            CutoffRule::TwoCeilLog => {
                if k == 0 {
                    0
                } else if k >= 128 {
                    u128::MAX
                } else {
                    1u128 << (k - 1)
                }
            }
            CutoffRule::Patched {
                inner,
                shift,
                floor,
            } => TailCertificate {
                rule: (**inner).clone(),
                note: String::new(),
            }
            .cutoff(k.saturating_add(*shift))
            .max(*floor),
        }
    }

    fn patched(&self, shift: u32, floor: u128) -> Self {
        TailCertificate {
            rule: CutoffRule::Patched {
                inner: Box::new(self.rule.clone()),
                shift,
                floor,
            },
            note: format!("{} (lowered by {shift}, patched below {floor})", self.note),
        }
    }
}

/// The evaluation rules an [`UpperBoundFn`] can carry.
#[derive(Debug)]
pub enum Rule {
    /// `f(n) = c`.
    Const(u32),
    /// `f(n) = 2|σ(n)| + 2` over the length-lex string `σ(n)` — the host
    /// form of the shortest-string demonstrator's rule.
    TwoLenPlus2,
    /// `f(n) = n + c`.
    NPlusC(u32),
    /// `f(n) = 2⌈log₂(n+2)⌉`.
    TwoCeilLog,
    /// The machine-derived trace bound [`f_solovay`] over a fixed profile.
    Solovay(MachineProfile),
    /// Value computed by a bytecode routine run on the argument `γ(n+1)`;
    /// the value is the length-lex index of the routine's output.
    Bytecode {
        profile: MachineProfile,
        code: BitString,
    },
    /// Finite repair: snapshot bounds below the patch point, the base rule
    /// lowered by `drop` from there on.
    Patched {
        base: Box<UpperBoundFn>,
        drop: u32,
        prefix: Vec<u32>,
    },
}

/// A computable upper-bound rule on prefix complexity with memoized
/// evaluation (for the machine-backed rules) and an optional certified
/// tail bound on its weight.
#[derive(Debug)]
pub struct UpperBoundFn {
    rule: Rule,
    memo: Mutex<HashMap<u128, u32>>,
    cert: Option<TailCertificate>,
}

impl UpperBoundFn {
    fn with_rule(rule: Rule, cert: Option<TailCertificate>) -> Self {
        UpperBoundFn {
            rule,
            memo: Mutex::new(HashMap::new()),
            cert,
        }
    }

    /// `f(n) = c` (divergent weight for every `c`; no certificate exists).
    pub fn constant(c: u32) -> Self {
        Self::with_rule(Rule::Const(c), None)
    }

    /// `f(n) = 2|σ(n)| + 2`, the demonstrator's host rule.
    pub fn two_len_plus_2() -> Self {
        Self::with_rule(Rule::TwoLenPlus2, None)
    }

    /// `f(n) = n + c`, certified.
    pub fn n_plus_c(c: u32) -> Self {
        Self::with_rule(Rule::NPlusC(c), Some(TailCertificate::n_plus_c(c)))
    }

    /// `f(n) = 2⌈log₂(n+2)⌉`, certified.
    pub fn two_ceil_log() -> Self {
        Self::with_rule(Rule::TwoCeilLog, Some(TailCertificate::two_ceil_log()))
    }

    /// The machine-derived trace bound over `profile`.
    pub fn solovay(profile: MachineProfile) -> Self {
        Self::with_rule(Rule::Solovay(profile), None)
    }

    /// A bytecode-evaluated rule over `profile`.
    pub fn bytecode(profile: MachineProfile, code: BitString) -> Self {
        Self::with_rule(Rule::Bytecode { profile, code }, None)
    }

    /// Replaces the attached tail certificate. The guarantee is the
    /// caller's declaration; nothing re-derives it.
    pub fn with_certificate(mut self, cert: TailCertificate) -> Self {
        self.cert = Some(cert);
        self
    }

    /// The attached tail certificate, if any.
    pub fn certificate(&self) -> Option<&TailCertificate> {
        self.cert.as_ref()
    }

    /// Value as a function of the length alone, for rules that depend on
    /// `σ(n)` only through `|σ(n)|`; licenses the per-length fast path in
    /// [`berry_x`] past the 127-bit indexing horizon.
    fn eval_len(&self, len: usize) -> Option<u32> {
        match self.rule {
            Rule::Const(c) => Some(c),
            Rule::TwoLenPlus2 => u32::try_from(2 * len + 2).ok(),
            _ => None,
        }
    }

    /// Whether evaluation is expensive enough to be worth caching.
    fn memoized(&self) -> bool {
        matches!(
            self.rule,
            Rule::Solovay(_) | Rule::Bytecode { .. } | Rule::Patched { .. }
        )
    }

    /// `f(n)`; memoization never changes values.
    pub fn eval(&self, n: u128) -> Result<u32, SolovayError> {
        if !self.memoized() {
            return self.compute(n);
        }
        if let Some(v) = self.memo.lock().unwrap().get(&n) {
            return Ok(*v);
        }
        let v = self.compute(n)?;
        self.memo.lock().unwrap().insert(n, v);
        Ok(v)
    }

    /// `f` on a string, through its length-lex index.
    pub fn eval_str(&self, x: &BitString) -> Result<u32, SolovayError> {
        let n = try_lex_index(x).ok_or(SolovayError::IndexOverflow)?;
        self.eval(n)
    }

    fn compute(&self, n: u128) -> Result<u32, SolovayError> {
        match &self.rule {
            Rule::Const(c) => Ok(*c),
            Rule::TwoLenPlus2 => Ok(2 * lex_string(n).len() as u32 + 2),
            Rule::NPlusC(c) => u32::try_from(n)
                .ok()
                .and_then(|n| n.checked_add(*c))
                .ok_or(SolovayError::IndexOverflow),
            Rule::TwoCeilLog => {
                // ⌈log₂(n+2)⌉ = bit length of n+1.
                let np1 = n.checked_add(1).ok_or(SolovayError::IndexOverflow)?;
                Ok(2 * (128 - np1.leading_zeros()))
            }
            Rule::Solovay(profile) => Ok(f_solovay(profile, n)),
            Rule::Bytecode { profile, code } => {
                let arg = gamma(n.checked_add(1).ok_or(SolovayError::IndexOverflow)?);
                match run_bytecode_plain(profile, code, &arg, profile.inner_search_budget()) {
                    RunOutcome::Halted { output, .. } => {
                        let v = try_lex_index(&output).ok_or(SolovayError::Partial { n })?;
                        u32::try_from(v).map_err(|_| SolovayError::Partial { n })
                    }
                    _ => Err(SolovayError::Partial { n }),
                }
            }
            Rule::Patched { base, drop, prefix } => {
                if n < prefix.len() as u128 {
                    Ok(prefix[n as usize])
                } else {
                    Ok(base.eval(n)?.saturating_sub(*drop))
                }
            }
        }
    }
}

/// Exact partial sum `Σ_{n ≤ n_max} 2^(−f(n))`; nondecreasing in `n_max`,
/// and (each term being positive) strictly increasing.
pub fn alpha_approx(f: &UpperBoundFn, n_max: u128) -> Result<Dyadic, SolovayError> {
    let mut sum = Dyadic::zero();
    let mut n = 0u128;
    loop {
        sum = sum.add(&Dyadic::pow2(-(f.eval(n)? as i64)));
        if n == n_max {
            break;
        }
        n += 1;
    }
    Ok(sum)
}

/// Result of [`membership_check`]: the exact partial weight and, under a
/// certificate, a rigorous enclosure of the full weight.
#[derive(Debug)]
pub struct Membership {
    /// `Σ_{n ≤ n_max} 2^(−f(n))`, exact.
    pub partial: Dyadic,
    /// `(lo, hi)` with the full weight in `(lo, hi]`, taken at the
    /// tightest certificate cutoff not exceeding the queried range.
    pub enclosure: Option<(Dyadic, Dyadic)>,
}

/// Exact partial weight of `f` on `[0, n_max]`, plus a certified enclosure
/// of the full weight when a tail certificate is attached.
pub fn membership_check(f: &UpperBoundFn, n_max: u128) -> Result<Membership, SolovayError> {
    let partial = alpha_approx(f, n_max)?;
    let mut enclosure = None;
    if let Some(cert) = f.certificate() {
        let mut best = None;
        for k in 0..=300u32 {
            let n = cert.cutoff(k);
            if n > n_max {
                break;
            }
            best = Some((k, n));
        }
        if let Some((k, n)) = best {
            let lo = alpha_approx(f, n)?;
            let hi = lo.add(&Dyadic::pow2(-(k as i64)));
            enclosure = Some((lo, hi));
        }
    }
    Ok(Membership { partial, enclosure })
}

/// First `k` binary digits of `α(f) = Σ_n 2^(−f(n))`, certified against
/// the tail bound. The tail past any cutoff is strictly positive (f is
/// total) and at most the declared `2^(−k')`, so `α` lies in a left-open
/// window `(lo, lo + 2^(−k')]`; digits are read in the matching from-below
/// convention, where a real sitting exactly on a dyadic boundary reads as
/// the `…0111…` expansion its approximants share. Refuses when every
/// tried window still straddles a precision-`k` boundary.
pub fn certified_bits(f: &UpperBoundFn, k: u32) -> Result<BitString, SolovayError> {
    let cert = f.certificate().ok_or(SolovayError::MissingCertificate)?;
    if k == 0 {
        return Ok(BitString::new());
    }
    if k > 120 {
        return Err(SolovayError::IndexOverflow);
    }
    for kp in k..=k.saturating_add(CERT_WINDOWS) {
        let n = cert.cutoff(kp);
        if n > CERT_TERM_CAP {
            break;
        }
        let lo = alpha_approx(f, n)?;
        let hi = lo.add(&Dyadic::pow2(-(kp as i64)));
        // Digit blocks at precision k partition the line into cells
        // (j·2^(−k), (j+1)·2^(−k)]; the window is decided iff it fits one.
        let j = hi.times_pow2(k as i64).ceil() - 1u32;
        if j >= BigUint::from(1u32) << k {
            return Err(SolovayError::ValueAboveOne);
        }
        if lo.times_pow2(k as i64).floor() >= j {
            let j = u128::try_from(j).expect("cell index fits: j < 2^k, k ≤ 120");
            return Ok(BitString::from_value_len(j, k));
        }
    }
    Err(SolovayError::BoundaryAmbiguity { precision: k })
}

/// One row of a [`GapReport`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapRow {
    pub m: u128,
    pub f: u32,
    /// Snapshot bound for the `m`-th string; `None` while undiscovered.
    pub k_s: Option<u32>,
    /// `f(m) − K_s(σ(m))` where defined.
    pub gap: Option<i64>,
    /// Running minimum of the defined gaps so far.
    pub running_min: Option<i64>,
}

/// Per-index gaps `f(m) − K_s(σ(m))` against an enumeration snapshot.
/// Snapshot bounds only ever over-estimate `K`, so reported gaps
/// under-estimate `f − K`: a small running minimum is evidence toward
/// `f(n) ≤ K(n) + c` happening again and again, never a proof; a large
/// one refutes specific constants on the discovered range.
#[derive(Debug)]
pub struct GapReport {
    /// Stage watermark of the snapshot the gaps were read from.
    pub stage: u32,
    pub rows: Vec<GapRow>,
}

impl GapReport {
    /// Final running minimum over the defined gaps.
    pub fn min_gap(&self) -> Option<i64> {
        self.rows.last().and_then(|r| r.running_min)
    }

    /// CSV rendering with a provenance comment header.
    pub fn to_csv(&self, fingerprint: &str) -> String {
        let cell = |v: Option<i64>| v.map(|v| v.to_string()).unwrap_or_default();
        let mut out = String::new();
        let _ = writeln!(out, "# profile={fingerprint} watermark={}", self.stage);
        let _ = writeln!(out, "m,f,k_s,gap,running_min");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.m,
                r.f,
                r.k_s.map(|v| v.to_string()).unwrap_or_default(),
                cell(r.gap),
                cell(r.running_min)
            );
        }
        out
    }
}

/// Tabulates `f(m) − K_s(σ(m))` for `m ≤ m_max` with a running minimum,
/// skipping undiscovered strings.
pub fn gap_table(
    f: &UpperBoundFn,
    view: &impl ComplexityView,
    m_max: u128,
) -> Result<GapReport, SolovayError> {
    let mut rows = Vec::new();
    let mut running = None;
    let mut m = 0u128;
    loop {
        let fv = f.eval(m)?;
        let k_s = view.k(&lex_string(m));
        let gap = k_s.map(|k| fv as i64 - k as i64);
        if let Some(g) = gap {
            running = Some(running.map_or(g, |r: i64| r.min(g)));
        }
        rows.push(GapRow {
            m,
            f: fv,
            k_s,
            gap,
            running_min: running,
        });
        if m == m_max {
            break;
        }
        m += 1;
    }
    Ok(GapReport {
        stage: view.stage(),
        rows,
    })
}

/// Number of `m ≤ m_max` where the snapshot already shows `f(m)` dipping
/// under the discovered bound `K_s(σ(m))` — the wait-free observable a
/// repaired bound is monitored by.
pub fn violation_count(
    f: &UpperBoundFn,
    view: &impl ComplexityView,
    m_max: u128,
) -> Result<u64, SolovayError> {
    let mut count = 0;
    let mut m = 0u128;
    loop {
        if let Some(k) = view.k(&lex_string(m)) {
            if f.eval(m)? < k {
                count += 1;
            }
        }
        if m == m_max {
            break;
        }
        m += 1;
    }
    Ok(count)
}

/// Finite repair of a bound: pins `f` to the snapshot values below `n0`
/// (where they are sound upper bounds of `K` by construction) and lowers
/// it to `max(f(n) − drop, 0)` from `n0` on. Any attached tail certificate
/// is reshaped to stay valid. Fails if some index below `n0` is still
/// undiscovered in the snapshot.
pub fn shift_and_patch(
    f: UpperBoundFn,
    drop: u32,
    n0: u128,
    view: &impl ComplexityView,
) -> Result<UpperBoundFn, SolovayError> {
    let mut prefix = Vec::new();
    let mut n = 0u128;
    while n < n0 {
        let k = view
            .k(&lex_string(n))
            .ok_or(SolovayError::UndiscoveredPrefix { n })?;
        prefix.push(k);
        n += 1;
    }
    let cert = f.cert.as_ref().map(|c| c.patched(drop, n0));
    Ok(UpperBoundFn::with_rule(
        Rule::Patched {
            base: Box::new(f),
            drop,
            prefix,
        },
        cert,
    ))
}

/// Length-lex-least string whose `f`-value reaches `n`. Length-uniform
/// rules are scanned one length at a time; anything else is scanned index
/// by index under a budget.
pub fn berry_x(f: &UpperBoundFn, n: u128) -> Result<BitString, SolovayError> {
    if f.eval_len(0).is_some() {
        for len in 0..=SEARCH_LENGTH_CAP {
            let v = f.eval_len(len).ok_or(SolovayError::IndexOverflow)?;
            if v as u128 >= n {
                return Ok((0..len).map(|_| 0u8).collect());
            }
        }
    } else {
        let mut idx = 0u128;
        while idx <= SEARCH_INDEX_CAP {
            if f.eval(idx)? as u128 >= n {
                return Ok(lex_string(idx));
            }
            idx += 1;
        }
    }
    Err(SolovayError::SearchBudgetExceeded { target: n })
}

/// The self-contained program `γ(7) · [ESCAPE γ(2)] · γ(|F|) · F · γ(n)`
/// that makes the machine search for the least string whose `F`-value
/// reaches `n` and print it. Its exact length,
/// `12 + |γ(|F|)| + |F| + |γ(n)|`, is a constructive complexity bound on
/// that string.
pub fn berry_program(f_code: &BitString, n: u128) -> Result<BitString, SolovayError> {
    if n == 0 {
        return Err(SolovayError::UnencodableTarget);
    }
    let mut p = assemble_program(&[Instr::Escape(2)]).expect("fixed wrapper assembles");
    p.extend(&gamma(f_code.len() as u128));
    p.extend(f_code);
    p.extend(&gamma(n));
    Ok(p)
}

/// Layout items for the private label-resolving assembler.
enum L {
    I(Instr),
    Mark(&'static str),
    JzF(&'static str),
    JmpB(&'static str),
    /// Only the linker's oracle test builds counted loops.
    #[allow(dead_code)]
    DecJnzB(&'static str),
}

/// Resolves labeled jumps to exact bit distances by fixpoint over the
/// γ-operand widths, then assembles. Private: layouts are fixed at build
/// time, so failures are programming errors and panic.
fn link(items: &[L]) -> BitString {
    let mut widths: Vec<usize> = items
        .iter()
        .map(|it| match it {
            L::Mark(_) => 0,
            L::I(ins) => 4 + ins.operand().map_or(0, |v| gamma_len(v as u128)),
            L::JzF(_) | L::JmpB(_) | L::DecJnzB(_) => 5,
        })
        .collect();
    for _ in 0..100 {
        let mut pos = Vec::with_capacity(items.len());
        let mut at = 0usize;
        for w in &widths {
            pos.push(at);
            at += w;
        }
        let marks: HashMap<&str, usize> = items
            .iter()
            .enumerate()
            .filter_map(|(i, it)| match it {
                L::Mark(name) => Some((*name, pos[i])),
                _ => None,
            })
            .collect();
        let distance = |i: usize, name: &str, widths: &[usize]| {
            let after = pos[i] + widths[i];
            let target = marks[name];
            let d = if matches!(items[i], L::JzF(_)) {
                target.checked_sub(after)
            } else {
                after.checked_sub(target)
            };
            let d = d.expect("jump runs in its stated direction");
            assert!(d >= 1, "zero-length jump in layout");
            d
        };
        let mut changed = false;
        for (i, it) in items.iter().enumerate() {
            let name = match it {
                L::JzF(n) | L::JmpB(n) | L::DecJnzB(n) => n,
                _ => continue,
            };
            let w = 4 + gamma_len(distance(i, name, &widths) as u128);
            if w != widths[i] {
                widths[i] = w;
                changed = true;
            }
        }
        if !changed {
            let mut instrs = Vec::new();
            for (i, it) in items.iter().enumerate() {
                match it {
                    L::Mark(_) => {}
                    L::I(ins) => instrs.push(*ins),
                    L::JzF(n) => instrs.push(Instr::JzF(distance(i, n, &widths) as u64)),
                    L::JmpB(n) => instrs.push(Instr::JmpB(distance(i, n, &widths) as u64)),
                    L::DecJnzB(n) => instrs.push(Instr::DecJnzB(distance(i, n, &widths) as u64)),
                }
            }
            let out = assemble(&instrs).expect("resolved layout assembles");
            assert_eq!(out.len(), at, "linked length mismatch");
            return out;
        }
    }
    panic!("jump layout did not stabilize");
}

/// Bytecode for the machine-side rule `x ↦ 2|x| + 2`. The searcher hands
/// a candidate `x` to its routine as `0^|x| 1 x`, so the routine counts
/// the leading zeros `k` into a little-endian binary counter laid out on
/// alternating mark/digit cells (digit `i` at cell `3+2i`, its mark at
/// `2+2i`, cells 0–1 as scratch and sentinel), then prints `σ(k) · 1`,
/// which is exactly `σ(2k+2)`. It halts without touching `x` itself, so
/// a search decides each candidate length in one probe.
pub fn berry_f() -> BitString {
    use L::{Mark, I};
    link(&[
        // counter ← 1: set the first mark/digit pair, head to its mark
        I(Instr::Right),
        I(Instr::Right),
        I(Instr::W1),
        I(Instr::Right),
        I(Instr::W1),
        I(Instr::Left),
        // read one argument bit into the scratch cell
        Mark("read"),
        I(Instr::Left),
        I(Instr::Left),
        I(Instr::ReadWork),
        L::JzF("inc"),
        I(Instr::W0),
        L::JzF("dump"),
        // counter ← counter + 1: ripple the carry up from the low digit
        Mark("inc"),
        I(Instr::Right),
        I(Instr::Right),
        Mark("ripple"),
        L::JzF("grow"),
        I(Instr::Right),
        L::JzF("set"),
        I(Instr::W0),
        I(Instr::Right),
        L::JmpB("ripple"),
        Mark("grow"),
        I(Instr::W1),
        I(Instr::Right),
        Mark("set"),
        I(Instr::W1),
        I(Instr::Left),
        // rewind over the marks to the sentinel, back to the rest cell
        Mark("rewind"),
        L::JzF("rest"),
        I(Instr::Left),
        I(Instr::Left),
        L::JmpB("rewind"),
        Mark("rest"),
        I(Instr::Right),
        I(Instr::Right),
        L::JmpB("read"),
        // print: seek one past the top mark, then emit the digits below
        // the top one, low cells last
        Mark("dump"),
        I(Instr::Right),
        I(Instr::Right),
        Mark("seek"),
        L::JzF("top"),
        I(Instr::Right),
        I(Instr::Right),
        L::JmpB("seek"),
        Mark("top"),
        I(Instr::Left),
        I(Instr::Left),
        Mark("emit"),
        I(Instr::Left),
        I(Instr::Left),
        L::JzF("tail"),
        I(Instr::Right),
        I(Instr::OutW),
        I(Instr::Left),
        L::JmpB("emit"),
        Mark("tail"),
        I(Instr::Out1),
        I(Instr::Halt),
    ])
}

/// One row of a [`RatioReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub n: u128,
    /// The least string reaching value `n`.
    pub x: BitString,
    /// `f(x)`.
    pub f_x: u32,
    /// Snapshot plain-complexity bound for `x`; `None` while undiscovered.
    pub c_s: Option<u32>,
    /// Exact length of the emitted program printing `x`.
    pub bound: usize,
    /// `f(x) / bound` — the demonstrated compression ratio.
    pub ratio: f64,
}

/// The shortest-string demonstrator's table: value versus constructive
/// complexity bound across targets.
#[derive(Debug)]
pub struct RatioReport {
    /// Stage watermark of the snapshot consulted for `C_s`.
    pub stage: u32,
    /// Length of the bytecode routine all rows share.
    pub f_len: usize,
    pub rows: Vec<RatioRow>,
}

impl RatioReport {
    /// CSV rendering with a provenance comment header.
    pub fn to_csv(&self, fingerprint: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# profile={fingerprint} watermark={} f_len={}",
            self.stage, self.f_len
        );
        let _ = writeln!(out, "n,x,f_x,c_s,bound,ratio");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6}",
                r.n,
                r.x.display_or_epsilon(),
                r.f_x,
                r.c_s.map(|v| v.to_string()).unwrap_or_default(),
                r.bound,
                r.ratio
            );
        }
        out
    }
}

/// For each target `n`: the least string `x_n` with `f(x_n) ≥ n`, the
/// snapshot plain bound, the exact emitted-program bound, and their ratio.
/// The host rule and the bytecode routine are cross-checked by running the
/// emitted program; any disagreement is an error, not a row.
pub fn ratio_table(
    profile: &MachineProfile,
    f: &UpperBoundFn,
    f_code: &BitString,
    targets: &[u128],
    view: &impl ComplexityView,
    budget: u64,
) -> Result<RatioReport, SolovayError> {
    let mut rows = Vec::new();
    for &n in targets {
        let x = berry_x(f, n)?;
        let prog = berry_program(f_code, n)?;
        match run_prefix(profile, &prog, budget) {
            RunOutcome::Halted {
                output, consumed, ..
            } if output == x && consumed == prog.len() => {}
            other => {
                return Err(SolovayError::HostMachineMismatch {
                    n,
                    host: x.display_or_epsilon(),
                    machine: format!("{other:?}"),
                })
            }
        }
        let f_x = f.eval_str(&x)?;
        rows.push(RatioRow {
            n,
            f_x,
            c_s: view.c(&x),
            bound: prog.len(),
            ratio: f_x as f64 / prog.len() as f64,
            x,
        });
    }
    Ok(RatioReport {
        stage: view.stage(),
        f_len: f_code.len(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encodings::{lex_index, triple_code};
    use crate::enumerate::EnumState;
    use crate::machine::vm::Mode;

    fn profile() -> MachineProfile {
        MachineProfile::standard()
    }

    fn state(stage: u32) -> EnumState {
        let mut st = EnumState::new(profile());
        st.advance(stage).unwrap();
        st
    }

    #[test]
    fn link_reproduces_the_counted_loop() {
        use L::{DecJnzB, I, Mark};
        let code = link(&[
            I(Instr::SetCtr(3)),
            Mark("again"),
            I(Instr::ReadOut),
            DecJnzB("again"),
            I(Instr::Halt),
        ]);
        assert_eq!(code.to_string(), "10100110011101100011110000");
    }

    #[test]
    fn berry_bytecode_matches_the_host_rule() {
        let f_code = berry_f();
        for k in [0usize, 1, 2, 3, 4, 5, 8, 17, 40, 200] {
            let mut input = BitString::new();
            for _ in 0..k {
                input.push(0);
            }
            input.push(1);
            // junk after the header: the routine must never reach it
            input.push(1);
            input.push(0);
            match run_bytecode_plain(&profile(), &f_code, &input, 1 << 20) {
                RunOutcome::Halted {
                    output, consumed, ..
                } => {
                    assert_eq!(lex_index(&output), 2 * k as u128 + 2, "k={k}");
                    assert_eq!(consumed, k + 1, "k={k}");
                }
                other => panic!("k={k}: {other:?}"),
            }
        }
    }

    #[test]
    fn bytecode_rule_agrees_with_host_on_indices() {
        let host = UpperBoundFn::two_len_plus_2();
        let mach = UpperBoundFn::bytecode(profile(), berry_f());
        for n in 0..200u128 {
            assert_eq!(mach.eval(n).unwrap(), host.eval(n).unwrap(), "n={n}");
        }
    }

    #[test]
    fn trace_bound_on_the_empty_triple() {
        // triple 0 decodes to (ε, ε, 0): the machine cannot even read a
        // header from ε, so the fallback ⌈2·log₂2⌉ = 2 applies.
        assert_eq!(f_solovay(&profile(), 0), 2);
    }

    #[test]
    fn trace_bound_names_every_prefix_witness() {
        let st = state(14);
        let p = profile();
        let mut seen = 0;
        for ev in st.events() {
            if ev.mode != Mode::Prefix {
                continue;
            }
            seen += 1;
            let m = triple_code(&ev.x, &ev.p, ev.t as u128);
            assert_eq!(f_solovay(&p, m), ev.p.len() as u32);
        }
        assert!(seen > 0);
    }

    #[test]
    fn trace_bound_weight_stays_under_eight() {
        let f = UpperBoundFn::solovay(profile());
        let prev = alpha_approx(&f, 19_999).unwrap();
        let sum = alpha_approx(&f, 20_000).unwrap();
        assert!(prev < sum);
        assert!(sum < Dyadic::from_int(8));
    }

    #[test]
    fn alpha_sums_are_order_independent() {
        let f = UpperBoundFn::solovay(profile());
        let n_max = 30_000u128;
        let forward = alpha_approx(&f, n_max).unwrap();
        let mut reversed = Dyadic::zero();
        let mut n = n_max;
        loop {
            reversed = reversed.add(&Dyadic::pow2(-(f.eval(n).unwrap() as i64)));
            if n == 0 {
                break;
            }
            n -= 1;
        }
        assert_eq!(forward, reversed);
    }

    #[test]
    fn membership_of_the_flat_and_constant_rules() {
        let divergent = UpperBoundFn::constant(0);
        let m = membership_check(&divergent, 41).unwrap();
        assert_eq!(m.partial, Dyadic::from_int(42));
        assert!(m.enclosure.is_none());

        let three_quarters = UpperBoundFn::constant(2);
        let m = membership_check(&three_quarters, 2).unwrap();
        assert_eq!(m.partial.to_exact_string(), "3/2^2");
    }

    #[test]
    fn membership_enclosure_width_matches_the_certificate() {
        let f = UpperBoundFn::two_ceil_log();
        let k = 9u32;
        let cutoff = f.certificate().unwrap().cutoff(k);
        assert_eq!(cutoff, 1 << 8);
        let m = membership_check(&f, cutoff).unwrap();
        let (lo, hi) = m.enclosure.unwrap();
        assert_eq!(hi.sub(&lo), Dyadic::pow2(-(k as i64)));
        // the full weight is exactly 1/2 and must sit in the enclosure
        let half = Dyadic::pow2(-1);
        assert!(lo < half && half <= hi);
    }

    #[test]
    fn geometric_rule_certifies_any_precision() {
        // α = Σ 2^(−n−2) = 1/2 exactly; from below it reads 0111….
        let f = UpperBoundFn::n_plus_c(2);
        for k in [1u32, 5, 40] {
            let bits = certified_bits(&f, k).unwrap();
            let expect: BitString = (0..k).map(|i| u8::from(i > 0)).collect();
            assert_eq!(bits, expect, "k={k}");
        }
        assert_eq!(certified_bits(&f, 0).unwrap(), BitString::new());
    }

    #[test]
    fn shifted_geometric_rule_certifies_its_quarter() {
        let f = UpperBoundFn::n_plus_c(3);
        assert_eq!(certified_bits(&f, 2).unwrap().to_string(), "00");
    }

    #[test]
    fn certified_bits_refusals() {
        // weight exactly 1/2 approached off-geometric: the enclosure keeps
        // a sliver above the boundary at every window
        let f = UpperBoundFn::two_ceil_log();
        assert!(matches!(
            certified_bits(&f, 4),
            Err(SolovayError::BoundaryAmbiguity { precision: 4 })
        ));
        // a valid but loose certificate cannot settle the boundary either
        let f = UpperBoundFn::n_plus_c(3).with_certificate(TailCertificate::n_plus_c(2));
        assert!(matches!(
            certified_bits(&f, 2),
            Err(SolovayError::BoundaryAmbiguity { .. })
        ));
        let f = UpperBoundFn::constant(1);
        assert!(matches!(
            certified_bits(&f, 3),
            Err(SolovayError::MissingCertificate)
        ));
    }

    #[test]
    fn gap_table_on_the_snapshot_itself_is_flat() {
        let st = state(16);
        let f = shift_and_patch(UpperBoundFn::constant(0), 0, 8, &st).unwrap();
        let report = gap_table(&f, &st, 7).unwrap();
        assert_eq!(report.stage, 16);
        assert!(report.rows.iter().all(|r| r.gap == Some(0)));
        assert_eq!(report.min_gap(), Some(0));
        let csv = report.to_csv(&st.profile().fingerprint());
        let header = format!("# profile={} watermark=16\n", st.profile().fingerprint());
        assert!(csv.starts_with(&header));
        assert!(csv.contains("\n0,9,9,0,0\n"));
    }

    #[test]
    fn undiscovered_prefix_blocks_the_patch() {
        let st = state(16);
        match shift_and_patch(UpperBoundFn::constant(0), 0, 9, &st) {
            Err(SolovayError::UndiscoveredPrefix { n: 8 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn length_rule_gaps_at_the_desk_horizon() {
        // Asymptotically 2|σ(m)|+2 beats K on ever more compressible
        // strings and the gap diverges; at this snapshot depth every
        // discovered string still costs ≥ 9 program bits, so the observed
        // gaps sit below zero — pinned here as the honest desk-scale view.
        let st = state(16);
        let f = UpperBoundFn::two_len_plus_2();
        let report = gap_table(&f, &st, 7).unwrap();
        let gaps: Vec<_> = report.rows.iter().map(|r| r.gap).collect();
        let expect = [-7i64, -7, -9, -7, -9, -9, -9, -7].map(Some);
        assert_eq!(gaps, expect);
        assert_eq!(report.min_gap(), Some(-9));
    }

    #[test]
    fn patched_bound_shows_no_violation_on_the_snapshot() {
        let st = state(16);
        let patched = shift_and_patch(UpperBoundFn::solovay(profile()), 3, 8, &st).unwrap();
        assert_eq!(violation_count(&patched, &st, 500).unwrap(), 0);
        // trivial patch: values untouched
        let f = UpperBoundFn::two_len_plus_2();
        let same = shift_and_patch(UpperBoundFn::two_len_plus_2(), 0, 0, &st).unwrap();
        for n in 0..64 {
            assert_eq!(same.eval(n).unwrap(), f.eval(n).unwrap());
        }
    }

    #[test]
    fn patch_reshapes_the_certificate() {
        let st = state(16);
        let f = shift_and_patch(UpperBoundFn::n_plus_c(2), 1, 3, &st).unwrap();
        // α = 2^(−9)+2^(−11)+2^(−13) from the patched prefix plus the
        // lowered geometric tail Σ_{n≥3} 2^(−n−1) = 1/8; the reshaped
        // certificate still pins the first six digits.
        assert_eq!(certified_bits(&f, 6).unwrap().to_string(), "001000");
    }

    #[test]
    fn least_strings_reaching_the_length_rule() {
        let f = UpperBoundFn::two_len_plus_2();
        assert_eq!(berry_x(&f, 0).unwrap(), BitString::new());
        assert_eq!(berry_x(&f, 4).unwrap().to_string(), "0");
        assert_eq!(berry_x(&f, 64).unwrap(), BitString::from_value_len(0, 31));
        assert!(matches!(
            berry_program(&berry_f(), 0),
            Err(SolovayError::UnencodableTarget)
        ));
        assert!(matches!(
            berry_x(&UpperBoundFn::constant(5), 9),
            Err(SolovayError::SearchBudgetExceeded { target: 9 })
        ));
    }

    #[test]
    fn berry_programs_run_and_measure_exactly() {
        let st = state(16);
        let f = UpperBoundFn::two_len_plus_2();
        let f_code = berry_f();
        let report = ratio_table(&profile(), &f, &f_code, &[4, 8], &st, 1 << 20).unwrap();
        assert_eq!(report.f_len, f_code.len());
        for row in &report.rows {
            let expect = 12 + gamma_len(f_code.len() as u128) + f_code.len() + gamma_len(row.n);
            assert_eq!(row.bound, expect, "n={}", row.n);
        }
        assert_eq!(report.rows[0].x.to_string(), "0");
        assert_eq!(report.rows[1].x.to_string(), "000");
        assert_eq!(report.rows[0].c_s, Some(11));
        assert_eq!(report.rows[1].c_s, Some(15));
        assert!(report.rows[1].ratio > report.rows[0].ratio);
        // growth floor: the ratio dominates n over the encoded routine
        // plus 2⌈log₂(n+1)⌉ + 14
        let enc = (f_code.len() + gamma_len(f_code.len() as u128)) as f64;
        for row in &report.rows {
            let ceil_log = (128 - (row.n).leading_zeros()) as f64;
            assert!(row.ratio >= row.n as f64 / (2.0 * ceil_log + enc + 14.0));
        }
        let csv = report.to_csv(&st.profile().fingerprint());
        assert!(csv.contains("f_len="));
        assert!(csv.contains("4,0,4,11,"));
    }

    #[test]
    fn evaluation_is_memo_stable() {
        let f = UpperBoundFn::solovay(profile());
        for m in 0..40 {
            let a = f.eval(m).unwrap();
            assert_eq!(f.eval(m).unwrap(), a);
        }
        let g = UpperBoundFn::two_len_plus_2();
        assert_eq!(g.eval_str(&BitString::parse("010").unwrap()).unwrap(), 8);
    }
}
