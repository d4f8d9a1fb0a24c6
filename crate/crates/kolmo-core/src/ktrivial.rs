//! The triviality-transfer strategy: watch the stage complexity of each
//! index `n` drop, and under each assumed value `v`, file requests
//! `(w↾n, v)` for every candidate string `w` that looks as compressible
//! as the monitored sequence claims to be — at most `d` per assumption,
//! restarting when the assumption drops. The resulting c.e. request set
//! `L` carries exact dyadic weight at most `2d` and compiles through the
//! prefix-code allocator into a machine giving each requested prefix a
//! code of length `v + O(1)` — the constructive step from "bounded by a
//! Solovay function" to "bounded by the complexity of the length".

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::bits::BitString;
use crate::dyadic::Dyadic;
use crate::encodings::{try_lex_index, try_triple_code};
use crate::enumerate::{ComplexityView, EnumState};
use crate::kraft::{Allocator, CodeTree};
use crate::machine::vm::Mode;
use crate::machine::MachineProfile;
use crate::monitors::{MonitorError, SequenceSource};
use crate::solovay::f_solovay;

#[derive(Debug, thiserror::Error)]
pub enum KtrivError {
    #[error("stream proposes {proposed} for n={n}, not below the current {previous}")]
    InvalidStream {
        n: u64,
        previous: u32,
        proposed: u32,
    },
    #[error("ledger weight {weight} exceeds the 2^{exponent} compilation budget")]
    InsufficientBudget { weight: String, exponent: u32 },
    #[error("source refused: {0}")]
    Source(#[from] MonitorError),
    #[error("ledger text is corrupt at line {line}")]
    Corrupt { line: usize },
}

/// One event of a complexity stream: either the stage bound for `n`
/// dropping to a new value (with its witnessing run when live), or a
/// candidate string surfacing for `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StreamEvent {
    Drop {
        stage: u32,
        n: u64,
        value: u32,
        /// The witnessing `(program, steps)` pair from the live
        /// enumerator; synthetic streams may omit it.
        witness: Option<(BitString, u64)>,
    },
    Candidate {
        stage: u32,
        n: u64,
        /// The full candidate; the strategy truncates it to `n` bits.
        w: BitString,
    },
}

/// Per-`n` strategy bookkeeping.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StrategyState {
    /// Currently assumed stage value for `n`.
    pub assumption: Option<u32>,
    /// Triple code of the current witnessing run, when known.
    pub witness: Option<u128>,
    /// Requests actually filed under the current assumption.
    pub emitted: u32,
    /// Whether the current assumption exhausted its request budget —
    /// the moment the assumption is known to be wrong.
    pub capped: bool,
    /// Drop events consumed after the first adoption.
    pub restarts: u32,
    /// How many assumptions hit the cap over the whole run.
    pub cap_hits: u32,
}

/// One filed request, with the stage it was filed at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEntry {
    pub n: u64,
    pub k: u32,
    pub w: BitString,
    pub stage: u32,
}

/// The c.e. request set `L`: an append-only, duplicate-free list of
/// `(w, k)` pairs in emission order, with per-`(n, k)` counters.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct RequestLedger {
    entries: Vec<LedgerEntry>,
    seen: BTreeSet<(BitString, u32)>,
    counters: BTreeMap<(u64, u32), u32>,
}

impl RequestLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Files a request; returns false (and changes nothing) when the
    /// pair is already present.
    fn insert(&mut self, n: u64, k: u32, w: BitString, stage: u32) -> bool {
        if !self.seen.insert((w.clone(), k)) {
            return false;
        }
        *self.counters.entry((n, k)).or_insert(0) += 1;
        self.entries.push(LedgerEntry { n, k, w, stage });
        true
    }

    /// The requests in emission order.
    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Whether the pair `(w, k)` has been filed.
    pub fn contains(&self, w: &BitString, k: u32) -> bool {
        self.seen.contains(&(w.clone(), k))
    }

    /// Requests filed for index `n` under assumption `k`.
    pub fn counter(&self, n: u64, k: u32) -> u32 {
        self.counters.get(&(n, k)).copied().unwrap_or(0)
    }

    /// The largest per-assumption counter — at most the cap `d`.
    pub fn max_counter(&self) -> u32 {
        self.counters.values().copied().max().unwrap_or(0)
    }

    /// Exact total weight `Σ 2^(−k)` over the filed pairs.
    pub fn weight(&self) -> Dyadic {
        self.entries
            .iter()
            .fold(Dyadic::zero(), |acc, e| {
                acc.add(&Dyadic::pow2(-(e.k as i64)))
            })
    }

    /// Line-oriented rendering: a provenance header, then `n k w stage`
    /// per request in emission order.
    pub fn to_text(&self, provenance: &str) -> String {
        let mut out = format!("# ledger {provenance}\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{} {} {} {}",
                e.n,
                e.k,
                e.w.display_or_epsilon(),
                e.stage
            );
        }
        out
    }

    /// Parses the [`Self::to_text`] format back into a ledger (the
    /// provenance header is checked for shape but not retained).
    pub fn parse(text: &str) -> Result<Self, KtrivError> {
        let mut ledger = RequestLedger::new();
        for (i, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let corrupt = || KtrivError::Corrupt { line: i + 1 };
            let mut parts = line.split_whitespace();
            let n = parts
                .next()
                .and_then(|t| t.parse::<u64>().ok())
                .ok_or_else(corrupt)?;
            let k = parts
                .next()
                .and_then(|t| t.parse::<u32>().ok())
                .ok_or_else(corrupt)?;
            let w = match parts.next().ok_or_else(corrupt)? {
                "ε" => BitString::new(),
                bits => BitString::parse(bits).map_err(|_| corrupt())?,
            };
            let stage = parts
                .next()
                .and_then(|t| t.parse::<u32>().ok())
                .ok_or_else(corrupt)?;
            if parts.next().is_some() {
                return Err(corrupt());
            }
            ledger.insert(n, k, w, stage);
        }
        Ok(ledger)
    }
}

/// Runs the strategy over an event stream with per-assumption cap `d`,
/// returning the filed ledger and the final per-`n` states. Candidates
/// arriving before any assumption for their `n`, after the cap, or too
/// short to truncate are ignored; a non-decreasing drop is an error.
pub fn run_strategy(
    events: &[StreamEvent],
    d: u32,
) -> Result<(RequestLedger, BTreeMap<u64, StrategyState>), KtrivError> {
    assert!(d >= 1, "the per-assumption cap must be positive");
    let mut ledger = RequestLedger::new();
    let mut states: BTreeMap<u64, StrategyState> = BTreeMap::new();
    for ev in events {
        match ev {
            StreamEvent::Drop {
                n, value, witness, ..
            } => {
                let st = states.entry(*n).or_default();
                if let Some(prev) = st.assumption {
                    if *value >= prev {
                        return Err(KtrivError::InvalidStream {
                            n: *n,
                            previous: prev,
                            proposed: *value,
                        });
                    }
                    st.restarts += 1;
                }
                st.assumption = Some(*value);
                st.witness = witness
                    .as_ref()
                    .and_then(|(p, t)| try_triple_code(&crate::encodings::lex_string(*n as u128), p, *t as u128));
                st.emitted = 0;
                st.capped = false;
            }
            StreamEvent::Candidate { stage, n, w } => {
                let Some(st) = states.get_mut(n) else {
                    continue;
                };
                let Some(v) = st.assumption else { continue };
                if st.capped || (w.len() as u64) < *n {
                    continue;
                }
                if ledger.insert(*n, v, w.prefix(*n as usize), *stage) {
                    st.emitted += 1;
                    if st.emitted == d {
                        st.capped = true;
                        st.cap_hits += 1;
                    }
                }
            }
        }
    }
    Ok((ledger, states))
}

/// The cap the live harness uses: the profile's measured repetition
/// constant plus one (a cap must be positive), recorded in provenance.
pub fn suggested_cap(profile: &MachineProfile) -> u32 {
    profile.counting_cap() + 1
}

/// Replays the enumerator's history into a stream for a monitored
/// sequence: each improvement of the stage bound for `lex_string(n)`
/// becomes a drop event, immediately followed by the hypothesis
/// channel's candidate — the sequence's own `n`-bit prefix, which the
/// coverage argument guarantees would eventually surface among the
/// compressible strings at the witness length. The second, literal
/// channel scans enumerated outputs of exactly the witness length
/// passing the `g + c` filter; witness lengths sit far beyond every
/// enumerated output at desk scale, so it contributes nothing here and
/// the scan says so honestly.
pub fn live_stream(
    state: &EnumState,
    alpha: &SequenceSource,
    n_max: u64,
    c: u32,
) -> Result<Vec<StreamEvent>, KtrivError> {
    let profile = state.profile();
    let events: Vec<_> = state.events().filter(|e| e.mode == Mode::Prefix).collect();
    let mut best: BTreeMap<u64, u32> = BTreeMap::new();
    let mut out = Vec::new();
    for e in &events {
        let Some(n) = try_lex_index(&e.x).and_then(|v| u64::try_from(v).ok()) else {
            continue;
        };
        if n > n_max {
            continue;
        }
        let k = e.p.len() as u32;
        if best.get(&n).is_none_or(|&b| k < b) {
            best.insert(n, k);
            out.push(StreamEvent::Drop {
                stage: e.stage,
                n,
                value: k,
                witness: Some((e.p.clone(), e.t)),
            });
            out.push(StreamEvent::Candidate {
                stage: e.stage,
                n,
                w: alpha.prefix(n as usize)?,
            });
            // literal channel: outputs of exactly the witness length
            if let Some(m) = try_triple_code(&e.x, &e.p, e.t as u128) {
                if m <= 127 {
                    for cand in &events {
                        if cand.x.len() as u128 == m
                            && state.k(&cand.x).is_some_and(|kw| {
                                kw <= f_solovay(profile, m).saturating_add(c)
                            })
                        {
                            out.push(StreamEvent::Candidate {
                                stage: cand.stage,
                                n,
                                w: cand.x.clone(),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Compiles the ledger through the prefix-code allocator: each request
/// `(w, k)` becomes a codeword of length `k + headroom` with payload
/// `w`'s length-lex index, in ledger order. Requires the total weight to
/// fit the `2^headroom` budget; within it, allocation cannot fail.
pub fn compile_ledger(ledger: &RequestLedger, headroom: u32) -> Result<CodeTree, KtrivError> {
    if ledger.weight() > Dyadic::pow2(headroom as i64) {
        return Err(KtrivError::InsufficientBudget {
            weight: ledger.weight().to_exact_string(),
            exponent: headroom,
        });
    }
    let mut alloc = Allocator::new();
    let mut pairs = Vec::new();
    for e in ledger.entries() {
        let code = alloc
            .request(e.k + headroom)
            .expect("weight within budget keeps the allocator solvent");
        let payload = try_lex_index(&e.w).expect("filed strings are desk-scale");
        pairs.push((code, payload));
    }
    Ok(CodeTree::from_codewords(&pairs).expect("allocator output is prefix-free"))
}

/// Run summary: exact weight, then per-`n` assumption, restart, cap-hit
/// and emission counts.
pub fn summary_csv(
    ledger: &RequestLedger,
    states: &BTreeMap<u64, StrategyState>,
    provenance: &str,
) -> String {
    let mut out = format!("# {provenance}\nweight,{}\n", ledger.weight().to_exact_string());
    out.push_str("n,assumption,restarts,cap_hits,emitted\n");
    for (n, st) in states {
        let _ = writeln!(
            out,
            "{n},{},{},{},{}",
            st.assumption.map(|v| v.to_string()).unwrap_or_default(),
            st.restarts,
            st.cap_hits,
            st.emitted
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encodings::lex_string;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cand(n: u64, value: u128, len: u32) -> StreamEvent {
        StreamEvent::Candidate {
            stage: 0,
            n,
            w: BitString::from_value_len(value, len),
        }
    }

    fn drop(n: u64, value: u32) -> StreamEvent {
        StreamEvent::Drop {
            stage: 0,
            n,
            value,
            witness: None,
        }
    }

    #[test]
    fn empty_stream_files_nothing() {
        let (ledger, states) = run_strategy(&[], 3).unwrap();
        assert!(ledger.is_empty());
        assert!(states.is_empty());
        assert!(ledger.weight().is_zero());
        assert_eq!(compile_ledger(&ledger, 1).unwrap().leaf_count(), 0);
    }

    /// The scripted run: assumption 9 with six candidates under cap 4,
    /// then a drop to 7 with two more.
    fn scripted() -> Vec<StreamEvent> {
        let mut ev = vec![drop(5, 9)];
        // distinct 5-bit prefixes 0..6
        ev.extend((0..6).map(|i| cand(5, i << 1, 6)));
        ev.push(drop(5, 7));
        ev.extend((6..8).map(|i| cand(5, i << 1, 6)));
        ev
    }

    #[test]
    fn cap_then_restart_on_the_scripted_stream() {
        let (ledger, states) = run_strategy(&scripted(), 4).unwrap();
        assert_eq!(ledger.len(), 6);
        assert_eq!(ledger.counter(5, 9), 4);
        assert_eq!(ledger.counter(5, 7), 2);
        assert_eq!(ledger.max_counter(), 4);
        let ks: Vec<u32> = ledger.entries().iter().map(|e| e.k).collect();
        assert_eq!(ks, [9, 9, 9, 9, 7, 7]);
        // 4·2^(−9) + 2·2^(−7) = 3/2^7 exactly
        assert_eq!(ledger.weight().to_exact_string(), "3/2^7");
        let st = &states[&5];
        assert_eq!(st.assumption, Some(7));
        assert_eq!(st.restarts, 1);
        assert_eq!(st.cap_hits, 1);
        assert!(!st.capped);
        assert_eq!(st.emitted, 2);
        // the first four candidates survived, the throttled two did not
        assert!(ledger.contains(&BitString::from_value_len(3, 5), 9));
        assert!(!ledger.contains(&BitString::from_value_len(4, 5), 9));
        // determinism
        let again = run_strategy(&scripted(), 4).unwrap();
        assert_eq!(ledger, again.0);
        assert_eq!(states, again.1);
    }

    #[test]
    fn streams_must_strictly_decrease() {
        for bad in [9, 10] {
            match run_strategy(&[drop(5, 9), drop(5, bad)], 2) {
                Err(KtrivError::InvalidStream {
                    n: 5,
                    previous: 9,
                    proposed,
                }) => assert_eq!(proposed, bad),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn gated_candidates_are_ignored() {
        // before any assumption
        let (ledger, states) = run_strategy(&[cand(5, 0, 6)], 2).unwrap();
        assert!(ledger.is_empty() && states.is_empty());
        // too short to truncate
        let (ledger, _) = run_strategy(&[drop(5, 9), cand(5, 0, 4)], 2).unwrap();
        assert!(ledger.is_empty());
        // past the cap, and duplicates never consume it
        let events = [
            drop(3, 8),
            cand(3, 1, 3),
            cand(3, 1, 3),
            cand(3, 2, 3),
            cand(3, 3, 3),
        ];
        let (ledger, states) = run_strategy(&events, 2).unwrap();
        assert_eq!(ledger.len(), 2);
        assert_eq!(ledger.counter(3, 8), 2);
        let st = &states[&3];
        assert!(st.capped);
        assert_eq!((st.emitted, st.cap_hits), (2, 1));
    }

    #[test]
    fn scripted_ledger_compiles_and_decodes() {
        let (ledger, states) = run_strategy(&scripted(), 4).unwrap();
        // headroom for weight ≤ 2d = 8
        let e = 3;
        let tree = compile_ledger(&ledger, e).unwrap();
        assert_eq!(tree.leaf_count(), ledger.len());
        let mut alloc = Allocator::new();
        for entry in ledger.entries() {
            let code = alloc.request(entry.k + e).unwrap();
            assert_eq!(code.len(), (entry.k + e) as usize);
            let (payload, consumed) = tree.decode(&code).unwrap();
            assert_eq!(payload, try_lex_index(&entry.w).unwrap());
            assert_eq!(consumed, code.len());
        }
        let text = ledger.to_text("demo");
        assert!(text.contains("5 9 00000 0\n"));
        let reparsed = RequestLedger::parse(&text).unwrap();
        assert_eq!(reparsed, ledger);
        assert!(matches!(
            RequestLedger::parse("# ledger x\n1 2 01\n"),
            Err(KtrivError::Corrupt { line: 2 })
        ));
        let csv = summary_csv(&ledger, &states, "demo");
        assert!(csv.contains("weight,3/2^7"));
        assert!(csv.contains("5,7,1,1,2"));
    }

    #[test]
    fn weight_never_exceeds_twice_the_cap_on_random_streams() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for round in 0..500 {
            let d = rng.gen_range(1..6u32);
            let mut queues: Vec<Vec<StreamEvent>> = Vec::new();
            let mut ns: Vec<u64> = (0..rng.gen_range(1..8u64))
                .map(|_| rng.gen_range(0..30u64))
                .collect();
            ns.sort_unstable();
            ns.dedup();
            for &n in &ns {
                // keep every assumption above the Kraft-safety floor
                let floor = 2 * (64 - (n + 1).leading_zeros()) + 2;
                let mut q = Vec::new();
                let mut v = floor + rng.gen_range(0..20);
                loop {
                    q.push(drop(n, v));
                    for _ in 0..rng.gen_range(0..d + 3) {
                        let len = n as u32 + rng.gen_range(0..6u32);
                        let value = if len == 0 { 0 } else { rng.gen::<u128>() >> (128 - len.min(127)) };
                        q.push(cand(n, value, len.min(127)));
                    }
                    if v == floor || rng.gen_bool(0.5) {
                        break;
                    }
                    v = rng.gen_range(floor..v);
                }
                queues.push(q);
            }
            // interleave the per-n queues in random order
            let mut order: Vec<usize> = queues
                .iter()
                .enumerate()
                .flat_map(|(i, q)| std::iter::repeat(i).take(q.len()))
                .collect();
            order.shuffle(&mut rng);
            let mut iters: Vec<_> = queues.into_iter().map(|q| q.into_iter()).collect();
            let events: Vec<StreamEvent> =
                order.into_iter().map(|i| iters[i].next().unwrap()).collect();

            let (ledger, _) = run_strategy(&events, d).unwrap();
            assert!(
                ledger.weight() <= Dyadic::from_int(2 * d as u64),
                "round {round}: weight {} over 2d = {}",
                ledger.weight(),
                2 * d
            );
            assert!(ledger.max_counter() <= d);
            let e = 32 - (2 * d - 1).leading_zeros();
            let tree = compile_ledger(&ledger, e).unwrap();
            assert_eq!(tree.leaf_count(), ledger.len());
        }
    }

    #[test]
    fn live_run_covers_every_settled_index() {
        let mut st = EnumState::new(MachineProfile::standard());
        st.advance(22).unwrap();
        let d = suggested_cap(st.profile());
        assert_eq!(d, 1);
        let alpha = SequenceSource::zeros();
        let events = live_stream(&st, &alpha, 8, 0).unwrap();
        let (ledger, states) = run_strategy(&events, d).unwrap();
        let mut adoptions = 0;
        for n in 0..=8u64 {
            let k_final = st.k(&lex_string(n as u128)).expect("all small indices settle");
            let prefix = alpha.prefix(n as usize).unwrap();
            assert!(ledger.contains(&prefix, k_final), "n={n} k={k_final}");
            let state = &states[&n];
            assert_eq!(state.assumption, Some(k_final));
            assert!(state.witness.is_some());
            adoptions += state.restarts + 1;
        }
        // the literal channel contributes nothing at desk scale: every
        // filed pair is a hypothesis-channel candidate
        assert_eq!(ledger.len() as u32, adoptions);
        assert!(ledger.weight() <= Dyadic::from_int(2 * d as u64));
        let tree = compile_ledger(&ledger, 1).unwrap();
        assert_eq!(tree.leaf_count(), ledger.len());
        // replay is deterministic
        assert_eq!(live_stream(&st, &alpha, 8, 0).unwrap(), events);
    }
}
