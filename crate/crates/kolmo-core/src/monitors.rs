//! Deficiency evaluators for the initial-segment randomness criteria:
//! prefix complexity versus length (Levin–Schnorr), plain complexity
//! versus length minus a computable allowance (Miller–Yu), a computable
//! upper bound alone (the decidable-machine criterion), and the
//! complexity-minus-length trend. All of them read stage-bounded tables,
//! and stage bounds only over-estimate complexity, so every monitor is
//! refutation-capable and nothing here certifies randomness: large
//! deficiencies refute candidate constants, small ones prove nothing.
//! Undiscovered prefixes are skipped and counted, never guessed.

use std::fmt::Write as _;
use std::path::Path;

use crate::bits::BitString;
use crate::dyadic::Dyadic;
use crate::enumerate::ComplexityView;
use crate::solovay::{certified_bits, gap_table, GapReport, SolovayError, UpperBoundFn};

#[derive(Debug, thiserror::Error)]
pub enum MonitorError {
    #[error("the source holds only {len} bits; a prefix of length {n} was requested")]
    SourceExhausted { len: usize, n: usize },
    #[error("digit stream refused: {0}")]
    Digits(#[from] SolovayError),
    #[error("could not load the source file: {0}")]
    File(String),
}

enum Backing {
    Zeros,
    Ones,
    Alternating,
    Literal(BitString),
    Alpha(UpperBoundFn),
    Omega(BitString),
}

/// A bit-sequence prefix supplier for the monitors. Rule, literal, and
/// file sources are fully stable; certified weight digits are stable
/// because certification makes them final; Ω-so-far digits are honest
/// snapshots that later stages may overturn, so they are flagged unstable.
pub struct SequenceSource {
    label: String,
    backing: Backing,
}

impl SequenceSource {
    /// The all-zeros sequence.
    pub fn zeros() -> Self {
        SequenceSource {
            label: "zeros".into(),
            backing: Backing::Zeros,
        }
    }

    /// The all-ones sequence.
    pub fn ones() -> Self {
        SequenceSource {
            label: "ones".into(),
            backing: Backing::Ones,
        }
    }

    /// The alternating sequence 0101….
    pub fn alternating() -> Self {
        SequenceSource {
            label: "alternating".into(),
            backing: Backing::Alternating,
        }
    }

    /// A finite literal; prefixes past its length are refused.
    pub fn literal(bits: BitString) -> Self {
        SequenceSource {
            label: "literal".into(),
            backing: Backing::Literal(bits),
        }
    }

    /// A finite source read from a text file of `0`/`1` characters;
    /// whitespace is ignored.
    pub fn from_file(path: &Path) -> Result<Self, MonitorError> {
        let text = std::fs::read_to_string(path).map_err(|e| MonitorError::File(e.to_string()))?;
        let cleaned: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let bits = if cleaned.is_empty() {
            BitString::new()
        } else {
            BitString::parse(&cleaned).map_err(|e| MonitorError::File(e.to_string()))?
        };
        Ok(SequenceSource {
            label: format!("file:{}", path.display()),
            backing: Backing::Literal(bits),
        })
    }

    /// The certified binary digits of the weight `Σ 2^(−f(n))`; requires a
    /// tail certificate and refuses rather than guess a digit.
    pub fn alpha_of(f: UpperBoundFn) -> Self {
        SequenceSource {
            label: "alpha".into(),
            backing: Backing::Alpha(f),
        }
    }

    /// The first `digits` fractional bits of a stage approximation `Ω_s`;
    /// a snapshot, every bit unstable.
    pub fn omega_prefix(omega: &Dyadic, digits: u32) -> Self {
        SequenceSource {
            label: "omega-so-far".into(),
            backing: Backing::Omega(omega.frac_bits(digits)),
        }
    }

    /// Display label for reports.
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Whether the delivered bits are final.
    pub fn is_stable(&self) -> bool {
        !matches!(self.backing, Backing::Omega(_))
    }

    /// The first `n` bits of the sequence.
    pub fn prefix(&self, n: usize) -> Result<BitString, MonitorError> {
        match &self.backing {
            Backing::Zeros => Ok((0..n).map(|_| 0u8).collect()),
            Backing::Ones => Ok((0..n).map(|_| 1u8).collect()),
            Backing::Alternating => Ok((0..n).map(|i| (i % 2) as u8).collect()),
            Backing::Literal(bits) | Backing::Omega(bits) => {
                if n > bits.len() {
                    return Err(MonitorError::SourceExhausted { len: bits.len(), n });
                }
                Ok(bits.prefix(n))
            }
            Backing::Alpha(f) => {
                let k = u32::try_from(n).map_err(|_| SolovayError::IndexOverflow)?;
                Ok(certified_bits(f, k)?)
            }
        }
    }
}

/// One row of a [`DeficiencyReport`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeficiencyRow {
    pub n: usize,
    /// The criterion's statistic at `n`; `None` where the table still
    /// shows the prefix undiscovered.
    pub statistic: Option<i64>,
    /// Running extremum of the defined statistics so far — supremum for
    /// the deficiency criteria, minimum for the trend.
    pub running: Option<i64>,
    /// Whether the source bits behind this row are final.
    pub stable: bool,
}

/// A monitor run: one statistic per prefix length, with the running
/// extremum, the stage watermark, and an honest count of skipped
/// undiscovered prefixes.
#[derive(Debug)]
pub struct DeficiencyReport {
    pub criterion: &'static str,
    /// Stage watermark of the consulted table (0 for table-free criteria).
    pub stage: u32,
    /// Prefixes whose complexity the table has not discovered.
    pub undiscovered: u64,
    pub rows: Vec<DeficiencyRow>,
}

impl DeficiencyReport {
    /// Final running extremum.
    pub fn extremum(&self) -> Option<i64> {
        self.rows.last().and_then(|r| r.running)
    }

    /// CSV rendering with a provenance comment header.
    pub fn to_csv(&self, fingerprint: &str) -> String {
        let cell = |v: Option<i64>| v.map(|v| v.to_string()).unwrap_or_default();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# profile={fingerprint} watermark={} criterion={} undiscovered={}",
            self.stage, self.criterion, self.undiscovered
        );
        let _ = writeln!(out, "n,statistic,running,stable");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.n,
                cell(r.statistic),
                cell(r.running),
                r.stable
            );
        }
        out
    }
}

fn build_report(
    criterion: &'static str,
    stage: u32,
    stable: bool,
    n_max: usize,
    minimize: bool,
    mut stat: impl FnMut(usize) -> Result<Option<i64>, MonitorError>,
) -> Result<DeficiencyReport, MonitorError> {
    let mut rows = Vec::new();
    let mut running = None;
    let mut undiscovered = 0;
    for n in 1..=n_max {
        let statistic = stat(n)?;
        match statistic {
            Some(v) => {
                running = Some(running.map_or(v, |r: i64| if minimize { r.min(v) } else { r.max(v) }));
            }
            None => undiscovered += 1,
        }
        rows.push(DeficiencyRow {
            n,
            statistic,
            running,
            stable,
        });
    }
    Ok(DeficiencyReport {
        criterion,
        stage,
        undiscovered,
        rows,
    })
}

/// Prefix-complexity deficiency `d(n) = n − K_s(α↾n)`. Lower-bounds the
/// true deficiency, so a large supremum refutes candidate constants while
/// a small one proves nothing.
pub fn levin_schnorr(
    src: &SequenceSource,
    view: &impl ComplexityView,
    n_max: usize,
) -> Result<DeficiencyReport, MonitorError> {
    build_report(
        "levin_schnorr",
        view.stage(),
        src.is_stable(),
        n_max,
        false,
        |n| {
            let x = src.prefix(n)?;
            Ok(view.k(&x).map(|k| n as i64 - k as i64))
        },
    )
}

/// Plain-complexity deficiency against a computable allowance:
/// `d(n) = n − g(n) − C_s(α↾n)`, with `g` evaluated at the prefix length.
pub fn miller_yu(
    src: &SequenceSource,
    view: &impl ComplexityView,
    g: &UpperBoundFn,
    n_max: usize,
) -> Result<DeficiencyReport, MonitorError> {
    build_report(
        "miller_yu",
        view.stage(),
        src.is_stable(),
        n_max,
        false,
        |n| {
            let x = src.prefix(n)?;
            let allowance = g.eval(n as u128)? as i64;
            Ok(view.c(&x).map(|c| n as i64 - allowance - c as i64))
        },
    )
}

/// The decidable-bound criterion `d(n) = n − f(α↾n)` with `f` evaluated on
/// the prefix itself. `f` is computable, so this is the one monitor that
/// is exact at desk scale: no table, no ⊤, bit-for-bit reproducible.
pub fn bm_criterion(
    src: &SequenceSource,
    f: &UpperBoundFn,
    n_max: usize,
) -> Result<DeficiencyReport, MonitorError> {
    build_report("bm", 0, src.is_stable(), n_max, false, |n| {
        let x = src.prefix(n)?;
        Ok(Some(n as i64 - f.eval_str(&x)? as i64))
    })
}

/// The trend statistic `g(n) = K_s(α↾n) − n` with its running minimum.
pub fn chaitin_trend(
    src: &SequenceSource,
    view: &impl ComplexityView,
    n_max: usize,
) -> Result<DeficiencyReport, MonitorError> {
    build_report(
        "chaitin_trend",
        view.stage(),
        src.is_stable(),
        n_max,
        true,
        |n| {
            let x = src.prefix(n)?;
            Ok(view.k(&x).map(|k| k as i64 - n as i64))
        },
    )
}

/// Empirical probe of "does `g` track `K` within a constant from above?":
/// the running minimum of `g − K_s` over the length-lex indices — the same
/// observable as the gap table, so it is the gap table.
pub fn solovayness_probe(
    g: &UpperBoundFn,
    view: &impl ComplexityView,
    m_max: u128,
) -> Result<GapReport, SolovayError> {
    gap_table(g, view, m_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::EnumState;
    use crate::machine::MachineProfile;

    fn state(stage: u32) -> EnumState {
        let mut st = EnumState::new(MachineProfile::standard());
        st.advance(stage).unwrap();
        st
    }

    /// A converged table with log-sized complexities, for exercising the
    /// asymptotic claims that honest stage tables cannot reach.
    struct ConvergedView;

    impl ComplexityView for ConvergedView {
        fn k(&self, x: &BitString) -> Option<u32> {
            Some(2 * (u64::BITS - (x.len() as u64 + 2).leading_zeros()) + 9)
        }
        fn c(&self, x: &BitString) -> Option<u32> {
            Some((u64::BITS - (x.len() as u64 + 2).leading_zeros()) + 3)
        }
        fn stage(&self) -> u32 {
            u32::MAX
        }
    }

    #[test]
    fn rule_sources_produce_their_prefixes() {
        assert_eq!(SequenceSource::zeros().prefix(5).unwrap().to_string(), "00000");
        assert_eq!(SequenceSource::ones().prefix(3).unwrap().to_string(), "111");
        assert_eq!(
            SequenceSource::alternating().prefix(6).unwrap().to_string(),
            "010101"
        );
        assert_eq!(SequenceSource::zeros().prefix(0).unwrap(), BitString::new());
        assert!(SequenceSource::zeros().is_stable());
    }

    #[test]
    fn finite_sources_refuse_past_their_end() {
        let lit = SequenceSource::literal(BitString::parse("1101").unwrap());
        assert_eq!(lit.prefix(4).unwrap().to_string(), "1101");
        assert!(matches!(
            lit.prefix(5),
            Err(MonitorError::SourceExhausted { len: 4, n: 5 })
        ));
    }

    #[test]
    fn file_sources_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flips.txt");
        std::fs::write(&path, "110 10\n01\n").unwrap();
        let src = SequenceSource::from_file(&path).unwrap();
        assert_eq!(src.prefix(7).unwrap().to_string(), "1101001");
        assert!(src.is_stable());
        assert!(matches!(
            SequenceSource::from_file(&dir.path().join("absent.txt")),
            Err(MonitorError::File(_))
        ));
        std::fs::write(&path, "012").unwrap();
        assert!(matches!(
            SequenceSource::from_file(&path),
            Err(MonitorError::File(_))
        ));
    }

    #[test]
    fn alpha_sources_deliver_certified_digits() {
        let src = SequenceSource::alpha_of(UpperBoundFn::n_plus_c(2));
        assert_eq!(src.prefix(5).unwrap().to_string(), "01111");
        assert!(src.is_stable());
        // refusal propagates rather than guessing a digit
        let src = SequenceSource::alpha_of(UpperBoundFn::two_ceil_log());
        assert!(matches!(
            src.prefix(4),
            Err(MonitorError::Digits(SolovayError::BoundaryAmbiguity { .. }))
        ));
    }

    #[test]
    fn omega_sources_snapshot_and_admit_instability() {
        let st = state(16);
        assert_eq!(st.omega().to_exact_string(), "389/2^15");
        let src = SequenceSource::omega_prefix(&st.omega(), 10);
        assert_eq!(src.prefix(10).unwrap().to_string(), "0000001100");
        assert!(!src.is_stable());
        let report = levin_schnorr(&src, &st, 8).unwrap();
        assert!(report.rows.iter().all(|r| !r.stable));
    }

    #[test]
    fn empty_report_at_zero() {
        let st = state(14);
        let report = levin_schnorr(&SequenceSource::zeros(), &st, 0).unwrap();
        assert!(report.rows.is_empty());
        assert_eq!(report.extremum(), None);
        assert_eq!(report.undiscovered, 0);
    }

    #[test]
    fn levin_schnorr_zeros_at_the_desk_horizon() {
        let st = state(16);
        let report = levin_schnorr(&SequenceSource::zeros(), &st, 6).unwrap();
        let stats: Vec<_> = report.rows.iter().map(|r| r.statistic).collect();
        assert_eq!(stats, [Some(-10), Some(-11), Some(-12), None, None, None]);
        assert_eq!(report.undiscovered, 3);
        assert_eq!(report.extremum(), Some(-10));
        // the running supremum never decreases
        let mut prev = i64::MIN;
        for r in &report.rows {
            if let Some(v) = r.running {
                assert!(v >= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn levin_schnorr_coin_flips_stay_modest() {
        let st = state(16);
        let flips = SequenceSource::literal(BitString::parse("110100111010").unwrap());
        let report = levin_schnorr(&flips, &st, 12).unwrap();
        // discovered rows exist and none beats the all-zeros deficiency
        assert!(report.undiscovered < 12);
        assert!(report.extremum().unwrap() <= -10);
    }

    #[test]
    fn miller_yu_pointwise_dominating_allowance() {
        let st = state(16);
        let report = miller_yu(
            &SequenceSource::zeros(),
            &st,
            &UpperBoundFn::constant(100),
            6,
        )
        .unwrap();
        // g(n) ≥ n + C_s pointwise forces d ≤ 0 — here far below
        assert_eq!(report.rows[0].statistic, Some(1 - 100 - 11));
        assert!(report.rows.iter().flat_map(|r| r.statistic).all(|d| d <= 0));
        assert_eq!(report.undiscovered, 3);
    }

    #[test]
    fn miller_yu_grows_on_a_converged_table() {
        let report = miller_yu(
            &SequenceSource::zeros(),
            &ConvergedView,
            &UpperBoundFn::two_ceil_log(),
            64,
        )
        .unwrap();
        // compressible source, log allowance, log table: d(n) ≈ n − O(log n)
        assert_eq!(report.undiscovered, 0);
        assert!(report.extremum().unwrap() >= 64 - 4 * 7 - 3);
        let d: Vec<_> = report.rows.iter().map(|r| r.statistic.unwrap()).collect();
        assert!(d[63] > d[7]);
    }

    #[test]
    fn bm_criterion_is_exact_arithmetic() {
        let f = UpperBoundFn::two_len_plus_2();
        let report = bm_criterion(&SequenceSource::zeros(), &f, 40).unwrap();
        for r in &report.rows {
            assert_eq!(r.statistic, Some(-(r.n as i64) - 2));
        }
        assert_eq!(report.undiscovered, 0);
        assert_eq!(report.extremum(), Some(-3));
        // bit-for-bit reproducible
        let again = bm_criterion(&SequenceSource::zeros(), &f, 40).unwrap();
        assert_eq!(report.rows, again.rows);
    }

    #[test]
    fn chaitin_trend_at_the_desk_horizon_and_converged() {
        let st = state(16);
        let report = chaitin_trend(&SequenceSource::zeros(), &st, 6).unwrap();
        let stats: Vec<_> = report.rows.iter().map(|r| r.statistic).collect();
        assert_eq!(stats, [Some(10), Some(11), Some(12), None, None, None]);
        assert_eq!(report.extremum(), Some(10));
        // on a converged log-sized table the trend heads down instead
        let conv = chaitin_trend(&SequenceSource::zeros(), &ConvergedView, 64).unwrap();
        assert_eq!(conv.extremum(), conv.rows.last().unwrap().statistic);
        assert!(conv.extremum().unwrap() < -30);
        // and everywhere, K_s ≥ 0 gives g(n) ≥ −n
        for r in &conv.rows {
            assert!(r.statistic.unwrap() >= -(r.n as i64));
        }
    }

    #[test]
    fn chaitin_trend_never_rises_with_the_stage() {
        let lo = state(14);
        let hi = state(16);
        let a = chaitin_trend(&SequenceSource::zeros(), &lo, 6).unwrap();
        let b = chaitin_trend(&SequenceSource::zeros(), &hi, 6).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            if let (Some(va), Some(vb)) = (ra.statistic, rb.statistic) {
                assert!(vb <= va);
            }
            // discovery only grows
            assert!(ra.statistic.is_none() || rb.statistic.is_some());
        }
    }

    #[test]
    fn cross_criterion_consistency() {
        // plain never exceeds prefix on both-discovered strings at the
        // measured constant 0, i.e. n − K_s ≤ n − C_s; a violation would
        // flag an enumerator bug
        let st = state(16);
        for m in 0..200u128 {
            let x = crate::encodings::lex_string(m);
            if let (Some(c), Some(k)) = (st.c(&x), st.k(&x)) {
                assert!(c <= k, "m={m}");
            }
        }
    }

    #[test]
    fn probe_is_the_gap_table() {
        let st = state(16);
        let g = UpperBoundFn::two_len_plus_2();
        let probe = solovayness_probe(&g, &st, 7).unwrap();
        let table = gap_table(&g, &st, 7).unwrap();
        assert_eq!(probe.rows, table.rows);
        assert_eq!(probe.min_gap(), Some(-9));
    }

    #[test]
    fn reports_render_with_provenance() {
        let st = state(16);
        let report = levin_schnorr(&SequenceSource::zeros(), &st, 4).unwrap();
        let csv = report.to_csv(&st.profile().fingerprint());
        let header = format!(
            "# profile={} watermark=16 criterion=levin_schnorr undiscovered=1\n",
            st.profile().fingerprint()
        );
        assert!(csv.starts_with(&header));
        assert!(csv.contains("\n1,-10,-10,true\n"));
        assert!(csv.contains("\n4,,-10,true\n"));
    }
}
