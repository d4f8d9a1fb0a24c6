//! Command-line front end: profiles, persistent enumeration runs, and the
//! workbench experiments, each emitting self-describing tables.
//!
//! Every subcommand resolves its parameters the same way — explicit flag,
//! then `--config` key=value file, then built-in default — loads the machine
//! profile named by `--profile` (or the `KOLMO_PROFILE` environment
//! variable), runs one experiment, and writes its files under `--out`.
//! Emitted files start with a provenance header: the profile fingerprint,
//! the stage watermark where one applies, and an echo of the effective
//! configuration. A rerun with the same configuration reproduces every
//! file byte for byte.
//!
//! Exit codes are a stable contract: 0 success, 1 any delegated error,
//! 2 a ledger written under a different profile, 3 enumeration work over
//! the configured cap.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use kolmo_core::enumerate::{EnumError, EnumState};
use kolmo_core::kraft::{compile_function, Allocator, CodeTree};
use kolmo_core::ktrivial::{
    compile_ledger, live_stream, run_strategy, suggested_cap, summary_csv, RequestLedger,
};
use kolmo_core::machine::vm::Mode;
use kolmo_core::machine::MachineProfile;
use kolmo_core::monitors::{
    bm_criterion, chaitin_trend, levin_schnorr, miller_yu, solovayness_probe, SequenceSource,
};
use kolmo_core::nogap::{
    bias_report, build_schedule, complexity_consistency, insert_zeros, selection_rule,
    settling_schedule, NondecreasingFn, OracleMachine,
};
use kolmo_core::solovay::{
    alpha_approx, berry_f, certified_bits, gap_table, ratio_table, TailCertificate, UpperBoundFn,
};
use kolmo_core::{BitString, Dyadic};

const EXIT_CODES: &str = "Exit codes:\n  \
    0  success\n  \
    1  delegated error (arguments, refused construction, I/O)\n  \
    2  ledger was written under a different machine profile\n  \
    3  enumeration work exceeds the configured cap";

/// Desk-scale algorithmic-information workbench.
#[derive(Parser)]
#[command(name = "kolmo", version, after_help = EXIT_CODES)]
struct Cli {
    /// key=value defaults file; explicit flags win over its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Machine profile: "standard", "bytecode-only", or a profile file
    /// path. Falls back to the KOLMO_PROFILE environment variable.
    #[arg(long, global = true)]
    profile: Option<String>,
    /// Directory for emitted files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Advance the dovetailed enumeration; write its ledger and a
    /// per-stage summary table.
    Enumerate(EnumerateArgs),
    /// Reports around computable upper bounds of prefix complexity.
    Solovay {
        #[command(subcommand)]
        cmd: SolovayCmd,
    },
    /// Online prefix-code allocation and code-tree compilation.
    Kc {
        #[command(subcommand)]
        cmd: KcCmd,
    },
    /// Shortest-string demonstrator: emitted programs versus the rule
    /// they compress against.
    Berry(BerryArgs),
    /// Randomness monitors over a bit source and a complexity snapshot.
    Monitor {
        #[command(subcommand)]
        cmd: MonitorCmd,
    },
    /// Insertion schedules, the staged selection rule, and their reports.
    Nogap {
        #[command(subcommand)]
        cmd: NogapCmd,
    },
    /// Low-complexity request strategy: run it and compile its ledger.
    Ktriv {
        #[command(subcommand)]
        cmd: KtrivCmd,
    },
}

#[derive(Args)]
struct EnumerateArgs {
    /// Target stage watermark.
    #[arg(long)]
    stage: Option<u32>,
    /// Continue from the ledger file instead of starting fresh.
    #[arg(long)]
    resume: bool,
    /// Ledger file path (default: <out>/enumeration.ledger).
    #[arg(long)]
    ledger: Option<PathBuf>,
    /// Per-stage work-unit cap; progress up to the cap is still written.
    #[arg(long)]
    work_cap: Option<u64>,
}

#[derive(Subcommand)]
enum SolovayCmd {
    /// Gap table f(m) − K_s(σ(m)) against an enumeration snapshot.
    Gap {
        /// Bound rule (default: the machine-derived trace bound).
        #[arg(long)]
        f: Option<String>,
        #[arg(long)]
        m_max: Option<u128>,
        #[arg(long)]
        stage: Option<u32>,
    },
    /// Exact partial sum Σ_{m ≤ n} 2^(−f(m)) of the trace bound.
    Sum {
        #[arg(long)]
        n: Option<u128>,
    },
    /// Certified leading bits of the limit real Σ 2^(−f(m)).
    Alpha {
        /// Certificate-carrying rule: "nplus:<c>" or "2ceillog".
        #[arg(long)]
        f: Option<String>,
        /// How many fractional bits to certify.
        #[arg(long)]
        k: Option<u32>,
    },
}

#[derive(Subcommand)]
enum KcCmd {
    /// Serve a stream of length requests; emit the issued codewords.
    Alloc {
        /// Comma-separated lengths, or file:<path> with one per line.
        #[arg(long)]
        requests: Option<String>,
        /// Budget exponent: total weight may reach 2^<exponent>.
        #[arg(long)]
        exponent: Option<u32>,
    },
    /// Compile a length rule into a registered code tree.
    Compile {
        /// Length rule: "affine:<a>,<b>" for f(n) = a·n + b, or
        /// "const:<k>".
        #[arg(long)]
        rule: Option<String>,
        /// Budget exponent: needs Σ 2^(−f(n)) ≤ 2^<c>.
        #[arg(long)]
        c: Option<u32>,
        /// Largest payload index compiled.
        #[arg(long)]
        nmax: Option<u128>,
        /// Tree id to register under.
        #[arg(long)]
        slot: Option<u32>,
        /// Also write the updated profile here, for later --profile use.
        #[arg(long)]
        emit_profile: Option<PathBuf>,
    },
}

#[derive(Args)]
struct BerryArgs {
    /// Comma-separated value targets.
    #[arg(long)]
    targets: Option<String>,
    /// Step budget for verifying each emitted program.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    stage: Option<u32>,
}

#[derive(Subcommand)]
enum MonitorCmd {
    /// Prefix-complexity deficiency n − K_s(w↾n).
    Ls(MonitorViewArgs),
    /// Plain-complexity deficiency n − g(n) − C_s(w↾n).
    My(MonitorViewArgs),
    /// Table-free deficiency n − f(w↾n) for a computable bound f.
    Bm {
        #[arg(long)]
        f: Option<String>,
        #[arg(long)]
        src: Option<String>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Trend statistic K_s(w↾n) − n with its running minimum.
    Chaitin(MonitorViewArgs),
    /// Gap table for an arbitrary rule — how often it grazes K_s.
    Probe {
        #[arg(long)]
        f: Option<String>,
        #[arg(long)]
        m_max: Option<u128>,
        #[arg(long)]
        stage: Option<u32>,
    },
}

#[derive(Args)]
struct MonitorViewArgs {
    /// Bit source: zeros | ones | alternating | literal:<bits> |
    /// file:<path> | alpha:<rule> | omega:<digits>.
    #[arg(long)]
    src: Option<String>,
    /// Prefix horizon.
    #[arg(long)]
    n: Option<usize>,
    /// Rule for criteria that take one (default 2ceillog).
    #[arg(long)]
    f: Option<String>,
    #[arg(long)]
    stage: Option<u32>,
}

#[derive(Subcommand)]
enum NogapCmd {
    /// Build the insertion schedule n_k = h⁻¹(k) + t(k).
    Build(NogapBuildArgs),
    /// Stitch, select, and compare: the end-to-end recovery experiment.
    Select(NogapSelectArgs),
    /// Consistency and settling tables around a construction.
    Report {
        /// consistency | settling
        #[arg(long)]
        kind: Option<String>,
        #[command(flatten)]
        build: NogapBuildArgs,
        #[arg(long)]
        stage: Option<u32>,
        /// Horizon for the settling table.
        #[arg(long)]
        nmax: Option<u64>,
    },
}

#[derive(Args, Clone)]
struct NogapBuildArgs {
    /// Nondecreasing rule: identity | half | sqrt | log | const:<c> |
    /// dual:<rule>.
    #[arg(long)]
    h: Option<String>,
    /// Machine instance: immediate | linear | oracle |
    /// scripted:<d0,d1,…> | broken:<at>.
    #[arg(long)]
    phi: Option<String>,
    /// How many insertion positions to build.
    #[arg(long)]
    count: Option<u64>,
    /// Source sequence the zeros are inserted into.
    #[arg(long)]
    alpha: Option<String>,
}

#[derive(Args)]
struct NogapSelectArgs {
    #[command(flatten)]
    build: NogapBuildArgs,
    /// Selection horizon (default: one past the last position).
    #[arg(long)]
    nmax: Option<u64>,
}

#[derive(Subcommand)]
enum KtrivCmd {
    /// Run the strategy on the live enumeration stream; file its ledger.
    Run {
        #[arg(long)]
        stage: Option<u32>,
        /// Largest index n the strategy tracks.
        #[arg(long)]
        nmax: Option<u64>,
        /// Candidate slack constant in K_s(w) ≤ f(m) + c.
        #[arg(long)]
        c: Option<u32>,
        /// Per-assumption request cap (default: the profile's suggested
        /// cap).
        #[arg(long)]
        d: Option<u32>,
        /// The tracked sequence.
        #[arg(long)]
        alpha: Option<String>,
    },
    /// Compile a filed request ledger into a prefix code tree.
    Compile {
        /// Ledger file written by `ktriv run`.
        #[arg(long)]
        ledger: Option<PathBuf>,
        /// Budget exponent (default: smallest that fits the weight).
        #[arg(long)]
        headroom: Option<u32>,
    },
}

/// Delegated failure with the exit code it maps to.
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn msg(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }
}

macro_rules! delegate_errors {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::msg(e.to_string())
            }
        }
    )*};
}

delegate_errors!(
    kolmo_core::kraft::KraftError,
    kolmo_core::kraft::TreeError,
    kolmo_core::ktrivial::KtrivError,
    kolmo_core::machine::ProfileError,
    kolmo_core::monitors::MonitorError,
    kolmo_core::nogap::NogapError,
    kolmo_core::solovay::SolovayError,
    std::io::Error
);

impl From<EnumError> for CliError {
    fn from(e: EnumError) -> Self {
        let code = match e {
            EnumError::FingerprintMismatch { .. } => 2,
            EnumError::ResourceLimit { .. } => 3,
            EnumError::CorruptLedger { .. } => 1,
        };
        CliError { code, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

/// Effective run context: parsed config file, output directory, and the
/// loaded machine profile.
struct Ctx {
    cfg: BTreeMap<String, String>,
    out_dir: PathBuf,
    profile: MachineProfile,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Self, CliError> {
        let cfg = match &cli.config {
            Some(path) => parse_config(path)?,
            None => BTreeMap::new(),
        };
        let out_dir = cli
            .out
            .clone()
            .or_else(|| cfg.get("out").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        let spec = cli
            .profile
            .clone()
            .or_else(|| cfg.get("profile").cloned())
            .or_else(|| std::env::var("KOLMO_PROFILE").ok())
            .unwrap_or_else(|| "standard".to_string());
        let profile = load_profile(&spec)?;
        Ok(Ctx { cfg, out_dir, profile })
    }

    /// Flag value, else config entry, else the default.
    fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError> {
        match (flag, self.cfg.get(key)) {
            (Some(v), _) => Ok(v),
            (None, Some(raw)) => raw.parse::<T>().map_err(|_| {
                CliError::msg(format!("config key {key} has unusable value {raw:?}"))
            }),
            (None, None) => Ok(default),
        }
    }

    /// Like [`Ctx::resolve`] but with no default.
    fn resolve_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        match (flag, self.cfg.get(key)) {
            (Some(v), _) => Ok(Some(v)),
            (None, Some(raw)) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::msg(format!("config key {key} has unusable value {raw:?}"))
            }),
            (None, None) => Ok(None),
        }
    }

    /// A fresh enumeration advanced to `stage` under the active profile.
    fn state_at(&self, stage: u32) -> Result<EnumState, CliError> {
        let mut st = EnumState::new(self.profile.clone());
        st.advance(stage)?;
        Ok(st)
    }

    /// Writes `content` under the output directory; reports the path.
    fn emit(&self, name: &str, content: &str) -> Result<(), CliError> {
        fs::create_dir_all(&self.out_dir)
            .map_err(|e| CliError::msg(format!("cannot create {}: {e}", self.out_dir.display())))?;
        let path = self.out_dir.join(name);
        fs::write(&path, content)
            .map_err(|e| CliError::msg(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn parse_config(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::msg(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::msg(format!("config line {} is not key=value: {line:?}", i + 1))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn load_profile(spec: &str) -> Result<MachineProfile, CliError> {
    match spec {
        "standard" => Ok(MachineProfile::standard()),
        "bytecode-only" => Ok(MachineProfile::bytecode_only()),
        path => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::msg(format!("cannot read profile {path}: {e}")))?;
            Ok(MachineProfile::from_text(&text)?)
        }
    }
}

/// Parses a named complexity-bound rule. With `certified`, only the
/// families carrying a tail certificate are accepted.
fn parse_rule(
    spec: &str,
    profile: &MachineProfile,
    certified: bool,
) -> Result<UpperBoundFn, CliError> {
    let plain = |f: UpperBoundFn| {
        if certified {
            Err(CliError::msg(format!("rule {spec} carries no tail certificate")))
        } else {
            Ok(f)
        }
    };
    if let Some(c) = spec.strip_prefix("nplus:") {
        let c: u32 = c.parse().map_err(|_| CliError::msg(format!("bad rule {spec:?}")))?;
        let f = UpperBoundFn::n_plus_c(c);
        return Ok(if certified { f.with_certificate(TailCertificate::n_plus_c(c)) } else { f });
    }
    if let Some(k) = spec.strip_prefix("const:") {
        let k: u32 = k.parse().map_err(|_| CliError::msg(format!("bad rule {spec:?}")))?;
        return plain(UpperBoundFn::constant(k));
    }
    match spec {
        "2ceillog" => {
            let f = UpperBoundFn::two_ceil_log();
            Ok(if certified { f.with_certificate(TailCertificate::two_ceil_log()) } else { f })
        }
        "const2len" => plain(UpperBoundFn::two_len_plus_2()),
        "solovay" => plain(UpperBoundFn::solovay(profile.clone())),
        _ => Err(CliError::msg(format!(
            "unknown rule {spec:?} (try const2len, 2ceillog, nplus:<c>, const:<k>, solovay)"
        ))),
    }
}

/// Parses a bit-source description; `state` backs the omega source.
fn parse_src(
    spec: &str,
    profile: &MachineProfile,
    state: Option<&EnumState>,
) -> Result<SequenceSource, CliError> {
    if let Some(bits) = spec.strip_prefix("literal:") {
        let bits = BitString::parse(bits)
            .map_err(|_| CliError::msg(format!("bad literal bits {bits:?}")))?;
        return Ok(SequenceSource::literal(bits));
    }
    if let Some(path) = spec.strip_prefix("file:") {
        return Ok(SequenceSource::from_file(Path::new(path))?);
    }
    if let Some(rule) = spec.strip_prefix("alpha:") {
        return Ok(SequenceSource::alpha_of(parse_rule(rule, profile, true)?));
    }
    if let Some(digits) = spec.strip_prefix("omega:") {
        let digits: u32 =
            digits.parse().map_err(|_| CliError::msg(format!("bad digit count {digits:?}")))?;
        let st = state.ok_or_else(|| {
            CliError::msg("the omega source needs an enumeration stage (--stage)")
        })?;
        return Ok(SequenceSource::omega_prefix(&st.omega(), digits));
    }
    match spec {
        "zeros" => Ok(SequenceSource::zeros()),
        "ones" => Ok(SequenceSource::ones()),
        "alternating" => Ok(SequenceSource::alternating()),
        _ => Err(CliError::msg(format!(
            "unknown source {spec:?} (try zeros, ones, alternating, literal:<bits>, \
             file:<path>, alpha:<rule>, omega:<digits>)"
        ))),
    }
}

fn parse_h(spec: &str) -> Result<NondecreasingFn, CliError> {
    if let Some(c) = spec.strip_prefix("const:") {
        let c: u64 = c.parse().map_err(|_| CliError::msg(format!("bad rule {spec:?}")))?;
        return Ok(NondecreasingFn::constant(c));
    }
    if let Some(inner) = spec.strip_prefix("dual:") {
        return Ok(NondecreasingFn::dual_compose(&parse_h(inner)?));
    }
    match spec {
        "identity" => Ok(NondecreasingFn::identity()),
        "half" => Ok(NondecreasingFn::half_floor()),
        "sqrt" => Ok(NondecreasingFn::ceil_sqrt()),
        "log" => Ok(NondecreasingFn::ceil_log()),
        _ => Err(CliError::msg(format!(
            "unknown rule {spec:?} (try identity, half, sqrt, log, const:<c>, dual:<rule>)"
        ))),
    }
}

fn parse_phi(spec: &str, h: NondecreasingFn) -> Result<OracleMachine, CliError> {
    if let Some(delays) = spec.strip_prefix("scripted:") {
        let delays = parse_list::<u64>(delays)?;
        return Ok(OracleMachine::scripted(h, delays));
    }
    if let Some(at) = spec.strip_prefix("broken:") {
        let at: u64 = at.parse().map_err(|_| CliError::msg(format!("bad instance {spec:?}")))?;
        return Ok(OracleMachine::broken(h, at));
    }
    match spec {
        "immediate" => Ok(OracleMachine::immediate(h)),
        "linear" => Ok(OracleMachine::linear_delay(h)),
        "oracle" => Ok(OracleMachine::oracle_reading(h)),
        _ => Err(CliError::msg(format!(
            "unknown instance {spec:?} (try immediate, linear, oracle, scripted:<d,…>, \
             broken:<at>)"
        ))),
    }
}

fn parse_list<T: FromStr>(raw: &str) -> Result<Vec<T>, CliError> {
    raw.split(',')
        .filter(|part| !part.trim().is_empty())
        .map(|part| {
            part.trim().parse::<T>().map_err(|_| CliError::msg(format!("bad list entry {part:?}")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Ctx::new(&cli)?;
    match cli.cmd {
        Cmd::Enumerate(args) => cmd_enumerate(&ctx, args),
        Cmd::Solovay { cmd } => match cmd {
            SolovayCmd::Gap { f, m_max, stage } => cmd_solovay_gap(&ctx, f, m_max, stage),
            SolovayCmd::Sum { n } => cmd_solovay_sum(&ctx, n),
            SolovayCmd::Alpha { f, k } => cmd_solovay_alpha(&ctx, f, k),
        },
        Cmd::Kc { cmd } => match cmd {
            KcCmd::Alloc { requests, exponent } => cmd_kc_alloc(&ctx, requests, exponent),
            KcCmd::Compile { rule, c, nmax, slot, emit_profile } => {
                cmd_kc_compile(&ctx, rule, c, nmax, slot, emit_profile)
            }
        },
        Cmd::Berry(args) => cmd_berry(&ctx, args),
        Cmd::Monitor { cmd } => cmd_monitor(&ctx, cmd),
        Cmd::Nogap { cmd } => match cmd {
            NogapCmd::Build(args) => cmd_nogap_build(&ctx, args),
            NogapCmd::Select(args) => cmd_nogap_select(&ctx, args),
            NogapCmd::Report { kind, build, stage, nmax } => {
                cmd_nogap_report(&ctx, kind, build, stage, nmax)
            }
        },
        Cmd::Ktriv { cmd } => match cmd {
            KtrivCmd::Run { stage, nmax, c, d, alpha } => {
                cmd_ktriv_run(&ctx, stage, nmax, c, d, alpha)
            }
            KtrivCmd::Compile { ledger, headroom } => cmd_ktriv_compile(&ctx, ledger, headroom),
        },
    }
}

fn cmd_enumerate(ctx: &Ctx, args: EnumerateArgs) -> Result<(), CliError> {
    let stage = ctx.resolve(args.stage, "stage", 12)?;
    let resume = args.resume || ctx.cfg.get("resume").map(String::as_str) == Some("true");
    let ledger_path = ctx
        .resolve_opt(args.ledger, "ledger")?
        .unwrap_or_else(|| ctx.out_dir.join("enumeration.ledger"));
    let work_cap = ctx.resolve_opt(args.work_cap, "work_cap")?;

    let mut st = if resume && ledger_path.exists() {
        let file = fs::File::open(&ledger_path)
            .map_err(|e| CliError::msg(format!("cannot read {}: {e}", ledger_path.display())))?;
        EnumState::read_ledger(ctx.profile.clone(), BufReader::new(file))?
    } else {
        EnumState::new(ctx.profile.clone())
    };
    if let Some(cap) = work_cap {
        st.set_work_cap(cap);
    }

    // Advance, then persist whatever completed — an over-cap stage leaves
    // a resumable ledger behind before the error surfaces.
    let outcome = st.advance(stage);
    let mut buf = Vec::new();
    st.write_ledger(&mut buf)?;
    fs::create_dir_all(ledger_path.parent().unwrap_or(Path::new(".")))?;
    fs::write(&ledger_path, &buf)
        .map_err(|e| CliError::msg(format!("cannot write {}: {e}", ledger_path.display())))?;
    println!("wrote {}", ledger_path.display());

    let echo = format!("cmd=enumerate stage={stage} resume={resume}");
    let mut summary = format!(
        "# kolmo-enumeration profile={} watermark={} {echo}\n",
        ctx.profile.fingerprint(),
        st.watermark()
    );
    summary.push_str("stage,prefix_events,plain_events,omega\n");
    let mut prefix_by_stage = BTreeMap::new();
    let mut plain_by_stage = BTreeMap::new();
    for e in st.events() {
        let slot = match e.mode {
            Mode::Prefix => prefix_by_stage.entry(e.stage).or_insert(0u64),
            Mode::Plain => plain_by_stage.entry(e.stage).or_insert(0u64),
        };
        *slot += 1;
    }
    for s in 1..=st.watermark() {
        let _ = writeln!(
            summary,
            "{s},{},{},{}",
            prefix_by_stage.get(&s).copied().unwrap_or(0),
            plain_by_stage.get(&s).copied().unwrap_or(0),
            st.omega_at(s).map(Dyadic::to_exact_string).unwrap_or_default()
        );
    }
    ctx.emit("enumeration-summary.csv", &summary)?;
    println!(
        "watermark {} events {} omega {}",
        st.watermark(),
        st.event_count(),
        st.omega().to_exact_string()
    );
    outcome?;
    Ok(())
}

fn cmd_solovay_gap(
    ctx: &Ctx,
    f: Option<String>,
    m_max: Option<u128>,
    stage: Option<u32>,
) -> Result<(), CliError> {
    let f_spec = ctx.resolve(f, "f", "solovay".to_string())?;
    let m_max = ctx.resolve(m_max, "m_max", 255)?;
    let stage = ctx.resolve(stage, "stage", 12)?;
    let f = parse_rule(&f_spec, &ctx.profile, false)?;
    let st = ctx.state_at(stage)?;
    let report = gap_table(&f, &st, m_max)?;
    let echo = format!("cmd=solovay-gap f={f_spec} m_max={m_max} stage={stage}");
    let content = format!("# kolmo {echo}\n{}", report.to_csv(&ctx.profile.fingerprint()));
    ctx.emit("solovay-gap.csv", &content)?;
    println!(
        "rows {} min_gap {}",
        report.rows.len(),
        report.min_gap().map(|v| v.to_string()).unwrap_or_else(|| "-".to_string())
    );
    Ok(())
}

fn cmd_solovay_sum(ctx: &Ctx, n: Option<u128>) -> Result<(), CliError> {
    let n = ctx.resolve(n, "n", 4096)?;
    let f = UpperBoundFn::solovay(ctx.profile.clone());
    let sum = alpha_approx(&f, n)?;
    let below_8 = sum < Dyadic::from_int(8);
    let echo = format!("cmd=solovay-sum n={n}");
    let content = format!(
        "# kolmo-solovay-sum profile={} {echo}\nterms = {}\npartial_sum = {}\nbelow_8 = {below_8}\n",
        ctx.profile.fingerprint(),
        n + 1,
        sum.to_exact_string()
    );
    ctx.emit("solovay-sum.txt", &content)?;
    println!("terms {} partial_sum {} below_8 {below_8}", n + 1, sum.to_exact_string());
    Ok(())
}

fn cmd_solovay_alpha(ctx: &Ctx, f: Option<String>, k: Option<u32>) -> Result<(), CliError> {
    // Default to the geometric rule: its weight certifies at every
    // precision, while 2ceillog's sits exactly on a dyadic boundary and
    // is (correctly) refused.
    let f_spec = ctx.resolve(f, "f", "nplus:2".to_string())?;
    let k = ctx.resolve(k, "k", 16)?;
    let f = parse_rule(&f_spec, &ctx.profile, true)?;
    let bits = certified_bits(&f, k)?;
    let echo = format!("cmd=solovay-alpha f={f_spec} k={k}");
    let content = format!(
        "# kolmo-solovay-alpha profile={} {echo}\nbits = {}\n",
        ctx.profile.fingerprint(),
        bits.display_or_epsilon()
    );
    ctx.emit("solovay-alpha.txt", &content)?;
    println!("alpha_bits {}", bits.display_or_epsilon());
    Ok(())
}

fn cmd_kc_alloc(
    ctx: &Ctx,
    requests: Option<String>,
    exponent: Option<u32>,
) -> Result<(), CliError> {
    let raw = ctx.resolve(requests, "requests", "1,2,3".to_string())?;
    let exponent = ctx.resolve(exponent, "exponent", 0)?;
    let ks: Vec<u32> = match raw.strip_prefix("file:") {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::msg(format!("cannot read {path}: {e}")))?;
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| l.parse().map_err(|_| CliError::msg(format!("bad request {l:?}"))))
                .collect::<Result<_, _>>()?
        }
        None => parse_list(&raw)?,
    };
    let mut alloc = Allocator::with_exponent(exponent);
    let echo = format!("cmd=kc-alloc exponent={exponent} requests={}", ks.len());
    let mut table = format!("# kolmo-kc-alloc profile={} {echo}\n", ctx.profile.fingerprint());
    table.push_str("idx,k,codeword\n");
    let mut failure = None;
    for (idx, &k) in ks.iter().enumerate() {
        match alloc.request(k) {
            Ok(word) => {
                let _ = writeln!(table, "{idx},{k},{}", word.display_or_epsilon());
            }
            Err(e) => {
                failure = Some((idx, e));
                break;
            }
        }
    }
    let _ = writeln!(table, "# free_weight={}", alloc.free_weight().to_exact_string());
    ctx.emit("kc-alloc.csv", &table)?;
    println!("issued {} free_weight {}", alloc.issued().len(), alloc.free_weight().to_exact_string());
    match failure {
        Some((idx, e)) => Err(CliError::msg(format!("request {idx}: {e}"))),
        None => Ok(()),
    }
}

fn cmd_kc_compile(
    ctx: &Ctx,
    rule: Option<String>,
    c: Option<u32>,
    nmax: Option<u128>,
    slot: Option<u32>,
    emit_profile: Option<PathBuf>,
) -> Result<(), CliError> {
    let rule_spec = ctx.resolve(rule, "rule", "affine:2,2".to_string())?;
    let c = ctx.resolve(c, "c", 1)?;
    let nmax = ctx.resolve(nmax, "nmax", 6)?;
    let slot = ctx.resolve(slot, "slot", 4)?;
    let f: Box<dyn Fn(u128) -> u32> = if let Some(rest) = rule_spec.strip_prefix("affine:") {
        let parts = parse_list::<u32>(rest)?;
        let [a, b] = parts[..] else {
            return Err(CliError::msg(format!("rule affine wants two entries, got {rule_spec:?}")));
        };
        Box::new(move |n: u128| {
            (n.saturating_mul(a as u128).saturating_add(b as u128)).min(u32::MAX as u128) as u32
        })
    } else if let Some(k) = rule_spec.strip_prefix("const:") {
        let k: u32 = k.parse().map_err(|_| CliError::msg(format!("bad rule {rule_spec:?}")))?;
        Box::new(move |_| k)
    } else {
        return Err(CliError::msg(format!(
            "unknown length rule {rule_spec:?} (try affine:<a>,<b> or const:<k>)"
        )));
    };
    let before = ctx.profile.fingerprint();
    let mut profile = ctx.profile.clone();
    let tree = compile_function(&*f, c, nmax, &mut profile, slot)?;
    let after = profile.fingerprint();

    let echo = format!("cmd=kc-compile rule={rule_spec} c={c} nmax={nmax} slot={slot}");
    let mut content =
        format!("# kolmo-kc-compile profile={before} profile_after={after} {echo}\n");
    let _ = writeln!(content, "tree = {}", tree.to_text());
    let _ = writeln!(content, "leaves = {}", tree.leaf_count());
    content.push_str("codeword payload\n");
    let mut rows = Vec::new();
    collect_leaves(&tree, String::new(), &mut rows);
    for (word, payload) in &rows {
        let _ = writeln!(content, "{word} {payload}");
    }
    ctx.emit("kc-tree.txt", &content)?;
    if let Some(path) = emit_profile {
        fs::write(&path, profile.to_text())
            .map_err(|e| CliError::msg(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    println!("leaves {} fingerprint_after {after}", tree.leaf_count());
    Ok(())
}

fn collect_leaves(tree: &CodeTree, path: String, out: &mut Vec<(String, u128)>) {
    if let Some(v) = tree.payload() {
        let word = if path.is_empty() { "ε".to_string() } else { path };
        out.push((word, v));
        return;
    }
    for bit in 0..2u8 {
        if let Some(child) = tree.child(bit) {
            collect_leaves(child, format!("{path}{bit}"), out);
        }
    }
}

fn cmd_berry(ctx: &Ctx, args: BerryArgs) -> Result<(), CliError> {
    let targets_raw = ctx.resolve(args.targets, "targets", "4,8,16,32,64".to_string())?;
    let budget = ctx.resolve(args.budget, "budget", 1 << 40)?;
    let stage = ctx.resolve(args.stage, "stage", 12)?;
    let targets = parse_list::<u128>(&targets_raw)?;
    let st = ctx.state_at(stage)?;
    let f = UpperBoundFn::two_len_plus_2();
    let f_code = berry_f();
    let report = ratio_table(&ctx.profile, &f, &f_code, &targets, &st, budget)?;
    let increasing = report.rows.windows(2).all(|w| w[1].ratio > w[0].ratio);
    let echo = format!("cmd=berry targets={targets_raw} budget={budget} stage={stage}");
    let content = format!("# kolmo {echo}\n{}", report.to_csv(&ctx.profile.fingerprint()));
    ctx.emit("berry-ratio.csv", &content)?;
    println!("rows {} ratios_strictly_increasing {increasing}", report.rows.len());
    Ok(())
}

fn cmd_monitor(ctx: &Ctx, cmd: MonitorCmd) -> Result<(), CliError> {
    let (name, echo, content, verdict) = match cmd {
        MonitorCmd::Ls(args) => {
            let (src_spec, n, stage) = monitor_view_params(ctx, &args)?;
            let st = ctx.state_at(stage)?;
            let src = parse_src(&src_spec, &ctx.profile, Some(&st))?;
            let report = levin_schnorr(&src, &st, n)?;
            let echo = format!("cmd=monitor-ls src={src_spec} n={n} stage={stage}");
            (
                "monitor-ls.csv",
                echo,
                report.to_csv(&ctx.profile.fingerprint()),
                monitor_verdict(report.extremum(), report.undiscovered),
            )
        }
        MonitorCmd::My(args) => {
            let (src_spec, n, stage) = monitor_view_params(ctx, &args)?;
            let g_spec = ctx.resolve(args.f, "f", "2ceillog".to_string())?;
            let g = parse_rule(&g_spec, &ctx.profile, false)?;
            let st = ctx.state_at(stage)?;
            let src = parse_src(&src_spec, &ctx.profile, Some(&st))?;
            let report = miller_yu(&src, &st, &g, n)?;
            let echo = format!("cmd=monitor-my src={src_spec} f={g_spec} n={n} stage={stage}");
            (
                "monitor-my.csv",
                echo,
                report.to_csv(&ctx.profile.fingerprint()),
                monitor_verdict(report.extremum(), report.undiscovered),
            )
        }
        MonitorCmd::Bm { f, src, n } => {
            let f_spec = ctx.resolve(f, "f", "const2len".to_string())?;
            let src_spec = ctx.resolve(src, "src", "zeros".to_string())?;
            let n = ctx.resolve(n, "n", 64)?;
            let f = parse_rule(&f_spec, &ctx.profile, false)?;
            let src = parse_src(&src_spec, &ctx.profile, None)?;
            let report = bm_criterion(&src, &f, n)?;
            let echo = format!("cmd=monitor-bm f={f_spec} src={src_spec} n={n}");
            (
                "monitor-bm.csv",
                echo,
                report.to_csv(&ctx.profile.fingerprint()),
                monitor_verdict(report.extremum(), report.undiscovered),
            )
        }
        MonitorCmd::Chaitin(args) => {
            let (src_spec, n, stage) = monitor_view_params(ctx, &args)?;
            let st = ctx.state_at(stage)?;
            let src = parse_src(&src_spec, &ctx.profile, Some(&st))?;
            let report = chaitin_trend(&src, &st, n)?;
            let echo = format!("cmd=monitor-chaitin src={src_spec} n={n} stage={stage}");
            (
                "monitor-chaitin.csv",
                echo,
                report.to_csv(&ctx.profile.fingerprint()),
                monitor_verdict(report.extremum(), report.undiscovered),
            )
        }
        MonitorCmd::Probe { f, m_max, stage } => {
            let f_spec = ctx.resolve(f, "f", "2ceillog".to_string())?;
            let m_max = ctx.resolve(m_max, "m_max", 255)?;
            let stage = ctx.resolve(stage, "stage", 12)?;
            let f = parse_rule(&f_spec, &ctx.profile, false)?;
            let st = ctx.state_at(stage)?;
            let report = solovayness_probe(&f, &st, m_max)?;
            let echo = format!("cmd=monitor-probe f={f_spec} m_max={m_max} stage={stage}");
            let verdict = format!(
                "min_gap {}",
                report.min_gap().map(|v| v.to_string()).unwrap_or_else(|| "-".to_string())
            );
            ("monitor-probe.csv", echo, report.to_csv(&ctx.profile.fingerprint()), verdict)
        }
    };
    ctx.emit(name, &format!("# kolmo {echo}\n{content}"))?;
    println!("{verdict}");
    Ok(())
}

fn monitor_view_params(ctx: &Ctx, args: &MonitorViewArgs) -> Result<(String, usize, u32), CliError> {
    let src = ctx.resolve(args.src.clone(), "src", "zeros".to_string())?;
    let n = ctx.resolve(args.n, "n", 8)?;
    let stage = ctx.resolve(args.stage, "stage", 12)?;
    Ok((src, n, stage))
}

fn monitor_verdict(extremum: Option<i64>, undiscovered: u64) -> String {
    format!(
        "extremum {} undiscovered {undiscovered}",
        extremum.map(|v| v.to_string()).unwrap_or_else(|| "-".to_string())
    )
}

/// Shared front half of the construction commands: parse the named
/// instances and build the verified insertion schedule.
struct Construction {
    h: NondecreasingFn,
    phi: OracleMachine,
    alpha: SequenceSource,
    schedule: kolmo_core::nogap::InsertionSchedule,
    echo: String,
}

fn build_construction(ctx: &Ctx, args: NogapBuildArgs) -> Result<Construction, CliError> {
    let h_spec = ctx.resolve(args.h, "h", "identity".to_string())?;
    let phi_spec = ctx.resolve(args.phi, "phi", "linear".to_string())?;
    let count = ctx.resolve(args.count, "count", 6)?;
    let alpha_spec = ctx.resolve(args.alpha, "alpha", "zeros".to_string())?;
    let h = parse_h(&h_spec)?;
    let phi = parse_phi(&phi_spec, h.clone())?;
    let alpha = parse_src(&alpha_spec, &ctx.profile, None)?;
    let schedule = build_schedule(&h, &phi, &alpha, count)?;
    let echo = format!("h={h_spec} phi={phi_spec} count={count} alpha={alpha_spec}");
    Ok(Construction { h, phi, alpha, schedule, echo })
}

fn cmd_nogap_build(ctx: &Ctx, args: NogapBuildArgs) -> Result<(), CliError> {
    let con = build_construction(ctx, args)?;
    let horizon = con.schedule.positions().last().map_or(1, |&p| p + 1);
    let defect = con.schedule.insertion_defect(&con.h, horizon);
    let content = format!("# kolmo cmd=nogap-build {}\n{}", con.echo, con.schedule.to_text());
    ctx.emit("nogap-schedule.txt", &content)?;
    println!("positions {} defect {defect}", con.schedule.positions().len());
    Ok(())
}

fn cmd_nogap_select(ctx: &Ctx, args: NogapSelectArgs) -> Result<(), CliError> {
    let con = build_construction(ctx, args.build)?;
    let default_horizon = con.schedule.positions().last().map_or(1, |&p| p + 1);
    let n_max = ctx.resolve(args.nmax, "nmax", default_horizon)? as usize;
    let beta = insert_zeros(&con.alpha, &con.schedule, n_max)?;
    let xi = SequenceSource::literal(beta);
    let trace = selection_rule(&xi, &con.phi, n_max)?;
    let matched = trace.selected == con.schedule.positions();
    let all_zero = trace.selected_bits.iter().all(|b| b == 0);
    let echo = format!("cmd=nogap-select {} nmax={n_max}", con.echo);
    ctx.emit("nogap-trace.txt", &format!("# kolmo {echo}\n{}", trace.to_text()))?;
    let bias = bias_report(&trace);
    ctx.emit("nogap-bias.csv", &bias.to_csv(&echo))?;
    println!("selected = inserted: {matched}");
    println!("selected bits all zero: {all_zero}");
    Ok(())
}

fn cmd_nogap_report(
    ctx: &Ctx,
    kind: Option<String>,
    build: NogapBuildArgs,
    stage: Option<u32>,
    nmax: Option<u64>,
) -> Result<(), CliError> {
    let kind = ctx.resolve(kind, "kind", "consistency".to_string())?;
    let stage = ctx.resolve(stage, "stage", 12)?;
    match kind.as_str() {
        "consistency" => {
            let con = build_construction(ctx, build)?;
            let horizon = con.schedule.positions().last().map_or(1, |&p| p + 1);
            let n_max = ctx.resolve(nmax, "nmax", horizon)?;
            let beta = insert_zeros(&con.alpha, &con.schedule, n_max as usize)?;
            let st = ctx.state_at(stage)?;
            let report = complexity_consistency(&beta, &st, &con.h, n_max);
            let echo = format!("cmd=nogap-consistency {} stage={stage} nmax={n_max}", con.echo);
            let content = report.to_csv(&ctx.profile.fingerprint(), &echo);
            ctx.emit("nogap-consistency.csv", &content)?;
            println!(
                "max_c {}",
                report.max_c().map(|v| v.to_string()).unwrap_or_else(|| "-".to_string())
            );
        }
        "settling" => {
            let n_max = ctx.resolve(nmax, "nmax", 8)?;
            let st = ctx.state_at(stage)?;
            let table = settling_schedule(&st, n_max as u32);
            let echo = format!("cmd=nogap-settling stage={stage} nmax={n_max}");
            let mut content = format!(
                "# kolmo-nogap-settling profile={} watermark={} stable={} {echo}\n",
                ctx.profile.fingerprint(),
                table.stage,
                table.stable
            );
            content.push_str("n settled_at\n");
            for (i, entry) in table.settled.iter().enumerate() {
                let cell = entry
                    .as_ref()
                    .map(|e| e.settled_at.to_string())
                    .unwrap_or_else(|| "-".to_string());
                let _ = writeln!(content, "{} {cell}", i + 1);
            }
            let positions: Vec<String> =
                table.positions.iter().map(u64::to_string).collect();
            let _ = writeln!(content, "positions = {}", positions.join(" "));
            ctx.emit("nogap-settling.txt", &content)?;
            println!("positions {}", positions.join(" "));
        }
        _ => {
            return Err(CliError::msg(format!(
                "unknown report kind {kind:?} (try consistency or settling)"
            )))
        }
    }
    Ok(())
}

fn cmd_ktriv_run(
    ctx: &Ctx,
    stage: Option<u32>,
    nmax: Option<u64>,
    c: Option<u32>,
    d: Option<u32>,
    alpha: Option<String>,
) -> Result<(), CliError> {
    let stage = ctx.resolve(stage, "stage", 22)?;
    let nmax = ctx.resolve(nmax, "nmax", 8)?;
    let c = ctx.resolve(c, "c", 16)?;
    let d = ctx.resolve_opt(d, "d")?.unwrap_or_else(|| suggested_cap(&ctx.profile));
    let alpha_spec = ctx.resolve(alpha, "alpha", "zeros".to_string())?;
    let st = ctx.state_at(stage)?;
    let alpha = parse_src(&alpha_spec, &ctx.profile, Some(&st))?;
    let events = live_stream(&st, &alpha, nmax, c)?;
    let (ledger, states) = run_strategy(&events, d)?;
    let weight = ledger.weight();
    let within = weight <= Dyadic::from_int(2 * d as u64);
    let echo = format!("cmd=ktriv-run stage={stage} nmax={nmax} c={c} d={d} alpha={alpha_spec}");
    let provenance =
        format!("profile={} watermark={} {echo}", ctx.profile.fingerprint(), st.watermark());
    ctx.emit("ktriv-ledger.txt", &ledger.to_text(&provenance))?;
    ctx.emit("ktriv-summary.csv", &summary_csv(&ledger, &states, &provenance))?;
    println!("requests {} weight {} within_2d {within}", ledger.len(), weight.to_exact_string());
    Ok(())
}

fn cmd_ktriv_compile(
    ctx: &Ctx,
    ledger: Option<PathBuf>,
    headroom: Option<u32>,
) -> Result<(), CliError> {
    let path = ctx
        .resolve_opt(ledger, "ledger")?
        .unwrap_or_else(|| ctx.out_dir.join("ktriv-ledger.txt"));
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::msg(format!("cannot read {}: {e}", path.display())))?;
    let ledger = RequestLedger::parse(&text)?;
    let headroom = match ctx.resolve_opt(headroom, "headroom")? {
        Some(h) => h,
        None => {
            let weight = ledger.weight();
            (0..=64).find(|&h| weight <= Dyadic::pow2(h as i64)).unwrap_or(64)
        }
    };
    let tree = compile_ledger(&ledger, headroom)?;
    let echo = format!("cmd=ktriv-compile headroom={headroom} requests={}", ledger.len());
    let mut content = format!("# kolmo-ktriv-compile profile={} {echo}\n", ctx.profile.fingerprint());
    let _ = writeln!(content, "tree = {}", tree.to_text());
    let _ = writeln!(content, "leaves = {}", tree.leaf_count());
    ctx.emit("ktriv-tree.txt", &content)?;
    println!("leaves {} headroom {headroom}", tree.leaf_count());
    Ok(())
}
