use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use epr_core::actualization::{self, ActDomain, ActPointer, PointerMode};
use epr_core::bell::{self, CountTable};
use epr_core::branching::{self, BranchDistribution};
use epr_core::partition::{self, GridSpec, Partition};
use epr_core::probability::{self, Model};
use epr_core::render;
use epr_core::trials::{self, LogFormat, RandomnessMode, TrialLog};
use epr_core::{AngleSetting, Error as CoreError, Klass};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[derive(Debug, Parser)]
#[command(
    name = "epr",
    version,
    about = "Branch-counting models of the two-photon polarization experiment"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// p(E) curves of several models with optional Bell-term bars (SVG + CSV).
    Curves(CurvesArgs),
    /// Bell terms and verdict for a model or a count table.
    Bell(BellArgs),
    /// Build a cross-section partition (JSON or SVG).
    Partition(PartitionArgs),
    /// World counts and exact Pr of a grid layout.
    Grid(GridArgs),
    /// World counts over sequences of runs.
    Branch(BranchArgs),
    /// Pointer statistics or the pre-committed pointer experiment.
    ActDemo(ActDemoArgs),
    /// Seeded end-to-end trial run.
    Trials(TrialsArgs),
    /// Bell analysis of a trial log (JSON or CSV).
    Analyze(AnalyzeArgs),
    /// Run the exhibit HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Arcs,
    Diamonds,
    Grid,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DocFormat {
    Json,
    Svg,
    Csv,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[arg(long, value_delimiter = ',', default_value = "classical,quantum,transition")]
    pub models: Vec<Model>,
    /// Number of evenly spaced angles on [0, pi/2].
    #[arg(long, default_value_t = 91)]
    pub points: usize,
    /// Add the three Bell terms of every model as bars.
    #[arg(long)]
    pub bars: bool,
    /// SVG path; the CSV twin goes next to it. Without it the CSV is printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BellArgs {
    #[arg(long, default_value = "quantum")]
    pub model: Model,
    /// JSON count table `{"1": {"00": n, ...}, ...}` instead of a model.
    #[arg(long)]
    pub counts: Option<PathBuf>,
    #[arg(long, default_value_t = bell::DEFAULT_SIGMAS)]
    pub sigmas: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AngleArgs {
    /// Relative angle index, delta = d pi/8.
    #[arg(long, conflicts_with = "delta")]
    pub d: Option<u32>,
    /// Relative angle in radians.
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
}

impl AngleArgs {
    fn delta(&self) -> f64 {
        self.delta
            .unwrap_or_else(|| AngleSetting::delta_of(self.d.unwrap_or(1)))
    }
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[arg(long, value_enum, default_value = "diamonds")]
    pub kind: KindArg,
    #[command(flatten)]
    pub angle: AngleArgs,
    /// Normalized wire spacing (diamonds).
    #[arg(long, default_value_t = 0.05)]
    pub spacing: f64,
    /// Grid directions per quadrant.
    #[arg(long = "big-m", default_value_t = 40)]
    pub big_m: u32,
    /// Grid steps; derived from the angle when absent.
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: DocFormat,
    /// Pointer overlay for SVG output: an angle, or `x,y` on the disk.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub pointer: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long = "big-m", default_value_t = 40)]
    pub big_m: u32,
    #[arg(long)]
    pub m: Option<u32>,
    #[command(flatten)]
    pub angle: AngleArgs,
    /// Also render the layout.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BranchArgs {
    /// Number of runs.
    #[arg(long)]
    pub i: u32,
    #[arg(long, default_value_t = 1)]
    pub ne: u32,
    #[arg(long, default_value_t = 2)]
    pub nu: u32,
    /// Values of r in the typicality window; defaults to round(i/3) values
    /// around the most common r.
    #[arg(long, value_delimiter = ',')]
    pub window: Option<Vec<u32>>,
    /// Enumerate every world sequence instead of using the closed form.
    #[arg(long, conflicts_with = "sample")]
    pub enumerate: bool,
    /// Estimate from this many random world sequences.
    #[arg(long)]
    pub sample: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    pub format: DocFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ActDemoArgs {
    #[arg(long, value_enum, default_value = "diamonds")]
    pub kind: KindArg,
    #[command(flatten)]
    pub angle: AngleArgs,
    #[arg(long, default_value_t = 0.02)]
    pub spacing: f64,
    #[arg(long = "big-m", default_value_t = 40)]
    pub big_m: u32,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Redraw pebbles that land on no world.
    #[arg(long)]
    pub constrained: bool,
    /// Run pre-committed pebbles through the four coin settings instead.
    #[arg(long)]
    pub failure: bool,
    #[arg(long, default_value_t = 1000)]
    pub pointers: u32,
    /// Render the partition with one sampled pointer.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrialsArgs {
    #[arg(long, default_value = "quantum")]
    pub model: Model,
    /// `internal` or `external_act`.
    #[arg(long, default_value = "internal")]
    pub mode: RandomnessMode,
    #[arg(long, default_value_t = trials::DEFAULT_PAIRS)]
    pub pairs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Defaults to the extension of `--out`, else CSV.
    #[arg(long, value_enum)]
    pub format: Option<DocFormat>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Trial log written by `trials`.
    pub log: PathBuf,
    #[arg(long, default_value_t = bell::DEFAULT_SIGMAS)]
    pub sigmas: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory for session snapshot files.
    #[arg(long)]
    pub snapshot_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Core(CoreError),
    Io(String),
    /// Flag combinations clap cannot rule out.
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> String {
        let (kind, message) = match self {
            CliError::Core(e) => ("model", e.to_string()),
            CliError::Io(m) => ("io", m.clone()),
            CliError::Usage(m) => ("usage", m.clone()),
        };
        json!({ "schema": 1, "error": { "kind": kind, "message": message } }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(m) | CliError::Usage(m) => f.write_str(m),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Write to `out`, or to stdout when absent.
fn emit(out: Option<&Path>, content: &str) -> CliResult {
    match out {
        Some(path) => fs::write(path, content).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
            Ok(())
        }
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json value") + "\n"
}

/// Path next to `base` with its extension replaced by `ext`.
fn sibling(base: &Path, ext: &str) -> PathBuf {
    base.with_extension(ext)
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Curves(a) => curves(a),
        Command::Bell(a) => bell_cmd(a),
        Command::Partition(a) => partition_cmd(a),
        Command::Grid(a) => grid(a),
        Command::Branch(a) => branch(a),
        Command::ActDemo(a) => act_demo(a),
        Command::Trials(a) => trials_cmd(a),
        Command::Analyze(a) => analyze(a),
        Command::Serve(a) => serve(a),
    }
}

fn curves(a: CurvesArgs) -> CliResult {
    if a.points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    let deltas = probability::delta_grid(a.points);
    let mut rows = Vec::new();
    for m in &a.models {
        rows.extend(probability::curve_table(*m, &deltas)?);
    }
    let reports: Vec<_> = if a.bars {
        a.models.iter().map(bell::bell_terms).collect()
    } else {
        Vec::new()
    };
    let plot = render::render_curves(&rows, &reports);
    match &a.out {
        Some(svg) => {
            emit(Some(svg), &plot.svg)?;
            emit(Some(&sibling(svg, "csv")), &plot.csv)?;
            if a.bars {
                emit(Some(&sibling(svg, "bars.csv")), &plot.bars_csv)?;
            }
            Ok(())
        }
        None => emit(None, &plot.csv),
    }
}

fn bell_cmd(a: BellArgs) -> CliResult {
    let report = match &a.counts {
        Some(path) => {
            let counts: CountTable = serde_json::from_str(&read(path)?).map_err(CoreError::from)?;
            bell::bell_counts(&counts, a.sigmas)?
        }
        None => bell::bell_terms(&a.model),
    };
    emit(a.out.as_deref(), &(report.to_json() + "\n"))
}

fn build_partition(kind: KindArg, delta: f64, spacing: f64, big_m: u32, m: Option<u32>) -> CliResult<Partition> {
    Ok(match kind {
        KindArg::Arcs => partition::cross_section_arcs(delta)?,
        KindArg::Diamonds => partition::diamond_partition(delta, spacing)?,
        KindArg::Grid => {
            let spec = match m {
                Some(m) => GridSpec::new(big_m, m)?,
                None => GridSpec::for_delta(big_m, delta)?,
            };
            partition::grid_partition(spec)?
        }
    })
}

fn parse_pointer(v: &[f64]) -> CliResult<ActPointer> {
    match v {
        [t] => Ok(ActPointer::angle(*t)),
        [x, y] => Ok(ActPointer::point(*x, *y)?),
        _ => Err(CliError::Usage("--pointer takes an angle or x,y".into())),
    }
}

fn partition_cmd(a: PartitionArgs) -> CliResult {
    let p = build_partition(a.kind, a.angle.delta(), a.spacing, a.big_m, a.m)?;
    let pointer = a.pointer.as_deref().map(parse_pointer).transpose()?;
    match a.format {
        DocFormat::Json => emit(a.out.as_deref(), &(p.to_json() + "\n")),
        DocFormat::Svg => emit(a.out.as_deref(), &render::render_cross_section(&p, pointer.as_ref())),
        DocFormat::Csv => Err(CliError::Usage("partition supports json or svg".into())),
    }
}

fn grid(a: GridArgs) -> CliResult {
    let spec = match a.m {
        Some(m) => GridSpec::new(a.big_m, m)?,
        None => GridSpec::for_delta(a.big_m, a.angle.delta())?,
    };
    let (ne, nu) = spec.counts();
    let exact = probability::grid_equal_exact(spec);
    let table = probability::prob_grid(spec);
    let doc = json!({
        "schema": 1,
        "grid": spec,
        "delta": spec.delta(),
        "counts": { "equal": ne, "unequal": nu },
        "pr_equal": table.p_equal,
        "pr_unequal": table.p_unequal,
        "pr_equal_exact": format!("{}/{}", exact.numer(), exact.denom()),
        "quantum_equal": probability::prob_quantum(spec.delta()).p_equal,
    });
    if let Some(svg) = &a.svg {
        let p = partition::grid_partition(spec)?;
        emit(Some(svg), &render::render_cross_section(&p, None))?;
    }
    emit(a.out.as_deref(), &pretty(&doc))
}

fn branch(a: BranchArgs) -> CliResult {
    let dist: BranchDistribution = if let Some(n) = a.sample {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        branching::sample_sequences(a.i, a.ne, a.nu, n, &mut rng)
    } else if a.enumerate {
        branching::simulate_sequences(a.i, a.ne, a.nu)?
    } else {
        BranchDistribution::from_formula(a.i, a.ne, a.nu)
    };
    match a.format {
        DocFormat::Csv => emit(a.out.as_deref(), &dist.to_csv()),
        DocFormat::Json => {
            let window: BTreeSet<u32> = match &a.window {
                Some(w) => w.iter().copied().collect(),
                None => branching::third_window(a.i, a.ne, a.nu),
            };
            let f = branching::typicality_fraction(a.i, a.ne, a.nu, &window)?;
            let doc = json!({
                "schema": 1,
                "distribution": dist,
                "most_common_r": branching::most_common_r(a.i, a.ne, a.nu),
                "window": window,
                "window_fraction": f.value,
                "window_fraction_exact": f.exact.to_string(),
            });
            emit(a.out.as_deref(), &pretty(&doc))
        }
        DocFormat::Svg => Err(CliError::Usage("branch supports json or csv".into())),
    }
}

fn act_demo(a: ActDemoArgs) -> CliResult {
    if a.failure {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        let settings =
            [(false, false), (true, true), (false, true), (true, false)].map(|(x, y)| AngleSetting::from_coins(x, y));
        let mut reports = Vec::new();
        for _ in 0..a.pointers {
            // the pebble exists before any setting is chosen
            let pebble = actualization::sample_act(PointerMode::Point, &mut rng);
            reports.push(match a.kind {
                KindArg::Grid => actualization::act_failure_experiment(pebble, &settings, a.big_m)?,
                kind => actualization::act_failure_experiment_with(pebble, &settings, |s| {
                    build_partition(kind, s.delta, a.spacing, a.big_m, None).map_err(|e| match e {
                        CliError::Core(c) => c,
                        other => CoreError::Malformed(other.to_string()),
                    })
                })?,
            });
        }
        let doc = json!({
            "schema": 1,
            "kind": format!("{:?}", a.kind).to_lowercase(),
            "pointers": a.pointers,
            "settings": settings.len(),
            "miss_fraction": actualization::miss_fraction(&reports),
            "first": reports.first(),
        });
        return emit(a.out.as_deref(), &pretty(&doc));
    }
    let p = build_partition(a.kind, a.angle.delta(), a.spacing, a.big_m, None)?;
    let domain = if a.constrained {
        ActDomain::Regions
    } else {
        ActDomain::Disk
    };
    let st = actualization::act_statistics(&p, a.trials, a.seed, domain)?;
    let c_equal = 2.0 * p.delta.abs() / std::f64::consts::PI;
    let wc = p.world_counts();
    let pr_equal = probability::prob_internal(wc.equal() as f64, wc.unequal() as f64).ok();
    let doc = json!({
        "schema": 1,
        "statistics": st,
        "freq_equal": st.freq(Klass::Equal),
        "classical_equal": c_equal,
        "world_count_equal": pr_equal,
        "sigma_from_classical": (st.freq(Klass::Equal) - c_equal) / st.std_error(c_equal).max(f64::MIN_POSITIVE),
        "sigma_from_world_count": pr_equal.map(|p| (st.freq(Klass::Equal) - p) / st.std_error(p).max(f64::MIN_POSITIVE)),
    });
    if let Some(svg) = &a.svg {
        let mode = if matches!(a.kind, KindArg::Arcs) {
            PointerMode::Angle
        } else {
            PointerMode::Point
        };
        let pointer = actualization::sample_act(mode, &mut ChaCha8Rng::seed_from_u64(a.seed));
        emit(Some(svg), &render::render_cross_section(&p, Some(&pointer)))?;
    }
    emit(a.out.as_deref(), &pretty(&doc))
}

fn trials_cmd(a: TrialsArgs) -> CliResult {
    let log = trials::run_trials(a.model, a.mode, a.pairs, a.seed)?;
    let format = match a.format {
        Some(DocFormat::Json) => LogFormat::Json,
        Some(DocFormat::Csv) => LogFormat::Csv,
        Some(DocFormat::Svg) => return Err(CliError::Usage("trials supports json or csv".into())),
        None => match a.out.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some(ext) => ext.parse()?,
            None => LogFormat::Csv,
        },
    };
    emit(a.out.as_deref(), &log.export(format))
}

fn analyze(a: AnalyzeArgs) -> CliResult {
    let text = read(&a.log)?;
    let analysis = if text.trim_start().starts_with('{') {
        let log = TrialLog::from_json(&text)?;
        let mut out = trials::analyze_counts(&log.counts, &log.misses, a.sigmas)?;
        out.report.source = format!("{} {} seed={}", log.model, log.mode, log.seed);
        out
    } else {
        let records = trials::records_from_csv(&text)?;
        let (counts, misses) = trials::fold_records(&records);
        trials::analyze_counts(&counts, &misses, a.sigmas)?
    };
    emit(a.out.as_deref(), &(analysis.to_json() + "\n"))
}

fn serve(a: ServeArgs) -> CliResult {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let addr = format!("{}:{}", a.host, a.port);
        let listener = tokio::net::TcpListener::bind(&addr).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        let app = crate::service::router(crate::service::AppState::new(a.snapshot_dir));
        axum::serve(listener, app).await?;
        Ok(())
    })
}
