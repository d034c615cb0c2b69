use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fusiontrack::config::{self, format_config};
use fusiontrack::experiment::{self, GtSource, SequenceSource, SweepPlan};
use fusiontrack::fusion::FusionMethod;
use fusiontrack::metrics::DEFAULT_IOU_THRESHOLD;
use fusiontrack::synthetic;
use fusiontrack::tracker::{SecondStageMetric, TrackerConfig};
use fusiontrack::TrackError;

/// Multi-object tracking with fused strong and weak association cues.
///
/// Settings are layered: built-in defaults, then --config FILE, then flags.
/// The config file holds `key = value` lines using the flag names without
/// the leading dashes.
#[derive(Parser, Debug)]
#[command(name = "fusiontrack", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Track one sequence or every sequence of a dataset directory.
    Track(TrackArgs),
    /// Score result files against ground truth (MOTA, IDF1).
    Eval(EvalArgs),
    /// Run fusion method × cue combinations and write comparison tables.
    Sweep(SweepArgs),
    /// Write a deterministic synthetic dataset.
    Synth(SynthArgs),
    /// Print the effective configuration after all layers.
    Config(ConfigArgs),
}

#[derive(Args, Debug, Default)]
struct Tuning {
    /// Flat `key = value` configuration file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "S")]
    tau_high: Option<String>,
    #[arg(long, value_name = "S")]
    tau_low: Option<String>,
    #[arg(long, value_name = "S")]
    init_score: Option<String>,
    #[arg(long, value_name = "FRAMES")]
    max_lost: Option<String>,
    #[arg(long, value_name = "SIM")]
    reject_sim_stage1: Option<String>,
    #[arg(long, value_name = "SIM")]
    reject_sim_stage2: Option<String>,
    #[arg(long, value_name = "BOOL")]
    stage2_active_only: Option<String>,
    #[arg(long, value_name = "D")]
    theta_iou: Option<String>,
    #[arg(long, value_name = "D")]
    theta_emb: Option<String>,
    #[arg(long, value_name = "W")]
    lambda1: Option<String>,
    #[arg(long, value_name = "W")]
    lambda2: Option<String>,
    #[arg(long, value_name = "W")]
    lambda3: Option<String>,
    #[arg(long, value_name = "W")]
    lambda4: Option<String>,
    #[arg(long, value_name = "W")]
    lambda: Option<String>,
    #[arg(long, value_name = "W")]
    lambda_h: Option<String>,
    #[arg(long, value_name = "W")]
    lambda_c: Option<String>,
    /// Position noise factor.
    #[arg(long, value_name = "F")]
    sigma_p: Option<String>,
    /// Velocity noise factor.
    #[arg(long, value_name = "F")]
    sigma_v: Option<String>,
    /// Measurement noise factor.
    #[arg(long, value_name = "F")]
    sigma_m: Option<String>,
    #[arg(long, value_name = "A")]
    ema_alpha: Option<String>,
    #[arg(long, value_name = "Q")]
    gate_quantile: Option<String>,
    /// Scale measurement noise by detection confidence.
    #[arg(long, value_name = "BOOL")]
    nsa: Option<String>,
    /// Apply camera warps to track states.
    #[arg(long, value_name = "BOOL")]
    cmc: Option<String>,
    /// Rates zeroed before prediction: comma list of width,height,confidence, or all/none.
    #[arg(long, value_name = "LIST")]
    preserve: Option<String>,
    /// Tracks the preserve rule applies to: all or lost.
    #[arg(long, value_name = "SCOPE")]
    preserve_scope: Option<String>,
    /// Any configuration key, repeatable: --set lambda2=0.2
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Tuning {
    fn flag_layer(&self) -> Result<Vec<(String, String)>, TrackError> {
        let named = [
            ("tau-high", &self.tau_high),
            ("tau-low", &self.tau_low),
            ("init-score", &self.init_score),
            ("max-lost", &self.max_lost),
            ("reject-sim-stage1", &self.reject_sim_stage1),
            ("reject-sim-stage2", &self.reject_sim_stage2),
            ("stage2-active-only", &self.stage2_active_only),
            ("theta-iou", &self.theta_iou),
            ("theta-emb", &self.theta_emb),
            ("lambda1", &self.lambda1),
            ("lambda2", &self.lambda2),
            ("lambda3", &self.lambda3),
            ("lambda4", &self.lambda4),
            ("lambda", &self.lambda),
            ("lambda-h", &self.lambda_h),
            ("lambda-c", &self.lambda_c),
            ("sigma-p", &self.sigma_p),
            ("sigma-v", &self.sigma_v),
            ("sigma-m", &self.sigma_m),
            ("ema-alpha", &self.ema_alpha),
            ("gate-quantile", &self.gate_quantile),
            ("nsa", &self.nsa),
            ("cmc", &self.cmc),
            ("preserve", &self.preserve),
            ("preserve-scope", &self.preserve_scope),
        ];
        let mut out = Vec::new();
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| {
                TrackError::Config(format!("--set expects KEY=VALUE, got '{kv}'"))
            })?;
            out.push((config::normalize_key(k), v.trim().to_string()));
        }
        out.extend(
            named
                .into_iter()
                .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))),
        );
        Ok(out)
    }

    /// Defaults < config file < flags (`extra` flags last).
    fn resolve(&self, extra: &[(String, String)]) -> Result<TrackerConfig, TrackError> {
        let file = match &self.config {
            Some(p) => config::load_config_file(p)?,
            None => Vec::new(),
        };
        let mut flags = self.flag_layer()?;
        flags.extend_from_slice(extra);
        config::resolve([file.as_slice(), flags.as_slice()])
    }
}

#[derive(Args, Debug)]
struct Selection {
    /// Fusion method: minimum, weighted-sum, kf-gating or hadamard.
    #[arg(long, value_name = "METHOD")]
    fusion: Option<String>,
    /// Comma list of motion, appearance, hiou, confidence.
    #[arg(long, value_name = "LIST")]
    cues: Option<String>,
    /// Metric of the second association: iou or mahalanobis.
    #[arg(long, value_name = "METRIC")]
    second_stage: Option<String>,
}

impl Selection {
    fn layer(&self) -> Vec<(String, String)> {
        [
            ("fusion", &self.fusion),
            ("cues", &self.cues),
            ("second-stage", &self.second_stage),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
        .collect()
    }
}

#[derive(Args, Debug)]
struct TrackArgs {
    /// Dataset root (one directory per sequence) or a single sequence directory.
    #[arg(long, value_name = "DIR", conflicts_with_all = ["dets", "embeddings", "warps"])]
    dataset: Option<PathBuf>,
    /// Detection file of a single sequence.
    #[arg(long, value_name = "FILE", required_unless_present = "dataset")]
    dets: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    embeddings: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    warps: Option<PathBuf>,
    /// Sequence name for --dets; defaults to one derived from the path.
    #[arg(long)]
    name: Option<String>,
    /// Output directory; results go to <out>/<sequence>.txt.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[command(flatten)]
    select: Selection,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// A result file or a directory of <sequence>.txt files.
    #[arg(long, value_name = "PATH")]
    results: PathBuf,
    /// A ground-truth file or a dataset root.
    #[arg(long, value_name = "PATH")]
    gt: PathBuf,
    /// Also write the comma-separated report here.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    iou_threshold: f64,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Dataset root with detections, embeddings and ground truth per sequence.
    #[arg(long, value_name = "DIR")]
    dataset: PathBuf,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Comma list of fusion methods, or `all`.
    #[arg(long, default_value = "all", value_name = "LIST")]
    methods: String,
    /// Comma list of second-stage metrics. Including mahalanobis adds the
    /// KF-gating IoU vs Mahalanobis table.
    #[arg(long, default_value = "iou", value_name = "LIST")]
    second_stage: String,
    /// Re-run combinations even when cached results match.
    #[arg(long)]
    force: bool,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output dataset root.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// lanes, crossing or crowd.
    #[arg(long, default_value = "lanes")]
    scenario: String,
    #[arg(long, default_value_t = 1)]
    sequences: usize,
    #[arg(long, default_value_t = 200)]
    frames: usize,
    #[arg(long, default_value_t = 10)]
    objects: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    #[command(flatten)]
    select: Selection,
    #[command(flatten)]
    tuning: Tuning,
}

fn list<T, F>(text: &str, parse: F) -> Result<Vec<T>, TrackError>
where
    F: Fn(&str) -> Result<T, TrackError>,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse)
        .collect()
}

fn cmd_track(args: &TrackArgs) -> Result<bool, TrackError> {
    let cfg = args.tuning.resolve(&args.select.layer())?;
    let sources = match (&args.dataset, &args.dets) {
        (Some(root), _) => experiment::discover(root)?,
        (None, Some(dets)) => vec![SequenceSource::from_files(
            dets.clone(),
            args.embeddings.clone(),
            args.warps.clone(),
            None,
            args.name.clone(),
        )],
        (None, None) => return Err(TrackError::Config("give --dataset or --dets".into())),
    };
    let manifest = experiment::RunManifest {
        sequences: sources,
        overrides: args.tuning.flag_layer()?,
        output_dir: args.out.clone(),
    };
    manifest.validate()?;
    let done = experiment::track_all(
        &manifest.sequences,
        &cfg,
        &args.out,
        experiment::worker_count(),
    )?;
    let mut ok = true;
    for (name, res) in done {
        match res {
            Ok(p) => println!("{}", p.display()),
            Err(e @ TrackError::MissingInput { .. }) => {
                eprintln!("error: {e}");
                ok = false;
            }
            Err(e) => {
                eprintln!("error: {name}: {e}");
                ok = false;
            }
        }
    }
    Ok(ok)
}

fn cmd_eval(args: &EvalArgs) -> Result<bool, TrackError> {
    let results = if args.results.is_dir() {
        experiment::result_files(&args.results)?
    } else {
        vec![(
            experiment::sequence_name(&args.results),
            args.results.clone(),
        )]
    };
    let gt: BTreeMap<String, GtSource> = if args.gt.is_dir() {
        experiment::ground_truth_index(&experiment::discover(&args.gt)?)?
    } else if results.len() == 1 {
        [(results[0].0.clone(), GtSource::file(args.gt.clone()))].into()
    } else {
        return Err(TrackError::Config(
            "a single ground-truth file needs a single result file; pass a dataset root instead"
                .into(),
        ));
    };
    let outcomes = experiment::evaluate_results(&results, &gt, args.iou_threshold)?;
    for w in outcomes.iter().filter_map(|o| o.warning.as_ref()) {
        log::warn!("{w}");
    }
    let (_, text) = experiment::eval_report(&outcomes);
    print!("{text}");
    if let Some(out) = &args.out {
        write_file(out, &text)?;
    }
    Ok(true)
}

fn write_file(path: &Path, text: &str) -> Result<(), TrackError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| TrackError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| TrackError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn cmd_sweep(args: &SweepArgs) -> Result<bool, TrackError> {
    let base = args.tuning.resolve(&[])?;
    let methods = if args.methods.trim() == "all" {
        FusionMethod::ALL.to_vec()
    } else {
        list(&args.methods, str::parse::<FusionMethod>)?
    };
    let plan = SweepPlan {
        methods,
        second_stages: list(&args.second_stage, str::parse::<SecondStageMetric>)?,
    };
    let sources = experiment::discover(&args.dataset)?;
    let report = experiment::run_sweep(
        &sources,
        &base,
        &plan,
        &args.out,
        experiment::worker_count(),
        args.force,
    )?;
    for text in [&report.table_text, &report.second_stage_text]
        .into_iter()
        .flatten()
    {
        println!("{text}");
    }
    let failures = report.failures();
    for f in &failures {
        if let Err(e) = &f.result {
            eprintln!("error: {}: {e}", f.combo.dir_name());
        }
    }
    Ok(failures.is_empty())
}

fn cmd_synth(args: &SynthArgs) -> Result<bool, TrackError> {
    for i in 0..args.sequences {
        let name = format!("{}-{:02}", args.scenario, i + 1);
        let s = synthetic::preset(
            &args.scenario,
            &name,
            args.seed.wrapping_add(i as u64),
            args.frames,
            args.objects,
        )?;
        println!("{}", s.write(&args.out)?.display());
    }
    Ok(true)
}

fn cmd_config(args: &ConfigArgs) -> Result<bool, TrackError> {
    let cfg = args.tuning.resolve(&args.select.layer())?;
    print!("{}", format_config(&cfg));
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Track(a) => cmd_track(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Config(a) => cmd_config(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
