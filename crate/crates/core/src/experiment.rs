//! Batch runs over sequences: tracking to result files, evaluation against
//! ground truth, and method × cue sweeps rendered as comparison tables.
//!
//! A dataset root holds one directory per sequence:
//!
//! ```text
//! <root>/<seq>/det/det.txt   (or <seq>/det.txt)   detections, required
//! <root>/<seq>/emb.txt                              embeddings
//! <root>/<seq>/warp.txt                             camera warps
//! <root>/<seq>/gt/gt.txt     (or <seq>/gt.txt)     ground truth
//! <root>/<seq>/seqinfo.ini                          frame count
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::format_config;
use crate::error::{Result, TrackError};
use crate::fusion::{Cues, FusionMethod};
use crate::metrics::{self, SequenceScore, DEFAULT_IOU_THRESHOLD};
use crate::mot_io;
use crate::tracker::{run_sequence, SecondStageMetric, SequenceInput, TrackerConfig};

/// Environment variable holding the worker count for parallel runs.
pub const WORKERS_ENV: &str = "FUSIONTRACK_WORKERS";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceSource {
    pub name: String,
    pub detections: PathBuf,
    pub embeddings: Option<PathBuf>,
    pub warps: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub seqinfo: Option<PathBuf>,
}

fn first_existing(dir: &Path, candidates: &[&str]) -> Option<PathBuf> {
    candidates.iter().map(|c| dir.join(c)).find(|p| p.is_file())
}

impl SequenceSource {
    /// A sequence directory, or `None` when it holds no detection file.
    pub fn from_dir(dir: &Path) -> Option<Self> {
        let detections = first_existing(dir, &["det/det.txt", "det.txt"])?;
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "sequence".into());
        Some(SequenceSource {
            name,
            detections,
            embeddings: first_existing(dir, &["emb.txt", "det/emb.txt"]),
            warps: first_existing(dir, &["warp.txt", "det/warp.txt"]),
            ground_truth: first_existing(dir, &["gt/gt.txt", "gt.txt"]),
            seqinfo: first_existing(dir, &["seqinfo.ini"]),
        })
    }

    /// Explicit files. Without a name, one is derived from the detection path.
    pub fn from_files(
        detections: PathBuf,
        embeddings: Option<PathBuf>,
        warps: Option<PathBuf>,
        ground_truth: Option<PathBuf>,
        name: Option<String>,
    ) -> Self {
        let name = name.unwrap_or_else(|| sequence_name(&detections));
        SequenceSource {
            name,
            detections,
            embeddings,
            warps,
            ground_truth,
            seqinfo: None,
        }
    }

    /// Every path named here must exist.
    pub fn validate(&self) -> Result<()> {
        let required = std::iter::once(("detections", Some(&self.detections))).chain([
            ("embeddings", self.embeddings.as_ref()),
            ("warps", self.warps.as_ref()),
            ("ground truth", self.ground_truth.as_ref()),
            ("seqinfo", self.seqinfo.as_ref()),
        ]);
        for (what, path) in required {
            if let Some(p) = path {
                if !p.is_file() {
                    return Err(TrackError::MissingInput {
                        sequence: self.name.clone(),
                        msg: format!("{what} file {} does not exist", p.display()),
                    });
                }
            }
        }
        Ok(())
    }
}

/// `MOT17-02/det/det.txt` → `MOT17-02`; `seq3.txt` → `seq3`.
pub fn sequence_name(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if stem != "det" {
        return stem;
    }
    path.ancestors()
        .skip(1)
        .filter_map(|a| a.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .find(|n| n != "det")
        .unwrap_or(stem)
}

/// Sequences under `root`, sorted by name. `root` may itself be a sequence.
pub fn discover(root: &Path) -> Result<Vec<SequenceSource>> {
    if let Some(s) = SequenceSource::from_dir(root) {
        return Ok(vec![s]);
    }
    let entries = fs::read_dir(root).map_err(|e| TrackError::io(root, e))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let found: Vec<SequenceSource> = dirs
        .iter()
        .filter_map(|d| SequenceSource::from_dir(d))
        .collect();
    if found.is_empty() {
        return Err(TrackError::MissingInput {
            sequence: root.display().to_string(),
            msg: "no sequence directories with a detection file".into(),
        });
    }
    Ok(found)
}

/// Sequences, config overrides and output directory for one batch run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub sequences: Vec<SequenceSource>,
    pub overrides: Vec<(String, String)>,
    pub output_dir: PathBuf,
}

impl RunManifest {
    pub fn validate(&self) -> Result<()> {
        if self.sequences.is_empty() {
            return Err(TrackError::Config("no sequences to run".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.sequences {
            s.validate()?;
            if !seen.insert(&s.name) {
                return Err(TrackError::Config(format!(
                    "sequence name '{}' appears twice",
                    s.name
                )));
            }
        }
        Ok(())
    }
}

/// Reads a sequence's inputs as `cfg` needs them. Embeddings are required
/// exactly when the appearance cue is on; warps are read only with CMC on.
pub fn load_input(src: &SequenceSource, cfg: &TrackerConfig) -> Result<SequenceInput> {
    let mut detections = mot_io::load_detections(&src.detections)?;
    if cfg.fusion.cues.appearance {
        let path = src
            .embeddings
            .as_ref()
            .ok_or_else(|| TrackError::MissingInput {
                sequence: src.name.clone(),
                msg: "the appearance cue needs an embeddings file".into(),
            })?;
        let expected = mot_io::high_counts(&detections, cfg.tau_high);
        let store = mot_io::load_embeddings(path, Some(&expected))?;
        mot_io::attach_embeddings(&mut detections, &store, cfg.tau_high)?;
    }
    let warps = match (&src.warps, cfg.cmc_enabled) {
        (Some(p), true) => mot_io::load_warps(p)?,
        _ => BTreeMap::new(),
    };
    let frame_count = match &src.seqinfo {
        Some(p) => Some(mot_io::load_sequence_meta(p, &src.name)?.frame_count).filter(|&n| n > 0),
        None => None,
    };
    Ok(SequenceInput {
        detections,
        warps,
        frame_count,
    })
}

pub fn result_path(out_dir: &Path, sequence: &str) -> PathBuf {
    out_dir.join(format!("{sequence}.txt"))
}

/// Tracks one sequence and writes `<out_dir>/<name>.txt`.
pub fn track_sequence(
    src: &SequenceSource,
    cfg: &TrackerConfig,
    out_dir: &Path,
) -> Result<PathBuf> {
    let input = load_input(src, cfg)?;
    let outputs = run_sequence(&input, cfg)?;
    let path = result_path(out_dir, &src.name);
    mot_io::write_results(&path, &outputs)?;
    Ok(path)
}

/// Worker count from [`WORKERS_ENV`], else the machine's parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| TrackError::Config(format!("cannot start worker pool: {e}")))
}

/// Tracks every sequence on a bounded pool. Results keep the input order.
pub fn track_all(
    sources: &[SequenceSource],
    cfg: &TrackerConfig,
    out_dir: &Path,
    workers: usize,
) -> Result<Vec<(String, Result<PathBuf>)>> {
    let pool = pool(workers)?;
    Ok(pool.install(|| {
        sources
            .par_iter()
            .map(|s| (s.name.clone(), track_sequence(s, cfg, out_dir)))
            .collect()
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub score: SequenceScore,
    /// Set when result and ground-truth frame ranges disagree.
    pub warning: Option<String>,
}

fn frame_span(boxes: &metrics::FrameBoxes) -> Option<(usize, usize)> {
    Some((*boxes.keys().next()?, *boxes.keys().next_back()?))
}

/// Scores result boxes against ground truth. When the result covers frames
/// outside the ground truth, both are cut to the common frame range.
///
/// `frame_count`, when known, fixes the ground-truth range to the whole
/// sequence so that frames without any annotated object still count.
pub fn evaluate_boxes(
    name: &str,
    gt: &metrics::FrameBoxes,
    preds: &metrics::FrameBoxes,
    frame_count: Option<usize>,
    iou_threshold: f64,
) -> Result<EvalOutcome> {
    let gt_span = match frame_count {
        Some(n) if n > 0 => Some((0, n - 1)),
        _ => frame_span(gt),
    };
    let (Some((g0, g1)), Some((p0, p1))) = (gt_span, frame_span(preds)) else {
        return Ok(EvalOutcome {
            score: metrics::evaluate(name, gt, preds, iou_threshold),
            warning: None,
        });
    };
    if p0 >= g0 && p1 <= g1 {
        return Ok(EvalOutcome {
            score: metrics::evaluate(name, gt, preds, iou_threshold),
            warning: None,
        });
    }
    let (lo, hi) = (g0.max(p0), g1.min(p1));
    if lo > hi {
        return Err(TrackError::FrameMismatch {
            path: PathBuf::from(name),
            frame: p0 + 1,
            msg: format!(
                "result frames {}..{} do not overlap ground-truth frames {}..{}",
                p0 + 1,
                p1 + 1,
                g0 + 1,
                g1 + 1
            ),
        });
    }
    let warning = format!(
        "{name}: result frames {}..{} differ from ground-truth frames {}..{}; evaluating frames {}..{}",
        p0 + 1,
        p1 + 1,
        g0 + 1,
        g1 + 1,
        lo + 1,
        hi + 1
    );
    let g = metrics::restrict_frames(gt, lo, hi);
    let p = metrics::restrict_frames(preds, lo, hi);
    Ok(EvalOutcome {
        score: metrics::evaluate(name, &g, &p, iou_threshold),
        warning: Some(warning),
    })
}

/// Where a sequence's ground truth lives and, if known, how many frames it has.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GtSource {
    pub path: PathBuf,
    pub frame_count: Option<usize>,
}

impl GtSource {
    pub fn file(path: PathBuf) -> Self {
        GtSource {
            path,
            frame_count: None,
        }
    }

    pub fn of(src: &SequenceSource) -> Result<Option<Self>> {
        let Some(path) = src.ground_truth.clone() else {
            return Ok(None);
        };
        let frame_count = match &src.seqinfo {
            Some(p) => {
                Some(mot_io::load_sequence_meta(p, &src.name)?.frame_count).filter(|&n| n > 0)
            }
            None => None,
        };
        Ok(Some(GtSource { path, frame_count }))
    }
}

pub fn evaluate_files(
    name: &str,
    gt: &GtSource,
    result_path: &Path,
    iou_threshold: f64,
) -> Result<EvalOutcome> {
    let boxes = metrics::gt_boxes(&mot_io::load_ground_truth(&gt.path)?);
    let preds = metrics::predicted_boxes(&mot_io::load_results(result_path)?);
    evaluate_boxes(name, &boxes, &preds, gt.frame_count, iou_threshold)
}

/// Result files (`*.txt`) in a directory, sorted by sequence name.
pub fn result_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let entries = fs::read_dir(dir).map_err(|e| TrackError::io(dir, e))?;
    let mut files: Vec<(String, PathBuf)> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "txt"))
        .map(|p| (sequence_name(&p), p))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(TrackError::MissingInput {
            sequence: dir.display().to_string(),
            msg: "no result files (*.txt) found".into(),
        });
    }
    Ok(files)
}

/// Evaluates each result against the same-named sequence's ground truth.
pub fn evaluate_results(
    results: &[(String, PathBuf)],
    ground_truth: &BTreeMap<String, GtSource>,
    iou_threshold: f64,
) -> Result<Vec<EvalOutcome>> {
    results
        .par_iter()
        .map(|(name, path)| {
            let gt = ground_truth
                .get(name)
                .ok_or_else(|| TrackError::MissingInput {
                    sequence: name.clone(),
                    msg: "no ground truth for this result file".into(),
                })?;
            evaluate_files(name, gt, path, iou_threshold)
        })
        .collect()
}

pub fn ground_truth_index(sources: &[SequenceSource]) -> Result<BTreeMap<String, GtSource>> {
    let mut out = BTreeMap::new();
    for s in sources {
        if let Some(g) = GtSource::of(s)? {
            out.insert(s.name.clone(), g);
        }
    }
    Ok(out)
}

/// Per-sequence rows followed by an `OVERALL` row with counts summed.
pub fn eval_report(outcomes: &[EvalOutcome]) -> (Vec<SequenceScore>, String) {
    let mut rows: Vec<SequenceScore> = outcomes.iter().map(|o| o.score.clone()).collect();
    rows.push(metrics::aggregate("OVERALL", &rows));
    let text = metrics::format_report(&rows);
    (rows, text)
}

/// One tracker run in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Combo {
    pub method: FusionMethod,
    pub cues: Cues,
    pub second_stage: SecondStageMetric,
}

impl Combo {
    /// Directory name, e.g. `kf-gating__mot-app-hiou__iou`.
    pub fn dir_name(&self) -> String {
        format!(
            "{}__{}__{}",
            self.method,
            self.cues.label().replace(", ", "-"),
            self.second_stage
        )
    }

    pub fn apply(&self, base: &TrackerConfig) -> TrackerConfig {
        let mut cfg = *base;
        cfg.fusion.method = self.method;
        cfg.fusion.cues = self.cues;
        cfg.second_stage_metric = self.second_stage;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepPlan {
    pub methods: Vec<FusionMethod>,
    pub second_stages: Vec<SecondStageMetric>,
}

impl Default for SweepPlan {
    fn default() -> Self {
        SweepPlan {
            methods: FusionMethod::ALL.to_vec(),
            second_stages: vec![SecondStageMetric::Iou],
        }
    }
}

impl SweepPlan {
    pub fn main_table(&self) -> bool {
        self.second_stages.contains(&SecondStageMetric::Iou)
    }

    pub fn second_stage_table(&self) -> bool {
        self.second_stages.contains(&SecondStageMetric::Mahalanobis)
    }

    /// Runs needed by the requested tables, without duplicates. The second-stage
    /// table only involves KF gating and needs both of its IoU and Mahalanobis runs.
    pub fn combos(&self) -> Vec<Combo> {
        let mut out = Vec::new();
        let mut push = |c: Combo| {
            if !out.contains(&c) {
                out.push(c);
            }
        };
        if self.main_table() {
            for &method in &self.methods {
                for cues in Cues::TABLE_ROWS {
                    push(Combo {
                        method,
                        cues,
                        second_stage: SecondStageMetric::Iou,
                    });
                }
            }
        }
        if self.second_stage_table() {
            for second_stage in [SecondStageMetric::Iou, SecondStageMetric::Mahalanobis] {
                for cues in Cues::TABLE_ROWS {
                    push(Combo {
                        method: FusionMethod::KfGating,
                        cues,
                        second_stage,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComboOutcome {
    pub combo: Combo,
    /// Aggregate score, or the first error hit by this combination.
    pub result: std::result::Result<SequenceScore, String>,
    pub per_sequence: Vec<SequenceScore>,
    /// True when tracking was skipped because cached results matched.
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub outcomes: Vec<ComboOutcome>,
    pub table_csv: Option<String>,
    pub table_text: Option<String>,
    pub second_stage_csv: Option<String>,
    pub second_stage_text: Option<String>,
}

impl SweepReport {
    pub fn failures(&self) -> Vec<&ComboOutcome> {
        self.outcomes.iter().filter(|o| o.result.is_err()).collect()
    }

    fn score(&self, combo: &Combo) -> Option<&SequenceScore> {
        self.outcomes
            .iter()
            .find(|o| &o.combo == combo)
            .and_then(|o| o.result.as_ref().ok())
    }
}

pub const CACHE_STAMP: &str = "inputs.sha256";

fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| TrackError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Content hash of everything that shapes a combination's result files: the
/// full configuration and every input file the configuration reads.
pub fn combo_hash(cfg: &TrackerConfig, sources: &[SequenceSource]) -> Result<String> {
    let mut h = Sha256::new();
    h.update(format_config(cfg).as_bytes());
    for s in sources {
        let mut files = vec![("det", Some(&s.detections))];
        files.push((
            "emb",
            s.embeddings.as_ref().filter(|_| cfg.fusion.cues.appearance),
        ));
        files.push(("warp", s.warps.as_ref().filter(|_| cfg.cmc_enabled)));
        files.push(("seqinfo", s.seqinfo.as_ref()));
        h.update(format!("sequence {}\n", s.name).as_bytes());
        for (tag, path) in files {
            let digest = match path {
                Some(p) => file_digest(p)?,
                None => "-".into(),
            };
            h.update(format!("{tag} {digest}\n").as_bytes());
        }
    }
    Ok(hex::encode(h.finalize()))
}

fn run_combo(
    combo: Combo,
    base: &TrackerConfig,
    sources: &[SequenceSource],
    runs_dir: &Path,
    force: bool,
) -> ComboOutcome {
    let mut outcome = ComboOutcome {
        combo,
        result: Err(String::new()),
        per_sequence: Vec::new(),
        cached: false,
    };
    let attempt = (|| -> Result<(Vec<SequenceScore>, SequenceScore, bool)> {
        let cfg = combo.apply(base);
        cfg.validate()?;
        let dir = runs_dir.join(combo.dir_name());
        let stamp_path = dir.join(CACHE_STAMP);
        let hash = combo_hash(&cfg, sources)?;
        let cached = !force
            && fs::read_to_string(&stamp_path).is_ok_and(|s| s.trim() == hash)
            && sources.iter().all(|s| result_path(&dir, &s.name).is_file());
        if !cached {
            fs::create_dir_all(&dir).map_err(|e| TrackError::io(&dir, e))?;
            // a stale stamp must not survive a partial rerun
            let _ = fs::remove_file(&stamp_path);
            sources
                .par_iter()
                .map(|s| track_sequence(s, &cfg, &dir).map(|_| ()))
                .collect::<Result<Vec<()>>>()?;
            fs::write(dir.join("config.cfg"), format_config(&cfg))
                .map_err(|e| TrackError::io(&dir, e))?;
            fs::write(&stamp_path, format!("{hash}\n"))
                .map_err(|e| TrackError::io(&stamp_path, e))?;
        }
        let mut scores = Vec::new();
        for s in sources {
            let gt = GtSource::of(s)?.ok_or_else(|| TrackError::MissingInput {
                sequence: s.name.clone(),
                msg: "sweeps need ground truth for every sequence".into(),
            })?;
            let ev = evaluate_files(
                &s.name,
                &gt,
                &result_path(&dir, &s.name),
                DEFAULT_IOU_THRESHOLD,
            )?;
            if let Some(w) = &ev.warning {
                log::warn!("{}: {w}", combo.dir_name());
            }
            scores.push(ev.score);
        }
        let total = metrics::aggregate("OVERALL", &scores);
        let mut rows = scores.clone();
        rows.push(total.clone());
        let eval_path = dir.join("eval.csv");
        fs::write(&eval_path, metrics::format_report(&rows))
            .map_err(|e| TrackError::io(&eval_path, e))?;
        Ok((scores, total, cached))
    })();
    match attempt {
        Ok((scores, total, cached)) => {
            outcome.per_sequence = scores;
            outcome.result = Ok(total);
            outcome.cached = cached;
        }
        Err(e) => outcome.result = Err(e.to_string()),
    }
    outcome
}

fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{:.3}", 100.0 * x))
}

fn cells(score: Option<&SequenceScore>) -> (String, String) {
    match score {
        Some(s) => (percent(s.mota.mota), percent(Some(s.idf1.idf1))),
        None => ("-".into(), "-".into()),
    }
}

pub fn method_title(m: FusionMethod) -> &'static str {
    match m {
        FusionMethod::Minimum => "Minimum",
        FusionMethod::WeightedSum => "Weighted-sum",
        FusionMethod::KfGating => "KF-gating",
        FusionMethod::Hadamard => "Hadamard",
    }
}

fn render_table(
    first_col: &str,
    rows: &[(String, String, Option<&SequenceScore>)],
) -> (String, String) {
    let mut csv = format!(
        "{},cues,MOTA,IDF1\n",
        first_col.to_ascii_lowercase().replace(' ', "_")
    );
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:<14} {:<28} {:>8} {:>8}",
        first_col, "Cues", "MOTA", "IDF1"
    );
    let mut last_group = String::new();
    for (group, cues, score) in rows {
        let (mota, idf1) = cells(*score);
        let _ = writeln!(csv, "{group},\"{cues}\",{mota},{idf1}");
        let shown = if *group == last_group {
            ""
        } else {
            group.as_str()
        };
        let _ = writeln!(text, "{:<14} {:<28} {:>8} {:>8}", shown, cues, mota, idf1);
        last_group = group.clone();
    }
    (csv, text)
}

/// Runs every combination of `plan` on a pool of `workers` threads and writes:
///
/// * `runs/<combo>/<seq>.txt`, `eval.csv`, `config.cfg` and the cache stamp
/// * `table.csv` / `table.txt`: methods × cue rows, MOTA and IDF1 in percent
/// * `second_stage.csv` / `second_stage.txt`: KF gating with IoU vs Mahalanobis
///   in the second association (only when Mahalanobis is requested)
///
/// Combinations whose stamp matches the current inputs are not re-tracked
/// unless `force` is set. Failed combinations appear as `-` cells.
pub fn run_sweep(
    sources: &[SequenceSource],
    base: &TrackerConfig,
    plan: &SweepPlan,
    out_dir: &Path,
    workers: usize,
    force: bool,
) -> Result<SweepReport> {
    if sources.is_empty() {
        return Err(TrackError::Config(
            "sweep needs at least one sequence".into(),
        ));
    }
    if plan.methods.is_empty() || plan.second_stages.is_empty() {
        return Err(TrackError::Config(
            "sweep needs at least one method and one second-stage metric".into(),
        ));
    }
    for s in sources {
        s.validate()?;
    }
    let runs_dir = out_dir.join("runs");
    let combos = plan.combos();
    let pool = pool(workers)?;
    let outcomes: Vec<ComboOutcome> = pool.install(|| {
        combos
            .par_iter()
            .map(|&c| run_combo(c, base, sources, &runs_dir, force))
            .collect()
    });
    for o in &outcomes {
        match &o.result {
            Ok(s) => log::info!(
                "{}{}: MOTA {} IDF1 {}",
                o.combo.dir_name(),
                if o.cached { " (cached)" } else { "" },
                percent(s.mota.mota),
                percent(Some(s.idf1.idf1))
            ),
            Err(e) => log::error!("{} failed: {e}", o.combo.dir_name()),
        }
    }

    let mut report = SweepReport {
        outcomes,
        table_csv: None,
        table_text: None,
        second_stage_csv: None,
        second_stage_text: None,
    };
    let write = |name: &str, text: &str| -> Result<()> {
        let p = out_dir.join(name);
        fs::write(&p, text).map_err(|e| TrackError::io(&p, e))
    };
    fs::create_dir_all(out_dir).map_err(|e| TrackError::io(out_dir, e))?;

    if plan.main_table() {
        let rows: Vec<(String, String, Option<&SequenceScore>)> = plan
            .methods
            .iter()
            .flat_map(|&method| {
                Cues::TABLE_ROWS.into_iter().map(move |cues| Combo {
                    method,
                    cues,
                    second_stage: SecondStageMetric::Iou,
                })
            })
            .map(|c| {
                (
                    method_title(c.method).to_string(),
                    c.cues.label(),
                    report.score(&c),
                )
            })
            .collect();
        let (csv, text) = render_table("Method", &rows);
        write("table.csv", &csv)?;
        write("table.txt", &text)?;
        report.table_csv = Some(csv);
        report.table_text = Some(text);
    }
    if plan.second_stage_table() {
        let rows: Vec<(String, String, Option<&SequenceScore>)> = [
            (SecondStageMetric::Iou, "IoU"),
            (SecondStageMetric::Mahalanobis, "Mahalanobis"),
        ]
        .into_iter()
        .flat_map(|(second_stage, title)| {
            Cues::TABLE_ROWS.into_iter().map(move |cues| {
                (
                    title,
                    Combo {
                        method: FusionMethod::KfGating,
                        cues,
                        second_stage,
                    },
                )
            })
        })
        .map(|(title, c)| (title.to_string(), c.cues.label(), report.score(&c)))
        .collect();
        let (csv, text) = render_table("Second stage", &rows);
        write("second_stage.csv", &csv)?;
        write("second_stage.txt", &text)?;
        report.second_stage_csv = Some(csv);
        report.second_stage_text = Some(text);
    }
    Ok(report)
}
