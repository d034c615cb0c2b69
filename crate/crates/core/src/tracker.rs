//! Per-frame tracking pipeline with a two-stage association cascade.
//!
//! Each frame:
//! 1. detections below `tau_low` are dropped, the rest split into high and low
//!    confidence sets at `tau_high`;
//! 2. every track is predicted (with size/confidence rate preservation) and
//!    optionally warped by the frame's camera motion;
//! 3. all tracks are matched against the high detections with the fused cue cost;
//! 4. the leftover tracks are matched against the low detections on motion only;
//! 5. unmatched tracks turn lost and are dropped once lost for more than
//!    `max_lost` frames;
//! 6. unmatched high detections scoring at least `init_score` start new tracks;
//! 7. active tracks are reported.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::appearance::{ema_update, init_embedding, EmaConfig, Embedding};
use crate::assignment::{solve, AssignmentResult};
use crate::error::{Result, TrackError};
use crate::fusion::{fuse, CueCosts, FusionConfig};
use crate::geometry::{build_cost_matrix, BBox, CostKind, CostMatrix, CueInputs, FORBIDDEN};
use crate::kalman::{
    chi2_gate_threshold, Affine2x3, KalmanFilter, KfState, Measurement, NoiseFactors, Preserve,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Active,
    Lost,
}

#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    pub state: KfState,
    pub embedding: Option<Embedding>,
    pub status: TrackStatus,
    pub frames_since_update: u32,
    /// Frames since birth.
    pub age: u32,
}

impl Track {
    pub fn bbox(&self) -> BBox {
        self.state.bbox()
    }

    /// Confidence estimate clamped to `[0, 1]`.
    pub fn confidence(&self) -> f64 {
        self.state.confidence().clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SecondStageMetric {
    Iou,
    Mahalanobis,
}

impl SecondStageMetric {
    pub fn as_str(&self) -> &'static str {
        match self {
            SecondStageMetric::Iou => "iou",
            SecondStageMetric::Mahalanobis => "mahalanobis",
        }
    }
}

impl fmt::Display for SecondStageMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SecondStageMetric {
    type Err = TrackError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "iou" => Ok(SecondStageMetric::Iou),
            "mahalanobis" | "maha" => Ok(SecondStageMetric::Mahalanobis),
            other => Err(TrackError::Config(format!(
                "unknown second-stage metric '{other}'"
            ))),
        }
    }
}

/// Which tracks get their size/confidence rates zeroed before prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreserveScope {
    AllTracks,
    LostOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    pub tau_high: f64,
    pub tau_low: f64,
    pub init_score: f64,
    pub max_lost: u32,
    /// Minimum similarity kept after the first association; cost limit is `1 - s`.
    pub reject_sim_stage1: f64,
    /// Minimum similarity kept after the second association.
    pub reject_sim_stage2: f64,
    pub second_stage_metric: SecondStageMetric,
    /// Restrict the second association to tracks that were active last frame.
    pub stage2_active_only: bool,
    pub fusion: FusionConfig,
    pub noise: NoiseFactors,
    pub preserve: Preserve,
    pub preserve_scope: PreserveScope,
    pub nsa_enabled: bool,
    pub cmc_enabled: bool,
    pub ema: EmaConfig,
    /// Chi-square quantile of the 2-dof Mahalanobis gate.
    pub gate_quantile: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            tau_high: 0.6,
            tau_low: 0.1,
            init_score: 0.7,
            max_lost: 30,
            reject_sim_stage1: 0.2,
            reject_sim_stage2: 0.5,
            second_stage_metric: SecondStageMetric::Iou,
            stage2_active_only: false,
            fusion: FusionConfig::default(),
            noise: NoiseFactors::default(),
            preserve: Preserve::ALL,
            preserve_scope: PreserveScope::AllTracks,
            nsa_enabled: false,
            cmc_enabled: true,
            ema: EmaConfig::default(),
            gate_quantile: 0.95,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.tau_low && self.tau_low < self.tau_high && self.tau_high <= 1.0) {
            return Err(TrackError::Config(format!(
                "need 0 <= tau-low < tau-high <= 1, got tau-low={} tau-high={}",
                self.tau_low, self.tau_high
            )));
        }
        if !(self.init_score >= self.tau_high) {
            return Err(TrackError::Config(format!(
                "init-score ({}) must be >= tau-high ({})",
                self.init_score, self.tau_high
            )));
        }
        for (name, v) in [
            ("reject-sim-stage1", self.reject_sim_stage1),
            ("reject-sim-stage2", self.reject_sim_stage2),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(TrackError::Config(format!(
                    "{name} must be in [0, 1], got {v}"
                )));
            }
        }
        if !(self.gate_quantile > 0.0 && self.gate_quantile < 1.0) {
            return Err(TrackError::Config(format!(
                "gate-quantile must be in (0, 1), got {}",
                self.gate_quantile
            )));
        }
        self.fusion.validate()?;
        self.noise.validate()?;
        self.ema.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Zero-based frame index.
    pub frame: usize,
    pub bbox: BBox,
    pub score: f64,
    pub embedding: Option<Embedding>,
}

impl Detection {
    pub fn new(frame: usize, bbox: BBox, score: f64) -> Self {
        Detection {
            frame,
            bbox,
            score,
            embedding: None,
        }
    }

    pub fn with_embedding(mut self, embedding: Embedding) -> Self {
        self.embedding = Some(embedding);
        self
    }

    pub fn measurement(&self) -> Measurement {
        Measurement::from_bbox(&self.bbox, self.score)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputRecord {
    pub track_id: u64,
    pub bbox: BBox,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameOutput {
    /// Zero-based frame index.
    pub frame: usize,
    pub records: Vec<OutputRecord>,
}

/// Detection indices consumed by each stage in the last processed frame.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrameTrace {
    pub high: Vec<usize>,
    pub low: Vec<usize>,
    pub stage1: Vec<(u64, usize)>,
    pub stage2: Vec<(u64, usize)>,
    pub born: Vec<u64>,
    pub deleted: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    kf: KalmanFilter,
    gate: f64,
    tracks: Vec<Track>,
    next_id: u64,
    trace: FrameTrace,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Tracker {
            kf: KalmanFilter::new(cfg.noise).with_nsa(cfg.nsa_enabled),
            gate: chi2_gate_threshold(2, cfg.gate_quantile)?,
            cfg,
            tracks: Vec::new(),
            next_id: 1,
            trace: FrameTrace::default(),
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Live tracks in creation order.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn last_trace(&self) -> &FrameTrace {
        &self.trace
    }

    pub fn process_frame(
        &mut self,
        frame: usize,
        dets: &[Detection],
        warp: Option<&Affine2x3>,
    ) -> Result<FrameOutput> {
        let cfg = self.cfg;
        let mut trace = FrameTrace::default();

        for (i, d) in dets.iter().enumerate() {
            if d.score < cfg.tau_low {
                continue;
            }
            if d.score >= cfg.tau_high {
                trace.high.push(i);
            } else {
                trace.low.push(i);
            }
        }

        let was_active: Vec<bool> = self
            .tracks
            .iter()
            .map(|t| t.status == TrackStatus::Active)
            .collect();
        for track in &mut self.tracks {
            let preserve = match cfg.preserve_scope {
                PreserveScope::AllTracks => cfg.preserve,
                PreserveScope::LostOnly if track.status == TrackStatus::Lost => cfg.preserve,
                PreserveScope::LostOnly => Preserve::NONE,
            };
            track.state = self.kf.predict(&track.state, preserve);
            if cfg.cmc_enabled {
                if let Some(w) = warp {
                    track.state = track.state.apply_affine(w)?;
                }
            }
        }

        let mut matched = vec![false; self.tracks.len()];

        // first association: every track against the high detections
        let all_rows: Vec<usize> = (0..self.tracks.len()).collect();
        let first = self.first_stage(&all_rows, dets, &trace.high)?;
        for &(r, c) in &first.matches {
            let det = &dets[trace.high[c]];
            let track = &mut self.tracks[r];
            track.state = self.kf.update(&track.state, &det.measurement())?;
            if let Some(f) = &det.embedding {
                track.embedding = Some(match &track.embedding {
                    Some(e) => ema_update(e, f, cfg.ema)?,
                    None => init_embedding(f),
                });
            }
            matched[r] = true;
            trace.stage1.push((track.id, trace.high[c]));
        }
        let high_left: Vec<usize> = first
            .unmatched_cols
            .iter()
            .map(|&c| trace.high[c])
            .collect();

        // second association: leftover tracks against the low detections, motion only
        let rows: Vec<usize> = first
            .unmatched_rows
            .iter()
            .copied()
            .filter(|&r| !cfg.stage2_active_only || was_active[r])
            .collect();
        let second = self.second_stage(&rows, dets, &trace.low)?;
        for &(r, c) in &second.matches {
            let row = rows[r];
            let det = &dets[trace.low[c]];
            let track = &mut self.tracks[row];
            track.state = self.kf.update(&track.state, &det.measurement())?;
            matched[row] = true;
            trace.stage2.push((track.id, trace.low[c]));
        }

        for (track, &hit) in self.tracks.iter_mut().zip(&matched) {
            track.age += 1;
            if hit {
                track.status = TrackStatus::Active;
                track.frames_since_update = 0;
            } else {
                track.status = TrackStatus::Lost;
                track.frames_since_update += 1;
            }
        }
        let max_lost = cfg.max_lost;
        self.tracks.retain(|t| {
            let keep = t.frames_since_update <= max_lost;
            if !keep {
                trace.deleted.push(t.id);
            }
            keep
        });

        for &i in &high_left {
            let det = &dets[i];
            if det.score < cfg.init_score {
                continue;
            }
            let id = self.next_id;
            self.next_id += 1;
            self.tracks.push(Track {
                id,
                state: self.kf.initiate(&det.measurement()),
                embedding: det.embedding.as_ref().map(init_embedding),
                status: TrackStatus::Active,
                frames_since_update: 0,
                age: 0,
            });
            trace.born.push(id);
        }

        let records = self
            .tracks
            .iter()
            .filter(|t| t.status == TrackStatus::Active)
            .map(|t| OutputRecord {
                track_id: t.id,
                bbox: t.bbox(),
                score: t.confidence(),
            })
            .collect();
        self.trace = trace;
        Ok(FrameOutput { frame, records })
    }

    fn track_inputs(&self, rows: &[usize]) -> CueInputs<'_> {
        CueInputs {
            boxes: rows.iter().map(|&r| self.tracks[r].bbox()).collect(),
            scores: rows
                .iter()
                .map(|&r| self.tracks[r].state.confidence())
                .collect(),
            embeddings: rows
                .iter()
                .map(|&r| self.tracks[r].embedding.as_ref().map(Embedding::as_slice))
                .collect(),
        }
    }

    /// Squared center Mahalanobis distances, rows = tracks.
    fn mahalanobis_matrix(
        &self,
        rows: &[usize],
        dets: &[Detection],
        cols: &[usize],
    ) -> Result<CostMatrix> {
        let meas: Vec<Measurement> = cols.iter().map(|&c| dets[c].measurement()).collect();
        let mut out = CostMatrix::zeros(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            let d = self.kf.gating_distance(&self.tracks[r].state, &meas)?;
            for (j, v) in d.into_iter().enumerate() {
                out.set(i, j, v);
            }
        }
        Ok(out)
    }

    fn first_stage(
        &self,
        rows: &[usize],
        dets: &[Detection],
        cols: &[usize],
    ) -> Result<AssignmentResult> {
        let fusion = &self.cfg.fusion;
        let cues = fusion.cues;
        let trk = self.track_inputs(rows);
        let det = CueInputs {
            boxes: cols.iter().map(|&c| dets[c].bbox).collect(),
            scores: cols.iter().map(|&c| dets[c].score).collect(),
            embeddings: cols
                .iter()
                .map(|&c| dets[c].embedding.as_ref().map(Embedding::as_slice))
                .collect(),
        };

        let motion = if fusion.method.uses_mahalanobis() {
            self.mahalanobis_matrix(rows, dets, cols)?
        } else {
            build_cost_matrix(&trk, &det, CostKind::Iou)?
        };
        let optional = |on: bool, kind| -> Result<Option<CostMatrix>> {
            if on {
                build_cost_matrix(&trk, &det, kind).map(Some)
            } else {
                Ok(None)
            }
        };
        let appearance = optional(cues.appearance, CostKind::Cosine)?;
        let hiou = optional(cues.hiou, CostKind::Hiou)?;
        let confidence = optional(cues.confidence, CostKind::Confidence)?;
        let costs = CueCosts {
            motion: &motion,
            appearance: appearance.as_ref(),
            hiou: hiou.as_ref(),
            confidence: confidence.as_ref(),
        };
        let fused = fuse(&costs, fusion, self.gate)?;
        // the gating method's scale is not a similarity; only its gate rejects
        let reject_above = if fusion.method.uses_mahalanobis() {
            f64::INFINITY
        } else {
            1.0 - self.cfg.reject_sim_stage1
        };
        Ok(solve(&fused, reject_above))
    }

    fn second_stage(
        &self,
        rows: &[usize],
        dets: &[Detection],
        cols: &[usize],
    ) -> Result<AssignmentResult> {
        match self.cfg.second_stage_metric {
            SecondStageMetric::Iou => {
                let trk = self.track_inputs(rows);
                let det = CueInputs {
                    boxes: cols.iter().map(|&c| dets[c].bbox).collect(),
                    ..Default::default()
                };
                let cost = build_cost_matrix(&trk, &det, CostKind::Iou)?;
                Ok(solve(&cost, 1.0 - self.cfg.reject_sim_stage2))
            }
            SecondStageMetric::Mahalanobis => {
                let gate = self.gate;
                let cost = self.mahalanobis_matrix(rows, dets, cols)?.map(|v| {
                    if v > gate {
                        FORBIDDEN
                    } else {
                        v
                    }
                });
                Ok(solve(&cost, gate))
            }
        }
    }
}

/// Everything needed to track one sequence. Embeddings are already attached to
/// their detections.
#[derive(Debug, Clone, Default)]
pub struct SequenceInput {
    pub detections: BTreeMap<usize, Vec<Detection>>,
    pub warps: BTreeMap<usize, Affine2x3>,
    /// Number of frames; when absent the last detection frame ends the sequence.
    pub frame_count: Option<usize>,
}

impl SequenceInput {
    pub fn frame_span(&self) -> usize {
        let from_dets = self.detections.keys().next_back().map_or(0, |&f| f + 1);
        self.frame_count.unwrap_or(0).max(from_dets)
    }
}

/// Tracks a whole sequence frame by frame. Frames without detections are
/// processed as empty.
pub fn run_sequence(input: &SequenceInput, cfg: &TrackerConfig) -> Result<Vec<FrameOutput>> {
    let mut tracker = Tracker::new(*cfg)?;
    let empty = Vec::new();
    (0..input.frame_span())
        .map(|frame| {
            let dets = input.detections.get(&frame).unwrap_or(&empty);
            tracker.process_frame(frame, dets, input.warps.get(&frame))
        })
        .collect()
}
