//! Fusion of motion, appearance, height-IoU and confidence costs into one
//! association cost matrix.
//!
//! Four methods are supported:
//!
//! * **Minimum**: elementwise minimum of the IoU distance and the gated
//!   appearance / weak-cue distances.
//! * **WeightedSum**: `l1*iou + l2*gated_cos + l3*hiou + l4*conf`; the weak cues are
//!   not IoU-masked.
//! * **KfGating**: `l*(cos + lh*hiou + lc*conf) + (1 - l)*maha`, with pairs outside
//!   the chi-square gate forbidden. No appearance thresholds apply.
//! * **Hadamard**: elementwise product of the gated costs.
//!
//! A disabled cue is skipped by Minimum, contributes 0 to WeightedSum and 1 to
//! Hadamard, so every method reduces to the bare motion cost.

use std::fmt;
use std::str::FromStr;

use crate::error::{Result, TrackError};
use crate::geometry::{CostMatrix, FORBIDDEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FusionMethod {
    Minimum,
    WeightedSum,
    KfGating,
    Hadamard,
}

impl FusionMethod {
    pub const ALL: [FusionMethod; 4] = [
        FusionMethod::Minimum,
        FusionMethod::WeightedSum,
        FusionMethod::KfGating,
        FusionMethod::Hadamard,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FusionMethod::Minimum => "minimum",
            FusionMethod::WeightedSum => "weighted-sum",
            FusionMethod::KfGating => "kf-gating",
            FusionMethod::Hadamard => "hadamard",
        }
    }

    /// Whether the motion cue is the Mahalanobis distance rather than IoU.
    pub fn uses_mahalanobis(&self) -> bool {
        matches!(self, FusionMethod::KfGating)
    }
}

impl fmt::Display for FusionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FusionMethod {
    type Err = TrackError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "minimum" | "min" => Ok(FusionMethod::Minimum),
            "weighted-sum" | "weightedsum" => Ok(FusionMethod::WeightedSum),
            "kf-gating" | "kfgating" => Ok(FusionMethod::KfGating),
            "hadamard" => Ok(FusionMethod::Hadamard),
            other => Err(TrackError::Config(format!(
                "unknown fusion method '{other}'"
            ))),
        }
    }
}

/// Cue toggles. Motion is always on; association is anchored on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cues {
    pub motion: bool,
    pub appearance: bool,
    pub hiou: bool,
    pub confidence: bool,
}

impl Cues {
    pub const MOTION: Cues = Cues {
        motion: true,
        appearance: false,
        hiou: false,
        confidence: false,
    };
    pub const ALL: Cues = Cues {
        motion: true,
        appearance: true,
        hiou: true,
        confidence: true,
    };

    /// The four cumulative cue rows of the comparison tables.
    pub const TABLE_ROWS: [Cues; 4] = [
        Cues::MOTION,
        Cues {
            motion: true,
            appearance: true,
            hiou: false,
            confidence: false,
        },
        Cues {
            motion: true,
            appearance: true,
            hiou: true,
            confidence: false,
        },
        Cues::ALL,
    ];

    /// Short row label such as `mot, app, hiou`.
    pub fn label(&self) -> String {
        let mut parts = vec!["mot"];
        if self.appearance {
            parts.push("app");
        }
        if self.hiou {
            parts.push("hiou");
        }
        if self.confidence {
            parts.push("confidence");
        }
        parts.join(", ")
    }
}

impl Default for Cues {
    fn default() -> Self {
        Cues::MOTION
    }
}

impl fmt::Display for Cues {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = vec!["motion"];
        if self.appearance {
            parts.push("appearance");
        }
        if self.hiou {
            parts.push("hiou");
        }
        if self.confidence {
            parts.push("confidence");
        }
        f.write_str(&parts.join(","))
    }
}

impl FromStr for Cues {
    type Err = TrackError;

    /// Comma list of `motion, appearance, hiou, confidence` (short forms accepted).
    fn from_str(s: &str) -> Result<Self> {
        let mut cues = Cues {
            motion: false,
            appearance: false,
            hiou: false,
            confidence: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "motion" | "mot" => cues.motion = true,
                "appearance" | "app" => cues.appearance = true,
                "hiou" => cues.hiou = true,
                "confidence" | "conf" => cues.confidence = true,
                other => return Err(TrackError::Config(format!("unknown cue '{other}'"))),
            }
        }
        if !cues.motion {
            return Err(TrackError::Config("the motion cue is required".into()));
        }
        Ok(cues)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    pub method: FusionMethod,
    pub cues: Cues,
    pub theta_iou: f64,
    pub theta_emb: f64,
    /// Weighted-sum weights for motion, appearance, height-IoU and confidence.
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    /// KF-gating balance between the appearance group and the Mahalanobis term.
    pub lambda: f64,
    pub lambda_h: f64,
    pub lambda_c: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            method: FusionMethod::Minimum,
            cues: Cues::MOTION,
            theta_iou: 0.5,
            theta_emb: 0.25,
            lambda1: 1.0,
            lambda2: 0.1,
            lambda3: 0.1,
            lambda4: 0.1,
            lambda: 0.98,
            lambda_h: 0.2,
            lambda_c: 0.2,
        }
    }
}

impl FusionConfig {
    /// Appearance weight used on the dance dataset.
    pub const DANCE_LAMBDA2: f64 = 0.2;

    pub fn validate(&self) -> Result<()> {
        if !self.cues.motion {
            return Err(TrackError::Config("the motion cue is required".into()));
        }
        for (name, v) in [
            ("theta-iou", self.theta_iou),
            ("theta-emb", self.theta_emb),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
            ("lambda4", self.lambda4),
            ("lambda", self.lambda),
            ("lambda-h", self.lambda_h),
            ("lambda-c", self.lambda_c),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(TrackError::Config(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if self.lambda > 1.0 {
            return Err(TrackError::Config(format!(
                "lambda must be <= 1, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// `0.5 * d_cos` when both the appearance and IoU gates pass, else 1.
pub fn gated_appearance(d_cos: f64, d_iou: f64, theta_emb: f64, theta_iou: f64) -> f64 {
    if d_cos < theta_emb && d_iou < theta_iou {
        0.5 * d_cos
    } else {
        1.0
    }
}

/// The weak-cue distance when the IoU gate passes, else 1.
pub fn gated_weak(d_weak: f64, d_iou: f64, theta_iou: f64) -> f64 {
    if d_iou < theta_iou {
        d_weak
    } else {
        1.0
    }
}

fn zip_with(a: &CostMatrix, b: &CostMatrix, f: impl Fn(f64, f64) -> f64) -> Result<CostMatrix> {
    a.ensure_shape(b)?;
    Ok(CostMatrix::from_fn(a.rows(), a.cols(), |i, j| {
        f(a.get(i, j), b.get(i, j))
    }))
}

pub fn gate_appearance(
    d_cos: &CostMatrix,
    d_iou: &CostMatrix,
    theta_emb: f64,
    theta_iou: f64,
) -> Result<CostMatrix> {
    zip_with(d_cos, d_iou, |c, m| {
        gated_appearance(c, m, theta_emb, theta_iou)
    })
}

pub fn gate_weak(d_weak: &CostMatrix, d_iou: &CostMatrix, theta_iou: f64) -> Result<CostMatrix> {
    zip_with(d_weak, d_iou, |w, m| gated_weak(w, m, theta_iou))
}

/// Per-cue distance matrices for one association step. `motion` is the IoU
/// distance, or the squared Mahalanobis distance for KF gating.
#[derive(Debug, Clone, Copy)]
pub struct CueCosts<'a> {
    pub motion: &'a CostMatrix,
    pub appearance: Option<&'a CostMatrix>,
    pub hiou: Option<&'a CostMatrix>,
    pub confidence: Option<&'a CostMatrix>,
}

impl<'a> CueCosts<'a> {
    pub fn motion_only(motion: &'a CostMatrix) -> Self {
        CueCosts {
            motion,
            appearance: None,
            hiou: None,
            confidence: None,
        }
    }

    fn check(&self) -> Result<()> {
        for m in [self.appearance, self.hiou, self.confidence]
            .into_iter()
            .flatten()
        {
            self.motion.ensure_shape(m)?;
        }
        Ok(())
    }

    /// Drops the cues that are switched off.
    pub fn restrict(self, cues: Cues) -> Self {
        CueCosts {
            motion: self.motion,
            appearance: self.appearance.filter(|_| cues.appearance),
            hiou: self.hiou.filter(|_| cues.hiou),
            confidence: self.confidence.filter(|_| cues.confidence),
        }
    }
}

fn gated_terms<'a>(
    costs: &'a CueCosts<'a>,
    cfg: &'a FusionConfig,
    i: usize,
    j: usize,
) -> impl Iterator<Item = f64> + 'a {
    let d_iou = costs.motion.get(i, j);
    let app = costs
        .appearance
        .map(|m| gated_appearance(m.get(i, j), d_iou, cfg.theta_emb, cfg.theta_iou));
    let hiou = costs
        .hiou
        .map(|m| gated_weak(m.get(i, j), d_iou, cfg.theta_iou));
    let conf = costs
        .confidence
        .map(|m| gated_weak(m.get(i, j), d_iou, cfg.theta_iou));
    std::iter::once(d_iou).chain(app).chain(hiou).chain(conf)
}

pub fn fuse_minimum(costs: &CueCosts<'_>, cfg: &FusionConfig) -> Result<CostMatrix> {
    costs.check()?;
    let m = costs.motion;
    Ok(CostMatrix::from_fn(m.rows(), m.cols(), |i, j| {
        gated_terms(costs, cfg, i, j).fold(f64::INFINITY, f64::min)
    }))
}

pub fn fuse_hadamard(costs: &CueCosts<'_>, cfg: &FusionConfig) -> Result<CostMatrix> {
    costs.check()?;
    let m = costs.motion;
    Ok(CostMatrix::from_fn(m.rows(), m.cols(), |i, j| {
        gated_terms(costs, cfg, i, j).product()
    }))
}

pub fn fuse_weighted_sum(costs: &CueCosts<'_>, cfg: &FusionConfig) -> Result<CostMatrix> {
    costs.check()?;
    let m = costs.motion;
    Ok(CostMatrix::from_fn(m.rows(), m.cols(), |i, j| {
        let d_iou = m.get(i, j);
        let mut total = cfg.lambda1 * d_iou;
        if let Some(a) = costs.appearance {
            total +=
                cfg.lambda2 * gated_appearance(a.get(i, j), d_iou, cfg.theta_emb, cfg.theta_iou);
        }
        if let Some(h) = costs.hiou {
            total += cfg.lambda3 * h.get(i, j);
        }
        if let Some(c) = costs.confidence {
            total += cfg.lambda4 * c.get(i, j);
        }
        total
    }))
}

/// `costs.motion` must hold squared Mahalanobis distances; entries above `gate`
/// become [`FORBIDDEN`].
pub fn fuse_kf_gating(costs: &CueCosts<'_>, gate: f64, cfg: &FusionConfig) -> Result<CostMatrix> {
    costs.check()?;
    let m = costs.motion;
    Ok(CostMatrix::from_fn(m.rows(), m.cols(), |i, j| {
        let d_maha = m.get(i, j);
        if !(d_maha <= gate) {
            return FORBIDDEN;
        }
        let mut group = 0.0;
        if let Some(a) = costs.appearance {
            group += a.get(i, j);
        }
        if let Some(h) = costs.hiou {
            group += cfg.lambda_h * h.get(i, j);
        }
        if let Some(c) = costs.confidence {
            group += cfg.lambda_c * c.get(i, j);
        }
        cfg.lambda * group + (1.0 - cfg.lambda) * d_maha
    }))
}

/// Applies the configured method to the enabled cues. `gate` is only used by KF gating.
pub fn fuse(costs: &CueCosts<'_>, cfg: &FusionConfig, gate: f64) -> Result<CostMatrix> {
    let costs = costs.restrict(cfg.cues);
    match cfg.method {
        FusionMethod::Minimum => fuse_minimum(&costs, cfg),
        FusionMethod::WeightedSum => fuse_weighted_sum(&costs, cfg),
        FusionMethod::KfGating => fuse_kf_gating(&costs, gate, cfg),
        FusionMethod::Hadamard => fuse_hadamard(&costs, cfg),
    }
}
