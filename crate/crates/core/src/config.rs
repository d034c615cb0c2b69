//! Flat `key = value` configuration.
//!
//! Keys use the same dashed names as the command-line flags (`tau-high`,
//! `theta-emb`, `lambda`, ...); underscores are accepted as well. Layers are
//! applied in order, so later layers win: built-in defaults, then a config file,
//! then flags.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Result, TrackError};
use crate::fusion::{Cues, FusionMethod};
use crate::kalman::Preserve;
use crate::tracker::{PreserveScope, SecondStageMetric, TrackerConfig};

/// Every recognised key, in the order [`format_config`] writes them.
pub const KEYS: &[&str] = &[
    "fusion",
    "cues",
    "second-stage",
    "tau-high",
    "tau-low",
    "init-score",
    "max-lost",
    "reject-sim-stage1",
    "reject-sim-stage2",
    "stage2-active-only",
    "theta-iou",
    "theta-emb",
    "lambda1",
    "lambda2",
    "lambda3",
    "lambda4",
    "lambda",
    "lambda-h",
    "lambda-c",
    "sigma-p",
    "sigma-v",
    "sigma-m",
    "ema-alpha",
    "gate-quantile",
    "nsa",
    "cmc",
    "preserve",
    "preserve-scope",
];

pub fn normalize_key(key: &str) -> String {
    key.trim()
        .trim_start_matches("--")
        .replace('_', "-")
        .to_ascii_lowercase()
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| TrackError::Config(format!("invalid value for {key}: '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(TrackError::Config(format!(
            "invalid boolean for {key}: '{value}'"
        ))),
    }
}

fn parse_preserve(value: &str) -> Result<Preserve> {
    let mut p = Preserve::NONE;
    for part in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match part {
            "none" => {}
            "all" => p = Preserve::ALL,
            "width" => p.width = true,
            "height" => p.height = true,
            "confidence" => p.confidence = true,
            other => {
                return Err(TrackError::Config(format!(
                    "unknown preserve channel '{other}'"
                )))
            }
        }
    }
    Ok(p)
}

fn format_preserve(p: Preserve) -> String {
    let names: Vec<&str> = [
        (p.width, "width"),
        (p.height, "height"),
        (p.confidence, "confidence"),
    ]
    .into_iter()
    .filter_map(|(on, n)| on.then_some(n))
    .collect();
    if names.is_empty() {
        "none".into()
    } else {
        names.join(",")
    }
}

/// Sets one field. Does not validate cross-field constraints.
pub fn apply_setting(cfg: &mut TrackerConfig, key: &str, value: &str) -> Result<()> {
    let key = normalize_key(key);
    let k = key.as_str();
    let f = &mut cfg.fusion;
    match k {
        "fusion" | "method" => f.method = value.trim().parse::<FusionMethod>()?,
        "cues" => f.cues = value.parse::<Cues>()?,
        "second-stage" => cfg.second_stage_metric = value.trim().parse::<SecondStageMetric>()?,
        "tau-high" => cfg.tau_high = parse_value(k, value)?,
        "tau-low" => cfg.tau_low = parse_value(k, value)?,
        "init-score" => cfg.init_score = parse_value(k, value)?,
        "max-lost" => cfg.max_lost = parse_value(k, value)?,
        "reject-sim-stage1" => cfg.reject_sim_stage1 = parse_value(k, value)?,
        "reject-sim-stage2" => cfg.reject_sim_stage2 = parse_value(k, value)?,
        "stage2-active-only" => cfg.stage2_active_only = parse_bool(k, value)?,
        "theta-iou" => f.theta_iou = parse_value(k, value)?,
        "theta-emb" => f.theta_emb = parse_value(k, value)?,
        "lambda1" => f.lambda1 = parse_value(k, value)?,
        "lambda2" => f.lambda2 = parse_value(k, value)?,
        "lambda3" => f.lambda3 = parse_value(k, value)?,
        "lambda4" => f.lambda4 = parse_value(k, value)?,
        "lambda" => f.lambda = parse_value(k, value)?,
        "lambda-h" => f.lambda_h = parse_value(k, value)?,
        "lambda-c" => f.lambda_c = parse_value(k, value)?,
        "sigma-p" => cfg.noise.position = parse_value(k, value)?,
        "sigma-v" => cfg.noise.velocity = parse_value(k, value)?,
        "sigma-m" => cfg.noise.measurement = parse_value(k, value)?,
        "ema-alpha" => cfg.ema.alpha = parse_value(k, value)?,
        "gate-quantile" => cfg.gate_quantile = parse_value(k, value)?,
        "nsa" => cfg.nsa_enabled = parse_bool(k, value)?,
        "cmc" => cfg.cmc_enabled = parse_bool(k, value)?,
        "preserve" => cfg.preserve = parse_preserve(value)?,
        "preserve-scope" => {
            cfg.preserve_scope = match value.trim() {
                "all" | "all-tracks" => PreserveScope::AllTracks,
                "lost" | "lost-only" => PreserveScope::LostOnly,
                other => {
                    return Err(TrackError::Config(format!(
                        "invalid value for preserve-scope: '{other}'"
                    )))
                }
            }
        }
        _ => {
            return Err(TrackError::Config(format!(
                "unknown configuration key '{key}'"
            )))
        }
    }
    Ok(())
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            TrackError::Config(format!(
                "line {}: expected key = value, got '{line}'",
                i + 1
            ))
        })?;
        out.push((normalize_key(k), v.trim().to_string()));
    }
    Ok(out)
}

pub fn load_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| TrackError::io(path, e))?;
    parse_config_text(&text).map_err(|e| TrackError::Config(format!("{}: {e}", path.display())))
}

/// Defaults, then each layer in order, then validation.
pub fn resolve<'a, I>(layers: I) -> Result<TrackerConfig>
where
    I: IntoIterator<Item = &'a [(String, String)]>,
{
    let mut cfg = TrackerConfig::default();
    for layer in layers {
        for (k, v) in layer {
            apply_setting(&mut cfg, k, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Canonical text form; parses back to the same configuration. Used for
/// cache keys, so the key order is fixed.
pub fn format_config(cfg: &TrackerConfig) -> String {
    let f = &cfg.fusion;
    let preserve_scope = match cfg.preserve_scope {
        PreserveScope::AllTracks => "all",
        PreserveScope::LostOnly => "lost",
    };
    let values: Vec<String> = vec![
        f.method.to_string(),
        f.cues.to_string(),
        cfg.second_stage_metric.to_string(),
        cfg.tau_high.to_string(),
        cfg.tau_low.to_string(),
        cfg.init_score.to_string(),
        cfg.max_lost.to_string(),
        cfg.reject_sim_stage1.to_string(),
        cfg.reject_sim_stage2.to_string(),
        cfg.stage2_active_only.to_string(),
        f.theta_iou.to_string(),
        f.theta_emb.to_string(),
        f.lambda1.to_string(),
        f.lambda2.to_string(),
        f.lambda3.to_string(),
        f.lambda4.to_string(),
        f.lambda.to_string(),
        f.lambda_h.to_string(),
        f.lambda_c.to_string(),
        cfg.noise.position.to_string(),
        cfg.noise.velocity.to_string(),
        cfg.noise.measurement.to_string(),
        cfg.ema.alpha.to_string(),
        cfg.gate_quantile.to_string(),
        cfg.nsa_enabled.to_string(),
        cfg.cmc_enabled.to_string(),
        format_preserve(cfg.preserve),
        preserve_scope.to_string(),
    ];
    debug_assert_eq!(values.len(), KEYS.len());
    KEYS.iter()
        .zip(values)
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}
