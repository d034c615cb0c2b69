//! Text formats for detections, embeddings, camera warps, ground truth and results.
//!
//! Frame numbers are 1-based on disk and 0-based everywhere else; the
//! conversion happens only in this module.
//!
//! | file        | line layout                                            |
//! |-------------|--------------------------------------------------------|
//! | detections  | `frame,-1,x,y,w,h,score[,...]`                         |
//! | embeddings  | header `D=<dim>`, then `frame,det_index,v1 v2 ... vD`  |
//! | warps       | `frame a11 a12 a13 a21 a22 a23`                        |
//! | ground truth| `frame,id,x,y,w,h,consider,class,visibility`           |
//! | results     | `frame,id,x,y,w,h,score,-1,-1,-1`                      |
//!
//! Boxes are top-left / width / height in pixels. Embedding indices refer to
//! the detection's position within its frame, in file order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::appearance::Embedding;
use crate::error::{Result, TrackError};
use crate::geometry::BBox;
use crate::kalman::Affine2x3;
use crate::tracker::{Detection, FrameOutput, OutputRecord};

pub type DetectionsByFrame = BTreeMap<usize, Vec<Detection>>;

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceMeta {
    pub name: String,
    pub frame_count: usize,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtRecord {
    /// Zero-based.
    pub frame: usize,
    pub id: u64,
    pub bbox: BBox,
    pub consider: bool,
    pub class: i64,
    pub visibility: f64,
}

/// Embeddings keyed by `(frame, detection index)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingStore {
    pub dim: Option<usize>,
    pub records: BTreeMap<(usize, usize), Embedding>,
}

impl EmbeddingStore {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn get(&self, frame: usize, det_index: usize) -> Option<&Embedding> {
        self.records.get(&(frame, det_index))
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| TrackError::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> TrackError {
    TrackError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn num(path: &Path, line: usize, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("{what}: '{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("{what} is not finite")));
    }
    Ok(v)
}

/// 1-based on-disk frame to 0-based index.
fn frame_index(path: &Path, line: usize, field: &str) -> Result<usize> {
    let v = num(path, line, field, "frame")?;
    if v < 1.0 || v.fract() != 0.0 {
        return Err(parse_err(
            path,
            line,
            format!("frame must be a positive integer, got '{field}'"),
        ));
    }
    Ok(v as usize - 1)
}

fn tlwh_box(path: &Path, line: usize, f: &[&str]) -> Result<BBox> {
    let x = num(path, line, f[0], "x")?;
    let y = num(path, line, f[1], "y")?;
    let w = num(path, line, f[2], "w")?;
    let h = num(path, line, f[3], "h")?;
    if w < 0.0 || h < 0.0 {
        return Err(parse_err(path, line, "negative box size"));
    }
    Ok(BBox::from_tlwh(x, y, w, h))
}

/// Lines with a negative score are skipped.
pub fn load_detections(path: &Path) -> Result<DetectionsByFrame> {
    parse_detections(path, &read(path)?)
}

pub fn parse_detections(path: &Path, text: &str) -> Result<DetectionsByFrame> {
    let mut out = DetectionsByFrame::new();
    for (ln, line) in content_lines(text) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 7 {
            return Err(parse_err(
                path,
                ln,
                format!("expected at least 7 fields, got {}", f.len()),
            ));
        }
        let frame = frame_index(path, ln, f[0])?;
        let bbox = tlwh_box(path, ln, &f[2..6])?;
        let score = num(path, ln, f[6], "score")?;
        if score < 0.0 {
            continue;
        }
        if score > 1.0 {
            return Err(parse_err(path, ln, format!("score {score} exceeds 1")));
        }
        out.entry(frame)
            .or_default()
            .push(Detection::new(frame, bbox, score));
    }
    Ok(out)
}

/// Inverse of [`parse_detections`], full precision.
pub fn format_detections(dets: &DetectionsByFrame) -> String {
    let mut s = String::new();
    for (frame, list) in dets {
        for d in list {
            let [x, y, w, h] = d.bbox.to_tlwh();
            let _ = writeln!(s, "{},-1,{x},{y},{w},{h},{},-1,-1,-1", frame + 1, d.score);
        }
    }
    s
}

/// Number of detections scoring at least `tau_high` in each frame.
pub fn high_counts(dets: &DetectionsByFrame, tau_high: f64) -> BTreeMap<usize, usize> {
    dets.iter()
        .map(|(&f, v)| (f, v.iter().filter(|d| d.score >= tau_high).count()))
        .filter(|&(_, n)| n > 0)
        .collect()
}

/// Reads an embedding file. With `expected`, every frame must carry exactly
/// the given number of records.
pub fn load_embeddings(
    path: &Path,
    expected: Option<&BTreeMap<usize, usize>>,
) -> Result<EmbeddingStore> {
    parse_embeddings(path, &read(path)?, expected)
}

pub fn parse_embeddings(
    path: &Path,
    text: &str,
    expected: Option<&BTreeMap<usize, usize>>,
) -> Result<EmbeddingStore> {
    let mut lines = content_lines(text);
    let Some((hl, header)) = lines.next() else {
        return Ok(EmbeddingStore::default());
    };
    let dim: usize = header
        .strip_prefix("D=")
        .and_then(|d| d.trim().parse().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| {
            parse_err(
                path,
                hl,
                format!("expected header 'D=<dim>', got '{header}'"),
            )
        })?;

    let mut store = EmbeddingStore {
        dim: Some(dim),
        records: BTreeMap::new(),
    };
    for (ln, line) in lines {
        let mut parts = line.splitn(3, ',');
        let (Some(fr), Some(idx), Some(vals)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(path, ln, "expected 'frame,det_index,values'"));
        };
        let frame = frame_index(path, ln, fr)?;
        let det_index: usize = idx
            .trim()
            .parse()
            .map_err(|_| parse_err(path, ln, format!("bad detection index '{idx}'")))?;
        let values = vals
            .split_whitespace()
            .map(|v| num(path, ln, v, "embedding value"))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != dim {
            return Err(TrackError::FrameMismatch {
                path: path.to_path_buf(),
                frame: frame + 1,
                msg: format!("line {ln}: expected {dim} values, got {}", values.len()),
            });
        }
        let emb = Embedding::new(values).map_err(|e| parse_err(path, ln, e.to_string()))?;
        if store.records.insert((frame, det_index), emb).is_some() {
            return Err(parse_err(
                path,
                ln,
                format!("duplicate record for detection {det_index}"),
            ));
        }
    }

    if let Some(expected) = expected {
        let mut found: BTreeMap<usize, usize> = BTreeMap::new();
        for &(f, _) in store.records.keys() {
            *found.entry(f).or_default() += 1;
        }
        let frames: std::collections::BTreeSet<usize> =
            found.keys().chain(expected.keys()).copied().collect();
        for f in frames {
            let want = expected.get(&f).copied().unwrap_or(0);
            let got = found.get(&f).copied().unwrap_or(0);
            if want != got {
                return Err(TrackError::FrameMismatch {
                    path: path.to_path_buf(),
                    frame: f + 1,
                    msg: format!("expected {want} embeddings, found {got}"),
                });
            }
        }
    }
    Ok(store)
}

/// Attaches embeddings to their detections. Only high-confidence detections may
/// carry one.
pub fn attach_embeddings(
    dets: &mut DetectionsByFrame,
    store: &EmbeddingStore,
    tau_high: f64,
) -> Result<()> {
    for (&(frame, idx), emb) in &store.records {
        let det = dets
            .get_mut(&frame)
            .and_then(|v| v.get_mut(idx))
            .ok_or_else(|| TrackError::FrameMismatch {
                path: PathBuf::from("<embeddings>"),
                frame: frame + 1,
                msg: format!("no detection with index {idx}"),
            })?;
        if det.score < tau_high {
            return Err(TrackError::FrameMismatch {
                path: PathBuf::from("<embeddings>"),
                frame: frame + 1,
                msg: format!(
                    "detection {idx} scores {} < tau-high {tau_high} and cannot carry an embedding",
                    det.score
                ),
            });
        }
        det.embedding = Some(emb.clone());
    }
    Ok(())
}

pub fn format_embeddings(store: &EmbeddingStore) -> String {
    let mut s = String::new();
    if let Some(d) = store.dim {
        let _ = writeln!(s, "D={d}");
    }
    for (&(frame, idx), e) in &store.records {
        let vals: Vec<String> = e.as_slice().iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(s, "{},{},{}", frame + 1, idx, vals.join(" "));
    }
    s
}

/// Per-frame warps; frames without a line get the identity.
pub fn load_warps(path: &Path) -> Result<BTreeMap<usize, Affine2x3>> {
    parse_warps(path, &read(path)?)
}

pub fn parse_warps(path: &Path, text: &str) -> Result<BTreeMap<usize, Affine2x3>> {
    let mut out = BTreeMap::new();
    for (ln, line) in content_lines(text) {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 7 {
            return Err(parse_err(
                path,
                ln,
                format!("expected 7 fields, got {}", f.len()),
            ));
        }
        let frame = frame_index(path, ln, f[0])?;
        let mut a = [0.0; 6];
        for (slot, field) in a.iter_mut().zip(&f[1..]) {
            *slot = num(path, ln, field, "warp coefficient")?;
        }
        let warp = Affine2x3::from_row_major(a);
        if warp.linear.determinant() == 0.0 {
            return Err(parse_err(path, ln, "singular warp"));
        }
        out.insert(frame, warp);
    }
    Ok(out)
}

pub fn format_warps(warps: &BTreeMap<usize, Affine2x3>) -> String {
    let mut s = String::new();
    for (frame, w) in warps {
        let (m, t) = (&w.linear, &w.translation);
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {}",
            frame + 1,
            m[(0, 0)],
            m[(0, 1)],
            t[0],
            m[(1, 0)],
            m[(1, 1)],
            t[1]
        );
    }
    s
}

pub fn warp_for(warps: &BTreeMap<usize, Affine2x3>, frame: usize) -> Affine2x3 {
    warps.get(&frame).copied().unwrap_or_default()
}

/// Ground truth with `consider = 0` rows removed.
pub fn load_ground_truth(path: &Path) -> Result<BTreeMap<usize, Vec<GtRecord>>> {
    parse_ground_truth(path, &read(path)?)
}

pub fn parse_ground_truth(path: &Path, text: &str) -> Result<BTreeMap<usize, Vec<GtRecord>>> {
    let mut out: BTreeMap<usize, Vec<GtRecord>> = BTreeMap::new();
    for (ln, line) in content_lines(text) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 9 {
            return Err(parse_err(
                path,
                ln,
                format!("expected 9 fields, got {}", f.len()),
            ));
        }
        let frame = frame_index(path, ln, f[0])?;
        let id = num(path, ln, f[1], "id")?;
        if id < 1.0 || id.fract() != 0.0 {
            return Err(parse_err(
                path,
                ln,
                format!("identity must be a positive integer, got '{}'", f[1]),
            ));
        }
        let bbox = tlwh_box(path, ln, &f[2..6])?;
        let consider = num(path, ln, f[6], "consider")? != 0.0;
        let class = num(path, ln, f[7], "class")? as i64;
        let visibility = num(path, ln, f[8], "visibility")?;
        if !(0.0..=1.0).contains(&visibility) {
            return Err(parse_err(
                path,
                ln,
                format!("visibility {visibility} outside [0, 1]"),
            ));
        }
        if !consider {
            continue;
        }
        out.entry(frame).or_default().push(GtRecord {
            frame,
            id: id as u64,
            bbox,
            consider,
            class,
            visibility,
        });
    }
    Ok(out)
}

pub fn format_ground_truth(gt: &BTreeMap<usize, Vec<GtRecord>>) -> String {
    let mut s = String::new();
    for recs in gt.values() {
        for r in recs {
            let [x, y, w, h] = r.bbox.to_tlwh();
            let _ = writeln!(
                s,
                "{},{},{x},{y},{w},{h},{},{},{}",
                r.frame + 1,
                r.id,
                u8::from(r.consider),
                r.class,
                r.visibility
            );
        }
    }
    s
}

/// Renders result lines; boxes to 2 decimals and scores to 4 so reruns are
/// byte-identical.
pub fn format_results(outputs: &[FrameOutput]) -> String {
    let mut s = String::new();
    for out in outputs {
        for r in &out.records {
            let [x, y, w, h] = r.bbox.to_tlwh();
            let _ = writeln!(
                s,
                "{},{},{x:.2},{y:.2},{w:.2},{h:.2},{:.4},-1,-1,-1",
                out.frame + 1,
                r.track_id,
                r.score
            );
        }
    }
    s
}

pub fn write_results(path: &Path, outputs: &[FrameOutput]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| TrackError::io(dir, e))?;
    }
    fs::write(path, format_results(outputs)).map_err(|e| TrackError::io(path, e))
}

/// Reads a result file back. Only frames with records appear.
pub fn load_results(path: &Path) -> Result<Vec<FrameOutput>> {
    parse_results(path, &read(path)?)
}

pub fn parse_results(path: &Path, text: &str) -> Result<Vec<FrameOutput>> {
    let mut frames: BTreeMap<usize, Vec<OutputRecord>> = BTreeMap::new();
    for (ln, line) in content_lines(text) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 7 {
            return Err(parse_err(
                path,
                ln,
                format!("expected at least 7 fields, got {}", f.len()),
            ));
        }
        let frame = frame_index(path, ln, f[0])?;
        let id = num(path, ln, f[1], "id")?;
        if id < 1.0 || id.fract() != 0.0 {
            return Err(parse_err(
                path,
                ln,
                format!("track id must be a positive integer, got '{}'", f[1]),
            ));
        }
        let bbox = tlwh_box(path, ln, &f[2..6])?;
        let score = num(path, ln, f[6], "score")?;
        frames.entry(frame).or_default().push(OutputRecord {
            track_id: id as u64,
            bbox,
            score,
        });
    }
    Ok(frames
        .into_iter()
        .map(|(frame, records)| FrameOutput { frame, records })
        .collect())
}

/// Reads a `seqinfo.ini`-style file (`seqLength`, `frameRate`, `imWidth`, `imHeight`).
pub fn load_sequence_meta(path: &Path, name: &str) -> Result<SequenceMeta> {
    let text = read(path)?;
    let mut meta = SequenceMeta {
        name: name.to_string(),
        frame_count: 0,
        fps: 30.0,
        width: 0,
        height: 0,
    };
    for (ln, line) in content_lines(&text) {
        if line.starts_with('[') || line.starts_with(';') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            continue;
        };
        let v = v.trim();
        let bad = || parse_err(path, ln, format!("bad value for {}: '{v}'", k.trim()));
        match k.trim() {
            "name" => meta.name = v.to_string(),
            "seqLength" => meta.frame_count = v.parse().map_err(|_| bad())?,
            "frameRate" => meta.fps = v.parse().map_err(|_| bad())?,
            "imWidth" => meta.width = v.parse().map_err(|_| bad())?,
            "imHeight" => meta.height = v.parse().map_err(|_| bad())?,
            _ => {}
        }
    }
    if meta.frame_count == 0 {
        return Err(parse_err(path, 0, "seqLength must be >= 1"));
    }
    Ok(meta)
}
