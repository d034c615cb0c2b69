//! Boxes, pairwise association costs and the cost matrix container.
//!
//! Every similarity here lives in `[0, 1]` and every distance is `1 - similarity`,
//! except the cosine distance which spans `[0, 2]`.

use std::fmt;
use std::ops::Index;

use crate::error::{Result, TrackError};

/// Axis-aligned box in pixel coordinates, stored as top-left / bottom-right corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    /// Builds a box from corners without validation.
    pub const fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        BBox { x1, y1, x2, y2 }
    }

    /// Builds a box from corners, rejecting inverted or non-finite input.
    pub fn try_new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let b = BBox { x1, y1, x2, y2 };
        if b.is_valid() {
            Ok(b)
        } else {
            Err(TrackError::Config(format!("invalid box {b}")))
        }
    }

    /// Top-left corner plus width and height, the on-disk MOT layout.
    pub fn from_tlwh(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox::new(x, y, x + w, y + h)
    }

    /// Center plus width and height, the Kalman measurement layout.
    /// Negative extents are clamped to zero.
    pub fn from_center(xc: f64, yc: f64, w: f64, h: f64) -> Self {
        let w = w.max(0.0);
        let h = h.max(0.0);
        BBox::new(xc - w / 2.0, yc - h / 2.0, xc + w / 2.0, yc + h / 2.0)
    }

    pub fn to_tlwh(&self) -> [f64; 4] {
        [self.x1, self.y1, self.width(), self.height()]
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn is_valid(&self) -> bool {
        [self.x1, self.y1, self.x2, self.y2]
            .iter()
            .all(|v| v.is_finite())
            && self.x2 >= self.x1
            && self.y2 >= self.y1
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        BBox::new(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.x1, self.y1, self.x2, self.y2)
    }
}

/// Area intersection-over-union. Two degenerate boxes (zero union) give 0.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Intersection-over-union of the vertical extents only.
///
/// Vertically disjoint boxes would give a negative ratio; it is clamped to 0.
pub fn hiou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.y2.min(b.y2) - a.y1.max(b.y1);
    let span = a.y2.max(b.y2) - a.y1.min(b.y1);
    if span <= 0.0 {
        return 0.0;
    }
    (inter / span).clamp(0.0, 1.0)
}

pub fn iou_distance(a: &BBox, b: &BBox) -> f64 {
    1.0 - iou(a, b)
}

pub fn hiou_distance(a: &BBox, b: &BBox) -> f64 {
    1.0 - hiou(a, b)
}

/// Absolute score difference. The tracklet estimate may drift outside `[0, 1]`
/// in the filter, so both inputs are clamped first.
pub fn confidence_distance(c_trk: f64, c_det: f64) -> f64 {
    (c_trk.clamp(0.0, 1.0) - c_det.clamp(0.0, 1.0)).abs()
}

/// `1 - cos(e, f)`, in `[0, 2]`.
pub fn cosine_distance(e: &[f64], f: &[f64]) -> Result<f64> {
    if e.len() != f.len() {
        return Err(TrackError::DimensionMismatch {
            expected: e.len(),
            found: f.len(),
        });
    }
    let ne = e.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nf = f.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(ne > 0.0 && nf > 0.0) || !ne.is_finite() || !nf.is_finite() {
        return Err(TrackError::InvalidEmbedding(
            "zero or non-finite norm".into(),
        ));
    }
    let dot: f64 = e.iter().zip(f).map(|(a, b)| a * b).sum();
    Ok((1.0 - dot / (ne * nf)).clamp(0.0, 2.0))
}

/// Marker for pairs that must never be matched.
pub const FORBIDDEN: f64 = f64::INFINITY;

/// Dense tracks x detections matrix of association distances.
///
/// Entries are finite and non-negative, or [`FORBIDDEN`].
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        CostMatrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CostMatrix { rows, cols, data }
    }

    pub fn try_from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Result<f64>,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j)?);
            }
        }
        Ok(CostMatrix { rows, cols, data })
    }

    /// Panics when rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        CostMatrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_forbidden(&self, i: usize, j: usize) -> bool {
        self.get(i, j) == FORBIDDEN
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn ensure_shape(&self, other: &CostMatrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(TrackError::ShapeMismatch {
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> CostMatrix {
        CostMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Keeps only the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> CostMatrix {
        CostMatrix::from_fn(rows.len(), self.cols, |i, j| self.get(rows[i], j))
    }

    /// True when every entry is FORBIDDEN or finite and non-negative.
    pub fn is_well_formed(&self) -> bool {
        self.data
            .iter()
            .all(|&v| v == FORBIDDEN || (v.is_finite() && v >= 0.0))
    }
}

impl Index<(usize, usize)> for CostMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    Iou,
    Hiou,
    Confidence,
    Cosine,
}

/// One side of a pairwise cost computation: boxes, scores and optional embeddings,
/// all index-aligned.
#[derive(Debug, Clone, Default)]
pub struct CueInputs<'a> {
    pub boxes: Vec<BBox>,
    pub scores: Vec<f64>,
    pub embeddings: Vec<Option<&'a [f64]>>,
}

impl<'a> CueInputs<'a> {
    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    fn check(&self, kind: CostKind) -> Result<()> {
        let n = self.boxes.len();
        let bad = match kind {
            CostKind::Iou | CostKind::Hiou => None,
            CostKind::Confidence => (self.scores.len() != n).then_some(self.scores.len()),
            CostKind::Cosine => (self.embeddings.len() != n).then_some(self.embeddings.len()),
        };
        match bad {
            Some(found) => Err(TrackError::DimensionMismatch { expected: n, found }),
            None => Ok(()),
        }
    }
}

/// Builds the `tracks x dets` distance matrix for one cue.
///
/// For the cosine cue, a pair where either side has no embedding gets the
/// neutral distance 1.0 (orthogonal).
pub fn build_cost_matrix(
    tracks: &CueInputs<'_>,
    dets: &CueInputs<'_>,
    kind: CostKind,
) -> Result<CostMatrix> {
    tracks.check(kind)?;
    dets.check(kind)?;
    let (n, m) = (tracks.len(), dets.len());
    match kind {
        CostKind::Iou => Ok(CostMatrix::from_fn(n, m, |i, j| {
            iou_distance(&tracks.boxes[i], &dets.boxes[j])
        })),
        CostKind::Hiou => Ok(CostMatrix::from_fn(n, m, |i, j| {
            hiou_distance(&tracks.boxes[i], &dets.boxes[j])
        })),
        CostKind::Confidence => Ok(CostMatrix::from_fn(n, m, |i, j| {
            confidence_distance(tracks.scores[i], dets.scores[j])
        })),
        CostKind::Cosine => CostMatrix::try_from_fn(n, m, |i, j| {
            match (tracks.embeddings[i], dets.embeddings[j]) {
                (Some(e), Some(f)) => cosine_distance(e, f),
                _ => Ok(1.0),
            }
        }),
    }
}
