//! CLEAR-MOT accuracy and identity-level (IDF1) scores.
//!
//! A ground-truth box and a predicted box can match when their IoU is at least
//! the match threshold (0.5 by default).

use std::collections::BTreeMap;

use crate::assignment::solve_unordered;
use crate::geometry::{iou, BBox, CostMatrix, FORBIDDEN};
use crate::mot_io::GtRecord;
use crate::tracker::FrameOutput;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledBox {
    pub id: u64,
    pub bbox: BBox,
}

/// Identity-labelled boxes keyed by zero-based frame.
pub type FrameBoxes = BTreeMap<usize, Vec<LabeledBox>>;

pub fn gt_boxes(gt: &BTreeMap<usize, Vec<GtRecord>>) -> FrameBoxes {
    gt.iter()
        .map(|(&f, recs)| {
            (
                f,
                recs.iter()
                    .map(|r| LabeledBox {
                        id: r.id,
                        bbox: r.bbox,
                    })
                    .collect(),
            )
        })
        .collect()
}

pub fn predicted_boxes(outputs: &[FrameOutput]) -> FrameBoxes {
    outputs
        .iter()
        .filter(|o| !o.records.is_empty())
        .map(|o| {
            (
                o.frame,
                o.records
                    .iter()
                    .map(|r| LabeledBox {
                        id: r.track_id,
                        bbox: r.bbox,
                    })
                    .collect(),
            )
        })
        .collect()
}

/// Keeps only frames inside `[first, last]`.
pub fn restrict_frames(boxes: &FrameBoxes, first: usize, last: usize) -> FrameBoxes {
    boxes
        .range(first..=last)
        .map(|(&f, v)| (f, v.clone()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotaReport {
    /// `None` when there is no ground truth to normalise by.
    pub mota: Option<f64>,
    pub fp: usize,
    pub fn_: usize,
    pub idsw: usize,
    pub matches: usize,
    pub gt_total: usize,
}

impl MotaReport {
    fn finish(mut self) -> Self {
        self.mota = (self.gt_total > 0)
            .then(|| 1.0 - (self.fp + self.fn_ + self.idsw) as f64 / self.gt_total as f64);
        self
    }

    /// Sums counts over sequences and recomputes the ratio.
    pub fn merge(&self, other: &MotaReport) -> MotaReport {
        MotaReport {
            mota: None,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            idsw: self.idsw + other.idsw,
            matches: self.matches + other.matches,
            gt_total: self.gt_total + other.gt_total,
        }
        .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Idf1Report {
    /// Zero when both sides are empty.
    pub idf1: f64,
    pub idp: f64,
    pub idr: f64,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

impl Idf1Report {
    fn from_counts(idtp: usize, idfp: usize, idfn: usize) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        Idf1Report {
            idf1: ratio(2 * idtp, 2 * idtp + idfp + idfn),
            idp: ratio(idtp, idtp + idfp),
            idr: ratio(idtp, idtp + idfn),
            idtp,
            idfp,
            idfn,
        }
    }

    pub fn merge(&self, other: &Idf1Report) -> Idf1Report {
        Idf1Report::from_counts(
            self.idtp + other.idtp,
            self.idfp + other.idfp,
            self.idfn + other.idfn,
        )
    }
}

/// Per-frame matching with persistent correspondences.
///
/// A ground-truth identity keeps last frame's partner when that prediction is
/// still present and within threshold; everything else is matched by minimum
/// IoU distance. An identity switch is counted whenever a ground-truth identity
/// is matched to a prediction id other than the one it was last matched to.
pub fn clear_mot(gt: &FrameBoxes, preds: &FrameBoxes, iou_threshold: f64) -> MotaReport {
    let mut report = MotaReport::default();
    let mut last_match: BTreeMap<u64, u64> = BTreeMap::new();
    let empty = Vec::new();
    let frames: std::collections::BTreeSet<usize> =
        gt.keys().chain(preds.keys()).copied().collect();

    for f in frames {
        let g = gt.get(&f).unwrap_or(&empty);
        let p = preds.get(&f).unwrap_or(&empty);
        report.gt_total += g.len();

        let mut g_used = vec![false; g.len()];
        let mut p_used = vec![false; p.len()];
        let mut pairs: Vec<(usize, usize)> = Vec::new();

        for (gi, gb) in g.iter().enumerate() {
            let Some(&pid) = last_match.get(&gb.id) else {
                continue;
            };
            let hit = p.iter().enumerate().find(|(pj, pb)| {
                !p_used[*pj] && pb.id == pid && iou(&gb.bbox, &pb.bbox) >= iou_threshold
            });
            if let Some((pj, _)) = hit {
                g_used[gi] = true;
                p_used[pj] = true;
                pairs.push((gi, pj));
            }
        }

        let rows: Vec<usize> = (0..g.len()).filter(|&i| !g_used[i]).collect();
        let cols: Vec<usize> = (0..p.len()).filter(|&j| !p_used[j]).collect();
        let cost = CostMatrix::from_fn(rows.len(), cols.len(), |i, j| {
            let v = iou(&g[rows[i]].bbox, &p[cols[j]].bbox);
            if v >= iou_threshold {
                1.0 - v
            } else {
                FORBIDDEN
            }
        });
        for (i, j) in solve_unordered(&cost, f64::INFINITY).matches {
            let (gi, pj) = (rows[i], cols[j]);
            g_used[gi] = true;
            p_used[pj] = true;
            pairs.push((gi, pj));
        }

        for (gi, pj) in pairs {
            let (gid, pid) = (g[gi].id, p[pj].id);
            if let Some(prev) = last_match.insert(gid, pid) {
                if prev != pid {
                    report.idsw += 1;
                }
            }
            report.matches += 1;
        }
        report.fn_ += g_used.iter().filter(|u| !**u).count();
        report.fp += p_used.iter().filter(|u| !**u).count();
    }
    report.finish()
}

/// Identity-level precision/recall/F1 under the optimal one-to-one mapping of
/// ground-truth identities to predicted identities.
pub fn idf1(gt: &FrameBoxes, preds: &FrameBoxes, iou_threshold: f64) -> Idf1Report {
    let gt_total: usize = gt.values().map(Vec::len).sum();
    let pred_total: usize = preds.values().map(Vec::len).sum();

    let index = |boxes: &FrameBoxes| -> BTreeMap<u64, usize> {
        let ids: std::collections::BTreeSet<u64> = boxes.values().flatten().map(|b| b.id).collect();
        ids.into_iter().enumerate().map(|(i, id)| (id, i)).collect()
    };
    let g_idx = index(gt);
    let p_idx = index(preds);

    let mut overlap = vec![vec![0usize; p_idx.len()]; g_idx.len()];
    for (f, g) in gt {
        let Some(p) = preds.get(f) else { continue };
        for gb in g {
            for pb in p {
                if iou(&gb.bbox, &pb.bbox) >= iou_threshold {
                    overlap[g_idx[&gb.id]][p_idx[&pb.id]] += 1;
                }
            }
        }
    }

    let best = overlap.iter().flatten().copied().max().unwrap_or(0) as f64;
    let cost = CostMatrix::from_fn(g_idx.len(), p_idx.len(), |i, j| best - overlap[i][j] as f64);
    let idtp: usize = solve_unordered(&cost, f64::INFINITY)
        .matches
        .into_iter()
        .map(|(i, j)| overlap[i][j])
        .sum();
    Idf1Report::from_counts(idtp, pred_total - idtp, gt_total - idtp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceScore {
    pub sequence: String,
    pub mota: MotaReport,
    pub idf1: Idf1Report,
}

pub fn evaluate(
    sequence: &str,
    gt: &FrameBoxes,
    preds: &FrameBoxes,
    iou_threshold: f64,
) -> SequenceScore {
    SequenceScore {
        sequence: sequence.to_string(),
        mota: clear_mot(gt, preds, iou_threshold),
        idf1: idf1(gt, preds, iou_threshold),
    }
}

/// Count-level sum of several sequences.
pub fn aggregate(name: &str, scores: &[SequenceScore]) -> SequenceScore {
    let mut mota = MotaReport::default().finish();
    let mut id = Idf1Report::default();
    for s in scores {
        mota = mota.merge(&s.mota);
        id = id.merge(&s.idf1);
    }
    SequenceScore {
        sequence: name.to_string(),
        mota,
        idf1: id,
    }
}

pub const REPORT_HEADER: &str = "sequence,MOTA,IDF1,FP,FN,IDSW,IDTP,IDFP,IDFN";

/// One comma-separated row matching [`REPORT_HEADER`]; ratios as fractions with
/// six decimals, `nan` when undefined.
pub fn report_row(s: &SequenceScore) -> String {
    let mota = s
        .mota
        .mota
        .map_or_else(|| "nan".to_string(), |m| format!("{m:.6}"));
    format!(
        "{},{},{:.6},{},{},{},{},{},{}",
        s.sequence,
        mota,
        s.idf1.idf1,
        s.mota.fp,
        s.mota.fn_,
        s.mota.idsw,
        s.idf1.idtp,
        s.idf1.idfp,
        s.idf1.idfn
    )
}

pub fn format_report(scores: &[SequenceScore]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for s in scores {
        out.push_str(&report_row(s));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lb(id: u64, x: f64) -> LabeledBox {
        LabeledBox {
            id,
            bbox: BBox::from_tlwh(x, 0.0, 20.0, 40.0),
        }
    }

    fn two_tracks(frames: usize) -> FrameBoxes {
        (0..frames)
            .map(|f| (f, vec![lb(1, 0.0), lb(2, 100.0)]))
            .collect()
    }

    #[test]
    fn perfect_predictions() {
        let gt = two_tracks(10);
        let m = clear_mot(&gt, &gt, 0.5);
        assert_eq!(m.mota, Some(1.0));
        assert_eq!((m.fp, m.fn_, m.idsw), (0, 0, 0));
        assert_eq!(idf1(&gt, &gt, 0.5).idf1, 1.0);
    }

    #[test]
    fn swapped_ids_count_two_switches() {
        let gt = two_tracks(10);
        let preds: FrameBoxes = (0..10)
            .map(|f| {
                let (a, b) = if f < 5 { (10, 20) } else { (20, 10) };
                (f, vec![lb(a, 0.0), lb(b, 100.0)])
            })
            .collect();
        let m = clear_mot(&gt, &preds, 0.5);
        assert_eq!((m.fp, m.fn_, m.idsw, m.gt_total), (0, 0, 2, 20));
        assert!((m.mota.unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn empty_predictions() {
        let gt = two_tracks(3);
        let m = clear_mot(&gt, &FrameBoxes::new(), 0.5);
        assert_eq!(m.fn_, 6);
        assert_eq!(m.mota, Some(0.0));
        assert_eq!(idf1(&gt, &FrameBoxes::new(), 0.5).idf1, 0.0);
        assert_eq!(
            clear_mot(&FrameBoxes::new(), &FrameBoxes::new(), 0.5).mota,
            None
        );
    }

    #[test]
    fn half_covered_track() {
        let gt: FrameBoxes = (0..10).map(|f| (f, vec![lb(1, 0.0)])).collect();
        let preds: FrameBoxes = (0..10)
            .map(|f| (f, vec![lb(if f < 5 { 7 } else { 8 }, 0.0)]))
            .collect();
        let r = idf1(&gt, &preds, 0.5);
        assert_eq!((r.idtp, r.idfp, r.idfn), (5, 5, 5));
        assert!((r.idf1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn poor_overlap_counts_as_miss_and_false_positive() {
        let gt: FrameBoxes = [(0, vec![lb(1, 0.0)])].into();
        let preds: FrameBoxes = [(0, vec![lb(1, 15.0)])].into();
        let m = clear_mot(&gt, &preds, 0.5);
        assert_eq!((m.fp, m.fn_), (1, 1));
        assert_eq!(m.mota, Some(-1.0));
    }

    #[test]
    fn persistent_correspondence_beats_a_better_iou() {
        // gt 1 keeps prediction 5 while the overlap stays above threshold, even if
        // prediction 6 lines up better in the second frame
        let gt: FrameBoxes = [(0, vec![lb(1, 0.0)]), (1, vec![lb(1, 0.0)])].into();
        let preds: FrameBoxes = [(0, vec![lb(5, 0.0)]), (1, vec![lb(5, 3.0), lb(6, 0.0)])].into();
        let m = clear_mot(&gt, &preds, 0.5);
        assert_eq!((m.idsw, m.fp), (0, 1));
    }

    #[test]
    fn report_formatting_and_merge() {
        let gt = two_tracks(4);
        let s = evaluate("seq-a", &gt, &gt, 0.5);
        assert_eq!(report_row(&s), "seq-a,1.000000,1.000000,0,0,0,8,0,0");
        let empty = evaluate("seq-b", &gt, &FrameBoxes::new(), 0.5);
        let all = aggregate("OVERALL", &[s, empty]);
        assert_eq!(all.mota.gt_total, 16);
        assert!((all.mota.mota.unwrap() - 0.5).abs() < 1e-12);
        assert!((all.idf1.idf1 - 16.0 / 24.0).abs() < 1e-12);
        assert!(format_report(&[all]).starts_with(REPORT_HEADER));
    }

    fn arb_scene() -> impl Strategy<Value = (FrameBoxes, FrameBoxes)> {
        let frame = || proptest::collection::vec((1u64..6, 0u8..8), 0..5);
        (
            proptest::collection::vec(frame(), 1..8),
            proptest::collection::vec(frame(), 1..8),
        )
            .prop_map(|(g, p)| {
                let build = |v: Vec<Vec<(u64, u8)>>| -> FrameBoxes {
                    v.into_iter()
                        .enumerate()
                        .map(|(f, recs)| {
                            // unique ids and slots keep the per-frame matching unambiguous
                            let mut ids = std::collections::BTreeSet::new();
                            let mut slots = std::collections::BTreeSet::new();
                            let boxes = recs
                                .into_iter()
                                .filter(|(id, slot)| ids.insert(*id) && slots.insert(*slot))
                                .map(|(id, slot)| lb(id, slot as f64 * 12.0))
                                .collect();
                            (f, boxes)
                        })
                        .collect()
                };
                (build(g), build(p))
            })
    }

    proptest! {
        #[test]
        fn scores_invariant_under_relabelling((gt, preds) in arb_scene()) {
            let relabelled: FrameBoxes = preds
                .iter()
                .map(|(&f, v)| (f, v.iter().map(|b| LabeledBox { id: 1000 - b.id * 7, bbox: b.bbox }).collect()))
                .collect();
            prop_assert_eq!(clear_mot(&gt, &preds, 0.5), clear_mot(&gt, &relabelled, 0.5));
            prop_assert_eq!(idf1(&gt, &preds, 0.5), idf1(&gt, &relabelled, 0.5));
        }

        #[test]
        fn spurious_track_never_helps_idf1((gt, preds) in arb_scene()) {
            let base = idf1(&gt, &preds, 0.5);
            prop_assert!((0.0..=1.0).contains(&base.idf1));
            let mut more = preds.clone();
            more.entry(0).or_default().push(lb(99, 500.0));
            prop_assert!(idf1(&gt, &more, 0.5).idf1 <= base.idf1 + 1e-12);
        }
    }
}
