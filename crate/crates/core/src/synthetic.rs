//! Deterministic synthetic sequences for tests, demos and sweep smoke runs.
//!
//! Every generator is a pure function of its spec (including the seed), so the
//! files it writes are byte-stable.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::appearance::Embedding;
use crate::error::{Result, TrackError};
use crate::geometry::BBox;
use crate::kalman::Affine2x3;
use crate::mot_io::{self, DetectionsByFrame, EmbeddingStore, GtRecord};
use crate::tracker::{Detection, SequenceInput};

/// A constant-velocity object visible in `[first, last]` except during `hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectPath {
    pub id: u64,
    /// Top-left corner at frame 0 in world coordinates.
    pub start: (f64, f64),
    pub velocity: (f64, f64),
    pub size: (f64, f64),
    pub first: usize,
    pub last: usize,
    /// Frames where neither a detection nor a ground-truth box exists.
    pub hidden: Vec<usize>,
}

impl ObjectPath {
    pub fn world_box(&self, frame: usize) -> BBox {
        let t = frame as f64;
        BBox::from_tlwh(
            self.start.0 + self.velocity.0 * t,
            self.start.1 + self.velocity.1 * t,
            self.size.0,
            self.size.1,
        )
    }

    pub fn visible(&self, frame: usize) -> bool {
        (self.first..=self.last).contains(&frame) && !self.hidden.contains(&frame)
    }
}

/// Detector imperfections layered over the true boxes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clutter {
    /// Uniform half-range of per-coordinate box noise, pixels.
    pub jitter: f64,
    pub miss_rate: f64,
    /// Share of true detections reported with a low score in `[0.15, 0.55)`.
    pub low_score_rate: f64,
    /// Maximum false positives per frame; the actual count is uniform in `0..=max`.
    pub max_false_positives: usize,
    /// Camera pan in pixels per frame along x.
    pub pan: f64,
}

impl Clutter {
    pub const NONE: Clutter = Clutter {
        jitter: 0.0,
        miss_rate: 0.0,
        low_score_rate: 0.0,
        max_false_positives: 0,
        pan: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderSpec {
    pub frames: usize,
    pub image_size: (u32, u32),
    pub score: f64,
    pub embedding_dim: usize,
    /// Uniform half-range of per-component embedding noise.
    pub embedding_noise: f64,
    /// Detections scoring at least this carry an embedding.
    pub embedding_threshold: f64,
    pub clutter: Clutter,
    pub seed: u64,
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec {
            frames: 200,
            image_size: (1920, 1080),
            score: 0.9,
            embedding_dim: 32,
            embedding_noise: 0.02,
            embedding_threshold: 0.6,
            clutter: Clutter::NONE,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub frame_count: usize,
    pub image_size: (u32, u32),
    pub detections: DetectionsByFrame,
    pub embeddings: EmbeddingStore,
    pub warps: BTreeMap<usize, Affine2x3>,
    pub ground_truth: BTreeMap<usize, Vec<GtRecord>>,
}

fn unit_noise(rng: &mut ChaCha8Rng, half: f64) -> f64 {
    if half == 0.0 {
        0.0
    } else {
        rng.random_range(-half..half)
    }
}

/// Identity signature: a basis vector while ids fit the dimension, otherwise a
/// random direction drawn from the id.
fn signature(id: u64, dim: usize, seed: u64) -> Vec<f64> {
    let k = (id - 1) as usize;
    if k < dim {
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        return v;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ id.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn noisy_embedding(base: &[f64], rng: &mut ChaCha8Rng, half: f64) -> Embedding {
    let mut v: Vec<f64> = base.iter().map(|x| x + unit_noise(rng, half)).collect();
    if v.iter().all(|x| *x == 0.0) {
        v[0] = 1.0;
    }
    Embedding::new(v).expect("finite non-empty embedding")
}

/// Renders object paths into detection, embedding, warp and ground-truth tables.
pub fn render(name: &str, paths: &[ObjectPath], spec: &RenderSpec) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let c = spec.clutter;
    let signatures: BTreeMap<u64, Vec<f64>> = paths
        .iter()
        .map(|p| (p.id, signature(p.id, spec.embedding_dim, spec.seed)))
        .collect();

    let mut detections = DetectionsByFrame::new();
    let mut embeddings = EmbeddingStore {
        dim: Some(spec.embedding_dim),
        records: BTreeMap::new(),
    };
    let mut ground_truth: BTreeMap<usize, Vec<GtRecord>> = BTreeMap::new();
    let mut warps = BTreeMap::new();

    for frame in 0..spec.frames {
        let shift = -c.pan * frame as f64;
        if c.pan != 0.0 && frame > 0 {
            warps.insert(frame, Affine2x3::translation(-c.pan, 0.0));
        }
        let mut dets: Vec<(Detection, Option<Embedding>)> = Vec::new();
        for p in paths.iter().filter(|p| p.visible(frame)) {
            let truth = p.world_box(frame).translated(shift, 0.0);
            ground_truth.entry(frame).or_default().push(GtRecord {
                frame,
                id: p.id,
                bbox: truth,
                consider: true,
                class: 1,
                visibility: 1.0,
            });
            if c.miss_rate > 0.0 && rng.random::<f64>() < c.miss_rate {
                continue;
            }
            let [x, y, w, h] = truth.to_tlwh();
            let bbox = BBox::from_tlwh(
                x + unit_noise(&mut rng, c.jitter),
                y + unit_noise(&mut rng, c.jitter),
                (w + unit_noise(&mut rng, c.jitter)).max(1.0),
                (h + unit_noise(&mut rng, c.jitter)).max(1.0),
            );
            let score = if c.low_score_rate > 0.0 && rng.random::<f64>() < c.low_score_rate {
                rng.random_range(0.15..0.55)
            } else {
                spec.score
            };
            let emb = noisy_embedding(&signatures[&p.id], &mut rng, spec.embedding_noise);
            dets.push((Detection::new(frame, bbox, score), Some(emb)));
        }
        let n_fp = if c.max_false_positives > 0 {
            rng.random_range(0..=c.max_false_positives)
        } else {
            0
        };
        for _ in 0..n_fp {
            let (iw, ih) = (spec.image_size.0 as f64, spec.image_size.1 as f64);
            let bbox = BBox::from_tlwh(
                rng.random_range(0.0..iw - 60.0),
                rng.random_range(0.0..ih - 150.0),
                rng.random_range(20.0..60.0),
                rng.random_range(50.0..150.0),
            );
            let score = rng.random_range(0.1..0.5);
            dets.push((Detection::new(frame, bbox, score), None));
        }
        if dets.is_empty() {
            continue;
        }
        let list = detections.entry(frame).or_default();
        for (i, (det, emb)) in dets.into_iter().enumerate() {
            if det.score >= spec.embedding_threshold {
                let e = emb.unwrap_or_else(|| {
                    let base: Vec<f64> = (0..spec.embedding_dim)
                        .map(|_| rng.random_range(-1.0..1.0))
                        .collect();
                    noisy_embedding(&base, &mut rng, 0.0)
                });
                embeddings.records.insert((frame, i), e);
            }
            list.push(det);
        }
    }

    Scenario {
        name: name.to_string(),
        frame_count: spec.frames,
        image_size: spec.image_size,
        detections,
        embeddings,
        warps,
        ground_truth,
    }
}

/// `objects` horizontal movers in separate lanes, speeds up to `max_speed`.
/// Lanes are far enough apart that no two boxes ever overlap.
pub fn lanes(objects: usize, max_speed: f64, spec: &RenderSpec) -> Vec<ObjectPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(1));
    (0..objects)
        .map(|i| {
            let vx = rng.random_range(-max_speed..max_speed);
            ObjectPath {
                id: i as u64 + 1,
                start: (rng.random_range(600.0..1200.0), 40.0 + 140.0 * i as f64),
                velocity: (vx, rng.random_range(-0.05..0.05)),
                size: (rng.random_range(30.0..50.0), 100.0),
                first: 0,
                last: spec.frames.saturating_sub(1),
                hidden: Vec::new(),
            }
        })
        .collect()
}

/// Two objects of identical size on the same row that pass through each other
/// at mid-sequence. Both vanish for `gap` frames centred on the crossing.
pub fn crossing_pair(frames: usize, gap: usize) -> Vec<ObjectPath> {
    let mid = frames / 2;
    let hidden: Vec<usize> = (mid - gap / 2..mid - gap / 2 + gap).collect();
    let half = frames as f64 / 2.0;
    let speed = 2.0;
    let x0 = 400.0;
    let make = |id: u64, start: f64, v: f64| ObjectPath {
        id,
        start: (start, 300.0),
        velocity: (v, 0.0),
        size: (40.0, 100.0),
        first: 0,
        last: frames - 1,
        hidden: hidden.clone(),
    };
    vec![make(1, x0, speed), make(2, x0 + 2.0 * speed * half, -speed)]
}

/// Free 2-D movers with staggered births and deaths; paths may cross.
pub fn crowd(objects: usize, spec: &RenderSpec) -> Vec<ObjectPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(2));
    let (iw, ih) = (spec.image_size.0 as f64, spec.image_size.1 as f64);
    let n = spec.frames.max(1);
    (0..objects)
        .map(|i| {
            let first = rng.random_range(0..n.div_ceil(3));
            let last = rng.random_range((first + n / 3).min(n - 1)..n);
            ObjectPath {
                id: i as u64 + 1,
                start: (
                    rng.random_range(100.0..iw - 200.0),
                    rng.random_range(100.0..ih - 300.0),
                ),
                velocity: (rng.random_range(-3.0..3.0), rng.random_range(-1.0..1.0)),
                size: (rng.random_range(35.0..70.0), rng.random_range(90.0..180.0)),
                first,
                last,
                hidden: Vec::new(),
            }
        })
        .collect()
}

impl Scenario {
    /// Tracker input; embeddings are attached only when requested.
    pub fn sequence_input(&self, with_embeddings: bool) -> SequenceInput {
        let mut detections = self.detections.clone();
        if with_embeddings {
            for (&(frame, idx), e) in &self.embeddings.records {
                detections.get_mut(&frame).expect("embedding frame")[idx].embedding =
                    Some(e.clone());
            }
        }
        SequenceInput {
            detections,
            warps: self.warps.clone(),
            frame_count: Some(self.frame_count),
        }
    }

    /// Writes `<root>/<name>/` in the dataset layout the CLI discovers.
    pub fn write(&self, root: &Path) -> Result<PathBuf> {
        let dir = root.join(&self.name);
        let put = |rel: &str, text: String| -> Result<()> {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| TrackError::io(parent, e))?;
            }
            fs::write(&path, text).map_err(|e| TrackError::io(&path, e))
        };
        put("det/det.txt", mot_io::format_detections(&self.detections))?;
        put("emb.txt", mot_io::format_embeddings(&self.embeddings))?;
        put("gt/gt.txt", mot_io::format_ground_truth(&self.ground_truth))?;
        if !self.warps.is_empty() {
            put("warp.txt", mot_io::format_warps(&self.warps))?;
        }
        put(
            "seqinfo.ini",
            format!(
                "[Sequence]\nname={}\nseqLength={}\nframeRate=30\nimWidth={}\nimHeight={}\n",
                self.name, self.frame_count, self.image_size.0, self.image_size.1
            ),
        )?;
        Ok(dir)
    }
}

/// Named presets used by the `synth` subcommand.
pub fn preset(
    kind: &str,
    name: &str,
    seed: u64,
    frames: usize,
    objects: usize,
) -> Result<Scenario> {
    let mut spec = RenderSpec {
        frames,
        seed,
        ..RenderSpec::default()
    };
    let paths = match kind {
        "lanes" => lanes(objects, 5.0, &spec),
        "crossing" => crossing_pair(frames, 5),
        "crowd" => {
            spec.embedding_noise = 0.3;
            spec.clutter = Clutter {
                jitter: 2.0,
                miss_rate: 0.05,
                low_score_rate: 0.1,
                max_false_positives: 2,
                pan: 0.5,
            };
            crowd(objects, &spec)
        }
        other => {
            return Err(TrackError::Config(format!(
                "unknown scenario '{other}' (expected lanes, crossing or crowd)"
            )))
        }
    };
    if kind == "crossing" && frames < 20 {
        return Err(TrackError::Config(
            "crossing needs at least 20 frames".into(),
        ));
    }
    Ok(render(name, &paths, &spec))
}
