//! Constant-velocity Kalman filter over a box state extended with a confidence channel.
//!
//! State layout: `(xc, yc, w, h, c, vxc, vyc, vw, vh, vc)`; measurement layout:
//! `(xc, yc, w, h, c)`. One step is one frame. Process and measurement noise are
//! diagonal and scale with the current width, height and confidence estimates.

use nalgebra::{Matrix2, Matrix5, SMatrix, SVector, Vector2, Vector5};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Result, TrackError};
use crate::geometry::BBox;

pub const STATE_DIM: usize = 10;
pub const MEAS_DIM: usize = 5;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type StateCovariance = SMatrix<f64, STATE_DIM, STATE_DIM>;
type Gain = SMatrix<f64, STATE_DIM, MEAS_DIM>;

/// Noise std floor; keeps zero-sized boxes or zero confidence from producing
/// zero-variance channels.
pub const MIN_NOISE_STD: f64 = 1e-3;

/// Lower bound on the NSA measurement-noise scale `1 - score`.
pub const NSA_MIN_SCALE: f64 = 1e-6;

const IDX_VW: usize = 7;
const IDX_VH: usize = 8;
const IDX_VC: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct KfState {
    pub mean: StateVector,
    pub covariance: StateCovariance,
}

impl KfState {
    /// Projected box of the current mean. Negative sizes clamp to zero.
    pub fn bbox(&self) -> BBox {
        BBox::from_center(self.mean[0], self.mean[1], self.mean[2], self.mean[3])
    }

    pub fn confidence(&self) -> f64 {
        self.mean[4]
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (self.covariance - self.covariance.transpose()).amax() <= tol
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (self.covariance + self.covariance.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }

    pub fn is_finite(&self) -> bool {
        self.mean.iter().all(|v| v.is_finite()) && self.covariance.iter().all(|v| v.is_finite())
    }

    /// Warps the position and velocity by a global camera-motion transform.
    ///
    /// Size, confidence and their rates are left untouched. The `(xc, yc)` and
    /// `(vxc, vyc)` covariance blocks, including their cross terms, are conjugated
    /// by the linear part.
    pub fn apply_affine(&self, warp: &Affine2x3) -> Result<KfState> {
        let det = warp.linear.determinant();
        if !det.is_finite() || det.abs() < 1e-12 {
            return Err(TrackError::InvalidWarp(det));
        }
        let mut t = StateCovariance::identity();
        t.fixed_view_mut::<2, 2>(0, 0).copy_from(&warp.linear);
        t.fixed_view_mut::<2, 2>(5, 5).copy_from(&warp.linear);

        let mut mean = self.mean;
        let pos = warp.linear * Vector2::new(mean[0], mean[1]) + warp.translation;
        let vel = warp.linear * Vector2::new(mean[5], mean[6]);
        mean[0] = pos.x;
        mean[1] = pos.y;
        mean[5] = vel.x;
        mean[6] = vel.y;

        let covariance = symmetrize(t * self.covariance * t.transpose());
        Ok(KfState { mean, covariance })
    }
}

/// Detection observation: box center, size and detector score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement(pub Vector5<f64>);

impl Measurement {
    pub fn new(xc: f64, yc: f64, w: f64, h: f64, c: f64) -> Self {
        Measurement(Vector5::new(xc, yc, w, h, c))
    }

    pub fn from_bbox(bbox: &BBox, score: f64) -> Self {
        let (xc, yc) = bbox.center();
        Measurement::new(xc, yc, bbox.width(), bbox.height(), score)
    }

    pub fn score(&self) -> f64 {
        self.0[4]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseFactors {
    pub position: f64,
    pub velocity: f64,
    pub measurement: f64,
}

impl Default for NoiseFactors {
    fn default() -> Self {
        NoiseFactors {
            position: 0.05,
            velocity: 0.00625,
            measurement: 0.05,
        }
    }
}

impl NoiseFactors {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma-p", self.position),
            ("sigma-v", self.velocity),
            ("sigma-m", self.measurement),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(TrackError::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Which size/confidence rates are zeroed before each prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preserve {
    pub width: bool,
    pub height: bool,
    pub confidence: bool,
}

impl Preserve {
    pub const ALL: Preserve = Preserve {
        width: true,
        height: true,
        confidence: true,
    };
    pub const NONE: Preserve = Preserve {
        width: false,
        height: false,
        confidence: false,
    };
}

impl Default for Preserve {
    fn default() -> Self {
        Preserve::ALL
    }
}

/// 2x3 affine image warp `p' = M p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine2x3 {
    pub linear: Matrix2<f64>,
    pub translation: Vector2<f64>,
}

impl Affine2x3 {
    pub fn identity() -> Self {
        Affine2x3 {
            linear: Matrix2::identity(),
            translation: Vector2::zeros(),
        }
    }

    /// Row-major `[a11 a12 a13 a21 a22 a23]`.
    pub fn from_row_major(a: [f64; 6]) -> Self {
        Affine2x3 {
            linear: Matrix2::new(a[0], a[1], a[3], a[4]),
            translation: Vector2::new(a[2], a[5]),
        }
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Affine2x3 {
            linear: Matrix2::identity(),
            translation: Vector2::new(dx, dy),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.linear == Matrix2::identity() && self.translation == Vector2::zeros()
    }
}

impl Default for Affine2x3 {
    fn default() -> Self {
        Self::identity()
    }
}

/// The filter itself is stateless apart from its noise configuration; per-track
/// state lives in [`KfState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanFilter {
    pub factors: NoiseFactors,
    /// Scale measurement noise by `1 - score` during update.
    pub nsa: bool,
}

impl Default for KalmanFilter {
    fn default() -> Self {
        KalmanFilter::new(NoiseFactors::default())
    }
}

fn std_of(factor: f64, magnitude: f64) -> f64 {
    (factor * magnitude.abs()).max(MIN_NOISE_STD)
}

fn symmetrize<const N: usize>(m: SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (m + m.transpose()) * 0.5
}

impl KalmanFilter {
    pub fn new(factors: NoiseFactors) -> Self {
        KalmanFilter {
            factors,
            nsa: false,
        }
    }

    pub fn with_nsa(mut self, nsa: bool) -> Self {
        self.nsa = nsa;
        self
    }

    /// New track from its first detection: zero rates, diagonal covariance.
    pub fn initiate(&self, z: &Measurement) -> KfState {
        let z = z.0;
        let mut mean = StateVector::zeros();
        mean.fixed_rows_mut::<MEAS_DIM>(0).copy_from(&z);

        let (w, h, c) = (z[2], z[3], z[4]);
        let p = 2.0 * self.factors.measurement;
        let v = 10.0 * self.factors.velocity;
        let std = [
            std_of(p, w),
            std_of(p, h),
            std_of(p, w),
            std_of(p, h),
            std_of(p, c),
            std_of(v, w),
            std_of(v, h),
            std_of(v, w),
            std_of(v, h),
            std_of(v, c),
        ];
        let covariance =
            StateCovariance::from_diagonal(&StateVector::from_fn(|i, _| std[i] * std[i]));
        KfState { mean, covariance }
    }

    /// Process noise built from the prior width, height and confidence.
    pub fn process_noise(&self, state: &KfState) -> StateCovariance {
        let (w, h, c) = (state.mean[2], state.mean[3], state.mean[4]);
        let p = self.factors.position;
        let v = self.factors.velocity;
        let std = [
            std_of(p, w),
            std_of(p, h),
            std_of(p, w),
            std_of(p, h),
            std_of(p, c),
            std_of(v, w),
            std_of(v, h),
            std_of(v, w),
            std_of(v, h),
            std_of(v, c),
        ];
        StateCovariance::from_diagonal(&StateVector::from_fn(|i, _| std[i] * std[i]))
    }

    /// Measurement noise built from the predicted width, height and confidence.
    pub fn measurement_noise(&self, state: &KfState) -> Matrix5<f64> {
        let (w, h, c) = (state.mean[2], state.mean[3], state.mean[4]);
        let m = self.factors.measurement;
        let std = [
            std_of(m, w),
            std_of(m, h),
            std_of(m, w),
            std_of(m, h),
            std_of(m, c),
        ];
        Matrix5::from_diagonal(&Vector5::from_fn(|i, _| std[i] * std[i]))
    }

    /// One-frame prediction. Preserved rates are zeroed before the transition.
    pub fn predict(&self, state: &KfState, preserve: Preserve) -> KfState {
        let q = self.process_noise(state);
        let mut mean = state.mean;
        if preserve.width {
            mean[IDX_VW] = 0.0;
        }
        if preserve.height {
            mean[IDX_VH] = 0.0;
        }
        if preserve.confidence {
            mean[IDX_VC] = 0.0;
        }
        let f = transition();
        KfState {
            mean: f * mean,
            covariance: symmetrize(f * state.covariance * f.transpose() + q),
        }
    }

    /// Mean and covariance in measurement space.
    pub fn project(&self, state: &KfState) -> (Vector5<f64>, Matrix5<f64>) {
        let r = self.measurement_noise(state);
        let mean = state.mean.fixed_rows::<MEAS_DIM>(0).into_owned();
        let cov = state
            .covariance
            .fixed_view::<MEAS_DIM, MEAS_DIM>(0, 0)
            .into_owned()
            + r;
        (mean, symmetrize(cov))
    }

    /// Kalman correction with the Joseph-form covariance update.
    pub fn update(&self, state: &KfState, z: &Measurement) -> Result<KfState> {
        let mut r = self.measurement_noise(state);
        if self.nsa {
            r = nsa_measurement_noise(&r, z.score());
        }
        let p = &state.covariance;
        let ph_t: Gain = p.fixed_view::<STATE_DIM, MEAS_DIM>(0, 0).into_owned();
        let s = symmetrize(p.fixed_view::<MEAS_DIM, MEAS_DIM>(0, 0).into_owned() + r);
        let chol = s.cholesky().ok_or_else(|| {
            TrackError::FilterDivergence("innovation covariance is not positive definite".into())
        })?;
        // K = P H^T S^-1, solved as S K^T = H P
        let gain: Gain = chol.solve(&ph_t.transpose()).transpose();

        let innovation = z.0 - state.mean.fixed_rows::<MEAS_DIM>(0);
        let mean = state.mean + gain * innovation;

        let mut i_kh = StateCovariance::identity();
        {
            let mut block = i_kh.fixed_view_mut::<STATE_DIM, MEAS_DIM>(0, 0);
            block -= gain;
        }
        let covariance = symmetrize(i_kh * p * i_kh.transpose() + gain * r * gain.transpose());
        let out = KfState { mean, covariance };
        if !out.is_finite() {
            return Err(TrackError::FilterDivergence("non-finite posterior".into()));
        }
        Ok(out)
    }

    /// Squared Mahalanobis distances on the box center only (2 degrees of freedom).
    pub fn gating_distance(&self, state: &KfState, dets: &[Measurement]) -> Result<Vec<f64>> {
        let (mean, cov) = self.project(state);
        let s2: Matrix2<f64> = cov.fixed_view::<2, 2>(0, 0).into_owned();
        let chol = s2.cholesky().ok_or_else(|| {
            TrackError::FilterDivergence("center covariance is not positive definite".into())
        })?;
        Ok(dets
            .iter()
            .map(|z| {
                let d = Vector2::new(z.0[0] - mean[0], z.0[1] - mean[1]);
                let y = chol.l().solve_lower_triangular(&d).unwrap_or(d);
                y.norm_squared()
            })
            .collect())
    }
}

fn transition() -> StateCovariance {
    let mut f = StateCovariance::identity();
    for i in 0..MEAS_DIM {
        f[(i, i + MEAS_DIM)] = 1.0;
    }
    f
}

/// Inverse chi-square CDF, the squared-Mahalanobis gate for `dof` dimensions.
pub fn chi2_gate_threshold(dof: u32, quantile: f64) -> Result<f64> {
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(TrackError::Config(format!(
            "chi-square quantile must be in (0, 1), got {quantile}"
        )));
    }
    let dist = ChiSquared::new(f64::from(dof))
        .map_err(|e| TrackError::Config(format!("chi-square dof {dof}: {e}")))?;
    Ok(dist.inverse_cdf(quantile))
}

/// Scales a diagonal measurement noise by `1 - score`, floored at [`NSA_MIN_SCALE`].
pub fn nsa_measurement_noise(r: &Matrix5<f64>, score: f64) -> Matrix5<f64> {
    let scale = (1.0 - score.clamp(0.0, 1.0)).max(NSA_MIN_SCALE);
    r * scale
}
