//! Trajectory nonlinearity analysis: per-frame motion indicators from second
//! differences of box centers, video-level linear/nonlinear classification,
//! and dataset splitting.

use crate::geometry::BoundingBox;
use crate::par;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NonlinError {
    #[error("trajectory must contain at least one present box")]
    EmptyTrajectory,
    #[error("image size must be positive and finite, got {0}x{1}")]
    BadImageSize(f64, f64),
    #[error("video {id} has {labeled} labeled frames, need at least 4")]
    TooFewLabeledFrames { id: String, labeled: usize },
    #[error("invalid nonlinearity config: {0}")]
    BadConfig(String),
}

/// Per-frame ground-truth boxes for one sequence; `None` marks frames where
/// the target is invisible. Frame indices are implicit (vector positions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryAnnotation {
    pub id: String,
    /// (width, height) in pixels.
    pub image_size: (f64, f64),
    pub frames: Vec<Option<BoundingBox>>,
}

impl TrajectoryAnnotation {
    pub fn new(
        id: impl Into<String>,
        image_size: (f64, f64),
        frames: Vec<Option<BoundingBox>>,
    ) -> Result<Self, NonlinError> {
        let (w, h) = image_size;
        if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
            return Err(NonlinError::BadImageSize(w, h));
        }
        if !frames.iter().any(|f| f.is_some()) {
            return Err(NonlinError::EmptyTrajectory);
        }
        Ok(Self {
            id: id.into(),
            image_size,
            frames,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn get(&self, t: usize) -> Option<&BoundingBox> {
        self.frames.get(t).and_then(|f| f.as_ref())
    }
}

/// Thresholds for the three motion indicators and the video-level rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NonlinConfig {
    /// pixels/frame^2
    pub accel_mag_thresh: f64,
    /// radians/frame, compared against the wrapped deviation in [0, pi]
    pub angle_dev_thresh: f64,
    /// pixels/frame^3
    pub jerk_thresh: f64,
    /// a video is nonlinear when MORE than this fraction of labeled frames is
    pub video_frac_thresh: f64,
}

impl Default for NonlinConfig {
    fn default() -> Self {
        Self {
            accel_mag_thresh: 20.0,
            angle_dev_thresh: 3.0,
            jerk_thresh: 20.0,
            video_frac_thresh: 0.45,
        }
    }
}

impl NonlinConfig {
    pub fn validate(&self) -> Result<(), NonlinError> {
        if self.accel_mag_thresh <= 0.0 || self.angle_dev_thresh <= 0.0 || self.jerk_thresh <= 0.0
        {
            return Err(NonlinError::BadConfig(
                "indicator thresholds must be positive".into(),
            ));
        }
        if !(self.video_frac_thresh > 0.0 && self.video_frac_thresh < 1.0) {
            return Err(NonlinError::BadConfig(
                "video fraction threshold must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Indicators for one labeled frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameIndicators {
    pub accel_magnitude: f64,
    pub angle_deviation: f64,
    pub jerk: f64,
    pub nonlinear: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VideoLabel {
    Linear,
    Nonlinear,
}

fn center(b: &BoundingBox) -> (f64, f64) {
    (b.cx, b.cy)
}

fn accel_at(traj: &TrajectoryAnnotation, t: usize) -> Option<(f64, f64)> {
    if t < 2 {
        return None;
    }
    let c0 = center(traj.get(t - 2)?);
    let c1 = center(traj.get(t - 1)?);
    let c2 = center(traj.get(t)?);
    Some((c2.0 - 2.0 * c1.0 + c0.0, c2.1 - 2.0 * c1.1 + c0.1))
}

const ANGLE_EPS: f64 = 1e-6;

/// Classify one frame. `None` when the frame lacks two present predecessors
/// (gap-adjacent frames stay unlabeled rather than zero-filled).
///
/// Acceleration is the second difference of box centers. The angle deviation
/// and jerk compare against the previous frame's acceleration and are 0 when
/// that needs a missing fourth frame or when either acceleration magnitude
/// falls below 1e-6.
pub fn frame_nonlinearity(
    traj: &TrajectoryAnnotation,
    t: usize,
    cfg: &NonlinConfig,
) -> Option<FrameIndicators> {
    let a = accel_at(traj, t)?;
    let accel_magnitude = (a.0 * a.0 + a.1 * a.1).sqrt();
    let (angle_deviation, jerk) = match t.checked_sub(1).and_then(|p| accel_at(traj, p)) {
        Some(prev) => {
            let prev_mag = (prev.0 * prev.0 + prev.1 * prev.1).sqrt();
            let angle = if accel_magnitude < ANGLE_EPS || prev_mag < ANGLE_EPS {
                0.0
            } else {
                let mut d = (a.1.atan2(a.0) - prev.1.atan2(prev.0)).abs();
                if d > std::f64::consts::PI {
                    d = 2.0 * std::f64::consts::PI - d;
                }
                d
            };
            let j = ((a.0 - prev.0).powi(2) + (a.1 - prev.1).powi(2)).sqrt();
            (angle, j)
        }
        None => (0.0, 0.0),
    };
    let nonlinear = accel_magnitude > cfg.accel_mag_thresh
        || angle_deviation > cfg.angle_dev_thresh
        || jerk > cfg.jerk_thresh;
    Some(FrameIndicators {
        accel_magnitude,
        angle_deviation,
        jerk,
        nonlinear,
    })
}

fn labeled_counts(traj: &TrajectoryAnnotation, cfg: &NonlinConfig) -> (usize, usize) {
    let mut labeled = 0;
    let mut nonlinear = 0;
    for t in 0..traj.len() {
        if let Some(ind) = frame_nonlinearity(traj, t, cfg) {
            labeled += 1;
            nonlinear += ind.nonlinear as usize;
        }
    }
    (labeled, nonlinear)
}

/// Video-level label plus the fraction of labeled frames that are nonlinear.
/// Nonlinear requires the fraction to STRICTLY exceed the threshold.
pub fn classify_video(
    traj: &TrajectoryAnnotation,
    cfg: &NonlinConfig,
) -> Result<(VideoLabel, f64), NonlinError> {
    cfg.validate()?;
    let (labeled, nonlinear) = labeled_counts(traj, cfg);
    if labeled < 4 {
        return Err(NonlinError::TooFewLabeledFrames {
            id: traj.id.clone(),
            labeled,
        });
    }
    let fraction = nonlinear as f64 / labeled as f64;
    let label = if fraction > cfg.video_frac_thresh {
        VideoLabel::Nonlinear
    } else {
        VideoLabel::Linear
    };
    Ok((label, fraction))
}

/// Partition sequence ids into (linear, nonlinear). Videos with fewer than 4
/// labeled frames carry no usable motion evidence and land in the linear
/// split. Order of ids follows the input.
pub fn split_dataset(
    trajs: &[TrajectoryAnnotation],
    cfg: &NonlinConfig,
) -> Result<(Vec<String>, Vec<String>), NonlinError> {
    cfg.validate()?;
    let labels = par::map_collect(trajs, |traj| {
        let (labeled, nonlinear) = labeled_counts(traj, cfg);
        let frac = if labeled == 0 {
            0.0
        } else {
            nonlinear as f64 / labeled as f64
        };
        labeled >= 4 && frac > cfg.video_frac_thresh
    });
    let mut linear = Vec::new();
    let mut nonlin = Vec::new();
    for (traj, is_nonlinear) in trajs.iter().zip(labels) {
        if is_nonlinear {
            nonlin.push(traj.id.clone());
        } else {
            linear.push(traj.id.clone());
        }
    }
    Ok((linear, nonlin))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj_from_centers(id: &str, centers: &[Option<(f64, f64)>]) -> TrajectoryAnnotation {
        let frames = centers
            .iter()
            .map(|c| c.map(|(x, y)| BoundingBox::of(x, y, 10.0, 10.0)))
            .collect();
        TrajectoryAnnotation::new(id, (512.0, 512.0), frames).unwrap()
    }

    fn linear_track(n: usize, v: (f64, f64)) -> TrajectoryAnnotation {
        let centers: Vec<_> = (0..n)
            .map(|t| Some((50.0 + v.0 * t as f64, 60.0 + v.1 * t as f64)))
            .collect();
        traj_from_centers("linear", &centers)
    }

    fn zigzag_track(n: usize, speed: f64) -> TrajectoryAnnotation {
        // Alternates position between 0 and `speed` every frame.
        let centers: Vec<_> = (0..n)
            .map(|t| Some((100.0 + if t % 2 == 0 { 0.0 } else { speed }, 80.0)))
            .collect();
        traj_from_centers("zigzag", &centers)
    }

    #[test]
    fn constant_velocity_is_all_linear() {
        let traj = linear_track(20, (3.0, -2.0));
        let cfg = NonlinConfig::default();
        for t in 2..traj.len() {
            let ind = frame_nonlinearity(&traj, t, &cfg).unwrap();
            assert!(ind.accel_magnitude < 1e-9);
            assert_eq!(ind.angle_deviation, 0.0);
            assert!(!ind.nonlinear);
        }
        let (label, frac) = classify_video(&traj, &cfg).unwrap();
        assert_eq!(label, VideoLabel::Linear);
        assert_eq!(frac, 0.0);
    }

    #[test]
    fn reversal_at_speed_15_exceeds_accel_threshold() {
        // x: 0, 15, 30, 15, 0 — the second difference at the turn is twice
        // the per-frame velocity.
        let traj = traj_from_centers(
            "reversal",
            &[
                Some((0.0, 50.0)),
                Some((15.0, 50.0)),
                Some((30.0, 50.0)),
                Some((15.0, 50.0)),
                Some((0.0, 50.0)),
            ],
        );
        let cfg = NonlinConfig::default();
        let ind = frame_nonlinearity(&traj, 3, &cfg).unwrap();
        assert!((ind.accel_magnitude - 30.0).abs() < 1e-12);
        assert!(ind.nonlinear);
        assert!(!frame_nonlinearity(&traj, 2, &cfg).unwrap().nonlinear);
    }

    #[test]
    fn gap_inside_window_leaves_frame_unlabeled() {
        let traj = traj_from_centers(
            "gap",
            &[
                Some((0.0, 0.0)),
                Some((5.0, 0.0)),
                None,
                Some((15.0, 0.0)),
                Some((20.0, 0.0)),
                Some((25.0, 0.0)),
            ],
        );
        let cfg = NonlinConfig::default();
        assert!(frame_nonlinearity(&traj, 2, &cfg).is_none());
        assert!(frame_nonlinearity(&traj, 3, &cfg).is_none());
        assert!(frame_nonlinearity(&traj, 4, &cfg).is_none());
        assert!(frame_nonlinearity(&traj, 5, &cfg).is_some());
    }

    #[test]
    fn zigzag_is_nonlinear_with_fraction_near_one() {
        let traj = zigzag_track(30, 15.0);
        let cfg = NonlinConfig::default();
        let (label, frac) = classify_video(&traj, &cfg).unwrap();
        assert_eq!(label, VideoLabel::Nonlinear);
        assert!(frac > 0.9, "fraction {frac}");
    }

    #[test]
    fn boundary_fraction_is_linear_under_strict_rule() {
        // 22 frames -> 20 labeled. Choose the second differences directly:
        // a block of nine a=25 frames (nonlinear), a 12-px taper frame so the
        // following jerk stays under 20, zeros elsewhere. Exactly 9/20 = 0.45.
        let mut accel = vec![0.0; 22];
        for a in accel.iter_mut().take(14).skip(5) {
            *a = 25.0;
        }
        accel[14] = 12.0;
        let mut xs = vec![0.0f64, 4.0];
        for t in 2..22 {
            xs.push(2.0 * xs[t - 1] - xs[t - 2] + accel[t]);
        }
        let centers: Vec<_> = xs.iter().map(|x| Some((*x, 0.0))).collect();
        let traj = traj_from_centers("boundary", &centers);
        let cfg = NonlinConfig::default();
        let (labeled, nonlinear) = super::labeled_counts(&traj, &cfg);
        assert_eq!(labeled, 20);
        assert_eq!(nonlinear, 9);
        let (label, frac) = classify_video(&traj, &cfg).unwrap();
        assert_eq!(frac, 0.45);
        assert_eq!(label, VideoLabel::Linear);
    }

    #[test]
    fn translation_invariance() {
        let traj = zigzag_track(20, 12.0);
        let shifted = TrajectoryAnnotation::new(
            "shifted",
            traj.image_size,
            traj.frames
                .iter()
                .map(|f| f.map(|b| BoundingBox::of(b.cx + 37.0, b.cy - 11.0, b.w, b.h)))
                .collect(),
        )
        .unwrap();
        let cfg = NonlinConfig::default();
        for t in 0..traj.len() {
            let a = frame_nonlinearity(&traj, t, &cfg);
            let b = frame_nonlinearity(&shifted, t, &cfg);
            match (a, b) {
                (Some(x), Some(y)) => {
                    assert!((x.accel_magnitude - y.accel_magnitude).abs() < 1e-9);
                    assert!((x.angle_deviation - y.angle_deviation).abs() < 1e-9);
                    assert!((x.jerk - y.jerk).abs() < 1e-9);
                }
                (None, None) => {}
                _ => panic!("labeling disagrees at frame {t}"),
            }
        }
    }

    #[test]
    fn frame_label_locality_under_splicing() {
        // A frame's label only sees frames t-3..t, so splicing a different
        // future leaves it unchanged.
        let a = zigzag_track(12, 15.0);
        let mut frames = a.frames.clone();
        for f in frames.iter_mut().skip(8) {
            *f = Some(BoundingBox::of(400.0, 400.0, 10.0, 10.0));
        }
        let b = TrajectoryAnnotation::new("spliced", a.image_size, frames).unwrap();
        let cfg = NonlinConfig::default();
        for t in 0..8 {
            assert_eq!(
                frame_nonlinearity(&a, t, &cfg).map(|i| i.nonlinear),
                frame_nonlinearity(&b, t, &cfg).map(|i| i.nonlinear),
                "frame {t}"
            );
        }
    }

    #[test]
    fn split_mixed_corpus() {
        let mut corpus: Vec<TrajectoryAnnotation> = (0..10)
            .map(|i| {
                let mut t = linear_track(25, (2.0 + i as f64 * 0.3, 1.0));
                t.id = format!("lin{i}");
                t
            })
            .collect();
        for i in 0..3 {
            let mut t = zigzag_track(25, 14.0 + i as f64);
            t.id = format!("nl{i}");
            corpus.push(t);
        }
        let (linear, nonlinear) = split_dataset(&corpus, &NonlinConfig::default()).unwrap();
        assert_eq!(linear.len(), 10);
        assert_eq!(nonlinear.len(), 3);
        assert!(nonlinear.iter().all(|id| id.starts_with("nl")));
    }

    #[test]
    fn split_edge_cases() {
        let cfg = NonlinConfig::default();
        let (l, n) = split_dataset(&[], &cfg).unwrap();
        assert!(l.is_empty() && n.is_empty());
        let single = vec![linear_track(10, (1.0, 0.0))];
        let (l, n) = split_dataset(&single, &cfg).unwrap();
        assert_eq!(l.len() + n.len(), 1);
    }

    #[test]
    fn short_video_classification_errors() {
        let traj = linear_track(4, (1.0, 0.0)); // only 2 labeled frames
        assert!(matches!(
            classify_video(&traj, &NonlinConfig::default()),
            Err(NonlinError::TooFewLabeledFrames { .. })
        ));
    }
}
