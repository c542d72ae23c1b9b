//! Hand landmarks and wrist-relative feature extraction.

use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Landmarks per hand; index 0 is the wrist.
pub const LANDMARK_COUNT: usize = 21;
/// Length of the flattened feature vector (wrist pair included).
pub const FEATURE_LEN: usize = 2 * LANDMARK_COUNT;

#[derive(Debug, Error, PartialEq)]
pub enum LandmarkError {
    #[error("expected {LANDMARK_COUNT} landmarks, got {0}")]
    PointCount(usize),
    #[error("landmark {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("expected {FEATURE_LEN} features, got {0}")]
    FeatureLen(usize),
    #[error("feature {0} is not finite")]
    NonFiniteFeature(usize),
}

/// One keypoint in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Landmark {
    pub x: f64,
    pub y: f64,
}

impl Landmark {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    Left,
    Right,
    #[default]
    Unknown,
}

/// One timestamped hand observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkFrame {
    pub timestamp_ms: u64,
    pub points: Vec<Landmark>,
    pub handedness: Handedness,
}

impl LandmarkFrame {
    pub fn new(timestamp_ms: u64, points: Vec<Landmark>) -> Result<Self, LandmarkError> {
        let frame = Self {
            timestamp_ms,
            points,
            handedness: Handedness::Unknown,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn validate(&self) -> Result<(), LandmarkError> {
        if self.points.len() != LANDMARK_COUNT {
            return Err(LandmarkError::PointCount(self.points.len()));
        }
        match self
            .points
            .iter()
            .position(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            Some(index) => Err(LandmarkError::NonFinite { index }),
            None => Ok(()),
        }
    }

    /// Shifts every point by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| Landmark::new(p.x + dx, p.y + dy))
                .collect(),
            ..self.clone()
        }
    }
}

/// The 42 classifier inputs: `(x̃0, ỹ0, ..., x̃20, ỹ20)` with the wrist pair first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector([f64; FEATURE_LEN]);

impl FeatureVector {
    pub fn zeros() -> Self {
        Self([0.0; FEATURE_LEN])
    }

    pub fn from_slice(values: &[f64]) -> Result<Self, LandmarkError> {
        let arr: [f64; FEATURE_LEN] = values
            .try_into()
            .map_err(|_| LandmarkError::FeatureLen(values.len()))?;
        if let Some(i) = arr.iter().position(|v| !v.is_finite()) {
            return Err(LandmarkError::NonFiniteFeature(i));
        }
        Ok(Self(arr))
    }

    pub fn as_array(&self) -> &[f64; FEATURE_LEN] {
        &self.0
    }

    /// Relative offset of landmark `i`.
    pub fn pair(&self, i: usize) -> (f64, f64) {
        (self.0[2 * i], self.0[2 * i + 1])
    }
}

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Optional post-processing of the wrist-relative features. The default is none.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureOptions {
    /// Divide every feature by the largest absolute feature (skipped when that is 0).
    pub max_abs_scaling: bool,
}

/// Subtracts the wrist from every landmark and flattens the result.
pub fn normalize_frame(frame: &LandmarkFrame) -> Result<FeatureVector, LandmarkError> {
    normalize_frame_with(frame, FeatureOptions::default())
}

pub fn normalize_frame_with(
    frame: &LandmarkFrame,
    options: FeatureOptions,
) -> Result<FeatureVector, LandmarkError> {
    frame.validate()?;
    let wrist = frame.points[0];
    let mut out = [0.0; FEATURE_LEN];
    for (i, p) in frame.points.iter().enumerate() {
        out[2 * i] = p.x - wrist.x;
        out[2 * i + 1] = p.y - wrist.y;
    }
    if options.max_abs_scaling {
        let m = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if m > 0.0 {
            out.iter_mut().for_each(|v| *v /= m);
        }
    }
    Ok(FeatureVector(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame_from(points: Vec<(f64, f64)>) -> LandmarkFrame {
        LandmarkFrame::new(0, points.into_iter().map(|(x, y)| Landmark::new(x, y)).collect())
            .unwrap()
    }

    #[test]
    fn all_points_on_wrist_gives_zeros() {
        let f = frame_from(vec![(0.3, 0.7); LANDMARK_COUNT]);
        assert_eq!(normalize_frame(&f).unwrap(), FeatureVector::zeros());
    }

    #[test]
    fn direct_subtraction() {
        let mut pts = vec![(0.5, 0.5); LANDMARK_COUNT];
        pts[8] = (0.7, 0.4);
        let fv = normalize_frame(&frame_from(pts)).unwrap();
        let (dx, dy) = fv.pair(8);
        assert!((dx - 0.2).abs() < 1e-15);
        assert!((dy + 0.1).abs() < 1e-15);
        assert_eq!(fv.pair(0), (0.0, 0.0));
    }

    #[test]
    fn rejects_malformed_frames() {
        let short = LandmarkFrame {
            timestamp_ms: 0,
            points: vec![Landmark::default(); 20],
            handedness: Handedness::Unknown,
        };
        assert_eq!(normalize_frame(&short), Err(LandmarkError::PointCount(20)));

        let mut pts = vec![Landmark::default(); LANDMARK_COUNT];
        pts[4].y = f64::NAN;
        let bad = LandmarkFrame {
            timestamp_ms: 0,
            points: pts,
            handedness: Handedness::Left,
        };
        assert_eq!(
            normalize_frame(&bad),
            Err(LandmarkError::NonFinite { index: 4 })
        );
    }

    #[test]
    fn max_abs_scaling_is_opt_in() {
        let mut pts = vec![(0.5, 0.5); LANDMARK_COUNT];
        pts[3] = (0.9, 0.5);
        pts[5] = (0.5, 0.3);
        let f = frame_from(pts);
        let plain = normalize_frame(&f).unwrap();
        assert!((plain.pair(3).0 - 0.4).abs() < 1e-12);
        let scaled = normalize_frame_with(&f, FeatureOptions { max_abs_scaling: true }).unwrap();
        assert_eq!(scaled.pair(3).0, 1.0);
        assert!((scaled.pair(5).1 + 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn wrist_pair_is_zero_and_translation_invariant(
            pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), LANDMARK_COUNT),
            // multiples of 1/64 shift every coordinate exactly
            sx in -32i32..32, sy in -32i32..32,
        ) {
            let f = frame_from(pts);
            let fv = normalize_frame(&f).unwrap();
            prop_assert_eq!(fv.pair(0), (0.0, 0.0));
            let g = f.translated(sx as f64 / 64.0, sy as f64 / 64.0);
            let gv = normalize_frame(&g).unwrap();
            for (a, b) in fv.iter().zip(gv.iter()) {
                let ulp = f64::EPSILON * a.abs().max(b.abs()).max(1.0);
                prop_assert!((a - b).abs() <= ulp, "{} vs {}", a, b);
            }
        }
    }
}
