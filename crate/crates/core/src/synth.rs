//! Synthetic landmark data drawn around eight fixed hand skeletons.
//!
//! The skeletons live in `assets/hand_templates_v1.txt`; bump the file name when
//! they change so stored datasets stay traceable.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::dataset::{Dataset, LabeledSample};
use crate::gesture::{GestureLabel, GESTURE_COUNT};
use crate::landmark::{normalize_frame, Landmark, LandmarkFrame, LANDMARK_COUNT};

pub const TEMPLATE_VERSION: &str = "v1";
const TEMPLATE_ASSET: &str = include_str!("../assets/hand_templates_v1.txt");

/// Half-width of the uniform random translation applied to each synthetic hand.
pub const MAX_TRANSLATION: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("per_class must be at least 1")]
    EmptyClass,
    #[error("jitter sigma must be finite and non-negative, got {0}")]
    Sigma(f64),
}

fn parse_templates(text: &str) -> [[Landmark; LANDMARK_COUNT]; GESTURE_COUNT] {
    let mut out = [[Landmark::default(); LANDMARK_COUNT]; GESTURE_COUNT];
    let rows = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let mut seen = 0;
    for (id, row) in rows.enumerate() {
        let mut tok = row.split_whitespace();
        let name = tok.next().expect("template name");
        assert_eq!(
            GestureLabel::new(id).map(|l| l.name()),
            Some(name),
            "template rows must follow class id order"
        );
        let vals: Vec<f64> = tok.map(|t| t.parse().expect("template coordinate")).collect();
        assert_eq!(vals.len(), 2 * LANDMARK_COUNT, "template {name}");
        for (p, xy) in out[id].iter_mut().zip(vals.chunks_exact(2)) {
            *p = Landmark::new(xy[0], xy[1]);
        }
        seen += 1;
    }
    assert_eq!(seen, GESTURE_COUNT);
    out
}

fn templates() -> &'static [[Landmark; LANDMARK_COUNT]; GESTURE_COUNT] {
    static T: OnceLock<[[Landmark; LANDMARK_COUNT]; GESTURE_COUNT]> = OnceLock::new();
    T.get_or_init(|| parse_templates(TEMPLATE_ASSET))
}

/// The canonical skeleton for `label`.
pub fn template_frame(label: GestureLabel) -> LandmarkFrame {
    LandmarkFrame::new(0, templates()[label.id()].to_vec()).expect("templates are well formed")
}

/// One noisy, randomly placed observation of `label`.
pub fn jittered_frame<R: Rng + ?Sized>(
    label: GestureLabel,
    sigma: f64,
    timestamp_ms: u64,
    rng: &mut R,
) -> LandmarkFrame {
    let dx = rng.gen_range(-MAX_TRANSLATION..=MAX_TRANSLATION);
    let dy = rng.gen_range(-MAX_TRANSLATION..=MAX_TRANSLATION);
    let noise = Normal::new(0.0, sigma).expect("sigma validated by caller");
    let points = templates()[label.id()]
        .iter()
        .map(|p| {
            let (nx, ny) = if sigma > 0.0 {
                (noise.sample(rng), noise.sample(rng))
            } else {
                (0.0, 0.0)
            };
            Landmark::new(p.x + nx + dx, p.y + ny + dy)
        })
        .collect();
    LandmarkFrame {
        timestamp_ms,
        points,
        handedness: Default::default(),
    }
}

/// `per_class` samples of every gesture, ordered by class.
pub fn generate_synthetic_dataset(
    per_class: usize,
    jitter_sigma: f64,
    seed: u64,
) -> Result<Dataset, SynthError> {
    if per_class == 0 {
        return Err(SynthError::EmptyClass);
    }
    if !(jitter_sigma.is_finite() && jitter_sigma >= 0.0) {
        return Err(SynthError::Sigma(jitter_sigma));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(per_class * GESTURE_COUNT);
    for label in GestureLabel::all() {
        for _ in 0..per_class {
            let frame = jittered_frame(label, jitter_sigma, 0, &mut rng);
            samples.push(LabeledSample {
                label,
                features: normalize_frame(&frame).expect("finite synthetic frame"),
            });
        }
    }
    Ok(Dataset {
        samples,
        class_count: GESTURE_COUNT,
    })
}
