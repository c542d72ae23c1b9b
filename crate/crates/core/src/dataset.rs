//! Labeled feature datasets: CSV I/O and the seeded train/validation split.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gesture::GestureLabel;
use crate::landmark::{FeatureVector, FEATURE_LEN};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing or malformed header")]
    Header,
    #[error("class {class} has {available} samples, {requested} requested for validation")]
    InsufficientSamples {
        class: usize,
        available: usize,
        requested: usize,
    },
    #[error("class count {0} outside 1..=8")]
    ClassCount(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub label: GestureLabel,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub class_count: usize,
}

impl Dataset {
    pub fn new(samples: Vec<LabeledSample>, class_count: usize) -> Result<Self, DatasetError> {
        if class_count == 0 || class_count > crate::gesture::GESTURE_COUNT {
            return Err(DatasetError::ClassCount(class_count));
        }
        if let Some((i, s)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| s.label.id() >= class_count)
        {
            return Err(DatasetError::Parse {
                line: i + 2,
                msg: format!("label {} >= class count {class_count}", s.label.id()),
            });
        }
        Ok(Self {
            samples,
            class_count,
        })
    }

    pub fn empty(class_count: usize) -> Self {
        Self {
            samples: Vec::new(),
            class_count,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for s in &self.samples {
            counts[s.label.id()] += 1;
        }
        counts
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 + self.samples.len() * FEATURE_LEN * 12);
        out.push_str("label");
        for i in 0..FEATURE_LEN {
            let _ = write!(out, ",f{i}");
        }
        out.push('\n');
        for s in &self.samples {
            let _ = write!(out, "{}", s.label.id());
            for v in s.features.iter() {
                out.push(',');
                out.push_str(&format_sig9(*v));
            }
            out.push('\n');
        }
        out
    }

    /// Parses the CSV form. Labels must be below `class_count`.
    pub fn from_csv(text: &str, class_count: usize) -> Result<Self, DatasetError> {
        if class_count == 0 || class_count > crate::gesture::GESTURE_COUNT {
            return Err(DatasetError::ClassCount(class_count));
        }
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if valid_header(h) => {}
            _ => return Err(DatasetError::Header),
        }
        let mut samples = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let err = |msg: String| DatasetError::Parse { line: lineno, msg };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != FEATURE_LEN + 1 {
                return Err(err(format!(
                    "expected {} fields, found {}",
                    FEATURE_LEN + 1,
                    fields.len()
                )));
            }
            let id: usize = fields[0]
                .trim()
                .parse()
                .map_err(|_| err(format!("bad label {:?}", fields[0])))?;
            if id >= class_count {
                return Err(err(format!("label {id} >= class count {class_count}")));
            }
            let mut values = [0.0; FEATURE_LEN];
            for (slot, f) in values.iter_mut().zip(&fields[1..]) {
                *slot = f
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("unparsable float {f:?}")))?;
            }
            let features =
                FeatureVector::from_slice(&values).map_err(|e| err(e.to_string()))?;
            samples.push(LabeledSample {
                label: GestureLabel::new(id).expect("checked against class count"),
                features,
            });
        }
        Ok(Self {
            samples,
            class_count,
        })
    }
}

fn valid_header(h: &str) -> bool {
    let mut cols = h.trim_end_matches('\r').split(',');
    cols.next() == Some("label")
        && (0..FEATURE_LEN).all(|i| cols.next() == Some(&format!("f{i}")))
        && cols.next().is_none()
}

/// Shortest decimal that reproduces `v` rounded to 9 significant digits.
pub(crate) fn format_sig9(v: f64) -> String {
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        return "0".to_string();
    }
    format!("{rounded}")
}

pub fn read_dataset(path: impl AsRef<Path>, class_count: usize) -> Result<Dataset, DatasetError> {
    Dataset::from_csv(&fs::read_to_string(path)?, class_count)
}

pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    fs::write(path, dataset.to_csv())?;
    Ok(())
}

/// Index form of [`split_dataset`]: `(train, val)` indices into `dataset.samples`, each ascending.
pub fn split_indices(
    dataset: &Dataset,
    val_per_class: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DatasetError> {
    let mut by_class = vec![Vec::new(); dataset.class_count];
    for (i, s) in dataset.samples.iter().enumerate() {
        by_class[s.label.id()].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_val = vec![false; dataset.len()];
    for (class, members) in by_class.iter().enumerate() {
        if members.len() < val_per_class {
            return Err(DatasetError::InsufficientSamples {
                class,
                available: members.len(),
                requested: val_per_class,
            });
        }
        for k in rand::seq::index::sample(&mut rng, members.len(), val_per_class) {
            in_val[members[k]] = true;
        }
    }
    let (val, train): (Vec<usize>, Vec<usize>) = (0..dataset.len()).partition(|&i| in_val[i]);
    Ok((train, val))
}

/// Draws `val_per_class` samples of every class without replacement for validation.
pub fn split_dataset(
    dataset: &Dataset,
    val_per_class: usize,
    seed: u64,
) -> Result<(Dataset, Dataset), DatasetError> {
    let (train, val) = split_indices(dataset, val_per_class, seed)?;
    let pick = |idx: &[usize]| Dataset {
        samples: idx.iter().map(|&i| dataset.samples[i].clone()).collect(),
        class_count: dataset.class_count,
    };
    Ok((pick(&train), pick(&val)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_dataset(per_class: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = Vec::new();
        for c in 0..8 {
            for _ in 0..per_class {
                let v: Vec<f64> = (0..FEATURE_LEN).map(|_| rng.gen_range(-0.5..0.5)).collect();
                samples.push(LabeledSample {
                    label: GestureLabel::new(c).unwrap(),
                    features: FeatureVector::from_slice(&v).unwrap(),
                });
            }
        }
        Dataset::new(samples, 8).unwrap()
    }

    fn header() -> String {
        Dataset::empty(8).to_csv()
    }

    #[test]
    fn header_only_is_empty() {
        let d = Dataset::from_csv(&header(), 8).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn zero_row() {
        let text = format!("{}0{}\n", header(), ",0.0".repeat(FEATURE_LEN));
        let d = Dataset::from_csv(&text, 8).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.samples[0].label, GestureLabel::FIST);
        assert_eq!(d.samples[0].features, FeatureVector::zeros());
    }

    #[test]
    fn errors_name_the_line() {
        let short = format!("{}0,1.0,2.0\n", header());
        match Dataset::from_csv(&short, 8) {
            Err(DatasetError::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        let good = format!("0{}\n", ",0".repeat(FEATURE_LEN));
        let bad_label = format!("{}{good}9{}\n", header(), ",0".repeat(FEATURE_LEN));
        match Dataset::from_csv(&bad_label, 8) {
            Err(DatasetError::Parse { line: 3, msg }) => assert!(msg.contains("label")),
            other => panic!("{other:?}"),
        }
        let bad_float = format!("{}1,abc{}\n", header(), ",0".repeat(FEATURE_LEN - 1));
        match Dataset::from_csv(&bad_float, 8) {
            Err(DatasetError::Parse { line: 2, msg }) => assert!(msg.contains("abc")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(Dataset::from_csv("nope\n", 8), Err(DatasetError::Header)));
    }

    #[test]
    fn round_trip_is_stable() {
        let d = random_dataset(200, 3);
        let first = d.to_csv();
        let back = Dataset::from_csv(&first, 8).unwrap();
        assert_eq!(back.len(), 1600);
        for (a, b) in d.samples.iter().zip(&back.samples) {
            assert_eq!(a.label, b.label);
            for (x, y) in a.features.iter().zip(b.features.iter()) {
                assert!((x - y).abs() <= 1e-7 * x.abs().max(f64::MIN_POSITIVE));
            }
        }
        assert_eq!(back.to_csv(), first);
        assert!(first.ends_with('\n') && !first.contains('\r'));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let d = random_dataset(3, 1);
        write_dataset(&d, &path).unwrap();
        let back = read_dataset(&path, 8).unwrap();
        assert_eq!(back.to_csv(), d.to_csv());
    }

    #[test]
    fn split_150_50_protocol() {
        let d = random_dataset(200, 5);
        let (train, val) = split_dataset(&d, 50, 7).unwrap();
        assert_eq!(train.class_counts(), vec![150; 8]);
        assert_eq!(val.class_counts(), vec![50; 8]);
    }

    #[test]
    fn split_partitions_and_is_seeded() {
        let d = random_dataset(20, 9);
        let (t1, v1) = split_indices(&d, 5, 11).unwrap();
        let (t2, v2) = split_indices(&d, 5, 11).unwrap();
        assert_eq!((&t1, &v1), (&t2, &v2));
        let (_, v3) = split_indices(&d, 5, 12).unwrap();
        assert_ne!(v1, v3);
        let mut all: Vec<usize> = t1.iter().chain(&v1).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..d.len()).collect::<Vec<_>>());
    }

    #[test]
    fn zero_validation() {
        let d = random_dataset(4, 2);
        let (train, val) = split_dataset(&d, 0, 1).unwrap();
        assert!(val.is_empty());
        assert_eq!(train, d);
    }

    #[test]
    fn insufficient_class() {
        let mut d = random_dataset(5, 2);
        d.samples.retain(|s| s.label.id() != 3 || s.features[0] > 10.0);
        match split_dataset(&d, 2, 1) {
            Err(DatasetError::InsufficientSamples { class: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
