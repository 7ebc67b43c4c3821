//! Sparse `label index:value` dataset ingestion plus the scaling and
//! subsampling transforms used ahead of training and verification.
//!
//! Feature indices in the text format are 1-based; absent features default
//! to zero. Labels may be given as -1/+1 or 0/1, or remapped from arbitrary
//! class codes via [`ParseOptions::classes`].

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::Sample;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub dimension: usize,
    pub name: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Fixed input dimension; inferred from the largest index when absent.
    pub expected_dimension: Option<usize>,
    /// Raw class codes mapped to (+1, -1); rows with other codes are dropped.
    pub classes: Option<(f64, f64)>,
}

/// Parse result along with the count of rows dropped by class filtering.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub dataset: Dataset,
    pub dropped_rows: usize,
}

pub fn load(path: &Path, options: &ParseOptions) -> Result<Parsed> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    parse_str(&text, name, options)
}

pub fn parse_str(text: &str, name: &str, options: &ParseOptions) -> Result<Parsed> {
    let mut rows: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
    let mut max_index = 0usize;
    let mut dropped_rows = 0usize;

    for (line_no, line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_token = tokens.next().expect("nonempty line has a first token");
        let raw_label: f64 = label_token.parse().map_err(|_| Error::DatasetParse {
            line: line_no,
            message: format!("invalid label {label_token:?}"),
        })?;

        let label = match options.classes {
            Some((pos, neg)) => {
                if raw_label == pos {
                    1.0
                } else if raw_label == neg {
                    -1.0
                } else {
                    dropped_rows += 1;
                    continue;
                }
            }
            None if raw_label == 1.0 => 1.0,
            None if raw_label == -1.0 || raw_label == 0.0 => -1.0,
            None => {
                return Err(Error::DatasetParse {
                    line: line_no,
                    message: format!(
                        "label {raw_label} is not in {{-1, +1}} or {{0, 1}}; \
                         use a class mapping for other codes"
                    ),
                })
            }
        };

        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for token in tokens {
            let (index_part, value_part) = token.split_once(':').ok_or(Error::DatasetParse {
                line: line_no,
                message: format!("expected index:value, got {token:?}"),
            })?;
            let index: usize = index_part.parse().map_err(|_| Error::DatasetParse {
                line: line_no,
                message: format!("invalid feature index {index_part:?}"),
            })?;
            if index == 0 {
                return Err(Error::DatasetParse {
                    line: line_no,
                    message: "feature indices are 1-based".into(),
                });
            }
            let value: f64 = value_part.parse().map_err(|_| Error::DatasetParse {
                line: line_no,
                message: format!("invalid feature value {value_part:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::DatasetParse {
                    line: line_no,
                    message: format!("non-finite feature value {value}"),
                });
            }
            if !seen.insert(index) {
                return Err(Error::DatasetParse {
                    line: line_no,
                    message: format!("duplicate feature index {index}"),
                });
            }
            if let Some(expected) = options.expected_dimension {
                if index > expected {
                    return Err(Error::DatasetParse {
                        line: line_no,
                        message: format!("feature index {index} exceeds dimension {expected}"),
                    });
                }
            }
            max_index = max_index.max(index);
            entries.push((index, value));
        }
        rows.push((label, entries));
    }

    let dimension = options.expected_dimension.unwrap_or(max_index);
    let samples = rows
        .into_iter()
        .map(|(label, entries)| {
            let mut features = vec![0.0; dimension];
            for (index, value) in entries {
                features[index - 1] = value;
            }
            Sample::new(features, label)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Parsed {
        dataset: Dataset { samples, dimension, name: name.to_owned() },
        dropped_rows,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Rescales every feature to [0, 1]; constant features collapse to 0.
    pub fn min_max_scale(&mut self) {
        for dim in 0..self.dimension {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for sample in &self.samples {
                lo = lo.min(sample.features[dim]);
                hi = hi.max(sample.features[dim]);
            }
            for sample in &mut self.samples {
                let v = &mut sample.features[dim];
                *v = if hi > lo { (*v - lo) / (hi - lo) } else { 0.0 };
            }
        }
    }

    /// Keeps `count` samples chosen without replacement, in original order.
    pub fn subsample(&self, count: usize, seed: u64) -> Dataset {
        if count >= self.len() {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = rand::seq::index::sample(&mut rng, self.len(), count).into_vec();
        keep.sort_unstable();
        Dataset {
            samples: keep.into_iter().map(|i| self.samples[i].clone()).collect(),
            dimension: self.dimension,
            name: self.name.clone(),
        }
    }
}
