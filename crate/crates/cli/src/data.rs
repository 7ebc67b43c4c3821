use std::path::PathBuf;

use certree::dataset::{self, Dataset, ParseOptions};
use certree::Error;

/// Dataset selection and preprocessing flags shared by train and verify.
#[derive(clap::Args)]
pub struct DataArgs {
    /// Dataset of sparse `label index:value` rows.
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Rescale every feature to [0, 1] after loading.
    #[arg(long)]
    pub scale: bool,
    /// Raw class codes mapped to +1/-1, e.g. `4,2`; rows with other codes
    /// are dropped.
    #[arg(long, value_name = "POS,NEG")]
    pub classes: Option<String>,
    /// Fixed input dimension; inferred from the largest index when absent.
    #[arg(long)]
    pub dimension: Option<usize>,
    /// Keep only a random subset of this size.
    #[arg(long, value_name = "COUNT")]
    pub subsample: Option<usize>,
    /// Subsampling seed.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

impl DataArgs {
    pub fn load(&self) -> anyhow::Result<Dataset> {
        let options = ParseOptions {
            expected_dimension: self.dimension,
            classes: self.classes.as_deref().map(parse_classes).transpose()?,
        };
        let parsed = dataset::load(&self.data, &options)?;
        if parsed.dropped_rows > 0 {
            eprintln!(
                "dropped {} rows outside the class mapping in {}",
                parsed.dropped_rows,
                self.data.display()
            );
        }
        let mut dataset = parsed.dataset;
        if dataset.is_empty() {
            return Err(Error::invalid(format!("{} holds no samples", self.data.display())).into());
        }
        if self.scale {
            dataset.min_max_scale();
        }
        if let Some(count) = self.subsample {
            dataset = dataset.subsample(count, self.seed);
        }
        Ok(dataset)
    }
}

fn parse_classes(text: &str) -> certree::Result<(f64, f64)> {
    let parse = |part: &str| {
        part.trim()
            .parse::<f64>()
            .map_err(|_| Error::invalid(format!("invalid class code {part:?} in {text:?}")))
    };
    let (pos, neg) = text
        .split_once(',')
        .ok_or_else(|| Error::invalid(format!("expected POS,NEG class codes, got {text:?}")))?;
    Ok((parse(pos)?, parse(neg)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_pairs_parse() {
        assert_eq!(parse_classes("4,2").unwrap(), (4.0, 2.0));
        assert_eq!(parse_classes(" 1 , -1 ").unwrap(), (1.0, -1.0));
        assert!(parse_classes("4").is_err());
        assert!(parse_classes("a,b").is_err());
    }
}
