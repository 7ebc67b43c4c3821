use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use certree::{serialize_model, train_stumps, train_trees, Model, Norm, RoundStats, TrainConfig};

use crate::data::DataArgs;
use crate::norms;

#[derive(clap::Args)]
pub struct TrainArgs {
    #[command(flatten)]
    input: DataArgs,
    /// Destination for the fitted model document.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Ensemble shape to fit.
    #[arg(long, value_enum, default_value_t = ModelKind::Stumps)]
    kind: ModelKind,
    /// Perturbation norm the model is trained to certify.
    #[arg(long, value_parser = norms::parse_norm, default_value = "linf")]
    norm: Norm,
    /// Target perturbation radius.
    #[arg(long)]
    eps: f64,
    /// Boosting rounds.
    #[arg(long, default_value_t = 20)]
    rounds: usize,
    /// Leaf-weight shrinkage in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    lr: f64,
    /// Rounds (stumps) or depth levels (trees) over which the radius ramps
    /// up to the target.
    #[arg(long, default_value_t = 1)]
    schedule: usize,
    /// Budget-grid cell width for finite-p loss bounds.
    #[arg(long, default_value_t = 0.01)]
    precision: f64,
    /// Tree depth limit; ignored for stumps.
    #[arg(long, default_value_t = 3)]
    depth: usize,
}

#[derive(Copy, Clone, PartialEq, Eq, clap::ValueEnum)]
enum ModelKind {
    Stumps,
    Trees,
}

pub fn run(args: TrainArgs) -> anyhow::Result<()> {
    let dataset = args.input.load()?;
    eprintln!(
        "training on {} samples, {} features ({})",
        dataset.len(),
        dataset.dimension,
        dataset.name
    );

    let mut config = TrainConfig::new(args.norm, args.eps);
    config.rounds = args.rounds;
    config.shrinkage = args.lr;
    config.schedule_length = args.schedule;
    config.precision = args.precision;
    config.max_depth = args.depth;

    let (model, stats) = match args.kind {
        ModelKind::Stumps => {
            let (ensemble, stats) = train_stumps(&dataset, &config)?;
            (Model::Stumps(ensemble), stats)
        }
        ModelKind::Trees => {
            let (ensemble, stats) = train_trees(&dataset, &config)?;
            (Model::Trees(ensemble), stats)
        }
    };
    print_rounds(&stats);

    let mut errors = 0usize;
    for sample in &dataset.samples {
        if sample.label * model.evaluate(&sample.features)? <= 0.0 {
            errors += 1;
        }
    }

    let text = serialize_model(&model)?;
    fs::write(&args.out, text)
        .with_context(|| format!("cannot write model to {}", args.out.display()))?;
    println!(
        "wrote {} model with {} rounds to {}; training error {:.4}",
        model.kind(),
        stats.len(),
        args.out.display(),
        errors as f64 / dataset.len() as f64
    );
    Ok(())
}

fn print_rounds(stats: &[RoundStats]) {
    for entry in stats {
        println!(
            "round {:>4}  radius {:<10}  loss bound {:<12.6}  time {:.3}s",
            entry.round, entry.epsilon, entry.loss, entry.seconds
        );
    }
}
