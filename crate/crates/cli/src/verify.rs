use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use certree::{
    deserialize_model, Error, Model, MultiLevelConfig, Norm, PerturbationSpec, Sample,
    StumpVerifier, TreeVerifier, VerificationResult,
};
use rayon::prelude::*;

use crate::data::DataArgs;
use crate::norms::{self, norm_label};

#[derive(clap::Args)]
pub struct VerifyArgs {
    /// Stored model document.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    #[command(flatten)]
    input: DataArgs,
    /// Verification method.
    #[arg(long, value_enum)]
    method: Method,
    /// Perturbation norm; implied by l0-exact and linf-exact.
    #[arg(long, value_parser = norms::parse_norm)]
    norm: Option<Norm>,
    /// Perturbation radius; a whole coordinate count under l0.
    #[arg(long)]
    eps: f64,
    /// Budget-grid cell width (lp-dp).
    #[arg(long, default_value_t = 0.01)]
    precision: f64,
    /// Trees per enumeration group (tree-multilevel).
    #[arg(long, default_value_t = 2)]
    clique_size: usize,
    /// Regrouping passes (tree-multilevel).
    #[arg(long, default_value_t = 1)]
    levels: usize,
    /// Worker threads; 0 takes every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Destination CSV; stdout when absent.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, clap::ValueEnum)]
enum Method {
    L0Exact,
    LinfExact,
    LpDp,
    LpExact,
    TreeSingle,
    TreeMultilevel,
}

impl Method {
    fn label(self) -> &'static str {
        match self {
            Method::L0Exact => "l0-exact",
            Method::LinfExact => "linf-exact",
            Method::LpDp => "lp-dp",
            Method::LpExact => "lp-exact",
            Method::TreeSingle => "tree-single",
            Method::TreeMultilevel => "tree-multilevel",
        }
    }
}

struct Row {
    index: usize,
    label: i32,
    clean_pred: i32,
    margin: f64,
    robust: bool,
    millis: f64,
}

pub fn run(args: VerifyArgs) -> anyhow::Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build_global()
        .context("cannot size the worker pool")?;

    let text = fs::read_to_string(&args.model)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", args.model.display())))?;
    let model = deserialize_model(&text)?;
    let dataset = args.input.load()?;
    if dataset.dimension != model.dimension() {
        return Err(Error::DimensionMismatch {
            expected: model.dimension(),
            got: dataset.dimension,
        }
        .into());
    }

    let norm = effective_norm(args.method, args.norm)?;
    let op = build_op(&model, args.method, norm, &args)?;

    let rows = dataset
        .samples
        .par_iter()
        .enumerate()
        .map(|(index, sample)| {
            let start = Instant::now();
            let (clean_margin, result) = op(sample)?;
            Ok(Row {
                index,
                label: sample.label as i32,
                clean_pred: if sample.label * clean_margin > 0.0 { 1 } else { -1 },
                margin: result.margin_lower_bound,
                robust: result.robust,
                millis: start.elapsed().as_secs_f64() * 1e3,
            })
        })
        .collect::<certree::Result<Vec<Row>>>()?;

    let count = rows.len() as f64;
    let standard_err =
        rows.iter().filter(|r| r.clean_pred != r.label).count() as f64 / count;
    let verified_err = rows.iter().filter(|r| !r.robust).count() as f64 / count;
    let mean_time_ms = rows.iter().map(|r| r.millis).sum::<f64>() / count;

    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| Error::invalid(format!("cannot create {}: {e}", path.display())))?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    writeln!(out, "sample_index,label,clean_pred,margin_lb,robust,time_ms")?;
    for row in &rows {
        writeln!(
            out,
            "{},{},{},{},{},{:.3}",
            row.index, row.label, row.clean_pred, row.margin, u8::from(row.robust), row.millis
        )?;
    }
    writeln!(out, "# method,{}", args.method.label())?;
    writeln!(out, "# norm,{}", norm_label(norm))?;
    writeln!(out, "# epsilon,{}", args.eps)?;
    writeln!(out, "# model,{}", args.model.display())?;
    writeln!(out, "# data,{}", args.input.data.display())?;
    if args.method == Method::LpDp {
        writeln!(out, "# precision,{}", args.precision)?;
    }
    if args.method == Method::TreeMultilevel {
        writeln!(out, "# clique_size,{}", args.clique_size)?;
        writeln!(out, "# levels,{}", args.levels)?;
    }
    writeln!(out, "# samples,{}", rows.len())?;
    writeln!(out, "# standard_err,{standard_err:.6}")?;
    writeln!(out, "# verified_err,{verified_err:.6}")?;
    writeln!(out, "# mean_time_ms,{mean_time_ms:.3}")?;
    out.flush()?;

    eprintln!(
        "verified {} samples with {}: standard_err {:.4}, verified_err {:.4}",
        rows.len(),
        args.method.label(),
        standard_err,
        verified_err
    );
    Ok(())
}

type SampleOp<'a> = Box<dyn Fn(&Sample) -> certree::Result<(f64, VerificationResult)> + Send + Sync + 'a>;

fn build_op<'a>(
    model: &'a Model,
    method: Method,
    norm: Norm,
    args: &VerifyArgs,
) -> anyhow::Result<SampleOp<'a>> {
    let eps = args.eps;
    match model {
        Model::Stumps(ensemble) => {
            let verifier = StumpVerifier::new(ensemble);
            let op: SampleOp<'a> = match method {
                Method::L0Exact => {
                    let budget = coordinate_budget(eps)?;
                    Box::new(move |s| Ok((verifier.clean_margin(s), verifier.verify_l0(s, budget)?)))
                }
                Method::LinfExact => {
                    Box::new(move |s| Ok((verifier.clean_margin(s), verifier.verify_linf(s, eps)?)))
                }
                Method::LpDp => {
                    let Norm::Finite(p) = norm else { unreachable!("checked by effective_norm") };
                    let precision = args.precision;
                    Box::new(move |s| {
                        Ok((verifier.clean_margin(s), verifier.verify_lp_dp(s, p, eps, precision)?))
                    })
                }
                Method::LpExact => {
                    let Norm::Finite(p) = norm else { unreachable!("checked by effective_norm") };
                    Box::new(move |s| {
                        Ok((verifier.clean_margin(s), verifier.verify_lp_exact(s, p, eps)?))
                    })
                }
                Method::TreeSingle | Method::TreeMultilevel => {
                    return Err(Error::invalid(format!(
                        "{} applies to trees models, this model holds stumps",
                        method.label()
                    ))
                    .into())
                }
            };
            Ok(op)
        }
        Model::Trees(ensemble) => {
            let spec = PerturbationSpec::new(norm, eps)?;
            let verifier = TreeVerifier::new(ensemble);
            let op: SampleOp<'a> = match method {
                Method::TreeSingle => {
                    if ensemble.trees().len() != 1 {
                        return Err(Error::invalid(format!(
                            "tree-single needs a single-tree model, this one holds {} trees; \
                             use tree-multilevel",
                            ensemble.trees().len()
                        ))
                        .into());
                    }
                    let tree = &ensemble.trees()[0];
                    Box::new(move |s| {
                        Ok((verifier.clean_margin(s), certree::verify_single_tree(tree, s, spec)?))
                    })
                }
                Method::TreeMultilevel => {
                    let config = MultiLevelConfig::new(args.clique_size, args.levels)?;
                    Box::new(move |s| {
                        Ok((verifier.clean_margin(s), verifier.verify_multilevel(s, spec, &config)?))
                    })
                }
                _ => {
                    return Err(Error::invalid(format!(
                        "{} applies to stumps models, this model holds trees",
                        method.label()
                    ))
                    .into())
                }
            };
            Ok(op)
        }
    }
}

fn effective_norm(method: Method, given: Option<Norm>) -> certree::Result<Norm> {
    match method {
        Method::L0Exact => match given {
            None | Some(Norm::Zero) => Ok(Norm::Zero),
            Some(other) => Err(Error::invalid(format!(
                "l0-exact fixes the norm to l0, got {}",
                norm_label(other)
            ))),
        },
        Method::LinfExact => match given {
            None | Some(Norm::Infinity) => Ok(Norm::Infinity),
            Some(other) => Err(Error::invalid(format!(
                "linf-exact fixes the norm to linf, got {}",
                norm_label(other)
            ))),
        },
        Method::LpDp | Method::LpExact => match given {
            Some(norm @ Norm::Finite(_)) => Ok(norm),
            Some(other) => Err(Error::invalid(format!(
                "{} needs a finite exponent norm (l1, l2, or lp:<p>), got {}",
                method.label(),
                norm_label(other)
            ))),
            None => Err(Error::invalid(format!("--norm is required for {}", method.label()))),
        },
        Method::TreeSingle | Method::TreeMultilevel => given
            .ok_or_else(|| Error::invalid(format!("--norm is required for {}", method.label()))),
    }
}

fn coordinate_budget(eps: f64) -> certree::Result<usize> {
    if !eps.is_finite() || eps < 0.0 || eps.fract() != 0.0 || eps > u32::MAX as f64 {
        return Err(Error::invalid(format!(
            "the l0 radius is a count of changed coordinates and must be a \
             nonnegative integer, got {eps}"
        )));
    }
    Ok(eps as usize)
}
