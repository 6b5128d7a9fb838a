use std::path::PathBuf;

use anyhow::{bail, Context};
use pfcal::io::{read_result, write_json};
use pfcal::{error_sample, report, ErrorSample, MetricReport};
use serde::Serialize;

use crate::{ensure_dir, ensure_files, Global, Status};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Predicted result files.
    #[arg(long = "pred", required = true)]
    preds: Vec<PathBuf>,
    /// Ground-truth result files, paired with --pred in order.
    #[arg(long = "gt", required = true)]
    gts: Vec<PathBuf>,
}

#[derive(Serialize)]
struct EvalOutput {
    report: MetricReport,
    samples: Vec<ErrorSample>,
}

pub fn run(g: &Global, a: Args) -> anyhow::Result<Status> {
    ensure_files(&a.preds)?;
    ensure_files(&a.gts)?;
    if a.preds.len() != a.gts.len() {
        bail!("{} prediction files but {} ground-truth files", a.preds.len(), a.gts.len());
    }
    ensure_dir(&g.out)?;

    let mut samples = Vec::new();
    for (p, t) in a.preds.iter().zip(&a.gts) {
        let ctx = || format!("{} vs {}", p.display(), t.display());
        let (pred, gt) = (read_result(p).with_context(ctx)?, read_result(t).with_context(ctx)?);
        let (pc, pg) = (pred.cameras().with_context(ctx)?, pred.gravities().with_context(ctx)?);
        let (gc, gg) = (gt.cameras().with_context(ctx)?, gt.gravities().with_context(ctx)?);
        if pg.len() != gg.len() {
            bail!("{}: {} predicted views but {} ground-truth views", ctx(), pg.len(), gg.len());
        }
        for v in 0..gg.len() {
            samples.push(error_sample(&pc[v], &pg[v], &gc[v], &gg[v]).with_context(ctx)?);
        }
    }
    let rep = report(&samples)?;
    let table = rep.to_table();
    print!("{table}");
    std::fs::write(g.out.join("report.txt"), &table).context("writing report.txt")?;
    write_json(&g.out.join("report.json"), &EvalOutput { report: rep, samples })?;
    Ok(Status::Done)
}
