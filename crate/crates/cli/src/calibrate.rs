use std::path::PathBuf;

use anyhow::Context;
use clap::ValueEnum;
use pfcal::io::{read_pff_file, write_json, write_result, ResultJson};
use pfcal::{solve, CameraModel, IntrinsicsEstimate, SolveConfig};

use crate::{ensure_dir, ensure_files, parse_size, usage, Global, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Shared,
    Independent,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// PFF field files, one per view.
    #[arg(required = true)]
    fields: Vec<PathBuf>,
    /// Size of the images the fields were predicted on.
    #[arg(long, default_value = "640x640", value_parser = parse_size)]
    image_size: (u32, u32),
    #[arg(long, default_value = "pinhole")]
    model: CameraModel,
    #[arg(long, value_enum, default_value_t = Mode::Shared)]
    mode: Mode,
    /// Huber threshold on confidence-scaled residuals.
    #[arg(long)]
    huber: Option<f64>,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// Result file (default `<out>/result.json`).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the LM iteration trace as JSON.
    #[arg(long)]
    trace: Option<PathBuf>,
}

pub fn run(g: &Global, a: Args) -> anyhow::Result<Status> {
    ensure_files(&a.fields)?;
    let (w, h) = a.image_size;
    let mut cfg = SolveConfig::new(a.model);
    cfg.max_iters = a.max_iters;
    cfg.huber_delta = a.huber;
    if a.mode == Mode::Independent {
        cfg = cfg.independent();
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let output = a.output.clone().unwrap_or_else(|| g.out.join("result.json"));
    for p in [Some(&output), a.trace.as_ref()].into_iter().flatten() {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            ensure_dir(dir)?;
        }
    }

    let fields = a
        .fields
        .iter()
        .map(|p| {
            read_pff_file(p)
                .and_then(|rec| rec.into_field(w, h))
                .with_context(|| format!("reading {}", p.display()))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let est = solve(&fields, &cfg)?;
    write_result(&output, &ResultJson::from_estimate(&est))?;
    if let Some(trace) = &a.trace {
        write_json(trace, &est.traces)?;
    }
    match &est.intrinsics {
        IntrinsicsEstimate::Shared(c) => println!(
            "{} view(s): {} f={:.3} d={:.5} cost={:.6e} iterations={}",
            fields.len(),
            c.model(),
            c.focal(),
            c.distortion(),
            est.final_cost,
            est.iterations
        ),
        IntrinsicsEstimate::PerView(cams) => {
            for (i, c) in cams.iter().enumerate() {
                println!("view {i}: {} f={:.3} d={:.5}", c.model(), c.focal(), c.distortion());
            }
        }
    }
    Ok(if est.converged { Status::Done } else { Status::NotConverged })
}
