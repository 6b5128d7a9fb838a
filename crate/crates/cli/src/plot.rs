//! Text-free PNG of the study medians: focal error (left panel) and gravity
//! error (right panel) against view count, shared mode in blue and
//! independent mode in red. Axes start at zero; faint lines mark each view
//! count.

use std::path::Path;

use anyhow::anyhow;
use pfcal::study::{OptimizerMode, StudyRow};
use plotters::prelude::*;

const SIZE: (u32, u32) = (960, 420);

fn panel(
    area: &DrawingArea<BitMapBackend, plotters::coord::Shift>,
    rows: &[StudyRow],
    value: fn(&StudyRow) -> f64,
) -> anyhow::Result<()> {
    let err = |e: DrawingAreaErrorKind<_>| anyhow!("plot: {e}");
    let x_max = rows.iter().map(|r| r.views).max().unwrap_or(1) as f64;
    let y_max = rows.iter().map(value).filter(|v| v.is_finite()).fold(0.0, f64::max).max(1e-12) * 1.1;
    let mut chart = ChartBuilder::on(area)
        .margin(20)
        .build_cartesian_2d(0.0..x_max + 0.5, 0.0..y_max)
        .map_err(err)?;
    let mut views: Vec<usize> = rows.iter().map(|r| r.views).collect();
    views.dedup();
    chart
        .draw_series(views.iter().map(|&n| {
            PathElement::new(vec![(n as f64, 0.0), (n as f64, y_max)], RGBColor(220, 220, 220))
        }))
        .map_err(err)?;
    chart
        .draw_series([
            PathElement::new(vec![(0.0, 0.0), (x_max + 0.5, 0.0)], BLACK),
            PathElement::new(vec![(0.0, 0.0), (0.0, y_max)], BLACK),
        ])
        .map_err(err)?;
    for (mode, color) in [(OptimizerMode::Shared, BLUE), (OptimizerMode::Independent, RED)] {
        let points: Vec<(f64, f64)> =
            rows.iter().filter(|r| r.mode == mode).map(|r| (r.views as f64, value(r))).collect();
        chart
            .draw_series(LineSeries::new(points.clone(), color.stroke_width(2)))
            .map_err(err)?;
        chart
            .draw_series(points.into_iter().map(|p| Circle::new(p, 4, color.filled())))
            .map_err(err)?;
    }
    Ok(())
}

pub fn study_png(path: &Path, rows: &[StudyRow]) -> anyhow::Result<()> {
    let root = BitMapBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| anyhow!("plot: {e}"))?;
    let (left, right) = root.split_horizontally(SIZE.0 / 2);
    panel(&left, rows, |r| r.median_focal_rel_err)?;
    panel(&right, rows, |r| r.median_gravity_err_deg)?;
    root.present().map_err(|e| anyhow!("plot: {e}"))?;
    Ok(())
}
