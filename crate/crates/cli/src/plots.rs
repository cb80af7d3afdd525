//! SVG charts rendered from the experiment CSVs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use neurotex::{Error, Result};

type Series = Vec<(String, Vec<(f64, f64)>)>;

fn plot_error<E: std::fmt::Display>(e: E) -> Error {
    Error::InvalidParameter(format!("plot rendering failed: {e}"))
}

/// Columns of a CSV as name → values; non-numeric cells become NaN.
fn read_columns(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut cols: BTreeMap<String, Vec<f64>> = headers.iter().map(|h| (h.clone(), Vec::new())).collect();
    for rec in rdr.records() {
        let rec = rec?;
        for (h, cell) in headers.iter().zip(rec.iter()) {
            cols.get_mut(h).expect("header").push(cell.parse().unwrap_or(f64::NAN));
        }
    }
    Ok(cols)
}

fn col<'a>(cols: &'a BTreeMap<String, Vec<f64>>, name: &str) -> Result<&'a [f64]> {
    cols.get(name)
        .map(Vec::as_slice)
        .ok_or_else(|| Error::InvalidParameter(format!("CSV lacks column {name:?}")))
}

/// One series per named y column against a shared x column.
fn by_column(cols: &BTreeMap<String, Vec<f64>>, x: &str, ys: &[(&str, &str)]) -> Result<Series> {
    let xs = col(cols, x)?;
    ys.iter()
        .map(|(c, label)| {
            Ok((
                label.to_string(),
                xs.iter().copied().zip(col(cols, c)?.iter().copied()).collect(),
            ))
        })
        .collect()
}

/// One series per distinct value of `group`.
fn by_group(cols: &BTreeMap<String, Vec<f64>>, group: &str, x: &str, y: &str, prefix: &str) -> Result<Series> {
    let (g, xs, ys) = (col(cols, group)?, col(cols, x)?, col(cols, y)?);
    let mut out: Series = Vec::new();
    for i in 0..g.len() {
        let name = format!("{prefix}{}", g[i]);
        match out.iter_mut().find(|(n, _)| *n == name) {
            Some((_, pts)) => pts.push((xs[i], ys[i])),
            None => out.push((name, vec![(xs[i], ys[i])])),
        }
    }
    Ok(out)
}

fn line_chart(path: &Path, title: &str, x_label: &str, series: &Series) -> Result<()> {
    let pts = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, _) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
    }
    if x1 <= x0 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let pad = (x1 - x0) * 0.05;
    let root = SVGBackend::new(path, (720, 440)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_error)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(x0 - pad..x1 + pad, 0.0..1.0)
        .map_err(plot_error)?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc("accuracy")
        .draw()
        .map_err(plot_error)?;
    for (i, (name, points)) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let points: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.1.is_finite()).collect();
        chart
            .draw_series(LineSeries::new(points.clone(), color.stroke_width(2)))
            .map_err(plot_error)?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
        chart
            .draw_series(points.iter().map(|&p| Circle::new(p, 3, color.filled())))
            .map_err(plot_error)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_error)?;
    root.present().map_err(plot_error)?;
    Ok(())
}

/// Renders a chart for every known CSV present in `dir`.
type Columns = BTreeMap<String, Vec<f64>>;

pub fn render_all(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut emit =
        |csv_name: &str, svg: &str, title: &str, x: &str, make: &dyn Fn(&Columns) -> Result<Series>| -> Result<()> {
            let src = dir.join(csv_name);
            if src.exists() {
                let cols = read_columns(&src)?;
                let out = dir.join(svg);
                line_chart(&out, title, x, &make(&cols)?)?;
                written.push(out);
            }
            Ok(())
        };
    emit(
        "accuracy.csv",
        "accuracy.svg",
        "Accuracy by sliding velocity",
        "velocity (mm/s)",
        &|c| {
            by_column(
                c,
                "velocity_mm_s",
                &[("taxel_accuracy", "single taxel"), ("glcm3d_accuracy", "3D-GLCM")],
            )
        },
    )?;
    emit(
        "temporal.csv",
        "temporal.svg",
        "Temporal collapse",
        "velocity (mm/s)",
        &|c| {
            by_column(
                c,
                "velocity_mm_s",
                &[
                    ("taxel_accuracy", "single taxel"),
                    ("glcm2d_accuracy", "2D-GLCM"),
                    ("glcm3d_accuracy", "3D-GLCM"),
                ],
            )
        },
    )?;
    emit(
        "perturbation.csv",
        "perturbation.svg",
        "Spatial perturbation",
        "perturbed taxels n",
        &|c| {
            let mut s = by_group(c, "velocity_mm_s", "n", "mean_accuracy", "3D-GLCM v=")?;
            s.extend(by_group(c, "velocity_mm_s", "n", "taxel_reference", "single taxel v=")?);
            Ok(s)
        },
    )?;
    emit(
        "tor.csv",
        "tor.svg",
        "Time to recognition",
        "fraction of sliding time",
        &|c| {
            let mut s = by_group(c, "velocity_mm_s", "fraction", "glcm3d_accuracy", "3D-GLCM v=")?;
            s.extend(by_group(
                c,
                "velocity_mm_s",
                "fraction",
                "taxel_reference",
                "single taxel v=",
            )?);
            Ok(s)
        },
    )?;
    emit(
        "velocity.csv",
        "velocity.svg",
        "Held-out velocity",
        "test velocity (mm/s)",
        &|c| {
            by_column(
                c,
                "test_velocity_mm_s",
                &[("taxel_accuracy", "single taxel"), ("glcm3d_accuracy", "3D-GLCM")],
            )
        },
    )?;
    Ok(written)
}
