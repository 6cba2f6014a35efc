//! CSV tables and line plots for experiment results.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use plotters::prelude::*;
use plotters::style::{register_font, FontStyle};

use super::experiment::{ResultRow, WelchRow};
use crate::error::{config, domain, Error, Result};

pub const RESULTS_FILE: &str = "results.csv";
pub const WELCH_FILE: &str = "welch.csv";
/// Default output root for CLI runs.
pub const RESULTS_ENV: &str = "DOA_DEFENSE_RESULTS";

const HEADER: [&str; 6] = ["condition", "method", "rmse", "acc", "conf", "B"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Plots,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "plots" => Ok(Self::Plots),
            other => Err(config(format!(
                "unknown report format '{other}' (expected csv or plots)"
            ))),
        }
    }
}

/// Results root from the environment, else `./results`.
pub fn results_root() -> PathBuf {
    std::env::var_os(RESULTS_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("results"))
}

/// Serialise rows with the fixed column order. Floats use the shortest
/// representation that parses back to the same value.
pub fn rows_to_csv(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.condition.clone(),
            r.method.clone(),
            r.rmse.to_string(),
            r.accuracy.to_string(),
            r.confidence.map(|c| c.to_string()).unwrap_or_default(),
            r.samples.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| domain(e.to_string()))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != HEADER {
        return Err(config(format!("unexpected results header {header:?}")));
    }
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| config(format!("bad number '{s}': {e}")))
    };
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(ResultRow {
                condition: rec[0].to_string(),
                method: rec[1].to_string(),
                rmse: num(&rec[2])?,
                accuracy: num(&rec[3])?,
                confidence: if rec[4].is_empty() {
                    None
                } else {
                    Some(num(&rec[4])?)
                },
                samples: rec[5]
                    .parse()
                    .map_err(|e| config(format!("bad sample count: {e}")))?,
            })
        })
        .collect()
}

pub fn welch_to_csv(rows: &[WelchRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["condition", "comparison", "t", "df", "p"])?;
    for r in rows {
        w.write_record([
            r.condition.clone(),
            r.comparison.clone(),
            r.t.to_string(),
            r.df.to_string(),
            r.p.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| domain(e.to_string()))
}

pub fn read_results(dir: &Path) -> Result<Vec<ResultRow>> {
    rows_from_csv(&fs::read_to_string(dir.join(RESULTS_FILE))?)
}

/// Write `results.csv` (and plots, for [`ReportFormat::Plots`]) into `dir`.
/// Returns the files written.
pub fn emit_report(rows: &[ResultRow], format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(domain("nothing to report"));
    }
    fs::create_dir_all(dir)?;
    match format {
        ReportFormat::Csv => {
            let path = dir.join(RESULTS_FILE);
            fs::write(&path, rows_to_csv(rows)?)?;
            Ok(vec![path])
        }
        ReportFormat::Plots => plot_rows(rows, dir),
    }
}

/// Metrics that get one panel each.
const METRICS: [(&str, &str); 3] = [
    ("rmse", "RMSE (deg)"),
    ("accuracy", "Accuracy (%)"),
    ("confidence", "Confidence (%)"),
];

fn metric(row: &ResultRow, name: &str) -> Option<f64> {
    match name {
        "rmse" => Some(row.rmse),
        "accuracy" => Some(row.accuracy),
        _ => row.confidence,
    }
}

fn font_available() -> bool {
    static FONT: OnceLock<bool> = OnceLock::new();
    *FONT.get_or_init(|| {
        const CANDIDATES: [&str; 3] = [
            "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf",
            "/usr/share/fonts/dejavu/DejaVuSans.ttf",
            "/usr/share/fonts/TTF/DejaVuSans.ttf",
        ];
        CANDIDATES.iter().any(|p| match fs::read(p) {
            Ok(bytes) => register_font(
                "sans-serif",
                FontStyle::Normal,
                Box::leak(bytes.into_boxed_slice()),
            )
            .is_ok(),
            Err(_) => false,
        })
    })
}

fn split_condition(c: &str) -> (&str, &str) {
    c.split_once('=').unwrap_or(("condition", c))
}

const PALETTE: [RGBColor; 5] = [RED, BLUE, GREEN, MAGENTA, BLACK];

fn plot_err<E: std::error::Error + Send + Sync + 'static>(e: E) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// One PNG per (axis, metric). Numeric axes plot against their values;
/// categorical axes against their position.
fn plot_rows(rows: &[ResultRow], dir: &Path) -> Result<Vec<PathBuf>> {
    let text = font_available();
    let mut axes: BTreeMap<&str, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        axes.entry(split_condition(&r.condition).0)
            .or_default()
            .push(r);
    }
    let mut written = Vec::new();
    for (axis, rows) in axes {
        let mut values: Vec<&str> = Vec::new();
        for r in &rows {
            let v = split_condition(&r.condition).1;
            if !values.contains(&v) {
                values.push(v);
            }
        }
        let numeric: Option<Vec<f64>> = values.iter().map(|v| v.parse().ok()).collect();
        let xs: Vec<f64> = numeric
            .clone()
            .unwrap_or_else(|| (0..values.len()).map(|i| i as f64).collect());
        let x_of = |r: &ResultRow| {
            xs[values
                .iter()
                .position(|v| *v == split_condition(&r.condition).1)
                .unwrap()]
        };
        let mut methods: Vec<&str> = Vec::new();
        for r in &rows {
            if !methods.contains(&r.method.as_str()) {
                methods.push(&r.method);
            }
        }

        for (name, caption) in METRICS {
            let series: Vec<(&str, Vec<(f64, f64)>)> = methods
                .iter()
                .map(|m| {
                    let pts = rows
                        .iter()
                        .filter(|r| r.method == *m)
                        .filter_map(|r| metric(r, name).map(|y| (x_of(r), y)))
                        .collect();
                    (*m, pts)
                })
                .filter(|(_, pts): &(&str, Vec<(f64, f64)>)| !pts.is_empty())
                .collect();
            let path = dir.join(format!("{axis}_{name}.png"));
            draw_panel(
                &path,
                &series,
                &xs,
                &values,
                numeric.is_some(),
                axis,
                caption,
                text,
            )?;
            written.push(path);
        }
    }
    Ok(written)
}

#[allow(clippy::too_many_arguments)]
fn draw_panel(
    path: &Path,
    series: &[(&str, Vec<(f64, f64)>)],
    xs: &[f64],
    labels: &[&str],
    numeric: bool,
    axis: &str,
    caption: &str,
    text: bool,
) -> Result<()> {
    let root = BitMapBackend::new(path, (640, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let (x0, x1) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    let pad = ((x1 - x0) * 0.05).max(0.5);
    let ys = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1));
    let (y0, y1) = ys.fold((0.0f64, f64::NEG_INFINITY), |(a, b), y| {
        (a.min(y), b.max(y))
    });
    let y1 = if y1.is_finite() && y1 > y0 {
        y1 * 1.05
    } else {
        y0 + 1.0
    };

    let mut builder = ChartBuilder::on(&root);
    builder.margin(12);
    if text {
        builder
            .caption(format!("{caption} vs {axis}"), ("sans-serif", 20))
            .x_label_area_size(36)
            .y_label_area_size(48);
    }
    let mut chart = builder
        .build_cartesian_2d((x0 - pad)..(x1 + pad), y0..y1)
        .map_err(plot_err)?;
    if text {
        let label_of = |x: &f64| {
            if numeric {
                format!("{x}")
            } else {
                labels
                    .get(x.round() as usize)
                    .map(|s| s.to_string())
                    .unwrap_or_default()
            }
        };
        chart
            .configure_mesh()
            .x_desc(axis)
            .y_desc(caption)
            .x_labels(if numeric { 10 } else { labels.len() })
            .x_label_formatter(&label_of)
            .draw()
            .map_err(plot_err)?;
    }
    for (i, (method, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let s = chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(plot_err)?;
        if text {
            s.label(*method).legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2))
            });
        }
        chart
            .draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))
            .map_err(plot_err)?;
    }
    if text {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<ResultRow> {
        let mut out = Vec::new();
        for snr in [-4.0, 2.0, 6.0] {
            for (m, conf) in [
                ("NoDef", Some(41.25)),
                ("T-ADD", Some(88.0)),
                ("ESPRIT", None),
            ] {
                out.push(ResultRow {
                    condition: format!("snr={snr}"),
                    method: m.into(),
                    rmse: 1.0 / 3.0 + snr,
                    accuracy: 12.5,
                    confidence: conf,
                    samples: 900,
                });
            }
        }
        out
    }

    #[test]
    fn csv_round_trip() {
        let rows = rows();
        let text = rows_to_csv(&rows[..1]).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("condition,method,rmse,acc,conf,B\n"));
        let text = rows_to_csv(&rows).unwrap();
        assert_eq!(rows_from_csv(&text).unwrap(), rows);
    }

    #[test]
    fn formats() {
        assert_eq!("csv".parse::<ReportFormat>().unwrap(), ReportFormat::Csv);
        assert!(matches!(
            "pdf".parse::<ReportFormat>(),
            Err(Error::Config(_))
        ));
        assert!(emit_report(&[], ReportFormat::Csv, Path::new("/tmp")).is_err());
    }

    #[test]
    fn snr_sweep_emits_three_panels() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&rows(), ReportFormat::Plots, dir.path()).unwrap();
        let names: Vec<String> = files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into())
            .collect();
        assert_eq!(
            names,
            ["snr_rmse.png", "snr_accuracy.png", "snr_confidence.png"]
        );
        assert!(files.iter().all(|p| fs::metadata(p).unwrap().len() > 0));
    }
}
