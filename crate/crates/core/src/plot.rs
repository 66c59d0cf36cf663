//! SVG line charts of the CSV tables written by the CLI.

use plotters::prelude::*;

use crate::error::{Error, Result};

/// Numeric table: header names and rows of equal length.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Config("empty CSV".into()))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        if header.len() < 2 {
            return Err(Error::Config("CSV needs at least two columns".into()));
        }
        let rows = lines
            .enumerate()
            .map(|(i, line)| {
                let row: Vec<f64> = line
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::Config(format!("CSV row {}: {e}", i + 2)))?;
                if row.len() != header.len() {
                    return Err(Error::Config(format!("CSV row {} has {} fields, expected {}", i + 2, row.len(), header.len())));
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        if rows.is_empty() {
            return Err(Error::Config("CSV has no data rows".into()));
        }
        Ok(Self { header, rows })
    }

    /// Convergence tables are indexed by `eta`.
    pub fn is_convergence(&self) -> bool {
        self.header[0] == "eta"
    }
}

fn plot_err<E: std::fmt::Debug>(e: E) -> Error {
    Error::Config(format!("plotting failed: {e:?}"))
}

/// Every column against the first one. On log axes non-positive values are
/// dropped.
pub fn render_svg(table: &Table, log_log: bool) -> Result<String> {
    let keep = |v: f64| v.is_finite() && (!log_log || v > 0.0);
    let series: Vec<(String, Vec<(f64, f64)>)> = (1..table.header.len())
        .map(|c| {
            let pts = table.rows.iter().map(|r| (r[0], r[c])).filter(|&(x, y)| keep(x) && keep(y)).collect();
            (table.header[c].clone(), pts)
        })
        .collect();
    let all: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    if all.is_empty() {
        return Err(Error::Config("nothing to plot".into()));
    }
    let bounds = |vals: Vec<f64>| {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else if log_log {
            (lo / 2.0, hi * 2.0)
        } else {
            (lo - 1.0, hi + 1.0)
        }
    };
    let (x0, x1) = bounds(all.iter().map(|p| p.0).collect());
    let (y0, y1) = bounds(all.iter().map(|p| p.1).collect());

    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (800, 560)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut builder = ChartBuilder::on(&root);
        builder.margin(20).x_label_area_size(40).y_label_area_size(70);
        let palette = [BLUE, RED, GREEN, MAGENTA, CYAN, BLACK];
        macro_rules! draw {
            ($chart:expr) => {{
                let mut chart = $chart;
                chart.configure_mesh().x_desc(table.header[0].as_str()).draw().map_err(plot_err)?;
                for (i, (name, pts)) in series.iter().enumerate() {
                    let color = palette[i % palette.len()];
                    chart
                        .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
                        .map_err(plot_err)?
                        .label(name.as_str())
                        .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
                    chart.draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled()))).map_err(plot_err)?;
                }
                chart
                    .configure_series_labels()
                    .background_style(WHITE.mix(0.8))
                    .border_style(BLACK)
                    .draw()
                    .map_err(plot_err)?;
            }};
        }
        if log_log {
            draw!(builder.build_cartesian_2d((x0..x1).log_scale(), (y0..y1).log_scale()).map_err(plot_err)?);
        } else {
            draw!(builder.build_cartesian_2d(x0..x1, y0..y1).map_err(plot_err)?);
        }
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}
