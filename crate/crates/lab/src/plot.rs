//! Static log-log SVG plots of result CSVs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hgdlab::{LabError, Result};
use plotters::prelude::*;

use crate::table::Table;

const BOUND_FIELD: &str = "bound_value";

/// Per-group `(x, mean y)` lines, sorted by x.
type Series = BTreeMap<String, Vec<(f64, f64)>>;

fn group_means(t: &Table, x: usize, y: usize, group: Option<usize>) -> Series {
    let mut acc: BTreeMap<String, BTreeMap<u64, (f64, f64, usize)>> = BTreeMap::new();
    for row in &t.rows {
        let (Some(xv), Some(yv)) = (row[x].as_f64(), row[y].as_f64()) else { continue };
        if !(xv > 0.0 && yv > 0.0 && xv.is_finite() && yv.is_finite()) {
            continue;
        }
        let g = group.map(|g| row[g].to_string()).unwrap_or_default();
        let e = acc.entry(g).or_default().entry(xv.to_bits()).or_insert((xv, 0.0, 0));
        e.1 += yv;
        e.2 += 1;
    }
    acc.into_iter()
        .map(|(g, pts)| {
            let mut v: Vec<(f64, f64)> = pts.into_values().map(|(x, s, k)| (x, s / k as f64)).collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            (g, v)
        })
        .collect()
}

fn plot_err<E: std::error::Error>(e: E) -> LabError {
    LabError::Validation(format!("plot rendering failed: {e}"))
}

/// Renders `y_field` against `x_field` on log-log axes, one line per group,
/// with the `bound_value` column overlaid when the CSV has one. Writes next
/// to the CSV unless `out` is given.
pub fn emit_plot(
    csv_path: &Path,
    x_field: &str,
    y_field: &str,
    group_field: Option<&str>,
    out: Option<&Path>,
) -> Result<PathBuf> {
    let t = Table::read_csv(csv_path)?;
    let svg = render_svg(&t, x_field, y_field, group_field)?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| csv_path.with_extension(format!("{y_field}.svg")));
    std::fs::write(&out, svg)?;
    Ok(out)
}

/// The SVG document as a string; a pure function of the table.
pub fn render_svg(t: &Table, x_field: &str, y_field: &str, group_field: Option<&str>) -> Result<String> {
    if t.is_empty() {
        return Err(LabError::Usage("no rows".into()));
    }
    let x = t.column(x_field)?;
    let y = t.column(y_field)?;
    let g = group_field.map(|name| t.column(name)).transpose()?;
    let measured = group_means(t, x, y, g);
    let bound = match t.column(BOUND_FIELD) {
        Ok(b) if y_field != BOUND_FIELD => group_means(t, x, b, g),
        _ => Series::new(),
    };
    let all: Vec<(f64, f64)> = measured.values().chain(bound.values()).flatten().copied().collect();
    if all.is_empty() {
        return Err(LabError::Usage(format!("no positive ({x_field}, {y_field}) pairs to plot")));
    }
    let (mut x0, mut x1, mut y0, mut y1) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY), |(a, b, c, d), &(px, py)| {
            (a.min(px), b.max(px), c.min(py), d.max(py))
        });
    // pad a decade-fraction so single points and flat lines still get a range
    x0 /= 1.2;
    x1 *= 1.2;
    y0 /= 1.5;
    y1 *= 1.5;

    let mut buf = String::new();
    {
        let root = SVGBackend::with_string(&mut buf, (800, 560)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .margin(20)
            .x_label_area_size(45)
            .y_label_area_size(70)
            .caption(format!("{y_field} vs {x_field}"), ("sans-serif", 22))
            .build_cartesian_2d((x0..x1).log_scale(), (y0..y1).log_scale())
            .map_err(plot_err)?;
        chart.configure_mesh().x_desc(x_field).y_desc(y_field).draw().map_err(plot_err)?;
        let legend = measured.len() > 1 || !bound.is_empty();
        for (i, (name, pts)) in measured.iter().enumerate() {
            let color = Palette99::pick(i).to_rgba();
            let label = if name.is_empty() { y_field.to_string() } else { name.clone() };
            let s = chart.draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2))).map_err(plot_err)?;
            if legend {
                s.label(label).legend(move |(lx, ly)| PathElement::new(vec![(lx, ly), (lx + 18, ly)], color));
            }
            chart.draw_series(pts.iter().map(|&p| Circle::new(p, 4, color.filled()))).map_err(plot_err)?;
        }
        for (i, (name, pts)) in bound.iter().enumerate() {
            let color = Palette99::pick(i).mix(0.5);
            let label = if name.is_empty() { BOUND_FIELD.to_string() } else { format!("{name} bound") };
            chart
                .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(1)))
                .map_err(plot_err)?
                .label(label)
                .legend(move |(lx, ly)| PathElement::new(vec![(lx, ly), (lx + 18, ly)], color));
        }
        if legend {
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()
                .map_err(plot_err)?;
        }
        root.present().map_err(plot_err)?;
    }
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::Value;

    fn table() -> Table {
        let mut t = Table::new(["opt", "measured_err", "bound_value", "loss"]);
        for (o, m, b, l) in [(0.01, 0.012, 0.3, "a"), (0.02, 0.025, 0.4, "a"), (0.01, 0.02, 0.3, "b")] {
            t.push(vec![Value::from(o), Value::from(m), Value::from(b), Value::from(l)]);
        }
        t
    }

    #[test]
    fn renders_deterministically() {
        let t = table();
        let a = render_svg(&t, "opt", "measured_err", Some("loss")).unwrap();
        let b = render_svg(&t, "opt", "measured_err", Some("loss")).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.contains("a bound"));
    }

    #[test]
    fn single_group_has_no_group_legend() {
        let mut t = Table::new(["x", "y"]);
        for x in [1.0, 2.0, 4.0] {
            t.push(vec![Value::from(x), Value::from(x * x)]);
        }
        let svg = render_svg(&t, "x", "y", None).unwrap();
        assert!(svg.contains("<svg"));
    }

    #[test]
    fn errors_name_the_problem() {
        let empty = Table::new(["x", "y"]);
        assert_eq!(render_svg(&empty, "x", "y", None).unwrap_err().to_string(), "usage error: no rows");
        let err = render_svg(&table(), "opt", "nope", None).unwrap_err().to_string();
        assert!(err.contains("measured_err"), "{err}");
    }
}
