//! Deterministic CSV emission and a minimal SVG plot writer.
//!
//! Floats are printed with 17 significant digits (`{:.16e}`), which
//! round-trips every f64 exactly and makes output byte-identical across
//! runs with equal inputs.

use std::path::Path;

use crate::error::Result;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// A homogeneous CSV table with a header row.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, fields: Vec<String>) {
        assert_eq!(
            fields.len(),
            self.header.len(),
            "row width does not match the header"
        );
        self.rows.push(fields);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<CsvTable> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| crate::Error::Parse("empty CSV".into()))?
            .split(',')
            .map(|s| s.to_string())
            .collect::<Vec<_>>();
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<String> = line.split(',').map(|s| s.to_string()).collect();
            if fields.len() != header.len() {
                return Err(crate::Error::Parse(format!(
                    "row {}: {} fields, header has {}",
                    k + 2,
                    fields.len(),
                    header.len()
                )));
            }
            rows.push(fields);
        }
        Ok(CsvTable { header, rows })
    }
}

/// Writes a log-log scatter/line plot of one or more series as a
/// standalone SVG file.
pub fn write_loglog_svg(
    path: &Path,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[(&str, Vec<(f64, f64)>)],
) -> Result<()> {
    let (w, h) = (640.0, 480.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (_, s) in series {
        for &(x, y) in s {
            if x > 0.0 && y > 0.0 {
                pts.push((x.log10(), y.log10()));
            }
        }
    }
    if pts.is_empty() {
        return Err(crate::Error::InvalidArgument(
            "no positive data to plot on log-log axes".into(),
        ));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let pad = 0.05;
    let (xr, yr) = (x1 - x0, y1 - y0);
    let (x0, x1, y0, y1) = (x0 - pad * xr, x1 + pad * xr, y0 - pad * yr, y1 + pad * yr);
    let sx = |x: f64| ml + (x.log10() - x0) / (x1 - x0) * (w - ml - mr);
    let sy = |y: f64| h - mb - (y.log10() - y0) / (y1 - y0) * (h - mt - mb);

    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{title}</text>\n",
        w / 2.0
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb,
        w - mr,
        h - mb
    ));
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{xlabel}</text>\n",
        (ml + w - mr) / 2.0,
        h - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 16 {})\">{ylabel}</text>\n",
        (mt + h - mb) / 2.0,
        (mt + h - mb) / 2.0
    ));
    // decade ticks
    let mut dx = x0.ceil() as i64;
    while (dx as f64) <= x1 {
        let px = ml + (dx as f64 - x0) / (x1 - x0) * (w - ml - mr);
        svg.push_str(&format!(
            "<line x1=\"{px}\" y1=\"{}\" x2=\"{px}\" y2=\"{}\" stroke=\"#cccccc\"/>\n",
            mt,
            h - mb
        ));
        svg.push_str(&format!(
            "<text x=\"{px}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">1e{dx}</text>\n",
            h - mb + 16.0
        ));
        dx += 1;
    }
    let mut dy = y0.ceil() as i64;
    while (dy as f64) <= y1 {
        let py = h - mb - (dy as f64 - y0) / (y1 - y0) * (h - mt - mb);
        svg.push_str(&format!(
            "<line x1=\"{ml}\" y1=\"{py}\" x2=\"{}\" y2=\"{py}\" stroke=\"#cccccc\"/>\n",
            w - mr
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e{dy}</text>\n",
            ml - 6.0,
            py + 4.0
        ));
        dy += 1;
    }
    for (si, (label, s)) in series.iter().enumerate() {
        let color = colors[si % colors.len()];
        let path_d: Vec<String> = s
            .iter()
            .filter(|(x, y)| *x > 0.0 && *y > 0.0)
            .enumerate()
            .map(|(i, &(x, y))| {
                format!(
                    "{}{:.2},{:.2}",
                    if i == 0 { "M" } else { "L" },
                    sx(x),
                    sy(y)
                )
            })
            .collect();
        svg.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            path_d.join(" ")
        ));
        for &(x, y) in s.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0) {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                sx(x),
                sy(y)
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{label}</text>\n",
            w - mr - 150.0,
            mt + 18.0 * (si as f64 + 1.0)
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_is_reproducible_and_round_trips() {
        let v = 1.0 / 3.0;
        let s = fmt_f64(v);
        assert_eq!(s, fmt_f64(1.0 / 3.0));
        let back: f64 = s.parse().unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn csv_round_trip() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.push_row(vec![fmt_f64(0.1), "7".into()]);
        let text = t.to_csv();
        let back = CsvTable::parse(&text).unwrap();
        assert_eq!(back.header, t.header);
        assert_eq!(back.rows, t.rows);
        // empty table: header only
        let empty = CsvTable::new(&["x"]);
        assert_eq!(empty.to_csv(), "x\n");
    }

    #[test]
    fn svg_writes_a_file() {
        let dir = std::env::temp_dir().join("tridis_svg_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("plot.svg");
        write_loglog_svg(
            &path,
            "test",
            "eps",
            "energy",
            &[("series", vec![(0.1, 1.0), (0.01, 0.5)])],
        )
        .unwrap();
        let body = std::fs::read_to_string(&path).unwrap();
        assert!(body.starts_with("<svg"));
        assert!(body.contains("series"));
    }
}
