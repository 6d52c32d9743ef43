//! Minimal SVG rendering of already-written CSV artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 48.0;
const HIST_BINS: usize = 40;
const COLORS: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

type PlotResult = Result<(), Box<dyn std::error::Error>>;

struct Scores {
    labels: Vec<u8>,
    /// One column per retained component.
    columns: Vec<Vec<f64>>,
}

fn read_scores(path: &Path) -> Result<Scores, Box<dyn std::error::Error>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let k = rdr.headers()?.iter().filter(|h| h.starts_with("pc") && !h.ends_with("normalized")).count();
    let mut labels = Vec::new();
    let mut columns = vec![Vec::new(); k];
    for rec in rdr.records() {
        let rec = rec?;
        labels.push(rec[0].parse()?);
        for (i, col) in columns.iter_mut().enumerate() {
            col.push(rec[i + 1].parse()?);
        }
    }
    Ok(Scores { labels, columns })
}

fn range(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

fn header(svg: &mut String, width: f64, height: f64, title: &str) {
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>\n",
        width / 2.0
    );
}

fn axes(svg: &mut String, x0: f64, y0: f64, w: f64, h: f64, xlabel: &str, ylabel: &str) {
    let _ = write!(
        svg,
        "<rect x=\"{x0:.1}\" y=\"{y0:.1}\" width=\"{w:.1}\" height=\"{h:.1}\" fill=\"none\" stroke=\"black\"/>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{xlabel}</text>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" transform=\"rotate(-90 {:.1} {:.1})\">{ylabel}</text>\n",
        x0 + w / 2.0,
        y0 + h + 30.0,
        x0 - 30.0,
        y0 + h / 2.0,
        x0 - 30.0,
        y0 + h / 2.0,
    );
}

/// Per-category histogram of the first-component scores.
pub fn histogram_svg(scores_csv: &Path, out: &Path) -> PlotResult {
    let s = read_scores(scores_csv)?;
    let pc1 = s.columns.first().ok_or("no score columns")?;
    let (lo, hi) = range(pc1);
    let width = (hi - lo) / HIST_BINS as f64;
    let mut counts = [[0usize; HIST_BINS]; 8];
    for (&x, &c) in pc1.iter().zip(&s.labels) {
        let b = (((x - lo) / width) as usize).min(HIST_BINS - 1);
        counts[c as usize - 1][b] += 1;
    }
    let peak = counts.iter().flatten().cloned().max().unwrap_or(1).max(1) as f64;

    let mut svg = String::new();
    header(&mut svg, W, H, "First principal component by category");
    let (pw, ph) = (W - 2.0 * MARGIN, H - 2.0 * MARGIN);
    axes(&mut svg, MARGIN, MARGIN, pw, ph, "PC1 score", "count");
    for (c, row) in counts.iter().enumerate() {
        if row.iter().all(|&n| n == 0) {
            continue;
        }
        let mut pts = String::new();
        for (b, &n) in row.iter().enumerate() {
            let y = MARGIN + ph * (1.0 - n as f64 / peak);
            let xa = MARGIN + pw * b as f64 / HIST_BINS as f64;
            let xb = MARGIN + pw * (b + 1) as f64 / HIST_BINS as f64;
            let _ = write!(pts, "{xa:.2},{y:.2} {xb:.2},{y:.2} ");
        }
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>",
            COLORS[c],
            pts.trim_end()
        );
        legend(&mut svg, c, W - MARGIN - 80.0, MARGIN + 14.0);
    }
    svg.push_str("</svg>\n");
    fs::write(out, svg)?;
    Ok(())
}

fn legend(svg: &mut String, c: usize, x: f64, y0: f64) {
    let y = y0 + 14.0 * c as f64;
    let _ = writeln!(
        svg,
        "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{}\"/><text x=\"{:.1}\" y=\"{y:.1}\" font-family=\"sans-serif\" font-size=\"10\">category {}</text>",
        y - 9.0,
        COLORS[c],
        x + 14.0,
        c + 1
    );
}

/// Pairwise 2-D projections of the first three component scores.
pub fn scatter_svg(scores_csv: &Path, out: &Path) -> PlotResult {
    let s = read_scores(scores_csv)?;
    let k = s.columns.len().min(3);
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    if pairs.is_empty() {
        return Err("need at least two components for a scatter plot".into());
    }
    let panel = 300.0;
    let width = MARGIN + pairs.len() as f64 * (panel + MARGIN);
    let height = panel + 2.0 * MARGIN;
    let mut svg = String::new();
    header(&mut svg, width, height, "Principal component scores");
    for (p, &(i, j)) in pairs.iter().enumerate() {
        let x0 = MARGIN + p as f64 * (panel + MARGIN);
        axes(&mut svg, x0, MARGIN, panel, panel, &format!("PC{}", i + 1), &format!("PC{}", j + 1));
        let (xl, xh) = range(&s.columns[i]);
        let (yl, yh) = range(&s.columns[j]);
        for ((&x, &y), &c) in s.columns[i].iter().zip(&s.columns[j]).zip(&s.labels) {
            let px = x0 + panel * (x - xl) / (xh - xl);
            let py = MARGIN + panel * (1.0 - (y - yl) / (yh - yl));
            let _ =
                writeln!(svg, "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"1.2\" fill=\"{}\"/>", COLORS[c as usize - 1]);
        }
    }
    svg.push_str("</svg>\n");
    fs::write(out, svg)?;
    Ok(())
}

/// Error percentage against threshold.
pub fn threshold_svg(sweep_csv: &Path, out: &Path) -> PlotResult {
    let mut rdr = csv::Reader::from_path(sweep_csv)?;
    let mut pts = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        pts.push((rec[0].parse::<f64>()?, rec[1].parse::<f64>()?));
    }
    let top = pts.iter().map(|p| p.1).fold(0.0, f64::max).max(1e-9);
    let (pw, ph) = (W - 2.0 * MARGIN, H - 2.0 * MARGIN);
    let mut svg = String::new();
    header(&mut svg, W, H, "Detection error vs threshold");
    axes(&mut svg, MARGIN, MARGIN, pw, ph, "threshold", "error (%)");
    let line: Vec<String> =
        pts.iter().map(|&(t, e)| format!("{:.2},{:.2}", MARGIN + pw * t, MARGIN + ph * (1.0 - e / top))).collect();
    let _ = writeln!(
        svg,
        "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>",
        COLORS[0],
        line.join(" ")
    );
    svg.push_str("</svg>\n");
    fs::write(out, svg)?;
    Ok(())
}
