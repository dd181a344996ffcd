//! Minimal deterministic SVG rendering for report charts. Charts are
//! presentation-only; acceptance always validates the JSON/CSV numbers.

use crate::assess::CoverageLabel;
use crate::report::CoverageMatrix;
use std::fmt::Write;

fn label_color(label: CoverageLabel) -> &'static str {
    match label {
        CoverageLabel::Full => "#1a9850",
        CoverageLabel::Partial => "#fec44f",
        CoverageLabel::Unknown => "#bdbdbd",
        CoverageLabel::No => "#d73027",
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Vertical bar chart of (name, value) pairs on a fixed [0, y_max] scale.
pub fn bar_chart(title: &str, pairs: &[(String, f64)], y_max: f64) -> String {
    let width = 640.0;
    let height = 360.0;
    let margin_left = 60.0;
    let margin_bottom = 70.0;
    let margin_top = 40.0;
    let plot_w = width - margin_left - 20.0;
    let plot_h = height - margin_top - margin_bottom;
    let n = pairs.len().max(1) as f64;
    let slot = plot_w / n;
    let bar_w = (slot * 0.6).min(80.0);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    let _ = write!(
        svg,
        "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n<text x=\"{:.1}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        width / 2.0,
        escape(title)
    );
    // Axis lines and gridlines at quarters.
    let _ = write!(
        svg,
        "<line x1=\"{margin_left}\" y1=\"{margin_top}\" x2=\"{margin_left}\" y2=\"{:.1}\" stroke=\"#333\"/>\n<line x1=\"{margin_left}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#333\"/>\n",
        margin_top + plot_h,
        margin_top + plot_h,
        margin_left + plot_w,
        margin_top + plot_h
    );
    for quarter in 0..=4 {
        let value = y_max * f64::from(quarter) / 4.0;
        let y = margin_top + plot_h * (1.0 - value / y_max);
        let _ = write!(
            svg,
            "<line x1=\"{margin_left}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{value:.2}</text>\n",
            margin_left + plot_w,
            margin_left - 6.0,
            y + 4.0
        );
    }
    for (index, (name, value)) in pairs.iter().enumerate() {
        let clamped = value.clamp(0.0, y_max);
        let x = margin_left + slot * index as f64 + (slot - bar_w) / 2.0;
        let bar_h = plot_h * clamped / y_max;
        let y = margin_top + plot_h - bar_h;
        let center = x + bar_w / 2.0;
        let _ = write!(
            svg,
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{bar_w:.1}\" height=\"{bar_h:.1}\" fill=\"#4575b4\"/>\n<text x=\"{center:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{value:.3}</text>\n<text x=\"{center:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\" transform=\"rotate(-35 {center:.1} {:.1})\">{}</text>\n",
            y - 4.0,
            margin_top + plot_h + 14.0,
            margin_top + plot_h + 14.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Heatmap of the coverage matrix: one row per technique, one column per
/// dataset, cells colored by label.
pub fn coverage_heatmap(matrix: &CoverageMatrix) -> String {
    let cell_w = 90.0;
    let cell_h = 16.0;
    let left = 110.0;
    let top = 60.0;
    let width = left + cell_w * matrix.datasets.len() as f64 + 20.0;
    let height = top + cell_h * matrix.techniques.len() as f64 + 40.0;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\n<rect width=\"{width:.0}\" height=\"{height:.0}\" fill=\"white\"/>\n<text x=\"{:.1}\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">Coverage labels by technique and dataset</text>\n",
        width / 2.0
    );
    for (column, dataset) in matrix.datasets.iter().enumerate() {
        let x = left + cell_w * column as f64 + cell_w / 2.0;
        let _ = writeln!(
            svg,
            "<text x=\"{x:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
            top - 8.0,
            escape(dataset)
        );
    }
    for (row, technique) in matrix.techniques.iter().enumerate() {
        let y = top + cell_h * row as f64;
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{}</text>",
            left - 6.0,
            y + cell_h - 4.0,
            escape(technique)
        );
        for (column, dataset) in matrix.datasets.iter().enumerate() {
            let x = left + cell_w * column as f64;
            let label = matrix.cell(technique, dataset);
            let _ = writeln!(
                svg,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{}\" stroke=\"white\"/>",
                cell_w - 2.0,
                cell_h - 2.0,
                label_color(label)
            );
        }
    }
    // Legend row.
    let legend_y = height - 14.0;
    let mut legend_x = left;
    for label in CoverageLabel::ALL {
        let _ = write!(
            svg,
            "<rect x=\"{legend_x:.1}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n<text x=\"{:.1}\" y=\"{legend_y:.1}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            legend_y - 11.0,
            label_color(label),
            legend_x + 16.0,
            label.as_str()
        );
        legend_x += 90.0;
    }
    svg.push_str("</svg>\n");
    svg
}
