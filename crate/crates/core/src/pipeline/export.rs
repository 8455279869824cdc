//! Test-set embedding export: CSV of all embedding coordinates plus the
//! class code, and a companion SVG scatter of the first two coordinates.

use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::eval::{GT_BACKGROUND, GT_UNKNOWN};
use crate::losses::ClassLayout;
use crate::model::{forward, ModelParams};

use super::dataset::SyntheticDataset;
use super::TrainConfig;

/// Writes `<path>` as CSV (`x,y,e2,...,class_id`, one row per test point,
/// class codes: known >= 0, unknown -2, background -1) and a sibling
/// `.svg` scatter. Returns the two paths written.
pub fn export_embeddings(
    params: &ModelParams,
    dataset: &SyntheticDataset,
    cfg: &TrainConfig,
    csv_path: &Path,
) -> Result<(PathBuf, PathBuf)> {
    let layout = ClassLayout::new(cfg.num_known);
    let trace = forward(params, &dataset.test.points, cfg.alpha_scale)?;
    let n = dataset.test.labels.len();
    let dim = trace.embeddings.cols();

    let code = |label: usize| -> i32 {
        if layout.is_known(label) {
            label as i32
        } else if label == layout.unknown_index() {
            GT_UNKNOWN
        } else {
            GT_BACKGROUND
        }
    };

    let mut csv = String::new();
    csv.push_str("x,y");
    for d in 2..dim {
        csv.push_str(&format!(",e{d}"));
    }
    csv.push_str(",class_id\n");
    for i in 0..n {
        let row = trace.embeddings.row(i);
        for (d, v) in row.iter().enumerate() {
            if d > 0 {
                csv.push(',');
            }
            csv.push_str(&format!("{v}"));
        }
        csv.push_str(&format!(",{}\n", code(dataset.test.labels[i])));
    }
    std::fs::write(csv_path, csv)?;

    let svg_path = csv_path.with_extension("svg");
    let svg = render_scatter_svg(&trace.embeddings, &dataset.test.labels, &layout);
    std::fs::write(&svg_path, svg)?;
    Ok((csv_path.to_path_buf(), svg_path))
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Scatter of the first two embedding coordinates: known classes colored,
/// background gray, unknowns drawn as black crosses.
fn render_scatter_svg(
    embeddings: &crate::numerics::DenseMatrix,
    labels: &[usize],
    layout: &ClassLayout,
) -> String {
    let n = labels.len();
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let r = embeddings.row(i);
        min_x = min_x.min(r[0]);
        max_x = max_x.max(r[0]);
        min_y = min_y.min(r[1]);
        max_y = max_y.max(r[1]);
    }
    let span_x = (max_x - min_x).max(1e-9);
    let span_y = (max_y - min_y).max(1e-9);
    let size = 640.0;
    let margin = 32.0;
    let sx = |x: f64| margin + (x - min_x) / span_x * (size - 2.0 * margin);
    let sy = |y: f64| size - margin - (y - min_y) / span_y * (size - 2.0 * margin);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for i in 0..n {
        let r = embeddings.row(i);
        let (px, py) = (sx(r[0]), sy(r[1]));
        let label = labels[i];
        if label == layout.unknown_index() {
            svg.push_str(&format!(
                "<g stroke=\"black\" stroke-width=\"1.4\"><line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\"/><line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\"/></g>\n",
                px - 3.5, py - 3.5, px + 3.5, py + 3.5,
                px - 3.5, py + 3.5, px + 3.5, py - 3.5,
            ));
        } else if label == layout.background_index() {
            svg.push_str(&format!(
                "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"1.6\" fill=\"#c0c0c0\" fill-opacity=\"0.6\"/>\n"
            ));
        } else {
            let color = PALETTE[label % PALETTE.len()];
            svg.push_str(&format!(
                "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"2.6\" fill=\"{color}\" fill-opacity=\"0.75\"/>\n"
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::TrainMode;
    use crate::numerics::Rng;
    use crate::pipeline::generate_dataset;

    #[test]
    fn export_writes_csv_and_valid_svg() {
        let cfg = crate::pipeline::train::tests::fast_cfg(TrainMode::OdSn);
        let ds = generate_dataset(&cfg).unwrap();
        let mut rng = Rng::new(1);
        let params = ModelParams::init(&cfg.model_dims(), &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("embeddings.csv");

        let (csv_file, svg_file) = export_embeddings(&params, &ds, &cfg, &csv_path).unwrap();
        let csv = std::fs::read_to_string(&csv_file).unwrap();
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("x,y,"));
        assert!(header.ends_with(",class_id"));
        // row count = test-set size
        assert_eq!(lines.count(), ds.test.labels.len());
        // unknowns carry the reserved code
        assert!(csv.lines().any(|l| l.ends_with(",-2")));

        let svg = std::fs::read_to_string(&svg_file).unwrap();
        assert_well_formed_xml(&svg);
    }

    /// Minimal XML well-formedness check: every open tag is closed in
    /// order, attributes are quoted, self-closing tags allowed.
    fn assert_well_formed_xml(text: &str) {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = text;
        while let Some(start) = rest.find('<') {
            let end = rest[start..].find('>').expect("unterminated tag") + start;
            let tag = &rest[start + 1..end];
            rest = &rest[end + 1..];
            if let Some(name) = tag.strip_prefix('/') {
                let open = stack.pop().expect("closing tag without opener");
                assert_eq!(open, name.trim(), "mismatched closing tag");
            } else if tag.ends_with('/') || tag.starts_with('?') || tag.starts_with('!') {
                // self-closing or declaration
            } else {
                let name: String =
                    tag.split_whitespace().next().unwrap_or("").to_string();
                assert!(!name.is_empty(), "empty tag name");
                stack.push(name);
            }
            // even number of quotes inside the tag body
            assert!(tag.matches('"').count() % 2 == 0, "unbalanced quotes in {tag}");
        }
        assert!(stack.is_empty(), "unclosed tags remain: {stack:?}");
    }
}
