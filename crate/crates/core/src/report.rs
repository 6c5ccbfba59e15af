//! CSV schemas for every emitted table, the eval.json schema consumed from
//! the perplexity evaluator, and minimal SVG grid rendering.

use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harsanyi::SignConvention;
use crate::pruning::{PruneMethod, SelectionMode};
use crate::shapley::ScoreKind;

pub const GENERATOR: &str = concat!("headsynergy ", env!("CARGO_PKG_VERSION"));

/// entropy.csv
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub coalition: String,
    pub order: usize,
    pub entropy_bits: f64,
}

/// dividends_pairs.csv
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub head_i: String,
    pub head_j: String,
    pub dividend_bits: f64,
    pub convention: SignConvention,
}

/// dividends_triples.csv
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleRow {
    pub head_i: String,
    pub head_j: String,
    pub head_k: String,
    pub dividend_bits: f64,
    pub convention: SignConvention,
}

/// scores.csv
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub layer: u32,
    pub head: u32,
    pub score_bits: f64,
    pub kind: ScoreKind,
    pub convention: SignConvention,
}

/// masks_grid.csv: one row per (mask, layer, head).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskGridRow {
    pub method: PruneMethod,
    pub mode: SelectionMode,
    pub rate: f64,
    pub seed: Option<u64>,
    pub layer: u32,
    pub head: u32,
    pub pruned: bool,
}

/// masks.csv: one row per emitted mask file, with its FLOP estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskIndexRow {
    pub mask_file: String,
    pub mask_digest: String,
    pub method: PruneMethod,
    pub mode: SelectionMode,
    pub rate: f64,
    pub seed: Option<u64>,
    pub pruned_heads: usize,
    pub attention_flops_saved_fraction: f64,
    pub total_flops_saved_fraction: f64,
}

/// pruning_comparison.csv
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub mask_file: String,
    pub mask_digest: String,
    pub method: PruneMethod,
    pub mode: SelectionMode,
    pub rate: f64,
    pub seed: Option<u64>,
    pub pruned_heads: usize,
    pub attention_flops_saved_fraction: f64,
    pub total_flops_saved_fraction: f64,
    pub perplexity: Option<f64>,
    pub tokens: Option<u64>,
    pub tokens_per_second: Option<f64>,
}

/// eval.json as written by the perplexity evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub model: String,
    pub mask_digest: String,
    pub dataset: String,
    pub samples: u64,
    pub perplexity: f64,
    pub tokens: u64,
    pub tokens_per_second: Option<f64>,
}

impl EvalResult {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let r: EvalResult = serde_json::from_str(&text)?;
        if !(r.perplexity.is_finite() && r.perplexity > 0.0) {
            return Err(Error::Integrity(format!(
                "{}: perplexity must be positive, got {}",
                path.display(),
                r.perplexity
            )));
        }
        Ok(r)
    }
}

pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Colour for t in [0, 1], interpolated over a dark-blue → teal → yellow ramp.
fn ramp(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let t = if t.is_finite() {
        t.clamp(0.0, 1.0)
    } else {
        0.0
    };
    let x = t * (STOPS.len() - 1) as f64;
    let i = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |u: f64, v: f64| (u + (v - u) * f).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(a.0, b.0),
        mix(a.1, b.1),
        mix(a.2, b.2)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// A labelled grid; `None` cells are left blank. Colours scale between the
/// finite minimum and maximum of the grid.
pub fn grid_svg(
    title: &str,
    row_label: &str,
    col_label: &str,
    cells: &[Vec<Option<f64>>],
) -> String {
    const CELL: usize = 18;
    const LEFT: usize = 60;
    const TOP: usize = 50;
    let rows = cells.len();
    let cols = cells.iter().map(Vec::len).max().unwrap_or(0);
    let finite = cells
        .iter()
        .flatten()
        .flatten()
        .copied()
        .filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let width = LEFT + cols * CELL + 20;
    let height = TOP + rows * CELL + 40;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, "<!-- generator: {GENERATOR} -->");
    let _ = writeln!(
        s,
        r#"<text x="{LEFT}" y="20" font-family="sans-serif" font-size="13">{}</text>"#,
        escape(title)
    );
    if lo.is_finite() {
        let _ = writeln!(
            s,
            r#"<text x="{LEFT}" y="36" font-family="sans-serif" font-size="10">range [{lo:.4}, {hi:.4}]</text>"#
        );
    }
    for c in 0..cols {
        let x = LEFT + c * CELL + CELL / 2;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" font-family="sans-serif" font-size="8" text-anchor="middle">{c}</text>"#,
            TOP - 3
        );
    }
    for (r, row) in cells.iter().enumerate() {
        let y = TOP + r * CELL;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="8" text-anchor="end">{r}</text>"#,
            LEFT - 4,
            y + CELL / 2 + 3
        );
        for (c, v) in row.iter().enumerate() {
            let x = LEFT + c * CELL;
            match v {
                Some(v) => {
                    let _ = writeln!(
                        s,
                        r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}"><title>({r}, {c}) {v}</title></rect>"#,
                        ramp((v - lo) / span)
                    );
                }
                None => {
                    let _ = writeln!(
                        s,
                        r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="#ffffff" stroke="#dddddd"/>"##
                    );
                }
            }
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{LEFT}" y="{}" font-family="sans-serif" font-size="10">rows: {} / columns: {}</text>"#,
        height - 10,
        escape(row_label),
        escape(col_label)
    );
    s.push_str("</svg>\n");
    s
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scores.csv");
        let rows = vec![
            ScoreRow {
                layer: 0,
                head: 1,
                score_bits: 2.5,
                kind: ScoreKind::TruncatedPhi,
                convention: SignConvention::Paper,
            },
            ScoreRow {
                layer: 3,
                head: 0,
                score_bits: -0.125,
                kind: ScoreKind::FullEta,
                convention: SignConvention::Raw,
            },
        ];
        write_csv(&p, &rows).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("layer,head,score_bits,kind,convention\n"));
        assert!(text.contains("0,1,2.5,truncated_phi,paper"));
        assert_eq!(read_csv::<ScoreRow>(&p).unwrap(), rows);
    }

    #[test]
    fn optional_columns_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cmp.csv");
        let rows = vec![ComparisonRow {
            mask_file: "m.json".into(),
            mask_digest: "ab".into(),
            method: PruneMethod::Harsanyi,
            mode: SelectionMode::PerLayerCeil,
            rate: 0.05,
            seed: None,
            pruned_heads: 12,
            attention_flops_saved_fraction: 1.0 / 12.0,
            total_flops_saved_fraction: 0.04,
            perplexity: None,
            tokens: None,
            tokens_per_second: None,
        }];
        write_csv(&p, &rows).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(",,,"));
        assert_eq!(read_csv::<ComparisonRow>(&p).unwrap(), rows);
    }

    #[test]
    fn svg_grid_shape() {
        let cells = vec![vec![None, Some(1.0)], vec![Some(1.0), None]];
        let svg = grid_svg("pairs", "head", "head", &cells);
        assert_eq!(svg.matches("<rect").count(), 4);
        assert_eq!(svg.matches("fill=\"#ffffff\"").count(), 2);
        assert!(svg.contains(GENERATOR));
        assert_eq!(ramp(0.0), "#440154");
        assert_eq!(ramp(1.0), "#fde725");
    }

    #[test]
    fn eval_schema() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("eval.json");
        std::fs::write(
            &p,
            r#"{"model": "gpt2", "mask_digest": "abc", "dataset": "gsm8k", "samples": 500,
                "perplexity": 30.1, "tokens": 12000, "tokens_per_second": 812.5}"#,
        )
        .unwrap();
        let r = EvalResult::read(&p).unwrap();
        assert_eq!(r.perplexity, 30.1);
        std::fs::write(
            &p,
            r#"{"model": "gpt2", "mask_digest": "abc", "dataset": "gsm8k", "samples": 500,
                "perplexity": -1, "tokens": 12000, "tokens_per_second": null}"#,
        )
        .unwrap();
        assert!(EvalResult::read(&p).is_err());
    }
}
