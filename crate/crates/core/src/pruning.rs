//! Pruning masks from head scores, random baselines, and an analytic FLOP model.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shapley::ScoreTable;
use crate::trace::HeadId;

/// Slack applied before rounding `rate * count`, so that e.g. 0.05 * 20 is one head, not two.
const ROUNDING_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// ceil(rate · heads_per_layer) heads in every layer.
    #[default]
    PerLayerCeil,
    /// floor(rate · total_heads) heads model-wide.
    GlobalFloor,
}

impl fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMode::PerLayerCeil => "per_layer_ceil",
            SelectionMode::GlobalFloor => "global_floor",
        })
    }
}

impl FromStr for SelectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_layer_ceil" => Ok(SelectionMode::PerLayerCeil),
            "global_floor" => Ok(SelectionMode::GlobalFloor),
            other => Err(Error::InvalidArgument(format!(
                "mode must be per_layer_ceil or global_floor, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneMethod {
    Harsanyi,
    Random,
}

impl fmt::Display for PruneMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PruneMethod::Harsanyi => "harsanyi",
            PruneMethod::Random => "random",
        })
    }
}

impl FromStr for PruneMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "harsanyi" => Ok(PruneMethod::Harsanyi),
            "random" => Ok(PruneMethod::Random),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelGeometry {
    pub model_name: String,
    pub layers: u32,
    pub heads_per_layer: u32,
    pub head_dim: u32,
    pub model_dim: u32,
    pub seq_len: u32,
}

impl ModelGeometry {
    /// Geometry with 64-dimensional heads, model width heads × 64 and 1024-token context.
    pub fn new(model_name: impl Into<String>, layers: u32, heads_per_layer: u32) -> Self {
        ModelGeometry {
            model_name: model_name.into(),
            layers,
            heads_per_layer,
            head_dim: 64,
            model_dim: heads_per_layer * 64,
            seq_len: 1024,
        }
    }

    pub fn total_heads(&self) -> usize {
        self.layers as usize * self.heads_per_layer as usize
    }

    pub fn contains(&self, h: HeadId) -> bool {
        h.layer < self.layers && h.head < self.heads_per_layer
    }

    fn validate(&self) -> Result<()> {
        if self.layers == 0
            || self.heads_per_layer == 0
            || self.head_dim == 0
            || self.model_dim == 0
            || self.seq_len == 0
        {
            return Err(Error::InvalidArgument(format!(
                "geometry fields must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneMask {
    #[serde(rename = "model")]
    pub model_name: String,
    pub rate: f64,
    pub mode: SelectionMode,
    pub method: PruneMethod,
    pub seed: Option<u64>,
    pub pruned: Vec<HeadId>,
}

impl PruneMask {
    pub fn contains(&self, h: HeadId) -> bool {
        self.pruned.binary_search(&h).is_ok()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut mask: PruneMask = serde_json::from_str(text)?;
        mask.pruned.sort_unstable();
        if mask.pruned.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Integrity("duplicate head in mask".into()));
        }
        Ok(mask)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Checks the count formula of the mask's mode against a geometry.
    pub fn check_counts(&self, geometry: &ModelGeometry) -> Result<()> {
        if let Some(h) = self.pruned.iter().find(|h| !geometry.contains(**h)) {
            return Err(Error::Integrity(format!(
                "pruned head {h} outside model geometry"
            )));
        }
        match self.mode {
            SelectionMode::PerLayerCeil => {
                let k = prune_count(geometry, self.rate, self.mode)?;
                for l in 0..geometry.layers {
                    let n = self.pruned.iter().filter(|h| h.layer == l).count();
                    if n != k {
                        return Err(Error::Invariant(format!(
                            "layer {l} has {n} pruned heads, expected {k}"
                        )));
                    }
                }
            }
            SelectionMode::GlobalFloor => {
                let k = prune_count(geometry, self.rate, self.mode)?;
                if self.pruned.len() != k {
                    return Err(Error::Invariant(format!(
                        "{} pruned heads, expected {k}",
                        self.pruned.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Heads to prune: per layer for `PerLayerCeil`, in total for `GlobalFloor`.
pub fn prune_count(geometry: &ModelGeometry, rate: f64, mode: SelectionMode) -> Result<usize> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "rate must be in (0, 1), got {rate}"
        )));
    }
    match mode {
        SelectionMode::PerLayerCeil => {
            let h = geometry.heads_per_layer as usize;
            let k = (rate * h as f64 - ROUNDING_SLACK).ceil() as usize;
            if k >= h {
                return Err(Error::InvalidArgument(format!(
                    "rate {rate} would prune all {h} heads of every layer"
                )));
            }
            Ok(k)
        }
        SelectionMode::GlobalFloor => {
            let t = geometry.total_heads();
            let k = (rate * t as f64 + ROUNDING_SLACK).floor() as usize;
            if k >= t {
                return Err(Error::InvalidArgument(format!(
                    "rate {rate} would prune all {t} heads"
                )));
            }
            Ok(k)
        }
    }
}

/// Lowest-score heads, per layer or model-wide. Ties go to ascending (layer, head).
pub fn select_heads(
    scores: &ScoreTable,
    geometry: &ModelGeometry,
    rate: f64,
    mode: SelectionMode,
) -> Result<PruneMask> {
    geometry.validate()?;
    let k = prune_count(geometry, rate, mode)?;
    if scores.universe().len() != geometry.total_heads()
        || scores
            .universe()
            .heads()
            .iter()
            .any(|h| !geometry.contains(*h))
    {
        return Err(Error::InvalidArgument(format!(
            "score table covers {} heads, model geometry has {}",
            scores.universe().len(),
            geometry.total_heads()
        )));
    }
    let ranking = scores.ranking();
    let mut pruned: Vec<HeadId> = match mode {
        SelectionMode::GlobalFloor => ranking.into_iter().take(k).collect(),
        SelectionMode::PerLayerCeil => (0..geometry.layers)
            .flat_map(|l| {
                ranking
                    .iter()
                    .copied()
                    .filter(move |h| h.layer == l)
                    .take(k)
                    .collect::<Vec<_>>()
            })
            .collect(),
    };
    pruned.sort_unstable();
    Ok(PruneMask {
        model_name: geometry.model_name.clone(),
        rate,
        mode,
        method: PruneMethod::Harsanyi,
        seed: None,
        pruned,
    })
}

/// Uniform sampling without replacement under the same count formula.
pub fn random_mask(
    geometry: &ModelGeometry,
    rate: f64,
    mode: SelectionMode,
    seed: u64,
) -> Result<PruneMask> {
    geometry.validate()?;
    let k = prune_count(geometry, rate, mode)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hpl = geometry.heads_per_layer as usize;
    let mut pruned: Vec<HeadId> = match mode {
        SelectionMode::PerLayerCeil => (0..geometry.layers)
            .flat_map(|l| {
                rand::seq::index::sample(&mut rng, hpl, k)
                    .into_iter()
                    .map(move |h| HeadId::new(l, h as u32))
                    .collect::<Vec<_>>()
            })
            .collect(),
        SelectionMode::GlobalFloor => rand::seq::index::sample(&mut rng, geometry.total_heads(), k)
            .into_iter()
            .map(|i| HeadId::new((i / hpl) as u32, (i % hpl) as u32))
            .collect(),
    };
    pruned.sort_unstable();
    Ok(PruneMask {
        model_name: geometry.model_name.clone(),
        rate,
        mode,
        method: PruneMethod::Random,
        seed: Some(seed),
        pruned,
    })
}

pub const FLOP_FORMULA: &str = "per token and layer: each head costs 2*(4*d*hd) projection FLOPs \
plus 2*(2*T*hd) score/context FLOPs; the MLP costs 2*(8*d^2); pruned heads remove their share of \
attention FLOPs only";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlopReport {
    pub geometry: ModelGeometry,
    pub pruned_heads: usize,
    pub total_heads: usize,
    pub attention_flops_saved_fraction: f64,
    pub total_flops_saved_fraction: f64,
    /// Attention FLOPs as a fraction of all per-layer FLOPs.
    pub attention_share: f64,
    pub formula: String,
    pub throughput_note: String,
}

/// Analytic FLOP savings under a model where attention cost is proportional
/// to the number of active heads.
pub fn flop_estimate(geometry: &ModelGeometry, mask: &PruneMask) -> Result<FlopReport> {
    geometry.validate()?;
    if let Some(h) = mask.pruned.iter().find(|h| !geometry.contains(**h)) {
        return Err(Error::InvalidArgument(format!(
            "mask head {h} outside model geometry {}x{}",
            geometry.layers, geometry.heads_per_layer
        )));
    }
    let d = geometry.model_dim as f64;
    let hd = geometry.head_dim as f64;
    let t = geometry.seq_len as f64;
    let per_head = 2.0 * (4.0 * d * hd) + 2.0 * (2.0 * t * hd);
    let mlp = 2.0 * 8.0 * d * d;
    let attention = geometry.heads_per_layer as f64 * per_head;
    let per_layer = attention + mlp;
    let total_heads = geometry.total_heads();
    let pruned = mask.pruned.len();
    let total = geometry.layers as f64 * per_layer;
    Ok(FlopReport {
        geometry: geometry.clone(),
        pruned_heads: pruned,
        total_heads,
        attention_flops_saved_fraction: pruned as f64 / total_heads as f64,
        total_flops_saved_fraction: pruned as f64 * per_head / total,
        attention_share: attention / per_layer,
        formula: FLOP_FORMULA.into(),
        throughput_note: "analytic estimate only; wall-clock throughput is not measured here"
            .into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harsanyi::SignConvention;
    use crate::shapley::ScoreKind;

    fn scores(layers: u32, hpl: u32, f: impl Fn(HeadId) -> f64) -> ScoreTable {
        let heads: Vec<HeadId> = (0..layers)
            .flat_map(|l| (0..hpl).map(move |h| HeadId::new(l, h)))
            .collect();
        ScoreTable::from_scores(
            heads.into_iter().map(|h| (h, f(h))),
            ScoreKind::TruncatedPhi,
            SignConvention::Paper,
        )
        .unwrap()
    }

    #[test]
    fn five_percent_per_layer_takes_layer_argmin() {
        let g = ModelGeometry::new("gpt2", 12, 12);
        let s = scores(12, 12, |h| ((h.layer * 7 + h.head * 5) % 12) as f64 + 1.0);
        let m = select_heads(&s, &g, 0.05, SelectionMode::PerLayerCeil).unwrap();
        assert_eq!(m.pruned.len(), 12);
        for l in 0..12 {
            let in_layer: Vec<_> = m.pruned.iter().filter(|h| h.layer == l).collect();
            assert_eq!(in_layer.len(), 1);
            let best = (0..12)
                .min_by(|&a, &b| {
                    s.get(HeadId::new(l, a))
                        .unwrap()
                        .total_cmp(&s.get(HeadId::new(l, b)).unwrap())
                })
                .unwrap();
            assert_eq!(in_layer[0].head, best);
        }
        m.check_counts(&g).unwrap();
    }

    #[test]
    fn global_floor_counts() {
        let g = ModelGeometry::new("gpt2", 12, 12);
        let s = scores(12, 12, |h| (h.layer * 12 + h.head) as f64);
        let m = select_heads(&s, &g, 0.20, SelectionMode::GlobalFloor).unwrap();
        assert_eq!(m.pruned.len(), 28);
        assert_eq!(
            prune_count(&g, 0.10, SelectionMode::PerLayerCeil).unwrap(),
            2
        );
        assert_eq!(
            prune_count(&g, 0.20, SelectionMode::PerLayerCeil).unwrap(),
            3
        );
        let g20 = ModelGeometry::new("m", 1, 20);
        assert_eq!(
            prune_count(&g20, 0.05, SelectionMode::PerLayerCeil).unwrap(),
            1
        );
    }

    #[test]
    fn equal_scores_tie_break() {
        let g = ModelGeometry::new("m", 2, 4);
        let s = scores(2, 4, |_| 1.0);
        let m = select_heads(&s, &g, 0.3, SelectionMode::GlobalFloor).unwrap();
        assert_eq!(m.pruned, vec![HeadId::new(0, 0), HeadId::new(0, 1)]);
        let m = select_heads(&s, &g, 0.3, SelectionMode::PerLayerCeil).unwrap();
        assert_eq!(
            m.pruned,
            vec![
                HeadId::new(0, 0),
                HeadId::new(0, 1),
                HeadId::new(1, 0),
                HeadId::new(1, 1)
            ]
        );
    }

    #[test]
    fn rate_and_coverage_errors() {
        let g = ModelGeometry::new("m", 2, 4);
        let s = scores(2, 4, |_| 1.0);
        assert!(select_heads(&s, &g, 0.0, SelectionMode::GlobalFloor).is_err());
        assert!(select_heads(&s, &g, 1.0, SelectionMode::GlobalFloor).is_err());
        assert!(select_heads(&s, &g, 0.9, SelectionMode::PerLayerCeil).is_err());
        let partial = scores(1, 4, |_| 1.0);
        assert!(select_heads(&partial, &g, 0.25, SelectionMode::GlobalFloor).is_err());
    }

    #[test]
    fn random_masks_reproducible() {
        let g = ModelGeometry::new("gpt2", 12, 12);
        let a = random_mask(&g, 0.05, SelectionMode::PerLayerCeil, 3).unwrap();
        let b = random_mask(&g, 0.05, SelectionMode::PerLayerCeil, 3).unwrap();
        assert_eq!(a, b);
        a.check_counts(&g).unwrap();
        let c = random_mask(&g, 0.2, SelectionMode::GlobalFloor, 3).unwrap();
        assert_eq!(c.pruned.len(), 28);
        assert_eq!(c.seed, Some(3));
    }

    #[test]
    fn flop_model() {
        let g = ModelGeometry::new("gpt2", 12, 12);
        let empty = PruneMask {
            model_name: "gpt2".into(),
            rate: 0.05,
            mode: SelectionMode::GlobalFloor,
            method: PruneMethod::Harsanyi,
            seed: None,
            pruned: vec![],
        };
        let r = flop_estimate(&g, &empty).unwrap();
        assert_eq!(r.attention_flops_saved_fraction, 0.0);
        assert_eq!(r.total_flops_saved_fraction, 0.0);

        let m = random_mask(&g, 0.2, SelectionMode::GlobalFloor, 1).unwrap();
        let r = flop_estimate(&g, &m).unwrap();
        assert!((r.attention_flops_saved_fraction - 28.0 / 144.0).abs() < 1e-12);
        // per head 8*768*64 + 4*1024*64 = 655360; attention 12 heads, MLP 16*768^2
        let share = 12.0 * 655_360.0 / (12.0 * 655_360.0 + 9_437_184.0);
        assert!((r.attention_share - share).abs() < 1e-12);
        assert!((r.total_flops_saved_fraction - share * 28.0 / 144.0).abs() < 1e-12);

        let mut outside = m.clone();
        outside.pruned.push(HeadId::new(12, 0));
        assert!(flop_estimate(&g, &outside).is_err());
    }

    #[test]
    fn mask_json_schema() {
        let g = ModelGeometry::new("gpt2", 2, 4);
        let m = random_mask(&g, 0.25, SelectionMode::PerLayerCeil, 11).unwrap();
        let text = m.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["model"], "gpt2");
        assert_eq!(v["mode"], "per_layer_ceil");
        assert_eq!(v["method"], "random");
        assert_eq!(v["seed"], 11);
        assert!(v["pruned"][0]["layer"].is_number());
        assert_eq!(PruneMask::from_json(&text).unwrap(), m);
        let h = select_heads(
            &scores(2, 4, |_| 0.0),
            &g,
            0.25,
            SelectionMode::PerLayerCeil,
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&h.to_json().unwrap()).unwrap();
        assert!(v["seed"].is_null());
    }
}
