//! Pipeline orchestration behind the `headsynergy` subcommands.
//!
//! Every command reads its inputs, computes, and writes only into the
//! configured output directory.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coalition::Coalition;
use crate::entropy::{build_energy_table, DROPPED_CONSTANT_NOTE};
use crate::error::{Error, Result};
use crate::gibbs::{gibbs_distribution, gibbs_optimality_audit, pruning_delta_audit};
use crate::gibbs::{CoalitionWeight, PruningAudit, GIBBS_MAX_HEADS};
use crate::harsanyi::{mobius_dividends, SignConvention};
use crate::pruning::{flop_estimate, random_mask, select_heads, ModelGeometry, PruneMask};
use crate::pruning::{PruneMethod, SelectionMode};
use crate::report::{
    grid_svg, read_csv, write_csv, write_text, ComparisonRow, EntropyRow, EvalResult, MaskGridRow,
    MaskIndexRow, PairRow, ScoreRow, TripleRow,
};
use crate::shapley::{full_shapley, truncated_shapley, ScoreKind, ScoreSource, ScoreTable};
use crate::trace::{load_traces, HeadId, TraceSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UniverseSelector {
    /// Every head of one layer.
    Layer(u32),
    /// An explicit head list (may span layers).
    Heads(Vec<HeadId>),
    /// Each layer in turn, pairs only.
    AllLayersPairwise,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub traces: Option<PathBuf>,
    pub universe: UniverseSelector,
    pub max_order: usize,
    pub convention: SignConvention,
    pub rates: Vec<f64>,
    pub modes: Vec<SelectionMode>,
    pub beta: f64,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    /// Random perturbations tried by the Gibbs optimality audit.
    pub trials: usize,
    /// Heads removed in the Gibbs pruning audit; defaults to the lowest-|η| head.
    pub prune_heads: Option<Vec<HeadId>>,
    pub head_dim: u32,
    pub model_dim: Option<u32>,
    pub seq_len: u32,
    /// eval.json files from the perplexity evaluator.
    pub evals: Vec<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            traces: None,
            universe: UniverseSelector::Layer(0),
            max_order: 3,
            convention: SignConvention::Paper,
            rates: vec![0.05, 0.10, 0.20],
            modes: vec![SelectionMode::PerLayerCeil, SelectionMode::GlobalFloor],
            beta: 1.0,
            seeds: vec![1],
            out: PathBuf::from("out"),
            trials: 1000,
            prune_heads: None,
            head_dim: 64,
            model_dim: None,
            seq_len: 1024,
            evals: Vec::new(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self.rates.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return Err(Error::InvalidArgument(format!("rate {r} outside (0, 1)")));
        }
        if self.max_order == 0 {
            return Err(Error::InvalidArgument("max_order must be >= 1".into()));
        }
        if let UniverseSelector::Heads(h) = &self.universe {
            if h.is_empty() {
                return Err(Error::InvalidArgument("head list is empty".into()));
            }
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    fn trace_path(&self) -> Result<&Path> {
        self.traces
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("--traces is required".into()))
    }

    fn prepare_out(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))
    }

    /// Refuses to write over any input file.
    fn output(&self, name: &str) -> Result<PathBuf> {
        let p = self.out.join(name);
        let inputs = self.traces.iter().chain(self.evals.iter());
        for input in inputs {
            if same_file(&p, input) {
                return Err(Error::InvalidArgument(format!(
                    "output {} would overwrite input {}",
                    p.display(),
                    input.display()
                )));
            }
        }
        Ok(p)
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Metadata written by `analyze` and read back by later stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub model: String,
    pub layers: u32,
    pub heads_per_layer: u32,
    pub samples: usize,
    pub granularity: String,
    pub trace_digest: Option<String>,
    pub convention: SignConvention,
    pub max_order: usize,
    pub universe: UniverseSelector,
    pub entropy_unit: String,
    pub dropped_constant_note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeSummary {
    pub entropy_rows: usize,
    pub pair_rows: usize,
    pub triple_rows: usize,
    pub score_rows: usize,
    pub files: Vec<PathBuf>,
}

fn universes(traces: &TraceSet, config: &PipelineConfig) -> Result<Vec<(Vec<HeadId>, usize)>> {
    let clamp = |heads: Vec<HeadId>, order: usize| {
        let n = heads.len();
        (heads, order.min(n))
    };
    match &config.universe {
        UniverseSelector::Layer(l) => Ok(vec![clamp(traces.layer_heads(*l)?, config.max_order)]),
        UniverseSelector::Heads(hs) => {
            if let Some(h) = hs.iter().find(|h| !traces.contains(**h)) {
                return Err(Error::UnknownHead(*h));
            }
            Ok(vec![clamp(hs.clone(), config.max_order)])
        }
        UniverseSelector::AllLayersPairwise => (0..traces.header().num_layers)
            .map(|l| Ok(clamp(traces.layer_heads(l)?, 2)))
            .collect(),
    }
}

/// Entropies, pair/triple dividends and per-head scores for the selected universe(s).
pub fn cmd_analyze(config: &PipelineConfig) -> Result<AnalyzeSummary> {
    config.validate()?;
    let trace_path = config.trace_path()?;
    let traces = load_traces(trace_path)?;
    config.prepare_out()?;

    let mut entropy_rows = Vec::new();
    let mut pair_rows = Vec::new();
    let mut triple_rows = Vec::new();
    let mut score_rows = Vec::new();
    let mut max_order_used = 0;

    for (heads, max_order) in universes(&traces, config)? {
        max_order_used = max_order_used.max(max_order);
        let energies = build_energy_table(&traces, &heads, max_order)?;
        energies.check_entropy_invariants()?;
        for (c, e) in energies.iter().filter(|(c, _)| !c.is_empty()) {
            entropy_rows.push(EntropyRow {
                order: c.len(),
                coalition: c.to_string(),
                entropy_bits: e,
            });
        }
        let dividends = mobius_dividends(&energies, config.convention)?;
        for (c, d) in dividends.of_order(2) {
            if config.convention == SignConvention::Paper && d < -1e-9 {
                return Err(Error::Invariant(format!(
                    "pair dividend {d} for {c} is negative; mutual information cannot be"
                )));
            }
            let m = c.members();
            pair_rows.push(PairRow {
                head_i: m[0].to_string(),
                head_j: m[1].to_string(),
                dividend_bits: d,
                convention: config.convention,
            });
        }
        for (c, d) in dividends.of_order(3) {
            let m = c.members();
            triple_rows.push(TripleRow {
                head_i: m[0].to_string(),
                head_j: m[1].to_string(),
                head_k: m[2].to_string(),
                dividend_bits: d,
                convention: config.convention,
            });
        }
        let phi = if heads.len() >= 2 {
            truncated_shapley(&dividends)?
        } else {
            full_shapley(&dividends, false)?
        };
        for (h, v) in phi.iter() {
            score_rows.push(ScoreRow {
                layer: h.layer,
                head: h.head,
                score_bits: v,
                kind: ScoreKind::TruncatedPhi,
                convention: config.convention,
            });
        }
        if energies.is_full_order() {
            let eta = full_shapley(&mobius_dividends(&energies, SignConvention::Raw)?, false)?;
            for (h, v) in eta.iter() {
                score_rows.push(ScoreRow {
                    layer: h.layer,
                    head: h.head,
                    score_bits: v,
                    kind: ScoreKind::FullEta,
                    convention: SignConvention::Raw,
                });
            }
        }
    }

    let mut files = Vec::new();
    let mut emit = |name: &str, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        let p = config.output(name)?;
        f(&p)?;
        files.push(p);
        Ok(())
    };
    emit("entropy.csv", &|p| write_csv(p, &entropy_rows))?;
    emit("dividends_pairs.csv", &|p| write_csv(p, &pair_rows))?;
    if max_order_used >= 3 {
        emit("dividends_triples.csv", &|p| write_csv(p, &triple_rows))?;
    }
    emit("scores.csv", &|p| write_csv(p, &score_rows))?;
    let info = RunInfo {
        model: traces.header().model_name.clone(),
        layers: traces.header().num_layers,
        heads_per_layer: traces.header().heads_per_layer,
        samples: traces.num_samples(),
        granularity: traces.header().granularity.to_string(),
        trace_digest: traces.source_digest().map(str::to_owned),
        convention: config.convention,
        max_order: max_order_used,
        universe: config.universe.clone(),
        entropy_unit: "bits".into(),
        dropped_constant_note: DROPPED_CONSTANT_NOTE.into(),
    };
    emit("run.json", &|p| {
        write_text(p, &(serde_json::to_string_pretty(&info)? + "\n"))
    })?;

    Ok(AnalyzeSummary {
        entropy_rows: entropy_rows.len(),
        pair_rows: pair_rows.len(),
        triple_rows: triple_rows.len(),
        score_rows: score_rows.len(),
        files,
    })
}

fn read_run_info(out: &Path) -> Option<RunInfo> {
    let text = std::fs::read_to_string(out.join("run.json")).ok()?;
    serde_json::from_str(&text).ok()
}

/// Reads scores.csv, preferring truncated φ rows and falling back to full η.
pub fn load_scores(path: &Path) -> Result<ScoreTable> {
    if !path.exists() {
        return Err(Error::InvalidArgument(format!(
            "missing scores: {} (run analyze first)",
            path.display()
        )));
    }
    let rows: Vec<ScoreRow> = read_csv(path)?;
    for kind in [
        ScoreKind::TruncatedPhi,
        ScoreKind::FullEta,
        ScoreKind::OracleEta,
    ] {
        let picked: Vec<&ScoreRow> = rows.iter().filter(|r| r.kind == kind).collect();
        if let Some(first) = picked.first() {
            return ScoreTable::from_scores(
                picked
                    .iter()
                    .map(|r| (HeadId::new(r.layer, r.head), r.score_bits)),
                kind,
                first.convention,
            );
        }
    }
    Err(Error::InvalidArgument(format!(
        "{} holds no scores",
        path.display()
    )))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneSummary {
    pub masks: Vec<PathBuf>,
    pub grid_rows: usize,
}

fn rate_tag(rate: f64) -> String {
    format!("{rate:.2}")
}

pub fn mask_file_name(mask: &PruneMask) -> String {
    let mut name = format!("{}_{}_r{}", mask.method, mask.mode, rate_tag(mask.rate));
    if let Some(s) = mask.seed {
        name.push_str(&format!("_s{s}"));
    }
    name + ".json"
}

/// Harsanyi and random masks at every (rate, mode, seed), with FLOP estimates.
pub fn cmd_prune(config: &PipelineConfig) -> Result<PruneSummary> {
    config.validate()?;
    let scores = load_scores(&config.out.join("scores.csv"))?;
    let run = read_run_info(&config.out);
    let heads = scores.universe().heads();
    let layers = heads.iter().map(|h| h.layer).max().map_or(0, |l| l + 1);
    let hpl = heads.iter().map(|h| h.head).max().map_or(0, |h| h + 1);
    let (model_name, layers, hpl) = match &run {
        Some(r) => (r.model.clone(), r.layers, r.heads_per_layer),
        None => ("unknown".to_string(), layers, hpl),
    };
    let geometry = ModelGeometry {
        model_name,
        layers,
        heads_per_layer: hpl,
        head_dim: config.head_dim,
        model_dim: config.model_dim.unwrap_or(hpl * config.head_dim),
        seq_len: config.seq_len,
    };

    if scores.universe().len() != geometry.total_heads() {
        return Err(Error::InvalidArgument(format!(
            "scores.csv covers {} of the model's {} heads; masks need every head \
             (run analyze with --all-layers)",
            scores.universe().len(),
            geometry.total_heads()
        )));
    }

    let mask_dir = config.out.join("masks");
    std::fs::create_dir_all(&mask_dir).map_err(|e| Error::io(&mask_dir, e))?;
    let mut grid = Vec::new();
    let mut index = Vec::new();
    let mut written = Vec::new();
    for &mode in &config.modes {
        for &rate in &config.rates {
            let mut masks = vec![select_heads(&scores, &geometry, rate, mode)?];
            for &seed in &config.seeds {
                masks.push(random_mask(&geometry, rate, mode, seed)?);
            }
            for mask in masks {
                mask.check_counts(&geometry)?;
                let name = mask_file_name(&mask);
                let path = mask_dir.join(&name);
                mask.write(&path)?;
                let flops = flop_estimate(&geometry, &mask)?;
                index.push(MaskIndexRow {
                    mask_file: format!("masks/{name}"),
                    mask_digest: sha256_file(&path)?,
                    method: mask.method,
                    mode,
                    rate,
                    seed: mask.seed,
                    pruned_heads: mask.pruned.len(),
                    attention_flops_saved_fraction: flops.attention_flops_saved_fraction,
                    total_flops_saved_fraction: flops.total_flops_saved_fraction,
                });
                for l in 0..layers {
                    for h in 0..hpl {
                        let head = HeadId::new(l, h);
                        grid.push(MaskGridRow {
                            method: mask.method,
                            mode,
                            rate,
                            seed: mask.seed,
                            layer: l,
                            head: h,
                            pruned: mask.contains(head),
                        });
                    }
                }
                written.push(path);
            }
        }
    }
    write_csv(config.output("masks_grid.csv")?, &grid)?;
    write_csv(config.output("masks.csv")?, &index)?;
    Ok(PruneSummary {
        masks: written,
        grid_rows: grid.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsReport {
    pub beta: f64,
    pub universe: Vec<String>,
    pub log_partition: f64,
    pub free_energy: f64,
    pub top_coalitions: Vec<CoalitionWeight>,
    pub optimality_trials: usize,
    pub violations: usize,
    pub min_gap: f64,
    pub pruning_audit: PruningAudit,
}

/// Exact Gibbs model over the selected universe, its optimality audit, and
/// the free-energy change from pruning.
pub fn cmd_gibbs(config: &PipelineConfig) -> Result<GibbsReport> {
    config.validate()?;
    let traces = load_traces(config.trace_path()?)?;
    let heads = match &config.universe {
        UniverseSelector::Layer(l) => traces.layer_heads(*l)?,
        UniverseSelector::Heads(h) => h.clone(),
        UniverseSelector::AllLayersPairwise => {
            return Err(Error::InvalidArgument(
                "gibbs needs a single universe (--layer or --heads)".into(),
            ))
        }
    };
    if heads.len() > GIBBS_MAX_HEADS {
        return Err(Error::Guard(format!(
            "gibbs universe of {} heads exceeds {GIBBS_MAX_HEADS}",
            heads.len()
        )));
    }
    let energies = build_energy_table(&traces, &heads, heads.len())?;
    let model = gibbs_distribution(&energies, config.beta)?;
    let seed = config.seeds.first().copied().unwrap_or(0);
    let audit = gibbs_optimality_audit(&model, config.trials, seed);
    let eta = full_shapley(&mobius_dividends(&energies, SignConvention::Raw)?, false)?.with_source(
        ScoreSource {
            trace_digest: traces.source_digest().map(str::to_owned),
            max_order: energies.max_order(),
        },
    );
    let pruned = match &config.prune_heads {
        Some(p) => p.clone(),
        None => {
            let mut by_abs: Vec<(HeadId, f64)> = eta.iter().map(|(h, v)| (h, v.abs())).collect();
            by_abs.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            if heads.len() > 1 {
                vec![by_abs[0].0]
            } else {
                vec![]
            }
        }
    };
    let pruning = pruning_delta_audit(&energies, &pruned, &eta, config.beta)?;
    let report = GibbsReport {
        beta: config.beta,
        universe: energies
            .universe()
            .heads()
            .iter()
            .map(HeadId::to_string)
            .collect(),
        log_partition: model.log_partition(),
        free_energy: model.free_energy(),
        top_coalitions: model.top_coalitions(10),
        optimality_trials: audit.trials,
        violations: audit.violations,
        min_gap: audit.min_gap,
        pruning_audit: pruning,
    };
    config.prepare_out()?;
    write_text(
        config.output("gibbs.json")?,
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )?;
    if audit.violations > 0 {
        return Err(Error::Invariant(format!(
            "{} perturbations beat the Gibbs free energy",
            audit.violations
        )));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub figures: Vec<PathBuf>,
    pub comparison_rows: usize,
    pub warnings: Vec<String>,
}

/// SVG grids (pair dividends per layer, score map, mask grids) and pruning_comparison.csv.
pub fn cmd_report(config: &PipelineConfig) -> Result<ReportSummary> {
    let out = &config.out;
    let required = [
        "dividends_pairs.csv",
        "scores.csv",
        "masks.csv",
        "masks_grid.csv",
    ];
    let missing: Vec<&str> = required
        .iter()
        .copied()
        .filter(|n| !out.join(n).exists())
        .collect();
    if !missing.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "missing inputs in {}: {}",
            out.display(),
            missing.join(", ")
        )));
    }
    let fig_dir = out.join("figures");
    std::fs::create_dir_all(&fig_dir).map_err(|e| Error::io(&fig_dir, e))?;
    let mut figures = Vec::new();
    let mut warnings = Vec::new();

    // Pair-dividend matrix per layer; cross-layer pairs are skipped.
    let pairs: Vec<PairRow> = read_csv(out.join("dividends_pairs.csv"))?;
    let mut by_layer: HashMap<u32, Vec<(HeadId, HeadId, f64)>> = HashMap::new();
    for p in &pairs {
        let (i, j): (HeadId, HeadId) = (p.head_i.parse()?, p.head_j.parse()?);
        if i.layer == j.layer {
            by_layer
                .entry(i.layer)
                .or_default()
                .push((i, j, p.dividend_bits));
        }
    }
    let mut layers: Vec<u32> = by_layer.keys().copied().collect();
    layers.sort_unstable();
    for l in layers {
        let entries = &by_layer[&l];
        let n = entries
            .iter()
            .map(|(i, j, _)| i.head.max(j.head))
            .max()
            .unwrap_or(0) as usize
            + 1;
        let mut cells = vec![vec![None; n]; n];
        for &(i, j, d) in entries {
            cells[i.head as usize][j.head as usize] = Some(d);
            cells[j.head as usize][i.head as usize] = Some(d);
        }
        let convention = pairs
            .first()
            .map(|p| p.convention.to_string())
            .unwrap_or_default();
        let path = fig_dir.join(format!("pairs_layer{l}.svg"));
        write_text(
            &path,
            &grid_svg(
                &format!("pair dividends, layer {l} (bits, {convention})"),
                "head",
                "head",
                &cells,
            ),
        )?;
        figures.push(path);
    }

    // Layer × head score map.
    let scores = load_scores(&out.join("scores.csv"))?;
    let layers = scores
        .universe()
        .heads()
        .iter()
        .map(|h| h.layer)
        .max()
        .map_or(0, |l| l + 1);
    let hpl = scores
        .universe()
        .heads()
        .iter()
        .map(|h| h.head)
        .max()
        .map_or(0, |h| h + 1);
    let mut cells = vec![vec![None; hpl as usize]; layers as usize];
    for (h, v) in scores.iter() {
        cells[h.layer as usize][h.head as usize] = Some(v);
    }
    let path = fig_dir.join("scores_map.svg");
    write_text(
        &path,
        &grid_svg(
            &format!("head scores ({}, {})", scores.kind(), scores.convention()),
            "layer",
            "head",
            &cells,
        ),
    )?;
    figures.push(path);

    // Mask grids, one per mask.
    let grid: Vec<MaskGridRow> = read_csv(out.join("masks_grid.csv"))?;
    type MaskKey = (PruneMethod, SelectionMode, String, Option<u64>);
    let mut groups: Vec<(MaskKey, Vec<&MaskGridRow>)> = Vec::new();
    for row in &grid {
        let key = (row.method, row.mode, rate_tag(row.rate), row.seed);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(row),
            None => groups.push((key, vec![row])),
        }
    }
    for ((method, mode, rate, seed), rows) in &groups {
        let layers = rows.iter().map(|r| r.layer).max().map_or(0, |l| l + 1) as usize;
        let hpl = rows.iter().map(|r| r.head).max().map_or(0, |h| h + 1) as usize;
        let mut cells = vec![vec![Some(0.0); hpl]; layers];
        for r in rows {
            cells[r.layer as usize][r.head as usize] = Some(if r.pruned { 1.0 } else { 0.0 });
        }
        let seed_tag = seed.map(|s| format!("_s{s}")).unwrap_or_default();
        let path = fig_dir.join(format!("mask_{method}_{mode}_r{rate}{seed_tag}.svg"));
        write_text(
            &path,
            &grid_svg(
                &format!("pruned heads: {method}, {mode}, rate {rate}{seed_tag}"),
                "layer",
                "head",
                &cells,
            ),
        )?;
        figures.push(path);
    }

    // Join mask metadata with perplexity results by mask digest.
    let index: Vec<MaskIndexRow> = read_csv(out.join("masks.csv"))?;
    let evals = config
        .evals
        .iter()
        .map(EvalResult::read)
        .collect::<Result<Vec<_>>>()?;
    if evals.is_empty() {
        warnings.push("no eval.json supplied; perplexity columns left empty".into());
    }
    let mut matched = 0;
    let rows: Vec<ComparisonRow> = index
        .into_iter()
        .map(|m| {
            let e = evals.iter().find(|e| e.mask_digest == m.mask_digest);
            matched += e.is_some() as usize;
            ComparisonRow {
                perplexity: e.map(|e| e.perplexity),
                tokens: e.map(|e| e.tokens),
                tokens_per_second: e.and_then(|e| e.tokens_per_second),
                mask_file: m.mask_file,
                mask_digest: m.mask_digest,
                method: m.method,
                mode: m.mode,
                rate: m.rate,
                seed: m.seed,
                pruned_heads: m.pruned_heads,
                attention_flops_saved_fraction: m.attention_flops_saved_fraction,
                total_flops_saved_fraction: m.total_flops_saved_fraction,
            }
        })
        .collect();
    if !evals.is_empty() && matched < evals.len() {
        warnings.push(format!(
            "{} of {} eval results did not match any mask digest",
            evals.len() - matched,
            evals.len()
        ));
    }
    write_csv(config.output("pruning_comparison.csv")?, &rows)?;
    Ok(ReportSummary {
        figures,
        comparison_rows: rows.len(),
        warnings,
    })
}

/// Parses `0.1,0.4,2.3` into heads.
pub fn parse_heads(list: &str) -> Result<Vec<HeadId>> {
    let heads: Vec<HeadId> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    Coalition::new(heads.iter().copied())?;
    Ok(heads)
}
