use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use headsynergy::cli::{
    cmd_analyze, cmd_gibbs, cmd_prune, cmd_report, parse_heads, PipelineConfig, UniverseSelector,
};
use headsynergy::{synth_traces, write_traces, Error, SelectionMode, SignConvention, SynthSpec};

const AFTER_HELP: &str = "\
Trace files are HTRC v1 JSONL: a header line
  {\"htrc\": 1, \"model\": .., \"layers\": L, \"heads\": H, \"samples\": N, \"granularity\": \"sequence\"|\"token\"}
followed by one record per (sample, layer, head):
  {\"s\": s, \"l\": l, \"h\": h, \"a\": [argmax key indices]}
With \"sequence\" granularity each argmax array is one symbol; with \"token\"
every position is a separate observation.

Heads are written layer.head (e.g. 3.7); coalitions join heads with ';'.
Entropies and dividends are in bits.

Outputs (all under --out):
  analyze  entropy.csv, dividends_pairs.csv, dividends_triples.csv, scores.csv, run.json
  prune    masks/<method>_<mode>_r<rate>[_s<seed>].json, masks.csv, masks_grid.csv
  gibbs    gibbs.json
  report   figures/*.svg, pruning_comparison.csv

Exit codes: 0 ok, 2 input/argument error, 3 guard violation, 4 invariant violated.";

#[derive(Parser)]
#[command(name = "headsynergy", version, about = "Harsanyi dividends, Shapley scores and pruning masks for attention heads", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic traces with known dependence structure.
    Synth(SynthArgs),
    /// Entropies, dividends and scores for one universe.
    Analyze(AnalyzeArgs),
    /// Build Harsanyi and random pruning masks from scores.csv.
    Prune(PruneArgs),
    /// Exact Gibbs distribution over coalitions, with audits.
    Gibbs(GibbsArgs),
    /// Render figures and join masks with perplexity results.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Compact generators, comma separated: uniform:K[xN], constant, dup:H, xor.
    #[arg(long, conflicts_with = "spec")]
    generators: Option<String>,
    /// JSON spec: {"model", "layers", "samples", "exact", "generators":[{"kind":..}]}.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Every layer repeats the generator list.
    #[arg(long, default_value_t = 1)]
    layers: u32,
    /// Exact outcome frequencies instead of i.i.d. draws.
    #[arg(long)]
    exact: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output trace file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct UniverseArgs {
    #[arg(long)]
    traces: PathBuf,
    /// Use every head of this layer.
    #[arg(long, conflicts_with_all = ["heads", "all_layers"])]
    layer: Option<u32>,
    /// Explicit head list, e.g. 0.1,0.4,2.3.
    #[arg(long)]
    heads: Option<String>,
    /// Every layer in turn, pairs only.
    #[arg(long, conflicts_with = "heads")]
    all_layers: bool,
}

impl UniverseArgs {
    fn selector(&self) -> anyhow::Result<UniverseSelector> {
        Ok(match (&self.layer, &self.heads, self.all_layers) {
            (_, _, true) => UniverseSelector::AllLayersPairwise,
            (Some(l), _, _) => UniverseSelector::Layer(*l),
            (_, Some(h), _) => UniverseSelector::Heads(parse_heads(h)?),
            _ => UniverseSelector::Layer(0),
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Raw,
    Paper,
}

impl From<ConventionArg> for SignConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Raw => SignConvention::Raw,
            ConventionArg::Paper => SignConvention::Paper,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    PerLayerCeil,
    GlobalFloor,
    Both,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    universe: UniverseArgs,
    #[arg(long, default_value_t = 3)]
    max_order: usize,
    #[arg(long, value_enum, default_value = "paper")]
    convention: ConventionArg,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct PruneArgs {
    /// Directory holding scores.csv (and run.json); masks are written here too.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.10,0.20")]
    rates: Vec<f64>,
    #[arg(long, value_enum, default_value = "both")]
    mode: ModeArg,
    /// Seeds for the random baseline masks.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seed: Vec<u64>,
    #[arg(long, default_value_t = 64)]
    head_dim: u32,
    /// Defaults to heads_per_layer * head_dim.
    #[arg(long)]
    model_dim: Option<u32>,
    #[arg(long, default_value_t = 1024)]
    seq_len: u32,
}

#[derive(Args)]
struct GibbsArgs {
    #[command(flatten)]
    universe: UniverseArgs,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Heads removed in the pruning audit (default: the lowest-|eta| head).
    #[arg(long)]
    prune: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// eval.json files: {"model","mask_digest","dataset","samples","perplexity","tokens","tokens_per_second"}.
    #[arg(long, value_delimiter = ',')]
    eval: Vec<PathBuf>,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth(a) => {
            let spec = match (&a.spec, &a.generators) {
                (Some(p), _) => {
                    let text = std::fs::read_to_string(p)
                        .with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str(&text).map_err(Error::from)?
                }
                (None, Some(g)) => SynthSpec::new(a.samples, SynthSpec::parse_generators(g)?)
                    .with_layers(a.layers)
                    .exact(a.exact),
                (None, None) => bail!(Error::InvalidArgument(
                    "synth needs --generators or --spec".into()
                )),
            };
            let traces = synth_traces(&spec, a.seed)?;
            write_traces(&traces, &a.out)?;
            eprintln!(
                "wrote {} ({} layers x {} heads, {} samples)",
                a.out.display(),
                traces.header().num_layers,
                traces.header().heads_per_layer,
                traces.num_samples()
            );
        }
        Command::Analyze(a) => {
            let config = PipelineConfig {
                traces: Some(a.universe.traces.clone()),
                universe: a.universe.selector()?,
                max_order: a.max_order,
                convention: a.convention.into(),
                out: a.out,
                ..Default::default()
            };
            let s = cmd_analyze(&config)?;
            eprintln!(
                "{} entropies, {} pair and {} triple dividends, {} scores",
                s.entropy_rows, s.pair_rows, s.triple_rows, s.score_rows
            );
        }
        Command::Prune(a) => {
            let modes = match a.mode {
                ModeArg::PerLayerCeil => vec![SelectionMode::PerLayerCeil],
                ModeArg::GlobalFloor => vec![SelectionMode::GlobalFloor],
                ModeArg::Both => vec![SelectionMode::PerLayerCeil, SelectionMode::GlobalFloor],
            };
            let config = PipelineConfig {
                rates: a.rates,
                modes,
                seeds: a.seed,
                out: a.out,
                head_dim: a.head_dim,
                model_dim: a.model_dim,
                seq_len: a.seq_len,
                ..Default::default()
            };
            let s = cmd_prune(&config)?;
            eprintln!("wrote {} masks", s.masks.len());
        }
        Command::Gibbs(a) => {
            let config = PipelineConfig {
                traces: Some(a.universe.traces.clone()),
                universe: a.universe.selector()?,
                beta: a.beta,
                trials: a.trials,
                seeds: vec![a.seed],
                prune_heads: a.prune.as_deref().map(parse_heads).transpose()?,
                out: a.out,
                ..Default::default()
            };
            let r = cmd_gibbs(&config)?;
            eprintln!(
                "F* = {:.6}, ln Z = {:.6}, {} / {} violations",
                r.free_energy, r.log_partition, r.violations, r.optimality_trials
            );
        }
        Command::Report(a) => {
            let config = PipelineConfig {
                out: a.out,
                evals: a.eval,
                ..Default::default()
            };
            let s = cmd_report(&config)?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            eprintln!(
                "wrote {} figures and {} comparison rows",
                s.figures.len(),
                s.comparison_rows
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<Error>().map_or(2, Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
