//! Deterministic synthetic traces with known information structure.
//!
//! A [`SynthSpec`] lists generators that fill consecutive heads of every
//! layer. Each layer is drawn independently from the same layout.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::TraceSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub symbols: Vec<u32>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    /// `heads` mutually independent heads, each uniform over `symbols` symbols.
    IndependentUniform {
        symbols: u32,
        #[serde(default = "one")]
        heads: u32,
    },
    /// Copies the column of an earlier head in the same layer.
    DuplicateHead { source: u32 },
    /// Always emits symbol 0.
    ConstantHead,
    /// Three binary heads with (a, b) uniform and c = a XOR b.
    XorTriple,
    /// Heads drawn jointly from an explicit distribution over symbol tuples.
    Explicit { outcomes: Vec<Outcome> },
}

fn one() -> u32 {
    1
}

impl Generator {
    pub fn width(&self) -> u32 {
        match self {
            Generator::IndependentUniform { heads, .. } => *heads,
            Generator::DuplicateHead { .. } | Generator::ConstantHead => 1,
            Generator::XorTriple => 3,
            Generator::Explicit { outcomes } => {
                outcomes.first().map_or(0, |o| o.symbols.len() as u32)
            }
        }
    }

    /// Parses the compact command-line form: `uniform:K`, `uniform:KxN`,
    /// `constant`, `dup:H`, `xor`.
    pub fn from_compact(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("unknown generator {s:?}"));
        let (name, arg) = s.split_once(':').unwrap_or((s, ""));
        match name {
            "constant" if arg.is_empty() => Ok(Generator::ConstantHead),
            "xor" if arg.is_empty() => Ok(Generator::XorTriple),
            "dup" => Ok(Generator::DuplicateHead {
                source: arg.parse().map_err(|_| bad())?,
            }),
            "uniform" => {
                let (k, n) = arg.split_once('x').unwrap_or((arg, "1"));
                Ok(Generator::IndependentUniform {
                    symbols: k.parse().map_err(|_| bad())?,
                    heads: n.parse().map_err(|_| bad())?,
                })
            }
            _ => Err(bad()),
        }
    }

    fn validate(&self, position: u32) -> Result<()> {
        match self {
            Generator::IndependentUniform { symbols, heads } => {
                if *symbols == 0 || *heads == 0 {
                    return Err(Error::InvalidArgument(
                        "uniform generator needs symbols >= 1 and heads >= 1".into(),
                    ));
                }
            }
            Generator::DuplicateHead { source } if *source >= position => {
                return Err(Error::InvalidArgument(format!(
                    "duplicate_head source {source} must precede head {position}"
                )));
            }
            Generator::Explicit { outcomes } => {
                let w = self.width();
                if outcomes.is_empty() || w == 0 {
                    return Err(Error::InvalidArgument(
                        "explicit distribution is empty".into(),
                    ));
                }
                if outcomes.iter().any(|o| o.symbols.len() as u32 != w) {
                    return Err(Error::InvalidArgument(
                        "explicit outcomes must all have the same arity".into(),
                    ));
                }
                if outcomes
                    .iter()
                    .any(|o| o.probability.is_nan() || o.probability < 0.0)
                {
                    return Err(Error::InvalidArgument(
                        "negative outcome probability".into(),
                    ));
                }
                let total: f64 = outcomes.iter().map(|o| o.probability).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "explicit distribution sums to {total}, expected 1"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "one")]
    pub layers: u32,
    pub samples: usize,
    /// Draw each generator's outcomes in exact proportion (largest-remainder
    /// quotas, then shuffled) instead of i.i.d.
    #[serde(default)]
    pub exact: bool,
    pub generators: Vec<Generator>,
}

fn default_model() -> String {
    "synthetic".into()
}

impl SynthSpec {
    pub fn new(samples: usize, generators: Vec<Generator>) -> Self {
        SynthSpec {
            model: default_model(),
            layers: 1,
            samples,
            exact: false,
            generators,
        }
    }

    pub fn with_layers(mut self, layers: u32) -> Self {
        self.layers = layers;
        self
    }

    pub fn exact(mut self, exact: bool) -> Self {
        self.exact = exact;
        self
    }

    /// Comma-separated compact generators, e.g. `uniform:4x3,constant,xor`.
    pub fn parse_generators(list: &str) -> Result<Vec<Generator>> {
        list.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(Generator::from_compact)
            .collect()
    }

    pub fn heads_per_layer(&self) -> u32 {
        self.generators.iter().map(Generator::width).sum()
    }
}

/// Draws `n` outcome indices according to `probs`.
fn draw(probs: &[f64], n: usize, exact: bool, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if exact {
        let quotas: Vec<f64> = probs.iter().map(|p| p * n as f64).collect();
        let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut left = n - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..probs.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        let mut out: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(i, c))
            .collect();
        out.shuffle(rng);
        out
    } else {
        let cdf: Vec<f64> = probs
            .iter()
            .scan(0.0, |acc, &p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        (0..n)
            .map(|_| {
                let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
                cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
            })
            .collect()
    }
}

/// Generates a trace set; identical `(spec, seed)` gives identical output.
pub fn synth_traces(spec: &SynthSpec, seed: u64) -> Result<TraceSet> {
    if spec.samples == 0 || spec.layers == 0 || spec.generators.is_empty() {
        return Err(Error::InvalidArgument(
            "synthetic spec needs samples, layers and at least one generator".into(),
        ));
    }
    let mut position = 0;
    for g in &spec.generators {
        g.validate(position)?;
        position += g.width();
    }
    let hpl = spec.heads_per_layer();
    let n = spec.samples;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns: Vec<Vec<u32>> = Vec::with_capacity((spec.layers * hpl) as usize);
    for _ in 0..spec.layers {
        let base = columns.len();
        for g in &spec.generators {
            match g {
                Generator::IndependentUniform { symbols, heads } => {
                    let probs = vec![1.0 / *symbols as f64; *symbols as usize];
                    for _ in 0..*heads {
                        columns.push(
                            draw(&probs, n, spec.exact, &mut rng)
                                .into_iter()
                                .map(|i| i as u32)
                                .collect(),
                        );
                    }
                }
                Generator::DuplicateHead { source } => {
                    columns.push(columns[base + *source as usize].clone());
                }
                Generator::ConstantHead => columns.push(vec![0; n]),
                Generator::XorTriple => {
                    let picks = draw(&[0.25; 4], n, spec.exact, &mut rng);
                    let a: Vec<u32> = picks.iter().map(|&i| (i >> 1) as u32).collect();
                    let b: Vec<u32> = picks.iter().map(|&i| (i & 1) as u32).collect();
                    let c = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
                    columns.extend([a, b, c]);
                }
                Generator::Explicit { outcomes } => {
                    let probs: Vec<f64> = outcomes.iter().map(|o| o.probability).collect();
                    let picks = draw(&probs, n, spec.exact, &mut rng);
                    for k in 0..g.width() as usize {
                        columns.push(picks.iter().map(|&i| outcomes[i].symbols[k]).collect());
                    }
                }
            }
        }
    }
    TraceSet::from_symbol_columns(spec.model.clone(), spec.layers, hpl, &columns)
}
