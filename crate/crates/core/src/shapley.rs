//! Per-head importance: the Shapley value from dividends, its pairwise
//! truncation, and a brute-force permutation oracle.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coalition::{bits, Universe};
use crate::entropy::EnergyTable;
use crate::error::{Error, Result};
use crate::harsanyi::{DividendTable, SignConvention};
use crate::trace::HeadId;

/// Largest universe the permutation oracle will enumerate (10! orderings).
pub const ORACLE_MAX_HEADS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// η_i = Σ_{B∋i} Δ(B)/|B|
    FullEta,
    /// φ_i = Δ({i}) + ½ Σ_{j≠i} Δ({i,j})
    TruncatedPhi,
    /// Average marginal contribution over all orderings.
    OracleEta,
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreKind::FullEta => "full_eta",
            ScoreKind::TruncatedPhi => "truncated_phi",
            ScoreKind::OracleEta => "oracle_eta",
        })
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full_eta" => Ok(ScoreKind::FullEta),
            "truncated_phi" => Ok(ScoreKind::TruncatedPhi),
            "oracle_eta" => Ok(ScoreKind::OracleEta),
            other => Err(Error::InvalidArgument(format!(
                "unknown score kind {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreSource {
    pub trace_digest: Option<String>,
    pub max_order: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    universe: Universe,
    scores: Vec<f64>,
    kind: ScoreKind,
    convention: SignConvention,
    /// Set when η was computed from a table truncated below full order.
    approximate: bool,
    source: ScoreSource,
}

impl ScoreTable {
    /// Builds a table from explicit per-head scores, e.g. when reading scores.csv.
    pub fn from_scores(
        scores: impl IntoIterator<Item = (HeadId, f64)>,
        kind: ScoreKind,
        convention: SignConvention,
    ) -> Result<Self> {
        let pairs: Vec<(HeadId, f64)> = scores.into_iter().collect();
        let universe = Universe::new(pairs.iter().map(|p| p.0))?;
        let mut values = vec![0.0; universe.len()];
        for (h, v) in pairs {
            values[universe.position(h).expect("head in universe")] = v;
        }
        Ok(ScoreTable {
            universe,
            scores: values,
            kind,
            convention,
            approximate: false,
            source: ScoreSource::default(),
        })
    }

    pub fn with_source(mut self, source: ScoreSource) -> Self {
        self.source = source;
        self
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn kind(&self) -> ScoreKind {
        self.kind
    }

    pub fn convention(&self) -> SignConvention {
        self.convention
    }

    pub fn is_approximate(&self) -> bool {
        self.approximate
    }

    pub fn source(&self) -> &ScoreSource {
        &self.source
    }

    pub fn get(&self, head: HeadId) -> Result<f64> {
        self.universe
            .position(head)
            .map(|p| self.scores[p])
            .ok_or(Error::UnknownHead(head))
    }

    /// `(head, score)` in ascending (layer, head) order.
    pub fn iter(&self) -> impl Iterator<Item = (HeadId, f64)> + '_ {
        self.universe
            .heads()
            .iter()
            .copied()
            .zip(self.scores.iter().copied())
    }

    pub fn sum(&self) -> f64 {
        self.scores.iter().sum()
    }

    /// Heads ordered by ascending score; ties broken by ascending (layer, head).
    pub fn ranking(&self) -> Vec<HeadId> {
        let mut order: Vec<(HeadId, f64)> = self.iter().collect();
        order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        order.into_iter().map(|(h, _)| h).collect()
    }
}

fn accumulate(dividends: &DividendTable, max_size: usize) -> Vec<f64> {
    let mut scores = vec![0.0; dividends.universe().len()];
    for (mask, d) in dividends.entries_masked() {
        let size = mask.count_ones() as usize;
        if size == 0 || size > max_size {
            continue;
        }
        let share = d / size as f64;
        for p in bits(mask) {
            scores[p] += share;
        }
    }
    scores
}

/// η_i = Σ_{B∋i} Δ(B)/|B|.
///
/// Requires a full-order table unless `allow_truncated` is set, in which case
/// the result is flagged approximate.
pub fn full_shapley(dividends: &DividendTable, allow_truncated: bool) -> Result<ScoreTable> {
    let n = dividends.universe().len();
    let approximate = dividends.max_order() < n;
    if approximate && !allow_truncated {
        return Err(Error::InvalidArgument(format!(
            "exact Shapley values need dividends of every order up to {n}, table stops at {}",
            dividends.max_order()
        )));
    }
    Ok(ScoreTable {
        universe: dividends.universe().clone(),
        scores: accumulate(dividends, n),
        kind: ScoreKind::FullEta,
        convention: dividends.convention(),
        approximate,
        source: ScoreSource {
            trace_digest: None,
            max_order: dividends.max_order(),
        },
    })
}

/// φ_i = Δ({i}) + ½ Σ_{j≠i} Δ({i,j}).
pub fn truncated_shapley(dividends: &DividendTable) -> Result<ScoreTable> {
    let n = dividends.universe().len();
    if n >= 2 && dividends.max_order() < 2 {
        return Err(Error::MissingCoalition(
            "pair dividends are required for the truncated score".into(),
        ));
    }
    Ok(ScoreTable {
        universe: dividends.universe().clone(),
        scores: accumulate(dividends, 2),
        kind: ScoreKind::TruncatedPhi,
        convention: dividends.convention(),
        approximate: false,
        source: ScoreSource {
            trace_digest: None,
            max_order: dividends.max_order(),
        },
    })
}

/// Shapley values as the average marginal contribution E(P ∪ {i}) − E(P)
/// over all |N|! orderings, where P is the set of predecessors of i.
pub fn permutation_shapley_oracle(energies: &EnergyTable) -> Result<ScoreTable> {
    let n = energies.universe().len();
    if n > ORACLE_MAX_HEADS {
        return Err(Error::Guard(format!(
            "permutation oracle limited to {ORACLE_MAX_HEADS} heads, got {n}"
        )));
    }
    if !energies.is_full_order() {
        return Err(Error::InvalidArgument(
            "permutation oracle needs a full-order energy table".into(),
        ));
    }
    let mut e = vec![0.0; 1 << n];
    for (m, v) in (0..1u64 << n).map(|m| (m, energies.get_mask(m).expect("full order"))) {
        e[m as usize] = v;
    }

    let mut totals = vec![0.0; n];
    let mut perm: Vec<usize> = (0..n).collect();
    let mut visit = |perm: &[usize]| {
        let mut prev = 0usize;
        for &i in perm {
            let next = prev | (1 << i);
            totals[i] += e[next] - e[prev];
            prev = next;
        }
    };
    // Heap's algorithm, iterative form.
    let mut c = vec![0usize; n];
    visit(&perm);
    let mut count: u64 = 1;
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            count += 1;
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    let scores = totals.into_iter().map(|t| t / count as f64).collect();
    Ok(ScoreTable {
        universe: energies.universe().clone(),
        scores,
        kind: ScoreKind::OracleEta,
        convention: SignConvention::Raw,
        approximate: false,
        source: ScoreSource {
            trace_digest: None,
            max_order: energies.max_order(),
        },
    })
}
