//! Plug-in joint Shannon entropies (bits) of head coalitions, and the
//! memoized energy table E(C) = H(C) built from them.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::coalition::{bits, canonical_masks, coalition_count, Coalition, Mask, Universe};
use crate::error::{Error, Result};
use crate::trace::{HeadId, SymbolId, TraceSet};

/// Default ceiling on the number of coalitions a table may hold.
pub const DEFAULT_COALITION_CEILING: u128 = 1_000_000;

/// The free energy of a coalition is H(C) + c·|C| with c = log₂|S| per head.
/// The linear term cancels in every dividend of order ≥ 2, so it is not
/// added to stored energies; it is kept here as metadata only.
pub const DROPPED_CONSTANT_NOTE: &str =
    "energies omit the per-head additive constant c = log2|S|; it cancels in all dividends of order >= 2";

/// Shannon entropy in bits of a distribution given by integer counts.
pub fn entropy_from_counts(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0)
}

fn columns<'a>(traces: &'a TraceSet, coalition: &Coalition) -> Result<Vec<&'a [SymbolId]>> {
    coalition
        .members()
        .iter()
        .map(|&h| traces.column(h))
        .collect()
}

/// Relabels the joint symbol of every sample with a dense id (first
/// appearance order) and returns the count of each id.
fn joint_counts(cols: &[&[SymbolId]], n: usize) -> Vec<u64> {
    let Some((first, rest)) = cols.split_first() else {
        return vec![n as u64];
    };
    let mut ids: Vec<u32> = first.to_vec();
    let mut next_id = 0u32;
    // Densify the first column so ids stay in first-appearance order.
    {
        let mut map: HashMap<u32, u32> = HashMap::new();
        for id in ids.iter_mut() {
            *id = *map.entry(*id).or_insert_with(|| {
                next_id += 1;
                next_id - 1
            });
        }
    }
    for col in rest {
        let mut map: HashMap<(u32, u32), u32> = HashMap::new();
        next_id = 0;
        for (id, &sym) in ids.iter_mut().zip(col.iter()) {
            *id = *map.entry((*id, sym)).or_insert_with(|| {
                next_id += 1;
                next_id - 1
            });
        }
    }
    let mut counts = vec![0u64; next_id as usize];
    for id in ids {
        counts[id as usize] += 1;
    }
    counts
}

/// Empirical joint distribution of the coalition's symbol tuples.
pub fn empirical_distribution(
    traces: &TraceSet,
    coalition: &Coalition,
) -> Result<BTreeMap<Vec<SymbolId>, f64>> {
    if coalition.is_empty() {
        return Err(Error::InvalidArgument(
            "empirical distribution of the empty coalition is undefined; H(∅) = 0".into(),
        ));
    }
    let cols = columns(traces, coalition)?;
    let n = traces.num_samples();
    let mut counts: BTreeMap<Vec<SymbolId>, u64> = BTreeMap::new();
    for s in 0..n {
        *counts
            .entry(cols.iter().map(|c| c[s]).collect())
            .or_default() += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / n as f64))
        .collect())
}

/// Joint entropy in bits of the coalition's empirical distribution. H(∅) = 0.
pub fn joint_entropy(traces: &TraceSet, coalition: &Coalition) -> Result<f64> {
    let cols = columns(traces, coalition)?;
    if cols.is_empty() {
        return Ok(0.0);
    }
    Ok(entropy_from_counts(&joint_counts(
        &cols,
        traces.num_samples(),
    )))
}

/// Memoized coalition energies over a declared universe, complete up to `max_order`.
#[derive(Debug, Clone)]
pub struct EnergyTable {
    universe: Universe,
    max_order: usize,
    masks: Vec<Mask>,
    values: Vec<f64>,
    index: HashMap<Mask, usize>,
    sample_count: Option<usize>,
    /// log₂ of the largest per-head alphabet in the universe, for trace-built tables.
    dropped_constant_bits: Option<f64>,
}

impl EnergyTable {
    fn check_order(universe: &Universe, max_order: usize, ceiling: u128) -> Result<()> {
        if universe.is_empty() {
            return Err(Error::InvalidArgument("universe is empty".into()));
        }
        universe.ensure_maskable()?;
        if max_order == 0 || max_order > universe.len() {
            return Err(Error::InvalidArgument(format!(
                "max_order must be in 1..={}, got {max_order}",
                universe.len()
            )));
        }
        let count = coalition_count(universe.len(), max_order);
        if count > ceiling {
            return Err(Error::Guard(format!(
                "{count} coalitions of order <= {max_order} over {} heads exceed the ceiling of {ceiling}",
                universe.len()
            )));
        }
        Ok(())
    }

    fn from_values(
        universe: Universe,
        max_order: usize,
        masks: Vec<Mask>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite energy for coalition {}",
                universe.coalition_of(masks[i])
            )));
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "empty coalition must have energy 0, got {}",
                values[0]
            )));
        }
        let index = masks.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        Ok(EnergyTable {
            universe,
            max_order,
            masks,
            values,
            index,
            sample_count: None,
            dropped_constant_bits: None,
        })
    }

    /// A table over an arbitrary set function; `energy(∅)` must be 0.
    pub fn from_fn(
        universe: Universe,
        max_order: usize,
        mut energy: impl FnMut(&Coalition) -> f64,
    ) -> Result<Self> {
        Self::check_order(&universe, max_order, DEFAULT_COALITION_CEILING)?;
        let masks = canonical_masks(universe.len(), max_order);
        let values = masks
            .iter()
            .map(|&m| energy(&universe.coalition_of(m)))
            .collect();
        Self::from_values(universe, max_order, masks, values)
    }

    /// A table from explicit entries; every coalition of size ≤ `max_order`
    /// must be present (the empty coalition may be omitted).
    pub fn from_entries(
        universe: Universe,
        max_order: usize,
        entries: &HashMap<Coalition, f64>,
    ) -> Result<Self> {
        Self::check_order(&universe, max_order, DEFAULT_COALITION_CEILING)?;
        let masks = canonical_masks(universe.len(), max_order);
        let values = masks
            .iter()
            .map(|&m| {
                let c = universe.coalition_of(m);
                match entries.get(&c) {
                    Some(&v) => Ok(v),
                    None if m == 0 => Ok(0.0),
                    None => Err(Error::MissingCoalition(c.to_string())),
                }
            })
            .collect::<Result<_>>()?;
        Self::from_values(universe, max_order, masks, values)
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn is_full_order(&self) -> bool {
        self.max_order == self.universe.len()
    }

    pub fn sample_count(&self) -> Option<usize> {
        self.sample_count
    }

    pub fn dropped_constant_bits(&self) -> Option<f64> {
        self.dropped_constant_bits
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn get(&self, coalition: &Coalition) -> Result<f64> {
        let m = self.universe.mask_of(coalition)?;
        self.get_mask(m)
            .ok_or_else(|| Error::MissingCoalition(coalition.to_string()))
    }

    pub fn get_mask(&self, mask: Mask) -> Option<f64> {
        self.index.get(&mask).map(|&i| self.values[i])
    }

    pub(crate) fn masks(&self) -> &[Mask] {
        &self.masks
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entries in canonical order (by size, then lexicographic).
    pub fn iter(&self) -> impl Iterator<Item = (Coalition, f64)> + '_ {
        self.masks
            .iter()
            .zip(&self.values)
            .map(|(&m, &v)| (self.universe.coalition_of(m), v))
    }

    /// The table restricted to `universe \ removed`, keeping the entries of
    /// coalitions that avoid every removed head.
    pub fn restrict(&self, removed: &[HeadId]) -> Result<EnergyTable> {
        let removed_mask = self
            .universe
            .mask_of(&Coalition::new(removed.iter().copied())?)?;
        let kept: Vec<usize> = (0..self.universe.len())
            .filter(|p| removed_mask & (1 << p) == 0)
            .collect();
        if kept.is_empty() {
            return Err(Error::InvalidArgument(
                "cannot remove every head of the universe".into(),
            ));
        }
        let universe = Universe::new(kept.iter().map(|&p| self.universe.heads()[p]))?;
        let max_order = self.max_order.min(universe.len());
        let masks = canonical_masks(universe.len(), max_order);
        let values = masks
            .iter()
            .map(|&m| {
                let old = bits(m).fold(0, |acc, p| acc | (1 << kept[p]));
                self.get_mask(old).expect("restricted coalition present")
            })
            .collect();
        let mut table = Self::from_values(universe, max_order, masks, values)?;
        table.sample_count = self.sample_count;
        table.dropped_constant_bits = self.dropped_constant_bits;
        Ok(table)
    }

    /// Checks the entropy-table invariants: 0 ≤ E ≤ log₂ N and monotone under inclusion.
    pub fn check_entropy_invariants(&self) -> Result<()> {
        let Some(n) = self.sample_count else {
            return Ok(());
        };
        let ceiling = (n as f64).log2() + 1e-9;
        for (&m, &e) in self.masks.iter().zip(&self.values) {
            if !(-1e-12..=ceiling).contains(&e) {
                return Err(Error::Invariant(format!(
                    "H({}) = {e} outside [0, log2 {n}]",
                    self.universe.coalition_of(m)
                )));
            }
            for p in bits(m) {
                let sub = m & !(1 << p);
                let se = self.get_mask(sub).expect("subset present");
                if se > e + 1e-9 {
                    return Err(Error::Invariant(format!(
                        "monotonicity: H({}) = {se} > H({}) = {e}",
                        self.universe.coalition_of(sub),
                        self.universe.coalition_of(m)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Joint entropies of every coalition of `universe` with size ≤ `max_order`.
pub fn build_energy_table(
    traces: &TraceSet,
    universe: &[HeadId],
    max_order: usize,
) -> Result<EnergyTable> {
    build_energy_table_with_ceiling(traces, universe, max_order, DEFAULT_COALITION_CEILING)
}

pub fn build_energy_table_with_ceiling(
    traces: &TraceSet,
    universe: &[HeadId],
    max_order: usize,
    ceiling: u128,
) -> Result<EnergyTable> {
    let mut sorted = universe.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument(format!(
            "duplicate head {} in universe",
            w[0]
        )));
    }
    let universe = Universe::new(sorted)?;
    EnergyTable::check_order(&universe, max_order, ceiling)?;
    let cols: Vec<&[SymbolId]> = universe
        .heads()
        .iter()
        .map(|&h| traces.column(h))
        .collect::<Result<_>>()?;
    let n = traces.num_samples();
    let masks = canonical_masks(universe.len(), max_order);
    let values: Vec<f64> = masks
        .par_iter()
        .map(|&m| {
            let members: Vec<&[SymbolId]> = bits(m).map(|p| cols[p]).collect();
            if members.is_empty() {
                0.0
            } else {
                entropy_from_counts(&joint_counts(&members, n))
            }
        })
        .collect();
    let alphabet = universe
        .heads()
        .iter()
        .map(|&h| traces.num_symbols(h))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(1);
    let mut table = EnergyTable::from_values(universe, max_order, masks, values)?;
    table.sample_count = Some(n);
    table.dropped_constant_bits = Some((alphabet as f64).log2());
    Ok(table)
}
