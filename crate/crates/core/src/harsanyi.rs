//! Harsanyi dividends by Möbius inversion of coalition energies.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coalition::{canonical_masks, submasks, Coalition, Mask, Universe};
use crate::entropy::EnergyTable;
use crate::error::{Error, Result};

/// Largest universe for which the full-order lattice transform is used.
pub const FAST_TRANSFORM_MAX_HEADS: usize = 20;

/// Sign convention for dividends.
///
/// `Raw` is the exact Möbius transform Δ(B) = Σ_{A⊆B} (−1)^{|B|−|A|} E(A),
/// for which E(C) = Σ_{B⊆C} Δ(B) holds. `Paper` keeps singletons as
/// Δ({i}) = E({i}) and negates every higher order, so that with entropy
/// energies pair dividends are mutual informations and triple dividends are
/// interaction informations (negative for redundancy).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignConvention {
    Raw,
    Paper,
}

impl fmt::Display for SignConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignConvention::Raw => "raw",
            SignConvention::Paper => "paper",
        })
    }
}

impl FromStr for SignConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(SignConvention::Raw),
            "paper" => Ok(SignConvention::Paper),
            other => Err(Error::InvalidArgument(format!(
                "convention must be raw or paper, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DividendTable {
    universe: Universe,
    max_order: usize,
    convention: SignConvention,
    masks: Vec<Mask>,
    values: Vec<f64>,
    index: HashMap<Mask, usize>,
}

impl DividendTable {
    fn new(
        universe: Universe,
        max_order: usize,
        convention: SignConvention,
        masks: Vec<Mask>,
        values: Vec<f64>,
    ) -> Self {
        let index = masks.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        DividendTable {
            universe,
            max_order,
            convention,
            masks,
            values,
            index,
        }
    }

    /// A table from explicit dividends (missing coalitions count as zero).
    pub fn from_entries(
        universe: Universe,
        max_order: usize,
        convention: SignConvention,
        entries: &HashMap<Coalition, f64>,
    ) -> Result<Self> {
        universe.ensure_maskable()?;
        if max_order == 0 || max_order > universe.len() {
            return Err(Error::InvalidArgument(format!(
                "max_order must be in 1..={}",
                universe.len()
            )));
        }
        for c in entries.keys() {
            universe.mask_of(c)?;
            if c.len() > max_order {
                return Err(Error::InvalidArgument(format!(
                    "coalition {c} exceeds max_order {max_order}"
                )));
            }
        }
        let masks = canonical_masks(universe.len(), max_order);
        let values = masks
            .iter()
            .map(|&m| {
                if m == 0 {
                    0.0
                } else {
                    entries
                        .get(&universe.coalition_of(m))
                        .copied()
                        .unwrap_or(0.0)
                }
            })
            .collect();
        Ok(Self::new(universe, max_order, convention, masks, values))
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn convention(&self) -> SignConvention {
        self.convention
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

    /// Entries in canonical order, including the empty coalition.
    pub fn iter(&self) -> impl Iterator<Item = (Coalition, f64)> + '_ {
        self.masks
            .iter()
            .zip(&self.values)
            .map(|(&m, &v)| (self.universe.coalition_of(m), v))
    }

    /// Entries of one coalition size, in canonical order.
    pub fn of_order(&self, order: usize) -> impl Iterator<Item = (Coalition, f64)> + '_ {
        self.masks
            .iter()
            .zip(&self.values)
            .filter(move |(m, _)| m.count_ones() as usize == order)
            .map(|(&m, &v)| (self.universe.coalition_of(m), v))
    }

    pub(crate) fn entries_masked(&self) -> impl Iterator<Item = (Mask, f64)> + '_ {
        self.masks.iter().copied().zip(self.values.iter().copied())
    }
}

fn apply_convention(mask: Mask, raw: f64, convention: SignConvention) -> f64 {
    match convention {
        SignConvention::Paper if mask.count_ones() >= 2 => -raw,
        _ => raw,
    }
}

/// Harsanyi dividends of every coalition up to the table's `max_order`.
///
/// Full-order tables on at most [`FAST_TRANSFORM_MAX_HEADS`] heads use the
/// in-place subset Möbius transform; everything else enumerates subsets directly.
pub fn mobius_dividends(
    energies: &EnergyTable,
    convention: SignConvention,
) -> Result<DividendTable> {
    if energies.is_full_order() && energies.universe().len() <= FAST_TRANSFORM_MAX_HEADS {
        mobius_dividends_lattice(energies, convention)
    } else {
        mobius_dividends_enumerated(energies, convention)
    }
}

/// Direct inclusion–exclusion over the 2^|B| subsets of each coalition.
pub fn mobius_dividends_enumerated(
    energies: &EnergyTable,
    convention: SignConvention,
) -> Result<DividendTable> {
    let masks = energies.masks().to_vec();
    let values = masks
        .iter()
        .map(|&b| {
            let order = b.count_ones();
            let mut raw = 0.0;
            for a in submasks(b) {
                let e = energies.get_mask(a).ok_or_else(|| {
                    Error::MissingCoalition(energies.universe().coalition_of(a).to_string())
                })?;
                if (order - a.count_ones()) % 2 == 0 {
                    raw += e;
                } else {
                    raw -= e;
                }
            }
            Ok(apply_convention(b, raw, convention))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(DividendTable::new(
        energies.universe().clone(),
        energies.max_order(),
        convention,
        masks,
        values,
    ))
}

/// Subset-sum Möbius transform over the full lattice, O(n·2^n).
pub fn mobius_dividends_lattice(
    energies: &EnergyTable,
    convention: SignConvention,
) -> Result<DividendTable> {
    let n = energies.universe().len();
    if !energies.is_full_order() {
        return Err(Error::InvalidArgument(
            "lattice transform requires a full-order energy table".into(),
        ));
    }
    if n > FAST_TRANSFORM_MAX_HEADS {
        return Err(Error::Guard(format!(
            "lattice transform limited to {FAST_TRANSFORM_MAX_HEADS} heads, got {n}"
        )));
    }
    let mut f = vec![0.0; 1 << n];
    for (&m, &v) in energies.masks().iter().zip(energies.values()) {
        f[m as usize] = v;
    }
    for bit in 0..n {
        let b = 1usize << bit;
        for m in 0..f.len() {
            if m & b != 0 {
                f[m] -= f[m ^ b];
            }
        }
    }
    let masks = energies.masks().to_vec();
    let values = masks
        .iter()
        .map(|&m| apply_convention(m, f[m as usize], convention))
        .collect();
    Ok(DividendTable::new(
        energies.universe().clone(),
        energies.max_order(),
        convention,
        masks,
        values,
    ))
}

/// Σ_{B⊆C} Δ(B). Only meaningful for `Raw` dividends, where it returns E(C).
pub fn reconstruct_energy(dividends: &DividendTable, coalition: &Coalition) -> Result<f64> {
    if dividends.convention() != SignConvention::Raw {
        return Err(Error::Convention(
            "energy reconstruction requires raw dividends".into(),
        ));
    }
    if coalition.len() > dividends.max_order() {
        return Err(Error::InvalidArgument(format!(
            "coalition {coalition} exceeds max_order {}",
            dividends.max_order()
        )));
    }
    let c = dividends.universe().mask_of(coalition)?;
    Ok(submasks(c)
        .map(|b| dividends.get_mask(b).expect("subset within max_order"))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::HeadId;

    fn h(i: u32) -> HeadId {
        HeadId::new(0, i)
    }

    fn universe(n: u32) -> Universe {
        Universe::new((0..n).map(h)).unwrap()
    }

    fn pair(i: u32, j: u32) -> Coalition {
        Coalition::new([h(i), h(j)]).unwrap()
    }

    #[test]
    fn paper_duplicate_pair() {
        // H_i = H_j = H_ij = 1
        let t =
            EnergyTable::from_fn(universe(2), 2, |c| if c.is_empty() { 0.0 } else { 1.0 }).unwrap();
        let d = mobius_dividends(&t, SignConvention::Paper).unwrap();
        assert_eq!(d.get(&pair(0, 1)).unwrap(), 1.0);
        assert_eq!(d.get(&h(0).into()).unwrap(), 1.0);
        assert_eq!(d.get(&Coalition::empty()).unwrap(), 0.0);
    }

    #[test]
    fn paper_independent_pair() {
        let t = EnergyTable::from_fn(universe(2), 2, |c| c.len() as f64 * 2.0).unwrap();
        let d = mobius_dividends(&t, SignConvention::Paper).unwrap();
        assert_eq!(d.get(&pair(0, 1)).unwrap(), 0.0);
    }

    #[test]
    fn paper_triple_identical_heads() {
        let t =
            EnergyTable::from_fn(universe(3), 3, |c| if c.is_empty() { 0.0 } else { 1.0 }).unwrap();
        for d in [
            mobius_dividends_enumerated(&t, SignConvention::Paper).unwrap(),
            mobius_dividends_lattice(&t, SignConvention::Paper).unwrap(),
        ] {
            let triple = Coalition::new([h(0), h(1), h(2)]).unwrap();
            assert_eq!(d.get(&triple).unwrap(), -1.0);
        }
    }

    #[test]
    fn sign_relation() {
        let t = EnergyTable::from_fn(universe(4), 4, |c| {
            c.members()
                .iter()
                .map(|m| (m.head as f64 + 1.5).ln())
                .sum::<f64>()
                .sqrt()
        })
        .unwrap();
        let raw = mobius_dividends(&t, SignConvention::Raw).unwrap();
        let paper = mobius_dividends(&t, SignConvention::Paper).unwrap();
        for ((c, r), (_, p)) in raw.iter().zip(paper.iter()) {
            if c.len() >= 2 {
                assert_eq!(p, -r);
            } else {
                assert_eq!(p, r);
            }
        }
    }

    #[test]
    fn reconstruct_small_cases() {
        let t = EnergyTable::from_fn(universe(3), 3, |c| (c.len() * c.len()) as f64).unwrap();
        let d = mobius_dividends(&t, SignConvention::Raw).unwrap();
        assert_eq!(reconstruct_energy(&d, &Coalition::empty()).unwrap(), 0.0);
        assert_eq!(reconstruct_energy(&d, &h(1).into()).unwrap(), 1.0);
        for (c, e) in t.iter() {
            assert!((reconstruct_energy(&d, &c).unwrap() - e).abs() < 1e-12);
        }
        let p = mobius_dividends(&t, SignConvention::Paper).unwrap();
        assert!(matches!(
            reconstruct_energy(&p, &h(0).into()),
            Err(Error::Convention(_))
        ));
    }

    #[test]
    fn truncated_table_uses_enumeration() {
        let t = EnergyTable::from_fn(universe(5), 2, |c| c.len() as f64).unwrap();
        let d = mobius_dividends(&t, SignConvention::Raw).unwrap();
        assert_eq!(d.len(), 1 + 5 + 10);
        assert!(mobius_dividends_lattice(&t, SignConvention::Raw).is_err());
        let too_big = Coalition::new([h(0), h(1), h(2)]).unwrap();
        assert!(reconstruct_energy(&d, &too_big).is_err());
    }

    #[test]
    fn parse_convention() {
        assert_eq!(
            "PAPER".parse::<SignConvention>().unwrap(),
            SignConvention::Paper
        );
        assert!("other".parse::<SignConvention>().is_err());
    }
}
