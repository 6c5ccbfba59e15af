//! Coalitions of heads and the declared universe they are drawn from.
//!
//! Tables store coalitions as bitmasks over the universe's canonical order
//! (ascending `(layer, head)`), so universes hold at most 64 heads.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::trace::HeadId;

pub const MAX_UNIVERSE: usize = 64;

/// Bitmask over universe positions.
pub type Mask = u64;

/// A sorted, duplicate-free set of heads. May be empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Coalition(Vec<HeadId>);

impl Coalition {
    pub fn new(members: impl IntoIterator<Item = HeadId>) -> Result<Self> {
        let mut v: Vec<HeadId> = members.into_iter().collect();
        v.sort_unstable();
        if let Some(w) = v.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "duplicate head {} in coalition",
                w[0]
            )));
        }
        Ok(Coalition(v))
    }

    pub fn empty() -> Self {
        Coalition(Vec::new())
    }

    pub fn members(&self) -> &[HeadId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, head: HeadId) -> bool {
        self.0.binary_search(&head).is_ok()
    }
}

impl fmt::Display for Coalition {
    /// Semicolon-joined `layer.head` tokens, e.g. `0.1;0.4`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, h) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{h}")?;
        }
        Ok(())
    }
}

impl FromStr for Coalition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().is_empty() {
            return Ok(Coalition::empty());
        }
        Coalition::new(
            s.split(';')
                .map(str::parse)
                .collect::<Result<Vec<HeadId>>>()?,
        )
    }
}

impl From<HeadId> for Coalition {
    fn from(h: HeadId) -> Self {
        Coalition(vec![h])
    }
}

/// The declared head universe, sorted canonically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Universe {
    heads: Vec<HeadId>,
    index: HashMap<HeadId, usize>,
}

impl Universe {
    pub fn new(heads: impl IntoIterator<Item = HeadId>) -> Result<Self> {
        let mut heads: Vec<HeadId> = heads.into_iter().collect();
        heads.sort_unstable();
        if let Some(w) = heads.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "duplicate head {} in universe",
                w[0]
            )));
        }
        let index = heads.iter().enumerate().map(|(i, &h)| (h, i)).collect();
        Ok(Universe { heads, index })
    }

    /// Coalition tables address members by bitmask, which caps the universe size.
    pub(crate) fn ensure_maskable(&self) -> Result<()> {
        if self.heads.len() > MAX_UNIVERSE {
            return Err(Error::Guard(format!(
                "universe of {} heads exceeds the {MAX_UNIVERSE}-head limit for coalition tables",
                self.heads.len()
            )));
        }
        Ok(())
    }

    pub fn heads(&self) -> &[HeadId] {
        &self.heads
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn position(&self, head: HeadId) -> Option<usize> {
        self.index.get(&head).copied()
    }

    pub fn full_mask(&self) -> Mask {
        low_bits(self.heads.len())
    }

    pub fn mask_of(&self, coalition: &Coalition) -> Result<Mask> {
        coalition
            .members()
            .iter()
            .try_fold(0, |m, &h| match self.position(h) {
                Some(p) if p < MAX_UNIVERSE => Ok(m | (1 << p)),
                Some(_) => Err(Error::Guard(format!(
                    "head {h} lies beyond the {MAX_UNIVERSE}-head coalition limit"
                ))),
                None => Err(Error::UnknownHead(h)),
            })
    }

    pub fn coalition_of(&self, mask: Mask) -> Coalition {
        Coalition(bits(mask).map(|p| self.heads[p]).collect())
    }
}

pub(crate) fn low_bits(n: usize) -> Mask {
    if n >= 64 {
        Mask::MAX
    } else {
        (1 << n) - 1
    }
}

/// Positions of the set bits, ascending.
pub(crate) fn bits(mut mask: Mask) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let p = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(p)
        }
    })
}

/// All submasks of `mask`, including `mask` itself and 0.
pub(crate) fn submasks(mask: Mask) -> impl Iterator<Item = Mask> {
    let mut next = Some(mask);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 {
            None
        } else {
            Some((cur - 1) & mask)
        };
        Some(cur)
    })
}

/// Σ_{k ≤ max_order} C(n, k), saturating.
pub fn coalition_count(n: usize, max_order: usize) -> u128 {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for k in 0..=max_order.min(n) {
        total = total.saturating_add(binom);
        binom = binom * (n - k) as u128 / (k + 1) as u128;
    }
    total
}

/// Coalition masks over `n` positions with size ≤ `max_order`, ordered by
/// size and then lexicographically by member positions.
pub(crate) fn canonical_masks(n: usize, max_order: usize) -> Vec<Mask> {
    let mut out = Vec::new();
    for k in 0..=max_order.min(n) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            out.push(idx.iter().fold(0, |m, &p| m | (1 << p)));
            // Advance to the next k-combination in lexicographic order.
            let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
                break;
            };
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coalition_sorted_and_displayed() {
        let c = Coalition::new([HeadId::new(0, 4), HeadId::new(0, 1)]).unwrap();
        assert_eq!(c.to_string(), "0.1;0.4");
        assert_eq!("0.4;0.1".parse::<Coalition>().unwrap(), c);
        assert!(Coalition::new([HeadId::new(0, 1), HeadId::new(0, 1)]).is_err());
        assert_eq!("".parse::<Coalition>().unwrap(), Coalition::empty());
    }

    #[test]
    fn canonical_order_and_counts() {
        let masks = canonical_masks(4, 2);
        assert_eq!(masks.len(), 1 + 4 + 6);
        assert_eq!(&masks[..6], &[0b0, 0b1, 0b10, 0b100, 0b1000, 0b11]);
        assert_eq!(masks[10], 0b1100);
        assert_eq!(canonical_masks(12, 3).len(), 299);
        assert_eq!(coalition_count(12, 3), 299);
        assert_eq!(coalition_count(20, 20), 1 << 20);
        assert_eq!(canonical_masks(5, 5).len(), 32);
    }

    #[test]
    fn submask_enumeration() {
        let subs: Vec<Mask> = submasks(0b101).collect();
        assert_eq!(subs, vec![0b101, 0b100, 0b001, 0]);
        assert_eq!(submasks(0).count(), 1);
    }

    #[test]
    fn universe_masks() {
        let u = Universe::new([HeadId::new(1, 0), HeadId::new(0, 3), HeadId::new(0, 1)]).unwrap();
        assert_eq!(u.heads()[0], HeadId::new(0, 1));
        let c = Coalition::new([HeadId::new(1, 0), HeadId::new(0, 1)]).unwrap();
        let m = u.mask_of(&c).unwrap();
        assert_eq!(m, 0b101);
        assert_eq!(u.coalition_of(m), c);
        assert!(u.mask_of(&HeadId::new(5, 5).into()).is_err());
        assert!(Universe::new([HeadId::new(0, 0), HeadId::new(0, 0)]).is_err());
    }
}
