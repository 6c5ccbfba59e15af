#![allow(dead_code)]

use std::collections::HashMap;

use headsynergy::{Coalition, EnergyTable, HeadId, TraceSet, Universe};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn heads(n: usize) -> Vec<HeadId> {
    (0..n as u32).map(|h| HeadId::new(0, h)).collect()
}

pub fn universe(n: usize) -> Universe {
    Universe::new(heads(n)).unwrap()
}

pub fn coalition(list: &[u32]) -> Coalition {
    Coalition::new(list.iter().map(|&h| HeadId::new(0, h))).unwrap()
}

/// Arbitrary set function with independent uniform values in [-2, 2] and E(∅) = 0.
pub fn random_game(n: usize, rng: &mut ChaCha8Rng) -> EnergyTable {
    EnergyTable::from_fn(universe(n), n, |c| {
        if c.is_empty() {
            0.0
        } else {
            rng.random_range(-2.0..2.0)
        }
    })
    .unwrap()
}

/// Game E = −v where v has non-negative random dividends, so every head
/// lowers the energy of any coalition it joins.
pub fn cooperative_game(n: usize, rng: &mut ChaCha8Rng) -> EnergyTable {
    let mut dividend: HashMap<u64, f64> = HashMap::new();
    for m in 1u64..(1 << n) {
        let scale = 1.0 / m.count_ones() as f64;
        dividend.insert(m, scale * rng.random::<f64>() * rng.random::<f64>() * 2.0);
    }
    let u = universe(n);
    EnergyTable::from_fn(u.clone(), n, |c| {
        let mask = u.mask_of(c).unwrap();
        -dividend
            .iter()
            .filter(|(b, _)| *b & mask == **b)
            .map(|(_, d)| d)
            .sum::<f64>()
    })
    .unwrap()
}

/// Random single-symbol traces over `n` heads with alphabet sizes in 1..=4,
/// some heads copying or combining earlier ones.
pub fn random_traces(n: usize, samples: usize, rng: &mut ChaCha8Rng) -> TraceSet {
    let mut cols: Vec<Vec<u32>> = Vec::with_capacity(n);
    for h in 0..n {
        let col = match (h, rng.random_range(0..4)) {
            (h, 0) if h >= 1 => cols[rng.random_range(0..h)].clone(),
            (h, 1) if h >= 2 => {
                let (a, b) = (rng.random_range(0..h), rng.random_range(0..h));
                cols[a]
                    .iter()
                    .zip(&cols[b])
                    .map(|(x, y)| (x + y) % 3)
                    .collect()
            }
            _ => {
                let k = rng.random_range(1..=4);
                (0..samples).map(|_| rng.random_range(0..k)).collect()
            }
        };
        cols.push(col);
    }
    TraceSet::from_symbol_columns("random", 1, n as u32, &cols).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
