//! Exact Gibbs distributions over the coalitions of a small universe and the
//! collective free energy F(P) = E_P[E] − H(P)/β.
//!
//! Energies are used as dimensionless reals; H(P) is in nats, so that the
//! minimum F(P*) equals −ln(Z)/β exactly.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coalition::{Coalition, Mask, Universe};
use crate::entropy::EnergyTable;
use crate::error::{Error, Result};
use crate::shapley::ScoreTable;
use crate::trace::HeadId;

pub const GIBBS_MAX_HEADS: usize = 20;

#[derive(Debug, Clone)]
pub struct GibbsModel {
    beta: f64,
    universe: Universe,
    /// Dense by mask over the universe.
    energies: Vec<f64>,
    log_partition: f64,
    probabilities: Vec<f64>,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "beta must be a positive finite real, got {beta}"
        )));
    }
    Ok(())
}

fn dense_energies(energies: &EnergyTable) -> Result<Vec<f64>> {
    let n = energies.universe().len();
    if n > GIBBS_MAX_HEADS {
        return Err(Error::Guard(format!(
            "exact Gibbs enumeration limited to {GIBBS_MAX_HEADS} heads, got {n}"
        )));
    }
    if !energies.is_full_order() {
        return Err(Error::InvalidArgument(
            "Gibbs distribution needs energies for every subset of the universe".into(),
        ));
    }
    Ok((0..1u64 << n)
        .map(|m| energies.get_mask(m).expect("full order"))
        .collect())
}

/// P*(C) = exp(−β E(C)) / Z over all 2^n subsets.
pub fn gibbs_distribution(energies: &EnergyTable, beta: f64) -> Result<GibbsModel> {
    check_beta(beta)?;
    let e = dense_energies(energies)?;
    let e_min = e.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = e.iter().map(|&x| (-beta * (x - e_min)).exp()).collect();
    // Fixed reduction order: ascending mask.
    let total: f64 = weights.iter().sum();
    let log_partition = -beta * e_min + total.ln();
    let probabilities = weights.into_iter().map(|w| w / total).collect();
    Ok(GibbsModel {
        beta,
        universe: energies.universe().clone(),
        energies: e,
        log_partition,
        probabilities,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoalitionWeight {
    pub members: Vec<String>,
    pub energy: f64,
    pub probability: f64,
}

impl GibbsModel {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    /// ln Z.
    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    /// −ln(Z)/β, the free energy of the Gibbs distribution.
    pub fn free_energy(&self) -> f64 {
        -self.log_partition / self.beta
    }

    /// Probabilities indexed by coalition mask over the universe.
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, coalition: &Coalition) -> Result<f64> {
        Ok(self.probabilities[self.universe.mask_of(coalition)? as usize])
    }

    /// The `k` most probable coalitions; ties in ascending mask order.
    pub fn top_coalitions(&self, k: usize) -> Vec<CoalitionWeight> {
        let mut order: Vec<usize> = (0..self.probabilities.len()).collect();
        order.sort_by(|&a, &b| {
            self.probabilities[b]
                .total_cmp(&self.probabilities[a])
                .then(a.cmp(&b))
        });
        order
            .into_iter()
            .take(k)
            .map(|m| CoalitionWeight {
                members: self
                    .universe
                    .coalition_of(m as Mask)
                    .members()
                    .iter()
                    .map(HeadId::to_string)
                    .collect(),
                energy: self.energies[m],
                probability: self.probabilities[m],
            })
            .collect()
    }

    fn free_energy_of(&self, p: &[f64]) -> f64 {
        free_energy_dense(p, &self.energies, self.beta)
    }
}

fn free_energy_dense(p: &[f64], energies: &[f64], beta: f64) -> f64 {
    let mut mean = 0.0;
    let mut entropy = 0.0;
    for (&pi, &ei) in p.iter().zip(energies) {
        if pi > 0.0 {
            mean += pi * ei;
            entropy -= pi * pi.ln();
        }
    }
    mean - entropy / beta
}

/// F(P) = E_P[E] − H(P)/β for a distribution indexed by coalition mask
/// (length 2^|universe|).
pub fn collective_free_energy(p: &[f64], energies: &EnergyTable, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let e = dense_energies(energies)?;
    if p.len() != e.len() {
        return Err(Error::InvalidArgument(format!(
            "distribution has {} entries, the power set has {}",
            p.len(),
            e.len()
        )));
    }
    if let Some(x) = p.iter().find(|&&x| x.is_nan() || x < 0.0) {
        return Err(Error::InvalidArgument(format!("negative probability {x}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "distribution sums to {total}, expected 1"
        )));
    }
    Ok(free_energy_dense(p, &e, beta))
}

/// As [`collective_free_energy`], for a sparse distribution keyed by coalition.
pub fn collective_free_energy_sparse(
    p: &HashMap<Coalition, f64>,
    energies: &EnergyTable,
    beta: f64,
) -> Result<f64> {
    let n = energies.universe().len();
    if n > GIBBS_MAX_HEADS {
        return Err(Error::Guard(format!(
            "exact Gibbs enumeration limited to {GIBBS_MAX_HEADS} heads, got {n}"
        )));
    }
    let mut dense = vec![0.0; 1 << n];
    for (c, &v) in p {
        dense[energies.universe().mask_of(c)? as usize] += v;
    }
    collective_free_energy(&dense, energies, beta)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalityAudit {
    pub trials: usize,
    pub violations: usize,
    /// min over trials of F(P) − F(P*).
    pub min_gap: f64,
}

/// Draws `trials` random distributions over the power set and checks that
/// none has lower free energy than P* (beyond 1e-9).
///
/// Trials cycle through three families: Dirichlet(1) mixtures with P*,
/// pure Dirichlet(1) draws, and multiplicative jitter of P*.
pub fn gibbs_optimality_audit(model: &GibbsModel, trials: usize, seed: u64) -> OptimalityAudit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f_star = model.free_energy();
    let size = model.probabilities.len();
    let mut min_gap = f64::INFINITY;
    let mut violations = 0;
    let mut p = vec![0.0; size];
    for t in 0..trials {
        match t % 3 {
            0 | 1 => {
                // Dirichlet(1) via normalized exponentials.
                for x in p.iter_mut() {
                    *x = -(1.0 - rng.random::<f64>()).ln();
                }
                normalize(&mut p);
                if t % 3 == 0 {
                    let lambda: f64 = 1.0 - rng.random::<f64>();
                    for (x, &s) in p.iter_mut().zip(&model.probabilities) {
                        *x = (1.0 - lambda) * s + lambda * *x;
                    }
                }
            }
            _ => {
                let scale: f64 = rng.random::<f64>();
                for (x, &s) in p.iter_mut().zip(&model.probabilities) {
                    *x = s * (scale * (2.0 * rng.random::<f64>() - 1.0)).exp();
                }
                normalize(&mut p);
            }
        }
        let gap = model.free_energy_of(&p) - f_star;
        if gap < -1e-9 {
            violations += 1;
        }
        min_gap = min_gap.min(gap);
    }
    OptimalityAudit {
        trials,
        violations,
        min_gap: if trials == 0 { 0.0 } else { min_gap },
    }
}

/// F(P) − F(P*) for a caller-supplied distribution indexed by mask.
pub fn free_energy_gap(model: &GibbsModel, p: &[f64]) -> Result<f64> {
    if p.len() != model.probabilities.len() {
        return Err(Error::InvalidArgument("distribution size mismatch".into()));
    }
    Ok(model.free_energy_of(p) - model.free_energy())
}

fn normalize(p: &mut [f64]) {
    let s: f64 = p.iter().sum();
    for x in p.iter_mut() {
        *x /= s;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruningAudit {
    pub beta: f64,
    pub pruned: Vec<String>,
    pub free_energy_before: f64,
    /// −ln(Z')/β over the restricted universe alone.
    pub restricted_free_energy: f64,
    /// Free energy with pruned heads held at a fixed baseline: the restricted
    /// partition function times 2^|pruned|.
    pub free_energy_after: f64,
    pub delta_free_energy: f64,
    pub eta_abs_sum: f64,
    /// ΔF / Σ|η|, absent when Σ|η| = 0.
    pub ratio: Option<f64>,
}

/// Free energy before and after removing `pruned` from the universe.
///
/// Removed heads are treated as fixed at a baseline output, so every coalition
/// C of the full universe has energy E(C \ pruned): the null player's removal
/// leaves F unchanged. Reports ΔF alongside Σ|η_i| over the pruned heads.
pub fn pruning_delta_audit(
    energies_before: &EnergyTable,
    pruned: &[HeadId],
    eta: &ScoreTable,
    beta: f64,
) -> Result<PruningAudit> {
    check_beta(beta)?;
    let pruned_set = Coalition::new(pruned.iter().copied())?;
    energies_before.universe().mask_of(&pruned_set)?;
    if pruned_set.len() == energies_before.universe().len() {
        return Err(Error::InvalidArgument(
            "cannot prune the whole universe".into(),
        ));
    }
    let before = gibbs_distribution(energies_before, beta)?;
    let restricted = energies_before.restrict(pruned_set.members())?;
    let after = gibbs_distribution(&restricted, beta)?;
    let k = pruned_set.len() as f64;
    let free_energy_after = -(after.log_partition() + k * std::f64::consts::LN_2) / beta;
    let delta = free_energy_after - before.free_energy();
    let eta_abs_sum = pruned_set
        .members()
        .iter()
        .map(|&h| eta.get(h).map(f64::abs))
        .sum::<Result<f64>>()?;
    Ok(PruningAudit {
        beta,
        pruned: pruned_set.members().iter().map(HeadId::to_string).collect(),
        free_energy_before: before.free_energy(),
        restricted_free_energy: after.free_energy(),
        free_energy_after,
        delta_free_energy: delta,
        eta_abs_sum,
        ratio: (eta_abs_sum > 0.0).then(|| delta / eta_abs_sum),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harsanyi::{mobius_dividends, SignConvention};
    use crate::shapley::full_shapley;

    fn h(i: u32) -> HeadId {
        HeadId::new(0, i)
    }

    fn additive(w: &[f64]) -> EnergyTable {
        let u = Universe::new((0..w.len() as u32).map(h)).unwrap();
        let n = w.len();
        EnergyTable::from_fn(u, n, |c| {
            c.members().iter().map(|m| w[m.head as usize]).sum()
        })
        .unwrap()
    }

    #[test]
    fn two_head_example() {
        let t = additive(&[1.0, 1.0]);
        let g = gibbs_distribution(&t, 1.0).unwrap();
        let z = 1.0 + 2.0 * (-1.0f64).exp() + (-2.0f64).exp();
        assert!((g.log_partition().exp() - z).abs() < 1e-12);
        assert!((z - 1.871_094_165_6).abs() < 1e-9);
        assert!((g.probability(&Coalition::empty()).unwrap() - 1.0 / z).abs() < 1e-12);
        assert!((g.probability(&Coalition::empty()).unwrap() - 0.534_446_645).abs() < 1e-9);
        assert!((g.free_energy() + z.ln()).abs() < 1e-12);
        assert!((g.free_energy() + 0.626_523_375).abs() < 1e-9);
        let f = collective_free_energy(g.probabilities(), &t, 1.0).unwrap();
        assert!((f - g.free_energy()).abs() < 1e-12);
    }

    #[test]
    fn zero_temperature_limit() {
        let t = additive(&[1.0, -0.5, 2.0]);
        let g = gibbs_distribution(&t, 1000.0).unwrap();
        // unique minimum: {h1}
        assert!(g.probability(&h(1).into()).unwrap() >= 1.0 - 1e-6);
        assert_eq!(g.top_coalitions(1)[0].members, vec!["0.1".to_string()]);
    }

    #[test]
    fn equal_energies_uniform() {
        let u = Universe::new((0..3).map(h)).unwrap();
        let t = EnergyTable::from_fn(u, 3, |_| 0.0).unwrap();
        let g = gibbs_distribution(&t, 2.0).unwrap();
        assert!(g.probabilities().iter().all(|&p| (p - 0.125).abs() < 1e-15));
    }

    #[test]
    fn free_energy_closed_forms() {
        let t = additive(&[0.7, 0.7]);
        let mut point = vec![0.0; 4];
        point[0] = 1.0;
        assert_eq!(collective_free_energy(&point, &t, 1.0).unwrap(), 0.0);
        // uniform over {h0} and {h1}, both with energy 0.7
        let p = vec![0.0, 0.5, 0.5, 0.0];
        let beta = 3.0;
        let f = collective_free_energy(&p, &t, beta).unwrap();
        assert!((f - (0.7 - std::f64::consts::LN_2 / beta)).abs() < 1e-12);
        let mut sparse = HashMap::new();
        sparse.insert(Coalition::from(h(0)), 0.5);
        sparse.insert(Coalition::from(h(1)), 0.5);
        assert!((collective_free_energy_sparse(&sparse, &t, beta).unwrap() - f).abs() < 1e-15);
        sparse.insert(Coalition::from(h(7)), 0.0);
        assert!(collective_free_energy_sparse(&sparse, &t, beta).is_err());
        assert!(collective_free_energy(&[1.5, -0.5, 0.0, 0.0], &t, 1.0).is_err());
        assert!(collective_free_energy(&[0.5, 0.0, 0.0, 0.0], &t, 1.0).is_err());
        assert!(collective_free_energy(&[1.0, 0.0], &t, 1.0).is_err());
    }

    #[test]
    fn optimality_audit_and_gaps() {
        let t = additive(&[1.0, 1.0]);
        let g = gibbs_distribution(&t, 1.0).unwrap();
        let audit = gibbs_optimality_audit(&g, 1000, 3);
        assert_eq!(audit.violations, 0);
        assert!(audit.min_gap >= -1e-9);
        assert!(free_energy_gap(&g, g.probabilities()).unwrap().abs() < 1e-15);
        let point_max = vec![0.0, 0.0, 0.0, 1.0];
        assert!(free_energy_gap(&g, &point_max).unwrap() > 0.0);
    }

    #[test]
    fn guards() {
        let t = additive(&[1.0, 1.0]);
        assert!(gibbs_distribution(&t, 0.0).is_err());
        assert!(gibbs_distribution(&t, f64::INFINITY).is_err());
        let u = Universe::new((0..21).map(h)).unwrap();
        let big = EnergyTable::from_fn(u, 1, |c| c.len() as f64).unwrap();
        assert!(matches!(
            gibbs_distribution(&big, 1.0),
            Err(Error::Guard(_))
        ));
        let u = Universe::new((0..3).map(h)).unwrap();
        let partial = EnergyTable::from_fn(u, 2, |c| c.len() as f64).unwrap();
        assert!(gibbs_distribution(&partial, 1.0).is_err());
    }

    #[test]
    fn pruning_null_player_and_identity() {
        let t = additive(&[0.0, 1.5, -0.5]);
        let eta = full_shapley(&mobius_dividends(&t, SignConvention::Raw).unwrap(), false).unwrap();
        assert_eq!(eta.get(h(0)).unwrap(), 0.0);
        let a = pruning_delta_audit(&t, &[h(0)], &eta, 1.0).unwrap();
        assert!(a.delta_free_energy.abs() < 1e-9);
        assert_eq!(a.ratio, None);
        let none = pruning_delta_audit(&t, &[], &eta, 1.0).unwrap();
        assert_eq!(none.delta_free_energy, 0.0);
        assert!(pruning_delta_audit(&t, &[h(0), h(1), h(2)], &eta, 1.0).is_err());
        assert!(pruning_delta_audit(&t, &[h(9)], &eta, 1.0).is_err());
    }
}
