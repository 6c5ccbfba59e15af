//! Cooperation, redundancy and synergy among attention heads.
//!
//! Discretized head outputs (argmax traces) are turned into coalition
//! energies E(C) = H(C), the joint Shannon entropy in bits. Möbius inversion
//! of E gives Harsanyi dividends; dividends give Shapley importances, and the
//! importances drive pruning masks. Small universes can additionally be
//! audited against the exact Gibbs distribution over coalitions.

pub mod cli;
pub mod coalition;
pub mod entropy;
pub mod error;
pub mod gibbs;
pub mod harsanyi;
pub mod pruning;
pub mod report;
pub mod shapley;
pub mod synth;
pub mod trace;

pub use coalition::{Coalition, Universe};
pub use entropy::{build_energy_table, empirical_distribution, joint_entropy, EnergyTable};
pub use error::{Error, Result};
pub use gibbs::{
    collective_free_energy, gibbs_distribution, gibbs_optimality_audit, pruning_delta_audit,
    GibbsModel,
};
pub use harsanyi::{mobius_dividends, reconstruct_energy, DividendTable, SignConvention};
pub use pruning::{
    flop_estimate, random_mask, select_heads, FlopReport, ModelGeometry, PruneMask, PruneMethod,
    SelectionMode,
};
pub use shapley::{
    full_shapley, permutation_shapley_oracle, truncated_shapley, ScoreKind, ScoreTable,
};
pub use synth::{synth_traces, Generator, SynthSpec};
pub use trace::{load_traces, write_traces, Granularity, HeadId, TraceHeader, TraceSet};
