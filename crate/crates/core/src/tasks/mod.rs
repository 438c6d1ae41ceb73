//! Parametric algorithm families whose cost is piecewise constant in the
//! tuned parameter, plus the synthetic data behind them.

pub mod clustering;
pub mod knapsack;
pub mod mwis;

pub use clustering::{
    gaussian_mixture_gen, hamming_loss, lloyd_seed_centers, lloyd_seed_loss, lloyd_seed_loss_at, ClusterDataset,
};
pub use knapsack::{greedy_knapsack, knapsack_critical_rhos, knapsack_gen, knapsack_loss, Item, KnapsackInstance};
pub use mwis::{mwis_greedy, mwis_loss, WeightedGraph};
