//! Greedy knapsack with the `v / w^ρ` insertion order.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::piecewise::MERGE_TOL;
use crate::{Error, Interval, PiecewiseConstant, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub weight: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnapsackInstance {
    pub cap: f64,
    pub items: Vec<Item>,
}

impl KnapsackInstance {
    pub fn new(cap: f64, items: Vec<Item>) -> Result<Self> {
        if !(cap >= 0.0 && cap.is_finite()) {
            return Err(Error::InvalidArgument(format!("capacity must be nonnegative, got {cap}")));
        }
        for (i, it) in items.iter().enumerate() {
            if !(it.weight > 0.0 && it.weight.is_finite()) || !(it.value >= 0.0 && it.value.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "item {i} has weight {} and value {}",
                    it.weight, it.value
                )));
            }
        }
        Ok(KnapsackInstance { cap, items })
    }

    pub fn total_value(&self) -> f64 {
        self.items.iter().map(|i| i.value).sum()
    }
}

/// Inserts items by decreasing `v / w^ρ` (lower index first on ties),
/// skipping any item that no longer fits. Returns `(selected, value)`.
pub fn greedy_knapsack(inst: &KnapsackInstance, rho: f64) -> (Vec<usize>, f64) {
    // log-scores avoid overflow of w^ρ for large ρ
    let scores: Vec<f64> = inst
        .items
        .iter()
        .map(|it| if it.value > 0.0 { it.value.ln() - rho * it.weight.ln() } else { f64::NEG_INFINITY })
        .collect();
    let mut order: Vec<usize> = (0..inst.items.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut remaining = inst.cap;
    let mut selected = Vec::new();
    let mut value = 0.0;
    for i in order {
        let it = inst.items[i];
        if it.weight <= remaining {
            remaining -= it.weight;
            value += it.value;
            selected.push(i);
        }
    }
    selected.sort_unstable();
    (selected, value)
}

/// Parameters inside the open domain where two items swap order:
/// `ln(v_i/v_j) / ln(w_i/w_j)` for pairs with distinct weights.
pub fn knapsack_critical_rhos(inst: &KnapsackInstance, domain: Interval) -> Vec<f64> {
    let items = &inst.items;
    let mut out = Vec::new();
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            let (a, b) = (items[i], items[j]);
            if a.weight == b.weight || a.value <= 0.0 || b.value <= 0.0 {
                continue;
            }
            let rho = (a.value / b.value).ln() / (a.weight / b.weight).ln();
            if rho > domain.lo && rho < domain.hi {
                out.push(rho);
            }
        }
    }
    sort_dedup(&mut out);
    out
}

pub(crate) fn sort_dedup(xs: &mut Vec<f64>) {
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|b, a| *b - *a < MERGE_TOL);
}

/// Greedy value over the domain as a piecewise-constant function, evaluated
/// once per cell between consecutive critical parameters.
pub fn knapsack_value_pc(inst: &KnapsackInstance, domain: Interval) -> Result<PiecewiseConstant> {
    let cuts = knapsack_critical_rhos(inst, domain);
    let mut edges = vec![domain.lo];
    edges.extend_from_slice(&cuts);
    edges.push(domain.hi);
    let values = edges.windows(2).map(|w| greedy_knapsack(inst, 0.5 * (w[0] + w[1])).1).collect();
    Ok(PiecewiseConstant::new(domain, edges, values)?.normalize())
}

/// `1 − value(ρ) / Σ v`.
pub fn knapsack_loss(inst: &KnapsackInstance, domain: Interval) -> Result<PiecewiseConstant> {
    let total = inst.total_value();
    let value = knapsack_value_pc(inst, domain)?;
    if total <= 0.0 {
        return PiecewiseConstant::constant(domain, 0.0);
    }
    Ok(value.map(|v| (1.0 - v / total).clamp(0.0, 1.0)))
}

pub const KNAPSACK_CAP: f64 = 100.0;
pub const HEAVY_ITEMS: usize = 10;
pub const LIGHT_ITEMS: usize = 40;
pub const ITEM_SD: f64 = 0.5;

/// Ten heavy items with weight and value around 27, then forty light items
/// with weight around `19 + shift` and value around 18; capacity 100.
pub fn knapsack_gen<R: Rng + ?Sized>(shift: f64, rng: &mut R) -> Result<KnapsackInstance> {
    if !(0.0..=2.0).contains(&shift) {
        return Err(Error::InvalidArgument(format!("weight shift must lie in [0, 2], got {shift}")));
    }
    let heavy = Normal::new(27.0, ITEM_SD).expect("valid normal");
    let light_w = Normal::new(19.0 + shift, ITEM_SD).expect("valid normal");
    let light_v = Normal::new(18.0, ITEM_SD).expect("valid normal");
    let positive = |d: &Normal<f64>, rng: &mut R| loop {
        let x = d.sample(rng);
        if x > 0.0 {
            break x;
        }
    };
    let mut items = Vec::with_capacity(HEAVY_ITEMS + LIGHT_ITEMS);
    for _ in 0..HEAVY_ITEMS {
        let weight = positive(&heavy, rng);
        let value = positive(&heavy, rng);
        items.push(Item { weight, value });
    }
    for _ in 0..LIGHT_ITEMS {
        let weight = positive(&light_w, rng);
        let value = positive(&light_v, rng);
        items.push(Item { weight, value });
    }
    KnapsackInstance::new(KNAPSACK_CAP, items)
}
