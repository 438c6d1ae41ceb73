//! Entropic mirror descent for log-overlap objectives on a cell simplex.
//!
//! Objective in the cell masses `w = γ·v̂ + (1 − γ)·z`, with `z` on the
//! probability simplex:
//!
//! ```text
//! F(w) = κ · KL(w ‖ v̂) − Σ_s c_s · log(Σ_{k ∈ S_s} w_k)
//! ```
//!
//! where each `S_s` is a contiguous run of cells. Both the FTRL initializer
//! (`κ = 1`, `c_s = η`) and task similarity (`κ = 0`, `γ = 0`, `c_s = 1/T`)
//! are instances.

/// A contiguous run of cells `[start, end)` with its coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Term {
    pub start: usize,
    pub end: usize,
    pub coef: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct LogOverlapProblem {
    pub vhat: Vec<f64>,
    pub gamma: f64,
    pub kl_weight: f64,
    pub terms: Vec<Term>,
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub w: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) const DEFAULT_TOL: f64 = 1e-12;
pub(crate) const DEFAULT_MAX_ITER: usize = 100_000;

impl LogOverlapProblem {
    /// Merges terms over identical cell runs.
    pub fn new(vhat: Vec<f64>, gamma: f64, kl_weight: f64, mut terms: Vec<Term>) -> Self {
        terms.sort_by_key(|t| (t.start, t.end));
        let mut merged: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if last.start == t.start && last.end == t.end => last.coef += t.coef,
                _ => merged.push(t),
            }
        }
        LogOverlapProblem { vhat, gamma, kl_weight, terms: merged }
    }

    pub fn weights(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.vhat)
            .map(|(&zk, &vk)| self.gamma * vk + (1.0 - self.gamma) * zk)
            .collect()
    }

    pub fn value_w(&self, w: &[f64]) -> f64 {
        let mut v = 0.0;
        if self.kl_weight != 0.0 {
            for (&wk, &vk) in w.iter().zip(&self.vhat) {
                if wk > 0.0 {
                    v += self.kl_weight * wk * (wk / vk).ln();
                }
            }
        }
        for t in &self.terms {
            let mass: f64 = w[t.start..t.end].iter().sum();
            if mass <= 0.0 {
                return f64::INFINITY;
            }
            v -= t.coef * mass.ln();
        }
        v
    }

    /// Gradient with respect to `w`.
    pub fn gradient_w(&self, w: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = if self.kl_weight != 0.0 {
                let ratio = (w[k] / self.vhat[k]).max(1e-300);
                self.kl_weight * (ratio.ln() + 1.0)
            } else {
                0.0
            };
        }
        for t in &self.terms {
            let mass: f64 = w[t.start..t.end].iter().sum();
            let g = t.coef / mass.max(1e-300);
            for o in &mut out[t.start..t.end] {
                *o -= g;
            }
        }
    }

    /// Exponentiated gradient with backtracking, started at `z0`.
    ///
    /// Stops when `Σ_k z_k |g_k − ⟨z, g⟩| < tol`, the small-step limit of the
    /// entropic gradient mapping, or after `max_iter` iterations.
    pub fn solve(&self, z0: &[f64], tol: f64, max_iter: usize) -> Solution {
        let n = z0.len();
        let scale = 1.0 - self.gamma;
        let mut z = z0.to_vec();
        let mut w = self.weights(&z);
        let mut f = self.value_w(&w);
        let mut g = vec![0.0; n];
        let mut next = vec![0.0; n];
        let mut step = 1.0;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < max_iter {
            self.gradient_w(&w, &mut g);
            g.iter_mut().for_each(|x| *x *= scale);
            let mean: f64 = z.iter().zip(&g).map(|(a, b)| a * b).sum();
            let mapping: f64 = z.iter().zip(&g).map(|(a, b)| a * (b - mean).abs()).sum();
            if mapping < tol {
                converged = true;
                break;
            }
            iterations += 1;
            let gmin = z
                .iter()
                .zip(&g)
                .filter(|(zk, _)| **zk > 0.0)
                .map(|(_, gk)| *gk)
                .fold(f64::INFINITY, f64::min);
            loop {
                let mut total = 0.0;
                for k in 0..n {
                    next[k] = if z[k] > 0.0 { z[k] * (-step * (g[k] - gmin)).exp() } else { 0.0 };
                    total += next[k];
                }
                next.iter_mut().for_each(|x| *x /= total);
                let w_next = self.weights(&next);
                let f_next = self.value_w(&w_next);
                let mut lin = 0.0;
                let mut kl = 0.0;
                for k in 0..n {
                    lin += g[k] * (next[k] - z[k]);
                    if next[k] > 0.0 {
                        kl += next[k] * (next[k] / z[k]).ln();
                    }
                }
                let slack = 1e-15 * (1.0 + f.abs());
                if f_next <= f + lin + kl / step + slack || step < 1e-20 {
                    std::mem::swap(&mut z, &mut next);
                    w = w_next;
                    f = f_next;
                    break;
                }
                step *= 0.5;
            }
            step = (step * 2.0).min(1e12);
        }
        Solution { w, value: f, iterations, converged }
    }
}
