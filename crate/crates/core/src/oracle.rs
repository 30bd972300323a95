//! Numerical reference for the energy-maximisation problem
//! `max Σ_i ρ‖G w_i‖²` subject to `SINR_i ≥ μ SINR_i^ZF` and `‖w_i‖ = 1`.
//!
//! Augmented-Lagrangian ascent on the product of unit spheres: Riemannian
//! gradient steps with backtracking, multiplier updates between rounds and a
//! growing penalty weight. Restarts begin at zero-forcing, at caller-provided
//! warm starts and at perturbed zero-forcing beams. Only iterates that satisfy
//! every SINR constraint exactly are ever reported.

use crate::channel::{cscg, derive_seed};
use crate::error::{Error, Result};
use crate::metrics::{harvested_energy, sinr_all};
use crate::numerics::{gram, normalized, CMat};
use crate::scheduler::zf_beamformers;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub restarts: usize,
    /// Gradient steps per restart, split evenly over the multiplier rounds.
    pub steps: usize,
    /// Multiplier updates per restart; the penalty weight grows each round.
    pub rounds: usize,
    pub penalty_start: f64,
    pub penalty_growth: f64,
    /// First trial step of the backtracking line search.
    pub initial_step: f64,
    /// Largest perturbation scale relative to a unit beam.
    pub perturbation: f64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            restarts: 64,
            steps: 600,
            rounds: 12,
            penalty_start: 10.0,
            penalty_growth: 2.0,
            initial_step: 0.1,
            perturbation: 1.0,
            seed: 0,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::config("oracle.restarts", "must be at least 1"));
        }
        if self.rounds == 0 || self.steps < self.rounds {
            return Err(Error::config("oracle.steps", "need at least one step per round"));
        }
        if !(self.penalty_start > 0.0 && self.penalty_growth >= 1.0 && self.initial_step > 0.0 && self.perturbation >= 0.0) {
            return Err(Error::config("oracle", "schedules must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub w: CMat,
    /// `ρ ‖G W‖²_F` of the best feasible point.
    pub eh_value: f64,
    /// Best value seen after each restart, in restart order.
    pub best_trace: Vec<f64>,
}

struct Problem<'a> {
    h_s: &'a CMat,
    g: &'a CMat,
    a: CMat,
    rho: f64,
    gamma: Vec<f64>,
}

impl Problem<'_> {
    fn feasible(&self, w: &CMat) -> bool {
        sinr_all(self.h_s, w, self.rho).iter().zip(&self.gamma).all(|(s, t)| s >= t)
    }

    fn value(&self, w: &CMat) -> f64 {
        harvested_energy(self.g, w, self.rho, 1.0)
    }

    /// `c_k = ρ|h_k w_k|²/γ_k − 1 − ρ Σ_{i≠k} |h_k w_i|²`, feasible when
    /// nonnegative.
    fn slack(&self, gains: &CMat) -> Vec<f64> {
        let s = gains.ncols();
        (0..s)
            .map(|k| {
                let interference: f64 = (0..s).filter(|&i| i != k).map(|i| gains[(k, i)].norm_sqr()).sum();
                self.rho * gains[(k, k)].norm_sqr() / self.gamma[k] - 1.0 - self.rho * interference
            })
            .collect()
    }

    /// Augmented Lagrangian `Σ wᴴAw − (1/2β) Σ_k (max(0, λ_k − β c_k)² − λ_k²)`.
    fn lagrangian(&self, w: &CMat, lambda: &[f64], beta: f64) -> f64 {
        let c = self.slack(&(self.h_s * w));
        let penalty: f64 = c
            .iter()
            .zip(lambda)
            .map(|(&c, &l)| (l - beta * c).max(0.0).powi(2) - l * l)
            .sum();
        (self.g * w).norm_squared() - penalty / (2.0 * beta)
    }

    /// Riemannian gradient of the Lagrangian on the product of unit spheres.
    fn gradient(&self, w: &CMat, lambda: &[f64], beta: f64) -> CMat {
        let mut grad = &self.a * w;
        let gains = self.h_s * w;
        let c = self.slack(&gains);
        let s = w.ncols();
        for k in 0..s {
            let weight = (lambda[k] - beta * c[k]).max(0.0);
            if weight == 0.0 {
                continue;
            }
            let h_conj = self.h_s.row(k).adjoint();
            for i in 0..s {
                let coef = if i == k { self.rho / self.gamma[k] } else { -self.rho };
                let mut col = grad.column_mut(i);
                col += &h_conj * (gains[(k, i)] * (weight * coef));
            }
        }
        for i in 0..s {
            let wi = w.column(i).into_owned();
            let radial = wi.dotc(&grad.column(i)).re;
            let mut col = grad.column_mut(i);
            col -= wi.scale(radial);
        }
        grad
    }
}

fn normalize_columns(w: &mut CMat) {
    for j in 0..w.ncols() {
        if let Some(c) = normalized(&w.column(j).into_owned()) {
            w.set_column(j, &c);
        }
    }
}

/// Largest feasible point on the segment from `from` (feasible) toward `to`,
/// columns renormalised.
fn restore(problem: &Problem, from: &CMat, to: &CMat) -> CMat {
    let blend = |t: f64| {
        let mut w = from + (to - from).scale(t);
        normalize_columns(&mut w);
        w
    };
    if problem.feasible(to) {
        return to.clone();
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if problem.feasible(&blend(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo == 0.0 {
        from.clone()
    } else {
        blend(lo)
    }
}

struct Best {
    w: CMat,
    value: f64,
}

impl Best {
    fn offer(&mut self, problem: &Problem, w: &CMat) {
        let value = problem.value(w);
        if value > self.value {
            self.value = value;
            self.w = w.clone();
        }
    }
}

/// One restart: multiplier rounds of backtracking ascent. `anchor` is a
/// known feasible point used to pull infeasible iterates back.
fn ascend(problem: &Problem, start: CMat, anchor: &CMat, cfg: &OracleConfig) -> Best {
    let s = start.ncols();
    let mut w = start;
    let mut best = Best {
        w: anchor.clone(),
        value: problem.value(anchor),
    };
    if problem.feasible(&w) {
        best.offer(problem, &w);
    }
    let mut lambda = vec![0.0; s];
    let mut beta = cfg.penalty_start;
    let per_round = cfg.steps / cfg.rounds;
    let mut step = cfg.initial_step;
    for _ in 0..cfg.rounds {
        let mut current = problem.lagrangian(&w, &lambda, beta);
        for _ in 0..per_round {
            let grad = problem.gradient(&w, &lambda, beta);
            let slope = grad.norm_squared();
            if slope < 1e-20 {
                break;
            }
            step *= 2.0;
            let mut accepted = false;
            for _ in 0..40 {
                let mut trial = &w + grad.scale(step);
                normalize_columns(&mut trial);
                let val = problem.lagrangian(&trial, &lambda, beta);
                if val >= current + 1e-4 * step * slope {
                    w = trial;
                    current = val;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
            if problem.feasible(&w) {
                best.offer(problem, &w);
            }
        }
        let c = problem.slack(&(problem.h_s * &w));
        for (l, c) in lambda.iter_mut().zip(c) {
            *l = (*l - beta * c).max(0.0);
        }
        beta *= cfg.penalty_growth;
        let edge = restore(problem, &best.w, &w);
        best.offer(problem, &edge);
    }
    best
}

pub fn oracle_solve(h_s: &CMat, g: &CMat, rho: f64, mu: f64, cfg: &OracleConfig) -> Result<OracleSolution> {
    oracle_solve_from(h_s, g, rho, mu, cfg, &[])
}

/// As [`oracle_solve`], with extra feasible starting points tried right
/// after zero-forcing.
pub fn oracle_solve_from(h_s: &CMat, g: &CMat, rho: f64, mu: f64, cfg: &OracleConfig, warm: &[CMat]) -> Result<OracleSolution> {
    cfg.validate()?;
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::InvalidMu(mu));
    }
    let zf = zf_beamformers(h_s, rho)?;
    let problem = Problem {
        h_s,
        g,
        a: gram(g),
        rho,
        gamma: zf.sinr.iter().map(|s| mu * s).collect(),
    };
    let (m, s) = zf.w.shape();

    let results: Vec<Option<(CMat, f64)>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let start = if r == 0 {
                zf.w.clone()
            } else if let Some(w) = warm.get(r - 1) {
                w.clone()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[r as u64]));
                let scale = cfg.perturbation * r as f64 / cfg.restarts as f64;
                let noise = CMat::from_fn(m, s, |_, _| cscg(&mut rng));
                let mut w = &zf.w + noise.scale(scale);
                normalize_columns(&mut w);
                w
            };
            let anchor = if problem.feasible(&start) { &start } else { &zf.w };
            let best = ascend(&problem, start.clone(), anchor, cfg);
            problem.feasible(&best.w).then_some((best.w, best.value))
        })
        .collect();

    let mut best: Option<(CMat, f64)> = None;
    let mut best_trace = Vec::with_capacity(results.len());
    for candidate in results.into_iter().flatten() {
        if best.as_ref().is_none_or(|(_, v)| candidate.1 > *v) {
            best = Some(candidate);
        }
        best_trace.push(best.as_ref().map_or(f64::NEG_INFINITY, |(_, v)| *v));
    }
    let (w, eh_value) = best.ok_or(Error::Infeasible { restarts: cfg.restarts })?;
    Ok(OracleSolution { w, eh_value, best_trace })
}
