//! Per-trial SINR, harvested energy and sum rate.

use crate::numerics::{row, row_dot, CMat};

/// `SINR_k = ρ|h_k w_k|² / (1 + Σ_{i≠k} ρ|h_k w_i|²)` with unit noise.
/// Columns beyond the first `|S|` (dedicated beams) count as interference.
pub fn sinr_all(h_s: &CMat, w: &CMat, rho: f64) -> Vec<f64> {
    let s = h_s.nrows();
    debug_assert!(w.ncols() >= s);
    let gains = h_s * w;
    (0..s)
        .map(|k| {
            let desired = rho * gains[(k, k)].norm_sqr();
            let interference: f64 = (0..w.ncols()).filter(|&i| i != k).map(|i| rho * gains[(k, i)].norm_sqr()).sum();
            desired / (1.0 + interference)
        })
        .collect()
}

/// SINR of user `k` recomputed one inner product at a time.
pub fn sinr_user(h_s: &CMat, w: &CMat, rho: f64, k: usize) -> f64 {
    let h = row(h_s, k);
    let mut interference = 0.0;
    let mut desired = 0.0;
    for i in 0..w.ncols() {
        let p = rho * row_dot(&h, &w.column(i).into_owned()).norm_sqr();
        if i == k {
            desired = p;
        } else {
            interference += p;
        }
    }
    desired / (1.0 + interference)
}

/// `Q = ζ Σ_i ρ ‖G w_i‖²`.
pub fn harvested_energy(g: &CMat, w: &CMat, rho: f64, zeta: f64) -> f64 {
    zeta * rho * (g * w).norm_squared()
}

/// `Σ ln(1 + SINR_k)` in nats.
pub fn sum_rate(sinrs: &[f64]) -> f64 {
    sinrs.iter().map(|&s| s.ln_1p()).sum()
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}
