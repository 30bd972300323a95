//! Closed-form performance predictions.
//!
//! Rates are in nats. Channel gains are chi-square with `2M` degrees of
//! freedom under the unit-variance-per-complex-entry convention, so the
//! density is `x^{M-1} e^{-x} / Γ(M)` with mean `M`.

use crate::channel::{rayleigh_matrix, SimConfig};
use crate::error::{Error, Result};
use crate::numerics::{gram, hermitian_eig, CVec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

/// Composite Simpson rule with node doubling.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    /// Relative change between successive doublings that counts as converged.
    pub rel_tol: f64,
    /// Upper-tail mass of the integrand's density left outside `[0, x_hi]`.
    pub tail: f64,
    pub min_intervals: usize,
    pub max_intervals: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            tail: 1e-10,
            min_intervals: 64,
            max_intervals: 1 << 22,
        }
    }
}

impl Quadrature {
    pub fn integrate(&self, f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
        let simpson = |n: usize| {
            let h = (hi - lo) / n as f64;
            let mut acc = f(lo) + f(hi);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(lo + i as f64 * h);
            }
            acc * h / 3.0
        };
        let mut n = self.min_intervals.max(2) & !1;
        let mut prev = simpson(n);
        while n < self.max_intervals {
            n *= 2;
            let last = simpson(n);
            if (last - prev).abs() <= self.rel_tol * last.abs().max(f64::MIN_POSITIVE) {
                return Ok(last);
            }
            prev = last;
        }
        Err(Error::Quadrature {
            lo,
            hi,
            prev,
            last: simpson(n),
        })
    }
}

/// `C(n, k)` as a float.
fn binomial(n: usize, k: usize) -> f64 {
    (ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0))
        .exp()
        .round()
}

/// Regularised incomplete beta `I_x(a₁, a₂)` for positive integer
/// parameters, by its finite binomial sum.
pub fn regularized_incomplete_beta(x: f64, a1: usize, a2: usize) -> f64 {
    assert!(a1 >= 1 && a2 >= 1, "integer parameters must be positive");
    let n = a1 + a2 - 1;
    (a1..=n)
        .map(|j| binomial(n, j) * x.powi(j as i32) * (1.0 - x).powi((n - j) as i32))
        .sum::<f64>()
        .min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SusStatistics {
    /// `Pr[k ∈ U_i]` for `i = 1..=M`, with `Pr[k ∈ U_1] = 1`.
    pub probabilities: Vec<f64>,
    /// Expected candidate-set sizes `|U_i| ≈ K_ID · Pr[k ∈ U_i]`.
    pub set_sizes: Vec<f64>,
    /// `Σ_i Pr[U_i ≠ ∅]`, rounded and capped at `M`.
    pub expected_selected: usize,
}

pub fn sus_statistics(m: usize, epsilon: f64, k_id: usize) -> SusStatistics {
    let x = epsilon * epsilon;
    let probabilities: Vec<f64> = (1..=m)
        .map(|i| if i == 1 { 1.0 } else { regularized_incomplete_beta(x, i - 1, m - i + 1) })
        .collect();
    let set_sizes: Vec<f64> = probabilities.iter().map(|p| k_id as f64 * p).collect();
    let nonempty: f64 = probabilities.iter().map(|p| 1.0 - (1.0 - p).powi(k_id as i32)).sum();
    SusStatistics {
        probabilities,
        set_sizes,
        expected_selected: (nonempty.round() as usize).clamp(1, m),
    }
}

pub fn chi2_pdf(x: f64, m: usize) -> f64 {
    if x <= 0.0 {
        return if m == 1 && x == 0.0 { 1.0 } else { 0.0 };
    }
    ((m as f64 - 1.0) * x.ln() - x - ln_gamma(m as f64)).exp()
}

/// Upper tail `e^{-x} Σ_{p<M} x^p / p!`.
pub fn chi2_sf(x: f64, m: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut term = 1.0;
    let mut acc = 1.0;
    for p in 1..m {
        term *= x / p as f64;
        acc += term;
    }
    (acc.ln() - x).exp().min(1.0)
}

pub fn chi2_cdf(x: f64, m: usize) -> f64 {
    1.0 - chi2_sf(x, m)
}

/// Density of the largest of `n` i.i.d. chi-square(2M) gains,
/// `n f(x) F(x)^{n-1}`; `n` may be fractional.
#[derive(Debug, Clone, Copy)]
pub struct OrderStatDensity {
    pub m: usize,
    pub n: f64,
}

impl OrderStatDensity {
    pub fn pdf(&self, x: f64) -> f64 {
        let f = chi2_pdf(x, self.m);
        if self.n == 1.0 {
            return f;
        }
        let cdf = chi2_cdf(x, self.m);
        if cdf <= 0.0 {
            return 0.0;
        }
        self.n * f * ((self.n - 1.0) * cdf.ln()).exp()
    }

    /// Smallest integer `x` with `n · (1 − F(x)) < tail`.
    pub fn upper_limit(&self, tail: f64) -> f64 {
        let mut x = self.m as f64;
        while self.n * chi2_sf(x, self.m) >= tail {
            x += 1.0;
        }
        x
    }

    pub fn expect(&self, g: impl Fn(f64) -> f64, quad: &Quadrature) -> Result<f64> {
        let hi = self.upper_limit(quad.tail);
        quad.integrate(|x| g(x) * self.pdf(x), 0.0, hi)
    }
}

pub fn order_stat_pdf(m: usize, set_size: f64) -> OrderStatDensity {
    assert!(set_size > 0.0);
    OrderStatDensity { m, n: set_size }
}

/// Order-statistic densities of the first `|S|` SUS picks.
fn selected_densities(m: usize, epsilon: f64, k_id: usize) -> Vec<OrderStatDensity> {
    let stats = sus_statistics(m, epsilon, k_id);
    stats.set_sizes[..stats.expected_selected]
        .iter()
        .map(|&n| order_stat_pdf(m, n.max(1.0)))
        .collect()
}

fn sizes_to_densities(m: usize, sizes: &[f64]) -> Vec<OrderStatDensity> {
    sizes.iter().map(|&n| order_stat_pdf(m, n.max(1.0))).collect()
}

fn sum_expectations(densities: &[OrderStatDensity], g: impl Fn(f64) -> f64 + Copy, quad: &Quadrature) -> Result<f64> {
    densities.iter().map(|d| d.expect(g, quad)).sum()
}

/// `Σ_i ∫ ln(1 + μρx) f_{π(i)}(x) dx`.
pub fn expected_sum_rate(mu: f64, rho: f64, m: usize, epsilon: f64, k_id: usize, quad: &Quadrature) -> Result<f64> {
    expected_sum_rate_for_sizes(mu, rho, m, &sizes_for(m, epsilon, k_id), quad)
}

fn sizes_for(m: usize, epsilon: f64, k_id: usize) -> Vec<f64> {
    selected_densities(m, epsilon, k_id).iter().map(|d| d.n).collect()
}

/// Sum-rate integral for explicit candidate-set sizes.
pub fn expected_sum_rate_for_sizes(mu: f64, rho: f64, m: usize, sizes: &[f64], quad: &Quadrature) -> Result<f64> {
    let snr = mu * rho;
    if snr == 0.0 {
        return Ok(0.0);
    }
    sum_expectations(&sizes_to_densities(m, sizes), |x| (snr * x).ln_1p(), quad)
}

/// Sum-rate loss relative to zero-forcing; `high_snr` selects `−|S| ln μ`.
pub fn rate_loss(mu: f64, rho: f64, m: usize, epsilon: f64, k_id: usize, high_snr: bool, quad: &Quadrature) -> Result<f64> {
    let densities = selected_densities(m, epsilon, k_id);
    if high_snr {
        return Ok(-(densities.len() as f64) * mu.ln());
    }
    if mu == 1.0 {
        return Ok(0.0);
    }
    sum_expectations(&densities, |x| (rho * x).ln_1p() - (mu * rho * x).ln_1p(), quad)
}

/// Mean channel gain over the selected users.
pub fn expected_channel_norm(m: usize, epsilon: f64, k_id: usize, quad: &Quadrature) -> Result<f64> {
    let densities = selected_densities(m, epsilon, k_id);
    Ok(sum_expectations(&densities, |x| x, quad)? / densities.len() as f64)
}

/// Predicted `E[cos²θ^ID]`.
pub fn g_mu(mu: f64, rho: f64, eh2: f64, selected: usize, m: usize) -> f64 {
    let interference = if m > 1 {
        rho * eh2 * (selected as f64 - 1.0) / (m as f64 - 1.0)
    } else {
        0.0
    };
    (1.0 + interference) / (1.0 / mu + interference)
}

/// `E[sin φ cos φ] = (M − 1) B(3/2, M − 1/2)`.
pub fn sincos_expectation(m: usize) -> f64 {
    assert!(m >= 2);
    (m as f64 - 1.0) * ln_beta(1.5, m as f64 - 0.5).exp()
}

/// Coefficient of `M E[λ_max] − E‖G‖²_F` in the per-beam bound.
pub fn f_mu(g: f64, m: usize) -> f64 {
    let mf = m as f64;
    ((mf - 2.0) * g + 1.0) / (mf * (mf - 1.0)) - 2.0 * ln_beta(1.5, mf - 0.5).exp() * (g * (1.0 - g)).max(0.0).sqrt()
}

/// Monte Carlo mean of the largest eigenvalue of `GᴴG`, `G` being
/// `K_EH × M` i.i.d. unit complex Gaussian.
pub fn wishart_top_eig_mean(m: usize, k_eh: usize, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    for _ in 0..samples {
        let g = rayleigh_matrix(&mut rng, k_eh, m);
        acc += hermitian_eig(&gram(&g)).expect("Gram matrix is Hermitian").lambda_max();
    }
    acc / samples as f64
}

#[derive(Debug, Clone)]
pub struct AnalysisInputs {
    pub m: usize,
    pub k_id: usize,
    pub k_eh: usize,
    pub epsilon: f64,
    pub mu: f64,
    /// Per-beam SNR.
    pub rho: f64,
    pub selected: usize,
    pub b_eh: u32,
    pub quadrature: Quadrature,
    pub wishart_samples: usize,
    pub wishart_seed: u64,
}

impl AnalysisInputs {
    /// Uses the expected SUS set size and an equal power split over it.
    pub fn from_config(cfg: &SimConfig) -> Self {
        let selected = sus_statistics(cfg.m, cfg.epsilon, cfg.k_id).expected_selected;
        Self {
            m: cfg.m,
            k_id: cfg.k_id,
            k_eh: cfg.k_eh,
            epsilon: cfg.epsilon,
            mu: cfg.mu,
            rho: cfg.effective_snr() / selected as f64,
            selected,
            b_eh: cfg.b_eh,
            quadrature: Quadrature::default(),
            wishart_samples: 10_000,
            wishart_seed: cfg.seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EhBoundReport {
    pub lambda_max_mean: f64,
    pub frob_mean: f64,
    pub channel_norm_mean: f64,
    pub g_mu: f64,
    pub f_mu: f64,
    pub sincos: f64,
    /// Normalised per-beam lower bound on `E[‖G w‖²]`.
    pub joint_lower_normalized: f64,
    /// `ρ ·` the normalised bound.
    pub joint_lower: f64,
    pub joint_total: f64,
    pub zf_normalized: f64,
    pub zf_expected: f64,
    pub zf_total: f64,
    pub delta_eh: f64,
}

pub fn eh_bounds(inputs: &AnalysisInputs) -> Result<EhBoundReport> {
    let lambda = wishart_top_eig_mean(inputs.m, inputs.k_eh, inputs.wishart_samples, inputs.wishart_seed);
    eh_bounds_with(inputs, lambda)
}

/// Bound report for a known `E[λ_max]`.
pub fn eh_bounds_with(inputs: &AnalysisInputs, lambda_max_mean: f64) -> Result<EhBoundReport> {
    let m = inputs.m;
    let mf = m as f64;
    let s = inputs.selected as f64;
    let rho = inputs.rho;
    let frob = mf * inputs.k_eh as f64;
    let eh2 = expected_channel_norm(m, inputs.epsilon, inputs.k_id, &inputs.quadrature)?;
    let g = g_mu(inputs.mu, rho, eh2, inputs.selected, m);
    let f = f_mu(g, m);
    let spread = mf * lambda_max_mean - frob;
    let joint_norm = lambda_max_mean - spread * f;
    let zf_norm = lambda_max_mean - spread / mf;
    let b = ln_beta(1.5, mf - 0.5).exp();
    let gain = (mf - 2.0) * (1.0 - g) / (mf * (mf - 1.0)) + 2.0 * b * (g * (1.0 - g)).max(0.0).sqrt();
    Ok(EhBoundReport {
        lambda_max_mean,
        frob_mean: frob,
        channel_norm_mean: eh2,
        g_mu: g,
        f_mu: f,
        sincos: sincos_expectation(m),
        joint_lower_normalized: joint_norm,
        joint_lower: rho * joint_norm,
        joint_total: rho * s * joint_norm,
        zf_normalized: zf_norm,
        zf_expected: rho * zf_norm,
        zf_total: rho * s * zf_norm,
        delta_eh: rho * s * spread * gain,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct AsymptoticRates {
    /// `M ln(1 + μρ ln K_ID)`.
    pub sum_rate: f64,
    /// `ln(1 + ρ ln K) − ln(1 + μρ ln K)` per stream.
    pub per_stream_loss: f64,
    pub total_loss: f64,
}

pub fn asymptotic_rates(k_id: usize, mu: f64, rho: f64, m: usize) -> AsymptoticRates {
    assert!(k_id >= 2);
    let lk = (k_id as f64).ln();
    let per_stream_loss = (rho * lk).ln_1p() - (mu * rho * lk).ln_1p();
    AsymptoticRates {
        sum_rate: m as f64 * (mu * rho * lk).ln_1p(),
        per_stream_loss,
        total_loss: m as f64 * per_stream_loss,
    }
}

/// Expected `|vᴴ v̂|²` between an axis and its `B`-bit RVQ version,
/// `1 − 2^B B(2^B, M/(M−1))`.
pub fn quantization_fidelity(bits: u32, m: usize) -> f64 {
    assert!(m >= 2);
    let n = 2f64.powi(bits as i32);
    let a = m as f64 / (m as f64 - 1.0);
    1.0 - (n.ln() + ln_beta(n, a)).exp()
}

#[derive(Debug, Clone, Copy)]
pub struct LimitedFeedbackReport {
    pub delta_d: f64,
    pub lambda_hat_mean: f64,
    pub fb_lower: f64,
    pub delta_q: f64,
}

pub fn limited_feedback_analysis(b_eh: u32, m: usize, k_eh: usize, rho: f64, g_mu: f64, lambda_max_mean: f64) -> LimitedFeedbackReport {
    let mf = m as f64;
    let frob = mf * k_eh as f64;
    let delta_d = quantization_fidelity(b_eh, m);
    let lambda_hat = lambda_max_mean * delta_d + (frob - lambda_max_mean) / (mf - 1.0) * (1.0 - delta_d);
    let f = f_mu(g_mu, m);
    let fb_lower = rho * lambda_hat - rho * (mf * lambda_hat - frob) * f;
    let delta_q = (lambda_max_mean - lambda_hat) * rho * (1.0 - mf * f);
    LimitedFeedbackReport {
        delta_d,
        lambda_hat_mean: lambda_hat,
        fb_lower,
        delta_q,
    }
}

/// Mean and variance of `‖G w‖² / K_EH` over fresh `G` for one fixed unit
/// `w`.
pub fn asymptotic_eh_check(k_eh: usize, m: usize, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: CVec = crate::channel::isotropic_unit(&mut rng, m);
    let values: Vec<f64> = (0..samples)
        .map(|_| (rayleigh_matrix(&mut rng, k_eh, m) * &w).norm_squared() / k_eh as f64)
        .collect();
    let mean = values.iter().sum::<f64>() / samples as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples as f64 - 1.0);
    (mean, var)
}
