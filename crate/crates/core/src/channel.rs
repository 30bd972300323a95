//! Rayleigh channel generation, link budget and random vector quantization
//! of channel directions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{inner, normalized, row, CMat, CVec, TOL};
use num_complex::Complex64;

/// Largest accepted feedback size; codebooks hold `2^bits` codewords.
pub const MAX_FEEDBACK_BITS: u32 = 20;

/// Scenario scalars shared by the simulator and the analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Transmit antennas.
    pub m: usize,
    pub k_id: usize,
    pub k_eh: usize,
    /// Total transmit power in watts.
    pub power_w: f64,
    /// Receiver noise power in watts.
    pub noise_power_w: f64,
    pub path_loss_db: f64,
    /// Energy-conversion efficiency.
    pub zeta: f64,
    /// Semi-orthogonality threshold for user selection.
    pub epsilon: f64,
    /// Target SINR ratio.
    pub mu: f64,
    /// Unit steering step in radians.
    pub delta_d: f64,
    pub b_id: u32,
    pub b_eh: u32,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            m: 4,
            k_id: 50,
            k_eh: 10,
            power_w: 1.0,
            noise_power_w: dbm_to_watts(-50.0),
            path_loss_db: 70.0,
            zeta: 1.0,
            epsilon: 0.3,
            mu: 0.7,
            delta_d: 1f64.to_radians(),
            b_id: 0,
            b_eh: 0,
            seed: 0,
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::config("m", "need at least 2 antennas"));
        }
        if self.k_id < 1 {
            return Err(Error::config("k_id", "need at least one ID user"));
        }
        if self.k_eh < 1 {
            return Err(Error::config("k_eh", "need at least one EH user"));
        }
        if !(self.power_w > 0.0 && self.power_w.is_finite()) {
            return Err(Error::config("power_w", "must be positive"));
        }
        if !(self.noise_power_w > 0.0 && self.noise_power_w.is_finite()) {
            return Err(Error::config("noise_power_w", "must be positive"));
        }
        if !self.path_loss_db.is_finite() {
            return Err(Error::config("path_loss_db", "must be finite"));
        }
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(Error::config("zeta", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::config("epsilon", "must lie in [0, 1)"));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::config("mu", "must lie in (0, 1]"));
        }
        if !(self.delta_d > 0.0 && self.delta_d.is_finite()) {
            return Err(Error::config("delta_d", "must be positive"));
        }
        if self.b_id > MAX_FEEDBACK_BITS {
            return Err(Error::config("b_id", format!("at most {MAX_FEEDBACK_BITS} bits")));
        }
        if self.b_eh > MAX_FEEDBACK_BITS {
            return Err(Error::config("b_eh", format!("at most {MAX_FEEDBACK_BITS} bits")));
        }
        Ok(())
    }

    /// Total transmit SNR after path loss with unit-variance noise.
    pub fn effective_snr(&self) -> f64 {
        self.power_w * 10f64.powf(-self.path_loss_db / 10.0) / self.noise_power_w
    }

    pub fn perfect_csit(&self) -> bool {
        self.b_id == 0 && self.b_eh == 0
    }
}

/// Channels of one drop, in units where the receiver noise is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// ID users, `k_id × m`.
    pub h: CMat,
    /// EH users, `k_eh × m`.
    pub g: CMat,
    pub effective_snr: f64,
}

/// Quantized channel directions plus exact channel magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedChannelSet {
    pub h_hat: CMat,
    pub g_hat: CMat,
    pub h_mag: Vec<f64>,
    pub g_mag: Vec<f64>,
}

impl QuantizedChannelSet {
    /// ID channels as known at the transmitter: `‖h_k‖ ĥ_k`.
    pub fn h_estimate(&self) -> CMat {
        scale_rows(&self.h_hat, &self.h_mag)
    }

    /// EH channels as known at the transmitter.
    pub fn g_estimate(&self) -> CMat {
        scale_rows(&self.g_hat, &self.g_mag)
    }
}

fn scale_rows(m: &CMat, mags: &[f64]) -> CMat {
    let mut out = m.clone();
    for (k, &s) in mags.iter().enumerate() {
        out.row_mut(k).scale_mut(s);
    }
    out
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a base seed and a path of
/// stream indices, e.g. `(seed, [point, trial])`.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p.wrapping_add(0x632b_e59b_d9b4_e019))))
}

const STREAM_ID: u64 = 0;
const STREAM_EH: u64 = 1;

/// Circularly symmetric complex Gaussian with unit variance.
pub fn cscg<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// `rows × cols` matrix of i.i.d. unit-variance CSCG entries.
pub fn rayleigh_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    // Row-major fill keeps row k independent of the row count.
    let mut out = CMat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            out[(i, j)] = cscg(rng);
        }
    }
    out
}

/// Uniformly distributed unit vector in `C^m`.
pub fn isotropic_unit<R: Rng + ?Sized>(rng: &mut R, m: usize) -> CVec {
    loop {
        let v = CVec::from_fn(m, |_, _| cscg(rng));
        if let Some(u) = normalized(&v) {
            return u;
        }
    }
}

pub fn generate_channels(cfg: &SimConfig, trial_seed: u64) -> Result<ChannelSet> {
    cfg.validate()?;
    let mut rng_h = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[trial_seed, STREAM_ID]));
    let mut rng_g = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[trial_seed, STREAM_EH]));
    Ok(ChannelSet {
        h: rayleigh_matrix(&mut rng_h, cfg.k_id, cfg.m),
        g: rayleigh_matrix(&mut rng_g, cfg.k_eh, cfg.m),
        effective_snr: cfg.effective_snr(),
    })
}

/// `2^bits` i.i.d. isotropic unit codewords stored as rows.
#[derive(Debug, Clone)]
pub struct RvqCodebook {
    codewords: Vec<CVec>,
}

impl RvqCodebook {
    pub fn new(m: usize, bits: u32, seed: u64) -> Result<Self> {
        if bits == 0 || bits > MAX_FEEDBACK_BITS {
            return Err(Error::config("bits", format!("codebook needs 1..={MAX_FEEDBACK_BITS} bits")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let codewords = (0..1usize << bits).map(|_| isotropic_unit(&mut rng, m)).collect();
        Ok(RvqCodebook { codewords })
    }

    /// Codebook with explicit codewords (normalised on entry).
    pub fn from_codewords(codewords: Vec<CVec>) -> Self {
        RvqCodebook {
            codewords: codewords.iter().filter_map(normalized).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// Codeword maximizing `|h̄ cᴴ|`; ties go to the lowest index.
    pub fn quantize(&self, direction: &CVec) -> &CVec {
        let mut best = 0;
        let mut best_fit = -1.0;
        for (i, c) in self.codewords.iter().enumerate() {
            let fit = inner(c, direction).norm_sqr();
            if fit > best_fit {
                best = i;
                best_fit = fit;
            }
        }
        &self.codewords[best]
    }
}

/// Quantized direction of row channel `h`; zero bits returns `h/‖h‖`.
pub fn rvq_quantize(h: &CVec, bits: u32, codebook_seed: u64) -> Result<CVec> {
    let direction = normalized(h).ok_or(Error::ZeroMatrix)?;
    if bits == 0 {
        return Ok(direction);
    }
    let book = RvqCodebook::new(h.len(), bits, codebook_seed)?;
    Ok(book.quantize(&direction).clone())
}

fn quantize_rows(m: &CMat, bits: u32, seed: u64, stream: u64) -> Result<(CMat, Vec<f64>)> {
    let mut hat = CMat::zeros(m.nrows(), m.ncols());
    let mut mags = Vec::with_capacity(m.nrows());
    for k in 0..m.nrows() {
        let r = row(m, k);
        mags.push(r.norm());
        let q = rvq_quantize(&r, bits, derive_seed(seed, &[stream, k as u64]))?;
        debug_assert!((q.norm() - 1.0).abs() < TOL.unit_norm);
        hat.set_row(k, &q.transpose());
    }
    Ok((hat, mags))
}

/// Quantizes every user's direction with its own codebook.
pub fn quantize_all(cs: &ChannelSet, cfg: &SimConfig, codebook_seed: u64) -> Result<QuantizedChannelSet> {
    let (h_hat, h_mag) = quantize_rows(&cs.h, cfg.b_id, codebook_seed, STREAM_ID)?;
    let (g_hat, g_mag) = quantize_rows(&cs.g, cfg.b_eh, codebook_seed, STREAM_EH)?;
    Ok(QuantizedChannelSet {
        h_hat,
        g_hat,
        h_mag,
        g_mag,
    })
}
