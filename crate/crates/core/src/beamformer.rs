//! Joint information and energy beamforming.
//!
//! Beams start from zero-forcing and are steered one at a time along the
//! geodesic toward the current energy-optimal direction. The beam with the
//! largest EH gradient (energy gained per radian) moves first, in steps of
//! `delta_d`, until a further step would push some ID user to or below its
//! SINR target. Users that hit their target are recorded as boundary users;
//! once every gradient is spent the energy direction is recomputed inside the
//! null space of the boundary users and the steering pass repeats.

use crate::error::{Error, Result};
use crate::metrics::sinr_all;
use crate::numerics::{angle, energy, gram, hermitian_eig, inner, normalized, row, row_dot, row_null_space, stack_rows, CMat, CVec, TOL};
use crate::scheduler::{zf_beamformers, ZfBeamformers};

/// How the energy direction is refreshed after a steering pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Top eigenvector of the EH Gram matrix projected onto the boundary
    /// users' null space.
    Full,
    /// Single projection of the previous direction off each new boundary
    /// user's channel direction.
    Reduced,
}

#[derive(Debug, Clone, Copy)]
pub struct JointParams {
    /// Per-beam transmit SNR.
    pub rho: f64,
    pub mu: f64,
    pub delta_d: f64,
    pub variant: Variant,
}

#[derive(Debug, Clone)]
pub struct JointBeamformers {
    /// Unit-norm beams, one column per selected user (plus a trailing
    /// dedicated beam when added).
    pub w: CMat,
    pub rho: f64,
    pub w_zf: CMat,
    pub sinr_zf: Vec<f64>,
    /// Per-user SINR targets `μ · SINR_zf`.
    pub gamma: Vec<f64>,
    pub sinr: Vec<f64>,
    /// Steering passes executed.
    pub iterations_used: usize,
    /// Angle each beam moved in each pass.
    pub steering_log: Vec<Vec<f64>>,
    /// Boundary users in the order they were recorded.
    pub boundary: Vec<usize>,
    /// Normalised energy `Σ_i ‖G w_i‖²` after initialisation and after every
    /// accepted steering step.
    pub eh_trace: Vec<f64>,
}

impl JointBeamformers {
    pub fn beams(&self) -> usize {
        self.w.ncols()
    }

    pub fn beam(&self, i: usize) -> CVec {
        self.w.column(i).into_owned()
    }
}

/// Eigenvector of the largest eigenvalue of `GᴴG`.
pub fn eh_direction(g: &CMat) -> Result<CVec> {
    if g.norm() == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(hermitian_eig(&gram(g))?.top_axis())
}

/// Normalised harvested energy `wᴴGᴴGw`.
pub fn g_eh(g: &CMat, w: &CVec) -> f64 {
    energy(g, w)
}

/// Energy gained per radian when steering `w` all the way to `w_eh`,
/// clamped at zero.
pub fn eh_gradient(g: &CMat, w_eh: &CVec, w: &CVec) -> f64 {
    let fit = inner(w_eh, w).norm();
    if fit >= 1.0 - TOL.parallel {
        return 0.0;
    }
    let grad = (g_eh(g, w_eh) - g_eh(g, w)) / fit.acos();
    grad.max(0.0)
}

/// Moves unit `base` by `theta` radians along the geodesic toward `target`.
///
/// `theta` is clamped to `[0, arccos |targetᴴ base|]`; at the upper end the
/// result equals `target` up to a unit phase.
pub fn steer(base: &CVec, target: &CVec, theta: f64) -> CVec {
    let c = inner(base, target);
    let fit = c.norm();
    if fit >= 1.0 - TOL.parallel {
        return base.clone();
    }
    let cap = fit.min(1.0).acos();
    let theta = theta.clamp(0.0, cap);
    // Rotate the target so that baseᴴ target is real and nonnegative.
    let aligned = if fit > 0.0 { target * (c.conj() / fit) } else { target.clone() };
    let perp = normalized(&(aligned - base.scale(fit))).expect("non-parallel directions");
    base.scale(theta.cos()) + perp.scale(theta.sin())
}

/// Energy direction restricted to the null space of the given boundary
/// directions (rows).
pub fn update_eh_direction(g: &CMat, boundary: &[CVec]) -> Result<CVec> {
    let m = g.ncols();
    if boundary.is_empty() {
        return eh_direction(g);
    }
    if boundary.len() >= m {
        return Err(Error::NullSpaceExhausted {
            boundary: boundary.len(),
            antennas: m,
        });
    }
    let n = row_null_space(&stack_rows(boundary, m))?.basis;
    let g_n = g * &n * n.adjoint();
    eh_direction(&g_n)
}

/// `w − (h̄ w) h̄ᴴ`, normalised.
pub fn update_eh_direction_reduced(w_prev: &CVec, h_bar: &CVec) -> Result<CVec> {
    let h = normalized(h_bar).ok_or(Error::ZeroMatrix)?;
    let proj = row_dot(&h, w_prev);
    let v = w_prev - h.conjugate() * proj;
    if v.norm() <= 1e-12 * w_prev.norm().max(1.0) {
        return Err(Error::DegenerateProjection);
    }
    Ok(normalized(&v).expect("nonzero after check"))
}

fn total_energy(g: &CMat, w: &CMat) -> f64 {
    (g * w).norm_squared()
}

pub fn joint_beamform(h_s: &CMat, g: &CMat, params: &JointParams) -> Result<JointBeamformers> {
    let zf = zf_beamformers(h_s, params.rho)?;
    joint_from_zf(h_s, g, &zf, params)
}

/// Runs the steering algorithm from precomputed zero-forcing beams.
pub fn joint_from_zf(h_s: &CMat, g: &CMat, zf: &ZfBeamformers, params: &JointParams) -> Result<JointBeamformers> {
    if !(params.mu > 0.0 && params.mu <= 1.0) {
        return Err(Error::InvalidMu(params.mu));
    }
    let s = h_s.nrows();
    let m = h_s.ncols();
    let rho = params.rho;
    let gamma: Vec<f64> = zf.sinr.iter().map(|&x| params.mu * x).collect();
    let directions: Vec<CVec> = (0..s)
        .map(|k| normalized(&row(h_s, k)).ok_or(Error::ZeroMatrix))
        .collect::<Result<_>>()?;

    let mut w = zf.w.clone();
    let mut w_eh = eh_direction(g)?;
    let mut boundary: Vec<usize> = Vec::new();
    // Orthonormalised boundary directions for the reduced update.
    let mut reduced_span: Vec<CVec> = Vec::new();
    let mut steering_log = vec![Vec::new(); s];
    let mut eh_trace = vec![total_energy(g, &w)];
    let mut remaining = s;
    let mut passes = 0;

    loop {
        passes += 1;
        let before = boundary.len();
        let mut grads: Vec<f64> = (0..s).map(|i| eh_gradient(g, &w_eh, &w.column(i).into_owned())).collect();
        let mut moved = vec![0.0; s];

        while let Some(b) = best_beam(&grads) {
            moved[b] = steer_beam(h_s, g, &mut w, b, &w_eh, &gamma, params, &mut boundary, &mut eh_trace);
            grads[b] = 0.0;
        }
        for (log, theta) in steering_log.iter_mut().zip(moved) {
            log.push(theta);
        }

        if remaining == 0 {
            break;
        }
        remaining -= 1;
        // No new boundary user: the refreshed direction would repeat this pass.
        if boundary.len() == before || boundary.len() >= m {
            break;
        }
        w_eh = match params.variant {
            Variant::Full => {
                let rows: Vec<CVec> = boundary.iter().map(|&k| directions[k].clone()).collect();
                match update_eh_direction(g, &rows) {
                    Ok(v) => v,
                    Err(Error::ZeroMatrix) => break,
                    Err(e) => return Err(e),
                }
            }
            Variant::Reduced => {
                let mut next = w_eh.clone();
                let mut degenerate = false;
                for &k in &boundary[before..] {
                    let mut u = directions[k].clone();
                    for q in &reduced_span {
                        let coef = row_dot(&u, &q.conjugate());
                        u -= q * coef;
                    }
                    let Some(u) = normalized(&u) else { continue };
                    reduced_span.push(u.clone());
                    match update_eh_direction_reduced(&next, &u) {
                        Ok(v) => next = v,
                        Err(Error::DegenerateProjection) => {
                            degenerate = true;
                            break;
                        }
                        Err(e) => return Err(e),
                    }
                }
                if degenerate {
                    break;
                }
                next
            }
        };
    }

    let sinr = sinr_all(h_s, &w, rho);
    Ok(JointBeamformers {
        w,
        rho,
        w_zf: zf.w.clone(),
        sinr_zf: zf.sinr.clone(),
        gamma,
        sinr,
        iterations_used: passes,
        steering_log,
        boundary,
        eh_trace,
    })
}

/// Index of the largest positive gradient, lowest index on ties.
fn best_beam(grads: &[f64]) -> Option<usize> {
    let mut best = None;
    let mut best_val = 0.0;
    for (i, &g) in grads.iter().enumerate() {
        if g > best_val {
            best = Some(i);
            best_val = g;
        }
    }
    best
}

/// Steers beam `b` toward `w_eh` in `delta_d` steps; returns the accepted
/// angle.
#[allow(clippy::too_many_arguments)]
fn steer_beam(
    h_s: &CMat,
    g: &CMat,
    w: &mut CMat,
    b: usize,
    w_eh: &CVec,
    gamma: &[f64],
    params: &JointParams,
    boundary: &mut Vec<usize>,
    eh_trace: &mut Vec<f64>,
) -> f64 {
    let satisfied = |sinr: &[f64]| sinr.iter().zip(gamma).all(|(s, t)| s > t);
    if !satisfied(&sinr_all(h_s, w, params.rho)) {
        return 0.0;
    }
    let base = w.column(b).into_owned();
    let cap = angle(w_eh, &base);
    let mut theta = 0.0;
    let mut current = g_eh(g, &base);
    let mut trial = w.clone();
    while theta < cap {
        let next = (theta + params.delta_d).min(cap);
        let candidate = steer(&base, w_eh, next);
        trial.set_column(b, &candidate);
        let sinr = sinr_all(h_s, &trial, params.rho);
        if !satisfied(&sinr) {
            for (k, (s, t)) in sinr.iter().zip(gamma).enumerate() {
                if s <= t && !boundary.contains(&k) {
                    boundary.push(k);
                }
            }
            break;
        }
        let energy = g_eh(g, &candidate);
        if energy < current {
            break;
        }
        current = energy;
        theta = next;
        w.set_column(b, &candidate);
        eh_trace.push(total_energy(g, w));
    }
    theta
}

/// Appends the best energy beam inside the null space of all selected ID
/// users and splits the power equally over `|S| + 1` beams.
pub fn add_dedicated_eh_beam(jb: &JointBeamformers, h_s: &CMat, g: &CMat) -> Result<JointBeamformers> {
    let s = h_s.nrows();
    let m = h_s.ncols();
    if s >= m {
        return Err(Error::NoSpareDimension { users: s, antennas: m });
    }
    let n = row_null_space(h_s)?.basis;
    let dedicated = eh_direction(&(g * &n * n.adjoint()))?;
    let mut w = CMat::zeros(m, jb.w.ncols() + 1);
    w.columns_mut(0, jb.w.ncols()).copy_from(&jb.w);
    w.set_column(jb.w.ncols(), &dedicated);
    let rho = jb.rho * s as f64 / (s + 1) as f64;
    let sinr = sinr_all(h_s, &w, rho);
    let mut out = jb.clone();
    out.w = w;
    out.rho = rho;
    out.sinr = sinr;
    Ok(out)
}
