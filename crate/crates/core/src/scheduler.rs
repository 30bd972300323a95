//! Semi-orthogonal user selection and zero-forcing beamformers.

use crate::error::{Error, Result};
use crate::numerics::{normalized, pseudo_inverse, row, row_dot, singular_values, CMat, CVec, TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct UserSelection {
    /// Selected ID users in selection order.
    pub indices: Vec<usize>,
    pub epsilon: f64,
    /// `|U_i|` for every selection step, starting with `|U_1| = K_ID`.
    pub candidate_sizes: Vec<usize>,
}

impl UserSelection {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Rows of `h` for the selected users, in selection order.
    pub fn rows(&self, h: &CMat) -> CMat {
        h.select_rows(self.indices.iter())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZfBeamformers {
    /// Unit-norm beams, one column per selected user.
    pub w: CMat,
    pub sinr: Vec<f64>,
}

/// `ρ ‖(I − P) h‖²`, where `P` projects onto the row span described by
/// `span` (orthonormal rows, possibly empty).
pub fn sinr_candidate_proxy(h: &CVec, span: &[CVec], rho: f64) -> f64 {
    let mut resid = h.clone();
    for q in span {
        let coef = row_dot(&resid, &q.conjugate());
        resid -= q * coef;
    }
    rho * resid.norm_squared()
}

/// Greedy semi-orthogonal selection over the rows of `h`.
pub fn sus_select(h: &CMat, epsilon: f64, m: usize) -> UserSelection {
    let k_id = h.nrows();
    let directions: Vec<CVec> = (0..k_id)
        .map(|k| normalized(&row(h, k)).unwrap_or_else(|| row(h, k)))
        .collect();

    let mut indices = Vec::new();
    let mut sizes = Vec::new();
    if k_id == 0 {
        return UserSelection {
            indices,
            epsilon,
            candidate_sizes: sizes,
        };
    }

    let mut first = 0;
    let mut best = -1.0;
    for k in 0..k_id {
        let n = h.row(k).norm_squared();
        if n > best {
            first = k;
            best = n;
        }
    }
    sizes.push(k_id);
    indices.push(first);

    // Orthonormal basis of the selected rows, used by the ZF-SINR proxy.
    let mut span: Vec<CVec> = Vec::new();
    let push_span = |span: &mut Vec<CVec>, r: CVec| {
        let mut v = r;
        for q in span.iter() {
            let coef = row_dot(&v, &q.conjugate());
            v -= q * coef;
        }
        if let Some(u) = normalized(&v) {
            span.push(u);
        }
    };
    push_span(&mut span, row(h, first));

    let mut candidates: Vec<usize> = (0..k_id).filter(|&k| k != first).collect();
    while indices.len() < m {
        let last = &directions[*indices.last().unwrap()];
        candidates.retain(|&k| row_dot(&directions[k], &last.conjugate()).norm() <= epsilon);
        sizes.push(candidates.len());
        if candidates.is_empty() {
            break;
        }
        let mut pick = candidates[0];
        let mut best = -1.0;
        for &k in &candidates {
            let v = sinr_candidate_proxy(&row(h, k), &span, 1.0);
            if v > best {
                pick = k;
                best = v;
            }
        }
        indices.push(pick);
        candidates.retain(|&k| k != pick);
        push_span(&mut span, row(h, pick));
    }

    UserSelection {
        indices,
        epsilon,
        candidate_sizes: sizes,
    }
}

/// Normalised pseudo-inverse columns of the selected channels and the
/// resulting interference-free SINRs.
pub fn zf_beamformers(h_s: &CMat, rho: f64) -> Result<ZfBeamformers> {
    let sv = singular_values(h_s);
    let ratio = sv.last().copied().unwrap_or(0.0) / sv[0].max(f64::MIN_POSITIVE);
    if sv[0] == 0.0 || ratio <= TOL.rank || sv.len() < h_s.nrows() {
        return Err(Error::RankDeficient { ratio });
    }
    let pinv = pseudo_inverse(h_s)?;
    let s = h_s.nrows();
    let mut w = CMat::zeros(h_s.ncols(), s);
    let mut sinr = Vec::with_capacity(s);
    for k in 0..s {
        let col = normalized(&pinv.column(k).into_owned()).ok_or(Error::ZeroMatrix)?;
        sinr.push(rho * row_dot(&row(h_s, k), &col).norm_sqr());
        w.set_column(k, &col);
    }
    Ok(ZfBeamformers { w, sinr })
}
