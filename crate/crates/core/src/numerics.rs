//! Complex linear-algebra kernels shared by every other module.
//!
//! Matrices are dense `nalgebra` matrices over `Complex64`. Channel rows are
//! passed around as column vectors holding the row entries (no conjugation),
//! so the scalar `h w` is [`row_dot`] and the Hermitian inner product `aᴴb` is
//! [`inner`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Every numeric tolerance used by the crate.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Relative Frobenius asymmetry accepted by [`hermitian_eig`].
    pub hermitian: f64,
    /// Singular values below `rank * sigma_max` count as zero.
    pub rank: f64,
    /// `|aᴴb| >= 1 - parallel` means the unit vectors coincide up to phase.
    pub parallel: f64,
    /// Unit-norm checks on beams and codewords.
    pub unit_norm: f64,
}

pub const TOL: Tolerances = Tolerances {
    hermitian: 1e-10,
    rank: 1e-10,
    parallel: 1e-12,
    unit_norm: 1e-12,
};

/// Eigen-structure of `GᴴG`: the axes and squared radii of the energy
/// ellipsoid.
#[derive(Debug, Clone)]
pub struct EllipsoidDecomposition {
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors, column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: CMat,
}

impl EllipsoidDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty decomposition")
    }

    /// Eigenvector of the largest eigenvalue.
    pub fn top_axis(&self) -> CVec {
        self.axis(self.dim() - 1)
    }

    pub fn axis(&self, i: usize) -> CVec {
        self.eigenvectors.column(i).into_owned()
    }

    /// Number of eigenvalues above the relative rank tolerance.
    pub fn rank(&self) -> usize {
        let cutoff = TOL.rank * self.lambda_max().max(0.0);
        self.eigenvalues.iter().filter(|&&l| l > cutoff).count()
    }

    pub fn reconstruct(&self) -> CMat {
        let v = &self.eigenvectors;
        let lambda = CMat::from_diagonal(&DVector::from_iterator(
            self.dim(),
            self.eigenvalues.iter().map(|&l| Complex64::new(l, 0.0)),
        ));
        v * lambda * v.adjoint()
    }
}

/// Null-space basis with a flag telling whether the input had lower rank
/// than its row count.
#[derive(Debug, Clone)]
pub struct NullSpace {
    pub basis: CMat,
    pub rank_deficient: bool,
}

fn check_finite(a: &CMat) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Rotates `v` so that its first largest-magnitude entry is real and
/// nonnegative.
pub fn fix_phase(v: &mut CVec) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        let mag = z.norm();
        if mag > best_mag * (1.0 + 1e-12) {
            best = i;
            best_mag = mag;
        }
    }
    if best_mag > 0.0 {
        let phase = v[best] / best_mag;
        let rot = phase.conj();
        v.iter_mut().for_each(|z| *z *= rot);
        v[best] = Complex64::new(v[best].re.abs(), 0.0);
    }
}

/// Hermitian eigendecomposition with ascending eigenvalues and the
/// deterministic phase convention of [`fix_phase`].
pub fn hermitian_eig(a: &CMat) -> Result<EllipsoidDecomposition> {
    check_finite(a)?;
    assert!(a.is_square(), "hermitian_eig needs a square matrix");
    let scale = a.norm();
    let asym = (a - a.adjoint()).norm();
    if scale > 0.0 && asym > TOL.hermitian * scale {
        return Err(Error::NotHermitian {
            asymmetry: asym / scale,
        });
    }
    let n = a.nrows();
    let sym = (a + a.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let mut vectors = CMat::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(src).into_owned();
        let norm = v.norm();
        v.unscale_mut(norm);
        fix_phase(&mut v);
        vectors.set_column(dst, &v);
        values.push(eig.eigenvalues[src]);
    }
    Ok(EllipsoidDecomposition {
        eigenvalues: values,
        eigenvectors: vectors,
    })
}

/// Descending singular values.
pub fn singular_values(h: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = h.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Orthonormal basis `N` (M×(M−rank)) with `H N = 0`.
pub fn row_null_space(h: &CMat) -> Result<NullSpace> {
    check_finite(h)?;
    let (r, m) = h.shape();
    if r >= m {
        return Err(Error::NoNullSpace { rows: r, cols: m });
    }
    // Pad to square so the SVD returns a full set of right singular vectors.
    let mut padded = CMat::zeros(m, m);
    padded.view_mut((0, 0), (r, m)).copy_from(h);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma_max = svd.singular_values.max();
    let cutoff = TOL.rank * sigma_max;

    let null_rows: Vec<usize> = (0..m)
        .filter(|&j| sigma_max == 0.0 || svd.singular_values[j] <= cutoff)
        .collect();
    let rank = m - null_rows.len();
    let mut basis = CMat::zeros(m, null_rows.len());
    for (dst, &j) in null_rows.iter().enumerate() {
        let v = v_t.row(j).adjoint();
        basis.set_column(dst, &v);
    }
    Ok(NullSpace {
        basis,
        rank_deficient: rank < r,
    })
}

/// Moore–Penrose pseudo-inverse through the thin SVD.
pub fn pseudo_inverse(h: &CMat) -> Result<CMat> {
    check_finite(h)?;
    let svd = h.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    if sigma_max == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let cutoff = TOL.rank * sigma_max;
    let k = svd.singular_values.len();
    let mut sigma_inv = CMat::zeros(k, k);
    for i in 0..k {
        let s = svd.singular_values[i];
        if s > cutoff {
            sigma_inv[(i, i)] = Complex64::new(1.0 / s, 0.0);
        }
    }
    Ok(v_t.adjoint() * sigma_inv * u.adjoint())
}

/// Row `k` of `h` as a vector of its entries.
pub fn row(h: &CMat, k: usize) -> CVec {
    h.row(k).transpose()
}

/// `h w` for a row channel `h` and a column beam `w`.
pub fn row_dot(h: &CVec, w: &CVec) -> Complex64 {
    h.iter().zip(w.iter()).map(|(a, b)| a * b).sum()
}

/// Hermitian inner product `aᴴ b`.
pub fn inner(a: &CVec, b: &CVec) -> Complex64 {
    a.dotc(b)
}

pub fn normalized(v: &CVec) -> Option<CVec> {
    let n = v.norm();
    (n > 0.0 && n.is_finite()).then(|| v.unscale(n))
}

/// `GᴴG`.
pub fn gram(g: &CMat) -> CMat {
    g.adjoint() * g
}

/// `‖A w‖²` evaluated as the real quadratic form `wᴴ Aᴴ A w`.
pub fn energy(a: &CMat, w: &CVec) -> f64 {
    (a * w).norm_squared()
}

/// Matrix with the given rows stacked.
pub fn stack_rows(rows: &[CVec], cols: usize) -> CMat {
    let mut out = CMat::zeros(rows.len(), cols);
    for (i, r) in rows.iter().enumerate() {
        out.set_row(i, &r.transpose());
    }
    out
}

/// Angle `arccos |aᴴb|` between two unit directions, clamped to `[0, π/2]`.
pub fn angle(a: &CVec, b: &CVec) -> f64 {
    inner(a, b).norm().min(1.0).acos()
}
