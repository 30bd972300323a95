use crate::channel::rayleigh_matrix;
use crate::numerics::CMat;
use rand::Rng;

pub fn random_cmat<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    rayleigh_matrix(rng, rows, cols)
}

pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> CMat {
    let a = rayleigh_matrix(rng, n, n);
    (&a + a.adjoint()).scale(0.5)
}
