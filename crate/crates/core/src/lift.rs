//! Lifting of complex inner products onto split real decision variables.
//!
//! A complex precoding vector w of length n is stored as 2n reals: the real
//! parts at `re_base..re_base+n` and the imaginary parts at
//! `im_base..im_base+n`. For a complex row vector h acting by plain
//! transpose (h^T w, no conjugation),
//!
//!   Re(h^T w) = sum_i Re(h_i) re_i - Im(h_i) im_i
//!   Im(h^T w) = sum_i Re(h_i) im_i + Im(h_i) re_i

use num_complex::Complex64;

use crate::conic::LinExpr;

/// Appends `scale * Re(h^T w)` to `expr`. Zero coefficients are skipped so
/// rows stay sparse.
pub(crate) fn add_re_inner(
    expr: &mut LinExpr,
    scale: f64,
    h: &[Complex64],
    re_base: usize,
    im_base: usize,
) {
    for (i, c) in h.iter().enumerate() {
        push(expr, re_base + i, scale * c.re);
        push(expr, im_base + i, -scale * c.im);
    }
}

/// Appends `scale * Im(h^T w)` to `expr`.
pub(crate) fn add_im_inner(
    expr: &mut LinExpr,
    scale: f64,
    h: &[Complex64],
    re_base: usize,
    im_base: usize,
) {
    for (i, c) in h.iter().enumerate() {
        push(expr, re_base + i, scale * c.im);
        push(expr, im_base + i, scale * c.re);
    }
}

fn push(expr: &mut LinExpr, var: usize, coeff: f64) {
    if coeff != 0.0 {
        expr.add_term(var, coeff);
    }
}

/// Reassembles the complex vector from a split-real solution slice.
pub(crate) fn complex_from_split(x: &[f64], re_base: usize, im_base: usize, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|i| Complex64::new(x[re_base + i], x[im_base + i]))
        .collect()
}
