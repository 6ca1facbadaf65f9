//! Dense complex matrix helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

/// Builds a matrix from real row-major data.
pub fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> CMat {
    assert_eq!(data.len(), rows * cols);
    CMat::from_fn(rows, cols, |r, k| c(data[r * cols + k], 0.0))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn kron_all(ms: &[&CMat]) -> CMat {
    let mut out = identity(1);
    for m in ms {
        out = out.kronecker(*m);
    }
    out
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn trace(m: &CMat) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Largest absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Squared Hilbert–Schmidt norm Tr[X†X].
pub fn hs_norm_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5, 0.0)
}

pub fn hermiticity_gap(m: &CMat) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    max_abs_diff(m, &m.adjoint())
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Jordan product (AB + BA)/2.
pub fn jordan(a: &CMat, b: &CMat) -> CMat {
    (a * b + b * a) * c(0.5, 0.0)
}

/// Eigendecomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    (vals, vecs)
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = eigh(m);
    spectral(&vals.iter().map(|&l| c(f(l), 0.0)).collect::<Vec<_>>(), &vecs)
}

/// V diag(d) V†.
pub fn spectral(d: &[Complex64], vecs: &CMat) -> CMat {
    let mut scaled = vecs.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= d[k];
    }
    scaled * vecs.adjoint()
}

/// Square root of a positive semidefinite matrix; negative eigenvalues are clipped.
pub fn sqrt_psd(m: &CMat) -> CMat {
    hermitian_fn(m, |l| l.max(0.0).sqrt())
}

/// Moore–Penrose inverse square root; eigenvalues at or below `cut` map to 0.
pub fn inv_sqrt_psd(m: &CMat, cut: f64) -> CMat {
    hermitian_fn(m, |l| if l > cut { 1.0 / l.sqrt() } else { 0.0 })
}

/// e^{-i t H} for Hermitian H.
pub fn expm_i(h: &CMat, t: f64) -> CMat {
    let (vals, vecs) = eigh(h);
    let d: Vec<Complex64> = vals.iter().map(|&l| Complex64::from_polar(1.0, -l * t)).collect();
    spectral(&d, &vecs)
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &CMat) -> f64 {
    eigh(m).0.iter().map(|l| l.abs()).sum()
}

pub fn is_unitary(u: &CMat, tol: f64) -> bool {
    u.is_square() && max_abs_diff(&(u.adjoint() * u), &identity(u.ncols())) <= tol
}

/// Column j as an n×1 matrix.
pub fn col(m: &CMat, j: usize) -> CMat {
    m.columns(j, 1).into_owned()
}

/// Real column vector.
pub fn column(v: &[f64]) -> CMat {
    CMat::from_fn(v.len(), 1, |r, _| c(v[r], 0.0))
}

/// Column vector |i⟩ in dimension n.
pub fn ket(n: usize, i: usize) -> CMat {
    let mut v = zeros(n, 1);
    v[(i, 0)] = ONE;
    v
}

pub fn projector(v: &CMat) -> CMat {
    v * v.adjoint()
}

/// Q factor of a thin QR decomposition with the R diagonal made real positive.
pub fn qr_retract(m: &CMat) -> CMat {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..q.ncols().min(r.nrows()) {
        let d = r[(k, k)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            let mut col = q.column_mut(k);
            col *= phase;
        }
    }
    q
}

pub fn pauli_x() -> CMat {
    real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> CMat {
    real_matrix(2, 2, &[1.0, 0.0, 0.0, -1.0])
}

/// Tensor product of single-qubit Paulis from a string over {I,X,Y,Z}.
pub fn pauli_string(s: &str) -> Option<CMat> {
    let mut out = identity(1);
    for ch in s.chars() {
        let p = match ch.to_ascii_uppercase() {
            'I' => identity(2),
            'X' => pauli_x(),
            'Y' => pauli_y(),
            'Z' => pauli_z(),
            _ => return None,
        };
        out = out.kronecker(&p);
    }
    Some(out)
}

/// Hermitian matrix n·σ for a Bloch vector.
pub fn bloch_operator(v: [f64; 3]) -> CMat {
    pauli_x() * c(v[0], 0.0) + pauli_y() * c(v[1], 0.0) + pauli_z() * c(v[2], 0.0)
}
