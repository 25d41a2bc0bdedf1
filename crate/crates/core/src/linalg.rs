//! Dense complex-matrix kernel.
//!
//! Everything in the crate is expressed through [`ComplexMatrix`] (a
//! `nalgebra::DMatrix<Complex64>`). The vectorization convention is
//! row-stacking: `vec(|i><j|) = |i> ⊗ |j>`, so `vec(A)` lists the rows of
//! `A` one after another and `kron(A, B) · vec(C) = vec(A C Bᵀ)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;

pub const DEFAULT_EIG_TOL: f64 = 1e-9;
pub const DEFAULT_EQ_TOL: f64 = 1e-9;
pub const DEFAULT_SDP_TOL: f64 = 1e-7;

/// Numerical thresholds shared by every predicate in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Eigenvalues with magnitude at most this are treated as zero.
    pub eig_tol: f64,
    /// Matrix equality threshold in the max-abs-entry norm.
    pub eq_tol: f64,
    /// Width of the semidefinite-program decision band around zero.
    pub sdp_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eig_tol: DEFAULT_EIG_TOL,
            eq_tol: DEFAULT_EQ_TOL,
            sdp_tol: DEFAULT_SDP_TOL,
        }
    }
}

impl Tolerances {
    pub fn new(eig_tol: f64, eq_tol: f64, sdp_tol: f64) -> Result<Self> {
        for (name, v) in [("eig_tol", eig_tol), ("eq_tol", eq_tol), ("sdp_tol", sdp_tol)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidTolerance { name, value: v });
            }
        }
        Ok(Self {
            eig_tol,
            eq_tol,
            sdp_tol,
        })
    }
}

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(rows, cols)
}

/// Builds a matrix from real row-major data.
pub fn from_real_rows(rows: usize, cols: usize, data: &[f64]) -> ComplexMatrix {
    assert_eq!(data.len(), rows * cols);
    ComplexMatrix::from_fn(rows, cols, |i, j| r(data[i * cols + j]))
}

pub fn diag_real(values: &[f64]) -> ComplexMatrix {
    let n = values.len();
    ComplexMatrix::from_fn(n, n, |i, j| if i == j { r(values[i]) } else { C64::ZERO })
}

/// `|i><j|` in dimension `n`.
pub fn matrix_unit(n: usize, i: usize, j: usize) -> ComplexMatrix {
    let mut m = zeros(n, n);
    m[(i, j)] = C64::ONE;
    m
}

pub fn pauli_x() -> ComplexMatrix {
    from_real_rows(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[C64::ZERO, c(0.0, -1.0), c(0.0, 1.0), C64::ZERO])
}

pub fn pauli_z() -> ComplexMatrix {
    diag_real(&[1.0, -1.0])
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Row-stacking vectorization: `vec(A)[i * cols + j] = A[i, j]`.
pub fn vec(a: &ComplexMatrix) -> ComplexMatrix {
    let (rows, cols) = a.shape();
    ComplexMatrix::from_fn(rows * cols, 1, |k, _| a[(k / cols, k % cols)])
}

/// Inverse of [`vec`].
pub fn unvec(v: &ComplexMatrix, rows: usize, cols: usize) -> Result<ComplexMatrix> {
    if v.ncols() != 1 || v.nrows() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "cannot unvec a {}x{} array into {rows}x{cols}",
            v.nrows(),
            v.ncols()
        )));
    }
    Ok(ComplexMatrix::from_fn(rows, cols, |i, j| v[(i * cols + j, 0)]))
}

/// Which tensor factor [`partial_trace`] removes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    First,
    Second,
}

/// Partial trace of an operator on `C^dim1 ⊗ C^dim2` over the chosen factor.
pub fn partial_trace(a: &ComplexMatrix, dim1: usize, dim2: usize, which: Factor) -> Result<ComplexMatrix> {
    let n = dim1 * dim2;
    if a.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "partial trace over {dim1}x{dim2} needs a {n}x{n} matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(match which {
        Factor::First => ComplexMatrix::from_fn(dim2, dim2, |i, j| {
            (0..dim1).map(|k| a[(k * dim2 + i, k * dim2 + j)]).sum()
        }),
        Factor::Second => ComplexMatrix::from_fn(dim1, dim1, |i, j| {
            (0..dim2).map(|k| a[(i * dim2 + k, j * dim2 + k)]).sum()
        }),
    })
}

pub fn trace(a: &ComplexMatrix) -> C64 {
    a.diagonal().iter().sum()
}

/// Block-diagonal `a ⊕ b`.
pub fn direct_sum(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = zeros(ra + rb, ca + cb);
    out.view_mut((0, 0), (ra, ca)).copy_from(a);
    out.view_mut((ra, ca), (rb, cb)).copy_from(b);
    out
}

pub fn max_abs(a: &ComplexMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

pub fn hermiticity_defect(a: &ComplexMatrix) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    max_abs_diff(a, &a.adjoint())
}

pub fn is_hermitian(a: &ComplexMatrix, tol: f64) -> bool {
    hermiticity_defect(a) <= tol
}

pub fn all_finite(a: &ComplexMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// `(a + a†) / 2`.
pub fn hermitian_part(a: &ComplexMatrix) -> ComplexMatrix {
    (a + a.adjoint()) * r(0.5)
}

/// Spectral decomposition of a Hermitian matrix, eigenvalues descending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let d = diag_real(&self.values);
        &self.vectors * d * self.vectors.adjoint()
    }
}

pub fn eig_hermitian(a: &ComplexMatrix, herm_tol: f64) -> Result<HermitianEigen> {
    let defect = hermiticity_defect(a);
    if defect > herm_tol {
        return Err(Error::NonHermitianInput { defect });
    }
    Ok(eigh(&hermitian_part(a)))
}

/// Eigendecomposition for matrices that are Hermitian by construction.
///
/// nalgebra's `symmetric_eigen` occasionally returns NaN on sparse,
/// highly degenerate inputs (e.g. Choi matrices of syndrome recoveries), so its
/// output is validated and a cyclic Jacobi sweep takes over when it fails.
pub(crate) fn eigh(a: &ComplexMatrix) -> HermitianEigen {
    let n = a.nrows();
    if n == 0 {
        return HermitianEigen {
            values: Vec::new(),
            vectors: zeros(0, 0),
        };
    }
    let se = a.clone().symmetric_eigen();
    let scale = max_abs(a).max(f64::MIN_POSITIVE);
    let accepted = se.eigenvalues.iter().all(|v| v.is_finite())
        && se.eigenvectors.iter().all(|z| z.re.is_finite() && z.im.is_finite())
        && {
            let lam = ComplexMatrix::from_diagonal(&se.eigenvalues.map(r));
            let resid = a * &se.eigenvectors - &se.eigenvectors * lam;
            max_abs(&resid) <= 1e-11 * scale * (n as f64).max(1.0)
        };
    let (raw_values, raw_vectors) = if accepted {
        (se.eigenvalues.iter().copied().collect::<Vec<_>>(), se.eigenvectors)
    } else {
        jacobi_eigen(a)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| raw_values[j].total_cmp(&raw_values[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&k| raw_values[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| raw_vectors[(i, order[j])]);
    HermitianEigen { values, vectors }
}

/// Cyclic Jacobi for Hermitian matrices. Each rotation first removes the phase
/// of the pivot `a_pq` and then applies the real symmetric rotation.
fn jacobi_eigen(a: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = a.nrows();
    let mut m = hermitian_part(a);
    let mut v = identity(n);
    let total = m.norm_squared().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum();
        if off <= 1e-32 * total {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let b = apq.norm();
                if b <= 1e-300 {
                    continue;
                }
                let e = apq / r(b);
                let (alpha, beta) = (m[(p, p)].re, m[(q, q)].re);
                let zeta = (beta - alpha) / (2.0 * b);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G = [[c, s], [−s·ē, c·ē]] on columns p, q
                let (gpp, gpq, gqp, gqq) = (r(c), r(s), -e.conj() * s, e.conj() * c);
                for k in 0..n {
                    let (xp, xq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = xp * gpp + xq * gqp;
                    m[(k, q)] = xp * gpq + xq * gqq;
                    let (vp, vq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vp * gpp + vq * gqp;
                    v[(k, q)] = vp * gpq + vq * gqq;
                }
                for k in 0..n {
                    let (xp, xq) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = gpp.conj() * xp + gqp.conj() * xq;
                    m[(q, k)] = gpq.conj() * xp + gqq.conj() * xq;
                }
                m[(p, q)] = C64::ZERO;
                m[(q, p)] = C64::ZERO;
                m[(p, p)] = r(m[(p, p)].re);
                m[(q, q)] = r(m[(q, q)].re);
            }
        }
    }
    ((0..n).map(|i| m[(i, i)].re).collect(), v)
}

pub fn is_psd(a: &ComplexMatrix, tol: &Tolerances) -> Result<bool> {
    Ok(eig_hermitian(a, tol.eq_tol)?.min() >= -tol.eig_tol)
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub(crate) fn hermitian_fn(a: &ComplexMatrix, f: impl Fn(f64) -> f64) -> ComplexMatrix {
    let e = eigh(a);
    let fd: Vec<f64> = e.values.iter().map(|&v| f(v)).collect();
    &e.vectors * diag_real(&fd) * e.vectors.adjoint()
}

/// Completes orthonormal columns `q` (N×r) to an orthonormal basis of `C^N`,
/// returning only the N−r new columns. Candidates are the standard basis
/// vectors; at each step the one with the largest residual wins, lowest index
/// on ties.
pub fn orthonormal_complement(q: &ComplexMatrix, dim: usize) -> ComplexMatrix {
    let mut basis: Vec<nalgebra::DVector<C64>> = q.column_iter().map(|c| c.into_owned()).collect();
    let start = basis.len();
    while basis.len() < dim {
        let mut best: Option<(f64, nalgebra::DVector<C64>)> = None;
        for j in 0..dim {
            let mut v = nalgebra::DVector::<C64>::zeros(dim);
            v[j] = C64::ONE;
            // two passes of classical Gram–Schmidt
            for _ in 0..2 {
                for b in &basis {
                    let proj = b.dotc(&v);
                    v -= b * proj;
                }
            }
            let norm = v.norm();
            if best.as_ref().is_none_or(|(bn, _)| norm > *bn + 1e-12) {
                best = Some((norm, v));
            }
        }
        let (norm, v) = best.expect("dim > 0");
        basis.push(v / r(norm));
    }
    ComplexMatrix::from_fn(dim, dim - start, |i, j| basis[start + j][i])
}

/// Unitary factor of the polar decomposition of `a·p` on the support of the
/// projector `p`, completed to a full unitary: `a·p = U·√(p a† a p)`.
pub fn polar_unitary_on_subspace(a: &ComplexMatrix, p: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    let n = a.nrows();
    if !a.is_square() || p.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "polar decomposition needs square conforming matrices, got {:?} and {:?}",
            a.shape(),
            p.shape()
        )));
    }
    let ap = a * p;
    if max_abs(&ap) <= tol {
        return Err(Error::NullRestriction);
    }
    let svd = ap.svd(true, true);
    let w = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vᵀ");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > tol * smax.max(1.0))
        .collect();
    let wr = ComplexMatrix::from_fn(n, keep.len(), |i, j| w[(i, keep[j])]);
    let vr = ComplexMatrix::from_fn(n, keep.len(), |i, j| vt[(keep[j], i)].conj());
    let wc = orthonormal_complement(&wr, n);
    let vc = orthonormal_complement(&vr, n);
    Ok(&wr * vr.adjoint() + &wc * vc.adjoint())
}

pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    max_abs_diff(&(u.adjoint() * u), &identity(u.nrows()))
}

/// Trace norm of a Hermitian matrix (sum of absolute eigenvalues).
pub fn trace_norm_hermitian(a: &ComplexMatrix) -> f64 {
    eigh(&hermitian_part(a)).values.iter().map(|v| v.abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rand_matrix(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ComplexMatrix::from_fn(rows, cols, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn rand_herm(n: usize, seed: u64) -> ComplexMatrix {
        hermitian_part(&rand_matrix(n, n, seed))
    }

    #[test]
    fn kron_identity_and_diagonal() {
        assert_eq!(kron(&identity(2), &identity(2)), identity(4));
        let k = kron(&diag_real(&[1.0, 2.0]), &diag_real(&[3.0, 4.0]));
        assert_eq!(k, diag_real(&[3.0, 4.0, 6.0, 8.0]));
    }

    #[test]
    fn kron_pauli_x_on_vec_identity() {
        // direct 4x4 product: X⊗X maps (1,0,0,1) to (1,0,0,1)
        let x = pauli_x();
        let lhs = kron(&x, &x) * vec(&identity(2));
        let rhs = vec(&(&x * identity(2) * x.transpose()));
        assert_eq!(lhs, rhs);
        assert_eq!(lhs, from_real_rows(4, 1, &[1.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn vec_convention() {
        assert_eq!(vec(&identity(2)), from_real_rows(4, 1, &[1.0, 0.0, 0.0, 1.0]));
        let a = from_real_rows(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(vec(&a), from_real_rows(6, 1, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        // vec(|i><j|) = |i>⊗|j>
        let e01 = matrix_unit(2, 0, 1);
        let ket0 = from_real_rows(2, 1, &[1.0, 0.0]);
        let ket1 = from_real_rows(2, 1, &[0.0, 1.0]);
        assert_eq!(vec(&e01), kron(&ket0, &ket1));
    }

    #[test]
    fn vec_is_isometry() {
        let a = rand_matrix(3, 3, 1);
        let b = rand_matrix(3, 3, 2);
        let lhs = trace(&(a.adjoint() * &b));
        let rhs = (vec(&a).adjoint() * vec(&b))[(0, 0)];
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn unvec_rejects_bad_shape() {
        assert!(unvec(&zeros(5, 1), 2, 2).is_err());
    }

    #[test]
    fn partial_trace_examples() {
        let rho = rand_herm(2, 3);
        let sigma = rand_herm(3, 4);
        let pt = partial_trace(&kron(&rho, &sigma), 2, 3, Factor::Second).unwrap();
        assert!(max_abs_diff(&pt, &(&rho * trace(&sigma))) < 1e-12);
        let pt1 = partial_trace(&kron(&rho, &sigma), 2, 3, Factor::First).unwrap();
        assert!(max_abs_diff(&pt1, &(&sigma * trace(&rho))) < 1e-12);

        let v = vec(&identity(2));
        let omega = &v * v.adjoint();
        assert_eq!(partial_trace(&omega, 2, 2, Factor::First).unwrap(), identity(2));

        let h = rand_herm(6, 5);
        for which in [Factor::First, Factor::Second] {
            let t = partial_trace(&h, 2, 3, which).unwrap();
            assert!((trace(&t) - trace(&h)).norm() < 1e-12);
        }
        assert!(matches!(
            partial_trace(&h, 2, 2, Factor::First),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn eig_known_spectra() {
        let e = eig_hermitian(&identity(3), 1e-9).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        let z = eig_hermitian(&pauli_z(), 1e-9).unwrap();
        assert!((z.values[0] - 1.0).abs() < 1e-15 && (z.values[1] + 1.0).abs() < 1e-15);
        let h = rand_herm(8, 6);
        let e = eig_hermitian(&h, 1e-9).unwrap();
        assert!(max_abs_diff(&e.reconstruct(), &h) <= 1e-10);
        assert!(unitarity_defect(&e.vectors) < 1e-10);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let a = matrix_unit(2, 0, 1);
        assert!(matches!(eig_hermitian(&a, 1e-9), Err(Error::NonHermitianInput { .. })));
    }

    #[test]
    fn jacobi_matches_spectrum() {
        for (n, seed) in [(1, 0), (2, 1), (5, 2), (9, 3)] {
            let h = rand_herm(n, seed);
            let (vals, vecs) = jacobi_eigen(&h);
            let lam = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, vals.iter().map(|&v| r(v))));
            assert!(max_abs_diff(&(&vecs * lam * vecs.adjoint()), &h) < 1e-12);
            assert!(unitarity_defect(&vecs) < 1e-12);
            // trace and Frobenius norm are spectral invariants
            let s: f64 = vals.iter().sum();
            let s2: f64 = vals.iter().map(|v| v * v).sum();
            assert!((s - trace(&h).re).abs() < 1e-12);
            assert!((s2 - h.norm_squared()).abs() < 1e-11);
        }
    }

    /// Four disjoint 2×2 blocks scattered over a 64×64 matrix; nalgebra's
    /// solver returns NaN here.
    #[test]
    fn eig_sparse_block_matrix_is_finite() {
        let mut a = zeros(64, 64);
        for (i, j) in [(0, 63), (1, 62), (2, 61), (4, 59)] {
            for (k, l) in [(i, i), (i, j), (j, i), (j, j)] {
                a[(k, l)] = r(1.0 + 1e-15 * (i as f64));
            }
        }
        let e = eig_hermitian(&a, 1e-12).unwrap();
        assert!(e.values.iter().all(|v| v.is_finite()));
        assert!((e.max() - 2.0).abs() < 1e-12);
        assert!(e.min().abs() < 1e-12);
        assert!(max_abs_diff(&e.reconstruct(), &a) < 1e-12);
    }

    #[test]
    fn eig_is_deterministic() {
        let h = rand_herm(5, 7);
        let a = eig_hermitian(&h, 1e-9).unwrap();
        let b = eig_hermitian(&h, 1e-9).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.vectors, b.vectors);
    }

    #[test]
    fn psd_checks() {
        let tol = Tolerances::default();
        assert!(is_psd(&identity(3), &tol).unwrap());
        assert!(!is_psd(&diag_real(&[1.0, -0.5]), &tol).unwrap());
    }

    #[test]
    fn polar_examples() {
        // unitary stays put
        let u = (pauli_x() + pauli_z()) * r(std::f64::consts::FRAC_1_SQRT_2);
        let got = polar_unitary_on_subspace(&u, &identity(2), 1e-12).unwrap();
        assert!(max_abs_diff(&got, &u) < 1e-12);
        let got = polar_unitary_on_subspace(&(identity(3) * r(2.0)), &identity(3), 1e-12).unwrap();
        assert!(max_abs_diff(&got, &identity(3)) < 1e-12);

        let a = rand_matrix(4, 4, 8);
        let p = diag_real(&[1.0, 0.0, 1.0, 0.0]);
        let u = polar_unitary_on_subspace(&a, &p, 1e-12).unwrap();
        assert!(unitarity_defect(&u) < 1e-10);
        let ap = &a * &p;
        let root = hermitian_fn(&(&p * a.adjoint() * &a * &p), |v| v.max(0.0).sqrt());
        assert!(max_abs_diff(&ap, &(&u * root)) <= 1e-10);

        assert!(matches!(
            polar_unitary_on_subspace(&zeros(2, 2), &identity(2), 1e-12),
            Err(Error::NullRestriction)
        ));
    }

    #[test]
    fn complement_is_orthonormal_and_deterministic() {
        let q = from_real_rows(3, 1, &[1.0, 1.0, 0.0]) * r(std::f64::consts::FRAC_1_SQRT_2);
        let c1 = orthonormal_complement(&q, 3);
        let full = {
            let mut m = zeros(3, 3);
            m.view_mut((0, 0), (3, 1)).copy_from(&q);
            m.view_mut((0, 1), (3, 2)).copy_from(&c1);
            m
        };
        assert!(unitarity_defect(&full) < 1e-12);
        assert_eq!(c1, orthonormal_complement(&q, 3));
    }

    #[test]
    fn tolerances_validate() {
        assert!(Tolerances::new(-1.0, 0.0, 0.0).is_err());
        assert!(Tolerances::new(0.0, f64::NAN, 0.0).is_err());
        assert_eq!(Tolerances::new(1e-9, 1e-9, 1e-7).unwrap(), Tolerances::default());
    }

    proptest! {
        #[test]
        fn vec_round_trip(data in proptest::collection::vec(-1.0f64..1.0, 24)) {
            let a = ComplexMatrix::from_fn(3, 4, |i, j| c(data[2 * (i * 4 + j)], data[2 * (i * 4 + j) + 1]));
            let back = unvec(&vec(&a), 3, 4).unwrap();
            prop_assert!(max_abs_diff(&a, &back) <= 1e-12);
        }

        #[test]
        fn transfer_identity(seed in 0u64..10_000, d in 2usize..4) {
            let a = rand_matrix(d, d, seed);
            let b = rand_matrix(d, d, seed + 1);
            let cm = rand_matrix(d, d, seed + 2);
            let lhs = kron(&a, &b) * vec(&cm);
            let rhs = vec(&(&a * &cm * b.transpose()));
            prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
        }

        #[test]
        fn partial_trace_linear(seed in 0u64..10_000, s in -2.0f64..2.0) {
            let a = rand_herm(6, seed);
            let b = rand_herm(6, seed + 1);
            for which in [Factor::First, Factor::Second] {
                let lhs = partial_trace(&(&a + &b * r(s)), 3, 2, which).unwrap();
                let rhs = partial_trace(&a, 3, 2, which).unwrap() + partial_trace(&b, 3, 2, which).unwrap() * r(s);
                prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
            }
        }

        #[test]
        fn eig_2x2_matches_closed_form(a in -2.0f64..2.0, d in -2.0f64..2.0, br in -2.0f64..2.0, bi in -2.0f64..2.0) {
            let h = ComplexMatrix::from_row_slice(2, 2, &[r(a), c(br, bi), c(br, -bi), r(d)]);
            let e = eig_hermitian(&h, 1e-12).unwrap();
            let mean = (a + d) / 2.0;
            let rad = (((a - d) / 2.0).powi(2) + br * br + bi * bi).sqrt();
            prop_assert!((e.values[0] - (mean + rad)).abs() < 1e-12);
            prop_assert!((e.values[1] - (mean - rad)).abs() < 1e-12);
        }
    }
}
