//! Eigen-solvers for the small matrices used throughout the crate.

use num_complex::Complex64;

use super::matrix::{SquareMatrix, SymMatrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Smallest eigenvalue accepted by [`sym_sqrt_psd`].
pub const PD_EPSILON: f64 = 1e-12;

/// Eigenvalues in ascending order with orthonormal eigenvectors stored as the
/// columns of `vectors`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: SquareMatrix,
}

impl EigenDecomposition {
    /// `Q · diag(g(λ)) · Qᵀ`.
    pub fn reconstruct_with(&self, mut g: impl FnMut(f64) -> f64) -> SymMatrix {
        let n = self.values.len();
        let mapped: Vec<f64> = self.values.iter().map(|&v| g(v)).collect();
        let q = &self.vectors;
        SymMatrix::from_fn(n, |i, j| (0..n).map(|k| q[(i, k)] * mapped[k] * q[(j, k)]).sum())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(|v| v)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.vectors[(i, k)]).collect()
    }
}

/// Cyclic Jacobi eigen-solver for symmetric matrices.
pub fn sym_eigen(s: &SymMatrix) -> Result<EigenDecomposition> {
    let n = s.dim();
    let mut a = s.as_matrix().clone();
    let mut v = SquareMatrix::identity(n);
    let scale = a.frobenius_norm();
    if a.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenNonConvergence { sweeps: 0, residual: f64::NAN });
    }

    let off = |a: &SquareMatrix| -> f64 {
        let mut sum = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
        (2.0 * sum).sqrt()
    };

    let mut sweeps = 0;
    while off(&a) > f64::EPSILON * 1e-2 * scale {
        if sweeps == MAX_SWEEPS {
            return Err(Error::EigenNonConvergence { sweeps, residual: off(&a) });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let g = 100.0 * apq.abs();
                if sweeps > 4 && a[(p, p)].abs() + g == a[(p, p)].abs() && a[(q, q)].abs() + g == a[(q, q)].abs() {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                // A ← Jᵀ A J with the rotation in the (p, q) plane.
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = SquareMatrix::from_fn(n, |i, k| v[(i, order[k])]);
    Ok(EigenDecomposition { values, vectors })
}

/// Principal square root of a symmetric positive definite matrix.
pub fn sym_sqrt_psd(s: &SymMatrix) -> Result<SymMatrix> {
    let eig = sym_eigen(s)?;
    if let Some(&bad) = eig.values.iter().find(|&&v| v <= PD_EPSILON) {
        return Err(Error::PositiveDefinitenessViolation { eigenvalue: bad });
    }
    Ok(eig.reconstruct_with(f64::sqrt))
}

/// Eigenvalues of a general real matrix (Hessenberg reduction followed by
/// the Francis double-shift QR iteration), sorted by real then imaginary part.
pub fn eigenvalues(m: &SquareMatrix) -> Result<Vec<Complex64>> {
    let n = m.dim();
    // One-based working copy; keeps the index arithmetic of the classical
    // formulation intact.
    let mut a = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i + 1][j + 1] = m[(i, j)];
        }
    }
    reduce_to_hessenberg(&mut a, n);
    for i in 1..=n {
        for j in 1..i.saturating_sub(1) {
            a[i][j] = 0.0;
        }
    }
    let mut out = hessenberg_qr(&mut a, n)?;
    out.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(out)
}

fn reduce_to_hessenberg(a: &mut [Vec<f64>], n: usize) {
    for m in 2..n {
        let mut x: f64 = 0.0;
        let mut i = m;
        for j in m..=n {
            if a[j][m - 1].abs() > x.abs() {
                x = a[j][m - 1];
                i = j;
            }
        }
        if i != m {
            for j in m - 1..=n {
                let t = a[i][j];
                a[i][j] = a[m][j];
                a[m][j] = t;
            }
            for row in a.iter_mut().take(n + 1).skip(1) {
                row.swap(i, m);
            }
        }
        if x != 0.0 {
            for i in m + 1..=n {
                let mut y = a[i][m - 1];
                if y != 0.0 {
                    y /= x;
                    a[i][m - 1] = y;
                    for j in m..=n {
                        a[i][j] -= y * a[m][j];
                    }
                    for row in a.iter_mut().take(n + 1).skip(1) {
                        row[m] += y * row[i];
                    }
                }
            }
        }
    }
}

#[allow(unused_assignments)]
fn hessenberg_qr(a: &mut [Vec<f64>], n: usize) -> Result<Vec<Complex64>> {
    let sign = |a: f64, b: f64| if b >= 0.0 { a.abs() } else { -a.abs() };
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in (i.max(2) - 1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
    let (mut x, mut y, mut z, mut w);
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
            } else {
                y = a[nn - 1][nn - 1];
                w = a[nn][nn - 1] * a[nn - 1][nn];
                if l == nn - 1 {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + sign(z, p);
                        wr[nn - 1] = x + z;
                        wr[nn] = x + z;
                        if z != 0.0 {
                            wr[nn] = x - w / z;
                        }
                        wi[nn - 1] = 0.0;
                        wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    nn = nn.saturating_sub(2);
                } else {
                    if its == 60 {
                        return Err(Error::EigenNonConvergence {
                            sweeps: its,
                            residual: a[nn][nn - 1].abs(),
                        });
                    }
                    if its == 10 || its == 20 {
                        t += x;
                        for i in 1..=nn {
                            a[i][i] -= x;
                        }
                        let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    let mut m = nn - 2;
                    loop {
                        z = a[m][m];
                        r = x - z;
                        let s = y - z;
                        p = (r * s - w) / a[m + 1][m] + a[m][m + 1];
                        q = a[m + 1][m + 1] - z - r - s;
                        r = a[m + 2][m + 1];
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m + 2..=nn {
                        a[i][i - 2] = 0.0;
                        if i != m + 2 {
                            a[i][i - 3] = 0.0;
                        }
                    }
                    let mut k = m;
                    while k < nn {
                        if k != m {
                            p = a[k][k - 1];
                            q = a[k + 1][k - 1];
                            r = 0.0;
                            if k != nn - 1 {
                                r = a[k + 2][k - 1];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    a[k][k - 1] = -a[k][k - 1];
                                }
                            } else {
                                a[k][k - 1] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                p = a[k][j] + q * a[k + 1][j];
                                if k != nn - 1 {
                                    p += r * a[k + 2][j];
                                    a[k + 2][j] -= p * z;
                                }
                                a[k + 1][j] -= p * y;
                                a[k][j] -= p * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for row in a.iter_mut().take(mmin + 1).skip(l) {
                                p = x * row[k] + y * row[k + 1];
                                if k != nn - 1 {
                                    p += z * row[k + 2];
                                    row[k + 2] -= p * r;
                                }
                                row[k + 1] -= p * q;
                                row[k] -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if nn < 2 || l + 1 >= nn {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let eig = sym_eigen(&SymMatrix::identity(3)).unwrap();
        assert_eq!(eig.values, vec![1.0, 1.0, 1.0]);
        assert!(eig.vectors.orthogonality_defect() < 1e-15);
    }

    #[test]
    fn diagonal_is_sorted_with_permutation_vectors() {
        let eig = sym_eigen(&SymMatrix::diagonal(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(eig.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(eig.column(0), vec![0.0, 1.0, 0.0]);
        assert_eq!(eig.column(1), vec![0.0, 0.0, 1.0]);
        assert_eq!(eig.column(2), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn two_by_two_matches_quadratic_formula() {
        let s = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let eig = sym_eigen(&s).unwrap();
        let r5 = 5f64.sqrt();
        assert!(close(eig.values[0], (3.0 - r5) / 2.0, 1e-15));
        assert!(close(eig.values[1], (3.0 + r5) / 2.0, 1e-15));
        let err = (eig.reconstruct().as_matrix() - s.as_matrix()).frobenius_norm();
        assert!(err <= 1e-12 * s.as_matrix().frobenius_norm());
    }

    #[test]
    fn sqrt_of_diagonal_and_shifted() {
        let r = sym_sqrt_psd(&SymMatrix::diagonal(&[4.0, 9.0])).unwrap();
        assert!(close(r[(0, 0)], 2.0, 1e-15) && close(r[(1, 1)], 3.0, 1e-15));
        assert_eq!(r[(0, 1)], 0.0);

        let j0 = SymMatrix::diagonal(&[1.0, 2.0, 3.0]);
        let r = sym_sqrt_psd(&j0.square().shift(0.5)).unwrap();
        for (i, v) in [1.5f64, 4.5, 9.5].iter().enumerate() {
            assert!(close(r[(i, i)], v.sqrt(), 1e-15));
        }
        assert_eq!(sym_sqrt_psd(&SymMatrix::identity(4)).unwrap(), SymMatrix::identity(4));
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let err = sym_sqrt_psd(&SymMatrix::diagonal(&[1.0, -0.25])).unwrap_err();
        assert!(matches!(err, Error::PositiveDefinitenessViolation { eigenvalue } if eigenvalue == -0.25));
        assert!(sym_sqrt_psd(&SymMatrix::diagonal(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn general_eigenvalues_of_rotation_and_triangular() {
        let rot = SquareMatrix::from_rows(&[vec![0.0, -2.0], vec![2.0, 0.0]]).unwrap();
        let ev = eigenvalues(&rot).unwrap();
        assert!(close(ev[0].re, 0.0, 1e-14) && close(ev[0].im, -2.0, 1e-14));
        assert!(close(ev[1].re, 0.0, 1e-14) && close(ev[1].im, 2.0, 1e-14));

        let tri = SquareMatrix::from_rows(&[
            vec![1.0, 5.0, -3.0],
            vec![0.0, 4.0, 2.0],
            vec![0.0, 0.0, -2.0],
        ])
        .unwrap();
        let ev = eigenvalues(&tri).unwrap();
        let re: Vec<f64> = ev.iter().map(|z| z.re).collect();
        assert!(close(re[0], -2.0, 1e-13) && close(re[1], 1.0, 1e-13) && close(re[2], 4.0, 1e-13));
    }

    #[test]
    fn general_eigenvalues_match_trace_and_determinant() {
        let m = SquareMatrix::from_fn(5, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.7 + (i == j) as u8 as f64);
        let ev = eigenvalues(&m).unwrap();
        let sum: Complex64 = ev.iter().sum();
        let prod: Complex64 = ev.iter().product();
        assert!((sum.re - m.trace()).abs() < 1e-10 && sum.im.abs() < 1e-10);
        assert!((prod.re - m.determinant()).abs() < 1e-9 * m.determinant().abs().max(1.0));
    }
}
