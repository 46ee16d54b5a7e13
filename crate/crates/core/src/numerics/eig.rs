//! Dense complex eigensolver: Householder reduction to Hessenberg form,
//! shifted QR iteration to Schur form, and triangular back-substitution for
//! the eigenvectors.

use num_complex::Complex64 as C64;

use super::matrix::{norm2, CMatrix};
use crate::error::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Eigenvalues and unit-norm eigenvectors (columns of the returned matrix).
pub fn eig_dense(a: &CMatrix) -> Result<(Vec<C64>, CMatrix)> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "eig_dense needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() {
        return Err(Error::InvalidInput(
            "non-finite entries in eigenproblem".into(),
        ));
    }
    let n = a.rows();
    if n == 0 {
        return Ok((Vec::new(), CMatrix::zeros(0, 0)));
    }
    let mut h = a.clone();
    let mut z = CMatrix::identity(n);
    hessenberg(&mut h, &mut z);
    schur(&mut h, &mut z)?;
    let lambdas: Vec<C64> = (0..n).map(|i| h[(i, i)]).collect();
    let w = triangular_eigvecs(&h, &z);
    Ok((lambdas, w))
}

fn hessenberg(h: &mut CMatrix, z: &mut CMatrix) {
    let n = h.rows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let x: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xnorm = norm2(&x);
        if xnorm == 0.0 {
            continue;
        }
        let phase = if x[0].norm() > 0.0 {
            x[0] / x[0].norm()
        } else {
            C64::new(1.0, 0.0)
        };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm = norm2(&v);
        if vnorm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|e| *e /= vnorm);

        // H <- (I - 2vv^H) H
        for j in 0..n {
            let mut s = ZERO;
            for (off, vi) in v.iter().enumerate() {
                s += vi.conj() * h[(k + 1 + off, j)];
            }
            s *= 2.0;
            for (off, vi) in v.iter().enumerate() {
                h[(k + 1 + off, j)] -= vi * s;
            }
        }
        // H <- H (I - 2vv^H), Z <- Z (I - 2vv^H)
        for m in [&mut *h, &mut *z] {
            for i in 0..n {
                let mut s = ZERO;
                for (off, vi) in v.iter().enumerate() {
                    s += m[(i, k + 1 + off)] * vi;
                }
                s *= 2.0;
                for (off, vi) in v.iter().enumerate() {
                    m[(i, k + 1 + off)] -= s * vi.conj();
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mean = (a + d) * 0.5;
    let l1 = mean + disc;
    let l2 = mean - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn schur(h: &mut CMatrix, z: &mut CMatrix) -> Result<()> {
    let n = h.rows();
    let max_iter = 100 * n.max(10);
    let mut total = 0usize;
    let mut hi = n - 1;
    let mut since_deflation = 0usize;

    while hi > 0 {
        // locate the start of the unreduced block ending at `hi`
        let mut l = hi;
        while l > 0 {
            let sub = h[(l, l - 1)].norm();
            let scale = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            let scale = if scale == 0.0 { 1.0 } else { scale };
            if sub <= f64::EPSILON * scale {
                h[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        total += 1;
        since_deflation += 1;
        if total > max_iter {
            return Err(Error::NoConvergence {
                iterations: total,
                order: n,
            });
        }

        let mu = if since_deflation % 11 == 10 {
            // exceptional shift to break cycles
            let e = h[(hi, hi - 1)].norm()
                + if hi >= 2 {
                    h[(hi - 1, hi - 2)].norm()
                } else {
                    0.0
                };
            h[(hi, hi)] + C64::new(0.75 * e, 0.4375 * e)
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };

        for k in l..=hi {
            h[(k, k)] -= mu;
        }
        let mut rots = Vec::with_capacity(hi - l);
        for k in l..hi {
            let a = h[(k, k)];
            let b = h[(k + 1, k)];
            let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
            let (c, s) = if r == 0.0 {
                (C64::new(1.0, 0.0), ZERO)
            } else {
                (a / r, b / r)
            };
            for j in k..n {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = c.conj() * x + s.conj() * y;
                h[(k + 1, j)] = -s * x + c * y;
            }
            h[(k + 1, k)] = ZERO;
            rots.push((k, c, s));
        }
        for &(k, c, s) in &rots {
            let top = (k + 2).min(hi);
            for i in 0..=top {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x * c + y * s;
                h[(i, k + 1)] = -x * s.conj() + y * c.conj();
            }
            for i in 0..n {
                let x = z[(i, k)];
                let y = z[(i, k + 1)];
                z[(i, k)] = x * c + y * s;
                z[(i, k + 1)] = -x * s.conj() + y * c.conj();
            }
        }
        for k in l..=hi {
            h[(k, k)] += mu;
        }
    }
    Ok(())
}

fn triangular_eigvecs(t: &CMatrix, z: &CMatrix) -> CMatrix {
    let n = t.rows();
    let tnorm = t.frobenius_norm().max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * tnorm;
    let mut w = CMatrix::zeros(n, n);
    let mut x = vec![ZERO; n];
    for k in 0..n {
        x.iter_mut().for_each(|e| *e = ZERO);
        x[k] = C64::new(1.0, 0.0);
        let lk = t[(k, k)];
        for i in (0..k).rev() {
            let mut s = ZERO;
            for j in i + 1..=k {
                s += t[(i, j)] * x[j];
            }
            let mut d = t[(i, i)] - lk;
            if d.norm() < small {
                d = C64::new(small, 0.0);
            }
            x[i] = -s / d;
            // rescale to avoid overflow in long back-substitutions
            let m = x[i].norm();
            if m > 1e100 {
                x[i..=k].iter_mut().for_each(|e| *e /= m);
            }
        }
        let col = w.col_mut(k);
        for j in 0..=k {
            let xj = x[j];
            if xj == ZERO {
                continue;
            }
            for (c, zz) in col.iter_mut().zip(z.col(j)) {
                *c += zz * xj;
            }
        }
        let nrm = norm2(col);
        if nrm > 0.0 {
            col.iter_mut().for_each(|e| *e /= nrm);
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check_residuals(a: &CMatrix, lam: &[C64], w: &CMatrix, tol: f64) {
        let an = a.frobenius_norm();
        for (i, &l) in lam.iter().enumerate() {
            let wi = w.col(i);
            let aw = a.mul_vec(wi);
            let r: f64 = aw
                .iter()
                .zip(wi)
                .map(|(x, y)| (x - l * y).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(r <= tol * an * norm2(wi), "residual {r} for eigenvalue {l}");
            assert!((norm2(wi) - 1.0).abs() < 1e-12);
        }
    }

    fn sorted_by_re_im(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn diagonal() {
        let a = CMatrix::from_real_rows(&[&[2.0, 0.0], &[0.0, -1.0]]);
        let (lam, w) = eig_dense(&a).unwrap();
        let lam = sorted_by_re_im(lam);
        assert!((lam[0] - C64::new(-1.0, 0.0)).norm() < 1e-14);
        assert!((lam[1] - C64::new(2.0, 0.0)).norm() < 1e-14);
        check_residuals(&a, &eig_dense(&a).unwrap().0, &w, 1e-12);
    }

    #[test]
    fn rotation_generator() {
        let a = CMatrix::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let (lam, w) = eig_dense(&a).unwrap();
        let lam_s = sorted_by_re_im(lam.clone());
        assert!((lam_s[0] - C64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((lam_s[1] - C64::new(0.0, 1.0)).norm() < 1e-14);
        check_residuals(&a, &lam, &w, 1e-12);
    }

    #[test]
    fn companion_of_z3_minus_1() {
        // companion matrix of z^3 - 1
        let a = CMatrix::from_real_rows(&[&[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        let (lam, w) = eig_dense(&a).unwrap();
        check_residuals(&a, &lam, &w, 1e-10);
        for k in 0..3 {
            let root = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 3.0);
            let best = lam
                .iter()
                .map(|l| (l - root).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-12, "root {root} missed by {best}");
        }
    }

    #[test]
    fn random_complex_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for n in [1, 2, 5, 17, 60] {
            let a = CMatrix::from_fn(n, n, |_, _| {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let (lam, w) = eig_dense(&a).unwrap();
            check_residuals(&a, &lam, &w, 1e-10);
            let trace: C64 = (0..n).map(|i| a[(i, i)]).sum();
            let lsum: C64 = lam.iter().sum();
            assert!((trace - lsum).norm() < 1e-10 * n as f64);
        }
    }

    #[test]
    fn hermitian_spectrum_is_real() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = CMatrix::from_fn(6, 6, |_, _| C64::new(rng.gen(), rng.gen()));
        let a = b.add(&b.adjoint());
        let (lam, w) = eig_dense(&a).unwrap();
        assert!(lam.iter().all(|l| l.im.abs() < 1e-12));
        check_residuals(&a, &lam, &w, 1e-10);
    }

    #[test]
    fn rejects_non_square() {
        assert!(eig_dense(&CMatrix::zeros(2, 3)).is_err());
    }
}
