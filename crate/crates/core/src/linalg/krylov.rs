use super::{axpy, dot};

/// A symmetric linear map applied matrix-free.
pub trait LinearOperator {
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for F {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self(x, y)
    }
}

/// Approximate inverse of a symmetric positive-definite operator.
pub trait Preconditioner {
    fn apply_inverse(&self, r: &[f64], z: &mut [f64]);
}

/// Identity preconditioner.
impl Preconditioner for () {
    fn apply_inverse(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

#[derive(Debug, Clone)]
pub struct KrylovReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final residual estimate relative to the initial one.
    pub relative_residual: f64,
    pub converged: bool,
    /// Set when the iteration stopped on a breakdown rather than on tolerance.
    pub breakdown: Option<String>,
}

/// Preconditioned conjugate gradients from a zero initial guess.
pub fn conjugate_gradient<A, M>(a: &A, m: &M, b: &[f64], rtol: f64, max_iter: usize) -> KrylovReport
where
    A: LinearOperator + ?Sized,
    M: Preconditioner + ?Sized,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    m.apply_inverse(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let r0 = dot(b, b).sqrt();
    if r0 == 0.0 {
        return KrylovReport {
            x,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
            breakdown: None,
        };
    }
    let mut ap = vec![0.0; n];
    let mut rel = 1.0;
    for it in 1..=max_iter {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return KrylovReport {
                x,
                iterations: it,
                relative_residual: rel,
                converged: false,
                breakdown: Some(format!("non-positive curvature p'Ap={pap:e}")),
            };
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        rel = dot(&r, &r).sqrt() / r0;
        if rel <= rtol {
            return KrylovReport {
                x,
                iterations: it,
                relative_residual: rel,
                converged: true,
                breakdown: None,
            };
        }
        m.apply_inverse(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    KrylovReport {
        x,
        iterations: max_iter,
        relative_residual: rel,
        converged: false,
        breakdown: None,
    }
}

/// Preconditioned MINRES (Paige & Saunders) for symmetric, possibly indefinite,
/// systems. The preconditioner must be symmetric positive-definite on the
/// subspace the iteration lives in. Starts from zero.
///
/// The reported residual is the preconditioned residual norm estimate relative
/// to the initial one.
pub fn minres<A, M>(a: &A, m: &M, b: &[f64], rtol: f64, max_iter: usize) -> KrylovReport
where
    A: LinearOperator + ?Sized,
    M: Preconditioner + ?Sized,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut y = vec![0.0; n];
    m.apply_inverse(&r1, &mut y);
    let beta1_sq = dot(&r1, &y);
    if beta1_sq < 0.0 {
        return KrylovReport {
            x,
            iterations: 0,
            relative_residual: 1.0,
            converged: false,
            breakdown: Some("preconditioner is not positive definite".into()),
        };
    }
    let beta1 = beta1_sq.sqrt();
    if beta1 == 0.0 {
        return KrylovReport {
            x,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
            breakdown: None,
        };
    }

    let mut r2 = r1.clone();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0_f64, 0.0_f64);

    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = s * yi;
        }
        a.apply(&v, &mut y);
        if itn >= 2 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        m.apply_inverse(&r2, &mut y);
        oldb = beta;
        let beta_sq = dot(&r2, &y);
        if beta_sq < 0.0 || !beta_sq.is_finite() {
            return KrylovReport {
                x,
                iterations: itn,
                relative_residual: phibar / beta1,
                converged: false,
                breakdown: Some(format!("indefinite preconditioner (beta^2={beta_sq:e})")),
            };
        }
        beta = beta_sq.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
        }
        axpy(phi, &w, &mut x);

        let rel = phibar / beta1;
        if rel <= rtol || beta == 0.0 {
            return KrylovReport {
                x,
                iterations: itn,
                relative_residual: rel,
                converged: true,
                breakdown: None,
            };
        }
    }
    KrylovReport {
        x,
        iterations: max_iter,
        relative_residual: phibar / beta1,
        converged: false,
        breakdown: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;

    fn tridiag(diag: Vec<f64>, off: f64) -> impl Fn(&[f64], &mut [f64]) {
        move |x: &[f64], y: &mut [f64]| {
            let n = x.len();
            for i in 0..n {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += off * x[i - 1];
                }
                if i + 1 < n {
                    s += off * x[i + 1];
                }
                y[i] = s;
            }
        }
    }

    #[test]
    fn cg_solves_spd_tridiagonal() {
        let n = 50;
        let a = tridiag(vec![2.5; n], -1.0);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let rep = conjugate_gradient(&a, &(), &b, 1e-12, 500);
        assert!(rep.converged);
        let mut ax = vec![0.0; n];
        a.apply(&rep.x, &mut ax);
        let res: Vec<f64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm2(&res) < 1e-10 * norm2(&b));
    }

    #[test]
    fn minres_handles_indefinite_system() {
        let n = 40;
        // eigenvalues of the shifted Laplacian straddle zero
        let diag: Vec<f64> = vec![2.0 - 1.3; n];
        let a = tridiag(diag, -1.0);
        let b: Vec<f64> = (0..n).map(|i| 1.0 + (i % 3) as f64).collect();
        let rep = minres(&a, &(), &b, 1e-12, 1000);
        assert!(rep.converged, "{rep:?}");
        let mut ax = vec![0.0; n];
        a.apply(&rep.x, &mut ax);
        let res: Vec<f64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm2(&res) < 1e-8 * norm2(&b));
    }

    #[test]
    fn minres_with_diagonal_preconditioner() {
        struct Jacobi(Vec<f64>);
        impl Preconditioner for Jacobi {
            fn apply_inverse(&self, r: &[f64], z: &mut [f64]) {
                for i in 0..r.len() {
                    z[i] = r[i] / self.0[i];
                }
            }
        }
        let n = 30;
        let diag: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let a = tridiag(diag.clone(), 0.4);
        let b = vec![1.0; n];
        let rep = minres(&a, &Jacobi(diag), &b, 1e-12, 200);
        assert!(rep.converged);
        let mut ax = vec![0.0; n];
        a.apply(&rep.x, &mut ax);
        let res: Vec<f64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm2(&res) < 1e-9);
    }
}
