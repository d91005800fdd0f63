use std::sync::Arc;

use rustdct::{DctPlanner, Dst1};

use super::krylov::Preconditioner;

/// Exact inverse of the constant-coefficient operator
/// `sum_d j_d K_d (x) M_rest + v M (x) ... (x) M` on a uniform tensor grid of
/// multilinear elements with homogeneous Dirichlet data.
///
/// `K` and `M` are the 1D stiffness and consistent mass matrices; both are
/// diagonalised by the type-I sine transform, so applying the inverse costs a
/// few transforms per axis.
pub struct SpectralPreconditioner {
    dim: usize,
    m: usize,
    eigenvalues: Vec<f64>,
    dst: Arc<dyn Dst1<f64>>,
}

impl std::fmt::Debug for SpectralPreconditioner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPreconditioner")
            .field("dim", &self.dim)
            .field("m", &self.m)
            .finish()
    }
}

impl SpectralPreconditioner {
    /// `m` interior nodes per axis, spacing `h`, diagonal diffusion `diffusion[d]`
    /// and reaction `reaction`.
    pub fn new(dim: usize, m: usize, h: f64, diffusion: &[f64], reaction: f64) -> Self {
        assert_eq!(diffusion.len(), dim);
        let theta = |k: usize| std::f64::consts::PI * (k + 1) as f64 / (m + 1) as f64;
        let k1: Vec<f64> = (0..m).map(|k| (2.0 - 2.0 * theta(k).cos()) / h).collect();
        let m1: Vec<f64> = (0..m)
            .map(|k| h * (4.0 + 2.0 * theta(k).cos()) / 6.0)
            .collect();

        let total = m.pow(dim as u32);
        let mut eigenvalues = vec![0.0; total];
        let mut idx = vec![0usize; dim];
        for (flat, ev) in eigenvalues.iter_mut().enumerate() {
            let mut rest = flat;
            for slot in idx.iter_mut() {
                *slot = rest % m;
                rest /= m;
            }
            let mass: f64 = idx.iter().map(|&k| m1[k]).product();
            let mut lam = reaction * mass;
            for d in 0..dim {
                lam += diffusion[d] * k1[idx[d]] * mass / m1[idx[d]];
            }
            *ev = lam;
        }
        let dst = DctPlanner::new().plan_dst1(m);
        Self {
            dim,
            m,
            eigenvalues,
            dst,
        }
    }

    /// Multiplies the operator by `factor` (its inverse by `1/factor`).
    pub fn scaled(mut self, factor: f64) -> Self {
        for ev in self.eigenvalues.iter_mut() {
            *ev *= factor;
        }
        self
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Orthonormal multi-dimensional sine transform (an involution).
    fn transform(&self, data: &mut [f64]) {
        let m = self.m;
        let norm = (2.0 / (m + 1) as f64).sqrt();
        let mut line = vec![0.0; m];
        let mut scratch = vec![0.0; self.dst.get_scratch_len()];
        for axis in 0..self.dim {
            let stride = m.pow(axis as u32);
            let block = stride * m;
            for base in (0..data.len()).step_by(block) {
                for offset in 0..stride {
                    let start = base + offset;
                    for (k, slot) in line.iter_mut().enumerate() {
                        *slot = data[start + k * stride];
                    }
                    // the FFT-based DST-I assumes a zeroed scratch buffer
                    scratch.iter_mut().for_each(|v| *v = 0.0);
                    self.dst.process_dst1_with_scratch(&mut line, &mut scratch);
                    for (k, val) in line.iter().enumerate() {
                        data[start + k * stride] = val * norm;
                    }
                }
            }
        }
    }

    /// Applies the forward operator (useful for inner products in its metric).
    pub fn apply_forward(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
        self.transform(y);
        for (yi, ev) in y.iter_mut().zip(&self.eigenvalues) {
            *yi *= ev;
        }
        self.transform(y);
    }
}

impl Preconditioner for SpectralPreconditioner {
    fn apply_inverse(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        self.transform(z);
        for (zi, ev) in z.iter_mut().zip(&self.eigenvalues) {
            *zi /= ev;
        }
        self.transform(z);
    }
}
