//! Coefficient fields `V` and `J`, the concentration function
//! `Gamma(z) = V(z)^((p+1)/(p-1) - N/2) * det(J(z))^(1/2)`, its critical points,
//! and the diagonalising transform `T` with `T^t J T = I`.

use std::fmt;

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::symmetric_eigenvalues;
use crate::region::BoxRegion;
use crate::{Error, Result};

/// Scalar potential `V` with analytic gradient.
pub trait PotentialField: Send + Sync + fmt::Debug {
    fn value(&self, z: &[f64]) -> f64;
    fn gradient(&self, z: &[f64]) -> DVector<f64>;
    /// Analytic Hessian when available; [`potential_hessian`] falls back to differences.
    fn hessian(&self, _z: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
    /// Declared `alpha = inf V > 0`.
    fn lower_bound(&self) -> f64;
}

/// Symmetric, uniformly elliptic matrix field `J` with analytic first derivatives.
pub trait DiffusionField: Send + Sync + fmt::Debug {
    fn value(&self, z: &[f64]) -> DMatrix<f64>;
    /// `dJ/dz_i` at `z`.
    fn partial(&self, z: &[f64], i: usize) -> DMatrix<f64>;
    /// Declared ellipticity constant `nu`.
    fn ellipticity(&self) -> f64;
    /// Declared bound on the largest eigenvalue.
    fn upper_bound(&self) -> f64 {
        f64::INFINITY
    }
    /// True when `J` does not depend on `z`.
    fn is_constant(&self) -> bool {
        false
    }
}

/// Step used for finite-difference fallbacks: `1e-5 * (1 + |z|)`.
pub fn fd_step(z: &[f64]) -> f64 {
    1e-5 * (1.0 + z.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Hessian of `V`, analytic if provided, else centred differences of the gradient.
pub fn potential_hessian(v: &dyn PotentialField, z: &[f64]) -> DMatrix<f64> {
    if let Some(h) = v.hessian(z) {
        return h;
    }
    let n = z.len();
    let step = fd_step(z);
    let mut h = DMatrix::zeros(n, n);
    let mut zp = z.to_vec();
    for j in 0..n {
        zp[j] = z[j] + step;
        let gp = v.gradient(&zp);
        zp[j] = z[j] - step;
        let gm = v.gradient(&zp);
        zp[j] = z[j];
        for i in 0..n {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    0.5 * (&h + h.transpose())
}

/// Checks the pointwise assumptions on `V` and `J` at `z`.
pub fn check_assumptions(v: &dyn PotentialField, j: &dyn DiffusionField, z: &[f64]) -> Result<()> {
    let vz = v.value(z);
    if !(vz > 0.0) {
        return Err(Error::domain(
            "V",
            format!("V({z:?}) = {vz} is not positive"),
        ));
    }
    let jz = j.value(z);
    if (&jz - jz.transpose()).amax() > 0.0 {
        return Err(Error::domain("J", format!("J({z:?}) is not symmetric")));
    }
    let ev = symmetric_eigenvalues(&jz);
    if !(ev[0] > 0.0) {
        return Err(Error::domain(
            "J",
            format!(
                "J({z:?}) is not positive definite (smallest eigenvalue {})",
                ev[0]
            ),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Field families
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ConstantPotential {
    pub value: f64,
}

impl PotentialField for ConstantPotential {
    fn value(&self, _z: &[f64]) -> f64 {
        self.value
    }
    fn gradient(&self, z: &[f64]) -> DVector<f64> {
        DVector::zeros(z.len())
    }
    fn hessian(&self, z: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(z.len(), z.len()))
    }
    fn lower_bound(&self) -> f64 {
        self.value
    }
}

/// `V(z) = base + c |z - center|^2`.
#[derive(Debug, Clone)]
pub struct QuadraticWell {
    pub base: f64,
    pub curvature: f64,
    pub center: Vec<f64>,
}

impl QuadraticWell {
    pub fn new(curvature: f64, center: Vec<f64>) -> Self {
        Self {
            base: 1.0,
            curvature,
            center,
        }
    }
}

impl PotentialField for QuadraticWell {
    fn value(&self, z: &[f64]) -> f64 {
        let r2: f64 = z
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        self.base + self.curvature * r2
    }
    fn gradient(&self, z: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            z.len(),
            z.iter()
                .zip(&self.center)
                .map(|(a, b)| 2.0 * self.curvature * (a - b)),
        )
    }
    fn hessian(&self, z: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::identity(z.len(), z.len()) * (2.0 * self.curvature))
    }
    fn lower_bound(&self) -> f64 {
        if self.curvature >= 0.0 {
            self.base
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// One Gaussian well `depth * exp(-|z - center|^2 / width^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianWell {
    pub center: Vec<f64>,
    pub depth: f64,
    pub width: f64,
}

/// `V(z) = base - sum_k depth_k exp(-|z - c_k|^2 / w_k^2)`.
#[derive(Debug, Clone)]
pub struct GaussianWells {
    pub base: f64,
    pub wells: Vec<GaussianWell>,
}

impl GaussianWells {
    fn terms<'a>(&'a self, z: &'a [f64]) -> impl Iterator<Item = (&'a GaussianWell, f64)> + 'a {
        self.wells.iter().map(move |w| {
            let r2: f64 = z.iter().zip(&w.center).map(|(a, b)| (a - b).powi(2)).sum();
            (w, w.depth * (-r2 / (w.width * w.width)).exp())
        })
    }
}

impl PotentialField for GaussianWells {
    fn value(&self, z: &[f64]) -> f64 {
        self.base - self.terms(z).map(|(_, e)| e).sum::<f64>()
    }
    fn gradient(&self, z: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(z.len());
        for (w, e) in self.terms(z) {
            let s = 2.0 * e / (w.width * w.width);
            for i in 0..z.len() {
                g[i] += s * (z[i] - w.center[i]);
            }
        }
        g
    }
    fn hessian(&self, z: &[f64]) -> Option<DMatrix<f64>> {
        let n = z.len();
        let mut h = DMatrix::zeros(n, n);
        for (w, e) in self.terms(z) {
            let w2 = w.width * w.width;
            for i in 0..n {
                for j in 0..n {
                    let di = z[i] - w.center[i];
                    let dj = z[j] - w.center[j];
                    let delta = if i == j { 1.0 } else { 0.0 };
                    h[(i, j)] += e * (2.0 * delta / w2 - 4.0 * di * dj / (w2 * w2));
                }
            }
        }
        Some(h)
    }
    fn lower_bound(&self) -> f64 {
        self.base - self.wells.iter().map(|w| w.depth.max(0.0)).sum::<f64>()
    }
}

/// Constant symmetric matrix.
#[derive(Debug, Clone)]
pub struct ConstantDiffusion {
    pub matrix: DMatrix<f64>,
}

impl ConstantDiffusion {
    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
        }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        Self {
            matrix: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        }
    }
}

impl DiffusionField for ConstantDiffusion {
    fn value(&self, _z: &[f64]) -> DMatrix<f64> {
        self.matrix.clone()
    }
    fn partial(&self, z: &[f64], _i: usize) -> DMatrix<f64> {
        DMatrix::zeros(z.len(), z.len())
    }
    fn ellipticity(&self) -> f64 {
        symmetric_eigenvalues(&self.matrix)[0]
    }
    fn upper_bound(&self) -> f64 {
        *symmetric_eigenvalues(&self.matrix).last().unwrap()
    }
    fn is_constant(&self) -> bool {
        true
    }
}

/// Diagonal field `J_ii(z) = base_i + sum_k quad[i][k] z_k^2` with non-negative `quad`.
#[derive(Debug, Clone)]
pub struct DiagonalQuadratic {
    pub base: Vec<f64>,
    pub quad: Vec<Vec<f64>>,
}

impl DiffusionField for DiagonalQuadratic {
    fn value(&self, z: &[f64]) -> DMatrix<f64> {
        let n = z.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.base[i]
                    + self.quad[i]
                        .iter()
                        .zip(z)
                        .map(|(c, v)| c * v * v)
                        .sum::<f64>()
            } else {
                0.0
            }
        })
    }
    fn partial(&self, z: &[f64], k: usize) -> DMatrix<f64> {
        let n = z.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0 * self.quad[i][k] * z[k]
            } else {
                0.0
            }
        })
    }
    fn ellipticity(&self) -> f64 {
        self.base.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Affine field `J(z) = A_0 + sum_k z_k A_k` with user-declared bounds.
#[derive(Debug, Clone)]
pub struct AffineDiffusion {
    pub offset: DMatrix<f64>,
    pub slopes: Vec<DMatrix<f64>>,
    pub nu: f64,
    pub upper: f64,
}

impl DiffusionField for AffineDiffusion {
    fn value(&self, z: &[f64]) -> DMatrix<f64> {
        let mut m = self.offset.clone();
        for (zk, a) in z.iter().zip(&self.slopes) {
            m += a * *zk;
        }
        m
    }
    fn partial(&self, _z: &[f64], i: usize) -> DMatrix<f64> {
        self.slopes[i].clone()
    }
    fn ellipticity(&self) -> f64 {
        self.nu
    }
    fn upper_bound(&self) -> f64 {
        self.upper
    }
}

// ---------------------------------------------------------------------------
// Gamma
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Min,
    Max,
    Saddle,
    Degenerate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LandscapeSample {
    pub point: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub classification: Classification,
    /// Eigenvalues of the finite-difference Hessian of Gamma, ascending.
    pub hessian_eigenvalues: Vec<f64>,
}

/// Exponent of `V` in Gamma: `(p+1)/(p-1) - N/2`.
pub fn gamma_exponent(dim: usize, p: f64) -> f64 {
    (p + 1.0) / (p - 1.0) - dim as f64 / 2.0
}

/// Checks `p > 1` and subcriticality `p < (N+2)/(N-2)` for `N >= 3`.
pub fn check_exponent(dim: usize, p: f64) -> Result<()> {
    if !(p > 1.0) {
        return Err(Error::InvalidInput(format!("exponent p={p} must exceed 1")));
    }
    if dim >= 3 {
        let crit = (dim as f64 + 2.0) / (dim as f64 - 2.0);
        if p >= crit {
            return Err(Error::InvalidInput(format!(
                "exponent p={p} is not subcritical for N={dim} (needs p < {crit})"
            )));
        }
    }
    Ok(())
}

/// Gamma and its gradient without classification.
pub fn gamma_value_gradient(
    z: &[f64],
    v: &dyn PotentialField,
    j: &dyn DiffusionField,
    p: f64,
) -> Result<(f64, DVector<f64>)> {
    check_assumptions(v, j, z)?;
    let n = z.len();
    let a = gamma_exponent(n, p);
    let vz = v.value(z);
    let jz = j.value(z);
    let chol = jz
        .clone()
        .cholesky()
        .ok_or_else(|| Error::domain("J", format!("J({z:?}) has no Cholesky factor")))?;
    let det = chol.determinant();
    let jinv = chol.inverse();
    let gamma = vz.powf(a) * det.sqrt();
    let gv = v.gradient(z);
    let mut grad = DVector::zeros(n);
    for i in 0..n {
        // Jacobi: d sqrt(det J) = 1/2 sqrt(det J) tr(J^-1 dJ)
        let trace = (&jinv * j.partial(z, i)).trace();
        grad[i] = gamma * (a * gv[i] / vz + 0.5 * trace);
    }
    Ok((gamma, grad))
}

/// Degeneracy threshold relative to the Hessian norm.
pub const DEGENERACY_THRESHOLD: f64 = 1e-6;

fn gamma_hessian_fd(
    z: &[f64],
    v: &dyn PotentialField,
    j: &dyn DiffusionField,
    p: f64,
) -> Result<DMatrix<f64>> {
    let n = z.len();
    let step = fd_step(z);
    let mut h = DMatrix::zeros(n, n);
    let mut zp = z.to_vec();
    for c in 0..n {
        zp[c] = z[c] + step;
        let (_, gp) = gamma_value_gradient(&zp, v, j, p)?;
        zp[c] = z[c] - step;
        let (_, gm) = gamma_value_gradient(&zp, v, j, p)?;
        zp[c] = z[c];
        for r in 0..n {
            h[(r, c)] = (gp[r] - gm[r]) / (2.0 * step);
        }
    }
    Ok(0.5 * (&h + h.transpose()))
}

fn classify(hessian: &DMatrix<f64>, scale: f64) -> (Classification, Vec<f64>) {
    let ev = symmetric_eigenvalues(hessian);
    let norm = ev.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
    // an absolutely tiny Hessian means a flat landscape
    if norm <= 1e-8 * scale.max(1e-300) {
        return (Classification::Degenerate, ev);
    }
    let thr = DEGENERACY_THRESHOLD * norm;
    let class = if ev.iter().any(|e| e.abs() < thr) {
        Classification::Degenerate
    } else if ev.iter().all(|e| *e > 0.0) {
        Classification::Min
    } else if ev.iter().all(|e| *e < 0.0) {
        Classification::Max
    } else {
        Classification::Saddle
    };
    (class, ev)
}

/// Evaluates Gamma at `z` with its gradient and local classification.
pub fn gamma_eval(
    z: &[f64],
    v: &dyn PotentialField,
    j: &dyn DiffusionField,
    dim: usize,
    p: f64,
) -> Result<LandscapeSample> {
    if z.len() != dim {
        return Err(Error::InvalidInput(format!(
            "point has dimension {} but N={dim}",
            z.len()
        )));
    }
    check_exponent(dim, p)?;
    let (value, grad) = gamma_value_gradient(z, v, j, p)?;
    let hess = gamma_hessian_fd(z, v, j, p)?;
    let (classification, hessian_eigenvalues) = classify(&hess, value);
    Ok(LandscapeSample {
        point: z.to_vec(),
        value,
        gradient: grad.iter().copied().collect(),
        classification,
        hessian_eigenvalues,
    })
}

/// Locates critical points of Gamma in `region`.
///
/// A coarse lattice is scanned for local minima of `|grad Gamma|`; each
/// candidate is polished by damped Newton on `grad Gamma` with a
/// finite-difference Hessian. Candidates that diverge or leave the box are
/// dropped. Results are deduplicated at distance `sqrt(tol)`.
pub fn find_gamma_critical_points(
    region: &BoxRegion,
    coarse_grid: usize,
    tol: f64,
    v: &dyn PotentialField,
    j: &dyn DiffusionField,
    p: f64,
) -> Result<Vec<LandscapeSample>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if coarse_grid < 2 {
        return Err(Error::InvalidInput(
            "coarse grid needs at least 2 points per axis".into(),
        ));
    }
    let dim = region.dim();
    check_exponent(dim, p)?;
    let total = coarse_grid.pow(dim as u32);
    let coord = |flat: usize| -> Vec<f64> {
        let mut rest = flat;
        (0..dim)
            .map(|d| {
                let k = rest % coarse_grid;
                rest /= coarse_grid;
                region.lo[d] + (region.hi[d] - region.lo[d]) * k as f64 / (coarse_grid - 1) as f64
            })
            .collect()
    };
    let mut gnorm = Vec::with_capacity(total);
    for flat in 0..total {
        let (_, g) = gamma_value_gradient(&coord(flat), v, j, p)?;
        gnorm.push(g.norm());
    }

    let mut candidates = Vec::new();
    for flat in 0..total {
        let idx = unflatten(flat, coarse_grid, dim);
        let mut is_min = true;
        for nb in neighbours(&idx, coarse_grid) {
            if gnorm[flatten(&nb, coarse_grid)] < gnorm[flat] {
                is_min = false;
                break;
            }
        }
        if is_min {
            candidates.push(coord(flat));
        }
    }

    let mut found: Vec<LandscapeSample> = Vec::new();
    let dedup = tol.sqrt();
    for start in candidates {
        match newton_on_gamma_gradient(&start, region, tol, v, j, p) {
            Some(z) => {
                if found.iter().any(|s| dist(&s.point, &z) < dedup) {
                    continue;
                }
                let sample = gamma_eval(&z, v, j, dim, p)?;
                found.push(sample);
            }
            None => debug!("critical-point candidate from {start:?} dropped: Newton diverged"),
        }
    }
    found.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.point[0].total_cmp(&b.point[0]))
    });
    Ok(found)
}

/// True when every returned point is degenerate, the signature of a flat landscape.
pub fn is_degenerate_landscape(points: &[LandscapeSample]) -> bool {
    !points.is_empty()
        && points
            .iter()
            .all(|s| s.classification == Classification::Degenerate)
}

fn newton_on_gamma_gradient(
    start: &[f64],
    region: &BoxRegion,
    tol: f64,
    v: &dyn PotentialField,
    j: &dyn DiffusionField,
    p: f64,
) -> Option<Vec<f64>> {
    let mut z = start.to_vec();
    let diam: f64 = region
        .lo
        .iter()
        .zip(&region.hi)
        .map(|(a, b)| (b - a).powi(2))
        .sum::<f64>()
        .sqrt();
    for _ in 0..60 {
        let (_, g) = gamma_value_gradient(&z, v, j, p).ok()?;
        let gn = g.norm();
        if gn <= tol {
            return region.contains(&z).then_some(z);
        }
        let h = gamma_hessian_fd(&z, v, j, p).ok()?;
        let step = h.lu().solve(&(-&g))?;
        if !step.iter().all(|s| s.is_finite()) {
            return None;
        }
        // damp on the merit |grad Gamma|, and never jump more than a tenth of the box
        let mut lambda = (0.1 * diam / step.norm().max(1e-300)).min(1.0);
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = z
                .iter()
                .zip(step.iter())
                .map(|(a, s)| a + lambda * s)
                .collect();
            if let Ok((_, gt)) = gamma_value_gradient(&trial, v, j, p) {
                if gt.norm() < gn {
                    z = trial;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return None;
        }
        let margin = 0.05 * diam;
        let outside = z
            .iter()
            .zip(region.lo.iter().zip(&region.hi))
            .any(|(x, (a, b))| *x < a - margin || *x > b + margin);
        if outside {
            return None;
        }
    }
    None
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn unflatten(mut flat: usize, n: usize, dim: usize) -> Vec<usize> {
    (0..dim)
        .map(|_| {
            let k = flat % n;
            flat /= n;
            k
        })
        .collect()
}

fn flatten(idx: &[usize], n: usize) -> usize {
    idx.iter().rev().fold(0, |acc, &k| acc * n + k)
}

fn neighbours(idx: &[usize], n: usize) -> Vec<Vec<usize>> {
    let dim = idx.len();
    let mut out = Vec::new();
    for code in 0..3usize.pow(dim as u32) {
        let mut c = code;
        let mut nb = Vec::with_capacity(dim);
        let mut centre = true;
        let mut valid = true;
        for &k in idx {
            let off = (c % 3) as isize - 1;
            c /= 3;
            if off != 0 {
                centre = false;
            }
            let m = k as isize + off;
            if m < 0 || m >= n as isize {
                valid = false;
            }
            nb.push(m as usize);
        }
        if valid && !centre {
            out.push(nb);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Diagonalising transform
// ---------------------------------------------------------------------------

/// `T` with `T^t J T = I`, taken as `L^{-t}` for the Cholesky factor `J = L L^t`.
#[derive(Debug, Clone)]
pub struct Transform {
    pub matrix: DMatrix<f64>,
    pub source: Option<Vec<f64>>,
    /// `det T = det(J)^(-1/2)`.
    pub determinant: f64,
}

impl Transform {
    /// `|T^t y|`, the anisotropic radius `sqrt(y^t J^{-1} y)`.
    pub fn radius(&self, y: &[f64]) -> f64 {
        let n = y.len();
        let mut s = 0.0;
        for c in 0..n {
            let mut acc = 0.0;
            for r in 0..n {
                acc += self.matrix[(r, c)] * y[r];
            }
            s += acc * acc;
        }
        s.sqrt()
    }
}

/// Cholesky-based diagonalising transform of a symmetric positive-definite matrix.
pub fn diagonalizing_transform(j: &DMatrix<f64>) -> Result<Transform> {
    let n = j.nrows();
    if j.ncols() != n {
        return Err(Error::InvalidInput("matrix must be square".into()));
    }
    if (j - j.transpose()).amax() > 1e-14 * j.amax().max(1.0) {
        return Err(Error::domain("J", "matrix is not symmetric"));
    }
    // explicit factorisation so the failing pivot can be reported
    let mut l = DMatrix::<f64>::zeros(n, n);
    for c in 0..n {
        let mut d = j[(c, c)];
        for k in 0..c {
            d -= l[(c, k)] * l[(c, k)];
        }
        if !(d > 0.0) {
            return Err(Error::Ellipticity {
                column: c,
                pivot: d,
            });
        }
        let lcc = d.sqrt();
        l[(c, c)] = lcc;
        for r in (c + 1)..n {
            let mut s = j[(r, c)];
            for k in 0..c {
                s -= l[(r, k)] * l[(c, k)];
            }
            l[(r, c)] = s / lcc;
        }
    }
    // T = L^{-t}: solve L^t T = I (upper-triangular back substitution)
    let lt = l.transpose();
    let mut t = DMatrix::<f64>::zeros(n, n);
    for col in 0..n {
        for r in (0..n).rev() {
            let mut s = if r == col { 1.0 } else { 0.0 };
            for k in (r + 1)..n {
                s -= lt[(r, k)] * t[(k, col)];
            }
            t[(r, col)] = s / lt[(r, r)];
        }
    }
    let determinant = 1.0 / (0..n).map(|i| l[(i, i)]).product::<f64>();
    Ok(Transform {
        matrix: t,
        source: None,
        determinant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag(d: &[f64]) -> ConstantDiffusion {
        ConstantDiffusion::diagonal(d)
    }

    #[test]
    fn gamma_unit_fields() {
        for n in 1..=3 {
            let s = gamma_eval(
                &vec![0.3; n],
                &ConstantPotential { value: 1.0 },
                &ConstantDiffusion::identity(n),
                n,
                2.0,
            )
            .unwrap();
            assert_relative_eq!(s.value, 1.0, epsilon = 1e-15);
            assert!(s.gradient.iter().all(|g| g.abs() < 1e-15));
            assert_eq!(s.classification, Classification::Degenerate);
        }
    }

    #[test]
    fn gamma_power_of_potential() {
        let s = gamma_eval(
            &[0.0; 3],
            &ConstantPotential { value: 4.0 },
            &ConstantDiffusion::identity(3),
            3,
            3.0,
        )
        .unwrap();
        assert_relative_eq!(gamma_exponent(3, 3.0), 0.5);
        assert_relative_eq!(s.value, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn gamma_determinant_factor() {
        let s = gamma_eval(
            &[0.0; 3],
            &ConstantPotential { value: 1.0 },
            &diag(&[4.0, 1.0, 1.0]),
            3,
            3.0,
        )
        .unwrap();
        assert_relative_eq!(s.value, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn gamma_rejects_bad_fields() {
        let err = gamma_eval(
            &[0.0],
            &ConstantPotential { value: -1.0 },
            &ConstantDiffusion::identity(1),
            1,
            3.0,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::Domain {
                assumption: "V",
                ..
            }
        ));
        let err = gamma_eval(
            &[0.0, 0.0],
            &ConstantPotential { value: 1.0 },
            &diag(&[1.0, -1.0]),
            2,
            3.0,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::Domain {
                assumption: "J",
                ..
            }
        ));
        assert!(check_exponent(3, 5.0).is_err());
        assert!(check_exponent(3, 4.9).is_ok());
    }

    #[test]
    fn gradient_matches_differences_at_second_order() {
        let v = GaussianWells {
            base: 2.0,
            wells: vec![GaussianWell {
                center: vec![0.4, -0.2],
                depth: 0.8,
                width: 0.7,
            }],
        };
        let j = DiagonalQuadratic {
            base: vec![1.0, 0.5],
            quad: vec![vec![0.25, 0.1], vec![0.0, 0.3]],
        };
        let z = [0.3, 0.55];
        let (_, g) = gamma_value_gradient(&z, &v, &j, 3.0).unwrap();
        let mut errs = Vec::new();
        for &h in &[1e-2, 5e-3, 2.5e-3] {
            let mut e = 0.0_f64;
            for i in 0..2 {
                let mut zp = z;
                let mut zm = z;
                zp[i] += h;
                zm[i] -= h;
                let fd = (gamma_value_gradient(&zp, &v, &j, 3.0).unwrap().0
                    - gamma_value_gradient(&zm, &v, &j, 3.0).unwrap().0)
                    / (2.0 * h);
                e = e.max((fd - g[i]).abs());
            }
            errs.push(e);
        }
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!(order1 > 1.8 && order2 > 1.8, "{errs:?}");
    }

    #[test]
    fn scaling_covariance() {
        let v = QuadraticWell::new(0.5, vec![0.0, 0.0]);
        let base = DiagonalQuadratic {
            base: vec![1.0, 2.0],
            quad: vec![vec![0.25, 0.0], vec![0.0, 0.0]],
        };
        let c = 3.0;
        let scaled = DiagonalQuadratic {
            base: base.base.iter().map(|b| b * c).collect(),
            quad: base
                .quad
                .iter()
                .map(|r| r.iter().map(|q| q * c).collect())
                .collect(),
        };
        let z = [0.7, -0.4];
        let g1 = gamma_value_gradient(&z, &v, &base, 3.0).unwrap().0;
        let g2 = gamma_value_gradient(&z, &v, &scaled, 3.0).unwrap().0;
        assert_relative_eq!(g2, g1 * c.powf(1.0), max_relative = 1e-13);
        let t1 = diagonalizing_transform(&base.value(&z)).unwrap();
        let t2 = diagonalizing_transform(&scaled.value(&z)).unwrap();
        assert!((t2.matrix - t1.matrix / c.sqrt()).amax() < 1e-14);
    }

    #[test]
    fn single_minimum_of_quadratic_well() {
        let v = QuadraticWell::new(1.0, vec![0.0, 0.0]);
        let j = ConstantDiffusion::identity(2);
        let pts =
            find_gamma_critical_points(&BoxRegion::cube(2, 1.0), 9, 1e-10, &v, &j, 3.0).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].classification, Classification::Min);
        assert!(pts[0].point.iter().all(|x| x.abs() < 1e-8));
    }

    #[test]
    fn flat_landscape_is_degenerate() {
        let v = ConstantPotential { value: 1.0 };
        let j = ConstantDiffusion::identity(2);
        let pts =
            find_gamma_critical_points(&BoxRegion::cube(2, 1.0), 4, 1e-8, &v, &j, 3.0).unwrap();
        assert!(!pts.is_empty());
        assert!(is_degenerate_landscape(&pts));
    }

    #[test]
    fn transform_identity_and_diagonal() {
        let t = diagonalizing_transform(&DMatrix::identity(3, 3)).unwrap();
        assert!((t.matrix.clone() - DMatrix::identity(3, 3)).amax() < 1e-15);
        let t =
            diagonalizing_transform(&DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0])))
                .unwrap();
        assert_relative_eq!(t.matrix[(0, 0)], 0.5);
        assert_relative_eq!(t.matrix[(1, 1)], 1.0);
        assert_relative_eq!(t.determinant, 0.5);
    }

    #[test]
    fn transform_full_matrix() {
        let j = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let t = diagonalizing_transform(&j).unwrap();
        let prod = t.matrix.transpose() * &j * &t.matrix;
        assert!((prod - DMatrix::identity(2, 2)).amax() <= 1e-12);
        assert_relative_eq!(t.determinant, 3.0_f64.powf(-0.5), max_relative = 1e-12);
        assert_relative_eq!(t.matrix.determinant(), t.determinant, max_relative = 1e-12);
        // the radius is the J^{-1} quadratic form whatever T is chosen
        let y = [0.3, -1.1];
        let jinv = j.clone().try_inverse().unwrap();
        let q = (jinv[(0, 0)] * y[0] * y[0]
            + 2.0 * jinv[(0, 1)] * y[0] * y[1]
            + jinv[(1, 1)] * y[1] * y[1])
            .sqrt();
        assert_relative_eq!(t.radius(&y), q, max_relative = 1e-13);
    }

    #[test]
    fn transform_rejects_indefinite() {
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            diagonalizing_transform(&j),
            Err(Error::Ellipticity { column: 1, .. })
        ));
    }

    #[test]
    fn transform_is_locally_lipschitz() {
        let j = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0]);
        let t0 = diagonalizing_transform(&j).unwrap();
        let nu = symmetric_eigenvalues(&j)[0];
        let dir = DMatrix::from_row_slice(3, 3, &[0.5, -0.2, 0.3, -0.2, 0.1, 0.4, 0.3, 0.4, -0.6]);
        let mut ratio: f64 = 0.0;
        for k in 1..=8 {
            let delta = nu / 2.0 / 2f64.powi(k);
            let jp = &j + &dir * (delta / dir.amax());
            let t = diagonalizing_transform(&jp).unwrap();
            ratio = ratio.max((t.matrix - &t0.matrix).amax() / delta);
        }
        assert!(ratio < 10.0, "Lipschitz ratio {ratio}");
    }

    #[test]
    fn ellipticity_bound_on_families() {
        let j = DiagonalQuadratic {
            base: vec![1.0, 0.5],
            quad: vec![vec![0.25, 0.0], vec![0.1, 0.2]],
        };
        let nu = j.ellipticity();
        for k in 0..50 {
            let z = [(k as f64 * 0.37).sin() * 3.0, (k as f64 * 0.11).cos() * 2.0];
            let m = j.value(&z);
            assert_eq!(m, m.transpose());
            assert!(symmetric_eigenvalues(&m)[0] >= nu);
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn spd(entries: &[f64], n: usize) -> DMatrix<f64> {
            let b = DMatrix::from_row_slice(n, n, &entries[..n * n]);
            &b * b.transpose() + DMatrix::identity(n, n) * 0.5
        }

        proptest! {
            #[test]
            fn transform_whitens(entries in prop::collection::vec(-2.0f64..2.0, 9), n in 1usize..=3) {
                let j = spd(&entries, n);
                let t = diagonalizing_transform(&j).unwrap();
                let w = t.matrix.transpose() * &j * &t.matrix;
                prop_assert!((w - DMatrix::identity(n, n)).amax() < 1e-10);
                prop_assert!((t.determinant - 1.0 / j.determinant().sqrt()).abs() < 1e-10 * t.determinant.abs());
            }

            #[test]
            fn gamma_gradient_matches_differences(
                z in prop::collection::vec(-2.0f64..2.0, 2),
                curvature in 0.1f64..1.0,
                quad in 0.0f64..0.5,
            ) {
                let v = QuadraticWell { base: 1.0, curvature, center: vec![0.3, -0.2] };
                let j = DiagonalQuadratic { base: vec![1.0, 1.0], quad: vec![vec![quad, 0.0], vec![0.0, quad]] };
                let (_, g) = gamma_value_gradient(&z, &v, &j, 3.0).unwrap();
                let h = 1e-5;
                for i in 0..2 {
                    let mut a = z.clone();
                    let mut b = z.clone();
                    a[i] += h;
                    b[i] -= h;
                    let fd = (gamma_value_gradient(&a, &v, &j, 3.0).unwrap().0
                        - gamma_value_gradient(&b, &v, &j, 3.0).unwrap().0)
                        / (2.0 * h);
                    prop_assert!((fd - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()), "{fd} vs {}", g[i]);
                }
            }
        }
    }
}
