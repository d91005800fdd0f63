//! Radial ground state of `-Delta U + U = U^p`, the rescaled profiles
//! `alpha U(beta |T^t (x - xi)|)` built from it, and the closed-form ground energy.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::fields::{
    check_exponent, diagonalizing_transform, gamma_value_gradient, DiffusionField, PotentialField,
    Transform,
};
use crate::{Error, Result};

/// Knobs of the shooting solver.
#[derive(Debug, Clone, Copy)]
pub struct ShootingOptions {
    pub r_max: f64,
    /// Number of RK4 steps on `[0, r_max]` (even, for Simpson).
    pub steps: usize,
    /// Relative spread of the final bracket beyond which the trajectory is replaced by the tail.
    pub splice_tol: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            r_max: 20.0,
            steps: 1000,
            splice_tol: 1e-7,
        }
    }
}

/// Radial ground state sampled on a uniform radius grid.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub dim: usize,
    pub p: f64,
    pub h: f64,
    pub r_max: f64,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    /// `U(0)`.
    pub u0: f64,
    /// `int_{R^N} U^{p+1}`.
    pub c0: f64,
    /// Radius where the exponential tail takes over.
    pub splice_radius: f64,
    tail_coefficient: f64,
}

/// Area of the unit sphere in `R^N` for `N = 1, 2, 3`.
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => {
            // 2 pi^{N/2} / Gamma(N/2) by recursion on N
            let mut s = 4.0 * std::f64::consts::PI;
            for n in 4..=dim {
                s *= 2.0 * std::f64::consts::PI / (n as f64 - 2.0);
            }
            s
        }
    }
}

fn rhs(dim: usize, p: f64, r: f64, u: f64, du: f64, u0: f64) -> (f64, f64) {
    let g = u - u.max(0.0).powf(p);
    if r == 0.0 {
        (du, (u0 - u0.powf(p)) / dim as f64)
    } else {
        (du, g - (dim as f64 - 1.0) / r * du)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    Overshoot,
    Undershoot,
}

struct Trajectory {
    u: Vec<f64>,
    du: Vec<f64>,
    outcome: Outcome,
    /// Index of the first sample past the event, or `len` when none occurred.
    event: usize,
}

fn shoot(dim: usize, p: f64, u0: f64, h: f64, steps: usize) -> Trajectory {
    let mut u = Vec::with_capacity(steps + 1);
    let mut du = Vec::with_capacity(steps + 1);
    u.push(u0);
    du.push(0.0);
    // series start: U = U0 + A r^2 + B r^4
    let n = dim as f64;
    let g0 = u0 - u0.powf(p);
    let dg0 = 1.0 - p * u0.powf(p - 1.0);
    let a = g0 / (2.0 * n);
    let b = dg0 * a / (4.0 * n + 8.0);
    u.push(u0 + a * h * h + b * h.powi(4));
    du.push(2.0 * a * h + 4.0 * b * h.powi(3));
    let mut event = steps + 1;
    let mut outcome = Outcome::Undershoot;
    for k in 1..steps {
        let r = k as f64 * h;
        let (y, z) = (u[k], du[k]);
        let (k1y, k1z) = rhs(dim, p, r, y, z, u0);
        let (k2y, k2z) = rhs(
            dim,
            p,
            r + 0.5 * h,
            y + 0.5 * h * k1y,
            z + 0.5 * h * k1z,
            u0,
        );
        let (k3y, k3z) = rhs(
            dim,
            p,
            r + 0.5 * h,
            y + 0.5 * h * k2y,
            z + 0.5 * h * k2z,
            u0,
        );
        let (k4y, k4z) = rhs(dim, p, r + h, y + h * k3y, z + h * k3z, u0);
        let yn = y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        let zn = z + h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
        u.push(yn);
        du.push(zn);
        if event > steps {
            if yn < 0.0 {
                event = k + 1;
                outcome = Outcome::Overshoot;
                break;
            }
            if zn > 0.0 {
                event = k + 1;
                outcome = Outcome::Undershoot;
                break;
            }
        }
    }
    Trajectory {
        u,
        du,
        outcome,
        event,
    }
}

fn tail_shape(dim: usize, r: f64) -> (f64, f64) {
    // r^{-(N-1)/2} e^{-r} (1 + a1/r + a2/r^2) and its logarithmic derivative
    let nu = (dim as f64 - 2.0) / 2.0;
    let mu = 4.0 * nu * nu;
    let a1 = (mu - 1.0) / 8.0;
    let a2 = (mu - 1.0) * (mu - 9.0) / 128.0;
    let m = (dim as f64 - 1.0) / 2.0;
    let s = 1.0 + a1 / r + a2 / (r * r);
    let ds = -a1 / (r * r) - 2.0 * a2 / (r * r * r);
    let val = r.powf(-m) * (-r).exp() * s;
    (val, -m / r - 1.0 + ds / s)
}

/// Shooting with bisection on `U(0)` in `[1, 10]` until the bracket is below `tol`.
pub fn solve_radial_ground_state(dim: usize, p: f64, tol: f64) -> Result<RadialProfile> {
    solve_radial_ground_state_with(dim, p, tol, ShootingOptions::default())
}

pub fn solve_radial_ground_state_with(
    dim: usize,
    p: f64,
    tol: f64,
    opts: ShootingOptions,
) -> Result<RadialProfile> {
    if dim == 0 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    check_exponent(dim, p)?;
    if !(tol > 0.0) || opts.steps < 10 || opts.steps % 2 != 0 || !(opts.r_max > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bad shooting options (tol={tol}, steps={}, r_max={})",
            opts.steps, opts.r_max
        )));
    }
    let h = opts.r_max / opts.steps as f64;
    let (mut lo, mut hi) = (1.0_f64, 10.0_f64);
    if shoot(dim, p, hi, h, opts.steps).outcome != Outcome::Overshoot {
        return Err(Error::Shooting(format!(
            "no overshoot at U(0)={hi} for N={dim}, p={p}"
        )));
    }
    // U(0)=1 is the constant solution; nudge above it to see the undershoot branch
    lo += 1e-12;
    if shoot(dim, p, lo, h, opts.steps).outcome != Outcome::Undershoot {
        return Err(Error::Shooting(format!(
            "no undershoot at U(0)={lo} for N={dim}, p={p}"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match shoot(dim, p, mid, h, opts.steps).outcome {
            Outcome::Overshoot => hi = mid,
            Outcome::Undershoot => lo = mid,
        }
    }
    let tl = shoot(dim, p, lo, h, opts.steps);
    let th = shoot(dim, p, hi, h, opts.steps);
    let u0 = 0.5 * (lo + hi);
    let mid = shoot(dim, p, u0, h, opts.steps);

    let reliable = tl.event.min(th.event).min(mid.event).min(opts.steps + 1);
    let mut splice = reliable.saturating_sub(1);
    for k in 1..reliable {
        let spread = (th.u[k] - tl.u[k]).abs();
        if spread > opts.splice_tol * mid.u[k].abs() || mid.du[k] >= 0.0 {
            splice = k - 1;
            break;
        }
    }
    // keep a few steps of margin from the divergence point
    splice = splice.saturating_sub(5);
    let r_splice = splice as f64 * h;
    if r_splice < 3.0 {
        return Err(Error::Shooting(format!(
            "trajectory unreliable beyond r={r_splice:.3}; tail does not decay (reduce the step)"
        )));
    }
    let (shape, _) = tail_shape(dim, r_splice);
    let c = mid.u[splice] / shape;

    let mut u = mid.u[..=splice].to_vec();
    let mut du = mid.du[..=splice].to_vec();
    for k in (splice + 1)..=opts.steps {
        let r = k as f64 * h;
        let (shape, logd) = tail_shape(dim, r);
        u.push(c * shape);
        du.push(c * shape * logd);
    }
    if !(u[opts.steps] < 1e-8 * u0) {
        return Err(Error::Shooting(format!(
            "tail not decaying: U(r_max)={:e}",
            u[opts.steps]
        )));
    }

    // Simpson on omega * U^{p+1} r^{N-1}
    let f = |k: usize| u[k].max(0.0).powf(p + 1.0) * (k as f64 * h).powi(dim as i32 - 1);
    let mut s = f(0) + f(opts.steps);
    for k in 1..opts.steps {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k);
    }
    let c0 = sphere_area(dim) * s * h / 3.0;

    Ok(RadialProfile {
        dim,
        p,
        h,
        r_max: opts.r_max,
        u,
        du,
        u0,
        c0,
        splice_radius: r_splice,
        tail_coefficient: c,
    })
}

impl RadialProfile {
    /// `C1 = C0 (1/2 - 1/(p+1))`.
    pub fn c1(&self) -> f64 {
        self.c0 * (0.5 - 1.0 / (self.p + 1.0))
    }

    /// `U''(0) = (U0 - U0^p)/N`.
    pub fn curvature_at_origin(&self) -> f64 {
        (self.u0 - self.u0.powf(self.p)) / self.dim as f64
    }

    pub fn radii(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.u.len()).map(move |k| k as f64 * self.h)
    }

    fn locate(&self, r: f64) -> Option<(usize, f64)> {
        let r = r.abs();
        if r >= self.r_max {
            return None;
        }
        let k = ((r / self.h) as usize).min(self.u.len() - 2);
        Some((k, r / self.h - k as f64))
    }

    /// `U(r)`, cubic Hermite between samples, exponential tail past `r_max`.
    pub fn value(&self, r: f64) -> f64 {
        match self.locate(r) {
            Some((k, t)) => {
                let h = self.h;
                let (y0, y1, d0, d1) = (self.u[k], self.u[k + 1], self.du[k], self.du[k + 1]);
                let t2 = t * t;
                let t3 = t2 * t;
                (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                    + (t3 - 2.0 * t2 + t) * h * d0
                    + (-2.0 * t3 + 3.0 * t2) * y1
                    + (t3 - t2) * h * d1
            }
            None => self.tail_coefficient * tail_shape(self.dim, r.abs()).0,
        }
    }

    /// `U'(r)`, derivative of the Hermite interpolant.
    pub fn derivative(&self, r: f64) -> f64 {
        match self.locate(r) {
            Some((k, t)) => {
                let h = self.h;
                let (y0, y1, d0, d1) = (self.u[k], self.u[k + 1], self.du[k], self.du[k + 1]);
                let t2 = t * t;
                ((6.0 * t2 - 6.0 * t) * y0 + (-6.0 * t2 + 6.0 * t) * y1) / h
                    + (3.0 * t2 - 4.0 * t + 1.0) * d0
                    + (3.0 * t2 - 2.0 * t) * d1
            }
            None => {
                let (shape, logd) = tail_shape(self.dim, r.abs());
                self.tail_coefficient * shape * logd
            }
        }
    }

    /// `U'(r)/r`, continuous at the origin.
    pub fn derivative_over_r(&self, r: f64) -> f64 {
        let r = r.abs();
        if r < 0.5 * self.h {
            // U'(r)/r = U''(0) + O(r^2)
            let u2 = self.curvature_at_origin();
            let g = 1.0 - self.p * self.u0.powf(self.p - 1.0);
            let b = g * u2 / (2.0 * (4.0 * self.dim as f64 + 8.0));
            u2 + 4.0 * b * r * r
        } else {
            self.derivative(r) / r
        }
    }

    /// Max-norm residual of the radial ODE at interior samples, using centred
    /// second differences of `U` and the stored `U'`.
    pub fn ode_residual(&self) -> f64 {
        let n = self.dim as f64;
        let mut worst = 0.0_f64;
        for k in 1..self.u.len() - 1 {
            let r = k as f64 * self.h;
            let d2 = (self.u[k + 1] - 2.0 * self.u[k] + self.u[k - 1]) / (self.h * self.h);
            let res = d2 + (n - 1.0) / r * self.du[k] - self.u[k] + self.u[k].max(0.0).powf(self.p);
            worst = worst.max(res.abs());
        }
        worst
    }

    /// Writes the two-column `(r, U)` file with its `# N p U0 C0 rmax hr` header.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# N p U0 C0 rmax hr")?;
        writeln!(
            w,
            "# {} {:e} {:.17e} {:.17e} {:e} {:e}",
            self.dim, self.p, self.u0, self.c0, self.r_max, self.h
        )?;
        for (k, u) in self.u.iter().enumerate() {
            writeln!(w, "{:.10e} {:.17e}", k as f64 * self.h, u)?;
        }
        Ok(())
    }

    /// Reads the header values back from a profile file.
    pub fn read_header(path: &Path) -> Result<ProfileHeader> {
        let f = BufReader::new(std::fs::File::open(path)?);
        let mut lines = f.lines();
        // Leading comment lines (such as a configuration header) are skipped.
        loop {
            match lines.next().transpose()? {
                Some(l) if l.trim() == "# N p U0 C0 rmax hr" => break,
                Some(l) if l.starts_with('#') => continue,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "unexpected profile header: {}",
                        other.unwrap_or_default()
                    )))
                }
            }
        }
        let second = lines.next().transpose()?.unwrap_or_default();
        let vals: Vec<&str> = second.trim_start_matches('#').split_whitespace().collect();
        let num = |i: usize| -> Result<f64> {
            vals.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::InvalidInput(format!("bad profile header line: {second}")))
        };
        Ok(ProfileHeader {
            dim: num(0)? as usize,
            p: num(1)?,
            u0: num(2)?,
            c0: num(3)?,
            r_max: num(4)?,
            h: num(5)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileHeader {
    pub dim: usize,
    pub p: f64,
    pub u0: f64,
    pub c0: f64,
    pub r_max: f64,
    pub h: f64,
}

/// `Sigma(z) = C1 Gamma(z)`.
pub fn sigma_closed_form(
    z: &[f64],
    profile: &RadialProfile,
    v: &dyn PotentialField,
    j: &dyn DiffusionField,
) -> Result<f64> {
    if z.len() != profile.dim {
        return Err(Error::InvalidInput(format!(
            "point has dimension {} but the profile has N={}",
            z.len(),
            profile.dim
        )));
    }
    let (gamma, _) = gamma_value_gradient(z, v, j, profile.p)?;
    Ok(profile.c1() * gamma)
}

/// `x -> alpha U(beta sqrt((x - xi)^t J^{-1} (x - xi)))` with coefficients frozen at `eps * xi`.
#[derive(Debug, Clone)]
pub struct ScaledProfile {
    pub xi: Vec<f64>,
    pub eps: f64,
    pub alpha: f64,
    pub beta: f64,
    pub transform: Transform,
    pub profile: Arc<RadialProfile>,
    jinv: DMatrix<f64>,
    /// `d(alpha)/d(xi_i)`, `d(beta)/d(xi_i)` and `d(J^{-1})/d(xi_i)`.
    dalpha: Vec<f64>,
    dbeta: Vec<f64>,
    djinv: Vec<DMatrix<f64>>,
}

pub fn scaled_profile(
    xi: &[f64],
    eps: f64,
    profile: Arc<RadialProfile>,
    v: &dyn PotentialField,
    j: &dyn DiffusionField,
) -> Result<ScaledProfile> {
    let n = profile.dim;
    if xi.len() != n {
        return Err(Error::InvalidInput(format!(
            "centre has dimension {} but the profile has N={n}",
            xi.len()
        )));
    }
    let z: Vec<f64> = xi.iter().map(|x| eps * x).collect();
    crate::fields::check_assumptions(v, j, &z)?;
    let vz = v.value(&z);
    let gv = v.gradient(&z);
    let jz = j.value(&z);
    let mut transform = diagonalizing_transform(&jz)?;
    transform.source = Some(z.clone());
    let jinv = &transform.matrix * transform.matrix.transpose();
    let p = profile.p;
    let alpha = vz.powf(1.0 / (p - 1.0));
    let beta = vz.sqrt();
    let dalpha = (0..n)
        .map(|i| eps * alpha / (p - 1.0) * gv[i] / vz)
        .collect();
    let dbeta = (0..n).map(|i| eps * beta / 2.0 * gv[i] / vz).collect();
    let djinv = (0..n)
        .map(|i| -(&jinv * j.partial(&z, i) * &jinv) * eps)
        .collect();
    Ok(ScaledProfile {
        xi: xi.to_vec(),
        eps,
        alpha,
        beta,
        transform,
        profile,
        jinv,
        dalpha,
        dbeta,
        djinv,
    })
}

impl ScaledProfile {
    /// Same coefficients, centre moved to `center`.
    pub fn centered_at(&self, center: &[f64]) -> Self {
        let mut out = self.clone();
        out.xi = center.to_vec();
        out
    }

    fn offset(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(x.len(), x.iter().zip(&self.xi).map(|(a, b)| a - b))
    }

    /// Anisotropic radius `beta |T^t (x - xi)|`.
    pub fn radius(&self, x: &[f64]) -> f64 {
        let y = self.offset(x);
        self.beta * y.dot(&(&self.jinv * &y)).max(0.0).sqrt()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.alpha * self.profile.value(self.radius(x))
    }

    pub fn peak(&self) -> f64 {
        self.alpha * self.profile.u0
    }

    /// Gradient in `x`.
    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let y = self.offset(x);
        let s = self.radius(x);
        let w = self.alpha * self.beta * self.beta * self.profile.derivative_over_r(s);
        (&self.jinv * y) * w
    }

    /// Derivatives with respect to the centre `xi`, through `alpha`, `beta`, `J^{-1}`
    /// and the shift.
    pub fn xi_derivatives(&self, x: &[f64]) -> DVector<f64> {
        let n = x.len();
        let y = self.offset(x);
        let jy = &self.jinv * &y;
        let q = y.dot(&jy).max(0.0);
        let s = self.beta * q.sqrt();
        let u = self.profile.value(s);
        let uor = self.profile.derivative_over_r(s);
        let mut out = DVector::zeros(n);
        for i in 0..n {
            let dq = -2.0 * jy[i] + y.dot(&(&self.djinv[i] * &y));
            // d s = d(beta) sqrt(q) + beta dq / (2 sqrt q); multiply by U'(s) = s * uor
            let ds_times_du =
                uor * (self.dbeta[i] * self.beta * q + 0.5 * self.beta * self.beta * dq);
            out[i] = self.dalpha[i] * u + self.alpha * ds_times_du;
        }
        out
    }
}
