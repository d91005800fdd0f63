//! Tensor grids with homogeneous Dirichlet data and the discrete energies on them.
//!
//! The energy is assembled from multilinear (Q1) elements with a 2-point Gauss rule
//! per axis. Value, gradient and Hessian action all come from the same discrete sum,
//! so the gradient is the exact derivative of the value. Gradients and Hessian
//! actions are stored divided by the cell volume `h^N`: they are Riesz
//! representatives for the mesh inner product `h^N sum_i a_i b_i` and approximate
//! the pointwise Euler-Lagrange residual.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::fields::check_exponent;
use crate::linalg::{LinearOperator, SpectralPreconditioner};
use crate::penalty::penalized_terms;
use crate::problem::ProblemSpec;
use crate::region::BoxRegion;
use crate::{Error, Result};

/// Default cap on the estimated working set of one grid, in bytes.
pub const DEFAULT_MEMORY_CAP: usize = 4 << 30;

const GAUSS: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// Uniform grid on `center + [-L, L]^N` with `n` nodes per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
    pub center: Vec<f64>,
    pub h: f64,
}

pub fn build_grid(dim: usize, half_width: f64, n: usize) -> Result<GridDomain> {
    GridDomain::new(dim, half_width, n, vec![0.0; dim], DEFAULT_MEMORY_CAP)
}

impl GridDomain {
    pub fn new(
        dim: usize,
        half_width: f64,
        n: usize,
        center: Vec<f64>,
        cap: usize,
    ) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidInput(format!(
                "grid dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if n < 8 {
            return Err(Error::Size {
                nodes: n,
                bytes: 0,
                cap,
            });
        }
        if !(half_width > 0.0) || center.len() != dim {
            return Err(Error::InvalidInput(format!(
                "grid needs L>0 and a centre of dimension {dim}"
            )));
        }
        let nodes = n.checked_pow(dim as u32).unwrap_or(usize::MAX);
        let bytes = Self::estimate_bytes(dim, n);
        if bytes > cap {
            return Err(Error::Size { nodes, bytes, cap });
        }
        Ok(Self {
            dim,
            n,
            half_width,
            center,
            h: 2.0 * half_width / (n - 1) as f64,
        })
    }

    /// Working-set estimate: quadrature data plus a few dozen solver vectors.
    pub fn estimate_bytes(dim: usize, n: usize) -> usize {
        let nodes = n.saturating_pow(dim as u32);
        let qp = (n - 1).saturating_pow(dim as u32).saturating_mul(1 << dim);
        let per_qp = (dim * (dim + 1) / 2 + 3) * 8;
        nodes
            .saturating_mul(8 * 48)
            .saturating_add(qp.saturating_mul(per_qp))
    }

    /// Interior nodes per axis.
    pub fn m(&self) -> usize {
        self.n - 2
    }

    /// Number of interior unknowns.
    pub fn len(&self) -> usize {
        self.m().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cells(&self) -> usize {
        (self.n - 1).pow(self.dim as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Coordinate of node `k` (`0..n`, boundary included) along `axis`.
    pub fn coord(&self, axis: usize, k: usize) -> f64 {
        self.center[axis] - self.half_width + k as f64 * self.h
    }

    pub fn region(&self) -> BoxRegion {
        BoxRegion {
            lo: self.center.iter().map(|c| c - self.half_width).collect(),
            hi: self.center.iter().map(|c| c + self.half_width).collect(),
        }
    }

    /// Multi-index (interior numbering, `0..m`) of an unknown; axis 0 varies fastest.
    pub fn unflatten(&self, mut flat: usize) -> [usize; 3] {
        let m = self.m();
        let mut idx = [0usize; 3];
        for slot in idx.iter_mut().take(self.dim) {
            *slot = flat % m;
            flat /= m;
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        let m = self.m();
        idx.iter()
            .take(self.dim)
            .rev()
            .fold(0, |acc, &k| acc * m + k)
    }

    /// Coordinates of unknown `flat`.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let idx = self.unflatten(flat);
        (0..self.dim).map(|d| self.coord(d, idx[d] + 1)).collect()
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    pub fn zeros(&self) -> GridFunction {
        GridFunction {
            domain: self.clone(),
            values: vec![0.0; self.len()],
        }
    }

    /// Nodal interpolant of `f` (boundary values dropped).
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> GridFunction {
        GridFunction {
            domain: self.clone(),
            values: self.points().map(|x| f(&x)).collect(),
        }
    }

    /// Multilinear interpolation of interior values (zero on the boundary);
    /// `None` outside the box.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> Option<f64> {
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for d in 0..self.dim {
            let s = (x[d] - (self.center[d] - self.half_width)) / self.h;
            if !(s >= 0.0 && s <= (self.n - 1) as f64) {
                return None;
            }
            let k = (s.floor() as usize).min(self.n - 2);
            base[d] = k;
            frac[d] = s - k as f64;
        }
        let m = self.m();
        let mut acc = 0.0;
        for corner in 0..(1usize << self.dim) {
            let mut w = 1.0;
            let mut flat = 0;
            let mut stride = 1;
            let mut interior = true;
            for d in 0..self.dim {
                let b = (corner >> d) & 1;
                let k = base[d] + b;
                w *= if b == 1 { frac[d] } else { 1.0 - frac[d] };
                if k == 0 || k == self.n - 1 {
                    interior = false;
                } else {
                    flat += (k - 1) * stride;
                }
                stride *= m;
            }
            if interior && w != 0.0 {
                acc += w * values[flat];
            }
        }
        Some(acc)
    }

    /// True when every node within `layers` of the boundary has `|u| <= tol`.
    pub fn boundary_layer_max(&self, values: &[f64], layers: usize) -> f64 {
        let m = self.m();
        let mut worst = 0.0_f64;
        for (flat, v) in values.iter().enumerate() {
            let idx = self.unflatten(flat);
            if (0..self.dim).any(|d| idx[d] < layers || idx[d] + layers >= m) {
                worst = worst.max(v.abs());
            }
        }
        worst
    }
}

/// Interior nodal values on a grid; boundary values are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub domain: GridDomain,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(domain: GridDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} values, got {}",
                domain.len(),
                values.len()
            )));
        }
        Ok(Self { domain, values })
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(h^N sum u_i^2)^{1/2}`.
    pub fn mesh_norm(&self) -> f64 {
        (self.domain.cell_volume() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn sidecar(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".meta");
        PathBuf::from(s)
    }

    /// Flat little-endian `f64` array of interior values plus a `.meta` sidecar.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for v in &self.values {
            f.write_all(&v.to_le_bytes())?;
        }
        f.flush()?;
        let d = &self.domain;
        let center: Vec<String> = d.center.iter().map(|c| format!("{c:e}")).collect();
        std::fs::write(
            Self::sidecar(path),
            format!(
                "N={} n={} L={:e} ordering=lex center={}\n",
                d.dim,
                d.n,
                d.half_width,
                center.join(",")
            ),
        )?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let meta = std::fs::read_to_string(Self::sidecar(path))?;
        let mut dim = None;
        let mut n = None;
        let mut l = None;
        let mut center = None;
        for tok in meta.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("bad sidecar token {tok}")))?;
            let bad = || Error::InvalidInput(format!("bad sidecar value {tok}"));
            match k {
                "N" => dim = Some(v.parse::<usize>().map_err(|_| bad())?),
                "n" => n = Some(v.parse::<usize>().map_err(|_| bad())?),
                "L" => l = Some(v.parse::<f64>().map_err(|_| bad())?),
                "ordering" if v == "lex" => {}
                "center" => {
                    center = Some(
                        v.split(',')
                            .map(|c| c.parse::<f64>().map_err(|_| bad()))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                _ => return Err(bad()),
            }
        }
        let missing = || Error::InvalidInput("sidecar lacks N, n or L".into());
        let dim = dim.ok_or_else(missing)?;
        let domain = GridDomain::new(
            dim,
            l.ok_or_else(missing)?,
            n.ok_or_else(missing)?,
            center.unwrap_or_else(|| vec![0.0; dim]),
            usize::MAX,
        )?;
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * domain.len() {
            return Err(Error::InvalidInput(format!(
                "binary file has {} bytes, expected {}",
                bytes.len(),
                8 * domain.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { domain, values })
    }

    /// CSV with one row per node (boundary included): `x[,y],u`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let d = &self.domain;
        if d.dim > 2 {
            return Err(Error::InvalidInput(
                "CSV export supports N <= 2 only".into(),
            ));
        }
        let mut wr = csv::Writer::from_writer(w);
        let map = |e: csv::Error| Error::Io(std::io::Error::other(e));
        let header: Vec<&str> = if d.dim == 1 {
            vec!["x", "u"]
        } else {
            vec!["x", "y", "u"]
        };
        wr.write_record(&header).map_err(map)?;
        let n = d.n;
        let total = n.pow(d.dim as u32);
        for flat in 0..total {
            let k = [flat % n, flat / n];
            let interior = (0..d.dim).all(|a| k[a] > 0 && k[a] < n - 1);
            let u = if interior {
                let idx: Vec<usize> = (0..d.dim).map(|a| k[a] - 1).collect();
                self.values[d.flatten(&idx)]
            } else {
                0.0
            };
            let mut rec: Vec<String> = (0..d.dim)
                .map(|a| format!("{:.10e}", d.coord(a, k[a])))
                .collect();
            rec.push(format!("{u:.15e}"));
            wr.write_record(&rec).map_err(map)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Which energy to assemble.
#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    /// `eps^2 J(x)`, `V(x)` and `F(u) = (u+)^{p+1}/(p+1)`.
    Raw,
    /// Coefficients frozen at `z`, `eps` taken as 1.
    Frozen(Vec<f64>),
    /// Raw coefficients with the penalised primitive `G(x, u)`.
    Penalized,
    /// Coefficients `J(eps x)`, `V(eps x)` after the change of variables `x -> eps x`.
    Rescaled,
}

#[derive(Debug, Clone)]
enum Nonlinearity {
    None,
    Power,
    Penalized {
        inside: Vec<bool>,
        ell: f64,
        slope: f64,
    },
}

#[derive(Debug)]
struct Inner {
    domain: GridDomain,
    p: f64,
    corners: Vec<u32>,
    /// Shape values `phi[q * nc + a]` and gradients `dphi[(q * nc + a) * dim + d]`.
    phi: Vec<f64>,
    dphi: Vec<f64>,
    weight: f64,
    /// Packed symmetric diffusion per quadrature point (stride 0 if constant).
    jq: Vec<f64>,
    j_stride: usize,
    vq: Vec<f64>,
    v_stride: usize,
    nonlinearity: Nonlinearity,
    jmin: f64,
    jmax: f64,
    vmin: f64,
    vmax: f64,
}

const NO_NODE: u32 = u32::MAX;

fn packed_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

fn pack(dim: usize, m: &nalgebra::DMatrix<f64>) -> [f64; 6] {
    let mut out = [0.0; 6];
    let mut k = 0;
    for r in 0..dim {
        for c in r..dim {
            out[k] = m[(r, c)];
            k += 1;
        }
    }
    out
}

#[inline]
fn sym_apply(dim: usize, j: &[f64], g: &[f64; 3]) -> [f64; 3] {
    match dim {
        1 => [j[0] * g[0], 0.0, 0.0],
        2 => [j[0] * g[0] + j[1] * g[1], j[1] * g[0] + j[2] * g[1], 0.0],
        _ => [
            j[0] * g[0] + j[1] * g[1] + j[2] * g[2],
            j[1] * g[0] + j[3] * g[1] + j[4] * g[2],
            j[2] * g[0] + j[4] * g[1] + j[5] * g[2],
        ],
    }
}

fn positive_definite(dim: usize, j: &[f64]) -> bool {
    match dim {
        1 => j[0] > 0.0,
        2 => j[0] > 0.0 && j[0] * j[2] - j[1] * j[1] > 0.0,
        _ => {
            let m2 = j[0] * j[3] - j[1] * j[1];
            let det = j[0] * (j[3] * j[5] - j[4] * j[4]) - j[1] * (j[1] * j[5] - j[4] * j[2])
                + j[2] * (j[1] * j[4] - j[3] * j[2]);
            j[0] > 0.0 && m2 > 0.0 && det > 0.0
        }
    }
}

fn diag_range(dim: usize, j: &[f64]) -> (f64, f64) {
    let diag_idx: &[usize] = match dim {
        1 => &[0],
        2 => &[0, 2],
        _ => &[0, 3, 5],
    };
    diag_idx
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &i| {
            (lo.min(j[i]), hi.max(j[i]))
        })
}

/// The discrete energy `E(u) = sum_cells sum_q w [1/2 <J grad u, grad u> + 1/2 V u^2 - F(x, u)]`.
#[derive(Debug, Clone)]
pub struct DiscreteFunctional {
    inner: Arc<Inner>,
}

/// One quadrature point seen by [`DiscreteFunctional::for_each_quadrature_point`].
#[derive(Debug, Clone)]
pub struct QuadraturePoint {
    pub x: Vec<f64>,
    pub weight: f64,
    pub u: f64,
    /// Gradient of the interpolant (first `N` entries used).
    pub grad: [f64; 3],
    pub primitive: f64,
}

/// Value and mesh-Riesz gradient of the energy at one state.
#[derive(Debug, Clone)]
pub struct FunctionalEval {
    pub value: f64,
    pub gradient: GridFunction,
}

/// The functional plus the Hessian action at `u`.
pub fn functional_eval(
    u: &GridFunction,
    eps: f64,
    spec: &ProblemSpec,
    mode: &Mode,
) -> Result<(FunctionalEval, Linearization)> {
    let f = DiscreteFunctional::new(&u.domain, spec, eps, mode)?;
    let (value, gradient) = f.value_gradient(&u.values)?;
    let lin = f.linearize(&u.values);
    Ok((
        FunctionalEval {
            value,
            gradient: GridFunction {
                domain: u.domain.clone(),
                values: gradient,
            },
        },
        lin,
    ))
}

/// `(int |grad u|^2 + V u^2)^{1/2}` with the energy's quadrature.
pub fn hv_norm(u: &GridFunction, v: &dyn crate::fields::PotentialField) -> Result<f64> {
    let dim = u.domain.dim;
    let ident = nalgebra::DMatrix::identity(dim, dim);
    let f = DiscreteFunctional::from_coefficients(
        &u.domain,
        2.0,
        |_| Ok(ident.clone()),
        |x| Ok(v.value(x)),
        false,
        Nonlinearity::None,
    )?;
    Ok(f.quadratic(&u.values).max(0.0).sqrt())
}

impl DiscreteFunctional {
    pub fn new(domain: &GridDomain, spec: &ProblemSpec, eps: f64, mode: &Mode) -> Result<Self> {
        check_exponent(spec.dim, spec.p)?;
        if spec.dim != domain.dim {
            return Err(Error::InvalidInput(format!(
                "problem has N={} but the grid has N={}",
                spec.dim, domain.dim
            )));
        }
        if !(eps > 0.0) {
            return Err(Error::InvalidInput(format!(
                "eps must be positive, got {eps}"
            )));
        }
        let v = spec.v();
        let j = spec.j();
        let e2 = eps * eps;
        match mode {
            Mode::Raw => Self::from_coefficients(
                domain,
                spec.p,
                |x| Ok(j.value(x) * e2),
                |x| Ok(v.value(x)),
                j.is_constant(),
                Nonlinearity::Power,
            ),
            Mode::Rescaled => {
                let scaled = |x: &[f64]| x.iter().map(|c| c * eps).collect::<Vec<f64>>();
                Self::from_coefficients(
                    domain,
                    spec.p,
                    |x| Ok(j.value(&scaled(x))),
                    |x| Ok(v.value(&scaled(x))),
                    j.is_constant(),
                    Nonlinearity::Power,
                )
            }
            Mode::Frozen(z) => {
                if z.len() != spec.dim {
                    return Err(Error::InvalidInput(
                        "frozen point has the wrong dimension".into(),
                    ));
                }
                crate::fields::check_assumptions(v, j, z)?;
                let jz = j.value(z);
                let vz = v.value(z);
                Self::from_coefficients(
                    domain,
                    spec.p,
                    |_| Ok(jz.clone()),
                    |_| Ok(vz),
                    true,
                    Nonlinearity::Power,
                )
            }
            Mode::Penalized => {
                let cfg = spec.penalty.as_ref().ok_or_else(|| {
                    Error::Config("penalized mode requires a penalty configuration (lambda)".into())
                })?;
                if !cfg.region.strictly_inside(&domain.region()) {
                    return Err(Error::Config(format!(
                        "penalisation region {:?}..{:?} is not strictly inside the computational box",
                        cfg.region.lo, cfg.region.hi
                    )));
                }
                let dim = domain.dim;
                let inside = (0..domain.cells())
                    .map(|c| {
                        let mut rest = c;
                        let mid: Vec<f64> = (0..dim)
                            .map(|d| {
                                let k = rest % (domain.n - 1);
                                rest /= domain.n - 1;
                                domain.coord(d, k) + 0.5 * domain.h
                            })
                            .collect();
                        cfg.inside(&mid)
                    })
                    .collect();
                Self::from_coefficients(
                    domain,
                    spec.p,
                    |x| Ok(j.value(x) * e2),
                    |x| Ok(v.value(x)),
                    j.is_constant(),
                    Nonlinearity::Penalized {
                        inside,
                        ell: cfg.ell,
                        slope: cfg.slope(),
                    },
                )
            }
        }
    }

    /// Unit-coefficient form `int |grad u|^2 + u^2`, the H^1 Gram operator.
    pub fn h1_form(domain: &GridDomain) -> Self {
        let ident = nalgebra::DMatrix::identity(domain.dim, domain.dim);
        Self::from_coefficients(
            domain,
            2.0,
            |_| Ok(ident.clone()),
            |_| Ok(1.0),
            true,
            Nonlinearity::None,
        )
        .expect("unit coefficients are admissible")
    }

    fn from_coefficients<JF, VF>(
        domain: &GridDomain,
        p: f64,
        jfun: JF,
        vfun: VF,
        j_constant: bool,
        nonlinearity: Nonlinearity,
    ) -> Result<Self>
    where
        JF: Fn(&[f64]) -> Result<nalgebra::DMatrix<f64>>,
        VF: Fn(&[f64]) -> Result<f64>,
    {
        let dim = domain.dim;
        let nc = 1usize << dim;
        let nq = nc;
        let h = domain.h;
        let n = domain.n;
        let m = domain.m();
        let cells = domain.cells();
        let pl = packed_len(dim);

        let mut phi = vec![0.0; nq * nc];
        let mut dphi = vec![0.0; nq * nc * dim];
        for q in 0..nq {
            for a in 0..nc {
                let mut val = 1.0;
                for d in 0..dim {
                    let t = GAUSS[(q >> d) & 1];
                    val *= if (a >> d) & 1 == 1 { t } else { 1.0 - t };
                }
                phi[q * nc + a] = val;
                for d in 0..dim {
                    let mut g = if (a >> d) & 1 == 1 { 1.0 / h } else { -1.0 / h };
                    for e in 0..dim {
                        if e != d {
                            let t = GAUSS[(q >> e) & 1];
                            g *= if (a >> e) & 1 == 1 { t } else { 1.0 - t };
                        }
                    }
                    dphi[(q * nc + a) * dim + d] = g;
                }
            }
        }

        let mut corners = vec![NO_NODE; cells * nc];
        let mut cidx = [0usize; 3];
        for c in 0..cells {
            let mut rest = c;
            for slot in cidx.iter_mut().take(dim) {
                *slot = rest % (n - 1);
                rest /= n - 1;
            }
            for a in 0..nc {
                let mut flat = 0usize;
                let mut stride = 1usize;
                let mut interior = true;
                for d in 0..dim {
                    let k = cidx[d] + ((a >> d) & 1);
                    if k == 0 || k == n - 1 {
                        interior = false;
                        break;
                    }
                    flat += (k - 1) * stride;
                    stride *= m;
                }
                if interior {
                    corners[c * nc + a] = flat as u32;
                }
            }
        }

        // coefficients at the quadrature points
        let qpoint = |c: usize, q: usize| -> Vec<f64> {
            let mut rest = c;
            (0..dim)
                .map(|d| {
                    let k = rest % (n - 1);
                    rest /= n - 1;
                    domain.coord(d, k) + GAUSS[(q >> d) & 1] * h
                })
                .collect()
        };
        let check_j = |packed: &[f64], x: &[f64]| -> Result<()> {
            if positive_definite(dim, packed) {
                Ok(())
            } else {
                Err(Error::domain(
                    "J",
                    format!("J({x:?}) is not positive definite"),
                ))
            }
        };
        let (jq, j_stride) = if j_constant {
            let x = qpoint(0, 0);
            let pk = pack(dim, &jfun(&x)?);
            check_j(&pk[..pl], &x)?;
            (pk[..pl].to_vec(), 0)
        } else {
            let mut jq = Vec::with_capacity(cells * nq * pl);
            for c in 0..cells {
                for q in 0..nq {
                    let x = qpoint(c, q);
                    let pk = pack(dim, &jfun(&x)?);
                    check_j(&pk[..pl], &x)?;
                    jq.extend_from_slice(&pk[..pl]);
                }
            }
            (jq, pl)
        };
        let mut vq = Vec::with_capacity(cells * nq);
        for c in 0..cells {
            for q in 0..nq {
                let x = qpoint(c, q);
                let val = vfun(&x)?;
                if !(val > 0.0) {
                    return Err(Error::domain(
                        "V",
                        format!("V({x:?}) = {val} is not positive"),
                    ));
                }
                vq.push(val);
            }
        }
        let v_const = vq.iter().all(|v| *v == vq[0]);
        let (vq, v_stride) = if v_const { (vec![vq[0]], 0) } else { (vq, 1) };

        let (mut jmin, mut jmax) = (f64::INFINITY, 0.0_f64);
        for chunk in jq.chunks(pl) {
            let (lo, hi) = diag_range(dim, chunk);
            jmin = jmin.min(lo);
            jmax = jmax.max(hi);
        }
        let vmin = vq.iter().copied().fold(f64::INFINITY, f64::min);
        let vmax = vq.iter().copied().fold(0.0, f64::max);

        Ok(Self {
            inner: Arc::new(Inner {
                domain: domain.clone(),
                p,
                corners,
                phi,
                dphi,
                weight: domain.cell_volume() / nq as f64,
                jq,
                j_stride,
                vq,
                v_stride,
                nonlinearity,
                jmin,
                jmax,
                vmin,
                vmax,
            }),
        })
    }

    pub fn domain(&self) -> &GridDomain {
        &self.inner.domain
    }

    pub fn len(&self) -> usize {
        self.inner.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn exponent(&self) -> f64 {
        self.inner.p
    }

    fn check_finite(u: &[f64]) -> Result<()> {
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite grid value at unknown {i}"
            )));
        }
        Ok(())
    }

    /// Visits every quadrature point with `(cell, global q, corners, u_q, grad u_q)`.
    #[inline]
    fn sweep<F>(&self, u: &[f64], mut visit: F)
    where
        F: FnMut(usize, usize, &[u32], f64, &[f64; 3]),
    {
        let s = &*self.inner;
        let dim = s.domain.dim;
        let nc = 1usize << dim;
        let mut loc = [0.0f64; 8];
        for c in 0..s.domain.cells() {
            let cn = &s.corners[c * nc..(c + 1) * nc];
            let mut any = false;
            for a in 0..nc {
                loc[a] = if cn[a] == NO_NODE {
                    0.0
                } else {
                    u[cn[a] as usize]
                };
                any |= cn[a] != NO_NODE;
            }
            if !any {
                continue;
            }
            for q in 0..nc {
                let mut uq = 0.0;
                let mut g = [0.0f64; 3];
                for a in 0..nc {
                    let la = loc[a];
                    uq += s.phi[q * nc + a] * la;
                    let base = (q * nc + a) * dim;
                    for d in 0..dim {
                        g[d] += s.dphi[base + d] * la;
                    }
                }
                visit(c, c * nc + q, cn, uq, &g);
            }
        }
    }

    #[inline]
    fn j_at(&self, qg: usize) -> &[f64] {
        let s = &*self.inner;
        let pl = packed_len(s.domain.dim);
        let off = qg * s.j_stride;
        &s.jq[off..off + pl]
    }

    #[inline]
    fn v_at(&self, qg: usize) -> f64 {
        self.inner.vq[qg * self.inner.v_stride]
    }

    /// `(F or G, f or g, f' or g')` at a quadrature point.
    #[inline]
    fn nonlinear(&self, cell: usize, u: f64) -> (f64, f64, f64) {
        let p = self.inner.p;
        match &self.inner.nonlinearity {
            Nonlinearity::None => (0.0, 0.0, 0.0),
            Nonlinearity::Power => {
                if u <= 0.0 {
                    (0.0, 0.0, 0.0)
                } else {
                    let up = u.powf(p - 1.0);
                    (up * u * u / (p + 1.0), up * u, p * up)
                }
            }
            Nonlinearity::Penalized { inside, ell, slope } => {
                let (g, gg, dg) = penalized_terms(inside[cell], u, p, *ell, *slope);
                (gg, g, dg)
            }
        }
    }

    pub fn value(&self, u: &[f64]) -> Result<f64> {
        Self::check_finite(u)?;
        let dim = self.inner.domain.dim;
        let mut e = 0.0;
        self.sweep(u, |c, qg, _, uq, g| {
            let jg = sym_apply(dim, self.j_at(qg), g);
            let grad_term: f64 = (0..dim).map(|d| jg[d] * g[d]).sum();
            let (big_f, _, _) = self.nonlinear(c, uq);
            e += 0.5 * grad_term + 0.5 * self.v_at(qg) * uq * uq - big_f;
        });
        Ok(e * self.inner.weight)
    }

    /// Energy and gradient (divided by the cell volume).
    pub fn value_gradient(&self, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        Self::check_finite(u)?;
        let s = &*self.inner;
        let dim = s.domain.dim;
        let nc = 1usize << dim;
        let mut grad = vec![0.0; u.len()];
        let mut e = 0.0;
        self.sweep(u, |c, qg, cn, uq, g| {
            let jg = sym_apply(dim, self.j_at(qg), g);
            let grad_term: f64 = (0..dim).map(|d| jg[d] * g[d]).sum();
            let (big_f, f, _) = self.nonlinear(c, uq);
            let v = self.v_at(qg);
            e += 0.5 * grad_term + 0.5 * v * uq * uq - big_f;
            let q = qg % nc;
            let react = v * uq - f;
            for a in 0..nc {
                if cn[a] == NO_NODE {
                    continue;
                }
                let base = (q * nc + a) * dim;
                let mut contrib = react * s.phi[q * nc + a];
                for d in 0..dim {
                    contrib += jg[d] * s.dphi[base + d];
                }
                grad[cn[a] as usize] += contrib;
            }
        });
        let scale = s.weight / s.domain.cell_volume();
        for gi in grad.iter_mut() {
            *gi *= scale;
        }
        Ok((e * s.weight, grad))
    }

    pub fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_gradient(u)?.1)
    }

    /// `int <J grad u, grad u> + V u^2`.
    pub fn quadratic(&self, u: &[f64]) -> f64 {
        let dim = self.inner.domain.dim;
        let mut acc = 0.0;
        self.sweep(u, |_, qg, _, uq, g| {
            let jg = sym_apply(dim, self.j_at(qg), g);
            acc += (0..dim).map(|d| jg[d] * g[d]).sum::<f64>() + self.v_at(qg) * uq * uq;
        });
        acc * self.inner.weight
    }

    /// `int (u+)^{p+1}`.
    pub fn power_moment(&self, u: &[f64]) -> f64 {
        let p = self.inner.p;
        let mut acc = 0.0;
        self.sweep(u, |_, _, _, uq, _| {
            if uq > 0.0 {
                acc += uq.powf(p + 1.0);
            }
        });
        acc * self.inner.weight
    }

    /// `int g(x, t u) u`, the nonlinear part of `DE(tu)[u]`.
    pub fn nonlinear_pairing(&self, u: &[f64], t: f64) -> f64 {
        let mut acc = 0.0;
        self.sweep(u, |c, _, _, uq, _| {
            let (_, f, _) = self.nonlinear(c, t * uq);
            acc += f * uq;
        });
        acc * self.inner.weight
    }

    /// Largest quadrature value of `u` in cells outside the penalisation region;
    /// `None` for unpenalised functionals.
    pub fn exterior_max(&self, u: &[f64]) -> Option<f64> {
        match &self.inner.nonlinearity {
            Nonlinearity::Penalized { inside, .. } => {
                let mut worst = f64::NEG_INFINITY;
                self.sweep(u, |c, _, _, uq, _| {
                    if !inside[c] {
                        worst = worst.max(uq);
                    }
                });
                Some(worst)
            }
            _ => None,
        }
    }

    /// Threshold `ell` of the penalised nonlinearity.
    pub fn penalty_threshold(&self) -> Option<f64> {
        match &self.inner.nonlinearity {
            Nonlinearity::Penalized { ell, .. } => Some(*ell),
            _ => None,
        }
    }

    /// `(G_kl = int d_k u d_l u, int u^2)` with the energy's quadrature.
    pub fn gradient_moments(&self, u: &[f64]) -> (nalgebra::DMatrix<f64>, f64) {
        let dim = self.inner.domain.dim;
        let mut g = nalgebra::DMatrix::zeros(dim, dim);
        let mut mass = 0.0;
        self.sweep(u, |_, _, _, uq, gr| {
            for k in 0..dim {
                for l in 0..dim {
                    g[(k, l)] += gr[k] * gr[l];
                }
            }
            mass += uq * uq;
        });
        let w = self.inner.weight;
        (g * w, mass * w)
    }

    /// Visits every quadrature point of cells touching an unknown with its
    /// position, weight, interpolated value and gradient, and the primitive
    /// `F` (or `G`) of the nonlinearity at that value.
    pub fn for_each_quadrature_point<F>(&self, u: &[f64], mut visit: F)
    where
        F: FnMut(&QuadraturePoint),
    {
        let s = &*self.inner;
        let dim = s.domain.dim;
        let n = s.domain.n;
        let nc = 1usize << dim;
        let mut qp = QuadraturePoint {
            x: vec![0.0; dim],
            weight: s.weight,
            u: 0.0,
            grad: [0.0; 3],
            primitive: 0.0,
        };
        self.sweep(u, |c, qg, _, uq, g| {
            let q = qg % nc;
            let mut rest = c;
            for d in 0..dim {
                let k = rest % (n - 1);
                rest /= n - 1;
                qp.x[d] = s.domain.coord(d, k) + GAUSS[(q >> d) & 1] * s.domain.h;
            }
            qp.u = uq;
            qp.grad = *g;
            qp.primitive = self.nonlinear(c, uq).0;
            visit(&qp);
        });
    }

    /// True for the pure power nonlinearity (closed-form Nehari scaling applies).
    pub fn is_pure_power(&self) -> bool {
        matches!(self.inner.nonlinearity, Nonlinearity::Power)
    }

    /// Hessian action at `u`, frozen for repeated application.
    pub fn linearize(&self, u: &[f64]) -> Linearization {
        let mut reaction = Vec::with_capacity(self.inner.domain.cells() << self.inner.domain.dim);
        let nc = 1usize << self.inner.domain.dim;
        let cells = self.inner.domain.cells();
        // reaction V - f'(u) at every quadrature point (cells without unknowns keep V)
        let mut filled = vec![false; cells * nc];
        let mut tmp = vec![0.0; cells * nc];
        self.sweep(u, |c, qg, _, uq, _| {
            let (_, _, df) = self.nonlinear(c, uq);
            tmp[qg] = self.v_at(qg) - df;
            filled[qg] = true;
        });
        for qg in 0..cells * nc {
            reaction.push(if filled[qg] { tmp[qg] } else { self.v_at(qg) });
        }
        Linearization {
            functional: self.clone(),
            reaction,
        }
    }

    /// Linear part only (`f' = 0`): the quadratic form's operator.
    pub fn linear_part(&self) -> Linearization {
        let nq = self.inner.domain.cells() << self.inner.domain.dim;
        Linearization {
            functional: self.clone(),
            reaction: (0..nq).map(|q| self.v_at(q)).collect(),
        }
    }

    /// Representative constant coefficients `(j, v)` for the fast preconditioner:
    /// geometric means of the extreme diagonal diffusion and potential values.
    pub fn representative_coefficients(&self) -> (f64, f64) {
        let s = &*self.inner;
        ((s.jmin * s.jmax).sqrt(), (s.vmin * s.vmax).sqrt())
    }

    /// Sine-transform preconditioner for constant coefficients `(j, v)` in this
    /// functional's scaling.
    pub fn preconditioner_with(&self, j: &[f64], v: f64) -> SpectralPreconditioner {
        let d = &self.inner.domain;
        SpectralPreconditioner::new(d.dim, d.m(), d.h, j, v).scaled(1.0 / d.cell_volume())
    }

    /// Preconditioner from [`Self::representative_coefficients`].
    pub fn preconditioner(&self) -> SpectralPreconditioner {
        let (j, v) = self.representative_coefficients();
        let dim = self.inner.domain.dim;
        self.preconditioner_with(&vec![j; dim], v)
    }

    /// Preconditioner using the diagonal of the packed diffusion at the first
    /// quadrature point; exact for constant coefficients.
    pub fn exact_constant_preconditioner(&self) -> Option<SpectralPreconditioner> {
        let s = &*self.inner;
        if s.j_stride != 0 || s.v_stride != 0 {
            return None;
        }
        let dim = s.domain.dim;
        let diag: Vec<f64> = match dim {
            1 => vec![s.jq[0]],
            2 => vec![s.jq[0], s.jq[2]],
            _ => vec![s.jq[0], s.jq[3], s.jq[5]],
        };
        let off_diag = match dim {
            1 => 0.0,
            2 => s.jq[1].abs(),
            _ => s.jq[1].abs() + s.jq[2].abs() + s.jq[4].abs(),
        };
        if off_diag != 0.0 {
            return None;
        }
        Some(self.preconditioner_with(&diag, s.vq[0]))
    }
}

/// Hessian action `v -> D^2E[u] v` (divided by the cell volume).
#[derive(Debug, Clone)]
pub struct Linearization {
    functional: DiscreteFunctional,
    reaction: Vec<f64>,
}

impl Linearization {
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let f = &self.functional;
        let s = &*f.inner;
        let dim = s.domain.dim;
        let nc = 1usize << dim;
        out.iter_mut().for_each(|o| *o = 0.0);
        f.sweep(v, |_, qg, cn, vq, g| {
            let jg = sym_apply(dim, f.j_at(qg), g);
            let q = qg % nc;
            let react = self.reaction[qg] * vq;
            for a in 0..nc {
                if cn[a] == NO_NODE {
                    continue;
                }
                let base = (q * nc + a) * dim;
                let mut contrib = react * s.phi[q * nc + a];
                for d in 0..dim {
                    contrib += jg[d] * s.dphi[base + d];
                }
                out[cn[a] as usize] += contrib;
            }
        });
        let scale = s.weight / s.domain.cell_volume();
        for o in out.iter_mut() {
            *o *= scale;
        }
    }

    pub fn apply_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out);
        out
    }

    /// `<D^2E v, w>` in the mesh inner product.
    pub fn form(&self, v: &[f64], w: &[f64]) -> f64 {
        let hv = self.apply_vec(v);
        self.functional.domain().cell_volume() * crate::linalg::dot(&hv, w)
    }
}

impl LinearOperator for Linearization {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_into(x, y)
    }
}

/// Mesh inner product `h^N sum a_i b_i`.
pub fn mesh_dot(domain: &GridDomain, a: &[f64], b: &[f64]) -> f64 {
    domain.cell_volume() * crate::linalg::dot(a, b)
}

/// Reads the first line of a sidecar, for tools that only need the header.
pub fn read_sidecar(path: &Path) -> Result<String> {
    let f = BufReader::new(std::fs::File::open(path)?);
    Ok(f.lines().next().transpose()?.unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{ConstantDiffusion, ConstantPotential, DiagonalQuadratic, QuadraticWell};
    use crate::linalg::norm_inf;
    use crate::penalty::PenaltyConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_spec(dim: usize) -> ProblemSpec {
        ProblemSpec::new(
            dim,
            3.0,
            Arc::new(ConstantPotential { value: 1.0 }),
            Arc::new(ConstantDiffusion::identity(dim)),
        )
        .unwrap()
    }

    fn varied_spec() -> ProblemSpec {
        let region = BoxRegion::cube(2, 1.5);
        ProblemSpec::new(
            2,
            3.0,
            Arc::new(QuadraticWell::new(0.5, vec![0.2, -0.1])),
            Arc::new(DiagonalQuadratic {
                base: vec![1.0, 0.8],
                quad: vec![vec![0.25, 0.0], vec![0.1, 0.1]],
            }),
        )
        .unwrap()
        .with_penalty(PenaltyConfig::with_defaults(region, 3.0, 1.0).unwrap())
    }

    #[test]
    fn grid_arithmetic() {
        let g = build_grid(1, 10.0, 11).unwrap();
        assert_eq!(g.h, 2.0);
        let g = build_grid(3, 10.0, 65).unwrap();
        assert_eq!(g.len(), 63 * 63 * 63);
        assert_eq!(g.cells(), 64 * 64 * 64);
        assert!(matches!(build_grid(1, 1.0, 4), Err(Error::Size { .. })));
        assert!(matches!(
            GridDomain::new(3, 1.0, 2000, vec![0.0; 3], DEFAULT_MEMORY_CAP),
            Err(Error::Size { .. })
        ));
    }

    #[test]
    fn zero_state_has_zero_energy_and_gradient() {
        let g = build_grid(2, 4.0, 17).unwrap();
        let f = DiscreteFunctional::new(&g, &unit_spec(2), 1.0, &Mode::Raw).unwrap();
        let (e, grad) = f.value_gradient(&vec![0.0; g.len()]).unwrap();
        assert_eq!(e, 0.0);
        assert!(grad.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn non_finite_input_rejected() {
        let g = build_grid(1, 4.0, 17).unwrap();
        let f = DiscreteFunctional::new(&g, &unit_spec(1), 1.0, &Mode::Raw).unwrap();
        let mut u = vec![0.0; g.len()];
        u[3] = f64::NAN;
        assert!(matches!(f.value(&u), Err(Error::Numeric(_))));
    }

    #[test]
    fn penalized_without_config_is_config_error() {
        let g = build_grid(2, 4.0, 17).unwrap();
        assert!(matches!(
            DiscreteFunctional::new(&g, &unit_spec(2), 1.0, &Mode::Penalized),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn sech_residual_converges_at_second_order() {
        let spec = unit_spec(1);
        let mut res = Vec::new();
        for &n in &[201usize, 401, 801] {
            let g = build_grid(1, 20.0, n).unwrap();
            let u = g.sample(|x| 2f64.sqrt() / x[0].cosh());
            let f = DiscreteFunctional::new(&g, &spec, 1.0, &Mode::Raw).unwrap();
            res.push(norm_inf(&f.gradient(&u.values).unwrap()));
        }
        let o1 = (res[0] / res[1]).log2();
        let o2 = (res[1] / res[2]).log2();
        assert!(o1 > 1.8 && o2 > 1.8, "{res:?}");
    }

    #[test]
    fn gradient_is_exact_derivative_in_every_mode() {
        let spec = varied_spec();
        let g = GridDomain::new(2, 2.0, 13, vec![0.1, 0.0], DEFAULT_MEMORY_CAP).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for mode in [
            Mode::Raw,
            Mode::Frozen(vec![0.3, 0.2]),
            Mode::Penalized,
            Mode::Rescaled,
        ] {
            let f = DiscreteFunctional::new(&g, &spec, 0.7, &mode).unwrap();
            for trial in 0..10 {
                // the penalised primitive is only C^{1,1} at u = ell: keep samples off the kink
                let range = match (&mode, trial % 2) {
                    (Mode::Penalized, 0) => 0.5..1.5,
                    (Mode::Penalized, _) => -0.5..0.35,
                    _ => -0.5..1.5,
                };
                let u: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(range.clone())).collect();
                let v: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let grad = f.gradient(&u).unwrap();
                let exact = mesh_dot(&g, &grad, &v);
                let mut errs = Vec::new();
                for &t in &[1e-2, 5e-3, 2.5e-3] {
                    let up: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + t * b).collect();
                    let um: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - t * b).collect();
                    let fd = (f.value(&up).unwrap() - f.value(&um).unwrap()) / (2.0 * t);
                    errs.push((fd - exact).abs());
                }
                let floor = 1e-11 * exact.abs().max(1.0);
                if errs[2] > floor {
                    let o = (errs[0] / errs[2]).log2() / 2.0;
                    assert!(o >= 1.9, "{mode:?}: {errs:?}");
                }
            }
        }
    }

    #[test]
    fn hessian_is_symmetric_and_matches_gradient() {
        let spec = varied_spec();
        let g = GridDomain::new(2, 2.0, 13, vec![0.0, 0.0], DEFAULT_MEMORY_CAP).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for mode in [Mode::Raw, Mode::Penalized] {
            let f = DiscreteFunctional::new(&g, &spec, 0.5, &mode).unwrap();
            let u: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(0.0..0.2)).collect();
            let lin = f.linearize(&u);
            for _ in 0..5 {
                let v: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let w: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let a = lin.form(&v, &w);
                let b = lin.form(&w, &v);
                assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()));
                // directional derivative of the gradient
                let t = 1e-6;
                let up: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + t * b).collect();
                let um: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - t * b).collect();
                let gp = f.gradient(&up).unwrap();
                let gm = f.gradient(&um).unwrap();
                let hv = lin.apply_vec(&v);
                for i in 0..g.len() {
                    let fd = (gp[i] - gm[i]) / (2.0 * t);
                    assert!((fd - hv[i]).abs() < 1e-5 * (1.0 + hv[i].abs()));
                }
            }
        }
    }

    #[test]
    fn ellipticity_at_zero() {
        let spec = varied_spec();
        let g = build_grid(2, 2.0, 15).unwrap();
        let eps = 0.5;
        let f = DiscreteFunctional::new(&g, &spec, eps, &Mode::Raw).unwrap();
        let lin = f.linearize(&vec![0.0; g.len()]);
        let nu = spec.j().ellipticity();
        let alpha = spec.v().lower_bound();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let v: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let q = lin.form(&v, &v);
            let mass = mesh_dot(&g, &v, &v);
            assert!(q >= (eps * eps * nu).min(alpha) * mass, "{q} vs {mass}");
        }
    }

    #[test]
    fn translation_covariance() {
        let spec = unit_spec(2);
        let g = build_grid(2, 6.0, 49).unwrap();
        let f = DiscreteFunctional::new(&g, &spec, 1.0, &Mode::Raw).unwrap();
        let bump = |c: f64| g.sample(move |x| (-(x[0] - c).powi(2) - x[1] * x[1]).exp() * 0.8);
        let e0 = f.value(&bump(0.0).values).unwrap();
        let e1 = f.value(&bump(g.h).values).unwrap();
        assert!((e0 - e1).abs() <= 1e-12 * e0.abs().max(1.0) + 1e-13);
    }

    #[test]
    fn hv_norm_properties() {
        let g = build_grid(2, 3.0, 21).unwrap();
        let v1 = ConstantPotential { value: 1.0 };
        let v2 = ConstantPotential { value: 2.0 };
        assert_eq!(hv_norm(&g.zeros(), &v1).unwrap(), 0.0);
        let u = g.sample(|x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        let n1 = hv_norm(&u, &v1).unwrap();
        let n2 = hv_norm(&u, &v2).unwrap();
        let h1 = DiscreteFunctional::h1_form(&g).quadratic(&u.values).sqrt();
        assert!((n1 - h1).abs() < 1e-14);
        let mass = {
            let z = ConstantPotential { value: 1e-300 };
            n1 * n1 - hv_norm(&u, &z).unwrap().powi(2)
        };
        assert!((n2 * n2 - n1 * n1 - mass).abs() < 1e-12);
    }

    #[test]
    fn preconditioner_inverts_constant_operator() {
        let spec = unit_spec(2);
        let g = build_grid(2, 3.0, 21).unwrap();
        let f = DiscreteFunctional::new(&g, &spec, 0.4, &Mode::Raw).unwrap();
        let pre = f.exact_constant_preconditioner().unwrap();
        let lin = f.linear_part();
        let x: Vec<f64> = (0..g.len()).map(|i| ((i * 13 % 7) as f64).sin()).collect();
        let ax = lin.apply_vec(&x);
        let mut back = vec![0.0; x.len()];
        crate::linalg::Preconditioner::apply_inverse(&pre, &ax, &mut back);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let g = GridDomain::new(2, 3.0, 9, vec![0.5, -0.5], DEFAULT_MEMORY_CAP).unwrap();
        let u = g.sample(|x| x[0] * 2.0 + x[1]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.bin");
        u.write_binary(&path).unwrap();
        let back = GridFunction::read_binary(&path).unwrap();
        assert_eq!(back, u);
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 81);
        assert!(read_sidecar(&GridFunction::sidecar(&path))
            .unwrap()
            .contains("ordering=lex"));
    }

    #[test]
    fn interpolation_reproduces_bilinear_functions() {
        let g = build_grid(2, 2.0, 11).unwrap();
        // vanishes on the boundary, bilinear inside each cell only at nodes
        let u = g.sample(|x| (4.0 - x[0] * x[0]) * (4.0 - x[1] * x[1]));
        for p in g.points().take(20) {
            let v = g.interpolate(&u.values, &p).unwrap();
            assert!((v - (4.0 - p[0] * p[0]) * (4.0 - p[1] * p[1])).abs() < 1e-12);
        }
        assert!(g.interpolate(&u.values, &[2.5, 0.0]).is_none());
        assert_eq!(g.interpolate(&u.values, &[2.0, 0.0]).unwrap(), 0.0);
    }
}
