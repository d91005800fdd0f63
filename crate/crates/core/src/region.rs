use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_N, hi_N]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidInput(format!(
                "box bounds have mismatched dimensions {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidInput(format!("empty box {lo:?} .. {hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    /// Parses the flat `[lo1, hi1, lo2, hi2, ...]` layout used in configuration files.
    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.is_empty() || flat.len() % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "box needs an even number of bounds, got {}",
                flat.len()
            )));
        }
        let lo = flat.iter().step_by(2).copied().collect();
        let hi = flat.iter().skip(1).step_by(2).copied().collect();
        Self::new(lo, hi)
    }

    pub fn cube(dim: usize, half_width: f64) -> Self {
        Self {
            lo: vec![-half_width; dim],
            hi: vec![half_width; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    /// Euclidean distance from an interior point to the boundary.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (a, b))| (v - a).min(b - v))
            .fold(f64::INFINITY, f64::min)
    }

    /// True if `self` lies inside `other` with a positive margin on every side.
    pub fn strictly_inside(&self, other: &BoxRegion) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|d| self.lo[d] > other.lo[d] && self.hi[d] < other.hi[d])
    }

    /// Largest distance from the origin to a corner.
    pub fn corner_radius(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| a.abs().max(b.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let (a, b): (Vec<f64>, Vec<f64>) = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| {
                let (x, y) = (l * factor, h * factor);
                (x.min(y), x.max(y))
            })
            .unzip();
        Self { lo: a, hi: b }
    }

    /// Sample points on the boundary: a uniform `per_axis` lattice restricted to faces.
    pub fn boundary_samples(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let dim = self.dim();
        let per_axis = per_axis.max(2);
        let total = per_axis.pow(dim as u32);
        let mut out = Vec::new();
        for flat in 0..total {
            let mut rest = flat;
            let mut on_face = false;
            let mut x = Vec::with_capacity(dim);
            for d in 0..dim {
                let k = rest % per_axis;
                rest /= per_axis;
                if k == 0 || k == per_axis - 1 {
                    on_face = true;
                }
                let t = k as f64 / (per_axis - 1) as f64;
                x.push(self.lo[d] + t * (self.hi[d] - self.lo[d]));
            }
            if on_face {
                out.push(x);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_layout_round_trip() {
        let b = BoxRegion::from_flat(&[-1.0, 1.0, -2.0, 0.5]).unwrap();
        assert_eq!(b.lo, vec![-1.0, -2.0]);
        assert_eq!(b.hi, vec![1.0, 0.5]);
        assert!(b.contains(&[0.0, 0.0]));
        assert!(!b.contains(&[0.0, 0.6]));
        assert!(BoxRegion::from_flat(&[1.0, -1.0]).is_err());
        assert!(BoxRegion::from_flat(&[1.0]).is_err());
    }

    #[test]
    fn boundary_samples_lie_on_faces() {
        let b = BoxRegion::cube(2, 1.0);
        let s = b.boundary_samples(5);
        assert_eq!(s.len(), 16);
        assert!(s.iter().all(|x| b.distance_to_boundary(x).abs() < 1e-15));
    }
}
