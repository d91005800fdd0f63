use std::sync::Arc;

use crate::fields::{check_exponent, DiffusionField, PotentialField};
use crate::penalty::PenaltyConfig;
use crate::Result;

/// Dimension, exponent, coefficient fields and (optionally) the penalisation.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub dim: usize,
    pub p: f64,
    pub potential: Arc<dyn PotentialField>,
    pub diffusion: Arc<dyn DiffusionField>,
    pub penalty: Option<PenaltyConfig>,
}

impl ProblemSpec {
    pub fn new(
        dim: usize,
        p: f64,
        potential: Arc<dyn PotentialField>,
        diffusion: Arc<dyn DiffusionField>,
    ) -> Result<Self> {
        check_exponent(dim, p)?;
        Ok(Self {
            dim,
            p,
            potential,
            diffusion,
            penalty: None,
        })
    }

    pub fn with_penalty(mut self, cfg: PenaltyConfig) -> Self {
        self.penalty = Some(cfg);
        self
    }

    pub fn v(&self) -> &dyn PotentialField {
        self.potential.as_ref()
    }

    pub fn j(&self) -> &dyn DiffusionField {
        self.diffusion.as_ref()
    }

    pub fn gamma(&self, z: &[f64]) -> Result<f64> {
        Ok(crate::fields::gamma_value_gradient(z, self.v(), self.j(), self.p)?.0)
    }
}
