//! Seeded sample sets for the identity batteries.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::ModelParams;
use crate::testfn::{indicator, Grid, StepFunction};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_AMP: f64 = 0.35;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub seed: u64,
    pub num_pairs: usize,
    /// Deepest power checked by the power battery.
    pub n_max: usize,
    /// ∞-norm cap for sampled functions; must lie in (0, 1/2).
    pub amp: f64,
    /// Scalings `t ∈ (0, 1]` for the exponential battery.
    pub t_grid: Vec<f64>,
    pub params: ModelParams,
    pub tol: f64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_pairs: 50,
            n_max: 4,
            amp: DEFAULT_AMP,
            t_grid: vec![0.25, 0.5, 1.0],
            params: ModelParams::default(),
            tol: DEFAULT_TOL,
        }
    }
}

impl SampleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.amp > 0.0 && self.amp < 0.5) {
            return Err(Error::InvalidParams(format!("amp must lie in (0, 0.5), got {}", self.amp)));
        }
        if self.n_max == 0 {
            return Err(Error::InvalidParams("n_max must be at least 1".into()));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidParams(format!("tol must be positive, got {}", self.tol)));
        }
        if self.t_grid.is_empty() {
            return Err(Error::InvalidParams("t_grid must not be empty".into()));
        }
        if let Some(t) = self.t_grid.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::InvalidParams(format!("t_grid entries must lie in (0, 1], got {t}")));
        }
        Ok(())
    }
}

/// Deterministic corner cases followed by seeded random pairs.
#[derive(Debug, Clone)]
pub struct SampleSet {
    /// Unit indicators of every cell, then the constant `amp`.
    pub corners: Vec<StepFunction>,
    /// Every fourth pair is real-valued; the rest are uniform on the complex disk of radius `amp`.
    pub random_pairs: Vec<(StepFunction, StepFunction)>,
}

impl SampleSet {
    pub fn generate(grid: &Arc<Grid>, cfg: &SampleConfig) -> Self {
        let mut corners: Vec<StepFunction> =
            (0..grid.len()).map(|k| indicator(grid, &[k]).expect("cell in range")).collect();
        corners.push(StepFunction::constant(Arc::clone(grid), Complex64::new(cfg.amp, 0.0)));

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let random_pairs = (0..cfg.num_pairs)
            .map(|i| {
                let real = i % 4 == 0;
                let f = random_function(&mut rng, grid, cfg.amp, real);
                let g = random_function(&mut rng, grid, cfg.amp, real);
                (f, g)
            })
            .collect();
        Self { corners, random_pairs }
    }

    /// Every ordered pair of corners, then the random pairs.
    pub fn pairs(&self) -> Vec<(StepFunction, StepFunction)> {
        let mut out = Vec::with_capacity(self.corners.len().pow(2) + self.random_pairs.len());
        for f in &self.corners {
            for g in &self.corners {
                out.push((f.clone(), g.clone()));
            }
        }
        out.extend(self.random_pairs.iter().cloned());
        out
    }

    /// Each corner with itself and with its successor, then the random pairs.
    pub fn sparse_pairs(&self) -> Vec<(StepFunction, StepFunction)> {
        let n = self.corners.len();
        let mut out = Vec::with_capacity(2 * n + self.random_pairs.len());
        for i in 0..n {
            out.push((self.corners[i].clone(), self.corners[i].clone()));
            out.push((self.corners[i].clone(), self.corners[(i + 1) % n].clone()));
        }
        out.extend(self.random_pairs.iter().cloned());
        out
    }

    /// Corners, then both members of every random pair.
    pub fn functions(&self) -> Vec<StepFunction> {
        let mut out = self.corners.clone();
        for (f, g) in &self.random_pairs {
            out.push(f.clone());
            out.push(g.clone());
        }
        out
    }
}

pub fn random_function(rng: &mut impl Rng, grid: &Arc<Grid>, amp: f64, real: bool) -> StepFunction {
    let values = (0..grid.len())
        .map(|_| {
            if real {
                Complex64::new(rng.random_range(-amp..=amp), 0.0)
            } else {
                // uniform on the disk: radius ∝ sqrt(u)
                let r = amp * rng.random::<f64>().sqrt();
                Complex64::from_polar(r, TAU * rng.random::<f64>())
            }
        })
        .collect();
    StepFunction::new(Arc::clone(grid), values).expect("finite samples")
}

/// Rescales `f` so that its ∞-norm does not exceed `amp`.
pub fn cap_amplitude(f: &StepFunction, amp: f64) -> StepFunction {
    let sup = f.linf_norm();
    if sup > amp {
        f.scale_real(amp / sup)
    } else {
        f.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SampleConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            SampleConfig { amp: 0.5, ..Default::default() },
            SampleConfig { amp: 0.0, ..Default::default() },
            SampleConfig { n_max: 0, ..Default::default() },
            SampleConfig { tol: 0.0, ..Default::default() },
            SampleConfig { t_grid: vec![], ..Default::default() },
            SampleConfig { t_grid: vec![0.5, 1.5], ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn samples_respect_amplitude_and_seed() {
        let grid = Grid::uniform(6).unwrap().into_shared();
        let cfg = SampleConfig { num_pairs: 20, ..Default::default() };
        let a = SampleSet::generate(&grid, &cfg);
        let b = SampleSet::generate(&grid, &cfg);
        for ((f1, g1), (f2, g2)) in a.random_pairs.iter().zip(&b.random_pairs) {
            assert_eq!(f1, f2);
            assert_eq!(g1, g2);
            assert!(f1.linf_norm() <= cfg.amp && g1.linf_norm() <= cfg.amp);
        }
        assert!(a.random_pairs[0].0.is_real());
        assert!(!a.random_pairs[1].0.is_real());
        assert_eq!(a.corners.len(), 7);
        assert_eq!(a.pairs().len(), 49 + 20);

        let c = SampleSet::generate(&grid, &SampleConfig { seed: 1, ..cfg });
        assert_ne!(a.random_pairs[0].0, c.random_pairs[0].0);
    }

    #[test]
    fn partial_config_json_uses_defaults() {
        let cfg: SampleConfig = serde_json::from_str(r#"{"seed": 9, "params": {"c": 2.0}}"#).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.params.c(), 2.0);
        assert_eq!(cfg.t_grid, vec![0.25, 0.5, 1.0]);
        assert!(serde_json::from_str::<SampleConfig>(r#"{"sed": 9}"#).is_err());
    }
}
