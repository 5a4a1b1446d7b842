//! Step functions on a finite measure space of cells.
//!
//! A [`Grid`] is a list of cell volumes; a [`StepFunction`] holds one complex
//! value per cell and vanishes outside the grid. Every pointwise operation on
//! this class is closed and exact up to roundoff, and integrals are finite sums.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite measure space: `dim` is metadata only, cells carry positive volumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct Grid {
    dim: usize,
    volumes: Vec<f64>,
}

impl Grid {
    pub fn new(dim: usize, volumes: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dim must be positive".into()));
        }
        if volumes.is_empty() {
            return Err(Error::InvalidGrid("grid needs at least one cell".into()));
        }
        if let Some(k) = volumes.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidGrid(format!(
                "cell {k} has non-positive or non-finite volume {}",
                volumes[k]
            )));
        }
        Ok(Self { dim, volumes })
    }

    /// `cells` cells of unit volume in dimension 1.
    pub fn uniform(cells: usize) -> Result<Self> {
        Self::new(1, vec![1.0; cells])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.volumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volumes.is_empty()
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn volume(&self, cell: usize) -> f64 {
        self.volumes[cell]
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    pub fn into_shared(self) -> Arc<Grid> {
        Arc::new(self)
    }
}

#[derive(Deserialize)]
struct RawGrid {
    dim: usize,
    volumes: Vec<f64>,
}

impl TryFrom<RawGrid> for Grid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        Grid::new(raw.dim, raw.volumes)
    }
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Pointwise operations accepted by [`pointwise`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pointwise {
    Mul,
    Add,
    Conj,
    Pow(u32),
    Scale(Complex64),
}

/// A complex-valued function that is constant on each grid cell.
#[derive(Debug, Clone)]
pub struct StepFunction {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl PartialEq for StepFunction {
    fn eq(&self, other: &Self) -> bool {
        same_grid(&self.grid, &other.grid) && self.values == other.values
    }
}

impl StepFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidFunction(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidFunction(format!("value at cell {k} is not finite")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_real(grid: Arc<Grid>, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn zero(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self { grid, values: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn constant(grid: Arc<Grid>, value: Complex64) -> Self {
        let n = grid.len();
        Self { grid, values: vec![value; n] }
    }

    /// Builds a function without validation; callers guarantee length and finiteness.
    pub(crate) fn from_parts(grid: Arc<Grid>, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_compatible(&self, other: &StepFunction) -> Result<()> {
        if same_grid(&self.grid, &other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    /// Squared L² norm, `Σ |f_k|² vol_k`.
    pub fn l2_norm_sqr(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.volumes())
            .map(|(v, vol)| v.norm_sqr() * vol)
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sqr().sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        linf_norm(self)
    }

    pub fn conj(&self) -> StepFunction {
        self.map(|v| v.conj())
    }

    pub fn scale(&self, lambda: Complex64) -> StepFunction {
        self.map(|v| v * lambda)
    }

    pub fn scale_real(&self, lambda: f64) -> StepFunction {
        self.map(|v| v * lambda)
    }

    pub fn powi(&self, n: u32) -> StepFunction {
        self.map(|v| complex_powu(v, n))
    }

    pub fn mul(&self, other: &StepFunction) -> Result<StepFunction> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn add(&self, other: &StepFunction) -> Result<StepFunction> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &StepFunction) -> Result<StepFunction> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `|f|²` as a real-valued step function.
    pub fn abs_sqr(&self) -> StepFunction {
        self.map(|v| Complex64::new(v.norm_sqr(), 0.0))
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> StepFunction {
        StepFunction {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(
        &self,
        other: &StepFunction,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<StepFunction> {
        self.check_compatible(other)?;
        Ok(StepFunction {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Serializable form: `{"values": [[re, im], ...]}`.
    pub fn to_spec(&self) -> FunctionSpec {
        FunctionSpec { values: self.values.iter().map(|v| [v.re, v.im]).collect() }
    }
}

/// Integer power by repeated squaring; `z^0 = 1` including `0^0`.
pub(crate) fn complex_powu(z: Complex64, n: u32) -> Complex64 {
    let mut base = z;
    let mut exp = n;
    let mut acc = Complex64::new(1.0, 0.0);
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= base;
        }
        base *= base;
        exp >>= 1;
    }
    acc
}

/// `⟨f, g⟩ = Σ conj(f_k) g_k vol_k`, antilinear in the first argument.
pub fn inner(f: &StepFunction, g: &StepFunction) -> Result<Complex64> {
    f.check_compatible(g)?;
    Ok(inner_unchecked(f, g))
}

pub(crate) fn inner_unchecked(f: &StepFunction, g: &StepFunction) -> Complex64 {
    f.values
        .iter()
        .zip(&g.values)
        .zip(f.grid.volumes())
        .map(|((a, b), vol)| a.conj() * b * vol)
        .sum()
}

pub fn linf_norm(f: &StepFunction) -> f64 {
    f.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Cellwise operation. Binary kinds (`Mul`, `Add`) require `g`; unary kinds ignore it.
pub fn pointwise(f: &StepFunction, g: Option<&StepFunction>, kind: Pointwise) -> Result<StepFunction> {
    match kind {
        Pointwise::Mul | Pointwise::Add => {
            let g = g.ok_or_else(|| {
                Error::InvalidParams(format!("{kind:?} needs a second operand"))
            })?;
            if kind == Pointwise::Mul {
                f.mul(g)
            } else {
                f.add(g)
            }
        }
        Pointwise::Conj => Ok(f.conj()),
        Pointwise::Pow(n) => Ok(f.powi(n)),
        Pointwise::Scale(lambda) => Ok(f.scale(lambda)),
    }
}

/// Characteristic function of a set of cells: exactly 1 on the set, 0 elsewhere.
pub fn indicator(grid: &Arc<Grid>, cells: &[usize]) -> Result<StepFunction> {
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    for &k in cells {
        if k >= grid.len() {
            return Err(Error::IndexOutOfRange { index: k, cells: grid.len() });
        }
        values[k] = Complex64::new(1.0, 0.0);
    }
    Ok(StepFunction::from_parts(Arc::clone(grid), values))
}

/// Serialized grid, `{"dim": d, "volumes": [...]}`.
pub type GridSpec = Grid;

/// Serialized step function, `{"values": [[re, im], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub values: Vec<[f64; 2]>,
}

impl FunctionSpec {
    pub fn build(&self, grid: &Arc<Grid>) -> Result<StepFunction> {
        StepFunction::new(
            Arc::clone(grid),
            self.values.iter().map(|&[re, im]| Complex64::new(re, im)).collect(),
        )
    }
}

impl Serialize for StepFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_spec().serialize(s)
    }
}
