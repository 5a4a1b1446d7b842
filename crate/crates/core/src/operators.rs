//! Candidate one-particle operators and the structural predicates the
//! projection theorem is phrased in.
//!
//! Every operator has a dense form in the cell basis: `(Tf)_j = Σ_k M[j,k] f_k`.
//! Adjoints are taken with respect to the volume-weighted inner product.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::testfn::{indicator, same_grid, FunctionSpec, Grid, StepFunction};

/// Default tolerance for the structural predicates.
pub const DEFAULT_STRUCTURAL_TOL: f64 = 1e-9;

const AXIS_NORM_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone)]
pub enum Operator {
    /// `f ↦ a·f`.
    Multiplication(StepFunction),
    /// Matrix in the cell basis.
    Dense { grid: Arc<Grid>, matrix: DMatrix<Complex64> },
    /// `f ↦ ⟨e, f⟩ e` with `‖e‖₂ = 1`.
    RankOneProjection(StepFunction),
}

impl Operator {
    pub fn multiplication(symbol: StepFunction) -> Self {
        Operator::Multiplication(symbol)
    }

    pub fn identity(grid: &Arc<Grid>) -> Self {
        Operator::Multiplication(StepFunction::constant(Arc::clone(grid), ONE))
    }

    /// Multiplication by the indicator of `cells`.
    pub fn char_mult(grid: &Arc<Grid>, cells: &[usize]) -> Result<Self> {
        Ok(Operator::Multiplication(indicator(grid, cells)?))
    }

    pub fn dense(grid: Arc<Grid>, matrix: DMatrix<Complex64>) -> Result<Self> {
        let n = grid.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::InvalidOperator(format!(
                "dense matrix is {}x{}, grid has {n} cells",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidOperator("dense matrix has non-finite entries".into()));
        }
        Ok(Operator::Dense { grid, matrix })
    }

    pub fn rank_one(axis: StepFunction) -> Result<Self> {
        let norm = axis.l2_norm();
        if (norm - 1.0).abs() > AXIS_NORM_TOL {
            return Err(Error::InvalidOperator(format!(
                "rank-one axis must have unit L2 norm, got {norm}"
            )));
        }
        Ok(Operator::RankOneProjection(axis))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        match self {
            Operator::Multiplication(a) | Operator::RankOneProjection(a) => a.grid(),
            Operator::Dense { grid, .. } => grid,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Operator::Multiplication(_) => "mult",
            Operator::Dense { .. } => "dense",
            Operator::RankOneProjection(_) => "rank1",
        }
    }

    /// Dense form in the cell basis.
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        match self {
            Operator::Multiplication(a) => DMatrix::from_diagonal(&a.values().to_vec().into()),
            Operator::Dense { matrix, .. } => matrix.clone(),
            Operator::RankOneProjection(e) => {
                let vols = e.grid().volumes();
                let ev = e.values();
                DMatrix::from_fn(ev.len(), ev.len(), |j, k| ev[j] * ev[k].conj() * vols[k])
            }
        }
    }

    pub fn to_dense(&self) -> Operator {
        Operator::Dense { grid: Arc::clone(self.grid()), matrix: self.to_matrix() }
    }

    pub fn to_spec(&self) -> OperatorSpec {
        match self {
            Operator::Multiplication(a) => OperatorSpec::Mult { symbol: a.to_spec() },
            Operator::RankOneProjection(e) => OperatorSpec::Rank1 { axis: e.to_spec() },
            Operator::Dense { matrix, .. } => OperatorSpec::Dense {
                matrix: (0..matrix.nrows())
                    .map(|j| (0..matrix.ncols()).map(|k| [matrix[(j, k)].re, matrix[(j, k)].im]).collect())
                    .collect(),
            },
        }
    }

    fn check_grid(&self, grid: &Arc<Grid>) -> Result<()> {
        if same_grid(self.grid(), grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

pub fn apply(p: &Operator, f: &StepFunction) -> Result<StepFunction> {
    p.check_grid(f.grid())?;
    Ok(match p {
        Operator::Multiplication(a) => a.mul(f)?,
        Operator::RankOneProjection(e) => e.scale(crate::testfn::inner_unchecked(e, f)),
        Operator::Dense { matrix, .. } => {
            let fv = f.values();
            let values = (0..matrix.nrows())
                .map(|j| (0..matrix.ncols()).map(|k| matrix[(j, k)] * fv[k]).sum())
                .collect();
            StepFunction::from_parts(Arc::clone(f.grid()), values)
        }
    })
}

/// Adjoint for the weighted inner product: `M*[j,k] = conj(M[k,j]) vol_k / vol_j`.
pub fn adjoint(p: &Operator) -> Operator {
    match p {
        Operator::Multiplication(a) => Operator::Multiplication(a.conj()),
        Operator::RankOneProjection(_) => p.clone(),
        Operator::Dense { grid, matrix } => {
            let vols = grid.volumes();
            let n = matrix.nrows();
            Operator::Dense {
                grid: Arc::clone(grid),
                matrix: DMatrix::from_fn(n, n, |j, k| matrix[(k, j)].conj() * vols[k] / vols[j]),
            }
        }
    }
}

/// `compose(p, q) = p ∘ q`.
pub fn compose(p: &Operator, q: &Operator) -> Result<Operator> {
    p.check_grid(q.grid())?;
    Ok(match (p, q) {
        (Operator::Multiplication(a), Operator::Multiplication(b)) => Operator::Multiplication(a.mul(b)?),
        _ => Operator::Dense { grid: Arc::clone(p.grid()), matrix: p.to_matrix() * q.to_matrix() },
    })
}

/// ∞→∞ operator norm in the cell basis (max absolute row sum); exact for
/// every stored form.
pub fn infnorm_bound(p: &Operator) -> f64 {
    match p {
        Operator::Multiplication(a) => a.linf_norm(),
        _ => max_row_sum(&p.to_matrix()).0,
    }
}

fn max_row_sum(m: &DMatrix<Complex64>) -> (f64, usize) {
    (0..m.nrows())
        .map(|j| (m.row(j).iter().map(|z| z.norm()).sum::<f64>(), j))
        .fold((0.0, 0), |best, cur| if cur.0 > best.0 { cur } else { best })
}

/// A unit-∞-norm function on which `‖p f‖∞` attains [`infnorm_bound`].
pub fn infnorm_extremal(p: &Operator) -> StepFunction {
    let grid = Arc::clone(p.grid());
    let m = p.to_matrix();
    let (_, row) = max_row_sum(&m);
    let values = m
        .row(row)
        .iter()
        .map(|z| if z.norm() > 0.0 { z.conj() / z.norm() } else { ONE })
        .collect();
    StepFunction::from_parts(grid, values)
}

/// Volume-weighted Frobenius norm, `sqrt(Σ_k ‖D χ_k‖₂²) = sqrt(Σ_{j,k} |D[j,k]|² vol_j)`.
pub fn weighted_frobenius(grid: &Grid, d: &DMatrix<Complex64>) -> f64 {
    let vols = grid.volumes();
    let mut acc = 0.0;
    for k in 0..d.ncols() {
        for (j, vol) in vols.iter().enumerate() {
            acc += d[(j, k)].norm_sqr() * vol;
        }
    }
    acc.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Predicate {
    pub holds: bool,
    /// Bound, residual or deviation depending on the predicate; always ≥ 0.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructuralReport {
    pub is_contraction_inf: Predicate,
    pub is_idempotent: Predicate,
    pub is_selfadjoint: Predicate,
    pub is_char_mult: Predicate,
    pub commutes_with_conjugation: Predicate,
}

/// Classifies `p`. A dense or rank-one operator whose matrix is diagonal to
/// within `tol` is treated as the multiplication operator it represents.
pub fn structural_report(p: &Operator, tol: f64) -> StructuralReport {
    let grid = p.grid();
    let m = p.to_matrix();
    let n = m.nrows();

    let bound = infnorm_bound(p);
    let idem = weighted_frobenius(grid, &(&m * &m - &m));
    let star = adjoint(p).to_matrix();
    let selfadj = weighted_frobenius(grid, &(&star - &m));

    let char_dev = match p {
        Operator::Multiplication(a) => symbol_deviation(a.values().iter()),
        _ => {
            let off = (0..n)
                .flat_map(|j| (0..n).filter(move |&k| k != j).map(move |k| (j, k)))
                .map(|(j, k)| m[(j, k)].norm())
                .fold(0.0, f64::max);
            off.max(symbol_deviation(m.diagonal().iter()))
        }
    };

    // p(χ_k) is column k; χ_k is real, so p(conj χ_k) - conj(p χ_k) = 2i Im(column).
    let vols = grid.volumes();
    let conj_res = (0..n)
        .map(|k| {
            (0..n)
                .map(|j| (2.0 * m[(j, k)].im).powi(2) * vols[j])
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);

    StructuralReport {
        is_contraction_inf: Predicate { holds: bound <= 1.0 + tol, value: bound },
        is_idempotent: Predicate { holds: idem <= tol, value: idem },
        is_selfadjoint: Predicate { holds: selfadj <= tol, value: selfadj },
        is_char_mult: Predicate { holds: char_dev <= tol, value: char_dev },
        commutes_with_conjugation: Predicate { holds: conj_res <= tol, value: conj_res },
    }
}

fn symbol_deviation<'a>(values: impl Iterator<Item = &'a Complex64>) -> f64 {
    values
        .map(|&v| (v - ZERO).norm().min((v - ONE).norm()))
        .fold(0.0, f64::max)
}

/// JSON operator description, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OperatorSpec {
    Mult { symbol: FunctionSpec },
    Dense { matrix: Vec<Vec<[f64; 2]>> },
    Rank1 { axis: FunctionSpec },
}

impl OperatorSpec {
    pub fn build(&self, grid: &Arc<Grid>) -> Result<Operator> {
        match self {
            OperatorSpec::Mult { symbol } => Ok(Operator::Multiplication(symbol.build(grid)?)),
            OperatorSpec::Rank1 { axis } => Operator::rank_one(axis.build(grid)?),
            OperatorSpec::Dense { matrix } => {
                let n = grid.len();
                if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
                    return Err(Error::InvalidOperator(format!(
                        "dense matrix must be {n}x{n} to match the grid"
                    )));
                }
                let m = DMatrix::from_fn(n, n, |j, k| Complex64::new(matrix[j][k][0], matrix[j][k][1]));
                Operator::dense(Arc::clone(grid), m)
            }
        }
    }
}

impl Serialize for Operator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_spec().serialize(s)
    }
}
