//! Inner products in the quadratic Fock space.
//!
//! Three routes to the same numbers:
//!
//! * [`nparticle_inner`] evaluates the n-particle recursion bottom-up from the
//!   vacuum, `⟨Φ,Φ⟩ = 1`;
//! * [`exp_kernel_closed`] evaluates the exponential-vector kernel
//!   `exp(-c/2 ∫ ln(1 - 4 f̄ g))` exactly on step functions;
//! * [`exp_kernel_series`] and [`kernel_taylor`] expand
//!   `t ↦ ⟨Ψ(√t f), Ψ(√t g)⟩ = Σ_m t^m ⟨B⁺ᵐ_f Φ, B⁺ᵐ_g Φ⟩ / (m!)²`,
//!   the first with a rigorous truncation bound, the second by power-series
//!   composition.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::PowerSeries;
use crate::testfn::{inner_unchecked, StepFunction};

/// Largest grade accepted by [`nparticle_inner`].
pub const MAX_GRADE: usize = 150;
/// Term cap for [`exp_kernel_series`].
pub const MAX_SERIES_TERMS: usize = 500;
pub const DEFAULT_SERIES_REL_TOL: f64 = 1e-12;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// The central constant `c` of the commutation relations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ModelParams {
    c: f64,
}

#[derive(Deserialize)]
struct RawParams {
    c: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.c)
    }
}

impl ModelParams {
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParams(format!("c must be positive and finite, got {c}")));
        }
        Ok(Self { c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { c: 1.0 }
    }
}

/// Truncated kernel series with its error bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesResult {
    pub value: Complex64,
    pub terms_used: usize,
    /// Truncation bound plus a floating-point allowance for the summed terms.
    pub tail_bound: f64,
    /// Cauchy–Schwarz bound `‖B⁺ᵐ_f Φ‖ ‖B⁺ᵐ_g Φ‖ / (m!)²` per term.
    pub term_magnitudes: Vec<f64>,
}

/// `⟨B⁺ⁿ_f Φ, B⁺ⁿ_g Φ⟩` by the grade recursion
/// `⟨m⟩ = c Σ_{k<m} 2^{2k+1} m!(m-1)!/((m-k-1)!)² ⟨f^{k+1}, g^{k+1}⟩ ⟨m-k-1⟩`.
pub fn nparticle_inner(f: &StepFunction, g: &StepFunction, n: usize, params: &ModelParams) -> Result<Complex64> {
    Ok(nparticle_table(f, g, n, params)?[n])
}

/// All grades `0..=n` of [`nparticle_inner`] from one pass.
pub fn nparticle_table(
    f: &StepFunction,
    g: &StepFunction,
    n: usize,
    params: &ModelParams,
) -> Result<Vec<Complex64>> {
    f.check_compatible(g)?;
    if n > MAX_GRADE {
        return Err(Error::Overflow(format!("grade {n} exceeds the supported maximum {MAX_GRADE}")));
    }
    let c = params.c();

    // powers[j] = ⟨f^{j+1}, g^{j+1}⟩
    let mut powers = Vec::with_capacity(n);
    let (mut fp, mut gp) = (f.clone(), g.clone());
    for j in 0..n {
        if j > 0 {
            fp = fp.mul(f)?;
            gp = gp.mul(g)?;
        }
        powers.push(inner_unchecked(&fp, &gp));
    }

    let mut table = Vec::with_capacity(n + 1);
    table.push(ONE);
    for m in 1..=n {
        // coefficient c 2^{2k+1} m!(m-1)!/((m-k-1)!)², starting at 2cm for k = 0
        let mut coef = 2.0 * c * m as f64;
        let mut acc = ZERO;
        for k in 0..m {
            acc += powers[k] * table[m - k - 1] * coef;
            let r = (m - k - 1) as f64;
            coef *= 4.0 * r * r;
        }
        if !acc.is_finite() {
            return Err(Error::Overflow(format!("grade {m} inner product is not representable")));
        }
        table.push(acc);
    }
    Ok(table)
}

/// Growth factor `4m(m-1)‖f‖∞² + 2mc‖f‖₂²` with
/// `⟨B⁺ᵐ_f Φ, B⁺ᵐ_f Φ⟩ ≤ factor · ⟨B⁺⁽ᵐ⁻¹⁾_f Φ, B⁺⁽ᵐ⁻¹⁾_f Φ⟩`.
pub fn growth_factor(f: &StepFunction, m: usize, params: &ModelParams) -> f64 {
    let m = m as f64;
    let sup = f.linf_norm();
    4.0 * m * (m - 1.0) * sup * sup + 2.0 * m * params.c() * f.l2_norm_sqr()
}

fn require_exists(f: &StepFunction, name: &str) -> Result<()> {
    if f.linf_norm() >= 0.5 {
        Err(Error::ExistenceViolation(format!("||{name}||_inf >= 0.5")))
    } else {
        Ok(())
    }
}

fn require_product_bound(f: &StepFunction, g: &StepFunction) -> Result<()> {
    if f.linf_norm() * g.linf_norm() >= 0.25 {
        Err(Error::ExistenceViolation("||f||_inf * ||g||_inf >= 0.25".into()))
    } else {
        Ok(())
    }
}

/// `4 conj(f_k) g_k` per cell.
fn cell_weights(f: &StepFunction, g: &StepFunction) -> Vec<Complex64> {
    f.values().iter().zip(g.values()).map(|(a, b)| a.conj() * b * 4.0).collect()
}

/// `⟨Ψ(f), Ψ(g)⟩ = exp(-c/2 Σ_k ln(1 - 4 conj(f_k) g_k) vol_k)`, principal branch.
pub fn exp_kernel_closed(f: &StepFunction, g: &StepFunction, params: &ModelParams) -> Result<Complex64> {
    f.check_compatible(g)?;
    require_exists(f, "f")?;
    require_exists(g, "g")?;
    let exponent: Complex64 = cell_weights(f, g)
        .into_iter()
        .zip(f.grid().volumes())
        .map(|(w, vol)| (ONE - w).ln() * *vol)
        .sum();
    Ok((exponent * (-0.5 * params.c())).exp())
}

/// One step of `m b_m = c Σ_{j=1}^m q_j b_{m-j}`, where
/// `q_j = 2^{2j-1} ⟨f^j, g^j⟩ = ½ Σ_k vol_k (4 conj(f_k) g_k)^j`.
struct NormalizedGrades {
    weights: Vec<Complex64>,
    cell_powers: Vec<Complex64>,
    vols: Vec<f64>,
    q: Vec<Complex64>,
    b: Vec<Complex64>,
    c: f64,
}

impl NormalizedGrades {
    fn new(weights: Vec<Complex64>, vols: &[f64], c: f64) -> Self {
        let n = weights.len();
        Self {
            weights,
            cell_powers: vec![ONE; n],
            vols: vols.to_vec(),
            q: vec![ZERO],
            b: vec![ONE],
            c,
        }
    }

    fn advance(&mut self) -> Complex64 {
        let m = self.b.len();
        let mut qm = ZERO;
        for ((p, w), vol) in self.cell_powers.iter_mut().zip(&self.weights).zip(&self.vols) {
            *p *= w;
            qm += *p * *vol;
        }
        self.q.push(qm * 0.5);
        let acc: Complex64 = (1..=m).map(|j| self.q[j] * self.b[m - j]).sum();
        let bm = acc * (self.c / m as f64);
        self.b.push(bm);
        bm
    }
}

/// Sums `Σ_m ⟨B⁺ᵐ_f Φ, B⁺ᵐ_g Φ⟩ / (m!)²` until the certified tail is below
/// `rel_tol · |partial sum|`.
///
/// The tail after term `M` is bounded by Cauchy–Schwarz and the growth factor:
/// with `β_m(f) = ‖B⁺ᵐ_f Φ‖² / (m!)²`, each later ratio `β_{i}/β_{i-1}` is at most
/// `r_f = max(4‖f‖∞², 4‖f‖∞²·M/(M+1) + 2c‖f‖₂²/(M+1))`, so with `r = sqrt(r_f r_g) < 1`
/// the tail is at most `sqrt(β_M(f) β_M(g)) · r / (1 - r)`.
pub fn exp_kernel_series(
    f: &StepFunction,
    g: &StepFunction,
    params: &ModelParams,
    rel_tol: f64,
) -> Result<SeriesResult> {
    f.check_compatible(g)?;
    require_product_bound(f, g)?;
    if !(rel_tol.is_finite() && rel_tol > 0.0) {
        return Err(Error::InvalidParams(format!("rel_tol must be positive, got {rel_tol}")));
    }
    let c = params.c();
    let vols = f.grid().volumes();
    let self_weights = |h: &StepFunction| -> Vec<Complex64> {
        h.values().iter().map(|v| Complex64::new(4.0 * v.norm_sqr(), 0.0)).collect()
    };

    let mut cross = NormalizedGrades::new(cell_weights(f, g), vols, c);
    let mut norm_f = NormalizedGrades::new(self_weights(f), vols, c);
    let mut norm_g = NormalizedGrades::new(self_weights(g), vols, c);

    let (sup_f, sup_g) = (f.linf_norm(), g.linf_norm());
    let (l2_f, l2_g) = (f.l2_norm_sqr(), g.l2_norm_sqr());
    let ratio_cap = |sup: f64, l2: f64, next: usize| -> f64 {
        let i = next as f64;
        let limit = 4.0 * sup * sup;
        limit.max(limit * (i - 1.0) / i + 2.0 * c * l2 / i)
    };

    let mut sum = ONE;
    let mut beta = (1.0_f64, 1.0_f64);
    let mut term_magnitudes = vec![1.0];
    let mut magnitude_sum = 1.0;
    let mut m = 0;
    loop {
        let r = (ratio_cap(sup_f, l2_f, m + 1) * ratio_cap(sup_g, l2_g, m + 1)).sqrt();
        if r < 1.0 {
            let lead = (beta.0 * beta.1).sqrt();
            let truncation = lead * r / (1.0 - r);
            if truncation <= rel_tol * sum.norm() {
                let rounding = 8.0 * (m + 1) as f64 * f64::EPSILON * magnitude_sum;
                return Ok(SeriesResult {
                    value: sum,
                    terms_used: m + 1,
                    tail_bound: truncation + rounding,
                    term_magnitudes,
                });
            }
        }
        if m + 1 >= MAX_SERIES_TERMS {
            return Err(Error::NoConvergence(MAX_SERIES_TERMS));
        }
        m += 1;
        sum += cross.advance();
        beta = (norm_f.advance().re, norm_g.advance().re);
        let mag = (beta.0 * beta.1).sqrt();
        term_magnitudes.push(mag);
        magnitude_sum += mag;
    }
}

/// Taylor coefficients `a_0..a_N` of `t ↦ ⟨Ψ(√t f), Ψ(√t g)⟩`, obtained as
/// `exp(-c/2 Σ_k vol_k ln(1 - 4 conj(f_k) g_k t))` in truncated power-series
/// arithmetic. `(n!)² a_n = ⟨B⁺ⁿ_f Φ, B⁺ⁿ_g Φ⟩`.
pub fn kernel_taylor(f: &StepFunction, g: &StepFunction, params: &ModelParams, order: usize) -> Result<Vec<Complex64>> {
    f.check_compatible(g)?;
    require_product_bound(f, g)?;
    let mut log_series = PowerSeries::zero(order);
    for (w, vol) in cell_weights(f, g).into_iter().zip(f.grid().volumes()) {
        log_series = &log_series + &PowerSeries::log_one_minus(w, order).scale(Complex64::new(*vol, 0.0));
    }
    Ok(log_series.scale(Complex64::new(-0.5 * params.c(), 0.0)).exp().into_coeffs())
}
