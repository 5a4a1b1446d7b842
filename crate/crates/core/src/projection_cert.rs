//! Identity batteries and certificates for "Γ₂(p) is an orthogonal projection".
//!
//! Each battery evaluates a family of identities that must hold when the
//! quadratic second quantization of `p` is an orthogonal projection, on a
//! seeded [`SampleSet`]. All of them hold exactly for multiplication by a
//! characteristic function; the certificate reports the worst residual of
//! each check and a witness for the first failing one.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{exp_kernel_closed, nparticle_table, ModelParams};
use crate::operators::{apply, infnorm_bound, infnorm_extremal, structural_report, weighted_frobenius, Operator, StructuralReport};
use crate::par::{self, Exec};
use crate::sampling::{cap_amplitude, SampleConfig, SampleSet};
use crate::testfn::{indicator, inner_unchecked, StepFunction};

/// Deepest grade used by the n-particle cross-check.
pub const NPARTICLE_MAX_GRADE: usize = 6;

/// Order in which failing checks supply the certificate witness.
const WITNESS_PRIORITY: &[&str] = &[
    "powers",
    "exponential",
    "nparticle",
    "reality",
    "cubic",
    "dual",
    "war",
    "idempotent",
    "selfadjoint",
    "contraction",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub check: String,
    pub f: StepFunction,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<StepFunction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    /// `None` when the check was skipped.
    pub max_residual: Option<f64>,
    pub passed: bool,
    pub samples: usize,
    /// Worst sample, kept only for failing checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckReport {
    fn skipped(name: &str, note: String) -> Self {
        Self { name: name.into(), max_residual: None, passed: false, samples: 0, witness: None, note: Some(note) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Projection,
    NotProjection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub verdict: Verdict,
    /// Whether the numeric verdict matches the structural classification
    /// "p is multiplication by a characteristic function".
    pub theorem_agreement: bool,
    pub structural: StructuralReport,
    pub checks: Vec<CheckReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub config: SampleConfig,
}

impl Certificate {
    pub fn check(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.name == name)
    }
}

type Item = (StepFunction, Option<StepFunction>);

struct Eval {
    residual: f64,
    item: usize,
    n: Option<usize>,
    t: Option<f64>,
}

fn summarize(name: &str, tol: f64, items: &[Item], evals: Vec<Eval>) -> CheckReport {
    let samples = evals.len();
    let mut worst: Option<Eval> = None;
    for e in evals {
        let r = if e.residual.is_nan() { f64::INFINITY } else { e.residual };
        if worst.as_ref().is_none_or(|w| r > w.residual) {
            worst = Some(Eval { residual: r, ..e });
        }
    }
    let max_residual = worst.as_ref().map_or(0.0, |w| w.residual);
    let passed = max_residual <= tol;
    let witness = match worst {
        Some(w) if !passed => Some(Witness {
            check: name.into(),
            f: items[w.item].0.clone(),
            g: items[w.item].1.clone(),
            n: w.n,
            t: w.t,
            residual: w.residual,
        }),
        _ => None,
    };
    CheckReport { name: name.into(), max_residual: Some(max_residual), passed, samples, witness, note: None }
}

/// `max |a_i - a_j| / max(1, max |a_i|)` over the three values.
fn triple_residual(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    let spread = (a - b).norm().max((a - c).norm()).max((b - c).norm());
    spread / 1.0f64.max(a.norm()).max(b.norm()).max(c.norm())
}

fn pair_items(pairs: Vec<(StepFunction, StepFunction)>) -> Vec<Item> {
    pairs.into_iter().map(|(f, g)| (f, Some(g))).collect()
}

fn single_items(fs: Vec<StepFunction>) -> Vec<Item> {
    fs.into_iter().map(|f| (f, None)).collect()
}

fn require_contraction(p: &Operator, cfg: &SampleConfig) -> Result<()> {
    let bound = infnorm_bound(p);
    if bound <= 1.0 + cfg.tol {
        Ok(())
    } else {
        Err(Error::NotAContraction(bound))
    }
}

fn prepare(p: &Operator, cfg: &SampleConfig) -> Result<SampleSet> {
    cfg.validate()?;
    Ok(SampleSet::generate(p.grid(), cfg))
}

/// `⟨Ψ(√t pf), Ψ(√t pg)⟩ = ⟨Ψ(√t pf), Ψ(√t g)⟩ = ⟨Ψ(√t f), Ψ(√t pg)⟩`.
pub fn battery_exponential(p: &Operator, cfg: &SampleConfig) -> Result<CheckReport> {
    let samples = prepare(p, cfg)?;
    exponential_with(p, cfg, &samples, Exec::default())
}

fn exponential_with(p: &Operator, cfg: &SampleConfig, samples: &SampleSet, exec: Exec) -> Result<CheckReport> {
    require_contraction(p, cfg)?;
    let items = pair_items(
        samples
            .pairs()
            .into_iter()
            .map(|(f, g)| (cap_amplitude(&f, cfg.amp), cap_amplitude(&g, cfg.amp)))
            .collect(),
    );
    let params = &cfg.params;
    let per_item = par::map(exec, &items, |(f, g)| -> Result<Vec<(f64, f64)>> {
        let g = g.as_ref().expect("pair item");
        let (pf, pg) = (apply(p, f)?, apply(p, g)?);
        cfg.t_grid
            .iter()
            .map(|&t| {
                let s = t.sqrt();
                let (f, g, pf, pg) = (f.scale_real(s), g.scale_real(s), pf.scale_real(s), pg.scale_real(s));
                let a = exp_kernel_closed(&pf, &pg, params)?;
                let b = exp_kernel_closed(&pf, &g, params)?;
                let c = exp_kernel_closed(&f, &pg, params)?;
                Ok((triple_residual(a, b, c), t))
            })
            .collect()
    });
    let mut evals = Vec::new();
    for (i, res) in per_item.into_iter().enumerate() {
        for (residual, t) in res? {
            evals.push(Eval { residual, item: i, n: None, t: Some(t) });
        }
    }
    Ok(summarize("exponential", cfg.tol, &items, evals))
}

/// `⟨(pf)ⁿ, (pg)ⁿ⟩ = ⟨fⁿ, (pg)ⁿ⟩ = ⟨(pf)ⁿ, gⁿ⟩` for `n = 1..n_max` (check
/// `powers`) and the same three-way identity for the n-particle inner
/// products up to grade `min(n_max, 6)` (check `nparticle`).
pub fn battery_powers(p: &Operator, cfg: &SampleConfig) -> Result<Vec<CheckReport>> {
    let samples = prepare(p, cfg)?;
    powers_with(p, cfg, &samples, Exec::default())
}

fn powers_with(p: &Operator, cfg: &SampleConfig, samples: &SampleSet, exec: Exec) -> Result<Vec<CheckReport>> {
    require_contraction(p, cfg)?;
    let items = pair_items(samples.pairs());
    let grades = cfg.n_max.min(NPARTICLE_MAX_GRADE);
    let params: &ModelParams = &cfg.params;
    let per_item = par::map(exec, &items, |(f, g)| -> Result<(Vec<f64>, Vec<f64>)> {
        let g = g.as_ref().expect("pair item");
        let (pf, pg) = (apply(p, f)?, apply(p, g)?);
        let mut power_res = Vec::with_capacity(cfg.n_max);
        let (mut fn_, mut gn, mut pfn, mut pgn) = (f.clone(), g.clone(), pf.clone(), pg.clone());
        for n in 1..=cfg.n_max {
            if n > 1 {
                fn_ = fn_.mul(f)?;
                gn = gn.mul(g)?;
                pfn = pfn.mul(&pf)?;
                pgn = pgn.mul(&pg)?;
            }
            power_res.push(triple_residual(
                inner_unchecked(&pfn, &pgn),
                inner_unchecked(&fn_, &pgn),
                inner_unchecked(&pfn, &gn),
            ));
        }
        let a = nparticle_table(&pf, &pg, grades, params)?;
        let b = nparticle_table(&pf, g, grades, params)?;
        let c = nparticle_table(f, &pg, grades, params)?;
        let grade_res = (1..=grades).map(|n| triple_residual(a[n], b[n], c[n])).collect();
        Ok((power_res, grade_res))
    });
    let (mut powers, mut grades_ev) = (Vec::new(), Vec::new());
    for (i, res) in per_item.into_iter().enumerate() {
        let (pr, gr) = res?;
        powers.extend(pr.into_iter().enumerate().map(|(k, r)| Eval { residual: r, item: i, n: Some(k + 1), t: None }));
        grades_ev.extend(gr.into_iter().enumerate().map(|(k, r)| Eval { residual: r, item: i, n: Some(k + 1), t: None }));
    }
    Ok(vec![
        summarize("powers", cfg.tol, &items, powers),
        summarize("nparticle", cfg.tol, &items, grades_ev),
    ])
}

/// `reality`: `‖p(f̄) - conj(p f)‖₂`; `cubic`: `‖|pg|² pg - (pg)² ḡ‖₂`.
pub fn pointwise_checks(p: &Operator, cfg: &SampleConfig) -> Result<Vec<CheckReport>> {
    let samples = prepare(p, cfg)?;
    pointwise_with(p, cfg, &samples, Exec::default())
}

fn pointwise_with(p: &Operator, cfg: &SampleConfig, samples: &SampleSet, exec: Exec) -> Result<Vec<CheckReport>> {
    let items = single_items(samples.functions());
    let per_item = par::map(exec, &items, |(f, _)| -> Result<(f64, f64)> {
        let pf = apply(p, f)?;
        let reality = apply(p, &f.conj())?.sub(&pf.conj())?.l2_norm();
        let lhs = pf.abs_sqr().mul(&pf)?;
        let rhs = pf.mul(&pf)?.mul(&f.conj())?;
        Ok((reality, lhs.sub(&rhs)?.l2_norm()))
    });
    let (mut reality, mut cubic) = (Vec::new(), Vec::new());
    for (i, res) in per_item.into_iter().enumerate() {
        let (r, c) = res?;
        reality.push(Eval { residual: r, item: i, n: None, t: None });
        cubic.push(Eval { residual: c, item: i, n: None, t: None });
    }
    Ok(vec![
        summarize("reality", cfg.tol, &items, reality),
        summarize("cubic", cfg.tol, &items, cubic),
    ])
}

/// `war`: `M_{(pg)²} = p M_{g²} p`; `dual`: `M_{pf·ḡ} p = p M_{f·conj(pg)}`;
/// plus `idempotent` (`p² = p`) and `selfadjoint` (`p* = p`). Residuals are
/// volume-weighted Frobenius norms.
pub fn operator_checks(p: &Operator, cfg: &SampleConfig) -> Result<Vec<CheckReport>> {
    let samples = prepare(p, cfg)?;
    operator_with(p, cfg, &samples, Exec::default())
}

fn operator_with(p: &Operator, cfg: &SampleConfig, samples: &SampleSet, exec: Exec) -> Result<Vec<CheckReport>> {
    let grid = p.grid();
    let m = p.to_matrix();
    let n = m.nrows();
    let scale_rows = |a: &StepFunction, mat: &DMatrix<Complex64>| {
        let av = a.values();
        DMatrix::from_fn(n, n, |j, k| av[j] * mat[(j, k)])
    };
    let scale_cols = |mat: &DMatrix<Complex64>, b: &StepFunction| {
        let bv = b.values();
        DMatrix::from_fn(n, n, |j, k| mat[(j, k)] * bv[k])
    };

    let singles = single_items(samples.functions());
    let war = par::map(exec, &singles, |(g, _)| -> Result<f64> {
        let pg = apply(p, g)?;
        let lhs = DMatrix::from_diagonal(&pg.mul(&pg)?.values().to_vec().into());
        let rhs = scale_cols(&m, &g.mul(g)?) * &m;
        Ok(weighted_frobenius(grid, &(lhs - rhs)))
    });
    let pairs = pair_items(samples.sparse_pairs());
    let dual = par::map(exec, &pairs, |(f, g)| -> Result<f64> {
        let g = g.as_ref().expect("pair item");
        let (pf, pg) = (apply(p, f)?, apply(p, g)?);
        let lhs = scale_rows(&pf.mul(&g.conj())?, &m);
        let rhs = scale_cols(&m, &f.mul(&pg.conj())?);
        Ok(weighted_frobenius(grid, &(lhs - rhs)))
    });
    let collect = |rs: Vec<Result<f64>>| -> Result<Vec<Eval>> {
        rs.into_iter()
            .enumerate()
            .map(|(i, r)| r.map(|residual| Eval { residual, item: i, n: None, t: None }))
            .collect()
    };

    let idem = &m * &m - &m;
    let star = crate::operators::adjoint(p).to_matrix() - &m;
    let basis = single_items((0..n).map(|k| indicator(grid, &[k]).expect("cell in range")).collect());
    let column_evals = |d: &DMatrix<Complex64>| -> Vec<Eval> {
        let vols = grid.volumes();
        (0..n)
            .map(|k| Eval {
                residual: (0..n).map(|j| d[(j, k)].norm_sqr() * vols[j]).sum::<f64>().sqrt(),
                item: k,
                n: None,
                t: None,
            })
            .collect()
    };
    let with_total = |mut report: CheckReport, total: f64| {
        report.max_residual = Some(total);
        report.passed = total <= cfg.tol;
        if report.passed {
            report.witness = None;
        }
        report
    };

    Ok(vec![
        summarize("war", cfg.tol, &singles, collect(war)?),
        summarize("dual", cfg.tol, &pairs, collect(dual)?),
        with_total(
            summarize("idempotent", cfg.tol, &basis, column_evals(&idem)),
            weighted_frobenius(grid, &idem),
        ),
        with_total(
            summarize("selfadjoint", cfg.tol, &basis, column_evals(&star)),
            weighted_frobenius(grid, &star),
        ),
    ])
}

fn contraction_check(p: &Operator, tol: f64) -> CheckReport {
    let bound = infnorm_bound(p);
    let excess = (bound - 1.0).max(0.0);
    let passed = bound <= 1.0 + tol;
    CheckReport {
        name: "contraction".into(),
        max_residual: Some(excess),
        passed,
        samples: 1,
        witness: (!passed).then(|| Witness {
            check: "contraction".into(),
            f: infnorm_extremal(p),
            g: None,
            n: None,
            t: None,
            residual: excess,
        }),
        note: None,
    }
}

pub fn certify(p: &Operator, cfg: &SampleConfig) -> Result<Certificate> {
    certify_with(p, cfg, Exec::default())
}

/// Runs the structural report and every battery. Fails only on an invalid
/// configuration; non-contractions yield a `NotProjection` certificate with
/// the sampling batteries skipped.
pub fn certify_with(p: &Operator, cfg: &SampleConfig, exec: Exec) -> Result<Certificate> {
    let samples = prepare(p, cfg)?;
    let structural = structural_report(p, cfg.tol);

    let contraction = contraction_check(p, cfg.tol);
    let contractive = contraction.passed;
    let mut checks = vec![contraction];
    if contractive {
        checks.push(exponential_with(p, cfg, &samples, exec)?);
        checks.extend(powers_with(p, cfg, &samples, exec)?);
    } else {
        let note = format!(
            "skipped: infinity-norm bound {} exceeds 1, quadratic second quantization undefined",
            infnorm_bound(p)
        );
        for name in ["exponential", "powers", "nparticle"] {
            checks.push(CheckReport::skipped(name, note.clone()));
        }
    }
    checks.extend(pointwise_with(p, cfg, &samples, exec)?);
    checks.extend(operator_with(p, cfg, &samples, exec)?);

    let projection = checks.iter().all(|c| c.passed);
    let verdict = if projection { Verdict::Projection } else { Verdict::NotProjection };
    let witness = if projection {
        None
    } else {
        WITNESS_PRIORITY
            .iter()
            .filter_map(|name| checks.iter().find(|c| c.name == *name))
            .find_map(|c| c.witness.clone())
    };
    Ok(Certificate {
        verdict,
        theorem_agreement: projection == structural.is_char_mult.holds,
        structural,
        checks,
        witness,
        config: cfg.clone(),
    })
}

/// `G[i,j] = ⟨Ψ(f_i), Ψ(f_j)⟩`, every entry evaluated independently.
pub fn gram_matrix(functions: &[StepFunction], params: &ModelParams) -> Result<DMatrix<Complex64>> {
    gram_matrix_with(functions, params, Exec::default())
}

pub fn gram_matrix_with(functions: &[StepFunction], params: &ModelParams, exec: Exec) -> Result<DMatrix<Complex64>> {
    let n = functions.len();
    if let Some(first) = functions.first() {
        for f in functions {
            first.check_compatible(f)?;
        }
    }
    let rows = par::map(exec, functions, |fi| -> Result<Vec<Complex64>> {
        functions.iter().map(|fj| exp_kernel_closed(fi, fj, params)).collect()
    });
    let mut g = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row?.into_iter().enumerate() {
            g[(i, j)] = v;
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramSummary {
    pub size: usize,
    /// `max |G[i,j] - conj(G[j,i])|`.
    pub hermitian_residual: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `max |λ| / min |λ|`; infinite for a singular matrix.
    pub condition_number: f64,
    pub determinant_modulus: f64,
}

pub fn gram_summary(g: &DMatrix<Complex64>) -> GramSummary {
    let n = g.nrows();
    let mut herm = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            herm = herm.max((g[(i, j)] - g[(j, i)].conj()).norm());
        }
    }
    // symmetrize before the Hermitian eigensolver
    let sym = (g + g.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym).eigenvalues;
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_abs = eig.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    let max_abs = eig.iter().map(|x| x.abs()).fold(0.0, f64::max);
    GramSummary {
        size: n,
        hermitian_residual: herm,
        min_eigenvalue: min,
        max_eigenvalue: max,
        condition_number: if min_abs > 0.0 { max_abs / min_abs } else { f64::INFINITY },
        determinant_modulus: g.clone().determinant().norm(),
    }
}
