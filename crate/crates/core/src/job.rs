//! JSON job files in, CSV / JSON / Markdown reports out.
//!
//! A job names one command, a grid, named step functions and the
//! command-specific knobs. Every report is produced in memory first, so an
//! invalid job never leaves partial files behind.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Deserialize;
use thiserror::Error;

use crate::fock::{exp_kernel_closed, exp_kernel_series, kernel_taylor, nparticle_table, ModelParams, DEFAULT_SERIES_REL_TOL};
use crate::normal_order::bb_inner;
use crate::operators::OperatorSpec;
use crate::par::{self, Exec};
use crate::projection_cert::{certify_with, gram_matrix_with, gram_summary, Certificate, Verdict};
use crate::sampling::{SampleConfig, SampleSet};
use crate::testfn::{FunctionSpec, Grid, StepFunction};

/// Floor for the smallest Gram eigenvalue.
pub const GRAM_PSD_FLOOR: f64 = -1e-10;
pub const DEFAULT_CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum JobError {
    #[error("input error: {0}")]
    Input(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl JobError {
    fn input(msg: impl Into<String>) -> Self {
        JobError::Input(msg.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Kernel,
    Nparticle,
    VerifyRecursion,
    TaylorCheck,
    Certify,
    Gram,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMethod {
    #[default]
    Closed,
    Series,
    Both,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn to_vec(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(x) => vec![*x],
            OneOrMany::Many(xs) => xs.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub command: Command,
    pub grid: Grid,
    #[serde(default)]
    pub functions: BTreeMap<String, FunctionSpec>,
    /// `[f_name, g_name]` pairs; defaults to every ordered pair of `functions`.
    #[serde(default)]
    pub pairs: Option<Vec<[String; 2]>>,
    /// One or more values of the constant `c`.
    #[serde(default)]
    pub c: Option<OneOrMany>,
    /// Highest grade for `nparticle`, `verify-recursion` and `taylor-check`.
    #[serde(default)]
    pub n_max: Option<usize>,
    #[serde(default)]
    pub method: KernelMethod,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    /// Pass threshold for `verify-recursion` and `taylor-check`.
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub operator: Option<OperatorSpec>,
    #[serde(default)]
    pub sample: SampleConfig,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<String>,
}

/// Command-line overrides applied on top of a job file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, String)>,
    pub passed: bool,
    pub summary: String,
}

impl Report {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, contents) in &self.files {
            std::fs::write(dir.join(name), contents)?;
        }
        Ok(())
    }
}

pub fn parse_job(text: &str) -> Result<JobSpec, JobError> {
    serde_json::from_str(text).map_err(|e| JobError::input(format!("malformed job: {e}")))
}

pub fn load_job(path: &Path) -> Result<JobSpec, JobError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| JobError::input(format!("cannot read job file {}: {e}", path.display())))?;
    parse_job(&text)
}

/// Shortest representation that round-trips.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

struct Context {
    grid: Arc<Grid>,
    functions: BTreeMap<String, StepFunction>,
    cs: Vec<ModelParams>,
    sample: SampleConfig,
    check_tol: f64,
}

type NamedPair = (String, String, StepFunction, StepFunction);

impl Context {
    fn new(job: &JobSpec, ov: Overrides) -> Result<Self, JobError> {
        let grid = job.grid.clone().into_shared();
        let mut functions = BTreeMap::new();
        for (name, spec) in &job.functions {
            let f = spec
                .build(&grid)
                .map_err(|e| JobError::input(format!("functions.{name}: {e}")))?;
            functions.insert(name.clone(), f);
        }
        let mut cs: Vec<ModelParams> = job
            .c
            .as_ref()
            .map_or_else(|| vec![job.sample.params.c()], |c| c.to_vec())
            .into_iter()
            .map(|c| ModelParams::new(c).map_err(|e| JobError::input(format!("c: {e}"))))
            .collect::<Result<_, _>>()?;
        if cs.is_empty() {
            return Err(JobError::input("c: at least one value is required"));
        }
        cs.sort_by(|a, b| a.c().total_cmp(&b.c()));
        cs.dedup();

        let mut sample = job.sample.clone();
        if let Some(seed) = ov.seed {
            sample.seed = seed;
        }
        if let Some(tol) = ov.tol {
            sample.tol = tol;
        }
        sample.validate().map_err(|e| JobError::input(format!("sample: {e}")))?;
        let check_tol = ov.tol.or(job.tol).unwrap_or(DEFAULT_CHECK_TOL);
        if !(check_tol.is_finite() && check_tol > 0.0) {
            return Err(JobError::input(format!("tol: must be positive, got {check_tol}")));
        }
        Ok(Self { grid, functions, cs, sample, check_tol })
    }

    fn lookup(&self, name: &str, field: &str) -> Result<StepFunction, JobError> {
        self.functions
            .get(name)
            .cloned()
            .ok_or_else(|| JobError::input(format!("{field}: unknown function '{name}'")))
    }

    /// Named pairs from `pairs`, else all ordered pairs of `functions`.
    fn named_pairs(&self, job: &JobSpec) -> Result<Vec<NamedPair>, JobError> {
        match &job.pairs {
            Some(pairs) => {
                let mut out = pairs
                    .iter()
                    .map(|[a, b]| Ok((a.clone(), b.clone(), self.lookup(a, "pairs")?, self.lookup(b, "pairs")?)))
                    .collect::<Result<Vec<_>, JobError>>()?;
                out.sort_by(|x, y| (&x.0, &x.1).cmp(&(&y.0, &y.1)));
                out.dedup_by(|x, y| x.0 == y.0 && x.1 == y.1);
                Ok(out)
            }
            None => Ok(self
                .functions
                .iter()
                .flat_map(|(a, f)| {
                    self.functions.iter().map(move |(b, g)| (a.clone(), b.clone(), f.clone(), g.clone()))
                })
                .collect()),
        }
    }

    /// As [`Self::named_pairs`], falling back to seeded random pairs when the job has no functions.
    fn pairs_or_samples(&self, job: &JobSpec) -> Result<Vec<NamedPair>, JobError> {
        if job.pairs.is_some() || !self.functions.is_empty() {
            return self.named_pairs(job);
        }
        let samples = SampleSet::generate(&self.grid, &self.sample);
        Ok(samples
            .random_pairs
            .into_iter()
            .enumerate()
            .map(|(i, (f, g))| (format!("sample{i:03}_f"), format!("sample{i:03}_g"), f, g))
            .collect())
    }
}

pub fn run(job: &JobSpec, ov: Overrides) -> Result<Report, JobError> {
    run_with(job, ov, Exec::default())
}

pub fn run_with(job: &JobSpec, ov: Overrides, exec: Exec) -> Result<Report, JobError> {
    let ctx = Context::new(job, ov)?;
    match job.command {
        Command::Kernel => run_kernel(job, &ctx),
        Command::Nparticle => run_nparticle(job, &ctx),
        Command::VerifyRecursion => run_verify(job, &ctx, exec),
        Command::TaylorCheck => run_taylor(job, &ctx),
        Command::Certify => run_certify(job, &ctx, exec),
        Command::Gram => run_gram(&ctx, exec),
    }
}

fn require_pairs(pairs: &[NamedPair], command: &str) -> Result<(), JobError> {
    if pairs.is_empty() {
        Err(JobError::input(format!("functions: {command} requires at least one function")))
    } else {
        Ok(())
    }
}

fn run_kernel(job: &JobSpec, ctx: &Context) -> Result<Report, JobError> {
    let pairs = ctx.named_pairs(job)?;
    require_pairs(&pairs, "kernel")?;
    let rel_tol = job.rel_tol.unwrap_or(DEFAULT_SERIES_REL_TOL);
    let mut csv = String::from("f_name,g_name,c,value_re,value_im,method,tail_bound\n");
    for (a, b, f, g) in &pairs {
        for params in &ctx.cs {
            let context = |e: crate::Error| JobError::input(format!("kernel(f=\"{a}\", g=\"{b}\"): {e}"));
            if matches!(job.method, KernelMethod::Closed | KernelMethod::Both) {
                let v = exp_kernel_closed(f, g, params).map_err(context)?;
                writeln!(csv, "{a},{b},{},{},{},closed,", fmt_f64(params.c()), fmt_f64(v.re), fmt_f64(v.im)).unwrap();
            }
            if matches!(job.method, KernelMethod::Series | KernelMethod::Both) {
                let s = exp_kernel_series(f, g, params, rel_tol).map_err(context)?;
                writeln!(
                    csv,
                    "{a},{b},{},{},{},series,{}",
                    fmt_f64(params.c()),
                    fmt_f64(s.value.re),
                    fmt_f64(s.value.im),
                    fmt_f64(s.tail_bound)
                )
                .unwrap();
            }
        }
    }
    let rows = csv.lines().count() - 1;
    Ok(Report { files: vec![("kernel.csv".into(), csv)], passed: true, summary: format!("kernel: {rows} rows") })
}

fn run_nparticle(job: &JobSpec, ctx: &Context) -> Result<Report, JobError> {
    let pairs = ctx.named_pairs(job)?;
    require_pairs(&pairs, "nparticle")?;
    let n_max = job.n_max.unwrap_or(4);
    let mut csv = String::from("f,g,n,c,value_re,value_im\n");
    for (a, b, f, g) in &pairs {
        for params in &ctx.cs {
            let table = nparticle_table(f, g, n_max, params)
                .map_err(|e| JobError::input(format!("nparticle(f=\"{a}\", g=\"{b}\"): {e}")))?;
            for (n, v) in table.iter().enumerate() {
                writeln!(csv, "{a},{b},{n},{},{},{}", fmt_f64(params.c()), fmt_f64(v.re), fmt_f64(v.im)).unwrap();
            }
        }
    }
    Ok(Report { files: vec![("nparticle.csv".into(), csv)], passed: true, summary: format!("nparticle: grades 0..={n_max}") })
}

fn rel_err(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

fn run_verify(job: &JobSpec, ctx: &Context, exec: Exec) -> Result<Report, JobError> {
    let pairs = ctx.pairs_or_samples(job)?;
    require_pairs(&pairs, "verify-recursion")?;
    let n_max = job.n_max.unwrap_or(6);
    if n_max > 8 {
        return Err(JobError::input(format!("n_max: the rewriting oracle supports grades up to 8, got {n_max}")));
    }
    let work: Vec<(&NamedPair, ModelParams)> =
        pairs.iter().flat_map(|p| ctx.cs.iter().map(move |c| (p, *c))).collect();
    let errs = par::map(exec, &work, |((a, b, f, g), params)| -> Result<Vec<f64>, JobError> {
        let context = |e: crate::Error| JobError::input(format!("verify-recursion(f=\"{a}\", g=\"{b}\"): {e}"));
        let rec = nparticle_table(f, g, n_max, params).map_err(context)?;
        (0..=n_max)
            .map(|n| Ok(rel_err(rec[n], bb_inner(f, g, n, n, params).map_err(context)?)))
            .collect()
    });
    let mut worst = vec![0.0f64; n_max + 1];
    for e in errs {
        for (w, x) in worst.iter_mut().zip(e?) {
            *w = w.max(if x.is_nan() { f64::INFINITY } else { x });
        }
    }
    let mut csv = String::from("n,max_rel_err,pass\n");
    let mut passed = true;
    for (n, w) in worst.iter().enumerate() {
        let ok = *w <= ctx.check_tol;
        passed &= ok;
        writeln!(csv, "{n},{},{ok}", fmt_f64(*w)).unwrap();
    }
    Ok(Report {
        files: vec![("verify_recursion.csv".into(), csv)],
        passed,
        summary: format!("verify-recursion: {} pairs x {} c values, {}", pairs.len(), ctx.cs.len(), pass_word(passed)),
    })
}

fn run_taylor(job: &JobSpec, ctx: &Context) -> Result<Report, JobError> {
    let pairs = ctx.pairs_or_samples(job)?;
    require_pairs(&pairs, "taylor-check")?;
    let n_max = job.n_max.unwrap_or(8);
    let mut csv = String::from("f,g,c,n,lhs_re,lhs_im,rhs_re,rhs_im,rel_err,pass\n");
    let mut passed = true;
    for (a, b, f, g) in &pairs {
        for params in &ctx.cs {
            let context = |e: crate::Error| JobError::input(format!("taylor-check(f=\"{a}\", g=\"{b}\"): {e}"));
            let coeffs = kernel_taylor(f, g, params, n_max).map_err(context)?;
            let rec = nparticle_table(f, g, n_max, params).map_err(context)?;
            let mut fact = 1.0f64;
            for n in 0..=n_max {
                if n > 0 {
                    fact *= n as f64;
                }
                let lhs = coeffs[n] * (fact * fact);
                let err = rel_err(lhs, rec[n]);
                let ok = err <= ctx.check_tol;
                passed &= ok;
                writeln!(
                    csv,
                    "{a},{b},{},{n},{},{},{},{},{},{ok}",
                    fmt_f64(params.c()),
                    fmt_f64(lhs.re),
                    fmt_f64(lhs.im),
                    fmt_f64(rec[n].re),
                    fmt_f64(rec[n].im),
                    fmt_f64(err)
                )
                .unwrap();
            }
        }
    }
    Ok(Report {
        files: vec![("taylor_check.csv".into(), csv)],
        passed,
        summary: format!("taylor-check: {}", pass_word(passed)),
    })
}

fn run_certify(job: &JobSpec, ctx: &Context, exec: Exec) -> Result<Report, JobError> {
    let spec = job.operator.as_ref().ok_or_else(|| JobError::input("operator: certify requires an operator"))?;
    let p = spec.build(&ctx.grid).map_err(|e| JobError::input(format!("operator: {e}")))?;
    let mut cfg = ctx.sample.clone();
    if job.c.is_some() {
        if ctx.cs.len() != 1 {
            return Err(JobError::input("c: certify takes a single value"));
        }
        cfg.params = ctx.cs[0];
    }
    let cert = certify_with(&p, &cfg, exec).map_err(|e| JobError::input(format!("sample: {e}")))?;
    let passed = cert.verdict == Verdict::Projection;
    let json = serde_json::to_string_pretty(&cert).expect("certificate serializes") + "\n";
    Ok(Report {
        files: vec![
            ("certificate.json".into(), json),
            ("certificate.csv".into(), certificate_csv(&cert)),
            ("certificate.md".into(), certificate_markdown(&cert, p.kind())),
        ],
        passed,
        summary: format!("certify: {:?}, theorem agreement {}", cert.verdict, cert.theorem_agreement),
    })
}

fn certificate_csv(cert: &Certificate) -> String {
    let mut csv = String::from("check,max_residual,passed,samples\n");
    for c in &cert.checks {
        let r = c.max_residual.map(fmt_f64).unwrap_or_else(|| "skipped".into());
        writeln!(csv, "{},{r},{},{}", c.name, c.passed, c.samples).unwrap();
    }
    csv
}

fn certificate_markdown(cert: &Certificate, kind: &str) -> String {
    let mut md = String::new();
    writeln!(md, "# Projection certificate\n").unwrap();
    writeln!(md, "- operator kind: `{kind}`").unwrap();
    writeln!(md, "- verdict: **{:?}**", cert.verdict).unwrap();
    writeln!(md, "- characteristic multiplication: {}", cert.structural.is_char_mult.holds).unwrap();
    writeln!(md, "- theorem agreement: {}", cert.theorem_agreement).unwrap();
    writeln!(md, "- seed: {}, tol: {}\n", cert.config.seed, fmt_f64(cert.config.tol)).unwrap();
    writeln!(md, "| check | max residual | passed | samples |").unwrap();
    writeln!(md, "|---|---|---|---|").unwrap();
    for c in &cert.checks {
        let r = c.max_residual.map(fmt_f64).unwrap_or_else(|| "skipped".into());
        writeln!(md, "| {} | {r} | {} | {} |", c.name, c.passed, c.samples).unwrap();
    }
    if let Some(w) = &cert.witness {
        let at = match (w.n, w.t) {
            (Some(n), _) => format!(" at n = {n}"),
            (_, Some(t)) => format!(" at t = {}", fmt_f64(t)),
            _ => String::new(),
        };
        writeln!(md, "\nWitness: check `{}`{at}, residual {}.", w.check, fmt_f64(w.residual)).unwrap();
    }
    md
}

fn run_gram(ctx: &Context, exec: Exec) -> Result<Report, JobError> {
    let (names, functions): (Vec<String>, Vec<StepFunction>) = if ctx.functions.is_empty() {
        SampleSet::generate(&ctx.grid, &ctx.sample)
            .random_pairs
            .into_iter()
            .map(|(f, _)| f)
            .enumerate()
            .map(|(i, f)| (format!("sample{i:03}"), f))
            .unzip()
    } else {
        ctx.functions.iter().map(|(n, f)| (n.clone(), f.clone())).unzip()
    };
    if ctx.cs.len() != 1 {
        return Err(JobError::input("c: gram takes a single value"));
    }
    let g = gram_matrix_with(&functions, &ctx.cs[0], exec).map_err(|e| JobError::input(format!("gram: {e}")))?;
    let summary = gram_summary(&g);
    let mut csv = String::from("row,col,value_re,value_im\n");
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            writeln!(csv, "{},{},{},{}", names[i], names[j], fmt_f64(g[(i, j)].re), fmt_f64(g[(i, j)].im)).unwrap();
        }
    }
    let passed = summary.min_eigenvalue >= GRAM_PSD_FLOOR;
    let mut stats = String::from("key,value\n");
    for (k, v) in [
        ("size", summary.size as f64),
        ("hermitian_residual", summary.hermitian_residual),
        ("min_eigenvalue", summary.min_eigenvalue),
        ("max_eigenvalue", summary.max_eigenvalue),
        ("condition_number", summary.condition_number),
        ("determinant_modulus", summary.determinant_modulus),
    ] {
        writeln!(stats, "{k},{}", fmt_f64(v)).unwrap();
    }
    Ok(Report {
        files: vec![("gram.csv".into(), csv), ("gram_summary.csv".into(), stats)],
        passed,
        summary: format!("min eigenvalue: {}", fmt_f64(summary.min_eigenvalue)),
    })
}

fn pass_word(passed: bool) -> &'static str {
    if passed {
        "pass"
    } else {
        "FAIL"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KERNEL_JOB: &str = r#"{
        "command": "kernel",
        "grid": {"dim": 1, "volumes": [1.0]},
        "functions": {"f": {"values": [[0.25, 0.0]]}}
    }"#;

    #[test]
    fn minimal_kernel_job() {
        let report = run(&parse_job(KERNEL_JOB).unwrap(), Overrides::default()).unwrap();
        assert!(report.passed);
        let csv = report.file("kernel.csv").unwrap();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows.len(), 2);
        let cols: Vec<&str> = rows[1].split(',').collect();
        assert_eq!(&cols[..3], &["f", "f", "1"]);
        assert!((cols[3].parse::<f64>().unwrap() - 1.1547005383792515).abs() < 1e-12);
        assert_eq!(cols[5], "closed");
    }

    #[test]
    fn existence_violation_is_an_input_error() {
        let job = parse_job(&KERNEL_JOB.replace("0.25", "0.6")).unwrap();
        let err = run(&job, Overrides::default()).unwrap_err();
        assert!(matches!(err, JobError::Input(_)));
        assert!(err.to_string().contains("existence condition violated: ||f||_inf >= 0.5"), "{err}");
    }

    #[test]
    fn diagnostics_name_the_field() {
        let err = parse_job(r#"{"command": "kernel", "grid": {"dim": 1, "volumes": [1.0]}, "bogus": 1}"#).unwrap_err();
        assert!(err.to_string().contains("bogus"));
        let job = parse_job(
            r#"{"command": "kernel", "grid": {"dim": 1, "volumes": [1.0]},
                "functions": {"f": {"values": [[0.1, 0.0]]}}, "pairs": [["f", "h"]]}"#,
        )
        .unwrap();
        assert!(run(&job, Overrides::default()).unwrap_err().to_string().contains("unknown function 'h'"));
        let job = parse_job(r#"{"command": "certify", "grid": {"dim": 1, "volumes": [1.0]}}"#).unwrap();
        assert!(run(&job, Overrides::default()).unwrap_err().to_string().contains("operator"));
    }

    #[test]
    fn series_method_reports_tail_bound() {
        let job = parse_job(&KERNEL_JOB.replace("\"kernel\",", "\"kernel\", \"method\": \"both\", \"c\": [2, 0.5],")).unwrap();
        let csv = run(&job, Overrides::default()).unwrap().files[0].1.clone();
        let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[0][2], rows[0][5]), ("0.5", "closed"));
        assert_eq!((rows[1][2], rows[1][5]), ("0.5", "series"));
        assert!(rows[1][6].parse::<f64>().unwrap() >= 0.0);
        assert_eq!(rows[2][2], "2");
    }

    #[test]
    fn certify_job_passes_for_char_mult() {
        let job = parse_job(
            r#"{"command": "certify", "grid": {"dim": 1, "volumes": [1, 1, 1]},
                "operator": {"kind": "mult", "symbol": {"values": [[1,0],[0,0],[1,0]]}},
                "sample": {"num_pairs": 8}}"#,
        )
        .unwrap();
        let report = run(&job, Overrides { seed: Some(3), tol: None }).unwrap();
        assert!(report.passed);
        let json: serde_json::Value = serde_json::from_str(report.file("certificate.json").unwrap()).unwrap();
        assert_eq!(json["verdict"], "Projection");
        assert_eq!(json["config"]["seed"], 3);
        assert!(report.file("certificate.md").unwrap().contains("| exponential |"));
    }
}
