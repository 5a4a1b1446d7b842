//! End-to-end acceptance gates. Prints one line per criterion and exits
//! non-zero if any of them fails.

mod common;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use common::{counterexample_zoo, grid, random_pairs, rel_err};
use num_complex::Complex64;
use qfock::fock::{exp_kernel_closed, exp_kernel_series, kernel_taylor, nparticle_inner, nparticle_table};
use qfock::normal_order::bb_inner;
use qfock::projection_cert::{battery_powers, certify, gram_matrix, gram_summary, Verdict};
use qfock::sampling::SampleConfig;
use qfock::testfn::{indicator, inner};
use qfock::{ModelParams, Operator, StepFunction};

const SEED: u64 = 20240611;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

fn params(c: f64) -> ModelParams {
    ModelParams::new(c).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let g = grid(8);
    let mut worst = 0.0f64;
    for (f, h) in random_pairs(&g, 20, 0.45, SEED) {
        for c in [0.5, 1.0, 2.0] {
            let p = params(c);
            let rec = nparticle_table(&f, &h, 6, &p).unwrap();
            for (n, want) in rec.iter().enumerate() {
                worst = worst.max(rel_err(bb_inner(&f, &h, n, n, &p).unwrap(), *want));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(worst <= 1e-9 && secs < 30.0, format!("max rel err {worst:.3e}, {secs:.2} s"))
}

fn grading() -> Outcome {
    let g = grid(8);
    let mut worst = 0.0f64;
    for (f, h) in random_pairs(&g, 20, 0.45, SEED) {
        for c in [0.5, 1.0, 2.0] {
            let p = params(c);
            let diag = nparticle_table(&f, &h, 3, &p).unwrap();
            let scale = diag.iter().map(|z| z.norm()).fold(1.0, f64::max);
            for n in 0..=6usize {
                for m in 0..=6 - n {
                    if n != m {
                        worst = worst.max(bb_inner(&f, &h, n, m, &p).unwrap().norm() / scale);
                    }
                }
            }
        }
    }
    Outcome::new(worst <= 1e-12, format!("max off-grade {worst:.3e}"))
}

fn closed_vs_series() -> Outcome {
    let g = grid(8);
    let p = params(1.0);
    let mut worst = 0.0f64;
    let mut bound_held = true;
    for (f, h) in random_pairs(&g, 50, 0.35, SEED + 3) {
        let closed = exp_kernel_closed(&f, &h, &p).unwrap();
        let s = exp_kernel_series(&f, &h, &p, 1e-12).unwrap();
        let gap = (s.value - closed).norm();
        let allowed = s.tail_bound.max(1e-10 * closed.norm());
        worst = worst.max(gap / allowed);
        bound_held &= gap <= s.tail_bound;
    }
    Outcome::new(
        worst <= 1.0 && bound_held,
        format!("max gap/allowance {worst:.3e}, tail bound dominates gap: {bound_held}"),
    )
}

fn derivative_identity() -> Outcome {
    let g = grid(8);
    let mut worst = 0.0f64;
    for (i, (f, h)) in random_pairs(&g, 20, 0.35, SEED + 4).into_iter().enumerate() {
        let p = params([0.5, 1.0, 2.0][i % 3]);
        let a = kernel_taylor(&f, &h, &p, 8).unwrap();
        let rec = nparticle_table(&f, &h, 8, &p).unwrap();
        let mut fact = 1.0;
        for n in 0..=8 {
            if n > 0 {
                fact *= n as f64;
            }
            worst = worst.max(rel_err(a[n] * (fact * fact), rec[n]));
        }
    }
    let one = grid(1);
    let amp = 0.3;
    let f = StepFunction::from_real(one, &[amp]).unwrap();
    let a = kernel_taylor(&f, &f, &params(1.0), 2).unwrap();
    let spot = rel_err(a[1], Complex64::new(2.0 * amp * amp, 0.0))
        .max(rel_err(a[2], Complex64::new(6.0 * amp.powi(4), 0.0)));
    Outcome::new(worst <= 1e-9 && spot <= 1e-12, format!("max rel err {worst:.3e}, spot checks {spot:.3e}"))
}

fn one_particle_law() -> Outcome {
    let g = grid(8);
    let mut samples = random_pairs(&g, 20, 0.45, SEED);
    samples.extend(random_pairs(&g, 50, 0.35, SEED + 3));
    samples.extend(random_pairs(&g, 20, 0.35, SEED + 4));
    let mut worst = 0.0f64;
    for (f, h) in &samples {
        for c in [0.5, 1.0, 2.0] {
            let want = inner(f, h).unwrap() * (2.0 * c);
            worst = worst.max(rel_err(nparticle_inner(f, h, 1, &params(c)).unwrap(), want));
        }
    }
    Outcome::new(worst <= 1e-12, format!("{} samples, max rel err {worst:.3e}", samples.len()))
}

fn constant_kernel_value() -> Outcome {
    let f = StepFunction::from_real(grid(1), &[0.25]).unwrap();
    let v = exp_kernel_closed(&f, &f, &params(1.0)).unwrap();
    let err = (v - Complex64::new(2.0 / 3.0f64.sqrt(), 0.0)).norm();
    Outcome::new(err <= 1e-12, format!("value {}, abs err {err:.3e}", v.re))
}

fn positive_direction() -> Outcome {
    let g = grid(6);
    let cfg = SampleConfig { seed: SEED, num_pairs: 50, ..SampleConfig::default() };
    let mut ok = true;
    let mut worst = 0.0f64;
    for cells in [vec![], vec![1, 4], (0..6).collect::<Vec<_>>()] {
        let cert = certify(&Operator::Multiplication(indicator(&g, &cells).unwrap()), &cfg).unwrap();
        ok &= cert.verdict == Verdict::Projection && cert.theorem_agreement;
        for c in &cert.checks {
            let r = c.max_residual.unwrap_or(f64::INFINITY);
            worst = worst.max(r);
            ok &= r <= 1e-9;
        }
    }
    Outcome::new(ok, format!("3 index sets, max residual {worst:.3e}"))
}

fn negative_direction() -> Outcome {
    let g = grid(6);
    let cfg = SampleConfig { seed: SEED, ..SampleConfig::default() };
    let rank_one = common::rank_one_ab(&g);
    let cert = certify(&rank_one, &cfg).unwrap();
    let chi_a = indicator(&g, &[0]).unwrap();
    let witness_ok = cert.verdict == Verdict::NotProjection
        && cert.witness.as_ref().is_some_and(|w| {
            w.check == "powers" && w.f == chi_a && w.g.as_ref() == Some(&chi_a) && w.n == Some(2)
        });
    let residual = cert.witness.as_ref().map_or(f64::NAN, |w| w.residual);
    let powers = battery_powers(&rank_one, &cfg).unwrap();
    let exact = (residual - 0.125).abs() <= 1e-12 && (powers[0].max_residual.unwrap() - 0.125).abs() <= 1e-12;

    let mut zoo_ok = true;
    let mut detail = String::new();
    for (name, p) in counterexample_zoo(&g) {
        let cert = certify(&p, &cfg).unwrap();
        let worst = cert.checks.iter().filter_map(|c| c.max_residual).fold(0.0, f64::max);
        zoo_ok &= cert.verdict == Verdict::NotProjection && cert.theorem_agreement && worst > 1e-3;
        write!(detail, "; {name} {worst:.3}").unwrap();
    }
    Outcome::new(witness_ok && exact && zoo_ok, format!("witness residual {residual}{detail}"))
}

fn gram_properties() -> Outcome {
    let g = grid(8);
    let fs: Vec<StepFunction> = random_pairs(&g, 3, 0.35, SEED + 9).into_iter().flat_map(|(a, b)| [a, b]).collect();
    let s = gram_summary(&gram_matrix(&fs, &params(1.0)).unwrap());
    let ok = s.hermitian_residual <= 1e-13
        && s.min_eigenvalue >= -1e-10
        && s.condition_number.is_finite()
        && s.determinant_modulus > 1e-12;
    Outcome::new(
        ok,
        format!(
            "hermitian {:.1e}, eigenvalues [{:.3e}, {:.3e}], cond {:.3e}, |det| {:.3e}",
            s.hermitian_residual, s.min_eigenvalue, s.max_eigenvalue, s.condition_number, s.determinant_modulus
        ),
    )
}

fn determinism() -> Outcome {
    let job = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/certify_rank_one.json");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        Command::new(env!("CARGO_BIN_EXE_qfock")).arg(&job).arg("--out").arg(d.path()).output().unwrap();
    }
    let same = ["certificate.json", "certificate.csv"].iter().all(|name| {
        let a = fs::read(dirs[0].path().join(name));
        let b = fs::read(dirs[1].path().join(name));
        matches!((a, b), (Ok(a), Ok(b)) if a == b && !a.is_empty())
    });
    Outcome::new(same, "certificate.json and certificate.csv compared byte for byte")
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("grading", grading),
        ("closed form vs series", closed_vs_series),
        ("derivative identity", derivative_identity),
        ("one-particle law", one_particle_law),
        ("constant-function kernel", constant_kernel_value),
        ("positive direction", positive_direction),
        ("negative direction", negative_direction),
        ("gram properties", gram_properties),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        println!("criterion {:>2} {:<26} {}  {}", i + 1, name, if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failures += usize::from(!o.passed);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
