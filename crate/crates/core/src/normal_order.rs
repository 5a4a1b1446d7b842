//! Vacuum expectations of words in `B⁺`, `B`, `N` by rewriting with the
//! commutation relations
//!
//! ```text
//! B_f B⁺_g = B⁺_g B_f + 2c⟨f,g⟩ + 4 N_{f̄g}
//! N_a B⁺_g = B⁺_g N_a + 2 B⁺_{ag}
//! ```
//!
//! and the Fock conditions `B_f Φ = N_g Φ = 0`. Nothing here depends on the
//! grade recursion in [`crate::fock`]; the two are checked against each other.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::ModelParams;
use crate::testfn::{inner_unchecked, same_grid, Grid, StepFunction};

pub const DEFAULT_TERM_BUDGET: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GeneratorKind {
    Create,
    Annihilate,
    Number,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub kind: GeneratorKind,
    pub label: StepFunction,
}

impl Generator {
    pub fn create(label: StepFunction) -> Self {
        Self { kind: GeneratorKind::Create, label }
    }

    pub fn annihilate(label: StepFunction) -> Self {
        Self { kind: GeneratorKind::Annihilate, label }
    }

    pub fn number(label: StepFunction) -> Self {
        Self { kind: GeneratorKind::Number, label }
    }

    fn is_create(&self) -> bool {
        self.kind == GeneratorKind::Create
    }
}

/// Product of generators acting on the vacuum; the rightmost factor acts first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Word {
    factors: Vec<Generator>,
}

/// Bit pattern of a word, used as the canonical ordering key in [`TermSum`].
type WordKey = Vec<(GeneratorKind, Vec<[u64; 2]>)>;

impl Word {
    pub fn vacuum() -> Self {
        Self::default()
    }

    pub fn new(factors: Vec<Generator>) -> Result<Self> {
        if let Some(first) = factors.first() {
            let grid = first.label.grid();
            if factors.iter().any(|g| !same_grid(grid, g.label.grid())) {
                return Err(Error::GridMismatch);
            }
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[Generator] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    fn key(&self) -> WordKey {
        // +0.0 folds -0.0 into 0.0
        self.factors
            .iter()
            .map(|g| {
                let bits = g
                    .label
                    .values()
                    .iter()
                    .map(|v| [(v.re + 0.0).to_bits(), (v.im + 0.0).to_bits()])
                    .collect();
                (g.kind, bits)
            })
            .collect()
    }

    fn splice(&self, at: usize, replacement: &[Generator]) -> Word {
        let mut factors = Vec::with_capacity(self.factors.len());
        factors.extend_from_slice(&self.factors[..at]);
        factors.extend_from_slice(replacement);
        factors.extend_from_slice(&self.factors[at + 2..]);
        Word { factors }
    }

    /// Rightmost position `i` with a non-creation factor at `i` and a
    /// creation factor at `i + 1`.
    fn rewrite_site(&self) -> Option<usize> {
        (0..self.factors.len().saturating_sub(1))
            .rev()
            .find(|&i| !self.factors[i].is_create() && self.factors[i + 1].is_create())
    }
}

/// Finite linear combination of words, ordered by word bit pattern.
#[derive(Debug, Clone, Default)]
pub struct TermSum {
    terms: BTreeMap<WordKey, (Word, Complex64)>,
}

impl TermSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, word: Word, coef: Complex64) {
        if coef == Complex64::new(0.0, 0.0) {
            return;
        }
        let key = word.key();
        match self.terms.get_mut(&key) {
            Some((_, c)) => {
                *c += coef;
                if *c == Complex64::new(0.0, 0.0) {
                    self.terms.remove(&key);
                }
            }
            None => {
                self.terms.insert(key, (word, coef));
            }
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Word, &Complex64)> {
        self.terms.values().map(|(w, c)| (w, c))
    }

    fn into_terms(self) -> impl Iterator<Item = (Word, Complex64)> {
        self.terms.into_values()
    }
}

/// Outcome of one oracle evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub value: Complex64,
    pub rewrites: usize,
    pub peak_terms: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Oracle {
    /// Maximum number of live terms in any rewrite generation.
    pub budget: usize,
}

impl Default for Oracle {
    fn default() -> Self {
        Self { budget: DEFAULT_TERM_BUDGET }
    }
}

impl Oracle {
    pub fn with_budget(budget: usize) -> Self {
        Self { budget }
    }

    /// `⟨Φ, w Φ⟩`.
    pub fn vacuum_expectation(&self, w: &Word, params: &ModelParams) -> Result<Complex64> {
        self.run(w, params).map(|r| r.value)
    }

    pub fn run(&self, w: &Word, params: &ModelParams) -> Result<OracleRun> {
        let c = params.c();
        let mut live = TermSum::new();
        live.add(w.clone(), Complex64::new(1.0, 0.0));
        let mut scalar = Complex64::new(0.0, 0.0);
        let mut rewrites = 0;
        let mut peak_terms = 1;

        while !live.is_empty() {
            let mut next = TermSum::new();
            for (word, coef) in live.into_terms() {
                let (Some(first), Some(last)) = (word.factors.first(), word.factors.last()) else {
                    scalar += coef;
                    continue;
                };
                // B_f Φ = N_g Φ = 0
                if !last.is_create() {
                    continue;
                }
                // a leading creation factor never moves and pairs to zero with ⟨Φ|
                if first.is_create() {
                    continue;
                }
                let i = word
                    .rewrite_site()
                    .expect("word starting with a non-creation factor and ending with a creation factor");
                rewrite_pair(&word, i, coef, c, &mut next);
                rewrites += 1;
            }
            if next.len() > self.budget {
                return Err(Error::BudgetExceeded(self.budget));
            }
            peak_terms = peak_terms.max(next.len());
            live = next;
        }
        Ok(OracleRun { value: scalar, rewrites, peak_terms })
    }
}

fn rewrite_pair(word: &Word, i: usize, coef: Complex64, c: f64, out: &mut TermSum) {
    let left = &word.factors[i];
    let right = &word.factors[i + 1];
    let swapped = [right.clone(), left.clone()];
    out.add(word.splice(i, &swapped), coef);
    match left.kind {
        GeneratorKind::Annihilate => {
            let scalar = inner_unchecked(&left.label, &right.label) * (2.0 * c);
            out.add(word.splice(i, &[]), coef * scalar);
            let label = left.label.conj().mul(&right.label).expect("labels share a grid");
            out.add(word.splice(i, &[Generator::number(label)]), coef * 4.0);
        }
        GeneratorKind::Number => {
            let label = left.label.mul(&right.label).expect("labels share a grid");
            out.add(word.splice(i, &[Generator::create(label)]), coef * 2.0);
        }
        GeneratorKind::Create => unreachable!("rewrite site starts with a non-creation factor"),
    }
}

/// `⟨Φ, w Φ⟩` with the default term budget.
pub fn vacuum_expectation(w: &Word, params: &ModelParams) -> Result<Complex64> {
    Oracle::default().vacuum_expectation(w, params)
}

/// The word `B_f^n B⁺_g^m`.
pub fn bb_word(f: &StepFunction, g: &StepFunction, n: usize, m: usize) -> Result<Word> {
    f.check_compatible(g)?;
    let mut factors = Vec::with_capacity(n + m);
    factors.extend(std::iter::repeat_with(|| Generator::annihilate(f.clone())).take(n));
    factors.extend(std::iter::repeat_with(|| Generator::create(g.clone())).take(m));
    Ok(Word { factors })
}

/// `⟨B⁺ⁿ_f Φ, B⁺ᵐ_g Φ⟩ = ⟨Φ, B_f^n B⁺_g^m Φ⟩`.
pub fn bb_inner(f: &StepFunction, g: &StepFunction, n: usize, m: usize, params: &ModelParams) -> Result<Complex64> {
    vacuum_expectation(&bb_word(f, g, n, m)?, params)
}

/// Grid shared by every label of `w`, if any.
pub fn word_grid(w: &Word) -> Option<&Arc<Grid>> {
    w.factors.first().map(|g| g.label.grid())
}
