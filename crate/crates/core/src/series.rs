//! Truncated complex power series `Σ_{j≤N} a_j t^j`.

use std::ops::{Add, Mul};

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    coeffs: Vec<Complex64>,
}

impl PowerSeries {
    /// Series truncated after `t^order`.
    pub fn zero(order: usize) -> Self {
        Self { coeffs: vec![Complex64::new(0.0, 0.0); order + 1] }
    }

    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Self {
        assert!(!coeffs.is_empty(), "a truncated series keeps at least a_0");
        Self { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn scale(&self, lambda: Complex64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|a| a * lambda).collect() }
    }

    /// `ln(1 - x t)` to the same order: `-Σ_{j≥1} x^j t^j / j`.
    pub fn log_one_minus(x: Complex64, order: usize) -> Self {
        let mut out = Self::zero(order);
        let mut pow = Complex64::new(1.0, 0.0);
        for j in 1..=order {
            pow *= x;
            out.coeffs[j] = -pow / j as f64;
        }
        out
    }

    /// `exp(s)`, via `n b_n = Σ_{j=1}^n j s_j b_{n-j}` and `b_0 = exp(s_0)`.
    pub fn exp(&self) -> Self {
        let n = self.coeffs.len();
        let mut b = vec![Complex64::new(0.0, 0.0); n];
        b[0] = self.coeffs[0].exp();
        for m in 1..n {
            let acc: Complex64 = (1..=m).map(|j| self.coeffs[j] * j as f64 * b[m - j]).sum();
            b[m] = acc / m as f64;
        }
        Self { coeffs: b }
    }

    /// `ln(s)` for `s_0 ≠ 0`, via `s_0 l_n = s_n - (1/n) Σ_{j=1}^{n-1} j l_j s_{n-j}`.
    pub fn log(&self) -> Self {
        let n = self.coeffs.len();
        let s0 = self.coeffs[0];
        let mut l = vec![Complex64::new(0.0, 0.0); n];
        l[0] = s0.ln();
        for m in 1..n {
            let acc: Complex64 = (1..m).map(|j| l[j] * j as f64 * self.coeffs[m - j]).sum();
            l[m] = (self.coeffs[m] - acc / m as f64) / s0;
        }
        Self { coeffs: l }
    }

    /// Value at `t`, Horner.
    pub fn eval(&self, t: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, a| acc * t + a)
    }
}

impl Add for &PowerSeries {
    type Output = PowerSeries;

    fn add(self, rhs: &PowerSeries) -> PowerSeries {
        let order = self.order().min(rhs.order());
        PowerSeries {
            coeffs: (0..=order).map(|j| self.coeffs[j] + rhs.coeffs[j]).collect(),
        }
    }
}

impl Mul for &PowerSeries {
    type Output = PowerSeries;

    fn mul(self, rhs: &PowerSeries) -> PowerSeries {
        let order = self.order().min(rhs.order());
        PowerSeries {
            coeffs: (0..=order)
                .map(|m| (0..=m).map(|j| self.coeffs[j] * rhs.coeffs[m - j]).sum())
                .collect(),
        }
    }
}
