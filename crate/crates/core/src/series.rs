//! Truncated power-series algebra.
//!
//! The log/exp recursions below connect a count distribution `p_k` with the
//! scaled rates `hν_n`: the Taylor coefficients of `log Σ p_k w^k` are
//! `(−hν_+, hν_1, hν_2, …)`. The bivariate part evaluates Taylor coefficients
//! of the covariance generating function
//!
//! ```text
//! ψ_{α1,α2}(z1, z2) = (exp[h Σ ν_n (z1^n − 1)(z2^n − 1)] − 1) / (h (z1 − 1)^α1 (z2 − 1)^α2)
//! ```
//!
//! whose `(n1, n2)` coefficient is `J(n1, n2, α1, α2)`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Coefficients `c_0 … c_D` of a power series truncated at order `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncSeries<T> {
    coeffs: Vec<T>,
}

impl<T: Scalar> TruncSeries<T> {
    pub fn new(coeffs: Vec<T>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument("series needs at least c_0".into()));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!("coefficient {i} is not finite")));
        }
        Ok(Self { coeffs })
    }

    pub(crate) fn from_vec_unchecked(coeffs: Vec<T>) -> Self {
        debug_assert!(!coeffs.is_empty());
        Self { coeffs }
    }

    /// Truncation order `D`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    /// Coefficient `n`, zero beyond the truncation order.
    pub fn coeff(&self, n: usize) -> T {
        self.coeffs.get(n).copied().unwrap_or_else(T::zero)
    }

    /// Same series padded with zeros (or truncated) to order `order`.
    pub fn with_order(&self, order: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(order + 1, T::zero());
        Self { coeffs }
    }

    pub fn log(&self) -> Result<Self> {
        series_log(self)
    }

    pub fn exp(&self) -> Self {
        series_exp(self)
    }
}

/// Logarithm of a power series with positive constant term.
///
/// `b_0 = log p_0`, and for `n ≥ 1`
/// `b_n = p_n/p_0 − (1/(n p_0)) Σ_{k=1}^{n−1} k b_k p_{n−k}`.
pub fn series_log<T: Scalar>(p: &TruncSeries<T>) -> Result<TruncSeries<T>> {
    let c = &p.coeffs;
    let p0 = c[0];
    if !(p0 > T::zero()) {
        return Err(Error::Domain(format!(
            "series logarithm needs a positive leading coefficient, got {p0}"
        )));
    }
    let mut b = vec![T::zero(); c.len()];
    b[0] = p0.ln();
    for n in 1..c.len() {
        let mut acc = T::zero();
        for k in 1..n {
            acc += T::from_count(k) * b[k] * c[n - k];
        }
        b[n] = (c[n] - acc / T::from_count(n)) / p0;
    }
    Ok(TruncSeries { coeffs: b })
}

/// Exponential of a power series: `p_0 = e^{a_0}`, `p_n = (1/n) Σ_{k=1}^{n} k a_k p_{n−k}`.
pub fn series_exp<T: Scalar>(a: &TruncSeries<T>) -> TruncSeries<T> {
    TruncSeries {
        coeffs: exp_coeffs(&a.coeffs),
    }
}

fn exp_coeffs<T: Scalar>(a: &[T]) -> Vec<T> {
    let mut p = vec![T::zero(); a.len()];
    p[0] = a[0].exp();
    for n in 1..a.len() {
        let mut acc = T::zero();
        for k in 1..=n {
            acc += T::from_count(k) * a[k] * p[n - k];
        }
        p[n] = acc / T::from_count(n);
    }
    p
}

/// Truncated product of two series of equal length.
fn mul_truncated<T: Scalar>(a: &[T], b: &[T], out: &mut [T]) {
    let d = out.len();
    for n in 0..d {
        let mut acc = T::zero();
        for k in 0..=n {
            acc += a[k] * b[n - k];
        }
        out[n] = acc;
    }
}

/// Rectangular coefficient array `c_{ij}`, `0 ≤ i ≤ D1`, `0 ≤ j ≤ D2`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BivarSeries<T> {
    rows: usize,
    cols: usize,
    coeffs: Vec<T>,
}

impl<T: Scalar> BivarSeries<T> {
    pub fn zeros(d1: usize, d2: usize) -> Self {
        Self {
            rows: d1 + 1,
            cols: d2 + 1,
            coeffs: vec![T::zero(); (d1 + 1) * (d2 + 1)],
        }
    }

    pub fn orders(&self) -> (usize, usize) {
        (self.rows - 1, self.cols - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.coeffs[i * self.cols + j]
    }

    fn set(&mut self, i: usize, j: usize, v: T) {
        self.coeffs[i * self.cols + j] = v;
    }

    fn row(&self, i: usize) -> &[T] {
        &self.coeffs[i * self.cols..(i + 1) * self.cols]
    }

    /// Exponential, computed as a univariate exp in `z1` whose coefficients
    /// are truncated series in `z2`.
    pub fn exp(&self) -> Self {
        let (rows, cols) = (self.rows, self.cols);
        let mut out = Self {
            rows,
            cols,
            coeffs: vec![T::zero(); rows * cols],
        };
        let p0 = exp_coeffs(self.row(0));
        out.coeffs[..cols].copy_from_slice(&p0);
        let mut scratch = vec![T::zero(); cols];
        let mut acc = vec![T::zero(); cols];
        for n in 1..rows {
            acc.iter_mut().for_each(|v| *v = T::zero());
            for k in 1..=n {
                mul_truncated(self.row(k), out.row(n - k), &mut scratch);
                let w = T::from_count(k);
                for (a, s) in acc.iter_mut().zip(&scratch) {
                    *a += w * *s;
                }
            }
            let inv = T::one() / T::from_count(n);
            for (j, a) in acc.iter().enumerate() {
                out.set(n, j, *a * inv);
            }
        }
        out
    }

    /// Divides by `(z1 − 1)` as a power series: `q_i = −Σ_{k≤i} f_k`.
    ///
    /// Valid coefficientwise for any truncation order because `1/(z1 − 1)`
    /// is analytic at the origin.
    fn div_z1_minus_one(&mut self) {
        for j in 0..self.cols {
            let mut run = T::zero();
            for i in 0..self.rows {
                run += self.get(i, j);
                self.set(i, j, -run);
            }
        }
    }

    fn div_z2_minus_one(&mut self) {
        for i in 0..self.rows {
            let mut run = T::zero();
            for j in 0..self.cols {
                run += self.get(i, j);
                self.set(i, j, -run);
            }
        }
    }
}

/// Taylor coefficients of `ψ_{α1,α2}` up to orders `(d1, d2)`.
///
/// `rates[n-1]` is `ν_n`. Rates beyond the truncation orders only enter
/// through the constant term, exactly as in the full series.
pub fn bivar_psi<T: Scalar>(
    rates: &[T],
    h: T,
    d1: usize,
    d2: usize,
    tail1: bool,
    tail2: bool,
) -> BivarSeries<T> {
    let mut expo = BivarSeries::zeros(d1, d2);
    let mut total = T::zero();
    for (idx, &nu) in rates.iter().enumerate() {
        let n = idx + 1;
        let hn = h * nu;
        total += hn;
        if n <= d1 {
            expo.set(n, 0, expo.get(n, 0) - hn);
        }
        if n <= d2 {
            expo.set(0, n, expo.get(0, n) - hn);
        }
        if n <= d1 && n <= d2 {
            expo.set(n, n, expo.get(n, n) + hn);
        }
    }
    expo.set(0, 0, total);

    let mut psi = expo.exp();
    // e^{hν_+} − 1 without cancellation
    psi.set(0, 0, total.exp_m1());
    let inv_h = T::one() / h;
    psi.coeffs.iter_mut().for_each(|c| *c *= inv_h);
    if tail1 {
        psi.div_z1_minus_one();
    }
    if tail2 {
        psi.div_z2_minus_one();
    }
    psi
}

/// `J(n1, n2, α1, α2)`: the `(n1, n2)` Taylor coefficient of `ψ_{α1,α2}`,
/// with `α_j = 1` written as `tail_j = true`.
pub fn bivar_taylor_j<T: Scalar>(
    rates: &[T],
    h: T,
    n1: usize,
    n2: usize,
    tail1: bool,
    tail2: bool,
) -> T {
    bivar_psi(rates, h, n1, n2, tail1, tail2).get(n1, n2)
}
