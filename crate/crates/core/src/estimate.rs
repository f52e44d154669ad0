//! Rate, tail and functional estimates from binned counts.
//!
//! The primary route inverts the phase-continuous log-ECF with a forward DFT:
//! `ν̂_n = (hG)⁻¹ Σ_j log γ̂(θ_j) e^{−inθ_j}`. When the loop does not wind
//! around the origin this coincides with the series logarithm of the count
//! histogram, which [`estimate_rates_histogram`] evaluates directly.

use num_complex::Complex;
use serde::Serialize;

use crate::ecf::{self, AppliedCorrection, CoeffPoly, Correction, EcfLog};
use crate::error::{invalid, Error, Result};
use crate::model::EstimatedProfile;
use crate::scalar::Scalar;
use crate::series::{series_log, TruncSeries};
use crate::simulate::BinSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridSize {
    /// Start from the default grid and double until the estimates settle.
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TailMode {
    /// `ρ̂_m = ν̂_+ − Σ_{n<m} ν̂_n`.
    #[default]
    Telescoping,
    /// Direct quadrature of `(2πh)⁻¹ ∫ log γ̂(θ) e^{−imθ}/(1 − e^{−iθ}) dθ`.
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationOptions<T> {
    /// Highest order `M` estimated.
    pub nmax: usize,
    pub grid: GridSize,
    pub correction: Correction<T>,
    pub tail_mode: TailMode,
}

impl<T: Scalar> Default for EstimationOptions<T> {
    fn default() -> Self {
        Self {
            nmax: 12,
            grid: GridSize::Auto,
            correction: Correction::default(),
            tail_mode: TailMode::Telescoping,
        }
    }
}

impl<T: Scalar> EstimationOptions<T> {
    pub fn with_nmax(mut self, nmax: usize) -> Self {
        self.nmax = nmax;
        self
    }

    pub fn with_correction(mut self, correction: Correction<T>) -> Self {
        self.correction = correction;
        self
    }

    pub fn with_grid(mut self, grid: GridSize) -> Self {
        self.grid = grid;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.nmax < 1 {
            return Err(invalid("nmax must be ≥ 1"));
        }
        if let GridSize::Fixed(g) = self.grid {
            if g < 2 * self.nmax + 2 {
                return Err(invalid(format!("grid size {g} too small for nmax {}", self.nmax)));
            }
        }
        match self.correction {
            Correction::Edit { eps } if !(eps > T::zero()) => {
                Err(invalid("editing parameter ε must be positive"))
            }
            Correction::Shrink { delta: Some(d) } if !(d > T::zero() && d < T::one()) => {
                Err(invalid("shrinking parameter δ must lie in (0, 1)"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult<T> {
    pub rates: EstimatedProfile<T>,
    pub nu_plus_hat: T,
    /// `ρ̂_1 … ρ̂_M`.
    pub tails: Vec<T>,
    pub winding_before: i64,
    pub correction_applied: AppliedCorrection<T>,
    /// Grid the final estimates were computed on.
    pub grid_size: usize,
    pub h: T,
    /// Observation length `T = hL`.
    pub duration: T,
}

impl<T: Scalar> EstimateResult<T> {
    pub fn nmax(&self) -> usize {
        self.rates.len()
    }

    pub fn tail(&self, m: usize) -> T {
        if m == 0 {
            return T::zero();
        }
        self.tails.get(m - 1).copied().unwrap_or_else(T::zero)
    }
}

/// Real part of `(1/G) Σ_j log_j e^{−2πinj/G}` for `n = 0 … nmax`.
fn fourier_coefficients<T: Scalar>(log: &EcfLog<T>, nmax: usize) -> Vec<T> {
    let mut buf = log.log_values().to_vec();
    let g = buf.len();
    ecf::plan::<T>(g, false).process(&mut buf);
    let inv = T::one() / T::from_count(g);
    buf[..=nmax].iter().map(|c| c.re * inv).collect()
}

/// `(1/G) Σ_j log_j R_m(θ_j)` with `R_m(θ) = e^{−imθ}/(1 − e^{−iθ})`; the
/// `θ = 0` node takes the limit `Σ k c_k / Σ c_k`.
fn tail_quadrature<T: Scalar>(log: &EcfLog<T>, m: usize) -> T {
    let logs = log.log_values();
    let g = logs.len();
    let c = log.coeffs();
    let mass: T = c.iter().copied().sum();
    let mean: T = c
        .iter()
        .enumerate()
        .map(|(k, &ck)| T::from_count(k) * ck)
        .sum::<T>()
        / mass;
    let two_pi = T::PI() + T::PI();
    let mut acc = Complex::new(mean, T::zero());
    for (j, l) in logs.iter().enumerate().skip(1) {
        let theta = two_pi * T::from_count(j) / T::from_count(g);
        let num = Complex::from_polar(T::one(), -T::from_count(m) * theta);
        let den = Complex::new(T::one(), T::zero()) - Complex::from_polar(T::one(), -theta);
        acc += l * num / den;
    }
    acc.re / T::from_count(g)
}

struct Fit<T> {
    poly: CoeffPoly<T>,
    log: EcfLog<T>,
    winding_before: i64,
    applied: AppliedCorrection<T>,
    /// `hν̂_0 … hν̂_M` from the DFT (index 0 unused downstream).
    scaled: Vec<T>,
}

fn fit<T: Scalar>(poly: &CoeffPoly<T>, opts: &EstimationOptions<T>) -> Result<Fit<T>> {
    opts.validate()?;
    if !(poly.coeff(0) > T::zero()) {
        return Err(Error::NoEmptyBins);
    }
    let base = ecf::default_grid(poly.degree()).max((4 * opts.nmax + 4).next_power_of_two());
    let grid = match opts.grid {
        GridSize::Auto => base,
        GridSize::Fixed(g) => g,
    };
    let (fixed, mut log, winding_before, applied) = ecf::correct(poly, grid, opts.correction)?;
    let mut scaled = fourier_coefficients(&log, opts.nmax);

    let settle = opts.grid == GridSize::Auto && log.winding() == Some(0);
    if settle {
        let tol = T::tol(1e-13);
        loop {
            let g = log.grid_size();
            if 2 * g > ecf::MAX_GRID {
                break;
            }
            let finer = ecf::continuous_log(&ecf::ecf_eval(&fixed, 2 * g)?)?;
            let next = fourier_coefficients(&finer, opts.nmax);
            let scale = next.iter().fold(T::one(), |a, b| a.max(b.abs()));
            let change = scaled
                .iter()
                .zip(&next)
                .fold(T::zero(), |a, (x, y)| a.max((*x - *y).abs()));
            log = finer;
            scaled = next;
            if change <= tol * scale {
                break;
            }
        }
    }
    Ok(Fit {
        poly: fixed,
        log,
        winding_before,
        applied,
        scaled,
    })
}

/// Estimates from an arbitrary count distribution `poly` observed over `l`
/// bins of width `h`.
pub fn estimate_from_poly<T: Scalar>(
    poly: &CoeffPoly<T>,
    h: T,
    l: usize,
    opts: &EstimationOptions<T>,
) -> Result<EstimateResult<T>> {
    if !(h > T::zero()) {
        return Err(invalid("bin width h must be positive"));
    }
    let f = fit(poly, opts)?;
    let inv_h = T::one() / h;
    let rates: Vec<T> = f.scaled[1..].iter().map(|&x| x * inv_h).collect();
    let nu_plus_hat = -f.poly.coeff(0).ln() * inv_h;
    let tails = match opts.tail_mode {
        TailMode::Telescoping => telescope(nu_plus_hat, &rates),
        TailMode::Quadrature => (1..=opts.nmax)
            .map(|m| tail_quadrature(&f.log, m) * inv_h)
            .collect(),
    };
    Ok(EstimateResult {
        rates: EstimatedProfile::new(rates)?,
        nu_plus_hat,
        tails,
        winding_before: f.winding_before,
        correction_applied: f.applied,
        grid_size: f.log.grid_size(),
        h,
        duration: h * T::from_count(l),
    })
}

fn telescope<T: Scalar>(nu_plus: T, rates: &[T]) -> Vec<T> {
    let mut tails = Vec::with_capacity(rates.len());
    let mut rho = nu_plus;
    for r in rates {
        tails.push(rho);
        rho -= *r;
    }
    tails
}

/// Fourier-inversion estimates `ν̂_1 … ν̂_M`, `ν̂_+` and tails `ρ̂_1 … ρ̂_M`.
pub fn estimate_rates_fourier<T: Scalar>(
    bins: &BinSeries<T>,
    opts: &EstimationOptions<T>,
) -> Result<EstimateResult<T>> {
    estimate_from_poly(&ecf::histogram(bins), bins.h(), bins.len(), opts)
}

/// Closed-form estimates `hν̂_n` = series-log coefficients of the histogram.
pub fn estimate_rates_histogram<T: Scalar>(
    bins: &BinSeries<T>,
    nmax: usize,
) -> Result<EstimatedProfile<T>> {
    let hist = ecf::histogram(bins);
    if !(hist.coeff(0) > T::zero()) {
        return Err(Error::NoEmptyBins);
    }
    let p = TruncSeries::new(hist.coeffs().to_vec())?.with_order(nmax);
    let b = series_log(&p)?;
    let inv_h = T::one() / bins.h();
    EstimatedProfile::new(b.coeffs()[1..].iter().map(|&x| x * inv_h).collect())
}

/// Tail estimates `ρ̂_1 … ρ̂_M`, by telescoping or by direct quadrature as
/// selected in `opts.tail_mode`.
pub fn estimate_tails<T: Scalar>(bins: &BinSeries<T>, opts: &EstimationOptions<T>) -> Result<Vec<T>> {
    Ok(estimate_rates_fourier(bins, opts)?.tails)
}

/// `Σ c_n ν̂_n` for the weights `c = (c_1, c_2, …)`.
pub fn estimate_functional<T: Scalar>(
    bins: &BinSeries<T>,
    weights: &[T],
    opts: &EstimationOptions<T>,
) -> Result<T> {
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(invalid("functional weights must be finite"));
    }
    let mut opts = *opts;
    opts.nmax = opts.nmax.max(weights.len()).max(1);
    let est = estimate_rates_fourier(bins, &opts)?;
    Ok(weights
        .iter()
        .enumerate()
        .map(|(i, w)| *w * est.rates.rate(i + 1))
        .sum())
}

/// Normalized rates `ω̂_n = ν̂_n/ν̂_+` and their square roots where defined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reparameterized<T> {
    pub omega: Vec<T>,
    /// `None` where `ν̂_n < 0`.
    pub omega_sqrt: Vec<Option<T>>,
}

pub fn reparameterize<T: Scalar>(est: &EstimateResult<T>) -> Result<Reparameterized<T>> {
    if !(est.nu_plus_hat > T::zero()) {
        return Err(Error::Domain(format!(
            "normalized rates need ν̂_+ > 0, got {}",
            est.nu_plus_hat
        )));
    }
    let omega: Vec<T> = est.rates.rates().iter().map(|&r| r / est.nu_plus_hat).collect();
    let omega_sqrt = omega
        .iter()
        .map(|&w| (w >= T::zero()).then(|| w.sqrt()))
        .collect();
    Ok(Reparameterized { omega, omega_sqrt })
}
