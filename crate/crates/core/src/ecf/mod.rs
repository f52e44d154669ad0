//! Empirical characteristic function, its phase-continuous logarithm, and
//! the two corrections for loops that wind around the origin.
//!
//! The ECF of integer counts is the trigonometric polynomial
//! `γ̂(θ) = Σ_k p̂_k e^{ikθ}`. If the polynomial `Σ p̂_k w^k` has zeros inside
//! the unit disc, the loop `θ ↦ γ̂(θ)` winds around 0 and the continuous
//! logarithm ends on another branch. Shrinking pulls the loop towards 1;
//! zero editing pushes the offending zeros out to radius `1 + ε`.

pub mod roots;

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::simulate::BinSeries;

/// Largest grid continuous_log will refine to.
pub const MAX_GRID: usize = 1 << 22;

/// Ladder of shrinking parameters tried by adaptive shrinking, smallest first.
pub const SHRINK_LADDER: [f64; 6] = [0.005, 0.01, 0.02, 0.04, 0.08, 0.16];

/// Coefficients `c_0 … c_K` of a generating polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffPoly<T> {
    coeffs: Vec<T>,
    normalized: bool,
}

impl<T: Scalar> CoeffPoly<T> {
    /// Wraps coefficients; `normalized` is set when they sum to 1.
    pub fn new(coeffs: Vec<T>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(invalid("polynomial needs at least one coefficient"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid("polynomial coefficients must be finite"));
        }
        let sum: T = coeffs.iter().copied().sum();
        let normalized = (sum - T::one()).abs() <= T::tol(1e-12);
        Ok(Self { coeffs, normalized })
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> T {
        self.coeffs.get(k).copied().unwrap_or_else(T::zero)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Nominal degree `K`.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Value at `w = 1`, i.e. `γ(0)`.
    pub fn sum(&self) -> T {
        self.coeffs.iter().copied().sum()
    }
}

/// ECF samples on the grid `θ_j = 2πj/G` plus, once filled by
/// [`continuous_log`], the phase-continuous logarithm and winding number.
#[derive(Debug, Clone)]
pub struct EcfLog<T> {
    coeffs: Vec<T>,
    values: Vec<Complex<T>>,
    log_values: Vec<Complex<T>>,
    winding: Option<i64>,
}

impl<T: Scalar> EcfLog<T> {
    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    /// Phase-continuous log, empty until [`continuous_log`] has run.
    ///
    /// The phase is unwrapped from `θ = 0` in both directions, so that the
    /// nodes with `j > G/2` carry the continuation through `θ ∈ (−π, 0)`.
    pub fn log_values(&self) -> &[Complex<T>] {
        &self.log_values
    }

    pub fn winding(&self) -> Option<i64> {
        self.winding
    }

    /// Coefficients the samples were computed from.
    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }
}

/// `c_k = #{l : Z_l = k} / L` for `0 ≤ k ≤ max Z_l`.
pub fn histogram<T: Scalar>(bins: &BinSeries<T>) -> CoeffPoly<T> {
    let kmax = bins.max_count() as usize;
    let mut tally = vec![0usize; kmax + 1];
    for &z in bins.counts() {
        tally[z as usize] += 1;
    }
    let l = T::from_count(bins.len());
    CoeffPoly {
        coeffs: tally.into_iter().map(|n| T::from_count(n) / l).collect(),
        normalized: true,
    }
}

/// Default grid: the smallest power of two `≥ max(256, 8(K+1))`.
pub fn default_grid(degree: usize) -> usize {
    (8 * (degree + 1)).max(256).next_power_of_two()
}

pub(crate) fn plan<T: Scalar>(g: usize, inverse: bool) -> Arc<dyn Fft<T>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(g)
    } else {
        planner.plan_fft_forward(g)
    }
}

fn sample<T: Scalar>(coeffs: &[T], g: usize) -> Vec<Complex<T>> {
    // Σ c_k e^{+2πijk/G}: an unnormalized inverse DFT of the zero-padded
    // coefficients, after folding indices modulo G.
    let mut buf = vec![Complex::new(T::zero(), T::zero()); g];
    for (k, &c) in coeffs.iter().enumerate() {
        buf[k % g].re += c;
    }
    plan::<T>(g, true).process(&mut buf);
    buf
}

/// `γ̂(θ_j) = Σ_k c_k e^{ikθ_j}` for `θ_j = 2πj/G`.
pub fn ecf_eval<T: Scalar>(poly: &CoeffPoly<T>, g: usize) -> Result<EcfLog<T>> {
    if g < 4 * (poly.degree() + 1) {
        return Err(invalid(format!(
            "grid size {g} is below 4(K+1) = {}",
            4 * (poly.degree() + 1)
        )));
    }
    Ok(EcfLog {
        coeffs: poly.coeffs.clone(),
        values: sample(&poly.coeffs, g),
        log_values: Vec::new(),
        winding: None,
    })
}

fn wrap<T: Scalar>(mut d: T) -> T {
    let pi = T::PI();
    let two_pi = pi + pi;
    while d > pi {
        d -= two_pi;
    }
    while d <= -pi {
        d += two_pi;
    }
    d
}

/// Unwraps the phase of the ECF samples and counts the winding number.
///
/// Doubles the grid while any raw phase step exceeds π/2, up to [`MAX_GRID`].
pub fn continuous_log<T: Scalar>(ecf: &EcfLog<T>) -> Result<EcfLog<T>> {
    let half_pi = T::FRAC_PI_2();
    let two_pi = T::PI() + T::PI();
    let zero_tol = T::lit(1e-14);
    let mut values = ecf.values.clone();
    loop {
        let g = values.len();
        if let Some(index) = values.iter().position(|v| v.norm() < zero_tol) {
            return Err(Error::SingularEcf { index, grid: g });
        }
        let args: Vec<T> = values.iter().map(|v| v.arg()).collect();
        let steps: Vec<T> = (0..g).map(|j| wrap(args[(j + 1) % g] - args[j])).collect();
        if steps.iter().any(|d| d.abs() > half_pi) {
            if 2 * g > MAX_GRID {
                return Err(Error::UnwrapFailure { cap: MAX_GRID });
            }
            values = sample(&ecf.coeffs, 2 * g);
            continue;
        }

        let mut forward = Vec::with_capacity(g + 1);
        let mut phase = T::zero();
        forward.push(phase);
        for d in &steps {
            phase += *d;
            forward.push(phase);
        }
        let total = forward[g];
        let winding = (total / two_pi).round().to_i64().unwrap_or(0);

        let half = g / 2;
        let log_values = (0..g)
            .map(|j| {
                let phi = if j < half || (j == half && g % 2 == 1) {
                    forward[j]
                } else if j == half {
                    // θ = π sits on the branch cut when the winding is nonzero
                    forward[j] - total / T::lit(2.0)
                } else {
                    forward[j] - total
                };
                Complex::new(values[j].norm().ln(), phi)
            })
            .collect();
        return Ok(EcfLog {
            coeffs: ecf.coeffs.clone(),
            values,
            log_values,
            winding: Some(winding),
        });
    }
}

/// ECF on the default grid with the continuous log filled in.
pub fn ecf_log<T: Scalar>(poly: &CoeffPoly<T>) -> Result<EcfLog<T>> {
    continuous_log(&ecf_eval(poly, default_grid(poly.degree()))?)
}

/// Winding number of the ECF loop of `poly` around the origin.
pub fn winding_number<T: Scalar>(poly: &CoeffPoly<T>) -> Result<i64> {
    Ok(ecf_log(poly)?.winding.unwrap_or(0))
}

/// `γ̂(θ; δ) = δ + (1 − δ) γ̂(θ)`.
pub fn shrink<T: Scalar>(poly: &CoeffPoly<T>, delta: T) -> Result<CoeffPoly<T>> {
    if !(delta > T::zero() && delta < T::one()) {
        return Err(invalid(format!("shrinking parameter δ = {delta} must lie in (0, 1)")));
    }
    let keep = T::one() - delta;
    let mut coeffs: Vec<T> = poly.coeffs.iter().map(|&c| keep * c).collect();
    coeffs[0] += delta;
    Ok(CoeffPoly {
        coeffs,
        normalized: poly.normalized,
    })
}

/// Smallest δ from [`SHRINK_LADDER`] that removes the winding.
pub fn shrink_adaptive<T: Scalar>(poly: &CoeffPoly<T>) -> Result<(CoeffPoly<T>, T)> {
    for delta in SHRINK_LADDER {
        let delta = T::lit(delta);
        let shrunk = shrink(poly, delta)?;
        if winding_number(&shrunk)? == 0 {
            return Ok((shrunk, delta));
        }
    }
    Err(Error::CorrectionFailure(format!(
        "winding persists after shrinking with δ = {}",
        SHRINK_LADDER[SHRINK_LADDER.len() - 1]
    )))
}

/// Moves every zero with `|α| ≤ 1 + ε` radially to `|α| = 1 + ε` and
/// re-expands `γ̃(w) = Π (w − α̃_k)/(1 − α̃_k)`, so that `γ̃(1) = 1`.
///
/// The result is returned unchanged when no zero needs editing.
pub fn edit_zeros<T: Scalar>(poly: &CoeffPoly<T>, eps: T) -> Result<CoeffPoly<T>> {
    if !(eps > T::zero()) || !eps.is_finite() {
        return Err(invalid(format!("editing parameter ε = {eps} must be positive")));
    }
    let last = poly.coeffs.iter().rposition(|c| *c != T::zero());
    let Some(degree) = last else {
        return Err(Error::DegeneratePolynomial("all coefficients vanish".into()));
    };
    if degree == 0 {
        return Ok(poly.clone());
    }
    let coeffs = &poly.coeffs[..=degree];
    let zeros = roots::aberth(coeffs)?;
    let one = Complex::new(T::one(), T::zero());
    if zeros.iter().any(|a| (a - one).norm() < T::lit(1e-10)) {
        return Err(Error::DegeneratePolynomial("polynomial has a zero at w = 1".into()));
    }
    let radius = T::one() + eps;
    let mut edited = false;
    let moved: Vec<Complex<T>> = zeros
        .iter()
        .map(|&a| {
            let r = a.norm();
            if r <= radius {
                edited = true;
                a * (radius / r)
            } else {
                a
            }
        })
        .collect();
    if !edited {
        return Ok(poly.clone());
    }

    let expanded = roots::expand_normalized(&moved);
    let scale = expanded.iter().map(|c| c.norm()).fold(T::zero(), T::max);
    let imag = expanded.iter().map(|c| c.im.abs()).fold(T::zero(), T::max);
    if imag > T::tol(1e-8) * scale.max(T::one()) {
        return Err(Error::Numeric(format!(
            "edited polynomial has imaginary residue {imag}"
        )));
    }
    let mut out: Vec<T> = expanded.iter().map(|c| c.re).collect();
    let sum: T = out.iter().copied().sum();
    out.iter_mut().for_each(|c| *c /= sum);
    out.resize(poly.coeffs.len(), T::zero());
    let result = CoeffPoly {
        coeffs: out,
        normalized: true,
    };
    let w = winding_number(&result)?;
    if w != 0 {
        return Err(Error::Numeric(format!("edited polynomial still winds {w} times")));
    }
    Ok(result)
}

/// Which correction to apply when the ECF loop winds around the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correction<T> {
    /// Keep the uncorrected estimate, wrong branch included.
    None,
    /// Shrink with a fixed δ, or adaptively along [`SHRINK_LADDER`] when `None`.
    Shrink { delta: Option<T> },
    /// Edit zeros inside radius `1 + ε`.
    Edit { eps: T },
}

impl<T: Scalar> Default for Correction<T> {
    fn default() -> Self {
        Correction::Edit { eps: T::lit(0.075) }
    }
}

/// Correction that was actually applied to the ECF.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AppliedCorrection<T> {
    None,
    Shrink { delta: T },
    Edit { eps: T },
}

/// Applies `correction` if the loop of `poly` winds; returns the (possibly
/// modified) polynomial, its log-ECF, the original winding number, and the
/// correction that was used.
pub fn correct<T: Scalar>(
    poly: &CoeffPoly<T>,
    grid: usize,
    correction: Correction<T>,
) -> Result<(CoeffPoly<T>, EcfLog<T>, i64, AppliedCorrection<T>)> {
    let raw = continuous_log(&ecf_eval(poly, grid)?)?;
    let winding = raw.winding.unwrap_or(0);
    if winding == 0 {
        return Ok((poly.clone(), raw, 0, AppliedCorrection::None));
    }
    let (fixed, applied) = match correction {
        Correction::None => return Ok((poly.clone(), raw, winding, AppliedCorrection::None)),
        Correction::Shrink { delta: Some(delta) } => {
            (shrink(poly, delta)?, AppliedCorrection::Shrink { delta })
        }
        Correction::Shrink { delta: None } => {
            let (p, delta) = shrink_adaptive(poly)?;
            (p, AppliedCorrection::Shrink { delta })
        }
        Correction::Edit { eps } => (edit_zeros(poly, eps)?, AppliedCorrection::Edit { eps }),
    };
    let log = continuous_log(&ecf_eval(&fixed, grid)?)?;
    match log.winding {
        Some(0) => Ok((fixed, log, winding, applied)),
        other => Err(Error::CorrectionFailure(format!(
            "winding {} remains after correction",
            other.unwrap_or(0)
        ))),
    }
}
