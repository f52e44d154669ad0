//! Aberth–Ehrlich simultaneous iteration for all zeros of a real polynomial.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_ITERATIONS: usize = 200;

/// Horner evaluation of `p(z)` and `p'(z)`; coefficients in ascending order.
fn eval_with_derivative<T: Scalar>(c: &[Complex<T>], z: Complex<T>) -> (Complex<T>, Complex<T>) {
    let mut p = c[c.len() - 1];
    let mut dp = Complex::new(T::zero(), T::zero());
    for &ck in c[..c.len() - 1].iter().rev() {
        dp = dp * z + p;
        p = p * z + ck;
    }
    (p, dp)
}

/// `|p(z)|` together with `Σ |c_k| |z|^k`, the scale of its rounding error.
pub fn residual<T: Scalar>(coeffs: &[T], z: Complex<T>) -> (T, T) {
    let r = z.norm();
    let mut p = Complex::new(T::zero(), T::zero());
    let mut scale = T::zero();
    for &ck in coeffs.iter().rev() {
        p = p * z + Complex::new(ck, T::zero());
        scale = scale * r + ck.abs();
    }
    (p.norm(), scale)
}

/// All `K` zeros of `Σ_{k=0}^{K} c_k w^k` (`c_K ≠ 0`, `c_0 ≠ 0`).
///
/// Starts from a circle of radius `|c_0/c_K|^{1/K}` and stops once every
/// correction is below machine precision, or after [`MAX_ITERATIONS`]. Each
/// returned zero satisfies `|p(α)| ≤ 1e−9 Σ|c_k||α|^k`.
pub fn aberth<T: Scalar>(coeffs: &[T]) -> Result<Vec<Complex<T>>> {
    let degree = coeffs.len().saturating_sub(1);
    if degree == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[degree];
    if lead == T::zero() || coeffs[0] == T::zero() {
        return Err(Error::DegeneratePolynomial(
            "leading and constant coefficients must be nonzero".into(),
        ));
    }
    let c: Vec<Complex<T>> = coeffs.iter().map(|&x| Complex::new(x, T::zero())).collect();
    let radius = (coeffs[0] / lead).abs().powf(T::one() / T::from_count(degree));
    let two_pi = T::PI() + T::PI();
    // offset keeps the start off the real axis, where conjugate pairs would stall
    let offset = T::lit(0.4);
    let mut z: Vec<Complex<T>> = (0..degree)
        .map(|k| {
            let angle = two_pi * T::from_count(k) / T::from_count(degree) + offset;
            Complex::from_polar(radius, angle)
        })
        .collect();

    let tiny = T::epsilon() * T::lit(4.0);
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut converged = true;
        for k in 0..degree {
            let (p, dp) = eval_with_derivative(&c, z[k]);
            if p == Complex::new(T::zero(), T::zero()) {
                continue;
            }
            let ratio = p / dp;
            let mut repel = Complex::new(T::zero(), T::zero());
            for j in 0..degree {
                if j != k {
                    repel += (z[k] - z[j]).inv();
                }
            }
            let step = ratio / (Complex::new(T::one(), T::zero()) - ratio * repel);
            if !step.re.is_finite() || !step.im.is_finite() {
                continue;
            }
            z[k] -= step;
            if step.norm() > tiny * z[k].norm().max(T::one()) {
                converged = false;
            }
        }
        if converged {
            break;
        }
    }

    let tol = T::tol(1e-9);
    let mut worst = T::zero();
    for &root in &z {
        let (p, scale) = residual(coeffs, root);
        let rel = if scale > T::zero() { p / scale } else { p };
        worst = worst.max(rel);
    }
    if !(worst <= tol) {
        return Err(Error::RootFinding {
            iterations,
            residual: worst.as_f64(),
        });
    }
    Ok(z)
}

/// Leja order: start from the largest root, then repeatedly take the root
/// maximizing the product of distances to those already taken.
fn leja_order<T: Scalar>(roots: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut rest = roots.to_vec();
    let mut out = Vec::with_capacity(rest.len());
    let mut score = vec![T::zero(); rest.len()];
    let mut pick = (0..rest.len()).fold(0, |b, i| if rest[i].norm() > rest[b].norm() { i } else { b });
    while !rest.is_empty() {
        let chosen = rest.swap_remove(pick);
        score.swap_remove(pick);
        for (s, r) in score.iter_mut().zip(&rest) {
            *s += (*r - chosen).norm().max(T::min_positive_value()).ln();
        }
        out.push(chosen);
        pick = (0..rest.len()).fold(0, |b, i| if score[i] > score[b] { i } else { b });
    }
    out
}

/// Coefficients of `Π_k (w − α_k)/(1 − α_k)` in ascending order. Factors are
/// multiplied in Leja order, which keeps the expansion accurate for
/// high degrees with zeros spread around a circle.
pub fn expand_normalized<T: Scalar>(roots: &[Complex<T>]) -> Vec<Complex<T>> {
    let one = Complex::new(T::one(), T::zero());
    let mut out = vec![one];
    for a in leja_order(roots) {
        let denom = (one - a).inv();
        let mut next = vec![Complex::new(T::zero(), T::zero()); out.len() + 1];
        for (i, &c) in out.iter().enumerate() {
            next[i + 1] += c * denom;
            next[i] -= c * a * denom;
        }
        out = next;
    }
    out
}
