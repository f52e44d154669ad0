//! Compound Poisson model objects and the validity diagnostics for the
//! normal approximation.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::series::{series_exp, TruncSeries};

/// True jump rates `ν_1 … ν_K` in events per second.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateProfile<T> {
    rates: Vec<T>,
}

impl<T: Scalar> RateProfile<T> {
    pub fn new(rates: Vec<T>) -> Result<Self> {
        for (i, r) in rates.iter().enumerate() {
            if !r.is_finite() || *r < T::zero() {
                return Err(invalid(format!("rate ν_{} = {r} must be finite and ≥ 0", i + 1)));
            }
        }
        Ok(Self { rates })
    }

    /// Profile with `ν_n = rate` at a single jump size `n` and zero elsewhere.
    pub fn single(n: usize, rate: T) -> Result<Self> {
        if n == 0 {
            return Err(invalid("jump sizes start at 1"));
        }
        let mut rates = vec![T::zero(); n];
        rates[n - 1] = rate;
        Self::new(rates)
    }

    pub fn empty() -> Self {
        Self { rates: Vec::new() }
    }

    pub fn rates(&self) -> &[T] {
        &self.rates
    }

    /// `ν_n`, zero outside the stored support.
    pub fn rate(&self, n: usize) -> T {
        if n == 0 {
            return T::zero();
        }
        self.rates.get(n - 1).copied().unwrap_or_else(T::zero)
    }

    /// Largest stored jump size `K`.
    pub fn max_jump(&self) -> usize {
        self.rates.len()
    }

    /// Largest `n` with `ν_n > 0`, or 0 for the trivial model.
    pub fn support_max(&self) -> usize {
        self.rates.iter().rposition(|r| *r > T::zero()).map_or(0, |i| i + 1)
    }

    /// Carrier rate `ν_+ = Σ ν_n`.
    pub fn nu_plus(&self) -> T {
        self.rates.iter().copied().sum()
    }

    /// Spike rate `Σ n ν_n`.
    pub fn event_rate(&self) -> T {
        self.rates
            .iter()
            .enumerate()
            .map(|(i, r)| T::from_count(i + 1) * *r)
            .sum()
    }

    /// `Σ n² ν_n`, the variance rate of the compound process.
    pub fn second_moment_rate(&self) -> T {
        self.rates
            .iter()
            .enumerate()
            .map(|(i, r)| T::from_count((i + 1) * (i + 1)) * *r)
            .sum()
    }

    /// Tail sum `ρ_m = Σ_{n ≥ m} ν_n`.
    pub fn tail_sum(&self, m: usize) -> Result<T> {
        if m < 1 {
            return Err(invalid("tail order m must be ≥ 1"));
        }
        Ok(self.rates.iter().skip(m - 1).copied().sum())
    }
}

/// Estimated rates `ν̂_1 … ν̂_M`; entries may be negative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatedProfile<T> {
    rates: Vec<T>,
}

impl<T: Scalar> EstimatedProfile<T> {
    pub fn new(rates: Vec<T>) -> Result<Self> {
        if let Some(i) = rates.iter().position(|r| !r.is_finite()) {
            return Err(Error::Numeric(format!("estimate ν̂_{} is not finite", i + 1)));
        }
        Ok(Self { rates })
    }

    pub fn rates(&self) -> &[T] {
        &self.rates
    }

    pub fn rate(&self, n: usize) -> T {
        if n == 0 {
            return T::zero();
        }
        self.rates.get(n - 1).copied().unwrap_or_else(T::zero)
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}

/// Characteristic function of one bin count, `exp[h Σ ν_n (e^{inθ} − 1)]`.
pub fn cf_theoretical<T: Scalar>(profile: &RateProfile<T>, h: T, theta: T) -> Complex<T> {
    let mut expo = Complex::new(T::zero(), T::zero());
    for (i, &nu) in profile.rates.iter().enumerate() {
        if nu == T::zero() {
            continue;
        }
        let arg = T::from_count(i + 1) * theta;
        expo += Complex::new(arg.cos() - T::one(), arg.sin()) * (h * nu);
    }
    expo.exp()
}

/// Bin count probabilities `p_0 … p_kmax`.
pub fn pmf_theoretical<T: Scalar>(profile: &RateProfile<T>, h: T, kmax: usize) -> TruncSeries<T> {
    let mut a = vec![T::zero(); kmax + 1];
    a[0] = -h * profile.nu_plus();
    for (i, &nu) in profile.rates.iter().enumerate().take(kmax) {
        a[i + 1] = h * nu;
    }
    series_exp(&TruncSeries::from_vec_unchecked(a))
}

/// Smallest `kmax` whose cumulative mass exceeds `1 − 1e−12`, capped at
/// `10 (1 + hν_+ K)`.
pub fn default_pmf_kmax<T: Scalar>(profile: &RateProfile<T>, h: T) -> usize {
    let k = profile.max_jump().max(1);
    let cap = (T::lit(10.0) * (T::one() + h * profile.nu_plus() * T::from_count(k)))
        .ceil()
        .to_usize()
        .unwrap_or(usize::MAX)
        .max(1);
    let pmf = pmf_theoretical(profile, h, cap);
    let target = T::one() - T::tol(1e-12);
    let mut cum = T::zero();
    for (i, p) in pmf.coeffs().iter().enumerate() {
        cum += *p;
        if cum > target {
            return i;
        }
    }
    cap
}

/// Advisory thresholds used to turn the asymptotic validity conditions into
/// yes/no flags. Nothing is enforced on their basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidityThresholds<T> {
    /// Minimum number of bins `L = T/h`.
    pub min_bins: T,
    /// Minimum expected number of carrier events `ν_+ T`.
    pub min_carrier_events: T,
    /// Largest `hν_+` still treated as `O(1)`.
    pub max_h_nu_plus: T,
    /// Large-`hν_+` branch: bound on `e^{2hν_+}/(Th)`.
    pub max_growth_ratio: T,
    /// Large-`hν_+` branch: bound on `h²T`.
    pub max_h2_t: T,
}

impl<T: Scalar> Default for ValidityThresholds<T> {
    fn default() -> Self {
        Self {
            min_bins: T::lit(100.0),
            min_carrier_events: T::lit(100.0),
            max_h_nu_plus: T::lit(3.0),
            max_growth_ratio: T::lit(0.1),
            max_h2_t: T::lit(10.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport<T> {
    pub h_nu_plus: T,
    pub nu_plus_over_t: T,
    /// Lower bound `(e^{2hν_+} − 1)/(Th)` on the mean square of `h⁻¹ξ_h`.
    pub xi1_lower: T,
    /// Upper bound `(e^{4hν_+} − 1)/(Th)`.
    pub xi1_upper: T,
    /// Upper bound on the quadratic remainder.
    pub eps2_bound: T,
    /// Lower bound `2(1 − h/T)((e^{2hν_+} − 1)/T)²` on the quadratic remainder.
    pub xi2_lower: T,
    pub c0_ok: bool,
    pub c1_ok: bool,
    pub thresholds: ValidityThresholds<T>,
}

pub fn asymptotics_report<T: Scalar>(nu_plus: T, h: T, t: T) -> Result<DiagnosticsReport<T>> {
    asymptotics_report_with(nu_plus, h, t, ValidityThresholds::default())
}

pub fn asymptotics_report_with<T: Scalar>(
    nu_plus: T,
    h: T,
    t: T,
    thresholds: ValidityThresholds<T>,
) -> Result<DiagnosticsReport<T>> {
    if !(h > T::zero()) || !h.is_finite() {
        return Err(invalid("bin width h must be positive"));
    }
    if !(t >= h) || !t.is_finite() {
        return Err(invalid("observation length T must be at least h"));
    }
    if !(nu_plus >= T::zero()) || !nu_plus.is_finite() {
        return Err(invalid("ν_+ must be finite and ≥ 0"));
    }
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let x = h * nu_plus;
    let e2 = (two * x).exp_m1();
    let e4 = (T::lit(4.0) * x).exp_m1();
    let e8 = (T::lit(8.0) * x).exp_m1();
    let th = t * h;

    let xi1_lower = e2 / th;
    let xi1_upper = e4 / th;
    let eps2_bound = three * (e4 / t).powi(2) + three * (h / (t * t * t)) * e8;
    let xi2_lower = two * (T::one() - h / t) * (e2 / t).powi(2);

    let c0_ok = t / h >= thresholds.min_bins && nu_plus * t >= thresholds.min_carrier_events;
    let c1_ok = if x <= thresholds.max_h_nu_plus {
        true
    } else {
        (two * x).exp() / th <= thresholds.max_growth_ratio && h * h * t <= thresholds.max_h2_t
    };

    Ok(DiagnosticsReport {
        h_nu_plus: x,
        nu_plus_over_t: nu_plus / t,
        xi1_lower,
        xi1_upper,
        eps2_bound,
        xi2_lower,
        c0_ok,
        c1_ok,
        thresholds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn prof(v: &[f64]) -> RateProfile<f64> {
        RateProfile::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_negative_rates() {
        assert!(RateProfile::new(vec![1.0, -0.1]).is_err());
        assert!(RateProfile::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn cf_examples() {
        let p = prof(&[2.0, 1.0]);
        assert_eq!(cf_theoretical(&p, 0.1, 0.0), Complex::new(1.0, 0.0));

        let single = prof(&[7.0]);
        let v = cf_theoretical(&single, 0.1, PI);
        assert_relative_eq!(v.re, (-2.0 * 0.7f64).exp(), max_relative = 1e-14);
        assert!(v.im.abs() < 1e-15);

        // exp[0.1(2(i − 1) + 1(−1 − 1))]
        let want = (Complex::new(-2.0, 2.0) * 0.1 + Complex::new(-2.0, 0.0) * 0.1).exp();
        let got = cf_theoretical(&p, 0.1, PI / 2.0);
        assert!((got - want).norm() < 1e-15);
    }

    #[test]
    fn pmf_examples() {
        let pmf = pmf_theoretical(&prof(&[10.0]), 0.1, 6);
        let mut fact = 1.0;
        for k in 0..=6 {
            if k > 0 {
                fact *= k as f64;
            }
            assert_relative_eq!(pmf.coeff(k), (-1.0f64).exp() / fact, max_relative = 1e-14);
        }
        let pmf = pmf_theoretical(&prof(&[2.0, 1.0]), 0.1, 2);
        assert_relative_eq!(pmf.coeff(0), 0.7408182206817179, max_relative = 1e-15);
        assert_relative_eq!(pmf.coeff(1), 0.14816364413634358, max_relative = 1e-15);
        assert_relative_eq!(pmf.coeff(2), 0.08889818648180615, max_relative = 1e-14);

        let pmf = pmf_theoretical(&RateProfile::<f64>::empty(), 0.1, 3);
        assert_eq!(pmf.coeffs(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn pmf_tail_mass_small_at_recommended_kmax() {
        let p = prof(&[40.0, 10.0, 4.0, 3.0, 1.0]);
        let h = 0.02;
        let x: f64 = h * p.nu_plus() * 5.0;
        let kmax = (x + 20.0 * (h * p.nu_plus()).sqrt() * 5.0).ceil() as usize;
        let total: f64 = pmf_theoretical(&p, h, kmax).coeffs().iter().sum();
        assert!(total <= 1.0 + 1e-14);
        assert!(1.0 - total < 1e-9);

        let k = default_pmf_kmax(&p, h);
        let total: f64 = pmf_theoretical(&p, h, k).coeffs().iter().sum();
        assert!(1.0 - total < 1e-12);
        let below: f64 = pmf_theoretical(&p, h, k - 1).coeffs().iter().sum();
        assert!(1.0 - below >= 1e-12);
    }

    #[test]
    fn tail_sums() {
        let p = prof(&[40.0, 10.0, 4.0, 3.0, 1.0]);
        assert_eq!(p.tail_sum(2).unwrap(), 18.0);
        assert_eq!(p.tail_sum(1).unwrap(), p.nu_plus());
        assert_eq!(p.tail_sum(6).unwrap(), 0.0);
        assert!(p.tail_sum(0).is_err());
    }

    #[test]
    fn report_scenarios() {
        let r = asymptotics_report(58.0, 0.02, 30.0).unwrap();
        assert_relative_eq!(r.h_nu_plus, 1.16, max_relative = 1e-15);
        assert!(r.c1_ok);
        let r = asymptotics_report(48.0, 0.05, 60.0).unwrap();
        assert_relative_eq!(r.h_nu_plus, 2.4, max_relative = 1e-15);
        assert!(r.xi1_lower <= r.xi1_upper);

        let r = asymptotics_report(0.0, 0.02, 30.0).unwrap();
        assert_eq!(
            [r.h_nu_plus, r.xi1_lower, r.xi1_upper, r.eps2_bound, r.xi2_lower],
            [0.0; 5]
        );
        assert!(!r.c0_ok);
    }

    #[test]
    fn report_large_h_nu_plus_branch() {
        // hν_+ = 5: e^{10}/(Th) must be small and h²T bounded
        let r = asymptotics_report(5e5, 1e-5, 5e10).unwrap();
        assert!(r.c1_ok);
        let r = asymptotics_report(50.0, 0.1, 1e6).unwrap();
        assert!(!r.c1_ok);
        let r = asymptotics_report(50.0, 0.1, 100.0).unwrap();
        assert!(!r.c1_ok);
    }

    #[test]
    fn report_rejects_bad_arguments() {
        assert!(asymptotics_report(1.0, 0.0, 1.0).is_err());
        assert!(asymptotics_report(1.0, 0.1, 0.01).is_err());
        assert!(asymptotics_report(-1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn log_cf_fourier_coefficients_are_rates() {
        let p = prof(&[40.0, 10.0, 4.0, 3.0, 1.0]);
        let h = 0.02;
        let g = 1024;
        // phase-continuous log on the grid, unwrapped from θ = 0
        let mut logs = Vec::with_capacity(g);
        let mut prev_arg = 0.0;
        let mut phase = 0.0;
        for j in 0..g {
            let theta = 2.0 * PI * j as f64 / g as f64;
            let v = cf_theoretical(&p, h, theta);
            let a = v.arg();
            let mut d = a - prev_arg;
            while d > PI {
                d -= 2.0 * PI;
            }
            while d <= -PI {
                d += 2.0 * PI;
            }
            phase += d;
            prev_arg = a;
            logs.push(Complex::new(v.norm().ln(), phase));
        }
        for n in 1..=8 {
            let mut acc = Complex::new(0.0, 0.0);
            for (j, l) in logs.iter().enumerate() {
                let theta = 2.0 * PI * (n * j) as f64 / g as f64;
                acc += l * Complex::new(theta.cos(), -theta.sin());
            }
            let est = acc.re / (g as f64 * h);
            assert!((est - p.rate(n)).abs() < 1e-8, "n={n}: {est}");
        }
    }

    proptest! {
        #[test]
        fn cf_modulus_and_hermitian(nu in prop::collection::vec(0.0f64..30.0, 1..6), h in 0.001f64..0.2, theta in -PI..PI) {
            let p = prof(&nu);
            let a = cf_theoretical(&p, h, theta);
            let b = cf_theoretical(&p, h, -theta);
            prop_assert!(a.norm() <= 1.0 + 1e-15);
            prop_assert!((a - b.conj()).norm() < 1e-14);
        }

        #[test]
        fn pmf_is_subprobability(nu in prop::collection::vec(0.0f64..30.0, 1..6), h in 0.001f64..0.1, kmax in 0usize..30) {
            let pmf = pmf_theoretical(&prof(&nu), h, kmax);
            let mut cum = 0.0;
            for p in pmf.coeffs() {
                prop_assert!((0.0..=1.0).contains(p));
                cum += p;
            }
            prop_assert!(cum <= 1.0 + 1e-13);
        }

        #[test]
        fn report_bound_order(nu_plus in 0.0f64..500.0, h in 0.0001f64..0.5, t in 1.0f64..1000.0) {
            let r = asymptotics_report(nu_plus, h, t).unwrap();
            prop_assert!(r.xi1_lower <= r.xi1_upper);
            prop_assert!(r.xi1_lower >= 0.0 && r.eps2_bound >= 0.0 && r.xi2_lower >= 0.0);
        }
    }
}
