//! Wald and standardized-tail tests, bootstrap max-V test, screening tables
//! and Monte Carlo power profiles. Double precision only.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::covariance::{cov_rates, cov_tails, plug_in_spec, CovMatrix};
use crate::error::{invalid, Error, Result};
use crate::estimate::{estimate_rates_fourier, EstimateResult, EstimationOptions};
use crate::model::{EstimatedProfile, RateProfile};
use crate::simulate::{simulate_bins, substream_seed, BinSeries};

/// Largest admissible condition number of `A` and `AΩ̂A′`.
pub const MAX_CONDITION: f64 = 1e12;
/// `Σ̂_{m,m}` at or below this is treated as zero variance.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Wald,
    Vm,
    MaxV,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    /// Degrees of freedom (Wald only).
    pub df: Option<usize>,
    pub p_value: f64,
    pub kind: TestKind,
}

fn upper_normal(v: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    n.sf(v).clamp(0.0, 1.0)
}

fn condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `W = T (Aν̂)′ (AΩ̂A′)⁻¹ Aν̂`, referred to χ² with `q = rows(A)` degrees of
/// freedom. `omega` holds the unscaled `Ω̂` (as returned by [`cov_rates`]);
/// `A` acts on `ν̂_1 … ν̂_M` with `M = cols(A)`.
pub fn wald_test(
    est: &EstimatedProfile<f64>,
    omega: &CovMatrix<f64>,
    a: &DMatrix<f64>,
    t: f64,
) -> Result<TestResult> {
    let (q, m) = a.shape();
    if q == 0 || m == 0 {
        return Err(invalid("contrast matrix A must be non-empty"));
    }
    if q > m {
        return Err(Error::Singular(format!("A has {q} rows but only {m} columns")));
    }
    if m > omega.dim() || m > est.len() {
        return Err(invalid(format!(
            "A has {m} columns, estimates/covariance cover {}/{} orders",
            est.len(),
            omega.dim()
        )));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid("observation length T must be positive"));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(invalid("A must be finite"));
    }
    let ca = condition(a);
    if !(ca <= MAX_CONDITION) {
        return Err(Error::Singular(format!("A is rank deficient (condition {ca:.3e})")));
    }
    let om = DMatrix::from_fn(m, m, |i, j| omega.get(i + 1, j + 1));
    let s = a * om * a.transpose();
    let cs = condition(&s);
    if !(cs <= MAX_CONDITION) {
        return Err(Error::Singular(format!("AΩ̂A′ is singular (condition {cs:.3e})")));
    }
    let nu = DVector::from_fn(m, |i, _| est.rate(i + 1));
    let x = a * nu;
    let y = s
        .clone()
        .lu()
        .solve(&x)
        .ok_or_else(|| Error::Singular("AΩ̂A′ could not be factorized".into()))?;
    let w = (t * x.dot(&y)).max(0.0);
    let chi = ChiSquared::new(q as f64).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(TestResult {
        statistic: w,
        df: Some(q),
        p_value: chi.sf(w).clamp(0.0, 1.0),
        kind: TestKind::Wald,
    })
}

/// Wald test of `ν_n = 0` for all `n` in `orders`, using the plug-in `Ω̂`
/// built from positive parts of the estimates.
pub fn wald_test_zero(est: &EstimateResult<f64>, orders: &[usize]) -> Result<TestResult> {
    let m = est.nmax();
    if orders.is_empty() || orders.iter().any(|&n| n < 1 || n > m) {
        return Err(invalid(format!("tested orders must lie in 1..={m}")));
    }
    let spec = plug_in_spec(&est.rates, est.h, m)?;
    let omega = cov_rates(&spec, est.duration, m)?;
    let mut a = DMatrix::zeros(orders.len(), m);
    for (row, &n) in orders.iter().enumerate() {
        a[(row, n - 1)] = 1.0;
    }
    wald_test(&est.rates, &omega, &a, est.duration)
}

/// `V_m = (T/Σ̂_{m,m})^{1/2} ρ̂_m` for `m = 1 … mmax`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VmStatistics {
    pub values: Vec<f64>,
    /// `true` where `Σ̂_{m,m} ≤ 1e−12`; the value is then reported as 0.
    pub degenerate: Vec<bool>,
    pub tails: Vec<f64>,
    /// `Σ̂_{m,m}`.
    pub variances: Vec<f64>,
}

impl VmStatistics {
    /// `V_m` for `m` starting at 1.
    pub fn get(&self, m: usize) -> f64 {
        self.values[m - 1]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn vm_from_estimate(est: &EstimateResult<f64>, mmax: usize) -> Result<VmStatistics> {
    let spec = plug_in_spec(&est.rates, est.h, est.nmax())?;
    let sigma = cov_tails(&spec, est.duration, mmax)?;
    let t = est.duration;
    let mut out = VmStatistics {
        values: Vec::with_capacity(mmax),
        degenerate: Vec::with_capacity(mmax),
        tails: Vec::with_capacity(mmax),
        variances: Vec::with_capacity(mmax),
    };
    for m in 1..=mmax {
        let var = sigma.get(m, m);
        let rho = est.tail(m);
        let degenerate = !(var > DEGENERATE_VARIANCE);
        out.values.push(if degenerate { 0.0 } else { (t / var).sqrt() * rho });
        out.degenerate.push(degenerate);
        out.tails.push(rho);
        out.variances.push(var);
    }
    Ok(out)
}

fn options_for(mmax: usize, opts: &EstimationOptions<f64>) -> EstimationOptions<f64> {
    let mut o = *opts;
    o.nmax = o.nmax.max(mmax);
    o
}

/// Standardized tail statistics with the plug-in `Σ̂`.
pub fn vm_statistics(
    bins: &BinSeries<f64>,
    mmax: usize,
    opts: &EstimationOptions<f64>,
) -> Result<VmStatistics> {
    if mmax < 1 {
        return Err(invalid("mmax must be ≥ 1"));
    }
    let est = estimate_rates_fourier(bins, &options_for(mmax, opts))?;
    vm_from_estimate(&est, mmax)
}

/// One-sided test of `ρ_m = 0` against `ρ_m > 0`.
pub fn vm_test(bins: &BinSeries<f64>, m: usize, opts: &EstimationOptions<f64>) -> Result<TestResult> {
    let vm = vm_statistics(bins, m, opts)?;
    let v = vm.get(m);
    Ok(TestResult {
        statistic: v,
        df: None,
        p_value: if vm.degenerate[m - 1] { 1.0 } else { upper_normal(v) },
        kind: TestKind::Vm,
    })
}

fn max_v(vm: &VmStatistics, m1: usize, m2: usize) -> f64 {
    vm.values[m1 - 1..m2].iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `V = max_{m1 ≤ m ≤ m2} V_m` with a parametric bootstrap null: `B` series
/// of the same length are simulated from the positive parts of `ν̂_n`,
/// `n < m1`, and `p = (1 + #{V* ≥ V})/(B + 1)`.
pub fn max_v_test(
    bins: &BinSeries<f64>,
    m1: usize,
    m2: usize,
    b: usize,
    seed: u64,
    opts: &EstimationOptions<f64>,
) -> Result<TestResult> {
    if m1 < 2 || m1 > m2 {
        return Err(invalid("orders must satisfy 2 ≤ m1 ≤ m2"));
    }
    if b < 100 {
        return Err(invalid("at least 100 bootstrap replicates are required"));
    }
    let opts = options_for(m2, opts);
    let est = estimate_rates_fourier(bins, &opts)?;
    let observed = max_v(&vm_from_estimate(&est, m2)?, m1, m2);
    let null_rates = (1..m1).map(|n| est.rates.rate(n).max(0.0)).collect();
    let null = RateProfile::new(null_rates)?;
    let (h, l) = (bins.h(), bins.len());
    let exceed = (0..b)
        .into_par_iter()
        .map(|r| -> Result<usize> {
            let sim = simulate_bins(&null, h, l, substream_seed(seed, r as u64))?;
            let vm = vm_statistics(&sim, m2, &opts)?;
            Ok(usize::from(max_v(&vm, m1, m2) >= observed))
        })
        .try_reduce(|| 0, |x, y| Ok(x + y))?;
    Ok(TestResult {
        statistic: observed,
        df: None,
        p_value: (1 + exceed) as f64 / (b + 1) as f64,
        kind: TestKind::MaxV,
    })
}

/// `β_n` = fraction of replicates with `V_n > threshold`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerProfile {
    pub beta: Vec<f64>,
    pub reps: usize,
    pub threshold: f64,
}

/// Monte Carlo power profile over `reps` simulated series of `l` bins, each
/// estimated with default options up to `nmax`.
pub fn power_profile(
    profile: &RateProfile<f64>,
    h: f64,
    l: usize,
    reps: usize,
    threshold: f64,
    nmax: usize,
    seed: u64,
) -> Result<PowerProfile> {
    power_profile_with(
        profile,
        h,
        l,
        reps,
        threshold,
        seed,
        &EstimationOptions::default().with_nmax(nmax),
    )
}

/// As [`power_profile`], with explicit estimation options (`opts.nmax` sets
/// the profile length).
pub fn power_profile_with(
    profile: &RateProfile<f64>,
    h: f64,
    l: usize,
    reps: usize,
    threshold: f64,
    seed: u64,
    opts: &EstimationOptions<f64>,
) -> Result<PowerProfile> {
    if reps < 1 {
        return Err(invalid("reps must be ≥ 1"));
    }
    if !threshold.is_finite() {
        return Err(invalid("threshold must be finite"));
    }
    let nmax = opts.nmax;
    let counts = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<Vec<usize>> {
            let bins = simulate_bins(profile, h, l, substream_seed(seed, r as u64))?;
            let vm = vm_statistics(&bins, nmax, opts)?;
            Ok(vm.values.iter().map(|&v| usize::from(v > threshold)).collect())
        })
        .try_reduce(
            || vec![0; nmax],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    Ok(PowerProfile {
        beta: counts.iter().map(|&c| c as f64 / reps as f64).collect(),
        reps,
        threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreeningRow {
    pub n: usize,
    pub nu_hat: f64,
    pub rho_hat: f64,
    #[serde(rename = "V")]
    pub v: f64,
    /// Upper normal tail of `V_n`; 1 for degenerate rows.
    pub p: f64,
    #[serde(skip)]
    pub degenerate: bool,
}

/// One row `(n, ν̂_n, ρ̂_n, V_n, p_n)` per order `n = 1 … nmax`.
pub fn screening_report(
    bins: &BinSeries<f64>,
    nmax: usize,
    opts: &EstimationOptions<f64>,
) -> Result<Vec<ScreeningRow>> {
    if nmax < 1 {
        return Err(invalid("nmax must be ≥ 1"));
    }
    let est = estimate_rates_fourier(bins, &options_for(nmax, opts))?;
    screening_from_estimate(&est, nmax)
}

/// Screening table for an existing estimate.
pub fn screening_from_estimate(est: &EstimateResult<f64>, nmax: usize) -> Result<Vec<ScreeningRow>> {
    if nmax < 1 || nmax > est.nmax() {
        return Err(invalid(format!("nmax must lie in 1..={}", est.nmax())));
    }
    let vm = vm_from_estimate(est, nmax)?;
    Ok((1..=nmax)
        .map(|n| {
            let degenerate = vm.degenerate[n - 1];
            let v = vm.get(n);
            ScreeningRow {
                n,
                nu_hat: est.rates.rate(n),
                rho_hat: est.tail(n),
                v,
                p: if degenerate { 1.0 } else { upper_normal(v) },
                degenerate,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::KernelSpec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn omega(rates: &[f64], h: f64, m: usize) -> CovMatrix<f64> {
        cov_rates(&KernelSpec::new(rates.to_vec(), h).unwrap(), 30.0, m).unwrap()
    }

    #[test]
    fn wald_zero_estimates() {
        let est = EstimatedProfile::new(vec![0.0; 4]).unwrap();
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, -1.0, 0.0]);
        let r = wald_test(&est, &omega(&[40.0, 10.0, 4.0, 3.0], 0.02, 4), &a, 30.0).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.df, Some(2));
    }

    #[test]
    fn wald_scalar_case_is_squared_z() {
        let est = EstimatedProfile::new(vec![41.0, 1.5, 3.0]).unwrap();
        let om = omega(&[40.0, 10.0, 4.0], 0.02, 3);
        let mut a = DMatrix::zeros(1, 3);
        a[(0, 1)] = 1.0;
        let r = wald_test(&est, &om, &a, 30.0).unwrap();
        let z2 = 30.0 * 1.5 * 1.5 / om.get(2, 2);
        assert_relative_eq!(r.statistic, z2, max_relative = 1e-12);
        assert_relative_eq!(r.p_value, 2.0 * upper_normal(z2.sqrt()), max_relative = 1e-9);
    }

    #[test]
    fn wald_rejects_singular_contrasts() {
        let est = EstimatedProfile::new(vec![1.0, 2.0]).unwrap();
        let om = omega(&[1.0, 1.0], 0.1, 2);
        let dup = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        assert!(matches!(wald_test(&est, &om, &dup, 1.0), Err(Error::Singular(_))));
        let zero_var = cov_rates(&KernelSpec::new(vec![0.0, 0.0], 0.1).unwrap(), 1.0, 2).unwrap();
        assert!(matches!(
            wald_test(&est, &zero_var, &DMatrix::identity(2, 2), 1.0),
            Err(Error::Singular(_))
        ));
        assert!(wald_test(&est, &om, &DMatrix::identity(3, 3), 1.0).is_err());
    }

    #[test]
    fn all_zero_bins_are_degenerate() {
        let bins = BinSeries::new(0.02, vec![0; 200]).unwrap();
        let vm = vm_statistics(&bins, 5, &EstimationOptions::default()).unwrap();
        assert!(vm.values.iter().all(|v| *v == 0.0));
        assert!(vm.degenerate.iter().all(|d| *d));
        let rows = screening_report(&bins, 5, &EstimationOptions::default()).unwrap();
        assert!(rows.iter().all(|r| r.nu_hat == 0.0 && r.rho_hat == 0.0 && r.v == 0.0));
        let pp = power_profile(&RateProfile::empty(), 0.02, 200, 5, 2.0, 4, 1).unwrap();
        assert_eq!(pp.beta, vec![0.0; 4]);
    }

    #[test]
    fn vm_sign_follows_tail_sign() {
        let p = RateProfile::new(vec![40.0, 10.0, 4.0, 3.0, 1.0]).unwrap();
        for seed in 0..5 {
            let bins = simulate_bins(&p, 0.02, 1500, seed).unwrap();
            let vm = vm_statistics(&bins, 12, &EstimationOptions::default()).unwrap();
            for m in 0..12 {
                if !vm.degenerate[m] {
                    assert_eq!(vm.values[m] > 0.0, vm.tails[m] > 0.0);
                }
            }
        }
    }

    #[test]
    fn example_two_screening() {
        let p = RateProfile::new(vec![150.0, 0.0, 0.0, 0.0, 0.0, 0.0, 7.0]).unwrap();
        let bins = simulate_bins(&p, 0.005, 12_000, 7).unwrap();
        let rows = screening_report(&bins, 12, &EstimationOptions::default()).unwrap();
        assert!(rows[6].v > 2.0, "V_7 = {}", rows[6].v);
        assert!(rows[6].p < 0.05);
        assert!(rows[7].v < 2.0, "V_8 = {}", rows[7].v);
    }

    #[test]
    fn max_v_is_deterministic_and_bounded() {
        let p = RateProfile::new(vec![40.0, 10.0]).unwrap();
        let bins = simulate_bins(&p, 0.02, 600, 2).unwrap();
        let opts = EstimationOptions::default().with_nmax(6);
        let a = max_v_test(&bins, 2, 4, 100, 11, &opts).unwrap();
        let b = max_v_test(&bins, 2, 4, 100, 11, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.p_value > 0.0 && a.p_value <= 1.0);
        assert!(a.p_value < 0.05, "true ρ_2 > 0 should be detected, p = {}", a.p_value);
        assert!(max_v_test(&bins, 1, 4, 100, 1, &opts).is_err());
        assert!(max_v_test(&bins, 2, 4, 99, 1, &opts).is_err());
    }

    #[test]
    fn max_v_single_order_matches_normal_tail() {
        let p = RateProfile::new(vec![40.0]).unwrap();
        let bins = simulate_bins(&p, 0.02, 1500, 21).unwrap();
        let opts = EstimationOptions::default().with_nmax(6);
        let boot = max_v_test(&bins, 3, 3, 400, 5, &opts).unwrap();
        let normal = vm_test(&bins, 3, &opts).unwrap();
        assert_relative_eq!(boot.statistic, normal.statistic, max_relative = 1e-12);
        // binomial standard error at B = 400 is at most 0.025
        assert!((boot.p_value - normal.p_value).abs() < 0.1, "{} vs {}", boot.p_value, normal.p_value);
    }

    #[test]
    fn power_profile_is_deterministic() {
        let p = RateProfile::new(vec![40.0, 10.0, 4.0]).unwrap();
        let a = power_profile(&p, 0.02, 500, 8, 2.0, 5, 3).unwrap();
        assert_eq!(a, power_profile(&p, 0.02, 500, 8, 2.0, 5, 3).unwrap());
        for b in &a.beta {
            assert!((b * 8.0 - (b * 8.0).round()).abs() < 1e-12);
        }
        assert!(power_profile(&p, 0.02, 500, 0, 2.0, 5, 3).is_err());
    }

    #[test]
    fn wald_zero_helper_matches_direct() {
        let p = RateProfile::new(vec![40.0, 10.0]).unwrap();
        let bins = simulate_bins(&p, 0.02, 1500, 4).unwrap();
        let est = estimate_rates_fourier(&bins, &EstimationOptions::default().with_nmax(4)).unwrap();
        let r = wald_test_zero(&est, &[2]).unwrap();
        assert!(r.p_value < 1e-3);
        assert!(wald_test_zero(&est, &[5]).is_err());
        assert!(wald_test_zero(&est, &[]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn wald_invariant_under_row_mixing(
            nu in prop::collection::vec(-5.0f64..5.0, 4),
            g in prop::collection::vec(-2.0f64..2.0, 4),
        ) {
            let gm = DMatrix::from_row_slice(2, 2, &g);
            prop_assume!(gm.determinant().abs() > 0.1);
            let est = EstimatedProfile::new(nu).unwrap();
            let om = omega(&[17.0, 11.0, 14.0, 6.0], 0.05, 4);
            let a = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.5, 0.0, 0.0, 1.0, 0.0, -1.0]);
            let w1 = wald_test(&est, &om, &a, 60.0).unwrap().statistic;
            let w2 = wald_test(&est, &om, &(gm * a), 60.0).unwrap().statistic;
            prop_assert!((w1 - w2).abs() <= 1e-8 * w1.max(1.0));
        }
    }
}
