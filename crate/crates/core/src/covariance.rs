//! Asymptotic covariances of the rate and tail estimates.
//!
//! Every entry is of the form `T⁻¹ J(n1, n2, α1, α2)`, a Taylor coefficient
//! of the kernel generating function (see [`crate::series::bivar_psi`]).
//! [`cov_quadrature_oracle`] evaluates the same quantity as a double Fourier
//! integral of the kernel, independently of the series route.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::{EstimatedProfile, RateProfile};
use crate::scalar::Scalar;
use crate::series::{bivar_psi, bivar_taylor_j};

/// Nonnegative rates `ν_1 … ν_K` and bin width entering the kernel `Γ_h`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSpec<T> {
    rates: Vec<T>,
    h: T,
}

impl<T: Scalar> KernelSpec<T> {
    pub fn new(rates: Vec<T>, h: T) -> Result<Self> {
        if !(h > T::zero()) || !h.is_finite() {
            return Err(invalid("bin width h must be positive"));
        }
        if rates.iter().any(|r| !(*r >= T::zero()) || !r.is_finite()) {
            return Err(invalid("kernel rates must be finite and ≥ 0"));
        }
        Ok(Self { rates, h })
    }

    pub fn from_profile(profile: &RateProfile<T>, h: T) -> Result<Self> {
        Self::new(profile.rates().to_vec(), h)
    }

    pub fn rates(&self) -> &[T] {
        &self.rates
    }

    pub fn h(&self) -> T {
        self.h
    }

    /// Truncation order `K`.
    pub fn order(&self) -> usize {
        self.rates.len()
    }
}

/// Kernel built from positive parts `ν̂_n⁺` for `n ≤ k`.
pub fn plug_in_spec<T: Scalar>(est: &EstimatedProfile<T>, h: T, k: usize) -> Result<KernelSpec<T>> {
    if k < 1 {
        return Err(invalid("plug-in truncation K must be ≥ 1"));
    }
    let rates = (1..=k).map(|n| est.rate(n).max(T::zero())).collect();
    KernelSpec::new(rates, h)
}

/// `e^w − 1` without cancellation for small `|w|`.
fn exp_m1<T: Scalar>(w: Complex<T>) -> Complex<T> {
    let half = w.im / T::lit(2.0);
    let s = half.sin();
    Complex::new(
        w.re.exp_m1() * w.im.cos() - T::lit(2.0) * s * s,
        w.re.exp() * w.im.sin(),
    )
}

/// `Γ_h(θ1, θ2) = h⁻¹(exp[h Σ ν_n (e^{iθ1 n} − 1)(e^{iθ2 n} − 1)] − 1)`.
pub fn kernel_gamma<T: Scalar>(spec: &KernelSpec<T>, theta1: T, theta2: T) -> Complex<T> {
    let one = Complex::new(T::one(), T::zero());
    let mut expo = Complex::new(T::zero(), T::zero());
    for (i, &nu) in spec.rates.iter().enumerate() {
        if nu == T::zero() {
            continue;
        }
        let n = T::from_count(i + 1);
        let a = Complex::from_polar(T::one(), n * theta1) - one;
        let b = Complex::from_polar(T::one(), n * theta2) - one;
        expo += a * b * (spec.h * nu);
    }
    exp_m1(expo) / spec.h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CovKind {
    /// `Ω_{m,n}`, covariances of `ν̂_m, ν̂_n`.
    Rates,
    /// `Σ_{m1,m2}`, covariances of `ρ̂_{m1}, ρ̂_{m2}`.
    Tails,
    /// `T ascov(ρ̂_m, ν̂_n)`.
    Cross,
}

/// Square matrix of `T ×` asymptotic covariances, indexed by order from 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovMatrix<T> {
    dim: usize,
    entries: Vec<T>,
    scale_t: T,
    kind: CovKind,
}

impl<T: Scalar> CovMatrix<T> {
    fn from_fn(dim: usize, scale_t: T, kind: CovKind, f: impl Fn(usize, usize) -> T) -> Self {
        let mut entries = vec![T::zero(); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                entries[i * dim + j] = f(i, j);
            }
        }
        // (A + Aᵀ)/2
        let half = T::lit(0.5);
        for i in 0..dim {
            for j in (i + 1)..dim {
                let v = (entries[i * dim + j] + entries[j * dim + i]) * half;
                entries[i * dim + j] = v;
                entries[j * dim + i] = v;
            }
        }
        Self {
            dim,
            entries,
            scale_t,
            kind,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> CovKind {
        self.kind
    }

    /// Observation length the entries are meant to be divided by.
    pub fn scale_t(&self) -> T {
        self.scale_t
    }

    /// Unscaled entry for orders `(m, n)`, both starting at 1.
    pub fn get(&self, m: usize, n: usize) -> T {
        assert!(m >= 1 && n >= 1 && m <= self.dim && n <= self.dim, "order out of range");
        self.entries[(m - 1) * self.dim + (n - 1)]
    }

    /// Asymptotic covariance `entry / T`.
    pub fn ascov(&self, m: usize, n: usize) -> T {
        self.get(m, n) / self.scale_t
    }

    /// Row-major unscaled entries.
    pub fn entries(&self) -> &[T] {
        &self.entries
    }
}

fn check_t<T: Scalar>(t: T) -> Result<()> {
    if !(t > T::zero()) || !t.is_finite() {
        return Err(invalid("observation length T must be positive"));
    }
    Ok(())
}

/// `Ω_{m,n} = J(m, n, 0, 0)` for `1 ≤ m, n ≤ nmax`.
pub fn cov_rates<T: Scalar>(spec: &KernelSpec<T>, t: T, nmax: usize) -> Result<CovMatrix<T>> {
    check_t(t)?;
    if nmax < 1 {
        return Err(invalid("nmax must be ≥ 1"));
    }
    let psi = bivar_psi(&spec.rates, spec.h, nmax, nmax, false, false);
    Ok(CovMatrix::from_fn(nmax, t, CovKind::Rates, |i, j| psi.get(i + 1, j + 1)))
}

/// `Σ_{m1,m2} = J(m1 − 1, m2 − 1, 1, 1)` for `1 ≤ m1, m2 ≤ mmax`.
pub fn cov_tails<T: Scalar>(spec: &KernelSpec<T>, t: T, mmax: usize) -> Result<CovMatrix<T>> {
    check_t(t)?;
    if mmax < 1 {
        return Err(invalid("mmax must be ≥ 1"));
    }
    let psi = bivar_psi(&spec.rates, spec.h, mmax - 1, mmax - 1, true, true);
    Ok(CovMatrix::from_fn(mmax, t, CovKind::Tails, |i, j| psi.get(i, j)))
}

/// `T ascov(ρ̂_m, ν̂_n) = J(m − 1, n, 1, 0)`.
pub fn cov_cross<T: Scalar>(spec: &KernelSpec<T>, t: T, m: usize, n: usize) -> Result<T> {
    check_t(t)?;
    if m < 1 || n < 1 {
        return Err(invalid("orders m and n must be ≥ 1"));
    }
    Ok(bivar_taylor_j(&spec.rates, spec.h, m - 1, n, true, false))
}

/// `Γ_h / ((z1 − 1)^α1 (z2 − 1)^α2)` at `z_j = e^{iθ_j}`, with the removable
/// singularities on the axes replaced by their limits.
fn integrand<T: Scalar>(
    spec: &KernelSpec<T>,
    z1: Complex<T>,
    z2: Complex<T>,
    on_axis1: bool,
    on_axis2: bool,
    tail1: bool,
    tail2: bool,
) -> Complex<T> {
    let zero = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    if (on_axis1 && !tail1) || (on_axis2 && !tail2) {
        return zero;
    }
    // Σ n ν_n (z^n − 1)/(z − 1)^α, the limit of Γ/(z1 − 1) as z1 → 1
    let derivative_limit = |z: Complex<T>, tail: bool| -> Complex<T> {
        let mut acc = zero;
        let mut pow = one;
        for (i, &nu) in spec.rates.iter().enumerate() {
            pow *= z;
            let n = T::from_count(i + 1);
            acc += (pow - one) * (n * nu);
        }
        if tail {
            acc / (z - one)
        } else {
            acc
        }
    };
    match (on_axis1, on_axis2) {
        (true, true) => {
            let s: T = spec
                .rates
                .iter()
                .enumerate()
                .map(|(i, &nu)| T::from_count((i + 1) * (i + 1)) * nu)
                .sum();
            Complex::new(s, T::zero())
        }
        (true, false) => derivative_limit(z2, tail2),
        (false, true) => derivative_limit(z1, tail1),
        (false, false) => {
            let mut expo = zero;
            let (mut p1, mut p2) = (one, one);
            for &nu in &spec.rates {
                p1 *= z1;
                p2 *= z2;
                expo += (p1 - one) * (p2 - one) * (spec.h * nu);
            }
            let mut v = exp_m1(expo) / spec.h;
            if tail1 {
                v /= z1 - one;
            }
            if tail2 {
                v /= z2 - one;
            }
            v
        }
    }
}

fn quadrature_on_grid<T: Scalar>(
    spec: &KernelSpec<T>,
    g: usize,
    n1: usize,
    n2: usize,
    tail1: bool,
    tail2: bool,
) -> Complex<T> {
    let two_pi = T::PI() + T::PI();
    let nodes: Vec<Complex<T>> = (0..g)
        .map(|j| Complex::from_polar(T::one(), two_pi * T::from_count(j) / T::from_count(g)))
        .collect();
    let twiddle = |n: usize, j: usize| nodes[(n * j) % g].conj();
    let mut acc = Complex::new(T::zero(), T::zero());
    for j1 in 0..g {
        let mut row = Complex::new(T::zero(), T::zero());
        for j2 in 0..g {
            let f = integrand(spec, nodes[j1], nodes[j2], j1 == 0, j2 == 0, tail1, tail2);
            row += f * twiddle(n2, j2);
        }
        acc += row * twiddle(n1, j1);
    }
    acc / T::from_count(g * g)
}

/// Largest grid (per axis) the quadrature oracle refines to.
pub const ORACLE_MAX_GRID: usize = 1024;

/// `J(n1, n2, α1, α2)` by trapezoidal quadrature of the double integral on a
/// `G × G` tensor grid, doubling `G` until successive values agree to 1e−10.
pub fn cov_quadrature_oracle<T: Scalar>(
    spec: &KernelSpec<T>,
    n1: usize,
    n2: usize,
    tail1: bool,
    tail2: bool,
) -> Result<T> {
    let mut g = (4 * (n1.max(n2) + spec.order() + 1)).next_power_of_two().max(16);
    let mut prev = quadrature_on_grid(spec, g, n1, n2, tail1, tail2);
    let tol = T::tol(1e-10);
    while g * 2 <= ORACLE_MAX_GRID {
        g *= 2;
        let next = quadrature_on_grid(spec, g, n1, n2, tail1, tail2);
        if (next - prev).norm() <= tol * next.norm().max(T::one()) {
            let imag = next.im.abs();
            if imag > T::tol(1e-10) * next.norm().max(T::one()) {
                return Err(Error::Numeric(format!("quadrature left imaginary residue {imag}")));
            }
            return Ok(next.re);
        }
        prev = next;
    }
    Err(Error::Numeric(format!(
        "quadrature did not converge up to a {ORACLE_MAX_GRID}² grid"
    )))
}
