//! Exact simulation of bin counts, the multivariate raster split and
//! bootstrap resampling.
//!
//! All randomness comes from ChaCha20 with explicit stream numbers, so output
//! depends only on the seed, never on the thread count or platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::RateProfile;
use crate::scalar::Scalar;

/// Bins per RNG stream in [`simulate_bins`].
const CHUNK: usize = 256;

/// Bin width `h` (seconds) and the counts `Z_1 … Z_L`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinSeries<T> {
    h: T,
    counts: Vec<u64>,
}

impl<T: Scalar> BinSeries<T> {
    pub fn new(h: T, counts: Vec<u64>) -> Result<Self> {
        if !(h > T::zero()) || !h.is_finite() {
            return Err(invalid(format!("bin width h = {h} must be positive and finite")));
        }
        if counts.is_empty() {
            return Err(invalid("a bin series needs at least one bin"));
        }
        Ok(Self { h, counts })
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Number of bins `L`.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Observation length `T = hL`.
    pub fn duration(&self) -> T {
        self.h * T::from_count(self.counts.len())
    }

    pub fn max_count(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn mean(&self) -> f64 {
        self.counts.iter().map(|&c| c as f64).sum::<f64>() / self.counts.len() as f64
    }
}

/// One spike of neuron `neuron` (1-based) at `time` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RasterEvent {
    pub neuron: u32,
    pub time: f64,
}

/// Derives an independent 64-bit seed for replicate `index` (splitmix64).
pub fn substream_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn poisson(lambda: f64) -> Result<Option<Poisson<f64>>> {
    if lambda == 0.0 {
        return Ok(None);
    }
    Poisson::new(lambda)
        .map(Some)
        .map_err(|e| Error::Numeric(format!("Poisson({lambda}): {e}")))
}

/// Draws `L` bin counts `Z_l = Σ n Y_{n,l}` with independent
/// `Y_{n,l} ~ Poisson(hν_n)`.
pub fn simulate_bins<T: Scalar>(
    profile: &RateProfile<T>,
    h: T,
    l: usize,
    seed: u64,
) -> Result<BinSeries<T>> {
    if !(h > T::zero()) || !h.is_finite() {
        return Err(invalid("bin width h must be positive"));
    }
    if l == 0 {
        return Err(invalid("number of bins L must be ≥ 1"));
    }
    let mut jumps = Vec::new();
    for (i, nu) in profile.rates().iter().enumerate() {
        if let Some(d) = poisson((h * *nu).as_f64())? {
            jumps.push((i as u64 + 1, d));
        }
    }
    let mut counts = vec![0u64; l];
    counts
        .par_chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(chunk, out)| {
            let mut rng = stream_rng(seed, chunk as u64);
            for z in out.iter_mut() {
                *z = jumps
                    .iter()
                    .map(|(n, d)| n * d.sample(&mut rng) as u64)
                    .sum();
            }
        });
    BinSeries::new(h, counts)
}

/// Splits the compound process over `n_neurons` neurons: every jump of size
/// `n` fires a uniformly chosen `n`-subset simultaneously. Events are sorted
/// by time.
pub fn simulate_raster<T: Scalar>(
    profile: &RateProfile<T>,
    n_neurons: usize,
    t: T,
    seed: u64,
) -> Result<Vec<RasterEvent>> {
    let k = profile.support_max();
    if n_neurons < k.max(1) {
        return Err(invalid(format!(
            "{n_neurons} neurons cannot host jumps of size {k}"
        )));
    }
    if !(t > T::zero()) || !t.is_finite() {
        return Err(invalid("observation length T must be positive"));
    }
    let t = t.as_f64();
    let mut events = Vec::new();
    let mut perm: Vec<u32> = (1..=n_neurons as u32).collect();
    for (i, nu) in profile.rates().iter().enumerate() {
        let n = i + 1;
        let Some(d) = poisson(nu.as_f64() * t)? else {
            continue;
        };
        let mut rng = stream_rng(seed, n as u64);
        let jumps = d.sample(&mut rng) as usize;
        for _ in 0..jumps {
            let time = rng.random::<f64>() * t;
            // partial Fisher–Yates: the first n slots become a uniform n-subset
            for slot in 0..n {
                let j = rng.random_range(slot..n_neurons);
                perm.swap(slot, j);
            }
            events.extend(perm[..n].iter().map(|&neuron| RasterEvent { neuron, time }));
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.neuron.cmp(&b.neuron)));
    Ok(events)
}

/// Pools raster events into `l` bins of width `h`.
pub fn bin_events<T: Scalar>(events: &[RasterEvent], h: T, l: usize) -> Result<BinSeries<T>> {
    if l == 0 {
        return Err(invalid("number of bins L must be ≥ 1"));
    }
    let hf = h.as_f64();
    let mut counts = vec![0u64; l];
    for e in events {
        let idx = ((e.time / hf).floor().max(0.0) as usize).min(l - 1);
        counts[idx] += 1;
    }
    BinSeries::new(h, counts)
}

/// `L` draws with replacement from the observed counts.
pub fn bootstrap_resample<T: Scalar>(bins: &BinSeries<T>, seed: u64) -> BinSeries<T> {
    let mut rng = stream_rng(seed, 0);
    let l = bins.counts.len();
    let counts = (0..l).map(|_| bins.counts[rng.random_range(0..l)]).collect();
    BinSeries { h: bins.h, counts }
}
