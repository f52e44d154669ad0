//! Data behind the simulation figures, as CSV files.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use decompound::ecf::{self, continuous_log, ecf_eval, edit_zeros, histogram, shrink};
use decompound::estimate::{estimate_from_poly, estimate_rates_fourier};
use decompound::inference::screening_from_estimate;
use decompound::simulate::{bin_events, simulate_bins, simulate_raster, substream_seed};
use decompound::{CoeffPoly, Correction, EstimationOptions, RateProfile};
use rayon::prelude::*;

use crate::commands::Failure;
use crate::io::{num, write_text, Csv};

type Outcome<T> = std::result::Result<T, Failure>;

const NMAX: usize = 12;
const SHOWN_SECONDS: f64 = 2.0;

struct Example {
    id: u32,
    rates: Vec<f64>,
    neurons: usize,
    t: f64,
    h: f64,
}

impl Example {
    fn bins(&self) -> usize {
        (self.t / self.h).round() as usize
    }

    fn profile(&self) -> RateProfile {
        RateProfile::new(self.rates.clone()).expect("valid example rates")
    }
}

fn examples() -> [Example; 2] {
    let mut second = vec![0.0; 7];
    second[0] = 150.0;
    second[6] = 7.0;
    [
        Example {
            id: 1,
            rates: vec![40.0, 10.0, 4.0, 3.0, 1.0],
            neurons: 30,
            t: 30.0,
            h: 0.02,
        },
        Example {
            id: 2,
            rates: second,
            neurons: 20,
            t: 60.0,
            h: 0.005,
        },
    ]
}

fn save(dir: &Path, name: &str, csv: Csv, written: &mut Vec<PathBuf>) -> Outcome<()> {
    let path = dir.join(name);
    write_text(&path, &csv.finish()).map_err(Failure::validation)?;
    written.push(path);
    Ok(())
}

/// Rasters and bin counts for the first seconds, plus full-length count
/// histograms, for both examples.
pub fn figure1(seed: u64, dir: &Path) -> Outcome<Vec<PathBuf>> {
    let mut written = Vec::new();
    for ex in examples() {
        let events = simulate_raster(&ex.profile(), ex.neurons, ex.t, substream_seed(seed, ex.id as u64))?;
        let bins = bin_events(&events, ex.h, ex.bins())?;

        let mut raster = Csv::new("neuron,time");
        for e in events.iter().take_while(|e| e.time < SHOWN_SECONDS) {
            raster.row(&[e.neuron.to_string(), num(e.time)]);
        }
        save(dir, &format!("fig1_example{}_raster.csv", ex.id), raster, &mut written)?;

        let mut counts = Csv::new("bin,time,count");
        let shown = (SHOWN_SECONDS / ex.h).round() as usize;
        for (l, c) in bins.counts().iter().enumerate().take(shown) {
            counts.row(&[l.to_string(), num(l as f64 * ex.h), c.to_string()]);
        }
        save(dir, &format!("fig1_example{}_bins.csv", ex.id), counts, &mut written)?;

        let hist = histogram(&bins);
        let mut table = Csv::new("k,count,frequency");
        for (k, f) in hist.coeffs().iter().enumerate() {
            let count = (f * bins.len() as f64).round() as u64;
            table.row(&[k.to_string(), count.to_string(), num(*f)]);
        }
        save(dir, &format!("fig1_example{}_histogram.csv", ex.id), table, &mut written)?;
    }
    Ok(written)
}

/// Estimated rate profiles of every replicate and the power profiles
/// `β_n = #{V_n > 2}/reps`, for both examples.
pub fn figure2(seed: u64, reps: usize, dir: &Path) -> Outcome<Vec<PathBuf>> {
    if reps == 0 {
        return Err(Failure::validation(anyhow::anyhow!("--reps must be ≥ 1")));
    }
    let mut written = Vec::new();
    let opts = EstimationOptions::default().with_nmax(NMAX);
    for ex in examples() {
        let p = ex.profile();
        let base = substream_seed(seed, 100 + ex.id as u64);
        let rows = (0..reps)
            .into_par_iter()
            .map(|r| -> Outcome<(Vec<f64>, Vec<f64>)> {
                let bins = simulate_bins(&p, ex.h, ex.bins(), substream_seed(base, r as u64))?;
                let est = estimate_rates_fourier(&bins, &opts)?;
                let screen = screening_from_estimate(&est, NMAX)?;
                Ok((est.rates.rates().to_vec(), screen.iter().map(|s| s.v).collect()))
            })
            .collect::<Outcome<Vec<_>>>()?;

        let mut rates = Csv::new("replicate,n,nu_true,nu_hat");
        for (r, (nu_hat, _)) in rows.iter().enumerate() {
            for n in 1..=NMAX {
                rates.row(&[r.to_string(), n.to_string(), num(p.rate(n)), num(nu_hat[n - 1])]);
            }
        }
        save(dir, &format!("fig2_example{}_rates.csv", ex.id), rates, &mut written)?;

        let mut power = Csv::new("n,beta");
        for n in 1..=NMAX {
            let hits = rows.iter().filter(|(_, v)| v[n - 1] > 2.0).count();
            power.row(&[n.to_string(), num(hits as f64 / reps as f64)]);
        }
        save(dir, &format!("fig2_example{}_power.csv", ex.id), power, &mut written)?;
    }
    Ok(written)
}

struct Variant {
    method: &'static str,
    winding: i64,
    rates: Vec<f64>,
    /// `(θ, Im log γ̂(θ))` sorted by θ in (−π, π].
    phase: Vec<(f64, f64)>,
}

fn phase_curve(poly: &CoeffPoly) -> Outcome<Vec<(f64, f64)>> {
    let log = continuous_log(&ecf_eval(poly, ecf::default_grid(poly.degree()))?)?;
    let g = log.grid_size();
    let mut pts: Vec<(f64, f64)> = log
        .log_values()
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let theta = 2.0 * PI * j as f64 / g as f64;
            (if theta > PI { theta - 2.0 * PI } else { theta }, v.im)
        })
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pts)
}

/// The high-rate scenario: raw, shrunk (δ = 0.02) and edited (ε = 0.075)
/// rate profiles and log-ECF phase curves for every replicate.
pub fn figure3(seed: u64, reps: usize, dir: &Path) -> Outcome<Vec<PathBuf>> {
    if reps == 0 {
        return Err(Failure::validation(anyhow::anyhow!("--reps must be ≥ 1")));
    }
    let p = RateProfile::new(vec![17.0, 11.0, 14.0, 6.0])?;
    let (h, l) = (0.05, 1200);
    let raw_opts = EstimationOptions::default()
        .with_nmax(NMAX)
        .with_correction(Correction::None);
    let base = substream_seed(seed, 300);
    let replicates = (0..reps)
        .into_par_iter()
        .map(|r| -> Outcome<(i64, Vec<Variant>)> {
            let bins = simulate_bins(&p, h, l, substream_seed(base, r as u64))?;
            let poly = histogram(&bins);
            let candidates = [
                ("raw", poly.clone()),
                ("shrink", shrink(&poly, 0.02)?),
                ("edit", edit_zeros(&poly, 0.075)?),
            ];
            let mut out = Vec::with_capacity(3);
            for (method, q) in candidates {
                let est = estimate_from_poly(&q, h, l, &raw_opts)?;
                out.push(Variant {
                    method,
                    winding: est.winding_before,
                    rates: est.rates.rates().to_vec(),
                    phase: phase_curve(&q)?,
                });
            }
            Ok((out[0].winding, out))
        })
        .collect::<Outcome<Vec<_>>>()?;

    let mut written = Vec::new();
    let mut rates = Csv::new("method,replicate,winding_raw,winding,n,nu_true,nu_hat");
    let mut phases = Csv::new("method,replicate,winding_raw,theta,im_log");
    for (r, (raw_w, variants)) in replicates.iter().enumerate() {
        for v in variants {
            for n in 1..=NMAX {
                rates.row(&[
                    v.method.to_string(),
                    r.to_string(),
                    raw_w.to_string(),
                    v.winding.to_string(),
                    n.to_string(),
                    num(p.rate(n)),
                    num(v.rates[n - 1]),
                ]);
            }
            for (theta, im) in &v.phase {
                phases.row(&[v.method.to_string(), r.to_string(), raw_w.to_string(), num(*theta), num(*im)]);
            }
        }
    }
    let g = 256;
    for j in 0..=g {
        let theta = -PI + 2.0 * PI * j as f64 / g as f64;
        let im: f64 = (1..=4).map(|n| h * p.rate(n) * (n as f64 * theta).sin()).sum();
        phases.row(&["true".into(), "-1".into(), "0".into(), num(theta), num(im)]);
    }
    save(dir, "fig3_rates.csv", rates, &mut written)?;
    save(dir, "fig3_logcf.csv", phases, &mut written)?;

    let mut summary = Csv::new("method,replicates,nonzero_winding");
    for (i, method) in ["raw", "shrink", "edit"].iter().enumerate() {
        let wound = replicates.iter().filter(|(_, v)| v[i].winding != 0).count();
        summary.row(&[method.to_string(), reps.to_string(), wound.to_string()]);
    }
    save(dir, "fig3_summary.csv", summary, &mut written)?;
    Ok(written)
}
