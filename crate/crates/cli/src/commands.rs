//! Command-line surface and dispatch.

use std::io::Write as _;
use std::path::PathBuf;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};
use decompound::covariance::{cov_cross, cov_rates, cov_tails, plug_in_spec};
use decompound::estimate::estimate_rates_fourier;
use decompound::inference::{max_v_test, power_profile_with, screening_from_estimate, vm_test, wald_test_zero};
use decompound::model::asymptotics_report;
use decompound::simulate::{bin_events, simulate_bins, simulate_raster};
use decompound::{BinSeries, Correction, EstimationOptions, GridSize, KernelSpec, RateProfile, TailMode};

use crate::io::{self, num, Csv};
use crate::reproduce;

/// Exit status for a failed run.
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn validation(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            error: error.into(),
        }
    }
}

impl From<decompound::Error> for Failure {
    fn from(e: decompound::Error) -> Self {
        let code = if e.is_validation() { EXIT_VALIDATION } else { EXIT_NUMERIC };
        Self {
            code,
            error: e.into(),
        }
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

trait Usage<T> {
    fn usage(self) -> Outcome<T>;
}

impl<T> Usage<T> for anyhow::Result<T> {
    fn usage(self) -> Outcome<T> {
        self.map_err(Failure::validation)
    }
}

#[derive(Debug, Parser)]
#[command(name = "decompound", version, about = "Jump-rate estimation for compound Poisson bin counts")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorrectionArg {
    None,
    AutoShrink,
    AutoEdit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TailArg {
    Telescoping,
    Quadrature,
}

#[derive(Debug, Clone, Args)]
pub struct EstArgs {
    /// Highest jump size estimated.
    #[arg(long, default_value_t = 12)]
    pub nmax: usize,
    /// DFT grid: `auto` or a fixed size.
    #[arg(long, default_value = "auto")]
    pub grid: String,
    /// Winding-number correction.
    #[arg(long, value_enum, default_value_t = CorrectionArg::AutoEdit)]
    pub correction: CorrectionArg,
    /// Fixed shrinking parameter (adaptive ladder when absent).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Zero-editing parameter.
    #[arg(long, default_value_t = 0.075)]
    pub eps: f64,
    /// Tail estimator.
    #[arg(long, value_enum, default_value_t = TailArg::Telescoping)]
    pub tails: TailArg,
}

impl EstArgs {
    pub fn options(&self) -> Outcome<EstimationOptions> {
        let grid = match self.grid.as_str() {
            "auto" => GridSize::Auto,
            g => GridSize::Fixed(
                g.parse()
                    .map_err(|_| Failure::validation(anyhow!("--grid must be 'auto' or an integer, got '{g}'")))?,
            ),
        };
        let correction = match self.correction {
            CorrectionArg::None => Correction::None,
            CorrectionArg::AutoShrink => Correction::Shrink { delta: self.delta },
            CorrectionArg::AutoEdit => Correction::Edit { eps: self.eps },
        };
        let tail_mode = match self.tails {
            TailArg::Telescoping => TailMode::Telescoping,
            TailArg::Quadrature => TailMode::Quadrature,
        };
        Ok(EstimationOptions {
            nmax: self.nmax,
            grid,
            correction,
            tail_mode,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Bin file (JSON, or raw counts with --h).
    #[arg(short, long)]
    pub input: PathBuf,
    /// Bin width for raw count files.
    #[arg(long = "h")]
    pub raw_h: Option<f64>,
}

impl InputArgs {
    fn load(&self) -> Outcome<BinSeries> {
        io::read_bins(&self.input, self.raw_h).usage()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CovKindArg {
    Rates,
    Tails,
    Cross,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestArg {
    Wald,
    Vm,
    MaxV,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate bin counts (and optionally a neuron raster).
    Simulate {
        /// Rates ν_1, ν_2, … in events per second.
        #[arg(long)]
        rates: String,
        #[arg(long = "h")]
        h: f64,
        /// Number of bins.
        #[arg(long = "L")]
        l: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
        /// Split the process over this many neurons and bin the pooled spikes.
        #[arg(long)]
        neurons: Option<usize>,
        /// Raster CSV output (requires --neurons).
        #[arg(long, requires = "neurons")]
        raster: Option<PathBuf>,
    },
    /// Estimate rates and tails; writes the screening table.
    Estimate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        est: EstArgs,
        /// Emit the full estimate as JSON instead of CSV.
        #[arg(long)]
        json: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Asymptotic covariance matrix from a profile or plug-in estimates.
    Cov {
        /// True rates; otherwise estimated from --input.
        #[arg(long, conflicts_with = "input")]
        rates: Option<String>,
        #[arg(long = "h")]
        h: Option<f64>,
        /// Observation length in seconds (profile mode).
        #[arg(long = "T")]
        t: Option<f64>,
        #[arg(short, long)]
        input: Option<PathBuf>,
        /// Plug-in truncation order (default: --nmax).
        #[arg(long = "K")]
        k: Option<usize>,
        #[arg(long, value_enum, default_value_t = CovKindArg::Rates)]
        kind: CovKindArg,
        #[command(flatten)]
        est: EstArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Wald, V_m or bootstrap max-V test.
    Test {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum)]
        kind: TestArg,
        /// Orders set to zero under the Wald null, e.g. `2,3`.
        #[arg(long)]
        orders: Option<String>,
        /// Order for the V_m test.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 2)]
        m1: usize,
        #[arg(long)]
        m2: Option<usize>,
        /// Bootstrap replicates for max-V.
        #[arg(long, default_value_t = 200)]
        boot: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        est: EstArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Monte Carlo power profile β_n.
    Power {
        #[arg(long)]
        rates: String,
        #[arg(long = "h")]
        h: f64,
        #[arg(long = "L")]
        l: usize,
        #[arg(long, default_value_t = 50)]
        reps: usize,
        #[arg(long, default_value_t = 2.0)]
        threshold: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        est: EstArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Validity diagnostics for (ν_+, h, T).
    Diagnose {
        #[arg(long, conflicts_with_all = ["nu_plus", "input"])]
        rates: Option<String>,
        #[arg(long, conflicts_with = "input")]
        nu_plus: Option<f64>,
        #[arg(long = "h")]
        h: Option<f64>,
        #[arg(long = "T")]
        t: Option<f64>,
        /// Use ν̂_+ and (h, T) of a bin file.
        #[arg(short, long)]
        input: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Emit the data behind one of the simulation figures.
    Reproduce {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        figure: u8,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Replicates for the Monte Carlo figures.
        #[arg(long, default_value_t = 50)]
        reps: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn emit(output: &Option<PathBuf>, text: &str) -> Outcome {
    match output {
        Some(path) => io::write_text(path, text).usage(),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::validation(anyhow!("cannot write to stdout: {e}"))),
    }
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn profile(rates: &str) -> Outcome<RateProfile> {
    Ok(RateProfile::new(io::parse_list(rates).usage()?)?)
}

fn required<T>(value: Option<T>, flag: &str) -> Outcome<T> {
    value.ok_or_else(|| Failure::validation(anyhow!("{flag} is required here")))
}

pub fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Simulate {
            rates,
            h,
            l,
            seed,
            output,
            neurons,
            raster,
        } => {
            let p = profile(&rates)?;
            let bins = match neurons {
                Some(n) => {
                    let events = simulate_raster(&p, n, h * l as f64, seed)?;
                    if let Some(path) = &raster {
                        let mut csv = Csv::new("neuron,time");
                        for e in &events {
                            csv.row(&[e.neuron.to_string(), num(e.time)]);
                        }
                        io::write_text(path, &csv.finish()).usage()?;
                    }
                    bin_events(&events, h, l)?
                }
                None => simulate_bins(&p, h, l, seed)?,
            };
            io::write_bins(&output, &bins).usage()
        }
        Command::Estimate {
            input,
            est,
            json: as_json,
            output,
        } => {
            let bins = input.load()?;
            let opts = est.options()?;
            let r = estimate_rates_fourier(&bins, &opts)?;
            eprintln!(
                "nu_plus_hat={} winding_before={} correction={:?} grid={}",
                num(r.nu_plus_hat),
                r.winding_before,
                r.correction_applied,
                r.grid_size
            );
            if as_json {
                return emit(&output, &json(&r));
            }
            let mut csv = Csv::new("n,nu_hat,rho_hat,V,p");
            for row in screening_from_estimate(&r, opts.nmax)? {
                csv.row(&[row.n.to_string(), num(row.nu_hat), num(row.rho_hat), num(row.v), num(row.p)]);
            }
            emit(&output, &csv.finish())
        }
        Command::Cov {
            rates,
            h,
            t,
            input,
            k,
            kind,
            est,
            output,
        } => {
            let m = est.nmax;
            let (spec, t) = match (rates, input) {
                (Some(r), _) => {
                    let spec = KernelSpec::from_profile(&profile(&r)?, required(h, "--h")?)?;
                    (spec, required(t, "--T")?)
                }
                (None, Some(path)) => {
                    let bins = io::read_bins(&path, h).usage()?;
                    let r = estimate_rates_fourier(&bins, &est.options()?)?;
                    let k = k.unwrap_or(m);
                    let r = if k > m {
                        estimate_rates_fourier(&bins, &est.options()?.with_nmax(k))?
                    } else {
                        r
                    };
                    (plug_in_spec(&r.rates, bins.h(), k)?, bins.duration())
                }
                (None, None) => return Err(Failure::validation(anyhow!("give --rates or --input"))),
            };
            let mut csv = Csv::new("m,n,t_cov,ascov");
            let mut push = |i: usize, j: usize, v: f64| {
                csv.row(&[i.to_string(), j.to_string(), num(v), num(v / t)]);
            };
            match kind {
                CovKindArg::Rates | CovKindArg::Tails => {
                    let mat = if kind == CovKindArg::Rates {
                        cov_rates(&spec, t, m)?
                    } else {
                        cov_tails(&spec, t, m)?
                    };
                    for i in 1..=m {
                        for j in 1..=m {
                            push(i, j, mat.get(i, j));
                        }
                    }
                }
                CovKindArg::Cross => {
                    for i in 1..=m {
                        for j in 1..=m {
                            push(i, j, cov_cross(&spec, t, i, j)?);
                        }
                    }
                }
            }
            emit(&output, &csv.finish())
        }
        Command::Test {
            input,
            kind,
            orders,
            m,
            m1,
            m2,
            boot,
            seed,
            est,
            output,
        } => {
            let bins = input.load()?;
            let opts = est.options()?;
            let result = match kind {
                TestArg::Wald => {
                    let orders: Vec<usize> = io::parse_list(&required(orders, "--orders")?).usage()?;
                    let top = orders.iter().copied().max().unwrap_or(1);
                    let r = estimate_rates_fourier(&bins, &opts.with_nmax(opts.nmax.max(top)))?;
                    wald_test_zero(&r, &orders)?
                }
                TestArg::Vm => vm_test(&bins, required(m, "--m")?, &opts)?,
                TestArg::MaxV => max_v_test(&bins, m1, m2.unwrap_or(opts.nmax), boot, seed, &opts)?,
            };
            emit(&output, &json(&result))
        }
        Command::Power {
            rates,
            h,
            l,
            reps,
            threshold,
            seed,
            est,
            output,
        } => {
            let p = profile(&rates)?;
            let pp = power_profile_with(&p, h, l, reps, threshold, seed, &est.options()?)?;
            let mut csv = Csv::new("n,beta");
            for (i, b) in pp.beta.iter().enumerate() {
                csv.row(&[(i + 1).to_string(), num(*b)]);
            }
            emit(&output, &csv.finish())
        }
        Command::Diagnose {
            rates,
            nu_plus,
            h,
            t,
            input,
            output,
        } => {
            let (nu_plus, h, t) = match (rates, nu_plus, input) {
                (Some(r), _, _) => (profile(&r)?.nu_plus(), required(h, "--h")?, required(t, "--T")?),
                (None, Some(v), _) => (v, required(h, "--h")?, required(t, "--T")?),
                (None, None, Some(path)) => {
                    let bins = io::read_bins(&path, h).usage()?;
                    let r = estimate_rates_fourier(&bins, &EstimationOptions::default().with_nmax(1))?;
                    (r.nu_plus_hat, bins.h(), bins.duration())
                }
                _ => return Err(Failure::validation(anyhow!("give --rates, --nu-plus or --input"))),
            };
            emit(&output, &json(&asymptotics_report(nu_plus, h, t)?))
        }
        Command::Reproduce {
            figure,
            seed,
            reps,
            output,
        } => {
            let written = match figure {
                1 => reproduce::figure1(seed, &output)?,
                2 => reproduce::figure2(seed, reps, &output)?,
                _ => reproduce::figure3(seed, reps, &output)?,
            };
            for path in written {
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}
