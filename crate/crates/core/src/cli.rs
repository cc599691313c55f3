//! The `bench` command line: verification suites and VVL x workers x backend
//! sweeps.
//!
//! Exit codes: 0 success, 1 verification or runtime failure, 2 configuration
//! error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Parser;

use crate::bench::{benchmark_run, emit_csv, report_best, BenchConfig, BenchResult};
use crate::error::{Error, Result};
use crate::kernels::{BinaryFluidState, D3Q19Model, KernelId, RunConfig};
use crate::lattice::{pad_sites, LatticeShape, DEFAULT_PAD_MULTIPLE};
use crate::memory::Backend;
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "bench",
    version,
    about = "Lattice kernel verification and VVL tuning sweeps"
)]
struct Args {
    /// Kernel to run: scale | binary-collision
    #[arg(long, default_value = "binary-collision")]
    kernel: KernelId,

    /// Lattice shape, NXxNYxNZ
    #[arg(long, default_value = "32x32x32")]
    shape: LatticeShape,

    /// Comma-separated virtual vector lengths
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    vvl: Vec<usize>,

    /// Comma-separated worker counts [default: available parallelism]
    #[arg(long, value_delimiter = ',')]
    workers: Vec<usize>,

    /// Comma-separated backends: reference | threaded | emulated
    #[arg(long, value_delimiter = ',', default_value = "threaded")]
    backend: Vec<Backend>,

    /// Chunks per worker group on the emulated backend
    #[arg(long, default_value_t = crate::execution::DEFAULT_TPB)]
    tpb: usize,

    /// Timed iterations per configuration
    #[arg(long, default_value_t = 10)]
    iters: usize,

    /// Write CSV instead of a table, to PATH or stdout
    #[arg(long, value_name = "PATH", num_args = 0..=1, default_missing_value = "-")]
    csv: Option<String>,

    /// Run the equivalence and conservation suites before timing
    #[arg(long)]
    verify: bool,

    /// Print device transfer and launch counters per configuration
    #[arg(long)]
    stats: bool,

    /// Seed for random initial states
    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// With --verify, write reference-run output fields as binary dumps here
    #[arg(long, value_name = "DIR")]
    dump: Option<PathBuf>,
}

/// A validated sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub kernel: KernelId,
    pub shape: LatticeShape,
    pub vvls: Vec<usize>,
    pub workers: Vec<usize>,
    pub backends: Vec<Backend>,
    pub tpb: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vvls.is_empty() || self.workers.is_empty() || self.backends.is_empty() {
            return Err(Error::InvalidConfig(
                "vvl, workers and backend lists must be non-empty".into(),
            ));
        }
        let padded = pad_sites(self.shape.nsites(), DEFAULT_PAD_MULTIPLE)?;
        if let Some(v) = self.vvls.iter().find(|v| **v == 0 || padded % **v != 0) {
            return Err(Error::InvalidConfig(format!(
                "VVL must divide padded extent (vvl {v}, padded extent {padded})"
            )));
        }
        if self.workers.contains(&0) {
            return Err(Error::InvalidConfig("workers must be >= 1".into()));
        }
        if self.tpb == 0 || self.iterations == 0 {
            return Err(Error::InvalidConfig("tpb and iters must be >= 1".into()));
        }
        Ok(())
    }

    /// Every configuration in sweep order: backend, then workers, then VVL.
    pub fn configs(&self) -> Vec<BenchConfig> {
        let mut out = Vec::new();
        for &backend in &self.backends {
            for &workers in &self.workers {
                for &vvl in &self.vvls {
                    out.push(BenchConfig {
                        kernel: self.kernel,
                        shape: self.shape,
                        run: RunConfig {
                            tpb: self.tpb,
                            ..RunConfig::new(backend, vvl, workers)
                        },
                        iterations: self.iterations,
                        seed: self.seed,
                    });
                }
            }
        }
        out
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::Plan(_) | Error::Shape(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

/// Runs the CLI with `argv` (program name first), writing to `out` and `err`.
pub fn cli_main<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_CONFIG
                }
            };
        }
    };
    match run(args, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn run(args: Args, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let sweep = SweepConfig {
        kernel: args.kernel,
        shape: args.shape,
        vvls: args.vvl,
        workers: if args.workers.is_empty() {
            vec![default_workers()]
        } else {
            args.workers
        },
        backends: args.backend,
        tpb: args.tpb,
        iterations: args.iters,
        seed: args.seed,
    };
    sweep.validate()?;

    // Human-readable text goes to stderr when stdout carries CSV.
    let (text, csv_out): (&mut dyn Write, Option<&mut dyn Write>) =
        if args.csv.as_deref() == Some("-") {
            (err, Some(out))
        } else {
            (out, None)
        };

    let mut code = EXIT_OK;
    if args.verify {
        let outcomes = run_verification(&sweep, args.dump.as_ref())?;
        for o in &outcomes {
            writeln!(text, "{o}")?;
        }
        if outcomes.iter().any(|o| !o.passed) {
            code = EXIT_FAILURE;
        }
    }

    let mut results = Vec::new();
    for cfg in sweep.configs() {
        let r = benchmark_run(&cfg)?;
        if args.stats {
            let c = r.counters;
            writeln!(
                text,
                "stats {}/{} vvl={} workers={}: launches={} chunks={} bytes_to_target={} bytes_from_target={} elements_packed={}",
                r.kernel, r.backend, r.vvl, r.workers, c.launches, c.chunks, c.bytes_to_target,
                c.bytes_from_target, c.elements_packed
            )?;
        }
        results.push(r);
    }

    match (csv_out, args.csv.as_deref()) {
        (Some(out), _) => out.write_all(emit_csv(&results).as_bytes())?,
        (None, Some(path)) => {
            let mut f = BufWriter::new(File::create(path)?);
            f.write_all(emit_csv(&results).as_bytes())?;
            f.flush()?;
        }
        (None, None) => write_table(text, &results)?,
    }

    if sweep.vvls.contains(&1) {
        for line in report_best(&results)? {
            writeln!(text, "{line}")?;
        }
    }
    Ok(code)
}

fn run_verification(
    sweep: &SweepConfig,
    dump: Option<&PathBuf>,
) -> Result<Vec<verify::CheckOutcome>> {
    let mut vvls = sweep.vvls.clone();
    if !vvls.contains(&1) {
        vvls.insert(0, 1);
    }
    let mut workers = sweep.workers.clone();
    if !workers.contains(&1) {
        workers.insert(0, 1);
    }
    let mut outcomes = vec![verify::equivalence_suite(
        sweep.kernel,
        sweep.shape,
        sweep.seed,
        &vvls,
        &workers,
        sweep.tpb,
    )?];
    let widest = *vvls.iter().max().expect("non-empty");
    let threaded = RunConfig {
        tpb: sweep.tpb,
        ..RunConfig::new(
            Backend::Threaded,
            widest,
            *workers.iter().max().expect("non-empty"),
        )
    };
    outcomes.push(match sweep.kernel {
        KernelId::BinaryCollision => {
            verify::conservation_check(sweep.shape, sweep.seed, &threaded)?
        }
        KernelId::Scale => verify::scale_oracle_check(sweep.shape, sweep.seed, &threaded)?,
    });

    if let Some(dir) = dump {
        std::fs::create_dir_all(dir)?;
        let reference = RunConfig::new(Backend::Reference, 1, 1);
        match verify::run_kernel(sweep.kernel, sweep.shape, sweep.seed, &reference, 1)? {
            verify::KernelOutput::Scale(f) => {
                f.write_dump(BufWriter::new(File::create(dir.join("field.bin"))?))?
            }
            verify::KernelOutput::Collision(st) => {
                st.f.write_dump(BufWriter::new(File::create(dir.join("f.bin"))?))?;
                st.g.write_dump(BufWriter::new(File::create(dir.join("g.bin"))?))?;
                write_observables(&st, dir)?;
            }
        }
    }
    Ok(outcomes)
}

fn write_observables(st: &BinaryFluidState, dir: &std::path::Path) -> Result<()> {
    let obs = st.observables(&D3Q19Model::default())?;
    obs.write_dump(BufWriter::new(File::create(dir.join("observables.bin"))?))
}

fn write_table(w: &mut dyn Write, results: &[BenchResult]) -> Result<()> {
    writeln!(
        w,
        "{:<17} {:<10} {:>12} {:>4} {:>7} {:>5} {:>6} {:>12} {:>13} {:>8}",
        "kernel",
        "backend",
        "shape",
        "vvl",
        "workers",
        "tpb",
        "iters",
        "elapsed_s",
        "sites/s",
        "GB/s"
    )?;
    for r in results {
        writeln!(
            w,
            "{:<17} {:<10} {:>12} {:>4} {:>7} {:>5} {:>6} {:>12.6} {:>13.6e} {:>8.3}",
            r.kernel.name(),
            r.backend.name(),
            r.shape.to_string(),
            r.vvl,
            r.workers,
            r.tpb,
            r.iterations,
            r.elapsed_s,
            r.sites_per_s,
            r.bytes_per_s() / 1e9
        )?;
    }
    Ok(())
}
