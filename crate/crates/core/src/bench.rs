//! Kernel-only timing of the built-in workloads and the CSV / best-VVL
//! reporting used by the `bench` binary.

use std::fmt::Write as _;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::execution::Binding;
use crate::kernels::{
    scale, BinaryCollisionKernel, BinaryFluidState, D3Q19Model, KernelId, RunConfig, ScaleKernel,
};
use crate::lattice::{Field, FieldDescriptor, LatticeShape};
use crate::memory::{Backend, Counters, TargetDevice};

/// Scale factor used when timing the scale kernel. Repeated application keeps
/// values bounded and away from subnormals.
const BENCH_SCALE_FACTOR: f64 = -1.0;

pub const CSV_HEADER: &str = "kernel,backend,nx,ny,nz,vvl,workers,tpb,iters,elapsed_s,sites_per_s";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub kernel: KernelId,
    pub shape: LatticeShape,
    pub run: RunConfig,
    pub iterations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub kernel: KernelId,
    pub backend: Backend,
    pub shape: LatticeShape,
    pub vvl: usize,
    pub workers: usize,
    pub tpb: usize,
    pub iterations: usize,
    pub elapsed_s: f64,
    pub sites_per_s: f64,
    /// Device counters over the whole run, copies and warm-up included.
    pub counters: Counters,
}

impl BenchResult {
    /// Estimated kernel memory traffic in bytes per second.
    pub fn bytes_per_s(&self) -> f64 {
        self.sites_per_s
            * (self.kernel.doubles_moved_per_site() * std::mem::size_of::<f64>()) as f64
    }
}

/// Times `iterations` launches (each followed by a sync) after one untimed
/// warm-up launch. Host/target copies are outside the timed region.
pub fn benchmark_run(cfg: &BenchConfig) -> Result<BenchResult> {
    if cfg.iterations == 0 {
        return Err(Error::InvalidConfig("iterations must be >= 1".into()));
    }
    let mut dev = TargetDevice::with_backend(cfg.run.backend);
    let elapsed_s = match cfg.kernel {
        KernelId::Scale => {
            let desc = FieldDescriptor::new(cfg.shape, 3)?;
            let plan = cfg.run.plan(desc.padded_sites())?;
            let mut field = Field::new(desc);
            let seed = cfg.seed;
            field.fill(|c, s| 1.0 + ((seed as usize + 7 * c + s) % 97) as f64 / 97.0);
            let buf = dev.malloc(desc)?;
            dev.copy_to_target(buf, &field)?;
            dev.set_constant_double(scale::SCALE_FACTOR, BENCH_SCALE_FACTOR)?;
            let bindings = [Binding::read_write(buf)];
            time(&mut dev, cfg.iterations, |d| {
                d.launch(&ScaleKernel, &plan, &bindings).map(|_| ())
            })?
        }
        KernelId::BinaryCollision => {
            let model = D3Q19Model::default();
            let state = BinaryFluidState::random(cfg.shape, cfg.seed, &model)?;
            let desc = *state.f.descriptor();
            let plan = cfg.run.plan(desc.padded_sites())?;
            let f = dev.malloc(desc)?;
            let g = dev.malloc(desc)?;
            dev.copy_to_target(f, &state.f)?;
            dev.copy_to_target(g, &state.g)?;
            drop(state);
            model.upload(&mut dev)?;
            let bindings = [Binding::read_write(f), Binding::read_write(g)];
            time(&mut dev, cfg.iterations, |d| {
                d.launch(&BinaryCollisionKernel, &plan, &bindings)
                    .map(|_| ())
            })?
        }
    };
    let elapsed_s = elapsed_s.max(f64::MIN_POSITIVE);
    Ok(BenchResult {
        kernel: cfg.kernel,
        backend: cfg.run.backend,
        shape: cfg.shape,
        vvl: cfg.run.vvl,
        workers: cfg.run.workers,
        tpb: cfg.run.tpb,
        iterations: cfg.iterations,
        elapsed_s,
        sites_per_s: (cfg.shape.nsites() * cfg.iterations) as f64 / elapsed_s,
        counters: dev.counters(),
    })
}

fn time(
    dev: &mut TargetDevice,
    iterations: usize,
    mut launch: impl FnMut(&mut TargetDevice) -> Result<()>,
) -> Result<f64> {
    launch(dev)?;
    dev.sync()?;
    let start = Instant::now();
    for _ in 0..iterations {
        launch(dev)?;
        dev.sync()?;
    }
    Ok(start.elapsed().as_secs_f64())
}

/// CSV with [`CSV_HEADER`] and one row per result, in input order.
pub fn emit_csv(results: &[BenchResult]) -> String {
    let mut out = String::with_capacity(64 * (results.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{:.9e},{:.9e}",
            r.kernel,
            r.backend,
            r.shape.nx(),
            r.shape.ny(),
            r.shape.nz(),
            r.vvl,
            r.workers,
            r.tpb,
            r.iterations,
            r.elapsed_s,
            r.sites_per_s
        );
    }
    out
}

/// Parses [`emit_csv`] output. Counters are not part of the CSV and come back
/// zeroed.
pub fn parse_csv(text: &str) -> Result<Vec<BenchResult>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(Error::InvalidConfig(
            "missing or unexpected CSV header".into(),
        ));
    }
    let num = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::InvalidConfig(format!("bad integer `{s}` in CSV")))
    };
    let real = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::InvalidConfig(format!("bad number `{s}` in CSV")))
    };
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let cols: Vec<&str> = line.split(',').collect();
            let [kernel, backend, nx, ny, nz, vvl, workers, tpb, iters, elapsed, sps] = cols[..]
            else {
                return Err(Error::InvalidConfig(format!(
                    "expected 11 CSV columns: `{line}`"
                )));
            };
            Ok(BenchResult {
                kernel: kernel.parse()?,
                backend: backend.parse()?,
                shape: LatticeShape::new(num(nx)?, num(ny)?, num(nz)?)?,
                vvl: num(vvl)?,
                workers: num(workers)?,
                tpb: num(tpb)?,
                iterations: num(iters)?,
                elapsed_s: real(elapsed)?,
                sites_per_s: real(sps)?,
                counters: Counters::default(),
            })
        })
        .collect()
}

/// Best VVL of one `(kernel, backend, workers)` group.
#[derive(Debug, Clone, PartialEq)]
pub struct BestVvl {
    pub kernel: KernelId,
    pub backend: Backend,
    pub workers: usize,
    pub best_vvl: usize,
    pub speedup: f64,
    /// Whether the line should name the worker count (several in the sweep).
    pub show_workers: bool,
}

impl std::fmt::Display for BestVvl {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.kernel, self.backend)?;
        if self.show_workers {
            write!(f, " workers={}", self.workers)?;
        }
        write!(
            f,
            ": best VVL={}, {:.2}x over VVL=1",
            self.best_vvl, self.speedup
        )
    }
}

/// Highest-throughput VVL per `(kernel, backend, workers)` group and its
/// speedup over VVL=1. Ties go to the smaller VVL.
pub fn report_best(results: &[BenchResult]) -> Result<Vec<BestVvl>> {
    let mut groups: Vec<(KernelId, Backend, usize)> = Vec::new();
    for r in results {
        let key = (r.kernel, r.backend, r.workers);
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    groups
        .iter()
        .map(|&(kernel, backend, workers)| {
            let rows: Vec<&BenchResult> = results
                .iter()
                .filter(|r| (r.kernel, r.backend, r.workers) == (kernel, backend, workers))
                .collect();
            let baseline = rows.iter().find(|r| r.vvl == 1).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "no VVL=1 baseline for {kernel}/{backend} with {workers} workers"
                ))
            })?;
            let best = rows
                .iter()
                .copied()
                .reduce(|a, b| {
                    if b.sites_per_s > a.sites_per_s
                        || (b.sites_per_s == a.sites_per_s && b.vvl < a.vvl)
                    {
                        b
                    } else {
                        a
                    }
                })
                .expect("group is non-empty");
            let show_workers = groups
                .iter()
                .any(|&(k, b, w)| k == kernel && b == backend && w != workers);
            Ok(BestVvl {
                kernel,
                backend,
                workers,
                best_vvl: best.vvl,
                speedup: best.sites_per_s / baseline.sites_per_s,
                show_workers,
            })
        })
        .collect()
}
