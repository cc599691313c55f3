//! Two-level execution: the site loop is strip-mined into chunks of `vvl`
//! consecutive sites. Chunks are distributed over workers (thread-level
//! parallelism); inside a chunk a kernel runs a fixed-length lane loop that
//! the compiler can map onto vector instructions (instruction-level
//! parallelism).
//!
//! A kernel sees one chunk at a time through a [`KernelContext`]. It may read
//! and write only its own chunk of every buffer bound for writing, which makes
//! chunks independent: any schedule produces the same bits as running the
//! chunks in index order.

use std::collections::hash_map::Entry;
use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::FieldDescriptor;
use crate::memory::{Backend, ConstantBlock, TargetBuffer, TargetDevice};

/// Chunks per worker group on the emulated backend when not set explicitly.
pub const DEFAULT_TPB: usize = 128;

/// Lane widths with a compile-time trip count.
pub const LANE_WIDTHS: [usize; 5] = [16, 8, 4, 2, 1];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaunchPlan {
    extent: usize,
    vvl: usize,
    workers: usize,
    tpb: usize,
}

impl LaunchPlan {
    pub fn new(extent: usize, vvl: usize) -> Result<Self> {
        if vvl == 0 {
            return Err(Error::Plan("VVL must be >= 1".into()));
        }
        if extent == 0 || !extent.is_multiple_of(vvl) {
            return Err(Error::Plan(format!(
                "VVL must divide padded extent (vvl {vvl}, extent {extent})"
            )));
        }
        Ok(Self {
            extent,
            vvl,
            workers: 1,
            tpb: DEFAULT_TPB,
        })
    }

    /// Plan covering every site of `desc`, padding included.
    pub fn for_descriptor(desc: &FieldDescriptor, vvl: usize) -> Result<Self> {
        Self::new(desc.padded_sites(), vvl)
    }

    pub fn with_workers(mut self, workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::Plan("workers must be >= 1".into()));
        }
        self.workers = workers;
        Ok(self)
    }

    pub fn with_tpb(mut self, tpb: usize) -> Result<Self> {
        if tpb == 0 {
            return Err(Error::Plan("tpb must be >= 1".into()));
        }
        self.tpb = tpb;
        Ok(self)
    }

    pub fn extent(&self) -> usize {
        self.extent
    }

    pub fn vvl(&self) -> usize {
        self.vvl
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn tpb(&self) -> usize {
        self.tpb
    }

    pub fn chunk_count(&self) -> usize {
        self.extent / self.vvl
    }

    /// Worker groups on the emulated backend: `ceil(chunks / tpb)`.
    pub fn group_count(&self) -> usize {
        self.chunk_count().div_ceil(self.tpb)
    }

    pub fn chunk_sites(&self, chunk: usize) -> Range<usize> {
        chunk * self.vvl..(chunk + 1) * self.vvl
    }
}

/// Chunk indices per worker, in execution order.
pub fn backend_schedule(plan: &LaunchPlan, backend: Backend) -> Vec<Vec<usize>> {
    let n = plan.chunk_count();
    match backend {
        Backend::Reference => vec![(0..n).collect()],
        Backend::Threaded => {
            let w = plan.workers;
            let (base, rem) = (n / w, n % w);
            let mut start = 0;
            (0..w)
                .map(|i| {
                    let len = base + usize::from(i < rem);
                    let r = (start..start + len).collect();
                    start += len;
                    r
                })
                .collect()
        }
        Backend::Emulated => {
            let mut out = vec![Vec::new(); plan.workers];
            for g in 0..plan.group_count() {
                let lo = g * plan.tpb;
                let hi = (lo + plan.tpb).min(n);
                out[g % plan.workers].extend(lo..hi);
            }
            out
        }
    }
}

/// Widest compile-time lane width dividing `vvl`. A chunk of `vvl` lanes is
/// processed as `vvl / width` consecutive blocks of `width` lanes.
pub fn lane_width(vvl: usize) -> usize {
    LANE_WIDTHS
        .into_iter()
        .find(|&w| vvl.is_multiple_of(w))
        .unwrap_or(1)
}

/// The lane loop: runs `body(v)` for `v` in `0..vvl`, with a constant trip
/// count for the common widths.
#[inline(always)]
pub fn for_each_lane(vvl: usize, mut body: impl FnMut(usize)) {
    macro_rules! fixed {
        ($n:literal) => {
            for v in 0..$n {
                body(v)
            }
        };
    }
    match vvl {
        1 => fixed!(1),
        2 => fixed!(2),
        4 => fixed!(4),
        8 => fixed!(8),
        16 => fixed!(16),
        _ => {
            for v in 0..vvl {
                body(v)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Read,
    ReadWrite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Binding {
    pub buffer: TargetBuffer,
    pub access: Access,
}

impl Binding {
    pub fn read(buffer: TargetBuffer) -> Self {
        Self {
            buffer,
            access: Access::Read,
        }
    }

    pub fn read_write(buffer: TargetBuffer) -> Self {
        Self {
            buffer,
            access: Access::ReadWrite,
        }
    }
}

/// Descriptor and access mode of a bound buffer, as seen by [`Kernel::bind`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundBuffer {
    pub desc: FieldDescriptor,
    pub access: Access,
}

/// A data-parallel operation over lattice chunks.
pub trait Kernel: Sync {
    /// Per-launch data resolved from the constant store.
    type Params: Sync;

    fn name(&self) -> &str;

    /// Validates the bindings and resolves constants once per launch.
    fn bind(&self, constants: &ConstantBlock, buffers: &[BoundBuffer]) -> Result<Self::Params>;

    /// Processes the chunk starting at `ctx.base_index()`.
    fn run_chunk(&self, params: &Self::Params, ctx: &mut KernelContext<'_>) -> Result<()>;
}

#[derive(Debug, Clone, Copy)]
struct RawView {
    ptr: *mut f64,
    ncomp: usize,
    padded: usize,
    nsites: usize,
    writable: bool,
}

// SAFETY: views are only dereferenced through KernelContext, which confines
// writes (and reads of written buffers) to the chunk owned by the context.
// Chunks are disjoint, and the device is exclusively borrowed for the launch.
unsafe impl Send for RawView {}
unsafe impl Sync for RawView {}

/// A kernel's window onto one chunk.
pub struct KernelContext<'a> {
    base: usize,
    vvl: usize,
    views: &'a [RawView],
}

impl<'a> KernelContext<'a> {
    /// First site of the chunk.
    pub fn base_index(&self) -> usize {
        self.base
    }

    pub fn vvl(&self) -> usize {
        self.vvl
    }

    pub fn sites(&self) -> Range<usize> {
        self.base..self.base + self.vvl
    }

    /// Number of leading lanes of this chunk that are real (non-padding)
    /// sites of buffer `arg`.
    pub fn real_lanes(&self, arg: usize) -> Result<usize> {
        let v = self.view(arg)?;
        Ok(v.nsites.saturating_sub(self.base).min(self.vvl))
    }

    /// Component `c` of buffer `arg` over this chunk.
    pub fn read(&self, arg: usize, c: usize) -> Result<&[f64]> {
        let v = self.view(arg)?;
        let off = self.offset(v, c, self.base, self.vvl)?;
        // SAFETY: in-bounds chunk of a live buffer; no other context writes it.
        Ok(unsafe { std::slice::from_raw_parts(v.ptr.add(off), self.vvl) })
    }

    /// Mutable component `c` of writable buffer `arg` over this chunk.
    pub fn write(&mut self, arg: usize, c: usize) -> Result<&mut [f64]> {
        let v = self.writable_view(arg)?;
        let off = self.offset(v, c, self.base, self.vvl)?;
        // SAFETY: as in `read`, and `&mut self` rules out aliasing slices from
        // this context.
        Ok(unsafe { std::slice::from_raw_parts_mut(v.ptr.add(off), self.vvl) })
    }

    /// Whole component `c` of a read-only buffer, e.g. for stencil access.
    pub fn read_all(&self, arg: usize, c: usize) -> Result<&[f64]> {
        let v = self.view(arg)?;
        if v.writable {
            return Err(Error::ContractViolation(format!(
                "read_all on buffer {arg}, which other chunks are writing"
            )));
        }
        let off = self.offset(v, c, 0, v.padded)?;
        // SAFETY: read-only buffer, nobody writes it during the launch.
        Ok(unsafe { std::slice::from_raw_parts(v.ptr.add(off), v.padded) })
    }

    /// Single element at an absolute site.
    pub fn get(&self, arg: usize, c: usize, site: usize) -> Result<f64> {
        let v = self.view(arg)?;
        if v.writable && !self.sites().contains(&site) {
            return Err(self.outside(arg, site, "read"));
        }
        let off = self.offset(v, c, site, 1)?;
        // SAFETY: bounds checked above.
        Ok(unsafe { *v.ptr.add(off) })
    }

    /// Stores one element at an absolute site, which must lie in this chunk.
    pub fn set(&mut self, arg: usize, c: usize, site: usize, value: f64) -> Result<()> {
        let v = self.writable_view(arg)?;
        if !self.sites().contains(&site) {
            return Err(self.outside(arg, site, "write"));
        }
        let off = self.offset(v, c, site, 1)?;
        // SAFETY: site is inside this context's chunk.
        unsafe { *v.ptr.add(off) = value };
        Ok(())
    }

    fn view(&self, arg: usize) -> Result<RawView> {
        self.views
            .get(arg)
            .copied()
            .ok_or_else(|| Error::ContractViolation(format!("no buffer bound at argument {arg}")))
    }

    fn writable_view(&self, arg: usize) -> Result<RawView> {
        let v = self.view(arg)?;
        if !v.writable {
            return Err(Error::ContractViolation(format!(
                "buffer {arg} is bound read-only"
            )));
        }
        Ok(v)
    }

    /// Offset of `(c, site)`, checking that `len` sites starting there exist.
    fn offset(&self, v: RawView, c: usize, site: usize, len: usize) -> Result<usize> {
        if c >= v.ncomp {
            return Err(Error::Bounds(format!("component {c} >= ncomp {}", v.ncomp)));
        }
        if site + len > v.padded {
            return Err(Error::Bounds(format!(
                "sites {site}..{} beyond buffer",
                site + len
            )));
        }
        Ok(c * v.padded + site)
    }

    fn outside(&self, arg: usize, site: usize, what: &str) -> Error {
        Error::ContractViolation(format!(
            "{what} of site {site} in buffer {arg} outside chunk [{}, {})",
            self.base,
            self.base + self.vvl
        ))
    }
}

/// Identifies a launch on its device.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaunchHandle {
    pub id: u64,
}

impl TargetDevice {
    /// Runs `kernel` once per chunk of `plan` over the bound buffers.
    ///
    /// On the reference backend the launch completes before returning and
    /// kernel errors are returned directly. On the other backends the launch
    /// stays in flight until [`TargetDevice::sync`], which reports any kernel
    /// error; copies, constant updates and frees are rejected meanwhile.
    pub fn launch<K: Kernel>(
        &mut self,
        kernel: &K,
        plan: &LaunchPlan,
        bindings: &[Binding],
    ) -> Result<LaunchHandle> {
        let mut bound = Vec::with_capacity(bindings.len());
        for (i, b) in bindings.iter().enumerate() {
            if bindings[..i].iter().any(|o| o.buffer == b.buffer) {
                return Err(Error::Plan(format!("buffer bound twice (argument {i})")));
            }
            let desc = self.descriptor(b.buffer)?;
            if plan.extent > desc.padded_sites() {
                return Err(Error::Plan(format!(
                    "extent {} exceeds padded sites {} of argument {i}",
                    plan.extent,
                    desc.padded_sites()
                )));
            }
            bound.push(BoundBuffer {
                desc,
                access: b.access,
            });
        }
        let params = kernel.bind(&self.constants, &bound)?;

        let bufs: Vec<TargetBuffer> = bindings.iter().map(|b| b.buffer).collect();
        let ptrs = self.raw_pointers(&bufs)?;
        let views: Vec<RawView> = ptrs
            .into_iter()
            .zip(&bound)
            .map(|(ptr, b)| RawView {
                ptr,
                ncomp: b.desc.ncomp(),
                padded: b.desc.padded_sites(),
                nsites: b.desc.nsites(),
                writable: b.access == Access::ReadWrite,
            })
            .collect();

        let backend = self.config.backend;
        let schedule = backend_schedule(plan, backend);
        let run_list = |chunks: &Vec<usize>| -> Option<(usize, Error)> {
            for &chunk in chunks {
                let mut ctx = KernelContext {
                    base: chunk * plan.vvl,
                    vvl: plan.vvl,
                    views: &views,
                };
                if let Err(e) = kernel.run_chunk(&params, &mut ctx) {
                    return Some((chunk, e));
                }
            }
            None
        };

        let failure = if backend == Backend::Reference || plan.workers == 1 {
            schedule.iter().filter_map(run_list).min_by_key(|(c, _)| *c)
        } else {
            let pool = self.pool(plan.workers)?;
            pool.install(|| {
                schedule
                    .par_iter()
                    .with_max_len(1)
                    .filter_map(run_list)
                    .min_by_key(|(c, _)| *c)
            })
        };

        self.counters.launches += 1;
        self.counters.chunks += plan.chunk_count() as u64;
        let handle = LaunchHandle {
            id: self.counters.launches,
        };
        let failure = failure.map(|(_, e)| e);
        if backend == Backend::Reference {
            return failure.map_or(Ok(handle), Err);
        }
        self.in_flight += 1;
        if self.deferred.is_none() {
            self.deferred = failure;
        }
        Ok(handle)
    }

    /// Completes all issued launches and surfaces the first deferred error.
    pub fn sync(&mut self) -> Result<()> {
        self.in_flight = 0;
        match self.deferred.take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    fn pool(&mut self, workers: usize) -> Result<&rayon::ThreadPool> {
        match self.pools.entry(workers) {
            Entry::Occupied(e) => Ok(e.into_mut()),
            Entry::Vacant(e) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .thread_name(|i| format!("lattice-worker-{i}"))
                    .build()
                    .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
                Ok(e.insert(pool))
            }
        }
    }
}
