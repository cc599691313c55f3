//! Host/target dual memory.
//!
//! Every lattice field used by a kernel has a host copy ([`Field`]) and a
//! target copy ([`TargetBuffer`]) living in the device's own memory space.
//! Data only crosses between the two through the explicit copy operations
//! here, on every backend, including the ones where the target is the host
//! CPU itself.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::lattice::{Field, FieldDescriptor};

static NEXT_DEVICE_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    /// Sequential, launches complete before returning.
    Reference,
    /// Chunks statically partitioned over a worker pool.
    Threaded,
    /// Discrete target emulation: separate arena, grid/block style grouping.
    Emulated,
}

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::Reference, Backend::Threaded, Backend::Emulated];

    pub fn name(&self) -> &'static str {
        match self {
            Backend::Reference => "reference",
            Backend::Threaded => "threaded",
            Backend::Emulated => "emulated",
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reference" => Ok(Backend::Reference),
            "threaded" => Ok(Backend::Threaded),
            "emulated" | "emulated-discrete" => Ok(Backend::Emulated),
            _ => Err(Error::InvalidConfig(format!(
                "unknown backend `{s}` (expected reference|threaded|emulated)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeviceConfig {
    pub backend: Backend,
    /// Upper bound on live target memory, in doubles. `None` is unbounded.
    pub arena_cap: Option<usize>,
}

impl DeviceConfig {
    pub fn new(backend: Backend) -> Self {
        Self {
            backend,
            arena_cap: None,
        }
    }

    pub fn with_arena_cap(mut self, doubles: usize) -> Self {
        self.arena_cap = Some(doubles);
        self
    }
}

/// Handle to an allocation in a device's memory space. Copyable; validity is
/// checked against the owning device on every use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TargetBuffer {
    pub(crate) device: u64,
    pub(crate) slot: u32,
    pub(crate) generation: u32,
}

impl TargetBuffer {
    /// `(device, slot, generation)`, for handing the handle across an ABI.
    pub fn to_raw(self) -> (u64, u32, u32) {
        (self.device, self.slot, self.generation)
    }

    /// Rebuilds a handle from [`TargetBuffer::to_raw`] parts. A forged or
    /// stale handle is rejected by the device on use.
    pub fn from_raw(device: u64, slot: u32, generation: u32) -> Self {
        Self {
            device,
            slot,
            generation,
        }
    }
}

/// Per-site inclusion flags for masked transfers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteMask {
    flags: Vec<bool>,
    included: usize,
}

impl SiteMask {
    pub fn new(flags: Vec<bool>) -> Self {
        let included = flags.iter().filter(|f| **f).count();
        Self { flags, included }
    }

    pub fn from_fn(nsites: usize, f: impl FnMut(usize) -> bool) -> Self {
        Self::new((0..nsites).map(f).collect())
    }

    pub fn all(nsites: usize) -> Self {
        Self::new(vec![true; nsites])
    }

    pub fn none(nsites: usize) -> Self {
        Self::new(vec![false; nsites])
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn included_count(&self) -> usize {
        self.included
    }

    pub fn is_included(&self, s: usize) -> bool {
        self.flags.get(s).copied().unwrap_or(false)
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn included_sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.flags
            .iter()
            .enumerate()
            .filter_map(|(s, f)| f.then_some(s))
    }
}

/// One entry of the constant store.
#[derive(Debug, Clone, PartialEq)]
pub enum Constant {
    Double(f64),
    Int(i64),
    DoubleArray { values: Vec<f64>, dims: Vec<usize> },
    IntArray { values: Vec<i64>, dims: Vec<usize> },
}

impl Constant {
    pub fn type_name(&self) -> &'static str {
        match self {
            Constant::Double(_) => "double",
            Constant::Int(_) => "int",
            Constant::DoubleArray { dims, .. } if dims.len() == 1 => "double 1-D array",
            Constant::DoubleArray { .. } => "double 2-D array",
            Constant::IntArray { dims, .. } if dims.len() == 1 => "int 1-D array",
            Constant::IntArray { .. } => "int 2-D array",
        }
    }
}

/// Keyed parameters mirrored onto the target. Read-only while a kernel runs.
#[derive(Debug, Clone, Default)]
pub struct ConstantBlock {
    entries: HashMap<String, Constant>,
}

impl ConstantBlock {
    pub fn get(&self, key: &str) -> Result<&Constant> {
        self.entries
            .get(key)
            .ok_or_else(|| Error::MissingConstant(key.to_owned()))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn double(&self, key: &str) -> Result<f64> {
        match self.get(key)? {
            Constant::Double(v) => Ok(*v),
            other => Err(type_err(key, other, "double")),
        }
    }

    pub fn int(&self, key: &str) -> Result<i64> {
        match self.get(key)? {
            Constant::Int(v) => Ok(*v),
            other => Err(type_err(key, other, "int")),
        }
    }

    /// Values and dims of a double array.
    pub fn double_array(&self, key: &str) -> Result<(&[f64], &[usize])> {
        match self.get(key)? {
            Constant::DoubleArray { values, dims } => Ok((values, dims)),
            other => Err(type_err(key, other, "double array")),
        }
    }

    pub fn int_array(&self, key: &str) -> Result<(&[i64], &[usize])> {
        match self.get(key)? {
            Constant::IntArray { values, dims } => Ok((values, dims)),
            other => Err(type_err(key, other, "int array")),
        }
    }

    fn insert(&mut self, key: &str, value: Constant) -> Result<()> {
        if let Some(old) = self.entries.get(key) {
            if old.type_name() != value.type_name() {
                return Err(Error::Type {
                    key: key.to_owned(),
                    stored: old.type_name(),
                    given: value.type_name(),
                });
            }
        }
        self.entries.insert(key.to_owned(), value);
        Ok(())
    }
}

fn type_err(key: &str, stored: &Constant, given: &'static str) -> Error {
    Error::Type {
        key: key.to_owned(),
        stored: stored.type_name(),
        given,
    }
}

fn check_dims(len: usize, dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.len() > 2 {
        return Err(Error::Shape(format!(
            "constant arrays are 1-D or 2-D, got {} dims",
            dims.len()
        )));
    }
    if dims.iter().product::<usize>() != len {
        return Err(Error::Shape(format!(
            "constant array of {len} values does not match dims {dims:?}"
        )));
    }
    Ok(())
}

/// Instrumentation counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub launches: u64,
    pub chunks: u64,
    pub copies_to_target: u64,
    pub copies_from_target: u64,
    pub masked_copies: u64,
    pub pack_phases: u64,
    pub unpack_phases: u64,
    /// Elements staged through packed scratch buffers.
    pub elements_packed: u64,
    /// Size of the most recent packed scratch buffer, in elements.
    pub last_packed_len: u64,
    pub bytes_to_target: u64,
    pub bytes_from_target: u64,
    pub constant_updates: u64,
}

impl Counters {
    pub fn bytes_transferred(&self) -> u64 {
        self.bytes_to_target + self.bytes_from_target
    }
}

#[derive(Debug)]
enum Location {
    /// Separately allocated host memory.
    Owned(Vec<f64>),
    /// Offset into the emulated target arena.
    Arena(usize),
}

#[derive(Debug)]
struct Allocation {
    desc: FieldDescriptor,
    loc: Location,
}

#[derive(Debug, Default)]
struct Slot {
    generation: u32,
    live: Option<Allocation>,
}

/// First-fit allocator over one contiguous pool, standing in for the memory
/// of a discrete accelerator.
#[derive(Debug, Default)]
pub(crate) struct Arena {
    pool: Vec<f64>,
    /// Free `(offset, len)` ranges inside `pool`, sorted by offset.
    free: Vec<(usize, usize)>,
}

impl Arena {
    fn alloc(&mut self, len: usize) -> usize {
        if let Some(i) = self.free.iter().position(|&(_, l)| l >= len) {
            let (off, l) = self.free[i];
            if l == len {
                self.free.remove(i);
            } else {
                self.free[i] = (off + len, l - len);
            }
            self.pool[off..off + len].fill(0.0);
            return off;
        }
        // Grow, reusing a free tail range if there is one.
        let off = match self.free.last() {
            Some(&(o, l)) if o + l == self.pool.len() => {
                self.free.pop();
                o
            }
            _ => self.pool.len(),
        };
        self.pool[off..].fill(0.0);
        self.pool.resize(off + len, 0.0);
        off
    }

    fn release(&mut self, off: usize, len: usize) {
        let i = self.free.partition_point(|&(o, _)| o < off);
        self.free.insert(i, (off, len));
        if i + 1 < self.free.len() && self.free[i].0 + self.free[i].1 == self.free[i + 1].0 {
            self.free[i].1 += self.free[i + 1].1;
            self.free.remove(i + 1);
        }
        if i > 0 && self.free[i - 1].0 + self.free[i - 1].1 == self.free[i].0 {
            self.free[i - 1].1 += self.free[i].1;
            self.free.remove(i);
        }
        // Hand the tail back.
        if let Some(&(o, l)) = self.free.last() {
            if o + l == self.pool.len() {
                self.free.pop();
                self.pool.truncate(o);
                self.pool.shrink_to_fit();
            }
        }
    }
}

/// A target: memory space, constant store, worker pools and launch state.
pub struct TargetDevice {
    pub(crate) id: u64,
    pub(crate) config: DeviceConfig,
    slots: Vec<Slot>,
    pub(crate) arena: Arena,
    used: usize,
    pub(crate) constants: ConstantBlock,
    pub(crate) counters: Counters,
    /// Launches issued since the last sync.
    pub(crate) in_flight: u64,
    pub(crate) deferred: Option<Error>,
    pub(crate) pools: HashMap<usize, rayon::ThreadPool>,
}

impl std::fmt::Debug for TargetDevice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TargetDevice")
            .field("id", &self.id)
            .field("config", &self.config)
            .field("used", &self.used)
            .field("in_flight", &self.in_flight)
            .finish_non_exhaustive()
    }
}

impl TargetDevice {
    pub fn new(config: DeviceConfig) -> Self {
        Self {
            id: NEXT_DEVICE_ID.fetch_add(1, Ordering::Relaxed),
            config,
            slots: Vec::new(),
            arena: Arena::default(),
            used: 0,
            constants: ConstantBlock::default(),
            counters: Counters::default(),
            in_flight: 0,
            deferred: None,
            pools: HashMap::new(),
        }
    }

    pub fn with_backend(backend: Backend) -> Self {
        Self::new(DeviceConfig::new(backend))
    }

    pub fn backend(&self) -> Backend {
        self.config.backend
    }

    pub fn config(&self) -> &DeviceConfig {
        &self.config
    }

    /// Live target memory, in doubles.
    pub fn occupancy(&self) -> usize {
        self.used
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn reset_counters(&mut self) {
        self.counters = Counters::default();
    }

    pub fn constants(&self) -> &ConstantBlock {
        &self.constants
    }

    /// True between a deferred launch and the next [`TargetDevice::sync`].
    pub fn launch_in_flight(&self) -> bool {
        self.in_flight > 0
    }

    /// Allocates a zeroed target buffer.
    pub fn malloc(&mut self, desc: FieldDescriptor) -> Result<TargetBuffer> {
        let len = desc.len();
        if let Some(cap) = self.config.arena_cap {
            let available = cap.saturating_sub(self.used);
            if len > available {
                return Err(Error::Alloc {
                    requested: len,
                    available,
                });
            }
        }
        let loc = match self.config.backend {
            Backend::Emulated => Location::Arena(self.arena.alloc(len)),
            Backend::Reference | Backend::Threaded => {
                let mut v = Vec::new();
                v.try_reserve_exact(len).map_err(|_| Error::Alloc {
                    requested: len,
                    available: 0,
                })?;
                v.resize(len, 0.0);
                Location::Owned(v)
            }
        };
        let slot = match self.slots.iter().position(|s| s.live.is_none()) {
            Some(i) => i,
            None => {
                self.slots.push(Slot::default());
                self.slots.len() - 1
            }
        };
        let entry = &mut self.slots[slot];
        entry.live = Some(Allocation { desc, loc });
        self.used += len;
        Ok(TargetBuffer {
            device: self.id,
            slot: slot as u32,
            generation: entry.generation,
        })
    }

    pub fn free(&mut self, buf: TargetBuffer) -> Result<()> {
        if self.launch_in_flight() {
            return Err(Error::Lifecycle(
                "cannot free a buffer while a launch is in flight; sync first".into(),
            ));
        }
        self.allocation(buf)?;
        let slot = &mut self.slots[buf.slot as usize];
        let alloc = slot.live.take().expect("checked live");
        slot.generation = slot.generation.wrapping_add(1);
        let len = alloc.desc.len();
        if let Location::Arena(off) = alloc.loc {
            self.arena.release(off, len);
        }
        self.used -= len;
        Ok(())
    }

    pub fn descriptor(&self, buf: TargetBuffer) -> Result<FieldDescriptor> {
        Ok(self.allocation(buf)?.desc)
    }

    pub fn copy_to_target(&mut self, buf: TargetBuffer, field: &Field) -> Result<()> {
        self.ensure_idle("copy_to_target")?;
        self.descriptor(buf)?.ensure_same(field.descriptor())?;
        let src = field.raw();
        self.buffer_data_mut(buf)?.copy_from_slice(src);
        self.counters.copies_to_target += 1;
        self.counters.bytes_to_target += bytes(src.len());
        Ok(())
    }

    pub fn copy_from_target(&mut self, field: &mut Field, buf: TargetBuffer) -> Result<()> {
        self.ensure_idle("copy_from_target")?;
        self.descriptor(buf)?.ensure_same(field.descriptor())?;
        let src = self.buffer_data(buf)?;
        let len = src.len();
        field.raw_mut().copy_from_slice(src);
        self.counters.copies_from_target += 1;
        self.counters.bytes_from_target += bytes(len);
        Ok(())
    }

    /// Copies the masked sites of `field` into `buf`: pack on the host,
    /// transfer the packed scratch, unpack on the target.
    pub fn copy_to_target_masked(
        &mut self,
        buf: TargetBuffer,
        field: &Field,
        mask: &SiteMask,
    ) -> Result<()> {
        self.ensure_idle("copy_to_target_masked")?;
        let desc = self.descriptor(buf)?;
        desc.ensure_same(field.descriptor())?;
        check_mask(&desc, mask)?;

        let packed = pack(field.raw(), &desc, mask);
        self.record_pack(packed.len());
        let staged = packed.clone();
        self.counters.bytes_to_target += bytes(staged.len());
        unpack(&staged, self.buffer_data_mut(buf)?, &desc, mask);
        self.counters.unpack_phases += 1;
        self.counters.masked_copies += 1;
        Ok(())
    }

    /// Copies the masked sites of `buf` into `field`: pack on the target,
    /// transfer the packed scratch, unpack on the host.
    pub fn copy_from_target_masked(
        &mut self,
        field: &mut Field,
        buf: TargetBuffer,
        mask: &SiteMask,
    ) -> Result<()> {
        self.ensure_idle("copy_from_target_masked")?;
        let desc = self.descriptor(buf)?;
        desc.ensure_same(field.descriptor())?;
        check_mask(&desc, mask)?;

        let packed = pack(self.buffer_data(buf)?, &desc, mask);
        self.record_pack(packed.len());
        let staged = packed.clone();
        self.counters.bytes_from_target += bytes(staged.len());
        unpack(&staged, field.raw_mut(), &desc, mask);
        self.counters.unpack_phases += 1;
        self.counters.masked_copies += 1;
        Ok(())
    }

    pub fn set_constant_double(&mut self, key: &str, v: f64) -> Result<()> {
        self.set_constant(key, Constant::Double(v))
    }

    pub fn set_constant_int(&mut self, key: &str, v: i64) -> Result<()> {
        self.set_constant(key, Constant::Int(v))
    }

    pub fn set_constant_double_array(
        &mut self,
        key: &str,
        values: &[f64],
        dims: &[usize],
    ) -> Result<()> {
        check_dims(values.len(), dims)?;
        self.set_constant(
            key,
            Constant::DoubleArray {
                values: values.to_vec(),
                dims: dims.to_vec(),
            },
        )
    }

    pub fn set_constant_int_array(
        &mut self,
        key: &str,
        values: &[i64],
        dims: &[usize],
    ) -> Result<()> {
        check_dims(values.len(), dims)?;
        self.set_constant(
            key,
            Constant::IntArray {
                values: values.to_vec(),
                dims: dims.to_vec(),
            },
        )
    }

    fn set_constant(&mut self, key: &str, value: Constant) -> Result<()> {
        if self.launch_in_flight() {
            return Err(Error::Concurrency(format!(
                "constant `{key}` updated while a launch is in flight"
            )));
        }
        self.constants.insert(key, value)?;
        self.counters.constant_updates += 1;
        Ok(())
    }

    pub(crate) fn ensure_idle(&self, op: &str) -> Result<()> {
        if self.launch_in_flight() {
            return Err(Error::Concurrency(format!(
                "{op} issued while a launch is in flight; call sync first"
            )));
        }
        Ok(())
    }

    fn record_pack(&mut self, len: usize) {
        self.counters.pack_phases += 1;
        self.counters.elements_packed += len as u64;
        self.counters.last_packed_len = len as u64;
    }

    fn allocation(&self, buf: TargetBuffer) -> Result<&Allocation> {
        if buf.device != self.id {
            return Err(Error::Device);
        }
        self.slots
            .get(buf.slot as usize)
            .filter(|s| s.generation == buf.generation)
            .and_then(|s| s.live.as_ref())
            .ok_or_else(|| Error::Lifecycle("buffer was freed or never allocated".into()))
    }

    pub(crate) fn buffer_data(&self, buf: TargetBuffer) -> Result<&[f64]> {
        let alloc = self.allocation(buf)?;
        Ok(match &alloc.loc {
            Location::Owned(v) => v,
            Location::Arena(off) => &self.arena.pool[*off..*off + alloc.desc.len()],
        })
    }

    pub(crate) fn buffer_data_mut(&mut self, buf: TargetBuffer) -> Result<&mut [f64]> {
        self.allocation(buf)?;
        let alloc = self.slots[buf.slot as usize]
            .live
            .as_mut()
            .expect("checked live");
        let len = alloc.desc.len();
        Ok(match &mut alloc.loc {
            Location::Owned(v) => v,
            Location::Arena(off) => &mut self.arena.pool[*off..*off + len],
        })
    }

    /// Raw base pointers for a set of distinct live buffers, for kernel views.
    pub(crate) fn raw_pointers(&mut self, bufs: &[TargetBuffer]) -> Result<Vec<*mut f64>> {
        for b in bufs {
            self.allocation(*b)?;
        }
        let arena_base = self.arena.pool.as_mut_ptr();
        let mut out = Vec::with_capacity(bufs.len());
        for b in bufs {
            let alloc = self.slots[b.slot as usize]
                .live
                .as_mut()
                .expect("checked live");
            out.push(match &mut alloc.loc {
                Location::Owned(v) => v.as_mut_ptr(),
                // SAFETY: offset lies inside the pool, checked at allocation.
                Location::Arena(off) => unsafe { arena_base.add(*off) },
            });
        }
        Ok(out)
    }
}

fn bytes(elements: usize) -> u64 {
    (elements * std::mem::size_of::<f64>()) as u64
}

fn check_mask(desc: &FieldDescriptor, mask: &SiteMask) -> Result<()> {
    if mask.len() != desc.nsites() {
        return Err(Error::Shape(format!(
            "mask has {} entries for {} sites",
            mask.len(),
            desc.nsites()
        )));
    }
    Ok(())
}

/// Component-major packing of the masked sites.
fn pack(src: &[f64], desc: &FieldDescriptor, mask: &SiteMask) -> Vec<f64> {
    let p = desc.padded_sites();
    let mut out = Vec::with_capacity(mask.included_count() * desc.ncomp());
    for c in 0..desc.ncomp() {
        let comp = &src[c * p..(c + 1) * p];
        out.extend(mask.included_sites().map(|s| comp[s]));
    }
    out
}

fn unpack(packed: &[f64], dst: &mut [f64], desc: &FieldDescriptor, mask: &SiteMask) {
    let p = desc.padded_sites();
    let mut it = packed.iter();
    for c in 0..desc.ncomp() {
        let comp = &mut dst[c * p..(c + 1) * p];
        for s in mask.included_sites() {
            comp[s] = *it.next().expect("packed length matches mask");
        }
    }
}
