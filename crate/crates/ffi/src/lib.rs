//! C ABI over `lattice-dp`.
//!
//! Devices and host fields are opaque heap handles created and destroyed
//! through this API. Target buffers are small value handles. Every fallible
//! call returns an [`LdpStatus`]; on failure the message is kept per thread
//! and read back with [`ldp_last_error`].
//!
//! Pointers passed in must be valid for the duration of the call. Handles
//! must not be shared between threads without external locking.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use lattice_dp::bench::{benchmark_run, BenchConfig};
use lattice_dp::{
    Backend, BinaryCollisionKernel, Binding, D3Q19Model, DeviceConfig, Error, Field,
    FieldDescriptor, KernelId, LatticeShape, RunConfig, ScaleKernel, SiteMask, TargetBuffer,
    TargetDevice,
};

pub const LDP_BACKEND_REFERENCE: u32 = 0;
pub const LDP_BACKEND_THREADED: u32 = 1;
pub const LDP_BACKEND_EMULATED: u32 = 2;

pub const LDP_KERNEL_SCALE: u32 = 0;
pub const LDP_KERNEL_BINARY_COLLISION: u32 = 1;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LdpStatus {
    Ok = 0,
    Bounds = 1,
    InvalidConfig = 2,
    Shape = 3,
    Lifecycle = 4,
    Alloc = 5,
    Concurrency = 6,
    Type = 7,
    MissingConstant = 8,
    Plan = 9,
    Device = 10,
    ContractViolation = 11,
    SingularState = 12,
    Io = 13,
    /// A required pointer argument was null.
    NullPointer = 14,
    /// Bad enum code, non-UTF-8 key, or similar.
    InvalidArgument = 15,
    /// A Rust panic was caught at the boundary.
    Panic = 16,
}

impl From<&Error> for LdpStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Bounds(_) => LdpStatus::Bounds,
            Error::InvalidConfig(_) => LdpStatus::InvalidConfig,
            Error::Shape(_) => LdpStatus::Shape,
            Error::Lifecycle(_) => LdpStatus::Lifecycle,
            Error::Alloc { .. } => LdpStatus::Alloc,
            Error::Concurrency(_) => LdpStatus::Concurrency,
            Error::Type { .. } => LdpStatus::Type,
            Error::MissingConstant(_) => LdpStatus::MissingConstant,
            Error::Plan(_) => LdpStatus::Plan,
            Error::Device => LdpStatus::Device,
            Error::ContractViolation(_) => LdpStatus::ContractViolation,
            Error::SingularState { .. } => LdpStatus::SingularState,
            Error::Io(_) => LdpStatus::Io,
        }
    }
}

/// Opaque target device.
pub struct LdpDevice {
    inner: TargetDevice,
}

/// Opaque host field (structure-of-arrays, padded).
pub struct LdpField {
    inner: Field,
}

/// Handle to a target allocation. Plain value; copy freely.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LdpBuffer {
    pub device: u64,
    pub slot: u32,
    pub generation: u32,
}

impl From<TargetBuffer> for LdpBuffer {
    fn from(b: TargetBuffer) -> Self {
        let (device, slot, generation) = b.to_raw();
        Self {
            device,
            slot,
            generation,
        }
    }
}

impl From<LdpBuffer> for TargetBuffer {
    fn from(b: LdpBuffer) -> Self {
        TargetBuffer::from_raw(b.device, b.slot, b.generation)
    }
}

/// Launch decomposition. `tpb` of 0 selects the default.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LdpLaunchConfig {
    pub vvl: usize,
    pub workers: usize,
    pub tpb: usize,
}

/// Instrumentation counters of a device.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LdpCounters {
    pub launches: u64,
    pub chunks: u64,
    pub copies_to_target: u64,
    pub copies_from_target: u64,
    pub masked_copies: u64,
    pub pack_phases: u64,
    pub unpack_phases: u64,
    pub elements_packed: u64,
    pub last_packed_len: u64,
    pub bytes_to_target: u64,
    pub bytes_from_target: u64,
    pub constant_updates: u64,
}

/// One benchmark measurement.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LdpBenchResult {
    pub elapsed_s: f64,
    pub sites_per_s: f64,
    pub bytes_per_s: f64,
    pub launches: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Failure inside a call: a library error or a boundary problem.
enum Failure {
    Lib(Error),
    Status(LdpStatus, String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CallResult = Result<(), Failure>;

fn guard(f: impl FnOnce() -> CallResult) -> LdpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LdpStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            LdpStatus::from(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_last_error(msg);
            s
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            LdpStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(LdpStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: String) -> Failure {
    Failure::Status(LdpStatus::InvalidArgument, msg)
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn read_key<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null("key"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid("key is not valid UTF-8".into()))
}

fn backend(code: u32) -> Result<Backend, Failure> {
    match code {
        LDP_BACKEND_REFERENCE => Ok(Backend::Reference),
        LDP_BACKEND_THREADED => Ok(Backend::Threaded),
        LDP_BACKEND_EMULATED => Ok(Backend::Emulated),
        _ => Err(invalid(format!("unknown backend code {code}"))),
    }
}

fn kernel(code: u32) -> Result<KernelId, Failure> {
    match code {
        LDP_KERNEL_SCALE => Ok(KernelId::Scale),
        LDP_KERNEL_BINARY_COLLISION => Ok(KernelId::BinaryCollision),
        _ => Err(invalid(format!("unknown kernel code {code}"))),
    }
}

fn run_config(backend: Backend, cfg: &LdpLaunchConfig) -> RunConfig {
    let mut rc = RunConfig::new(backend, cfg.vvl, cfg.workers);
    if cfg.tpb != 0 {
        rc.tpb = cfg.tpb;
    }
    rc
}

fn descriptor(nx: usize, ny: usize, nz: usize, ncomp: usize) -> Result<FieldDescriptor, Failure> {
    Ok(FieldDescriptor::new(LatticeShape::new(nx, ny, nz)?, ncomp)?)
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ldp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static, nul-terminated name of a status code; "unknown" if out of range.
#[no_mangle]
pub extern "C" fn ldp_status_name(status: i32) -> *const c_char {
    let s: &'static CStr = match status {
        0 => c"ok",
        1 => c"bounds",
        2 => c"invalid-config",
        3 => c"shape",
        4 => c"lifecycle",
        5 => c"alloc",
        6 => c"concurrency",
        7 => c"type",
        8 => c"missing-constant",
        9 => c"plan",
        10 => c"device",
        11 => c"contract-violation",
        12 => c"singular-state",
        13 => c"io",
        14 => c"null-pointer",
        15 => c"invalid-argument",
        16 => c"panic",
        _ => c"unknown",
    };
    s.as_ptr()
}

/// Creates a device. `arena_cap` bounds the emulated arena in doubles; 0
/// means unbounded.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ldp_device_new(
    backend_code: u32,
    arena_cap: usize,
    out: *mut *mut LdpDevice,
) -> LdpStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let mut cfg = DeviceConfig::new(backend(backend_code)?);
        if arena_cap != 0 {
            cfg = cfg.with_arena_cap(arena_cap);
        }
        *out = Box::into_raw(Box::new(LdpDevice {
            inner: TargetDevice::new(cfg),
        }));
        Ok(())
    })
}

/// Destroys a device and everything allocated on it. Null is a no-op.
///
/// # Safety
/// `dev` must come from [`ldp_device_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ldp_device_free(dev: *mut LdpDevice) {
    if !dev.is_null() {
        drop(Box::from_raw(dev));
    }
}

/// Creates a zeroed host field of `ncomp` components on an `nx*ny*nz` lattice.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ldp_field_new(
    nx: usize,
    ny: usize,
    nz: usize,
    ncomp: usize,
    out: *mut *mut LdpField,
) -> LdpStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let desc = descriptor(nx, ny, nz, ncomp)?;
        *out = Box::into_raw(Box::new(LdpField {
            inner: Field::new(desc),
        }));
        Ok(())
    })
}

/// Null is a no-op.
///
/// # Safety
/// `field` must come from [`ldp_field_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ldp_field_free(field: *mut LdpField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Number of real lattice sites; 0 for a null field.
///
/// # Safety
/// `field` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_field_nsites(field: *const LdpField) -> usize {
    field.as_ref().map_or(0, |f| f.inner.descriptor().nsites())
}

/// Stride between components in the storage; 0 for a null field.
///
/// # Safety
/// `field` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_field_padded_sites(field: *const LdpField) -> usize {
    field
        .as_ref()
        .map_or(0, |f| f.inner.descriptor().padded_sites())
}

/// # Safety
/// `field` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_field_get(
    field: *const LdpField,
    c: usize,
    s: usize,
    out: *mut f64,
) -> LdpStatus {
    guard(|| {
        let field = as_ref(field, "field")?;
        *as_mut(out, "out")? = field.inner.get(c, s)?;
        Ok(())
    })
}

/// # Safety
/// `field` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_field_set(
    field: *mut LdpField,
    c: usize,
    s: usize,
    value: f64,
) -> LdpStatus {
    guard(|| {
        as_mut(field, "field")?.inner.set(c, s, value)?;
        Ok(())
    })
}

/// Pointer to the `nsites` real values of component `c`. Valid until the
/// field is freed.
///
/// # Safety
/// `field` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_field_component(
    field: *mut LdpField,
    c: usize,
    out: *mut *mut f64,
) -> LdpStatus {
    guard(|| {
        let field = as_mut(field, "field")?;
        let out = as_mut(out, "out")?;
        let ncomp = field.inner.descriptor().ncomp();
        if c >= ncomp {
            return Err(Error::Bounds(format!("component {c} of {ncomp}")).into());
        }
        *out = field.inner.component_mut(c).as_mut_ptr();
        Ok(())
    })
}

/// Allocates a zeroed target buffer.
///
/// # Safety
/// `dev` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_malloc(
    dev: *mut LdpDevice,
    nx: usize,
    ny: usize,
    nz: usize,
    ncomp: usize,
    out: *mut LdpBuffer,
) -> LdpStatus {
    guard(|| {
        let dev = as_mut(dev, "device")?;
        let out = as_mut(out, "out")?;
        *out = dev.inner.malloc(descriptor(nx, ny, nz, ncomp)?)?.into();
        Ok(())
    })
}

/// # Safety
/// `dev` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_free(dev: *mut LdpDevice, buf: LdpBuffer) -> LdpStatus {
    guard(|| {
        as_mut(dev, "device")?.inner.free(buf.into())?;
        Ok(())
    })
}

/// Doubles currently allocated on the device; 0 for a null device.
///
/// # Safety
/// `dev` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_occupancy(dev: *const LdpDevice) -> usize {
    dev.as_ref().map_or(0, |d| d.inner.occupancy())
}

/// # Safety
/// `dev` and `field` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_copy_to_target(
    dev: *mut LdpDevice,
    buf: LdpBuffer,
    field: *const LdpField,
) -> LdpStatus {
    guard(|| {
        let dev = as_mut(dev, "device")?;
        dev.inner
            .copy_to_target(buf.into(), &as_ref(field, "field")?.inner)?;
        Ok(())
    })
}

/// # Safety
/// `dev` and `field` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_copy_from_target(
    dev: *mut LdpDevice,
    field: *mut LdpField,
    buf: LdpBuffer,
) -> LdpStatus {
    guard(|| {
        let dev = as_mut(dev, "device")?;
        dev.inner
            .copy_from_target(&mut as_mut(field, "field")?.inner, buf.into())?;
        Ok(())
    })
}

unsafe fn mask(flags: *const u8, nflags: usize) -> Result<SiteMask, Failure> {
    Ok(SiteMask::new(
        slice(flags, nflags, "flags")?
            .iter()
            .map(|&b| b != 0)
            .collect(),
    ))
}

/// Copies the sites whose flag is non-zero. `nflags` must equal the site count.
///
/// # Safety
/// `dev`, `field` and `flags[0..nflags]` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_copy_to_target_masked(
    dev: *mut LdpDevice,
    buf: LdpBuffer,
    field: *const LdpField,
    flags: *const u8,
    nflags: usize,
) -> LdpStatus {
    guard(|| {
        let dev = as_mut(dev, "device")?;
        let m = mask(flags, nflags)?;
        dev.inner
            .copy_to_target_masked(buf.into(), &as_ref(field, "field")?.inner, &m)?;
        Ok(())
    })
}

/// # Safety
/// `dev`, `field` and `flags[0..nflags]` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_copy_from_target_masked(
    dev: *mut LdpDevice,
    field: *mut LdpField,
    buf: LdpBuffer,
    flags: *const u8,
    nflags: usize,
) -> LdpStatus {
    guard(|| {
        let dev = as_mut(dev, "device")?;
        let m = mask(flags, nflags)?;
        dev.inner
            .copy_from_target_masked(&mut as_mut(field, "field")?.inner, buf.into(), &m)?;
        Ok(())
    })
}

/// # Safety
/// `dev` and `key` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_set_constant_double(
    dev: *mut LdpDevice,
    key: *const c_char,
    value: f64,
) -> LdpStatus {
    guard(|| {
        as_mut(dev, "device")?
            .inner
            .set_constant_double(read_key(key)?, value)?;
        Ok(())
    })
}

/// # Safety
/// `dev` and `key` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_set_constant_int(
    dev: *mut LdpDevice,
    key: *const c_char,
    value: i64,
) -> LdpStatus {
    guard(|| {
        as_mut(dev, "device")?
            .inner
            .set_constant_int(read_key(key)?, value)?;
        Ok(())
    })
}

/// Row-major array of shape `dims[0..ndims]` (1 or 2 dims).
///
/// # Safety
/// `dev`, `key`, `values[0..n]` and `dims[0..ndims]` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_set_constant_double_array(
    dev: *mut LdpDevice,
    key: *const c_char,
    values: *const f64,
    n: usize,
    dims: *const usize,
    ndims: usize,
) -> LdpStatus {
    guard(|| {
        let dev = as_mut(dev, "device")?;
        dev.inner.set_constant_double_array(
            read_key(key)?,
            slice(values, n, "values")?,
            slice(dims, ndims, "dims")?,
        )?;
        Ok(())
    })
}

/// # Safety
/// `dev`, `key`, `values[0..n]` and `dims[0..ndims]` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_set_constant_int_array(
    dev: *mut LdpDevice,
    key: *const c_char,
    values: *const i64,
    n: usize,
    dims: *const usize,
    ndims: usize,
) -> LdpStatus {
    guard(|| {
        let dev = as_mut(dev, "device")?;
        dev.inner.set_constant_int_array(
            read_key(key)?,
            slice(values, n, "values")?,
            slice(dims, ndims, "dims")?,
        )?;
        Ok(())
    })
}

/// Stores the D3Q19 tables and relaxation times the collision kernel reads.
///
/// # Safety
/// `dev` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_upload_d3q19(
    dev: *mut LdpDevice,
    tau_f: f64,
    tau_g: f64,
) -> LdpStatus {
    guard(|| {
        let dev = as_mut(dev, "device")?;
        D3Q19Model::with_tau(tau_f, tau_g)?.upload(&mut dev.inner)?;
        Ok(())
    })
}

/// Scales a 3-component buffer in place by the constant `"a"`.
///
/// # Safety
/// `dev` and `cfg` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_launch_scale(
    dev: *mut LdpDevice,
    buf: LdpBuffer,
    cfg: *const LdpLaunchConfig,
) -> LdpStatus {
    guard(|| {
        let dev = as_mut(dev, "device")?;
        let cfg = as_ref(cfg, "config")?;
        let desc = dev.inner.descriptor(buf.into())?;
        let plan = run_config(dev.inner.backend(), cfg).plan(desc.padded_sites())?;
        dev.inner
            .launch(&ScaleKernel, &plan, &[Binding::read_write(buf.into())])?;
        Ok(())
    })
}

/// One collision step on the 19-component distributions `f` and `g`.
///
/// # Safety
/// `dev` and `cfg` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_launch_binary_collision(
    dev: *mut LdpDevice,
    f: LdpBuffer,
    g: LdpBuffer,
    cfg: *const LdpLaunchConfig,
) -> LdpStatus {
    guard(|| {
        let dev = as_mut(dev, "device")?;
        let cfg = as_ref(cfg, "config")?;
        let desc = dev.inner.descriptor(f.into())?;
        let plan = run_config(dev.inner.backend(), cfg).plan(desc.padded_sites())?;
        dev.inner.launch(
            &BinaryCollisionKernel,
            &plan,
            &[Binding::read_write(f.into()), Binding::read_write(g.into())],
        )?;
        Ok(())
    })
}

/// Waits for outstanding launches and reports the first deferred kernel error.
///
/// # Safety
/// `dev` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_sync(dev: *mut LdpDevice) -> LdpStatus {
    guard(|| {
        as_mut(dev, "device")?.inner.sync()?;
        Ok(())
    })
}

/// # Safety
/// `dev` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_counters(dev: *const LdpDevice, out: *mut LdpCounters) -> LdpStatus {
    guard(|| {
        let c = as_ref(dev, "device")?.inner.counters();
        *as_mut(out, "out")? = LdpCounters {
            launches: c.launches,
            chunks: c.chunks,
            copies_to_target: c.copies_to_target,
            copies_from_target: c.copies_from_target,
            masked_copies: c.masked_copies,
            pack_phases: c.pack_phases,
            unpack_phases: c.unpack_phases,
            elements_packed: c.elements_packed,
            last_packed_len: c.last_packed_len,
            bytes_to_target: c.bytes_to_target,
            bytes_from_target: c.bytes_from_target,
            constant_updates: c.constant_updates,
        };
        Ok(())
    })
}

/// # Safety
/// `dev` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_reset_counters(dev: *mut LdpDevice) -> LdpStatus {
    guard(|| {
        as_mut(dev, "device")?.inner.reset_counters();
        Ok(())
    })
}

/// Times `iterations` launches of a kernel on its seeded random state.
///
/// # Safety
/// `cfg` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ldp_benchmark(
    kernel_code: u32,
    backend_code: u32,
    nx: usize,
    ny: usize,
    nz: usize,
    cfg: *const LdpLaunchConfig,
    iterations: usize,
    seed: u64,
    out: *mut LdpBenchResult,
) -> LdpStatus {
    guard(|| {
        let cfg = as_ref(cfg, "config")?;
        let out = as_mut(out, "out")?;
        let r = benchmark_run(&BenchConfig {
            kernel: kernel(kernel_code)?,
            shape: LatticeShape::new(nx, ny, nz)?,
            run: run_config(backend(backend_code)?, cfg),
            iterations,
            seed,
        })?;
        *out = LdpBenchResult {
            elapsed_s: r.elapsed_s,
            sites_per_s: r.sites_per_s,
            bytes_per_s: r.bytes_per_s(),
            launches: r.counters.launches,
        };
        Ok(())
    })
}
