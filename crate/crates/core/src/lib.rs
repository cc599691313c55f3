//! Lattice data parallelism with portable performance.
//!
//! Fields are stored structure-of-arrays on the host ([`Field`]) and mirrored
//! into a target memory space ([`TargetDevice`]) through explicit, optionally
//! masked, copies. Kernels run over strip-mined chunks of `vvl` sites: chunks
//! are spread over worker threads and each chunk runs a fixed-length lane
//! loop the compiler can vectorize. The lane count (the virtual vector
//! length) is chosen per launch.
//!
//! ```
//! use lattice_dp::{Backend, Binding, Field, FieldDescriptor, LatticeShape, LaunchPlan,
//!                  ScaleKernel, TargetDevice};
//!
//! let desc = FieldDescriptor::new(LatticeShape::new(8, 8, 8)?, 3)?;
//! let mut field = Field::new(desc);
//! field.fill(|c, s| (c + s) as f64);
//!
//! let mut dev = TargetDevice::with_backend(Backend::Threaded);
//! let t_field = dev.malloc(desc)?;
//! dev.copy_to_target(t_field, &field)?;
//! dev.set_constant_double("a", 2.0)?;
//!
//! let plan = LaunchPlan::for_descriptor(&desc, 8)?.with_workers(2)?;
//! dev.launch(&ScaleKernel, &plan, &[Binding::read_write(t_field)])?;
//! dev.sync()?;
//!
//! dev.copy_from_target(&mut field, t_field)?;
//! dev.free(t_field)?;
//! assert_eq!(field.get(1, 3)?, 8.0);
//! # Ok::<(), lattice_dp::Error>(())
//! ```

// NaN must fail range checks, so `!(x > lo)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod cli;
pub mod error;
pub mod execution;
pub mod kernels;
pub mod lattice;
pub mod memory;
pub mod verify;

pub use error::{Error, Result};
pub use execution::{
    backend_schedule, for_each_lane, lane_width, Access, Binding, BoundBuffer, Kernel,
    KernelContext, LaunchHandle, LaunchPlan, DEFAULT_TPB,
};
pub use kernels::{
    BinaryCollisionKernel, BinaryFluidState, D3Q19Model, KernelId, RunConfig, ScaleKernel,
};
pub use lattice::{
    pad_sites, soa_index, Field, FieldDescriptor, LatticeShape, DEFAULT_PAD_MULTIPLE,
};
pub use memory::{
    Backend, Constant, ConstantBlock, Counters, DeviceConfig, SiteMask, TargetBuffer, TargetDevice,
};
