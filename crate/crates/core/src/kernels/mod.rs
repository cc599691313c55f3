//! The built-in workloads and helpers to run them on a fresh device.

pub mod collision;
pub mod d3q19;
pub mod scale;
pub mod state;

pub use collision::BinaryCollisionKernel;
pub use d3q19::D3Q19Model;
pub use scale::ScaleKernel;
pub use state::BinaryFluidState;

use crate::error::{Error, Result};
use crate::execution::{Binding, LaunchPlan, DEFAULT_TPB};
use crate::lattice::Field;
use crate::memory::{Backend, TargetDevice};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelId {
    Scale,
    BinaryCollision,
}

impl KernelId {
    pub fn name(&self) -> &'static str {
        match self {
            KernelId::Scale => "scale",
            KernelId::BinaryCollision => "binary-collision",
        }
    }

    /// Doubles read plus written per site by one application.
    pub fn doubles_moved_per_site(&self) -> usize {
        match self {
            KernelId::Scale => 2 * 3,
            KernelId::BinaryCollision => 2 * 2 * d3q19::Q,
        }
    }
}

impl std::fmt::Display for KernelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for KernelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scale" => Ok(KernelId::Scale),
            "binary-collision" | "collision" => Ok(KernelId::BinaryCollision),
            _ => Err(Error::InvalidConfig(format!(
                "unknown kernel `{s}` (expected scale|binary-collision)"
            ))),
        }
    }
}

/// Backend and decomposition for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    pub backend: Backend,
    pub vvl: usize,
    pub workers: usize,
    pub tpb: usize,
}

impl RunConfig {
    pub fn new(backend: Backend, vvl: usize, workers: usize) -> Self {
        Self {
            backend,
            vvl,
            workers,
            tpb: DEFAULT_TPB,
        }
    }

    pub fn plan(&self, extent: usize) -> Result<LaunchPlan> {
        LaunchPlan::new(extent, self.vvl)?
            .with_workers(self.workers)?
            .with_tpb(self.tpb)
    }
}

/// Copies `field` to a new device, scales it `steps` times by `a`, and
/// copies the result back.
pub fn run_scale(field: &Field, a: f64, cfg: &RunConfig, steps: usize) -> Result<Field> {
    let desc = *field.descriptor();
    let plan = cfg.plan(desc.padded_sites())?;
    let mut dev = TargetDevice::with_backend(cfg.backend);
    let buf = dev.malloc(desc)?;
    dev.copy_to_target(buf, field)?;
    dev.set_constant_double(scale::SCALE_FACTOR, a)?;
    for _ in 0..steps {
        dev.launch(&ScaleKernel, &plan, &[Binding::read_write(buf)])?;
    }
    dev.sync()?;
    let mut out = Field::new(desc);
    dev.copy_from_target(&mut out, buf)?;
    dev.free(buf)?;
    Ok(out)
}

/// Runs `steps` collisions of `state` on a new device.
pub fn run_collision(
    state: &BinaryFluidState,
    model: &D3Q19Model,
    cfg: &RunConfig,
    steps: usize,
) -> Result<BinaryFluidState> {
    let desc = *state.f.descriptor();
    let plan = cfg.plan(desc.padded_sites())?;
    let mut dev = TargetDevice::with_backend(cfg.backend);
    let f = dev.malloc(desc)?;
    let g = dev.malloc(*state.g.descriptor())?;
    dev.copy_to_target(f, &state.f)?;
    dev.copy_to_target(g, &state.g)?;
    model.upload(&mut dev)?;
    for _ in 0..steps {
        dev.launch(
            &BinaryCollisionKernel,
            &plan,
            &[Binding::read_write(f), Binding::read_write(g)],
        )?;
    }
    dev.sync()?;
    let mut out = state.clone();
    dev.copy_from_target(&mut out.f, f)?;
    dev.copy_from_target(&mut out.g, g)?;
    dev.free(f)?;
    dev.free(g)?;
    Ok(out)
}
