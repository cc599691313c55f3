//! In-place scaling of a 3-vector field by the constant `a`.

use crate::error::{Error, Result};
use crate::execution::{for_each_lane, Access, BoundBuffer, Kernel, KernelContext};
use crate::memory::ConstantBlock;

/// Constant-store key of the scale factor.
pub const SCALE_FACTOR: &str = "a";

#[derive(Debug, Clone, Copy, Default)]
pub struct ScaleKernel;

impl Kernel for ScaleKernel {
    type Params = f64;

    fn name(&self) -> &str {
        "scale"
    }

    fn bind(&self, constants: &ConstantBlock, buffers: &[BoundBuffer]) -> Result<f64> {
        match buffers {
            [b] if b.desc.ncomp() == 3 && b.access == Access::ReadWrite => {}
            [b] if b.desc.ncomp() != 3 => {
                return Err(Error::Shape(format!(
                    "scale needs a 3-component field, got ncomp {}",
                    b.desc.ncomp()
                )))
            }
            _ => {
                return Err(Error::Plan(
                    "scale takes exactly one read-write buffer".into(),
                ))
            }
        }
        constants.double(SCALE_FACTOR)
    }

    fn run_chunk(&self, a: &f64, ctx: &mut KernelContext<'_>) -> Result<()> {
        let a = *a;
        let vvl = ctx.vvl();
        for c in 0..3 {
            let x = ctx.write(0, c)?;
            for_each_lane(vvl, |v| x[v] *= a);
        }
        Ok(())
    }
}
