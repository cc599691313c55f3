//! Two-distribution BGK collision for a binary mixture.
//!
//! Per site: density and velocity come from `f`, the order parameter from
//! `g`. Both distributions relax toward their equilibria at the shared
//! velocity, `f` with `tau_f` and `g` with `tau_g`. No streaming.
//!
//! Bound arguments: 0 = `f`, 1 = `g`, both 19 components, read-write.

use super::d3q19::{keys, Coefficients, Q};
use crate::error::{Error, Result};
use crate::execution::{lane_width, Access, BoundBuffer, Kernel, KernelContext};
use crate::memory::ConstantBlock;

#[derive(Debug, Clone, Copy, Default)]
pub struct BinaryCollisionKernel;

/// Collision constants resolved from the constant store.
#[derive(Debug, Clone)]
pub struct CollisionParams {
    w: [f64; Q],
    /// Velocity components by axis: `c[axis][i]`.
    c: [[f64; Q]; 3],
    k: Coefficients,
    omega_f: f64,
    keep_f: f64,
    omega_g: f64,
    keep_g: f64,
}

impl Kernel for BinaryCollisionKernel {
    type Params = CollisionParams;

    fn name(&self) -> &str {
        "binary-collision"
    }

    fn bind(&self, constants: &ConstantBlock, buffers: &[BoundBuffer]) -> Result<CollisionParams> {
        let [f, g] = buffers else {
            return Err(Error::Plan(
                "binary collision takes two buffers (f, g)".into(),
            ));
        };
        for b in [f, g] {
            if b.desc.ncomp() != Q {
                return Err(Error::Shape(format!(
                    "distribution needs {Q} components, got {}",
                    b.desc.ncomp()
                )));
            }
            if b.access != Access::ReadWrite {
                return Err(Error::Plan("f and g must be bound read-write".into()));
            }
        }
        f.desc.ensure_same(&g.desc)?;

        let (wv, wdims) = constants.double_array(keys::WV)?;
        let (cv, cdims) = constants.int_array(keys::CV)?;
        if wdims != [Q] || cdims != [Q, 3] {
            return Err(Error::Shape(format!(
                "model constants have dims {wdims:?} and {cdims:?}, expected [{Q}] and [{Q}, 3]"
            )));
        }
        let cs2 = constants.double(keys::CS2)?;
        let tau_f = constants.double(keys::TAU_F)?;
        let tau_g = constants.double(keys::TAU_G)?;
        for tau in [tau_f, tau_g] {
            if !(tau > 0.5) {
                return Err(Error::InvalidConfig(format!(
                    "relaxation time {tau} <= 0.5"
                )));
            }
        }

        let mut w = [0.0; Q];
        w.copy_from_slice(wv);
        let mut c = [[0.0; Q]; 3];
        for i in 0..Q {
            for a in 0..3 {
                c[a][i] = cv[3 * i + a] as f64;
            }
        }
        let inv_cs2 = 1.0 / cs2;
        let omega_f = 1.0 / tau_f;
        let omega_g = 1.0 / tau_g;
        Ok(CollisionParams {
            w,
            c,
            k: Coefficients {
                inv_cs2,
                half_inv_cs2_sq: 0.5 * inv_cs2 * inv_cs2,
                half_inv_cs2: 0.5 * inv_cs2,
            },
            omega_f,
            keep_f: 1.0 - omega_f,
            omega_g,
            keep_g: 1.0 - omega_g,
        })
    }

    fn run_chunk(&self, p: &CollisionParams, ctx: &mut KernelContext<'_>) -> Result<()> {
        let vvl = ctx.vvl();
        let width = lane_width(vvl);
        for off in (0..vvl).step_by(width) {
            match width {
                16 => collide::<16>(p, ctx, off)?,
                8 => collide::<8>(p, ctx, off)?,
                4 => collide::<4>(p, ctx, off)?,
                2 => collide::<2>(p, ctx, off)?,
                _ => collide::<1>(p, ctx, off)?,
            }
        }
        Ok(())
    }
}

/// Collides `V` lanes starting `off` sites into the chunk.
#[inline(always)]
fn collide<const V: usize>(
    p: &CollisionParams,
    ctx: &mut KernelContext<'_>,
    off: usize,
) -> Result<()> {
    let mut f = [[0.0f64; V]; Q];
    let mut g = [[0.0f64; V]; Q];
    for i in 0..Q {
        f[i].copy_from_slice(&ctx.read(0, i)?[off..off + V]);
        g[i].copy_from_slice(&ctx.read(1, i)?[off..off + V]);
    }

    let mut rho = [0.0f64; V];
    let mut mx = [0.0f64; V];
    let mut my = [0.0f64; V];
    let mut mz = [0.0f64; V];
    let mut phi = [0.0f64; V];
    for i in 0..Q {
        for v in 0..V {
            rho[v] += f[i][v];
            mx[v] += f[i][v] * p.c[0][i];
            my[v] += f[i][v] * p.c[1][i];
            mz[v] += f[i][v] * p.c[2][i];
            phi[v] += g[i][v];
        }
    }

    let real = ctx.real_lanes(0)?;
    for v in 0..V {
        if off + v < real && !(rho[v] > 0.0) {
            return Err(Error::SingularState {
                site: ctx.base_index() + off + v,
                rho: rho[v],
            });
        }
    }

    let mut ux = [0.0f64; V];
    let mut uy = [0.0f64; V];
    let mut uz = [0.0f64; V];
    let mut uu = [0.0f64; V];
    for v in 0..V {
        ux[v] = mx[v] / rho[v];
        uy[v] = my[v] / rho[v];
        uz[v] = mz[v] / rho[v];
        uu[v] = ux[v] * ux[v] + uy[v] * uy[v] + uz[v] * uz[v];
    }

    for i in 0..Q {
        let (cx, cy, cz, w) = (p.c[0][i], p.c[1][i], p.c[2][i], p.w[i]);
        for v in 0..V {
            let cu = cx * ux[v] + cy * uy[v] + cz * uz[v];
            let b = p.k.bracket(cu, uu[v]);
            let feq = w * rho[v] * b;
            let geq = w * phi[v] * b;
            f[i][v] = p.keep_f * f[i][v] + p.omega_f * feq;
            g[i][v] = p.keep_g * g[i][v] + p.omega_g * geq;
        }
    }

    for i in 0..Q {
        ctx.write(0, i)?[off..off + V].copy_from_slice(&f[i]);
        ctx.write(1, i)?[off..off + V].copy_from_slice(&g[i]);
    }
    Ok(())
}
