//! Test-only oracles, written without the crate's kernel, model or copy code.
#![allow(dead_code, clippy::needless_range_loop)]

use lattice_dp::{BinaryFluidState, Field, LatticeShape, SiteMask};

pub const Q: usize = 19;

/// D3Q19 velocities in the crate's storage order (the order fixes the
/// summation order, which bitwise comparisons depend on).
pub const VELOCITIES: [[i32; 3]; Q] = [
    [0, 0, 0],
    [1, 0, 0],
    [-1, 0, 0],
    [0, 1, 0],
    [0, -1, 0],
    [0, 0, 1],
    [0, 0, -1],
    [1, 1, 0],
    [-1, -1, 0],
    [1, -1, 0],
    [-1, 1, 0],
    [1, 0, 1],
    [-1, 0, -1],
    [1, 0, -1],
    [-1, 0, 1],
    [0, 1, 1],
    [0, -1, -1],
    [0, 1, -1],
    [0, -1, 1],
];

/// Weights as integer numerators over 36, chosen by speed class.
pub fn weight_numerator(c: [i32; 3]) -> i64 {
    match c.iter().map(|x| x.abs()).sum::<i32>() {
        0 => 12,
        1 => 2,
        2 => 1,
        _ => unreachable!("not a D3Q19 velocity"),
    }
}

pub fn weight(c: [i32; 3]) -> f64 {
    match weight_numerator(c) {
        12 => 1.0 / 3.0,
        2 => 1.0 / 18.0,
        _ => 1.0 / 36.0,
    }
}

/// Straight scalar collision over a z/y/x triple loop, in place.
pub fn scalar_collision(state: &mut BinaryFluidState, tau_f: f64, tau_g: f64, cs2: f64) {
    let shape: LatticeShape = state.shape();
    let (nx, ny, nz) = (shape.nx(), shape.ny(), shape.nz());
    let mut f: Vec<Vec<f64>> = (0..Q).map(|i| state.f.component(i).to_vec()).collect();
    let mut g: Vec<Vec<f64>> = (0..Q).map(|i| state.g.component(i).to_vec()).collect();
    let inv_cs2 = 1.0 / cs2;
    let half_inv_cs2_sq = 0.5 * inv_cs2 * inv_cs2;
    let half_inv_cs2 = 0.5 * inv_cs2;
    let omega_f = 1.0 / tau_f;
    let keep_f = 1.0 - omega_f;
    let omega_g = 1.0 / tau_g;
    let keep_g = 1.0 - omega_g;

    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let s = (z * ny + y) * nx + x;
                let mut rho = 0.0;
                let mut m = [0.0f64; 3];
                let mut phi = 0.0;
                for i in 0..Q {
                    rho += f[i][s];
                    for a in 0..3 {
                        m[a] += f[i][s] * VELOCITIES[i][a] as f64;
                    }
                    phi += g[i][s];
                }
                assert!(rho > 0.0, "oracle hit singular site {s}");
                let u = [m[0] / rho, m[1] / rho, m[2] / rho];
                let uu = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
                for i in 0..Q {
                    let c = VELOCITIES[i];
                    let cu = c[0] as f64 * u[0] + c[1] as f64 * u[1] + c[2] as f64 * u[2];
                    let bracket =
                        1.0 + cu * inv_cs2 + cu * cu * half_inv_cs2_sq - uu * half_inv_cs2;
                    let w = weight(c);
                    let feq = w * rho * bracket;
                    let geq = w * phi * bracket;
                    f[i][s] = keep_f * f[i][s] + omega_f * feq;
                    g[i][s] = keep_g * g[i][s] + omega_g * geq;
                }
            }
        }
    }
    for i in 0..Q {
        state.f.component_mut(i).copy_from_slice(&f[i]);
        state.g.component_mut(i).copy_from_slice(&g[i]);
    }
}

/// Element-by-element masked copy: `dst(c, s) = src(c, s)` where the mask is set.
pub fn masked_copy_oracle(dst: &Field, src: &Field, mask: &SiteMask) -> Field {
    let mut out = dst.clone();
    let d = dst.descriptor();
    for c in 0..d.ncomp() {
        for s in 0..d.nsites() {
            if mask.flags()[s] {
                out.set(c, s, src.get(c, s).unwrap()).unwrap();
            }
        }
    }
    out
}

/// Per-site moments `(rho, m_x, m_y, m_z, phi)` summed in the given order.
pub fn site_moments(state: &BinaryFluidState, s: usize) -> [f64; 5] {
    let mut out = [0.0; 5];
    for i in 0..Q {
        let fi = state.f.component(i)[s];
        out[0] += fi;
        for a in 0..3 {
            out[1 + a] += fi * VELOCITIES[i][a] as f64;
        }
        out[4] += state.g.component(i)[s];
    }
    out
}

/// Condition scale of each moment: the sum of absolute terms.
pub fn site_moment_scales(state: &BinaryFluidState, s: usize) -> [f64; 5] {
    let mut out = [0.0; 5];
    for i in 0..Q {
        let fi = state.f.component(i)[s];
        out[0] += fi.abs();
        for a in 0..3 {
            out[1 + a] += (fi * VELOCITIES[i][a] as f64).abs();
        }
        out[4] += state.g.component(i)[s].abs();
    }
    out
}

/// Prints a criterion line and returns whether it passed.
pub fn report(name: &str, passed: bool, detail: impl std::fmt::Display) -> bool {
    println!(
        "[{}] {name}: {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    passed
}
