//! Verification suites run by `bench --verify`.

use crate::error::Result;
use crate::kernels::d3q19::Q;
use crate::kernels::{run_collision, run_scale, BinaryFluidState, D3Q19Model, KernelId, RunConfig};
use crate::lattice::{Field, FieldDescriptor, LatticeShape};
use crate::memory::Backend;

/// Relative tolerance for conserved moments across one collision.
pub const CONSERVATION_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Output of one kernel application, for bitwise comparison.
#[derive(Debug, Clone)]
pub enum KernelOutput {
    Scale(Field),
    Collision(BinaryFluidState),
}

impl KernelOutput {
    pub fn bitwise_eq(&self, other: &KernelOutput) -> bool {
        match (self, other) {
            (KernelOutput::Scale(a), KernelOutput::Scale(b)) => a.bitwise_eq(b),
            (KernelOutput::Collision(a), KernelOutput::Collision(b)) => a.bitwise_eq(b),
            _ => false,
        }
    }
}

/// Deterministic random 3-vector field for the scale kernel.
pub fn random_vector_field(shape: LatticeShape, seed: u64) -> Result<Field> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut f = Field::new(FieldDescriptor::new(shape, 3)?);
    f.fill(|_, _| rng.gen_range(-10.0..10.0));
    Ok(f)
}

/// Scale factor used by the verification runs.
pub const VERIFY_SCALE_FACTOR: f64 = 0.37;

/// Applies `kernel` `steps` times to its seeded random state under `cfg`.
pub fn run_kernel(
    kernel: KernelId,
    shape: LatticeShape,
    seed: u64,
    cfg: &RunConfig,
    steps: usize,
) -> Result<KernelOutput> {
    Ok(match kernel {
        KernelId::Scale => {
            let f = random_vector_field(shape, seed)?;
            KernelOutput::Scale(run_scale(&f, VERIFY_SCALE_FACTOR, cfg, steps)?)
        }
        KernelId::BinaryCollision => {
            let model = D3Q19Model::default();
            let st = BinaryFluidState::random(shape, seed, &model)?;
            KernelOutput::Collision(run_collision(&st, &model, cfg, steps)?)
        }
    })
}

/// Runs every `backend x vvl x workers` configuration and compares each
/// against the reference backend at VVL=1 with one worker, bit for bit.
pub fn equivalence_suite(
    kernel: KernelId,
    shape: LatticeShape,
    seed: u64,
    vvls: &[usize],
    workers: &[usize],
    tpb: usize,
) -> Result<CheckOutcome> {
    let steps = 2;
    let baseline = run_kernel(
        kernel,
        shape,
        seed,
        &RunConfig::new(Backend::Reference, 1, 1),
        steps,
    )?;
    let mut configs = 0;
    let mut mismatches = Vec::new();
    for backend in Backend::ALL {
        for &w in workers {
            for &vvl in vvls {
                let cfg = RunConfig {
                    tpb,
                    ..RunConfig::new(backend, vvl, w)
                };
                let out = run_kernel(kernel, shape, seed, &cfg, steps)?;
                configs += 1;
                if !out.bitwise_eq(&baseline) {
                    mismatches.push(format!("{backend}/vvl={vvl}/workers={w}"));
                }
            }
        }
    }
    Ok(CheckOutcome {
        name: "equivalence",
        passed: mismatches.is_empty(),
        detail: if mismatches.is_empty() {
            format!("{kernel} on {shape}: {configs} configurations bitwise identical")
        } else {
            format!("{kernel} on {shape}: mismatch in {}", mismatches.join(", "))
        },
    })
}

/// Largest relative change of `rho`, momentum and `phi` over all sites.
///
/// Each change is measured against the sum of absolute terms of that moment
/// before the step, which bounds its rounding error.
pub fn max_conservation_error(
    before: &BinaryFluidState,
    after: &BinaryFluidState,
    model: &D3Q19Model,
) -> f64 {
    let mut worst = 0.0f64;
    for s in 0..before.shape().nsites() {
        let (f0, f1) = (before.f_site(s), after.f_site(s));
        let (g0, g1) = (before.g_site(s), after.g_site(s));
        let mut rel = |a: f64, b: f64, scale: f64| {
            let e = if scale == 0.0 {
                (a - b).abs()
            } else {
                (a - b).abs() / scale
            };
            worst = worst.max(if e.is_nan() { f64::INFINITY } else { e });
        };
        let sum = |x: &[f64; Q]| x.iter().fold(0.0, |a, b| a + b);
        let abs_sum = |x: &[f64; Q]| x.iter().fold(0.0, |a, b| a + b.abs());
        rel(sum(&f0), sum(&f1), abs_sum(&f0));
        rel(sum(&g0), sum(&g1), abs_sum(&g0));
        for a in 0..3 {
            let mom =
                |x: &[f64; Q]| (0..Q).fold(0.0, |acc, i| acc + x[i] * f64::from(model.cv[i][a]));
            let scale = (0..Q).fold(0.0, |acc, i| {
                acc + (f0[i] * f64::from(model.cv[i][a])).abs()
            });
            rel(mom(&f0), mom(&f1), scale);
        }
    }
    worst
}

/// One collision on the seeded random state must conserve rho, momentum and phi.
pub fn conservation_check(shape: LatticeShape, seed: u64, cfg: &RunConfig) -> Result<CheckOutcome> {
    let model = D3Q19Model::with_tau(0.8, 1.25)?;
    let st = BinaryFluidState::random(shape, seed, &model)?;
    let out = run_collision(&st, &model, cfg, 1)?;
    let err = max_conservation_error(&st, &out, &model);
    Ok(CheckOutcome {
        name: "conservation",
        passed: err <= CONSERVATION_TOL,
        detail: format!("max relative moment change {err:.3e} (tolerance {CONSERVATION_TOL:.0e})"),
    })
}

/// Scale output must equal `a * x` element by element, bit for bit.
pub fn scale_oracle_check(shape: LatticeShape, seed: u64, cfg: &RunConfig) -> Result<CheckOutcome> {
    let input = random_vector_field(shape, seed)?;
    let out = run_scale(&input, VERIFY_SCALE_FACTOR, cfg, 1)?;
    let mut expected = input.clone();
    for c in 0..3 {
        for v in expected.component_mut(c) {
            *v *= VERIFY_SCALE_FACTOR;
        }
    }
    let passed = out.bitwise_eq(&expected);
    Ok(CheckOutcome {
        name: "oracle",
        passed,
        detail: format!(
            "scale on {shape} {} the per-element product",
            if passed { "matches" } else { "differs from" }
        ),
    })
}
