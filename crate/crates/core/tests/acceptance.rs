//! Acceptance suite. Each test prints one `[PASS]`/`[FAIL]` line; run with
//! `cargo test -p lattice-dp --test acceptance -- --nocapture` to see them.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use common::{report, VELOCITIES};
use lattice_dp::bench::{benchmark_run, report_best, BenchConfig, BenchResult};
use lattice_dp::kernels::d3q19::{CS2, WV};
use lattice_dp::kernels::run_collision;
use lattice_dp::verify::run_kernel;
use lattice_dp::{
    Backend, BinaryFluidState, Binding, D3Q19Model, Field, FieldDescriptor, Kernel, KernelContext,
    KernelId, LatticeShape, LaunchPlan, RunConfig, SiteMask, TargetDevice,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_607;

const DETERMINISM_BUDGET: Duration = Duration::from_secs(30);
const ORACLE_BUDGET: Duration = Duration::from_secs(5);
const CONSERVATION_BUDGET: Duration = Duration::from_secs(5);
const FIXED_POINT_BUDGET: Duration = Duration::from_secs(5);
const MASKED_BUDGET: Duration = Duration::from_secs(10);
const SWEEP_BUDGET: Duration = Duration::from_secs(120);
const CLI_BUDGET: Duration = Duration::from_secs(60);

const CONSERVATION_TOL: f64 = 1e-13;
const FIXED_POINT_TOL: f64 = 1e-13;
const MOMENT_TOL: f64 = 1e-15;

fn within(name: &str, start: Instant, budget: Duration) -> bool {
    let t = start.elapsed();
    let ok = t < budget;
    if !ok {
        println!("[FAIL] {name}: took {t:?}, budget {budget:?}");
    }
    ok
}

#[test]
fn determinism_across_backends_vvls_and_workers() {
    let start = Instant::now();
    let mut configs = 0;
    let mut mismatches = Vec::new();
    for kernel in [KernelId::Scale, KernelId::BinaryCollision] {
        for n in [8, 16] {
            let shape = LatticeShape::new(n, n, n).unwrap();
            let baseline = run_kernel(
                kernel,
                shape,
                SEED,
                &RunConfig::new(Backend::Reference, 1, 1),
                2,
            )
            .unwrap();
            for backend in Backend::ALL {
                for vvl in [1, 2, 4, 8] {
                    for workers in [1, 2, 4] {
                        let cfg = RunConfig::new(backend, vvl, workers);
                        let out = run_kernel(kernel, shape, SEED, &cfg, 2).unwrap();
                        configs += 1;
                        if !out.bitwise_eq(&baseline) {
                            mismatches.push(format!(
                                "{kernel}/{shape}/{backend}/vvl={vvl}/workers={workers}"
                            ));
                        }
                    }
                }
            }
        }
    }
    let in_time = within("determinism", start, DETERMINISM_BUDGET);
    let ok = report(
        "determinism",
        mismatches.is_empty() && configs == 144 && in_time,
        format!(
            "{configs} configurations, {} mismatches, {:.2?}",
            mismatches.len(),
            start.elapsed()
        ),
    );
    assert!(ok, "mismatches: {mismatches:?}");
}

#[test]
fn collision_matches_scalar_triple_loop() {
    let start = Instant::now();
    let shape = LatticeShape::new(8, 8, 8).unwrap();
    let model = D3Q19Model::with_tau(0.8, 1.25).unwrap();
    let initial = BinaryFluidState::random(shape, SEED, &model).unwrap();
    let steps = 5;

    let mut expected = initial.clone();
    for _ in 0..steps {
        common::scalar_collision(&mut expected, 0.8, 1.25, 1.0 / 3.0);
    }
    let mut failures = Vec::new();
    for backend in Backend::ALL {
        for vvl in [1, 8] {
            let out =
                run_collision(&initial, &model, &RunConfig::new(backend, vvl, 2), steps).unwrap();
            if !out.bitwise_eq(&expected) {
                failures.push(format!("{backend}/vvl={vvl}"));
            }
        }
    }
    let in_time = within("oracle-equivalence", start, ORACLE_BUDGET);
    let ok = report(
        "oracle-equivalence",
        failures.is_empty() && in_time,
        format!("8x8x8, {steps} steps, bitwise vs scalar loop; mismatches: {failures:?}"),
    );
    assert!(ok);
}

#[test]
fn collision_conserves_moments() {
    let start = Instant::now();
    let shape = LatticeShape::new(16, 16, 16).unwrap();
    let model = D3Q19Model::with_tau(0.8, 1.25).unwrap();
    let before = BinaryFluidState::random(shape, SEED + 1, &model).unwrap();
    let after =
        run_collision(&before, &model, &RunConfig::new(Backend::Threaded, 8, 2), 1).unwrap();

    let mut worst = 0.0f64;
    for s in 0..shape.nsites() {
        let m0 = common::site_moments(&before, s);
        let m1 = common::site_moments(&after, s);
        let scale = common::site_moment_scales(&before, s);
        for k in 0..5 {
            let e = (m1[k] - m0[k]).abs() / scale[k];
            worst = worst.max(if e.is_nan() { f64::INFINITY } else { e });
        }
    }
    let in_time = within("conservation", start, CONSERVATION_BUDGET);
    let ok = report(
        "conservation",
        worst <= CONSERVATION_TOL && in_time,
        format!("16x16x16, max relative change {worst:.3e} (tolerance {CONSERVATION_TOL:.0e})"),
    );
    assert!(ok);
}

#[test]
fn equilibrium_is_a_fixed_point() {
    let start = Instant::now();
    let shape = LatticeShape::new(8, 8, 8).unwrap();
    let model = D3Q19Model::with_tau(0.8, 1.25).unwrap();
    let u = [0.02, -0.01, 0.03];
    let (rho, phi) = (1.0, 0.3);

    // Equilibria built here from the closed form, not by the model.
    let mut st = BinaryFluidState::zeros(shape).unwrap();
    let uu = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    for (i, c) in VELOCITIES.iter().enumerate() {
        let cu = c[0] as f64 * u[0] + c[1] as f64 * u[1] + c[2] as f64 * u[2];
        let b = 1.0 + 3.0 * cu + 4.5 * cu * cu - 1.5 * uu;
        let w = common::weight(*c);
        st.f.component_mut(i).fill(w * rho * b);
        st.g.component_mut(i).fill(w * phi * b);
    }
    let mut worst = 0.0f64;
    for backend in Backend::ALL {
        let out = run_collision(&st, &model, &RunConfig::new(backend, 4, 2), 1).unwrap();
        worst = worst
            .max(out.f.max_abs_diff(&st.f).unwrap())
            .max(out.g.max_abs_diff(&st.g).unwrap());
    }
    let in_time = within("equilibrium-fixed-point", start, FIXED_POINT_BUDGET);
    let ok = report(
        "equilibrium-fixed-point",
        worst < FIXED_POINT_TOL && in_time,
        format!("max-abs change {worst:.3e} (tolerance {FIXED_POINT_TOL:.0e})"),
    );
    assert!(ok);
}

#[test]
fn d3q19_moment_identities() {
    let model = D3Q19Model::default();
    // Exact integer check of the test-side table: numerators over 36.
    let mut exact0 = 0i64;
    let mut exact2 = [[0i64; 3]; 3];
    for c in VELOCITIES {
        let w = common::weight_numerator(c);
        exact0 += w;
        for a in 0..3 {
            for b in 0..3 {
                exact2[a][b] += w * (c[a] * c[b]) as i64;
            }
        }
    }
    assert_eq!(exact0, 36);
    assert_eq!(exact2, [[12, 0, 0], [0, 12, 0], [0, 0, 12]]);

    // The crate's tables must match the oracle table entry for entry.
    let table_ok = (0..19)
        .all(|i| model.cv[i] == VELOCITIES[i] && model.wv[i] == common::weight(VELOCITIES[i]));

    let mut err0 = 0.0f64;
    let mut err1 = 0.0f64;
    let mut err2 = 0.0f64;
    let s0: f64 = WV.iter().sum();
    err0 = err0.max((s0 - 1.0).abs());
    for a in 0..3 {
        let s1: f64 = (0..19).map(|i| WV[i] * model.cv[i][a] as f64).sum();
        err1 = err1.max(s1.abs());
        for b in 0..3 {
            let s2: f64 = (0..19)
                .map(|i| WV[i] * (model.cv[i][a] * model.cv[i][b]) as f64)
                .sum();
            let target = if a == b { CS2 } else { 0.0 };
            err2 = err2.max((s2 - target).abs());
        }
    }
    let worst = err0.max(err1).max(err2);
    let ok = report(
        "d3q19-moments",
        table_ok && worst <= MOMENT_TOL,
        format!("sum w err {err0:.1e}, sum wc err {err1:.1e}, sum wcc err {err2:.1e} (tolerance {MOMENT_TOL:.0e})"),
    );
    assert!(ok);
}

fn random_field(rng: &mut ChaCha8Rng, desc: FieldDescriptor) -> Field {
    let mut f = Field::new(desc);
    f.fill(|_, _| rng.gen_range(-1.0e3..1.0e3));
    f
}

#[test]
fn masked_transfer_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut failures = Vec::new();
    let cases = 1000;
    for case in 0..cases {
        let nsites = rng.gen_range(1..=64);
        let ncomp: usize = [1, 3, 19][rng.gen_range(0..3)];
        let backend = Backend::ALL[case % 3];
        let desc = FieldDescriptor::new(LatticeShape::linear(nsites).unwrap(), ncomp).unwrap();
        let density: f64 = rng.gen();
        let mask = SiteMask::from_fn(nsites, |_| rng.gen_bool(density));
        let k = mask.flags().iter().filter(|&&b| b).count() as u64;

        let target_init = random_field(&mut rng, desc);
        let src = random_field(&mut rng, desc);
        let mut dev = TargetDevice::with_backend(backend);
        let buf = dev.malloc(desc).unwrap();
        dev.copy_to_target(buf, &target_init).unwrap();

        dev.reset_counters();
        dev.copy_to_target_masked(buf, &src, &mask).unwrap();
        let packed_to = dev.counters().last_packed_len;
        let mut on_target = Field::new(desc);
        dev.copy_from_target(&mut on_target, buf).unwrap();
        let expected = common::masked_copy_oracle(&target_init, &src, &mask);
        if !on_target.bitwise_eq(&expected) {
            failures.push(format!("case {case}: to-target content"));
        }

        let mut host = random_field(&mut rng, desc);
        let expected_host = common::masked_copy_oracle(&host, &on_target, &mask);
        dev.copy_from_target_masked(&mut host, buf, &mask).unwrap();
        let packed_from = dev.counters().last_packed_len;
        if !host.bitwise_eq(&expected_host) {
            failures.push(format!("case {case}: from-target content"));
        }
        if packed_to != k * ncomp as u64 || packed_from != k * ncomp as u64 {
            failures.push(format!(
                "case {case}: packed {packed_to}/{packed_from}, expected {}",
                k * ncomp as u64
            ));
        }
        let c = dev.counters();
        if c.pack_phases != 2 || c.unpack_phases != 2 {
            failures.push(format!(
                "case {case}: phases {}/{}",
                c.pack_phases, c.unpack_phases
            ));
        }
        dev.free(buf).unwrap();
    }

    // 7 of 20 sites with 19 components packs 133 doubles.
    let desc = FieldDescriptor::new(LatticeShape::linear(20).unwrap(), 19).unwrap();
    let mut dev = TargetDevice::with_backend(Backend::Emulated);
    let buf = dev.malloc(desc).unwrap();
    let mask = SiteMask::from_fn(20, |s| s % 3 == 0);
    assert_eq!(mask.included_count(), 7);
    dev.copy_to_target_masked(buf, &Field::new(desc), &mask)
        .unwrap();
    let example_ok = dev.counters().last_packed_len == 133u64;

    let in_time = within("masked-transfer", start, MASKED_BUDGET);
    let ok = report(
        "masked-transfer",
        failures.is_empty() && example_ok && in_time,
        format!(
            "{cases} random cases, {} failures, 7/20 sites x 19 packs 133: {example_ok}",
            failures.len()
        ),
    );
    assert!(ok, "{failures:?}");
}

/// Copies argument 0 into argument 1.
struct Probe;

impl Kernel for Probe {
    type Params = usize;

    fn name(&self) -> &'static str {
        "probe"
    }

    fn bind(
        &self,
        _: &lattice_dp::ConstantBlock,
        args: &[lattice_dp::BoundBuffer],
    ) -> lattice_dp::Result<usize> {
        Ok(args[0].desc.ncomp())
    }

    fn run_chunk(&self, ncomp: &usize, ctx: &mut KernelContext) -> lattice_dp::Result<()> {
        for c in 0..*ncomp {
            let input = ctx.read(0, c)?.to_vec();
            ctx.write(1, c)?.copy_from_slice(&input);
        }
        Ok(())
    }
}

#[test]
fn emulated_target_is_isolated_from_host() {
    let desc = FieldDescriptor::new(LatticeShape::new(4, 4, 4).unwrap(), 3).unwrap();
    let mut host = Field::new(desc);
    host.fill(|c, s| 1.0 + (c * 100 + s) as f64);

    let mut dev = TargetDevice::with_backend(Backend::Emulated);
    let plan = LaunchPlan::for_descriptor(&desc, 4).unwrap();

    // Never copied: the kernel sees zeros.
    let input = dev.malloc(desc).unwrap();
    let output = dev.malloc(desc).unwrap();
    dev.launch(
        &Probe,
        &plan,
        &[Binding::read(input), Binding::read_write(output)],
    )
    .unwrap();
    dev.sync().unwrap();
    let mut seen = host.clone();
    dev.copy_from_target(&mut seen, output).unwrap();
    let fresh_zero = seen.raw_values_all_zero();

    // A recycled allocation holds no trace of earlier host data.
    dev.copy_to_target(input, &host).unwrap();
    dev.free(input).unwrap();
    let again = dev.malloc(desc).unwrap();
    dev.launch(
        &Probe,
        &plan,
        &[Binding::read(again), Binding::read_write(output)],
    )
    .unwrap();
    dev.sync().unwrap();
    let mut seen2 = host.clone();
    dev.copy_from_target(&mut seen2, output).unwrap();
    let reused_zero = seen2.raw_values_all_zero();

    // Host edits after a copy are not visible on the target.
    dev.copy_to_target(again, &host).unwrap();
    host.fill(|_, _| -7.0);
    dev.launch(
        &Probe,
        &plan,
        &[Binding::read(again), Binding::read_write(output)],
    )
    .unwrap();
    dev.sync().unwrap();
    let mut seen3 = Field::new(desc);
    dev.copy_from_target(&mut seen3, output).unwrap();
    let snapshot = seen3.get(2, 5).unwrap() == 1.0 + 205.0;

    let ok = report(
        "isolation",
        fresh_zero && reused_zero && snapshot,
        format!("fresh buffer zero: {fresh_zero}, recycled buffer zero: {reused_zero}, copy is a snapshot: {snapshot}"),
    );
    assert!(ok);
}

trait AllZero {
    fn raw_values_all_zero(&self) -> bool;
}

impl AllZero for Field {
    fn raw_values_all_zero(&self) -> bool {
        let d = *self.descriptor();
        (0..d.ncomp()).all(|c| {
            self.component(c)
                .iter()
                .all(|&v| v == 0.0 && v.is_sign_positive())
        })
    }
}

fn sweep(
    kernel: KernelId,
    shape: LatticeShape,
    vvls: &[usize],
    workers: &[usize],
    iters: usize,
) -> Vec<BenchResult> {
    let mut out = Vec::new();
    for &w in workers {
        for &vvl in vvls {
            out.push(
                benchmark_run(&BenchConfig {
                    kernel,
                    shape,
                    run: RunConfig::new(Backend::Threaded, vvl, w),
                    iterations: iters,
                    seed: SEED,
                })
                .unwrap(),
            );
        }
    }
    out
}

#[test]
fn sweep_report_and_informational_throughput() {
    let start = Instant::now();

    // (a) Report shape on a small lattice: one row per VVL per backend,
    // then a best-VVL line with the speedup over VVL=1.
    let shape = LatticeShape::new(16, 16, 16).unwrap();
    let vvls = [1, 2, 4, 8, 16];
    let mut rows = Vec::new();
    for backend in Backend::ALL {
        for &vvl in &vvls {
            rows.push(
                benchmark_run(&BenchConfig {
                    kernel: KernelId::BinaryCollision,
                    shape,
                    run: RunConfig::new(backend, vvl, 2),
                    iterations: 3,
                    seed: SEED,
                })
                .unwrap(),
            );
        }
    }
    let best = report_best(&rows).unwrap();
    let rows_ok = rows
        .iter()
        .all(|r| r.sites_per_s.is_finite() && r.sites_per_s > 0.0)
        && rows.len() == 15;
    let summary_ok = best.len() == 3
        && best.iter().all(|b| {
            let line = b.to_string();
            vvls.contains(&b.best_vvl)
                && b.speedup >= 1.0
                && line.contains("best VVL=")
                && line.contains("over VVL=1")
        });
    for b in &best {
        println!("    {b}");
    }

    // (b) Informational only: 128^3 collision on the threaded backend.
    let big = LatticeShape::new(128, 128, 128).unwrap();
    let by_vvl = sweep(KernelId::BinaryCollision, big, &[1, 2, 4, 8, 16], &[1], 2);
    let base = by_vvl[0].sites_per_s;
    let best_row = by_vvl
        .iter()
        .max_by(|a, b| a.sites_per_s.total_cmp(&b.sites_per_s))
        .unwrap();
    let vvl_ratio = best_row.sites_per_s / base;
    let by_workers = sweep(KernelId::BinaryCollision, big, &[best_row.vvl], &[1, 4], 2);
    let worker_ratio = by_workers[1].sites_per_s / by_workers[0].sites_per_s;
    let cores = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    println!(
        "    info 128x128x128 collision/threaded: best VVL={} at {:.2}x over VVL=1 (target >= 1.0x: {}); \
         workers=4 at {:.2}x over workers=1 (target >= 1.5x: {}); host has {cores} core(s)",
        best_row.vvl,
        vvl_ratio,
        if vvl_ratio >= 1.0 { "met" } else { "not met" },
        worker_ratio,
        if worker_ratio >= 1.5 { "met" } else { "not met" },
    );

    let in_time = within("sweep-report", start, SWEEP_BUDGET);
    let ok = report(
        "sweep-report",
        rows_ok && summary_ok && in_time,
        format!(
            "{} rows, {} best-VVL lines, {:.1?}",
            rows.len(),
            best.len(),
            start.elapsed()
        ),
    );
    assert!(ok);
}

fn bench(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(args)
        .output()
        .expect("bench binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn cli_contract() {
    let start = Instant::now();

    let (code, stdout, _) = bench(&[
        "--kernel",
        "scale",
        "--shape",
        "16x16x16",
        "--vvl",
        "1,2,4,8",
        "--workers",
        "1,4",
        "--backend",
        "threaded",
        "--iters",
        "100",
        "--csv",
    ]);
    let lines: Vec<&str> = stdout.lines().filter(|l| !l.is_empty()).collect();
    let rows = lines.len().saturating_sub(1);
    let csv_ok = code == 0 && lines.first().is_some_and(|h| h.starts_with("kernel,")) && rows == 8;

    let (code, stdout, _) = bench(&[
        "--verify",
        "--kernel",
        "binary-collision",
        "--shape",
        "8x8x8",
    ]);
    let verify_ok = code == 0
        && stdout.lines().any(|l| l.starts_with("PASS equivalence"))
        && stdout.lines().any(|l| l.starts_with("PASS conservation"))
        && !stdout.contains("FAIL");

    let (code, _, stderr) = bench(&["--vvl", "3", "--shape", "8x8x8"]);
    let reject_ok = code == 2 && stderr.contains("VVL must divide padded extent");

    let in_time = within("cli-contract", start, CLI_BUDGET);
    let ok = report(
        "cli-contract",
        csv_ok && verify_ok && reject_ok && in_time,
        format!("csv rows {rows} (want 8): {csv_ok}; verify: {verify_ok}; vvl=3 rejected with exit 2: {reject_ok}"),
    );
    assert!(ok);
}
