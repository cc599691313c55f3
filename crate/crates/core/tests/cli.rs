use std::fs::File;

use lattice_dp::bench::{parse_csv, CSV_HEADER};
use lattice_dp::cli::{cli_main, EXIT_CONFIG, EXIT_OK};
use lattice_dp::{Field, LatticeShape, DEFAULT_PAD_MULTIPLE};

fn run(args: &[&str]) -> (i32, String, String) {
    let argv = std::iter::once("bench").chain(args.iter().copied());
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli_main(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

#[test]
fn csv_to_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let (code, stdout, _) = run(&[
        "--kernel",
        "binary-collision",
        "--shape",
        "8x4x4",
        "--vvl",
        "1,4",
        "--workers",
        "1,2",
        "--backend",
        "emulated",
        "--iters",
        "2",
        "--csv",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    // Table and summary still go to stdout when the CSV goes to a file.
    assert!(stdout.contains("best VVL="));
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some(CSV_HEADER));
    let rows = parse_csv(&text).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows
        .iter()
        .all(|r| r.shape == LatticeShape::new(8, 4, 4).unwrap() && r.iterations == 2));
    assert_eq!(
        rows.iter().map(|r| (r.workers, r.vvl)).collect::<Vec<_>>(),
        [(1, 1), (1, 4), (2, 1), (2, 4)]
    );
}

#[test]
fn verify_dump_writes_readable_fields() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = run(&[
        "--verify",
        "--kernel",
        "binary-collision",
        "--shape",
        "4x4x2",
        "--iters",
        "1",
        "--dump",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{stdout}");
    let f = Field::read_dump(
        File::open(dir.path().join("f.bin")).unwrap(),
        DEFAULT_PAD_MULTIPLE,
    )
    .unwrap();
    let g = Field::read_dump(
        File::open(dir.path().join("g.bin")).unwrap(),
        DEFAULT_PAD_MULTIPLE,
    )
    .unwrap();
    let obs = Field::read_dump(
        File::open(dir.path().join("observables.bin")).unwrap(),
        DEFAULT_PAD_MULTIPLE,
    )
    .unwrap();
    assert_eq!(f.descriptor().ncomp(), 19);
    assert_eq!(g.descriptor().ncomp(), 19);
    assert_eq!(obs.descriptor().ncomp(), 5);
    assert_eq!(f.descriptor().nsites(), 32);
    // Density is the first observable and is the sum of f.
    for s in 0..32 {
        let rho: f64 = (0..19).map(|i| f.get(i, s).unwrap()).sum();
        assert!((obs.get(0, s).unwrap() - rho).abs() <= 1e-14);
    }
}

#[test]
fn scale_verify_dumps_one_field() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = run(&[
        "--verify",
        "--kernel",
        "scale",
        "--shape",
        "4x4x4",
        "--iters",
        "1",
        "--dump",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(stdout.lines().any(|l| l.starts_with("PASS oracle")));
    let field = Field::read_dump(File::open(dir.path().join("field.bin")).unwrap(), 8).unwrap();
    assert_eq!(field.descriptor().ncomp(), 3);
}

#[test]
fn configuration_errors_exit_two() {
    for args in [
        &["--shape", "8x8"][..],
        &["--shape", "0x8x8"],
        &["--vvl", "0"],
        &["--workers", "0"],
        &["--backend", "gpu"],
        &["--kernel", "stream"],
        &["--iters", "0"],
        &["--bogus"],
    ] {
        let (code, _, err) = run(args);
        assert_eq!(code, EXIT_CONFIG, "{args:?}");
        assert!(!err.is_empty(), "{args:?} printed no diagnostic");
    }
}
