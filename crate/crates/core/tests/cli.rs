//! End-to-end runs of the command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use demkit::cli::{run, EXIT_IMPOSSIBLE, EXIT_MISMATCH, EXIT_OK, EXIT_USAGE};
use demkit::dem::parse_dem;
use demkit::sampling::{read_shots_binary, read_shots_text};
use demkit::{Dem, EstimatedDem};
use tempfile::TempDir;

fn demkit(args: &[&str]) -> i32 {
    run(std::iter::once("demkit").chain(args.iter().copied()))
}

struct Workspace(TempDir);

impl Workspace {
    fn new() -> Self {
        Self(tempfile::tempdir().unwrap())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_owned()
    }

    fn write(&self, name: &str, text: &str) -> String {
        fs::write(self.path(name), text).unwrap();
        self.arg(name)
    }
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap()
}

const R2: &str = "detectors 2\nerror(0.1) D0\nerror(0.2) D1\nerror(0.05) D0 D1\n";

#[test]
fn gen_uniform_depolarizing() {
    let ws = Workspace::new();
    assert_eq!(
        demkit(&[
            "gen",
            "--n",
            "4",
            "--uniform-eps",
            "0.08",
            "--out",
            &ws.arg("u.dem")
        ]),
        EXIT_OK
    );
    let dem = parse_dem(read(&ws.path("u.dem")).as_bytes()).unwrap();
    assert_eq!(dem.len(), 15);
    assert!(dem
        .events()
        .iter()
        .all(|e| (e.probability - 0.005).abs() < 1e-15));
}

#[test]
fn gen_empty_and_deterministic() {
    let ws = Workspace::new();
    assert_eq!(
        demkit(&[
            "gen",
            "--n",
            "60",
            "--events",
            "0",
            "--out",
            &ws.arg("e.dem")
        ]),
        EXIT_OK
    );
    let text = read(&ws.path("e.dem"));
    assert!(text.starts_with("# gen n=60"));
    assert_eq!(parse_dem(text.as_bytes()).unwrap().len(), 0);

    let args = |out: &str| {
        vec![
            "gen", "--n", "30", "--events", "12", "--seed", "9", "--out", out,
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>()
    };
    for out in ["a.dem", "b.dem"] {
        let a = args(&ws.arg(out));
        assert_eq!(
            demkit(&a.iter().map(String::as_str).collect::<Vec<_>>()),
            EXIT_OK
        );
    }
    assert_eq!(
        fs::read(ws.path("a.dem")).unwrap(),
        fs::read(ws.path("b.dem")).unwrap()
    );
}

#[test]
fn gen_rejects_infeasible_parameters() {
    assert_eq!(
        demkit(&["gen", "--n", "3", "--events", "100", "--max-weight", "1"]),
        EXIT_USAGE
    );
    assert_eq!(
        demkit(&["gen", "--n", "4", "--uniform-eps", "0.1", "--events", "3"]),
        EXIT_USAGE
    );
}

#[test]
fn sample_formats_agree() {
    let ws = Workspace::new();
    let empty = ws.write("empty.dem", "detectors 5\n");
    assert_eq!(
        demkit(&[
            "sample",
            "--dem",
            &empty,
            "--shots",
            "3",
            "--format",
            "txt",
            "--out",
            &ws.arg("z.txt")
        ]),
        EXIT_OK
    );
    assert_eq!(read(&ws.path("z.txt")), "00000\n".repeat(3));

    let r2 = ws.write("r2.dem", R2);
    for (fmt, out) in [("txt", "s.txt"), ("bin", "s.bin")] {
        let code = demkit(&[
            "sample",
            "--dem",
            &r2,
            "--shots",
            "5000",
            "--seed",
            "4",
            "--format",
            fmt,
            "--out",
            &ws.arg(out),
        ]);
        assert_eq!(code, EXIT_OK);
    }
    let txt = read_shots_text(read(&ws.path("s.txt")).as_bytes(), None).unwrap();
    let bin = read_shots_binary(&fs::read(ws.path("s.bin")).unwrap()[..]).unwrap();
    assert_eq!(txt, bin);
    assert_eq!(
        demkit(&["sample", "--dem", &ws.arg("missing.dem"), "--shots", "3"]),
        EXIT_USAGE
    );
}

#[test]
fn r2_pipeline() {
    let ws = Workspace::new();
    let r2 = ws.write("r2.dem", R2);
    let shots = ws.arg("r2.bin");
    assert_eq!(
        demkit(&[
            "sample", "--dem", &r2, "--shots", "1000000", "--seed", "2", "--format", "bin",
            "--out", &shots
        ]),
        EXIT_OK
    );

    let est = ws.arg("exact.dem");
    assert_eq!(
        demkit(&["estimate", "--data", &shots, "--method", "exact", "--out", &est]),
        EXIT_OK
    );
    let text = read(Path::new(&est));
    assert!(text
        .starts_with("# demkit estimate method=exact detectors=2 shots=1000000\n# significance=5"));
    let parsed = EstimatedDem::read(text.as_bytes()).unwrap();
    assert_eq!(parsed.events().len(), 3);
    let truth = parse_dem(R2.as_bytes()).unwrap();
    for ev in truth.events() {
        let e = parsed.get(&ev.mask).unwrap();
        assert!((e.probability - ev.probability).abs() <= 5.0 * e.probability_std_error);
    }

    let report = ws.arg("report.txt");
    assert_eq!(
        demkit(&["compare", "--true", &r2, "--est", &est, "--out", &report]),
        EXIT_OK
    );
    let report = read(Path::new(&report));
    assert!(report.contains("n_missing=0\n") && report.contains("n_spurious=0\n"));
    let max_z: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("max_error_in_stderr="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(max_z <= 5.0);

    let pij = ws.arg("pij.txt");
    assert_eq!(
        demkit(&["estimate", "--data", &shots, "--method", "pij", "--out", &pij]),
        EXIT_OK
    );
    let line = read(Path::new(&pij))
        .lines()
        .find(|l| l.starts_with("pij i=0 j=1 "))
        .unwrap()
        .to_owned();
    let field = |k: &str| -> f64 {
        line.split_whitespace()
            .find_map(|kv| kv.strip_prefix(k))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((field("value=") - 0.05).abs() <= 5.0 * field("stderr="));

    let total = ws.arg("total.txt");
    assert_eq!(
        demkit(&[
            "estimate",
            "--data",
            &shots,
            "--method",
            "total-attenuation",
            "--mc-samples",
            "0",
            "--out",
            &total
        ]),
        EXIT_OK
    );
    let a0: f64 = read(Path::new(&total))
        .lines()
        .find_map(|l| l.strip_prefix("a0="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((a0 - truth.total_attenuation().unwrap().0).abs() < 0.01);

    let low = ws.arg("low.dem");
    assert_eq!(
        demkit(&[
            "estimate",
            "--data",
            &shots,
            "--method",
            "lowweight",
            "--wmax",
            "2",
            "--out",
            &low
        ]),
        EXIT_OK
    );
    assert_eq!(demkit(&["compare", "--true", &r2, "--est", &low]), EXIT_OK);
}

#[test]
fn compare_exit_codes() {
    let ws = Workspace::new();
    let r2 = ws.write("r2.dem", R2);
    assert_eq!(demkit(&["compare", "--true", &r2, "--est", &r2]), EXIT_OK);
    let one = ws.write("one.dem", "detectors 2\nerror(0.1) D0\n");
    let none = ws.write("none.dem", "detectors 2\n");
    assert_eq!(
        demkit(&["compare", "--true", &one, "--est", &none]),
        EXIT_MISMATCH
    );
    let wide = ws.write("wide.dem", "detectors 3\n");
    assert_eq!(
        demkit(&["compare", "--true", &one, "--est", &wide]),
        EXIT_USAGE
    );
}

#[test]
fn estimate_exit_codes() {
    let ws = Workspace::new();
    let noisy = ws.write(
        "noisy.dem",
        "detectors 3\nerror(0.49) D0\nerror(0.49) D1\nerror(0.49) D2\n",
    );
    let shots = ws.arg("noisy.txt");
    assert_eq!(
        demkit(&["sample", "--dem", &noisy, "--shots", "1000", "--out", &shots]),
        EXIT_OK
    );
    assert_eq!(
        demkit(&["estimate", "--data", &shots, "--method", "exact"]),
        EXIT_IMPOSSIBLE
    );
    assert_eq!(
        demkit(&["estimate", "--data", &shots, "--method", "pij"]),
        EXIT_IMPOSSIBLE
    );

    let wide = ws.write("wide.dem", "detectors 30\nerror(0.01) D0 D29\n");
    let wide_shots = ws.arg("wide.txt");
    assert_eq!(
        demkit(&[
            "sample",
            "--dem",
            &wide,
            "--shots",
            "100",
            "--out",
            &wide_shots
        ]),
        EXIT_OK
    );
    assert_eq!(
        demkit(&["estimate", "--data", &wide_shots, "--method", "exact"]),
        EXIT_USAGE
    );
    assert_eq!(
        demkit(&["estimate", "--data", &wide_shots, "--method", "nonsense"]),
        EXIT_USAGE
    );
}

#[test]
fn pipeline_is_reproducible_across_thread_counts() {
    let ws = Workspace::new();
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let dem = ws.arg(&format!("t{threads}.dem"));
        let shots = ws.arg(&format!("t{threads}.bin"));
        let est = ws.arg(&format!("t{threads}.est"));
        let report = ws.arg(&format!("t{threads}.txt"));
        let gen = [
            "--threads",
            threads,
            "gen",
            "--n",
            "24",
            "--events",
            "12",
            "--max-weight",
            "3",
            "--seed",
            "5",
            "--out",
            &dem,
        ];
        assert_eq!(demkit(&gen), EXIT_OK);
        let sample = [
            "--threads",
            threads,
            "sample",
            "--dem",
            &dem,
            "--shots",
            "200000",
            "--seed",
            "5",
            "--format",
            "bin",
            "--out",
            &shots,
        ];
        assert_eq!(demkit(&sample), EXIT_OK);
        let estimate = [
            "--threads",
            threads,
            "estimate",
            "--data",
            &shots,
            "--method",
            "lattice",
            "--wmax",
            "3",
            "--out",
            &est,
        ];
        assert_eq!(demkit(&estimate), EXIT_OK);
        let code = demkit(&[
            "--threads",
            threads,
            "compare",
            "--true",
            &dem,
            "--est",
            &est,
            "--out",
            &report,
        ]);
        assert!(code == EXIT_OK || code == EXIT_MISMATCH);
        outputs.push([dem, shots, est, report].map(|p| fs::read(p).unwrap()));
    }
    assert!(outputs[0] == outputs[1]);
}

#[test]
fn outputs_reparse_to_equal_objects() {
    let ws = Workspace::new();
    let dem = ws.arg("g.dem");
    assert_eq!(
        demkit(&["gen", "--n", "12", "--events", "8", "--seed", "1", "--out", &dem]),
        EXIT_OK
    );
    let parsed: Dem = parse_dem(read(Path::new(&dem)).as_bytes()).unwrap();
    let mut again = Vec::new();
    demkit::dem::write_dem(&parsed, &mut again).unwrap();
    assert_eq!(parse_dem(&again[..]).unwrap(), parsed);

    let shots = ws.arg("g.txt");
    assert_eq!(
        demkit(&["sample", "--dem", &dem, "--shots", "50000", "--seed", "1", "--out", &shots]),
        EXIT_OK
    );
    let est = ws.arg("g.est");
    assert_eq!(
        demkit(&[
            "estimate", "--data", &shots, "--method", "exact", "--error", "delta", "--out", &est
        ]),
        EXIT_OK
    );
    let first = EstimatedDem::read(read(Path::new(&est)).as_bytes()).unwrap();
    let mut rewritten = Vec::new();
    first.write(&[], &mut rewritten).unwrap();
    let second = EstimatedDem::read(&rewritten[..]).unwrap();
    for e in first.events() {
        let s = second.get(&e.mask).unwrap();
        assert_eq!(s.attenuation.value, e.attenuation.value);
        assert!(
            (s.attenuation.std_error - e.attenuation.std_error).abs()
                <= 1e-6 * e.attenuation.std_error
        );
    }
}
