use std::fs;
use std::path::Path;
use std::process::Command;

use kdvol::{Execution, Kernel, MultiIndex, ReferenceDistribution};
use kdvol_harness::config::{ExperimentConfig, FitSpec};
use kdvol_harness::plots::{emit_plots, plot_csv, plot_rows};
use kdvol_harness::report::{Axis, DeviationReport};
use kdvol_harness::run::{moments, simulate};

const SMALL: &str = r#"
mode = "rate_in_h"
replicates = 4
base_seed = 5
n_list = [300, 1000]

[distribution]
kind = "uniform_cube"
dim = 2

[h_grid]
l_n = 0.1
h_max = 0.4
count = 5

[x_grid]
step = 0.1
"#;

fn kdvol() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kdvol"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn simulate_is_byte_identical_across_runs_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let mut outputs = Vec::new();
    for (i, (threads, sequential)) in [("1", false), ("1", false), ("4", false), ("1", true)].iter().enumerate() {
        let out = tmp.path().join(format!("run{i}"));
        let mut cmd = kdvol();
        cmd.args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(&out);
        cmd.env("KDVOL_THREADS", threads);
        if *sequential {
            cmd.arg("--sequential");
        }
        let st = cmd.output().unwrap();
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
        outputs.push(read_all(&out));
    }
    let names: Vec<&str> = outputs[0].iter().map(|(n, _)| n.as_str()).collect();
    for f in ["report.json", "deviations.csv", "summary.csv", "plot_h.csv", "plot_h.svg"] {
        assert!(names.contains(&f), "missing {f}: {names:?}");
    }
    for o in &outputs[1..] {
        assert_eq!(&outputs[0], o);
    }
}

#[test]
fn seed_flag_changes_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let run = |seed: &str, out: &str| {
        let st = kdvol()
            .args(["simulate", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(tmp.path().join(out))
            .args(["--seed", seed])
            .output()
            .unwrap();
        assert!(st.status.success());
        fs::read(tmp.path().join(out).join("deviations.csv")).unwrap()
    };
    assert_ne!(run("1", "a"), run("2", "b"));
}

#[test]
fn fit_subcommand_reads_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    assert!(kdvol()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let st = kdvol().args(["fit", "--out"]).arg(&out).args(["--statistic", "mean"]).output().unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let fit: serde_json::Value = serde_json::from_slice(&st.stdout).unwrap();
    assert!(fit["slope"].as_f64().unwrap() < 0.0);
    assert_eq!(fit["points"].as_u64(), Some(5));
    assert!(out.join("fit.json").exists());
}

#[test]
fn errors_are_machine_readable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "mode = \"rate_in_h\"\nreplicates = 0\n[distribution]\nkind = \"uniform_cube\"\ndim = 1\n");
    let st = kdvol().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert!(!st.status.success());
    let v: serde_json::Value = serde_json::from_slice(&st.stderr).unwrap();
    assert_eq!(v["error"], "config");
    assert!(v["message"].as_str().unwrap().contains("replicates"));

    let missing = kdvol().args(["fit", "--out"]).arg(tmp.path().join("nowhere")).output().unwrap();
    assert!(!missing.status.success());
    let v: serde_json::Value = serde_json::from_slice(&missing.stderr).unwrap();
    assert_eq!(v["error"], "io");

    let st = kdvol()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .env("KDVOL_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!st.status.success());
}

#[test]
fn mode_subcommands_write_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
mode = "voldim"
n_list = [2000]
base_seed = 2

[distribution]
kind = "uniform_circle"
radius = 1.0

[h_grid]
values = [0.1, 0.2, 0.3, 0.4]

[covering]
hs = [0.2, 0.4]
eta_fractions = [0.2, 0.5]
q_n = 50
"#;
    let cfg = write_config(tmp.path(), text);
    for (cmd, file) in [
        ("voldim", "voldim.json"),
        ("bounds", "bounds.csv"),
        ("covering", "covering.csv"),
        ("moments", "moments.csv"),
    ] {
        let out = tmp.path().join(cmd);
        let st = kdvol().arg(cmd).arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap();
        assert!(st.status.success(), "{cmd}: {}", String::from_utf8_lossy(&st.stderr));
        assert!(out.join(file).exists(), "{cmd} did not write {file}");
    }
}

#[test]
fn atoms_sampled_exactly_give_zero_deviation() {
    let cfg = ExperimentConfig::from_toml(
        r#"
mode = "rate_in_h"
replicates = 3
n_list = [50]

[distribution]
kind = "point_masses"
locations = [[0.25, 0.5]]
weights = [1.0]

[h_grid]
values = [0.05, 0.1, 0.2, 0.4]
"#,
    )
    .unwrap();
    let r = simulate(&cfg, Execution::Parallel).unwrap();
    assert_eq!(r.cells.len(), 4);
    let k = Kernel::gaussian(2);
    for c in &r.cells {
        for v in &c.values {
            assert!(*v <= 1e-13 * k.sup_norm() / (c.h * c.h), "{v}");
        }
    }
}

#[test]
fn report_invariants() {
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let r = simulate(&cfg, Execution::Parallel).unwrap();
    assert!(r.failures.is_empty());
    assert_eq!(r.cells.len(), 10);
    assert_eq!(r.seeds, vec![5, 6, 7, 8]);
    for c in &r.cells {
        assert_eq!(c.values.len(), cfg.replicates);
        assert!(c.summary.q10 <= c.summary.median && c.summary.median <= c.summary.q90);
        for (v, rv) in c.values.iter().zip(&c.ray_values) {
            assert!(rv >= v);
        }
    }
    let text = kdvol_harness::json::to_string(&r);
    let back: DeviationReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, r);
}

#[test]
fn parallel_equals_serial_in_process() {
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let a = simulate(&cfg, Execution::Parallel).unwrap();
    let b = simulate(&cfg, Execution::Sequential).unwrap();
    let c = kdvol::par::with_threads(3, || simulate(&cfg, Execution::Parallel).unwrap());
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn plot_csv_header_and_svg() {
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let r = simulate(&cfg, Execution::Parallel).unwrap();
    let rows = plot_rows(&r, Axis::H, FitSpec::default()).unwrap();
    let csv = plot_csv(&rows, Axis::H);
    assert_eq!(csv.lines().next().unwrap(), "log_h,log_sup_mean,log_sup_median,fit_value");
    assert_eq!(csv.lines().count(), 6);
    let tmp = tempfile::tempdir().unwrap();
    emit_plots(&r, Axis::H, FitSpec::default(), tmp.path()).unwrap();
    let svg = fs::read_to_string(tmp.path().join("plot_h.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let opens = svg.matches('<').count();
    let self_closing = svg.matches("/>").count();
    let closing = svg.matches("</").count();
    // Each element is either self-closing or has exactly one closing tag.
    assert_eq!(opens, self_closing + 2 * closing);
}

#[test]
fn empty_axis_is_refused() {
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let mut r = simulate(&cfg, Execution::Parallel).unwrap();
    r.cells.clear();
    let err = plot_rows(&r, Axis::H, FitSpec::default()).unwrap_err();
    assert!(err.to_string().contains("no cells"));
}

#[test]
fn moment_mode_passes_oracle_values_through() {
    let cfg = ExperimentConfig::from_toml(
        r#"
mode = "moment_scaling"

[distribution]
kind = "uniform_circle"
radius = 1.0

[h_grid]
values = [0.1, 0.2, 0.3, 0.4]

[x_grid]
step = 0.1
"#,
    )
    .unwrap();
    let r = moments(&cfg, Execution::Parallel).unwrap();
    let dist = ReferenceDistribution::uniform_circle(1.0).unwrap();
    let k = Kernel::gaussian(2);
    let s = MultiIndex::zero(2);
    for row in &r.rows {
        let direct = dist.moment_k(&k, &row.argmax_x, row.h, 2.0, &s).unwrap();
        assert_eq!(direct, row.sup_moment);
    }
}
