use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn hypctl(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypctl"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn hypctl")
}

fn table(path: &Path) -> toml::Table {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    text.parse().unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn float(t: &toml::Table, key: &str) -> f64 {
    t.get(key)
        .and_then(toml::Value::as_float)
        .unwrap_or_else(|| panic!("missing float `{key}`"))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn sir_age_condition_report() {
    let dir = TempDir::new().unwrap();
    let o = hypctl(&["check-condition", "--system", "sir-age"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = table(&dir.path().join("report.toml"));
    assert_eq!(r["eta"].as_str(), Some("-x1"));
    assert!((float(&r, "c0") - 1.0).abs() < 1e-12);
    assert!((float(&r, "T0") - 1.0).abs() < 1e-12);
    assert_eq!(r["certified"].as_bool(), Some(true));
}

#[test]
fn scalar_transport_control_reaches_target() {
    let dir = TempDir::new().unwrap();
    let o = hypctl(&["control", "--system", "scalar-transport", "--T", "1.5"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = table(&dir.path().join("report.toml"));
    assert!(float(&r, "residual") <= 1e-8, "{}", float(&r, "residual"));
    assert!(dir.path().join("control_u.csv").exists());
    assert!(dir.path().join("control_v.csv").exists());
}

#[test]
fn asymmetric_config_names_symmetry_invariant() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("asym.toml");
    fs::write(
        &cfg,
        "label = \"asym\"\nstate_dim = 2\nspace_dim = 1\n\n[domain]\nlo = [0.0]\nhi = [1.0]\n\n\
         [[a]]\nentries = [[[1.0], [0.5]], [[0.0], [2.0]]]\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = hypctl(&["validate", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("A_i symmetry"), "{}", stderr(&o));
    let m = table(&out.join("manifest.toml"));
    assert_eq!(m["status"].as_str(), Some("failed"));
    assert!(m["message"].as_str().unwrap().contains("A_i symmetry"));
}

#[test]
fn short_boundary_only_horizon_is_uncontrollable() {
    let dir = TempDir::new().unwrap();
    let o = hypctl(
        &[
            "control",
            "--system",
            "scalar-transport",
            "--T",
            "0.5",
            "--boundary-only",
            "--depth",
            "6",
            "--max-iter",
            "300",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let r = table(&dir.path().join("report.toml"));
    assert!(float(&r, "sigma_min") < 1e-6);
    assert!(float(&r, "residual") > 1e-2);
}

#[test]
fn csv_output_is_byte_identical() {
    let runs: [&[&str]; 4] = [
        &["simulate", "--system", "traffic-free", "--depth", "5", "--seed", "7"],
        &[
            "control",
            "--system",
            "traffic-free",
            "--depth",
            "5",
            "--target",
            "random",
            "--seed",
            "7",
            "--max-iter",
            "50",
        ],
        &["rays", "--system", "shallow-water-torrential", "--rays", "3", "--seed", "7"],
        &[
            "carleman",
            "--system",
            "scalar-transport",
            "--depth",
            "4",
            "--cells",
            "12",
            "--T-list",
            "1.5",
            "--lambdas",
            "1,4",
        ],
    ];
    for args in runs {
        let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
        let (oa, ob) = (hypctl(args, a.path()), hypctl(args, b.path()));
        assert_eq!(oa.status.code(), ob.status.code(), "{args:?}");
        let mut csvs: Vec<_> = fs::read_dir(a.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .filter(|n| n.to_string_lossy().ends_with(".csv"))
            .collect();
        csvs.sort();
        assert!(!csvs.is_empty(), "{args:?}");
        for name in csvs {
            let (x, y) = (fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
            assert!(x == y, "{args:?}: {name:?} differs");
        }
    }
}

#[test]
fn every_subcommand_writes_a_parseable_manifest() {
    let small = [
        "--system",
        "scalar-transport",
        "--depth",
        "4",
        "--cells",
        "12",
        "--iters",
        "20",
        "--rays",
        "2",
    ];
    for sub in [
        "validate",
        "check-condition",
        "rays",
        "simulate",
        "control",
        "observability",
        "carleman",
        "report",
    ] {
        let dir = TempDir::new().unwrap();
        let mut args = vec![sub];
        args.extend(small);
        let o = hypctl(&args, dir.path());
        assert_eq!(o.status.code(), Some(0), "{sub}: {}", stderr(&o));
        let m = table(&dir.path().join("manifest.toml"));
        assert_eq!(m["subcommand"].as_str(), Some(sub));
        assert_eq!(m["version"].as_str(), Some(env!("CARGO_PKG_VERSION")));
        assert!(m["wall_time_s"].as_float().unwrap() >= 0.0);
        assert_eq!(m["run"]["depth"].as_integer(), Some(4));
        for f in m["files"].as_array().unwrap() {
            assert!(dir.path().join(f.as_str().unwrap()).exists(), "{sub}: {f}");
        }
        table(&dir.path().join("report.toml"));
    }
}

#[test]
fn run_file_with_unknown_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let run = dir.path().join("run.toml");
    fs::write(&run, "system = \"sir-age\"\ndepth = 4\ncfll = 0.5\n").unwrap();
    let o = hypctl(&["validate", "--run", run.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("cfll") && err.contains("line 3"), "{err}");
}

#[test]
fn run_file_values_and_flag_overrides() {
    let dir = TempDir::new().unwrap();
    let run = dir.path().join("run.toml");
    fs::write(&run, "system = \"sir-age\"\ndepth = 3\nT = 2.5\ncells = [16]\n").unwrap();
    let out = dir.path().join("out");
    let o = hypctl(&["simulate", "--run", run.to_str().unwrap(), "--depth", "4"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = table(&out.join("manifest.toml"));
    assert_eq!(m["run"]["depth"].as_integer(), Some(4));
    assert_eq!(m["run"]["T"].as_float(), Some(2.5));
    assert_eq!(m["run"]["cells"].as_array().unwrap().len(), 1);
}

#[test]
fn out_of_range_values_are_config_errors() {
    let dir = TempDir::new().unwrap();
    for bad in [&["--cfl", "1.5"][..], &["--depth", "0"], &["--cells", "2"], &["--T", "-1"]] {
        let mut args = vec!["validate", "--system", "sir-age"];
        args.extend(bad);
        let o = hypctl(&args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{bad:?}");
    }
    let o = hypctl(&["validate"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = hypctl(&["validate", "--system", "sir-age", "--no-such-flag"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
