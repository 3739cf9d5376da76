use std::path::PathBuf;

use hypctl::system::{load_system, parse_system, registry, to_toml};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

#[test]
fn golden_files_match_registry_exactly() {
    for label in registry::LABELS {
        let path = configs().join(format!("{label}.toml"));
        let spec = load_system(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let want = registry::by_label(label).unwrap();
        assert_eq!(spec, want, "{label}");
        assert_eq!(to_toml(&spec), to_toml(&want), "{label}");
        spec.validate().unwrap();
    }
}

#[test]
fn every_golden_file_has_a_registry_entry() {
    let mut names: Vec<String> = std::fs::read_dir(configs())
        .unwrap()
        .filter_map(|e| e.unwrap().file_name().into_string().ok())
        .filter_map(|n| n.strip_suffix(".toml").map(String::from))
        .collect();
    names.sort();
    let mut labels: Vec<String> = registry::LABELS.iter().map(|l| l.to_string()).collect();
    labels.sort();
    assert_eq!(names, labels);
}

#[test]
fn documented_example_parses() {
    let doc = std::fs::read_to_string(configs().join("README.md")).unwrap();
    let block = doc
        .split("```toml\n")
        .nth(1)
        .and_then(|s| s.split("```").next())
        .expect("toml block");
    let spec = parse_system(block).unwrap();
    assert_eq!((spec.state_dim, spec.space_dim()), (2, 1));
    spec.validate().unwrap();
}
