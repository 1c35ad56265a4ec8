//! The JSON systems shipped in `systems/` must match what the builders
//! produce. Run with `P2A_WRITE_SYSTEMS=1` to regenerate them.

use std::path::PathBuf;

use p2attractor::cli::{load_spec, CurveSpec, Defaults, SystemSpec};
use p2attractor::C64;

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("systems")
}

fn expected() -> Vec<(&'static str, SystemSpec)> {
    let mut square = SystemSpec::duplication(C64::new(2.5, 0.0), C64::new(0.0, 2.5)).unwrap();
    square.defaults = Defaults {
        seed: Some(20261015),
        ..Default::default()
    };
    let mut generic = SystemSpec::duplication(C64::new(2.0, 0.0), C64::new(0.4, 1.96)).unwrap();
    generic.defaults.seed = Some(7);
    let fermat = SystemSpec {
        degree: 2,
        map: ["x^2".into(), "y^2".into(), "z^2".into()],
        curve: CurveSpec::Polynomial {
            text: "x^3 + y^3 + z^3".into(),
        },
        defaults: Defaults {
            seed: Some(1),
            ..Default::default()
        },
    };
    let line = SystemSpec {
        degree: 2,
        map: ["x^2".into(), "y^2".into(), "z^2".into()],
        curve: CurveSpec::Polynomial { text: "z".into() },
        defaults: Defaults {
            seed: Some(1),
            horizon: Some(60),
            ..Default::default()
        },
    };
    vec![
        ("duplication_square.json", square),
        ("duplication_generic.json", generic),
        ("squares_fermat.json", fermat),
        ("squares_line.json", line),
    ]
}

#[test]
fn bundled_systems_match_builders() {
    let write = std::env::var_os("P2A_WRITE_SYSTEMS").is_some();
    for (name, spec) in expected() {
        let path = dir().join(name);
        if write {
            let text = serde_json::to_string_pretty(&spec).unwrap() + "\n";
            std::fs::write(&path, text).unwrap();
        }
        let loaded = load_spec(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(loaded.spec, spec, "{name} is stale");
    }
}
