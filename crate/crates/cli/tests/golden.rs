//! Output files compared byte for byte with `tests/golden/<case>/`.
//! Set `UPDATE_GOLDEN=1` to regenerate after an intended change.

use std::fs;
use std::path::{Path, PathBuf};

use rgcluster_cli::table::verify_checksum;
use rgcluster_cli::{run, write_run, Command, Experiment, Overrides};

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn compare(case: &str, config: &str, command: Command) {
    let dir = golden_dir();
    let exp = Experiment::load(&dir.join(config), Overrides::default()).unwrap();
    let report = run(command, &exp, None).unwrap();
    assert!(report.failure.is_none());
    let tmp = tempfile::tempdir().unwrap();
    write_run(tmp.path(), command, &exp, &report).unwrap();

    let expected_dir = dir.join(case);
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    if update {
        fs::create_dir_all(&expected_dir).unwrap();
    }
    let mut names: Vec<String> = report.files.iter().map(|(n, _)| n.clone()).collect();
    names.push("manifest.json".into());
    for name in names {
        let actual = fs::read_to_string(tmp.path().join(&name)).unwrap();
        if name.ends_with(".tsv") {
            assert!(verify_checksum(&actual), "{case}/{name}: bad checksum line");
        }
        let path = expected_dir.join(&name);
        if update {
            fs::write(&path, &actual).unwrap();
            continue;
        }
        let expected =
            fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(
            actual, expected,
            "{case}/{name} differs from the golden copy"
        );
    }
}

#[test]
fn chain4_exact() {
    compare("chain4_exact", "chain4.toml", Command::Exact);
}

#[test]
fn chain4_expand() {
    compare("chain4_expand", "chain4.toml", Command::Expand);
}

#[test]
fn bounds_report() {
    compare("bounds", "bounds.toml", Command::Bounds);
}

fn tsv_value(text: &str, key: &str, column: usize) -> f64 {
    text.lines()
        .find(|l| l.split('\t').next() == Some(key))
        .and_then(|l| l.split('\t').nth(column))
        .unwrap_or_else(|| panic!("no row {key}"))
        .parse()
        .unwrap()
}

/// The golden copies themselves agree with closed forms computed here.
#[test]
fn golden_values_match_closed_forms() {
    let dir = golden_dir();
    let couplings = fs::read_to_string(dir.join("chain4_exact/couplings.tsv")).unwrap();
    let pair = tsv_value(&couplings, "y0;y1", 1);
    assert!((pair - 0.5 * 0.4f64.cosh().ln()).abs() < 1e-12);
    assert!(tsv_value(&couplings, "y0", 1).abs() < 1e-12);

    let bounds: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("bounds/bounds.json")).unwrap()).unwrap();
    let (m, s, norm, d) = (2.0f64, 2.0, 0.004, 2.0);
    let eps = m / std::f64::consts::E;
    let c = 1.0 / eps.sqrt() - 1.0;
    let lm = m.ln();
    let threshold = lm * c * c / (2.0 * s * (c + lm));
    assert!((bounds["threshold"].as_f64().unwrap() - threshold).abs() < 1e-15);
    assert!((threshold - 0.0055471).abs() < 1e-6);
    let rho = 2.0 * s * norm / (c * c);
    assert!((bounds["rho"].as_f64().unwrap() - rho).abs() < 1e-15);
    let eps_tail = |p: f64| c * rho.powf(p / d) / (1.0 - rho);
    let (p, q) = (8.0, 8.0);
    let band = (m * (1.0 + lm)).powf(d)
        * (eps_tail(p) / lm + 2.0 * eps_tail(q) * (1.0 + p) * d * m.powf((1.0 + p) * d));
    let got = bounds["band_bound"]["value"].as_f64().unwrap();
    assert!((got - band).abs() <= 1e-12 * band, "{got} vs {band}");
    assert_eq!(
        bounds["band_bound"]["activation"].as_f64().unwrap(),
        1.0 * (p + q * q)
    );
}
