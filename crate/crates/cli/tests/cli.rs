use std::process::{Command, Output};

use serde_json::Value;

fn cuspforms(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cuspforms")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> (i32, Value) {
    let out = cuspforms(args);
    let v = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{args:?}: {e}\n{}", String::from_utf8_lossy(&out.stdout));
    });
    (out.status.code().unwrap(), v)
}

#[test]
fn cusps_of_level_12() {
    let (code, v) = json(&["cusps", "--level", "12", "--json"]);
    assert_eq!(code, 0);
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 6);
    let widths: Vec<i64> = checks.iter().map(|c| c["inputs"]["width"].as_i64().unwrap()).collect();
    assert_eq!(widths, [12, 3, 4, 3, 1, 1]);
}

#[test]
fn usage_errors_exit_with_2() {
    for args in [
        &["cusps", "--level", "12", "--bogus"][..],
        &["frobnicate"],
        &[],
        &["voronoi", "--form", "level11", "--twist", "1-2", "--bump", "1,30"],
        &["voronoi", "--form", "level11", "--twist", "1/2", "--bump", "1"],
        &["coeffs", "--form", "nosuchform", "--cusp", "0", "--nmax", "5"],
        &["coeffs", "--form", "level11", "--cusp", "a/b", "--nmax", "5"],
        &["identity", "--form", "level11", "--twist", "1/3", "--y", "-1"],
    ] {
        assert_eq!(cuspforms(args).status.code(), Some(2), "{args:?}");
    }
    assert_eq!(cuspforms(&["--help"]).status.code(), Some(0));
}

#[test]
fn modform_check_accepts_builtins_and_rejects_corrupt_files() {
    let (code, v) = json(&["modform", "check", "level11", "--json"]);
    assert_eq!(code, 0);
    assert_eq!(v["checks"][0]["inputs"]["level"], 11);

    let dir = std::env::temp_dir().join(format!("cuspforms-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.json");
    // a_f(1) = 2 violates the normalisation.
    std::fs::write(
        &bad,
        r#"{"level": 11, "weight": 2, "kind": "holomorphic", "character": {"modulus": 11},
            "coefficients": [[1, 2.0, 0.0], [2, -2.0, 0.0]]}"#,
    )
    .unwrap();
    let (code, v) = json(&["modform", "check", bad.to_str().unwrap(), "--json"]);
    assert_eq!(code, 1);
    assert_eq!(v["summary"]["failed"], 1);
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(cuspforms(&["modform", "check", bad.to_str().unwrap()]).status.code(), Some(1));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn coefficients_at_infinity_are_the_input() {
    let (code, v) = json(&["coeffs", "--form", "level11", "--cusp", "oo", "--nmax", "5", "--json"]);
    assert_eq!(code, 0);
    let coeffs = v["checks"][0]["inputs"]["expansion"]["coefficients"].as_array().unwrap();
    let re: Vec<f64> = coeffs.iter().map(|c| c[1].as_f64().unwrap()).collect();
    for (got, want) in re.iter().zip([1.0, -2.0, -1.0, 2.0, 1.0]) {
        assert!((got - want).abs() < 1e-9, "{re:?}");
    }
}

#[test]
fn single_verifications_pass() {
    for args in [
        &["formula", "--form", "level11", "--cusp", "0", "--nmax", "10"][..],
        &["al", "--form", "level9chi", "--set", "3", "--cusp", "1/3", "--nmax", "10"],
        &["voronoi", "--form", "level11", "--twist", "1/2", "--bump", "1,30"],
        &["voronoi", "--form", "level9chi", "--twist", "1/2", "--cusp", "1/3", "--bump", "1,30"],
        &["identity", "--form", "delta", "--twist", "2/3", "--y", "0.5"],
        &["bounds", "--form", "level11", "--cusp", "0", "--xmax", "2000"],
    ] {
        let out = cuspforms(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}\n{}", String::from_utf8_lossy(&out.stdout));
        assert!(String::from_utf8_lossy(&out.stdout).contains("1 passed, 0 failed"));
    }
}

#[test]
fn uncovered_cusps_are_skipped_with_a_reason() {
    let (code, v) = json(&["formula", "--form", "eta12", "--cusp", "1/2", "--nmax", "5", "--json"]);
    assert_eq!(code, 0);
    assert_eq!(v["checks"][0]["outcome"], "skip");
    assert!(v["checks"][0]["note"].as_str().unwrap().starts_with("p=2"));
}

#[test]
fn reports_name_their_provenance() {
    let (_, v) = json(&["identity", "--form", "level11", "--twist", "1/3", "--y", "0.4", "--json"]);
    let prov: Vec<&str> = v["checks"][0]["provenance"].as_array().unwrap().iter().map(|p| p.as_str().unwrap()).collect();
    assert!(prov.contains(&"closed_form"), "{prov:?}");
}

#[test]
fn json_output_is_deterministic() {
    let args = ["voronoi", "--form", "level11", "--twist", "2/5", "--bump", "1,20", "--json"];
    let a = cuspforms(&args).stdout;
    let b = cuspforms(&args).stdout;
    assert_eq!(a, b);
    // Floats carry 17 significant digits.
    let text = String::from_utf8(a).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    let r = v["checks"][0]["residual"].as_f64().unwrap();
    assert!(text.contains(&format!("{r:.16e}")));
}

#[test]
fn quick_suite_passes() {
    let (code, v) = json(&["suite", "--quick", "--json"]);
    assert_eq!(code, 0, "{}", v["summary"]);
    assert_eq!(v["suite"], "quick");
    let ids: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["id"].as_str().unwrap()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    for c in 1..=10 {
        assert!(v["checks"].as_array().unwrap().iter().any(|k| k["criterion"] == c), "criterion {c}");
    }
}
