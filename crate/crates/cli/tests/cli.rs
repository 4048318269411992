use std::path::PathBuf;
use std::process::{Command, Output};

fn feynknot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_feynknot")).args(args).env_remove("FEYNKNOT_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

/// The data row of a one-row TSV, as (header, value) pairs.
fn row(o: &Output) -> Vec<(String, String)> {
    let text = stdout(o);
    let mut lines = text.lines();
    let head: Vec<String> = lines.next().unwrap().split('\t').map(String::from).collect();
    let vals: Vec<String> = lines.next().unwrap().split('\t').map(String::from).collect();
    head.into_iter().zip(vals).collect()
}

fn field(r: &[(String, String)], name: &str) -> f64 {
    r.iter().find(|(h, _)| h == name).unwrap().1.parse().unwrap()
}

#[test]
fn enumerate_orders() {
    let o = feynknot(&["enumerate", "--order", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let keys: Vec<&str> = v.as_array().unwrap().iter().map(|c| c["key"].as_str().unwrap()).collect();
    assert_eq!(keys.len(), 15);
    assert!(keys.contains(&"4/0:b1-b3,b2-b4"));
    assert!(keys.contains(&"3/1:b1-y1,b2-y1,b3-y1"));

    let o = feynknot(&["enumerate", "--order", "1"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert_eq!(v[0]["automorphisms"], 1);
    assert_eq!(v[0]["diagram"]["edges"][0][0], "b1");

    assert_eq!(feynknot(&["enumerate", "--order", "0"]).status.code(), Some(2));
}

#[test]
fn enumerate_writes_files() {
    let path = scratch("order1.json");
    let o = feynknot(&["enumerate", "--order", "1", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(std::fs::read_to_string(&path).unwrap().contains("2/0:b1-b2"));
}

#[test]
fn integrate_x_on_the_planar_unknot() {
    let o = feynknot(&["integrate", "--diagram", "4/0:b1-b3,b2-b4", "--knot", "unknot", "--samples", "4096"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = row(&o);
    assert_eq!(r[0].0, "diagram");
    assert!(field(&r, "value").abs() < 1e-12);
    assert_eq!(field(&r, "samples"), 4096.0);
}

#[test]
fn integrate_is_deterministic() {
    let args =
        ["integrate", "--diagram", "3/1:b1-y1,b2-y1,b3-y1", "--knot", "trefoil", "--samples", "20000", "--seed", "5"];
    let a = feynknot(&args);
    let b = feynknot(&args);
    assert_eq!(a.stdout, b.stdout);
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "3"]);
    assert_eq!(feynknot(&threaded).stdout, a.stdout);
    let from_env =
        Command::new(env!("CARGO_BIN_EXE_feynknot")).args(args).env("FEYNKNOT_THREADS", "2").output().unwrap();
    assert_eq!(from_env.stdout, a.stdout);
}

#[test]
fn integrate_seeds_agree() {
    let run = |seed: &str| {
        row(&feynknot(&[
            "integrate",
            "--diagram",
            "4/0:b1-b3,b2-b4",
            "--knot",
            "trefoil",
            "--samples",
            "40000",
            "--seed",
            seed,
        ]))
    };
    let (a, b) = (run("1"), run("2"));
    let (va, vb) = (field(&a, "value"), field(&b, "value"));
    let s = field(&a, "stderr").hypot(field(&b, "stderr"));
    assert!(va != vb);
    assert!((va - vb).abs() <= 3.0 * s, "{va} vs {vb}, combined stderr {s}");
}

#[test]
fn integrate_from_files() {
    let d = scratch("tripod.json");
    std::fs::write(&d, r#"{"base_points":["p","q","r"],"inner":["c"],"edges":[["p","c"],["q","c"],["r","c"]]}"#)
        .unwrap();
    let k = scratch("square.json");
    std::fs::write(&k, r#"{"polygon":[[0,0,0],[1,0,0],[1,1,0],[0,1,0.2]]}"#).unwrap();
    let o =
        feynknot(&["integrate", "--diagram", d.to_str().unwrap(), "--knot", k.to_str().unwrap(), "--samples", "100"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("3/1:b1-y1,b2-y1,b3-y1"));
}

#[test]
fn usage_errors() {
    for args in [
        vec!["integrate", "--diagram", "4/0:b1-b2,b3-b4,b1-b3", "--knot", "unknot", "--samples", "10"],
        vec!["integrate", "--diagram", "4/0:b1-b3,b2-b4", "--knot", "granny", "--samples", "10"],
        vec!["integrate", "--diagram", "4/0:b1-b3,b2-b4", "--knot", "unknot", "--samples", "0"],
        vec!["integrate", "--diagram", "4/0:b1-b3,b2-b4", "--knot", "unknot", "--threads", "0"],
        vec!["integrate", "--diagram", "/nonexistent/diagram.json", "--knot", "unknot"],
        vec!["anomaly", "--order", "2", "--samples", "10", "--tolerance", "-1"],
        vec!["oracle", "--code", "O1+U1-"],
        vec!["frobnicate"],
    ] {
        let o = feynknot(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn anomaly_order_two() {
    let args = ["anomaly", "--order", "2", "--samples", "20000", "--seed", "3"];
    let o = feynknot(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "diagram\tautomorphisms\tvalue\tstderr\tsamples\trejected\tseed\tstatus");
    assert_eq!(lines.len(), 7);
    assert!(lines[1..].iter().all(|l| l.ends_with("\tpass")));
    assert_eq!(feynknot(&args).stdout, o.stdout);
}

#[test]
fn anomaly_order_one_is_a_violation() {
    let o = feynknot(&["anomaly", "--order", "1", "--samples", "1000"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("\tfail"));
}

#[test]
fn bundle_check_certificates() {
    let common = ["bundle-check", "--order", "2", "--trials", "200", "--heights", "20", "--isotopy-heights", "5"];
    let o = feynknot(&common);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let c: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(c["status"], "pass");
    for p in c["properties"].as_array().unwrap() {
        assert_eq!(p["status"], "pass", "{p}");
        for key in ["property", "worst_case", "tolerance"] {
            assert!(p.get(key).is_some());
        }
    }
    for g in c["groups"].as_array().unwrap() {
        let s = g["s"].as_u64().unwrap();
        let bound: u64 = (1..=s).product::<u64>() << s;
        assert_eq!(bound % g["order"].as_u64().unwrap(), 0);
    }
    assert_eq!(feynknot(&common).stdout, o.stdout);

    let mut injected = common.to_vec();
    injected.extend(["--inject-scale", "2"]);
    let o = feynknot(&injected);
    assert_eq!(o.status.code(), Some(1));
    let c: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(c["status"], "fail");
    assert!(!c["violations"].as_array().unwrap().is_empty());
}

#[test]
fn bundle_check_single_diagram() {
    let o = feynknot(&[
        "bundle-check",
        "--diagram",
        "3/1:b1-y1,b2-y1,b3-y1",
        "--trials",
        "50",
        "--heights",
        "20",
        "--limits",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let c: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(c["diagrams"].as_array().unwrap().len(), 1);
    assert!(c["properties"].as_array().unwrap().iter().any(|p| p["property"] == "limits.restriction"));
}

#[test]
fn invariant_of_the_reference_knots() {
    for (knot, want) in [("trefoil", "1.000000"), ("unknot", "0.000000")] {
        let o = feynknot(&["invariant", "--knot", knot, "--samples", "100000"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let text = stdout(&o);
        let line = text.lines().nth(1).unwrap();
        assert_eq!(line.split('\t').nth(1), Some(want), "{line}");
    }
}

#[test]
fn oracle_values() {
    let o = feynknot(&["oracle", "--code", "O1+U2+O3+U1+O2+U3+"]);
    assert_eq!(stdout(&o).trim(), "1");
    let o = feynknot(&["oracle", "--code", ""]);
    assert_eq!(stdout(&o).trim(), "0");
}
