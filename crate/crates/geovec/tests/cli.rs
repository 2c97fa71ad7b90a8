mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::{dead_url, fixtures_dir, serve, states_body};
use geovec::checkpoint::read_metrics_csv;
use geovec::store_io::load_store;

fn geovec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geovec")).args(args).env_remove("GEOVEC_EMBED_URL").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = geovec(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    geovec(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(name: &str) -> PathBuf {
    fixtures_dir().join(name)
}

fn ten_nodes(dir: &Path) -> PathBuf {
    let p = dir.join("nodes10.csv");
    let mut text = String::from("id,lon,lat\n");
    for i in 0..10 {
        text.push_str(&format!("n{i},{},{}\n", -120.0 + 25.0 * i as f64, -45.0 + 9.0 * i as f64));
    }
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn prompt_matches_golden_files() {
    let nodes = fixture("nodes.csv");
    let fx = fixture("osm_fixtures.json");
    for v in ["instruction-only", "instruction-address", "instruction-address-top-10"] {
        let out = ok(&["prompt", "--nodes", s(&nodes), "--node", "nyc", "--variant", v, "--fixtures", s(&fx)]);
        let golden = std::fs::read_to_string(fixture(&format!("golden/nyc_{v}.txt"))).unwrap();
        assert_eq!(out, golden, "variant {v}");
    }
}

#[test]
fn instruction_only_prompt_needs_no_map_data() {
    let out = ok(&["--offline", "prompt", "--lat", "10", "--lon", "20", "--variant", "instruction-only"]);
    assert_eq!(out.lines().count(), 1);
    assert!(out.contains("(10.0000, 20.0000)"));
    assert!(!out.contains("Address:"));
}

#[test]
fn prompt_input_errors_exit_2() {
    let nodes = fixture("nodes.csv");
    let fx = fixture("osm_fixtures.json");
    assert_eq!(code(&["prompt", "--nodes", s(&nodes), "--node", "atlantis", "--fixtures", s(&fx)]), 2);
    assert_eq!(code(&["prompt", "--nodes", s(&nodes), "--node", "ocean", "--fixtures", s(&fx)]), 2);
    assert_eq!(code(&["prompt", "--lat", "1", "--lon", "1", "--fixtures", s(&fx)]), 2);
    assert_eq!(code(&["--offline", "prompt", "--lat", "1", "--lon", "1"]), 2);
    assert_eq!(code(&["prompt", "--lat", "1", "--lon", "1", "--variant", "instruction-address-top-0"]), 2);
}

#[test]
fn embed_mock_round_trips_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = ten_nodes(dir.path());
    let store = dir.path().join("a.gvec");
    let args = ["embed", "--nodes", s(&nodes), "--provider", "mock", "--dim", "16", "--variant", "instruction-only", "--out", s(&store)];
    let out = ok(&args);
    assert!(out.starts_with("N=10 M=16 provider="), "{out}");
    let rep = load_store(&store).unwrap();
    assert_eq!((rep.len(), rep.dim()), (10, 16));
    let first = std::fs::read(&store).unwrap();
    ok(&args);
    assert_eq!(first, std::fs::read(&store).unwrap());
}

#[test]
fn embed_with_map_prompts_from_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("m.gvec");
    let nodes = dir.path().join("nodes.csv");
    std::fs::write(&nodes, "id,lon,lat\nnyc,-73.9857,40.7484\nsparse,-103.0,44.0\n").unwrap();
    let fx = fixture("osm_fixtures.json");
    ok(&["--offline", "embed", "--nodes", s(&nodes), "--dim", "8", "--fixtures", s(&fx), "--out", s(&store)]);
    assert_eq!(load_store(&store).unwrap().len(), 2);
}

#[test]
fn embed_remote_unreachable_exits_3_without_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = ten_nodes(dir.path());
    let store = dir.path().join("r.gvec");
    let url = dead_url();
    let args = ["embed", "--nodes", s(&nodes), "--provider", "remote", "--remote-url", &url, "--dim", "4", "--variant", "instruction-only", "--out", s(&store)];
    assert_eq!(code(&args), 3);
    assert!(!store.exists());
    let offline = ["--offline", "embed", "--nodes", s(&nodes), "--provider", "remote", "--remote-url", &url, "--variant", "instruction-only", "--out", s(&store)];
    assert_eq!(code(&offline), 3);
    assert!(!store.exists());
}

#[test]
fn embed_remote_through_stub() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = ten_nodes(dir.path());
    let store = dir.path().join("r.gvec");
    let stub = serve(vec![(200, states_body(&[vec![1.0, 2.0, 3.0, 4.0], vec![3.0, 2.0, 1.0, 0.0]]))]);
    let out = ok(&["embed", "--nodes", s(&nodes), "--provider", "remote", "--remote-url", &stub.url, "--model", "stub-llm", "--dim", "4", "--variant", "instruction-only", "--out", s(&store)]);
    assert!(out.contains("provider=stub-llm"));
    let rep = load_store(&store).unwrap();
    assert_eq!(rep.column(3), &[2.0, 2.0, 2.0, 2.0]);
    assert_eq!(stub.hits(), 10);
}

fn gp_inputs(dir: &Path) -> (PathBuf, PathBuf) {
    ok(&["--seed", "11", "synth", "gp", "--n", "2000", "--out-dir", s(dir)]);
    let store = dir.join("rff.gvec");
    ok(&[
        "embed", "--nodes", s(&dir.join("nodes.csv")), "--provider", "rff", "--dim", "256", "--seed", "3", "--lengthscale", "10",
        "--variant", "instruction-only", "--out", s(&store),
    ]);
    (store, dir.join("attributes.csv"))
}

fn report_r2(path: &Path) -> f64 {
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v["mean_r2"].as_f64().or_else(|| v["r2"].as_f64()).unwrap()
}

#[test]
fn gp_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let (store, attrs) = gp_inputs(dir.path());
    let single = dir.path().join("cv.json");
    let out = ok(&["gp", "--store", s(&store), "--attributes", s(&attrs), "--out", s(&single)]);
    assert!(out.contains("mean_r2="));
    let r2 = report_r2(&single);
    assert!(r2 >= 0.9, "mean R2 {r2}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&single).unwrap()).unwrap();
    assert_eq!(v["per_fold"].as_array().unwrap().len(), 5);

    let doubled = dir.path().join("concat.json");
    ok(&["gp", "--store", s(&store), "--concat", s(&store), "--attributes", s(&attrs), "--out", s(&doubled)]);
    assert!((report_r2(&doubled) - r2).abs() <= 0.02);

    let holdout = dir.path().join("holdout.json");
    ok(&["gp", "--mode", "holdout", "--store", s(&store), "--attributes", s(&attrs), "--out", s(&holdout)]);
    let h: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&holdout).unwrap()).unwrap();
    assert_eq!((h["n_train"].as_u64(), h["n_test"].as_u64()), (Some(1600), Some(400)));
    assert!(report_r2(&holdout) >= 0.9);
}

#[test]
fn gp_misaligned_ids_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = ten_nodes(dir.path());
    let store = dir.path().join("a.gvec");
    ok(&["embed", "--nodes", s(&nodes), "--dim", "4", "--variant", "instruction-only", "--out", s(&store)]);
    let attrs = dir.path().join("attrs.csv");
    let mut text = String::from("id,value\n");
    for i in 0..10 {
        text.push_str(&format!("other{i},{i}\n"));
    }
    std::fs::write(&attrs, text).unwrap();
    assert_eq!(code(&["gp", "--store", s(&store), "--attributes", s(&attrs), "--folds", "2"]), 4);
}

const HYPER: [&str; 14] =
    ["--history", "8", "--horizon", "12", "--d-t", "32", "--d-s", "8", "--hidden", "64", "--batch", "64", "--epochs", "50"];

struct Task {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Task {
    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn new() -> Task {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        ok(&["synth", "geo-signal", "--out-dir", s(&root)]);
        for region in ["source", "target"] {
            let nodes = root.join(format!("{region}_nodes.csv"));
            let store = root.join(format!("{region}.gvec"));
            ok(&[
                "embed", "--nodes", s(&nodes), "--provider", "rff", "--dim", "64", "--seed", "7", "--lengthscale", "10",
                "--variant", "instruction-only", "--out", s(&store),
            ]);
        }
        Task { _dir: dir, root }
    }

    fn train(&self, name: &str, extra: &[&str]) -> PathBuf {
        let ckpt = self.path(&format!("{name}.json"));
        let series = self.path("source_series.csv");
        let mut args = vec!["forecast", "train", "--series", s(&series), "--checkpoint", s(&ckpt)];
        args.extend_from_slice(&HYPER);
        args.extend_from_slice(extra);
        ok(&args);
        ckpt
    }
}

#[test]
fn forecast_pipeline() {
    let t = Task::new();
    let src_series = t.path("source_series.csv");
    let src_store = t.path("source.gvec");
    let plain = t.train("plain", &["--loss-csv", s(&t.path("plain_loss.csv"))]);
    let geo = t.train("geo", &["--store", s(&src_store)]);
    let again = t.train("geo_again", &["--store", s(&src_store)]);
    assert_eq!(std::fs::read(&geo).unwrap(), std::fs::read(&again).unwrap());
    let loss = std::fs::read_to_string(t.path("plain_loss.csv")).unwrap();
    assert!(loss.starts_with("epoch,train_mse,val_mse\n"));
    assert_eq!(loss.lines().count(), 51);

    let plain_metrics = t.path("plain_metrics.csv");
    ok(&["forecast", "eval", "--checkpoint", s(&plain), "--series", s(&src_series), "--out", s(&plain_metrics)]);
    let geo_metrics = t.path("geo_metrics.csv");
    let out = ok(&[
        "forecast", "eval", "--checkpoint", s(&geo), "--series", s(&src_series), "--store", s(&src_store),
        "--out", s(&geo_metrics), "--compare", s(&plain_metrics),
    ]);
    let imp: f64 = out.lines().find_map(|l| l.strip_prefix("IMP ")).unwrap().split('%').next().unwrap().parse().unwrap();
    assert!(imp >= 20.0, "IMP {imp}");

    let zs = ok(&["forecast", "zeroshot", "--checkpoint", s(&geo), "--series", s(&src_series), "--store", s(&src_store), "--out", s(&t.path("zs.csv"))]);
    assert!(zs.contains("split=zeroshot-test"));
    let a = read_metrics_csv(&geo_metrics).unwrap();
    let b = read_metrics_csv(&t.path("zs.csv")).unwrap();
    assert_eq!((a[0].mse, a[0].mae), (b[0].mse, b[0].mae));

    let tgt_series = t.path("target_series.csv");
    assert_eq!(code(&["forecast", "eval", "--checkpoint", s(&geo), "--series", s(&tgt_series), "--store", s(&src_store)]), 5);
    ok(&["forecast", "zeroshot", "--checkpoint", s(&geo), "--series", s(&tgt_series), "--store", s(&t.path("target.gvec"))]);
}

#[test]
fn forecast_errors() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("short.csv");
    let mut text = String::from("timestamp,a,b\n");
    for t in 0..20 {
        text.push_str(&format!("2024-01-01T{t:02}:00:00Z,{t},{}\n", 2 * t));
    }
    std::fs::write(&series, text).unwrap();
    let ckpt = dir.path().join("c.json");
    assert_eq!(code(&["forecast", "train", "--series", s(&series), "--checkpoint", s(&ckpt)]), 5);
    assert!(!ckpt.exists());
    assert_eq!(code(&["forecast", "eval", "--checkpoint", s(&ckpt), "--series", s(&series)]), 2);
}

#[test]
fn node_table_train_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "geo-signal", "--out-dir", s(dir.path())]);
    let series = dir.path().join("source_series.csv");
    let ckpt = dir.path().join("table.json");
    ok(&["forecast", "train", "--series", s(&series), "--node-table", "--checkpoint", s(&ckpt), "--history", "8", "--epochs", "2"]);
    let out = ok(&["forecast", "eval", "--checkpoint", s(&ckpt), "--series", s(&series)]);
    assert!(out.starts_with("model=table split=test"));
    let tgt = dir.path().join("target_series.csv");
    assert!(ok(&["forecast", "zeroshot", "--checkpoint", s(&ckpt), "--series", s(&tgt)]).contains("split=zeroshot-test"));
}

#[test]
fn adjacency_csv() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = dir.path().join("n.csv");
    std::fs::write(&nodes, "id,lon,lat\na,0,0\nb,0,0\nc,1,0\n").unwrap();
    let out = ok(&["adjacency", "--nodes", s(&nodes)]);
    let mut rows = csv::Reader::from_reader(out.as_bytes());
    assert_eq!(rows.headers().unwrap(), vec!["id", "a", "b", "c"]);
    let m: Vec<Vec<f64>> = rows.records().map(|r| r.unwrap().iter().skip(1).map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(m[0][0], 0.0);
    assert_eq!(m[0][1], 10.0);
    assert_eq!(m[0][2], m[2][0]);
    assert!((1.0 / m[0][2] - 111.195).abs() < 0.01);
    assert_eq!(code(&["adjacency", "--nodes", s(&nodes), "--min-dist-km", "0"]), 2);
}

#[test]
fn sample_raster_csv() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("g.asc");
    let mut text = String::from("ncols 8\nnrows 8\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n");
    for _ in 0..8 {
        text.push_str("3 3 3 3 3 3 3 3\n");
    }
    std::fs::write(&grid, text).unwrap();
    let nodes = dir.path().join("n.csv");
    std::fs::write(&nodes, "id,lon,lat\np,4.2,3.7\nq,0.1,7.9\n").unwrap();
    let out = ok(&["sample-raster", "--raster", s(&grid), "--nodes", s(&nodes)]);
    assert_eq!(out, "id,value\np,3\nq,3\n");
    std::fs::write(&nodes, "id,lon,lat\nfar,50,50\n").unwrap();
    assert_eq!(code(&["sample-raster", "--raster", s(&grid), "--nodes", s(&nodes)]), 2);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = ten_nodes(dir.path());
    let store = dir.path().join("cfg.gvec");
    let cfg = dir.path().join("run.json");
    let doc = serde_json::json!({
        "paths": {"nodes": nodes, "store": store},
        "provider": {"kind": "mock", "dim": 12},
        "variant": "instruction-only",
        "offline": true
    });
    std::fs::write(&cfg, doc.to_string()).unwrap();
    assert!(ok(&["--config", s(&cfg), "embed"]).starts_with("N=10 M=12 provider=mock"));
    assert!(ok(&["--config", s(&cfg), "embed", "--dim", "6"]).starts_with("N=10 M=6"));
    assert_eq!(load_store(&store).unwrap().dim(), 6);

    std::fs::write(&cfg, r#"{"paths":{"nodes":"/no/such/file.csv"}}"#).unwrap();
    assert_eq!(code(&["--config", s(&cfg), "embed"]), 2);
    assert_eq!(code(&["--config", s(&dir.path().join("missing.json")), "embed"]), 2);
}
