use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CONFIG: &str = r#"
seed = 5

[population]
advocate_id = "simulated"
advocate_post_count = 400
typical_friend_rate = 1.61

[simulation]
user_count = 300

[evaluation]
bootstrap_resamples = 500
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_feedresponse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let config = root.join("run.toml");
        std::fs::write(&config, CONFIG).unwrap();
        Self { _dir: dir, root, config }
    }

    fn sub(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn simulate(&self, out: &str) -> PathBuf {
        let out = self.sub(out);
        let o = run(&["simulate", "--config", s(&self.config), "--out-dir", s(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    }

    fn fit(&self, users: &Path, out: &str) -> PathBuf {
        let out = self.sub(out);
        let o = run(&["fit", "--users", s(users), "--config", s(&self.config), "--out-dir", s(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        out.join("params.json")
    }
}

fn data_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(str::to_string)
        .collect()
}

#[test]
fn simulate_is_deterministic() {
    let ws = Workspace::new();
    let a = ws.simulate("a");
    let b = ws.simulate("b");
    for name in ["users.csv", "truth.csv"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
    }
    assert_eq!(data_rows(&a.join("users.csv")).len(), 300);
    let text = std::fs::read_to_string(a.join("users.csv")).unwrap();
    assert!(text.starts_with("# tool: feedresponse"));
    assert!(text.contains("# config_sha256: "));
    assert!(text.contains("# seed: 5"));
}

#[test]
fn fit_predict_evaluate_round_trip() {
    let ws = Workspace::new();
    let sim = ws.simulate("sim");
    let users = sim.join("users.csv");
    let params_path = ws.fit(&users, "fit");
    let params: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&params_path).unwrap()).unwrap();
    let p_act = params["model"]["p_act"].as_f64().unwrap();
    let intervals = params["fit"]["confidence_intervals"].as_array().unwrap();
    let ci = intervals.iter().find(|i| i["name"] == "p_act").unwrap();
    let (lo, hi) = (ci["low"].as_f64().unwrap(), ci["high"].as_f64().unwrap());
    assert!(lo <= p_act && p_act <= hi);
    assert!(lo <= 0.12 && 0.12 <= hi, "truth outside [{lo}, {hi}]");
    assert!(params["logistic"]["beta0"].is_number());
    assert!(ws.sub("fit").join("surfing.csv").exists());
    assert_eq!(data_rows(&ws.sub("fit").join("visibility.csv")).len(), 300);

    let mut outputs = Vec::new();
    for out in ["p1", "p2"] {
        let dir = ws.sub(out);
        let o = run(&[
            "predict",
            "--users",
            s(&users),
            "--params",
            s(&params_path),
            "--config",
            s(&ws.config),
            "--out-dir",
            s(&dir),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(dir.join("predictions_stochastic.csv"));
    }
    assert_eq!(std::fs::read(&outputs[0]).unwrap(), std::fs::read(&outputs[1]).unwrap());
    let rows = data_rows(&outputs[0]);
    assert_eq!(rows.len(), 300);
    let users_rows = data_rows(&users);
    for (u, p) in users_rows.iter().zip(&rows) {
        if u.split(',').nth(3) == Some("opponent") {
            assert_eq!(p.split(',').nth(1), Some("0"));
        }
    }

    let o = run(&[
        "predict",
        "--users",
        s(&users),
        "--params",
        s(&params_path),
        "--model",
        "logistic",
        "--out-dir",
        s(&ws.sub("p1")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let logistic = ws.sub("p1").join("predictions_logistic.csv");

    let eval_dir = ws.sub("eval");
    let o = run(&[
        "evaluate",
        "--predictions",
        s(&outputs[0]),
        "--compare",
        s(&outputs[1]),
        "--config",
        s(&ws.config),
        "--out-dir",
        s(&eval_dir),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval_dir.join("report.json")).unwrap()).unwrap();
    let p = report["reports"][0]["correlation_difference"]["test"]["p_value"].as_f64().unwrap();
    assert!(p > 0.5);

    let eval_dir = ws.sub("eval2");
    let o = run(&[
        "evaluate",
        "--predictions",
        s(&outputs[0]),
        "--compare",
        s(&logistic),
        "--out-dir",
        s(&eval_dir),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["stochastic", "logistic"] {
        let rows = data_rows(&eval_dir.join(format!("pr_curve_{name}.csv")));
        assert_eq!(rows.len(), 300);
        assert_eq!(rows.last().unwrap().split(',').nth(1), Some("1"));
    }

    let o = run(&[
        "classify",
        "--users",
        s(&users),
        "--params",
        s(&params_path),
        "--fraction",
        "0.25",
        "--out-dir",
        s(&ws.sub("cls")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(data_rows(&ws.sub("cls").join("classification_stochastic.csv")).len(), 300);

    let first_user = users_rows
        .iter()
        .find(|r| r.split(',').nth(3) != Some("opponent"))
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .to_string();
    let o = run(&[
        "posterior",
        "--users",
        s(&users),
        "--params",
        s(&params_path),
        "--user-id",
        &first_user,
        "--out-dir",
        s(&ws.sub("post")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let grid = data_rows(&ws.sub("post").join(format!("posterior_{first_user}.csv")));
    assert_eq!(grid.len(), 1001);
    let vals: Vec<(f64, f64)> = grid
        .iter()
        .map(|r| {
            let f: Vec<f64> = r.split(',').map(|v| v.parse().unwrap()).collect();
            (f[0], f[2])
        })
        .collect();
    let integral: f64 = vals.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
    assert!((integral - 1.0).abs() < 1e-6);

    let o = run(&[
        "posterior",
        "--users",
        s(&users),
        "--params",
        s(&params_path),
        "--user-id",
        "nobody",
        "--out-dir",
        s(&ws.sub("post")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn input_errors_exit_with_code_two() {
    let ws = Workspace::new();
    let empty = ws.sub("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let o = run(&["fit", "--users", s(&empty), "--config", s(&ws.config), "--out-dir", s(&ws.sub("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty.csv"), "{}", stderr(&o));

    let bad = ws.sub("bad.csv");
    std::fs::write(
        &bad,
        "user_id,posting_rate,friend_count,stance,topic_posts,total_posts,responses\n\
         a,1.0,10,supporter,1,3,0\nb,1.0,10,sometimes,1,3,0\n",
    )
    .unwrap();
    let o = run(&["fit", "--users", s(&bad), "--config", s(&ws.config), "--out-dir", s(&ws.sub("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let cfg = ws.sub("typo.toml");
    std::fs::write(&cfg, "[simulation]\nuser_cnt = 5\n").unwrap();
    let o = run(&["simulate", "--config", s(&cfg), "--out-dir", s(&ws.sub("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("user_cnt"), "{}", stderr(&o));

    let o = run(&[
        "predict",
        "--users",
        s(&bad),
        "--params",
        s(&ws.sub("missing.json")),
        "--out-dir",
        s(&ws.sub("o")),
    ]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn evaluate_rejects_mismatched_users() {
    let ws = Workspace::new();
    let a = ws.sub("a.csv");
    let b = ws.sub("b.csv");
    let header = "# advocate_post_count: 10\nuser_id,predicted_mean,predicted_std,observed,abs_error\n";
    let rows_a: String = (0..12).map(|i| format!("u{i},{i},1,{i},0\n")).collect();
    let rows_b: String = (1..13).map(|i| format!("u{i},{i},1,{},0\n", i % 10)).collect();
    std::fs::write(&a, format!("{header}{rows_a}")).unwrap();
    std::fs::write(&b, format!("{header}{rows_b}")).unwrap();
    let o = run(&["evaluate", "--predictions", s(&a), "--compare", s(&b), "--out-dir", s(&ws.sub("o"))]);
    assert_ne!(o.status.code(), Some(0));
    let err = stderr(&o);
    assert!(err.contains("u0") && err.contains("u12"), "{err}");
}
