use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use skillweak::corpus::parse_conll;
use skillweak::embeddings::HashEmbedder;
use skillweak::taxonomy::load_skills;
use skillweak::Predictions;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn run(args: &[&str], out: &Path) -> Output {
    let config = fixtures().join("exact.json");
    Command::new(env!("CARGO_BIN_EXE_skillweak"))
        .args(args)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn ok(args: &[&str], out: &Path) -> Output {
    let o = run(args, out);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn exact_run_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["match"], dir.path());
    assert_eq!(
        json(&dir.path().join("report.json")),
        json(&fixtures().join("golden/exact_report.json"))
    );
    assert_eq!(
        fs::read_to_string(dir.path().join("predictions.jsonl")).unwrap(),
        fs::read_to_string(fixtures().join("golden/exact_predictions.jsonl")).unwrap()
    );
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["method"], "exact");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["inputs"]["skills"]["sha256"].is_string());
    let config = json(&dir.path().join("config.json"));
    assert_eq!(config["tau"], 0.8);
}

#[test]
fn eval_of_golden_predictions_reproduces_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let preds = fixtures().join("golden/exact_predictions.jsonl");
    ok(&["eval", "--predictions", preds.to_str().unwrap()], dir.path());
    let got = json(&dir.path().join("report.json"));
    let want = json(&fixtures().join("golden/exact_report.json"));
    assert_eq!(got["strict"], want["strict"]);
    assert_eq!(got["loose"], want["loose"]);
}

#[test]
fn baselines_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["baseline", "--method", "lemma"], dir.path());
    // lemmas also find "communicating with customers" in t2
    let r = json(&dir.path().join("report.json"));
    assert_eq!(r["strict"]["tp"], 3);
    assert_eq!(r["strict"]["fp"], 2);
    assert_eq!(r["strict"]["fn"], 1);
    let o = run(&["baseline", "--method", "wse"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

/// WSE by brute force over the fixture with form-keyed hash vectors, then the
/// single best (candidate, skill) pair per sentence.
fn wse_oracle(dim: usize, seed: u64, tau: f64) -> Vec<Option<(usize, usize, String, f64)>> {
    let h = HashEmbedder::new(dim, seed);
    let inv = load_skills(fixtures().join("skills.jsonl")).unwrap();
    let reference = [
        parse_conll(fixtures().join("train.conll")).unwrap(),
        parse_conll(fixtures().join("dev.conll")).unwrap(),
    ];
    let test = parse_conll(fixtures().join("test.conll")).unwrap();
    let lower = |s: &skillweak::Sentence| s.tokens.iter().map(|t| t.form.to_lowercase()).collect::<Vec<_>>();

    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for d in &reference {
        for s in &d.sentences {
            for w in lower(s) {
                *counts.entry(w).or_default() += 1;
            }
        }
    }
    let total: u64 = counts.values().sum();
    let idf = |w: &str| -((counts[w] as f64) / total as f64).ln();

    let mut rows: Vec<(String, Vec<f32>)> = Vec::new();
    for e in &inv.entries {
        let mut occ: Vec<Vec<f64>> = Vec::new();
        for d in &reference {
            for s in &d.sentences {
                let f = lower(s);
                let k = e.tokens.len();
                for start in 0..=f.len().saturating_sub(k) {
                    if f.len() >= k && f[start..start + k] == e.tokens[..] {
                        let mut v = vec![0.0f64; dim];
                        for w in &f[start..start + k] {
                            let x = h.vector(w.as_bytes());
                            for j in 0..dim {
                                v[j] += idf(w) * x[j] as f64;
                            }
                        }
                        occ.push(v);
                    }
                }
            }
        }
        let vector = if occ.is_empty() {
            h.vector(e.phrase().as_bytes())
        } else {
            (0..dim)
                .map(|j| (occ.iter().map(|o| o[j]).sum::<f64>() / occ.len() as f64) as f32)
                .collect()
        };
        rows.push((e.id.clone(), vector));
    }

    let cos = |a: &[f32], b: &[f32]| {
        let (mut d, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..a.len() {
            d += a[i] as f64 * b[i] as f64;
            na += a[i] as f64 * a[i] as f64;
            nb += b[i] as f64 * b[i] as f64;
        }
        (d / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
    };
    test.sentences
        .iter()
        .map(|s| {
            let f = lower(s);
            let mut best: Option<(usize, usize, String, f64)> = None;
            for start in 0..f.len() {
                for end in start + 1..=(start + 4).min(f.len()) {
                    let mut sum = vec![0.0f64; dim];
                    for w in &f[start..end] {
                        for (j, x) in h.vector(w.as_bytes()).into_iter().enumerate() {
                            sum[j] += x as f64;
                        }
                    }
                    let c: Vec<f32> = sum.iter().map(|x| (x / (end - start) as f64) as f32).collect();
                    for (id, r) in &rows {
                        let score = cos(&c, r);
                        if best.as_ref().is_none_or(|b| score > b.3) {
                            best = Some((start, end, id.clone(), score));
                        }
                    }
                }
            }
            best.filter(|b| b.3 > tau)
        })
        .collect()
}

#[test]
fn wse_hash_run_matches_brute_force() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["match", "--method", "wse", "--hash-dim", "32", "--seed", "5", "--tau", "0.8"], dir.path());
    let preds = Predictions::load(dir.path().join("predictions.jsonl")).unwrap();
    let want = wse_oracle(32, 5, 0.8);
    assert_eq!(preds.sentences.len(), want.len());
    for (p, w) in preds.sentences.iter().zip(want) {
        let got = p
            .spans
            .first()
            .map(|s| (s.start, s.end, s.skill_id.clone().unwrap(), s.score.unwrap()));
        assert_eq!(p.spans.len(), usize::from(got.is_some()));
        assert_eq!(got, w, "sentence {}", p.id);
    }
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["store_model"], "hash-chacha8-d32-s5");
    assert_eq!(manifest["seed"], 5);
}

fn files_except_manifest(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        let name = e.file_name().to_string_lossy().into_owned();
        if name != "manifest.json" && e.path().is_file() {
            out.insert(name, fs::read(e.path()).unwrap());
        }
    }
    out
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["match", "--method", "aoc", "--hash-dim", "16", "--mode", "multi", "--tau", "0.2"];
    ok(&[&args[..], &["--workers", "1"]].concat(), a.path());
    ok(&[&args[..], &["--workers", "3"]].concat(), b.path());
    let (fa, fb) = (files_except_manifest(a.path()), files_except_manifest(b.path()));
    assert_eq!(fa.keys().collect::<Vec<_>>(), ["config.json", "predictions.jsonl", "report.json"]);
    // the resolved config records the worker count, everything else matches
    assert_eq!(fa["predictions.jsonl"], fb["predictions.jsonl"]);
    assert_eq!(fa["report.json"], fb["report.json"]);
    let c = tempfile::tempdir().unwrap();
    ok(&[&args[..], &["--workers", "1"]].concat(), c.path());
    let fc = files_except_manifest(c.path());
    for (name, bytes) in &fa {
        if name != "config.json" {
            assert_eq!(bytes, &fc[name], "{name}");
        }
    }
}

#[test]
fn sweep_rows_equal_individual_runs() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["--method", "wse", "--hash-dim", "24"];
    ok(&[&["sweep"][..], &base, &["--taus", "0.9,0.5,0.8"]].concat(), dir.path());
    let rows = json(&dir.path().join("sweep.json"));
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let mut last = usize::MAX;
    for row in rows {
        let tau = row["tau"].as_f64().unwrap();
        let single = tempfile::tempdir().unwrap();
        ok(&[&["match"][..], &base, &["--tau", &tau.to_string()]].concat(), single.path());
        let r = json(&single.path().join("report.json"));
        assert_eq!(row["strict"], r["strict"], "tau {tau}");
        assert_eq!(row["loose"], r["loose"], "tau {tau}");
        let n = row["predicted_spans"].as_u64().unwrap() as usize;
        assert!(n <= last);
        last = n;
    }
}

#[test]
fn stats_outputs() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["stats"], dir.path());
    // lengths: java 1; manage staff, project management 2; the other two 3
    assert_eq!(
        fs::read_to_string(dir.path().join("length_histogram.csv")).unwrap(),
        "length,count\n1,1\n2,2\n3,2\n"
    );
    let stats = json(&dir.path().join("stats.json"));
    assert_eq!(stats["inventory"]["length_mode"], 2);
    assert_eq!(stats["datasets"][2]["sentences"], 4);
    assert_eq!(stats["datasets"][2]["tokens"], 21);
    let ds = fs::read_to_string(dir.path().join("dataset_stats.csv")).unwrap();
    assert!(ds.contains("test,test,4,21,4,2.25"));
    let pos = fs::read_to_string(dir.path().join("dataset_pos_sequences.csv")).unwrap();
    assert!(pos.contains("train,train,PROPN,1"));
}

#[test]
fn idf_and_represent() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["idf"], dir.path());
    let idf = fs::read_to_string(dir.path().join("idf.csv")).unwrap();
    // java: 3 of 25 train+dev tokens
    let want = -(3.0f64 / 25.0).ln();
    assert!(idf.lines().nth(1).unwrap() == format!("java,3,{want}"));

    let rep = tempfile::tempdir().unwrap();
    ok(&["represent", "--method", "wse", "--hash-dim", "8"], rep.path());
    let store = skillweak::embeddings::EmbeddingStore::read(rep.path().join("representation")).unwrap();
    assert_eq!(store.len(), 5);
    let rows = fs::read_to_string(rep.path().join("representation_rows.jsonl")).unwrap();
    assert!(rows.contains(r#""skill_id":"s5","phrase":"use spreadsheet software","contexts":0,"occurrences":0,"fallback":true"#));
}

#[test]
fn failures_have_stage_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["match", "--method", "fuzzy"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["match", "--skills", "/nonexistent.jsonl"], dir.path()).status.code(), Some(3));
    assert_eq!(run(&["match", "--method", "iso"], dir.path()).status.code(), Some(6));
    let empty = dir.path().join("empty.conll");
    fs::write(&empty, "").unwrap();
    let o = run(&["stats", "--test", empty.to_str().unwrap()], &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no sentences"));
}
