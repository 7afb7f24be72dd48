use std::path::Path;
use std::process::{Command, Output};

use spectemp::evalhar::{exact_search, default_ids, Similarity};
use spectemp::matio::{load_embeddings, load_model};

fn spectemp(args: &[&str]) -> Output {
    spectemp_env(args, &[])
}

fn spectemp_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spectemp"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes a small synthetic task into `dir` and returns the task flags.
fn synth(dir: &Path, seed: &str) -> Vec<String> {
    ok(&spectemp(&[
        "synth", "--output-dir", p(dir), "--n-docs", "500", "--n-queries", "50", "--dim", "16",
        "--spikes", "2:30,3:10,3:4", "--tau", "1.5", "--seed", seed,
    ]));
    ["docs.embf", "queries.embf", "qrels.txt"]
        .iter()
        .zip(["--docs", "--queries", "--qrels"])
        .flat_map(|(f, flag)| [flag.to_string(), p(&dir.join(f)).to_string()])
        .collect()
}

fn with<'a>(base: &'a [String], extra: &[&'a str]) -> Vec<&'a str> {
    let mut v: Vec<&str> = extra[..1].to_vec();
    v.extend(base.iter().map(String::as_str));
    v.extend(&extra[1..]);
    v
}

#[test]
fn fit_writes_a_model_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "1");
    let docs = dir.path().join("docs.embf");
    let model = dir.path().join("m.stm");
    let text = ok(&spectemp(&["fit", "--input", p(&docs), "--output", p(&model)]));
    for key in ["dimension      16", "rows used      500 of 500", "noise floor", "knee", "reference snr"] {
        assert!(text.contains(key), "{text}");
    }
    assert_eq!(load_model(&model).unwrap().spectrum.eigenvalues.len(), 16);

    let again = dir.path().join("m2.stm");
    ok(&spectemp(&["fit", "--input", p(&docs), "--output", p(&again)]));
    assert_eq!(std::fs::read(&model).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn exit_codes_by_error_class() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "1");
    let docs = dir.path().join("docs.embf");
    let out = spectemp(&["fit", "--input", p(&docs), "--output", "x.stm", "--tail-fraction", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tail fraction"));

    let out = spectemp(&["fit", "--input", p(&dir.path().join("missing.embf")), "--output", "x.stm"]);
    assert_eq!(out.status.code(), Some(3));

    let garbage = dir.path().join("garbage.embf");
    std::fs::write(&garbage, b"EMBFxxxx").unwrap();
    let out = spectemp(&["fit", "--input", p(&garbage), "--output", "x.stm"]);
    assert_eq!(out.status.code(), Some(3));

    // one row cannot define a covariance
    let one = dir.path().join("one.embf");
    spectemp::matio::save_embeddings(&spectemp::EmbeddingMatrix::new(1, 2, vec![1.0, 2.0]).unwrap(), &one).unwrap();
    let out = spectemp(&["fit", "--input", p(&one), "--output", p(&dir.path().join("x.stm"))]);
    assert_eq!(out.status.code(), Some(4));

    let out = spectemp(&["fit", "--bogus-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_formats_agree() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "2");
    let model = dir.path().join("m.stm");
    ok(&spectemp(&["fit", "--input", p(&dir.path().join("docs.embf")), "--output", p(&model)]));

    let json = ok(&spectemp(&["report", "--model", p(&model), "--dims", "16,12,8,4,2", "--json"]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let gammas: Vec<f64> = v["gamma"].as_array().unwrap().iter().map(|g| g["gamma"].as_f64().unwrap()).collect();
    assert_eq!(gammas.len(), 5);
    // dims are listed largest first, so gamma must not decrease
    for w in gammas.windows(2) {
        assert!(w[0] <= w[1]);
    }

    let csv = ok(&spectemp(&["report", "--model", p(&model), "--dims", "16,12,8,4,2", "--csv"]));
    let (spectrum, gamma) = csv.split_once("\n\n").unwrap();
    assert!(spectrum.starts_with("rank,eigenvalue,snr\n"));
    assert_eq!(spectrum.lines().count(), 17);
    let csv_gammas: Vec<f64> = gamma.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(csv_gammas, gammas);
    let json_ev: Vec<f64> = v["spectrum"].as_array().unwrap().iter().map(|r| r["eigenvalue"].as_f64().unwrap()).collect();
    let csv_ev: Vec<f64> = spectrum.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(json_ev, csv_ev);

    let out = spectemp(&["report", "--model", p(&model), "--dims", "8,40,17"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("40,17"), "{err}");
}

#[test]
fn transform_contract() {
    let dir = tempfile::tempdir().unwrap();
    // mirrored corpus: zero mean, so centering leaves cosine unchanged
    let base = spectemp::evalhar::generate_synthetic(&spectemp::evalhar::SynthSpec {
        n_docs: 300,
        n_queries: 10,
        dim: 12,
        spikes: vec![(3, 20.0)],
        noise_variance: 1.0,
        query_perturbation: 0.0,
        seed: 4,
    })
    .unwrap();
    let mut data = base.docs.as_slice().to_vec();
    data.extend(base.docs.as_slice().iter().map(|v| -v));
    let raw = spectemp::EmbeddingMatrix::new(600, 12, data).unwrap();
    let input = dir.path().join("x.embf");
    spectemp::matio::save_embeddings(&raw, &input).unwrap();
    let model = dir.path().join("m.stm");
    ok(&spectemp(&["fit", "--input", p(&input), "--output", p(&model)]));

    let out = dir.path().join("y.embf");
    ok(&spectemp(&["transform", "--model", p(&model), "--input", p(&input), "--output", p(&out), "--k", "12", "--gamma", "0"]));
    let y = load_embeddings(&out).unwrap();
    let ids = default_ids("d", 600);
    let a = exact_search(&raw, &ids, &raw, &ids, Similarity::Cosine, 10).unwrap();
    let b = exact_search(&y, &ids, &y, &ids, Similarity::Cosine, 10).unwrap();
    for (qa, qb) in a.results.values().zip(b.results.values()) {
        let ra: Vec<&str> = qa.iter().map(|r| r.0.as_str()).collect();
        let rb: Vec<&str> = qb.iter().map(|r| r.0.as_str()).collect();
        assert_eq!(ra, rb);
    }

    ok(&spectemp(&["transform", "--model", p(&model), "--input", p(&input), "--output", p(&out), "--k", "5"]));
    let bytes = std::fs::read(&out).unwrap();
    assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 600);
    assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 5);

    let bad = spectemp(&["transform", "--model", p(&model), "--input", p(&input), "--output", p(&out), "--k", "5", "--gamma", "2"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn grid_emits_21_rows_per_k() {
    let dir = tempfile::tempdir().unwrap();
    let task = synth(dir.path(), "3");
    let csv = ok(&spectemp(&with(&task, &["grid", "--dims", "4,8", "--csv"])));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,gamma,score"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 42);
    assert_eq!(rows.iter().filter(|r| r.starts_with("4,")).count(), 21);
    assert!(rows[20].starts_with("4,1,"));
}

#[test]
fn eval_and_sensitivity_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let task = synth(dir.path(), "4");
    let csv = ok(&spectemp(&with(&task, &["eval", "--dims", "4,8", "--seeds", "1999,5", "--methods", "pca,spectemp,random_project", "--csv"])));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("method,k,seed,metric,value"));
    // 3 methods x 2 dims x (2 seeds + mean)
    assert_eq!(lines.count(), 18);
    assert!(csv.contains("spectemp,8,mean,ndcg_at_10,"));

    let table = ok(&spectemp(&with(&task, &["sensitivity", "--dims", "4,8"])));
    assert!(table.contains("max spread:"), "{table}");
    let csv = ok(&spectemp(&with(&task, &["sensitivity", "--dims", "4,8", "--csv"])));
    assert_eq!(csv.lines().count(), 1 + 4 * 2);

    let out = spectemp(&with(&task, &["eval", "--dims", "4", "--methods", "svd"]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn custom_id_files() {
    let dir = tempfile::tempdir().unwrap();
    let task = synth(dir.path(), "5");
    let doc_ids: String = (0..500).map(|i| format!("doc{i:04}\n")).collect();
    let query_ids: String = (0..50).map(|i| format!("query{i}\n")).collect();
    let qrels = std::fs::read_to_string(dir.path().join("qrels.txt")).unwrap();
    let renamed: String = qrels
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            let q: usize = f[0][1..].parse().unwrap();
            let d: usize = f[2][1..].parse().unwrap();
            format!("query{q} 0 doc{d:04} {}\n", f[3])
        })
        .collect();
    std::fs::write(dir.path().join("d.txt"), doc_ids).unwrap();
    std::fs::write(dir.path().join("q.txt"), query_ids).unwrap();
    std::fs::write(dir.path().join("r.txt"), renamed).unwrap();
    let default = ok(&spectemp(&with(&task, &["eval", "--dims", "4", "--methods", "pca", "--csv"])));
    let custom = ok(&spectemp(&[
        "eval", "--docs", &task[1], "--queries", &task[3], "--qrels", p(&dir.path().join("r.txt")),
        "--doc-ids", p(&dir.path().join("d.txt")), "--query-ids", p(&dir.path().join("q.txt")),
        "--dims", "4", "--methods", "pca", "--csv",
    ]));
    assert_eq!(default, custom);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let task = synth(dir.path(), "6");
    let args = with(&task, &["eval", "--dims", "4,8", "--seeds", "1,2", "--csv"]);
    let one = ok(&spectemp_env(&args, &[("SPECTEMP_THREADS", "1")]));
    let many = ok(&spectemp_env(&args, &[("SPECTEMP_THREADS", "3")]));
    let auto = ok(&spectemp_env(&args, &[("SPECTEMP_THREADS", "0")]));
    assert_eq!(one, many);
    assert_eq!(one, auto);
    let bad = spectemp_env(&args, &[("SPECTEMP_THREADS", "lots")]);
    assert_eq!(bad.status.code(), Some(2));
}
