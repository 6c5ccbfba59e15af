use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use headsynergy::report::{read_csv, ComparisonRow, MaskGridRow, MaskIndexRow, ScoreRow};
use headsynergy::{PruneMask, PruneMethod, SelectionMode};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_headsynergy"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn full_pipeline_on_synthetic_traces() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("t.jsonl");
    let out = dir.path().join("out");

    let o = run(&[
        "synth",
        "--generators",
        "uniform:4x5,constant,dup:0,xor,uniform:2x2",
        "--samples",
        "500",
        "--layers",
        "2",
        "--seed",
        "3",
        "--out",
        s(&traces),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let o = run(&[
        "analyze",
        "--traces",
        s(&traces),
        "--all-layers",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let scores: Vec<ScoreRow> = read_csv(out.join("scores.csv")).unwrap();
    assert_eq!(scores.len(), 24);
    // 12 heads per layer, pairs only, two layers.
    let pairs = std::fs::read_to_string(out.join("dividends_pairs.csv")).unwrap();
    assert_eq!(pairs.lines().count() - 1, 2 * 66);
    assert!(!out.join("dividends_triples.csv").exists());

    let o = run(&["prune", "--out", s(&out), "--seed", "1,2,3,4,5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let index: Vec<MaskIndexRow> = read_csv(out.join("masks.csv")).unwrap();
    // 3 rates × (1 harsanyi + 5 random) × 2 modes.
    assert_eq!(index.len(), 36);
    for mode in [SelectionMode::PerLayerCeil, SelectionMode::GlobalFloor] {
        let harsanyi = index
            .iter()
            .filter(|r| r.mode == mode && r.method == PruneMethod::Harsanyi)
            .count();
        assert_eq!(harsanyi, 3);
        for rate in [0.05, 0.10, 0.20] {
            let random: Vec<&MaskIndexRow> = index
                .iter()
                .filter(|r| r.mode == mode && r.method == PruneMethod::Random && r.rate == rate)
                .collect();
            assert_eq!(random.len(), 5);
            assert!(random
                .iter()
                .all(|r| r.pruned_heads == random[0].pruned_heads));
        }
    }
    let mask = PruneMask::read(out.join("masks/harsanyi_per_layer_ceil_r0.05.json")).unwrap();
    // The constant head (5) is the lowest-scoring head in each layer.
    assert_eq!(mask.pruned.len(), 2);
    assert!(mask.pruned.iter().all(|h| h.head == 5));
    let grid: Vec<MaskGridRow> = read_csv(out.join("masks_grid.csv")).unwrap();
    assert_eq!(grid.len(), 36 * 24);
    for row in grid
        .iter()
        .filter(|r| r.method == PruneMethod::Harsanyi && r.pruned && r.rate == 0.05)
    {
        assert!(grid.iter().any(|g| g.method == PruneMethod::Harsanyi
            && g.mode == row.mode
            && g.rate == 0.20
            && (g.layer, g.head) == (row.layer, row.head)
            && g.pruned));
    }

    let o = run(&[
        "gibbs",
        "--traces",
        s(&traces),
        "--heads",
        "0.0,0.1,0.5,0.6,0.7",
        "--trials",
        "300",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let g: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("gibbs.json")).unwrap()).unwrap();
    assert_eq!(g["violations"], 0);
    let (lnz, f) = (
        g["log_partition"].as_f64().unwrap(),
        g["free_energy"].as_f64().unwrap(),
    );
    assert!((f + lnz).abs() < 1e-12);
    // The constant head is the null player removed by default.
    assert_eq!(g["pruning_audit"]["pruned"][0], "0.5");
    assert!(
        g["pruning_audit"]["delta_free_energy"]
            .as_f64()
            .unwrap()
            .abs()
            < 1e-12
    );

    // Report joins an eval result by mask digest.
    let target = index
        .iter()
        .find(|r| r.method == PruneMethod::Harsanyi)
        .unwrap();
    let eval = dir.path().join("eval.json");
    std::fs::write(
        &eval,
        serde_json::json!({
            "model": "synthetic", "mask_digest": target.mask_digest, "dataset": "toy",
            "samples": 10, "perplexity": 12.5, "tokens": 900, "tokens_per_second": null
        })
        .to_string(),
    )
    .unwrap();
    let o = run(&["report", "--out", s(&out), "--eval", s(&eval)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cmp: Vec<ComparisonRow> = read_csv(out.join("pruning_comparison.csv")).unwrap();
    assert_eq!(cmp.len(), 36);
    assert_eq!(cmp.iter().filter(|r| r.perplexity == Some(12.5)).count(), 1);
    for fig in [
        "pairs_layer0.svg",
        "pairs_layer1.svg",
        "scores_map.svg",
        "mask_harsanyi_global_floor_r0.20.svg",
    ] {
        let svg = std::fs::read_to_string(out.join("figures").join(fig)).unwrap();
        assert!(svg.starts_with("<svg"), "{fig}");
    }
}

#[test]
fn single_layer_analysis_matches_binomial_counts() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "analyze",
        "--traces",
        s(&fixture("layer12.jsonl")),
        "--layer",
        "0",
        "--out",
        s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = |n: &str| {
        std::fs::read_to_string(dir.path().join(n))
            .unwrap()
            .lines()
            .count()
            - 1
    };
    assert_eq!(rows("dividends_pairs.csv"), 66);
    assert_eq!(rows("dividends_triples.csv"), 220);
    assert_eq!(rows("entropy.csv"), 298);
    let run_info: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.json")).unwrap())
            .unwrap();
    assert_eq!(run_info["trace_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn duplicate_heads_pair_dividend_equals_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = run(&[
        "analyze",
        "--traces",
        s(&fixture("layer12.jsonl")),
        "--heads",
        "0.0,0.7",
        "--out",
        s(out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    // Head 7 duplicates head 0: I(0;7) = H(0).
    let text = std::fs::read_to_string(out.join("entropy.csv")).unwrap();
    let h0: f64 = text
        .lines()
        .find(|l| l.starts_with("0.0,1,"))
        .unwrap()
        .rsplit(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    let pairs = std::fs::read_to_string(out.join("dividends_pairs.csv")).unwrap();
    let d: f64 = pairs
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert!((d - h0).abs() < 1e-9);
}

#[test]
fn token_granularity_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "analyze",
        "--traces",
        s(&fixture("token_small.jsonl")),
        "--out",
        s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("entropy.csv")).unwrap();
    // Six token observations of head 0: symbols 0,1,2,0,2,1 give log2(3) bits.
    assert!(text.contains(&format!("0.0,1,{}", 3f64.log2())));
    assert!(text.contains("0.2,1,0.0\n"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    // Guard: 22 heads is above the exact Gibbs limit.
    let big = d.join("big.jsonl");
    assert!(run(&[
        "synth",
        "--generators",
        "uniform:2x22",
        "--samples",
        "20",
        "--out",
        s(&big)
    ])
    .status
    .success());
    let o = run(&["gibbs", "--traces", s(&big), "--layer", "0", "--out", s(d)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    // Missing record in a trace file.
    let bad = d.join("bad.jsonl");
    let text = std::fs::read_to_string(fixture("token_small.jsonl")).unwrap();
    let truncated: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with(r#"{"s":1,"l":0,"h":2"#))
        .collect();
    std::fs::write(&bad, truncated.join("\n")).unwrap();
    let o = run(&["analyze", "--traces", s(&bad), "--out", s(d)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("missing record (s=1, l=0, h=2)"),
        "{}",
        stderr(&o)
    );

    // Unknown head.
    let o = run(&[
        "analyze",
        "--traces",
        s(&fixture("token_small.jsonl")),
        "--heads",
        "0.0,0.9",
        "--out",
        s(d),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown head 0.9"));

    // Outputs never overwrite the input.
    let clash = d.join("clash");
    std::fs::create_dir(&clash).unwrap();
    std::fs::copy(fixture("token_small.jsonl"), clash.join("entropy.csv")).unwrap();
    let o = run(&[
        "analyze",
        "--traces",
        s(&clash.join("entropy.csv")),
        "--out",
        s(&clash),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(
        std::fs::read_to_string(clash.join("entropy.csv")).unwrap(),
        std::fs::read_to_string(fixture("token_small.jsonl")).unwrap()
    );

    // Report names what is missing.
    let o = run(&["report", "--out", s(&d.join("empty"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("scores.csv"));

    // Bad flag value.
    let o = run(&["analyze", "--traces", "x", "--convention", "weird"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_documents_formats() {
    let o = run(&["--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for needle in ["\"htrc\": 1", "scores.csv", "Exit codes", "synth", "report"] {
        assert!(text.contains(needle), "{needle}");
    }
}
