use std::path::PathBuf;

use hdmt_core::harness::{self, emit_table, Execution, Format, SimConfig, SimTest};

fn config(json: &str) -> SimConfig {
    SimConfig::from_json(json).unwrap()
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = config(
        r#"{"p_list": [12], "n_star_list": [12, 16], "distributions": ["normal", "chi2_2"],
            "covariance": "case2", "amplitude": 0.3, "replications": 60, "master_seed": 77,
            "tests": ["our_umvue", "our_une", "sk"]}"#,
    );
    let seq = harness::run_power(&cfg, Execution::Sequential).unwrap();
    for threads in [1, 2, 5] {
        let par = harness::run_power(&cfg, Execution::Parallel { threads }).unwrap();
        assert_eq!(par, seq, "threads = {threads}");
        assert_eq!(emit_table(&par, Format::Csv).unwrap(), emit_table(&seq, Format::Csv).unwrap());
    }
}

#[test]
fn power_grows_with_sample_size() {
    let cfg = config(
        r#"{"p_list": [20], "n_star_list": [20, 50, 100], "distributions": ["normal"],
            "covariance": "case1", "amplitude": 0.1, "replications": 600, "master_seed": 11,
            "tests": ["our_umvue", "our_une"]}"#,
    );
    let run = harness::run_power(&cfg, Execution::from_threads(None)).unwrap();
    for test in [SimTest::OurUmvue, SimTest::OurUne] {
        let rates: Vec<f64> = run.cells.iter().map(|c| c.rate(test).unwrap()).collect();
        for w in rates.windows(2) {
            let se = ((w[0] * (1.0 - w[0]) + w[1] * (1.0 - w[1])) / cfg.replications as f64).sqrt();
            assert!(w[1] >= w[0] - 2.0 * se, "{test:?}: {rates:?}");
        }
        assert!(rates[2] > rates[0] + 0.1, "{test:?}: {rates:?}");
    }
}

#[test]
fn null_rejections_fall_inside_binomial_band() {
    let r = 2000;
    let cfg = config(&format!(
        r#"{{"p_list": [50], "n_star_list": [100], "distributions": ["normal"],
            "covariance": "case1", "replications": {r}, "master_seed": 2024,
            "tests": ["our_umvue", "our_une"]}}"#
    ));
    let run = harness::run_asl(&cfg, Execution::from_threads(None)).unwrap();
    // central 99.9% band of Binomial(r, 0.05)
    let sd = (r as f64 * 0.05 * 0.95).sqrt();
    let (lo, hi) = (r as f64 * 0.05 - 3.2905 * sd, r as f64 * 0.05 + 3.2905 * sd);
    for tally in &run.cells[0].tallies {
        assert_eq!(tally.degenerate, 0);
        let x = tally.rejections as f64;
        assert!(x >= lo && x <= hi, "{:?}: {} not in [{lo:.1}, {hi:.1}]", tally.test, tally.rejections);
    }
}

#[test]
fn markdown_table_matches_golden_file() {
    let cfg = config(
        r#"{"p_list": [10, 20], "n_star_list": [12, 20], "distributions": ["normal", "chi2_2", "chi2_8"],
            "covariance": "case1", "replications": 200, "master_seed": 1,
            "tests": ["our_umvue", "our_une", "sk"]}"#,
    );
    let rendered =
        emit_table(&harness::run_asl(&cfg, Execution::from_threads(None)).unwrap(), Format::Markdown).unwrap();
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/asl_small.md");
    if std::env::var_os("HDMT_BLESS").is_some() {
        std::fs::write(&path, &rendered).unwrap();
    }
    let golden = std::fs::read_to_string(&path).unwrap();
    assert_eq!(rendered, golden);
}
