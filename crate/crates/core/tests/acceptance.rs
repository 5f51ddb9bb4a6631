//! End-to-end acceptance suite. Each test prints one pass/fail line with
//! its measured values; run with `--nocapture` to see them all:
//!
//! ```bash
//! cargo test -p refgame --test acceptance -- --nocapture
//! ```

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use refgame::domain::{
    enumerate_states, literal_truth, parse_utterance, render_description, render_features,
    AttributeSchema, FeatureSet, Utterance,
};
use refgame::engine::{contrastivity, rsa_speaker, TruthMatrix};
use refgame::harness::{
    run_experiment, BackendConfig, ExperimentConfig, LlmBackendConfig, ModelKind, RunRecord,
};
use refgame::llm::{
    baseline_prompt, proposer_extension_prompt, proposer_initial_prompt, semantic_eval_prompt,
    single_pass_prompt, CacheMode, LlmConfig,
};
use refgame::oracle::{OracleConfig, ProposerMode};
use refgame::stats::{bootstrap_ci, compare_bootstrap_p, mean};

fn a3ds() -> Arc<AttributeSchema> {
    Arc::new(AttributeSchema::a3ds())
}

fn oracle_experiment(
    model: ModelKind,
    n_distractors: usize,
    n_samples: usize,
    oracle: OracleConfig,
    master_seed: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        model,
        backend: BackendConfig::Oracle(oracle),
        n_distractors,
        n_samples,
        n_games: 100,
        max_iterations: 5,
        master_seed,
        jobs: 1,
        include_trace: false,
    }
}

fn report(ok: bool, name: &str, details: &str, elapsed: Duration) {
    println!(
        "{} {name}: {details} [{:.2}s]",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
}

/// The two quoted contrastivity values, plus every truth column for up to
/// four distractors checked against an independent count.
#[test]
fn contrastivity_quoted_values_exhaustive() {
    let start = Instant::now();

    // True of exactly one of two distractors -> 0.5; one of four -> 0.75.
    let half = contrastivity(&[true, true, false], 2).unwrap();
    let three_quarters = contrastivity(&[true, true, false, false, false], 4).unwrap();
    let mut checked = 0usize;
    for n_distractors in 1..=4usize {
        let columns = 1u32 << (n_distractors + 1);
        for bits in 0..columns {
            let column: Vec<bool> = (0..=n_distractors).map(|i| bits & (1 << i) != 0).collect();
            // Independent route: count false distractor rows directly.
            let expected_false = column[1..].iter().filter(|&&t| !t).count();
            let got = contrastivity(&column, n_distractors).unwrap();
            assert_eq!(got.false_of, expected_false, "column {column:?}");
            assert_eq!(got.n_distractors, n_distractors);
            let via_true_fraction =
                1.0 - column[1..].iter().filter(|&&t| t).count() as f64 / n_distractors as f64;
            assert!(
                (got.value() - via_true_fraction).abs() < 1e-15,
                "column {column:?}"
            );
            checked += 1;
        }
    }

    let elapsed = start.elapsed();
    let ok = half.value() == 0.5 && three_quarters.value() == 0.75 && elapsed.as_secs_f64() < 1.0;
    report(
        ok,
        "contrastivity_quoted_values_exhaustive",
        &format!(
            "1-of-2 -> {}, 1-of-4 -> {}, {checked} columns exhaustively checked",
            half.value(),
            three_quarters.value()
        ),
        elapsed,
    );
    assert_eq!(half.value(), 0.5);
    assert_eq!(three_quarters.value(), 0.75);
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
}

/// With an exact oracle the iterative engine solves every game: mean
/// ground-truth contrastivity 1.00 at one distractor and >= 0.95 at four
/// and eight, with every final utterance true of the target.
#[test]
fn perfect_oracle_ceiling() {
    let start = Instant::now();
    let schema = a3ds();
    let mut details = Vec::new();
    let mut ok = true;
    for n_distractors in [1usize, 4, 8] {
        let config = oracle_experiment(
            ModelKind::Iterative,
            n_distractors,
            8,
            OracleConfig::default(),
            7,
        );
        let outcome = run_experiment(&schema, &config, None).unwrap();
        assert_eq!(outcome.records.len(), 100);
        assert_eq!(outcome.failures, 0);
        let values: Vec<f64> = outcome.records.iter().map(|r| r.gt_contrastivity).collect();
        let m = mean(&values);
        let all_target_true = outcome.records.iter().all(|r| r.gt_target_true);
        details.push(format!("nd={n_distractors} mean={m:.3}"));
        ok &= all_target_true;
        if n_distractors == 1 {
            ok &= m == 1.0;
        } else {
            ok &= m >= 0.95;
        }
        assert!(all_target_true, "a final utterance was false of the target");
        if n_distractors == 1 {
            assert_eq!(m, 1.0, "mean at one distractor");
        } else {
            assert!(m >= 0.95, "mean {m} at {n_distractors} distractors");
        }
    }
    let elapsed = start.elapsed();
    ok &= elapsed.as_secs_f64() < 30.0;
    report(
        ok,
        "perfect_oracle_ceiling",
        &format!("{}, all target-true", details.join(", ")),
        elapsed,
    );
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
}

/// Noise-matched comparison of the iterative engine against the single-pass
/// ablation (flip rate 0.18, shared game seeds, shared noise keys):
/// iterative beats single-pass at four and eight distractors with bootstrap
/// P >= 0.95, and both stay at or above 0.9 at one distractor.
#[test]
fn noise_matched_iterative_vs_single_pass_ordering() {
    let start = Instant::now();
    let schema = a3ds();
    let noisy = |mode: ProposerMode| OracleConfig {
        seed: 5,
        eval_error_rate: 0.18,
        proposer_mode: mode,
        proposer_omission_rate: 0.0,
    };
    let master_seed = 11;

    let mut details = Vec::new();
    let mut clause_im_gt_sp = true;
    let mut clause_ceiling = true;
    let mut ceiling_means = (0.0, 0.0);
    for n_distractors in [1usize, 4, 8] {
        let im_config = oracle_experiment(
            ModelKind::Iterative,
            n_distractors,
            8,
            noisy(ProposerMode::SingleFeature),
            master_seed,
        );
        let im: Vec<f64> = run_experiment(&schema, &im_config, None)
            .unwrap()
            .records
            .iter()
            .map(|r| r.gt_contrastivity)
            .collect();

        let sp_config = oracle_experiment(
            ModelKind::SinglePass,
            n_distractors,
            10,
            noisy(ProposerMode::SubsetsLe2),
            master_seed,
        );
        let sp: Vec<f64> = run_experiment(&schema, &sp_config, None)
            .unwrap()
            .records
            .iter()
            .map(|r| r.gt_contrastivity)
            .collect();

        let p = compare_bootstrap_p(&im, &sp, 10_000, 1).unwrap().p_greater;
        details.push(format!(
            "nd={n_distractors} IM={:.3} SP={:.3} P={p:.3}",
            mean(&im),
            mean(&sp)
        ));
        if n_distractors == 1 {
            ceiling_means = (mean(&im), mean(&sp));
            clause_ceiling = mean(&im) >= 0.9 && mean(&sp) >= 0.9;
        } else {
            clause_im_gt_sp &= mean(&im) > mean(&sp) && p >= 0.95;
        }
    }

    let elapsed = start.elapsed();
    let ok = clause_im_gt_sp && clause_ceiling && elapsed.as_secs_f64() < 120.0;
    report(
        ok,
        "noise_matched_iterative_vs_single_pass_ordering",
        &details.join(", "),
        elapsed,
    );
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    assert!(
        clause_im_gt_sp,
        "iterative did not credibly beat single-pass at 4/8 distractors: {details:?}"
    );
    assert!(
        clause_ceiling,
        "at one distractor both models must stay at ceiling (>= 0.9): IM={:.3} SP={:.3}",
        ceiling_means.0, ceiling_means.1
    );
}

/// With an exact oracle, mean iterations strictly increase with the number
/// of distractors, and proposing more utterances per step never needs more
/// iterations.
#[test]
fn depth_and_width_trends_perfect_oracle() {
    let start = Instant::now();
    let schema = a3ds();
    let mut mean_iters = std::collections::BTreeMap::new();
    for n_samples in [4usize, 8] {
        for n_distractors in [1usize, 4, 8] {
            let config = oracle_experiment(
                ModelKind::Iterative,
                n_distractors,
                n_samples,
                OracleConfig::default(),
                7,
            );
            let outcome = run_experiment(&schema, &config, None).unwrap();
            let iters: Vec<f64> = outcome
                .records
                .iter()
                .map(|r| r.iterations_used as f64)
                .collect();
            mean_iters.insert((n_samples, n_distractors), mean(&iters));
        }
    }
    let elapsed = start.elapsed();

    let mut ok = true;
    for n_samples in [4usize, 8] {
        ok &= mean_iters[&(n_samples, 1)] < mean_iters[&(n_samples, 4)];
        ok &= mean_iters[&(n_samples, 4)] < mean_iters[&(n_samples, 8)];
    }
    for n_distractors in [1usize, 4, 8] {
        ok &= mean_iters[&(8, n_distractors)] <= mean_iters[&(4, n_distractors)];
    }
    ok &= elapsed.as_secs_f64() < 60.0;
    let details: Vec<String> = mean_iters
        .iter()
        .map(|((ns, nd), m)| format!("n={ns} nd={nd}: {m:.2}"))
        .collect();
    report(
        ok,
        "depth_and_width_trends_perfect_oracle",
        &details.join(", "),
        elapsed,
    );
    for n_samples in [4usize, 8] {
        assert!(
            mean_iters[&(n_samples, 1)] < mean_iters[&(n_samples, 4)]
                && mean_iters[&(n_samples, 4)] < mean_iters[&(n_samples, 8)],
            "iterations not strictly increasing for n={n_samples}: {mean_iters:?}"
        );
    }
    for n_distractors in [1usize, 4, 8] {
        assert!(
            mean_iters[&(8, n_distractors)] <= mean_iters[&(4, n_distractors)],
            "wider proposals needed more iterations at nd={n_distractors}: {mean_iters:?}"
        );
    }
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
}

/// Parser-based literal truth agrees with direct subset evaluation over the
/// full state enumeration for 200 generated template utterances.
#[test]
fn parser_truth_matches_brute_force_enumeration() {
    let start = Instant::now();
    let schema = a3ds();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    // Random non-empty feature sets rendered through the fragment grammar.
    let mut utterances: Vec<(FeatureSet, String)> = Vec::with_capacity(200);
    while utterances.len() < 200 {
        let mut features = FeatureSet::empty(&schema);
        for attr in 0..schema.len() {
            if rng.random_bool(0.4) {
                let value = rng.random_range(0..schema.value_count(attr)) as u8;
                features = features.with(attr, value);
            }
        }
        if features.is_empty() {
            continue;
        }
        let text = render_features(&schema, &features).unwrap();
        utterances.push((features, text));
    }

    let states: Vec<_> = enumerate_states(&schema).collect();
    assert_eq!(states.len(), 12_348);
    let mut pairs = 0usize;
    for (generating, text) in &utterances {
        let parsed = parse_utterance(&schema, text).unwrap();
        for state in &states {
            // Independent route: subset check on the generating features,
            // bypassing the parser entirely.
            let direct = generating
                .iter()
                .all(|(attr, value)| state.value_index(attr) == value);
            let via_parser = literal_truth(&parsed, state);
            assert_eq!(
                via_parser, direct,
                "disagreement on {text:?} vs state {:?}",
                state.assignment(&schema)
            );
            pairs += 1;
        }
    }
    let elapsed = start.elapsed();
    let ok = pairs == 200 * 12_348 && elapsed.as_secs_f64() < 60.0;
    report(
        ok,
        "parser_truth_matches_brute_force_enumeration",
        &format!("{pairs} (utterance, state) pairs agree"),
        elapsed,
    );
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
}

/// Rendering then parsing recovers every one of the 12,348 states.
#[test]
fn render_parse_round_trip_all_states() {
    let start = Instant::now();
    let schema = a3ds();
    let mut count = 0usize;
    for state in enumerate_states(&schema) {
        let text = render_description(&schema, &state).unwrap();
        let parsed = parse_utterance(&schema, &text).unwrap();
        assert_eq!(
            parsed.as_state().as_ref(),
            Some(&state),
            "round trip failed for {text:?}"
        );
        count += 1;
    }
    let elapsed = start.elapsed();
    let ok = count == 12_348 && elapsed.as_secs_f64() < 10.0;
    report(
        ok,
        "render_parse_round_trip_all_states",
        &format!("{count} states recovered exactly"),
        elapsed,
    );
    assert_eq!(count, 12_348);
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
}

/// The hand-derived two-utterance speaker distribution, plus normalization
/// on a thousand random truth matrices.
#[test]
fn rsa_speaker_hand_derived_distribution() {
    let start = Instant::now();
    let schema = a3ds();
    let matrix = |columns: &[Vec<bool>]| {
        let n_states = columns[0].len();
        TruthMatrix {
            states: (0..n_states).map(|i| format!("state {i}")).collect(),
            utterances: (0..columns.len())
                .map(|i| Utterance::new(&schema, format!("u{i}")))
                .collect(),
            cells: (0..n_states)
                .map(|s| columns.iter().map(|c| c[s]).collect())
                .collect(),
        }
    };

    // u1 true of the target only, u2 true of the target and one distractor.
    let m = matrix(&[vec![true, false], vec![true, true]]);
    let p = rsa_speaker(&m, 1.0, None).unwrap();
    let exact = ((p[0] - 2.0 / 3.0).abs() < 1e-9) && ((p[1] - 1.0 / 3.0).abs() < 1e-9);

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n_states = rng.random_range(2..6);
        let n_utts = rng.random_range(1..7);
        let mut columns: Vec<Vec<bool>> = (0..n_utts)
            .map(|_| (0..n_states).map(|_| rng.random_bool(0.5)).collect())
            .collect();
        // Guarantee at least one target-true utterance.
        let anchor = rng.random_range(0..n_utts);
        columns[anchor][0] = true;
        let alpha = rng.random_range(0.2..4.0);
        let costs: Vec<f64> = (0..n_utts).map(|_| rng.random_range(0.0..1.0)).collect();
        let p = rsa_speaker(&matrix(&columns), alpha, Some(&costs)).unwrap();
        worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
        assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
    let elapsed = start.elapsed();
    let ok = exact && worst < 1e-12;
    report(
        ok,
        "rsa_speaker_hand_derived_distribution",
        &format!(
            "two-utterance case = ({:.6}, {:.6}), worst |sum-1| = {worst:.2e} over 1000 matrices",
            p[0], p[1]
        ),
        elapsed,
    );
    assert!(exact, "expected (2/3, 1/3), got {p:?}");
    assert!(worst < 1e-12, "normalization off by {worst}");
}

fn strip_volatile(record: &RunRecord) -> String {
    let mut value = serde_json::to_value(record).unwrap();
    value.as_object_mut().unwrap().remove("wall_ms");
    value.to_string()
}

/// A five-game iterative run recorded against a bundled fake endpoint
/// replays bit-identically (modulo wall-clock) with networking disabled.
#[test]
fn record_replay_closure() {
    let start = Instant::now();
    let schema = a3ds();
    let dir = tempfile::tempdir().unwrap();
    let cache_file = dir.path().join("transcripts.jsonl");

    let server = common::FakeServer::start();
    let llm = |endpoint: String, cache_mode: CacheMode| LlmConfig {
        endpoint,
        model: "fake-model".into(),
        temperature: 0.1,
        max_tokens: 512,
        timeout_secs: 10,
        max_retries: 1,
        max_in_flight: 2,
        cache_mode,
        cache_file: Some(cache_file.clone()),
    };
    let experiment = |llm_config: LlmConfig| ExperimentConfig {
        model: ModelKind::Iterative,
        backend: BackendConfig::Llm(LlmBackendConfig { llm: llm_config }),
        n_distractors: 2,
        n_samples: 4,
        n_games: 5,
        max_iterations: 5,
        master_seed: 3,
        jobs: 1,
        include_trace: true,
    };

    let recorded = run_experiment(
        &schema,
        &experiment(llm(server.url.clone(), CacheMode::Record)),
        None,
    )
    .unwrap();
    assert_eq!(recorded.records.len(), 5);
    assert_eq!(recorded.failures, 0, "record run had failures");
    let requests_after_record = server.request_count();
    assert!(requests_after_record > 0);

    // Replay against an unroutable endpoint: served entirely from the cache.
    let replayed = run_experiment(
        &schema,
        &experiment(llm("http://127.0.0.1:1/v1".into(), CacheMode::Replay)),
        None,
    )
    .unwrap();
    assert_eq!(replayed.failures, 0, "replay run had failures");
    assert_eq!(
        server.request_count(),
        requests_after_record,
        "replay touched the network"
    );

    let recorded_lines: Vec<String> = recorded.records.iter().map(strip_volatile).collect();
    let replayed_lines: Vec<String> = replayed.records.iter().map(strip_volatile).collect();
    let identical = recorded_lines == replayed_lines;
    let elapsed = start.elapsed();
    report(
        identical,
        "record_replay_closure",
        &format!(
            "5 games, {} http requests recorded, replay bit-identical modulo wall-clock: {identical}",
            requests_after_record
        ),
        elapsed,
    );
    assert!(identical, "replayed records differ from recorded ones");
}

/// Rendered prompts byte-match the checked-in golden files.
#[test]
fn prompt_templates_match_golden_files() {
    let start = Instant::now();
    let target =
        "The floor is purple, the wall is green, the red small block is in the left corner.";
    let distractor =
        "The floor is red, the wall is green, the red small block is in the middle.".to_string();

    let cases: Vec<(&str, String, &str)> = vec![
        (
            "proposer_initial",
            proposer_initial_prompt(4, target),
            include_str!("golden/proposer_initial.txt"),
        ),
        (
            "proposer_extension",
            proposer_extension_prompt(4, "The floor is purple", target),
            include_str!("golden/proposer_extension.txt"),
        ),
        (
            "proposer_single_pass",
            single_pass_prompt(10, target),
            include_str!("golden/proposer_single_pass.txt"),
        ),
        (
            "semantic_eval",
            semantic_eval_prompt(target, "The floor is purple"),
            include_str!("golden/semantic_eval.txt"),
        ),
        (
            "baseline",
            baseline_prompt(target, &[distractor]),
            include_str!("golden/baseline.txt"),
        ),
    ];
    let mut ok = true;
    for (name, rendered, golden) in &cases {
        if rendered != golden {
            ok = false;
            eprintln!("prompt {name} deviates from its golden file");
        }
    }
    let elapsed = start.elapsed();
    report(
        ok,
        "prompt_templates_match_golden_files",
        &format!("{} prompts byte-checked", cases.len()),
        elapsed,
    );
    for (name, rendered, golden) in &cases {
        assert_eq!(rendered, golden, "prompt {name}");
    }
}

/// Degenerate intervals on constants, P = 1 on separated samples, and
/// P close to one half on identically distributed ones.
#[test]
fn bootstrap_statistics_sanity() {
    let start = Instant::now();

    let constants = vec![0.25; 40];
    let (lo, hi) = bootstrap_ci(&constants, 10_000, 0.95, 9).unwrap();
    let degenerate = lo == hi;

    let ones = vec![1.0; 50];
    let zeros = vec![0.0; 50];
    let separated = compare_bootstrap_p(&ones, &zeros, 10_000, 9).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let sample: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..1.0)).collect();
    let selfsame = compare_bootstrap_p(&sample, &sample, 10_000, 14).unwrap();
    let near_half = (selfsame.p_greater - 0.5).abs() <= 0.02;

    let elapsed = start.elapsed();
    let ok = degenerate && separated.p_greater == 1.0 && near_half;
    report(
        ok,
        "bootstrap_statistics_sanity",
        &format!(
            "constant CI = ({lo}, {hi}), separated P = {}, self P = {:.3}",
            separated.p_greater, selfsame.p_greater
        ),
        elapsed,
    );
    assert!(degenerate, "constant vector CI not degenerate: ({lo}, {hi})");
    assert_eq!(separated.p_greater, 1.0);
    assert!(
        near_half,
        "self-comparison P = {} not within 0.5 +/- 0.02",
        selfsame.p_greater
    );
}
