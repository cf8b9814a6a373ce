//! Acceptance gate. Each criterion runs in isolation and prints one PASS/FAIL
//! line; the process exits non-zero if any fails.

use chrono::{Duration as Days, NaiveDate, NaiveDateTime};
use labelflow_core::agent::{conversation_tokens, prune_context, prune_in_place, Conversation, PrunerConfig, TokenCounter, WordCounter};
use labelflow_core::ehr::{DocKind, NoteType, RecordKind, RetrievalFilter, Store};
use labelflow_core::eval::{
    apply_adjudication, confusion, metrics, micro_average, AdjudicationVerdict, ConfusionMatrix, EvalTask,
    LabeledCase, Verdict,
};
use labelflow_core::streamer::{extract_structured, validate_output, ExtractError, Label, TaskName};
use labelflow_core::synth::{generate_cohort, CohortSpec, CohortTask};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

struct Row {
    name: &'static str,
    cm: (u64, u64, u64, u64),
    expected: [f64; 4],
}

const REFERENCE_ROWS: [Row; 8] = [
    Row { name: "ORN before", cm: (30, 32, 4, 167), expected: [48.4, 88.2, 62.5, 84.5] },
    Row { name: "ORN after", cm: (48, 11, 0, 170), expected: [81.4, 100.0, 89.7, 95.2] },
    Row { name: "Prostate before", cm: (37, 3, 3, 37), expected: [92.5, 92.5, 92.5, 92.5] },
    Row { name: "Prostate after", cm: (37, 1, 3, 39), expected: [97.4, 92.5, 94.9, 95.0] },
    Row { name: "H&N before", cm: (46, 4, 2, 30), expected: [92.0, 95.8, 93.9, 92.7] },
    Row { name: "H&N after", cm: (46, 2, 1, 32), expected: [95.8, 97.9, 96.8, 96.3] },
    Row { name: "Total before", cm: (113, 39, 9, 234), expected: [74.3, 92.6, 82.5, 87.8] },
    Row { name: "Total after", cm: (131, 14, 4, 241), expected: [90.3, 97.0, 93.6, 95.4] },
];

fn cm((tp, fp, fn_, tn): (u64, u64, u64, u64)) -> ConfusionMatrix {
    ConfusionMatrix::new(tp, fp, fn_, tn)
}

/// Textbook formulas in floating point.
fn float_metrics((tp, fp, fn_, tn): (u64, u64, u64, u64)) -> [f64; 4] {
    let (tp, fp, fn_, tn) = (tp as f64, fp as f64, fn_ as f64, tn as f64);
    let pr = tp / (tp + fp);
    let re = tp / (tp + fn_);
    [100.0 * pr, 100.0 * re, 100.0 * 2.0 * pr * re / (pr + re), 100.0 * (tp + tn) / (tp + fp + fn_ + tn)]
}

fn metric_rows_oracle() -> String {
    let start = Instant::now();
    for row in &REFERENCE_ROWS {
        let got = metrics(&cm(row.cm)).cells();
        let oracle = float_metrics(row.cm);
        for k in 0..4 {
            let tenths = got[k].unwrap_or_else(|| panic!("{}: undefined cell {k}", row.name)).tenths();
            let expected = (row.expected[k] * 10.0).round() as u32;
            assert_eq!(tenths, expected, "{} cell {k}", row.name);
            assert!((tenths as f64 / 10.0 - oracle[k]).abs() <= 0.05, "{} cell {k} vs {}", row.name, oracle[k]);
            assert!((row.expected[k] - oracle[k]).abs() <= 0.05, "{} cell {k} expected", row.name);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    format!("8 rows x 4 cells in {elapsed:?}")
}

fn pooling() -> String {
    let sum = |rows: [usize; 3]| {
        rows.iter().fold((0, 0, 0, 0), |a, &i| {
            let c = REFERENCE_ROWS[i].cm;
            (a.0 + c.0, a.1 + c.1, a.2 + c.2, a.3 + c.3)
        })
    };
    assert_eq!(sum([0, 2, 4]), (113, 39, 9, 234));
    assert_eq!(sum([1, 3, 5]), (131, 14, 4, 241));
    assert_eq!(sum([0, 2, 4]), REFERENCE_ROWS[6].cm);
    assert_eq!(sum([1, 3, 5]), REFERENCE_ROWS[7].cm);
    let pooled = |rows: [usize; 3]| micro_average(&rows.map(|i| cm(REFERENCE_ROWS[i].cm)));
    assert_eq!(pooled([0, 2, 4]), cm(REFERENCE_ROWS[6].cm));
    assert_eq!(pooled([1, 3, 5]), cm(REFERENCE_ROWS[7].cm));
    "before (113,39,9,234), after (131,14,4,241)".into()
}

fn orn_cases() -> Vec<LabeledCase> {
    let mut cases = Vec::new();
    let mut push = |n: usize, prediction: bool, baseline: bool| {
        for _ in 0..n {
            let id = format!("ORN{:04}", cases.len() + 1);
            cases.push(LabeledCase::new(id, EvalTask::Orn, prediction, baseline));
        }
    };
    push(30, true, true);
    push(32, true, false);
    push(4, false, true);
    push(167, false, false);
    cases
}

fn verdict(case: &LabeledCase, verdict: Verdict) -> AdjudicationVerdict {
    AdjudicationVerdict {
        patient_id: case.patient_id.clone(),
        task: case.task,
        verdict,
        note: String::new(),
        reviewer: String::new(),
        decided_at: NaiveDate::from_ymd_opt(2025, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap().and_utc(),
    }
}

/// Counts after review, computed case by case.
fn brute_after(cases: &[LabeledCase], verdicts: &[AdjudicationVerdict]) -> (u64, u64, u64, u64) {
    let mut out = (0, 0, 0, 0);
    for c in cases {
        let v = verdicts.iter().find(|v| v.patient_id == c.patient_id).map(|v| v.verdict);
        let truth = match v {
            Some(Verdict::GroundTruthError) => !c.baseline_truth,
            Some(Verdict::Indeterminate) => continue,
            _ => c.baseline_truth,
        };
        match (c.prediction, truth) {
            (true, true) => out.0 += 1,
            (true, false) => out.1 += 1,
            (false, true) => out.2 += 1,
            (false, false) => out.3 += 1,
        }
    }
    out
}

fn orn_reconstruction() -> String {
    let cases = orn_cases();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for round in 0..50 {
        let mut fps: Vec<&LabeledCase> = cases.iter().filter(|c| c.prediction && !c.baseline_truth).collect();
        let mut fns: Vec<&LabeledCase> = cases.iter().filter(|c| !c.prediction && c.baseline_truth).collect();
        if round > 0 {
            fps.shuffle(&mut rng);
            fns.shuffle(&mut rng);
        }
        let mut verdicts = Vec::new();
        for (i, c) in fps.iter().enumerate() {
            let v = match i {
                0..=17 => Verdict::GroundTruthError,
                18..=28 => Verdict::ModelError,
                _ => Verdict::Indeterminate,
            };
            verdicts.push(verdict(c, v));
        }
        for (i, c) in fns.iter().enumerate() {
            let v = if i < 3 { Verdict::GroundTruthError } else { Verdict::Indeterminate };
            verdicts.push(verdict(c, v));
        }
        assert_eq!(verdicts.len(), 36);
        let after = confusion(&apply_adjudication(&cases, &verdicts).unwrap());
        assert_eq!(after, ConfusionMatrix::new(48, 11, 0, 170));
        assert_eq!(after.n(), 229);
        assert_eq!(brute_after(&cases, &verdicts), (48, 11, 0, 170));
    }
    "(30,32,4,167) -> (48,11,0,170), n=229 over 50 assignments".into()
}

fn words(token: &str, n: usize) -> String {
    let mut s = format!("{token} ").repeat(n);
    s.pop();
    s
}

fn counts(conv: &Conversation) -> Vec<usize> {
    conv.messages().iter().map(|m| WordCounter.count(&m.content)).collect()
}

fn pruner_suite() -> String {
    let start = Instant::now();
    let config = PrunerConfig::default();

    let small = Conversation::with_contents(words("s", 4_000), [words("a", 60_000), words("b", 30_000)]);
    assert_eq!(prune_context(&small, &config, &WordCounter).unwrap(), small);
    let one = Conversation::with_contents(words("s", 5_000), [words("a", 60_000), words("b", 30_000), words("c", 20_000)]);
    assert_eq!(counts(&prune_context(&one, &config, &WordCounter).unwrap()), [5_000, 40_000, 30_000, 20_000]);
    let ten = Conversation::with_contents(words("s", 5_000), (0..10).map(|i| words(&format!("m{i}"), 10_000)));
    let out = counts(&prune_context(&ten, &config, &WordCounter).unwrap());
    assert_eq!(out[1..], [7_500, 7_500, 7_500, 7_500, 10_000, 10_000, 10_000, 10_000, 10_000, 10_000]);
    assert_eq!(out.iter().sum::<usize>(), 95_000);

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut pruned = 0;
    for case in 0..1_000 {
        let system = words("s", rng.gen_range(0..=20_000));
        let n = rng.gen_range(1..=12);
        let msgs: Vec<String> = (0..n).map(|i| words(["x", "y"][i % 2], rng.gen_range(0..=30_000))).collect();
        let conv = Conversation::with_contents(system, msgs);
        let mut out = conv.clone();
        let stats = prune_in_place(&mut out, &config, &WordCounter).unwrap();
        let total = conversation_tokens(&out, &WordCounter);
        assert!(total <= 95_000, "case {case}: {total}");
        assert_eq!(out.messages()[0].content, conv.messages()[0].content, "case {case}: system changed");
        for (a, b) in conv.messages().iter().zip(out.messages()) {
            assert!(a.content.starts_with(&b.content), "case {case}: not a prefix");
        }
        assert_eq!(prune_context(&out, &config, &WordCounter).unwrap(), out, "case {case}: not idempotent");

        let mut live = counts(&conv);
        for p in &stats.passes {
            for (j, &older) in live.iter().enumerate().take(p.message_index).skip(1) {
                assert!(older as i64 <= p.threshold.max(0), "case {case}: message {j} older than {}", p.message_index);
            }
            live[p.message_index] = p.tokens_after;
        }
        if !stats.passes.is_empty() {
            pruned += 1;
        }
    }
    let elapsed = start.elapsed();
    assert!(pruned > 300, "only {pruned} conversations needed pruning");
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    format!("1000 conversations ({pruned} pruned) and 3 worked examples in {elapsed:?}")
}

fn labelflow(dir: &Path, args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_labelflow")).args(args).current_dir(dir).output().unwrap();
    assert!(out.status.success(), "labelflow {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn tier1_at_scale() -> String {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    labelflow(d, &["synth", "--task", "tier1_qa", "--patients", "500", "--out-dir", "qa"]);
    labelflow(
        d,
        &["run", "--task", "tier1_qa", "--store", "qa/store", "--manifest", "qa/truth_manifest.csv", "--out-dir", "run"],
    );
    let clean = labelflow(d, &["eval-tier1", "--store", "qa/store", "--predictions", "run/results.csv"]);
    assert!(clean.contains("500/500 treatment matches (100.0%)"), "{clean}");
    labelflow(
        d,
        &["plant-tier1-bug", "--predictions", "run/results.csv", "--patients", "QA0017,QA0250,QA0499", "--out", "bug.csv"],
    );
    let out = labelflow(d, &["eval-tier1", "--store", "qa/store", "--predictions", "bug.csv", "--out-dir", "rep"]);
    assert!(out.contains("3000/3000 demographic fields matched (100.0%)"), "{out}");
    assert!(out.contains("497/500 treatment matches (99.4%)"), "{out}");
    let report: Value = serde_json::from_str(&std::fs::read_to_string(d.join("rep/tier1_report.json")).unwrap()).unwrap();
    let mut flagged: Vec<&str> = report["diffs"].as_array().unwrap().iter().map(|d| d["patient_id"].as_str().unwrap()).collect();
    flagged.dedup();
    assert_eq!(flagged, ["QA0017", "QA0250", "QA0499"]);
    out.lines().map(str::trim).collect::<Vec<_>>().join("; ")
}

/// (before, after) confusion counts read straight off a truth manifest.
fn manifest_counts(path: &Path) -> ((u64, u64, u64, u64), (u64, u64, u64, u64)) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (tl, bl, fl) = (col("true_label"), col("baseline_label"), col("flags"));
    let tally = |c: &mut (u64, u64, u64, u64), p: bool, t: bool| match (p, t) {
        (true, true) => c.0 += 1,
        (true, false) => c.1 += 1,
        (false, true) => c.2 += 1,
        (false, false) => c.3 += 1,
    };
    let (mut before, mut after) = ((0, 0, 0, 0), (0, 0, 0, 0));
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let truth = f[tl] == "positive";
        let baseline = f[bl] == "positive";
        let prediction = match f[fl] {
            "model_error" | "indeterminate" => !truth,
            _ => truth,
        };
        tally(&mut before, prediction, baseline);
        if f[fl] != "indeterminate" {
            tally(&mut after, prediction, truth);
        }
    }
    (before, after)
}

fn block_counts(v: &Value) -> (u64, u64, u64, u64) {
    let c = &v["counts"];
    let g = |k: &str| c[k].as_u64().unwrap();
    (g("tp"), g("fp"), g("fn"), g("tn"))
}

fn end_to_end() -> String {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("behavior.json"), r#"{"latency_ms": 2}"#).unwrap();
    let planted = [
        ("orn", (30, 32, 4, 167), (48, 11, 0, 170)),
        ("prostate_recurrence", (35, 3, 3, 39), (37, 1, 3, 39)),
        ("hn_recurrence", (45, 4, 2, 31), (46, 2, 1, 32)),
    ];
    let mut detail = Vec::new();
    let mut pooled_after = (0, 0, 0, 0);
    for (task, before, after) in planted {
        let data = format!("{task}-data");
        let run = format!("{task}-run");
        labelflow(d, &["synth", "--task", task, "--seed", "7", "--out-dir", &data]);
        let manifest = format!("{data}/truth_manifest.csv");
        labelflow(
            d,
            &[
                "run", "--task", task, "--backend", "scripted", "--concurrency", "4", "--store", &format!("{data}/store"),
                "--manifest", &manifest, "--behavior", "behavior.json", "--out-dir", &run,
            ],
        );
        let stats: Value = serde_json::from_str(&std::fs::read_to_string(d.join(&run).join("run_stats.json")).unwrap()).unwrap();
        assert_eq!(stats["peak_in_flight"], 4, "{task}");
        let rep = format!("{task}-report");
        labelflow(
            d,
            &[
                "eval-tier2", "--predictions", &format!("{run}/results.csv"), "--baseline", &format!("{data}/baseline.csv"),
                "--verdicts", &format!("{data}/demo_verdicts.jsonl"), "--out-dir", &rep,
            ],
        );
        let report: Value =
            serde_json::from_str(&std::fs::read_to_string(d.join(&rep).join("metrics_report.json")).unwrap()).unwrap();
        let got = (block_counts(&report["total"]["before"]), block_counts(&report["total"]["after"]));
        assert_eq!(got, manifest_counts(&d.join(&manifest)), "{task}: manifest oracle");
        assert_eq!(got, (before, after), "{task}: planted counts");
        assert_eq!(report["total"]["unscored"], 0, "{task}");
        pooled_after = (pooled_after.0 + after.0, pooled_after.1 + after.1, pooled_after.2 + after.2, pooled_after.3 + after.3);
        detail.push(format!("{task} {before:?}->{after:?}"));
    }
    assert_eq!(pooled_after, (131, 14, 4, 241));
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    format!("{}; peak 4; {elapsed:?}", detail.join(", "))
}

#[derive(Debug)]
enum Expect {
    NoStructured,
    Unparsable,
    Stage,
}

fn fence_lines(text: &str) -> Vec<usize> {
    text.lines().enumerate().filter(|(_, l)| l.trim_start().starts_with("```")).map(|(i, _)| i).collect()
}

fn edit_lines(text: &str, f: impl Fn(usize, &str) -> Option<String>) -> String {
    text.lines().enumerate().filter_map(|(i, l)| f(i, l)).map(|l| l + "\n").collect()
}

fn drop_opener(text: &str) -> String {
    let fences = fence_lines(text);
    let opener = fences[fences.len() - 2];
    edit_lines(text, |i, l| (i != opener).then(|| l.to_string()))
}

fn unfence(text: &str) -> String {
    let fences = fence_lines(text);
    edit_lines(text, |i, l| (!fences.contains(&i)).then(|| l.to_string()))
}

fn delete_block(text: &str) -> String {
    let fences = fence_lines(text);
    let (a, b) = (fences[fences.len() - 2], fences[fences.len() - 1]);
    edit_lines(text, |i, l| (i < a || i > b).then(|| l.to_string()))
}

fn suffix_inside(text: &str) -> String {
    let closer = *fence_lines(text).last().unwrap();
    edit_lines(text, |i, l| Some(if i == closer { format!("That is my final answer.\n{l}") } else { l.to_string() }))
}

fn trailing_fence(text: &str) -> String {
    format!("{text}\n```\nLet me know if you need anything else.\n```\n")
}

fn structured_corpus() -> String {
    let tier1 = include_str!("fixtures/answers/tier1.txt");
    let orn = include_str!("fixtures/answers/orn.txt");
    let recurrence = include_str!("fixtures/answers/recurrence.txt");

    let parse = |text: &str, schema: TaskName| -> Result<Label, String> {
        let obj = extract_structured(text).map_err(|e| format!("extract: {e:?}"))?;
        validate_output(&obj, schema).map_err(|e| format!("schema: {}", e.field))
    };
    let Label::Tier1(t) = parse(tier1, TaskName::Tier1Qa).unwrap() else { panic!("tier-1 label") };
    assert_eq!(t.patient_id, "QA0042");
    let ids: Vec<&str> = t.delivered_courses.iter().map(|c| c.course_id.as_str()).collect();
    assert_eq!(ids, ["1HN", "2HN"]);
    let raw = extract_structured(orn).unwrap();
    assert_eq!((raw["stage"].as_str(), raw["total_records"].as_str()), (Some("2"), Some("37")));
    assert_eq!(parse(orn, TaskName::Orn).unwrap(), Label::Orn { stage: 2, total_records: 37 });
    assert_eq!(parse(recurrence, TaskName::Recurrence).unwrap(), Label::Recurrence { recurrence: true });

    let stage = |v: &str| orn.replace("'stage': '2'", &format!("'stage': {v}"));
    let cases: Vec<(&str, String, TaskName, Expect)> = vec![
        ("missing opening fence, tier-1", drop_opener(tier1), TaskName::Tier1Qa, Expect::Unparsable),
        ("missing opening fence, orn", drop_opener(orn), TaskName::Orn, Expect::Unparsable),
        ("missing opening fence, recurrence", drop_opener(recurrence), TaskName::Recurrence, Expect::Unparsable),
        ("missing fences, single-quoted orn", unfence(orn), TaskName::Orn, Expect::Unparsable),
        ("missing fences, tier-1 trailing comma", unfence(tier1), TaskName::Tier1Qa, Expect::Unparsable),
        ("missing fenced block, orn", delete_block(orn), TaskName::Orn, Expect::NoStructured),
        ("missing fenced block, recurrence", delete_block(recurrence), TaskName::Recurrence, Expect::NoStructured),
        ("prose inside fence, tier-1", suffix_inside(tier1), TaskName::Tier1Qa, Expect::Unparsable),
        ("prose inside fence, orn", suffix_inside(orn), TaskName::Orn, Expect::Unparsable),
        ("prose inside fence, recurrence", suffix_inside(recurrence), TaskName::Recurrence, Expect::Unparsable),
        ("fenced prose suffix, tier-1", trailing_fence(tier1), TaskName::Tier1Qa, Expect::Unparsable),
        ("fenced prose suffix, orn", trailing_fence(orn), TaskName::Orn, Expect::Unparsable),
        ("fenced prose suffix, recurrence", trailing_fence(recurrence), TaskName::Recurrence, Expect::Unparsable),
        ("stage '4'", stage("'4'"), TaskName::Orn, Expect::Stage),
        ("stage 4", stage("4"), TaskName::Orn, Expect::Stage),
        ("stage 10", stage("10"), TaskName::Orn, Expect::Stage),
        ("stage '-1'", stage("'-1'"), TaskName::Orn, Expect::Stage),
        ("stage 'five'", stage("'five'"), TaskName::Orn, Expect::Stage),
        ("stage '2.5'", stage("'2.5'"), TaskName::Orn, Expect::Stage),
        ("stage ''", stage("''"), TaskName::Orn, Expect::Stage),
    ];
    assert_eq!(cases.len(), 20);
    for (name, text, schema, expect) in &cases {
        let got = extract_structured(text);
        match expect {
            Expect::NoStructured => assert_eq!(got, Err(ExtractError::NoStructuredOutput), "{name}"),
            Expect::Unparsable => assert!(matches!(got, Err(ExtractError::UnparsableBlock(_))), "{name}: {got:?}"),
            Expect::Stage => {
                let err = validate_output(&got.unwrap_or_else(|e| panic!("{name}: {e}")), *schema).unwrap_err();
                assert_eq!(err.field, "stage", "{name}");
            }
        }
    }
    "3 formats valid, 20 mutations rejected".into()
}

fn retrieval_oracle() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let base = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
    let pool: Vec<NaiveDateTime> = (0..8)
        .flat_map(|d| [9, 15].map(|h| (base + Days::days(d * 40)).and_hms_opt(h, 0, 0).unwrap()))
        .collect();
    let mut records = Vec::new();
    for task in [CohortTask::Orn, CohortTask::ProstateRecurrence, CohortTask::HnRecurrence] {
        let mut spec = CohortSpec::default_for(task);
        spec.seed = 3;
        records.extend(generate_cohort(&spec).unwrap().records);
    }
    for r in &mut records {
        for doc in &mut r.documents {
            doc.timestamp = *pool.choose(&mut rng).unwrap();
        }
    }
    let store = Store::from_records(records.clone()).unwrap();

    let kinds = [
        (RecordKind::ClinicalNotes, DocKind::ClinicalNote),
        (RecordKind::RadiologyReports, DocKind::RadiologyReport),
        (RecordKind::PathologyReports, DocKind::PathologyReport),
    ];
    let mut nonempty = 0;
    for call in 0..500 {
        let rec = records.choose(&mut rng).unwrap();
        let (kind, doc_kind) = *kinds.choose(&mut rng).unwrap();
        let note_type = (kind == RecordKind::ClinicalNotes && rng.gen_bool(0.6)).then(|| *NoteType::ALL.choose(&mut rng).unwrap());
        let date_minimum = rng
            .gen_bool(0.7)
            .then(|| pool.choose(&mut rng).unwrap().date() + Days::days(rng.gen_range(-1..=1)));
        let got = store
            .retrieve(rec.patient_id(), kind, RetrievalFilter { note_type, date_minimum })
            .unwrap();

        let mut want: Vec<_> = rec
            .documents
            .iter()
            .filter(|d| d.doc_kind == doc_kind)
            .filter(|d| note_type.is_none() || d.note_type == note_type)
            .filter(|d| date_minimum.is_none_or(|m| d.timestamp.date() >= m))
            .collect();
        want.sort_by(|a, b| (b.timestamp, &b.doc_id).cmp(&(a.timestamp, &a.doc_id)));
        let want: Vec<&str> = want.iter().map(|d| d.doc_id.as_str()).collect();
        let ids: Vec<&str> = got.payload.lines().filter_map(|l| l.strip_prefix("doc_id: ")).collect();
        assert_eq!(ids, want, "call {call}: {} {kind} {note_type:?} {date_minimum:?}", rec.patient_id());
        assert_eq!(got.records_count, want.len(), "call {call}");
        assert_eq!(got.found, !want.is_empty(), "call {call}");
        if !want.is_empty() {
            nonempty += 1;
            assert!(got.payload.starts_with(&format!("number of records count: {}\n", want.len())));
        }
    }
    assert!(nonempty > 200, "only {nonempty} calls returned documents");
    format!("500 calls, {nonempty} non-empty")
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> String); 8] = [
        ("metric formula oracle", metric_rows_oracle),
        ("pooling", pooling),
        ("orn adjudication reconstruction", orn_reconstruction),
        ("pruner suite", pruner_suite),
        ("tier-1 replication at scale", tier1_at_scale),
        ("end-to-end determinism", end_to_end),
        ("structured-output corpus", structured_corpus),
        ("retrieval ordering", retrieval_oracle),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match catch_unwind(AssertUnwindSafe(check)) {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL {} {name}: {msg}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
