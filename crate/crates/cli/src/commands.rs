use crate::{Backend, CliError, EvalTier1Args, EvalTier2Args, MetricsArgs, PlantArgs, RunArgs, ServeArgs, SynthArgs};
use labelflow_core::agent::{AgentConfig, HttpBackend, HttpBackendConfig, ModelBackend};
use labelflow_core::ehr::Store;
use labelflow_core::eval::{
    active_verdicts, build_cases, build_report, evaluate_tier1, metrics as compute_metrics, micro_average,
    read_baseline, BaselineRow, ConfusionMatrix, EvalTask, Percent,
};
use labelflow_core::streamer::{
    read_results, run_cohort, write_results, write_run, CohortDeps, RunInfo, StoredResult, TaskName, TaskSpec,
    TaskStatus,
};
use labelflow_core::synth::{
    generate_cohort, plant_tier1_bug, read_truth_manifest, write_cohort, Behavior, CohortSpec, CohortTask,
    ScriptedBackend,
};
use labelflow_core::tools::Registry;
use labelflow_service::{read_log, RunSource, ServiceConfig};
use std::collections::BTreeSet;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

type Result<T> = std::result::Result<T, CliError>;

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| config(format!("missing required flag {flag}")))
}

fn existing(path: Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    let path = require(path, flag)?;
    if !path.exists() {
        return Err(config(format!("{flag} {} does not exist", path.display())));
    }
    Ok(path)
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(failed)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| failed(format!("{}: {e}", path.display())))
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let mut spec = match (&a.spec, &a.task) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).map_err(|e| config(format!("--spec {}: {e}", p.display())))?;
            serde_json::from_str::<CohortSpec>(&text).map_err(|e| config(format!("--spec {}: {e}", p.display())))?
        }
        (None, Some(t)) => {
            let task = CohortTask::parse(t).ok_or_else(|| config(format!("--task: unknown cohort task {t:?}")))?;
            CohortSpec::default_for(task)
        }
        (None, None) => return Err(config("missing required flag --task (or --spec)")),
    };
    if let (Some(_), Some(t)) = (&a.spec, &a.task) {
        if CohortTask::parse(t) != Some(spec.task) {
            return Err(config(format!("--task {t} disagrees with the cohort spec task {}", spec.task)));
        }
    }
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    if let Some(n) = a.patients {
        if spec.task != CohortTask::Tier1Qa {
            return Err(config("--patients sets tier1_qa cohort sizes; use --spec for labeled cohorts"));
        }
        spec.n_negative = n;
    }
    let out = require(a.out_dir, "--out-dir")?;
    let cohort = generate_cohort(&spec).map_err(|e| config(e.to_string()))?;
    write_cohort(&cohort, &out).map_err(failed)?;
    println!("synthesized {} {} patients into {}", cohort.truth.len(), spec.task, out.display());
    Ok(())
}

fn prompt_task(s: &str) -> Option<TaskName> {
    TaskName::parse(s).or_else(|| CohortTask::parse(s).map(CohortTask::prompt_task))
}

pub fn run(a: RunArgs) -> Result<()> {
    let task_arg = require(a.task, "--task")?;
    let task = prompt_task(&task_arg).ok_or_else(|| config(format!("--task: unknown task {task_arg:?}")))?;
    let store_dir = existing(a.store, "--store")?;
    let out = require(a.out_dir, "--out-dir")?;
    if a.concurrency == 0 {
        return Err(config("--concurrency must be at least 1"));
    }
    let manifest = match a.manifest {
        Some(p) => {
            let p = existing(Some(p), "--manifest")?;
            Some(read_truth_manifest(&p).map_err(|e| config(e.to_string()))?)
        }
        None => None,
    };
    if let Some(row) = manifest.iter().flatten().find(|r| r.task.prompt_task() != task) {
        return Err(config(format!("--manifest holds {} patients, --task is {task}", row.task)));
    }
    let store = Store::load(&store_dir).map_err(|e| config(format!("--store {}: {e}", store_dir.display())))?;
    let ids: Vec<String> = match &manifest {
        Some(rows) => rows.iter().map(|r| r.patient_id.clone()).collect(),
        None => store.patient_ids().map(str::to_string).collect(),
    };

    let backend: Arc<dyn ModelBackend> = match a.backend {
        Backend::Scripted => {
            let rows = manifest.ok_or_else(|| config("--backend scripted needs --manifest"))?;
            let behavior = match &a.behavior {
                Some(p) => Behavior::load(&existing(Some(p.clone()), "--behavior")?).map_err(config)?,
                None => Behavior::default(),
            };
            Arc::new(ScriptedBackend::new(rows, behavior))
        }
        Backend::Http => {
            if a.behavior.is_some() {
                return Err(config("--behavior applies to the scripted backend only"));
            }
            let cfg = HttpBackendConfig::from_env().map_err(config)?;
            Arc::new(HttpBackend::new(cfg).map_err(|e| config(e.to_string()))?)
        }
    };
    let deps = CohortDeps {
        store: Arc::new(store),
        registry: Arc::new(Registry::standard()),
        backend,
        agent: AgentConfig::default(),
    };
    let spec = TaskSpec::new(task).with_concurrency(a.concurrency);
    let run = runtime()?.block_on(run_cohort(&ids, &spec, &deps)).map_err(failed)?;
    let info = RunInfo {
        backend: match a.backend {
            Backend::Scripted => "scripted".into(),
            Backend::Http => "http".into(),
        },
        seed: a.seed,
    };
    fs::create_dir_all(&out).map_err(|e| failed(format!("{}: {e}", out.display())))?;
    write_run(&run, &deps, &info, &out).map_err(failed)?;
    println!(
        "{task}: {} patients, {} ok, {} parse_error, {} agent_error, peak in flight {}",
        run.results.len(),
        run.count(TaskStatus::Ok),
        run.count(TaskStatus::ParseError),
        run.count(TaskStatus::AgentError),
        run.peak_in_flight
    );
    Ok(())
}

fn load_results(path: Option<PathBuf>) -> Result<Vec<StoredResult>> {
    let p = existing(path, "--predictions")?;
    read_results(&p).map_err(|e| config(e.to_string()))
}

pub fn eval_tier1(a: EvalTier1Args) -> Result<()> {
    let store_dir = existing(a.store, "--store")?;
    let rows = load_results(a.predictions)?;
    if let Some(r) = rows.iter().find(|r| r.task != TaskName::Tier1Qa) {
        return Err(config(format!("--predictions holds {} rows, expected tier1_qa", r.task)));
    }
    let store = Store::load(&store_dir).map_err(|e| config(format!("--store {}: {e}", store_dir.display())))?;
    let report = evaluate_tier1(&store, &rows);
    println!("{}", report.summary);
    if let Some(out) = a.out_dir {
        fs::create_dir_all(&out).map_err(|e| failed(format!("{}: {e}", out.display())))?;
        let json = serde_json::to_string_pretty(&report).map_err(failed)?;
        write_text(&out.join("tier1_report.json"), &(json + "\n"))?;
    }
    Ok(())
}

/// The labeling task a predictions file belongs to, read off the baseline rows it matches.
fn infer_task(path: &Path, rows: &[StoredResult], baseline: &[BaselineRow]) -> Result<EvalTask> {
    let ids: BTreeSet<&str> = rows.iter().map(|r| r.patient_id.as_str()).collect();
    let kinds: BTreeSet<TaskName> = rows.iter().map(|r| r.task).collect();
    let tasks: BTreeSet<EvalTask> = baseline
        .iter()
        .filter(|b| ids.contains(b.patient_id.as_str()) && kinds.contains(&b.task.prompt_task()))
        .map(|b| b.task)
        .collect();
    match tasks.len() {
        1 => Ok(*tasks.first().unwrap()),
        0 => Err(config(format!("{}: no baseline rows match; pass --task", path.display()))),
        _ => Err(config(format!("{}: baseline rows span several tasks; pass --task", path.display()))),
    }
}

pub fn eval_tier2(a: EvalTier2Args) -> Result<()> {
    if a.predictions.is_empty() {
        return Err(config("missing required flag --predictions"));
    }
    if a.baseline.is_empty() {
        return Err(config("missing required flag --baseline"));
    }
    if !a.task.is_empty() && a.task.len() != a.predictions.len() {
        return Err(config("--task must be given once per --predictions file"));
    }
    let mut baseline = Vec::new();
    for p in &a.baseline {
        let p = existing(Some(p.clone()), "--baseline")?;
        baseline.extend(read_baseline(&p).map_err(|e| config(e.to_string()))?);
    }
    let mut sets = Vec::new();
    for (i, p) in a.predictions.iter().enumerate() {
        let rows = load_results(Some(p.clone()))?;
        let task = match a.task.get(i) {
            Some(t) => EvalTask::parse(t).ok_or_else(|| config(format!("--task: unknown labeling task {t:?}")))?,
            None => infer_task(p, &rows, &baseline)?,
        };
        if sets.iter().any(|(t, _)| *t == task) {
            return Err(config(format!("two --predictions files for {task}")));
        }
        sets.push((task, build_cases(task, &rows, &baseline)));
    }
    let mut verdicts = Vec::new();
    for p in &a.verdicts {
        let p = existing(Some(p.clone()), "--verdicts")?;
        let log = read_log(&p).map_err(|e| config(e.to_string()))?;
        verdicts.extend(active_verdicts(&log).map_err(|e| config(format!("{}: {e}", p.display())))?);
    }
    let report = build_report(&sets, &verdicts).map_err(failed)?;
    let text = report.render_text();
    print!("{text}");
    for (task, set) in &sets {
        if !set.unscored.is_empty() {
            println!("{task}: {} patients unscored", set.unscored.len());
        }
    }
    if let Some(out) = a.out_dir {
        fs::create_dir_all(&out).map_err(|e| failed(format!("{}: {e}", out.display())))?;
        write_text(&out.join("metrics_report.txt"), &text)?;
        let json = serde_json::to_string_pretty(&report).map_err(failed)?;
        write_text(&out.join("metrics_report.json"), &(json + "\n"))?;
    }
    Ok(())
}

fn parse_counts(s: &str) -> Result<ConfusionMatrix> {
    let bad = || config(format!("--counts {s:?}: expected tp,fp,fn,tn"));
    let v: Vec<u64> = s
        .split(',')
        .map(|x| x.trim().parse::<u64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    match v[..] {
        [tp, fp, fn_, tn] => Ok(ConfusionMatrix::new(tp, fp, fn_, tn)),
        _ => Err(bad()),
    }
}

fn metrics_line(label: &str, cm: &ConfusionMatrix) -> String {
    let cell = |p: Option<Percent>| p.map(|p| p.to_string()).unwrap_or_else(|| "-".into());
    let [pr, re, f1, ac] = compute_metrics(cm).cells();
    format!(
        "{label:<8} n={:<5} TP={} FP={} FN={} TN={}  Pr {}  Re {}  F1 {}  Ac {}",
        cm.n(),
        cm.tp,
        cm.fp,
        cm.fn_,
        cm.tn,
        cell(pr),
        cell(re),
        cell(f1),
        cell(ac)
    )
}

pub fn metrics(a: MetricsArgs) -> Result<()> {
    let rows = a.counts.iter().map(|s| parse_counts(s)).collect::<Result<Vec<_>>>()?;
    for (i, cm) in rows.iter().enumerate() {
        println!("{}", metrics_line(&format!("row {}", i + 1), cm));
    }
    if rows.len() > 1 {
        println!("{}", metrics_line("pooled", &micro_average(&rows)));
    }
    Ok(())
}

pub fn plant(a: PlantArgs) -> Result<()> {
    let rows = load_results(a.predictions)?;
    let out = require(a.out, "--out")?;
    if a.patients.is_empty() {
        return Err(config("missing required flag --patients"));
    }
    let mutated = plant_tier1_bug(&rows, &a.patients).map_err(failed)?;
    write_results(&out, &mutated).map_err(failed)?;
    println!("truncated course ids for {} patients into {}", a.patients.len(), out.display());
    Ok(())
}

pub fn serve(a: ServeArgs) -> Result<()> {
    if a.source.is_empty() {
        return Err(config("missing required flag --source"));
    }
    let mut sources = Vec::new();
    for s in &a.source {
        let (task, dir) = s
            .split_once('=')
            .ok_or_else(|| config(format!("--source {s:?}: expected task=run_dir")))?;
        let task = EvalTask::parse(task).ok_or_else(|| config(format!("--source: unknown labeling task {task:?}")))?;
        let run_dir = existing(Some(PathBuf::from(dir)), "--source")?;
        sources.push(RunSource { task, run_dir });
    }
    let baselines = a
        .baseline
        .iter()
        .map(|p| existing(Some(p.clone()), "--baseline"))
        .collect::<Result<Vec<_>>>()?;
    let verdict_log = require(a.verdicts, "--verdicts")?;
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| config(format!("--host/--port: {e}")))?;
    let cfg = ServiceConfig {
        run_id: a.run_id,
        sources,
        baselines,
        verdict_log,
        token: a.token,
    };
    runtime()?.block_on(labelflow_service::serve(cfg, addr)).map_err(failed)
}
