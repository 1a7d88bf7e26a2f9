//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//! Runs without the libtest harness so the report reads top to bottom.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::cgen::generate;
use common::corpus::{corpus, monotone};
use common::tdist;
use patchgauge::analytics::{format_rate, student_t_two_tailed, welch_t};
use patchgauge::fixtures::{build_fixture_corpus, Outcome, CONFIG_FILE, DEFECTS};
use patchgauge::miner::Git;
use patchgauge::pipeline::{human_file, Campaign, CampaignConfig, RunStore, SeededFaults};
use patchgauge::record::EvaluationRecord;
use patchgauge::splicer::{extract, list_functions, splice};
use patchgauge::triage::{agreement_from_pairs, suggest_category, VerdictCategory};
use patchgauge::validator::{run_tests, TestProfile, TestStatus};
use patchgauge::verifier::{
    analyze, analyze_tree, categorize, compare, has_explicit_rule, AnalyzerProfile, CheckerSet, IssueCategory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_patchgauge"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "patchgauge {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

/// Builds the corpus and runs `mine` and `run` through the binary.
struct FixtureRun {
    dir: tempfile::TempDir,
    records: Vec<EvaluationRecord>,
    elapsed: Duration,
}

fn fixture_run() -> Result<FixtureRun, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path().to_str().unwrap().to_string();
    let config = format!("{root}/{CONFIG_FILE}");
    let start = Instant::now();
    cli(&["fixtures", &root])?;
    cli(&["mine", "--config", &config])?;
    cli(&["run", "--config", &config])?;
    let elapsed = start.elapsed();
    let records = RunStore::load_records_at(&dir.path().join("store")).map_err(|e| e.to_string())?;
    Ok(FixtureRun { dir, records, elapsed })
}

fn fixture_matrix(run: &FixtureRun) -> Check {
    let manifest = patchgauge::fixtures::Manifest::load(run.dir.path()).map_err(|e| e.to_string())?;
    let mut mismatches = Vec::new();
    for (_, e) in manifest.expectations() {
        match run.records.iter().find(|r| r.id() == e.record_id) {
            None => mismatches.push(format!("{} missing", e.record_id)),
            Some(r) => {
                let seen = Outcome::observe(r);
                if seen != e.outcome {
                    mismatches.push(format!("{}: expected {:?}, observed {:?}", e.record_id, e.outcome, seen));
                }
            }
        }
    }
    ensure(mismatches.is_empty(), || mismatches.join("; "))?;
    ensure(manifest.cases.len() >= 6, || format!("only {} cases", manifest.cases.len()))?;
    ensure(run.records.len() == manifest.expectations().count(), || "extra records".into())?;
    ensure(run.elapsed < Duration::from_secs(300), || format!("took {:?}", run.elapsed))?;
    Ok(format!(
        "{} cases, {} records, 0 mismatches, {:.1}s",
        manifest.cases.len(),
        run.records.len(),
        run.elapsed.as_secs_f64()
    ))
}

fn human_baseline(run: &FixtureRun) -> Check {
    let config = CampaignConfig::load(&run.dir.path().join(CONFIG_FILE)).map_err(|e| e.to_string())?;
    let store = RunStore::open(&config.campaign.store).map_err(|e| e.to_string())?;
    let tasks = store.load_tasks().map_err(|e| e.to_string())?;
    ensure(!tasks.is_empty(), || "no tasks".into())?;
    for task in &tasks {
        let project = config.project(&task.project).ok_or("unknown project")?;
        let git = Git::new(&project.repo);
        let post = git
            .file_at(&task.commit_id, &task.context_file_path)?
            .ok_or_else(|| format!("{}: file missing at commit", task.task_id))?;
        let spliced = human_file(task).map_err(|e| e.to_string())?;
        ensure(spliced.as_bytes() == post.as_slice(), || {
            format!("{}: spliced file differs from the committed one", task.task_id)
        })?;

        let tree = tempfile::tempdir().map_err(|e| e.to_string())?;
        git.export_tree(task.base_revision.as_deref().ok_or("no base revision")?, tree.path())?;
        std::fs::write(tree.path().join(&task.context_file_path), &spliced).map_err(|e| e.to_string())?;
        let profiles = config.verify_profiles(project).map_err(|e| e.to_string())?;
        let a = analyze(tree.path(), &profiles).map_err(|e| e.to_string())?;
        ensure(a.compile_outcome.is_success(), || format!("{}: does not compile", task.task_id))?;
        let report = compare(a.clone(), &a);
        ensure(report.issue_delta.values().all(|d| *d == 0), || {
            format!("{}: nonzero delta against itself", task.task_id)
        })?;
        let outcome = run_tests(tree.path(), project.test.as_ref().ok_or("no test profile")?)
            .map_err(|e| e.to_string())?;
        ensure(outcome.status == TestStatus::Pass, || {
            format!("{}: tests {:?}", task.task_id, outcome.status)
        })?;
    }
    Ok(format!("{} tasks: byte-exact, compile, zero self-delta, tests pass", tasks.len()))
}

fn splicer_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut files, mut functions) = (0, 0);
    for _ in 0..200 {
        let f = generate(&mut rng);
        let spans = list_functions(&f.source).map_err(|e| e.to_string())?;
        ensure(spans.len() == f.functions.len(), || "function count differs".into())?;
        for span in &spans {
            let text = extract(&f.source, span).map_err(|e| e.to_string())?;
            let back = splice(&f.source, span, &text).map_err(|e| e.to_string())?;
            ensure(back.text == f.source, || format!("round trip changed {}", span.name))?;
            functions += 1;
        }
        files += 1;
    }
    Ok(format!("{files} files, {functions} functions, all identical"))
}

fn categorizer() -> Check {
    let set = CheckerSet::pinned();
    let missing: Vec<&str> = set.enabled().filter(|c| !has_explicit_rule(c)).collect();
    ensure(missing.is_empty(), || format!("no rule for {missing:?}"))?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for (name, text, want) in DEFECTS {
        std::fs::write(dir.path().join(name), text).map_err(|e| e.to_string())?;
        let profile = AnalyzerProfile {
            sources: vec![name.to_string()],
            frontend_pass: false,
            ..AnalyzerProfile::default()
        };
        let res = analyze_tree(dir.path(), &profile, &set).map_err(|e| e.to_string())?;
        let cats: Vec<Option<IssueCategory>> = res.diagnostics.iter().map(categorize).collect();
        ensure(cats == vec![Some(want)], || format!("{name}: {:?}", res.diagnostics))?;
    }
    Ok(format!(
        "{} enabled checkers all mapped; 3 defect goldens categorized",
        set.enabled().count()
    ))
}

fn welch() -> Check {
    let r = welch_t(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).map_err(|e| e.to_string())?;
    ensure((r.t + 1.224745).abs() < 1e-6 && r.df == 4.0, || format!("t={} df={}", r.t, r.df))?;
    let mut worst: f64 = 0.0;
    for df in [1u32, 2, 4, 10, 30, 100] {
        for i in -100..=100 {
            let t = i as f64 / 10.0;
            worst = worst.max((student_t_two_tailed(t, df as f64) - tdist::two_tailed(t, df)).abs());
        }
    }
    ensure(worst < 1e-6, || format!("max p error {worst:e}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut checked = 0;
    while checked < 1000 {
        let draw = |rng: &mut ChaCha8Rng| {
            let n = rng.gen_range(2..25);
            (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect::<Vec<f64>>()
        };
        let (a, b) = (draw(&mut rng), draw(&mut rng));
        let (c, k) = (rng.gen_range(-50.0..50.0), rng.gen_range(0.1..10.0));
        let base = welch_t(&a, &b).map_err(|e| e.to_string())?;
        let swap = welch_t(&b, &a).map_err(|e| e.to_string())?;
        let shift = |xs: &[f64]| xs.iter().map(|x| x + c).collect::<Vec<_>>();
        let scale = |xs: &[f64]| xs.iter().map(|x| x * k).collect::<Vec<_>>();
        let sh = welch_t(&shift(&a), &shift(&b)).map_err(|e| e.to_string())?;
        let sc = welch_t(&scale(&a), &scale(&b)).map_err(|e| e.to_string())?;
        let near = |x: f64, y: f64| (x - y).abs() <= 1e-6 * (1.0 + x.abs());
        ensure(
            near(swap.t, -base.t) && near(swap.p, base.p) && near(sh.t, base.t) && near(sc.t, base.t) && near(sc.df, base.df),
            || format!("invariance broken for pair {checked}"),
        )?;
        checked += 1;
    }
    Ok(format!("t=-1.224745 df=4; max p error {worst:.1e}; {checked} pairs invariant"))
}

fn published_rates() -> Check {
    let cases = [
        (13.0 / 25.0, "52.0%"),
        (56.0 / 187.0, "29.9%"),
        (4.0 / 23.0, "17.4%"),
        (3.0 / 22.0, "13.6%"),
        (2.0 / 14.0, "14.3%"),
        (1.0 / 16.0, "6.3%"),
        ((3.0 + 9.0) / 20.0, "60.0%"),
    ];
    for (r, want) in cases {
        let got = format_rate(Some(r));
        ensure(got == want, || format!("{r} rendered {got}, want {want}"))?;
    }
    Ok(format!("{} rates reproduced", cases.len()))
}

fn count_lines(path: &Path) -> usize {
    std::fs::read_to_string(path).map(|t| t.lines().count()).unwrap_or(0)
}

fn pipeline_invariants() -> Check {
    // Randomized fault campaign over the fixture tasks with 15 providers.
    let fx = corpus();
    let mut config = fx.config.clone();
    let sets = config.providers.clone();
    config.providers = (0..15)
        .map(|i| {
            let mut p = sets[i % sets.len()].clone();
            p.provider_id = format!("p{i:02}");
            p
        })
        .collect();
    let campaign = Campaign::new(config)
        .map_err(|e| e.to_string())?
        .with_faults(Arc::new(SeededFaults { seed: 7, rate: 0.15 }));
    let store = campaign.open_store().map_err(|e| e.to_string())?;
    campaign.run(&store, &fx.tasks).map_err(|e| e.to_string())?;
    let records = store.load_records().map_err(|e| e.to_string())?;
    ensure(records.len() >= 100, || format!("only {} records", records.len()))?;
    for r in &records {
        monotone(r)?;
    }
    let faulted = records.iter().filter(|r| r.machine_flags.infrastructure_failure()).count();

    // Kill a real run part way through, then resume it.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    build_fixture_corpus(dir.path()).map_err(|e| e.to_string())?;
    let config = dir.path().join(CONFIG_FILE);
    let config = config.to_str().unwrap();
    cli(&["mine", "--config", config])?;
    let log = dir.path().join("store/records.jsonl");
    let mut child = Command::new(env!("CARGO_BIN_EXE_patchgauge"))
        .args(["run", "--config", config, "--sequential"])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let deadline = Instant::now() + Duration::from_secs(120);
    while count_lines(&log) < 4 && Instant::now() < deadline {
        std::thread::sleep(Duration::from_millis(20));
    }
    child.kill().map_err(|e| e.to_string())?;
    child.wait().map_err(|e| e.to_string())?;
    let early = RunStore::open(&dir.path().join("store"))
        .and_then(|s| s.load_records())
        .map_err(|e| e.to_string())?;
    ensure(!early.is_empty() && early.len() < 21, || format!("killed after {} records", early.len()))?;
    cli(&["run", "--config", config])?;
    let all = RunStore::load_records_at(&dir.path().join("store")).map_err(|e| e.to_string())?;
    let ids: BTreeSet<String> = all.iter().map(EvaluationRecord::id).collect();
    ensure(ids.len() == all.len() && all.len() == 21, || format!("{} records, {} ids", all.len(), ids.len()))?;
    for r in &early {
        ensure(all.iter().any(|x| x == r), || format!("{} changed on resume", r.id()))?;
    }
    Ok(format!(
        "{} records monotone ({faulted} with injected faults); killed at {}/21, resumed to 21 unique",
        records.len(),
        early.len()
    ))
}

fn live_processes_mentioning(marker: &str) -> Vec<String> {
    let mut out = Vec::new();
    let Ok(entries) = std::fs::read_dir("/proc") else { return out };
    for e in entries.flatten() {
        let name = e.file_name();
        let Some(pid) = name.to_str().filter(|s| s.chars().all(|c| c.is_ascii_digit())) else { continue };
        let cmd = std::fs::read(e.path().join("cmdline")).unwrap_or_default();
        if !String::from_utf8_lossy(&cmd).contains(marker) {
            continue;
        }
        let stat = std::fs::read_to_string(e.path().join("stat")).unwrap_or_default();
        if stat.rsplit(')').next().and_then(|s| s.split_whitespace().next()) != Some("Z") {
            out.push(pid.to_string());
        }
    }
    out
}

fn validator_timeout() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    std::fs::write(dir.path().join("spin.c"), "int main(void)\n{\n    for (;;) {\n    }\n}\n").map_err(|e| e.to_string())?;
    let built = Command::new("clang")
        .args(["-O0", "-o", "spin", "spin.c"])
        .current_dir(dir.path())
        .status()
        .map_err(|e| e.to_string())?;
    ensure(built.success(), || "cannot build spin".into())?;
    let spin = dir.path().join("spin");
    let spin = spin.to_str().unwrap();
    let profile = TestProfile {
        // A forked helper and the looping suite itself.
        command: format!("{spin} & {spin}"),
        timeout_secs: 3.0,
        ..TestProfile::default()
    };
    let start = Instant::now();
    let outcome = run_tests(dir.path(), &profile).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(outcome.status == TestStatus::TimeoutHang, || format!("status {:?}", outcome.status))?;
    ensure(elapsed >= Duration::from_secs(3) && elapsed < Duration::from_secs(8), || {
        format!("returned after {elapsed:?}")
    })?;
    std::thread::sleep(Duration::from_millis(200));
    let left = live_processes_mentioning(spin);
    ensure(left.is_empty(), || format!("orphans: {left:?}"))?;
    Ok(format!("TimeoutHang after {:.2}s (timeout 3s), 0 orphans", elapsed.as_secs_f64()))
}

fn triage_agreement(run: &FixtureRun) -> Check {
    use VerdictCategory::*;
    let all: Vec<_> = (0..6).map(|i| (VerdictCategory::ALL[i], VerdictCategory::ALL[i])).collect();
    ensure(agreement_from_pairs(&all).raw_agreement == Some(1.0), || "all-agree".into())?;
    let mut seven: Vec<_> = (0..7).map(|_| (IdenticalToHuman, IdenticalToHuman)).collect();
    seven.extend([(EmptyPatch, WrongSolution), (PartialFix, WrongSolution), (IdenticalToHuman, DifferentAppearsCorrect)]);
    let r = agreement_from_pairs(&seven).raw_agreement;
    ensure(r.is_some_and(|x| (x - 0.7).abs() < 1e-12), || format!("7 of 10 gave {r:?}"))?;
    ensure(agreement_from_pairs(&[]).raw_agreement.is_none(), || "empty is not absent".into())?;
    let human_only = [DifferentAppearsCorrect, PartialFix, WrongSolution];
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for rec in &run.records {
        let s = suggest_category(rec);
        ensure(!s.is_some_and(|c| human_only.contains(&c)), || format!("{} suggested {s:?}", rec.id()))?;
        *seen.entry(format!("{s:?}")).or_default() += 1;
    }
    Ok(format!("1.0 / 0.7 / absent; {} suggestions, none human-only: {seen:?}", run.records.len()))
}

fn main() {
    let run = fixture_run();
    let with_run = |f: fn(&FixtureRun) -> Check| match &run {
        Ok(r) => f(r),
        Err(e) => Err(format!("fixture run failed: {e}")),
    };
    let results: Vec<(&str, Check)> = vec![
        ("fixture end-to-end matrix", with_run(fixture_matrix)),
        ("human-baseline oracle", with_run(human_baseline)),
        ("splicer round-trip", splicer_round_trip()),
        ("categorizer totality and goldens", categorizer()),
        ("welch t-test", welch()),
        ("success-rate arithmetic", published_rates()),
        ("pipeline invariants", pipeline_invariants()),
        ("validator timeout", validator_timeout()),
        ("triage agreement", with_run(triage_agreement)),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(e) => {
                failed += 1;
                println!("FAIL {name}: {e}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
