//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Failures are reported, not hidden; the process exits non-zero on a failure
//! only when `ARC_ACCEPTANCE_STRICT=1`. The full-corpus run over all training
//! tasks takes a long time and runs only when `ARC_FULL=1`.

mod common;

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use arc_mdl::dl::{l_nat, DlConfig};
use arc_mdl::grid::{delta_apply, delta_between, Color, Grid};
use arc_mdl::learn::{initial_model, l_task, learn, predict, Example, Learned, SearchConfig};
use arc_mdl::parse::{draw, parse, ParseConfig};
use arc_mdl::task::{evaluate_batch, evaluate_task, load_task_file, task_files, ATTEMPTS};
use arc_mdl::{Path, Term};

/// Reference values for the worked example task.
const WORKED_INITIAL: f64 = 12376.9;
const WORKED_TOLERANCE: f64 = 0.10;
const WORKED_MAX_LHAT: f64 = 0.25;
const TIME_LIMIT: Duration = Duration::from_secs(30);
const GOLDEN_MIN_SOLVED: usize = 15;
const CORPUS_MAX_MEAN_SECS: f64 = 60.0;
const CORPUS_MIN_N1: usize = 20;

struct Outcome {
    name: &'static str,
    pass: Option<bool>,
    detail: String,
}

fn report(name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome {
        name,
        pass: Some(pass),
        detail,
    }
}

fn normalization_identity() -> Outcome {
    let cfg = SearchConfig::default();
    let start = Instant::now();
    let files = task_files(&common::data_dir().join("training")).expect("training data");
    let mut worst: (f64, String) = (0.0, String::new());
    let mut count = 0;
    for path in &files {
        let task = load_task_file(path).unwrap();
        let examples: Vec<Example> = task.train.iter().map(|(i, o)| Example::new(i, o, &cfg.parse)).collect();
        let Some(dl) = l_task(&initial_model(), &examples, &cfg) else {
            worst = (f64::INFINITY, task.id.clone());
            continue;
        };
        let err = (dl.normalized(&dl.as_normalizer()) - 2.0).abs();
        if err >= worst.0 {
            worst = (err, task.id.clone());
        }
        count += 1;
    }
    report(
        "normalization identity",
        files.len() == 400 && count == 400 && worst.0 < 1e-9,
        format!(
            "{count}/{} tasks, max |L^(M0) - 2| = {:.1e} ({}), {:.1}s",
            files.len(),
            worst.0,
            worst.1,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn learn_worked_example() -> (Learned, Duration) {
    let task = common::training_task("b94a9452");
    let start = Instant::now();
    let learned = learn(&task.train, &SearchConfig::default()).expect("learns");
    (learned, start.elapsed())
}

fn worked_example_dl(learned: &Learned, took: Duration) -> Outcome {
    let task = common::training_task("b94a9452");
    let cfg = SearchConfig::default();
    let examples: Vec<Example> = task.train.iter().map(|(i, o)| Example::new(i, o, &cfg.parse)).collect();
    let initial = l_task(&initial_model(), &examples, &cfg).unwrap().total();
    let rel = (initial - WORKED_INITIAL).abs() / WORKED_INITIAL;
    let lhat = learned.dl.normalized(&learned.normalizer);
    let out_data = learned.dl.data_out;
    println!("{}", learned.dl.table(&learned.normalizer));
    report(
        "worked-example DL (b94a9452)",
        rel <= WORKED_TOLERANCE && lhat <= WORKED_MAX_LHAT && out_data == 0.0 && took <= TIME_LIMIT,
        format!(
            "initial L(M,D) {initial:.1} ({:+.1}% vs {WORKED_INITIAL}), final L^ {lhat:.3} (<= {WORKED_MAX_LHAT}), \
             output data {out_data:.1} bits (== 0), {:.2}s",
            100.0 * (initial - WORKED_INITIAL) / WORKED_INITIAL,
            took.as_secs_f64()
        ),
    )
}

fn var_to(t: &Term, suffix: &str) -> bool {
    var_to_str(&t.to_string(), suffix)
}

fn difference_of(t: &Term, coord: &str) -> bool {
    let s = t.to_string();
    let suffix = format!(".pos.{coord}");
    s.split_once(" - ")
        .map_or(false, |(a, b)| var_to_str(a, &suffix) && var_to_str(b, &suffix) && a != b)
}

fn var_to_str(s: &str, suffix: &str) -> bool {
    s.strip_prefix("layers[")
        .and_then(|r| r.split_once(']'))
        .map_or(false, |(k, rest)| k.parse::<usize>().is_ok() && rest == suffix)
}

fn trace_reproduction(learned: &Learned, took: Duration) -> Outcome {
    let m = &learned.model;
    let at = |t: &Term, p: &str| t.resolve(&Path::parse(p).unwrap()).ok().cloned();
    let is_rect = |o: &Term| o.to_string().contains("Rectangle(");
    let mut missing = Vec::new();
    if m.input.layers().iter().filter(|o| is_rect(o)).count() < 2 {
        missing.push("two input rectangles".to_string());
    }
    if !m.output.layers().first().map_or(false, is_rect) {
        missing.push("output rectangle".to_string());
    }
    let expectations: [(&str, &str); 5] = [
        ("size", ".shape.size"),
        ("color", ".shape.color"),
        ("layers[0].shape.size", ".shape.size"),
        ("layers[0].shape.color", ".shape.color"),
        ("layers[0].shape.mask", ".shape.mask"),
    ];
    for (path, suffix) in expectations {
        if !at(&m.output, path).map_or(false, |t| var_to(&t, suffix)) {
            missing.push(format!("out.{path} = layers[_]{suffix}"));
        }
    }
    for coord in ["i", "j"] {
        let p = format!("layers[0].pos.{coord}");
        if !at(&m.output, &p).map_or(false, |t| difference_of(&t, coord)) {
            missing.push(format!("out.{p} = difference of input positions"));
        }
    }
    let steps = &learned.trace.steps;
    let descending = steps.windows(2).all(|w| w[1].lhat < w[0].lhat);

    let task = common::training_task("b94a9452");
    let cfg = SearchConfig::default();
    let (test_in, test_out) = &task.test[0];
    let attempts = predict(m, test_in, &cfg, ATTEMPTS).unwrap_or_default();
    let attempt = attempts.iter().position(|g| Some(g) == test_out.as_ref()).map(|k| k + 1);

    println!("{}", learned.trace.table());
    println!("learned model: {m}");
    report(
        "trace reproduction (b94a9452)",
        missing.is_empty() && descending && attempt == Some(1) && took <= TIME_LIMIT,
        format!(
            "{} steps, strictly descending: {descending}, missing: [{}], test solved at attempt {}, {:.2}s",
            steps.len() - 1,
            missing.join("; "),
            attempt.map_or("none".into(), |a| a.to_string()),
            took.as_secs_f64()
        ),
    )
}

fn golden_tasks() -> Outcome {
    let cfg = SearchConfig::default();
    let mut solved = Vec::new();
    let mut failed = Vec::new();
    let mut over_time = Vec::new();
    for id in common::GOLDEN {
        let r = evaluate_task(&common::training_task(id), &cfg);
        // a task counts only if learning ended within the timeout budget
        if r.learn_secs > TIME_LIMIT.as_secs_f64() + 1.0 {
            over_time.push(id);
        }
        if r.test_solved() && r.learn_secs <= TIME_LIMIT.as_secs_f64() + 1.0 {
            solved.push(id);
        } else {
            failed.push(id);
        }
    }
    report(
        "golden tasks",
        solved.len() >= GOLDEN_MIN_SOLVED,
        format!(
            "{}/22 solved (>= {GOLDEN_MIN_SOLVED}); unsolved: {}{}",
            solved.len(),
            failed.join(" "),
            if over_time.is_empty() { String::new() } else { format!("; over time: {}", over_time.join(" ")) }
        ),
    )
}

fn full_corpus() -> Outcome {
    if std::env::var("ARC_FULL").map_or(true, |v| v != "1") {
        return Outcome {
            name: "full corpus",
            pass: None,
            detail: "skipped (set ARC_FULL=1; several minutes per hundred tasks)".into(),
        };
    }
    let (_, s) = evaluate_batch(&common::data_dir().join("training"), &SearchConfig::default(), |_| ()).unwrap();
    println!("{}", s.table());
    report(
        "full corpus",
        s.tasks == 400 && s.mean_learn_secs <= CORPUS_MAX_MEAN_SECS && s.test_n1 >= CORPUS_MIN_N1,
        format!(
            "{} tasks, mean learn {:.1}s (<= {CORPUS_MAX_MEAN_SECS}), test n1 {} (>= {CORPUS_MIN_N1}), n2 {:.1}",
            s.tasks, s.mean_learn_secs, s.test_n1, s.test_n2
        ),
    )
}

fn all_grids(h: usize, w: usize) -> Vec<Grid> {
    let colors = [Color::BLACK, Color::RED, Color::BLUE];
    (0..3usize.pow((h * w) as u32))
        .map(|mut code| {
            let mut g = Grid::new(h, w, Color::BLACK).unwrap();
            for cell in 0..h * w {
                g.set(cell / w, cell % w, colors[code % 3]);
                code /= 3;
            }
            g
        })
        .collect()
}

fn property_suites() -> Outcome {
    let start = Instant::now();
    let mut broken = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut lossless = true;
    for _ in 0..1000 {
        let (m, g) = common::random_pair(&mut rng);
        for r in parse(&m, &g, &ParseConfig::default(), &DlConfig::default()).iter().flatten() {
            let back = draw(&r.tree).ok().and_then(|d| delta_apply(&d, &r.delta).ok());
            lossless &= back.as_ref() == Some(&g) && m.matches(&r.tree).unwrap_or(false);
        }
    }
    if !lossless {
        broken.push("lossless read");
    }

    let small = all_grids(2, 2);
    let big = all_grids(3, 3);
    let round_trip = |g1: &Grid, g2: &Grid| delta_apply(g1, &delta_between(g2, g1).unwrap()).ok().as_ref() == Some(g2);
    let delta_ok = small.iter().all(|a| small.iter().all(|b| round_trip(a, b)))
        && big.iter().all(|b| round_trip(&big[0], b) && round_trip(&big[big.len() - 1], b));
    if !delta_ok {
        broken.push("delta round-trip");
    }

    let kraft = DlConfig::default()
        .distributions()
        .iter()
        .all(|(_, ps)| (ps.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    if !kraft {
        broken.push("Kraft");
    }
    if (l_nat(0), l_nat(1), l_nat(3)) != (1.0, 3.0, 5.0) {
        broken.push("l_nat values");
    }

    let cfg = SearchConfig::default();
    let (mut monotone, mut deterministic) = (true, true);
    for id in common::QUICK {
        let task = common::training_task(id);
        let a = learn(&task.train, &cfg).unwrap();
        let b = learn(&task.train, &cfg).unwrap();
        monotone &= a.trace.steps.windows(2).all(|w| w[1].lhat < w[0].lhat);
        deterministic &= a.trace == b.trace && a.model == b.model;
    }
    if !monotone {
        broken.push("trace descent");
    }
    if !deterministic {
        broken.push("determinism");
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        "property suites",
        broken.is_empty() && secs < 60.0,
        format!(
            "lossless x1000, delta 2x2/3x3, Kraft, l_nat, descent + determinism on {} tasks; broken: [{}]; {secs:.1}s (< 60)",
            common::QUICK.len(),
            broken.join(", ")
        ),
    )
}

fn pipeline_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let cfg = SearchConfig::default();
    let mut ok = 0;
    let mut first_failure = String::new();
    for _ in 0..50 {
        let m = common::random_definite_model(&mut rng);
        let (gi, go) = common::created(&m);
        let got = predict(&m, &gi, &cfg, 1).unwrap_or_default();
        if got.first() == Some(&go) {
            ok += 1;
        } else if first_failure.is_empty() {
            first_failure = m.to_string();
        }
    }
    report(
        "pipeline identity",
        ok == 50,
        if ok == 50 { "50/50 definite models".into() } else { format!("{ok}/50; first failure: {first_failure}") },
    )
}

fn main() {
    // `cargo test` passes harness flags such as `--list`; there are no sub-tests to list.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let (learned, took) = learn_worked_example();
    let outcomes = [
        normalization_identity(),
        worked_example_dl(&learned, took),
        trace_reproduction(&learned, took),
        golden_tasks(),
        full_corpus(),
        property_suites(),
        pipeline_identity(),
    ];
    println!();
    let mut failures = 0;
    for o in &outcomes {
        let tag = match o.pass {
            Some(true) => "PASS",
            Some(false) => {
                failures += 1;
                "FAIL"
            }
            None => "SKIP",
        };
        println!("{tag} {}: {}", o.name, o.detail);
    }
    println!("\n{failures} criterion(s) failed");
    if failures > 0 && std::env::var("ARC_ACCEPTANCE_STRICT").map_or(false, |v| v == "1") {
        std::process::exit(1);
    }
}
