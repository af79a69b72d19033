//! ARC task files, per-task evaluation and batch scoring.

use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dl::DlRecord;
use crate::grid::{Grid, GridError};
use crate::learn::{learn, predict, SearchConfig, TraceStep};

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("malformed task JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid grid in {place}: {source}")]
    Grid { place: String, source: GridError },
    #[error("task has no {0} examples")]
    Empty(&'static str),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Task {
    pub id: String,
    pub train: Vec<(Grid, Grid)>,
    pub test: Vec<(Grid, Option<Grid>)>,
}

#[derive(Serialize, Deserialize)]
struct RawPair {
    input: Vec<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output: Option<Vec<Vec<i64>>>,
}

#[derive(Serialize, Deserialize)]
struct RawTask {
    train: Vec<RawPair>,
    test: Vec<RawPair>,
}

fn to_grid(rows: &[Vec<i64>], place: String) -> Result<Grid, TaskError> {
    Grid::from_rows(rows).map_err(|source| TaskError::Grid { place, source })
}

fn to_rows(g: &Grid) -> Vec<Vec<i64>> {
    g.to_rows()
        .into_iter()
        .map(|r| r.into_iter().map(i64::from).collect())
        .collect()
}

/// Parses and validates a task in the public ARC JSON layout.
pub fn load_task(id: &str, bytes: &[u8]) -> Result<Task, TaskError> {
    let raw: RawTask = serde_json::from_slice(bytes)?;
    if raw.train.is_empty() {
        return Err(TaskError::Empty("train"));
    }
    if raw.test.is_empty() {
        return Err(TaskError::Empty("test"));
    }
    let mut train = Vec::with_capacity(raw.train.len());
    for (k, p) in raw.train.iter().enumerate() {
        let i = to_grid(&p.input, format!("train[{k}].input"))?;
        let out = p.output.as_ref().ok_or(TaskError::Empty("train output"))?;
        let o = to_grid(out, format!("train[{k}].output"))?;
        train.push((i, o));
    }
    let mut test = Vec::with_capacity(raw.test.len());
    for (k, p) in raw.test.iter().enumerate() {
        let i = to_grid(&p.input, format!("test[{k}].input"))?;
        let o = match &p.output {
            Some(rows) => Some(to_grid(rows, format!("test[{k}].output"))?),
            None => None,
        };
        test.push((i, o));
    }
    Ok(Task {
        id: id.to_string(),
        train,
        test,
    })
}

pub fn load_task_file(path: &FsPath) -> Result<Task, TaskError> {
    let bytes = fs::read(path).map_err(|source| TaskError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    load_task(&id, &bytes)
}

/// Canonical JSON rendering of a task.
pub fn task_to_json(task: &Task) -> String {
    let raw = RawTask {
        train: task
            .train
            .iter()
            .map(|(i, o)| RawPair {
                input: to_rows(i),
                output: Some(to_rows(o)),
            })
            .collect(),
        test: task
            .test
            .iter()
            .map(|(i, o)| RawPair {
                input: to_rows(i),
                output: o.as_ref().map(to_rows),
            })
            .collect(),
    };
    serde_json::to_string(&raw).expect("task serializes")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub solved: bool,
    /// 1-based index of the first correct attempt.
    pub attempt: Option<usize>,
    pub attempts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub id: String,
    pub model: String,
    pub trace: Vec<TraceStep>,
    pub train: Vec<Verdict>,
    pub test: Vec<Verdict>,
    /// Fraction of test examples solved.
    pub score: f64,
    pub learn_secs: f64,
    pub timed_out: bool,
    pub lhat: f64,
    pub dl: Vec<DlRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TaskReport {
    pub fn train_solved(&self) -> bool {
        self.train.iter().all(|v| v.solved)
    }

    pub fn test_solved(&self) -> bool {
        self.test.iter().all(|v| v.solved)
    }

    pub fn train_score(&self) -> f64 {
        fraction(&self.train)
    }
}

fn fraction(vs: &[Verdict]) -> f64 {
    if vs.is_empty() {
        0.0
    } else {
        vs.iter().filter(|v| v.solved).count() as f64 / vs.len() as f64
    }
}

/// Number of attempts allowed per test input.
pub const ATTEMPTS: usize = 3;

fn verdict(attempts: &[Grid], expected: Option<&Grid>) -> Verdict {
    let hit = expected.and_then(|e| attempts.iter().position(|g| g == e));
    Verdict {
        solved: hit.is_some(),
        attempt: hit.map(|k| k + 1),
        attempts: attempts.len(),
    }
}

/// Learns on the train examples only, then scores predictions.
pub fn evaluate_task(task: &Task, cfg: &SearchConfig) -> TaskReport {
    let start = Instant::now();
    let learned = learn(&task.train, cfg);
    let learn_secs = start.elapsed().as_secs_f64();
    let mut report = TaskReport {
        id: task.id.clone(),
        model: String::new(),
        trace: vec![],
        train: vec![],
        test: vec![],
        score: 0.0,
        learn_secs,
        timed_out: false,
        lhat: f64::NAN,
        dl: vec![],
        error: None,
    };
    let learned = match learned {
        Ok(l) => l,
        Err(e) => {
            report.error = Some(e.to_string());
            report.train = task.train.iter().map(|_| verdict(&[], None)).collect();
            report.test = task.test.iter().map(|_| verdict(&[], None)).collect();
            return report;
        }
    };
    let run = |input: &Grid, expected: Option<&Grid>| {
        let attempts = predict(&learned.model, input, cfg, ATTEMPTS).unwrap_or_default();
        verdict(&attempts, expected)
    };
    report.train = task.train.iter().map(|(i, o)| run(i, Some(o))).collect();
    report.test = task.test.iter().map(|(i, o)| run(i, o.as_ref())).collect();
    report.score = fraction(&report.test);
    report.model = learned.model.to_string();
    report.lhat = learned.dl.normalized(&learned.normalizer);
    report.dl = learned.dl.records(&learned.normalizer);
    report.trace = learned.trace.steps;
    report.timed_out = learned.timed_out;
    report
}

/// Aggregate scores: `n1` counts fully solved tasks, `n2` sums partial scores.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub tasks: usize,
    pub train_n1: usize,
    pub train_n2: f64,
    pub test_n1: usize,
    pub test_n2: f64,
    pub mean_learn_secs: f64,
}

impl Summary {
    pub fn of(reports: &[TaskReport]) -> Summary {
        let mut s = Summary {
            tasks: reports.len(),
            ..Summary::default()
        };
        for r in reports {
            s.train_n1 += r.train_solved() as usize;
            s.train_n2 += r.train_score();
            s.test_n1 += r.test_solved() as usize;
            s.test_n2 += r.score;
            s.mean_learn_secs += r.learn_secs;
        }
        if !reports.is_empty() {
            s.mean_learn_secs /= reports.len() as f64;
        }
        s
    }

    /// `time | train n1 / n2 | test n1 / n2`.
    pub fn table(&self) -> String {
        format!(
            " tasks |   time |         train |          test\n\
             -------+--------+---------------+--------------\n\
             {:>6} | {:>5.1}s | {:>5} / {:<5.1} | {:>5} / {:<5.1}\n",
            self.tasks, self.mean_learn_secs, self.train_n1, self.train_n2, self.test_n1, self.test_n2
        )
    }
}

/// Task files of a directory in lexicographic order of their ids.
pub fn task_files(dir: &FsPath) -> Result<Vec<PathBuf>, TaskError> {
    let io = |source| TaskError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map_or(false, |e| e == "json"))
        .collect();
    files.sort_by_key(|p| p.file_stem().map(|s| s.to_os_string()));
    Ok(files)
}

/// Evaluates every task of a directory; `on_report` sees each report as it completes.
pub fn evaluate_batch(
    dir: &FsPath,
    cfg: &SearchConfig,
    mut on_report: impl FnMut(&TaskReport),
) -> Result<(Vec<TaskReport>, Summary), TaskError> {
    let mut reports = Vec::new();
    for path in task_files(dir)? {
        let task = load_task_file(&path)?;
        let r = evaluate_task(&task, cfg);
        on_report(&r);
        reports.push(r);
    }
    let s = Summary::of(&reports);
    Ok((reports, s))
}
