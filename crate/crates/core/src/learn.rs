//! Model refinement search and the task-model pipelines.
//!
//! Learning starts from blank grid models and greedily applies refinements
//! (object insertions, unknowns replaced by patterns, output parts replaced
//! by expressions over the input tree) as long as the normalized description
//! length strictly decreases.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dl::{l_model, DlConfig, Normalizer, TaskDl};
use crate::grid::Grid;
use crate::model::{Base, Expr, ModelError, Path, Side, Signature, Sort, Step, TaskModel, Term};
use crate::parse::{read_analyzed, write, GridAnalysis, ParseConfig, ParseError, Reading};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("task has no train examples")]
    NoExamples,
    #[error("initial model cannot read the examples")]
    Unreadable,
    #[error("unknown ordering policy {0:?}")]
    BadPolicy(String),
}

/// Whether a refinement adds an object or replaces a part.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    Shape,
    Expr,
}

/// A group of refinements: one side, one kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Category {
    pub side: Side,
    pub kind: Kind,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            Kind::Shape => 'S',
            Kind::Expr => 'E',
        };
        let s = match self.side {
            Side::In => 'i',
            Side::Out => 'o',
        };
        write!(f, "{k}{s}")
    }
}

/// Order in which refinement categories are proposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderPolicy(pub [Category; 4]);

impl Default for OrderPolicy {
    /// Output shapes, input shapes, output expressions, input expressions.
    fn default() -> Self {
        "So-Si-Eo-Ei".parse().unwrap()
    }
}

impl FromStr for OrderPolicy {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || LearnError::BadPolicy(s.to_string());
        let cats: Vec<Category> = s
            .split(|c| c == '-' || c == ',')
            .map(|t| {
                let b = t.trim().as_bytes();
                if b.len() != 2 {
                    return Err(bad());
                }
                let kind = match b[0] {
                    b'S' | b's' => Kind::Shape,
                    b'E' | b'e' => Kind::Expr,
                    _ => return Err(bad()),
                };
                let side = match b[1] {
                    b'i' | b'I' => Side::In,
                    b'o' | b'O' => Side::Out,
                    _ => return Err(bad()),
                };
                Ok(Category { side, kind })
            })
            .collect::<Result<_, _>>()?;
        let arr: [Category; 4] = cats.try_into().map_err(|_| bad())?;
        for (k, c) in arr.iter().enumerate() {
            if arr[..k].contains(c) {
                return Err(bad());
            }
        }
        Ok(OrderPolicy(arr))
    }
}

impl fmt::Display for OrderPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join("-"))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Compressive refinements evaluated per model and step.
    pub k_r: usize,
    /// Beam width.
    pub k_m: usize,
    pub timeout: Duration,
    pub parse: ParseConfig,
    /// Divergences allowed when reading test inputs.
    pub test_max_diffs: usize,
    pub dl: DlConfig,
    pub order: OrderPolicy,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            k_r: 20,
            k_m: 1,
            timeout: Duration::from_secs(30),
            parse: ParseConfig::default(),
            test_max_diffs: 3,
            dl: DlConfig::default(),
            order: OrderPolicy::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Refinement {
    Insert { side: Side, at: usize, object: Term },
    Replace { side: Side, path: Path, template: Term },
}

impl Refinement {
    pub fn side(&self) -> Side {
        match self {
            Refinement::Insert { side, .. } | Refinement::Replace { side, .. } => *side,
        }
    }

    /// The refined model, checked for well-formedness.
    pub fn apply(&self, m: &TaskModel) -> Result<TaskModel, ModelError> {
        let mut out = m.clone();
        match self {
            Refinement::Insert { side, at, object } => {
                *out.side_mut(*side) = m.side(*side).insert_layer(*at, object.clone())?;
                if *side == Side::In {
                    out.output = shift_layer_refs(&m.output, *at);
                }
            }
            Refinement::Replace { side, path, template } => {
                *out.side_mut(*side) = m.side(*side).subst(path, template.clone())?;
            }
        }
        out.check()?;
        Ok(out)
    }
}

impl fmt::Display for Refinement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Refinement::Insert { side, at, object } => write!(f, "{side}.{} = {object}", Path::layer(*at)),
            Refinement::Replace { side, path, template } => write!(f, "{side}.{path} = {template}"),
        }
    }
}

/// Renumbers references to input layers at or below a newly inserted one.
fn shift_layer_refs(t: &Term, at: usize) -> Term {
    fn shift_path(p: &Path, at: usize) -> Path {
        let mut q = p.clone();
        if let [Step::Field(crate::model::Field::Layers), Step::Index(k), ..] = q.0.as_mut_slice() {
            if *k >= at {
                *k += 1;
            }
        }
        q
    }
    fn shift_expr(e: &Expr, at: usize) -> Expr {
        match e {
            Expr::Var(p) => Expr::Var(shift_path(p, at)),
            Expr::Zero => Expr::Zero,
            Expr::Plus(a, b) => Expr::Plus(Box::new(shift_layer_refs(a, at)), Box::new(shift_layer_refs(b, at))),
            Expr::Minus(a, b) => Expr::Minus(Box::new(shift_layer_refs(a, at)), Box::new(shift_layer_refs(b, at))),
        }
    }
    match t {
        Term::Expr(e) => Term::Expr(shift_expr(e, at)),
        Term::Node(c, args) => Term::Node(*c, args.iter().map(|a| shift_layer_refs(a, at)).collect()),
        Term::List(items) => Term::List(items.iter().map(|a| shift_layer_refs(a, at)).collect()),
        other => other.clone(),
    }
}

pub fn initial_model() -> TaskModel {
    TaskModel::initial()
}

/// One train example, with its grids analyzed once.
pub struct Example {
    pub input: GridAnalysis,
    pub output: GridAnalysis,
}

impl Example {
    pub fn new(input: &Grid, output: &Grid, cfg: &ParseConfig) -> Example {
        Example {
            input: GridAnalysis::new(input, cfg.connectivity),
            output: GridAnalysis::new(output, cfg.connectivity),
        }
    }
}

/// Chained readings of one example: input readings, then output readings
/// with each input tree as environment, best combined length first.
pub fn train_pair(
    m: &TaskModel,
    ex: &Example,
    parse: &ParseConfig,
    dl: &DlConfig,
) -> Result<Vec<(Reading, Reading)>, LearnError> {
    let ris = read_analyzed(&m.input, None, &ex.input, parse, dl)?;
    chain_outputs(m, ris, ex, parse, dl)
}

fn chain_outputs(
    m: &TaskModel,
    ris: Vec<Reading>,
    ex: &Example,
    parse: &ParseConfig,
    dl: &DlConfig,
) -> Result<Vec<(Reading, Reading)>, LearnError> {
    let mut pairs = Vec::new();
    for ri in ris {
        // an output model may be inapplicable on some input readings
        let ros = match read_analyzed(&m.output, Some(&ri.tree), &ex.output, parse, dl) {
            Ok(r) => r,
            Err(ParseError::Model(_)) | Err(ParseError::Draw(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        for ro in ros {
            pairs.push((ri.clone(), ro));
        }
    }
    pairs.sort_by(|a, b| (a.0.dl + a.1.dl).total_cmp(&(b.0.dl + b.1.dl)));
    Ok(pairs)
}

/// A task model with its readings and description lengths on the examples.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub model: TaskModel,
    pub dl: TaskDl,
    pub pairs: Vec<Vec<(Reading, Reading)>>,
    inputs: Vec<Vec<Reading>>,
}

impl Evaluation {
    pub fn normalized(&self, n: &Normalizer) -> f64 {
        self.dl.normalized(n)
    }
}

/// Evaluates `m` on the examples; `None` when some example cannot be read.
/// Input readings of `reuse` are kept when the input model is unchanged.
pub fn evaluate(
    m: &TaskModel,
    examples: &[Example],
    parse: &ParseConfig,
    dl: &DlConfig,
    reuse: Option<&Evaluation>,
) -> Option<Evaluation> {
    let reuse = reuse.filter(|e| e.model.input == m.input);
    let mut pairs = Vec::with_capacity(examples.len());
    let mut inputs = Vec::with_capacity(examples.len());
    let (mut data_in, mut data_out) = (0.0, 0.0);
    for (k, ex) in examples.iter().enumerate() {
        let ris = match reuse {
            Some(e) => e.inputs[k].clone(),
            None => read_analyzed(&m.input, None, &ex.input, parse, dl).ok()?,
        };
        if ris.is_empty() {
            return None;
        }
        let ps = chain_outputs(m, ris.clone(), ex, parse, dl).ok()?;
        let best = ps.first()?;
        data_in += best.0.dl;
        data_out += best.1.dl;
        pairs.push(ps);
        inputs.push(ris);
    }
    let sig = m.signature();
    let dl_tuple = TaskDl {
        model_in: l_model(dl, &m.input, None),
        model_out: l_model(dl, &m.output, Some(&sig)),
        data_in: dl.alpha * data_in,
        data_out: dl.alpha * data_out,
    };
    Some(Evaluation {
        model: m.clone(),
        dl: dl_tuple,
        pairs,
        inputs,
    })
}

/// `L(M, D)` of a task model on train examples, split by side.
pub fn l_task(m: &TaskModel, examples: &[Example], cfg: &SearchConfig) -> Option<TaskDl> {
    evaluate(m, examples, &cfg.parse, &cfg.dl, None).map(|e| e.dl)
}

/// Refinements ordered by the policy. Conditions are checked against the
/// kept reading pairs of `eval`: some pair per example must agree.
pub fn propose_refinements(eval: &Evaluation, order: &OrderPolicy) -> Vec<Refinement> {
    let mut out = Vec::new();
    for cat in order.0 {
        match (cat.kind, cat.side) {
            (Kind::Shape, side) => insertions(&eval.model, side, &mut out),
            (Kind::Expr, Side::In) => patterns(eval, Side::In, &mut out),
            (Kind::Expr, Side::Out) => output_replacements(eval, &mut out),
        }
    }
    out
}

fn insertions(m: &TaskModel, side: Side, out: &mut Vec<Refinement>) {
    let n = m.side(side).layers().len();
    let seeds = [
        Term::pos_shape(Term::Unknown, Term::rectangle(Term::Unknown, Term::Unknown, Term::Unknown)),
        Term::pos_shape(Term::Unknown, Term::point(Term::Unknown)),
    ];
    let sig = m.signature();
    for at in 0..=n {
        for s in &seeds {
            out.push(Refinement::Insert {
                side,
                at,
                object: s.clone(),
            });
        }
        if side == Side::Out {
            for (p, _) in sig.of_base(Base::Object) {
                out.push(Refinement::Insert {
                    side,
                    at,
                    object: Expr::var(p.clone()),
                });
            }
            for (p, _) in sig.of_base(Base::Shape) {
                out.push(Refinement::Insert {
                    side,
                    at,
                    object: Term::pos_shape(Term::Unknown, Expr::var(p.clone())),
                });
            }
        }
    }
}

/// Pattern generalizing a ground value: itself for primitives, the bare
/// constructor otherwise.
fn pattern_of(v: &Term) -> Term {
    match v {
        Term::Node(c, _) => Term::ctor_pattern(*c),
        other => other.clone(),
    }
}

fn tree_of<'a>(pair: &'a (Reading, Reading), side: Side) -> &'a Term {
    match side {
        Side::In => &pair.0.tree,
        Side::Out => &pair.1.tree,
    }
}

/// Candidates (in first-seen order) holding for some pair of every example.
fn agreed<T: PartialEq + Clone>(eval: &Evaluation, f: impl Fn(&(Reading, Reading)) -> Vec<T>) -> Vec<T> {
    let mut acc: Option<Vec<T>> = None;
    for ps in &eval.pairs {
        let mut here: Vec<T> = Vec::new();
        for p in ps {
            for v in f(p) {
                if !here.contains(&v) {
                    here.push(v);
                }
            }
        }
        acc = Some(match acc {
            None => here,
            Some(prev) => prev.into_iter().filter(|v| here.contains(v)).collect(),
        });
    }
    acc.unwrap_or_default()
}

fn patterns(eval: &Evaluation, side: Side, out: &mut Vec<Refinement>) {
    let m = eval.model.side(side);
    for p in m.unknown_paths() {
        let ts = agreed(eval, |pair| tree_of(pair, side).resolve(&p).map(pattern_of).into_iter().collect());
        for t in ts {
            out.push(Refinement::Replace {
                side,
                path: p.clone(),
                template: t,
            });
        }
    }
}

/// Output parts that may be replaced: unknowns and expression-free parts of
/// a sort an expression can produce.
fn replaceable_output_paths(m: &Term) -> Vec<(Path, Sort)> {
    let mut out = Vec::new();
    m.walk(Sort::Grid, &mut |p, sort, t| {
        let ok_sort = !matches!(sort, Sort::Grid | Sort::Layers | Sort::Bits);
        let in_list = matches!(p.0.last(), Some(Step::Index(_)));
        if ok_sort && !t.has_expr() && !in_list {
            out.push((p.clone(), sort));
        }
    });
    out
}

const CONSTANTS: [i64; 3] = [1, 2, 3];

fn output_replacements(eval: &Evaluation, out: &mut Vec<Refinement>) {
    let sig: Signature = eval.model.signature();
    let targets = replaceable_output_paths(&eval.model.output);
    let ints: Vec<&Path> = sig.of_base(Base::Int).map(|(p, _)| p).collect();

    // per example, per pair: env integer values and target values
    let int_vals: Vec<Vec<Vec<Option<i64>>>> = eval
        .pairs
        .iter()
        .map(|ps| {
            ps.iter()
                .map(|(ri, _)| ints.iter().map(|v| ri.tree.resolve(v).ok().and_then(Term::as_int)).collect())
                .collect()
        })
        .collect();

    let mut vars = Vec::new();
    let mut pats = Vec::new();
    let mut minus_c = Vec::new();
    let mut plus_c = Vec::new();
    let mut minus_xy = Vec::new();
    let mut plus_xy = Vec::new();
    let rep = |path: &Path, template: Term| Refinement::Replace {
        side: Side::Out,
        path: path.clone(),
        template,
    };

    for (p, sort) in &targets {
        let target_of = |pair: &(Reading, Reading)| pair.1.tree.resolve(p).ok().cloned();
        let current = eval.model.output.resolve(p).ok();
        if current.map_or(false, Term::is_unknown) {
            for t in agreed(eval, |pair| target_of(pair).map(|v| pattern_of(&v)).into_iter().collect()) {
                pats.push(rep(p, t));
            }
        }
        if let Sort::Int(_) = sort {
            // all predicates below: for every example, some pair satisfies it
            let holds = |pred: &dyn Fn(&[Option<i64>], i64) -> bool| {
                eval.pairs.iter().zip(&int_vals).all(|(ps, vals)| {
                    ps.iter()
                        .zip(vals)
                        .any(|(pair, vs)| target_of(pair).and_then(|t| t.as_int()).map_or(false, |t| pred(vs, t)))
                })
            };
            for (a, x) in ints.iter().enumerate() {
                if holds(&|vs, t| vs[a] == Some(t)) {
                    vars.push(rep(p, Expr::var((*x).clone())));
                }
            }
            for (a, x) in ints.iter().enumerate() {
                for c in CONSTANTS {
                    if holds(&|vs, t| vs[a] == Some(t + c)) {
                        minus_c.push(rep(p, Expr::minus(Expr::var((*x).clone()), Term::Int(c))));
                    }
                }
            }
            for (a, x) in ints.iter().enumerate() {
                for c in CONSTANTS {
                    if holds(&|vs, t| vs[a] == Some(t - c)) {
                        plus_c.push(rep(p, Expr::plus(Expr::var((*x).clone()), Term::Int(c))));
                    }
                }
            }
            for (a, x) in ints.iter().enumerate() {
                for (b, y) in ints.iter().enumerate() {
                    if a != b && holds(&|vs, t| matches!((vs[a], vs[b]), (Some(u), Some(v)) if u - v == t)) {
                        minus_xy.push(rep(p, Expr::minus(Expr::var((*x).clone()), Expr::var((*y).clone()))));
                    }
                }
            }
            for (a, x) in ints.iter().enumerate() {
                for (b, y) in ints.iter().enumerate().skip(a) {
                    if holds(&|vs, t| matches!((vs[a], vs[b]), (Some(u), Some(v)) if u + v == t)) {
                        plus_xy.push(rep(p, Expr::plus(Expr::var((*x).clone()), Expr::var((*y).clone()))));
                    }
                }
            }
        } else {
            let same_base: Vec<&Path> = sig.of_base(sort.base()).map(|(q, _)| q).collect();
            for v in same_base {
                let ok = eval.pairs.iter().all(|ps| {
                    ps.iter()
                        .any(|pair| matches!((target_of(pair), pair.0.tree.resolve(v)), (Some(t), Ok(x)) if &t == x))
                });
                if ok {
                    vars.push(rep(p, Expr::var(v.clone())));
                }
            }
        }
    }
    out.extend(vars);
    out.extend(pats);
    out.extend(minus_c);
    out.extend(plus_c);
    out.extend(minus_xy);
    out.extend(plus_xy);
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub lhat: f64,
    pub refinement: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub steps: Vec<TraceStep>,
}

impl SearchTrace {
    /// The `step | L^ | refinement` table.
    pub fn table(&self) -> String {
        let mut s = String::from(" step | L^(M,D) | refinement\n------+---------+-----------\n");
        for t in &self.steps {
            s.push_str(&format!("{:>5} | {:>7.3} | {}\n", t.step, t.lhat, t.refinement));
        }
        s
    }
}

/// Result of learning on one task.
#[derive(Clone, Debug)]
pub struct Learned {
    pub model: TaskModel,
    pub trace: SearchTrace,
    pub dl: TaskDl,
    pub normalizer: Normalizer,
    pub timed_out: bool,
}

struct BeamItem {
    eval: Evaluation,
    lhat: f64,
    trace: SearchTrace,
}

/// Greedy (beam) search for the model with minimal normalized description length.
pub fn learn(train: &[(Grid, Grid)], cfg: &SearchConfig) -> Result<Learned, LearnError> {
    if train.is_empty() {
        return Err(LearnError::NoExamples);
    }
    let deadline = Instant::now() + cfg.timeout;
    let examples: Vec<Example> = train.iter().map(|(i, o)| Example::new(i, o, &cfg.parse)).collect();
    let m0 = initial_model();
    let e0 = evaluate(&m0, &examples, &cfg.parse, &cfg.dl, None).ok_or(LearnError::Unreadable)?;
    let norm = e0.dl.as_normalizer();
    let lhat0 = e0.normalized(&norm);
    let mut beam = vec![BeamItem {
        eval: e0,
        lhat: lhat0,
        trace: SearchTrace {
            steps: vec![TraceStep {
                step: 0,
                lhat: lhat0,
                refinement: String::new(),
            }],
        },
    }];
    let mut timed_out = false;
    let mut best_idx_lhat = lhat0;
    let mut best: (Evaluation, SearchTrace) = (beam[0].eval.clone(), beam[0].trace.clone());

    'search: loop {
        let mut next: Vec<BeamItem> = Vec::new();
        for item in &beam {
            let mut found = 0;
            for r in propose_refinements(&item.eval, &cfg.order) {
                if Instant::now() >= deadline {
                    timed_out = true;
                    break;
                }
                let Ok(m) = r.apply(&item.eval.model) else {
                    continue;
                };
                let reuse = (r.side() == Side::Out).then_some(&item.eval);
                let Some(e) = evaluate(&m, &examples, &cfg.parse, &cfg.dl, reuse) else {
                    continue;
                };
                let lhat = e.normalized(&norm);
                if lhat < item.lhat - 1e-9 {
                    log::debug!("compressive {:.4}: {r}", lhat);
                    if !next.iter().any(|n| n.eval.model == e.model) {
                        let mut trace = item.trace.clone();
                        trace.steps.push(TraceStep {
                            step: trace.steps.len(),
                            lhat,
                            refinement: r.to_string(),
                        });
                        next.push(BeamItem { eval: e, lhat, trace });
                    }
                    found += 1;
                    if found >= cfg.k_r {
                        break;
                    }
                }
            }
            if timed_out {
                break;
            }
        }
        if next.is_empty() {
            break 'search;
        }
        // stable: equal lengths keep proposal order
        next.sort_by(|a, b| a.lhat.total_cmp(&b.lhat));
        next.truncate(cfg.k_m);
        if next[0].lhat < best_idx_lhat {
            best_idx_lhat = next[0].lhat;
            best = (next[0].eval.clone(), next[0].trace.clone());
            log::info!("step {}: {:.3} {}", best.1.steps.len() - 1, best_idx_lhat, best.1.steps.last().unwrap().refinement);
        }
        beam = next;
        if timed_out {
            break;
        }
    }
    Ok(Learned {
        model: best.0.model.clone(),
        trace: best.1,
        dl: best.0.dl,
        normalizer: norm,
        timed_out,
    })
}

/// Up to `attempts` distinct output grids for an input grid.
pub fn predict(m: &TaskModel, input: &Grid, cfg: &SearchConfig, attempts: usize) -> Result<Vec<Grid>, LearnError> {
    let parse = cfg.parse.with_diffs(cfg.test_max_diffs);
    let analysis = GridAnalysis::new(input, parse.connectivity);
    let readings = read_analyzed(&m.input, None, &analysis, &parse, &cfg.dl)?;
    let mut out: Vec<Grid> = Vec::new();
    for ri in readings {
        if out.len() >= attempts {
            break;
        }
        if let Ok((_, g)) = write(&m.output, Some(&ri.tree)) {
            if !out.contains(&g) {
                out.push(g);
            }
        }
    }
    Ok(out)
}

/// Generates an input grid and the corresponding output grid.
pub fn create(m: &TaskModel) -> Result<(Grid, Grid), LearnError> {
    let (ti, gi) = write(&m.input, None)?;
    let (_, go) = write(&m.output, Some(&ti))?;
    Ok((gi, go))
}
