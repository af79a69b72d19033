//! Description lengths, in bits.
//!
//! Every slot of a model is coded by its template kind (value/constructor,
//! expression, unknown) followed by its content. Ground data written to the
//! stream (unknown fillings, approximate-parsing differences, delta points) is
//! coded the same way as a ground template, so model and data bits are
//! directly comparable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Color, Delta, Grid, MAX_SIZE};
use crate::model::{Base, ColorRole, Ctor, Expr, IntRole, Path, Signature, Sort, Term};

#[derive(Debug, Error, PartialEq)]
pub enum DlError {
    #[error("probability {0} outside (0, 1]")]
    BadProbability(f64),
    #[error("position {0} outside extent {1}")]
    PositionOutOfRange(usize, usize),
    #[error("term {0} does not fit slot sort {1:?}")]
    IllFormed(String, Sort),
}

/// Probabilities behind the codes, plus the data weight `alpha`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DlConfig {
    pub alpha: f64,
    /// Background color distribution: black, then each other color.
    pub p_background_black: f64,
    pub p_background_other: f64,
    /// Mask constructors: Bitmap, Full, Border, EvenCheckboard, OddCheckboard, PlusCross, TimesCross.
    pub p_mask: [f64; 7],
    /// Shape constructors: Point, Rectangle.
    pub p_shape: [f64; 2],
    /// Expression kinds: application, variable.
    pub p_expr: [f64; 2],
    /// Template kinds: value/constructor, expression, unknown.
    pub p_template: [f64; 3],
    pub max_grid_size: usize,
}

impl Default for DlConfig {
    fn default() -> Self {
        DlConfig {
            alpha: 10.0,
            p_background_black: 0.91,
            p_background_other: 0.01,
            p_mask: [0.3, 0.5, 0.1, 0.025, 0.025, 0.025, 0.025],
            p_shape: [0.5, 0.5],
            p_expr: [0.5, 0.5],
            p_template: [0.4, 0.5, 0.1],
            max_grid_size: MAX_SIZE,
        }
    }
}

impl DlConfig {
    /// All finite distributions, for Kraft checks.
    pub fn distributions(&self) -> Vec<(&'static str, Vec<f64>)> {
        let mut bg = vec![self.p_background_black];
        bg.extend(std::iter::repeat(self.p_background_other).take(Color::COUNT - 1));
        vec![
            ("background color", bg),
            ("mask", self.p_mask.to_vec()),
            ("shape", self.p_shape.to_vec()),
            ("expression kind", self.p_expr.to_vec()),
            ("template kind", self.p_template.to_vec()),
        ]
    }

    fn background(&self, c: Color) -> f64 {
        -(if c == Color::BLACK {
            self.p_background_black
        } else {
            self.p_background_other
        })
        .log2()
    }

    fn mask_ctor(&self, ctor: Ctor) -> f64 {
        let k = match ctor {
            Ctor::Bitmap => 0,
            Ctor::Full => 1,
            Ctor::Border => 2,
            Ctor::EvenCheckboard => 3,
            Ctor::OddCheckboard => 4,
            Ctor::PlusCross => 5,
            _ => 6,
        };
        -self.p_mask[k].log2()
    }

    fn kind_value(&self) -> f64 {
        -self.p_template[0].log2()
    }

    fn kind_expr(&self) -> f64 {
        -self.p_template[1].log2()
    }

    fn kind_unknown(&self) -> f64 {
        -self.p_template[2].log2()
    }
}

/// Universal code for naturals: Elias gamma shifted to include zero.
pub fn l_nat(n: u64) -> f64 {
    2.0 * ((n + 1) as f64).log2() + 1.0
}

pub fn l_uniform(cardinality: usize) -> f64 {
    (cardinality.max(1) as f64).log2()
}

pub fn l_dist(p: f64) -> Result<f64, DlError> {
    if p > 0.0 && p <= 1.0 {
        Ok(-p.log2())
    } else {
        Err(DlError::BadProbability(p))
    }
}

/// Row or column position, uniform over the grid extent (30 when unknown).
pub fn l_position(i: usize, extent: Option<usize>) -> Result<f64, DlError> {
    match extent {
        Some(n) if i >= n => Err(DlError::PositionOutOfRange(i, n)),
        Some(n) => Ok(l_uniform(n)),
        None => Ok(l_uniform(MAX_SIZE)),
    }
}

pub fn l_bitmap(h: usize, w: usize) -> f64 {
    (h * w) as f64
}

/// Length of the longest common suffix of field names, layer indices ignored.
pub fn path_similarity(a: &Path, b: &Path) -> f64 {
    a.field_names()
        .rev()
        .zip(b.field_names().rev())
        .take_while(|(x, y)| x == y)
        .count() as f64
}

/// Grid extent known while coding positions.
#[derive(Clone, Copy, Debug, Default)]
pub struct Extent {
    pub rows: Option<usize>,
    pub cols: Option<usize>,
}

impl Extent {
    pub fn of_size(size: &Term) -> Extent {
        match size.as_vec() {
            Some((h, w)) => Extent {
                rows: Some(h.max(0) as usize),
                cols: Some(w.max(0) as usize),
            },
            None => Extent::default(),
        }
    }

    pub fn of_grid(g: &Grid) -> Extent {
        Extent {
            rows: Some(g.height()),
            cols: Some(g.width()),
        }
    }
}

fn position_code(v: i64, extent: Option<usize>, max: usize) -> f64 {
    let n = extent.unwrap_or(max);
    l_uniform(n.max(v.max(0) as usize + 1))
}

/// Codes terms against a configuration and, for output models, the
/// environment signature.
pub struct Coder<'a> {
    pub cfg: &'a DlConfig,
    pub env: Option<&'a Signature>,
}

impl<'a> Coder<'a> {
    pub fn new(cfg: &'a DlConfig) -> Self {
        Coder { cfg, env: None }
    }

    pub fn with_env(cfg: &'a DlConfig, env: &'a Signature) -> Self {
        Coder { cfg, env: Some(env) }
    }

    /// Code of a primitive value in a slot of the given sort (kind excluded).
    fn primitive(&self, t: &Term, sort: Sort, ext: Extent) -> f64 {
        match (t, sort) {
            (Term::Int(n), Sort::Int(IntRole::Row)) => position_code(*n, ext.rows, self.cfg.max_grid_size),
            (Term::Int(n), Sort::Int(IntRole::Col)) => position_code(*n, ext.cols, self.cfg.max_grid_size),
            (Term::Int(n), _) => l_nat(n.max(&0).unsigned_abs()),
            (Term::Color(c), Sort::Color(ColorRole::Background)) => self.cfg.background(*c),
            (Term::Color(_), _) => l_uniform(Color::COUNT),
            (Term::Bits(bm), _) => l_bitmap(bm.height(), bm.width()),
            _ => 0.0,
        }
    }

    fn ctor_choice(&self, ctor: Ctor) -> f64 {
        match ctor.base() {
            Base::Shape => {
                let k = if ctor == Ctor::Point { 0 } else { 1 };
                -self.cfg.p_shape[k].log2()
            }
            Base::Mask => self.cfg.mask_ctor(ctor),
            _ => 0.0,
        }
    }

    /// Code of a ground term written as data in a slot of the given sort.
    pub fn ground(&self, t: &Term, sort: Sort, ext: Extent) -> f64 {
        match t {
            Term::List(items) => {
                l_nat(items.len() as u64) + items.iter().map(|x| self.ground(x, Sort::Object, ext)).sum::<f64>()
            }
            Term::Node(ctor, args) => {
                let ext = if *ctor == Ctor::Grid { Extent::of_size(&args[0]) } else { ext };
                self.cfg.kind_value()
                    + self.ctor_choice(*ctor)
                    + ctor
                        .fields()
                        .iter()
                        .zip(args)
                        .map(|(f, a)| match sort.field_sort(*ctor, *f) {
                            Some(s) => self.ground(a, s, ext),
                            None => 0.0,
                        })
                        .sum::<f64>()
            }
            Term::Unknown | Term::Expr(_) => 0.0,
            prim => self.cfg.kind_value() + self.primitive(prim, sort, ext),
        }
    }

    /// Code of a template in a slot of sort `sort` at `path` (used to rank variables).
    pub fn template(&self, t: &Term, sort: Sort, path: &mut Path, ext: Extent) -> f64 {
        match t {
            Term::Unknown => self.cfg.kind_unknown(),
            Term::Expr(e) => self.cfg.kind_expr() + self.expr(e, sort, path),
            Term::List(items) => {
                let mut bits = l_nat(items.len() as u64);
                for (k, item) in items.iter().enumerate() {
                    path.0.push(crate::model::Step::Index(k));
                    bits += self.template(item, Sort::Object, path, ext);
                    path.0.pop();
                }
                bits
            }
            Term::Node(ctor, args) => {
                let ext = if *ctor == Ctor::Grid { Extent::of_size(&args[0]) } else { ext };
                let mut bits = self.cfg.kind_value() + self.ctor_choice(*ctor);
                for (f, a) in ctor.fields().iter().zip(args) {
                    if let Some(s) = sort.field_sort(*ctor, *f) {
                        path.0.push(crate::model::Step::Field(*f));
                        bits += self.template(a, s, path, ext);
                        path.0.pop();
                    }
                }
                bits
            }
            prim => self.cfg.kind_value() + self.primitive(prim, sort, ext),
        }
    }

    fn expr(&self, e: &Expr, sort: Sort, path: &Path) -> f64 {
        let [p_app, p_var] = self.cfg.p_expr;
        match e {
            Expr::Var(v) => -p_var.log2() + self.var(v, sort, path),
            Expr::Zero => -p_app.log2() + l_uniform(FUNCTIONS),
            Expr::Plus(a, b) | Expr::Minus(a, b) => {
                -p_app.log2() + l_uniform(FUNCTIONS) + self.operand(a, sort, path) + self.operand(b, sort, path)
            }
        }
    }

    fn operand(&self, t: &Term, sort: Sort, path: &Path) -> f64 {
        match t {
            Term::Expr(e) => self.cfg.kind_expr() + self.expr(e, sort, path),
            Term::Int(n) => self.cfg.kind_value() + l_nat(n.max(&0).unsigned_abs()),
            _ => self.cfg.kind_unknown(),
        }
    }

    /// Softmax over same-type environment variables of their similarity with
    /// the slot path.
    pub fn var(&self, v: &Path, sort: Sort, path: &Path) -> f64 {
        let Some(env) = self.env else {
            return f64::INFINITY;
        };
        let mut z = 0.0;
        let mut own = None;
        for (p, _) in env.of_base(sort.base()) {
            let w = path_similarity(p, path).exp();
            z += w;
            if p == v {
                own = Some(w);
            }
        }
        match own {
            Some(w) => -(w / z).log2(),
            None => f64::INFINITY,
        }
    }

    /// `L(m)` of a grid model.
    pub fn model(&self, m: &Term) -> f64 {
        self.template(m, Sort::Grid, &mut Path::root(), Extent::default())
    }
}

/// Functions available for integer-valued expressions: zero, plus, minus.
const FUNCTIONS: usize = 3;

/// A model divergence recorded by approximate parsing.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Diff {
    pub path: Path,
    pub value: Term,
}

/// `L(π | m)`: fillings of the model's unknowns, then the differences.
/// The number of differences is only coded when the reader allows any.
pub fn l_parse_tree(cfg: &DlConfig, tree: &Term, applied: &Term, diffs: &[Diff], max_diffs: usize) -> f64 {
    let coder = Coder::new(cfg);
    let ext = match tree {
        Term::Node(Ctor::Grid, a) => Extent::of_size(&a[0]),
        _ => Extent::default(),
    };
    let mut bits = 0.0;
    applied.walk(Sort::Grid, &mut |p, sort, t| {
        if t.is_unknown() && !diffs.iter().any(|d| p.starts_with(&d.path)) {
            if let Ok(v) = tree.resolve(p) {
                bits += coder.ground(v, sort, ext);
            }
        }
    });
    if max_diffs > 0 {
        bits += l_nat(diffs.len() as u64);
    }
    let location = l_uniform(applied.node_count());
    for d in diffs {
        let sort = applied.sort_at(Sort::Grid, &d.path).unwrap_or(Sort::Object);
        bits += location + coder.ground(&d.value, sort, ext);
    }
    bits
}

/// `L(δ | π)`: the delta as a list of points relative to the drawn grid.
pub fn l_delta(cfg: &DlConfig, delta: &Delta, drawn: &Grid) -> f64 {
    l_nat(delta.len() as u64) + delta.len() as f64 * l_point(cfg, drawn.height(), drawn.width())
}

/// Code of `PosShape(Vec(i,j), Point(c))` in an `h`x`w` grid.
pub fn l_point(cfg: &DlConfig, h: usize, w: usize) -> f64 {
    let coder = Coder::new(cfg);
    let ext = Extent {
        rows: Some(h),
        cols: Some(w),
    };
    let pt = Term::pos_shape(Term::vec_ints(0, 0), Term::point(Term::Color(Color::BLACK)));
    coder.ground(&pt, Sort::Object, ext)
}

/// `L(m)` of a grid model; output models take the input model signature.
pub fn l_model(cfg: &DlConfig, m: &Term, env: Option<&Signature>) -> f64 {
    match env {
        Some(sig) => Coder::with_env(cfg, sig).model(m),
        None => Coder::new(cfg).model(m),
    }
}

/// Reference contributions of the initial model, input and output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub lambda_in: f64,
    pub lambda_out: f64,
}

/// Description lengths of a task model on the train examples, split by side.
/// Data lengths are already weighted by `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskDl {
    pub model_in: f64,
    pub model_out: f64,
    pub data_in: f64,
    pub data_out: f64,
}

impl TaskDl {
    pub fn model(&self) -> f64 {
        self.model_in + self.model_out
    }

    pub fn data(&self) -> f64 {
        self.data_in + self.data_out
    }

    pub fn total(&self) -> f64 {
        self.model() + self.data()
    }

    pub fn total_in(&self) -> f64 {
        self.model_in + self.data_in
    }

    pub fn total_out(&self) -> f64 {
        self.model_out + self.data_out
    }

    /// The normalizer taking this as the initial-model reference.
    pub fn as_normalizer(&self) -> Normalizer {
        Normalizer {
            lambda_in: self.total_in(),
            lambda_out: self.total_out(),
        }
    }

    pub fn normalized(&self, n: &Normalizer) -> f64 {
        self.normalized_in(n) + self.normalized_out(n)
    }

    pub fn normalized_in(&self, n: &Normalizer) -> f64 {
        self.total_in() / n.lambda_in
    }

    pub fn normalized_out(&self, n: &Normalizer) -> f64 {
        self.total_out() / n.lambda_out
    }

    /// Plain-text table: rows input / output / chained, columns
    /// L(M), L(D|M), L(M,D), normalized.
    pub fn table(&self, n: &Normalizer) -> String {
        let mut s = String::new();
        s.push_str("         |    L(M) |    L(D|M) |    L(M,D) |  L^(M,D)\n");
        s.push_str("---------+---------+-----------+-----------+---------\n");
        let row = |name: &str, m: f64, d: f64, norm: f64| {
            format!("{name:<8} | {m:>7.1} | {d:>9.1} | {:>9.1} | {norm:>8.3}\n", m + d)
        };
        s.push_str(&row("input", self.model_in, self.data_in, self.normalized_in(n)));
        s.push_str(&row("output", self.model_out, self.data_out, self.normalized_out(n)));
        s.push_str(&row("chained", self.model(), self.data(), self.normalized(n)));
        s
    }

    /// Machine-readable rows of [`TaskDl::table`].
    pub fn records(&self, n: &Normalizer) -> Vec<DlRecord> {
        vec![
            DlRecord::new("input", self.model_in, self.data_in, self.normalized_in(n)),
            DlRecord::new("output", self.model_out, self.data_out, self.normalized_out(n)),
            DlRecord::new("chained", self.model(), self.data(), self.normalized(n)),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DlRecord {
    pub part: String,
    pub model: f64,
    pub data: f64,
    pub total: f64,
    pub normalized: f64,
}

impl DlRecord {
    fn new(part: &str, model: f64, data: f64, normalized: f64) -> Self {
        DlRecord {
            part: part.to_string(),
            model,
            data,
            total: model + data,
            normalized,
        }
    }
}
