//! Grid-model terms: constructors, unknowns, expressions over paths, and the
//! operations on them (resolution, matching, substitution, application).
//!
//! A single [`Term`] type covers both templates (which may hold `?` and
//! expressions) and parse trees (ground terms). Every term slot carries a
//! [`Sort`], determined by its position, which the description-length code
//! relies on (rows vs. columns vs. sizes, background vs. shape colors).

use std::fmt;

use thiserror::Error;

use crate::grid::{Bitmap, Color, Mask};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid path {0}")]
    InvalidPath(String),
    #[error("sort mismatch at {path}: expected {expected:?}")]
    SortMismatch { path: String, expected: Sort },
    #[error("expression found in a pattern")]
    ExprInPattern,
    #[error("undefined variable {0}")]
    UndefinedVariable(String),
    #[error("negative result in expression {0}")]
    NegativeResult(String),
    #[error("input grid model contains an expression")]
    ExprInInputModel,
    #[error("ill-formed term: {0}")]
    IllFormed(String),
}

/// Field names of the constructors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    In,
    Out,
    Size,
    Color,
    Layers,
    Pos,
    Shape,
    I,
    J,
    Mask,
    Bitmap,
}

impl Field {
    pub fn name(self) -> &'static str {
        match self {
            Field::In => "in",
            Field::Out => "out",
            Field::Size => "size",
            Field::Color => "color",
            Field::Layers => "layers",
            Field::Pos => "pos",
            Field::Shape => "shape",
            Field::I => "i",
            Field::J => "j",
            Field::Mask => "mask",
            Field::Bitmap => "bitmap",
        }
    }

    pub fn from_name(s: &str) -> Option<Field> {
        Some(match s {
            "in" => Field::In,
            "out" => Field::Out,
            "size" => Field::Size,
            "color" => Field::Color,
            "layers" | "layer" => Field::Layers,
            "pos" => Field::Pos,
            "shape" => Field::Shape,
            "i" => Field::I,
            "j" => Field::J,
            "mask" => Field::Mask,
            "bitmap" => Field::Bitmap,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ctor {
    Grid,
    PosShape,
    Point,
    Rectangle,
    Vec,
    Bitmap,
    Full,
    Border,
    EvenCheckboard,
    OddCheckboard,
    PlusCross,
    TimesCross,
}

impl Ctor {
    pub const ALL: [Ctor; 12] = [
        Ctor::Grid,
        Ctor::PosShape,
        Ctor::Point,
        Ctor::Rectangle,
        Ctor::Vec,
        Ctor::Bitmap,
        Ctor::Full,
        Ctor::Border,
        Ctor::EvenCheckboard,
        Ctor::OddCheckboard,
        Ctor::PlusCross,
        Ctor::TimesCross,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ctor::Grid => "Grid",
            Ctor::PosShape => "PosShape",
            Ctor::Point => "Point",
            Ctor::Rectangle => "Rectangle",
            Ctor::Vec => "Vec",
            Ctor::Bitmap => "Bitmap",
            Ctor::Full => "Full",
            Ctor::Border => "Border",
            Ctor::EvenCheckboard => "EvenCheckboard",
            Ctor::OddCheckboard => "OddCheckboard",
            Ctor::PlusCross => "PlusCross",
            Ctor::TimesCross => "TimesCross",
        }
    }

    pub fn from_name(s: &str) -> Option<Ctor> {
        Ctor::ALL.iter().copied().find(|c| c.name() == s)
    }

    pub fn fields(self) -> &'static [Field] {
        match self {
            Ctor::Grid => &[Field::Size, Field::Color, Field::Layers],
            Ctor::PosShape => &[Field::Pos, Field::Shape],
            Ctor::Point => &[Field::Color],
            Ctor::Rectangle => &[Field::Size, Field::Color, Field::Mask],
            Ctor::Vec => &[Field::I, Field::J],
            Ctor::Bitmap => &[Field::Bitmap],
            _ => &[],
        }
    }

    /// The base type this constructor builds.
    pub fn base(self) -> Base {
        match self {
            Ctor::Grid => Base::Grid,
            Ctor::PosShape => Base::Object,
            Ctor::Point | Ctor::Rectangle => Base::Shape,
            Ctor::Vec => Base::Vector,
            _ => Base::Mask,
        }
    }

    pub fn mask_ctor(mask: &Mask) -> Ctor {
        match mask {
            Mask::Bitmap(_) => Ctor::Bitmap,
            Mask::Full => Ctor::Full,
            Mask::Border => Ctor::Border,
            Mask::EvenCheckboard => Ctor::EvenCheckboard,
            Mask::OddCheckboard => Ctor::OddCheckboard,
            Mask::PlusCross => Ctor::PlusCross,
            Mask::TimesCross => Ctor::TimesCross,
        }
    }
}

/// Base data types, the granularity at which variables are typed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Base {
    Grid,
    Layers,
    Object,
    Shape,
    Vector,
    Int,
    Color,
    Mask,
    Bits,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VecRole {
    Pos,
    Size,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IntRole {
    Row,
    Col,
    Size,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ColorRole {
    Background,
    Shape,
}

/// Slot sorts; roles refine the base type for coding purposes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Grid,
    Layers,
    Object,
    Shape,
    Vector(VecRole),
    Int(IntRole),
    Color(ColorRole),
    Mask,
    Bits,
}

impl Sort {
    pub fn base(self) -> Base {
        match self {
            Sort::Grid => Base::Grid,
            Sort::Layers => Base::Layers,
            Sort::Object => Base::Object,
            Sort::Shape => Base::Shape,
            Sort::Vector(_) => Base::Vector,
            Sort::Int(_) => Base::Int,
            Sort::Color(_) => Base::Color,
            Sort::Mask => Base::Mask,
            Sort::Bits => Base::Bits,
        }
    }

    /// Sort of field `field` of constructor `ctor` appearing in a slot of sort `self`.
    pub fn field_sort(self, ctor: Ctor, field: Field) -> Option<Sort> {
        Some(match (ctor, field) {
            (Ctor::Grid, Field::Size) => Sort::Vector(VecRole::Size),
            (Ctor::Grid, Field::Color) => Sort::Color(ColorRole::Background),
            (Ctor::Grid, Field::Layers) => Sort::Layers,
            (Ctor::PosShape, Field::Pos) => Sort::Vector(VecRole::Pos),
            (Ctor::PosShape, Field::Shape) => Sort::Shape,
            (Ctor::Point, Field::Color) | (Ctor::Rectangle, Field::Color) => {
                Sort::Color(ColorRole::Shape)
            }
            (Ctor::Rectangle, Field::Size) => Sort::Vector(VecRole::Size),
            (Ctor::Rectangle, Field::Mask) => Sort::Mask,
            (Ctor::Vec, Field::I) => match self {
                Sort::Vector(VecRole::Pos) => Sort::Int(IntRole::Row),
                _ => Sort::Int(IntRole::Size),
            },
            (Ctor::Vec, Field::J) => match self {
                Sort::Vector(VecRole::Pos) => Sort::Int(IntRole::Col),
                _ => Sort::Int(IntRole::Size),
            },
            (Ctor::Bitmap, Field::Bitmap) => Sort::Bits,
            _ => return None,
        })
    }

    /// Whether a constructor may appear in a slot of this sort.
    pub fn admits(self, ctor: Ctor) -> bool {
        match self {
            Sort::Layers => false,
            _ => ctor.base() == self.base(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Step {
    Field(Field),
    Index(usize),
}

/// A sequence of fields and layer indices from a root term.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(pub Vec<Step>);

impl Path {
    pub fn root() -> Path {
        Path(Vec::new())
    }

    pub fn steps(&self) -> &[Step] {
        &self.0
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn field(&self, f: Field) -> Path {
        let mut p = self.clone();
        p.0.push(Step::Field(f));
        p
    }

    pub fn index(&self, k: usize) -> Path {
        let mut p = self.clone();
        p.0.push(Step::Index(k));
        p
    }

    pub fn layer(k: usize) -> Path {
        Path(vec![Step::Field(Field::Layers), Step::Index(k)])
    }

    pub fn starts_with(&self, prefix: &Path) -> bool {
        self.0.starts_with(&prefix.0)
    }

    /// Field names only, layer indices dropped.
    pub fn field_names(&self) -> impl DoubleEndedIterator<Item = Field> + '_ {
        self.0.iter().filter_map(|s| match s {
            Step::Field(f) => Some(*f),
            Step::Index(_) => None,
        })
    }

    /// Parses the dotted form, e.g. `layers[1].shape.size`.
    pub fn parse(s: &str) -> Result<Path, ModelError> {
        crate::syntax::parse_path(s)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for step in &self.0 {
            match step {
                Step::Field(field) => {
                    if !first {
                        f.write_str(".")?;
                    }
                    f.write_str(field.name())?;
                }
                Step::Index(k) => write!(f, "[{k}]")?,
            }
            first = false;
        }
        Ok(())
    }
}

impl fmt::Debug for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Path({self})")
    }
}

/// Computations over the environment (the input parse tree).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Var(Path),
    Zero,
    Plus(Box<Term>, Box<Term>),
    Minus(Box<Term>, Box<Term>),
}

impl Expr {
    pub fn var(p: Path) -> Term {
        Term::Expr(Expr::Var(p))
    }

    pub fn plus(a: Term, b: Term) -> Term {
        Term::Expr(Expr::Plus(Box::new(a), Box::new(b)))
    }

    pub fn minus(a: Term, b: Term) -> Term {
        Term::Expr(Expr::Minus(Box::new(a), Box::new(b)))
    }

    pub fn vars(&self) -> Vec<&Path> {
        match self {
            Expr::Var(p) => vec![p],
            Expr::Zero => vec![],
            Expr::Plus(a, b) | Expr::Minus(a, b) => {
                let mut v = term_vars(a);
                v.extend(term_vars(b));
                v
            }
        }
    }
}

fn term_vars(t: &Term) -> Vec<&Path> {
    match t {
        Term::Expr(e) => e.vars(),
        _ => vec![],
    }
}

/// A grid-model term. Ground terms (no `Unknown`, no `Expr`) are parse trees.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Unknown,
    Expr(Expr),
    Int(i64),
    Color(Color),
    Bits(Bitmap),
    Node(Ctor, Vec<Term>),
    List(Vec<Term>),
}

/// Ground grid terms.
pub type ParseTree = Term;
/// Terms that may contain unknowns and expressions.
pub type Template = Term;

impl Term {
    pub fn int(n: i64) -> Term {
        Term::Int(n)
    }

    pub fn vec(i: Term, j: Term) -> Term {
        Term::Node(Ctor::Vec, vec![i, j])
    }

    pub fn vec_ints(i: i64, j: i64) -> Term {
        Term::vec(Term::Int(i), Term::Int(j))
    }

    pub fn grid(size: Term, color: Term, layers: Vec<Term>) -> Term {
        Term::Node(Ctor::Grid, vec![size, color, Term::List(layers)])
    }

    pub fn pos_shape(pos: Term, shape: Term) -> Term {
        Term::Node(Ctor::PosShape, vec![pos, shape])
    }

    pub fn point(color: Term) -> Term {
        Term::Node(Ctor::Point, vec![color])
    }

    pub fn rectangle(size: Term, color: Term, mask: Term) -> Term {
        Term::Node(Ctor::Rectangle, vec![size, color, mask])
    }

    pub fn nullary(ctor: Ctor) -> Term {
        Term::Node(ctor, vec![])
    }

    pub fn mask(mask: &Mask) -> Term {
        match mask {
            Mask::Bitmap(bm) => Term::Node(Ctor::Bitmap, vec![Term::Bits(bm.clone())]),
            m => Term::nullary(Ctor::mask_ctor(m)),
        }
    }

    /// `Ctor(?, ..., ?)`.
    pub fn ctor_pattern(ctor: Ctor) -> Term {
        Term::Node(ctor, vec![Term::Unknown; ctor.fields().len()])
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Term::Unknown)
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Unknown | Term::Expr(_) => false,
            Term::Node(_, args) | Term::List(args) => args.iter().all(Term::is_ground),
            _ => true,
        }
    }

    pub fn has_expr(&self) -> bool {
        match self {
            Term::Expr(_) => true,
            Term::Node(_, args) | Term::List(args) => args.iter().any(Term::has_expr),
            _ => false,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Term::Int(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_color(&self) -> Option<Color> {
        match self {
            Term::Color(c) => Some(*c),
            _ => None,
        }
    }

    pub fn ctor(&self) -> Option<Ctor> {
        match self {
            Term::Node(c, _) => Some(*c),
            _ => None,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Node(_, args) | Term::List(args) => args,
            _ => &[],
        }
    }

    /// `(i, j)` of a ground `Vec`.
    pub fn as_vec(&self) -> Option<(i64, i64)> {
        match self {
            Term::Node(Ctor::Vec, a) => Some((a[0].as_int()?, a[1].as_int()?)),
            _ => None,
        }
    }

    /// Semantics of a ground mask term.
    pub fn as_mask(&self) -> Option<Mask> {
        Some(match self {
            Term::Node(Ctor::Bitmap, a) => match &a[0] {
                Term::Bits(bm) => Mask::Bitmap(bm.clone()),
                _ => return None,
            },
            Term::Node(Ctor::Full, _) => Mask::Full,
            Term::Node(Ctor::Border, _) => Mask::Border,
            Term::Node(Ctor::EvenCheckboard, _) => Mask::EvenCheckboard,
            Term::Node(Ctor::OddCheckboard, _) => Mask::OddCheckboard,
            Term::Node(Ctor::PlusCross, _) => Mask::PlusCross,
            Term::Node(Ctor::TimesCross, _) => Mask::TimesCross,
            _ => return None,
        })
    }

    /// Layers of a `Grid` node.
    pub fn layers(&self) -> &[Term] {
        match self {
            Term::Node(Ctor::Grid, a) => a[2].args(),
            _ => &[],
        }
    }

    /// Number of nodes (lists excluded).
    pub fn node_count(&self) -> usize {
        match self {
            Term::Node(_, args) => 1 + args.iter().map(Term::node_count).sum::<usize>(),
            Term::List(args) => args.iter().map(Term::node_count).sum(),
            Term::Expr(Expr::Plus(a, b)) | Term::Expr(Expr::Minus(a, b)) => {
                1 + a.node_count() + b.node_count()
            }
            _ => 1,
        }
    }

    fn child_index(&self, step: Step) -> Option<usize> {
        match (self, step) {
            (Term::Node(ctor, _), Step::Field(f)) => ctor.fields().iter().position(|&x| x == f),
            (Term::List(items), Step::Index(k)) if k < items.len() => Some(k),
            _ => None,
        }
    }

    /// The subterm at `path`.
    pub fn resolve(&self, path: &Path) -> Result<&Term, ModelError> {
        let mut t = self;
        for &step in path.steps() {
            let k = t
                .child_index(step)
                .ok_or_else(|| ModelError::InvalidPath(path.to_string()))?;
            t = &t.args()[k];
        }
        Ok(t)
    }

    pub fn resolve_mut(&mut self, path: &Path) -> Result<&mut Term, ModelError> {
        let mut t = self;
        for &step in path.steps() {
            let k = t
                .child_index(step)
                .ok_or_else(|| ModelError::InvalidPath(path.to_string()))?;
            t = match t {
                Term::Node(_, args) | Term::List(args) => &mut args[k],
                _ => unreachable!(),
            };
        }
        Ok(t)
    }

    /// Sort of the slot at `path`, for a term rooted at a slot of sort `root`.
    pub fn sort_at(&self, root: Sort, path: &Path) -> Result<Sort, ModelError> {
        let mut t = self;
        let mut sort = root;
        for &step in path.steps() {
            let k = t
                .child_index(step)
                .ok_or_else(|| ModelError::InvalidPath(path.to_string()))?;
            sort = match (t, step) {
                (Term::Node(ctor, _), Step::Field(f)) => sort
                    .field_sort(*ctor, f)
                    .ok_or_else(|| ModelError::InvalidPath(path.to_string()))?,
                (Term::List(_), _) => Sort::Object,
                _ => unreachable!(),
            };
            t = &t.args()[k];
        }
        Ok(sort)
    }

    /// Visits every slot in depth-first, left-to-right order with its path and sort.
    pub fn walk<'a>(&'a self, sort: Sort, f: &mut impl FnMut(&Path, Sort, &'a Term)) {
        fn go<'a>(t: &'a Term, sort: Sort, path: &mut Path, f: &mut impl FnMut(&Path, Sort, &'a Term)) {
            f(path, sort, t);
            match t {
                Term::Node(ctor, args) => {
                    for (field, arg) in ctor.fields().iter().zip(args) {
                        if let Some(s) = sort.field_sort(*ctor, *field) {
                            path.0.push(Step::Field(*field));
                            go(arg, s, path, f);
                            path.0.pop();
                        }
                    }
                }
                Term::List(items) => {
                    for (k, item) in items.iter().enumerate() {
                        path.0.push(Step::Index(k));
                        go(item, Sort::Object, path, f);
                        path.0.pop();
                    }
                }
                _ => {}
            }
        }
        go(self, sort, &mut Path::root(), f)
    }

    /// Paths of all unknowns, depth-first left-to-right.
    pub fn unknown_paths(&self) -> Vec<Path> {
        let mut out = Vec::new();
        self.walk(Sort::Grid, &mut |p, _, t| {
            if t.is_unknown() {
                out.push(p.clone());
            }
        });
        out
    }

    /// Whether the ground term `data` is an instance of the pattern `self`.
    pub fn matches(&self, data: &Term) -> Result<bool, ModelError> {
        if self.has_expr() {
            return Err(ModelError::ExprInPattern);
        }
        Ok(self.matches_pattern(data))
    }

    /// [`Term::matches`] for a term already known to be expression-free.
    pub(crate) fn matches_pattern(&self, data: &Term) -> bool {
        match (self, data) {
            (Term::Unknown, _) => true,
            (Term::Node(c1, a1), Term::Node(c2, a2)) => {
                c1 == c2 && a1.len() == a2.len() && a1.iter().zip(a2).all(|(p, d)| p.matches_pattern(d))
            }
            (Term::List(a1), Term::List(a2)) => {
                a1.len() == a2.len() && a1.iter().zip(a2).all(|(p, d)| p.matches_pattern(d))
            }
            (p, d) => p == d,
        }
    }

    /// Replaces the subterm at `path` with `replacement`, checking sorts.
    pub fn subst(&self, path: &Path, replacement: Term) -> Result<Term, ModelError> {
        self.subst_sorted(Sort::Grid, path, replacement)
    }

    pub fn subst_sorted(&self, root: Sort, path: &Path, replacement: Term) -> Result<Term, ModelError> {
        let sort = self.sort_at(root, path)?;
        if !fits_sort(&replacement, sort) {
            return Err(ModelError::SortMismatch {
                path: path.to_string(),
                expected: sort,
            });
        }
        let mut out = self.clone();
        *out.resolve_mut(path)? = replacement;
        Ok(out)
    }

    /// Inserts an object into the layer list of a `Grid` term at position `at`.
    pub fn insert_layer(&self, at: usize, object: Term) -> Result<Term, ModelError> {
        if !fits_sort(&object, Sort::Object) {
            return Err(ModelError::SortMismatch {
                path: format!("layers[{at}]"),
                expected: Sort::Object,
            });
        }
        let mut out = self.clone();
        match &mut out {
            Term::Node(Ctor::Grid, args) => match &mut args[2] {
                Term::List(items) if at <= items.len() => {
                    items.insert(at, object);
                    Ok(out)
                }
                _ => Err(ModelError::InvalidPath(format!("layers[{at}]"))),
            },
            _ => Err(ModelError::InvalidPath(format!("layers[{at}]"))),
        }
    }
}

/// Shallow sort check of a replacement term (expression sorts are checked
/// against the environment separately).
pub fn fits_sort(t: &Term, sort: Sort) -> bool {
    match t {
        Term::Unknown | Term::Expr(_) => sort != Sort::Layers,
        Term::Int(n) => sort.base() == Base::Int && *n >= 0,
        Term::Color(_) => sort.base() == Base::Color,
        Term::Bits(_) => sort == Sort::Bits,
        Term::List(items) => sort == Sort::Layers && items.iter().all(|x| fits_sort(x, Sort::Object)),
        Term::Node(ctor, args) => {
            sort.admits(*ctor)
                && ctor.fields().len() == args.len()
                && ctor
                    .fields()
                    .iter()
                    .zip(args)
                    .all(|(f, a)| sort.field_sort(*ctor, *f).is_some_and(|s| fits_sort(a, s)))
        }
    }
}

/// Evaluates an integer expression against an environment parse tree.
pub fn eval_expr(e: &Expr, env: &Term) -> Result<i64, ModelError> {
    match e {
        Expr::Zero => Ok(0),
        Expr::Var(p) => match env.resolve(p) {
            Ok(Term::Int(n)) => Ok(*n),
            _ => Err(ModelError::UndefinedVariable(p.to_string())),
        },
        Expr::Plus(a, b) => Ok(eval_int(a, env)? + eval_int(b, env)?),
        Expr::Minus(a, b) => {
            let v = eval_int(a, env)? - eval_int(b, env)?;
            if v < 0 {
                Err(ModelError::NegativeResult(Term::Expr(e.clone()).to_string()))
            } else {
                Ok(v)
            }
        }
    }
}

fn eval_int(t: &Term, env: &Term) -> Result<i64, ModelError> {
    match t {
        Term::Int(n) => Ok(*n),
        Term::Expr(e) => eval_expr(e, env),
        _ => Err(ModelError::IllFormed(format!("non-integer operand {t}"))),
    }
}

/// Substitutes every expression of `m` by its value in `env`. Unknowns are kept.
pub fn apply_model(m: &Term, env: Option<&Term>) -> Result<Term, ModelError> {
    match m {
        Term::Expr(e) => {
            let env = env.ok_or_else(|| match e {
                Expr::Var(p) => ModelError::UndefinedVariable(p.to_string()),
                _ => ModelError::UndefinedVariable(m.to_string()),
            })?;
            match e {
                Expr::Var(p) => {
                    let v = env
                        .resolve(p)
                        .map_err(|_| ModelError::UndefinedVariable(p.to_string()))?;
                    if v.is_ground() {
                        Ok(v.clone())
                    } else {
                        Err(ModelError::UndefinedVariable(p.to_string()))
                    }
                }
                _ => Ok(Term::Int(eval_expr(e, env)?)),
            }
        }
        Term::Node(c, args) => Ok(Term::Node(
            *c,
            args.iter().map(|a| apply_model(a, env)).collect::<Result<_, _>>()?,
        )),
        Term::List(items) => Ok(Term::List(
            items.iter().map(|a| apply_model(a, env)).collect::<Result<_, _>>()?,
        )),
        t => Ok(t.clone()),
    }
}

/// Available environment variables: every slot path of the input model's
/// parse trees, with its sort. Computed statically from the input model.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    pub vars: Vec<(Path, Sort)>,
}

impl Signature {
    pub fn of_input_model(mi: &Term) -> Signature {
        let mut vars = Vec::new();
        collect_signature(mi, Sort::Grid, &mut Path::root(), &mut vars);
        Signature { vars }
    }

    pub fn sort_of(&self, p: &Path) -> Option<Sort> {
        self.vars.iter().find(|(q, _)| q == p).map(|(_, s)| *s)
    }

    pub fn of_base(&self, base: Base) -> impl Iterator<Item = &(Path, Sort)> {
        self.vars.iter().filter(move |(_, s)| s.base() == base)
    }
}

fn collect_signature(t: &Term, sort: Sort, path: &mut Path, out: &mut Vec<(Path, Sort)>) {
    if sort != Sort::Layers && sort != Sort::Grid && sort != Sort::Bits {
        out.push((path.clone(), sort));
    }
    match t {
        Term::Node(ctor, args) => {
            for (f, a) in ctor.fields().iter().zip(args) {
                if let Some(s) = sort.field_sort(*ctor, *f) {
                    path.0.push(Step::Field(*f));
                    collect_signature(a, s, path, out);
                    path.0.pop();
                }
            }
        }
        Term::List(items) => {
            for (k, item) in items.iter().enumerate() {
                path.0.push(Step::Index(k));
                collect_signature(item, Sort::Object, path, out);
                path.0.pop();
            }
        }
        // vectors always have components in parse trees
        Term::Unknown | Term::Expr(_) if matches!(sort, Sort::Vector(_)) => {
            for f in [Field::I, Field::J] {
                path.0.push(Step::Field(f));
                out.push((path.clone(), sort.field_sort(Ctor::Vec, f).unwrap()));
                path.0.pop();
            }
        }
        _ => {}
    }
}

/// Which of the two grid models of a task model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    In,
    Out,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::In => "in",
            Side::Out => "out",
        })
    }
}

/// `InOut(input model, output model)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TaskModel {
    pub input: Term,
    pub output: Term,
}

impl TaskModel {
    /// `InOut(Grid(?,?,[]), Grid(?,?,[]))`.
    pub fn initial() -> TaskModel {
        let blank = Term::grid(Term::Unknown, Term::Unknown, vec![]);
        TaskModel {
            input: blank.clone(),
            output: blank,
        }
    }

    pub fn side(&self, side: Side) -> &Term {
        match side {
            Side::In => &self.input,
            Side::Out => &self.output,
        }
    }

    pub fn side_mut(&mut self, side: Side) -> &mut Term {
        match side {
            Side::In => &mut self.input,
            Side::Out => &mut self.output,
        }
    }

    pub fn signature(&self) -> Signature {
        Signature::of_input_model(&self.input)
    }

    /// No unknown in the output model.
    pub fn is_definite(&self) -> bool {
        self.output.unknown_paths().is_empty()
    }

    /// Well-typed, no variable in the input model, and every output variable a
    /// valid path of the right type into the input model's parse trees.
    pub fn check(&self) -> Result<(), ModelError> {
        if self.input.has_expr() {
            return Err(ModelError::ExprInInputModel);
        }
        check_sorts(&self.input, Sort::Grid, &Path::root(), None)?;
        let sig = self.signature();
        check_sorts(&self.output, Sort::Grid, &Path::root(), Some(&sig))
    }

    pub fn parse(s: &str) -> Result<TaskModel, ModelError> {
        crate::syntax::parse_task_model(s)
    }
}

impl fmt::Display for TaskModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "InOut({}, {})", self.input, self.output)
    }
}

fn check_sorts(t: &Term, sort: Sort, path: &Path, sig: Option<&Signature>) -> Result<(), ModelError> {
    let bad = || ModelError::SortMismatch {
        path: path.to_string(),
        expected: sort,
    };
    match t {
        Term::Unknown => Ok(()),
        Term::Expr(e) => match sig {
            None => Err(ModelError::ExprInInputModel),
            Some(sig) => check_expr(e, sort, sig).map_err(|_| bad()),
        },
        Term::Node(ctor, args) => {
            if !sort.admits(*ctor) || ctor.fields().len() != args.len() {
                return Err(bad());
            }
            for (f, a) in ctor.fields().iter().zip(args) {
                let s = sort.field_sort(*ctor, *f).ok_or_else(bad)?;
                check_sorts(a, s, &path.field(*f), sig)?;
            }
            Ok(())
        }
        Term::List(items) => {
            if sort != Sort::Layers {
                return Err(bad());
            }
            for (k, item) in items.iter().enumerate() {
                check_sorts(item, Sort::Object, &path.index(k), sig)?;
            }
            Ok(())
        }
        leaf => {
            if fits_sort(leaf, sort) {
                Ok(())
            } else {
                Err(bad())
            }
        }
    }
}

fn check_expr(e: &Expr, sort: Sort, sig: &Signature) -> Result<(), ModelError> {
    match e {
        Expr::Var(p) => match sig.sort_of(p) {
            Some(s) if s.base() == sort.base() => Ok(()),
            _ => Err(ModelError::UndefinedVariable(p.to_string())),
        },
        Expr::Zero | Expr::Plus(..) | Expr::Minus(..) if sort.base() != Base::Int => {
            Err(ModelError::IllFormed("arithmetic on a non-integer slot".into()))
        }
        Expr::Zero => Ok(()),
        Expr::Plus(a, b) | Expr::Minus(a, b) => {
            for arg in [a, b] {
                match &**arg {
                    Term::Int(n) if *n >= 0 => {}
                    Term::Expr(e) => check_expr(e, sort, sig)?,
                    _ => return Err(ModelError::IllFormed("bad operand".into())),
                }
            }
            Ok(())
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Unknown => f.write_str("?"),
            Term::Int(n) => write!(f, "{n}"),
            Term::Color(c) => write!(f, "{c}"),
            Term::Bits(bm) => write!(f, "{bm}"),
            Term::Expr(e) => write!(f, "{e}"),
            Term::Node(ctor, args) => {
                f.write_str(ctor.name())?;
                if !args.is_empty() {
                    f.write_str("(")?;
                    for (k, a) in args.iter().enumerate() {
                        if k > 0 {
                            f.write_str(", ")?;
                        }
                        write!(f, "{a}")?;
                    }
                    f.write_str(")")?;
                }
                Ok(())
            }
            Term::List(items) => {
                f.write_str("[")?;
                for (k, a) in items.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str("]")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn operand(f: &mut fmt::Formatter<'_>, t: &Term) -> fmt::Result {
            match t {
                Term::Expr(Expr::Plus(..)) | Term::Expr(Expr::Minus(..)) => write!(f, "({t})"),
                _ => write!(f, "{t}"),
            }
        }
        match self {
            Expr::Var(p) => write!(f, "{p}"),
            Expr::Zero => f.write_str("zero"),
            Expr::Plus(a, b) => {
                operand(f, a)?;
                f.write_str(" + ")?;
                operand(f, b)
            }
            Expr::Minus(a, b) => {
                operand(f, a)?;
                f.write_str(" - ")?;
                operand(f, b)
            }
        }
    }
}
