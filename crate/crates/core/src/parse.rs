//! Drawing, generation and (approximate, non-deterministic) parsing of grids.
//!
//! Parsing works in three stages: the grid is segmented into monocolor parts;
//! parts (and same-color pairs of parts) become candidate objects; layers of
//! the model are then assigned candidates top-down, exploring combinations
//! by increasing sum of candidate ranks.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dl::{l_delta, l_parse_tree, Diff, DlConfig};
use crate::grid::{
    delta_between, mask_member, segment, Bitmap, CellSet, Color, Connectivity, Delta, Grid, GridError, Mask, Part,
    MAX_SIZE,
};
use crate::model::{apply_model, Ctor, IntRole, ModelError, Path, Sort, Step, Term};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("cannot draw: {0}")]
    Draw(String),
    #[error("expressions must be applied before parsing")]
    Unapplied,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseConfig {
    pub max_candidates_per_layer: usize,
    pub max_trees_before_sort: usize,
    pub max_trees_kept: usize,
    pub max_diffs: usize,
    pub connectivity: Connectivity,
}

impl Default for ParseConfig {
    fn default() -> Self {
        ParseConfig {
            max_candidates_per_layer: 64,
            max_trees_before_sort: 64,
            max_trees_kept: 3,
            max_diffs: 0,
            connectivity: Connectivity::Four,
        }
    }
}

impl ParseConfig {
    /// The same bounds with `max_diffs` set, as used on test inputs.
    pub fn with_diffs(&self, max_diffs: usize) -> ParseConfig {
        ParseConfig {
            max_diffs,
            ..self.clone()
        }
    }
}

/// One way of seeing a grid through a model.
#[derive(Clone, Debug, PartialEq)]
pub struct Reading {
    pub tree: Term,
    pub delta: Delta,
    pub diffs: Vec<Diff>,
    /// `L(π | m)` in bits.
    pub dl_tree: f64,
    /// `L(δ | π)` in bits.
    pub dl_delta: f64,
    /// Sum of the two.
    pub dl: f64,
    /// Sum of the ranks of the chosen candidates.
    pub rank: usize,
}

// ---------------------------------------------------------------- drawing

fn size_of(t: &Term, what: &str) -> Result<(usize, usize), ParseError> {
    match t.as_vec() {
        Some((h, w)) if (1..=MAX_SIZE as i64).contains(&h) && (1..=MAX_SIZE as i64).contains(&w) => {
            Ok((h as usize, w as usize))
        }
        _ => Err(ParseError::Draw(format!("invalid {what} size {t}"))),
    }
}

fn color_of(t: &Term) -> Result<Color, ParseError> {
    t.as_color().ok_or_else(|| ParseError::Draw(format!("not a color: {t}")))
}

/// Calls `f` on every in-bounds cell painted by a ground object.
fn paint_object(obj: &Term, h: usize, w: usize, f: &mut impl FnMut(usize, usize, Color)) -> Result<(), ParseError> {
    let (pos, shape) = match obj {
        Term::Node(Ctor::PosShape, a) => (&a[0], &a[1]),
        _ => return Err(ParseError::Draw(format!("not an object: {obj}"))),
    };
    let (i, j) = pos
        .as_vec()
        .ok_or_else(|| ParseError::Draw(format!("invalid position {pos}")))?;
    let mut put = |x: i64, y: i64, c: Color| {
        if x >= 0 && y >= 0 && (x as usize) < h && (y as usize) < w {
            f(x as usize, y as usize, c)
        }
    };
    match shape {
        Term::Node(Ctor::Point, a) => put(i, j, color_of(&a[0])?),
        Term::Node(Ctor::Rectangle, a) => {
            let (sh, sw) = size_of(&a[0], "rectangle")?;
            let c = color_of(&a[1])?;
            let mask = a[2]
                .as_mask()
                .ok_or_else(|| ParseError::Draw(format!("invalid mask {}", a[2])))?;
            if let Mask::Bitmap(bm) = &mask {
                if bm.height() != sh || bm.width() != sw {
                    return Err(ParseError::Draw(format!("bitmap {bm} does not fit size {sh}x{sw}")));
                }
            }
            for x in 0..sh {
                for y in 0..sw {
                    if mask_member(&mask, sh, sw, x, y) {
                        put(i + x as i64, j + y as i64, c);
                    }
                }
            }
        }
        _ => return Err(ParseError::Draw(format!("not a shape: {shape}"))),
    }
    Ok(())
}

/// Draws a ground grid term. Layers are painted from the last to the first,
/// so `layers[0]` is on top; cells falling outside the grid are dropped.
pub fn draw(tree: &Term) -> Result<Grid, ParseError> {
    let args = match tree {
        Term::Node(Ctor::Grid, a) => a,
        _ => return Err(ParseError::Draw(format!("not a grid: {tree}"))),
    };
    let (h, w) = size_of(&args[0], "grid")?;
    let mut g = Grid::new(h, w, color_of(&args[1])?)?;
    for obj in tree.layers().iter().rev() {
        paint_object(obj, h, w, &mut |x, y, c| g.set(x, y, c))?;
    }
    Ok(g)
}

fn object_cells(obj: &Term, h: usize, w: usize) -> Result<CellSet, ParseError> {
    let mut s = CellSet::default();
    paint_object(obj, h, w, &mut |x, y, _| s.insert(x, y))?;
    Ok(s)
}

// ------------------------------------------------------------- generation

/// Replaces unknowns by default values: position (0,0), grid size 10x10,
/// rectangle size 2x2, black grids, grey shapes, full masks.
pub fn generate(m: &Term) -> Result<Term, ParseError> {
    if m.has_expr() {
        return Err(ParseError::Unapplied);
    }
    Ok(fill_defaults(m, Sort::Grid, false))
}

fn default_value(sort: Sort, grid_level: bool) -> Term {
    match sort {
        Sort::Grid => Term::grid(Term::vec_ints(10, 10), Term::Color(Color::BLACK), vec![]),
        Sort::Layers => Term::List(vec![]),
        Sort::Object => Term::pos_shape(Term::vec_ints(0, 0), default_value(Sort::Shape, false)),
        Sort::Shape => Term::rectangle(Term::vec_ints(2, 2), Term::Color(Color::GREY), Term::nullary(Ctor::Full)),
        Sort::Vector(crate::model::VecRole::Pos) => Term::vec_ints(0, 0),
        Sort::Vector(crate::model::VecRole::Size) if grid_level => Term::vec_ints(10, 10),
        Sort::Vector(_) => Term::vec_ints(2, 2),
        Sort::Int(IntRole::Size) if grid_level => Term::Int(10),
        Sort::Int(IntRole::Size) => Term::Int(2),
        Sort::Int(_) => Term::Int(0),
        Sort::Color(crate::model::ColorRole::Background) => Term::Color(Color::BLACK),
        Sort::Color(_) => Term::Color(Color::GREY),
        Sort::Mask => Term::nullary(Ctor::Full),
        Sort::Bits => Term::Bits(Bitmap::from_fn(2, 2, |_, _| true)),
    }
}

fn fill_defaults(t: &Term, sort: Sort, grid_level: bool) -> Term {
    match t {
        Term::Unknown => default_value(sort, grid_level),
        Term::List(items) => Term::List(items.iter().map(|x| fill_defaults(x, Sort::Object, false)).collect()),
        Term::Node(ctor, args) => {
            let mut out: Vec<Term> = ctor
                .fields()
                .iter()
                .zip(args)
                .enumerate()
                .map(|(k, (f, a))| {
                    let s = sort.field_sort(*ctor, *f).unwrap_or(sort);
                    let gl = match ctor {
                        Ctor::Grid => k == 0,
                        Ctor::Vec => grid_level,
                        _ => false,
                    };
                    fill_defaults(a, s, gl)
                })
                .collect();
            // an unknown bitmap takes the shape of its rectangle, fully on
            if *ctor == Ctor::Rectangle {
                if let (Some((h, w)), Term::Node(Ctor::Bitmap, b)) = (out[0].as_vec(), &args[2]) {
                    if b[0].is_unknown() && h > 0 && w > 0 {
                        out[2] = Term::Node(Ctor::Bitmap, vec![Term::Bits(Bitmap::from_fn(h as usize, w as usize, |_, _| true))]);
                    }
                }
            }
            Term::Node(*ctor, out)
        }
        other => other.clone(),
    }
}

/// Applies `m` in `env`, fills defaults and draws.
pub fn write(m: &Term, env: Option<&Term>) -> Result<(Term, Grid), ParseError> {
    let tree = generate(&apply_model(m, env)?)?;
    let g = draw(&tree)?;
    Ok((tree, g))
}

// --------------------------------------------------------------- analysis

#[derive(Clone, Debug)]
struct Candidate {
    obj: Term,
    drawn: CellSet,
    own: CellSet,
}

/// Segmentation and candidate objects of one grid, reusable across parses.
#[derive(Clone, Debug)]
pub struct GridAnalysis {
    grid: Grid,
    candidates: Vec<Candidate>,
    color_cells: [CellSet; Color::COUNT],
    all_cells: CellSet,
}

/// Unions are only tried among colors with at most this many parts.
const MAX_PARTS_FOR_UNIONS: usize = 30;

fn recognize_mask(p: &Part) -> Mask {
    if p.len() == p.area() {
        return Mask::Full;
    }
    let member = |x: usize, y: usize| p.set.contains(p.top + x, p.left + y);
    for m in Mask::REGULAR.iter().skip(1) {
        if !m.fits(p.height, p.width) {
            continue;
        }
        let ok = (0..p.height).all(|x| (0..p.width).all(|y| mask_member(m, p.height, p.width, x, y) == member(x, y)));
        if ok {
            return m.clone();
        }
    }
    Mask::Bitmap(Bitmap::from_fn(p.height, p.width, member))
}

fn rect_object(p: &Part, mask: &Mask) -> Term {
    Term::pos_shape(
        Term::vec_ints(p.top as i64, p.left as i64),
        Term::rectangle(
            Term::vec_ints(p.height as i64, p.width as i64),
            Term::Color(p.color),
            Term::mask(mask),
        ),
    )
}

fn point_object(i: usize, j: usize, c: Color) -> Term {
    Term::pos_shape(Term::vec_ints(i as i64, j as i64), Term::point(Term::Color(c)))
}

impl GridAnalysis {
    pub fn new(grid: &Grid, connectivity: Connectivity) -> GridAnalysis {
        let mut color_cells = [CellSet::default(); Color::COUNT];
        let mut all_cells = CellSet::default();
        for (i, j, c) in grid.cells() {
            color_cells[c.code() as usize].insert(i, j);
            all_cells.insert(i, j);
        }
        let parts = segment(grid, connectivity);

        // (black last, covered cells descending, top, left, variant), object
        let mut keyed: Vec<((bool, std::cmp::Reverse<usize>, usize, usize, u8), Term, CellSet)> = Vec::new();
        let push_part = |p: &Part, keyed: &mut Vec<_>| {
            let black = p.color == Color::BLACK;
            if p.len() == 1 {
                keyed.push(((black, std::cmp::Reverse(1), p.top, p.left, 0), point_object(p.top, p.left, p.color), p.set));
            }
            let mut full = CellSet::default();
            for x in 0..p.height {
                for y in 0..p.width {
                    full.insert(p.top + x, p.left + y);
                }
            }
            keyed.push((
                (black, std::cmp::Reverse(p.area()), p.top, p.left, 1),
                rect_object(p, &Mask::Full),
                full,
            ));
            if p.len() < p.area() {
                let mask = recognize_mask(p);
                keyed.push(((black, std::cmp::Reverse(p.len()), p.top, p.left, 2), rect_object(p, &mask), p.set));
            }
            if p.len() > 1 && p.len() < 5 {
                for &(i, j) in &p.cells {
                    let mut s = CellSet::default();
                    s.insert(i, j);
                    keyed.push(((black, std::cmp::Reverse(1), i, j, 0), point_object(i, j, p.color), s));
                }
            }
        };
        for p in &parts {
            push_part(p, &mut keyed);
        }

        // unions of two same-color parts that look like one occluded object
        for c in Color::all() {
            let of_color: Vec<&Part> = parts.iter().filter(|p| p.color == c).collect();
            if of_color.len() < 2 || of_color.len() > MAX_PARTS_FOR_UNIONS {
                continue;
            }
            for (a, pa) in of_color.iter().enumerate() {
                for pb in &of_color[a + 1..] {
                    let u = pa.merge(pb);
                    if 2 * u.len() <= u.area() {
                        continue;
                    }
                    let mut bbox = CellSet::default();
                    for x in 0..u.height {
                        for y in 0..u.width {
                            bbox.insert(u.top + x, u.left + y);
                        }
                    }
                    if !color_cells[c.code() as usize].intersection(&bbox).is_subset(&u.set) {
                        continue;
                    }
                    push_part(&u, &mut keyed);
                }
            }
        }

        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        let mut seen = HashSet::new();
        let mut candidates = Vec::with_capacity(keyed.len());
        for (_, obj, drawn) in keyed {
            if !seen.insert(obj.clone()) {
                continue;
            }
            let color = match obj.resolve(&Path::parse("shape.color").unwrap()) {
                Ok(Term::Color(c)) => *c,
                _ => Color::BLACK,
            };
            let own = drawn.intersection(&color_cells[color.code() as usize]);
            candidates.push(Candidate { obj, drawn, own });
        }
        if log::log_enabled!(log::Level::Trace) {
            for (k, c) in candidates.iter().enumerate() {
                log::trace!("candidate {k}: {}", c.obj);
            }
        }
        GridAnalysis {
            grid: grid.clone(),
            candidates,
            color_cells,
            all_cells,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn candidate_count(&self) -> usize {
        self.candidates.len()
    }

    /// Candidate objects in rank order.
    pub fn candidates(&self) -> impl Iterator<Item = &Term> {
        self.candidates.iter().map(|c| &c.obj)
    }
}

// ---------------------------------------------------------------- parsing

/// Differences needed for `value` to be read where the pattern expects `t`.
fn diff_paths(t: &Term, value: &Term, path: &mut Path, out: &mut Vec<Diff>) {
    match (t, value) {
        (Term::Unknown, _) => {}
        (Term::Node(c1, a1), Term::Node(c2, a2)) if c1 == c2 => {
            for ((f, x), y) in c1.fields().iter().zip(a1).zip(a2) {
                path.0.push(Step::Field(*f));
                diff_paths(x, y, path, out);
                path.0.pop();
            }
        }
        (t, v) if t == v => {}
        _ => out.push(Diff {
            path: path.clone(),
            value: value.clone(),
        }),
    }
}

#[derive(Clone)]
struct Choice {
    obj: Term,
    drawn: CellSet,
    diffs: Vec<Diff>,
}

enum Slot {
    Fixed(Choice),
    Open(Term),
}

/// Bound on search nodes per parse, keeping pathological grids affordable.
const MAX_SEARCH_NODES: usize = 20_000;

struct Search<'a> {
    analysis: &'a GridAnalysis,
    slots: Vec<Slot>,
    cfg: &'a ParseConfig,
    cache: HashMap<(usize, CellSet, usize), Rc<Vec<Choice>>>,
    nodes: usize,
    truncated: bool,
    found: Vec<(Vec<Choice>, usize)>,
}

impl<'a> Search<'a> {
    fn options(&mut self, k: usize, covered: CellSet, used: usize) -> Rc<Vec<Choice>> {
        if let Some(o) = self.cache.get(&(k, covered, used)) {
            return o.clone();
        }
        let opts = match &self.slots[k] {
            Slot::Fixed(c) => vec![c.clone()],
            Slot::Open(t) => {
                let mut out: Vec<(usize, Choice)> = Vec::new();
                for c in &self.analysis.candidates {
                    if c.own.is_subset(&covered) {
                        continue;
                    }
                    let mut diffs = Vec::new();
                    diff_paths(t, &c.obj, &mut Path::layer(k), &mut diffs);
                    if used + diffs.len() > self.cfg.max_diffs {
                        continue;
                    }
                    out.push((
                        diffs.len(),
                        Choice {
                            obj: c.obj.clone(),
                            drawn: c.drawn,
                            diffs,
                        },
                    ));
                }
                out.sort_by_key(|(n, _)| *n);
                out.truncate(self.cfg.max_candidates_per_layer);
                out.into_iter().map(|(_, c)| c).collect()
            }
        };
        let rc = Rc::new(opts);
        self.cache.insert((k, covered, used), rc.clone());
        rc
    }

    fn dfs(&mut self, k: usize, covered: CellSet, used: usize, remaining: usize, chosen: &mut Vec<Choice>, total: usize) {
        if self.found.len() >= self.cfg.max_trees_before_sort || self.nodes >= MAX_SEARCH_NODES {
            self.truncated = self.nodes < MAX_SEARCH_NODES && self.truncated;
            return;
        }
        self.nodes += 1;
        if k == self.slots.len() {
            if remaining == 0 {
                self.found.push((chosen.clone(), total));
            }
            return;
        }
        let opts = self.options(k, covered, used);
        let last = k + 1 == self.slots.len();
        if opts.len() > remaining + 1 {
            self.truncated = true;
        }
        let range = if last {
            remaining..(remaining + 1).min(opts.len())
        } else {
            0..(remaining + 1).min(opts.len())
        };
        for r in range {
            let c = &opts[r];
            chosen.push(c.clone());
            self.dfs(
                k + 1,
                covered.union(&c.drawn),
                used + c.diffs.len(),
                remaining - r,
                chosen,
                total,
            );
            chosen.pop();
        }
    }
}

fn majority_color(g: &Grid, cells: &CellSet, color_cells: &[CellSet; Color::COUNT]) -> Color {
    let _ = g;
    let mut best = Color::BLACK;
    let mut best_n = color_cells[0].intersection(cells).len();
    for c in Color::all().skip(1) {
        let n = color_cells[c.code() as usize].intersection(cells).len();
        if n > best_n {
            best = c;
            best_n = n;
        }
    }
    best
}

/// Parses a grid with an expression-free model, best readings first.
pub fn parse(m: &Term, g: &Grid, cfg: &ParseConfig, dl: &DlConfig) -> Result<Vec<Reading>, ParseError> {
    parse_analyzed(m, &GridAnalysis::new(g, cfg.connectivity), cfg, dl)
}

/// [`parse`] on a precomputed analysis.
pub fn parse_analyzed(
    m: &Term,
    a: &GridAnalysis,
    cfg: &ParseConfig,
    dl: &DlConfig,
) -> Result<Vec<Reading>, ParseError> {
    if m.has_expr() {
        return Err(ParseError::Unapplied);
    }
    let args = match m {
        Term::Node(Ctor::Grid, args) => args,
        _ => return Err(ModelError::IllFormed(format!("not a grid model: {m}")).into()),
    };
    let g = &a.grid;
    let (h, w) = (g.height(), g.width());

    let mut base_diffs = Vec::new();
    let actual_size = Term::vec_ints(h as i64, w as i64);
    diff_paths(&args[0], &actual_size, &mut Path::root().field(crate::model::Field::Size), &mut base_diffs);
    if base_diffs.len() > cfg.max_diffs {
        return Ok(vec![]);
    }

    let mut slots = Vec::new();
    for obj in m.layers() {
        if obj.is_ground() {
            let drawn = object_cells(obj, h, w)?;
            slots.push(Slot::Fixed(Choice {
                obj: obj.clone(),
                drawn,
                diffs: vec![],
            }));
        } else {
            slots.push(Slot::Open(obj.clone()));
        }
    }
    let n = slots.len();
    let mut search = Search {
        analysis: a,
        slots,
        cfg,
        cache: HashMap::new(),
        nodes: 0,
        truncated: false,
        found: Vec::new(),
    };
    let mut budget = 0;
    loop {
        search.truncated = false;
        search.dfs(0, CellSet::default(), base_diffs.len(), budget, &mut Vec::new(), budget);
        if !search.truncated
            || search.found.len() >= cfg.max_trees_before_sort
            || search.nodes >= MAX_SEARCH_NODES
            || budget >= n * cfg.max_candidates_per_layer
        {
            break;
        }
        budget += 1;
    }

    let mut readings = Vec::with_capacity(search.found.len());
    for (choices, rank) in search.found {
        let mut covered = CellSet::default();
        let mut diffs = base_diffs.clone();
        let mut layers = Vec::with_capacity(choices.len());
        for c in choices {
            covered = covered.union(&c.drawn);
            diffs.extend(c.diffs);
            layers.push(c.obj);
        }
        let bg = match &args[1] {
            Term::Color(c) => *c,
            _ => majority_color(g, &a.all_cells.difference(&covered), &a.color_cells),
        };
        let tree = Term::grid(actual_size.clone(), Term::Color(bg), layers);
        let drawn = draw(&tree)?;
        let delta = delta_between(g, &drawn)?;
        let dl_tree = l_parse_tree(dl, &tree, m, &diffs, cfg.max_diffs);
        let dl_delta = l_delta(dl, &delta, &drawn);
        readings.push(Reading {
            tree,
            delta,
            diffs,
            dl_tree,
            dl_delta,
            dl: dl_tree + dl_delta,
            rank,
        });
    }
    readings.sort_by(|x, y| x.dl.total_cmp(&y.dl).then(x.rank.cmp(&y.rank)));
    let mut seen = HashSet::new();
    readings.retain(|r| seen.insert((r.tree.clone(), r.diffs.clone())));
    readings.truncate(cfg.max_trees_kept);
    Ok(readings)
}

/// Applies `m` in `env`, then parses `g`.
pub fn read(
    m: &Term,
    env: Option<&Term>,
    g: &Grid,
    cfg: &ParseConfig,
    dl: &DlConfig,
) -> Result<Vec<Reading>, ParseError> {
    parse(&apply_model(m, env)?, g, cfg, dl)
}

/// [`read`] on a precomputed analysis.
pub fn read_analyzed(
    m: &Term,
    env: Option<&Term>,
    a: &GridAnalysis,
    cfg: &ParseConfig,
    dl: &DlConfig,
) -> Result<Vec<Reading>, ParseError> {
    parse_analyzed(&apply_model(m, env)?, a, cfg, dl)
}
