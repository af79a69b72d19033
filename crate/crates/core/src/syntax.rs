//! Reader for the textual model syntax printed by `Display`:
//! `InOut(Grid(Vec(12,?), black, [PosShape(?, Rectangle(?, ?, Full))]), Grid(layers[0].shape.size, ...))`.
//!
//! Parsing is sort-directed: the expected slot sort decides whether `101` is
//! an integer or a one-row bitmap, and whether an identifier is a color name
//! or a path.

use crate::grid::{Bitmap, Color};
use crate::model::{Base, Ctor, Expr, Field, ModelError, Path, Sort, Step, TaskModel, Term};

struct Reader<'a> {
    src: &'a str,
    pos: usize,
}

fn err(msg: impl Into<String>) -> ModelError {
    ModelError::IllFormed(msg.into())
}

impl<'a> Reader<'a> {
    fn new(src: &'a str) -> Self {
        Reader { src, pos: 0 }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.rest().chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ModelError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(err(format!("expected '{c}' at offset {} in {:?}", self.pos, self.src)))
        }
    }

    fn ident(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let rest = self.rest();
        let len = rest
            .char_indices()
            .find(|(_, c)| !(c.is_ascii_alphanumeric() || *c == '_'))
            .map_or(rest.len(), |(k, _)| k);
        if len == 0 || rest.as_bytes()[0].is_ascii_digit() {
            return None;
        }
        self.pos += len;
        Some(&rest[..len])
    }

    fn number(&mut self) -> Option<i64> {
        self.skip_ws();
        let rest = self.rest();
        let len = rest.bytes().take_while(u8::is_ascii_digit).count();
        if len == 0 {
            return None;
        }
        self.pos += len;
        rest[..len].parse().ok()
    }

    fn done(&mut self) -> Result<(), ModelError> {
        if self.peek().is_none() {
            Ok(())
        } else {
            Err(err(format!("trailing input at offset {}: {:?}", self.pos, self.rest())))
        }
    }

    /// Path after its first identifier has been read.
    fn path_from(&mut self, first: &str) -> Result<Path, ModelError> {
        let mut steps = Vec::new();
        let mut name = first;
        loop {
            let f = Field::from_name(name).ok_or_else(|| err(format!("unknown field {name}")))?;
            // in-rooted paths are written with or without the `in.` prefix
            if !(steps.is_empty() && f == Field::In) {
                steps.push(Step::Field(f));
            }
            while self.rest().starts_with('[') {
                self.pos += 1;
                let k = self.number().ok_or_else(|| err("expected layer index"))?;
                self.expect(']')?;
                steps.push(Step::Index(k as usize));
            }
            if self.rest().starts_with('.') {
                self.pos += 1;
                name = self.ident().ok_or_else(|| err("expected field name"))?;
            } else {
                break;
            }
        }
        Ok(Path(steps))
    }

    fn bitmap(&mut self) -> Result<Bitmap, ModelError> {
        self.skip_ws();
        let rest = self.rest();
        let len = rest.bytes().take_while(|b| matches!(b, b'0' | b'1' | b'/')).count();
        let rows: Vec<&str> = rest[..len].split('/').collect();
        let w = rows[0].len();
        if w == 0 || rows.iter().any(|r| r.len() != w) {
            return Err(err("malformed bitmap"));
        }
        self.pos += len;
        Ok(Bitmap::from_fn(rows.len(), w, |x, y| rows[x].as_bytes()[y] == b'1'))
    }

    fn term(&mut self, sort: Sort) -> Result<Term, ModelError> {
        if self.eat('?') {
            return Ok(Term::Unknown);
        }
        match sort {
            Sort::Int(_) => self.int_expr(),
            Sort::Bits => Ok(Term::Bits(self.bitmap()?)),
            Sort::Layers => {
                self.expect('[')?;
                let mut items = Vec::new();
                if !self.eat(']') {
                    loop {
                        items.push(self.term(Sort::Object)?);
                        if self.eat(']') {
                            break;
                        }
                        self.expect(',')?;
                    }
                }
                Ok(Term::List(items))
            }
            _ => {
                let name = self.ident().ok_or_else(|| err(format!("expected term at offset {}", self.pos)))?;
                if let Some(ctor) = Ctor::from_name(name) {
                    if !sort.admits(ctor) {
                        return Err(err(format!("{name} not allowed in a {sort:?} slot")));
                    }
                    let fields = ctor.fields();
                    let mut args = Vec::with_capacity(fields.len());
                    if !fields.is_empty() {
                        self.expect('(')?;
                        for (k, f) in fields.iter().enumerate() {
                            if k > 0 {
                                self.expect(',')?;
                            }
                            args.push(self.term(sort.field_sort(ctor, *f).unwrap())?);
                        }
                        self.expect(')')?;
                    }
                    Ok(Term::Node(ctor, args))
                } else if sort.base() == Base::Color && Field::from_name(name).is_none() {
                    Color::from_name(name)
                        .map(Term::Color)
                        .ok_or_else(|| err(format!("unknown color {name}")))
                } else {
                    Ok(Term::Expr(Expr::Var(self.path_from(name)?)))
                }
            }
        }
    }

    fn int_expr(&mut self) -> Result<Term, ModelError> {
        let mut acc = self.int_operand()?;
        loop {
            if self.eat('+') {
                acc = Expr::plus(acc, self.int_operand()?);
            } else if self.peek() == Some('-') {
                self.pos += 1;
                acc = Expr::minus(acc, self.int_operand()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn int_operand(&mut self) -> Result<Term, ModelError> {
        if self.eat('(') {
            let t = self.int_expr()?;
            self.expect(')')?;
            return Ok(t);
        }
        if let Some(n) = self.number() {
            return Ok(Term::Int(n));
        }
        match self.ident() {
            Some("zero") => Ok(Term::Expr(Expr::Zero)),
            Some(name) => Ok(Term::Expr(Expr::Var(self.path_from(name)?))),
            None => Err(err(format!("expected integer term at offset {}", self.pos))),
        }
    }
}

/// Parses a grid model (sort `Grid`).
pub fn parse_grid_model(s: &str) -> Result<Term, ModelError> {
    parse_term(s, Sort::Grid)
}

/// Parses a term expected in a slot of the given sort.
pub fn parse_term(s: &str, sort: Sort) -> Result<Term, ModelError> {
    let mut r = Reader::new(s);
    let t = r.term(sort)?;
    r.done()?;
    Ok(t)
}

pub fn parse_task_model(s: &str) -> Result<TaskModel, ModelError> {
    let mut r = Reader::new(s);
    match r.ident() {
        Some("InOut") => {}
        _ => return Err(err("expected InOut(")),
    }
    r.expect('(')?;
    let input = r.term(Sort::Grid)?;
    r.expect(',')?;
    let output = r.term(Sort::Grid)?;
    r.expect(')')?;
    r.done()?;
    let m = TaskModel { input, output };
    m.check()?;
    Ok(m)
}

pub fn parse_path(s: &str) -> Result<Path, ModelError> {
    let mut r = Reader::new(s);
    if r.peek().is_none() {
        return Ok(Path::root());
    }
    let first = r.ident().ok_or_else(|| err(format!("bad path {s:?}")))?;
    let p = r.path_from(first)?;
    r.done()?;
    Ok(p)
}
