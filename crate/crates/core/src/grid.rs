//! Concrete grids, colors, deltas, masks and connected-region segmentation.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// ARC grids are at most 30x30.
pub const MAX_SIZE: usize = 30;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GridError {
    #[error("color code {0} outside 0..9")]
    InvalidColor(i64),
    #[error("grid dimensions {0}x{1} outside 1..30")]
    InvalidDimensions(usize, usize),
    #[error("ragged matrix: row {row} has {found} cells, expected {expected}")]
    Ragged { row: usize, found: usize, expected: usize },
    #[error("size mismatch: {0}x{1} vs {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),
    #[error("cell ({0},{1}) outside grid")]
    OutOfBounds(usize, usize),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Color(u8);

const COLOR_NAMES: [&str; 10] = [
    "black", "blue", "red", "green", "yellow", "grey", "pink", "orange", "lightblue", "brown",
];

impl Color {
    pub const BLACK: Color = Color(0);
    pub const BLUE: Color = Color(1);
    pub const RED: Color = Color(2);
    pub const GREEN: Color = Color(3);
    pub const YELLOW: Color = Color(4);
    pub const GREY: Color = Color(5);
    pub const PINK: Color = Color(6);
    pub const ORANGE: Color = Color(7);
    pub const LIGHTBLUE: Color = Color(8);
    pub const BROWN: Color = Color(9);

    pub const COUNT: usize = 10;

    pub fn new(code: i64) -> Result<Color, GridError> {
        if (0..10).contains(&code) {
            Ok(Color(code as u8))
        } else {
            Err(GridError::InvalidColor(code))
        }
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = Color> {
        (0..10).map(Color)
    }

    pub fn name(self) -> &'static str {
        COLOR_NAMES[self.0 as usize]
    }

    pub fn from_name(name: &str) -> Option<Color> {
        match name {
            "cyan" | "azure" => return Some(Color::LIGHTBLUE),
            "gray" => return Some(Color::GREY),
            "magenta" => return Some(Color::PINK),
            "maroon" => return Some(Color::BROWN),
            _ => {}
        }
        COLOR_NAMES.iter().position(|n| *n == name).map(|k| Color(k as u8))
    }

    /// RGB triple of the usual ARC palette.
    pub fn rgb(self) -> [u8; 3] {
        match self.0 {
            0 => [0x00, 0x00, 0x00],
            1 => [0x00, 0x74, 0xd9],
            2 => [0xff, 0x41, 0x36],
            3 => [0x2e, 0xcc, 0x40],
            4 => [0xff, 0xdc, 0x00],
            5 => [0xaa, 0xaa, 0xaa],
            6 => [0xf0, 0x12, 0xbe],
            7 => [0xff, 0x85, 0x1b],
            8 => [0x7f, 0xdb, 0xff],
            _ => [0x87, 0x0c, 0x25],
        }
    }
}

impl fmt::Debug for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A colored matrix, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Grid {
    height: usize,
    width: usize,
    cells: Vec<Color>,
}

impl Grid {
    pub fn new(height: usize, width: usize, fill: Color) -> Result<Grid, GridError> {
        if !(1..=MAX_SIZE).contains(&height) || !(1..=MAX_SIZE).contains(&width) {
            return Err(GridError::InvalidDimensions(height, width));
        }
        Ok(Grid {
            height,
            width,
            cells: vec![fill; height * width],
        })
    }

    pub fn from_rows<R: AsRef<[i64]>>(rows: &[R]) -> Result<Grid, GridError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        let mut grid = Grid::new(height, width, Color::BLACK)?;
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != width {
                return Err(GridError::Ragged {
                    row: i,
                    found: row.len(),
                    expected: width,
                });
            }
            for (j, &c) in row.iter().enumerate() {
                grid.cells[i * width + j] = Color::new(c)?;
            }
        }
        Ok(grid)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, i: usize, j: usize) -> Color {
        self.cells[i * self.width + j]
    }

    pub fn set(&mut self, i: usize, j: usize, c: Color) {
        self.cells[i * self.width + j] = c;
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i < self.height && j < self.width
    }

    pub fn same_size(&self, other: &Grid) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, Color)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .map(move |(k, &c)| (k / self.width, k % self.width, c))
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        self.cells
            .chunks(self.width)
            .map(|row| row.iter().map(|c| c.code()).collect())
            .collect()
    }

    /// Count of cells per color code.
    pub fn histogram(&self) -> [usize; 10] {
        let mut hist = [0; 10];
        for c in &self.cells {
            hist[c.code() as usize] += 1;
        }
        hist
    }

    /// One digit per cell, rows separated by newlines.
    pub fn render_text(&self) -> String {
        let mut out = String::with_capacity(self.height * (self.width + 1));
        for (k, row) in self.cells.chunks(self.width).enumerate() {
            if k > 0 {
                out.push('\n');
            }
            for c in row {
                out.push(char::from(b'0' + c.code()));
            }
        }
        out
    }

    /// Binary portable pixmap (P6), each cell drawn as a `scale`x`scale` block.
    pub fn render_ppm(&self, scale: usize) -> Vec<u8> {
        let scale = scale.max(1);
        let (h, w) = (self.height * scale, self.width * scale);
        let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
        for y in 0..h {
            for x in 0..w {
                out.extend_from_slice(&self.get(y / scale, x / scale).rgb());
            }
        }
        out
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Grid {}x{}", self.height, self.width)?;
        f.write_str(&self.render_text())
    }
}

/// Cell corrections turning one grid into another same-size grid.
/// Entries are kept sorted by coordinates, one per cell.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Delta {
    entries: Vec<(usize, usize, Color)>,
}

impl Delta {
    pub fn new() -> Delta {
        Delta::default()
    }

    /// Builds a delta from arbitrary entries; the last entry for a cell wins.
    pub fn from_entries(entries: impl IntoIterator<Item = (usize, usize, Color)>) -> Delta {
        let mut v: Vec<_> = entries.into_iter().collect();
        v.reverse();
        v.sort_by_key(|&(i, j, _)| (i, j));
        v.dedup_by_key(|e| (e.0, e.1));
        Delta { entries: v }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, usize, Color)] {
        &self.entries
    }
}

/// `g2 - g1`: the cells of `g1` that must change color to obtain `g2`.
pub fn delta_between(g2: &Grid, g1: &Grid) -> Result<Delta, GridError> {
    if !g1.same_size(g2) {
        return Err(GridError::SizeMismatch(g2.height, g2.width, g1.height, g1.width));
    }
    let entries = g1
        .cells
        .iter()
        .zip(&g2.cells)
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(k, (_, &b))| (k / g1.width, k % g1.width, b))
        .collect();
    Ok(Delta { entries })
}

/// `g1 + delta`.
pub fn delta_apply(g1: &Grid, delta: &Delta) -> Result<Grid, GridError> {
    let mut g = g1.clone();
    for &(i, j, c) in &delta.entries {
        if !g.contains(i, j) {
            return Err(GridError::OutOfBounds(i, j));
        }
        g.set(i, j, c);
    }
    Ok(g)
}

/// Fixed-capacity set of cells of a grid of at most 30x30.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct CellSet([u64; 15]);

impl CellSet {
    #[inline]
    fn index(i: usize, j: usize) -> usize {
        i * MAX_SIZE + j
    }

    #[inline]
    pub fn insert(&mut self, i: usize, j: usize) {
        let k = Self::index(i, j);
        self.0[k / 64] |= 1 << (k % 64);
    }

    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        let k = Self::index(i, j);
        self.0[k / 64] & (1 << (k % 64)) != 0
    }

    pub fn union(&self, other: &CellSet) -> CellSet {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(&other.0) {
            *a |= b;
        }
        out
    }

    pub fn intersection(&self, other: &CellSet) -> CellSet {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(&other.0) {
            *a &= b;
        }
        out
    }

    pub fn difference(&self, other: &CellSet) -> CellSet {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(&other.0) {
            *a &= !b;
        }
        out
    }

    pub fn intersects(&self, other: &CellSet) -> bool {
        self.0.iter().zip(&other.0).any(|(a, b)| a & b != 0)
    }

    /// True when every cell of `self` is in `other`.
    pub fn is_subset(&self, other: &CellSet) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & !b == 0)
    }

    pub fn len(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }
}

impl fmt::Debug for CellSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CellSet({} cells)", self.len())
    }
}

/// Rectangular boolean mask, row-major.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bitmap {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl Bitmap {
    pub fn new(height: usize, width: usize) -> Bitmap {
        Bitmap {
            height,
            width,
            bits: vec![false; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Bitmap {
        let mut bm = Bitmap::new(height, width);
        for x in 0..height {
            for y in 0..width {
                bm.bits[x * width + y] = f(x, y);
            }
        }
        bm
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[x * self.width + y]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[x * self.width + y] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

/// Rows of `0`/`1` digits separated by `/`.
impl fmt::Display for Bitmap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for x in 0..self.height {
            if x > 0 {
                f.write_str("/")?;
            }
            for y in 0..self.width {
                f.write_str(if self.get(x, y) { "1" } else { "0" })?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Bitmap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bitmap({self})")
    }
}

/// Regular masks plus custom bitmaps.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Mask {
    Bitmap(Bitmap),
    Full,
    Border,
    EvenCheckboard,
    OddCheckboard,
    PlusCross,
    TimesCross,
}

impl Mask {
    /// Regular masks in recognition order.
    pub const REGULAR: [Mask; 6] = [
        Mask::Full,
        Mask::Border,
        Mask::EvenCheckboard,
        Mask::OddCheckboard,
        Mask::PlusCross,
        Mask::TimesCross,
    ];

    /// Whether this mask can be drawn in a box of the given size.
    pub fn fits(&self, h: usize, w: usize) -> bool {
        match self {
            Mask::Bitmap(bm) => bm.height == h && bm.width == w,
            Mask::PlusCross => h % 2 == 1 && w % 2 == 1,
            Mask::TimesCross => h == w && h % 2 == 1,
            _ => true,
        }
    }
}

/// Membership of the relative cell `(x, y)` in a mask drawn in an `h`x`w` box.
pub fn mask_member(mask: &Mask, h: usize, w: usize, x: usize, y: usize) -> bool {
    match mask {
        Mask::Full => true,
        Mask::Border => x == 0 || y == 0 || x + 1 == h || y + 1 == w,
        Mask::EvenCheckboard => (x + y) % 2 == 0,
        Mask::OddCheckboard => (x + y) % 2 == 1,
        Mask::PlusCross => x == (h - 1) / 2 || y == (w - 1) / 2,
        Mask::TimesCross => {
            if w == 1 {
                true
            } else {
                let d = y * (h - 1) / (w - 1);
                x == d || x == (h - 1) - d
            }
        }
        Mask::Bitmap(bm) => x < bm.height && y < bm.width && bm.get(x, y),
    }
}

/// Neighbourhood used to group cells into parts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

/// A maximal connected single-color region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Part {
    pub color: Color,
    /// Cells in scanline order.
    pub cells: Vec<(usize, usize)>,
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
    pub set: CellSet,
}

impl Part {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn area(&self) -> usize {
        self.height * self.width
    }

    fn from_cells(color: Color, mut cells: Vec<(usize, usize)>) -> Part {
        cells.sort_unstable();
        let top = cells.iter().map(|c| c.0).min().unwrap_or(0);
        let bottom = cells.iter().map(|c| c.0).max().unwrap_or(0);
        let left = cells.iter().map(|c| c.1).min().unwrap_or(0);
        let right = cells.iter().map(|c| c.1).max().unwrap_or(0);
        let mut set = CellSet::default();
        for &(i, j) in &cells {
            set.insert(i, j);
        }
        Part {
            color,
            cells,
            top,
            left,
            height: bottom - top + 1,
            width: right - left + 1,
            set,
        }
    }

    /// Union of two parts of the same color.
    pub fn merge(&self, other: &Part) -> Part {
        let mut cells = self.cells.clone();
        cells.extend_from_slice(&other.cells);
        Part::from_cells(self.color, cells)
    }
}

/// Partitions a grid into maximal monocolor regions, in scanline order of
/// each part's first cell.
pub fn segment(g: &Grid, connectivity: Connectivity) -> Vec<Part> {
    let (h, w) = (g.height, g.width);
    let mut seen = vec![false; h * w];
    let mut parts = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..h * w {
        if seen[start] {
            continue;
        }
        let color = g.cells[start];
        seen[start] = true;
        queue.push_back(start);
        let mut cells = Vec::new();
        while let Some(k) = queue.pop_front() {
            let (i, j) = (k / w, k % w);
            cells.push((i, j));
            let mut visit = |di: isize, dj: isize| {
                let (ni, nj) = (i as isize + di, j as isize + dj);
                if ni < 0 || nj < 0 || ni >= h as isize || nj >= w as isize {
                    return;
                }
                let nk = ni as usize * w + nj as usize;
                if !seen[nk] && g.cells[nk] == color {
                    seen[nk] = true;
                    queue.push_back(nk);
                }
            };
            visit(-1, 0);
            visit(1, 0);
            visit(0, -1);
            visit(0, 1);
            if connectivity == Connectivity::Eight {
                visit(-1, -1);
                visit(-1, 1);
                visit(1, -1);
                visit(1, 1);
            }
        }
        parts.push(Part::from_cells(color, cells));
    }
    parts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: &[&[i64]]) -> Grid {
        Grid::from_rows(rows).unwrap()
    }

    #[test]
    fn delta_of_identical_grids_is_empty() {
        let g = grid(&[&[1, 2], &[3, 4]]);
        assert!(delta_between(&g, &g).unwrap().is_empty());
    }

    #[test]
    fn delta_single_cell() {
        let g1 = Grid::new(2, 2, Color::BLACK).unwrap();
        let g2 = grid(&[&[0, 2], &[0, 0]]);
        let d = delta_between(&g2, &g1).unwrap();
        assert_eq!(d.entries(), &[(0, 1, Color::RED)]);
        let g = delta_apply(&g1, &d).unwrap();
        assert_eq!(g, g2);
        assert_eq!(g.histogram()[2], 1);
    }

    #[test]
    fn delta_size_mismatch() {
        let g1 = Grid::new(2, 2, Color::BLACK).unwrap();
        let g2 = Grid::new(2, 3, Color::BLACK).unwrap();
        assert!(matches!(delta_between(&g2, &g1), Err(GridError::SizeMismatch(..))));
    }

    #[test]
    fn delta_apply_out_of_bounds() {
        let g1 = Grid::new(2, 2, Color::BLACK).unwrap();
        let d = Delta::from_entries([(2, 0, Color::RED)]);
        assert_eq!(delta_apply(&g1, &d), Err(GridError::OutOfBounds(2, 0)));
        assert_eq!(delta_apply(&g1, &Delta::new()).unwrap(), g1);
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(Grid::from_rows(&[[12i64]]), Err(GridError::InvalidColor(12))));
        assert!(matches!(
            Grid::from_rows(&[vec![0i64, 0], vec![0]]),
            Err(GridError::Ragged { row: 1, .. })
        ));
        assert!(Grid::new(0, 3, Color::BLACK).is_err());
        assert!(Grid::new(31, 3, Color::BLACK).is_err());
    }

    #[test]
    fn segment_single_cell() {
        let parts = segment(&grid(&[&[7]]), Connectivity::Four);
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].cells, vec![(0, 0)]);
    }

    #[test]
    fn segment_diagonal_checker() {
        let g = grid(&[&[1, 2], &[2, 1]]);
        assert_eq!(segment(&g, Connectivity::Four).len(), 4);
        assert_eq!(segment(&g, Connectivity::Eight).len(), 2);
    }

    #[test]
    fn border_and_cross_masks() {
        assert!(!mask_member(&Mask::Border, 3, 3, 1, 1));
        assert!(mask_member(&Mask::Border, 3, 3, 0, 2));
        let plus: Vec<_> = (0..3)
            .flat_map(|x| (0..3).map(move |y| (x, y)))
            .filter(|&(x, y)| mask_member(&Mask::PlusCross, 3, 3, x, y))
            .collect();
        assert_eq!(plus, vec![(0, 1), (1, 0), (1, 1), (1, 2), (2, 1)]);
        let times: Vec<_> = (0..3)
            .flat_map(|x| (0..3).map(move |y| (x, y)))
            .filter(|&(x, y)| mask_member(&Mask::TimesCross, 3, 3, x, y))
            .collect();
        assert_eq!(times, vec![(0, 0), (0, 2), (1, 1), (2, 0), (2, 2)]);
    }

    #[test]
    fn mask_cardinalities() {
        for h in 1..8 {
            for w in 1..8 {
                let count = |m: &Mask| {
                    (0..h)
                        .flat_map(|x| (0..w).map(move |y| (x, y)))
                        .filter(|&(x, y)| mask_member(m, h, w, x, y))
                        .count()
                };
                assert_eq!(count(&Mask::Full), h * w);
                if h >= 2 && w >= 2 {
                    assert_eq!(count(&Mask::Border), 2 * h + 2 * w - 4);
                }
                assert_eq!(count(&Mask::EvenCheckboard) + count(&Mask::OddCheckboard), h * w);
            }
        }
    }

    #[test]
    fn render_formats() {
        let g = grid(&[&[0, 1], &[2, 3]]);
        assert_eq!(g.render_text(), "01\n23");
        let ppm = g.render_ppm(2);
        assert!(ppm.starts_with(b"P6\n4 4\n255\n"));
        assert_eq!(ppm.len(), "P6\n4 4\n255\n".len() + 4 * 4 * 3);
    }

    #[test]
    fn color_names_round_trip() {
        for c in Color::all() {
            assert_eq!(Color::from_name(c.name()), Some(c));
        }
        assert_eq!(Color::from_name("cyan"), Some(Color::LIGHTBLUE));
    }
}
