#![allow(dead_code)]

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;

use arc_mdl::grid::{Color, Grid};
use arc_mdl::learn::create;
use arc_mdl::parse::draw;
use arc_mdl::syntax::parse_grid_model;
use arc_mdl::task::{load_task_file, Task};
use arc_mdl::{TaskModel, Term};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn training_task(id: &str) -> Task {
    load_task_file(&data_dir().join("training").join(format!("{id}.json"))).expect("training task present")
}

/// Training tasks known to be solvable by the approach.
pub const GOLDEN: [&str; 22] = [
    "1bfc4729", "1cf80156", "1f85a75f", "25ff71a9", "445eab21", "48d8fb45", "5521c0d9", "5582e5ca", "681b3aeb",
    "6f8cd79b", "a1570a43", "a79310a0", "a87f7484", "aabf363d", "b1948b0a", "b94a9452", "ba97ae07", "bda2d7a6",
    "bdad9b1f", "e48d4e1a", "e9afcf9a", "ea32f347",
];

/// Tasks whose search finishes well within the timeout, so two runs must agree.
pub const QUICK: [&str; 10] = [
    "1cf80156", "25ff71a9", "445eab21", "5521c0d9", "6f8cd79b", "a79310a0", "aabf363d", "b94a9452", "ba97ae07",
    "bda2d7a6",
];

fn color_name(c: u8) -> &'static str {
    Color::new(c as i64).unwrap().name()
}

/// `?` with probability `p`, else the given text.
fn maybe_unknown<R: Rng>(rng: &mut R, p: f64, text: impl FnOnce(&mut R) -> String) -> String {
    if rng.gen_bool(p) {
        "?".into()
    } else {
        text(rng)
    }
}

fn random_mask(rng: &mut impl Rng, h: usize, w: usize) -> String {
    let masks = ["Full", "Border", "EvenCheckboard", "OddCheckboard", "PlusCross", "TimesCross"];
    if rng.gen_bool(0.2) {
        let bits: Vec<String> = (0..h)
            .map(|_| (0..w).map(|_| if rng.gen_bool(0.6) { '1' } else { '0' }).collect())
            .collect();
        return format!("Bitmap({})", bits.join("/"));
    }
    masks.choose(rng).unwrap().to_string()
}

fn random_shape_template(rng: &mut impl Rng, p_unknown: f64) -> String {
    if rng.gen_bool(0.2) {
        return "?".into();
    }
    if rng.gen_bool(0.3) {
        return format!("Point({})", maybe_unknown(rng, p_unknown, |r| color_name(r.gen_range(1..10)).into()));
    }
    let (h, w) = (rng.gen_range(1..5), rng.gen_range(1..5));
    let size = if rng.gen_bool(p_unknown) {
        "?".to_string()
    } else {
        let (a, b) = (maybe_unknown(rng, p_unknown, |_| h.to_string()), maybe_unknown(rng, p_unknown, |_| w.to_string()));
        format!("Vec({a}, {b})")
    };
    let mask = if size.contains('?') && rng.gen_bool(0.5) {
        "?".into()
    } else {
        maybe_unknown(rng, p_unknown, |r| random_mask(r, h, w))
    };
    let color = maybe_unknown(rng, p_unknown, |r| color_name(r.gen_range(1..10)).into());
    format!("Rectangle({size}, {color}, {mask})")
}

/// A random grid template: a few layers whose slots are ground or unknown.
pub fn random_template(rng: &mut impl Rng) -> Term {
    let p = rng.gen_range(0.3..0.9);
    let n = rng.gen_range(0..4);
    let layers: Vec<String> = (0..n)
        .map(|_| {
            let pos = if rng.gen_bool(p) {
                "?".to_string()
            } else {
                format!("Vec({}, {})", rng.gen_range(0..6), rng.gen_range(0..6))
            };
            format!("PosShape({pos}, {})", random_shape_template(rng, p))
        })
        .collect();
    let size = maybe_unknown(rng, p, |r| format!("Vec({}, {})", r.gen_range(1..9), r.gen_range(1..9)));
    let color = maybe_unknown(rng, p, |r| color_name(r.gen_range(0..10)).into());
    parse_grid_model(&format!("Grid({size}, {color}, [{}])", layers.join(", "))).expect("well-formed template")
}

/// A random grid: either noise, or a few rectangles on a background plus noise.
pub fn random_grid(rng: &mut impl Rng) -> Grid {
    let (h, w) = (rng.gen_range(1..10), rng.gen_range(1..10));
    let bg = if rng.gen_bool(0.6) { 0 } else { rng.gen_range(0..10) };
    let mut g = Grid::new(h, w, Color::new(bg).unwrap()).unwrap();
    if rng.gen_bool(0.3) {
        for i in 0..h {
            for j in 0..w {
                g.set(i, j, Color::new(rng.gen_range(0..10)).unwrap());
            }
        }
        return g;
    }
    for _ in 0..rng.gen_range(0..4) {
        let (i0, j0) = (rng.gen_range(0..h), rng.gen_range(0..w));
        let (rh, rw) = (rng.gen_range(1..5), rng.gen_range(1..5));
        let c = Color::new(rng.gen_range(0..10)).unwrap();
        for i in i0..(i0 + rh).min(h) {
            for j in j0..(j0 + rw).min(w) {
                g.set(i, j, c);
            }
        }
    }
    for _ in 0..rng.gen_range(0..3) {
        g.set(rng.gen_range(0..h), rng.gen_range(0..w), Color::new(rng.gen_range(0..10)).unwrap());
    }
    g
}

/// A (template, grid) pair; half of the grids are drawn from a ground
/// instance of a related template so that readings are not all trivial.
pub fn random_pair(rng: &mut impl Rng) -> (Term, Grid) {
    let m = random_template(rng);
    if rng.gen_bool(0.5) {
        if let Ok((_, g)) = arc_mdl::parse::write(&m, None) {
            return (m, g);
        }
    }
    (m, random_grid(rng))
}

struct Placed {
    i: usize,
    j: usize,
    h: usize,
    w: usize,
}

/// A random task model whose output side has no unknown. The input side is
/// ground except for slots whose value equals the generation default, so
/// `create` draws a grid the input model reads back unambiguously.
pub fn random_definite_model(rng: &mut impl Rng) -> TaskModel {
    let (gh, gw) = if rng.gen_bool(0.3) { (10, 10) } else { (rng.gen_range(6..16), rng.gen_range(6..16)) };
    let bg = if rng.gen_bool(0.7) { 0u8 } else { rng.gen_range(1..10) };
    let mut colors: Vec<u8> = (1..10).filter(|&c| c != bg).collect();
    colors.shuffle(rng);
    let mut placed: Vec<Placed> = Vec::new();
    let mut layers = Vec::new();
    let n = rng.gen_range(1..4);
    for k in 0..n {
        for _attempt in 0..50 {
            let (h, w) = if rng.gen_bool(0.3) { (2, 2) } else { (rng.gen_range(1..5), rng.gen_range(1..5)) };
            let (i, j) = if k == 0 && rng.gen_bool(0.2) {
                (0, 0)
            } else {
                (rng.gen_range(0..=gh - h), rng.gen_range(0..=gw - w))
            };
            let clear = placed
                .iter()
                .all(|p| i + h < p.i || p.i + p.h < i || j + w < p.j || p.j + p.w < j);
            if !clear || i + h > gh || j + w > gw {
                continue;
            }
            let color = colors[k];
            let mask = if h >= 3 && w >= 3 && rng.gen_bool(0.3) { "Border" } else { "Full" };
            let pos = if (i, j) == (0, 0) && rng.gen_bool(0.5) {
                "?".to_string()
            } else {
                format!("Vec({i}, {j})")
            };
            let size = if (h, w) == (2, 2) && rng.gen_bool(0.5) {
                "?".to_string()
            } else {
                format!("Vec({h}, {w})")
            };
            let col = if color == 5 && rng.gen_bool(0.5) {
                "?".to_string()
            } else {
                color_name(color).to_string()
            };
            let mask = if mask == "Full" && rng.gen_bool(0.5) { "?" } else { mask };
            layers.push(format!("PosShape({pos}, Rectangle({size}, {col}, {mask}))"));
            placed.push(Placed { i, j, h, w });
            break;
        }
    }
    let n = layers.len();
    let gsize = if (gh, gw) == (10, 10) && rng.gen_bool(0.5) { "?".into() } else { format!("Vec({gh}, {gw})") };
    let gcolor = if bg == 0 && rng.gen_bool(0.5) { "?" } else { color_name(bg) };
    let input = format!("Grid({gsize}, {gcolor}, [{}])", layers.join(", "));

    let layer = |rng: &mut dyn rand::RngCore| rng.gen_range(0..n);
    let osize = match rng.gen_range(0..3) {
        0 => format!("Vec({}, {})", rng.gen_range(3..11), rng.gen_range(3..11)),
        1 => "size".into(),
        _ => format!("layers[{}].shape.size", layer(rng)),
    };
    let ocolor = if rng.gen_bool(0.5) {
        color_name(rng.gen_range(0..10)).to_string()
    } else {
        format!("layers[{}].shape.color", layer(rng))
    };
    let mut objs = Vec::new();
    for _ in 0..rng.gen_range(0..3) {
        // expressions range over naturals: only subtract a smaller coordinate
        let coord = |rng: &mut dyn rand::RngCore, f: &str| {
            let at = |k: usize| if f == "i" { placed[k].i } else { placed[k].j };
            match rng.gen_range(0..3) {
                0 => rng.gen_range(0..4).to_string(),
                1 => format!("layers[{}].pos.{f}", rng.gen_range(0..n)),
                _ => {
                    let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
                    let (a, b) = if at(a) >= at(b) { (a, b) } else { (b, a) };
                    format!("layers[{a}].pos.{f} - layers[{b}].pos.{f}")
                }
            }
        };
        let pos = format!("Vec({}, {})", coord(rng, "i"), coord(rng, "j"));
        let size = if rng.gen_bool(0.5) {
            format!("Vec({}, {})", rng.gen_range(1..4), rng.gen_range(1..4))
        } else {
            format!("layers[{}].shape.size", layer(rng))
        };
        let color = if rng.gen_bool(0.5) {
            color_name(rng.gen_range(0..10)).to_string()
        } else {
            format!("layers[{}].shape.color", layer(rng))
        };
        let mask = if rng.gen_bool(0.5) { "Full".to_string() } else { format!("layers[{}].shape.mask", layer(rng)) };
        objs.push(format!("PosShape({pos}, Rectangle({size}, {color}, {mask}))"));
    }
    let output = format!("Grid({osize}, {ocolor}, [{}])", objs.join(", "));
    let text = format!("InOut({input}, {output})");
    let m = TaskModel::parse(&text).unwrap_or_else(|e| panic!("{text}: {e}"));
    assert!(m.is_definite(), "{text}");
    m
}

/// `create` must succeed on generated models; the sizes above are all drawable.
pub fn created(m: &TaskModel) -> (Grid, Grid) {
    create(m).unwrap_or_else(|e| panic!("create failed on {m}: {e}"))
}

pub fn redraw(t: &Term) -> Grid {
    draw(t).expect("ground tree draws")
}
