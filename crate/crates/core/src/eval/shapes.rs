//! Built-in non-digit targets on a 28x28 grid: simple geometric shapes and
//! block letters from a 5x7 bitmap font.

use crate::error::{Error, Result};
use crate::geometry::{RcsMap, MNIST_SIDE};

const N: usize = MNIST_SIDE;

fn from_fn(f: impl Fn(f64, f64) -> bool) -> RcsMap {
    let c = (N as f64 - 1.0) / 2.0;
    let v = (0..N * N)
        .map(|i| {
            let (r, col) = ((i / N) as f64 - c, (i % N) as f64 - c);
            if f(r, col) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    RcsMap::new(v).expect("values are 0 or 1")
}

/// Solid axis-aligned rectangle.
pub fn rectangle() -> RcsMap {
    from_fn(|r, c| r.abs() <= 6.0 && c.abs() <= 9.0)
}

/// Plus sign with 4-cell-wide bars.
pub fn cross() -> RcsMap {
    from_fn(|r, c| (r.abs() <= 2.0 && c.abs() <= 10.0) || (c.abs() <= 2.0 && r.abs() <= 10.0))
}

/// Annulus between radii 6 and 10 cells.
pub fn ring() -> RcsMap {
    from_fn(|r, c| {
        let d = (r * r + c * c).sqrt();
        (6.0..=10.0).contains(&d)
    })
}

/// Filled upward triangle.
pub fn triangle() -> RcsMap {
    from_fn(|r, c| (-9.0..=9.0).contains(&r) && c.abs() <= (r + 9.0) * 0.5)
}

const FONT: [(char, [u8; 7]); 8] = [
    ('A', [0x0e, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11]),
    ('E', [0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x1f]),
    ('F', [0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x10]),
    ('H', [0x11, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11]),
    ('L', [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1f]),
    ('T', [0x1f, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04]),
    ('X', [0x11, 0x11, 0x0a, 0x04, 0x0a, 0x11, 0x11]),
    ('Z', [0x1f, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1f]),
];

pub fn letter_glyphs() -> impl Iterator<Item = char> {
    FONT.iter().map(|(c, _)| *c)
}

/// Block letter scaled 3x (15x21 cells) and centered.
pub fn letter(ch: char) -> Result<RcsMap> {
    let rows = FONT
        .iter()
        .find(|(c, _)| *c == ch.to_ascii_uppercase())
        .map(|(_, r)| r)
        .ok_or_else(|| Error::invalid(format!("no built-in glyph for '{ch}'")))?;
    let (scale, gw, gh) = (3, 5, 7);
    let (x0, y0) = ((N - gw * scale) / 2, (N - gh * scale) / 2);
    let mut v = vec![0.0; N * N];
    for (gy, bits) in rows.iter().enumerate() {
        for gx in 0..gw {
            if bits >> (gw - 1 - gx) & 1 == 1 {
                for dy in 0..scale {
                    for dx in 0..scale {
                        v[(y0 + gy * scale + dy) * N + x0 + gx * scale + dx] = 1.0;
                    }
                }
            }
        }
    }
    RcsMap::new(v)
}

/// Named built-in target, e.g. `ring` or `letter-L`.
pub fn builtin(name: &str) -> Result<RcsMap> {
    match name {
        "rectangle" => Ok(rectangle()),
        "cross" => Ok(cross()),
        "ring" => Ok(ring()),
        "triangle" => Ok(triangle()),
        _ => match name.strip_prefix("letter-").map(|s| s.chars().collect::<Vec<_>>()) {
            Some(c) if c.len() == 1 => letter(c[0]),
            _ => Err(Error::invalid(format!("unknown shape '{name}'"))),
        },
    }
}

/// Default evaluation set: the four shapes and every letter glyph.
pub fn builtin_set() -> Vec<(String, RcsMap)> {
    let mut out: Vec<(String, RcsMap)> = ["rectangle", "cross", "ring", "triangle"]
        .iter()
        .map(|n| (n.to_string(), builtin(n).expect("known shape")))
        .collect();
    for c in letter_glyphs() {
        out.push((format!("letter-{c}"), letter(c).expect("known glyph")));
    }
    out
}
