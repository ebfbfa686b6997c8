//! Geometric fill primitives on ink-density rasters. Points are `(row, col)`
//! in pixel units; a pixel is covered when its center satisfies the shape's
//! inequalities, so nothing is anti-aliased.

use crate::grid::Grid;

pub type Point = (f64, f64);

/// Axis-aligned box `[top, bottom] x [left, right]`, inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub top: f64,
    pub left: f64,
    pub bottom: f64,
    pub right: f64,
}

impl Rect {
    pub fn contains(&self, p: Point) -> bool {
        p.0 >= self.top && p.0 <= self.bottom && p.1 >= self.left && p.1 <= self.right
    }

    pub fn padded(&self, pad: f64) -> Rect {
        Rect {
            top: self.top - pad,
            left: self.left - pad,
            bottom: self.bottom + pad,
            right: self.right + pad,
        }
    }
}

fn ink(img: &mut Grid<f32>, r: i64, c: i64) {
    img.set(r, c, 1.0);
}

/// Parameter interval of `a + t (b - a)`, `t` in `[0, 1]`, that lies in
/// `rect` (Liang-Barsky). `None` when the segment misses it.
pub fn clip_interval(a: Point, b: Point, rect: &Rect) -> Option<(f64, f64)> {
    let d = (b.0 - a.0, b.1 - a.1);
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    let checks = [
        (-d.0, a.0 - rect.top),
        (d.0, rect.bottom - a.0),
        (-d.1, a.1 - rect.left),
        (d.1, rect.right - a.1),
    ];
    for (p, q) in checks {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    (t0 <= t1).then_some((t0, t1))
}

/// Visible parameter range of segment `a`-`b` after removing the parts
/// inside `box_a` (around the start) and `box_b` (around the end).
pub fn visible_range(a: Point, b: Point, box_a: Option<&Rect>, box_b: Option<&Rect>) -> (f64, f64) {
    let mut lo = 0.0;
    let mut hi = 1.0;
    if let Some(r) = box_a {
        if r.contains(a) {
            if let Some((_, t1)) = clip_interval(a, b, r) {
                lo = t1;
            }
        }
    }
    if let Some(r) = box_b {
        if r.contains(b) {
            if let Some((t0, _)) = clip_interval(a, b, r) {
                hi = t0;
            }
        }
    }
    (lo, hi)
}

fn lerp(a: Point, b: Point, t: f64) -> Point {
    (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
}

/// Pixels within the band `0 <= t <= |b - a|`, `-w/2 <= d < w/2`, where `t`
/// runs along the segment and `d` across it.
pub fn fill_segment(img: &mut Grid<f32>, a: Point, b: Point, width: f64) {
    let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
    if len == 0.0 {
        return;
    }
    let u = ((b.0 - a.0) / len, (b.1 - a.1) / len);
    let half = width / 2.0;
    let r0 = (a.0.min(b.0) - half).floor() as i64 - 1;
    let r1 = (a.0.max(b.0) + half).ceil() as i64 + 1;
    let c0 = (a.1.min(b.1) - half).floor() as i64 - 1;
    let c1 = (a.1.max(b.1) + half).ceil() as i64 + 1;
    for r in r0..=r1 {
        for c in c0..=c1 {
            let p = (r as f64 - a.0, c as f64 - a.1);
            let t = p.0 * u.0 + p.1 * u.1;
            let d = p.0 * u.1 - p.1 * u.0;
            if t >= 0.0 && t <= len && d >= -half && d < half {
                ink(img, r, c);
            }
        }
    }
}

/// Part `t0..t1` (fractions of the full length) of segment `a`-`b`.
pub fn fill_partial(img: &mut Grid<f32>, a: Point, b: Point, (t0, t1): (f64, f64), width: f64) {
    if t1 > t0 {
        fill_segment(img, lerp(a, b, t0), lerp(a, b, t1), width);
    }
}

/// Triangle growing from width `min_width` at `a` to `max_width` at `b`,
/// restricted to the fractional range `t0..t1`.
pub fn fill_wedge(img: &mut Grid<f32>, a: Point, b: Point, (t0, t1): (f64, f64), min_width: f64, max_width: f64) {
    let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
    if len == 0.0 || t1 <= t0 {
        return;
    }
    let u = ((b.0 - a.0) / len, (b.1 - a.1) / len);
    let half = max_width.max(min_width) / 2.0;
    let r0 = (a.0.min(b.0) - half).floor() as i64 - 1;
    let r1 = (a.0.max(b.0) + half).ceil() as i64 + 1;
    let c0 = (a.1.min(b.1) - half).floor() as i64 - 1;
    let c1 = (a.1.max(b.1) + half).ceil() as i64 + 1;
    for r in r0..=r1 {
        for c in c0..=c1 {
            let p = (r as f64 - a.0, c as f64 - a.1);
            let t = p.0 * u.0 + p.1 * u.1;
            let d = p.0 * u.1 - p.1 * u.0;
            if t < t0 * len || t > t1 * len {
                continue;
            }
            let w = (max_width * t / len).max(min_width) / 2.0;
            if d >= -w && d < w {
                ink(img, r, c);
            }
        }
    }
}

/// `count` strokes across the segment at fractions `(k + 0.5) / count`, each
/// `max(min_len, max_len * fraction)` long; strokes outside `t0..t1` are
/// skipped.
#[allow(clippy::too_many_arguments)]
pub fn fill_hash(
    img: &mut Grid<f32>,
    a: Point,
    b: Point,
    (t0, t1): (f64, f64),
    count: usize,
    min_len: f64,
    max_len: f64,
    width: f64,
) {
    let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
    if len == 0.0 {
        return;
    }
    let n = (-(b.1 - a.1) / len, (b.0 - a.0) / len);
    for k in 0..count {
        let f = (k as f64 + 0.5) / count as f64;
        if f < t0 || f > t1 {
            continue;
        }
        let m = lerp(a, b, f);
        let h = (max_len * f).max(min_len) / 2.0;
        fill_segment(img, (m.0 - n.0 * h, m.1 - n.1 * h), (m.0 + n.0 * h, m.1 + n.1 * h), width);
    }
}
