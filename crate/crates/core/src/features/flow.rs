//! Dense optical flow by coarse-to-fine block matching.
//!
//! At every pyramid level each pixel searches integer displacements around
//! its upsampled coarser estimate, scoring candidates by the sum of squared
//! differences over a square patch. The finest level adds a sub-pixel offset
//! from one least-squares step on the linearized patch SSD, and the result
//! is 3×3 median filtered.

use serde::{Deserialize, Serialize};

use super::plane::Plane;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowParams {
    /// Maximum pyramid levels (including full resolution).
    pub levels: usize,
    /// Smallest side a pyramid level may have.
    pub min_level_size: usize,
    pub coarse_radius: usize,
    pub fine_radius: usize,
    pub patch_radius: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            levels: 3,
            min_level_size: 12,
            coarse_radius: 2,
            fine_radius: 1,
            patch_radius: 2,
        }
    }
}

/// Per-pixel displacement from one frame to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub u: Plane,
    pub v: Plane,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField {
            u: Plane::new(width, height),
            v: Plane::new(width, height),
        }
    }

    pub fn width(&self) -> usize {
        self.u.width
    }

    pub fn height(&self) -> usize {
        self.u.height
    }

    pub fn at(&self, x: f64, y: f64) -> (f64, f64) {
        (self.u.bilinear(x, y), self.v.bilinear(x, y))
    }
}

fn candidates(radius: isize) -> Vec<(isize, isize)> {
    let mut c: Vec<(isize, isize)> = (-radius..=radius)
        .flat_map(|dy| (-radius..=radius).map(move |dx| (dx, dy)))
        .collect();
    // Nearest displacements first so exact ties resolve to the smallest motion.
    c.sort_by_key(|&(dx, dy)| (dx * dx + dy * dy, dy, dx));
    c
}

/// One level of integer block matching: every pixel scores the candidates
/// `base + d`, `|d| ≤ radius`, by the SSD over its patch.
fn match_level(prev: &Plane, next: &Plane, base: &[(i32, i32)], radius: usize, patch: usize) -> Vec<(i32, i32)> {
    let (w, h) = (prev.width, prev.height);
    let cands = candidates(radius as isize);
    let p = patch as isize;
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        let (y0, y1) = ((y - p).max(0), (y + p).min(h as isize - 1));
        for x in 0..w as isize {
            let (x0, x1) = ((x - p).max(0), (x + p).min(w as isize - 1));
            let (bu, bv) = base[y as usize * w + x as usize];
            let mut best = (f32::INFINITY, (0, 0));
            for &(dx, dy) in &cands {
                let (u, v) = (bu as isize + dx, bv as isize + dy);
                let mut s = 0f32;
                for yy in y0..=y1 {
                    let row = &prev.data[yy as usize * w..(yy as usize + 1) * w];
                    for xx in x0..=x1 {
                        let d = next.clamped(xx + u, yy + v) - row[xx as usize];
                        s += d * d;
                    }
                }
                if s < best.0 {
                    best = (s, (u as i32, v as i32));
                }
            }
            out.push(best.1);
        }
    }
    out
}

/// Sub-pixel offsets minimizing the linearized patch SSD around each pixel's
/// integer flow: one least-squares step solving the 2×2 normal equations.
fn refine(prev: &Plane, next: &Plane, flow: &[(i32, i32)], patch: usize) -> Vec<(f32, f32)> {
    let (w, h) = (prev.width, prev.height);
    let (pgx, pgy) = prev.gradients();
    let (ngx, ngy) = next.gradients();
    let p = patch as isize;
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        let (y0, y1) = ((y - p).max(0), (y + p).min(h as isize - 1));
        for x in 0..w as isize {
            let (x0, x1) = ((x - p).max(0), (x + p).min(w as isize - 1));
            let (u, v) = flow[y as usize * w + x as usize];
            let (u, v) = (u as isize, v as isize);
            let (mut a, mut b, mut c, mut ex, mut ey) = (0f64, 0f64, 0f64, 0f64, 0f64);
            for yy in y0..=y1 {
                for xx in x0..=x1 {
                    let i = yy as usize * w + xx as usize;
                    let gx = 0.5 * (pgx.data[i] + ngx.clamped(xx + u, yy + v)) as f64;
                    let gy = 0.5 * (pgy.data[i] + ngy.clamped(xx + u, yy + v)) as f64;
                    let it = (next.clamped(xx + u, yy + v) - prev.data[i]) as f64;
                    a += gx * gx;
                    b += gx * gy;
                    c += gy * gy;
                    ex += gx * it;
                    ey += gy * it;
                }
            }
            let det = a * c - b * b;
            if det <= 1e-9 * (a + c).powi(2).max(1e-12) {
                out.push((0.0, 0.0));
                continue;
            }
            let du = -(c * ex - b * ey) / det;
            let dv = -(a * ey - b * ex) / det;
            out.push((du.clamp(-0.5, 0.5) as f32, dv.clamp(-0.5, 0.5) as f32));
        }
    }
    out
}

/// Dense flow mapping `prev` onto `next`: a pixel at `(x, y)` in `prev`
/// appears near `(x + u, y + v)` in `next`.
pub fn block_match_flow(prev: &Plane, next: &Plane, params: &FlowParams) -> FlowField {
    let mut pyr = vec![(prev.clone(), next.clone())];
    while pyr.len() < params.levels.max(1) {
        let (a, b) = pyr.last().expect("non-empty");
        if a.width / 2 < params.min_level_size || a.height / 2 < params.min_level_size {
            break;
        }
        let next_level = (a.half(), b.half());
        pyr.push(next_level);
    }
    let mut flow: Vec<(i32, i32)> = Vec::new();
    for level in (0..pyr.len()).rev() {
        let (a, b) = &pyr[level];
        let base: Vec<(i32, i32)> = if level + 1 == pyr.len() {
            vec![(0, 0); a.width * a.height]
        } else {
            let cw = pyr[level + 1].0.width;
            let ch = pyr[level + 1].0.height;
            (0..a.height)
                .flat_map(|y| (0..a.width).map(move |x| (x, y)))
                .map(|(x, y)| {
                    let (cu, cv) = flow[(y / 2).min(ch - 1) * cw + (x / 2).min(cw - 1)];
                    (2 * cu, 2 * cv)
                })
                .collect()
        };
        let radius = if level + 1 == pyr.len() { params.coarse_radius } else { params.fine_radius };
        flow = match_level(a, b, &base, radius, params.patch_radius);
    }
    let (w, h) = (prev.width, prev.height);
    let frac = refine(prev, next, &flow, params.patch_radius);
    let mut field = FlowField::zeros(w, h);
    for i in 0..w * h {
        field.u.data[i] = flow[i].0 as f32 + frac[i].0;
        field.v.data[i] = flow[i].1 as f32 + frac[i].1;
    }
    FlowField {
        u: field.u.median3(),
        v: field.v.median3(),
    }
}
