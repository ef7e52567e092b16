//! Space-time tube descriptors around a trajectory.
//!
//! Every frame of a track contributes a patch centred on the track point,
//! split into `cells_xy × cells_xy` spatial cells; frames are pooled into
//! `cells_t` temporal cells. Per cell we keep orientation histograms of the
//! image gradient (HOG), of the flow (HOF, plus a zero-motion bin) and of the
//! gradients of the horizontal and vertical flow components (MBH).

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::flow::FlowField;
use super::plane::{Integral, Plane};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescriptorParams {
    pub patch_size: usize,
    pub cells_xy: usize,
    pub cells_t: usize,
    pub bins: usize,
    /// Flow magnitudes below this go to the HOF zero bin.
    pub zero_flow: f64,
}

impl Default for DescriptorParams {
    fn default() -> Self {
        DescriptorParams {
            patch_size: 16,
            cells_xy: 2,
            cells_t: 3,
            bins: 8,
            zero_flow: 0.25,
        }
    }
}

impl DescriptorParams {
    pub fn cells(&self) -> usize {
        self.cells_xy * self.cells_xy * self.cells_t
    }
    pub fn hog_dim(&self) -> usize {
        self.cells() * self.bins
    }
    pub fn hof_dim(&self) -> usize {
        self.cells() * (self.bins + 1)
    }
    pub fn mbh_dim(&self) -> usize {
        2 * self.cells() * self.bins
    }
    fn hist_len(&self) -> usize {
        self.hog_dim() + self.hof_dim() + self.mbh_dim()
    }
}

/// L1-normalize then take element-wise square roots. All-zero input stays zero.
pub fn root_sift(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x = (*x / s).sqrt());
    }
}

/// Adds `weight` to the two orientation bins nearest to `angle`.
#[inline]
fn vote(bins: &mut [f64], n: usize, dx: f64, dy: f64, weight: f64) {
    let mut a = dy.atan2(dx);
    if a < 0.0 {
        a += TAU;
    }
    let pos = a / TAU * n as f64;
    let lo = pos.floor();
    let frac = pos - lo;
    let lo = (lo as usize) % n;
    bins[lo] += weight * (1.0 - frac);
    bins[(lo + 1) % n] += weight * frac;
}

/// Per-bin integral images for one frame.
pub(crate) struct FrameHistograms {
    width: usize,
    height: usize,
    hog: Vec<Integral>,
    hof: Vec<Integral>,
    mbhx: Vec<Integral>,
    mbhy: Vec<Integral>,
}

fn integrals(w: usize, h: usize, nb: usize, fill: impl Fn(usize, &mut [f64])) -> Vec<Integral> {
    let mut per_px = vec![0f64; w * h * nb];
    for i in 0..w * h {
        fill(i, &mut per_px[i * nb..(i + 1) * nb]);
    }
    (0..nb).map(|b| Integral::new(w, h, |i| per_px[i * nb + b])).collect()
}

impl FrameHistograms {
    pub fn new(image: &Plane, flow: &FlowField, p: &DescriptorParams) -> Self {
        let (w, h) = (image.width, image.height);
        let nb = p.bins;
        let orient = |gx: &Plane, gy: &Plane| {
            integrals(w, h, nb, |i, out| {
                let (dx, dy) = (gx.data[i] as f64, gy.data[i] as f64);
                let m = dx.hypot(dy);
                if m > 0.0 {
                    vote(out, nb, dx, dy, m);
                }
            })
        };
        let (ix, iy) = image.gradients();
        let (ux, uy) = flow.u.gradients();
        let (vx, vy) = flow.v.gradients();
        let zero = p.zero_flow;
        let hof = integrals(w, h, nb + 1, |i, out| {
            let (u, v) = (flow.u.data[i] as f64, flow.v.data[i] as f64);
            let m = u.hypot(v);
            if m < zero {
                out[nb] += 1.0;
            } else {
                vote(&mut out[..nb], nb, u, v, m);
            }
        });
        FrameHistograms {
            width: w,
            height: h,
            hog: orient(&ix, &iy),
            hof,
            mbhx: orient(&ux, &uy),
            mbhy: orient(&vx, &vy),
        }
    }

    /// Adds this frame's patch histograms around `(x, y)` into `acc`
    /// (layout: hog | hof | mbhx | mbhy, each `[t_cell][cy][cx][bin]`).
    pub fn accumulate(&self, acc: &mut [f64], x: f64, y: f64, t_cell: usize, p: &DescriptorParams) {
        let n = p.cells_xy;
        let cell = (p.patch_size / n).max(1) as isize;
        let x0 = x.round() as isize - (cell * n as isize) / 2;
        let y0 = y.round() as isize - (cell * n as isize) / 2;
        let clamp_x = |v: isize| v.clamp(0, self.width as isize) as usize;
        let clamp_y = |v: isize| v.clamp(0, self.height as isize) as usize;
        let spatial = n * n;
        let blocks: [(&Vec<Integral>, usize); 4] = [
            (&self.hog, 0),
            (&self.hof, p.hog_dim()),
            (&self.mbhx, p.hog_dim() + p.hof_dim()),
            (&self.mbhy, p.hog_dim() + p.hof_dim() + p.hog_dim()),
        ];
        for cy in 0..n {
            for cx in 0..n {
                let rx0 = clamp_x(x0 + cx as isize * cell);
                let rx1 = clamp_x(x0 + (cx as isize + 1) * cell);
                let ry0 = clamp_y(y0 + cy as isize * cell);
                let ry1 = clamp_y(y0 + (cy as isize + 1) * cell);
                if rx0 >= rx1 || ry0 >= ry1 {
                    continue;
                }
                let c = t_cell * spatial + cy * n + cx;
                for (hists, offset) in blocks {
                    let nb = hists.len();
                    for (b, ii) in hists.iter().enumerate() {
                        // Integral-image differences can round slightly below zero.
                        acc[offset + c * nb + b] += ii.rect(rx0, ry0, rx1, ry1).max(0.0);
                    }
                }
            }
        }
    }
}

/// Histogram accumulator carried by a live track.
#[derive(Debug, Clone)]
pub(crate) struct TubeAccumulator {
    pub hist: Vec<f64>,
}

impl TubeAccumulator {
    pub fn new(p: &DescriptorParams) -> Self {
        TubeAccumulator {
            hist: vec![0.0; p.hist_len()],
        }
    }

    /// Splits into RootSIFT-normalized `(hog, hof, mbh)`.
    pub fn finish(self, p: &DescriptorParams) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut hist = self.hist;
        let mbh = hist.split_off(p.hog_dim() + p.hof_dim());
        let hof = hist.split_off(p.hog_dim());
        let mut out = (hist, hof, mbh);
        root_sift(&mut out.0);
        root_sift(&mut out.1);
        root_sift(&mut out.2);
        out
    }
}
