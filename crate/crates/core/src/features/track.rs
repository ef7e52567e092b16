//! Dense point tracking and the fused per-frame descriptor accumulation.

use crate::error::{Error, Result};
use crate::media::VideoClip;

use super::descriptor::{FrameHistograms, TubeAccumulator};
use super::flow::{block_match_flow, FlowField};
use super::plane::Plane;
use super::{ExtractParams, RawDescriptorBundle, TrackedTrajectory};

/// Minimum eigenvalue of the 3×3 structure tensor at `(x, y)`.
fn corner_strength(gx: &Plane, gy: &Plane, x: usize, y: usize) -> f64 {
    let (mut a, mut b, mut c) = (0f64, 0f64, 0f64);
    for dy in -1..=1isize {
        for dx in -1..=1isize {
            let (xx, yy) = (x as isize + dx, y as isize + dy);
            let (u, v) = (gx.clamped(xx, yy) as f64, gy.clamped(xx, yy) as f64);
            a += u * u;
            b += u * v;
            c += v * v;
        }
    }
    let half_tr = 0.5 * (a + c);
    let det_term = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    half_tr - det_term
}

struct Live {
    start: usize,
    points: Vec<(f64, f64)>,
    acc: Option<TubeAccumulator>,
}

/// Frame-level planes and flow fields of a whole clip, for computing the
/// descriptor of individual trajectories.
pub struct ClipMotion {
    planes: Vec<Plane>,
    flows: Vec<FlowField>,
    frame_count: usize,
}

impl ClipMotion {
    pub fn new(clip: &VideoClip, params: &ExtractParams) -> Self {
        let planes: Vec<Plane> = clip
            .frames()
            .iter()
            .map(|f| Plane::from_u8(clip.width(), clip.height(), f))
            .collect();
        let flows = planes.windows(2).map(|w| block_match_flow(&w[0], &w[1], &params.flow)).collect();
        ClipMotion {
            planes,
            flows,
            frame_count: clip.len(),
        }
    }

    pub fn flow(&self, t: usize) -> &FlowField {
        &self.flows[t]
    }
}

fn seed_points(plane: &Plane, live: &[Live], params: &ExtractParams) -> Vec<(f64, f64)> {
    let step = params.sample_step.max(1);
    let (w, h) = (plane.width, plane.height);
    let (cols, rows) = (w.div_ceil(step), h.div_ceil(step));
    let mut covered = vec![false; cols * rows];
    for l in live {
        let &(x, y) = l.points.last().expect("live track has a point");
        let (cx, cy) = ((x / step as f64) as usize, (y / step as f64) as usize);
        if cx < cols && cy < rows {
            covered[cy * cols + cx] = true;
        }
    }
    let (gx, gy) = plane.gradients();
    let mut cands = Vec::new();
    let mut max_strength = 0f64;
    for cy in 0..rows {
        for cx in 0..cols {
            let (x, y) = (cx * step + step / 2, cy * step + step / 2);
            if covered[cy * cols + cx] || x >= w || y >= h {
                continue;
            }
            let s = corner_strength(&gx, &gy, x, y);
            max_strength = max_strength.max(s);
            cands.push((x, y, s));
        }
    }
    let thresh = (params.min_quality * max_strength).max(params.min_corner);
    cands
        .into_iter()
        .filter(|&(_, _, s)| s > thresh)
        .map(|(x, y, _)| (x as f64, y as f64))
        .collect()
}

fn total_displacement(points: &[(f64, f64)]) -> f64 {
    points.windows(2).map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1)).sum()
}

/// Builds the bundle of a finished trajectory from its tube histograms.
pub(crate) fn finish_bundle(
    traj: &TrackedTrajectory,
    acc: TubeAccumulator,
    width: usize,
    height: usize,
    frame_count: usize,
    params: &ExtractParams,
) -> Result<RawDescriptorBundle> {
    let total = total_displacement(&traj.points);
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Internal(format!(
            "trajectory starting at frame {} has zero displacement and should have been pruned",
            traj.start_frame
        )));
    }
    let traj_desc = traj
        .points
        .windows(2)
        .flat_map(|w| [(w[1].0 - w[0].0) / total, (w[1].1 - w[0].1) / total])
        .collect();
    let (hog, hof, mbh) = acc.finish(&params.descriptor);
    let n = traj.points.len() as f64;
    let mx = traj.points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = traj.points.iter().map(|p| p.1).sum::<f64>() / n;
    let frame_index = traj.start_frame + (traj.points.len() - 1) / 2;
    Ok(RawDescriptorBundle {
        traj: traj_desc,
        hog,
        hof,
        mbh,
        x_norm: mx / width as f64,
        y_norm: my / height as f64,
        t_norm: frame_index as f64 / frame_count as f64,
        frame_index,
    })
}

/// Computes the descriptor bundle of one trajectory from precomputed motion.
pub fn compute_descriptors(traj: &TrackedTrajectory, motion: &ClipMotion, params: &ExtractParams) -> Result<RawDescriptorBundle> {
    let len = traj.points.len();
    if len < 2 || traj.start_frame + len > motion.frame_count {
        return Err(Error::InvalidArgument(format!(
            "trajectory frames {}..{} exceed the clip",
            traj.start_frame,
            traj.start_frame + len
        )));
    }
    let (w, h) = (motion.planes[0].width, motion.planes[0].height);
    if traj.points.iter().any(|&(x, y)| !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64)) {
        return Err(Error::InvalidArgument("trajectory leaves the frame".into()));
    }
    let l = len - 1;
    let p = &params.descriptor;
    let mut acc = TubeAccumulator::new(p);
    for k in 0..l {
        let t = traj.start_frame + k;
        let fh = FrameHistograms::new(&motion.planes[t], &motion.flows[t], p);
        let (x, y) = traj.points[k];
        fh.accumulate(&mut acc.hist, x, y, k * p.cells_t / l, p);
    }
    finish_bundle(traj, acc, w, h, motion.frame_count, params)
}

/// Runs the tracker over `clip`. With `describe`, tube histograms are
/// accumulated on the fly and every surviving trajectory carries its bundle.
pub(crate) fn run_tracker(
    clip: &VideoClip,
    params: &ExtractParams,
    describe: bool,
) -> Result<Vec<(TrackedTrajectory, Option<RawDescriptorBundle>)>> {
    let l = params.track_length;
    let t_len = clip.len();
    if l == 0 || t_len < l + 1 {
        return Ok(Vec::new());
    }
    let (w, h) = (clip.width(), clip.height());
    let to_plane = |t: usize| Plane::from_u8(w, h, clip.frame(t));
    let dp = &params.descriptor;
    let mut live: Vec<Live> = Vec::new();
    let mut out = Vec::new();
    let mut current = to_plane(0);
    for t in 0..t_len {
        if t + l < t_len {
            for pt in seed_points(&current, &live, params) {
                live.push(Live {
                    start: t,
                    points: vec![pt],
                    acc: describe.then(|| TubeAccumulator::new(dp)),
                });
            }
        }
        if t + 1 == t_len || live.is_empty() {
            break;
        }
        let next = to_plane(t + 1);
        let flow = block_match_flow(&current, &next, &params.flow);
        if describe {
            let fh = FrameHistograms::new(&current, &flow, dp);
            for tr in &mut live {
                let k = t - tr.start;
                let &(x, y) = tr.points.last().expect("non-empty");
                if let Some(acc) = tr.acc.as_mut() {
                    fh.accumulate(&mut acc.hist, x, y, k * dp.cells_t / l, dp);
                }
            }
        }
        let (max_x, max_y) = ((w - 1) as f64, (h - 1) as f64);
        let mut kept = Vec::with_capacity(live.len());
        for mut tr in live.drain(..) {
            let &(x, y) = tr.points.last().expect("non-empty");
            let (u, v) = flow.at(x, y);
            let (nx, ny) = (x + u, y + v);
            if !(nx >= 0.0 && ny >= 0.0 && nx <= max_x && ny <= max_y) || u.hypot(v) > params.drift_cap {
                continue;
            }
            tr.points.push((nx, ny));
            if tr.points.len() < l + 1 {
                kept.push(tr);
                continue;
            }
            if total_displacement(&tr.points) < params.prune_threshold {
                continue;
            }
            let traj = TrackedTrajectory {
                start_frame: tr.start,
                points: tr.points,
            };
            let bundle = match tr.acc {
                Some(acc) => Some(finish_bundle(&traj, acc, w, h, t_len, params)?),
                None => None,
            };
            out.push((traj, bundle));
        }
        live = kept;
        current = next;
    }
    Ok(out)
}
