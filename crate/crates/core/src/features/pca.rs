//! Per-channel principal component analysis to half dimension.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::binio::{self, put_f32, put_len, put_name, Reader};
use crate::error::{Error, Result};

use super::feature_set::Channel;

pub const PCA_MAGIC: &[u8; 4] = b"TPCA";

/// One channel's projection. `proj` is `in_dim × out_dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaChannel {
    pub name: String,
    pub in_dim: usize,
    pub out_dim: usize,
    pub mean: Vec<f32>,
    pub proj: Vec<f32>,
    /// Eigenvalues of the retained components, decreasing.
    pub explained: Vec<f32>,
    /// Sum of all eigenvalues.
    pub total_variance: f32,
    /// Set when the data had no variance and the axes are arbitrary.
    pub degenerate: bool,
}

impl PcaChannel {
    pub fn explained_fraction(&self) -> f64 {
        if self.total_variance <= 0.0 {
            return 0.0;
        }
        self.explained.iter().map(|&v| v as f64).sum::<f64>() / self.total_variance as f64
    }

    /// `projᵀ (x − mean)` in f64.
    pub fn project_row(&self, x: &[f32], out: &mut Vec<f32>) {
        let centred: Vec<f64> = x.iter().zip(&self.mean).map(|(&a, &m)| a as f64 - m as f64).collect();
        for j in 0..self.out_dim {
            let mut s = 0f64;
            for (i, &c) in centred.iter().enumerate() {
                s += c * self.proj[i * self.out_dim + j] as f64;
            }
            out.push(s as f32);
        }
    }

    /// `mean + proj y`.
    pub fn back_project(&self, y: &[f32]) -> Vec<f64> {
        (0..self.in_dim)
            .map(|i| {
                let row = &self.proj[i * self.out_dim..(i + 1) * self.out_dim];
                self.mean[i] as f64 + row.iter().zip(y).map(|(&p, &v)| p as f64 * v as f64).sum::<f64>()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PcaModel {
    pub channels: Vec<PcaChannel>,
}

/// Fits one channel from a `rows × dim` sample matrix.
pub fn fit_pca_channel(samples: &Channel) -> Result<PcaChannel> {
    let (n, d) = (samples.rows(), samples.dim);
    if n < d {
        return Err(Error::InsufficientSamples {
            channel: samples.name.clone(),
            detail: format!("{n} samples for dimension {d}"),
        });
    }
    if samples.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("pca samples"));
    }
    let mut mean = vec![0f64; d];
    for i in 0..n {
        for (m, &v) in mean.iter_mut().zip(samples.row(i)) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centred = vec![0f64; d];
    for i in 0..n {
        for ((c, &v), &m) in centred.iter_mut().zip(samples.row(i)).zip(&mean) {
            *c = v as f64 - m;
        }
        for a in 0..d {
            let ca = centred[a];
            if ca == 0.0 {
                continue;
            }
            for b in a..d {
                cov[(a, b)] += ca * centred[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / n as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let k = d / 2;
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let degenerate = total <= 0.0;
    let mut proj = vec![0f32; d * k];
    let mut explained = Vec::with_capacity(k);
    for (j, &c) in order.iter().take(k).enumerate() {
        let col = eig.eigenvectors.column(c);
        let mut pivot = 0;
        for i in 1..d {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            proj[i * k + j] = (sign * col[i]) as f32;
        }
        explained.push(eig.eigenvalues[c].max(0.0) as f32);
    }
    Ok(PcaChannel {
        name: samples.name.clone(),
        in_dim: d,
        out_dim: k,
        mean: mean.iter().map(|&m| m as f32).collect(),
        proj,
        explained,
        total_variance: total as f32,
        degenerate,
    })
}

pub fn fit_pca(samples: &[Channel]) -> Result<PcaModel> {
    Ok(PcaModel {
        channels: samples.iter().map(fit_pca_channel).collect::<Result<_>>()?,
    })
}

impl PcaModel {
    pub fn channel(&self, name: &str) -> Option<&PcaChannel> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(PCA_MAGIC);
        put_len(&mut out, self.channels.len())?;
        for c in &self.channels {
            put_name(&mut out, &c.name);
            put_len(&mut out, c.in_dim)?;
            put_len(&mut out, c.out_dim)?;
            out.push(u8::from(c.degenerate));
            put_f32(&mut out, c.total_variance);
            for &v in c.mean.iter().chain(&c.proj).chain(&c.explained) {
                put_f32(&mut out, v);
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], origin: &str) -> Result<PcaModel> {
        let mut r = Reader::new(bytes, "pca model", origin);
        r.magic(PCA_MAGIC)?;
        let n = r.len()?;
        let mut channels = Vec::new();
        for _ in 0..n {
            let name = r.name()?;
            let in_dim = r.len()?;
            let out_dim = r.len()?;
            if out_dim > in_dim {
                return Err(r.fail(format!("channel {name}: output dimension exceeds input")));
            }
            let degenerate = r.u8()? != 0;
            let total_variance = r.f32()?;
            let mean = r.f32_vec(in_dim)?;
            let proj = r.f32_vec(in_dim.saturating_mul(out_dim))?;
            let explained = r.f32_vec(out_dim)?;
            channels.push(PcaChannel {
                name,
                in_dim,
                out_dim,
                mean,
                proj,
                explained,
                total_variance,
                degenerate,
            });
        }
        r.finish()?;
        Ok(PcaModel { channels })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        binio::write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<PcaModel> {
        let bytes = binio::read_file(path)?;
        PcaModel::from_bytes(&bytes, &path.display().to_string())
    }
}
