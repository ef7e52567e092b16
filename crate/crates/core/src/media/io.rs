use std::fs;
use std::path::Path;

use crate::binio::{self, Reader};
use crate::error::{Error, Result};

use super::VideoClip;

pub const CLIP_MAGIC: &[u8; 4] = b"VCLP";

/// Loads a clip from a packed `VCLP` container or from a directory of binary
/// PGM frames (lexicographic filename order is temporal order).
pub fn load_frame_sequence(path: &Path) -> Result<VideoClip> {
    if !path.exists() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    if path.is_dir() {
        load_pgm_dir(path)
    } else {
        read_clip_container(path)
    }
}

fn load_pgm_dir(dir: &Path) -> Result<VideoClip> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    files.sort();
    let id = dir.display().to_string();
    if files.is_empty() {
        return Err(Error::EmptyClip(id));
    }
    let mut size = None;
    let mut frames = Vec::with_capacity(files.len());
    for (index, f) in files.iter().enumerate() {
        let img = image::open(f)
            .map_err(|e| Error::format("pgm", f.display().to_string(), e.to_string()))?
            .into_luma8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        match size {
            None => size = Some((w, h)),
            Some((want_w, want_h)) if (want_w, want_h) != (w, h) => {
                return Err(Error::DimensionMismatch {
                    index,
                    want_w,
                    want_h,
                    got_w: w,
                    got_h: h,
                })
            }
            _ => {}
        }
        frames.push(img.into_raw());
    }
    let (w, h) = size.expect("at least one frame");
    VideoClip::new(w, h, frames, id)
}

pub fn read_clip_container(path: &Path) -> Result<VideoClip> {
    let bytes = binio::read_file(path)?;
    let origin = path.display().to_string();
    let mut r = Reader::new(&bytes, "clip", origin.clone());
    r.magic(CLIP_MAGIC)?;
    let w = r.len()?;
    let h = r.len()?;
    let n = r.len()?;
    if n == 0 {
        return Err(Error::EmptyClip(origin));
    }
    let plane = w.checked_mul(h).ok_or_else(|| r.fail("frame size overflows"))?;
    if r.remaining() != plane.saturating_mul(n) {
        return Err(r.fail(format!("expected {} payload bytes, found {}", plane.saturating_mul(n), r.remaining())));
    }
    let mut frames = Vec::with_capacity(n);
    for _ in 0..n {
        frames.push(r.bytes(plane)?);
    }
    VideoClip::new(w, h, frames, origin)
}

pub fn write_clip_container(clip: &VideoClip, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(16 + clip.len() * clip.width() * clip.height());
    out.extend_from_slice(CLIP_MAGIC);
    binio::put_len(&mut out, clip.width())?;
    binio::put_len(&mut out, clip.height())?;
    binio::put_len(&mut out, clip.len())?;
    for f in clip.frames() {
        out.extend_from_slice(f);
    }
    binio::write_atomic(path, &out)
}

/// Writes every frame as `frame_00000.pgm`, … into `dir`.
pub fn write_pgm_dir(clip: &VideoClip, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (t, f) in clip.frames().iter().enumerate() {
        let mut out = format!("P5\n{} {}\n255\n", clip.width(), clip.height()).into_bytes();
        out.extend_from_slice(f);
        binio::write_atomic(&dir.join(format!("frame_{t:05}.pgm")), &out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_pgm(path: &Path, w: usize, h: usize, fill: u8) {
        let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
        out.extend(std::iter::repeat_n(fill, w * h));
        fs::write(path, out).unwrap();
    }

    #[test]
    fn reads_pgm_directory_in_name_order() {
        let dir = tempfile::tempdir().unwrap();
        for (name, fill) in [("b.pgm", 20u8), ("a.pgm", 10), ("c.pgm", 30)] {
            write_pgm(&dir.path().join(name), 32, 32, fill);
        }
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let clip = load_frame_sequence(dir.path()).unwrap();
        assert_eq!((clip.width(), clip.height(), clip.len()), (32, 32, 3));
        assert_eq!([clip.pixel(0, 0, 0), clip.pixel(1, 5, 5), clip.pixel(2, 31, 31)], [10, 20, 30]);
    }

    #[test]
    fn pgm_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        write_pgm(&dir.path().join("0.pgm"), 32, 32, 0);
        write_pgm(&dir.path().join("1.pgm"), 16, 16, 0);
        assert!(matches!(
            load_frame_sequence(dir.path()),
            Err(Error::DimensionMismatch { index: 1, .. })
        ));
    }

    #[test]
    fn empty_and_missing() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_frame_sequence(dir.path()), Err(Error::EmptyClip(_))));
        assert!(matches!(
            load_frame_sequence(&dir.path().join("nope")),
            Err(Error::MissingPath(_))
        ));
    }

    #[test]
    fn container_layout_is_bit_exact() {
        let clip = VideoClip::new(3, 2, vec![vec![1, 2, 3, 4, 5, 6], vec![7, 8, 9, 10, 11, 12]], "x").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.vclp");
        write_clip_container(&clip, &p).unwrap();
        let bytes = fs::read(&p).unwrap();
        let mut want = b"VCLP".to_vec();
        for v in [3u32, 2, 2] {
            want.extend_from_slice(&v.to_le_bytes());
        }
        want.extend(1..=12u8);
        assert_eq!(bytes, want);
        let back = load_frame_sequence(&p).unwrap();
        assert_eq!(back.frames(), clip.frames());

        fs::write(&p, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(load_frame_sequence(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn pgm_writer_round_trips() {
        let clip = VideoClip::new(4, 3, vec![(0..12).collect(), (12..24).collect()], "w").unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_pgm_dir(&clip, dir.path()).unwrap();
        assert_eq!(load_frame_sequence(dir.path()).unwrap().frames(), clip.frames());
    }
}
