//! Little-endian helpers shared by the binary artifact formats.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

/// Writes `bytes` to `path` through a temporary sibling file and a rename,
/// so readers never observe a partially written artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.write_u32::<LittleEndian>(v).expect("vec write");
}

pub(crate) fn put_f32(out: &mut Vec<u8>, v: f32) {
    out.write_f32::<LittleEndian>(v).expect("vec write");
}

pub(crate) fn put_name(out: &mut Vec<u8>, name: &str) {
    put_u32(out, name.len() as u32);
    out.extend_from_slice(name.as_bytes());
}

pub(crate) fn put_len(out: &mut Vec<u8>, n: usize) -> Result<()> {
    let v = u32::try_from(n).map_err(|_| Error::InvalidArgument(format!("length {n} exceeds u32")))?;
    put_u32(out, v);
    Ok(())
}

/// Cursor over an in-memory artifact that reports truncation as a format error.
pub(crate) struct Reader<'a> {
    inner: io::Cursor<&'a [u8]>,
    kind: &'static str,
    origin: String,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8], kind: &'static str, origin: impl Into<String>) -> Self {
        Reader {
            inner: io::Cursor::new(bytes),
            kind,
            origin: origin.into(),
        }
    }

    pub fn fail(&self, detail: impl Into<String>) -> Error {
        Error::format(self.kind, self.origin.clone(), detail)
    }

    fn truncated(&self, _: io::Error) -> Error {
        self.fail(format!("truncated at byte {}", self.inner.position()))
    }

    pub fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let mut buf = [0u8; 4];
        self.inner.read_exact(&mut buf).map_err(|e| self.truncated(e))?;
        if &buf != magic {
            return Err(self.fail(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&buf),
                String::from_utf8_lossy(magic)
            )));
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8> {
        self.inner.read_u8().map_err(|e| self.truncated(e))
    }

    pub fn u32(&mut self) -> Result<u32> {
        self.inner.read_u32::<LittleEndian>().map_err(|e| self.truncated(e))
    }

    pub fn len(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    pub fn f32(&mut self) -> Result<f32> {
        self.inner.read_f32::<LittleEndian>().map_err(|e| self.truncated(e))
    }

    /// Reads `n` f32 values, checking first that enough bytes remain so a
    /// corrupt length cannot trigger a huge allocation.
    pub fn f32_vec(&mut self, n: usize) -> Result<Vec<f32>> {
        if self.remaining() < n.saturating_mul(4) {
            return Err(self.fail(format!("expected {n} floats, {} bytes left", self.remaining())));
        }
        let mut out = vec![0f32; n];
        self.inner
            .read_f32_into::<LittleEndian>(&mut out)
            .map_err(|e| self.truncated(e))?;
        Ok(out)
    }

    pub fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        if self.remaining() < n {
            return Err(self.fail(format!("expected {n} bytes, {} left", self.remaining())));
        }
        let mut out = vec![0u8; n];
        self.inner.read_exact(&mut out).map_err(|e| self.truncated(e))?;
        Ok(out)
    }

    pub fn name(&mut self) -> Result<String> {
        let n = self.len()?;
        let raw = self.bytes(n)?;
        String::from_utf8(raw).map_err(|_| self.fail("name is not UTF-8"))
    }

    pub fn remaining(&self) -> usize {
        self.inner.get_ref().len() - self.inner.position() as usize
    }

    pub fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(self.fail(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}
