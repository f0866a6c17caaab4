//! Little-endian primitives for the crate's binary file formats.

use std::io::{self, Read, Write};

pub struct LeWriter<W: Write> {
    inner: W,
}

impl<W: Write> LeWriter<W> {
    pub fn new(inner: W) -> Self {
        LeWriter { inner }
    }

    pub fn bytes(&mut self, b: &[u8]) -> io::Result<()> {
        self.inner.write_all(b)
    }

    pub fn u32(&mut self, v: u32) -> io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }

    pub fn u64(&mut self, v: u64) -> io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }

    pub fn f32(&mut self, v: f32) -> io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }

    pub fn f32s(&mut self, vs: &[f32]) -> io::Result<()> {
        let mut buf = Vec::with_capacity(vs.len() * 4);
        for v in vs {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.inner.write_all(&buf)
    }

    /// Length-prefixed `f32` slice.
    pub fn f32_vec(&mut self, vs: &[f32]) -> io::Result<()> {
        self.u64(vs.len() as u64)?;
        self.f32s(vs)
    }

    pub fn u32_vec(&mut self, vs: &[u32]) -> io::Result<()> {
        self.u64(vs.len() as u64)?;
        let mut buf = Vec::with_capacity(vs.len() * 4);
        for v in vs {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.inner.write_all(&buf)
    }

    pub fn str(&mut self, s: &str) -> io::Result<()> {
        self.u32(s.len() as u32)?;
        self.inner.write_all(s.as_bytes())
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

pub struct LeReader<R: Read> {
    inner: R,
}

/// Upper bound on length prefixes, so a corrupt header cannot request a
/// multi-gigabyte allocation.
const MAX_LEN: u64 = 1 << 28;

impl<R: Read> LeReader<R> {
    pub fn new(inner: R) -> Self {
        LeReader { inner }
    }

    pub fn bytes<const N: usize>(&mut self) -> io::Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b)?;
        Ok(b)
    }

    pub fn u32(&mut self) -> io::Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    pub fn u64(&mut self) -> io::Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    pub fn f32(&mut self) -> io::Result<f32> {
        Ok(f32::from_le_bytes(self.bytes()?))
    }

    pub fn f32s(&mut self, n: usize) -> io::Result<Vec<f32>> {
        let mut buf = vec![0u8; n * 4];
        self.inner.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    fn len(&mut self) -> io::Result<usize> {
        let n = self.u64()?;
        if n > MAX_LEN {
            return Err(io::Error::new(io::ErrorKind::InvalidData, format!("length {n} too large")));
        }
        Ok(n as usize)
    }

    pub fn f32_vec(&mut self) -> io::Result<Vec<f32>> {
        let n = self.len()?;
        self.f32s(n)
    }

    pub fn u32_vec(&mut self) -> io::Result<Vec<u32>> {
        let n = self.len()?;
        let mut buf = vec![0u8; n * 4];
        self.inner.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    pub fn str(&mut self) -> io::Result<String> {
        let n = self.u32()? as u64;
        if n > MAX_LEN {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "string too long"));
        }
        let mut buf = vec![0u8; n as usize];
        self.inner.read_exact(&mut buf)?;
        String::from_utf8(buf).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    /// True if the underlying reader has no bytes left.
    pub fn at_end(&mut self) -> io::Result<bool> {
        let mut b = [0u8; 1];
        Ok(self.inner.read(&mut b)? == 0)
    }
}
