//! Graph and label persistence.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! magic     8 bytes  b"SBMCSR\0\x01"
//! n         u64
//! nnz       u64
//! row_ptr   (n + 1) x u64
//! col_idx   nnz x u32
//! ```
//!
//! The edge list holds one `i j` pair per line with `i <= j`, 0-indexed.
//! Label files hold one `1` or `-1` per line.

use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};
use crate::sbm::{GroundTruth, SbmGraph};

pub const MAGIC: &[u8; 8] = b"SBMCSR\0\x01";

pub fn write_binary<W: Write>(graph: &SbmGraph, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(graph.n() as u64).to_le_bytes())?;
    w.write_all(&(graph.nnz() as u64).to_le_bytes())?;
    for &p in graph.row_ptr() {
        w.write_all(&(p as u64).to_le_bytes())?;
    }
    for &c in graph.col_idx() {
        w.write_all(&c.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub fn read_binary<R: Read>(mut r: R) -> Result<SbmGraph> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic bytes, not an SBM CSR file".into()));
    }
    let n = read_u64(&mut r)? as usize;
    let nnz = read_u64(&mut r)? as usize;
    if n > u32::MAX as usize {
        return Err(Error::Format(format!("n = {n} exceeds the u32 index range")));
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        row_ptr.push(read_u64(&mut r)? as usize);
    }
    let mut col_idx = Vec::with_capacity(nnz.min(1 << 28));
    let mut buf = [0u8; 4];
    for _ in 0..nnz {
        r.read_exact(&mut buf)?;
        col_idx.push(u32::from_le_bytes(buf));
    }
    SbmGraph::from_csr(n, row_ptr, col_idx)
}

pub fn write_edge_list<W: Write>(graph: &SbmGraph, mut w: W) -> Result<()> {
    for i in 0..graph.n() {
        for &j in graph.row(i) {
            if j as usize >= i {
                writeln!(w, "{i} {j}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_edge_list<R: BufRead>(n: usize, r: R) -> Result<SbmGraph> {
    let mut edges = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace().map(str::parse::<usize>);
        match (parts.next(), parts.next(), parts.next()) {
            (Some(Ok(i)), Some(Ok(j)), None) => edges.push((i, j)),
            _ => return Err(Error::Format(format!("line {}: expected `i j`, got {line:?}", lineno + 1))),
        }
    }
    SbmGraph::from_edges(n, &edges)
}

pub fn write_labels<W: Write>(labels: &[i8], mut w: W) -> Result<()> {
    for &l in labels {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels<R: BufRead>(r: R) -> Result<Vec<i8>> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        match line.trim() {
            "" => continue,
            "1" | "+1" => out.push(1),
            "-1" => out.push(-1),
            other => return Err(Error::Format(format!("line {}: expected 1 or -1, got {other:?}", lineno + 1))),
        }
    }
    Ok(out)
}

pub fn read_truth<R: BufRead>(r: R) -> Result<GroundTruth> {
    GroundTruth::new(read_labels(r)?)
}
