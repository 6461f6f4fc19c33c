//! Little-endian index snapshot:
//!
//! ```text
//! "ADFI" | u32 version=1 | u64 n_points | u32 nlist
//! centroids: nlist x 3 f64
//! lists:     nlist x (u64 len, len x u64 index)
//! points:    n_points x 3 f64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::IvfIndex;
use crate::error::{AdfError, Result};
use crate::geo::EcefCoord;

const MAGIC: &[u8; 4] = b"ADFI";
const VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(idx: &IvfIndex, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(idx.len() as u64).to_le_bytes())?;
    w.write_all(&(idx.nlist() as u32).to_le_bytes())?;
    for c in idx.centroids() {
        write_coord(&mut w, c)?;
    }
    for l in idx.lists() {
        w.write_all(&(l.len() as u64).to_le_bytes())?;
        for &i in l {
            w.write_all(&(i as u64).to_le_bytes())?;
        }
    }
    for p in idx.points() {
        write_coord(&mut w, p)?;
    }
    w.flush()?;
    Ok(())
}

fn write_coord<W: Write>(w: &mut W, c: &EcefCoord) -> Result<()> {
    w.write_all(&c.x.to_le_bytes())?;
    w.write_all(&c.y.to_le_bytes())?;
    w.write_all(&c.z.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_coord<R: Read>(r: &mut R) -> Result<EcefCoord> {
    let mut b = [0u8; 24];
    r.read_exact(&mut b)?;
    let f = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().expect("8 bytes"));
    Ok(EcefCoord::new(f(0), f(8), f(16)))
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<IvfIndex> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(AdfError::Snapshot("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(AdfError::Snapshot(format!("unsupported version {version}")));
    }
    let n = read_u64(&mut r)? as usize;
    let nlist = read_u32(&mut r)? as usize;
    if nlist == 0 {
        return Err(AdfError::Snapshot("nlist is zero".into()));
    }
    let centroids = (0..nlist)
        .map(|_| read_coord(&mut r))
        .collect::<Result<Vec<_>>>()?;
    let mut seen = vec![false; n];
    let mut lists = Vec::with_capacity(nlist);
    for _ in 0..nlist {
        let len = read_u64(&mut r)? as usize;
        if len > n {
            return Err(AdfError::Snapshot("list longer than point count".into()));
        }
        let mut l = Vec::with_capacity(len);
        for _ in 0..len {
            let i = read_u64(&mut r)? as usize;
            if i >= n || seen[i] {
                return Err(AdfError::Snapshot(format!("index {i} invalid or repeated")));
            }
            seen[i] = true;
            l.push(i);
        }
        lists.push(l);
    }
    if !seen.iter().all(|&s| s) {
        return Err(AdfError::Snapshot("lists do not cover every point".into()));
    }
    let points = (0..n)
        .map(|_| read_coord(&mut r))
        .collect::<Result<Vec<_>>>()?;
    if centroids.iter().chain(&points).any(|p| !p.is_finite()) {
        return Err(AdfError::Snapshot("non-finite coordinate".into()));
    }
    Ok(IvfIndex::from_parts(centroids, lists, points))
}

pub fn save_snapshot(idx: &IvfIndex, path: impl AsRef<Path>) -> Result<()> {
    write_snapshot(idx, BufWriter::new(File::create(path)?))
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<IvfIndex> {
    read_snapshot(BufReader::new(File::open(path)?))
}
