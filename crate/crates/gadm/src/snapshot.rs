//! Binary state snapshots.
//!
//! Layout (little endian): b"GADM", u32 version, u32 n[3], u8 topology[3]
//! (0 periodic, 1 boundary), u8 fd order, f64 h[3], f64 origin[3], f64 t,
//! then the 33 component arrays in storage order (x³ fastest).
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{FdOrder, Grid, Topology};
use crate::state::{StateField, NCOMP};

pub const MAGIC: &[u8; 4] = b"GADM";
pub const VERSION: u32 = 1;

pub fn write_to(w: &mut impl Write, s: &StateField) -> Result<()> {
    let g = &s.grid;
    let mut buf = Vec::with_capacity(64 + 8 * NCOMP * g.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for a in 0..3 {
        buf.extend_from_slice(&(g.n[a] as u32).to_le_bytes());
    }
    for a in 0..3 {
        buf.push(match g.topology[a] {
            Topology::Periodic => 0,
            Topology::Boundary => 1,
        });
    }
    buf.push(g.fd.as_int() as u8);
    for v in g.h.iter().chain(&g.origin).chain(std::iter::once(&s.t)) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for c in s.components() {
        for v in c {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write(path: &Path, s: &StateField) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_to(&mut f, s)?;
    f.flush()?;
    Ok(())
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.0.len() < n {
            return Err(Error::Snapshot("truncated file".into()));
        }
        let (a, b) = self.0.split_at(n);
        self.0 = b;
        Ok(a)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_from(r: &mut impl Read) -> Result<StateField> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut c = Cursor(&bytes);
    if c.take(4)? != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let n = [c.u32()? as usize, c.u32()? as usize, c.u32()? as usize];
    let tb = c.take(4)?.to_vec();
    let mut topology = [Topology::Periodic; 3];
    for a in 0..3 {
        topology[a] = match tb[a] {
            0 => Topology::Periodic,
            1 => Topology::Boundary,
            x => return Err(Error::Snapshot(format!("bad topology tag {x}"))),
        };
    }
    let fd = match tb[3] {
        2 => FdOrder::Second,
        4 => FdOrder::Fourth,
        x => return Err(Error::Snapshot(format!("bad stencil order {x}"))),
    };
    let h = [c.f64()?, c.f64()?, c.f64()?];
    let origin = [c.f64()?, c.f64()?, c.f64()?];
    let t = c.f64()?;
    let mut grid = Grid::new(n, h, topology, fd).map_err(|e| Error::Snapshot(e.to_string()))?;
    grid.origin = origin;
    let len = grid.len();
    if c.0.len() != 8 * NCOMP * len {
        return Err(Error::Snapshot(format!("expected {} data bytes, found {}", 8 * NCOMP * len, c.0.len())));
    }
    let comps = (0..NCOMP).map(|_| (0..len).map(|_| c.f64().unwrap()).collect()).collect();
    StateField::from_components(&grid, t, comps)
}

pub fn read(path: &Path) -> Result<StateField> {
    read_from(&mut std::io::BufReader::new(std::fs::File::open(path)?))
}
