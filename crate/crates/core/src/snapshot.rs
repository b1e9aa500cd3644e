//! Binary field snapshots.
//!
//! Layout (all little-endian):
//!
//! ```text
//! 0   8 bytes  magic "NSRFLD1\0"
//! 8   u64      n1
//! 16  u64      n2
//! 24  f64      L
//! 32  u64      component count c
//! 40  f64 x c*n1*n2  samples, component planes in order, each row-major
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, PeriodicGrid, ScalarField, TensorField, VectorField};

pub const MAGIC: &[u8; 8] = b"NSRFLD1\0";

pub fn write_snapshot<F: Field + ?Sized, W: Write>(f: &F, mut w: W) -> Result<()> {
    let g = f.grid();
    w.write_all(MAGIC)?;
    w.write_all(&(g.n1() as u64).to_le_bytes())?;
    w.write_all(&(g.n2() as u64).to_le_bytes())?;
    w.write_all(&g.length().to_le_bytes())?;
    w.write_all(&(f.components().len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * g.len());
    for c in f.components() {
        buf.clear();
        for v in c {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn snapshot_bytes<F: Field + ?Sized>(f: &F) -> Vec<u8> {
    let mut out = Vec::new();
    write_snapshot(f, &mut out).expect("writing to a Vec cannot fail");
    out
}

/// A decoded snapshot whose component count is not yet interpreted.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub grid: PeriodicGrid,
    pub comps: Vec<Vec<f64>>,
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| Error::Snapshot(format!("truncated header: {e}")))?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<Snapshot> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| Error::Snapshot(format!("truncated header: {e}")))?;
    if &magic != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let n1 = read_u64(&mut r)? as usize;
    let n2 = read_u64(&mut r)? as usize;
    let length = f64::from_bits(read_u64(&mut r)?);
    let nc = read_u64(&mut r)? as usize;
    if !(1..=4).contains(&nc) || n1 > 1 << 16 || n2 > 1 << 16 {
        return Err(Error::Snapshot(format!("implausible header: {n1}x{n2}, {nc} components")));
    }
    let grid = PeriodicGrid::new(n1, n2, length).map_err(|e| Error::Snapshot(e.to_string()))?;
    let mut comps = Vec::with_capacity(nc);
    let mut buf = vec![0u8; 8 * grid.len()];
    for _ in 0..nc {
        r.read_exact(&mut buf).map_err(|e| Error::Snapshot(format!("truncated samples: {e}")))?;
        let c: Vec<f64> =
            buf.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        if let Some(i) = c.iter().position(|v| !v.is_finite()) {
            return Err(Error::Snapshot(format!("non-finite sample at {i}")));
        }
        comps.push(c);
    }
    Ok(Snapshot { grid, comps })
}

impl Snapshot {
    fn expect(&self, n: usize) -> Result<()> {
        if self.comps.len() == n {
            Ok(())
        } else {
            Err(Error::Snapshot(format!("expected {n} components, found {}", self.comps.len())))
        }
    }

    pub fn into_scalar(mut self) -> Result<ScalarField> {
        self.expect(1)?;
        ScalarField::from_values(&self.grid, self.comps.pop().unwrap())
    }

    pub fn into_vector(mut self) -> Result<VectorField> {
        self.expect(2)?;
        let y = self.comps.pop().unwrap();
        let x = self.comps.pop().unwrap();
        VectorField::from_values(&self.grid, x, y)
    }

    pub fn into_tensor(self) -> Result<TensorField> {
        self.expect(4)?;
        let c: [Vec<f64>; 4] = self.comps.try_into().unwrap();
        Ok(TensorField::from_raw(&self.grid, c))
    }
}

pub fn save<F: Field + ?Sized>(f: &F, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_snapshot(f, std::io::BufWriter::new(file))
}

pub fn load(path: impl AsRef<Path>) -> Result<Snapshot> {
    let file = std::fs::File::open(path)?;
    read_snapshot(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_fixed() {
        let g = PeriodicGrid::new(4, 6, 2.5).unwrap();
        let f = ScalarField::from_fn(&g, |[x, y]| x - y);
        let b = snapshot_bytes(&f);
        assert_eq!(&b[..8], MAGIC);
        assert_eq!(u64::from_le_bytes(b[8..16].try_into().unwrap()), 4);
        assert_eq!(u64::from_le_bytes(b[16..24].try_into().unwrap()), 6);
        assert_eq!(f64::from_le_bytes(b[24..32].try_into().unwrap()), 2.5);
        assert_eq!(u64::from_le_bytes(b[32..40].try_into().unwrap()), 1);
        assert_eq!(b.len(), 40 + 8 * 24);
        let k = g.index(1, 2);
        let off = 40 + 8 * k;
        assert_eq!(f64::from_le_bytes(b[off..off + 8].try_into().unwrap()), f.values()[k]);
    }

    #[test]
    fn rejects_bad_input() {
        let g = PeriodicGrid::square(4, 1.0).unwrap();
        let mut b = snapshot_bytes(&VectorField::zeros(&g));
        assert!(read_snapshot(&b[..20]).is_err());
        assert!(read_snapshot(&b[..b.len() - 1]).is_err());
        assert!(read_snapshot(&b[..]).unwrap().into_scalar().is_err());
        b[0] = b'X';
        assert!(read_snapshot(&b[..]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(vals in proptest::collection::vec(-1e6f64..1e6, 2 * 8 * 6)) {
            let g = PeriodicGrid::new(8, 6, 3.7).unwrap();
            let v = VectorField::from_values(&g, vals[..48].to_vec(), vals[48..].to_vec()).unwrap();
            let back = read_snapshot(&snapshot_bytes(&v)[..]).unwrap().into_vector().unwrap();
            prop_assert_eq!(back, v);
        }
    }
}
