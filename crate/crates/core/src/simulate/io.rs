use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::Grid;

use super::{EnsembleInfo, FactorKind, PathEnsemble};

/// First four bytes of the binary path format. The header continues with four zero
/// bytes, then `n`, `M` and the seed as little-endian `u64`.
pub const MAGIC: &[u8; 4] = b"CVC1";

pub(super) fn write_csv<W: Write>(e: &PathEnsemble, out: W) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    write!(out, "path")?;
    for t in e.grid().points() {
        write!(out, ",{t:.16e}")?;
    }
    writeln!(out)?;
    for (m, p) in e.paths().enumerate() {
        write!(out, "{m}")?;
        for x in p {
            write!(out, ",{x:.16e}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub(super) fn write_binary<W: Write>(e: &PathEnsemble, out: W) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    out.write_all(MAGIC)?;
    out.write_all(&[0u8; 4])?;
    out.write_all(&(e.grid().cells() as u64).to_le_bytes())?;
    out.write_all(&(e.len() as u64).to_le_bytes())?;
    out.write_all(&e.seed().to_le_bytes())?;
    for x in e.as_slice() {
        out.write_all(&x.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Reads the binary format back; the horizon is not stored and must be supplied.
pub fn read_binary<R: Read>(mut input: R, horizon: f64, kernel: &str) -> Result<PathEnsemble> {
    let mut header = [0u8; 32];
    input.read_exact(&mut header)?;
    if &header[..4] != MAGIC {
        return Err(Error::Io("bad magic".into()));
    }
    let word = |k: usize| u64::from_le_bytes(header[8 * k..8 * k + 8].try_into().unwrap());
    let n = word(1) as usize;
    let m = word(2) as usize;
    let seed = word(3);
    let grid = Grid::streaming(n, horizon)?;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != m * (n + 1) * 8 {
        return Err(Error::Io(format!("expected {} path values, found {} bytes", m * (n + 1), bytes.len())));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let info = EnsembleInfo {
        kernel: kernel.to_string(),
        seed,
        method: FactorKind::Dense,
        jitter: 0.0,
    };
    PathEnsemble::from_rows(grid, data, info)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::simulate::sample_paths;

    #[test]
    fn binary_round_trip() {
        let k = KernelSpec::fbm(0.7, 2.0).unwrap();
        let g = Grid::new(8, 2.0).unwrap();
        let e = sample_paths(&k, &g, 3, 11).unwrap();
        let mut buf = Vec::new();
        e.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 32 + 3 * 9 * 8);
        let back = read_binary(&buf[..], 2.0, &k.id()).unwrap();
        assert_eq!(back.as_slice(), e.as_slice());
        assert_eq!(back.seed(), 11);
        assert!(read_binary(&buf[1..], 2.0, "x").is_err());
    }

    #[test]
    fn csv_has_one_row_per_path() {
        let k = KernelSpec::bm(1.0).unwrap();
        let g = Grid::new(4, 1.0).unwrap();
        let e = sample_paths(&k, &g, 2, 1).unwrap();
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 3);
        assert!(s.starts_with("path,0.0"));
    }
}
