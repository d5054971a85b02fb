//! Matrix file format shared with the CLI.
//!
//! Little-endian binary: magic `CATM`, u32 version (1), u64 rows, u64 cols,
//! u8 shape tag (0 dense, 1 lower-triangular), then the row-major float64
//! payload as a full rectangle (upper zeros stored explicitly for
//! triangular matrices).

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::layout::MatShape;
use crate::matrix::Matrix;

pub const MAGIC: &[u8; 4] = b"CATM";
pub const VERSION: u32 = 1;

pub fn write_matrix<W: Write>(w: &mut W, m: &Matrix, shape: MatShape) -> Result<()> {
    if shape == MatShape::LowerTriangular && !m.is_lower_triangular() {
        return Err(Error::Shape(
            "matrix tagged lower-triangular has nonzeros above the diagonal".into(),
        ));
    }
    let io = |e: std::io::Error| Error::Io(e.to_string());
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(m.rows() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(m.cols() as u64).to_le_bytes()).map_err(io)?;
    let tag: u8 = match shape {
        MatShape::Dense => 0,
        MatShape::LowerTriangular => 1,
    };
    w.write_all(&[tag]).map_err(io)?;
    for v in m.data() {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    Ok(())
}

pub fn read_matrix<R: Read>(r: &mut R) -> Result<(Matrix, MatShape)> {
    let io = |e: std::io::Error| Error::Io(e.to_string());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::Io(format!("bad magic {magic:?}, expected \"CATM\"")));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf).map_err(io)?;
    let version = u32::from_le_bytes(u32buf);
    if version != VERSION {
        return Err(Error::Io(format!("unsupported version {version}")));
    }
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf).map_err(io)?;
    let rows = u64::from_le_bytes(u64buf) as usize;
    r.read_exact(&mut u64buf).map_err(io)?;
    let cols = u64::from_le_bytes(u64buf) as usize;
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag).map_err(io)?;
    let shape = match tag[0] {
        0 => MatShape::Dense,
        1 => MatShape::LowerTriangular,
        t => return Err(Error::Io(format!("unknown shape tag {t}"))),
    };
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Io("matrix dimensions overflow".into()))?;
    let mut data = Vec::with_capacity(count);
    let mut f64buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut f64buf).map_err(|_| {
            Error::Io(format!("truncated payload, expected {count} float64 values"))
        })?;
        data.push(f64::from_le_bytes(f64buf));
    }
    let m = Matrix::from_vec(rows, cols, data)?;
    if shape == MatShape::LowerTriangular {
        if rows != cols {
            return Err(Error::Io("lower-triangular matrix must be square".into()));
        }
        if !m.is_lower_triangular() {
            return Err(Error::Io(
                "payload tagged lower-triangular has nonzeros above the diagonal".into(),
            ));
        }
    }
    Ok((m, shape))
}

pub fn write_matrix_file(path: &std::path::Path, m: &Matrix, shape: MatShape) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{path:?}: {e}")))?;
    let mut w = std::io::BufWriter::new(file);
    write_matrix(&mut w, m, shape)?;
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

pub fn read_matrix_file(path: &std::path::Path) -> Result<(Matrix, MatShape)> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{path:?}: {e}")))?;
    read_matrix(&mut std::io::BufReader::new(file))
}
