//! NPY v1.0 storage of `[persons, frames, joints, 3]` float64 arrays.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array4;
use ndarray_npy::{ReadNpyExt, WriteNpyExt};

use crate::error::{Error, Result};

pub fn write_npy(path: impl AsRef<Path>, data: &Array4<f64>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    data.as_standard_layout()
        .write_npy(&mut writer)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_npy(path: impl AsRef<Path>) -> Result<Array4<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Array4::<f64>::read_npy(BufReader::new(file))
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_v1_little_endian_f64() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("park_0000.npy");
        let data = Array4::from_shape_fn((2, 3, 18, 3), |(p, t, j, c)| {
            (p * 1000 + t * 100 + j * 3 + c) as f64
        });
        write_npy(&path, &data).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..6], b"\x93NUMPY");
        assert_eq!(&bytes[6..8], &[1, 0]);
        let header = String::from_utf8_lossy(&bytes[10..]);
        assert!(header.contains("'descr': '<f8'"));
        assert!(header.contains("(2, 3, 18, 3)"));
        assert_eq!(read_npy(&path).unwrap(), data);
    }

    #[test]
    fn truncated_file_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.npy");
        std::fs::write(&path, b"\x93NUMPY\x01\x00garbage").unwrap();
        let err = read_npy(&path).unwrap_err();
        assert!(err.to_string().contains("bad.npy"));
    }
}
