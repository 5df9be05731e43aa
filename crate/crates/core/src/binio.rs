//! Raw little-endian `f64` blobs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub fn encode_f64s(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|x| x.to_le_bytes()).collect()
}

pub fn decode_f64s(bytes: &[u8]) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Format(format!("blob of {} bytes is not a whole number of f64s", bytes.len())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn write_f64s(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_f64s(values))?;
    w.flush()?;
    Ok(())
}

pub fn read_f64s(path: &Path) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode_f64s(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let xs = [0.0, -0.0, 1.5, f64::MIN_POSITIVE, -3.25e300, f64::INFINITY];
        let back = decode_f64s(&encode_f64s(&xs)).unwrap();
        assert!(xs.iter().zip(&back).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(&encode_f64s(&[1.0])[..], &1.0f64.to_le_bytes());
        assert!(decode_f64s(&[0u8; 7]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        write_f64s(&p, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(read_f64s(&p).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 24);
    }
}
