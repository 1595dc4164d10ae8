//! Reader for the IDX files MNIST ships in (big-endian header, u8 payload).

use std::path::Path;

use crate::learning::data::Dataset;
use crate::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            message: format!("truncated header at byte {at}"),
        })
}

/// Parsed IDX file: dimensions and the raw unsigned-byte payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Idx {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

pub fn parse_idx(bytes: &[u8], path: &Path) -> Result<Idx> {
    let magic = be_u32(bytes, 0, path)?;
    let (dtype, ndims) = ((magic >> 8) & 0xff, (magic & 0xff) as usize);
    if magic >> 16 != 0 || dtype != 0x08 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!("unsupported IDX magic {magic:#010x}"),
        });
    }
    let dims: Vec<usize> = (0..ndims)
        .map(|i| be_u32(bytes, 4 + 4 * i, path).map(|d| d as usize))
        .collect::<Result<_>>()?;
    let start = 4 + 4 * ndims;
    let expected: usize = dims.iter().product();
    let data = &bytes[start.min(bytes.len())..];
    if data.len() != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!("payload has {} bytes, header promises {expected}", data.len()),
        });
    }
    Ok(Idx {
        dims,
        data: data.to_vec(),
    })
}

fn read(path: &Path) -> Result<Idx> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_idx(&bytes, path)
}

/// Load an image file and its label file into a [`Dataset`] with pixel
/// intensities scaled to [0, 1].
pub fn load_mnist(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset> {
    let (ip, lp) = (images.as_ref(), labels.as_ref());
    let img = read(ip)?;
    let lab = read(lp)?;
    let magic_of = |p: &Path| -> Result<u32> {
        let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
        be_u32(&bytes, 0, p)
    };
    if magic_of(ip)? != IMAGES_MAGIC || img.dims.len() != 3 {
        return Err(Error::Parse {
            path: ip.to_path_buf(),
            message: "not an IDX image file (expected 3 dimensions)".into(),
        });
    }
    if magic_of(lp)? != LABELS_MAGIC || lab.dims.len() != 1 {
        return Err(Error::Parse {
            path: lp.to_path_buf(),
            message: "not an IDX label file (expected 1 dimension)".into(),
        });
    }
    if img.dims[0] != lab.dims[0] {
        return Err(Error::DimMismatch {
            expected: img.dims[0],
            got: lab.dims[0],
        });
    }
    let features = img.data.iter().map(|&p| f64::from(p) / 255.0).collect();
    let labels = lab.data.iter().map(|&l| usize::from(l)).collect();
    Dataset::new(img.dims[1] * img.dims[2], 10, features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(magic: u32, dims: &[u32], data: &[u8]) -> Vec<u8> {
        let mut out = magic.to_be_bytes().to_vec();
        for d in dims {
            out.extend_from_slice(&d.to_be_bytes());
        }
        out.extend_from_slice(data);
        out
    }

    #[test]
    fn reads_tiny_files() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("img");
        let lp = dir.path().join("lab");
        std::fs::write(&ip, idx(IMAGES_MAGIC, &[2, 2, 2], &[0, 255, 51, 102, 1, 2, 3, 4])).unwrap();
        std::fs::write(&lp, idx(LABELS_MAGIC, &[2], &[7, 3])).unwrap();
        let d = load_mnist(&ip, &lp).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.num_features, 4);
        assert_eq!(d.labels, vec![7, 3]);
        assert_eq!(d.x(0), &[0.0, 1.0, 0.2, 0.4]);
    }

    #[test]
    fn truncated_payload_is_parse_error() {
        let bytes = idx(LABELS_MAGIC, &[3], &[1, 2]);
        assert!(matches!(parse_idx(&bytes, Path::new("x")), Err(Error::Parse { .. })));
    }

    #[test]
    fn bad_magic_is_parse_error() {
        let bytes = idx(0x0000_0d01, &[1], &[1]);
        assert!(matches!(parse_idx(&bytes, Path::new("x")), Err(Error::Parse { .. })));
    }
}
