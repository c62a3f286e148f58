//! CIFAR-10 binary batches: 3073-byte records, one label byte followed by
//! the 32×32 red, green and blue planes (1024 bytes each, row-major).

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};

pub const SIDE: usize = 32;
pub const PLANE: usize = SIDE * SIDE;
pub const RECORD: usize = 1 + 3 * PLANE;

/// Decodes whole records from `r` until end of input, appending
/// channel-interleaved pixels and labels.
fn read_records<R: Read>(mut r: R, pixels: &mut Vec<u8>, labels: &mut Vec<u8>) -> Result<()> {
    let mut rec = vec![0u8; RECORD];
    let mut index = 0usize;
    loop {
        let mut filled = 0;
        while filled < RECORD {
            match r.read(&mut rec[filled..]) {
                Ok(0) => break,
                Ok(n) => filled += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(Error::io("reading CIFAR-10 record", e)),
            }
        }
        if filled == 0 {
            return Ok(());
        }
        if filled < RECORD {
            return Err(Error::Format(format!(
                "CIFAR-10 data is not a multiple of {RECORD} bytes ({filled} trailing bytes after record {index})"
            )));
        }
        let label = rec[0];
        if label > 9 {
            return Err(Error::Data(format!(
                "record {index}: label {label} outside 0..=9"
            )));
        }
        labels.push(label);
        for p in 0..PLANE {
            for c in 0..3 {
                pixels.push(rec[1 + c * PLANE + p]);
            }
        }
        index += 1;
    }
}

pub fn read_cifar10<R: Read>(r: R, name: &str) -> Result<Dataset> {
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    read_records(r, &mut pixels, &mut labels)?;
    Dataset::from_bytes(name, (SIDE, SIDE, 3), pixels, labels)
}

/// Concatenates every record of every file, in order.
pub fn load_cifar10(paths: &[impl AsRef<Path>], name: &str) -> Result<Dataset> {
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingData {
                    path: path.to_path_buf(),
                    hint: "download the CIFAR-10 binary version and point NIRMAL_DATA_DIR or --data-dir at its parent".into(),
                }
            } else {
                Error::io(format!("opening {}", path.display()), e)
            }
        })?;
        read_records(BufReader::new(file), &mut pixels, &mut labels).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
            other => other,
        })?;
    }
    Dataset::from_bytes(name, (SIDE, SIDE, 3), pixels, labels)
}

/// Encodes a dataset of 32×32×3 images back into CIFAR-10 records.
pub fn encode_cifar10(ds: &Dataset) -> Result<Vec<u8>> {
    if ds.image_dims() != (SIDE, SIDE, 3) {
        return Err(Error::Format(format!(
            "CIFAR-10 records hold 32x32x3 images, dataset has {:?}",
            ds.image_dims()
        )));
    }
    let mut out = Vec::with_capacity(ds.len() * RECORD);
    for (k, &label) in ds.labels().iter().enumerate() {
        out.push(label);
        let img = ds.image_bytes(k);
        for c in 0..3 {
            out.extend((0..PLANE).map(|p| img[p * 3 + c]));
        }
    }
    Ok(out)
}
