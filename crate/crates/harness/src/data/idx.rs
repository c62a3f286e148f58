//! IDX containers as used by MNIST and Fashion-MNIST: a big-endian `u32`
//! magic (`0x00000803` images, `0x00000801` labels), one big-endian `u32`
//! per dimension, then raw unsigned bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Raw image bytes, `count × rows × cols`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn header_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    r.read_u32::<BigEndian>()
        .map_err(|e| Error::Format(format!("truncated IDX header ({what}): {e}")))
}

fn expect_magic<R: Read>(r: &mut R, expected: u32) -> Result<()> {
    let magic = header_u32(r, "magic")?;
    if magic != expected {
        return Err(Error::Format(format!(
            "bad IDX magic {magic:#010x}, expected {expected:#010x}"
        )));
    }
    Ok(())
}

/// Reads exactly `len` payload bytes and requires end of input afterwards.
fn payload<R: Read>(r: &mut R, len: usize) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.take(len as u64)
        .read_to_end(&mut buf)
        .map_err(|e| Error::io("reading IDX payload", e))?;
    if buf.len() != len {
        return Err(Error::Format(format!(
            "truncated IDX payload: header promises {len} bytes, found {}",
            buf.len()
        )));
    }
    let mut extra = [0u8; 1];
    match r.read(&mut extra) {
        Ok(0) => Ok(buf),
        Ok(_) => Err(Error::Format("trailing bytes after IDX payload".into())),
        Err(e) => Err(Error::io("reading IDX payload", e)),
    }
}

pub fn read_idx_images<R: Read>(mut r: R) -> Result<IdxImages> {
    expect_magic(&mut r, IMAGES_MAGIC)?;
    let count = header_u32(&mut r, "count")? as usize;
    let rows = header_u32(&mut r, "rows")? as usize;
    let cols = header_u32(&mut r, "cols")? as usize;
    let len = count
        .checked_mul(rows)
        .and_then(|n| n.checked_mul(cols))
        .ok_or_else(|| Error::Format("IDX dimensions overflow".into()))?;
    let pixels = payload(&mut r, len)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn read_idx_labels<R: Read>(mut r: R) -> Result<Vec<u8>> {
    expect_magic(&mut r, LABELS_MAGIC)?;
    let count = header_u32(&mut r, "count")? as usize;
    payload(&mut r, count)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingData {
            path: path.to_path_buf(),
            hint: "set NIRMAL_DATA_DIR or --data-dir to the directory holding the dataset".into(),
        }),
        Err(e) => Err(Error::io(format!("opening {}", path.display()), e)),
    }
}

pub fn load_idx_images(path: &Path) -> Result<IdxImages> {
    read_idx_images(open(path)?).map_err(|e| with_path(e, path))
}

pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    read_idx_labels(open(path)?).map_err(|e| with_path(e, path))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    }
}

pub fn write_idx_images<W: Write>(mut w: W, images: &IdxImages) -> Result<()> {
    let io = |e| Error::io("writing IDX images", e);
    w.write_u32::<BigEndian>(IMAGES_MAGIC).map_err(io)?;
    for d in [images.count, images.rows, images.cols] {
        w.write_u32::<BigEndian>(dim_u32(d)?).map_err(io)?;
    }
    w.write_all(&images.pixels).map_err(io)?;
    w.flush().map_err(io)
}

pub fn write_idx_labels<W: Write>(mut w: W, labels: &[u8]) -> Result<()> {
    let io = |e| Error::io("writing IDX labels", e);
    w.write_u32::<BigEndian>(LABELS_MAGIC).map_err(io)?;
    w.write_u32::<BigEndian>(dim_u32(labels.len())?)
        .map_err(io)?;
    w.write_all(labels).map_err(io)?;
    w.flush().map_err(io)
}

fn dim_u32(d: usize) -> Result<u32> {
    u32::try_from(d).map_err(|_| Error::Format(format!("dimension {d} does not fit IDX header")))
}

pub fn save_idx_images(path: &Path, images: &IdxImages) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    write_idx_images(BufWriter::new(f), images)
}

pub fn save_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    write_idx_labels(BufWriter::new(f), labels)
}
