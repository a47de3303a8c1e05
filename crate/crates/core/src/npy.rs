//! Minimal NPY v1.0 reader/writer for the array files the tool exchanges.
//!
//! Layout: the 6 magic bytes `\x93NUMPY`, version (1, 0), a little-endian
//! u16 header length, then a Python-dict header with `descr`,
//! `fortran_order`, and `shape` keys, padded with spaces to a 64-byte
//! boundary and terminated by a newline. Data follows row-major,
//! little-endian. Supported dtypes: u1, u2, i4, f4. Fortran order is
//! rejected.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

pub const MAGIC: [u8; 6] = *b"\x93NUMPY";

#[derive(Debug, Error)]
pub enum NpyError {
    #[error("not an npy file (bad magic bytes)")]
    BadMagic,

    #[error("unsupported dtype {0:?} (supported: u1, u2, i4, f4)")]
    UnsupportedDtype(String),

    #[error("file ends before the declared data")]
    TruncatedFile,

    #[error("malformed npy header: {0}")]
    BadHeader(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

type Result<T> = std::result::Result<T, NpyError>;

/// Element type of an array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    U8,
    U16,
    I32,
    F32,
}

impl Dtype {
    pub fn descr(self) -> &'static str {
        match self {
            Dtype::U8 => "|u1",
            Dtype::U16 => "<u2",
            Dtype::I32 => "<i4",
            Dtype::F32 => "<f4",
        }
    }

    pub fn item_size(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::U16 => 2,
            Dtype::I32 => 4,
            Dtype::F32 => 4,
        }
    }

    fn from_descr(descr: &str) -> Result<Self> {
        match descr {
            "|u1" | "<u1" => Ok(Dtype::U8),
            "<u2" => Ok(Dtype::U16),
            "<i4" => Ok(Dtype::I32),
            "<f4" => Ok(Dtype::F32),
            other => Err(NpyError::UnsupportedDtype(other.to_string())),
        }
    }
}

/// Typed array payload.
#[derive(Debug, Clone, PartialEq)]
pub enum NpyData {
    U8(Vec<u8>),
    U16(Vec<u16>),
    I32(Vec<i32>),
    F32(Vec<f32>),
}

impl NpyData {
    pub fn dtype(&self) -> Dtype {
        match self {
            NpyData::U8(_) => Dtype::U8,
            NpyData::U16(_) => Dtype::U16,
            NpyData::I32(_) => Dtype::I32,
            NpyData::F32(_) => Dtype::F32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            NpyData::U8(v) => v.len(),
            NpyData::U16(v) => v.len(),
            NpyData::I32(v) => v.len(),
            NpyData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A shaped array as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: NpyData,
}

impl NpyArray {
    pub fn new(shape: Vec<usize>, data: NpyData) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape does not match element count"
        );
        Self { shape, data }
    }

    pub fn dtype(&self) -> Dtype {
        self.data.dtype()
    }
}

/// Read an array from a file.
pub fn read_array(path: impl AsRef<Path>) -> Result<NpyArray> {
    let mut reader = BufReader::new(File::open(path)?);
    read_from(&mut reader)
}

/// Write an array to a file.
pub fn write_array(path: impl AsRef<Path>, array: &NpyArray) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_to(&mut writer, array)?;
    writer.flush()?;
    Ok(())
}

/// Read an array from any byte stream positioned at the magic.
pub fn read_from(reader: &mut impl Read) -> Result<NpyArray> {
    let mut magic = [0u8; 6];
    read_exact_or(reader, &mut magic, NpyError::BadMagic)?;
    if magic != MAGIC {
        return Err(NpyError::BadMagic);
    }
    let mut version = [0u8; 2];
    read_exact_or(reader, &mut version, NpyError::TruncatedFile)?;
    if version != [1, 0] {
        return Err(NpyError::BadHeader(format!(
            "unsupported version {}.{}",
            version[0], version[1]
        )));
    }
    let mut len_bytes = [0u8; 2];
    read_exact_or(reader, &mut len_bytes, NpyError::TruncatedFile)?;
    let header_len = u16::from_le_bytes(len_bytes) as usize;
    let mut header = vec![0u8; header_len];
    read_exact_or(reader, &mut header, NpyError::TruncatedFile)?;
    let header = std::str::from_utf8(&header)
        .map_err(|_| NpyError::BadHeader("header is not ASCII".to_string()))?;

    let descr = dict_value(header, "descr")?;
    let descr = descr.trim_matches(|c| c == '\'' || c == '"');
    let dtype = Dtype::from_descr(descr)?;

    match dict_value(header, "fortran_order")?.trim() {
        "False" => {}
        "True" => {
            return Err(NpyError::BadHeader(
                "fortran_order arrays are not supported".to_string(),
            ))
        }
        other => {
            return Err(NpyError::BadHeader(format!(
                "bad fortran_order value {other:?}"
            )))
        }
    }

    let shape = parse_shape(dict_value(header, "shape")?)?;
    let count: usize = shape.iter().product();

    let mut bytes = vec![0u8; count * dtype.item_size()];
    read_exact_or(reader, &mut bytes, NpyError::TruncatedFile)?;

    let data = match dtype {
        Dtype::U8 => NpyData::U8(bytes),
        Dtype::U16 => NpyData::U16(
            bytes
                .chunks_exact(2)
                .map(|b| u16::from_le_bytes([b[0], b[1]]))
                .collect(),
        ),
        Dtype::I32 => NpyData::I32(
            bytes
                .chunks_exact(4)
                .map(|b| i32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect(),
        ),
        Dtype::F32 => NpyData::F32(
            bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect(),
        ),
    };
    Ok(NpyArray { shape, data })
}

/// Write an array to any byte sink.
pub fn write_to(writer: &mut impl Write, array: &NpyArray) -> Result<()> {
    let shape_str = match array.shape.len() {
        0 => "()".to_string(),
        1 => format!("({},)", array.shape[0]),
        _ => format!(
            "({})",
            array
                .shape
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        array.dtype().descr(),
        shape_str
    );
    // Pad with spaces so magic+version+len+header is 64-byte aligned, then
    // terminate with a newline.
    let unpadded = MAGIC.len() + 2 + 2 + header.len() + 1;
    header.extend(std::iter::repeat_n(' ', unpadded.next_multiple_of(64) - unpadded));
    header.push('\n');

    writer.write_all(&MAGIC)?;
    writer.write_all(&[1, 0])?;
    writer.write_all(&(header.len() as u16).to_le_bytes())?;
    writer.write_all(header.as_bytes())?;

    match &array.data {
        NpyData::U8(v) => writer.write_all(v)?,
        NpyData::U16(v) => {
            let mut bytes = Vec::with_capacity(v.len() * 2);
            for x in v {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
            writer.write_all(&bytes)?;
        }
        NpyData::I32(v) => {
            let mut bytes = Vec::with_capacity(v.len() * 4);
            for x in v {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
            writer.write_all(&bytes)?;
        }
        NpyData::F32(v) => {
            let mut bytes = Vec::with_capacity(v.len() * 4);
            for x in v {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
            writer.write_all(&bytes)?;
        }
    }
    Ok(())
}

fn read_exact_or(reader: &mut impl Read, buf: &mut [u8], on_eof: NpyError) -> Result<()> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            on_eof
        } else {
            NpyError::Io(e)
        }
    })
}

/// Extract the value substring for one dict key.
fn dict_value<'a>(header: &'a str, key: &str) -> Result<&'a str> {
    let pattern = format!("'{key}':");
    let start = header
        .find(&pattern)
        .ok_or_else(|| NpyError::BadHeader(format!("missing key {key:?}")))?
        + pattern.len();
    let rest = header[start..].trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')')
            .map(|i| i + 1)
            .ok_or_else(|| NpyError::BadHeader("unterminated shape tuple".to_string()))?
    } else {
        rest.find([',', '}'])
            .ok_or_else(|| NpyError::BadHeader(format!("unterminated value for {key:?}")))?
    };
    Ok(rest[..end].trim())
}

fn parse_shape(text: &str) -> Result<Vec<usize>> {
    let inner = text
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| NpyError::BadHeader(format!("bad shape {text:?}")))?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| NpyError::BadHeader(format!("bad dimension {s:?}")))
        })
        .collect()
}
