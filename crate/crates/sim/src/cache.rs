//! Binary codebook cache.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | field |
//! |---|---|
//! | 8 | magic `FASURACB` |
//! | 4 | format version (`1`) |
//! | 32 | SHA-256 of the shape key (see [`shape_key`]) |
//! | 8 | seed |
//! | 6 × 8 | pilot_len, spread_len, symbols, index_bits, code_len, frozen_len |
//! | 8 + len | pilot codes, length-prefixed |
//! | 8 + len | spreading codes, length-prefixed |
//! | 8 + len | frozen values, length-prefixed |
//! | 8 + 2 len | interleavers (`u16`), length-prefixed by entry count |

use std::fs;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use fasura_core::codebook::{CodebookError, CodebookParts, CodebookShape};
use fasura_core::{Codebook, SystemConfig};
use sha2::{Digest, Sha256};
use thiserror::Error;

const MAGIC: &[u8; 8] = b"FASURACB";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}: not a codebook cache file")]
    Magic(PathBuf),
    #[error("{path}: format version {found}, expected {FORMAT_VERSION}")]
    Version { path: PathBuf, found: u32 },
    #[error("{0}: cached codebook was built for a different configuration")]
    Mismatch(PathBuf),
    #[error("{path}: {source}")]
    Invalid { path: PathBuf, source: CodebookError },
    #[error(transparent)]
    Generate(#[from] CodebookError),
}

/// Canonical text of every field the codebook depends on.
pub fn shape_key(shape: &CodebookShape) -> String {
    format!(
        "pilot_len={};spread_len={};symbols={};index_bits={};code_len={};frozen_len={};seed={}",
        shape.pilot_len, shape.spread_len, shape.symbols, shape.index_bits, shape.code_len, shape.frozen_len, shape.seed
    )
}

pub fn shape_hash(shape: &CodebookShape) -> [u8; 32] {
    Sha256::digest(shape_key(shape).as_bytes()).into()
}

/// Cache file name for `config` inside `dir`.
pub fn cache_path(dir: &Path, config: &SystemConfig) -> PathBuf {
    let hash = shape_hash(&CodebookShape::of(config));
    let hex: String = hash[..8].iter().map(|b| format!("{b:02x}")).collect();
    dir.join(format!("codebook-{hex}.bin"))
}

pub fn write(path: &Path, codebook: &Codebook) -> Result<(), CacheError> {
    let io_err = |source| CacheError::Io { path: path.to_path_buf(), source };
    let parts = codebook.clone().into_parts();
    let tmp = path.with_extension("tmp");
    let mut w = BufWriter::new(fs::File::create(&tmp).map_err(io_err)?);
    let s = parts.shape;
    let mut put = |bytes: &[u8]| w.write_all(bytes);
    (|| -> io::Result<()> {
        put(MAGIC)?;
        put(&FORMAT_VERSION.to_le_bytes())?;
        put(&shape_hash(&s))?;
        put(&s.seed.to_le_bytes())?;
        for v in [s.pilot_len, s.spread_len, s.symbols, s.index_bits, s.code_len, s.frozen_len] {
            put(&(v as u64).to_le_bytes())?;
        }
        for section in [&parts.pilot_codes, &parts.spread_codes, &parts.frozen] {
            put(&(section.len() as u64).to_le_bytes())?;
            put(section)?;
        }
        put(&(parts.interleavers.len() as u64).to_le_bytes())?;
        let bytes: Vec<u8> = parts.interleavers.iter().flat_map(|v| v.to_le_bytes()).collect();
        put(&bytes)
    })()
    .map_err(io_err)?;
    w.into_inner().map_err(|e| io_err(e.into_error()))?.sync_all().map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

fn read_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_section(r: &mut impl Read, width: usize) -> io::Result<Vec<u8>> {
    let len = read_u64(r)? as usize;
    let bytes = len.checked_mul(width).ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "section length"))?;
    let mut out = Vec::new();
    r.take(bytes as u64).read_to_end(&mut out)?;
    if out.len() != bytes {
        return Err(io::ErrorKind::UnexpectedEof.into());
    }
    Ok(out)
}

/// Loads a cache file and checks it was built for `config`.
pub fn read(path: &Path, config: &SystemConfig) -> Result<Codebook, CacheError> {
    let io_err = |source| CacheError::Io { path: path.to_path_buf(), source };
    let mut r = BufReader::new(fs::File::open(path).map_err(io_err)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(CacheError::Magic(path.to_path_buf()));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v).map_err(io_err)?;
    let found = u32::from_le_bytes(v);
    if found != FORMAT_VERSION {
        return Err(CacheError::Version { path: path.to_path_buf(), found });
    }
    let expected = CodebookShape::of(config);
    let mut hash = [0u8; 32];
    r.read_exact(&mut hash).map_err(io_err)?;
    let seed = read_u64(&mut r).map_err(io_err)?;
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = read_u64(&mut r).map_err(io_err)? as usize;
    }
    let shape = CodebookShape {
        pilot_len: dims[0],
        spread_len: dims[1],
        symbols: dims[2],
        index_bits: dims[3],
        code_len: dims[4],
        frozen_len: dims[5],
        seed,
    };
    if hash != shape_hash(&expected) || shape != expected {
        return Err(CacheError::Mismatch(path.to_path_buf()));
    }
    let pilot_codes = read_section(&mut r, 1).map_err(io_err)?;
    let spread_codes = read_section(&mut r, 1).map_err(io_err)?;
    let frozen = read_section(&mut r, 1).map_err(io_err)?;
    let interleavers = read_section(&mut r, 2)
        .map_err(io_err)?
        .chunks_exact(2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .collect();
    Codebook::from_parts(CodebookParts { shape, pilot_codes, spread_codes, frozen, interleavers })
        .map_err(|source| CacheError::Invalid { path: path.to_path_buf(), source })
}

/// Reads the cached codebook for `config` from `dir`, generating and
/// storing it when absent. Without a directory the codebook is generated.
pub fn load_or_generate(dir: Option<&Path>, config: &SystemConfig) -> Result<Codebook, CacheError> {
    let Some(dir) = dir else {
        return Ok(Codebook::generate(config)?);
    };
    let path = cache_path(dir, config);
    if path.exists() {
        return read(&path, config);
    }
    let codebook = Codebook::generate(config)?;
    fs::create_dir_all(dir).map_err(|source| CacheError::Io { path: dir.to_path_buf(), source })?;
    write(&path, &codebook)?;
    Ok(codebook)
}
