//! Output container: named payload blocks followed by a table of contents.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        8 bytes   50 44 43 31 0D 0A 1A 0A
//! version      u32       1
//! toc_offset   u64
//! payloads     raw bytes, concatenated in write order
//! toc          u32 entry count, then per entry:
//!              u16 name length, name (UTF-8), u64 offset, u64 length, u32 crc32c
//! toc crc      u32 crc32c over the toc bytes
//! ```
//!
//! The table of contents sits at the end so blocks can be streamed out; the
//! header slot for its offset is patched once writing finishes.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::options::{emit_canonical, parse_options, ParseError};
use crate::provenance::MetadataDictionary;

pub const MAGIC: [u8; 8] = [0x50, 0x44, 0x43, 0x31, 0x0D, 0x0A, 0x1A, 0x0A];
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 20;
/// Reserved block holding the canonical metadata dictionary.
pub const INFO_BLOCK: &str = "info";
pub const EVENTS_BLOCK: &str = "events";

const TOC_OFFSET_POS: u64 = 12;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a container (bad magic)")]
    BadMagic,
    #[error("unsupported container format version {0}")]
    UnsupportedVersion(u32),
    #[error("checksum mismatch in {0}")]
    ChecksumMismatch(String),
    #[error("corrupt table of contents: {0}")]
    CorruptToc(String),
    #[error("no block named `{0}`")]
    UnknownBlock(String),
    #[error("block `{0}` written twice")]
    DuplicateBlock(String),
    #[error("block name `{0}` is empty or longer than 65535 bytes")]
    BadBlockName(String),
    #[error("`info` block must hold a canonical options document: {0}")]
    ReservedNameMisuse(String),
    #[error("no provenance recorded (container has no `info` block)")]
    MissingInfo,
    #[error("`info` block does not parse: {0}")]
    CorruptInfo(ParseError),
}

impl ContainerError {
    fn is_unknown_block(&self, name: &str) -> bool {
        matches!(self, ContainerError::UnknownBlock(n) if n == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TocEntry {
    pub name: String,
    pub offset: u64,
    pub length: u64,
    pub crc32c: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TableOfContents {
    entries: Vec<TocEntry>,
}

impl TableOfContents {
    pub fn get(&self, name: &str) -> Option<&TocEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn entries(&self) -> &[TocEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for e in &self.entries {
            out.extend_from_slice(&(e.name.len() as u16).to_le_bytes());
            out.extend_from_slice(e.name.as_bytes());
            out.extend_from_slice(&e.offset.to_le_bytes());
            out.extend_from_slice(&e.length.to_le_bytes());
            out.extend_from_slice(&e.crc32c.to_le_bytes());
        }
        out
    }

    fn decode(bytes: &[u8], toc_offset: u64) -> Result<Self, ContainerError> {
        let corrupt = |msg: &str| ContainerError::CorruptToc(msg.to_owned());
        let mut rd = ByteReader { bytes, pos: 0 };
        let count = rd.u32().ok_or_else(|| corrupt("truncated entry count"))?;
        let mut entries = Vec::new();
        let mut names = HashSet::new();
        let mut next_free = HEADER_LEN;
        for _ in 0..count {
            let name_len = rd.u16().ok_or_else(|| corrupt("truncated entry"))? as usize;
            let name = rd.take(name_len).ok_or_else(|| corrupt("truncated entry name"))?;
            let name = std::str::from_utf8(name).map_err(|_| corrupt("entry name is not UTF-8"))?.to_owned();
            let offset = rd.u64().ok_or_else(|| corrupt("truncated entry"))?;
            let length = rd.u64().ok_or_else(|| corrupt("truncated entry"))?;
            let crc32c = rd.u32().ok_or_else(|| corrupt("truncated entry"))?;
            if offset < next_free {
                return Err(corrupt("block offsets overlap or are not ascending"));
            }
            let end = offset.checked_add(length).ok_or_else(|| corrupt("block length overflows"))?;
            if end > toc_offset {
                return Err(corrupt("block extends past the table of contents"));
            }
            if !names.insert(name.clone()) {
                return Err(corrupt("duplicate block name"));
            }
            next_free = end;
            entries.push(TocEntry { name, offset, length, crc32c });
        }
        if rd.pos != bytes.len() {
            return Err(corrupt("trailing bytes after the last entry"));
        }
        Ok(TableOfContents { entries })
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_le_bytes(b.try_into().unwrap()))
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
}

fn check_info_payload(payload: &[u8]) -> Result<(), ContainerError> {
    let text =
        std::str::from_utf8(payload).map_err(|_| ContainerError::ReservedNameMisuse("payload is not UTF-8".into()))?;
    let set = parse_options(text).map_err(|e| ContainerError::ReservedNameMisuse(e.to_string()))?;
    if emit_canonical(&set) != text {
        return Err(ContainerError::ReservedNameMisuse("document is not in canonical form".into()));
    }
    Ok(())
}

/// Streams blocks into a container.
pub struct ContainerWriter<W: Write + Seek> {
    inner: W,
    pos: u64,
    toc: TableOfContents,
}

impl<W: Write + Seek> ContainerWriter<W> {
    pub fn new(mut inner: W) -> Result<Self, ContainerError> {
        inner.write_all(&MAGIC)?;
        inner.write_all(&FORMAT_VERSION.to_le_bytes())?;
        inner.write_all(&0u64.to_le_bytes())?;
        Ok(ContainerWriter { inner, pos: HEADER_LEN, toc: TableOfContents::default() })
    }

    /// Appends a block and returns its CRC32C.
    pub fn add_block(&mut self, name: &str, payload: &[u8]) -> Result<u32, ContainerError> {
        if name.is_empty() || name.len() > u16::MAX as usize {
            return Err(ContainerError::BadBlockName(name.to_owned()));
        }
        if self.toc.get(name).is_some() {
            return Err(ContainerError::DuplicateBlock(name.to_owned()));
        }
        if name == INFO_BLOCK {
            check_info_payload(payload)?;
        }
        let crc = crc32c::crc32c(payload);
        self.inner.write_all(payload)?;
        self.toc.entries.push(TocEntry {
            name: name.to_owned(),
            offset: self.pos,
            length: payload.len() as u64,
            crc32c: crc,
        });
        self.pos += payload.len() as u64;
        Ok(crc)
    }

    /// Writes the table of contents and patches its offset into the header.
    pub fn finish(mut self) -> Result<(W, TableOfContents), ContainerError> {
        let toc_bytes = self.toc.encode();
        self.inner.write_all(&toc_bytes)?;
        self.inner.write_all(&crc32c::crc32c(&toc_bytes).to_le_bytes())?;
        self.inner.seek(SeekFrom::Start(TOC_OFFSET_POS))?;
        self.inner.write_all(&self.pos.to_le_bytes())?;
        self.inner.seek(SeekFrom::End(0))?;
        self.inner.flush()?;
        Ok((self.inner, self.toc))
    }
}

fn partial_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    path.with_file_name(name)
}

/// Writes `blocks` to `path` in order and returns each block's CRC32C.
///
/// The file is assembled next to `path` and renamed into place, so readers
/// never observe a half-written container.
pub fn write_container(path: &Path, blocks: &[(&str, &[u8])]) -> Result<Vec<(String, u32)>, ContainerError> {
    let tmp = partial_path(path);
    let result = (|| {
        let file = File::create(&tmp)?;
        let mut writer = ContainerWriter::new(BufWriter::new(file))?;
        let mut sums = Vec::with_capacity(blocks.len());
        for (name, payload) in blocks {
            sums.push((name.to_string(), writer.add_block(name, payload)?));
        }
        let (buf, _) = writer.finish()?;
        buf.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(sums)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Random-access reader. Opening reads only the header and the table of
/// contents; each block read seeks straight to its payload.
pub struct ContainerReader<R: Read + Seek> {
    inner: R,
    toc: TableOfContents,
}

impl ContainerReader<File> {
    pub fn open_path(path: &Path) -> Result<Self, ContainerError> {
        ContainerReader::new(File::open(path)?)
    }
}

impl<R: Read + Seek> ContainerReader<R> {
    pub fn new(mut inner: R) -> Result<Self, ContainerError> {
        let mut header = [0u8; HEADER_LEN as usize];
        inner.seek(SeekFrom::Start(0))?;
        match inner.read_exact(&mut header) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Err(ContainerError::BadMagic),
            Err(e) => return Err(e.into()),
        }
        if header[..8] != MAGIC {
            return Err(ContainerError::BadMagic);
        }
        let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(ContainerError::UnsupportedVersion(version));
        }
        let toc_offset = u64::from_le_bytes(header[12..20].try_into().unwrap());
        let file_len = inner.seek(SeekFrom::End(0))?;
        // smallest toc: entry count + trailing crc
        if toc_offset < HEADER_LEN || toc_offset.checked_add(8).is_none_or(|end| end > file_len) {
            return Err(ContainerError::CorruptToc("offset out of bounds".into()));
        }
        inner.seek(SeekFrom::Start(toc_offset))?;
        let mut tail = vec![0u8; (file_len - toc_offset) as usize];
        inner.read_exact(&mut tail)?;
        let (toc_bytes, crc_bytes) = tail.split_at(tail.len() - 4);
        if crc32c::crc32c(toc_bytes) != u32::from_le_bytes(crc_bytes.try_into().unwrap()) {
            return Err(ContainerError::ChecksumMismatch("table of contents".into()));
        }
        let toc = TableOfContents::decode(toc_bytes, toc_offset)?;
        Ok(ContainerReader { inner, toc })
    }

    pub fn toc(&self) -> &TableOfContents {
        &self.toc
    }

    pub fn into_inner(self) -> R {
        self.inner
    }

    /// Reads one block and verifies its CRC32C.
    pub fn read_block(&mut self, name: &str) -> Result<Vec<u8>, ContainerError> {
        let entry = self.toc.get(name).ok_or_else(|| ContainerError::UnknownBlock(name.to_owned()))?.clone();
        self.inner.seek(SeekFrom::Start(entry.offset))?;
        let mut payload = vec![0u8; entry.length as usize];
        self.inner.read_exact(&mut payload)?;
        if crc32c::crc32c(&payload) != entry.crc32c {
            return Err(ContainerError::ChecksumMismatch(format!("block `{name}`")));
        }
        Ok(payload)
    }

    /// Parses the `info` block into a metadata dictionary.
    pub fn extract_info(&mut self) -> Result<MetadataDictionary, ContainerError> {
        let payload = match self.read_block(INFO_BLOCK) {
            Ok(p) => p,
            Err(e) if e.is_unknown_block(INFO_BLOCK) => return Err(ContainerError::MissingInfo),
            Err(e) => return Err(e),
        };
        let text = String::from_utf8(payload).map_err(|_| {
            ContainerError::CorruptInfo(ParseError {
                line: 1,
                column: 1,
                kind: crate::options::ParseErrorKind::Syntax("payload is not UTF-8".into()),
            })
        })?;
        MetadataDictionary::from_canonical(&text).map_err(ContainerError::CorruptInfo)
    }
}

pub fn read_block(path: &Path, name: &str) -> Result<Vec<u8>, ContainerError> {
    ContainerReader::open_path(path)?.read_block(name)
}

pub fn read_toc(path: &Path) -> Result<TableOfContents, ContainerError> {
    Ok(ContainerReader::open_path(path)?.toc)
}

pub fn extract_info(path: &Path) -> Result<MetadataDictionary, ContainerError> {
    ContainerReader::open_path(path)?.extract_info()
}

/// Reads and verifies the `events` block, returning its CRC32C.
pub fn events_checksum(path: &Path) -> Result<u32, ContainerError> {
    let payload = read_block(path, EVENTS_BLOCK)?;
    Ok(crc32c::crc32c(&payload))
}
