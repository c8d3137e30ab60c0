//! Tab-separated tables with a header row and a trailing checksum line.
//!
//! Sets are written as `;`-joined sites, a site as its `,`-joined
//! coordinates; image sites carry a `y` prefix. The empty set is `{}`.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use rgcluster::{Error, Lattice, SiteSet};

use crate::error::{CliError, CliResult};

pub const CHECKSUM_PREFIX: &str = "# sha256 ";

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut body = self.header.join("\t");
        body.push('\n');
        for row in &self.rows {
            body.push_str(&row.join("\t"));
            body.push('\n');
        }
        let digest = sha256_hex(body.as_bytes());
        body.push_str(CHECKSUM_PREFIX);
        body.push_str(&digest);
        body.push('\n');
        body
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// True when the trailing checksum matches the body above it.
pub fn verify_checksum(text: &str) -> bool {
    let Some(idx) = text.rfind(CHECKSUM_PREFIX) else {
        return false;
    };
    let (body, tail) = text.split_at(idx);
    tail[CHECKSUM_PREFIX.len()..].trim_end() == sha256_hex(body.as_bytes())
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Shortest representation that round-trips.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

pub fn site(lattice: &Lattice, index: usize) -> String {
    lattice
        .coords(index)
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

pub fn set(lattice: &Lattice, s: &SiteSet) -> String {
    encode(lattice, s, "")
}

pub fn image_set(image: &Lattice, s: &SiteSet) -> String {
    encode(image, s, "y")
}

fn encode(lattice: &Lattice, s: &SiteSet, prefix: &str) -> String {
    if s.is_empty() {
        return "{}".into();
    }
    s.iter()
        .map(|x| format!("{prefix}{}", site(lattice, x)))
        .collect::<Vec<_>>()
        .join(";")
}

/// Block spins on `sites` as `+`/`-`, in site order.
pub fn spins(block_spins: u64, sites: &SiteSet) -> String {
    sites
        .iter()
        .map(|y| if block_spins >> y & 1 == 1 { '-' } else { '+' })
        .collect()
}

/// Inverse of [`set`] / [`image_set`].
pub fn parse_set(lattice: &Lattice, text: &str, line: usize) -> rgcluster::Result<SiteSet> {
    let text = text.trim();
    if text == "{}" {
        return Ok(SiteSet::empty());
    }
    let mut sites = Vec::new();
    for part in text.split(';') {
        let part = part.trim().trim_start_matches('y');
        let coords: Vec<usize> = part
            .split(',')
            .map(|c| c.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| Error::Parse {
                line,
                msg: format!("bad coordinate in {part:?}: {e}"),
            })?;
        let idx = lattice.index(&coords).ok_or_else(|| Error::Parse {
            line,
            msg: format!("site {part:?} outside the window"),
        })?;
        sites.push(idx);
    }
    Ok(SiteSet::new(sites))
}
