//! Labeled chip collections and the on-disk CSV manifest.
//!
//! A manifest is a CSV file with header `path,label,domain,width,height,seed`.
//! Paths are relative to the manifest's directory. Lines starting with `#`
//! carry provenance and are ignored on read.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{load_png, ImageChip};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VesselClass {
    Barge,
    Cargo,
    Container,
    Tanker,
}

impl VesselClass {
    pub const ALL: [VesselClass; 4] = [
        VesselClass::Barge,
        VesselClass::Cargo,
        VesselClass::Container,
        VesselClass::Tanker,
    ];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::invalid(format!("class index {i} out of range")))
    }

    pub fn label(self) -> &'static str {
        match self {
            VesselClass::Barge => "barge",
            VesselClass::Cargo => "cargo",
            VesselClass::Container => "container",
            VesselClass::Tanker => "tanker",
        }
    }
}

impl fmt::Display for VesselClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for VesselClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| Error::invalid(format!("unknown vessel class '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "synthetic")]
    Synthetic,
    #[serde(rename = "real-analog")]
    RealAnalog,
}

impl Domain {
    pub fn tag(self) -> &'static str {
        match self {
            Domain::Synthetic => "synthetic",
            Domain::RealAnalog => "real-analog",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(Domain::Synthetic),
            "real-analog" => Ok(Domain::RealAnalog),
            other => Err(Error::invalid(format!("unknown domain '{other}'"))),
        }
    }
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub label: VesselClass,
    pub domain: Domain,
    pub width: usize,
    pub height: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    /// Provenance lines written as `# ...` comments ahead of the header.
    pub comments: Vec<String>,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        for c in &self.comments {
            writeln!(out, "# {c}").expect("write to memory");
        }
        {
            let mut w = csv::Writer::from_writer(&mut out);
            for e in &self.entries {
                w.serialize(e).map_err(|source| Error::Csv {
                    path: path.to_path_buf(),
                    source,
                })?;
            }
            w.flush().map_err(|e| Error::io(path, e))?;
        }
        if self.entries.is_empty() {
            out.extend_from_slice(b"path,label,domain,width,height,seed\n");
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let comments = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.trim_start_matches('#').trim().to_string())
            .collect();
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = reader.headers().map_err(csv_err)?.clone();
        if header.iter().collect::<Vec<_>>()
            != ["path", "label", "domain", "width", "height", "seed"]
        {
            return Err(Error::invalid(format!(
                "{}: unexpected manifest header {:?}",
                path.display(),
                header
            )));
        }
        let entries = reader
            .deserialize()
            .collect::<std::result::Result<Vec<ManifestEntry>, _>>()
            .map_err(csv_err)?;
        Ok(Manifest { comments, entries })
    }
}

/// Chips held in memory with their class indices, in manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChipSet {
    pub chips: Vec<ImageChip>,
    pub labels: Vec<usize>,
    /// Stable identifiers (manifest paths for loaded sets).
    pub ids: Vec<String>,
    pub domain: Domain,
}

impl ChipSet {
    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }

    pub fn class_counts(&self) -> [usize; VesselClass::COUNT] {
        let mut counts = [0; VesselClass::COUNT];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn subset(&self, indices: &[usize]) -> ChipSet {
        ChipSet {
            chips: indices.iter().map(|&i| self.chips[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            domain: self.domain,
        }
    }

    /// Loads every chip named by the manifest at `path`.
    pub fn load(path: &Path) -> Result<ChipSet> {
        let manifest = Manifest::read(path)?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_manifest(&manifest, &root)
    }

    pub fn from_manifest(manifest: &Manifest, root: &Path) -> Result<ChipSet> {
        let domain = manifest
            .entries
            .first()
            .map_or(Domain::Synthetic, |e| e.domain);
        if manifest.entries.iter().any(|e| e.domain != domain) {
            return Err(Error::invalid("manifest mixes domains"));
        }
        let chips = manifest
            .entries
            .par_iter()
            .map(|e| {
                let chip = load_png(&resolve(root, &e.path))?;
                if chip.width() != e.width || chip.height() != e.height {
                    return Err(Error::invalid(format!(
                        "{}: manifest says {}x{}, file is {}x{}",
                        e.path,
                        e.width,
                        e.height,
                        chip.width(),
                        chip.height()
                    )));
                }
                Ok(chip)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ChipSet {
            chips,
            labels: manifest.entries.iter().map(|e| e.label.index()).collect(),
            ids: manifest.entries.iter().map(|e| e.path.clone()).collect(),
            domain,
        })
    }
}

fn resolve(root: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}
