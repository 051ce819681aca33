//! Persistent per-chip feature store.
//!
//! One file per extractor key. Layout (little endian):
//!
//! ```text
//! "VBFC" | version u32 | key length u32 | key bytes | entry count u64 |
//! entries sorted by chip hash: hash [32] | dim u32 | dim x f64 |
//! sha256 of everything above [32]
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::features::Extractor;
use crate::error::{Error, Result};
use crate::image::ImageChip;

pub const CACHE_ENV: &str = "VESSEL_BENCH_CACHE";
const MAGIC: &[u8; 4] = b"VBFC";
const VERSION: u32 = 1;

type ChipHash = [u8; 32];
type Table = HashMap<ChipHash, Arc<[f64]>>;

pub fn chip_hash(chip: &ImageChip) -> ChipHash {
    let mut h = Sha256::new();
    for v in [chip.width(), chip.height(), chip.channels()] {
        h.update((v as u64).to_le_bytes());
    }
    for v in chip.data() {
        h.update(v.to_bits().to_le_bytes());
    }
    h.finalize().into()
}

pub struct FeatureCache {
    dir: Option<PathBuf>,
    tables: Mutex<HashMap<String, Table>>,
    extractions: AtomicUsize,
    invalidations: AtomicUsize,
}

impl FeatureCache {
    pub fn in_memory() -> Self {
        Self {
            dir: None,
            tables: Mutex::default(),
            extractions: AtomicUsize::new(0),
            invalidations: AtomicUsize::new(0),
        }
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self {
            dir: Some(dir),
            ..Self::in_memory()
        })
    }

    /// Uses `$VESSEL_BENCH_CACHE` when set, else `default_dir`, else memory.
    pub fn from_env(default_dir: Option<&Path>) -> Result<Self> {
        match std::env::var_os(CACHE_ENV) {
            Some(dir) if !dir.is_empty() => Self::on_disk(PathBuf::from(dir)),
            _ => match default_dir {
                Some(d) => Self::on_disk(d),
                None => Ok(Self::in_memory()),
            },
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Chips run through an extractor so far.
    pub fn extractions(&self) -> usize {
        self.extractions.load(Ordering::Relaxed)
    }

    /// Cache files found corrupt and rebuilt.
    pub fn invalidations(&self) -> usize {
        self.invalidations.load(Ordering::Relaxed)
    }

    pub fn file_for(&self, key: &str) -> Option<PathBuf> {
        let digest = hex(&Sha256::digest(key.as_bytes()));
        self.dir
            .as_ref()
            .map(|d| d.join(format!("features-{}.bin", &digest[..16])))
    }

    /// Descriptors of `chips` in order, extracting only those not cached.
    pub fn features(&self, extractor: &Extractor, chips: &[ImageChip]) -> Result<Vec<Vec<f64>>> {
        let key = extractor.key();
        let hashes: Vec<ChipHash> = chips.par_iter().map(chip_hash).collect();
        let missing: Vec<usize> = {
            let mut tables = self.tables.lock().expect("cache lock");
            if !tables.contains_key(&key) {
                let table = self.load_table(&key);
                tables.insert(key.clone(), table);
            }
            let table = &tables[&key];
            let mut seen = std::collections::HashSet::new();
            (0..chips.len())
                .filter(|&i| !table.contains_key(&hashes[i]) && seen.insert(hashes[i]))
                .collect()
        };
        if !missing.is_empty() {
            let fresh: Vec<Arc<[f64]>> = missing
                .par_iter()
                .map(|&i| extractor.extract(&chips[i]).map(Arc::from))
                .collect::<Result<_>>()?;
            self.extractions.fetch_add(missing.len(), Ordering::Relaxed);
            let mut tables = self.tables.lock().expect("cache lock");
            let table = tables.get_mut(&key).expect("table inserted above");
            for (i, v) in missing.iter().zip(fresh) {
                table.insert(hashes[*i], v);
            }
            if let Some(path) = self.file_for(&key) {
                write_table(&path, &key, table)?;
            }
        }
        let tables = self.tables.lock().expect("cache lock");
        let table = &tables[&key];
        Ok(hashes.iter().map(|h| table[h].to_vec()).collect())
    }

    fn load_table(&self, key: &str) -> Table {
        let Some(path) = self.file_for(key) else {
            return Table::new();
        };
        if !path.exists() {
            return Table::new();
        }
        match read_table(&path, key) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("warning: {e}; recomputing");
                self.invalidations.fetch_add(1, Ordering::Relaxed);
                Table::new()
            }
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_table(path: &Path, key: &str, table: &Table) -> Result<()> {
    let mut entries: Vec<(&ChipHash, &Arc<[f64]>)> = table.iter().collect();
    entries.sort_unstable_by_key(|(h, _)| **h);
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(key.len() as u32).to_le_bytes());
    buf.extend_from_slice(key.as_bytes());
    buf.extend_from_slice(&(entries.len() as u64).to_le_bytes());
    for (h, v) in entries {
        buf.extend_from_slice(h);
        buf.extend_from_slice(&(v.len() as u32).to_le_bytes());
        for x in v.iter() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    let tmp = path.with_extension("bin.tmp");
    fs::write(&tmp, &buf).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::CacheInvalid("truncated file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

fn read_table(path: &Path, key: &str) -> Result<Table> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let invalid = |what: &str| Error::CacheInvalid(format!("{}: {what}", path.display()));
    if bytes.len() < 32 {
        return Err(invalid("truncated file"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(invalid("checksum mismatch"));
    }
    let mut r = Reader { buf: body, pos: 0 };
    let wrap = |e: Error| invalid(&e.to_string());
    if r.take(4).map_err(wrap)? != MAGIC || r.u32().map_err(wrap)? != VERSION {
        return Err(invalid("unknown format"));
    }
    let key_len = r.u32().map_err(wrap)? as usize;
    if r.take(key_len).map_err(wrap)? != key.as_bytes() {
        return Err(invalid("extractor key mismatch"));
    }
    let count = r.u64().map_err(wrap)?;
    let mut table = Table::new();
    for _ in 0..count {
        let hash: ChipHash = r.take(32).map_err(wrap)?.try_into().expect("32 bytes");
        let dim = r.u32().map_err(wrap)? as usize;
        let raw = r
            .take(dim.checked_mul(8).ok_or_else(|| invalid("bad dimension"))?)
            .map_err(wrap)?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        table.insert(hash, values.into());
    }
    if r.pos != body.len() {
        return Err(invalid("trailing bytes"));
    }
    Ok(table)
}
