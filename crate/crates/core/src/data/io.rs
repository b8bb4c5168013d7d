//! Split directory layout:
//!
//! ```text
//! manifest.json    version, seed, config hash, counts
//! train.jsonl      one SequenceExample per line
//! valid.jsonl
//! test.jsonl
//! vocab.txt        item id per line; line n is index n
//! features.csv     optional, `item,f1,...,fd` in vocabulary order
//! interests.txt    optional, ground-truth topic per item
//! ```

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetSplit, SequenceExample, Vocabulary};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const SPLIT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub items: usize,
    pub has_features: bool,
    pub has_interests: bool,
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `split` under `dir` (created if missing) and returns the manifest.
pub fn write_split(dir: &Path, split: &DatasetSplit, seed: u64, config_hash: &str) -> Result<Manifest> {
    split.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, set) in [("train", &split.train), ("valid", &split.valid), ("test", &split.test)] {
        let mut lines = Vec::with_capacity(set.len());
        for ex in set {
            lines.push(serde_json::to_string(ex)?);
        }
        write_file(&dir.join(format!("{name}.jsonl")), |w| {
            lines.iter().try_for_each(|l| writeln!(w, "{l}"))
        })?;
    }
    write_file(&dir.join("vocab.txt"), |w| {
        split.vocab.ids().iter().try_for_each(|id| writeln!(w, "{id}"))
    })?;
    if let Some(f) = &split.features {
        write_file(&dir.join("features.csv"), |w| {
            for (i, id) in split.vocab.ids().iter().enumerate() {
                write!(w, "{id}")?;
                for x in f.row(i) {
                    write!(w, ",{x}")?;
                }
                writeln!(w)?;
            }
            Ok(())
        })?;
    }
    if let Some(t) = &split.item_interests {
        write_file(&dir.join("interests.txt"), |w| t.iter().try_for_each(|x| writeln!(w, "{x}")))?;
    }
    let manifest = Manifest {
        version: SPLIT_FORMAT_VERSION,
        seed,
        config_hash: config_hash.to_string(),
        train: split.train.len(),
        valid: split.valid.len(),
        test: split.test.len(),
        items: split.vocab.len(),
        has_features: split.features.is_some(),
        has_interests: split.item_interests.is_some(),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    write_file(&dir.join("manifest.json"), |w| writeln!(w, "{json}"))?;
    Ok(manifest)
}

fn read_jsonl(path: &Path) -> Result<Vec<SequenceExample>> {
    let text = read_file(path)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Reads a dense-feature sidecar: one `item,f1,...,fd` line per item.
/// Every row must have the same width.
pub fn read_features(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let text = read_file(path)?;
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    let mut seen = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message,
        };
        let mut cols = line.split(',').map(str::trim);
        let id = cols.next().unwrap_or_default().to_string();
        let values = cols
            .map(|c| c.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| err(format!("bad value `{c}`"))))
            .collect::<Result<Vec<f64>>>()?;
        if id.is_empty() || values.is_empty() {
            return Err(err("expected `item,f1,...,fd`".into()));
        }
        if let Some((_, first)) = out.first() {
            if first.len() != values.len() {
                return Err(err(format!("{} features, expected {}", values.len(), first.len())));
            }
        }
        if seen.insert(id.clone(), n + 1).is_some() {
            return Err(err(format!("duplicate item `{id}`")));
        }
        out.push((id, values));
    }
    Ok(out)
}

/// Reads a directory written by [`write_split`].
pub fn read_split(dir: &Path) -> Result<(DatasetSplit, Manifest)> {
    let manifest: Manifest = serde_json::from_str(&read_file(&dir.join("manifest.json"))?)?;
    if manifest.version != SPLIT_FORMAT_VERSION {
        return Err(Error::Version {
            found: manifest.version,
            expected: SPLIT_FORMAT_VERSION,
        });
    }
    let vocab = Vocabulary::from_ids(read_file(&dir.join("vocab.txt"))?.lines().map(str::to_string))?;
    let features = if manifest.has_features {
        let rows = read_features(&dir.join("features.csv"))?;
        if rows.len() != vocab.len() || rows.iter().zip(vocab.ids()).any(|(r, id)| &r.0 != id) {
            return Err(Error::Validation("features.csv does not follow vocab.txt".into()));
        }
        let dim = rows[0].1.len();
        Some(Matrix::from_vec(rows.len(), dim, rows.into_iter().flat_map(|r| r.1).collect())?)
    } else {
        None
    };
    let item_interests = if manifest.has_interests {
        let path = dir.join("interests.txt");
        let text = read_file(&path)?;
        let parsed = text
            .lines()
            .enumerate()
            .map(|(n, l)| {
                l.trim().parse::<usize>().map_err(|e| Error::Parse {
                    path: path.clone(),
                    line: n + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<usize>>>()?;
        Some(parsed)
    } else {
        None
    };
    let split = DatasetSplit {
        train: read_jsonl(&dir.join("train.jsonl"))?,
        valid: read_jsonl(&dir.join("valid.jsonl"))?,
        test: read_jsonl(&dir.join("test.jsonl"))?,
        vocab,
        features,
        item_interests,
    };
    split.validate()?;
    if (split.train.len(), split.valid.len(), split.test.len()) != (manifest.train, manifest.valid, manifest.test) {
        return Err(Error::Validation("split sizes disagree with manifest".into()));
    }
    Ok((split, manifest))
}
