use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::RawInteraction;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    /// Unix-style seconds; divided by 86 400.
    #[default]
    Seconds,
    Days,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestOptions {
    pub time_unit: TimeUnit,
}

/// Reads `user,item,timestamp[,label]` rows (comma or tab separated, header
/// optional). Each user's events come back contiguous, users in order of
/// first appearance, events sorted by time with ties kept in file order.
pub fn ingest(path: &Path, opts: &IngestOptions) -> Result<Vec<RawInteraction>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ingest_str(&text, path, opts)
}

/// As [`ingest`], from text already in memory; `path` is used in errors.
pub fn ingest_str(text: &str, path: &Path, opts: &IngestOptions) -> Result<Vec<RawInteraction>> {
    let scale = match opts.time_unit {
        TimeUnit::Seconds => 1.0 / 86_400.0,
        TimeUnit::Days => 1.0,
    };
    let mut users: Vec<(String, Vec<RawInteraction>)> = Vec::new();
    let mut user_index = std::collections::HashMap::new();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut first = true;
    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let header_allowed = first;
        first = false;
        let sep = if line.contains('\t') { '\t' } else { ',' };
        let cols: Vec<&str> = line.split(sep).map(str::trim).collect();
        if !(3..=4).contains(&cols.len()) {
            return Err(parse_err(lineno, format!("expected 3 or 4 columns, found {}", cols.len())));
        }
        let ts = match cols[2].parse::<f64>() {
            Ok(t) if t.is_finite() => t,
            Ok(_) => return Err(parse_err(lineno, "timestamp is not finite".into())),
            Err(_) if header_allowed => continue,
            Err(_) => return Err(parse_err(lineno, format!("bad timestamp `{}`", cols[2]))),
        };
        if cols[0].is_empty() || cols[1].is_empty() {
            return Err(parse_err(lineno, "empty user or item id".into()));
        }
        let rec = RawInteraction {
            user: cols[0].to_string(),
            item: cols[1].to_string(),
            timestamp: ts * scale,
            label: cols.get(3).filter(|s| !s.is_empty()).map(|s| s.to_string()),
        };
        let idx = *user_index.entry(rec.user.clone()).or_insert_with(|| {
            users.push((rec.user.clone(), Vec::new()));
            users.len() - 1
        });
        users[idx].1.push(rec);
    }

    let mut out = Vec::new();
    for (user, mut events) in users {
        if events.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
            warn!("user `{user}`: timestamps out of order; sorting");
            events.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        }
        out.extend(events);
    }
    Ok(out)
}
