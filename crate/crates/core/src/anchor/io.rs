use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnchorEmbedding, ChannelTable, SeriesSet, SimilaritySeries};
use crate::corpus::Label;
use crate::error::{Error, Result};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn json_err(path: &Path, e: serde_json::Error) -> Error {
    if e.is_io() {
        Error::io(path, e.into())
    } else {
        Error::format(e.line(), e.to_string())
    }
}

pub fn save_anchor(anchor: &AnchorEmbedding, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, anchor).map_err(|e| json_err(path, e))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))
}

pub fn load_anchor(path: impl AsRef<Path>) -> Result<AnchorEmbedding> {
    let path = path.as_ref();
    let anchor: AnchorEmbedding =
        serde_json::from_reader(open(path)?).map_err(|e| json_err(path, e))?;
    if anchor.vector.len() != anchor.dim {
        return Err(Error::DimensionMismatch {
            context: format!("anchor file {}", path.display()),
            expected: anchor.dim,
            found: anchor.vector.len(),
        });
    }
    if anchor.n_source_posts == 0 {
        return Err(Error::format(1, "anchor has n_source_posts = 0"));
    }
    Ok(anchor)
}

#[derive(Serialize, Deserialize)]
struct SeriesHeader {
    channels: usize,
    disorder: String,
    anchor_disorder: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct SeriesRecord {
    user_id: String,
    label: Label,
    series: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    degraded: bool,
}

pub fn write_series_set(set: &SeriesSet, mut w: impl Write) -> Result<()> {
    let io = |e: std::io::Error| Error::io("<writer>", e);
    let header = SeriesHeader {
        channels: set.channels,
        disorder: set.disorder.clone(),
        anchor_disorder: set.anchor_disorder.clone(),
    };
    serde_json::to_writer(&mut w, &header).map_err(|e| io(e.into()))?;
    w.write_all(b"\n").map_err(io)?;
    for s in &set.series {
        let rec = SeriesRecord {
            user_id: s.user_id.clone(),
            label: s.label,
            series: s.steps().map(<[f64]>::to_vec).collect(),
            degraded: s.degraded,
        };
        serde_json::to_writer(&mut w, &rec).map_err(|e| io(e.into()))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_series_set(reader: impl BufRead) -> Result<SeriesSet> {
    let mut set: Option<SeriesSet> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::format(i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        match set.as_mut() {
            None => {
                let h: SeriesHeader = serde_json::from_str(&line)
                    .map_err(|e| Error::format(i + 1, format!("invalid series header: {e}")))?;
                if h.channels == 0 {
                    return Err(Error::format(i + 1, "channels must be positive"));
                }
                set = Some(SeriesSet {
                    channels: h.channels,
                    disorder: h.disorder,
                    anchor_disorder: h.anchor_disorder,
                    series: Vec::new(),
                });
            }
            Some(set) => {
                let rec: SeriesRecord = serde_json::from_str(&line)
                    .map_err(|e| Error::format(i + 1, format!("malformed series record: {e}")))?;
                if rec.series.is_empty() {
                    return Err(Error::EmptyUser(rec.user_id));
                }
                if let Some(bad) = rec.series.iter().find(|s| s.len() != set.channels) {
                    return Err(Error::DimensionMismatch {
                        context: format!("series of user `{}`", rec.user_id),
                        expected: set.channels,
                        found: bad.len(),
                    });
                }
                set.series.push(SimilaritySeries {
                    user_id: rec.user_id,
                    label: rec.label,
                    channels: set.channels,
                    values: rec.series.into_iter().flatten().collect(),
                    degraded: rec.degraded,
                });
            }
        }
    }
    set.ok_or_else(|| Error::format(1, "missing series header"))
}

pub fn save_series_set(set: &SeriesSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_series_set(set, create(path)?)
}

pub fn load_series_set(path: impl AsRef<Path>) -> Result<SeriesSet> {
    let path = path.as_ref();
    read_series_set(open(path)?)
}

/// Long-format CSV for plotting: `user_id,label,step,channel,value`.
pub fn write_series_csv(set: &SeriesSet, mut w: impl Write) -> Result<()> {
    let io = |e: std::io::Error| Error::io("<writer>", e);
    writeln!(w, "user_id,label,step,channel,value").map_err(io)?;
    for s in &set.series {
        for (j, step) in s.steps().enumerate() {
            for (c, v) in step.iter().enumerate() {
                writeln!(w, "{},{},{},{},{}", s.user_id, s.label, j, c, v).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

#[derive(Deserialize)]
struct ChannelRecord {
    user_id: String,
    idx: usize,
    probs: Vec<f64>,
}

/// Reads `{user_id, idx, probs}` lines. The first record fixes the channel
/// count.
pub fn read_channels(reader: impl BufRead) -> Result<ChannelTable> {
    let mut table: Option<ChannelTable> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::format(i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ChannelRecord = serde_json::from_str(&line)
            .map_err(|e| Error::format(i + 1, format!("malformed channel record: {e}")))?;
        let t = table.get_or_insert_with(|| ChannelTable::new(rec.probs.len()));
        if rec.probs.len() != t.channels || rec.probs.is_empty() {
            return Err(Error::format(
                i + 1,
                format!("expected {} channel values, found {}", t.channels, rec.probs.len()),
            ));
        }
        t.insert(rec.user_id, rec.idx, rec.probs)?;
    }
    table.ok_or_else(|| Error::format(1, "channel file is empty"))
}

pub fn load_channels(path: impl AsRef<Path>) -> Result<ChannelTable> {
    let path = path.as_ref();
    read_channels(open(path)?)
}
