use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Corpus, Split, UserTimeline};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    dim: usize,
    disorder: String,
    split: Split,
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file))
}

/// Parse a JSON Lines corpus: a header record followed by one user per line.
/// Blank lines are ignored. Errors carry 1-based line numbers.
pub fn read_corpus(reader: impl BufRead) -> Result<Corpus> {
    let mut lines = reader.lines().enumerate();
    let header: Header = loop {
        match lines.next() {
            None => return Err(Error::format(1, "missing header record")),
            Some((i, line)) => {
                let line = line.map_err(|e| Error::format(i + 1, e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line)
                    .map_err(|e| Error::format(i + 1, format!("invalid header: {e}")))?;
            }
        }
    };
    if header.format_version != FORMAT_VERSION {
        return Err(Error::format(
            1,
            format!("unsupported format_version {}", header.format_version),
        ));
    }

    let mut corpus = Corpus::new(header.dim, header.disorder, header.split);
    for (i, line) in lines {
        let line = line.map_err(|e| Error::format(i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let user: UserTimeline = serde_json::from_str(&line)
            .map_err(|e| Error::format(i + 1, format!("malformed user record: {e}")))?;
        corpus.users.push(user);
    }
    corpus.validate()?;
    Ok(corpus)
}

pub fn write_corpus(corpus: &Corpus, mut writer: impl Write) -> Result<()> {
    let header = Header {
        format_version: FORMAT_VERSION,
        dim: corpus.dim,
        disorder: corpus.disorder.clone(),
        split: corpus.split,
    };
    let to_io = |e: std::io::Error| Error::io("<writer>", e);
    serde_json::to_writer(&mut writer, &header).map_err(|e| to_io(e.into()))?;
    writer.write_all(b"\n").map_err(to_io)?;
    for user in &corpus.users {
        serde_json::to_writer(&mut writer, user).map_err(|e| to_io(e.into()))?;
        writer.write_all(b"\n").map_err(to_io)?;
    }
    writer.flush().map_err(to_io)
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus(corpus, BufWriter::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}
