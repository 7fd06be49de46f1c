//! Canonical on-disk recording format.
//!
//! One UTF-8 file per subject, extension `.csv`:
//!
//! ```text
//! #KANFE-DATA v1; subject=<id>; rate=<Hz>; channels=<name,...>
//! <label>,<v_1>,...,<v_c>
//! ...
//!
//! <label>,<v_1>,...,<v_c>      <- a blank line starts a new segment
//! ```
//!
//! Every segment loads as its own [`Recording`]. Values are written in the
//! shortest representation that parses back to the identical `f64`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::Recording;
use crate::error::{Error, Result};

const MAGIC: &str = "#KANFE-DATA v1";

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Reject labels `>= class_count` as unknown.
    pub class_count: Option<usize>,
}

/// Per-file outcome of [`scan_canonical`].
#[derive(Debug)]
pub struct FileReport {
    pub path: PathBuf,
    pub result: Result<Vec<Recording>>,
}

fn parse_err(file: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { file: file.to_path_buf(), line, msg: msg.into() }
}

struct Header {
    subject: String,
    rate: f64,
    channels: Vec<String>,
}

fn parse_header(file: &Path, line: &str) -> Result<Header> {
    let rest = line
        .strip_prefix(MAGIC)
        .ok_or_else(|| parse_err(file, 1, format!("header must start with {MAGIC:?}")))?;
    let (mut subject, mut rate, mut channels) = (None, None, None);
    for part in rest.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| parse_err(file, 1, format!("malformed header field {part:?}")))?;
        match key.trim() {
            "subject" => subject = Some(value.trim().to_string()),
            "rate" => {
                let r: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(file, 1, format!("bad sampling rate {value:?}")))?;
                rate = Some(r);
            }
            "channels" => channels = Some(value.split(',').map(|s| s.trim().to_string()).collect::<Vec<_>>()),
            other => return Err(parse_err(file, 1, format!("unknown header field {other:?}"))),
        }
    }
    let subject = subject.filter(|s| !s.is_empty()).ok_or_else(|| parse_err(file, 1, "header lacks subject"))?;
    let rate = rate.filter(|r| r.is_finite() && *r > 0.0).ok_or_else(|| parse_err(file, 1, "header lacks a positive rate"))?;
    let channels = channels
        .filter(|c| !c.is_empty() && c.iter().all(|n| !n.is_empty()))
        .ok_or_else(|| parse_err(file, 1, "header lacks channel names"))?;
    let mut sorted = channels.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != channels.len() {
        return Err(parse_err(file, 1, "duplicate channel names"));
    }
    Ok(Header { subject, rate, channels })
}

fn parse_file(path: &Path, opts: &LoadOptions) -> Result<Vec<Recording>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = parse_header(path, lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?)?;
    let c = header.channels.len();
    let blank = |h: &Header| Recording {
        subject_id: h.subject.clone(),
        rate: h.rate,
        channel_names: h.channels.clone(),
        samples: vec![Vec::new(); c],
        labels: Vec::new(),
    };
    let mut out = Vec::new();
    let mut cur = blank(&header);
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        if line.trim().is_empty() {
            if !cur.is_empty() {
                out.push(std::mem::replace(&mut cur, blank(&header)));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != c + 1 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected a label and {c} values, found {} fields", fields.len()),
            ));
        }
        let label: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("unknown label {:?}", fields[0])))?;
        if let Some(k) = opts.class_count {
            if label >= k {
                return Err(parse_err(path, lineno, format!("unknown label {label} (dataset has {k} classes)")));
            }
        }
        for (ch, field) in fields[1..].iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad value {field:?} in channel {}", header.channels[ch])))?;
            if !v.is_finite() {
                return Err(parse_err(path, lineno, format!("non-finite value in channel {}", header.channels[ch])));
            }
            cur.samples[ch].push(v);
        }
        cur.labels.push(label);
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    Ok(out)
}

fn data_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

/// Parses every `.csv` file in `dir`, reporting each file separately.
pub fn scan_canonical(dir: &Path, opts: &LoadOptions) -> Result<Vec<FileReport>> {
    Ok(data_files(dir)?
        .into_iter()
        .map(|path| {
            let result = parse_file(&path, opts);
            FileReport { path, result }
        })
        .collect())
}

/// Loads every recording in `dir`, ordered by subject id then by segment.
pub fn load_canonical_with(dir: &Path, opts: &LoadOptions) -> Result<Vec<Recording>> {
    let mut out = Vec::new();
    for report in scan_canonical(dir, opts)? {
        out.extend(report.result?);
    }
    out.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    Ok(out)
}

pub fn load_canonical(dir: &Path) -> Result<Vec<Recording>> {
    load_canonical_with(dir, &LoadOptions::default())
}

fn check_token(kind: &str, s: &str, extra: &[char]) -> Result<()> {
    let bad = s.is_empty() || s.chars().any(|ch| ch == ';' || ch == '\n' || ch == '\r' || extra.contains(&ch));
    if bad || s.trim() != s {
        return Err(Error::config(format!("{kind} {s:?} cannot be stored in the canonical format")));
    }
    Ok(())
}

/// Writes one file per subject (`<subject>.csv`); recordings of the same
/// subject become blank-line separated segments. Returns the written paths.
pub fn write_canonical(dir: &Path, recordings: &[Recording]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut groups: Vec<(&str, Vec<&Recording>)> = Vec::new();
    for rec in recordings {
        rec.validate()?;
        check_token("subject id", &rec.subject_id, &['/', '\\', ',', '='])?;
        for name in &rec.channel_names {
            check_token("channel name", name, &[',', '='])?;
        }
        match groups.iter_mut().find(|(s, _)| *s == rec.subject_id) {
            Some((_, v)) => v.push(rec),
            None => groups.push((&rec.subject_id, vec![rec])),
        }
    }
    let mut paths = Vec::new();
    for (subject, recs) in groups {
        let first = recs[0];
        if recs.iter().any(|r| r.rate != first.rate || r.channel_names != first.channel_names) {
            return Err(Error::config(format!("subject {subject}: segments disagree on rate or channels")));
        }
        let path = dir.join(format!("{subject}.csv"));
        let mut w = BufWriter::new(fs::File::create(&path)?);
        writeln!(w, "{MAGIC}; subject={subject}; rate={}; channels={}", first.rate, first.channel_names.join(","))?;
        for (i, rec) in recs.iter().enumerate() {
            if i > 0 {
                writeln!(w)?;
            }
            for t in 0..rec.len() {
                write!(w, "{}", rec.labels[t])?;
                for stream in &rec.samples {
                    write!(w, ",{}", stream[t])?;
                }
                writeln!(w)?;
            }
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}
