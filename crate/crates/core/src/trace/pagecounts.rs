//! Reader for the hourly `pagecounts-raw` dumps.
//!
//! Each line is `project title count bytes`, separated by single spaces. Files
//! may be plain text or gzip (possibly multi-member); the format is detected
//! from the magic bytes, not the file name.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourlyCount {
    pub hour_index: u64,
    pub count: u64,
}

/// Outcome of scanning one dump file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PagecountTally {
    /// Sum of the count field over lines of the requested project.
    pub total: u64,
    /// Non-blank lines seen.
    pub lines: u64,
    pub malformed: u64,
}

/// Sums the request counts of `project_code` in one dump. Malformed lines are
/// skipped; more than half malformed makes the whole file corrupt.
pub fn parse_pagecounts<R: Read>(stream: R, project_code: &str) -> Result<PagecountTally> {
    let mut buffered = BufReader::new(stream);
    let gz = buffered.fill_buf()?.starts_with(&GZIP_MAGIC);
    let tally = if gz {
        scan_lines(BufReader::new(MultiGzDecoder::new(buffered)), project_code.as_bytes())?
    } else {
        scan_lines(buffered, project_code.as_bytes())?
    };
    if tally.malformed * 2 > tally.lines {
        return Err(Error::CorruptInput { lines: tally.lines, malformed: tally.malformed });
    }
    Ok(tally)
}

fn scan_lines<R: BufRead>(mut reader: R, project: &[u8]) -> Result<PagecountTally> {
    let mut tally = PagecountTally::default();
    let mut line = Vec::with_capacity(256);
    loop {
        line.clear();
        if reader.read_until(b'\n', &mut line)? == 0 {
            break;
        }
        let trimmed = trim_eol(&line);
        if trimmed.is_empty() {
            continue;
        }
        tally.lines += 1;
        match split_record(trimmed) {
            Some((code, count)) => {
                if code == project {
                    tally.total += count;
                }
            }
            None => tally.malformed += 1,
        }
    }
    Ok(tally)
}

fn trim_eol(line: &[u8]) -> &[u8] {
    let mut end = line.len();
    while end > 0 && matches!(line[end - 1], b'\n' | b'\r') {
        end -= 1;
    }
    &line[..end]
}

fn split_record(line: &[u8]) -> Option<(&[u8], u64)> {
    let mut fields = line.split(|b| *b == b' ');
    let project = fields.next().filter(|f| !f.is_empty())?;
    let _title = fields.next().filter(|f| !f.is_empty())?;
    let count = parse_u64(fields.next()?)?;
    parse_u64(fields.next()?)?;
    if fields.next().is_some() {
        return None;
    }
    Some((project, count))
}

fn parse_u64(field: &[u8]) -> Option<u64> {
    std::str::from_utf8(field).ok()?.parse().ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileStatus {
    Ok,
    Corrupt,
    Unreadable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileReport {
    pub name: String,
    pub hour_index: u64,
    pub status: FileStatus,
    pub lines: u64,
    pub malformed: u64,
    pub total: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub project_code: String,
    /// Epoch of hour index 0 (0 when file names carry no timestamp).
    pub origin_epoch: i64,
    pub files: Vec<FileReport>,
    /// Hours with no usable file; they are filled with zero counts.
    pub gap_hours: Vec<u64>,
    pub lines_skipped: u64,
    pub total_requests: u64,
}

#[derive(Debug, Clone)]
pub struct Ingest {
    pub hourly: Vec<HourlyCount>,
    pub report: IngestReport,
}

/// Reads every regular file in `dir` (sorted by name) as one hour of dump.
///
/// Hours are placed by the `YYYYMMDD-HHMMSS` stamp in the file name when every
/// file carries one, otherwise by sort position. Corrupt or unreadable files
/// and missing hours become zero-count hours listed in the report.
pub fn ingest_directory(dir: &Path, project_code: &str) -> Result<Ingest> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::insufficient(format!("no pagecount files in {}", dir.display())));
    }

    let names: Vec<String> =
        paths.iter().map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned()).collect();
    let stamps: Option<Vec<i64>> = names.iter().map(|n| hour_stamp(n)).collect();
    let (origin_epoch, hour_of): (i64, Vec<u64>) = match stamps {
        Some(stamps) => {
            let origin = *stamps.iter().min().expect("non-empty");
            (origin, stamps.iter().map(|s| ((s - origin) / 3600) as u64).collect())
        }
        None => (0, (0..paths.len() as u64).collect()),
    };

    let files: Vec<FileReport> = paths
        .par_iter()
        .zip(names.par_iter())
        .zip(hour_of.par_iter())
        .map(|((path, name), &hour_index)| {
            let outcome = File::open(path).map_err(Error::from).and_then(|f| parse_pagecounts(f, project_code));
            let mut report = FileReport {
                name: name.clone(),
                hour_index,
                status: FileStatus::Ok,
                lines: 0,
                malformed: 0,
                total: 0,
                error: None,
            };
            match outcome {
                Ok(t) => {
                    report.lines = t.lines;
                    report.malformed = t.malformed;
                    report.total = t.total;
                }
                Err(Error::CorruptInput { lines, malformed }) => {
                    report.status = FileStatus::Corrupt;
                    report.lines = lines;
                    report.malformed = malformed;
                }
                Err(e) => {
                    report.status = FileStatus::Unreadable;
                    report.error = Some(e.to_string());
                }
            }
            report
        })
        .collect();

    if files.iter().all(|f| f.status == FileStatus::Unreadable) {
        return Err(Error::insufficient(format!("no readable pagecount files in {}", dir.display())));
    }

    let mut by_hour: BTreeMap<u64, Option<u64>> = BTreeMap::new();
    for f in &files {
        let slot = by_hour.entry(f.hour_index).or_insert(None);
        if f.status == FileStatus::Ok {
            *slot = Some(slot.unwrap_or(0) + f.total);
        }
    }
    let last_hour = *by_hour.keys().next_back().expect("non-empty");
    let mut hourly = Vec::with_capacity(last_hour as usize + 1);
    let mut gap_hours = Vec::new();
    for hour_index in 0..=last_hour {
        let count = match by_hour.get(&hour_index).copied().flatten() {
            Some(c) => c,
            None => {
                gap_hours.push(hour_index);
                0
            }
        };
        hourly.push(HourlyCount { hour_index, count });
    }

    let report = IngestReport {
        project_code: project_code.to_string(),
        origin_epoch,
        lines_skipped: files.iter().map(|f| f.malformed).sum(),
        total_requests: hourly.iter().map(|h| h.count).sum(),
        files,
        gap_hours,
    };
    Ok(Ingest { hourly, report })
}

/// Epoch seconds of the first `YYYYMMDD-HH` stamp in a file name, truncated to the hour.
fn hour_stamp(name: &str) -> Option<i64> {
    let b = name.as_bytes();
    (0..b.len().saturating_sub(10)).find_map(|i| {
        let w = &b[i..i + 11];
        let digits = |r: std::ops::Range<usize>| w[r.clone()].iter().all(u8::is_ascii_digit).then(|| {
            std::str::from_utf8(&w[r]).ok().and_then(|s| s.parse::<i64>().ok())
        })?;
        if w[8] != b'-' {
            return None;
        }
        let (y, m, d, h) = (digits(0..4)?, digits(4..6)?, digits(6..8)?, digits(9..11)?);
        if !(1..=12).contains(&m) || !(1..=31).contains(&d) || h > 23 {
            return None;
        }
        Some(days_from_civil(y, m, d) * 86_400 + h * 3600)
    })
}

/// Days since 1970-01-01 in the proleptic Gregorian calendar.
fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let mp = (m + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}
