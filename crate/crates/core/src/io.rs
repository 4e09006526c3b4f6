//! File formats: box CSV, tree JSON lines, search results CSV, bench CSV.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::{BenchRecord, Phase};
use crate::distributed::{ChildLink, TreeEntry};
use crate::error::{Error, Result};
use crate::geometry::{BBox, Name, Region};

#[derive(Serialize, Deserialize)]
struct BoxRow {
    name: u64,
    xmin: f64,
    ymin: f64,
    xmax: f64,
    ymax: f64,
}

#[derive(Serialize, Deserialize)]
struct LinkLine {
    name: u64,
    region: [f64; 4],
}

#[derive(Serialize, Deserialize)]
struct TreeLine {
    name: u64,
    #[serde(rename = "box")]
    bbox: [f64; 4],
    lt: Option<LinkLine>,
    gt: Option<LinkLine>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(io_err(path))
}

pub fn write_boxes<W: Write>(out: W, boxes: &[BBox], label: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for b in boxes {
        w.serialize(BoxRow {
            name: b.name.0,
            xmin: b.x_min,
            ymin: b.y_min,
            xmax: b.x_max,
            ymax: b.y_max,
        })
        .map_err(|e| csv_err(label, e))?;
    }
    w.flush().map_err(io_err(label))
}

/// Reads boxes, validating each one. Duplicate names are left to the
/// consumers that forbid them.
pub fn read_boxes<R: Read>(input: R, label: &Path) -> Result<Vec<BBox>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| csv_err(label, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["name", "xmin", "ymin", "xmax", "ymax"] {
        return Err(Error::Parse {
            path: label.to_path_buf(),
            line: 1,
            message: "expected header name,xmin,ymin,xmax,ymax".into(),
        });
    }
    let mut boxes = Vec::new();
    for row in r.deserialize::<BoxRow>() {
        let row = row.map_err(|e| csv_err(label, e))?;
        let b = BBox::new(row.name, row.xmin, row.ymin, row.xmax, row.ymax).map_err(|e| Error::Parse {
            path: label.to_path_buf(),
            line: boxes.len() + 2,
            message: e.to_string(),
        })?;
        boxes.push(b);
    }
    Ok(boxes)
}

pub fn write_boxes_file(path: &Path, boxes: &[BBox]) -> Result<()> {
    write_boxes(create(path)?, boxes, path)
}

pub fn read_boxes_file(path: &Path) -> Result<Vec<BBox>> {
    read_boxes(open(path)?, path)
}

/// One JSON object per entry, sorted by name.
pub fn write_tree<W: Write>(mut out: W, entries: &[(Name, TreeEntry)], label: &Path) -> Result<()> {
    let mut sorted: Vec<&(Name, TreeEntry)> = entries.iter().collect();
    sorted.sort_by_key(|(n, _)| *n);
    let link = |c: &Option<ChildLink>| {
        c.map(|c| LinkLine {
            name: c.name.0,
            region: c.region.coords(),
        })
    };
    for (name, e) in sorted {
        let line = TreeLine {
            name: name.0,
            bbox: e.bbox.coords(),
            lt: link(&e.lt),
            gt: link(&e.gt),
        };
        serde_json::to_writer(&mut out, &line).map_err(|e| Error::Parse {
            path: label.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        out.write_all(b"\n").map_err(io_err(label))?;
    }
    out.flush().map_err(io_err(label))
}

pub fn read_tree<R: Read>(input: R, label: &Path) -> Result<Vec<(Name, TreeEntry)>> {
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line.map_err(io_err(label))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: label.to_path_buf(),
            line: i + 1,
            message,
        };
        let t: TreeLine = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let [x0, y0, x1, y1] = t.bbox;
        let bbox = BBox::new(t.name, x0, y0, x1, y1).map_err(|e| parse_err(e.to_string()))?;
        let link = |l: Option<LinkLine>| {
            l.map(|l| ChildLink {
                name: Name(l.name),
                region: Region::from_coords(l.region),
            })
        };
        entries.push((
            Name(t.name),
            TreeEntry {
                bbox,
                lt: link(t.lt),
                gt: link(t.gt),
            },
        ));
    }
    Ok(entries)
}

pub fn write_tree_file(path: &Path, entries: &[(Name, TreeEntry)]) -> Result<()> {
    write_tree(create(path)?, entries, path)
}

pub fn read_tree_file(path: &Path) -> Result<Vec<(Name, TreeEntry)>> {
    read_tree(open(path)?, path)
}

/// `query,matches` with `;`-separated ascending matches, rows by query.
pub fn write_results<W: Write>(out: W, results: &BTreeMap<Name, Vec<Name>>, label: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["query", "matches"]).map_err(|e| csv_err(label, e))?;
    for (q, matches) in results {
        if matches.is_empty() {
            continue;
        }
        let joined = matches.iter().map(Name::to_string).collect::<Vec<_>>().join(";");
        w.write_record([q.to_string(), joined]).map_err(|e| csv_err(label, e))?;
    }
    w.flush().map_err(io_err(label))
}

pub fn read_results<R: Read>(input: R, label: &Path) -> Result<BTreeMap<Name, Vec<Name>>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(label, e))?;
        let bad = |m: &str| Error::Parse {
            path: label.to_path_buf(),
            line: i + 2,
            message: m.to_string(),
        };
        let q: u64 = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad query name"))?;
        let matches = rec
            .get(1)
            .ok_or_else(|| bad("missing matches"))?
            .split(';')
            .map(|s| s.parse::<u64>().map(Name).map_err(|_| bad("bad match name")))
            .collect::<Result<Vec<_>>>()?;
        out.insert(Name(q), matches);
    }
    Ok(out)
}

pub fn write_results_file(path: &Path, results: &BTreeMap<Name, Vec<Name>>) -> Result<()> {
    write_results(create(path)?, results, path)
}

#[derive(Serialize, Deserialize)]
struct BenchRow {
    phase: Phase,
    n: usize,
    workers: usize,
    repeat: usize,
    seconds: f64,
}

pub fn write_bench<W: Write>(out: W, records: &[BenchRecord], label: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(BenchRow {
            phase: r.phase,
            n: r.n,
            workers: r.workers,
            repeat: r.repeat,
            seconds: r.seconds,
        })
        .map_err(|e| csv_err(label, e))?;
    }
    w.flush().map_err(io_err(label))
}

pub fn read_bench<R: Read>(input: R, label: &Path) -> Result<Vec<BenchRecord>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize::<BenchRow>()
        .map(|row| {
            let row = row.map_err(|e| csv_err(label, e))?;
            Ok(BenchRecord {
                phase: row.phase,
                n: row.n,
                workers: row.workers,
                repeat: row.repeat,
                seconds: row.seconds,
            })
        })
        .collect()
}

pub fn write_bench_file(path: &Path, records: &[BenchRecord]) -> Result<()> {
    write_bench(create(path)?, records, path)
}

pub fn read_bench_file(path: &Path) -> Result<Vec<BenchRecord>> {
    read_bench(open(path)?, path)
}

/// Label used for in-memory readers and writers in error messages.
pub fn memory_label() -> PathBuf {
    PathBuf::from("<memory>")
}
