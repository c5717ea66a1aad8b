//! Series files: one JSON object per line and per snapshot,
//! `{"t": <real>, "n": <int>, "edges": [[i, j], ...]}`, with 0-based
//! vertices, pairs as `[min, max]` in lexicographic order and snapshots in
//! increasing time.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rghmm_core::{DynGraph, GraphError, NetworkSeries, SeriesError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    Graph {
        line: usize,
        #[source]
        source: GraphError,
    },
    #[error("line {line}: snapshot has {found} vertices, expected {expected}")]
    VertexCount { line: usize, expected: usize, found: usize },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotLine {
    t: f64,
    n: usize,
    edges: Vec<[usize; 2]>,
}

/// Writes the canonical form of `series`. Equal series give equal bytes.
pub fn write_series<W: Write>(series: &NetworkSeries, mut out: W) -> io::Result<()> {
    for (t, g) in series.times().iter().zip(series.snapshots()) {
        let line = SnapshotLine {
            t: *t,
            n: g.n(),
            edges: g.edges().map(|e| [e.lo(), e.hi()]).collect(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn series_to_string(series: &NetworkSeries) -> String {
    let mut buf = Vec::new();
    write_series(series, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// Parses a series. Blank lines are skipped; edges may be listed in any
/// order and orientation but not repeated.
pub fn read_series<R: Read>(input: R) -> Result<NetworkSeries, FormatError> {
    let mut times = Vec::new();
    let mut graphs: Vec<DynGraph> = Vec::new();
    for (k, line) in BufReader::new(input).lines().enumerate() {
        let line_no = k + 1;
        let text = line.map_err(|e| FormatError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        let snap: SnapshotLine = serde_json::from_str(&text).map_err(|e| FormatError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if let Some(first) = graphs.first() {
            if first.n() != snap.n {
                return Err(FormatError::VertexCount {
                    line: line_no,
                    expected: first.n(),
                    found: snap.n,
                });
            }
        }
        let graph = DynGraph::from_edges(snap.n, snap.edges.iter().map(|[a, b]| (*a, *b))).map_err(|source| {
            FormatError::Graph {
                line: line_no,
                source,
            }
        })?;
        times.push(snap.t);
        graphs.push(graph);
    }
    Ok(NetworkSeries::new(times, graphs)?)
}

pub fn read_series_file(path: &Path) -> Result<NetworkSeries, FormatError> {
    let file = File::open(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_series(file)
}

pub fn write_series_file(series: &NetworkSeries, path: &Path) -> Result<(), FormatError> {
    let io_err = |source| FormatError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_series(series, BufWriter::new(file)).map_err(io_err)
}

/// The last snapshot of a series file, used as an initial graph.
pub fn read_initial_graph(path: &Path) -> Result<DynGraph, FormatError> {
    let series = read_series_file(path)?;
    Ok(series.snapshot(series.len() - 1).clone())
}
