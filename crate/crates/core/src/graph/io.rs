//! Edge-list and positions text formats.
//!
//! Edge list: one `src dst weight` triple per line, whitespace separated,
//! 1-based vertex ids, `#` starts a comment. [`write_graph`] emits a header
//! comment `# cdi-graph n=<n> directed=<bool> [dims=<d>]` so that isolated
//! trailing vertices, the undirected flag and the positions dimensionality
//! survive a round trip; without it `n` is the largest id seen and the graph is
//! directed. Weights are written in shortest round-trip decimal form, which is
//! bit-exact on reload.
//!
//! Positions sidecar: `vertex x y [z]` per line, same indexing. [`save_graph`]
//! writes it next to the edge list as `<path>.pos`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::{Edge, Graph, Positions};
use crate::error::{Error, Result};

#[derive(Debug, Default)]
struct Header {
    n: Option<usize>,
    directed: Option<bool>,
    dims: Option<usize>,
}

fn parse_header(line: &str, header: &mut Header) {
    let Some(rest) = line.trim_start_matches('#').trim().strip_prefix("cdi-graph") else {
        return;
    };
    for field in rest.split_whitespace() {
        match field.split_once('=') {
            Some(("n", v)) => header.n = v.parse().ok(),
            Some(("directed", v)) => header.directed = v.parse().ok(),
            Some(("dims", v)) => header.dims = v.parse().ok(),
            _ => {}
        }
    }
}

fn parse_index(tok: &str, line: usize) -> Result<usize> {
    let v: usize = tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad vertex id {tok:?}"),
    })?;
    if v == 0 {
        return Err(Error::Parse {
            line,
            message: "vertex ids are 1-based".into(),
        });
    }
    Ok(v - 1)
}

fn parse_float(tok: &str, line: usize) -> Result<f64> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad number {tok:?}"),
    })
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".pos");
    PathBuf::from(s)
}

/// Reads an edge list; the graph carries no positions.
pub fn read_graph(reader: impl Read) -> Result<Graph> {
    read_with_header(reader).map(|(g, _)| g)
}

fn read_with_header(reader: impl Read) -> Result<(Graph, Header)> {
    let mut header = Header::default();
    let mut edges = Vec::new();
    let mut max_id = 0;
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.starts_with('#') {
            parse_header(trimmed, &mut header);
            continue;
        }
        let content = trimmed.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected `src dst weight`, found {} fields", toks.len()),
            });
        }
        let src = parse_index(toks[0], lineno)?;
        let dst = parse_index(toks[1], lineno)?;
        let weight = parse_float(toks[2], lineno)?;
        if src == dst {
            return Err(Error::Parse {
                line: lineno,
                message: format!("self-loop at vertex {}", src + 1),
            });
        }
        max_id = max_id.max(src + 1).max(dst + 1);
        edges.push(Edge::new(src, dst, weight));
    }
    let n = header.n.unwrap_or(max_id);
    if n < max_id {
        return Err(Error::InvalidGraph(format!(
            "header declares {n} vertices but edges reference vertex {max_id}"
        )));
    }
    let g = Graph::from_edges(n, edges, header.directed.unwrap_or(true))?;
    Ok((g, header))
}

pub fn write_graph(g: &Graph, mut w: impl Write) -> Result<()> {
    write!(w, "# cdi-graph n={} directed={}", g.n(), g.is_directed())?;
    if let Some(p) = g.positions() {
        write!(w, " dims={}", p.dims())?;
    }
    writeln!(w)?;
    for e in g.edges() {
        writeln!(w, "{} {} {}", e.src + 1, e.dst + 1, e.weight)?;
    }
    Ok(())
}

pub fn write_positions(p: &Positions, mut w: impl Write) -> Result<()> {
    for (i, pt) in p.iter().enumerate() {
        write!(w, "{}", i + 1)?;
        for c in pt {
            write!(w, " {c}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads a positions sidecar. When `dims` is given every row must carry that
/// many coordinates.
pub fn load_positions(path: &Path, n: usize, dims: Option<usize>) -> Result<Positions> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut found_dims = dims;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        let v = parse_index(toks[0], lineno)?;
        let coords = toks[1..]
            .iter()
            .map(|t| parse_float(t, lineno))
            .collect::<Result<Vec<_>>>()?;
        let expected = *found_dims.get_or_insert(coords.len());
        if coords.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: coords.len(),
            });
        }
        if v >= n {
            return Err(Error::Parse {
                line: lineno,
                message: format!("vertex {} beyond the graph's {n} vertices", v + 1),
            });
        }
        if rows[v].replace(coords).is_some() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("duplicate position for vertex {}", v + 1),
            });
        }
    }
    let dims = found_dims.unwrap_or(2);
    let mut flat = Vec::with_capacity(n * dims);
    for (v, row) in rows.into_iter().enumerate() {
        let row = row.ok_or_else(|| Error::InvalidGraph(format!("vertex {} has no position", v + 1)))?;
        flat.extend(row);
    }
    Positions::new(dims, flat)
}

/// Loads an edge list, attaching `<path>.pos` positions when that file exists.
pub fn load_graph(path: &Path) -> Result<Graph> {
    let (g, header) = read_with_header(File::open(path)?)?;
    let pos_path = sidecar(path);
    if pos_path.exists() {
        let n = g.n();
        return g.with_positions(load_positions(&pos_path, n, header.dims)?);
    }
    Ok(g)
}

/// Writes the edge list to `path` and, when the graph has positions, the
/// sidecar to `<path>.pos`.
pub fn save_graph(g: &Graph, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_graph(g, &mut w)?;
    w.flush()?;
    if let Some(p) = g.positions() {
        let mut w = BufWriter::new(File::create(sidecar(path))?);
        write_positions(p, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_knnr;

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("cdi-io-{}-{name}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join("g.edges")
    }

    #[test]
    fn three_cycle_round_trip() {
        let g = Graph::from_edges(
            3,
            [Edge::new(0, 1, 0.1), Edge::new(1, 2, 1.0 / 3.0), Edge::new(2, 0, 2.5)],
            true,
        )
        .unwrap();
        let path = tmp("cycle");
        save_graph(&g, &path).unwrap();
        assert_eq!(load_graph(&path).unwrap(), g);
    }

    #[test]
    fn positions_round_trip() {
        let g = generate_knnr(30, 4, &[1.0, 2.0, 0.5], 2).unwrap();
        let path = tmp("pos");
        save_graph(&g, &path).unwrap();
        assert_eq!(load_graph(&path).unwrap(), g);
    }

    #[test]
    fn rejects_self_loop() {
        let err = read_graph("1 2 1.0\n1 1 1.0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn malformed_line_reports_number() {
        let err = read_graph("# comment\n1 2 1.0\n2 x 1.0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = read_graph("1 2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn duplicate_edge_rejected() {
        let err = read_graph("1 2 1.0\n1 2 2.0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::InvalidGraph(_)), "{err}");
    }

    #[test]
    fn sidecar_dimension_mismatch() {
        let path = tmp("mismatch");
        std::fs::write(&path, "# cdi-graph n=2 directed=true dims=3\n1 2 1\n").unwrap();
        std::fs::write(sidecar(&path), "1 0 0\n2 1 1\n").unwrap();
        let err = load_graph(&path).unwrap_err();
        assert!(
            matches!(err, Error::DimensionMismatch { expected: 3, found: 2 }),
            "{err}"
        );
    }

    #[test]
    fn header_keeps_isolated_vertices_and_flag() {
        let g = Graph::undirected_from_pairs(4, [Edge::new(0, 1, 1.0)]).unwrap();
        let mut buf = Vec::new();
        write_graph(&g, &mut buf).unwrap();
        let back = read_graph(buf.as_slice()).unwrap();
        assert_eq!(back, g);
        assert!(!back.is_directed());
    }
}
