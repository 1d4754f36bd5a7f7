//! Plain-text graph and dense-matrix files.
//!
//! Graph file:
//!
//! ```text
//! n <V>
//! <x> <y>        (V lines, meters)
//! <i> <j> <w>    (one line per undirected edge, i < j)
//! ```
//!
//! Matrix file: a line with the order `m`, then `m` rows of `m` decimals.
//! Floats are written in shortest round-trip form, so reading a written
//! file reproduces every value bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{Point, WeightedGraph};

pub fn graph_to_text(g: &WeightedGraph) -> String {
    let mut out = format!("n {}\n", g.n());
    for p in g.coords() {
        let _ = writeln!(out, "{:?} {:?}", p.x, p.y);
    }
    for (i, j, w) in g.edges() {
        let _ = writeln!(out, "{i} {j} {w:?}");
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|e| parse_err(line, format!("bad number '{tok}': {e}")))
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|e| parse_err(line, format!("bad index '{tok}': {e}")))
}

/// Non-blank lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, toks)| !toks.is_empty())
}

pub fn graph_from_text(text: &str) -> Result<WeightedGraph> {
    let mut lines = content_lines(text);
    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "empty graph file"))?;
    let n = match header.as_slice() {
        ["n", v] => parse_usize(v, hl)?,
        _ => return Err(parse_err(hl, "expected header 'n <V>'")),
    };
    let mut coords = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, toks) = lines
            .next()
            .ok_or_else(|| parse_err(hl, format!("expected {n} coordinate lines")))?;
        match toks.as_slice() {
            [x, y] => coords.push(Point::new(parse_f64(x, ln)?, parse_f64(y, ln)?)),
            _ => return Err(parse_err(ln, "expected 'x y'")),
        }
    }
    let mut adjacency = DMatrix::zeros(n, n);
    for (ln, toks) in lines {
        let [i, j, w] = toks.as_slice() else {
            return Err(parse_err(ln, "expected 'i j w'"));
        };
        let (i, j, w) = (parse_usize(i, ln)?, parse_usize(j, ln)?, parse_f64(w, ln)?);
        if i >= n || j >= n || i == j {
            return Err(parse_err(ln, format!("invalid edge ({i}, {j}) for {n} agents")));
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(parse_err(ln, format!("edge weight must be positive, got {w}")));
        }
        if adjacency[(i, j)] != 0.0 {
            return Err(parse_err(ln, format!("duplicate edge ({i}, {j})")));
        }
        adjacency[(i, j)] = w;
        adjacency[(j, i)] = w;
    }
    WeightedGraph::new(coords, adjacency)
}

pub fn write_graph(g: &WeightedGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, graph_to_text(g)).map_err(|e| Error::io(path, e))
}

pub fn read_graph(path: impl AsRef<Path>) -> Result<WeightedGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    graph_from_text(&text)
}

pub fn matrix_to_text(m: &DMatrix<f64>) -> String {
    let mut out = format!("{}\n", m.nrows());
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

pub fn matrix_from_text(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = content_lines(text);
    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "empty matrix file"))?;
    let m = match header.as_slice() {
        [v] => parse_usize(v, hl)?,
        _ => return Err(parse_err(hl, "expected the matrix order")),
    };
    let mut out = DMatrix::zeros(m, m);
    for r in 0..m {
        let (ln, toks) = lines
            .next()
            .ok_or_else(|| parse_err(hl, format!("expected {m} rows")))?;
        if toks.len() != m {
            return Err(parse_err(ln, format!("expected {m} entries, got {}", toks.len())));
        }
        for (c, tok) in toks.iter().enumerate() {
            out[(r, c)] = parse_f64(tok, ln)?;
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing data after matrix"));
    }
    Ok(out)
}
