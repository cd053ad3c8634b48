//! Text formats for externally supplied track models.
//!
//! Matrices use the coordinate flavour of the MatrixMarket exchange format
//! (1-based indices, `general` or `symmetric` storage). Node, element and
//! support tables are CSV with fixed headers.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ElementRecord, NodeRecord, RawModel, SupportElement, Triplet};
use crate::error::{Error, Result};

pub const MASS_FILE: &str = "mass.mtx";
pub const STIFFNESS_FILE: &str = "stiffness.mtx";
pub const DAMPING_FILE: &str = "damping.mtx";
pub const NODES_FILE: &str = "nodes.csv";
pub const ELEMENTS_FILE: &str = "elements.csv";
pub const SUPPORTS_FILE: &str = "supports.csv";

/// Paths of the files making up one model.
#[derive(Debug, Clone)]
pub struct ModelFiles {
    pub mass: PathBuf,
    pub stiffness: PathBuf,
    pub damping: Option<PathBuf>,
    pub nodes: PathBuf,
    pub elements: PathBuf,
    pub supports: Option<PathBuf>,
}

impl ModelFiles {
    /// Conventional file names inside a model directory. Damping and
    /// supports are optional and only picked up when present.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        let optional = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };
        ModelFiles {
            mass: dir.join(MASS_FILE),
            stiffness: dir.join(STIFFNESS_FILE),
            damping: optional(DAMPING_FILE),
            nodes: dir.join(NODES_FILE),
            elements: dir.join(ELEMENTS_FILE),
            supports: optional(SUPPORTS_FILE),
        }
    }
}

/// A matrix as read from a coordinate file, symmetric storage already expanded.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Triplet>,
}

pub fn load_model(files: &ModelFiles) -> Result<RawModel> {
    let mass = read_matrix_market(&files.mass)?;
    let stiffness = read_matrix_market(&files.stiffness)?;
    let n_dofs = stiffness.rows;
    for (path, m) in [(&files.mass, &mass), (&files.stiffness, &stiffness)] {
        check_square(path, m, n_dofs)?;
    }
    let damping = match &files.damping {
        Some(path) => {
            let c = read_matrix_market(path)?;
            check_square(path, &c, n_dofs)?;
            c.entries
        }
        None => Vec::new(),
    };
    let nodes = read_nodes(&files.nodes)?;
    let elements = read_elements(&files.elements)?;
    let supports = match &files.supports {
        Some(path) => read_supports(path)?,
        None => Vec::new(),
    };
    let model = RawModel {
        n_dofs,
        mass: mass.entries,
        damping,
        stiffness: stiffness.entries,
        nodes,
        elements,
        supports,
    };
    model.check_indices()?;
    Ok(model)
}

pub fn load_model_dir(dir: impl AsRef<Path>) -> Result<RawModel> {
    load_model(&ModelFiles::in_dir(dir))
}

/// Writes every table of `model` into `dir` using the conventional names.
pub fn write_model_dir(model: &RawModel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let n = model.n_dofs;
    write_matrix_market(dir.join(MASS_FILE), n, &model.mass)?;
    write_matrix_market(dir.join(STIFFNESS_FILE), n, &model.stiffness)?;
    if !model.damping.is_empty() {
        write_matrix_market(dir.join(DAMPING_FILE), n, &model.damping)?;
    }
    write_nodes(dir.join(NODES_FILE), &model.nodes)?;
    write_elements(dir.join(ELEMENTS_FILE), &model.elements)?;
    if !model.supports.is_empty() {
        write_supports(dir.join(SUPPORTS_FILE), &model.supports)?;
    }
    Ok(())
}

fn check_square(path: &Path, m: &CoordinateMatrix, n: usize) -> Result<()> {
    if m.rows != m.cols {
        return Err(Error::parse(
            path,
            0,
            format!("matrix is {}x{}, expected square", m.rows, m.cols),
        ));
    }
    if m.rows != n {
        return Err(Error::parse(
            path,
            0,
            format!("matrix has {} rows, model has {n} dofs", m.rows),
        ));
    }
    Ok(())
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<CoordinateMatrix> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_market(BufReader::new(file), path)
}

pub(crate) fn parse_matrix_market(reader: impl BufRead, path: &Path) -> Result<CoordinateMatrix> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    let symmetric = parse_header(&header).map_err(|m| Error::parse(path, 1, m))?;

    let mut size: Option<(usize, usize, usize)> = None;
    let mut entries = Vec::new();
    let mut seen = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        let Some((rows, cols, nnz)) = size else {
            let parse = |s: &str, what: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::parse(path, lineno, format!("cannot parse {what} `{s}`")))
            };
            let dims = (
                parse(fields[0], "rows")?,
                parse(fields[1], "cols")?,
                parse(fields[2], "entry count")?,
            );
            size = Some(dims);
            continue;
        };
        if seen == nnz {
            return Err(Error::parse(
                path,
                lineno,
                format!("more entries than the declared {nnz}"),
            ));
        }
        let index = |s: &str, bound: usize, what: &'static str| -> Result<usize> {
            let i: usize = s
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("cannot parse {what} index `{s}`")))?;
            if i == 0 || i > bound {
                return Err(Error::IndexOutOfRange { what, index: i, bound });
            }
            Ok(i - 1)
        };
        let row = index(fields[0], rows, "row")?;
        let col = index(fields[1], cols, "column")?;
        let value: f64 = fields[2]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("cannot parse value `{}`", fields[2])))?;
        if !value.is_finite() {
            return Err(Error::parse(path, lineno, "non-finite value"));
        }
        entries.push(Triplet { row, col, value });
        if symmetric && row != col {
            entries.push(Triplet {
                row: col,
                col: row,
                value,
            });
        }
        seen += 1;
    }
    let (rows, cols, nnz) = size.ok_or_else(|| Error::parse(path, 1, "missing size line"))?;
    if seen != nnz {
        return Err(Error::parse(path, 0, format!("declared {nnz} entries, found {seen}")));
    }
    Ok(CoordinateMatrix { rows, cols, entries })
}

fn parse_header(line: &str) -> std::result::Result<bool, String> {
    let words: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    match words.as_slice() {
        [banner, object, format, field, symmetry]
            if banner == "%%matrixmarket" && object == "matrix" && format == "coordinate" =>
        {
            if field != "real" && field != "integer" {
                return Err(format!("unsupported field `{field}` (expected real)"));
            }
            match symmetry.as_str() {
                "general" => Ok(false),
                "symmetric" => Ok(true),
                other => Err(format!("unsupported symmetry `{other}`")),
            }
        }
        _ => Err("expected `%%MatrixMarket matrix coordinate real general|symmetric`".into()),
    }
}

/// Writes `entries` in general coordinate storage. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_matrix_market(path: impl AsRef<Path>, n: usize, entries: &[Triplet]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(32 * entries.len() + 64);
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{n} {n} {}", entries.len());
    for t in entries {
        let _ = writeln!(out, "{} {} {:e}", t.row + 1, t.col + 1, t.value);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeRow {
    node_id: usize,
    s: f64,
    dof_w: i64,
    dof_theta: i64,
    blocked_w: u8,
    blocked_theta: u8,
}

#[derive(Debug, Serialize, Deserialize)]
struct ElementRow {
    element_id: usize,
    node_a: usize,
    node_b: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct SupportRow {
    dof: usize,
    k: f64,
    c: f64,
    gap: f64,
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let found: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    if found != header {
        return Err(Error::parse(path, 1, format!("expected header `{}`", header.join(","))));
    }
    reader
        .deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        writer.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn optional_dof(path: &Path, line: usize, v: i64) -> Result<Option<usize>> {
    match v {
        -1 => Ok(None),
        v if v >= 0 => Ok(Some(v as usize)),
        v => Err(Error::parse(path, line, format!("invalid dof id {v}"))),
    }
}

fn flag(path: &Path, line: usize, v: u8) -> Result<bool> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        v => Err(Error::parse(
            path,
            line,
            format!("blocked flag must be 0 or 1, found {v}"),
        )),
    }
}

pub fn read_nodes(path: impl AsRef<Path>) -> Result<Vec<NodeRecord>> {
    let path = path.as_ref();
    let rows: Vec<NodeRow> = read_csv(
        path,
        &["node_id", "s", "dof_w", "dof_theta", "blocked_w", "blocked_theta"],
    )?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| {
            let line = i + 2;
            Ok(NodeRecord {
                id: r.node_id,
                s: r.s,
                dof_w: optional_dof(path, line, r.dof_w)?,
                dof_theta: optional_dof(path, line, r.dof_theta)?,
                blocked_w: flag(path, line, r.blocked_w)?,
                blocked_theta: flag(path, line, r.blocked_theta)?,
            })
        })
        .collect()
}

pub fn write_nodes(path: impl AsRef<Path>, nodes: &[NodeRecord]) -> Result<()> {
    let dof = |d: Option<usize>| d.map_or(-1, |d| d as i64);
    write_csv(
        path.as_ref(),
        nodes.iter().map(|n| NodeRow {
            node_id: n.id,
            s: n.s,
            dof_w: dof(n.dof_w),
            dof_theta: dof(n.dof_theta),
            blocked_w: n.blocked_w as u8,
            blocked_theta: n.blocked_theta as u8,
        }),
    )
}

pub fn read_elements(path: impl AsRef<Path>) -> Result<Vec<ElementRecord>> {
    let rows: Vec<ElementRow> = read_csv(path.as_ref(), &["element_id", "node_a", "node_b"])?;
    Ok(rows
        .into_iter()
        .map(|r| ElementRecord {
            id: r.element_id,
            node_a: r.node_a,
            node_b: r.node_b,
        })
        .collect())
}

pub fn write_elements(path: impl AsRef<Path>, elements: &[ElementRecord]) -> Result<()> {
    write_csv(
        path.as_ref(),
        elements.iter().map(|e| ElementRow {
            element_id: e.id,
            node_a: e.node_a,
            node_b: e.node_b,
        }),
    )
}

pub fn read_supports(path: impl AsRef<Path>) -> Result<Vec<SupportElement>> {
    let path = path.as_ref();
    let rows: Vec<SupportRow> = read_csv(path, &["dof", "k", "c", "gap"])?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| SupportElement::new(r.dof, r.k, r.c, r.gap).map_err(|e| Error::parse(path, i + 2, e.to_string())))
        .collect()
}

pub fn write_supports(path: impl AsRef<Path>, supports: &[SupportElement]) -> Result<()> {
    write_csv(
        path.as_ref(),
        supports.iter().map(|s| SupportRow {
            dof: s.dof,
            k: s.stiffness,
            c: s.damping,
            gap: s.gap,
        }),
    )
}
