//! Reader and writer for the TUDataset flat-file layout.
//!
//! A dataset `NAME` lives in one directory:
//!
//! | file | content |
//! |------|---------|
//! | `NAME_A.txt` | one `u, v` edge per line, 1-indexed global vertex ids |
//! | `NAME_graph_indicator.txt` | graph id of vertex `i` on line `i` |
//! | `NAME_graph_labels.txt` | class of graph `j` on line `j` |
//! | `NAME_node_labels.txt` | optional categorical label of vertex `i` |

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::{Dataset, Graph};
use crate::scalar::Scalar;

struct Lines {
    path: PathBuf,
    rows: Vec<(usize, Vec<i64>)>,
}

fn read_rows(path: &Path) -> Result<Lines> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut values = Vec::new();
        for tok in line.split(',') {
            let tok = tok.trim();
            let v = tok.parse::<i64>().or_else(|_| {
                // Some distributions write integral labels as "1.0".
                tok.parse::<f64>()
                    .ok()
                    .filter(|f| f.fract() == 0.0 && f.is_finite())
                    .map(|f| f as i64)
                    .ok_or(())
            });
            match v {
                Ok(v) => values.push(v),
                Err(()) => {
                    return Err(Error::Parse {
                        file: path.to_path_buf(),
                        line: i + 1,
                        message: format!("expected an integer, found {tok:?}"),
                    })
                }
            }
        }
        rows.push((i + 1, values));
    }
    Ok(Lines {
        path: path.to_path_buf(),
        rows,
    })
}

fn parse_err(lines: &Lines, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        file: lines.path.clone(),
        line,
        message: message.into(),
    }
}

/// Parses `dir/NAME_*.txt` into a [`Dataset`].
///
/// Vertices are renumbered from 0 within each graph, edges given in both
/// orientations collapse to one undirected edge with weight 1, and graph class
/// labels are remapped to `0..class_count` in ascending order of the raw value.
pub fn parse_tudataset<S: Scalar>(dir: impl AsRef<Path>, name: &str) -> Result<Dataset<S>> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let file = |suffix: &str| dir.join(format!("{name}_{suffix}.txt"));

    let indicator = read_rows(&file("graph_indicator"))?;
    let labels = read_rows(&file("graph_labels"))?;
    let adjacency = read_rows(&file("A"))?;
    let node_labels_path = file("node_labels");
    let node_labels = if node_labels_path.exists() {
        Some(read_rows(&node_labels_path)?)
    } else {
        None
    };

    // Global vertex -> (graph slot, local index).
    let graph_ids: BTreeSet<i64> = indicator.rows.iter().map(|(_, r)| r[0]).collect();
    let slot_of: BTreeMap<i64, usize> = graph_ids.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    let graph_count = graph_ids.len();
    if graph_count == 0 {
        return Err(parse_err(&indicator, 0, "no vertices"));
    }
    let mut sizes = vec![0usize; graph_count];
    let mut placement = Vec::with_capacity(indicator.rows.len());
    for (_, row) in &indicator.rows {
        if row.len() != 1 {
            return Err(parse_err(&indicator, 0, "expected one graph id per line"));
        }
        let slot = slot_of[&row[0]];
        placement.push((slot, sizes[slot]));
        sizes[slot] += 1;
    }
    let total_vertices = placement.len();

    if labels.rows.len() != graph_count {
        return Err(parse_err(
            &labels,
            labels.rows.last().map_or(0, |r| r.0),
            format!(
                "{} graph labels for {} graphs",
                labels.rows.len(),
                graph_count
            ),
        ));
    }
    let raw_classes: Vec<i64> = labels.rows.iter().map(|(_, r)| r[0]).collect();
    let class_values: BTreeSet<i64> = raw_classes.iter().copied().collect();
    let class_of: BTreeMap<i64, usize> = class_values.iter().enumerate().map(|(i, &c)| (c, i)).collect();

    let mut categories: Option<Vec<Vec<u32>>> = None;
    if let Some(nl) = &node_labels {
        if nl.rows.len() != total_vertices {
            return Err(parse_err(
                nl,
                nl.rows.last().map_or(0, |r| r.0),
                format!("{} node labels for {} vertices", nl.rows.len(), total_vertices),
            ));
        }
        let mut per_graph: Vec<Vec<u32>> = sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for ((line, row), &(slot, _)) in nl.rows.iter().zip(&placement) {
            let value = u32::try_from(row[0])
                .map_err(|_| parse_err(nl, *line, format!("negative node label {}", row[0])))?;
            per_graph[slot].push(value);
        }
        categories = Some(per_graph);
    }

    let mut edges: Vec<Vec<(usize, usize, S)>> = vec![Vec::new(); graph_count];
    for (line, row) in &adjacency.rows {
        if row.len() != 2 {
            return Err(parse_err(&adjacency, *line, "expected \"u, v\""));
        }
        let (a, b) = (row[0], row[1]);
        let in_range = |x: i64| x >= 1 && (x as usize) <= total_vertices;
        if !in_range(a) || !in_range(b) {
            return Err(parse_err(
                &adjacency,
                *line,
                format!("vertex id out of range 1..={total_vertices}"),
            ));
        }
        if a == b {
            return Err(parse_err(&adjacency, *line, format!("self-loop on vertex {a}")));
        }
        let (ga, la) = placement[(a - 1) as usize];
        let (gb, lb) = placement[(b - 1) as usize];
        if ga != gb {
            return Err(parse_err(
                &adjacency,
                *line,
                format!("edge {a}-{b} joins vertices of different graphs"),
            ));
        }
        edges[ga].push((la, lb, S::one()));
    }

    let mut cats = categories.map(|c| c.into_iter());
    let graphs = edges
        .into_iter()
        .enumerate()
        .map(|(slot, e)| {
            let c = cats.as_mut().and_then(Iterator::next);
            Graph::from_edges(sizes[slot], e, c, class_of[&raw_classes[slot]])
        })
        .collect::<Result<Vec<_>>>()?;
    let ds = Dataset::new(name, graphs)?;
    debug_assert_eq!(ds.class_count(), class_values.len());
    Ok(ds)
}

/// Writes `dataset` in the TUDataset layout. Every edge is written in both
/// orientations, as the public distributions do. Only unit weights can be
/// represented.
pub fn write_tudataset<S: Scalar>(dataset: &Dataset<S>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = &dataset.name;
    let mut a = String::new();
    let mut indicator = String::new();
    let mut labels = String::new();
    let mut node_labels = String::new();
    let with_categories = dataset.has_categories();
    let mut offset = 0usize;
    for (gi, g) in dataset.graphs().iter().enumerate() {
        for v in 0..g.vertex_count() {
            let _ = writeln!(indicator, "{}", gi + 1);
            if let Some(c) = g.categories() {
                if with_categories {
                    let _ = writeln!(node_labels, "{}", c[v]);
                }
            }
        }
        for e in g.edges() {
            if e.weight != S::one() {
                return Err(Error::InvalidInput(
                    "TUDataset files carry unit edge weights only".into(),
                ));
            }
            let _ = writeln!(a, "{}, {}", offset + e.u + 1, offset + e.v + 1);
            let _ = writeln!(a, "{}, {}", offset + e.v + 1, offset + e.u + 1);
        }
        let _ = writeln!(labels, "{}", g.class());
        offset += g.vertex_count();
    }
    let write = |suffix: &str, body: &str| -> Result<()> {
        let p = dir.join(format!("{name}_{suffix}.txt"));
        fs::write(&p, body).map_err(|e| Error::io(p, e))
    };
    write("A", &a)?;
    write("graph_indicator", &indicator)?;
    write("graph_labels", &labels)?;
    if with_categories {
        write("node_labels", &node_labels)?;
    }
    Ok(())
}
