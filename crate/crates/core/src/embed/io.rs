//! Plain-text vector files.
//!
//! ```text
//! K <dim> users <n> items <m> kind <metric|inner|inferred>
//! U <id> f1 ... fK
//! V <id> f1 ... fK
//! ```
//!
//! Floats are written with nine significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{EmbeddingSpace, SpaceKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct VectorFile {
    pub kind: String,
    pub user_ids: Vec<String>,
    pub users: Array2<f64>,
    pub item_ids: Vec<String>,
    pub items: Array2<f64>,
}

pub(crate) fn fmt_float(out: &mut String, x: f64) {
    write!(out, "{x:.8e}").unwrap();
}

pub fn write_vectors(path: &Path, file: &VectorFile) -> Result<()> {
    let dim = file.users.ncols().max(file.items.ncols());
    let mut out = format!(
        "K {dim} users {} items {} kind {}\n",
        file.user_ids.len(),
        file.item_ids.len(),
        file.kind
    );
    for (tag, ids, m) in [("U", &file.user_ids, &file.users), ("V", &file.item_ids, &file.items)] {
        for (id, r) in ids.iter().zip(m.rows()) {
            out.push_str(tag);
            out.push(' ');
            out.push_str(id);
            for &x in r {
                out.push(' ');
                fmt_float(&mut out, x);
            }
            out.push('\n');
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn bad(line: usize, reason: &str) -> Error {
    Error::MalformedLine {
        line,
        reason: reason.to_string(),
    }
}

pub fn read_vectors(path: &Path) -> Result<VectorFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::EmptyDataset)?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 8 || h[0] != "K" || h[2] != "users" || h[4] != "items" || h[6] != "kind" {
        return Err(bad(1, "bad vector file header"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| bad(1, "bad count in header"));
    let (dim, n_users, n_items) = (parse(h[1])?, parse(h[3])?, parse(h[5])?);

    let mut user_ids = Vec::with_capacity(n_users);
    let mut item_ids = Vec::with_capacity(n_items);
    let mut users = Vec::with_capacity(n_users * dim);
    let mut items = Vec::with_capacity(n_items * dim);
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut f = line.split_whitespace();
        let tag = f.next().unwrap();
        let id = f.next().ok_or_else(|| bad(n + 1, "missing id"))?.to_string();
        let values = f
            .map(|s| s.parse::<f64>().map_err(|_| bad(n + 1, "bad float")))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: values.len(),
            });
        }
        match tag {
            "U" => {
                user_ids.push(id);
                users.extend(values);
            }
            "V" => {
                item_ids.push(id);
                items.extend(values);
            }
            _ => return Err(bad(n + 1, "row tag must be U or V")),
        }
    }
    if user_ids.len() != n_users || item_ids.len() != n_items {
        return Err(bad(1, "row counts disagree with header"));
    }
    let shape = |rows: usize, data: Vec<f64>| {
        Array2::from_shape_vec((rows, dim), data).expect("row lengths checked")
    };
    Ok(VectorFile {
        kind: h[7].to_string(),
        users: shape(n_users, users),
        items: shape(n_items, items),
        user_ids,
        item_ids,
    })
}

impl EmbeddingSpace {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_vectors(
            path,
            &VectorFile {
                kind: self.kind.label().to_string(),
                user_ids: self.user_ids.clone(),
                users: self.users.clone(),
                item_ids: self.item_ids.clone(),
                items: self.items.clone(),
            },
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = read_vectors(path)?;
        let kind = match f.kind.as_str() {
            "metric" => SpaceKind::Metric,
            "inner" => SpaceKind::InnerProduct,
            other => {
                return Err(Error::Config(format!(
                    "{} holds `{other}` vectors, not a trainable space",
                    path.display()
                )))
            }
        };
        Ok(EmbeddingSpace {
            kind,
            user_ids: f.user_ids,
            item_ids: f.item_ids,
            users: f.users,
            items: f.items,
        })
    }
}
