//! Core IR: attributes, schemas, the matrix catalog, and the two expression
//! languages (surface linear algebra and the relational form it rewrites
//! through).

pub mod la;
pub mod parse;
pub mod ra;
pub mod sexpr;

pub use la::{LaShape, LAExpr};
pub use parse::parse_la;
pub use ra::{check_ra, schema_of, RAExpr};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// A named index with a fixed range size. Relations are functions from
/// assignments of their attributes to reals.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Attribute {
    pub name: String,
    pub dim: u64,
}

impl Attribute {
    pub fn new(name: impl Into<String>, dim: u64) -> Self {
        Attribute { name: name.into(), dim }
    }
}

/// Set of attributes, keyed by name. Two attributes with the same name always
/// have the same dim (enforced by [`AttrDims`] at creation time).
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Schema(BTreeMap<String, u64>);

impl Schema {
    pub fn empty() -> Self {
        Schema(BTreeMap::new())
    }

    pub fn singleton(name: impl Into<String>, dim: u64) -> Self {
        let mut m = BTreeMap::new();
        m.insert(name.into(), dim);
        Schema(m)
    }

    pub fn insert(&mut self, name: impl Into<String>, dim: u64) {
        self.0.insert(name.into(), dim);
    }

    pub fn remove(&mut self, name: &str) -> Option<u64> {
        self.0.remove(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn dim(&self, name: &str) -> Option<u64> {
        self.0.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Attributes in name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.0.iter().map(|(n, d)| (n.as_str(), *d))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(|s| s.as_str())
    }

    pub fn attrs(&self) -> Vec<Attribute> {
        self.0.iter().map(|(n, d)| Attribute::new(n.clone(), *d)).collect()
    }

    pub fn union(&self, other: &Schema) -> Schema {
        let mut m = self.0.clone();
        for (n, d) in &other.0 {
            m.insert(n.clone(), *d);
        }
        Schema(m)
    }

    /// Total number of cells a relation with this schema holds.
    pub fn size(&self) -> u64 {
        self.0.values().product()
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (n, d)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}:{}", n, d)?;
        }
        write!(f, "}}")
    }
}

/// Session-wide map from attribute name to range size. Every attribute name
/// used in one session denotes a single range, which is what makes side
/// conditions like "i not free in A" checkable by name alone.
#[derive(Clone, Debug, Default)]
pub struct AttrDims(BTreeMap<String, u64>);

impl AttrDims {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a name/dim pair; re-declaring with a different dim is an error.
    pub fn declare(&mut self, name: &str, dim: u64) -> Result<(), IrError> {
        match self.0.get(name) {
            Some(&d) if d != dim => Err(IrError::AttrConflict {
                name: name.to_string(),
                d1: d,
                d2: dim,
            }),
            Some(_) => Ok(()),
            None => {
                self.0.insert(name.to_string(), dim);
                Ok(())
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<u64> {
        self.0.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<u64, IrError> {
        self.get(name).ok_or_else(|| IrError::UnknownAttr(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.0.iter().map(|(n, d)| (n.as_str(), *d))
    }
}

/// Dimensions and nonzero count for one named input matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixInfo {
    pub name: String,
    pub rows: u64,
    pub cols: u64,
    /// Number of nonzero entries; `rows * cols` when unknown (dense).
    pub nnz: u64,
}

impl MatrixInfo {
    pub fn dense(name: impl Into<String>, rows: u64, cols: u64) -> Self {
        MatrixInfo { name: name.into(), rows, cols, nnz: rows * cols }
    }

    pub fn sparse(name: impl Into<String>, rows: u64, cols: u64, nnz: u64) -> Self {
        MatrixInfo { name: name.into(), rows, cols, nnz }
    }

    pub fn size(&self) -> u64 {
        self.rows * self.cols
    }

    /// nnz / size, in [0, 1].
    pub fn sparsity(&self) -> f64 {
        self.nnz as f64 / self.size() as f64
    }
}

/// Known input matrices plus declared opaque function arities.
#[derive(Clone, Debug, Default)]
pub struct Catalog {
    mats: BTreeMap<String, MatrixInfo>,
    funcs: BTreeMap<String, usize>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CatalogLine {
    Mat { name: String, rows: u64, cols: u64, nnz: Option<u64> },
    Func { func: String, arity: usize },
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, info: MatrixInfo) -> Result<(), IrError> {
        if info.rows == 0 || info.cols == 0 {
            return Err(IrError::BadCatalog(format!(
                "matrix {} has a zero dimension ({}x{})",
                info.name, info.rows, info.cols
            )));
        }
        if info.nnz > info.size() {
            return Err(IrError::BadCatalog(format!(
                "matrix {} declares nnz {} above its size {}",
                info.name,
                info.nnz,
                info.size()
            )));
        }
        if self.mats.contains_key(&info.name) {
            return Err(IrError::BadCatalog(format!("duplicate matrix {}", info.name)));
        }
        self.mats.insert(info.name.clone(), info);
        Ok(())
    }

    pub fn declare_func(&mut self, name: impl Into<String>, arity: usize) -> Result<(), IrError> {
        let name = name.into();
        if arity == 0 {
            return Err(IrError::BadCatalog(format!("function {} declares arity 0", name)));
        }
        if self.funcs.insert(name.clone(), arity).is_some() {
            return Err(IrError::BadCatalog(format!("duplicate function {}", name)));
        }
        Ok(())
    }

    /// One JSON object per line: `{"name":..,"rows":..,"cols":..,"nnz":..}`
    /// (nnz optional, defaults to dense) or `{"func":..,"arity":..}`.
    pub fn from_jsonl(src: &str) -> Result<Self, IrError> {
        let mut cat = Catalog::new();
        for (lineno, line) in src.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parsed: CatalogLine = serde_json::from_str(line).map_err(|e| {
                IrError::BadCatalog(format!("line {}: {}", lineno + 1, e))
            })?;
            match parsed {
                CatalogLine::Mat { name, rows, cols, nnz } => {
                    let nnz = nnz.unwrap_or(rows.saturating_mul(cols));
                    cat.insert(MatrixInfo::sparse(name, rows, cols, nnz))?;
                }
                CatalogLine::Func { func, arity } => cat.declare_func(func, arity)?,
            }
        }
        Ok(cat)
    }

    pub fn get(&self, name: &str) -> Result<&MatrixInfo, IrError> {
        self.mats.get(name).ok_or_else(|| IrError::UnknownMatrix(name.to_string()))
    }

    pub fn func_arity(&self, name: &str) -> Option<usize> {
        self.funcs.get(name).copied()
    }

    pub fn matrices(&self) -> impl Iterator<Item = &MatrixInfo> {
        self.mats.values()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IrError {
    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unknown matrix {0}")]
    UnknownMatrix(String),
    #[error("unknown function {0}")]
    UnknownFunction(String),
    #[error("unknown attribute {0}")]
    UnknownAttr(String),
    #[error("dimension mismatch in {op}: {detail}")]
    DimMismatch { op: String, detail: String },
    #[error("attribute {name} used with dims {d1} and {d2}")]
    AttrConflict { name: String, d1: u64, d2: u64 },
    #[error("catalog error: {0}")]
    BadCatalog(String),
    #[error("malformed expression: {0}")]
    BadExpr(String),
}
