//! The e-graph: a congruence-closed database of equivalent expressions.
//!
//! Nodes ([`Op`]) refer to equivalence classes by [`Id`]. Each class carries
//! metadata ([`ClassMeta`]): its kind (matrix shape, relational schema, or
//! scalar), a sparsity estimate in `[0,1]`, and an optional known constant
//! value. Metadata is checked on every merge — a kind clash means a rewrite
//! produced nonsense, and surfaces as an error instead of silent corruption.
//!
//! Invariants between `rebuild` calls:
//! - union-find representatives are the smallest id in their class;
//! - every node in the hashcons map and in class node lists has canonical
//!   children and (for n-ary ops) children sorted by id;
//! - congruent nodes live in one class;
//! - a scalar class with a known constant contains the literal node for it.

use crate::ir::{AttrDims, Catalog, IrError, LAExpr, Schema};
use ordered_float::OrderedFloat;
use serde_json::json;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use thiserror::Error;

#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Id(pub u32);

impl fmt::Display for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("kind conflict: {0}")]
    Kind(String),
    #[error("a class would hold two constants: {a} vs {b}")]
    Constant { a: f64, b: f64 },
    #[error("attribute conflict: {0}")]
    Attr(String),
    #[error("malformed node: {0}")]
    Node(String),
}

impl From<IrError> for RuleError {
    fn from(e: IrError) -> Self {
        RuleError::Attr(e.to_string())
    }
}

/// Expression nodes over e-class ids. Matrix-level and relation-level
/// operators live in one language so a class can hold both framings of the
/// same value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    /// Catalog matrix reference.
    MatRef(String),
    /// Scalar literal.
    Lit(OrderedFloat<f64>),
    /// The domain size of an attribute, as a scalar.
    DimLit(String),

    MMult([Id; 2]),
    ElemMult([Id; 2]),
    ElemPlus([Id; 2]),
    ElemMinus([Id; 2]),
    ElemPow(Id, u32),
    RowAgg(Id),
    ColAgg(Id),
    Agg(Id),
    Transpose(Id),
    Call(String, Vec<Id>),

    /// Give a matrix's axes attribute names (`None` on axes of size 1).
    Bind {
        m: Id,
        row: Option<String>,
        col: Option<String>,
    },
    /// Read a relation back as a matrix.
    Unbind {
        e: Id,
        row: Option<String>,
        col: Option<String>,
    },
    /// n-ary natural join (pointwise product); children sorted, duplicates
    /// meaningful.
    Join(Vec<Id>),
    /// n-ary sum with broadcast; children sorted, duplicates meaningful.
    Union(Vec<Id>),
    /// Sum attributes out of a relation.
    RAgg(BTreeSet<String>, Id),
    /// Substitute attribute names.
    Rename(Id, BTreeMap<String, String>),
}

impl Op {
    /// Literal with `-0.0` normalized so hashconsing can't split zero.
    pub fn lit(v: f64) -> Op {
        Op::Lit(OrderedFloat(if v == 0.0 { 0.0 } else { v }))
    }

    pub fn children(&self) -> Vec<Id> {
        use Op::*;
        match self {
            MatRef(_) | Lit(_) | DimLit(_) => Vec::new(),
            MMult(c) | ElemMult(c) | ElemPlus(c) | ElemMinus(c) => c.to_vec(),
            ElemPow(a, _) | RowAgg(a) | ColAgg(a) | Agg(a) | Transpose(a) => vec![*a],
            Call(_, args) => args.clone(),
            Bind { m, .. } => vec![*m],
            Unbind { e, .. } => vec![*e],
            Join(cs) | Union(cs) => cs.clone(),
            RAgg(_, a) | Rename(a, _) => vec![*a],
        }
    }

    /// A human-readable operator tag, also used for deterministic tie-breaks.
    pub fn tag(&self) -> &'static str {
        use Op::*;
        match self {
            MatRef(_) => "mat",
            Lit(_) => "lit",
            DimLit(_) => "dim",
            MMult(_) => "mmult",
            ElemMult(_) => "elemmult",
            ElemPlus(_) => "elemplus",
            ElemMinus(_) => "elemminus",
            ElemPow(..) => "elempow",
            RowAgg(_) => "rowagg",
            ColAgg(_) => "colagg",
            Agg(_) => "agg",
            Transpose(_) => "transpose",
            Call(..) => "call",
            Bind { .. } => "bind",
            Unbind { .. } => "unbind",
            Join(_) => "join",
            Union(_) => "union",
            RAgg(..) => "ragg",
            Rename(..) => "rename",
        }
    }

    fn map_children(&self, mut f: impl FnMut(Id) -> Id) -> Op {
        use Op::*;
        match self {
            MatRef(_) | Lit(_) | DimLit(_) => self.clone(),
            MMult(c) => MMult([f(c[0]), f(c[1])]),
            // pointwise product and sum commute, so their children are kept
            // sorted and the hashcons identifies both orders
            ElemMult(c) => ElemMult(sort2([f(c[0]), f(c[1])])),
            ElemPlus(c) => ElemPlus(sort2([f(c[0]), f(c[1])])),
            ElemMinus(c) => ElemMinus([f(c[0]), f(c[1])]),
            ElemPow(a, k) => ElemPow(f(*a), *k),
            RowAgg(a) => RowAgg(f(*a)),
            ColAgg(a) => ColAgg(f(*a)),
            Agg(a) => Agg(f(*a)),
            Transpose(a) => Transpose(f(*a)),
            Call(name, args) => Call(name.clone(), args.iter().map(|a| f(*a)).collect()),
            Bind { m, row, col } => Bind {
                m: f(*m),
                row: row.clone(),
                col: col.clone(),
            },
            Unbind { e, row, col } => Unbind {
                e: f(*e),
                row: row.clone(),
                col: col.clone(),
            },
            Join(cs) => {
                let mut cs: Vec<Id> = cs.iter().map(|c| f(*c)).collect();
                cs.sort();
                Join(cs)
            }
            Union(cs) => {
                let mut cs: Vec<Id> = cs.iter().map(|c| f(*c)).collect();
                cs.sort();
                Union(cs)
            }
            RAgg(attrs, a) => RAgg(attrs.clone(), f(*a)),
            Rename(a, map) => Rename(f(*a), map.clone()),
        }
    }
}

fn sort2(mut pair: [Id; 2]) -> [Id; 2] {
    if pair[0] > pair[1] {
        pair.swap(0, 1);
    }
    pair
}

/// What a class's value is: a scalar, a matrix of fixed shape, or a relation
/// over named attributes. 1x1 matrices and empty-schema relations both
/// normalize to `Scalar`, so a literal can legally join them.
#[derive(Clone, Debug, PartialEq)]
pub enum Kind {
    Scalar,
    Mat { rows: u64, cols: u64 },
    Rel(Schema),
}

impl Kind {
    pub fn mat(rows: u64, cols: u64) -> Kind {
        if rows == 1 && cols == 1 {
            Kind::Scalar
        } else {
            Kind::Mat { rows, cols }
        }
    }

    pub fn rel(schema: Schema) -> Kind {
        if schema.is_empty() {
            Kind::Scalar
        } else {
            Kind::Rel(schema)
        }
    }

    /// Matrix-world dimensions; `None` for proper relations.
    pub fn mat_dims(&self) -> Option<(u64, u64)> {
        match self {
            Kind::Scalar => Some((1, 1)),
            Kind::Mat { rows, cols } => Some((*rows, *cols)),
            Kind::Rel(_) => None,
        }
    }

    pub fn schema(&self) -> Option<Schema> {
        match self {
            Kind::Scalar => Some(Schema::empty()),
            Kind::Rel(s) => Some(s.clone()),
            Kind::Mat { .. } => None,
        }
    }

    /// Number of entries in a value of this kind.
    pub fn size(&self) -> u64 {
        match self {
            Kind::Scalar => 1,
            Kind::Mat { rows, cols } => rows * cols,
            Kind::Rel(s) => s.size(),
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Scalar => write!(f, "scalar"),
            Kind::Mat { rows, cols } => write!(f, "{rows}x{cols}"),
            Kind::Rel(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassMeta {
    pub kind: Kind,
    /// Estimated fraction of nonzero entries, in `[0,1]`. Exactly 0 means
    /// the value is known to be the zero tensor.
    pub sparsity: f64,
    /// Known scalar value, if the class is a compile-time constant.
    pub constant: Option<f64>,
}

impl ClassMeta {
    pub fn size(&self) -> u64 {
        self.kind.size()
    }

    /// Expected number of nonzero entries.
    pub fn nnz(&self) -> f64 {
        self.sparsity * self.size() as f64
    }

    fn merge(&self, other: &ClassMeta) -> Result<ClassMeta, RuleError> {
        if self.kind != other.kind {
            return Err(RuleError::Kind(format!(
                "{} merged with {}",
                self.kind, other.kind
            )));
        }
        let constant = match (self.constant, other.constant) {
            (Some(a), Some(b)) => {
                if crate::eval::nearly_equal(a, b) {
                    Some(a)
                } else {
                    return Err(RuleError::Constant { a, b });
                }
            }
            (a, b) => a.or(b),
        };
        Ok(ClassMeta {
            kind: self.kind.clone(),
            sparsity: self.sparsity.min(other.sparsity),
            constant,
        })
    }
}

#[derive(Clone, Debug)]
pub struct EClass {
    pub nodes: Vec<Op>,
    /// Nodes that have this class as a child, with the class they live in.
    parents: Vec<(Op, Id)>,
    pub meta: ClassMeta,
}

pub struct EGraph {
    pub cat: Catalog,
    attr_dims: AttrDims,
    hashcons: HashMap<Op, Id>,
    uf: Vec<Id>,
    classes: Vec<Option<EClass>>,
    dirty: Vec<Id>,
    next_attr: u32,
    steps: u64,
}

impl EGraph {
    pub fn new(cat: Catalog) -> EGraph {
        EGraph {
            cat,
            attr_dims: AttrDims::new(),
            hashcons: HashMap::new(),
            uf: Vec::new(),
            classes: Vec::new(),
            dirty: Vec::new(),
            next_attr: 0,
            steps: 0,
        }
    }

    /// Monotone count of mutation work done so far: node insertions, repair
    /// traffic, and metadata refreshes. Congruence repair after a merge
    /// cascade can dwarf the merges that caused it, so budgets that want to
    /// track real effort must watch this, not just their own operations.
    pub fn work(&self) -> u64 {
        self.steps
    }

    /// A fresh attribute name, unique for the lifetime of this graph.
    pub fn fresh_attr(&mut self) -> String {
        let n = self.next_attr;
        self.next_attr += 1;
        format!("a{n}")
    }

    pub fn find(&self, id: Id) -> Id {
        let mut cur = id;
        while self.uf[cur.0 as usize] != cur {
            cur = self.uf[cur.0 as usize];
        }
        cur
    }

    pub fn attr_dims(&self) -> &AttrDims {
        &self.attr_dims
    }

    pub fn n_nodes(&self) -> usize {
        self.hashcons.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.iter().filter(|c| c.is_some()).count()
    }

    pub fn class(&self, id: Id) -> &EClass {
        let id = self.find(id);
        self.classes[id.0 as usize]
            .as_ref()
            .expect("canonical id has a class")
    }

    pub fn meta(&self, id: Id) -> &ClassMeta {
        &self.class(id).meta
    }

    /// Canonical class ids in ascending order.
    pub fn class_ids(&self) -> Vec<Id> {
        (0..self.classes.len() as u32)
            .map(Id)
            .filter(|id| self.classes[id.0 as usize].is_some())
            .collect()
    }

    /// Deterministic attribute name derived from class identities, e.g.
    /// `$r12` or `$i3_7`. Two rule applications that see the same classes
    /// derive the same name, which keeps appliers idempotent.
    pub fn derived_attr(&self, tag: char, ids: &[Id]) -> String {
        let parts: Vec<String> = ids.iter().map(|i| self.find(*i).to_string()).collect();
        format!("${tag}{}", parts.join("_"))
    }

    fn canon_op(&self, op: &Op) -> Op {
        op.map_children(|c| self.find(c))
    }

    /// Canonical lookup without inserting.
    pub fn lookup(&self, op: &Op) -> Option<Id> {
        self.hashcons.get(&self.canon_op(op)).map(|id| self.find(*id))
    }

    pub fn add(&mut self, op: Op) -> Result<Id, RuleError> {
        self.steps += 1;
        let op = self.canon_op(&op);
        if let Some(&id) = self.hashcons.get(&op) {
            return Ok(self.find(id));
        }
        let meta = self.make_meta(&op)?;
        let id = Id(self.classes.len() as u32);
        self.uf.push(id);
        self.classes.push(Some(EClass {
            nodes: vec![op.clone()],
            parents: Vec::new(),
            meta,
        }));
        for c in op.children() {
            self.classes[c.0 as usize]
                .as_mut()
                .expect("child class exists")
                .parents
                .push((op.clone(), id));
        }
        self.hashcons.insert(op, id);
        Ok(id)
    }

    /// Declare both classes equal. Returns whether anything changed. The
    /// graph needs a [`EGraph::rebuild`] before the next search.
    pub fn merge(&mut self, a: Id, b: Id) -> Result<bool, RuleError> {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return Ok(false);
        }
        let (root, gone) = if a < b { (a, b) } else { (b, a) };
        let merged = self.class(root).meta.merge(&self.class(gone).meta)?;
        self.uf[gone.0 as usize] = root;
        let old = self.classes[gone.0 as usize].take().expect("live class");
        let rc = self.classes[root.0 as usize].as_mut().expect("live class");
        rc.nodes.extend(old.nodes);
        rc.parents.extend(old.parents);
        rc.meta = merged;
        self.dirty.push(root);
        Ok(true)
    }

    /// Restore congruence (equal ops with equal children share a class),
    /// refresh metadata upward, inject literal nodes for classes that became
    /// known constants, and normalize stored node forms.
    pub fn rebuild(&mut self) -> Result<(), RuleError> {
        loop {
            while let Some(id) = self.dirty.pop() {
                self.repair(self.find(id))?;
            }
            if !self.inject_constants()? {
                break;
            }
        }
        self.normalize_nodes();
        Ok(())
    }

    fn repair(&mut self, id: Id) -> Result<(), RuleError> {
        let parents = std::mem::take(
            &mut self.classes[id.0 as usize]
                .as_mut()
                .expect("live class")
                .parents,
        );
        let mut fresh: Vec<(Op, Id)> = Vec::with_capacity(parents.len());
        for (op, pid) in parents {
            self.steps += 1;
            self.hashcons.remove(&op);
            let op2 = self.canon_op(&op);
            let pid = self.find(pid);
            if let Some(&other) = self.hashcons.get(&op2) {
                let other = self.find(other);
                if other != pid {
                    self.merge(other, pid)?;
                }
            }
            let pid = self.find(pid);
            self.hashcons.insert(op2.clone(), pid);
            if !fresh.iter().any(|(o, p)| *o == op2 && *p == pid) {
                fresh.push((op2, pid));
            }
            // a parent's sparsity/constant may tighten when children fused
            self.refresh_meta(pid)?;
        }
        let id = self.find(id);
        self.classes[id.0 as usize]
            .as_mut()
            .expect("live class")
            .parents
            .extend(fresh);
        Ok(())
    }

    /// Recompute a class's derived meta from one of its nodes and fold it in
    /// (kinds never change; sparsity can only tighten, constants appear).
    fn refresh_meta(&mut self, id: Id) -> Result<(), RuleError> {
        let id = self.find(id);
        let ops: Vec<Op> = self.classes[id.0 as usize]
            .as_ref()
            .expect("live class")
            .nodes
            .clone();
        self.steps += ops.len() as u64;
        let mut meta = self.class(id).meta.clone();
        for op in &ops {
            let computed = self.make_meta(&self.canon_op(op))?;
            meta = meta.merge(&computed)?;
        }
        let changed = meta != self.class(id).meta;
        if changed {
            self.classes[id.0 as usize].as_mut().expect("live class").meta = meta;
            // parents may tighten too; reuse the dirty queue
            self.dirty.push(id);
        }
        Ok(())
    }

    /// A scalar class with a known constant gains the literal node, so the
    /// value is visible structurally (and extractable for free).
    fn inject_constants(&mut self) -> Result<bool, RuleError> {
        let mut changed = false;
        for id in self.class_ids() {
            self.steps += 1;
            let c = self.class(id);
            let v = match (&c.meta.kind, c.meta.constant) {
                (Kind::Scalar, Some(v)) => v,
                // zero sparsity bounds the nonzero count by zero, which for a
                // scalar pins the value itself
                (Kind::Scalar, None) if c.meta.sparsity == 0.0 => 0.0,
                _ => continue,
            };
            let lit = Op::lit(v);
            if c.nodes.contains(&lit) {
                continue;
            }
            let lid = self.add(lit)?;
            if self.merge(lid, id)? {
                changed = true;
            }
        }
        // process any merges right away so callers see a clean graph
        while let Some(id) = self.dirty.pop() {
            self.repair(self.find(id))?;
            changed = true;
        }
        Ok(changed)
    }

    /// Rewrite every stored node to canonical form, deduplicated and sorted.
    fn normalize_nodes(&mut self) {
        for id in self.class_ids() {
            let class = self.classes[id.0 as usize].as_mut().expect("live class");
            let mut nodes: Vec<Op> = std::mem::take(&mut class.nodes);
            self.steps += nodes.len() as u64;
            for op in nodes.iter_mut() {
                *op = op.map_children(|c| self.find_loose(c));
            }
            nodes.sort();
            nodes.dedup();
            let class = self.classes[id.0 as usize].as_mut().expect("live class");
            class.nodes = nodes;
        }
    }

    // find without &self-wide borrow issues inside iter_mut closures
    fn find_loose(&self, id: Id) -> Id {
        let mut cur = id;
        while self.uf[cur.0 as usize] != cur {
            cur = self.uf[cur.0 as usize];
        }
        cur
    }

    // ---- metadata ----

    fn kind_of(&self, id: Id) -> &Kind {
        &self.class(id).meta.kind
    }

    fn sparsity(&self, id: Id) -> f64 {
        self.class(id).meta.sparsity
    }

    fn mat_dims(&self, id: Id, what: &str) -> Result<(u64, u64), RuleError> {
        self.kind_of(id).mat_dims().ok_or_else(|| {
            RuleError::Kind(format!("{what} needs a matrix operand, found {}", self.kind_of(id)))
        })
    }

    fn schema_of(&self, id: Id, what: &str) -> Result<Schema, RuleError> {
        self.kind_of(id).schema().ok_or_else(|| {
            RuleError::Kind(format!(
                "{what} needs a relational operand, found {}",
                self.kind_of(id)
            ))
        })
    }

    fn make_meta(&mut self, op: &Op) -> Result<ClassMeta, RuleError> {
        use Op::*;
        let meta = match op {
            MatRef(name) => {
                let info = self.cat.get(name)?;
                ClassMeta {
                    kind: Kind::mat(info.rows, info.cols),
                    sparsity: info.sparsity(),
                    constant: None,
                }
            }
            Lit(v) => ClassMeta {
                kind: Kind::Scalar,
                sparsity: if v.0 == 0.0 { 0.0 } else { 1.0 },
                constant: Some(v.0),
            },
            DimLit(a) => {
                let d = self.attr_dims.require(a)?;
                ClassMeta {
                    kind: Kind::Scalar,
                    sparsity: 1.0,
                    constant: Some(d as f64),
                }
            }
            MMult([a, b]) => {
                let (m, ka) = self.mat_dims(*a, "matrix product")?;
                let (kb, n) = self.mat_dims(*b, "matrix product")?;
                if ka != kb {
                    return Err(RuleError::Kind(format!(
                        "matrix product of {m}x{ka} by {kb}x{n}"
                    )));
                }
                let s = (ka as f64 * self.sparsity(*a).min(self.sparsity(*b))).min(1.0);
                ClassMeta {
                    kind: Kind::mat(m, n),
                    sparsity: s,
                    constant: self.scalar_constants(&[*a, *b]).map(|v| v[0] * v[1]),
                }
            }
            ElemMult([a, b]) => {
                let kind = self.broadcast_kind(*a, *b, "elementwise product")?;
                ClassMeta {
                    kind,
                    sparsity: self.sparsity(*a).min(self.sparsity(*b)),
                    constant: self.scalar_constants(&[*a, *b]).map(|v| v[0] * v[1]),
                }
            }
            ElemPlus([a, b]) => {
                let kind = self.broadcast_kind(*a, *b, "elementwise sum")?;
                ClassMeta {
                    kind,
                    sparsity: (self.sparsity(*a) + self.sparsity(*b)).min(1.0),
                    constant: self.scalar_constants(&[*a, *b]).map(|v| v[0] + v[1]),
                }
            }
            ElemMinus([a, b]) => {
                let kind = self.broadcast_kind(*a, *b, "elementwise difference")?;
                ClassMeta {
                    kind,
                    sparsity: (self.sparsity(*a) + self.sparsity(*b)).min(1.0),
                    constant: self.scalar_constants(&[*a, *b]).map(|v| v[0] - v[1]),
                }
            }
            ElemPow(a, k) => {
                if *k == 0 {
                    return Err(RuleError::Node("power 0 is not representable".into()));
                }
                let (m, n) = self.mat_dims(*a, "power")?;
                ClassMeta {
                    kind: Kind::mat(m, n),
                    sparsity: self.sparsity(*a),
                    constant: self
                        .scalar_constants(&[*a])
                        .map(|v| v[0].powi(*k as i32)),
                }
            }
            RowAgg(a) => {
                let (m, n) = self.mat_dims(*a, "row sums")?;
                ClassMeta {
                    kind: Kind::mat(m, 1),
                    sparsity: (n as f64 * self.sparsity(*a)).min(1.0),
                    constant: self.scalar_constants(&[*a]).map(|v| v[0]),
                }
            }
            ColAgg(a) => {
                let (m, n) = self.mat_dims(*a, "column sums")?;
                ClassMeta {
                    kind: Kind::mat(1, n),
                    sparsity: (m as f64 * self.sparsity(*a)).min(1.0),
                    constant: self.scalar_constants(&[*a]).map(|v| v[0]),
                }
            }
            Agg(a) => {
                let (m, n) = self.mat_dims(*a, "sum")?;
                ClassMeta {
                    kind: Kind::Scalar,
                    sparsity: ((m * n) as f64 * self.sparsity(*a)).min(1.0),
                    constant: self.scalar_constants(&[*a]).map(|v| v[0]),
                }
            }
            Transpose(a) => {
                let (m, n) = self.mat_dims(*a, "transpose")?;
                ClassMeta {
                    kind: Kind::mat(n, m),
                    sparsity: self.sparsity(*a),
                    constant: self.scalar_constants(&[*a]).map(|v| v[0]),
                }
            }
            Call(name, args) => {
                let arity = self
                    .cat
                    .func_arity(name)
                    .ok_or_else(|| RuleError::Node(format!("unknown function {name}")))?;
                if args.len() != arity {
                    return Err(RuleError::Node(format!(
                        "{name} expects {arity} arguments, got {}",
                        args.len()
                    )));
                }
                let (m, n) = self.mat_dims(args[0], "opaque call")?;
                for a in args {
                    self.mat_dims(*a, "opaque call")?;
                }
                ClassMeta {
                    kind: Kind::mat(m, n),
                    sparsity: 1.0,
                    constant: None,
                }
            }
            Bind { m, row, col } => {
                let (rows, cols) = self.mat_dims(*m, "bind")?;
                if row.is_some() && row == col {
                    return Err(RuleError::Node(format!(
                        "bind reuses {} for both axes",
                        row.as_deref().unwrap_or_default()
                    )));
                }
                let mut schema = Schema::empty();
                for (slot, dim, axis) in [(row, rows, "rows"), (col, cols, "cols")] {
                    match slot {
                        Some(name) => {
                            if dim == 1 {
                                return Err(RuleError::Node(format!(
                                    "bind names a size-1 axis {name}"
                                )));
                            }
                            self.attr_dims.declare(name, dim)?;
                            schema.insert(name.clone(), dim);
                        }
                        None => {
                            if dim != 1 {
                                return Err(RuleError::Node(format!(
                                    "bind drops a {axis} axis of size {dim}"
                                )));
                            }
                        }
                    }
                }
                ClassMeta {
                    kind: Kind::rel(schema),
                    sparsity: self.sparsity(*m),
                    constant: self.scalar_constants(&[*m]).map(|v| v[0]),
                }
            }
            Unbind { e, row, col } => {
                let schema = self.schema_of(*e, "unbind")?;
                if row.is_some() && row == col {
                    return Err(RuleError::Node(format!(
                        "unbind reuses {} for both axes",
                        row.as_deref().unwrap_or_default()
                    )));
                }
                let mut expect = 0;
                let mut dims = [1u64, 1u64];
                for (k, slot) in [row, col].into_iter().enumerate() {
                    if let Some(name) = slot {
                        let d = schema.dim(name).ok_or_else(|| {
                            RuleError::Node(format!(
                                "unbind names {name} which the schema {schema} lacks"
                            ))
                        })?;
                        dims[k] = d;
                        expect += 1;
                    }
                }
                if schema.len() != expect {
                    return Err(RuleError::Node(format!(
                        "unbind covers {expect} attributes of schema {schema}"
                    )));
                }
                ClassMeta {
                    kind: Kind::mat(dims[0], dims[1]),
                    sparsity: self.sparsity(*e),
                    constant: self.scalar_constants(&[*e]).map(|v| v[0]),
                }
            }
            Join(cs) => {
                if cs.len() < 2 {
                    return Err(RuleError::Node("join needs two or more children".into()));
                }
                let mut schema = Schema::empty();
                let mut sparsity = 1.0f64;
                let mut constant = Some(1.0);
                for c in cs {
                    let s = self.schema_of(*c, "join")?;
                    schema = schema.union(&s);
                    sparsity = sparsity.min(self.sparsity(*c));
                    constant = match (constant, self.meta(*c).constant) {
                        (Some(x), Some(y)) => Some(x * y),
                        _ => None,
                    };
                }
                ClassMeta {
                    kind: Kind::rel(schema),
                    sparsity,
                    constant: constant
                        .filter(|_| cs.iter().all(|c| matches!(self.kind_of(*c), Kind::Scalar))),
                }
            }
            Union(cs) => {
                if cs.len() < 2 {
                    return Err(RuleError::Node("union needs two or more children".into()));
                }
                let mut schema = Schema::empty();
                let mut sparsity = 0.0f64;
                let mut constant = Some(0.0);
                for c in cs {
                    let s = self.schema_of(*c, "union")?;
                    schema = schema.union(&s);
                    sparsity = (sparsity + self.sparsity(*c)).min(1.0);
                    constant = match (constant, self.meta(*c).constant) {
                        (Some(x), Some(y)) => Some(x + y),
                        _ => None,
                    };
                }
                ClassMeta {
                    kind: Kind::rel(schema),
                    sparsity,
                    constant: constant.filter(|_| cs.iter().all(|c| matches!(self.kind_of(*c), Kind::Scalar))),
                }
            }
            RAgg(attrs, a) => {
                if attrs.is_empty() {
                    return Err(RuleError::Node("aggregate over no attributes".into()));
                }
                let schema = self.schema_of(*a, "aggregate")?;
                let mut out = schema.clone();
                let mut factor = 1.0f64;
                for attr in attrs {
                    match out.remove(attr) {
                        Some(d) => factor *= d as f64,
                        None => {
                            // attribute absent: the sum multiplies by its
                            // size, which leaves sparsity untouched
                            self.attr_dims.require(attr)?;
                        }
                    }
                }
                let constant = match self.scalar_constants(&[*a]) {
                    Some(v) => {
                        let mut total = v[0];
                        for attr in attrs {
                            total *= self.attr_dims.require(attr)? as f64;
                        }
                        Some(total)
                    }
                    None => None,
                };
                ClassMeta {
                    kind: Kind::rel(out),
                    sparsity: (factor * self.sparsity(*a)).min(1.0),
                    constant,
                }
            }
            Rename(a, map) => {
                if map.is_empty() {
                    return Err(RuleError::Node("rename with an empty map".into()));
                }
                let schema = self.schema_of(*a, "rename")?;
                let mut out = Schema::empty();
                for (name, dim) in schema.iter() {
                    let target = map.get(name).map(String::as_str).unwrap_or(name);
                    if out.dim(target).is_some() {
                        return Err(RuleError::Node(format!(
                            "rename collapses two attributes onto {target}"
                        )));
                    }
                    self.attr_dims.declare(target, dim)?;
                    out.insert(target, dim);
                }
                for from in map.keys() {
                    if schema.dim(from).is_none() {
                        return Err(RuleError::Node(format!(
                            "rename source {from} not in schema {schema}"
                        )));
                    }
                }
                ClassMeta {
                    kind: Kind::rel(out),
                    sparsity: self.sparsity(*a),
                    constant: self.scalar_constants(&[*a]).map(|v| v[0]),
                }
            }
        };
        Ok(meta)
    }

    /// The constants of the given classes, provided every one is a scalar
    /// with a known value.
    fn scalar_constants(&self, ids: &[Id]) -> Option<Vec<f64>> {
        ids.iter()
            .map(|id| {
                let m = self.meta(*id);
                match m.kind {
                    Kind::Scalar => m.constant,
                    _ => None,
                }
            })
            .collect()
    }

    fn broadcast_kind(&self, a: Id, b: Id, what: &str) -> Result<Kind, RuleError> {
        let (ar, ac) = self.mat_dims(a, what)?;
        let (br, bc) = self.mat_dims(b, what)?;
        let sa = crate::ir::la::LaShape::mat(ar, ac);
        let sb = crate::ir::la::LaShape::mat(br, bc);
        let out = crate::ir::la::broadcast(sa, sb)
            .ok_or_else(|| RuleError::Kind(format!("{what} of {sa} and {sb}")))?;
        Ok(Kind::mat(out.rows(), out.cols()))
    }

    // ---- ingestion ----

    pub fn add_la(&mut self, e: &LAExpr) -> Result<Id, RuleError> {
        use LAExpr::*;
        let op = match e {
            Mat(name) => Op::MatRef(name.clone()),
            Lit(v) => Op::lit(*v),
            MMult(a, b) => Op::MMult([self.add_la(a)?, self.add_la(b)?]),
            ElemMult(a, b) => Op::ElemMult([self.add_la(a)?, self.add_la(b)?]),
            ElemPlus(a, b) => Op::ElemPlus([self.add_la(a)?, self.add_la(b)?]),
            ElemMinus(a, b) => Op::ElemMinus([self.add_la(a)?, self.add_la(b)?]),
            ElemPow(a, k) => Op::ElemPow(self.add_la(a)?, *k),
            RowAgg(a) => Op::RowAgg(self.add_la(a)?),
            ColAgg(a) => Op::ColAgg(self.add_la(a)?),
            Agg(a) => Op::Agg(self.add_la(a)?),
            Transpose(a) => Op::Transpose(self.add_la(a)?),
            Call(name, args) => {
                let ids = args
                    .iter()
                    .map(|a| self.add_la(a))
                    .collect::<Result<Vec<_>, _>>()?;
                Op::Call(name.clone(), ids)
            }
        };
        self.add(op)
    }

    // ---- debugging ----

    pub fn dump_json(&self) -> serde_json::Value {
        let classes: Vec<serde_json::Value> = self
            .class_ids()
            .into_iter()
            .map(|id| {
                let c = self.class(id);
                json!({
                    "id": id.0,
                    "kind": c.meta.kind.to_string(),
                    "sparsity": c.meta.sparsity,
                    "constant": c.meta.constant,
                    "nodes": c.nodes.iter().map(|n| format!("{n:?}")).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({
            "classes": classes,
            "nodes": self.n_nodes(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{parse_la, MatrixInfo};

    fn cat() -> Catalog {
        let mut c = Catalog::new();
        c.insert(MatrixInfo::sparse("X", 1000, 1000, 100)).unwrap();
        c.insert(MatrixInfo::dense("A", 10, 20)).unwrap();
        c.insert(MatrixInfo::dense("B", 20, 30)).unwrap();
        c.insert(MatrixInfo::dense("C", 10, 20)).unwrap();
        c
    }

    #[test]
    fn hashcons_shares_structure() {
        let mut g = EGraph::new(cat());
        let e = parse_la("A %*% B").unwrap();
        let a = g.add_la(&e).unwrap();
        let b = g.add_la(&e).unwrap();
        assert_eq!(a, b);
        assert_eq!(g.n_nodes(), 3);
    }

    #[test]
    fn congruence_closes_after_merge() {
        // A %*% B and C %*% B become congruent once A and C merge
        let mut g = EGraph::new(cat());
        let ab = g.add_la(&parse_la("A %*% B").unwrap()).unwrap();
        let cb = g.add_la(&parse_la("C %*% B").unwrap()).unwrap();
        assert_ne!(g.find(ab), g.find(cb));
        let a = g.add(Op::MatRef("A".into())).unwrap();
        let c = g.add(Op::MatRef("C".into())).unwrap();
        g.merge(a, c).unwrap();
        g.rebuild().unwrap();
        assert_eq!(g.find(ab), g.find(cb));
    }

    #[test]
    fn representative_is_smallest_id() {
        let mut g = EGraph::new(cat());
        let a = g.add(Op::MatRef("A".into())).unwrap();
        let c = g.add(Op::MatRef("C".into())).unwrap();
        assert!(a < c);
        g.merge(c, a).unwrap();
        g.rebuild().unwrap();
        assert_eq!(g.find(c), a);
    }

    #[test]
    fn metadata_tracks_shape_and_sparsity() {
        let mut g = EGraph::new(cat());
        let x = g.add(Op::MatRef("X".into())).unwrap();
        assert_eq!(g.meta(x).kind, Kind::mat(1000, 1000));
        assert!((g.meta(x).sparsity - 1e-4).abs() < 1e-12);

        // X %*% X: sparsity min(1, 1000 * 1e-4) = 0.1
        let xx = g.add(Op::MMult([x, x])).unwrap();
        assert!((g.meta(xx).sparsity - 0.1).abs() < 1e-12);

        // X + X keeps shape, doubles fill estimate
        let plus = g.add(Op::ElemPlus([x, x])).unwrap();
        assert!((g.meta(plus).sparsity - 2e-4).abs() < 1e-12);

        let s = g.add(Op::Agg(x)).unwrap();
        assert_eq!(g.meta(s).kind, Kind::Scalar);
    }

    #[test]
    fn constants_fold_and_inject_literals() {
        let mut g = EGraph::new(cat());
        let two = g.add(Op::lit(2.0)).unwrap();
        let three = g.add(Op::lit(3.0)).unwrap();
        let sum = g.add(Op::ElemPlus([two, three])).unwrap();
        assert_eq!(g.meta(sum).constant, Some(5.0));
        g.rebuild().unwrap();
        // the literal 5 now lives in the same class
        let five = g.add(Op::lit(5.0)).unwrap();
        assert_eq!(g.find(five), g.find(sum));
    }

    #[test]
    fn kind_conflicts_are_rule_bugs() {
        let mut g = EGraph::new(cat());
        let a = g.add(Op::MatRef("A".into())).unwrap();
        let b = g.add(Op::MatRef("B".into())).unwrap();
        assert!(matches!(g.merge(a, b), Err(RuleError::Kind(_))));
        // scalar and 1x1-shaped results unify fine
        let s1 = g.add(Op::Agg(a)).unwrap();
        let lit = g.add(Op::lit(7.0)).unwrap();
        assert!(g.merge(s1, lit).is_ok());
    }

    #[test]
    fn bind_builds_schemas_and_rejects_losing_axes() {
        let mut g = EGraph::new(cat());
        let a = g.add(Op::MatRef("A".into())).unwrap();
        let bound = g
            .add(Op::Bind {
                m: a,
                row: Some("i".into()),
                col: Some("j".into()),
            })
            .unwrap();
        match &g.meta(bound).kind {
            Kind::Rel(s) => assert_eq!(s.to_string(), "{i:10, j:20}"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(g.attr_dims().get("i"), Some(10));
        // dropping a wide axis is a malformed node
        assert!(g
            .add(Op::Bind {
                m: a,
                row: Some("i".into()),
                col: None,
            })
            .is_err());
    }

    #[test]
    fn join_union_sort_children_and_track_schemas() {
        let mut g = EGraph::new(cat());
        let a = g.add(Op::MatRef("A".into())).unwrap();
        let c = g.add(Op::MatRef("C".into())).unwrap();
        let ba = g
            .add(Op::Bind {
                m: a,
                row: Some("i".into()),
                col: Some("j".into()),
            })
            .unwrap();
        let bc = g
            .add(Op::Bind {
                m: c,
                row: Some("i".into()),
                col: Some("k".into()),
            })
            .unwrap();
        let j1 = g.add(Op::Join(vec![ba, bc])).unwrap();
        let j2 = g.add(Op::Join(vec![bc, ba])).unwrap();
        assert_eq!(j1, j2, "join children sort, so order is irrelevant");
        match &g.meta(j1).kind {
            Kind::Rel(s) => assert_eq!(s.to_string(), "{i:10, j:20, k:20}"),
            other => panic!("unexpected {other:?}"),
        }
        // duplicated children stay duplicated: join(x,x) is x squared
        let jj = g.add(Op::Join(vec![ba, ba])).unwrap();
        assert_ne!(g.find(jj), g.find(ba));
    }

    #[test]
    fn unbind_restores_matrix_kinds() {
        let mut g = EGraph::new(cat());
        let a = g.add(Op::MatRef("A".into())).unwrap();
        let ba = g
            .add(Op::Bind {
                m: a,
                row: Some("i".into()),
                col: Some("j".into()),
            })
            .unwrap();
        let ub = g
            .add(Op::Unbind {
                e: ba,
                row: Some("i".into()),
                col: Some("j".into()),
            })
            .unwrap();
        assert_eq!(g.meta(ub).kind, Kind::mat(10, 20));
        // flipped slots give the transposed shape
        let ubt = g
            .add(Op::Unbind {
                e: ba,
                row: Some("j".into()),
                col: Some("i".into()),
            })
            .unwrap();
        assert_eq!(g.meta(ubt).kind, Kind::mat(20, 10));
        // covering only part of the schema is malformed
        assert!(g
            .add(Op::Unbind {
                e: ba,
                row: Some("i".into()),
                col: None,
            })
            .is_err());
    }

    #[test]
    fn ragg_removes_attrs_and_scales_sparsity() {
        let mut g = EGraph::new(cat());
        let x = g.add(Op::MatRef("X".into())).unwrap();
        let bx = g
            .add(Op::Bind {
                m: x,
                row: Some("i".into()),
                col: Some("j".into()),
            })
            .unwrap();
        let agg = g
            .add(Op::RAgg(["j".to_string()].into_iter().collect(), bx))
            .unwrap();
        match &g.meta(agg).kind {
            Kind::Rel(s) => assert_eq!(s.to_string(), "{i:1000}"),
            other => panic!("unexpected {other:?}"),
        }
        // sparsity 1e-4 over 1000 summed columns -> 0.1
        assert!((g.meta(agg).sparsity - 0.1).abs() < 1e-12);
    }

    #[test]
    fn zero_literal_has_zero_sparsity() {
        let mut g = EGraph::new(cat());
        let z = g.add(Op::lit(0.0)).unwrap();
        assert_eq!(g.meta(z).sparsity, 0.0);
        let nz = g.add(Op::lit(-0.0)).unwrap();
        assert_eq!(g.find(nz), g.find(z), "negative zero normalizes");
    }
}
