//! Canonical forms: a decision procedure for expression equivalence.
//!
//! Every relational expression denotes a polynomial over matrix entries. We
//! expand it into a *polyterm* — a sum of terms `c · Σ_bound Π atoms` plus a
//! trailing constant — then put each term into a canonical labeling of its
//! bound indices. Two expressions are semantically equivalent (over inputs of
//! arbitrary dimensions) exactly when their polyterms match term-for-term up
//! to isomorphism of terms, which the [`iso`] module decides by searching
//! homomorphisms in both directions.

pub mod iso;

use crate::ir::{check_ra, AttrDims, Catalog, IrError, LAExpr, RAExpr};
use crate::translate::la_to_ra;
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

/// Terms with more atoms than this refuse to canonicalize.
pub const MAX_ATOMS: usize = 12;
/// Terms with more bound indices than this refuse to canonicalize.
pub const MAX_BOUND: usize = 8;
/// Polyterm-wide cap on the number of terms during expansion.
pub const MAX_TERMS: usize = 128;

/// Coefficients at or below this magnitude vanish.
const COEFF_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CanonError {
    #[error("expression too large to canonicalize: {0}")]
    Budget(String),
    #[error("cannot canonicalize: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Ir(#[from] IrError),
}

/// One index position inside an atom.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Index {
    /// Named by a free attribute of the whole expression.
    Free(String),
    /// Bound by the term's aggregation; labels are canonical, 0-based.
    Bound(usize),
}

/// A single matrix access, e.g. `x(i, b0)`. A 1x1 matrix has no indices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub mat: String,
    pub indices: Vec<Index>,
}

/// `Σ_{b0..b(bound-1)} Π atoms`, atoms sorted, labels canonical (the
/// lexicographically least relabeling). Every bound label occurs in at least
/// one atom.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Term {
    pub bound: usize,
    pub atoms: Vec<Atom>,
}

impl Term {
    pub fn new(bound: usize, mut atoms: Vec<Atom>) -> Term {
        atoms.sort();
        debug_assert!(
            (0..bound).all(|b| atoms
                .iter()
                .any(|a| a.indices.contains(&Index::Bound(b)))),
            "every bound label must occur in an atom"
        );
        Term { bound, atoms }
    }
}

/// Sum of coefficient-weighted terms plus a constant. Terms are sorted and
/// pairwise non-isomorphic.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyterm {
    pub terms: Vec<(f64, Term)>,
    pub constant: f64,
}

impl Polyterm {
    pub fn constant_only(v: f64) -> Polyterm {
        Polyterm {
            terms: Vec::new(),
            constant: v,
        }
    }
}

/// Decide whether two polyterms denote the same polynomial: constants match,
/// and terms pair up under isomorphism with matching coefficients.
pub fn equivalent(a: &Polyterm, b: &Polyterm) -> bool {
    if !crate::eval::nearly_equal(a.constant, b.constant) || a.terms.len() != b.terms.len() {
        return false;
    }
    let mut used = vec![false; b.terms.len()];
    'outer: for (ca, ta) in &a.terms {
        for (k, (cb, tb)) in b.terms.iter().enumerate() {
            if !used[k] && crate::eval::nearly_equal(*ca, *cb) && iso::isomorphic(ta, tb) {
                used[k] = true;
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Canonicalize a checked relational expression. `dims` must know every
/// attribute mentioned (as produced by [`check_ra`]).
pub fn canonicalize(
    e: &RAExpr,
    cat: &Catalog,
    dims: &AttrDims,
) -> Result<Polyterm, CanonError> {
    let mut cz = Expander {
        cat,
        dims,
        next_bound: 0,
    };
    let raw = cz.expand(e)?;
    finish(raw)
}

/// Lower a linear-algebra expression and canonicalize the result. Free
/// indices are `i` (rows) and `j` (cols) when those dimensions exceed 1.
pub fn canon_la(e: &LAExpr, cat: &Catalog) -> Result<Polyterm, CanonError> {
    let (ra, _) = la_to_ra(e, cat)
        .map_err(|err| match err {
            IrError::BadExpr(msg) => CanonError::Unsupported(msg),
            other => CanonError::Ir(other),
        })?;
    let (_, dims) = check_ra(&ra, cat)?;
    canonicalize(&ra, cat, &dims)
}

/// Semantic equivalence of two linear-algebra expressions. Differing result
/// shapes decide immediately; otherwise both sides lower with the same free
/// index names and their polyterms are compared.
pub fn equiv_la(a: &LAExpr, b: &LAExpr, cat: &Catalog) -> Result<bool, CanonError> {
    let (sa, sb) = (a.shape(cat)?, b.shape(cat)?);
    if sa != sb {
        return Ok(false);
    }
    Ok(equivalent(&canon_la(a, cat)?, &canon_la(b, cat)?))
}

// ---- expansion to raw sums of products ----

#[derive(Clone, Debug)]
struct RawAtom {
    mat: String,
    indices: Vec<String>,
}

#[derive(Clone, Debug)]
struct RawTerm {
    coeff: f64,
    /// Internal bound names, prefixed `!b` so they can never collide with
    /// attribute names from the input language.
    bound: BTreeSet<String>,
    atoms: Vec<RawAtom>,
}

impl RawTerm {
    fn constant(v: f64) -> RawTerm {
        RawTerm {
            coeff: v,
            bound: BTreeSet::new(),
            atoms: Vec::new(),
        }
    }
}

struct Expander<'a> {
    cat: &'a Catalog,
    dims: &'a AttrDims,
    next_bound: usize,
}

impl<'a> Expander<'a> {
    fn fresh_bound(&mut self) -> String {
        let n = self.next_bound;
        self.next_bound += 1;
        format!("!b{n}")
    }

    fn expand(&mut self, e: &RAExpr) -> Result<Vec<RawTerm>, CanonError> {
        match e {
            RAExpr::Bind { mat, row, col } => {
                let info = self.cat.get(mat)?;
                let mut indices = Vec::new();
                // indices keep matrix position order (row then col); a
                // dimension of size 1 carries no information and is dropped
                for (slot, dim) in [(row, info.rows), (col, info.cols)] {
                    if let Some(name) = slot {
                        if dim > 1 {
                            indices.push(name.clone());
                        }
                    }
                }
                Ok(vec![RawTerm {
                    coeff: 1.0,
                    bound: BTreeSet::new(),
                    atoms: vec![RawAtom {
                        mat: mat.clone(),
                        indices,
                    }],
                }])
            }
            RAExpr::Lit(v) => Ok(vec![RawTerm::constant(*v)]),
            RAExpr::Dim(a) => {
                let d = self.dims.require(a)?;
                Ok(vec![RawTerm::constant(d as f64)])
            }
            RAExpr::Union(children) => {
                let mut terms = Vec::new();
                for c in children {
                    terms.extend(self.expand(c)?);
                    if terms.len() > MAX_TERMS {
                        return Err(CanonError::Budget(format!(
                            "more than {MAX_TERMS} terms"
                        )));
                    }
                }
                Ok(terms)
            }
            RAExpr::Join(children) => {
                let mut acc = vec![RawTerm::constant(1.0)];
                for c in children {
                    let rhs = self.expand(c)?;
                    let mut next = Vec::with_capacity(acc.len() * rhs.len());
                    for l in &acc {
                        for r in &rhs {
                            let mut t = l.clone();
                            t.coeff *= r.coeff;
                            t.bound.extend(r.bound.iter().cloned());
                            t.atoms.extend(r.atoms.iter().cloned());
                            next.push(t);
                        }
                    }
                    if next.len() > MAX_TERMS {
                        return Err(CanonError::Budget(format!(
                            "more than {MAX_TERMS} terms while distributing a product"
                        )));
                    }
                    acc = next;
                }
                Ok(acc)
            }
            RAExpr::Agg(attrs, child) => {
                let mut terms = self.expand(child)?;
                for t in terms.iter_mut() {
                    for a in attrs {
                        let occurs = t
                            .atoms
                            .iter()
                            .any(|at| at.indices.iter().any(|i| i == a));
                        if occurs {
                            let fresh = self.fresh_bound();
                            for at in t.atoms.iter_mut() {
                                for i in at.indices.iter_mut() {
                                    if i == a {
                                        *i = fresh.clone();
                                    }
                                }
                            }
                            t.bound.insert(fresh);
                        } else {
                            // summing over an index the term ignores just
                            // multiplies it by the domain size
                            t.coeff *= self.dims.require(a)? as f64;
                        }
                    }
                }
                Ok(terms)
            }
            RAExpr::Rename { e: child, map } => {
                let mut terms = self.expand(child)?;
                for t in terms.iter_mut() {
                    for at in t.atoms.iter_mut() {
                        for i in at.indices.iter_mut() {
                            if let Some(to) = map.get(i) {
                                *i = to.clone();
                            }
                        }
                    }
                }
                Ok(terms)
            }
            RAExpr::Unbind { .. } => Err(CanonError::Unsupported(
                "unbind has no polynomial reading".into(),
            )),
        }
    }
}

// ---- canonical labeling and term merging ----

fn finish(raw: Vec<RawTerm>) -> Result<Polyterm, CanonError> {
    let mut constant = 0.0;
    let mut terms: Vec<(f64, Term)> = Vec::new();
    for t in raw {
        if t.atoms.is_empty() {
            constant += t.coeff;
            continue;
        }
        if t.atoms.len() > MAX_ATOMS {
            return Err(CanonError::Budget(format!(
                "a term has {} factors; the limit is {MAX_ATOMS}",
                t.atoms.len()
            )));
        }
        if t.bound.len() > MAX_BOUND {
            return Err(CanonError::Budget(format!(
                "a term sums over {} indices; the limit is {MAX_BOUND}",
                t.bound.len()
            )));
        }
        terms.push((t.coeff, label(&t)));
    }
    terms.sort_by(|(_, a), (_, b)| a.cmp(b));
    let mut merged: Vec<(f64, Term)> = Vec::new();
    for (c, t) in terms {
        match merged.last_mut() {
            Some((mc, mt)) if *mt == t => *mc += c,
            _ => merged.push((c, t)),
        }
    }
    merged.retain(|(c, _)| c.abs() > COEFF_EPS);
    Ok(Polyterm {
        terms: merged,
        constant,
    })
}

/// Canonically label a raw term: among all assignments of 0..n to its bound
/// names, pick the one whose sorted atom list is lexicographically least.
fn label(t: &RawTerm) -> Term {
    let bound: Vec<&String> = t.bound.iter().collect();
    let n = bound.len();

    // intern matrix and free-index names; id order mirrors string order, so
    // comparisons in code space agree with comparisons of finished atoms
    let mut mats: Vec<&str> = t.atoms.iter().map(|a| a.mat.as_str()).collect();
    mats.sort_unstable();
    mats.dedup();
    let mut frees: Vec<&str> = t
        .atoms
        .iter()
        .flat_map(|a| a.indices.iter())
        .filter(|i| !t.bound.contains(*i))
        .map(|s| s.as_str())
        .collect();
    frees.sort_unstable();
    frees.dedup();

    // (tag, id) encoding: tag 0 = free, 1 = bound (matches Index's ordering)
    type Code = (u8, usize);
    let pre: Vec<(usize, Vec<Code>)> = t
        .atoms
        .iter()
        .map(|a| {
            let m = mats.binary_search(&a.mat.as_str()).unwrap();
            let idxs = a
                .indices
                .iter()
                .map(|i| match bound.iter().position(|b| *b == i) {
                    Some(p) => (1u8, p),
                    None => (0u8, frees.binary_search(&i.as_str()).unwrap()),
                })
                .collect();
            (m, idxs)
        })
        .collect();

    let mut best: Option<Vec<(usize, Vec<Code>)>> = None;
    let mut perm: Vec<usize> = (0..n).collect();
    permute(&mut perm, 0, &mut |p| {
        let mut cand: Vec<(usize, Vec<Code>)> = pre
            .iter()
            .map(|(m, idxs)| {
                (
                    *m,
                    idxs.iter()
                        .map(|(tag, id)| if *tag == 1 { (1, p[*id]) } else { (0, *id) })
                        .collect(),
                )
            })
            .collect();
        cand.sort();
        if best.as_ref().map_or(true, |b| cand < *b) {
            best = Some(cand);
        }
    });

    let atoms = best
        .unwrap_or_default()
        .into_iter()
        .map(|(m, idxs)| Atom {
            mat: mats[m].to_string(),
            indices: idxs
                .into_iter()
                .map(|(tag, id)| {
                    if tag == 1 {
                        Index::Bound(id)
                    } else {
                        Index::Free(frees[id].to_string())
                    }
                })
                .collect(),
        })
        .collect();
    Term { bound: n, atoms }
}

/// Visit every permutation of `arr[k..]` in place.
fn permute(arr: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == arr.len() {
        f(arr);
        return;
    }
    for i in k..arr.len() {
        arr.swap(k, i);
        permute(arr, k + 1, f);
        arr.swap(k, i);
    }
}

// ---- printing ----

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Index::Free(s) => write!(f, "{s}"),
            Index::Bound(k) => write!(f, "b{k}"),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.mat)?;
        if !self.indices.is_empty() {
            write!(f, "(")?;
            for (n, i) in self.indices.iter().enumerate() {
                if n > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{i}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body = {
            let mut parts = Vec::new();
            let mut k = 0;
            while k < self.atoms.len() {
                let mut run = 1;
                while k + run < self.atoms.len() && self.atoms[k + run] == self.atoms[k] {
                    run += 1;
                }
                let mut s = self.atoms[k].to_string();
                if run > 1 {
                    s.push_str(&format!("^{run}"));
                }
                parts.push(s);
                k += run;
            }
            parts.join(" * ")
        };
        if self.bound == 0 {
            write!(f, "{body}")
        } else {
            let labels: Vec<String> = (0..self.bound).map(|k| format!("b{k}")).collect();
            write!(f, "sum[{}]({body})", labels.join(" "))
        }
    }
}

impl fmt::Display for Polyterm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "{}", self.constant);
        }
        for (k, (c, t)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            if *c == 1.0 {
                write!(f, "{t}")?;
            } else {
                write!(f, "{c} * {t}")?;
            }
        }
        if self.constant != 0.0 {
            write!(f, " + {}", self.constant)?;
        }
        Ok(())
    }
}
