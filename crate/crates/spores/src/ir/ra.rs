//! Relational-algebra expressions over named attributes.
//!
//! A relation maps attribute valuations to a real value. Matrices enter this
//! world through `Bind`, which names the row/col dimensions; `Join` multiplies
//! matching tuples (natural join), `Union` adds them (missing attributes
//! broadcast), `Agg` sums attributes away, `Rename` substitutes attribute
//! names. `Unbind` converts back to a matrix and is only meaningful at the
//! root of a plan, so schema checking rejects it inside relational input.

use super::{AttrDims, Catalog, IrError, Schema};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Debug, PartialEq)]
pub enum RAExpr {
    /// Name a matrix's dimensions. `row`/`col` may be `None` only when the
    /// corresponding dimension is 1.
    Bind {
        mat: String,
        row: Option<String>,
        col: Option<String>,
    },
    /// Scalar constant (empty schema).
    Lit(f64),
    /// The size of an attribute's domain, as a scalar.
    Dim(String),
    /// Natural join: multiply values on matching attributes.
    Join(Vec<RAExpr>),
    /// Sum values; children may have different schemas, missing attributes
    /// broadcast.
    Union(Vec<RAExpr>),
    /// Sum the named attributes out of the child.
    Agg(BTreeSet<String>, Box<RAExpr>),
    /// Convert a relation back into a matrix with the given row/col
    /// attributes.
    Unbind {
        e: Box<RAExpr>,
        row: Option<String>,
        col: Option<String>,
    },
    /// Substitute attribute names (simultaneous, so swaps are legal).
    Rename {
        e: Box<RAExpr>,
        map: BTreeMap<String, String>,
    },
}

impl RAExpr {
    pub fn bind(mat: impl Into<String>, row: Option<&str>, col: Option<&str>) -> Self {
        RAExpr::Bind {
            mat: mat.into(),
            row: row.map(str::to_string),
            col: col.map(str::to_string),
        }
    }

    pub fn agg<I: IntoIterator<Item = S>, S: Into<String>>(attrs: I, e: RAExpr) -> Self {
        RAExpr::Agg(
            attrs.into_iter().map(Into::into).collect(),
            Box::new(e),
        )
    }
}

/// Compute the schema of a relational expression, checking attribute
/// consistency along the way. See [`check_ra`] for the dims registry.
pub fn schema_of(e: &RAExpr, cat: &Catalog) -> Result<Schema, IrError> {
    check_ra(e, cat).map(|(s, _)| s)
}

/// Schema plus the registry of every attribute's domain size. Runs two
/// passes so that a `(dim i)` may appear before the bind that introduces `i`.
pub fn check_ra(e: &RAExpr, cat: &Catalog) -> Result<(Schema, AttrDims), IrError> {
    let mut dims = AttrDims::new();
    walk(e, cat, &mut dims, true)?;
    let schema = walk(e, cat, &mut dims, false)?;
    Ok((schema, dims))
}

fn walk(
    e: &RAExpr,
    cat: &Catalog,
    dims: &mut AttrDims,
    collecting: bool,
) -> Result<Schema, IrError> {
    match e {
        RAExpr::Bind { mat, row, col } => {
            let info = cat.get(mat)?;
            if row == col && row.is_some() {
                return Err(IrError::BadExpr(format!(
                    "bind of {} uses attribute {} for both dimensions",
                    mat,
                    row.as_ref().unwrap()
                )));
            }
            let mut schema = Schema::empty();
            for (attr, dim, axis) in [(row, info.rows, "rows"), (col, info.cols, "cols")] {
                match attr {
                    Some(name) => {
                        dims.declare(name, dim)?;
                        schema.insert(name.clone(), dim);
                    }
                    None => {
                        if dim != 1 {
                            return Err(IrError::DimMismatch {
                                op: "bind".into(),
                                detail: format!(
                                    "{} has {} {} but no attribute names that dimension",
                                    mat, dim, axis
                                ),
                            });
                        }
                    }
                }
            }
            Ok(schema)
        }
        RAExpr::Lit(_) => Ok(Schema::empty()),
        RAExpr::Dim(attr) => {
            if !collecting {
                dims.require(attr)?;
            }
            Ok(Schema::empty())
        }
        RAExpr::Join(children) | RAExpr::Union(children) => {
            if children.is_empty() {
                let op = if matches!(e, RAExpr::Join(_)) { "join" } else { "union" };
                return Err(IrError::BadExpr(format!("{op} needs at least one child")));
            }
            let mut schema = Schema::empty();
            for c in children {
                schema = schema.union(&walk(c, cat, dims, collecting)?);
            }
            Ok(schema)
        }
        RAExpr::Agg(attrs, child) => {
            let mut schema = walk(child, cat, dims, collecting)?;
            for a in attrs {
                if !collecting {
                    // summing an attribute the child lacks multiplies by its
                    // domain size, so the size must at least be known
                    dims.require(a)?;
                }
                schema.remove(a);
            }
            Ok(schema)
        }
        RAExpr::Unbind { .. } => Err(IrError::BadExpr(
            "unbind is a plan-output marker and not part of relational input".into(),
        )),
        RAExpr::Rename { e: child, map } => {
            let schema = walk(child, cat, dims, collecting)?;
            if collecting {
                // register the new names so a sibling (dim k) can see them
                for (old, new) in map {
                    if let Some(d) = schema.dim(old) {
                        dims.declare(new, d)?;
                    }
                }
                let mut out = Schema::empty();
                for (name, dim) in schema.iter() {
                    let target = map.get(name).map(String::as_str).unwrap_or(name);
                    out.insert(target, dim);
                }
                return Ok(out);
            }
            for old in map.keys() {
                if schema.dim(old).is_none() {
                    return Err(IrError::UnknownAttr(format!(
                        "rename source {} not in schema {}",
                        old, schema
                    )));
                }
            }
            let mut out = Schema::empty();
            for (name, dim) in schema.iter() {
                let target = map.get(name).map(String::as_str).unwrap_or(name);
                if out.dim(target).is_some() {
                    return Err(IrError::BadExpr(format!(
                        "rename maps two attributes onto {}",
                        target
                    )));
                }
                dims.declare(target, dim)?;
                out.insert(target, dim);
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::MatrixInfo;

    fn cat() -> Catalog {
        let mut c = Catalog::new();
        c.insert(MatrixInfo::dense("X", 4, 3)).unwrap();
        c.insert(MatrixInfo::dense("Y", 3, 5)).unwrap();
        c.insert(MatrixInfo::dense("u", 4, 1)).unwrap();
        c
    }

    #[test]
    fn join_unions_schemas() {
        let c = cat();
        let e = RAExpr::Join(vec![
            RAExpr::bind("X", Some("i"), Some("j")),
            RAExpr::bind("Y", Some("j"), Some("k")),
        ]);
        let s = schema_of(&e, &c).unwrap();
        assert_eq!(s.to_string(), "{i:4, j:3, k:5}");
    }

    #[test]
    fn matrix_product_schema() {
        let c = cat();
        let e = RAExpr::agg(
            ["j"],
            RAExpr::Join(vec![
                RAExpr::bind("X", Some("i"), Some("j")),
                RAExpr::bind("Y", Some("j"), Some("k")),
            ]),
        );
        assert_eq!(schema_of(&e, &c).unwrap().to_string(), "{i:4, k:5}");
    }

    #[test]
    fn bind_must_name_wide_dimensions() {
        let c = cat();
        let ok = RAExpr::bind("u", Some("i"), None);
        assert_eq!(schema_of(&ok, &c).unwrap().to_string(), "{i:4}");
        let bad = RAExpr::bind("X", Some("i"), None);
        assert!(schema_of(&bad, &c).is_err());
    }

    #[test]
    fn attr_dim_conflicts_are_rejected() {
        let c = cat();
        // i would need to be both 4 (rows of X) and 3 (rows of Y)
        let e = RAExpr::Join(vec![
            RAExpr::bind("X", Some("i"), Some("j")),
            RAExpr::bind("Y", Some("i"), Some("k")),
        ]);
        match schema_of(&e, &c) {
            Err(IrError::AttrConflict { name, .. }) => assert_eq!(name, "i"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dim_sees_attrs_bound_later() {
        let c = cat();
        let e = RAExpr::Join(vec![
            RAExpr::Dim("i".into()),
            RAExpr::bind("X", Some("i"), Some("j")),
        ]);
        assert!(schema_of(&e, &c).is_ok());
        let e = RAExpr::Dim("q".into());
        assert!(matches!(schema_of(&e, &c), Err(IrError::UnknownAttr(_))));
    }

    #[test]
    fn rename_to_fresh_name() {
        let c = cat();
        let x = RAExpr::bind("X", Some("i"), Some("j"));
        let renamed = RAExpr::Rename {
            e: Box::new(x),
            map: [("i".to_string(), "r".to_string())].into_iter().collect(),
        };
        assert_eq!(schema_of(&renamed, &c).unwrap().to_string(), "{j:3, r:4}");
    }

    #[test]
    fn rename_cannot_change_an_attrs_domain() {
        let c = cat();
        let x = RAExpr::bind("X", Some("i"), Some("j"));
        // j already denotes a domain of size 3; renaming i (size 4) onto it
        // is a type error even before the collision check
        let clash = RAExpr::Rename {
            e: Box::new(x.clone()),
            map: [("i".to_string(), "j".to_string())].into_iter().collect(),
        };
        assert!(schema_of(&clash, &c).is_err());
        // swapping two attrs of equal domain size is fine
        let mut c2 = Catalog::new();
        c2.insert(MatrixInfo::dense("S", 4, 4)).unwrap();
        let s = RAExpr::bind("S", Some("i"), Some("j"));
        let swap = RAExpr::Rename {
            e: Box::new(s),
            map: [
                ("i".to_string(), "j".to_string()),
                ("j".to_string(), "i".to_string()),
            ]
            .into_iter()
            .collect(),
        };
        assert_eq!(schema_of(&swap, &c2).unwrap().to_string(), "{i:4, j:4}");
    }

    #[test]
    fn unbind_inside_is_rejected() {
        let c = cat();
        let e = RAExpr::Unbind {
            e: Box::new(RAExpr::bind("X", Some("i"), Some("j"))),
            row: Some("i".into()),
            col: Some("j".into()),
        };
        assert!(schema_of(&e, &c).is_err());
    }
}
