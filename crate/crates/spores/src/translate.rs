//! Structural lowering from linear algebra to the relational form.
//!
//! Attribute names are imposed top-down: the caller fixes the names of the
//! result's row/col axes (only for dimensions above 1), and every summation
//! inside allocates a fresh name. The output never contains renames or
//! unbinds, which keeps the canonicalizer's job simple. Two expressions
//! lowered with the same root names are directly comparable.

use crate::ir::{Catalog, IrError, LAExpr, RAExpr};

/// Row/col attribute names chosen for the root, `None` where the dimension
/// is 1.
#[derive(Clone, Debug, PartialEq)]
pub struct RootAttrs {
    pub row: Option<String>,
    pub col: Option<String>,
}

pub fn la_to_ra(e: &LAExpr, cat: &Catalog) -> Result<(RAExpr, RootAttrs), IrError> {
    let shape = e.shape(cat)?;
    let root = RootAttrs {
        row: (shape.rows() > 1).then(|| "i".to_string()),
        col: (shape.cols() > 1).then(|| "j".to_string()),
    };
    let mut tr = Translator { cat, next: 0 };
    let ra = tr.lower(e, &root.row, &root.col)?;
    Ok((ra, root))
}

struct Translator<'a> {
    cat: &'a Catalog,
    next: u32,
}

impl<'a> Translator<'a> {
    fn fresh(&mut self) -> String {
        let n = self.next;
        self.next += 1;
        format!("k{n}")
    }

    /// `row`/`col` carry the attr names the caller wants on this value's
    /// axes; they are `Some` exactly when the axis has dimension above 1.
    fn lower(
        &mut self,
        e: &LAExpr,
        row: &Option<String>,
        col: &Option<String>,
    ) -> Result<RAExpr, IrError> {
        use LAExpr::*;
        match e {
            Mat(name) => Ok(RAExpr::Bind {
                mat: name.clone(),
                row: row.clone(),
                col: col.clone(),
            }),
            Lit(v) => Ok(RAExpr::Lit(*v)),
            Transpose(a) => self.lower(a, col, row),
            MMult(a, b) => {
                let k = a.shape(self.cat)?.cols();
                if k > 1 {
                    let shared = Some(self.fresh());
                    let ra = self.lower(a, row, &shared)?;
                    let rb = self.lower(b, &shared, col)?;
                    Ok(RAExpr::Agg(
                        [shared.unwrap()].into_iter().collect(),
                        Box::new(RAExpr::Join(vec![ra, rb])),
                    ))
                } else {
                    // inner dimension 1: an outer product, nothing to sum
                    let ra = self.lower(a, row, &None)?;
                    let rb = self.lower(b, &None, col)?;
                    Ok(RAExpr::Join(vec![ra, rb]))
                }
            }
            ElemMult(a, b) => {
                let (ra, rb) = self.lower_elemwise(a, b, row, col)?;
                Ok(RAExpr::Join(vec![ra, rb]))
            }
            ElemPlus(a, b) => {
                let (ra, rb) = self.lower_elemwise(a, b, row, col)?;
                Ok(RAExpr::Union(vec![ra, rb]))
            }
            ElemMinus(a, b) => {
                let (ra, rb) = self.lower_elemwise(a, b, row, col)?;
                Ok(RAExpr::Union(vec![
                    ra,
                    RAExpr::Join(vec![RAExpr::Lit(-1.0), rb]),
                ]))
            }
            ElemPow(a, k) => {
                let ra = self.lower(a, row, col)?;
                Ok(RAExpr::Join(vec![ra; *k as usize]))
            }
            RowAgg(a) => {
                let n = a.shape(self.cat)?.cols();
                if n > 1 {
                    let c = self.fresh();
                    let inner = self.lower(a, row, &Some(c.clone()))?;
                    Ok(RAExpr::Agg([c].into_iter().collect(), Box::new(inner)))
                } else {
                    self.lower(a, row, &None)
                }
            }
            ColAgg(a) => {
                let m = a.shape(self.cat)?.rows();
                if m > 1 {
                    let r = self.fresh();
                    let inner = self.lower(a, &Some(r.clone()), col)?;
                    Ok(RAExpr::Agg([r].into_iter().collect(), Box::new(inner)))
                } else {
                    self.lower(a, &None, col)
                }
            }
            Agg(a) => {
                let s = a.shape(self.cat)?;
                let mut bound = std::collections::BTreeSet::new();
                let r = (s.rows() > 1).then(|| self.fresh());
                let c = (s.cols() > 1).then(|| self.fresh());
                bound.extend(r.iter().cloned());
                bound.extend(c.iter().cloned());
                let inner = self.lower(a, &r, &c)?;
                if bound.is_empty() {
                    Ok(inner)
                } else {
                    Ok(RAExpr::Agg(bound, Box::new(inner)))
                }
            }
            Call(name, _) => Err(IrError::BadExpr(format!(
                "opaque function {name} has no relational form"
            ))),
        }
    }

    /// Project the result axes onto each operand: an operand whose axis has
    /// dimension 1 is constant along it and takes no attribute there.
    fn lower_elemwise(
        &mut self,
        a: &LAExpr,
        b: &LAExpr,
        row: &Option<String>,
        col: &Option<String>,
    ) -> Result<(RAExpr, RAExpr), IrError> {
        let sa = a.shape(self.cat)?;
        let sb = b.shape(self.cat)?;
        let project =
            |slot: &Option<String>, d: u64| if d > 1 { slot.clone() } else { None };
        let ra = self.lower(a, &project(row, sa.rows()), &project(col, sa.cols()))?;
        let rb = self.lower(b, &project(row, sb.rows()), &project(col, sb.cols()))?;
        Ok((ra, rb))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{eval_la, eval_ra, random_inputs};
    use crate::ir::{check_ra, parse_la, MatrixInfo};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cat() -> Catalog {
        let mut c = Catalog::new();
        c.insert(MatrixInfo::dense("A", 3, 4)).unwrap();
        c.insert(MatrixInfo::dense("B", 4, 2)).unwrap();
        c.insert(MatrixInfo::dense("C", 3, 4)).unwrap();
        c.insert(MatrixInfo::dense("u", 3, 1)).unwrap();
        c.insert(MatrixInfo::dense("v", 4, 1)).unwrap();
        c.insert(MatrixInfo::dense("s", 1, 1)).unwrap();
        c
    }

    fn check_same(src: &str) {
        let c = cat();
        let e = parse_la(src).unwrap();
        let (ra, root) = la_to_ra(&e, &c).unwrap();
        let (_, dims) = check_ra(&ra, &c).expect(&format!("schema check failed for {ra}"));
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let inputs = random_inputs(&c, &mut rng);
        let want = eval_la(&e, &c, &inputs)
            .unwrap()
            .to_rel(root.row.as_deref(), root.col.as_deref())
            .unwrap();
        let got = eval_ra(&ra, &c, &dims, &inputs).unwrap();
        assert!(
            got.approx_eq(&want),
            "lowering of {src} diverges: {ra}\n got {:?}\nwant {:?}",
            got,
            want
        );
    }

    #[test]
    fn products_and_sums_agree_with_direct_evaluation() {
        for src in [
            "A %*% B",
            "A * C",
            "A + C",
            "A - C",
            "t(A) %*% u",
            "sum(A %*% B)",
            "rowSums(A)",
            "colSums(A)",
            "t(rowSums(A))",
            "sum(u)",
        ] {
            check_same(src);
        }
    }

    #[test]
    fn broadcasts_and_outer_products() {
        for src in [
            "A * u",         // column vector scales rows
            "A * t(v)",      // row vector scales columns
            "A + s",         // scalar broadcast
            "u %*% t(v)",    // outer product: no summation attr
            "s * A",
            "u * u",
            "sum(A) * C",
        ] {
            check_same(src);
        }
    }

    #[test]
    fn powers_duplicate_the_factor() {
        check_same("A^2");
        check_same("(A - C)^3");
        let c = cat();
        let e = parse_la("A^2").unwrap();
        let (ra, _) = la_to_ra(&e, &c).unwrap();
        match &ra {
            RAExpr::Join(children) => {
                assert_eq!(children.len(), 2);
                assert_eq!(children[0], children[1]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nested_aggregates_allocate_distinct_names() {
        check_same("sum(A * C) + sum(t(A) %*% A %*% v)");
        check_same("colSums(A)%*%rowSums(B)");
        check_same("sum((A - C) * A)^2");
    }

    #[test]
    fn opaque_calls_do_not_lower() {
        let mut c = cat();
        c.declare_func("f", 1).unwrap();
        let e = parse_la("f(A)").unwrap();
        assert!(la_to_ra(&e, &c).is_err());
    }

    #[test]
    fn root_attrs_follow_result_shape() {
        let c = cat();
        let (_, root) = la_to_ra(&parse_la("sum(A)").unwrap(), &c).unwrap();
        assert_eq!(root, RootAttrs { row: None, col: None });
        let (_, root) = la_to_ra(&parse_la("rowSums(A)").unwrap(), &c).unwrap();
        assert_eq!(root.row.as_deref(), Some("i"));
        assert_eq!(root.col, None);
        let (_, root) = la_to_ra(&parse_la("t(u)").unwrap(), &c).unwrap();
        assert_eq!(root.row, None);
        assert_eq!(root.col.as_deref(), Some("j"));
    }
}
