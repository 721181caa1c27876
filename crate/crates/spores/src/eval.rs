//! Reference interpreter for both expression surfaces.
//!
//! Everything evaluates to a dense [`Tensor`]: matrices are row-major, and
//! relational values are laid out row-major over their attribute list sorted
//! by name. 1x1 matrices normalize to scalars so the two worlds agree on what
//! a scalar is. This interpreter exists to check optimizer output against the
//! input expression, so it favors obviousness over speed.

use crate::ir::{AttrDims, Attribute, Catalog, LAExpr, RAExpr};
use rand::Rng;
use std::collections::BTreeMap;
use thiserror::Error;

/// Relative tolerance for value comparisons.
pub const REL_TOL: f64 = 1e-9;
/// Absolute floor below which differences are noise.
pub const ABS_TOL: f64 = 1e-12;

pub fn nearly_equal(a: f64, b: f64) -> bool {
    let d = (a - b).abs();
    d <= ABS_TOL || d <= REL_TOL * a.abs().max(b.abs())
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no input tensor for matrix {0}")]
    MissingInput(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("cannot evaluate opaque function {0}")]
    Opaque(String),
    #[error("attribute problem: {0}")]
    Attr(String),
    #[error("result would hold {0} entries; refusing")]
    TooBig(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Mat { rows: u64, cols: u64 },
    /// Attributes sorted by name; an empty list is a scalar.
    Rel(Vec<Attribute>),
}

impl Shape {
    pub fn size(&self) -> u64 {
        match self {
            Shape::Mat { rows, cols } => rows * cols,
            Shape::Rel(attrs) => attrs.iter().map(|a| a.dim).product(),
        }
    }
}

const MAX_ENTRIES: u64 = 16_000_000;

#[derive(Clone, Debug)]
pub struct Tensor {
    pub shape: Shape,
    pub data: Vec<f64>,
}

fn us(x: u64) -> usize {
    x as usize
}

impl Tensor {
    pub fn scalar(v: f64) -> Tensor {
        Tensor {
            shape: Shape::Rel(Vec::new()),
            data: vec![v],
        }
    }

    /// Row-major matrix; 1x1 collapses to a scalar.
    pub fn mat(rows: u64, cols: u64, data: Vec<f64>) -> Tensor {
        assert_eq!(data.len(), us(rows * cols), "matrix data length");
        if rows == 1 && cols == 1 {
            return Tensor::scalar(data[0]);
        }
        Tensor {
            shape: Shape::Mat { rows, cols },
            data,
        }
    }

    /// Relation over `attrs` (any order); data must be row-major over the
    /// order given, and is re-laid-out to name order.
    pub fn rel(attrs: Vec<Attribute>, data: Vec<f64>) -> Tensor {
        let size: u64 = attrs.iter().map(|a| a.dim).product();
        assert_eq!(data.len(), us(size), "relation data length");
        let mut sorted = attrs.clone();
        sorted.sort_by(|a, b| a.name.cmp(&b.name));
        if sorted == attrs {
            return Tensor {
                shape: Shape::Rel(sorted),
                data,
            };
        }
        let out_strides = strides(&sorted);
        let mut out = vec![0.0; data.len()];
        let mut tuple = vec![0u64; attrs.len()];
        for v in &data {
            let mut idx = 0u64;
            for (k, a) in attrs.iter().enumerate() {
                let pos = sorted.iter().position(|s| s.name == a.name).unwrap();
                idx += tuple[k] * out_strides[pos];
            }
            out[us(idx)] = *v;
            advance(&mut tuple, &attrs);
        }
        Tensor {
            shape: Shape::Rel(sorted),
            data: out,
        }
    }

    pub fn rows(&self) -> u64 {
        match &self.shape {
            Shape::Mat { rows, .. } => *rows,
            Shape::Rel(attrs) if attrs.is_empty() => 1,
            Shape::Rel(_) => panic!("rows() on a relation"),
        }
    }

    pub fn cols(&self) -> u64 {
        match &self.shape {
            Shape::Mat { cols, .. } => *cols,
            Shape::Rel(attrs) if attrs.is_empty() => 1,
            Shape::Rel(_) => panic!("cols() on a relation"),
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(&self.shape, Shape::Rel(a) if a.is_empty())
    }

    pub fn as_scalar(&self) -> Option<f64> {
        if self.data.len() == 1 {
            Some(self.data[0])
        } else {
            None
        }
    }

    /// Reinterpret a matrix as a relation with the given attribute names
    /// (mirrors what binding does to the real matrix).
    pub fn to_rel(&self, row: Option<&str>, col: Option<&str>) -> Result<Tensor, EvalError> {
        bind_tensor(self, row, col)
    }

    pub fn approx_eq(&self, other: &Tensor) -> bool {
        self.shape == other.shape
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| nearly_equal(*a, *b))
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Option<f64> {
        if self.shape != other.shape {
            return None;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(None, |acc, d| Some(acc.map_or(d, |m: f64| m.max(d))))
    }

    /// Random matrix with roughly the requested fill fraction. `sparsity` 0
    /// yields exactly the zero matrix.
    pub fn random(rows: u64, cols: u64, sparsity: f64, rng: &mut impl Rng) -> Tensor {
        let data = (0..rows * cols)
            .map(|_| {
                if rng.gen::<f64>() < sparsity {
                    // keep magnitudes near 1 so comparisons stay well scaled
                    rng.gen_range(-1.0..1.0) + if rng.gen() { 1.0 } else { -1.0 }
                } else {
                    0.0
                }
            })
            .collect();
        Tensor::mat(rows, cols, data)
    }
}

/// One random input tensor per catalog matrix, in name order.
pub fn random_inputs(cat: &Catalog, rng: &mut impl Rng) -> BTreeMap<String, Tensor> {
    cat.matrices()
        .map(|info| {
            (
                info.name.clone(),
                Tensor::random(info.rows, info.cols, info.sparsity(), rng),
            )
        })
        .collect()
}

// ---- layout helpers ----

/// Row-major strides over an attribute list.
fn strides(attrs: &[Attribute]) -> Vec<u64> {
    let mut s = vec![1u64; attrs.len()];
    for k in (0..attrs.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * attrs[k + 1].dim;
    }
    s
}

/// Advance a mixed-radix tuple; wraps to all-zero after the last one.
fn advance(tuple: &mut [u64], attrs: &[Attribute]) {
    for k in (0..tuple.len()).rev() {
        tuple[k] += 1;
        if tuple[k] < attrs[k].dim {
            return;
        }
        tuple[k] = 0;
    }
}

/// Union of attribute lists; errors if a name appears at two different dims.
fn union_attrs(lists: &[&[Attribute]]) -> Result<Vec<Attribute>, EvalError> {
    let mut out: BTreeMap<&str, u64> = BTreeMap::new();
    for list in lists {
        for a in *list {
            match out.get(a.name.as_str()) {
                Some(d) if *d != a.dim => {
                    return Err(EvalError::Attr(format!(
                        "attribute {} used at sizes {} and {}",
                        a.name, d, a.dim
                    )))
                }
                _ => {
                    out.insert(&a.name, a.dim);
                }
            }
        }
    }
    Ok(out
        .into_iter()
        .map(|(n, d)| Attribute::new(n, d))
        .collect())
}

/// For each output attribute, the stride it contributes to a child's flat
/// index (0 when the child lacks that attribute).
fn projection(out_attrs: &[Attribute], child_attrs: &[Attribute]) -> Vec<u64> {
    let child_strides = strides(child_attrs);
    out_attrs
        .iter()
        .map(|a| {
            child_attrs
                .iter()
                .position(|c| c.name == a.name)
                .map(|p| child_strides[p])
                .unwrap_or(0)
        })
        .collect()
}

fn check_size(attrs: &[Attribute]) -> Result<u64, EvalError> {
    let size: u64 = attrs.iter().map(|a| a.dim).product();
    if size > MAX_ENTRIES {
        return Err(EvalError::TooBig(size));
    }
    Ok(size)
}

fn rel_attrs(t: &Tensor) -> Result<&[Attribute], EvalError> {
    match &t.shape {
        Shape::Rel(a) => Ok(a),
        Shape::Mat { rows, cols } => Err(EvalError::Shape(format!(
            "expected a relation, found a {rows}x{cols} matrix"
        ))),
    }
}

/// Pointwise combine with schema union; missing attributes broadcast.
fn rel_zip(args: &[Tensor], mul: bool) -> Result<Tensor, EvalError> {
    let lists: Vec<&[Attribute]> = args
        .iter()
        .map(rel_attrs)
        .collect::<Result<_, _>>()?;
    let out_attrs = union_attrs(&lists)?;
    let size = check_size(&out_attrs)?;
    let projs: Vec<Vec<u64>> = lists.iter().map(|l| projection(&out_attrs, l)).collect();
    let mut data = vec![0.0; us(size)];
    let mut tuple = vec![0u64; out_attrs.len()];
    for slot in data.iter_mut() {
        let mut acc = if mul { 1.0 } else { 0.0 };
        for (t, proj) in args.iter().zip(&projs) {
            let idx: u64 = tuple.iter().zip(proj).map(|(v, s)| v * s).sum();
            let v = t.data[us(idx)];
            if mul {
                acc *= v;
            } else {
                acc += v;
            }
        }
        *slot = acc;
        advance(&mut tuple, &out_attrs);
    }
    Ok(Tensor {
        shape: Shape::Rel(out_attrs),
        data,
    })
}

/// Sum the named attributes out; attributes the child lacks multiply the
/// result by their domain size.
fn rel_agg(
    bound: &std::collections::BTreeSet<String>,
    child: &Tensor,
    dims: &AttrDims,
) -> Result<Tensor, EvalError> {
    let attrs = rel_attrs(child)?;
    let mut factor = 1.0;
    for b in bound {
        if !attrs.iter().any(|a| &a.name == b) {
            let d = dims
                .get(b)
                .ok_or_else(|| EvalError::Attr(format!("unknown attribute {b}")))?;
            factor *= d as f64;
        }
    }
    let out_attrs: Vec<Attribute> = attrs
        .iter()
        .filter(|a| !bound.contains(&a.name))
        .cloned()
        .collect();
    let proj = projection(attrs, &out_attrs); // child attr -> out stride
    let mut data = vec![0.0; us(out_attrs.iter().map(|a| a.dim).product::<u64>())];
    let mut tuple = vec![0u64; attrs.len()];
    for v in &child.data {
        let idx: u64 = tuple.iter().zip(&proj).map(|(t, s)| t * s).sum();
        data[us(idx)] += v;
        advance(&mut tuple, attrs);
    }
    for v in data.iter_mut() {
        *v *= factor;
    }
    Ok(Tensor {
        shape: Shape::Rel(out_attrs),
        data,
    })
}

fn rel_rename(child: &Tensor, map: &BTreeMap<String, String>) -> Result<Tensor, EvalError> {
    let attrs = rel_attrs(child)?;
    let renamed: Vec<Attribute> = attrs
        .iter()
        .map(|a| Attribute::new(map.get(&a.name).cloned().unwrap_or_else(|| a.name.clone()), a.dim))
        .collect();
    {
        let mut names: Vec<&str> = renamed.iter().map(|a| a.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != renamed.len() {
            return Err(EvalError::Attr("rename collapses two attributes".into()));
        }
    }
    Ok(Tensor::rel(renamed, child.data.clone()))
}

fn bind_tensor(m: &Tensor, row: Option<&str>, col: Option<&str>) -> Result<Tensor, EvalError> {
    let (rows, cols) = match &m.shape {
        Shape::Mat { rows, cols } => (*rows, *cols),
        Shape::Rel(a) if a.is_empty() => (1, 1),
        Shape::Rel(_) => return Err(EvalError::Shape("binding a relation".into())),
    };
    let mut attrs = Vec::new();
    for (slot, dim, axis) in [(row, rows, "rows"), (col, cols, "cols")] {
        match slot {
            Some(name) => attrs.push(Attribute::new(name, dim)),
            None if dim == 1 => {}
            None => {
                return Err(EvalError::Shape(format!(
                    "matrix has {dim} {axis} but no attribute names them"
                )))
            }
        }
    }
    // data is already row-major over (row, col); Tensor::rel re-sorts
    Ok(Tensor::rel(attrs, m.data.clone()))
}

// ---- linear-algebra evaluation ----

pub fn eval_la(
    e: &LAExpr,
    cat: &Catalog,
    inputs: &BTreeMap<String, Tensor>,
) -> Result<Tensor, EvalError> {
    use LAExpr::*;
    match e {
        Mat(name) => {
            let info = cat
                .get(name)
                .map_err(|_| EvalError::MissingInput(name.clone()))?;
            let t = inputs
                .get(name)
                .ok_or_else(|| EvalError::MissingInput(name.clone()))?;
            if t.rows() != info.rows || t.cols() != info.cols {
                return Err(EvalError::Shape(format!(
                    "input {} is {}x{} but the catalog says {}x{}",
                    name,
                    t.rows(),
                    t.cols(),
                    info.rows,
                    info.cols
                )));
            }
            Ok(t.clone())
        }
        Lit(v) => Ok(Tensor::scalar(*v)),
        MMult(a, b) => {
            let (ta, tb) = (eval_la(a, cat, inputs)?, eval_la(b, cat, inputs)?);
            let (m, ka) = (ta.rows(), ta.cols());
            let (kb, n) = (tb.rows(), tb.cols());
            if ka != kb {
                return Err(EvalError::Shape(format!(
                    "{m}x{ka} %*% {kb}x{n}"
                )));
            }
            let mut data = vec![0.0; us(m * n)];
            for i in 0..m {
                for j in 0..n {
                    let mut acc = 0.0;
                    for k in 0..ka {
                        acc += ta.data[us(i * ka + k)] * tb.data[us(k * n + j)];
                    }
                    data[us(i * n + j)] = acc;
                }
            }
            Ok(Tensor::mat(m, n, data))
        }
        ElemMult(a, b) => elemwise(e, a, b, cat, inputs, |x, y| x * y),
        ElemPlus(a, b) => elemwise(e, a, b, cat, inputs, |x, y| x + y),
        ElemMinus(a, b) => elemwise(e, a, b, cat, inputs, |x, y| x - y),
        ElemPow(a, k) => {
            let ta = eval_la(a, cat, inputs)?;
            let data = ta.data.iter().map(|v| v.powi(*k as i32)).collect();
            match ta.shape {
                Shape::Mat { rows, cols } => Ok(Tensor::mat(rows, cols, data)),
                Shape::Rel(_) => Ok(Tensor::scalar(ta.data[0].powi(*k as i32))),
            }
        }
        RowAgg(a) => {
            let t = eval_la(a, cat, inputs)?;
            let (m, n) = (t.rows(), t.cols());
            let data = (0..m)
                .map(|i| (0..n).map(|j| t.data[us(i * n + j)]).sum())
                .collect();
            Ok(Tensor::mat(m, 1, data))
        }
        ColAgg(a) => {
            let t = eval_la(a, cat, inputs)?;
            let (m, n) = (t.rows(), t.cols());
            let data = (0..n)
                .map(|j| (0..m).map(|i| t.data[us(i * n + j)]).sum())
                .collect();
            Ok(Tensor::mat(1, n, data))
        }
        Agg(a) => {
            let t = eval_la(a, cat, inputs)?;
            Ok(Tensor::scalar(t.data.iter().sum()))
        }
        Transpose(a) => {
            let t = eval_la(a, cat, inputs)?;
            let (m, n) = (t.rows(), t.cols());
            let mut data = vec![0.0; us(m * n)];
            for i in 0..m {
                for j in 0..n {
                    data[us(j * m + i)] = t.data[us(i * n + j)];
                }
            }
            Ok(Tensor::mat(n, m, data))
        }
        Call(name, _) => Err(EvalError::Opaque(name.clone())),
    }
}

fn elemwise(
    whole: &LAExpr,
    a: &LAExpr,
    b: &LAExpr,
    cat: &Catalog,
    inputs: &BTreeMap<String, Tensor>,
    op: impl Fn(f64, f64) -> f64,
) -> Result<Tensor, EvalError> {
    let (ta, tb) = (eval_la(a, cat, inputs)?, eval_la(b, cat, inputs)?);
    let sa = crate::ir::la::LaShape::mat(ta.rows(), ta.cols());
    let sb = crate::ir::la::LaShape::mat(tb.rows(), tb.cols());
    let out = crate::ir::la::broadcast(sa, sb).ok_or_else(|| {
        EvalError::Shape(format!("{sa} and {sb} do not broadcast in {whole}"))
    })?;
    let (m, n) = (out.rows(), out.cols());
    let mut data = vec![0.0; us(m * n)];
    for i in 0..m {
        for j in 0..n {
            let va = ta.data[us((i % ta.rows()) * ta.cols() + (j % ta.cols()))];
            let vb = tb.data[us((i % tb.rows()) * tb.cols() + (j % tb.cols()))];
            data[us(i * n + j)] = op(va, vb);
        }
    }
    Ok(Tensor::mat(m, n, data))
}

// ---- relational evaluation ----

pub fn eval_ra(
    e: &RAExpr,
    cat: &Catalog,
    dims: &AttrDims,
    inputs: &BTreeMap<String, Tensor>,
) -> Result<Tensor, EvalError> {
    match e {
        RAExpr::Bind { mat, row, col } => {
            let info = cat
                .get(mat)
                .map_err(|_| EvalError::MissingInput(mat.clone()))?;
            let t = inputs
                .get(mat)
                .ok_or_else(|| EvalError::MissingInput(mat.clone()))?;
            if t.rows() != info.rows || t.cols() != info.cols {
                return Err(EvalError::Shape(format!(
                    "input {} does not match the catalog",
                    mat
                )));
            }
            bind_tensor(t, row.as_deref(), col.as_deref())
        }
        RAExpr::Lit(v) => Ok(Tensor::scalar(*v)),
        RAExpr::Dim(a) => {
            let d = dims
                .get(a)
                .ok_or_else(|| EvalError::Attr(format!("unknown attribute {a}")))?;
            Ok(Tensor::scalar(d as f64))
        }
        RAExpr::Join(children) => {
            let ts: Vec<Tensor> = children
                .iter()
                .map(|c| eval_ra(c, cat, dims, inputs))
                .collect::<Result<_, _>>()?;
            rel_zip(&ts, true)
        }
        RAExpr::Union(children) => {
            let ts: Vec<Tensor> = children
                .iter()
                .map(|c| eval_ra(c, cat, dims, inputs))
                .collect::<Result<_, _>>()?;
            rel_zip(&ts, false)
        }
        RAExpr::Agg(attrs, child) => {
            let t = eval_ra(child, cat, dims, inputs)?;
            rel_agg(attrs, &t, dims)
        }
        RAExpr::Unbind { .. } => Err(EvalError::Shape(
            "unbind is not evaluatable as a relation".into(),
        )),
        RAExpr::Rename { e: child, map } => {
            let t = eval_ra(child, cat, dims, inputs)?;
            rel_rename(&t, map)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{check_ra, parse_la, sexpr::parse_ra, MatrixInfo};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cat() -> Catalog {
        let mut c = Catalog::new();
        c.insert(MatrixInfo::dense("A", 2, 2)).unwrap();
        c.insert(MatrixInfo::dense("x", 2, 1)).unwrap();
        c
    }

    fn small_inputs() -> BTreeMap<String, Tensor> {
        let mut m = BTreeMap::new();
        m.insert("A".into(), Tensor::mat(2, 2, vec![0.0, 5.0, 7.0, 0.0]));
        m.insert("x".into(), Tensor::mat(2, 1, vec![3.0, 2.0]));
        m
    }

    #[test]
    fn la_oracles() {
        let cat = small_cat();
        let inputs = small_inputs();
        let run = |src: &str| eval_la(&parse_la(src).unwrap(), &cat, &inputs).unwrap();

        // row-vector broadcast scales columns
        let t = run("A * t(x)");
        assert!(t.approx_eq(&Tensor::mat(2, 2, vec![0.0, 10.0, 21.0, 0.0])));
        let t = run("A %*% x");
        assert!(t.approx_eq(&Tensor::mat(2, 1, vec![10.0, 21.0])));
        let t = run("sum(A)");
        assert_eq!(t.as_scalar(), Some(12.0));
        let t = run("rowSums(A) + colSums(A) %*% x");
        // rowSums=[5,7], colSums%*%x=[7*3+5*2]=31 broadcast
        assert!(t.approx_eq(&Tensor::mat(2, 1, vec![36.0, 38.0])));
    }

    #[test]
    fn ra_matches_la_on_matrix_product() {
        let mut cat = Catalog::new();
        cat.insert(MatrixInfo::dense("P", 3, 4)).unwrap();
        cat.insert(MatrixInfo::dense("Q", 4, 2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let inputs = random_inputs(&cat, &mut rng);

        let la = parse_la("P %*% Q").unwrap();
        let want = eval_la(&la, &cat, &inputs)
            .unwrap()
            .to_rel(Some("i"), Some("k"))
            .unwrap();

        let ra = parse_ra("(agg (j) (join (bind P i j) (bind Q j k)))").unwrap();
        let (_, dims) = check_ra(&ra, &cat).unwrap();
        let got = eval_ra(&ra, &cat, &dims, &inputs).unwrap();
        assert!(got.approx_eq(&want), "diff {:?}", got.max_abs_diff(&want));
    }

    #[test]
    fn union_broadcasts_missing_attributes() {
        let cat = small_cat();
        let inputs = small_inputs();
        let ra = parse_ra("(union (bind A i j) 5)").unwrap();
        let (_, dims) = check_ra(&ra, &cat).unwrap();
        let got = eval_ra(&ra, &cat, &dims, &inputs).unwrap();
        let want = eval_la(&parse_la("A + 5").unwrap(), &cat, &inputs)
            .unwrap()
            .to_rel(Some("i"), Some("j"))
            .unwrap();
        assert!(got.approx_eq(&want));

        let ra = parse_ra("(union (bind A i j) (bind x i _))").unwrap();
        let (_, dims) = check_ra(&ra, &cat).unwrap();
        let got = eval_ra(&ra, &cat, &dims, &inputs).unwrap();
        let want = eval_la(&parse_la("A + x").unwrap(), &cat, &inputs)
            .unwrap()
            .to_rel(Some("i"), Some("j"))
            .unwrap();
        assert!(got.approx_eq(&want));
    }

    #[test]
    fn summing_an_absent_attribute_multiplies_by_its_size() {
        let cat = small_cat();
        let inputs = small_inputs();
        let ra = parse_ra("(agg (q) (bind A i j))").unwrap();
        let mut dims = AttrDims::new();
        dims.declare("i", 2).unwrap();
        dims.declare("j", 2).unwrap();
        dims.declare("q", 5).unwrap();
        let got = eval_ra(&ra, &cat, &dims, &inputs).unwrap();
        let want = Tensor::mat(2, 2, vec![0.0, 25.0, 35.0, 0.0])
            .to_rel(Some("i"), Some("j"))
            .unwrap();
        assert!(got.approx_eq(&want));
    }

    #[test]
    fn bind_layout_respects_name_order() {
        // row attr sorts after col attr, so the relation layout transposes
        let mut cat = Catalog::new();
        cat.insert(MatrixInfo::dense("X", 2, 3)).unwrap();
        let mut inputs = BTreeMap::new();
        inputs.insert(
            "X".into(),
            Tensor::mat(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
        );
        let ra = parse_ra("(bind X z a)").unwrap();
        let (_, dims) = check_ra(&ra, &cat).unwrap();
        let got = eval_ra(&ra, &cat, &dims, &inputs).unwrap();
        match &got.shape {
            Shape::Rel(attrs) => {
                assert_eq!(attrs[0].name, "a");
                assert_eq!(attrs[1].name, "z");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(got.data, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }

    #[test]
    fn rename_relayouts() {
        let mut cat = Catalog::new();
        cat.insert(MatrixInfo::dense("X", 2, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inputs = random_inputs(&cat, &mut rng);
        // renaming i (rows) to z moves it after j in sort order
        let ra = parse_ra("(rename (bind X i j) (i z))").unwrap();
        let (_, dims) = check_ra(&ra, &cat).unwrap();
        let got = eval_ra(&ra, &cat, &dims, &inputs).unwrap();
        let direct = parse_ra("(bind X z j)").unwrap();
        let (_, dims2) = check_ra(&direct, &cat).unwrap();
        let want = eval_ra(&direct, &cat, &dims2, &inputs).unwrap();
        assert!(got.approx_eq(&want));
    }

    #[test]
    fn comparison_tolerances() {
        let a = Tensor::scalar(1.0);
        let b = Tensor::scalar(1.0 + 5e-10);
        assert!(a.approx_eq(&b));
        let c = Tensor::scalar(1.0 + 5e-8);
        assert!(!a.approx_eq(&c));
        // tiny absolute noise near zero passes
        let d = Tensor::scalar(5e-13);
        assert!(Tensor::scalar(0.0).approx_eq(&d));
    }

    #[test]
    fn sparsity_zero_inputs_are_exactly_zero() {
        let mut cat = Catalog::new();
        cat.insert(MatrixInfo::sparse("Z", 3, 3, 0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inputs = random_inputs(&cat, &mut rng);
        assert!(inputs["Z"].data.iter().all(|v| *v == 0.0));
    }
}
