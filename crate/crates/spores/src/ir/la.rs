//! Surface linear-algebra expressions: matrices, scalars, and the operator
//! set the optimizer accepts and emits.

use super::{Catalog, IrError};
use std::fmt;

/// Result type of a linear-algebra expression. 1x1 results are scalars; a
/// `Mat` shape always has at least one dimension above 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LaShape {
    Scalar,
    Mat { rows: u64, cols: u64 },
}

impl LaShape {
    pub fn mat(rows: u64, cols: u64) -> Self {
        if rows == 1 && cols == 1 {
            LaShape::Scalar
        } else {
            LaShape::Mat { rows, cols }
        }
    }

    pub fn rows(&self) -> u64 {
        match self {
            LaShape::Scalar => 1,
            LaShape::Mat { rows, .. } => *rows,
        }
    }

    pub fn cols(&self) -> u64 {
        match self {
            LaShape::Scalar => 1,
            LaShape::Mat { cols, .. } => *cols,
        }
    }

    pub fn size(&self) -> u64 {
        self.rows() * self.cols()
    }

    pub fn transposed(&self) -> LaShape {
        LaShape::mat(self.cols(), self.rows())
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, LaShape::Scalar)
    }
}

impl fmt::Display for LaShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows(), self.cols())
    }
}

/// A linear-algebra expression tree. Elementwise ops accept equal shapes, a
/// scalar on either side, or a row/column vector broadcast against a matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum LAExpr {
    /// Reference to a catalog matrix.
    Mat(String),
    /// Scalar literal.
    Lit(f64),
    /// Matrix product `a %*% b`.
    MMult(Box<LAExpr>, Box<LAExpr>),
    /// Elementwise product `a * b` (also covers scalar * matrix).
    ElemMult(Box<LAExpr>, Box<LAExpr>),
    /// Elementwise sum `a + b`.
    ElemPlus(Box<LAExpr>, Box<LAExpr>),
    /// Elementwise difference `a - b`.
    ElemMinus(Box<LAExpr>, Box<LAExpr>),
    /// Elementwise integer power `a ^ k`, k >= 1.
    ElemPow(Box<LAExpr>, u32),
    /// Row sums: MxN -> Mx1.
    RowAgg(Box<LAExpr>),
    /// Column sums: MxN -> 1xN.
    ColAgg(Box<LAExpr>),
    /// Full sum: MxN -> scalar.
    Agg(Box<LAExpr>),
    /// Transpose.
    Transpose(Box<LAExpr>),
    /// Opaque function call; shape follows the first argument.
    Call(String, Vec<LAExpr>),
}

impl LAExpr {
    pub fn mat(name: impl Into<String>) -> Self {
        LAExpr::Mat(name.into())
    }

    /// Compute the result shape, checking every dimension constraint on the
    /// way. Errors name the operator that failed.
    pub fn shape(&self, cat: &Catalog) -> Result<LaShape, IrError> {
        use LAExpr::*;
        match self {
            Mat(name) => {
                let info = cat.get(name)?;
                Ok(LaShape::mat(info.rows, info.cols))
            }
            Lit(_) => Ok(LaShape::Scalar),
            MMult(a, b) => {
                let (sa, sb) = (a.shape(cat)?, b.shape(cat)?);
                if sa.cols() != sb.rows() {
                    return Err(IrError::DimMismatch {
                        op: "%*%".into(),
                        detail: format!("{} %*% {}", sa, sb),
                    });
                }
                Ok(LaShape::mat(sa.rows(), sb.cols()))
            }
            ElemMult(a, b) => elemwise_shape("*", a.shape(cat)?, b.shape(cat)?),
            ElemPlus(a, b) => elemwise_shape("+", a.shape(cat)?, b.shape(cat)?),
            ElemMinus(a, b) => elemwise_shape("-", a.shape(cat)?, b.shape(cat)?),
            ElemPow(a, k) => {
                if *k == 0 {
                    return Err(IrError::DimMismatch {
                        op: "^".into(),
                        detail: "exponent must be at least 1".into(),
                    });
                }
                a.shape(cat)
            }
            RowAgg(a) => Ok(LaShape::mat(a.shape(cat)?.rows(), 1)),
            ColAgg(a) => Ok(LaShape::mat(1, a.shape(cat)?.cols())),
            Agg(a) => {
                a.shape(cat)?;
                Ok(LaShape::Scalar)
            }
            Transpose(a) => Ok(a.shape(cat)?.transposed()),
            Call(f, args) => {
                let arity = cat
                    .func_arity(f)
                    .ok_or_else(|| IrError::UnknownFunction(f.clone()))?;
                if args.len() != arity {
                    return Err(IrError::DimMismatch {
                        op: f.clone(),
                        detail: format!("expects {} arguments, got {}", arity, args.len()),
                    });
                }
                let first = args[0].shape(cat)?;
                for a in &args[1..] {
                    a.shape(cat)?;
                }
                Ok(first)
            }
        }
    }

    /// All catalog matrix names referenced, in first-appearance order.
    pub fn matrices(&self) -> Vec<String> {
        fn walk(e: &LAExpr, out: &mut Vec<String>) {
            use LAExpr::*;
            match e {
                Mat(n) => {
                    if !out.iter().any(|m| m == n) {
                        out.push(n.clone());
                    }
                }
                Lit(_) => {}
                MMult(a, b) | ElemMult(a, b) | ElemPlus(a, b) | ElemMinus(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                ElemPow(a, _) | RowAgg(a) | ColAgg(a) | Agg(a) | Transpose(a) => walk(a, out),
                Call(_, args) => args.iter().for_each(|a| walk(a, out)),
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    pub fn contains_call(&self) -> bool {
        use LAExpr::*;
        match self {
            Call(..) => true,
            Mat(_) | Lit(_) => false,
            MMult(a, b) | ElemMult(a, b) | ElemPlus(a, b) | ElemMinus(a, b) => {
                a.contains_call() || b.contains_call()
            }
            ElemPow(a, _) | RowAgg(a) | ColAgg(a) | Agg(a) | Transpose(a) => a.contains_call(),
        }
    }
}

/// Shapes two elementwise operands may combine at: equal, one scalar, or a
/// vector whose non-1 dim lines up with the matrix (row or column broadcast).
fn elemwise_shape(op: &str, a: LaShape, b: LaShape) -> Result<LaShape, IrError> {
    let combined = broadcast(a, b);
    combined.ok_or_else(|| IrError::DimMismatch {
        op: op.into(),
        detail: format!("{} {} {}", a, op, b),
    })
}

pub(crate) fn broadcast(a: LaShape, b: LaShape) -> Option<LaShape> {
    if a == b || b.is_scalar() {
        return Some(a);
    }
    if a.is_scalar() {
        return Some(b);
    }
    let (ar, ac, br, bc) = (a.rows(), a.cols(), b.rows(), b.cols());
    // column vector against matching rows, row vector against matching cols
    if ar == br && (ac == 1 || bc == 1) {
        return Some(LaShape::mat(ar, ac.max(bc)));
    }
    if ac == bc && (ar == 1 || br == 1) {
        return Some(LaShape::mat(ar.max(br), ac));
    }
    None
}

// Precedence levels for printing: additive 1, multiplicative 2, power 3.
fn prec(e: &LAExpr) -> u8 {
    use LAExpr::*;
    match e {
        ElemPlus(..) | ElemMinus(..) => 1,
        ElemMult(..) | MMult(..) => 2,
        ElemPow(..) => 3,
        Lit(v) if *v < 0.0 => 3,
        _ => 4,
    }
}

fn fmt_at(e: &LAExpr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let p = prec(e);
    let parens = p < min;
    if parens {
        write!(f, "(")?;
    }
    use LAExpr::*;
    match e {
        Mat(n) => write!(f, "{}", n)?,
        Lit(v) => write!(f, "{}", v)?,
        MMult(a, b) => {
            fmt_at(a, 2, f)?;
            write!(f, " %*% ")?;
            fmt_at(b, 3, f)?;
        }
        ElemMult(a, b) => {
            fmt_at(a, 2, f)?;
            write!(f, " * ")?;
            fmt_at(b, 3, f)?;
        }
        ElemPlus(a, b) => {
            fmt_at(a, 1, f)?;
            write!(f, " + ")?;
            fmt_at(b, 2, f)?;
        }
        ElemMinus(a, b) => {
            fmt_at(a, 1, f)?;
            write!(f, " - ")?;
            fmt_at(b, 2, f)?;
        }
        ElemPow(a, k) => {
            fmt_at(a, 4, f)?;
            write!(f, "^{}", k)?;
        }
        RowAgg(a) => {
            write!(f, "rowSums(")?;
            fmt_at(a, 0, f)?;
            write!(f, ")")?;
        }
        ColAgg(a) => {
            write!(f, "colSums(")?;
            fmt_at(a, 0, f)?;
            write!(f, ")")?;
        }
        Agg(a) => {
            write!(f, "sum(")?;
            fmt_at(a, 0, f)?;
            write!(f, ")")?;
        }
        Transpose(a) => {
            write!(f, "t(")?;
            fmt_at(a, 0, f)?;
            write!(f, ")")?;
        }
        Call(name, args) => {
            write!(f, "{}(", name)?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                fmt_at(a, 0, f)?;
            }
            write!(f, ")")?;
        }
    }
    if parens {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for LAExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_at(self, 0, f)
    }
}
