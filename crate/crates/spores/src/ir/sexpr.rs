//! S-expression reader and printer for relational expressions.
//!
//! Forms:
//!   (bind X i j)   name rows i, cols j        (bind X i)  name the non-1 dim
//!   (bind X)       1x1 matrix                 (bind X _ j) skip the row slot
//!   (join a b ...) (union a b ...)            n-ary, at least two children
//!   (agg (i j) e)  sum attrs i and j away     (agg () e) is the identity
//!   (unbind e i j) relation back to a matrix; `_` skips a slot
//!   (rename e (i k) (j l))                    simultaneous substitution
//!   (dim i)        domain size of i           plain numbers are literals
//!
//! Attribute and matrix tokens may contain letters, digits, `_`, `$`, `#`.

use super::{Catalog, IrError, RAExpr};
use std::collections::BTreeMap;
use std::fmt;

pub fn parse_ra(input: &str) -> Result<RAExpr, IrError> {
    let mut toks = lex(input)?;
    toks.reverse(); // pop from the back
    let e = parse_expr(&mut toks)?;
    if let Some((pos, t)) = toks.pop() {
        return Err(IrError::Parse {
            pos,
            msg: format!("unexpected trailing '{t}'"),
        });
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Word(String),
    Num(f64),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Open => write!(f, "("),
            Tok::Close => write!(f, ")"),
            Tok::Word(w) => write!(f, "{w}"),
            Tok::Num(n) => write!(f, "{n}"),
        }
    }
}

fn word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$' || b == b'#'
}

fn lex(input: &str) -> Result<Vec<(usize, Tok)>, IrError> {
    let bytes = input.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
        } else if b == b'(' {
            out.push((i, Tok::Open));
            i += 1;
        } else if b == b')' {
            out.push((i, Tok::Close));
            i += 1;
        } else if b.is_ascii_digit()
            || (b == b'-' && matches!(bytes.get(i + 1), Some(c) if c.is_ascii_digit() || *c == b'.'))
            || (b == b'.' && matches!(bytes.get(i + 1), Some(c) if c.is_ascii_digit()))
        {
            let start = i;
            i += 1;
            while i < bytes.len()
                && (bytes[i].is_ascii_digit()
                    || bytes[i] == b'.'
                    || bytes[i] == b'e'
                    || bytes[i] == b'E'
                    || ((bytes[i] == b'+' || bytes[i] == b'-')
                        && matches!(bytes[i - 1], b'e' | b'E')))
            {
                i += 1;
            }
            let text = &input[start..i];
            let n = text.parse::<f64>().map_err(|_| IrError::Parse {
                pos: start,
                msg: format!("bad number '{text}'"),
            })?;
            out.push((start, Tok::Num(n)));
        } else if word_byte(b) {
            let start = i;
            while i < bytes.len() && word_byte(bytes[i]) {
                i += 1;
            }
            out.push((start, Tok::Word(input[start..i].to_string())));
        } else {
            return Err(IrError::Parse {
                pos: i,
                msg: format!("unexpected character '{}'", b as char),
            });
        }
    }
    Ok(out)
}

type Toks = Vec<(usize, Tok)>;

fn pop(toks: &mut Toks) -> Result<(usize, Tok), IrError> {
    toks.pop().ok_or(IrError::Parse {
        pos: usize::MAX,
        msg: "unexpected end of input".into(),
    })
}

fn expect_close(toks: &mut Toks, what: &str) -> Result<(), IrError> {
    match pop(toks)? {
        (_, Tok::Close) => Ok(()),
        (pos, t) => Err(IrError::Parse {
            pos,
            msg: format!("expected ')' to close {what}, found '{t}'"),
        }),
    }
}

fn word(toks: &mut Toks, what: &str) -> Result<(usize, String), IrError> {
    match pop(toks)? {
        (pos, Tok::Word(w)) => Ok((pos, w)),
        (pos, t) => Err(IrError::Parse {
            pos,
            msg: format!("expected {what}, found '{t}'"),
        }),
    }
}

/// An attribute slot: a name, or `_` for "no attribute here".
fn slot(toks: &mut Toks) -> Result<Option<Option<String>>, IrError> {
    match toks.last() {
        Some((_, Tok::Word(w))) => {
            let w = w.clone();
            toks.pop();
            Ok(Some(if w == "_" { None } else { Some(w) }))
        }
        _ => Ok(None),
    }
}

fn parse_expr(toks: &mut Toks) -> Result<RAExpr, IrError> {
    match pop(toks)? {
        (_, Tok::Num(n)) => Ok(RAExpr::Lit(n)),
        (pos, Tok::Word(w)) => Err(IrError::Parse {
            pos,
            msg: format!("bare name '{w}' — matrices enter via (bind {w} ...)"),
        }),
        (pos, Tok::Close) => Err(IrError::Parse {
            pos,
            msg: "unexpected ')'".into(),
        }),
        (_, Tok::Open) => {
            let (hpos, head) = word(toks, "an operator")?;
            let e = match head.as_str() {
                "bind" => {
                    let (_, mat) = word(toks, "a matrix name")?;
                    let a = slot(toks)?;
                    let b = slot(toks)?;
                    match (a, b) {
                        (None, _) => RAExpr::Bind {
                            mat,
                            row: None,
                            col: None,
                        },
                        (Some(one), None) => RAExpr::Bind {
                            mat,
                            row: one,
                            // resolved against the catalog: a single name
                            // attaches to whichever dimension is not 1
                            col: None,
                        },
                        (Some(row), Some(col)) => RAExpr::Bind { mat, row, col },
                    }
                }
                "dim" => {
                    let (_, a) = word(toks, "an attribute")?;
                    RAExpr::Dim(a)
                }
                "lit" => match pop(toks)? {
                    (_, Tok::Num(n)) => RAExpr::Lit(n),
                    (pos, t) => {
                        return Err(IrError::Parse {
                            pos,
                            msg: format!("expected a number, found '{t}'"),
                        })
                    }
                },
                "join" | "union" => {
                    let mut children = Vec::new();
                    while !matches!(toks.last(), Some((_, Tok::Close)) | None) {
                        children.push(parse_expr(toks)?);
                    }
                    if children.len() < 2 {
                        return Err(IrError::Parse {
                            pos: hpos,
                            msg: format!("{head} needs at least two children"),
                        });
                    }
                    if head == "join" {
                        RAExpr::Join(children)
                    } else {
                        RAExpr::Union(children)
                    }
                }
                "agg" => {
                    match pop(toks)? {
                        (pos, t) if t != Tok::Open => {
                            return Err(IrError::Parse {
                                pos,
                                msg: format!("agg expects an attribute list, found '{t}'"),
                            })
                        }
                        _ => {}
                    }
                    let mut attrs = std::collections::BTreeSet::new();
                    loop {
                        match pop(toks)? {
                            (_, Tok::Close) => break,
                            (_, Tok::Word(w)) => {
                                attrs.insert(w);
                            }
                            (pos, t) => {
                                return Err(IrError::Parse {
                                    pos,
                                    msg: format!("expected an attribute, found '{t}'"),
                                })
                            }
                        }
                    }
                    let body = parse_expr(toks)?;
                    RAExpr::Agg(attrs, Box::new(body))
                }
                "unbind" => {
                    let body = parse_expr(toks)?;
                    let row = slot(toks)?.unwrap_or(None);
                    let col = slot(toks)?.unwrap_or(None);
                    RAExpr::Unbind {
                        e: Box::new(body),
                        row,
                        col,
                    }
                }
                "rename" => {
                    let body = parse_expr(toks)?;
                    let mut map = BTreeMap::new();
                    while matches!(toks.last(), Some((_, Tok::Open))) {
                        toks.pop();
                        let (_, from) = word(toks, "an attribute")?;
                        let (_, to) = word(toks, "an attribute")?;
                        expect_close(toks, "a rename pair")?;
                        if map.insert(from.clone(), to).is_some() {
                            return Err(IrError::Parse {
                                pos: hpos,
                                msg: format!("rename lists {from} twice"),
                            });
                        }
                    }
                    if map.is_empty() {
                        return Err(IrError::Parse {
                            pos: hpos,
                            msg: "rename needs at least one (from to) pair".into(),
                        });
                    }
                    RAExpr::Rename {
                        e: Box::new(body),
                        map,
                    }
                }
                other => {
                    return Err(IrError::Parse {
                        pos: hpos,
                        msg: format!("unknown operator '{other}'"),
                    })
                }
            };
            expect_close(toks, &format!("({head} ...)"))?;
            Ok(e)
        }
    }
}

/// Resolve single-attr binds: `(bind X i)` attaches `i` to whichever of X's
/// dimensions is above 1. Call after parsing, before schema checks.
pub fn resolve_binds(e: &mut RAExpr, cat: &Catalog) -> Result<(), IrError> {
    match e {
        RAExpr::Bind { mat, row, col } => {
            if row.is_some() && col.is_none() {
                let info = cat.get(mat)?;
                if info.rows == 1 && info.cols > 1 {
                    *col = row.take();
                }
            }
            Ok(())
        }
        RAExpr::Lit(_) | RAExpr::Dim(_) => Ok(()),
        RAExpr::Join(cs) | RAExpr::Union(cs) => {
            cs.iter_mut().try_for_each(|c| resolve_binds(c, cat))
        }
        RAExpr::Agg(_, c) | RAExpr::Unbind { e: c, .. } | RAExpr::Rename { e: c, .. } => {
            resolve_binds(c, cat)
        }
    }
}

fn fmt_slot(f: &mut fmt::Formatter<'_>, s: &Option<String>) -> fmt::Result {
    match s {
        Some(a) => write!(f, " {a}"),
        None => write!(f, " _"),
    }
}

impl fmt::Display for RAExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RAExpr::Bind { mat, row, col } => match (row, col) {
                (None, None) => write!(f, "(bind {mat})"),
                (Some(r), None) => write!(f, "(bind {mat} {r})"),
                (r, c) => {
                    write!(f, "(bind {mat}")?;
                    fmt_slot(f, r)?;
                    fmt_slot(f, c)?;
                    write!(f, ")")
                }
            },
            RAExpr::Lit(v) => write!(f, "{v}"),
            RAExpr::Dim(a) => write!(f, "(dim {a})"),
            RAExpr::Join(cs) | RAExpr::Union(cs) => {
                let op = if matches!(self, RAExpr::Join(_)) {
                    "join"
                } else {
                    "union"
                };
                write!(f, "({op}")?;
                for c in cs {
                    write!(f, " {c}")?;
                }
                write!(f, ")")
            }
            RAExpr::Agg(attrs, e) => {
                write!(f, "(agg (")?;
                for (i, a) in attrs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ") {e})")
            }
            RAExpr::Unbind { e, row, col } => {
                write!(f, "(unbind {e}")?;
                fmt_slot(f, row)?;
                fmt_slot(f, col)?;
                write!(f, ")")
            }
            RAExpr::Rename { e, map } => {
                write!(f, "(rename {e}")?;
                for (from, to) in map {
                    write!(f, " ({from} {to})")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{schema_of, MatrixInfo};

    fn cat() -> Catalog {
        let mut c = Catalog::new();
        c.insert(MatrixInfo::dense("X", 4, 3)).unwrap();
        c.insert(MatrixInfo::dense("r", 1, 5)).unwrap();
        c.insert(MatrixInfo::dense("s", 1, 1)).unwrap();
        c
    }

    #[test]
    fn parse_print_roundtrip() {
        for src in [
            "(agg (j) (join (bind X i j) (bind X k j)))",
            "(union (bind X i j) (join 2 (bind X i j)))",
            "(rename (bind X i j) (i k))",
            "(agg () (dim i))",
            "(join (bind s) (bind X i j))",
        ] {
            let e = parse_ra(src).unwrap();
            let printed = e.to_string();
            let e2 = parse_ra(&printed).unwrap();
            assert_eq!(e, e2, "roundtrip failed: {src} printed as {printed}");
        }
    }

    #[test]
    fn single_attr_bind_resolves_against_catalog() {
        let c = cat();
        let mut e = parse_ra("(bind r j)").unwrap();
        resolve_binds(&mut e, &c).unwrap();
        match &e {
            RAExpr::Bind { row, col, .. } => {
                assert_eq!(row, &None);
                assert_eq!(col.as_deref(), Some("j"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(schema_of(&e, &c).unwrap().to_string(), "{j:5}");
    }

    #[test]
    fn underscore_skips_a_slot() {
        let e = parse_ra("(bind X i _)").unwrap();
        match &e {
            RAExpr::Bind { row, col, .. } => {
                assert_eq!(row.as_deref(), Some("i"));
                assert_eq!(col, &None);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_errors_are_located() {
        assert!(parse_ra("(join (bind X i j))").is_err());
        assert!(parse_ra("(agg j (bind X i j))").is_err());
        assert!(parse_ra("(bind X i j) extra").is_err());
        assert!(parse_ra("(frob 1 2)").is_err());
    }

    #[test]
    fn dollar_and_hash_names_lex() {
        let e = parse_ra("(agg ($r1) (bind X $r1 #c))").unwrap();
        match &e {
            RAExpr::Agg(attrs, _) => assert!(attrs.contains("$r1")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
