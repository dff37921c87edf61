//! Textual grammar for kernel expressions.
//!
//! ```text
//! expr   := term ('+' term)*
//! term   := factor ('*' factor)*
//! factor := kernel | '(' expr ')'
//! kernel := NAME '(' [arg (',' arg)*] ')' | NAME
//! arg    := IDENT '=' (NUMBER | '[' NUMBER (',' NUMBER)* ']')
//! NAME   := SE | ABSEXP | MATERN32 | MATERN52 | POWEXP | RQ | PERIODIC
//! ```
//!
//! `*` binds tighter than `+`; both are left-associative. Kernel names are
//! case-insensitive. Omitted arguments take family defaults (1.0 everywhere,
//! POWEXP `p` defaults to 2.0). A scalar per-dimension argument broadcasts to
//! every input dimension; a bracketed list must match the dimension exactly.
//!
//! This grammar is the wire format for the CLI `--kernel` flag and for the
//! `kernel` field of serialized models.

use crate::algebra::KernelExpr;
use crate::kernel::{KernelFamily, LeafKernel};
use std::fmt::Write as _;
use thiserror::Error;

/// A parse failure, carrying a 1-based character offset into the source.
///
/// The offset may be one past the final character when input ended too
/// early.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("parse error at offset {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    fn new(offset0: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            offset: offset0 + 1,
            message: message.into(),
        }
    }

    /// A caret line pointing at the offending character, for CLI display.
    pub fn caret_line(&self) -> String {
        format!("{}^", " ".repeat(self.offset.saturating_sub(1)))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Plus,
    Star,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Eq,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(v) => format!("number `{v}`"),
            Tok::Plus => "`+`".to_string(),
            Tok::Star => "`*`".to_string(),
            Tok::LParen => "`(`".to_string(),
            Tok::RParen => "`)`".to_string(),
            Tok::LBracket => "`[`".to_string(),
            Tok::RBracket => "`]`".to_string(),
            Tok::Comma => "`,`".to_string(),
            Tok::Eq => "`=`".to_string(),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Lexer<'a> {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut out = Vec::new();
        loop {
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            let start = self.pos;
            if self.pos >= self.src.len() {
                out.push((Tok::Eof, start));
                return Ok(out);
            }
            let c = self.src[self.pos];
            let tok = match c {
                b'+' => {
                    self.pos += 1;
                    Tok::Plus
                }
                b'*' => {
                    self.pos += 1;
                    Tok::Star
                }
                b'(' => {
                    self.pos += 1;
                    Tok::LParen
                }
                b')' => {
                    self.pos += 1;
                    Tok::RParen
                }
                b'[' => {
                    self.pos += 1;
                    Tok::LBracket
                }
                b']' => {
                    self.pos += 1;
                    Tok::RBracket
                }
                b',' => {
                    self.pos += 1;
                    Tok::Comma
                }
                b'=' => {
                    self.pos += 1;
                    Tok::Eq
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    while self.pos < self.src.len()
                        && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                    {
                        self.pos += 1;
                    }
                    Tok::Ident(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
                }
                c if c.is_ascii_digit() || c == b'.' => {
                    while self.pos < self.src.len()
                        && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
                    {
                        self.pos += 1;
                    }
                    if self.pos < self.src.len()
                        && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E')
                    {
                        self.pos += 1;
                        if self.pos < self.src.len()
                            && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
                        {
                            self.pos += 1;
                        }
                        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                            self.pos += 1;
                        }
                    }
                    let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                    let value: f64 = text
                        .parse()
                        .map_err(|_| ParseError::new(start, format!("invalid number `{text}`")))?;
                    Tok::Number(value)
                }
                other => {
                    return Err(ParseError::new(
                        start,
                        format!("unexpected character `{}`", other as char),
                    ))
                }
            };
            out.push((tok, start));
        }
    }
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    cursor: usize,
    dim: usize,
}

impl Parser {
    fn peek(&self) -> &(Tok, usize) {
        &self.tokens[self.cursor]
    }

    fn advance(&mut self) -> (Tok, usize) {
        let t = self.tokens[self.cursor].clone();
        if self.cursor + 1 < self.tokens.len() {
            self.cursor += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<usize, ParseError> {
        let (tok, at) = self.peek().clone();
        if &tok == want {
            self.advance();
            Ok(at)
        } else {
            Err(ParseError::new(
                at,
                format!("expected {what}, found {}", tok.describe()),
            ))
        }
    }

    fn expr(&mut self) -> Result<KernelExpr, ParseError> {
        let mut node = self.term()?;
        while self.peek().0 == Tok::Plus {
            let (_, at) = self.advance();
            let rhs = self.term()?;
            node = KernelExpr::sum(node, rhs).map_err(|e| ParseError::new(at, e.to_string()))?;
        }
        Ok(node)
    }

    fn term(&mut self) -> Result<KernelExpr, ParseError> {
        let mut node = self.factor()?;
        while self.peek().0 == Tok::Star {
            let (_, at) = self.advance();
            let rhs = self.factor()?;
            node =
                KernelExpr::product(node, rhs).map_err(|e| ParseError::new(at, e.to_string()))?;
        }
        Ok(node)
    }

    fn factor(&mut self) -> Result<KernelExpr, ParseError> {
        match self.peek().clone() {
            (Tok::LParen, _) => {
                self.advance();
                let inner = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            (Tok::Ident(name), at) => {
                self.advance();
                self.kernel(&name, at)
            }
            (tok, at) => Err(ParseError::new(
                at,
                format!("expected a kernel name or `(`, found {}", tok.describe()),
            )),
        }
    }

    fn kernel(&mut self, name: &str, name_at: usize) -> Result<KernelExpr, ParseError> {
        let family = KernelFamily::from_name(name)
            .ok_or_else(|| ParseError::new(name_at, format!("unknown kernel name `{name}`")))?;
        let mut amplitude = 1.0;
        let mut lengths = vec![1.0; self.dim];
        let mut shared = family.shared_param_default();
        if self.peek().0 == Tok::LParen {
            self.advance();
            if self.peek().0 != Tok::RParen {
                loop {
                    self.argument(family, &mut amplitude, &mut lengths, &mut shared)?;
                    if self.peek().0 == Tok::Comma {
                        self.advance();
                    } else {
                        break;
                    }
                }
            }
            self.expect(&Tok::RParen, "`)` or `,`")?;
        }
        let mut params = lengths;
        if let Some(v) = shared {
            params.push(v);
        }
        let leaf = LeafKernel::new(family, self.dim, amplitude, params)
            .map_err(|e| ParseError::new(name_at, e.to_string()))?;
        Ok(KernelExpr::leaf(leaf))
    }

    fn argument(
        &mut self,
        family: KernelFamily,
        amplitude: &mut f64,
        lengths: &mut [f64],
        shared: &mut Option<f64>,
    ) -> Result<(), ParseError> {
        let (tok, name_at) = self.peek().clone();
        let Tok::Ident(arg_name) = tok else {
            return Err(ParseError::new(
                name_at,
                format!("expected an argument name, found {}", tok.describe()),
            ));
        };
        self.advance();
        self.expect(&Tok::Eq, "`=`")?;
        if arg_name == "amplitude" {
            *amplitude = self.scalar_value()?;
        } else if arg_name == family.length_param_name() {
            let (values, at) = self.scalar_or_list()?;
            if values.len() == 1 {
                lengths.fill(values[0]);
            } else if values.len() == lengths.len() {
                lengths.copy_from_slice(&values);
            } else {
                return Err(ParseError::new(
                    at,
                    format!(
                        "`{arg_name}` needs 1 or {} values, found {}",
                        lengths.len(),
                        values.len()
                    ),
                ));
            }
        } else if Some(arg_name.as_str()) == family.shared_param_name() {
            *shared = Some(self.scalar_value()?);
        } else {
            return Err(ParseError::new(
                name_at,
                format!(
                    "unknown argument `{arg_name}` for kernel {}",
                    family.name()
                ),
            ));
        }
        Ok(())
    }

    fn scalar_value(&mut self) -> Result<f64, ParseError> {
        let (tok, at) = self.peek().clone();
        if let Tok::Number(v) = tok {
            self.advance();
            Ok(v)
        } else {
            Err(ParseError::new(
                at,
                format!("expected a number, found {}", tok.describe()),
            ))
        }
    }

    fn scalar_or_list(&mut self) -> Result<(Vec<f64>, usize), ParseError> {
        let (tok, at) = self.peek().clone();
        match tok {
            Tok::Number(v) => {
                self.advance();
                Ok((vec![v], at))
            }
            Tok::LBracket => {
                self.advance();
                let mut values = Vec::new();
                loop {
                    values.push(self.scalar_value()?);
                    match self.peek().clone() {
                        (Tok::Comma, _) => {
                            self.advance();
                        }
                        (Tok::RBracket, _) => {
                            self.advance();
                            break;
                        }
                        (other, bad_at) => {
                            return Err(ParseError::new(
                                bad_at,
                                format!("expected `,` or `]`, found {}", other.describe()),
                            ))
                        }
                    }
                }
                Ok((values, at))
            }
            other => Err(ParseError::new(
                at,
                format!("expected a number or `[`, found {}", other.describe()),
            )),
        }
    }
}

/// Parses a kernel expression for inputs of dimension `dim`.
pub fn parse(source: &str, dim: usize) -> Result<KernelExpr, ParseError> {
    if dim == 0 {
        return Err(ParseError::new(0, "input dimension must be at least 1"));
    }
    if source.trim().is_empty() {
        return Err(ParseError::new(0, "empty kernel expression"));
    }
    let tokens = Lexer::new(source).tokens()?;
    let mut parser = Parser {
        tokens,
        cursor: 0,
        dim,
    };
    let tree = parser.expr()?;
    let (tok, at) = parser.peek().clone();
    if tok != Tok::Eof {
        return Err(ParseError::new(
            at,
            format!("unexpected {} after expression", tok.describe()),
        ));
    }
    Ok(tree)
}

/// Formats a tree back to canonical text: upper-case names, every argument
/// spelled out, minimal parentheses. `parse(format(t), t.dim())` rebuilds the
/// tree exactly, values included.
pub fn format(tree: &KernelExpr) -> String {
    let mut out = String::new();
    fmt_node(tree, 0, false, &mut out);
    out
}

// Precedence: 0 = sum context, 1 = product context. A child needs
// parentheses when its operator binds looser than the context, or when it
// repeats the parent operator on the right (left-associativity).
fn fmt_node(node: &KernelExpr, prec: u8, right: bool, out: &mut String) {
    let needs_parens = match node {
        KernelExpr::Leaf(_) => false,
        KernelExpr::Sum(..) => prec == 1 || right,
        KernelExpr::Product(..) => prec == 1 && right,
    };
    if needs_parens {
        out.push('(');
    }
    match node {
        KernelExpr::Leaf(leaf) => fmt_leaf(leaf, out),
        KernelExpr::Sum(a, b) => {
            fmt_node(a, 0, false, out);
            out.push_str(" + ");
            fmt_node(b, 0, true, out);
        }
        KernelExpr::Product(a, b) => {
            fmt_node(a, 1, false, out);
            out.push_str(" * ");
            fmt_node(b, 1, true, out);
        }
    }
    if needs_parens {
        out.push(')');
    }
}

fn fmt_leaf(leaf: &LeafKernel, out: &mut String) {
    let family = leaf.family();
    write!(out, "{}(amplitude={}", family.name(), leaf.amplitude()).unwrap();
    write!(out, ", {}=", family.length_param_name()).unwrap();
    if leaf.dim() == 1 {
        write!(out, "{}", leaf.lengths()[0]).unwrap();
    } else {
        out.push('[');
        for (i, v) in leaf.lengths().iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write!(out, "{v}").unwrap();
        }
        out.push(']');
    }
    if let (Some(name), Some(value)) = (family.shared_param_name(), leaf.shared()) {
        write!(out, ", {name}={value}").unwrap();
    }
    out.push(')');
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelFamily;
    use proptest::prelude::*;

    fn leaf_family(tree: &KernelExpr) -> KernelFamily {
        match tree {
            KernelExpr::Leaf(l) => l.family(),
            _ => panic!("expected leaf"),
        }
    }

    #[test]
    fn parses_product() {
        let tree = parse("SE * PERIODIC", 1).unwrap();
        match &tree {
            KernelExpr::Product(a, b) => {
                assert_eq!(leaf_family(a), KernelFamily::SquaredExponential);
                assert_eq!(leaf_family(b), KernelFamily::Periodic);
            }
            other => panic!("expected product, got {other:?}"),
        }
    }

    #[test]
    fn parses_seasonal_composite_shape() {
        // Left-associative sums: ((SE*PERIODIC) + SE) + RQ.
        let tree = parse("SE * PERIODIC + SE + RQ", 1).unwrap();
        match &tree {
            KernelExpr::Sum(left, rq) => {
                assert_eq!(leaf_family(rq), KernelFamily::RationalQuadratic);
                match left.as_ref() {
                    KernelExpr::Sum(prod, se) => {
                        assert_eq!(leaf_family(se), KernelFamily::SquaredExponential);
                        assert!(matches!(prod.as_ref(), KernelExpr::Product(..)));
                    }
                    other => panic!("expected nested sum, got {other:?}"),
                }
            }
            other => panic!("expected sum, got {other:?}"),
        }
    }

    #[test]
    fn precedence_product_over_sum() {
        let tree = parse("SE + MATERN32 * RQ", 1).unwrap();
        match tree {
            KernelExpr::Sum(a, b) => {
                assert!(matches!(*a, KernelExpr::Leaf(_)));
                assert!(matches!(*b, KernelExpr::Product(..)));
            }
            other => panic!("expected sum, got {other:?}"),
        }
    }

    #[test]
    fn argument_binding_and_defaults() {
        let tree = parse("SE(theta=2.5)", 1).unwrap();
        let KernelExpr::Leaf(leaf) = &tree else {
            panic!()
        };
        assert_eq!(leaf.lengths(), [2.5]);
        assert_eq!(leaf.amplitude(), 1.0);

        let tree = parse("powexp", 2).unwrap();
        let KernelExpr::Leaf(leaf) = &tree else {
            panic!()
        };
        assert_eq!(leaf.shared(), Some(2.0));
        assert_eq!(leaf.lengths(), [1.0, 1.0]);
    }

    #[test]
    fn scalar_broadcast_and_vector_args() {
        let tree = parse("SE(theta=0.5)", 3).unwrap();
        let KernelExpr::Leaf(leaf) = &tree else {
            panic!()
        };
        assert_eq!(leaf.lengths(), [0.5, 0.5, 0.5]);

        let tree = parse("RQ(theta_l=[1, 2, 3], theta_k=0.7)", 3).unwrap();
        let KernelExpr::Leaf(leaf) = &tree else {
            panic!()
        };
        assert_eq!(leaf.lengths(), [1.0, 2.0, 3.0]);
        assert_eq!(leaf.shared(), Some(0.7));

        let err = parse("SE(theta=[1, 2])", 3).unwrap_err();
        assert!(err.message.contains("needs 1 or 3 values"));
    }

    #[test]
    fn case_insensitive_names() {
        assert_eq!(
            parse("se * pErIoDiC", 1).unwrap(),
            parse("SE * PERIODIC", 1).unwrap()
        );
    }

    #[test]
    fn error_positions() {
        // Offsets are 1-based character positions.
        let err = parse("SE * (", 1).unwrap_err();
        assert_eq!(err.offset, 7);
        assert_eq!(err.caret_line(), "      ^");

        let err = parse("SE + + RQ", 1).unwrap_err();
        assert_eq!(err.offset, 6);

        let err = parse("BOGUS(theta=1)", 1).unwrap_err();
        assert_eq!(err.offset, 1);
        assert!(err.message.contains("unknown kernel name"));

        let err = parse("SE(gamma=1)", 1).unwrap_err();
        assert_eq!(err.offset, 4);
        assert!(err.message.contains("unknown argument"));

        let err = parse("SE(theta=0)", 1).unwrap_err();
        assert!(err.message.contains("positive"));

        let err = parse("SE RQ", 1).unwrap_err();
        assert_eq!(err.offset, 4);
    }

    #[test]
    fn format_canonical_leaf() {
        let leaf = KernelExpr::leaf(crate::kernel::LeafKernel::with_defaults(
            KernelFamily::SquaredExponential,
            1,
        ));
        assert_eq!(format(&leaf), "SE(amplitude=1, theta=1)");
    }

    #[test]
    fn format_parenthesizes_by_precedence() {
        let rq = KernelExpr::leaf(crate::kernel::LeafKernel::with_defaults(
            KernelFamily::RationalQuadratic,
            1,
        ));
        let per = KernelExpr::leaf(crate::kernel::LeafKernel::with_defaults(
            KernelFamily::Periodic,
            1,
        ));
        let se = KernelExpr::leaf(crate::kernel::LeafKernel::with_defaults(
            KernelFamily::SquaredExponential,
            1,
        ));
        let tree = KernelExpr::product(se, KernelExpr::sum(rq, per).unwrap()).unwrap();
        let text = format(&tree);
        assert_eq!(
            text,
            "SE(amplitude=1, theta=1) * (RQ(amplitude=1, theta_l=1, theta_k=1) \
             + PERIODIC(amplitude=1, theta_l=1, theta_k=1))"
        );
        assert_eq!(parse(&text, 1).unwrap(), tree);
    }

    /// proptest strategy for random trees with finite, positive parameters.
    fn arb_tree(dim: usize, depth: u32) -> BoxedStrategy<KernelExpr> {
        let family = prop_oneof![
            Just(KernelFamily::SquaredExponential),
            Just(KernelFamily::AbsoluteExponential),
            Just(KernelFamily::Matern32),
            Just(KernelFamily::Matern52),
            Just(KernelFamily::PowerExponential),
            Just(KernelFamily::RationalQuadratic),
            Just(KernelFamily::Periodic),
        ];
        let param = 0.01f64..100.0;
        let leaf = (family, param.clone(), proptest::collection::vec(param, dim), 0.1f64..2.0)
            .prop_map(move |(family, amplitude, lengths, p)| {
                let mut params = lengths;
                match family {
                    KernelFamily::PowerExponential => params.push(p),
                    KernelFamily::RationalQuadratic | KernelFamily::Periodic => {
                        params.push(p * 10.0)
                    }
                    _ => {}
                }
                KernelExpr::leaf(
                    crate::kernel::LeafKernel::new(family, dim, amplitude, params).unwrap(),
                )
            });
        leaf.prop_recursive(depth, 16, 2, |inner| {
            (inner.clone(), inner, proptest::bool::ANY).prop_map(|(a, b, is_sum)| {
                if is_sum {
                    KernelExpr::sum(a, b).unwrap()
                } else {
                    KernelExpr::product(a, b).unwrap()
                }
            })
        })
        .boxed()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn round_trip(tree in arb_tree(1, 4)) {
            let text = format(&tree);
            let reparsed = parse(&text, 1).unwrap();
            prop_assert_eq!(reparsed, tree);
        }
    }

    proptest! {
        #[test]
        fn round_trip_multidim(tree in arb_tree(3, 3)) {
            let text = format(&tree);
            let reparsed = parse(&text, 3).unwrap();
            prop_assert_eq!(reparsed, tree);
        }
    }
}
