use thiserror::Error;

use super::{BinOp, CmpOp, Expr, Func};

/// Syntax error with the byte offset where parsing stopped.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at byte {offset} (expected {})", expected.join(" | "))]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
    pub expected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    /// Returns the next token and its starting offset.
    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let Some(c) = rest.chars().next() else {
            return Ok((Tok::End, start));
        };
        if c.is_ascii_digit() || c == '.' {
            let bytes = rest.as_bytes();
            let mut i = 0;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &rest[..i];
            let v: f64 = text.parse().map_err(|_| ParseError {
                offset: start,
                message: format!("malformed number `{text}`"),
                expected: vec!["number".into()],
            })?;
            self.pos += i;
            return Ok((Tok::Num(v), start));
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let len = rest
                .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                .unwrap_or(rest.len());
            self.pos += len;
            return Ok((Tok::Ident(rest[..len].to_string()), start));
        }
        for op in ["<=", ">=", "==", "!="] {
            if rest.starts_with(op) {
                self.pos += 2;
                return Ok((Tok::Op(op), start));
            }
        }
        self.pos += c.len_utf8();
        let tok = match c {
            '+' => Tok::Op("+"),
            '-' => Tok::Op("-"),
            '*' => Tok::Op("*"),
            '/' => Tok::Op("/"),
            '^' => Tok::Op("^"),
            '<' => Tok::Op("<"),
            '>' => Tok::Op(">"),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            other => {
                return Err(ParseError {
                    offset: start,
                    message: format!("unexpected character `{other}`"),
                    expected: vec!["expression".into()],
                })
            }
        };
        Ok((tok, start))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
}

const OPERAND: &[&str] = &["number", "identifier", "(", "-"];

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), ParseError> {
        let (tok, at) = self.lexer.next()?;
        self.tok = tok;
        self.at = at;
        Ok(())
    }

    fn fail<T>(&self, message: impl Into<String>, expected: &[&str]) -> Result<T, ParseError> {
        Err(ParseError {
            offset: self.at,
            message: message.into(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn expect(&mut self, want: Tok, label: &str) -> Result<(), ParseError> {
        if self.tok == want {
            self.bump()
        } else {
            self.fail(format!("unexpected {}", describe(&self.tok)), &[label])
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.sum()?;
        let op = match self.tok {
            Tok::Op("<") => CmpOp::Lt,
            Tok::Op("<=") => CmpOp::Le,
            Tok::Op(">") => CmpOp::Gt,
            Tok::Op(">=") => CmpOp::Ge,
            Tok::Op("==") => CmpOp::Eq,
            Tok::Op("!=") => CmpOp::Ne,
            _ => return Ok(lhs),
        };
        self.bump()?;
        let rhs = self.sum()?;
        Ok(Expr::Compare(op, Box::new(lhs), Box::new(rhs)))
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.tok {
                Tok::Op("+") => BinOp::Add,
                Tok::Op("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.product()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Op("*") => BinOp::Mul,
                Tok::Op("/") => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.tok {
            Tok::Op("-") => {
                self.bump()?;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Op("+") => {
                self.bump()?;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.tok == Tok::Op("^") {
            self.bump()?;
            let exp = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump()?;
                let e = self.expr()?;
                self.expect(Tok::RParen, ")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let at = self.at;
                self.bump()?;
                match name.as_str() {
                    "t" => return Ok(Expr::T),
                    "x" => return Ok(Expr::X),
                    "pi" => return Ok(Expr::Pi),
                    "if" => {
                        self.expect(Tok::LParen, "(")?;
                        let c = self.expr()?;
                        self.expect(Tok::Comma, ",")?;
                        let a = self.expr()?;
                        self.expect(Tok::Comma, ",")?;
                        let b = self.expr()?;
                        self.expect(Tok::RParen, ")")?;
                        return Ok(Expr::If(Box::new(c), Box::new(a), Box::new(b)));
                    }
                    _ => {}
                }
                let Some(func) = Func::from_name(&name) else {
                    return Err(ParseError {
                        offset: at,
                        message: format!("unknown identifier `{name}`"),
                        expected: vec!["t".into(), "x".into(), "pi".into(), "function name".into()],
                    });
                };
                self.expect(Tok::LParen, "(")?;
                let mut args = vec![self.expr()?];
                while self.tok == Tok::Comma {
                    self.bump()?;
                    args.push(self.expr()?);
                }
                if args.len() != func.arity() {
                    return self.fail(
                        format!(
                            "`{}` takes {} argument(s), got {}",
                            func.name(),
                            func.arity(),
                            args.len()
                        ),
                        &[")"],
                    );
                }
                self.expect(Tok::RParen, ")")?;
                Ok(Expr::Call(func, args))
            }
            other => self.fail(format!("unexpected {}", describe(&other)), OPERAND),
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Op(op) => format!("operator `{op}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::End => "end of input".into(),
    }
}

/// Parses an expression in the nonlinearity grammar.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        lexer: Lexer { src: text, pos: 0 },
        tok: Tok::End,
        at: 0,
    };
    p.bump()?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return p.fail(
            format!("unexpected {}", describe(&p.tok)),
            &["operator", "end of input"],
        );
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn incomplete_sum_reports_end_offset() {
        let err = parse("1+").unwrap_err();
        assert_eq!(err.offset, 2);
        assert!(err.expected.iter().any(|e| e == "number"));
    }

    #[test]
    fn unknown_identifier() {
        let err = parse("2 * foo(x)").unwrap_err();
        assert_eq!(err.offset, 4);
        assert!(err.message.contains("foo"));
    }

    #[test]
    fn misc_errors() {
        assert_eq!(parse("(x").unwrap_err().offset, 2);
        assert_eq!(parse("x x").unwrap_err().offset, 2);
        assert!(parse("min(x)").is_err());
        assert!(parse("x # 2").is_err());
        assert!(parse("").is_err());
    }

    #[test]
    fn whitespace_and_exponents() {
        assert_eq!(parse(" 1.5e-3 *x ").unwrap(), parse("1.5e-3*x").unwrap());
        assert_eq!(parse("2e").unwrap_err().offset, 1);
    }
}
