use super::lexer::{tokenize, Spanned, Tok};
use super::{BinOp, Builtin, Expr, ParseError, Var};

/// Parses mapping source text into an expression tree.
pub fn parse(source: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(source)?;
    let mut p = Parser { tokens, cursor: 0 };
    let expr = p.expr()?;
    match p.peek().tok {
        Tok::Eof => Ok(expr),
        _ => Err(p.error_here("expected an operator or end of input")),
    }
}

struct Parser {
    tokens: Vec<Spanned>,
    cursor: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.tokens[self.cursor]
    }

    fn bump(&mut self) -> Spanned {
        let t = self.tokens[self.cursor].clone();
        if t.tok != Tok::Eof {
            self.cursor += 1;
        }
        t
    }

    fn error_at(at: &Spanned, message: String) -> ParseError {
        ParseError {
            line: at.line,
            column: at.column,
            message,
        }
    }

    fn error_here(&self, expected: &str) -> ParseError {
        let at = self.peek();
        Self::error_at(at, format!("{expected}, found {}", at.tok.describe()))
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if self.peek().tok == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error_here(&format!("expected {}", tok.describe())))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::binary(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::binary(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek().tok == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek().tok == Tok::Caret {
            self.bump();
            // right-associative: the exponent may itself be a power
            let exponent = self.unary()?;
            return Ok(Expr::binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let at = self.peek().clone();
        match &at.tok {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(*v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if let Some(builtin) = Builtin::from_name(name) {
                    if self.peek().tok != Tok::LParen {
                        return Err(self.error_here(&format!("expected `(` after `{name}`")));
                    }
                    self.bump();
                    let args = self.arguments()?;
                    if args.len() != builtin.arity() {
                        return Err(Self::error_at(
                            &at,
                            format!(
                                "`{name}` takes {} argument{}, found {}",
                                builtin.arity(),
                                if builtin.arity() == 1 { "" } else { "s" },
                                args.len()
                            ),
                        ));
                    }
                    return Ok(Expr::Call(builtin, args));
                }
                match Var::from_name(name) {
                    Some(v) => Ok(Expr::Var(v)),
                    None => Err(Self::error_at(
                        &at,
                        format!("unknown identifier `{name}`; expected one of x, i, n, min, max or a builtin function"),
                    )),
                }
            }
            _ => Err(self.error_here("expected an expression")),
        }
    }

    // after the opening parenthesis
    fn arguments(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut args = Vec::new();
        if self.peek().tok == Tok::RParen {
            self.bump();
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            match self.peek().tok {
                Tok::Comma => {
                    self.bump();
                }
                Tok::RParen => {
                    self.bump();
                    return Ok(args);
                }
                _ => return Err(self.error_here("expected `,` or `)`")),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    #[test]
    fn lin_call() {
        assert_eq!(
            parse("lin(x, min, max, 220, 880)").unwrap(),
            Expr::Call(
                Builtin::Lin,
                vec![
                    Expr::Var(Var::X),
                    Expr::Var(Var::Min),
                    Expr::Var(Var::Max),
                    num(220.0),
                    num(880.0)
                ]
            )
        );
    }

    #[test]
    fn power_is_right_associative() {
        assert_eq!(
            parse("2^3^2").unwrap(),
            Expr::binary(BinOp::Pow, num(2.0), Expr::binary(BinOp::Pow, num(3.0), num(2.0)))
        );
    }

    #[test]
    fn power_binds_tighter_than_negation() {
        assert_eq!(
            parse("-2^2").unwrap(),
            Expr::Neg(Box::new(Expr::binary(BinOp::Pow, num(2.0), num(2.0))))
        );
    }

    #[test]
    fn arity_error_points_at_call() {
        let err = parse("lin(x, 0)").unwrap_err();
        assert_eq!((err.line, err.column), (1, 1));
        assert!(err.message.contains("5 arguments"), "{}", err.message);
    }

    #[test]
    fn positions_are_one_based_across_lines() {
        let err = parse("x +\n  * 2").unwrap_err();
        assert_eq!((err.line, err.column), (2, 3));
        assert!(err.message.starts_with("expected an expression"));
    }

    #[test]
    fn errors() {
        for bad in [
            "", "x +", "(x", "x)", "foo", "lin", "lin(x,)", "1 2", "x $ 2", "1e999", "abs()", "x(1)",
        ] {
            assert!(parse(bad).is_err(), "{bad:?} should not parse");
        }
    }

    #[test]
    fn whitespace_insensitive() {
        assert_eq!(parse(" x\t*\n2 ").unwrap(), parse("x*2").unwrap());
    }

    #[test]
    fn number_forms() {
        assert_eq!(parse(".5").unwrap(), num(0.5));
        assert_eq!(parse("1e3").unwrap(), num(1000.0));
        assert_eq!(parse("2.5E-1").unwrap(), num(0.25));
        assert!(parse("1.2.3").is_err());
    }
}
