use std::collections::BTreeMap;

use super::{BinaryOp, Expr, ExprError, UnaryOp};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number { text: String, value: f64 },
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
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
            let literal = &text[start..i];
            let value = literal.parse::<f64>().map_err(|_| ExprError::Syntax {
                offset: start,
                message: format!("malformed number `{literal}`"),
            })?;
            out.push((
                start,
                Token::Number {
                    text: literal.to_string(),
                    value,
                },
            ));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Token::Ident(text[start..i].to_string())));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Token::Op(c),
            '(' => Token::LParen,
            ')' => Token::RParen,
            _ => {
                return Err(ExprError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{}`", &text[start..].chars().next().unwrap()),
                })
            }
        };
        out.push((start, tok));
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
    vars: &'a [String],
    params: &'a BTreeMap<String, f64>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token::Op(c)) if ops.contains(c) => {
                let c = *c;
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        while let Some(op) = self.eat_op(&['+', '-']) {
            let rhs = self.product()?;
            let op = if op == '+' { BinaryOp::Add } else { BinaryOp::Sub };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            let op = if op == '*' { BinaryOp::Mul } else { BinaryOp::Div };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.eat_op(&['-', '+']) {
            Some('-') => Ok(Expr::Unary(UnaryOp::Neg, Box::new(self.unary()?))),
            Some(_) => self.unary(),
            None => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let mut base = self.atom()?;
        while self.eat_op(&['^']).is_some() {
            let offset = self.offset();
            let exponent = match self.peek() {
                Some(Token::Number { text, value })
                    if text.bytes().all(|b| b.is_ascii_digit()) && *value <= u32::MAX as f64 =>
                {
                    *value as u32
                }
                Some(_) => return Err(ExprError::NonIntegerExponent { offset }),
                None => return self.syntax("expected exponent"),
            };
            self.pos += 1;
            base = Expr::Pow(Box::new(base), exponent);
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let offset = self.offset();
        match self.peek().cloned() {
            Some(Token::Number { value, .. }) => {
                self.pos += 1;
                Ok(Expr::Const(value))
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.sum()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                if self.peek() == Some(&Token::LParen) {
                    let Some(op) = UnaryOp::from_function_name(&name) else {
                        return Err(ExprError::UnknownIdentifier { name, offset });
                    };
                    self.pos += 1;
                    let arg = self.sum()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Unary(op, Box::new(arg)));
                }
                if let Some(index) = self.vars.iter().position(|v| *v == name) {
                    Ok(Expr::var(&name, index))
                } else if let Some(value) = self.params.get(&name) {
                    Ok(Expr::Const(*value))
                } else if name == "pi" {
                    Ok(Expr::Const(std::f64::consts::PI))
                } else {
                    Err(ExprError::UnknownIdentifier { name, offset })
                }
            }
            Some(_) => self.syntax("expected a number, identifier or `(`"),
            None => self.syntax("unexpected end of input"),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        if self.peek() == Some(&Token::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            self.syntax("expected `)`")
        }
    }
}

/// Parse `text` into an expression whose free variables are drawn from `vars`.
pub fn parse(text: &str, vars: &[String]) -> Result<Expr, ExprError> {
    parse_with_params(text, vars, &BTreeMap::new())
}

/// Like [`parse`], but identifiers found in `params` (and not in `vars`) are
/// folded to constants.
pub fn parse_with_params(
    text: &str,
    vars: &[String],
    params: &BTreeMap<String, f64>,
) -> Result<Expr, ExprError> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Err(ExprError::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.len(),
        vars,
        params,
    };
    let expr = parser.sum()?;
    if parser.pos != parser.tokens.len() {
        return parser.syntax("unexpected trailing input");
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn drift_of_preliminary_example() {
        let v = vars(&["x1", "x2", "theta"]);
        let e = parse("x1 + theta*x1^2 + x2", &v).unwrap();
        assert_eq!(e.eval_at(&[2.0, 3.0, 0.5]).unwrap(), 2.0 + 0.5 * 4.0 + 3.0);
        assert_eq!(e.free_vars(), vec!["theta", "x1", "x2"]);
    }

    #[test]
    fn zero_constant() {
        let e = parse("0", &[]).unwrap();
        assert_eq!(e, Expr::Const(0.0));
        assert_eq!(e.eval_at(&[]).unwrap(), 0.0);
    }

    #[test]
    fn sin_term_vanishes() {
        let e = parse("sin(u)*(1+x1)", &vars(&["x1", "u"])).unwrap();
        assert_eq!(e.eval_at(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn precedence() {
        let v = vars(&["x"]);
        // -x^2 is -(x^2)
        assert_eq!(parse("-x^2", &v).unwrap().eval_at(&[3.0]).unwrap(), -9.0);
        assert_eq!(parse("2*3^2", &v).unwrap().eval_at(&[0.0]).unwrap(), 18.0);
        assert_eq!(parse("1 - 2 - 3", &v).unwrap().eval_at(&[0.0]).unwrap(), -4.0);
        assert_eq!(parse("8/4/2", &v).unwrap().eval_at(&[0.0]).unwrap(), 1.0);
        assert_eq!(parse("-2*x", &v).unwrap().eval_at(&[3.0]).unwrap(), -6.0);
        assert_eq!(parse("x^2^3", &v).unwrap().eval_at(&[2.0]).unwrap(), 64.0);
        assert_eq!(parse("2*pi", &v).unwrap().eval_at(&[0.0]).unwrap(), std::f64::consts::TAU);
    }

    #[test]
    fn errors_carry_offsets() {
        let v = vars(&["x"]);
        assert_eq!(
            parse("x + y", &v),
            Err(ExprError::UnknownIdentifier {
                name: "y".into(),
                offset: 4
            })
        );
        assert_eq!(parse("x^2.5", &v), Err(ExprError::NonIntegerExponent { offset: 2 }));
        assert_eq!(parse("x^x", &v), Err(ExprError::NonIntegerExponent { offset: 2 }));
        assert_eq!(parse("x^-1", &v), Err(ExprError::NonIntegerExponent { offset: 2 }));
        assert!(matches!(parse("(x + 1", &v), Err(ExprError::Syntax { offset: 6, .. })));
        assert!(matches!(parse("x $ 1", &v), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("x 1", &v), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("   ", &v), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("tan(x)", &v), Err(ExprError::UnknownIdentifier { .. })));
    }

    #[test]
    fn params_fold_and_vars_shadow() {
        let params: BTreeMap<String, f64> = [("k".to_string(), 2.0)].into_iter().collect();
        let e = parse_with_params("k*x", &vars(&["x"]), &params).unwrap();
        assert_eq!(e.free_vars(), vec!["x"]);
        assert_eq!(e.eval_at(&[4.0]).unwrap(), 8.0);
        let shadow = parse_with_params("k*x", &vars(&["x", "k"]), &params).unwrap();
        assert_eq!(shadow.eval_at(&[4.0, 3.0]).unwrap(), 12.0);
    }

    #[test]
    fn scientific_literals() {
        let e = parse("1.25e-4 + .5 + 2E1", &[]).unwrap();
        assert_eq!(e.eval_at(&[]).unwrap(), 1.25e-4 + 0.5 + 20.0);
    }
}
