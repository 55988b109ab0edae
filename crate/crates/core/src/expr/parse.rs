use super::{ExprError, Func, Node};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let bytes = src.as_bytes();
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
            // exponent part: e[+-]digits
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
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ExprError::Syntax {
                pos: start,
                msg: format!("malformed number '{text}'"),
            })?;
            out.push((start, Tok::Num(v)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            _ => {
                return Err(ExprError::Syntax {
                    pos: start,
                    msg: format!("unexpected character '{c}'"),
                })
            }
        };
        out.push((start, tok));
        i += c.len_utf8();
    }
    Ok(out)
}

pub(super) struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    dim: usize,
    src_len: usize,
    _src: &'a str,
}

impl<'a> Parser<'a> {
    pub(super) fn new(src: &'a str, dim: usize) -> Result<Self, ExprError> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            dim,
            src_len: src.len(),
            _src: src,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.src_len)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            pos: self.here(),
            msg: msg.into(),
        })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ExprError> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    pub(super) fn parse_all(mut self) -> Result<Node, ExprError> {
        let node = self.expr()?;
        if self.pos < self.toks.len() {
            return self.err("unexpected trailing input");
        }
        Ok(node)
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == '+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.factor()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = if c == '*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Node, ExprError> {
        let base = self.base()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.factor()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Node, ExprError> {
        let at = self.here();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Node::Num(v)),
            Some(Tok::Op('-')) => Ok(Node::Neg(Box::new(self.base()?))),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                if self.peek() == Some(&Tok::LParen) {
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while self.peek() == Some(&Tok::Comma) {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen, "')'")?;
                    self.call(at, &name, args)
                } else {
                    self.ident(at, &name)
                }
            }
            Some(_) => Err(ExprError::Syntax {
                pos: at,
                msg: "expected a number, identifier, '(' or '-'".into(),
            }),
            None => Err(ExprError::Syntax {
                pos: at,
                msg: "unexpected end of input".into(),
            }),
        }
    }

    fn ident(&self, at: usize, name: &str) -> Result<Node, ExprError> {
        if name == "s" {
            return Ok(Node::Var(self.dim - 1));
        }
        if name == "pi" {
            return Ok(Node::Num(std::f64::consts::PI));
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = digits.parse().map_err(|_| ExprError::UnknownIdent {
                    pos: at,
                    name: name.to_string(),
                })?;
                if index >= self.dim {
                    return Err(ExprError::VariableOutOfRange {
                        pos: at,
                        index,
                        dim: self.dim,
                    });
                }
                return Ok(Node::Var(index));
            }
        }
        Err(ExprError::UnknownIdent {
            pos: at,
            name: name.to_string(),
        })
    }

    fn call(&self, at: usize, name: &str, mut args: Vec<Node>) -> Result<Node, ExprError> {
        let arity = |want: usize, args: &Vec<Node>| -> Result<(), ExprError> {
            if args.len() == want {
                Ok(())
            } else {
                Err(ExprError::Syntax {
                    pos: at,
                    msg: format!("{name} takes {want} argument(s), got {}", args.len()),
                })
            }
        };
        let func = match name {
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "pow" => {
                arity(2, &args)?;
                let e = args.pop().expect("two args");
                let b = args.pop().expect("two args");
                return Ok(Node::Pow(Box::new(b), Box::new(e)));
            }
            _ => {
                return Err(ExprError::UnknownIdent {
                    pos: at,
                    name: name.to_string(),
                })
            }
        };
        arity(1, &args)?;
        Ok(Node::Call(func, Box::new(args.pop().expect("one arg"))))
    }
}
