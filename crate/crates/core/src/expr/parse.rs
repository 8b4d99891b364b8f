use super::{BinaryOp, ExprError, Node, UnaryOp};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

pub(super) struct Parser<'a> {
    src: &'a str,
    arity: usize,
    toks: Vec<(Tok, usize)>,
    at: usize,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
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
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ExprError::Syntax {
                pos: start,
                msg: format!("malformed number `{text}`"),
            })?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Sym(c), i));
            i += 1;
        } else {
            return Err(ExprError::Syntax {
                pos: i,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

impl<'a> Parser<'a> {
    pub(super) fn new(src: &'a str, arity: usize) -> Self {
        Self {
            src,
            arity,
            toks: Vec::new(),
            at: 0,
        }
    }

    pub(super) fn parse(mut self) -> Result<Node, ExprError> {
        self.toks = lex(self.src)?;
        let node = self.expr()?;
        match self.peek() {
            Tok::End => Ok(node),
            t => Err(self.syntax(format!("unexpected {}", describe(t)))),
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if !matches!(t, Tok::End) {
            self.at += 1;
        }
        t
    }

    fn syntax(&self, msg: String) -> ExprError {
        ExprError::Syntax {
            pos: self.pos(),
            msg,
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.syntax(format!("expected `{c}`, found {}", describe(self.peek()))))
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinaryOp::Add,
                Tok::Sym('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinaryOp::Mul,
                Tok::Sym('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Tok::Sym('-') => {
                self.bump();
                Ok(Node::Unary(UnaryOp::Neg, Box::new(self.unary()?)))
            }
            Tok::Sym('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if *self.peek() != Tok::Sym('^') {
            return Ok(base);
        }
        self.bump();
        let pos = self.pos();
        let exponent = self.unary()?;
        let p = fold_constant(&exponent).ok_or(ExprError::Syntax {
            pos,
            msg: "exponent must be a finite constant".into(),
        })?;
        Ok(Node::Pow(Box::new(base), p))
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(v) => Ok(Node::Const(v)),
            Tok::Sym('(') => {
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::Sym('(') {
                    let op: UnaryOp = name.parse().map_err(|_| ExprError::UnknownIdentifier {
                        name: name.clone(),
                        pos,
                    })?;
                    self.bump();
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Node::Unary(op, Box::new(arg)));
                }
                self.variable(&name, pos)
            }
            t => Err(ExprError::Syntax {
                pos,
                msg: format!("unexpected {}", describe(&t)),
            }),
        }
    }

    fn variable(&self, name: &str, pos: usize) -> Result<Node, ExprError> {
        let index = match name {
            "x" => Some(0),
            "y" => Some(1),
            "z" => Some(2),
            _ => None,
        };
        if let Some(i) = index {
            if self.arity > 3 {
                return Err(ExprError::UnknownIdentifier {
                    name: name.into(),
                    pos,
                });
            }
            return self.checked(name, i, pos);
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty()
                && digits.bytes().all(|b| b.is_ascii_digit())
                && !digits.starts_with('0')
            {
                let k: usize = digits.parse().map_err(|_| ExprError::UnknownIdentifier {
                    name: name.into(),
                    pos,
                })?;
                return self.checked(name, k - 1, pos);
            }
        }
        Err(ExprError::UnknownIdentifier {
            name: name.into(),
            pos,
        })
    }

    fn checked(&self, name: &str, index: usize, pos: usize) -> Result<Node, ExprError> {
        if index >= self.arity {
            return Err(ExprError::VariableOutOfRange {
                name: name.into(),
                pos,
                arity: self.arity,
            });
        }
        Ok(Node::Var(index))
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Sym(c) => format!("`{c}`"),
        Tok::End => "end of input".into(),
    }
}

fn fold_constant(node: &Node) -> Option<f64> {
    let v = match node {
        Node::Const(c) => *c,
        Node::Var(_) => return None,
        Node::Unary(op, a) => {
            let a = fold_constant(a)?;
            match op {
                UnaryOp::Neg => -a,
                UnaryOp::Exp => a.exp(),
                UnaryOp::Log => a.ln(),
                UnaryOp::Sin => a.sin(),
                UnaryOp::Cos => a.cos(),
                UnaryOp::Sqrt => a.sqrt(),
            }
        }
        Node::Binary(op, a, b) => {
            let (a, b) = (fold_constant(a)?, fold_constant(b)?);
            match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div => a / b,
            }
        }
        Node::Pow(a, p) => fold_constant(a)?.powf(*p),
    };
    v.is_finite().then_some(v)
}

#[cfg(test)]
mod tests {
    use super::super::{ExprError, Expression, Node};

    #[test]
    fn parses_paper_functions() {
        let f = Expression::parse("y/(1+x^2)", 2).unwrap();
        assert_eq!(f.arity(), 2);
        let id = Expression::parse("x1", 1).unwrap();
        assert_eq!(*id.root(), Node::Var(0));
        let pz = Expression::parse("x - 3*x^5*y^2 + 2*x^7*y^3 + y*z", 3).unwrap();
        let v = pz.eval(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(v, 1.0 - 3.0 + 2.0 + 1.0);
    }

    #[test]
    fn indexed_and_aliased_variables_agree() {
        let a = Expression::parse("x1*x2 + x3", 3).unwrap();
        let b = Expression::parse("x*y + z", 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn aliases_unavailable_above_three() {
        assert!(matches!(
            Expression::parse("x + x4", 4),
            Err(ExprError::UnknownIdentifier { .. })
        ));
        assert!(Expression::parse("x1 + x4", 4).is_ok());
    }

    #[test]
    fn reports_errors_with_positions() {
        assert_eq!(
            Expression::parse("x + * y", 2),
            Err(ExprError::Syntax {
                pos: 4,
                msg: "unexpected `*`".into()
            })
        );
        assert!(matches!(
            Expression::parse("x + w", 2),
            Err(ExprError::UnknownIdentifier { pos: 4, .. })
        ));
        assert!(matches!(
            Expression::parse("x3", 2),
            Err(ExprError::VariableOutOfRange { arity: 2, .. })
        ));
        assert!(matches!(
            Expression::parse("z", 2),
            Err(ExprError::VariableOutOfRange { .. })
        ));
        assert!(matches!(
            Expression::parse("(x + 1", 1),
            Err(ExprError::Syntax { pos: 6, .. })
        ));
        assert!(matches!(
            Expression::parse("x ^ y", 2),
            Err(ExprError::Syntax { pos: 4, .. })
        ));
        assert!(matches!(
            Expression::parse("foo(x)", 1),
            Err(ExprError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            Expression::parse("2 x", 1),
            Err(ExprError::Syntax { .. })
        ));
        assert!(matches!(
            Expression::parse("x0", 1),
            Err(ExprError::UnknownIdentifier { .. })
        ));
        assert_eq!(Expression::parse("x", 0), Err(ExprError::ZeroArity));
    }

    #[test]
    fn precedence_and_associativity() {
        let e = Expression::parse("2 - 3 - 4", 1).unwrap();
        assert_eq!(e.eval(&[0.0]).unwrap(), -5.0);
        let e = Expression::parse("-x^2", 1).unwrap();
        assert_eq!(e.eval(&[3.0]).unwrap(), -9.0);
        let e = Expression::parse("2^3^2", 1).unwrap();
        assert_eq!(e.eval(&[0.0]).unwrap(), 512.0);
        let e = Expression::parse("x^-1", 1).unwrap();
        assert_eq!(e.eval(&[4.0]).unwrap(), 0.25);
        let e = Expression::parse("12/3/2", 1).unwrap();
        assert_eq!(e.eval(&[0.0]).unwrap(), 2.0);
        let e = Expression::parse("1.5e1 + 2E-1", 1).unwrap();
        assert_eq!(e.eval(&[0.0]).unwrap(), 15.2);
    }
}
