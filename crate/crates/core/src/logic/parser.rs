use super::{Atom, LogicError, LtlFormula};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Not,
    And,
    Or,
    LParen,
    RParen,
    Box_,
    Diamond,
}

fn describe(t: &Option<(Tok, usize)>) -> String {
    match t {
        None => "end of input".into(),
        Some((Tok::Ident(s), _)) => format!("'{s}'"),
        Some((Tok::Not, _)) => "'!'".into(),
        Some((Tok::And, _)) => "'&'".into(),
        Some((Tok::Or, _)) => "'|'".into(),
        Some((Tok::LParen, _)) => "'('".into(),
        Some((Tok::RParen, _)) => "')'".into(),
        Some((Tok::Box_, _)) => "'[]'".into(),
        Some((Tok::Diamond, _)) => "'<>'".into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, LogicError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let col = i + 1;
        let c = chars[i];
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
                continue;
            }
            '!' | '~' => out.push((Tok::Not, col)),
            '&' => {
                if two == "&&" {
                    i += 1;
                }
                out.push((Tok::And, col));
            }
            '|' => {
                if two == "||" {
                    i += 1;
                }
                out.push((Tok::Or, col));
            }
            '(' => out.push((Tok::LParen, col)),
            ')' => out.push((Tok::RParen, col)),
            '[' if two == "[]" => {
                out.push((Tok::Box_, col));
                i += 1;
            }
            '<' if two == "<>" => {
                out.push((Tok::Diamond, col));
                i += 1;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), col));
                continue;
            }
            other => {
                return Err(LogicError::Syntax {
                    column: col,
                    message: format!("unexpected character '{other}'"),
                })
            }
        }
        i += 1;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end_column: usize,
}

impl Parser {
    fn peek(&self) -> Option<(Tok, usize)> {
        self.toks.get(self.pos).cloned()
    }

    fn column(&self) -> usize {
        self.peek().map_or(self.end_column, |t| t.1)
    }

    fn error<T>(&self, expected: &str) -> Result<T, LogicError> {
        Err(LogicError::Syntax {
            column: self.column(),
            message: format!("expected {expected}, found {}", describe(&self.peek())),
        })
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some((Tok::Ident(s), _)) if s == kw)
    }

    fn or(&mut self) -> Result<LtlFormula, LogicError> {
        let mut lhs = self.and()?;
        while matches!(self.peek(), Some((Tok::Or, _))) {
            self.pos += 1;
            lhs = LtlFormula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<LtlFormula, LogicError> {
        let mut lhs = self.until()?;
        while matches!(self.peek(), Some((Tok::And, _))) {
            self.pos += 1;
            lhs = LtlFormula::and(lhs, self.until()?);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<LtlFormula, LogicError> {
        let lhs = self.unary()?;
        if self.is_keyword("U") {
            self.pos += 1;
            return Ok(LtlFormula::until(lhs, self.until()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<LtlFormula, LogicError> {
        let Some((tok, _)) = self.peek() else {
            return self.error("a formula");
        };
        let wrap: Option<fn(LtlFormula) -> LtlFormula> = match &tok {
            Tok::Not => Some(LtlFormula::not),
            Tok::Box_ => Some(LtlFormula::always),
            Tok::Diamond => Some(LtlFormula::eventually),
            Tok::Ident(s) if s == "G" => Some(LtlFormula::always),
            Tok::Ident(s) if s == "F" => Some(LtlFormula::eventually),
            Tok::Ident(s) if s == "X" => Some(LtlFormula::next),
            _ => None,
        };
        if let Some(w) = wrap {
            self.pos += 1;
            return Ok(w(self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<LtlFormula, LogicError> {
        match self.peek() {
            Some((Tok::LParen, _)) => {
                self.pos += 1;
                let inner = self.or()?;
                if !matches!(self.peek(), Some((Tok::RParen, _))) {
                    return self.error("')'");
                }
                self.pos += 1;
                Ok(inner)
            }
            Some((Tok::Ident(s), _)) if s == "U" => self.error("a formula"),
            Some((Tok::Ident(s), _)) => {
                self.pos += 1;
                Ok(match s.as_str() {
                    "true" => LtlFormula::True,
                    "false" => LtlFormula::False,
                    _ => LtlFormula::Atom(s),
                })
            }
            _ => self.error("a formula"),
        }
    }
}

/// Parses `G`/`[]`, `F`/`<>`, `X`, `U`, `&`, `|`, `!` and parentheses.
/// Binding from loosest: `|`, `&`, `U` (right associative), unary
/// operators. Every atom must be declared in `atoms`.
pub fn parse_ltl(text: &str, atoms: &[Atom]) -> Result<LtlFormula, LogicError> {
    let f = parse_unchecked(text)?;
    for name in f.atoms() {
        if !atoms.iter().any(|a| a.name == name) {
            return Err(LogicError::UndeclaredAtom(name));
        }
    }
    Ok(f)
}

/// Parses without checking atom declarations.
pub(crate) fn parse_unchecked(text: &str) -> Result<LtlFormula, LogicError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
        end_column: text.chars().count() + 1,
    };
    let f = p.or()?;
    if p.pos != p.toks.len() {
        return p.error("end of input");
    }
    Ok(f)
}
