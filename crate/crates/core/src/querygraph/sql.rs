//! Tokenizer and recursive-descent parser for the supported SELECT subset.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparison {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparison {
    pub fn code(self) -> &'static str {
        match self {
            Comparison::Eq => "=",
            Comparison::Ne => "<>",
            Comparison::Lt => "<",
            Comparison::Le => "<=",
            Comparison::Gt => ">",
            Comparison::Ge => ">=",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Some(match code {
            "=" => Comparison::Eq,
            "<>" | "!=" => Comparison::Ne,
            "<" => Comparison::Lt,
            "<=" => Comparison::Le,
            ">" => Comparison::Gt,
            ">=" => Comparison::Ge,
            _ => return None,
        })
    }

    /// The comparison obtained by swapping operands.
    pub fn flipped(self) -> Self {
        match self {
            Comparison::Lt => Comparison::Gt,
            Comparison::Le => Comparison::Ge,
            Comparison::Gt => Comparison::Lt,
            Comparison::Ge => Comparison::Le,
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Int(i64),
    Float(f64),
    Str(String),
    /// ISO-8601 text from a `DATE '...'` literal.
    Date(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Column {
        qualifier: Option<String>,
        name: String,
        pos: usize,
    },
    Literal(Literal),
    Function {
        name: String,
        args: Vec<Expr>,
    },
    Compare {
        op: Comparison,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    InList {
        expr: Box<Expr>,
        list: Vec<Literal>,
    },
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Not(Box<Expr>),
}

impl Expr {
    /// Splits nested ANDs into a flat conjunct list.
    pub fn into_conjuncts(self) -> Vec<Expr> {
        match self {
            Expr::And(items) => items.into_iter().flat_map(Expr::into_conjuncts).collect(),
            other => vec![other],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FromItem {
    pub table: String,
    pub alias: String,
    pub pos: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub from: Vec<FromItem>,
    /// WHERE and ON predicates joined into one conjunction.
    pub predicate: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Quoted(String),
    Number(String),
    Str(String),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Quoted(s) => write!(f, "identifier `{s}`"),
            Tok::Number(s) => write!(f, "number `{s}`"),
            Tok::Str(s) => write!(f, "string '{s}'"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

const SYMBOLS: [&str; 13] = ["<=", ">=", "<>", "!=", "=", "<", ">", "(", ")", ",", ".", "*", ";"];

const RESERVED: [&str; 22] = [
    "SELECT", "FROM", "WHERE", "AND", "OR", "NOT", "IN", "JOIN", "INNER", "ON", "AS", "LEFT",
    "RIGHT", "FULL", "OUTER", "CROSS", "GROUP", "ORDER", "HAVING", "LIMIT", "UNION", "DATE",
];

const UNSUPPORTED: [&str; 11] = [
    "LEFT", "RIGHT", "FULL", "OUTER", "CROSS", "GROUP", "ORDER", "HAVING", "LIMIT", "UNION",
    "BETWEEN",
];

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if text[i..].starts_with("--") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            out.push((Tok::Number(text[start..i].to_string()), start));
        } else if c == b'\'' || c == b'"' {
            let start = i;
            let mut s = String::new();
            i += 1;
            loop {
                let Some(ch) = text[i..].chars().next() else {
                    return Err(Error::parse(start, "unterminated quoted text"));
                };
                i += ch.len_utf8();
                if ch as u32 == u32::from(c) {
                    if i < bytes.len() && bytes[i] == c {
                        s.push(ch);
                        i += 1;
                    } else {
                        break;
                    }
                } else {
                    s.push(ch);
                }
            }
            let tok = if c == b'\'' { Tok::Str(s) } else { Tok::Quoted(s) };
            out.push((tok, start));
        } else if let Some(sym) = SYMBOLS.iter().find(|s| text[i..].starts_with(**s)) {
            out.push((Tok::Sym(sym), i));
            i += sym.len();
        } else if c == b'-' {
            out.push((Tok::Sym("-"), i));
            i += 1;
        } else {
            let ch = text[i..].chars().next().unwrap_or('?');
            return Err(Error::parse(i, format!("unexpected character `{ch}`")));
        }
    }
    out.push((Tok::Eof, text.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.at + k).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected {kw}")))
        }
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Tok::Sym(s) if *s == sym) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, sym: &str) -> Result<()> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected `{sym}`")))
        }
    }

    fn unexpected(&self, what: &str) -> Error {
        if let Tok::Ident(s) = self.peek() {
            let upper = s.to_ascii_uppercase();
            if UNSUPPORTED.contains(&upper.as_str()) {
                return Error::parse(self.pos(), format!("unsupported syntax `{upper}`"));
            }
        }
        Error::parse(self.pos(), format!("{what}, found {}", self.peek()))
    }

    fn identifier(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.contains(&s.to_ascii_uppercase().as_str()) => {
                self.bump();
                Ok(s.to_ascii_lowercase())
            }
            Tok::Quoted(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("expected identifier")),
        }
    }

    fn statement(&mut self) -> Result<Statement> {
        self.expect_kw("SELECT")?;
        let mut depth = 0usize;
        let mut items = 0usize;
        loop {
            match self.peek() {
                Tok::Eof => return Err(self.unexpected("expected FROM")),
                Tok::Ident(s) if depth == 0 && s.eq_ignore_ascii_case("FROM") => break,
                Tok::Sym("(") => depth += 1,
                Tok::Sym(")") => depth = depth.saturating_sub(1),
                Tok::Ident(s) if s.eq_ignore_ascii_case("SELECT") => {
                    return Err(Error::parse(self.pos(), "unsupported syntax: subselect"));
                }
                _ => {}
            }
            items += 1;
            self.bump();
        }
        if items == 0 {
            return Err(self.unexpected("expected select list"));
        }
        self.expect_kw("FROM")?;

        let mut from = vec![self.table_ref()?];
        let mut conjuncts = Vec::new();
        loop {
            if self.eat_sym(",") {
                from.push(self.table_ref()?);
            } else if self.is_kw("JOIN") || self.is_kw("INNER") {
                if self.eat_kw("INNER") && !self.is_kw("JOIN") {
                    return Err(self.unexpected("expected JOIN"));
                }
                self.expect_kw("JOIN")?;
                from.push(self.table_ref()?);
                self.expect_kw("ON")?;
                conjuncts.extend(self.or_expr()?.into_conjuncts());
            } else {
                break;
            }
        }
        if self.eat_kw("WHERE") {
            conjuncts.extend(self.or_expr()?.into_conjuncts());
        }
        self.eat_sym(";");
        if *self.peek() != Tok::Eof {
            return Err(self.unexpected("expected end of statement"));
        }
        let predicate = match conjuncts.len() {
            0 => None,
            1 => conjuncts.pop(),
            _ => Some(Expr::And(conjuncts)),
        };
        Ok(Statement { from, predicate })
    }

    fn table_ref(&mut self) -> Result<FromItem> {
        let pos = self.pos();
        if matches!(self.peek(), Tok::Sym("(")) {
            return Err(Error::parse(pos, "unsupported syntax: derived table"));
        }
        let table = self.identifier()?;
        let explicit = self.eat_kw("AS")
            || matches!(self.peek(), Tok::Ident(s) if !RESERVED.contains(&s.to_ascii_uppercase().as_str()))
            || matches!(self.peek(), Tok::Quoted(_));
        let alias = if explicit {
            self.identifier()?
        } else {
            table.clone()
        };
        Ok(FromItem { table, alias, pos })
    }

    fn or_expr(&mut self) -> Result<Expr> {
        let mut items = vec![self.and_expr()?];
        while self.eat_kw("OR") {
            items.push(self.and_expr()?);
        }
        Ok(if items.len() == 1 {
            items.pop().expect("one item")
        } else {
            Expr::Or(items.into_iter().flat_map(flatten_or).collect())
        })
    }

    fn and_expr(&mut self) -> Result<Expr> {
        let mut items = vec![self.not_expr()?];
        while self.eat_kw("AND") {
            items.push(self.not_expr()?);
        }
        Ok(if items.len() == 1 {
            items.pop().expect("one item")
        } else {
            Expr::And(items.into_iter().flat_map(Expr::into_conjuncts).collect())
        })
    }

    fn not_expr(&mut self) -> Result<Expr> {
        if self.eat_kw("NOT") {
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        self.predicate()
    }

    fn predicate(&mut self) -> Result<Expr> {
        if self.eat_sym("(") {
            let inner = self.or_expr()?;
            self.expect_sym(")")?;
            return Ok(inner);
        }
        let left = self.operand()?;
        if self.is_kw("NOT") && matches!(self.peek_at(1), Tok::Ident(s) if s.eq_ignore_ascii_case("IN"))
        {
            self.bump();
            self.bump();
            let list = self.in_list()?;
            return Ok(Expr::Not(Box::new(Expr::InList {
                expr: Box::new(left),
                list,
            })));
        }
        if self.eat_kw("IN") {
            let list = self.in_list()?;
            return Ok(Expr::InList {
                expr: Box::new(left),
                list,
            });
        }
        let op = match self.peek() {
            Tok::Sym(s) => Comparison::from_code(s),
            _ => None,
        }
        .ok_or_else(|| self.unexpected("expected comparison operator"))?;
        self.bump();
        let right = self.operand()?;
        Ok(Expr::Compare {
            op,
            left: Box::new(left),
            right: Box::new(right),
        })
    }

    fn in_list(&mut self) -> Result<Vec<Literal>> {
        self.expect_sym("(")?;
        if self.is_kw("SELECT") {
            return Err(Error::parse(self.pos(), "unsupported syntax: subselect"));
        }
        let mut list = vec![self.literal()?];
        while self.eat_sym(",") {
            list.push(self.literal()?);
        }
        self.expect_sym(")")?;
        Ok(list)
    }

    fn literal(&mut self) -> Result<Literal> {
        let pos = self.pos();
        match self.operand()? {
            Expr::Literal(l) => Ok(l),
            _ => Err(Error::parse(pos, "expected literal")),
        }
    }

    fn operand(&mut self) -> Result<Expr> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Number(s) => {
                self.bump();
                number_literal(&s, false, pos)
            }
            Tok::Sym("-") => {
                self.bump();
                match self.bump() {
                    Tok::Number(s) => number_literal(&s, true, pos),
                    _ => Err(Error::parse(pos, "expected number after `-`")),
                }
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Literal(Literal::Str(s)))
            }
            Tok::Ident(kw) if kw.eq_ignore_ascii_case("DATE") => {
                self.bump();
                match self.bump() {
                    Tok::Str(s) if crate::schema::parse_date(&s).is_some() => {
                        Ok(Expr::Literal(Literal::Date(s.trim().to_string())))
                    }
                    _ => Err(Error::parse(pos, "expected ISO date string after DATE")),
                }
            }
            Tok::Ident(_) | Tok::Quoted(_) => {
                if self.is_kw("SELECT") {
                    return Err(Error::parse(pos, "unsupported syntax: subselect"));
                }
                let first = self.identifier()?;
                if self.eat_sym("(") {
                    let mut args = Vec::new();
                    if !self.eat_sym(")") {
                        args.push(self.operand()?);
                        while self.eat_sym(",") {
                            args.push(self.operand()?);
                        }
                        self.expect_sym(")")?;
                    }
                    return Ok(Expr::Function {
                        name: first.to_ascii_uppercase(),
                        args,
                    });
                }
                if self.eat_sym(".") {
                    let name = self.identifier()?;
                    return Ok(Expr::Column {
                        qualifier: Some(first),
                        name,
                        pos,
                    });
                }
                Ok(Expr::Column {
                    qualifier: None,
                    name: first,
                    pos,
                })
            }
            _ => Err(self.unexpected("expected operand")),
        }
    }
}

fn flatten_or(e: Expr) -> Vec<Expr> {
    match e {
        Expr::Or(items) => items,
        other => vec![other],
    }
}

fn number_literal(text: &str, negative: bool, pos: usize) -> Result<Expr> {
    let signed = if negative {
        format!("-{text}")
    } else {
        text.to_string()
    };
    if let Ok(v) = signed.parse::<i64>() {
        return Ok(Expr::Literal(Literal::Int(v)));
    }
    signed
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(|v| Expr::Literal(Literal::Float(v)))
        .ok_or_else(|| Error::parse(pos, format!("bad number `{text}`")))
}

/// Parses one SELECT statement into its syntax tree.
pub fn parse_statement(text: &str) -> Result<Statement> {
    let toks = tokenize(text)?;
    Parser { toks, at: 0 }.statement()
}

/// Splits a workload file into statements: one per line, `--` comments and
/// blank lines removed.
pub fn split_statements(text: &str) -> Vec<String> {
    text.lines()
        .map(strip_comment)
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    let mut quote: Option<u8> = None;
    for i in 0..bytes.len() {
        match quote {
            Some(q) if bytes[i] == q => quote = None,
            Some(_) => {}
            None if bytes[i] == b'\'' || bytes[i] == b'"' => quote = Some(bytes[i]),
            None if bytes[i] == b'-' && bytes.get(i + 1) == Some(&b'-') => return &line[..i],
            None => {}
        }
    }
    line
}
