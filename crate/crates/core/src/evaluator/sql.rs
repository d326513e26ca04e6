//! A small SQL clause parser for exact-set-match scoring.
//!
//! Identifiers are lowercased, literals become `?`, and table aliases are
//! replaced by base table names. Bare columns are qualified when exactly one
//! table is in scope. Each clause is rendered to normalized strings; the
//! canonical rendering of a [`ClauseSet`] parses back to an equal set.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Ident(String),
    Keyword(&'static str),
    Literal,
    Symbol(&'static str),
}

const KEYWORDS: &[&str] = &[
    "select",
    "distinct",
    "all",
    "from",
    "where",
    "group",
    "by",
    "having",
    "order",
    "limit",
    "offset",
    "asc",
    "desc",
    "and",
    "or",
    "not",
    "in",
    "like",
    "glob",
    "between",
    "is",
    "null",
    "as",
    "join",
    "inner",
    "left",
    "right",
    "outer",
    "cross",
    "natural",
    "on",
    "using",
    "union",
    "intersect",
    "except",
    "exists",
    "case",
    "when",
    "then",
    "else",
    "end",
    "with",
    "over",
    "values",
    "escape",
    "collate",
    "cast",
];

const SYMBOLS: &[&str] = &[
    "<>", "!=", "<=", ">=", "==", "||", "=", "<", ">", "(", ")", ",", ".", "*", "+", "-", "/", "%",
];

fn keyword(word: &str) -> Option<&'static str> {
    let lower = word.to_ascii_lowercase();
    KEYWORDS.iter().copied().find(|k| *k == lower)
}

pub fn tokenize(sql: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = sql.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    let err = |m: String| Error::SqlParse(m);
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                i += 1;
            }
            i += 2;
        } else if c == '\'' {
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(err("unterminated string literal".into())),
                    Some('\'') if chars.get(i + 1) == Some(&'\'') => i += 2,
                    Some('\'') => break,
                    Some(_) => i += 1,
                }
            }
            i += 1;
            tokens.push(Token::Literal);
        } else if c == '"' || c == '`' || c == '[' {
            let close = if c == '[' { ']' } else { c };
            let start = i + 1;
            i = start;
            while i < chars.len() && chars[i] != close {
                i += 1;
            }
            if i >= chars.len() {
                return Err(err("unterminated quoted identifier".into()));
            }
            let name: String = chars[start..i].iter().collect();
            tokens.push(Token::Ident(name.to_lowercase()));
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '.') {
                i += 1;
            }
            tokens.push(Token::Literal);
        } else if c == '?' {
            i += 1;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            tokens.push(Token::Literal);
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            tokens.push(match keyword(&word) {
                Some(k) => Token::Keyword(k),
                None => Token::Ident(word.to_lowercase()),
            });
        } else if c == ';' {
            if chars[i + 1..].iter().any(|c| !c.is_whitespace()) {
                return Err(err("multiple statements".into()));
            }
            i += 1;
        } else {
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                Some(s) => {
                    tokens.push(Token::Symbol(if *s == "==" {
                        "="
                    } else if *s == "<>" {
                        "!="
                    } else {
                        s
                    }));
                    i += s.chars().count();
                }
                None => return Err(err(format!("unexpected character {c:?}"))),
            }
        }
    }
    Ok(tokens)
}

fn is_kw(t: Option<&Token>, k: &str) -> bool {
    matches!(t, Some(Token::Keyword(w)) if *w == k)
}

fn is_sym(t: Option<&Token>, s: &str) -> bool {
    matches!(t, Some(Token::Symbol(w)) if *w == s)
}

/// Parenthesis depth before each token.
fn depths(tokens: &[Token]) -> Result<Vec<usize>> {
    let mut depth = 0usize;
    let mut out = Vec::with_capacity(tokens.len());
    for t in tokens {
        if is_sym(Some(t), ")") {
            depth = depth
                .checked_sub(1)
                .ok_or_else(|| Error::SqlParse("unbalanced parentheses".into()))?;
        }
        out.push(depth);
        if is_sym(Some(t), "(") {
            depth += 1;
        }
    }
    if depth != 0 {
        return Err(Error::SqlParse("unbalanced parentheses".into()));
    }
    Ok(out)
}

fn matching_paren(tokens: &[Token], open: usize) -> Result<usize> {
    let mut depth = 0;
    for (i, t) in tokens.iter().enumerate().skip(open) {
        if is_sym(Some(t), "(") {
            depth += 1;
        } else if is_sym(Some(t), ")") {
            depth -= 1;
            if depth == 0 {
                return Ok(i);
            }
        }
    }
    Err(Error::SqlParse("unbalanced parentheses".into()))
}

/// Splits at top-level tokens satisfying `pred`, dropping the separators.
fn split_top(tokens: &[Token], pred: impl Fn(&Token) -> bool) -> Result<Vec<&[Token]>> {
    let d = depths(tokens)?;
    let mut parts = Vec::new();
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        if d[i] == 0 && pred(t) {
            parts.push(&tokens[start..i]);
            start = i + 1;
        }
    }
    parts.push(&tokens[start..]);
    Ok(parts)
}

/// Splits a boolean expression on top-level AND, keeping `BETWEEN x AND y`.
fn split_conjuncts(tokens: &[Token]) -> Result<Vec<&[Token]>> {
    let d = depths(tokens)?;
    let mut parts = Vec::new();
    let mut start = 0;
    let mut pending_between = false;
    for (i, t) in tokens.iter().enumerate() {
        if d[i] != 0 {
            continue;
        }
        if is_kw(Some(t), "between") {
            pending_between = true;
        } else if is_kw(Some(t), "and") {
            if pending_between {
                pending_between = false;
            } else {
                parts.push(&tokens[start..i]);
                start = i + 1;
            }
        }
    }
    parts.push(&tokens[start..]);
    Ok(parts)
}

/// Alias resolution for one query level.
#[derive(Debug, Default)]
struct Scope {
    aliases: HashMap<String, String>,
    tables: Vec<String>,
}

impl Scope {
    fn resolve<'a>(&'a self, qualifier: &'a str) -> &'a str {
        self.aliases.get(qualifier).map_or(qualifier, String::as_str)
    }

    fn single_table(&self) -> Option<&str> {
        match self.tables.as_slice() {
            [only] if !only.starts_with('(') => Some(only),
            _ => None,
        }
    }
}

fn render_expr(tokens: &[Token], scope: &Scope) -> Result<String> {
    let mut out: Vec<String> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        match t {
            Token::Symbol("(") if is_kw(tokens.get(i + 1), "select") => {
                let close = matching_paren(tokens, i)?;
                let sub = parse_tokens(&tokens[i + 1..close])?;
                out.push(format!("({sub})"));
                i = close + 1;
                continue;
            }
            Token::Ident(name) if is_sym(tokens.get(i + 1), ".") => {
                let column = match tokens.get(i + 2) {
                    Some(Token::Ident(c)) => c.clone(),
                    Some(Token::Symbol("*")) => "*".into(),
                    _ => return Err(Error::SqlParse(format!("dangling qualifier {name}"))),
                };
                out.push(format!("{}.{column}", scope.resolve(name)));
                i += 3;
                continue;
            }
            Token::Ident(name) if is_sym(tokens.get(i + 1), "(") => {
                out.push(format!("{name}("));
                i += 2;
                continue;
            }
            Token::Ident(name) => out.push(match scope.single_table() {
                Some(table) => format!("{table}.{name}"),
                None => name.clone(),
            }),
            Token::Keyword(k) => out.push(k.to_ascii_uppercase()),
            Token::Literal => out.push("?".into()),
            Token::Symbol(s) => out.push((*s).to_string()),
        }
        i += 1;
    }
    // Join with single spaces, tight around parentheses and before commas.
    let mut text = String::new();
    for piece in out {
        let tight = text.is_empty() || text.ends_with('(') || piece == ")" || piece == ",";
        if !tight {
            text.push(' ');
        }
        text.push_str(&piece);
    }
    Ok(text)
}

/// Orders the two sides of `a = b` so that equality is symmetric.
fn normalize_equality(pred: String) -> String {
    let parts: Vec<&str> = pred.split(" = ").collect();
    if parts.len() != 2 || parts[0].contains(' ') || parts[1].contains(' ') {
        return pred;
    }
    let swap = if parts[0] == "?" || parts[1] == "?" {
        parts[0] == "?"
    } else {
        parts[0] > parts[1]
    };
    if swap {
        format!("{} = {}", parts[1], parts[0])
    } else {
        pred
    }
}

fn render_conjuncts(tokens: &[Token], scope: &Scope, into: &mut BTreeSet<String>) -> Result<()> {
    for part in split_conjuncts(tokens)? {
        if part.is_empty() {
            return Err(Error::SqlParse("empty predicate".into()));
        }
        into.insert(normalize_equality(render_expr(part, scope)?));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum SetOperator {
    Union,
    UnionAll,
    Intersect,
    Except,
}

impl SetOperator {
    fn sql(&self) -> &'static str {
        match self {
            SetOperator::Union => "UNION",
            SetOperator::UnionAll => "UNION ALL",
            SetOperator::Intersect => "INTERSECT",
            SetOperator::Except => "EXCEPT",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ClauseSet {
    pub distinct: bool,
    pub select_items: BTreeSet<String>,
    pub from_tables: BTreeSet<String>,
    pub join_conditions: BTreeSet<String>,
    pub where_predicates: BTreeSet<String>,
    pub group_by: BTreeSet<String>,
    pub having: BTreeSet<String>,
    /// Sort keys keep their order.
    pub order_by: Vec<String>,
    pub limit: bool,
    pub compound: Option<(SetOperator, Box<ClauseSet>)>,
}

impl fmt::Display for ClauseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |set: &BTreeSet<String>, sep: &str| set.iter().cloned().collect::<Vec<_>>().join(sep);
        write!(f, "SELECT ")?;
        if self.distinct {
            write!(f, "DISTINCT ")?;
        }
        write!(f, "{}", join(&self.select_items, ", "))?;
        if !self.from_tables.is_empty() {
            write!(f, " FROM {}", join(&self.from_tables, " JOIN "))?;
            if !self.join_conditions.is_empty() {
                write!(f, " ON {}", join(&self.join_conditions, " AND "))?;
            }
        }
        if !self.where_predicates.is_empty() {
            write!(f, " WHERE {}", join(&self.where_predicates, " AND "))?;
        }
        if !self.group_by.is_empty() {
            write!(f, " GROUP BY {}", join(&self.group_by, ", "))?;
        }
        if !self.having.is_empty() {
            write!(f, " HAVING {}", join(&self.having, " AND "))?;
        }
        if !self.order_by.is_empty() {
            write!(f, " ORDER BY {}", self.order_by.join(", "))?;
        }
        if self.limit {
            write!(f, " LIMIT ?")?;
        }
        if let Some((op, rhs)) = &self.compound {
            write!(f, " {} {rhs}", op.sql())?;
        }
        Ok(())
    }
}

fn unsupported(construct: &str) -> Error {
    Error::UnsupportedSql(construct.to_string())
}

fn find_set_operator(tokens: &[Token]) -> Result<Option<(usize, SetOperator, usize)>> {
    let d = depths(tokens)?;
    for (i, t) in tokens.iter().enumerate() {
        if d[i] != 0 {
            continue;
        }
        let op = match t {
            Token::Keyword("union") if is_kw(tokens.get(i + 1), "all") => Some((SetOperator::UnionAll, 2)),
            Token::Keyword("union") => Some((SetOperator::Union, 1)),
            Token::Keyword("intersect") => Some((SetOperator::Intersect, 1)),
            Token::Keyword("except") => Some((SetOperator::Except, 1)),
            _ => None,
        };
        if let Some((op, width)) = op {
            return Ok(Some((i, op, width)));
        }
    }
    Ok(None)
}

const CLAUSES: &[&str] = &["from", "where", "group", "having", "order", "limit"];

fn parse_tokens(tokens: &[Token]) -> Result<ClauseSet> {
    if let Some((at, op, width)) = find_set_operator(tokens)? {
        let mut left = parse_simple(&tokens[..at])?;
        let rest = &tokens[at + width..];
        if find_set_operator(rest)?.is_some() {
            return Err(unsupported("chained set operations"));
        }
        left.compound = Some((op, Box::new(parse_simple(rest)?)));
        return Ok(left);
    }
    parse_simple(tokens)
}

/// Fills `scope` with the FROM tables and returns the ON-condition slices.
fn parse_from<'a>(tokens: &'a [Token], scope: &mut Scope) -> Result<Vec<&'a [Token]>> {
    let mut on_conditions = Vec::new();
    let d = depths(tokens)?;
    let mut i = 0;
    let mut expect_table = true;
    while i < tokens.len() {
        if d[i] != 0 {
            return Err(Error::SqlParse("unexpected token in FROM".into()));
        }
        if expect_table {
            let (name, next) = match &tokens[i] {
                Token::Ident(name) => (name.clone(), i + 1),
                Token::Symbol("(") => {
                    let close = matching_paren(tokens, i)?;
                    if !is_kw(tokens.get(i + 1), "select") {
                        return Err(unsupported("parenthesized join"));
                    }
                    (format!("({})", parse_tokens(&tokens[i + 1..close])?), close + 1)
                }
                other => return Err(Error::SqlParse(format!("expected table, found {other:?}"))),
            };
            i = next;
            if is_kw(tokens.get(i), "as") {
                i += 1;
            }
            if let Some(Token::Ident(alias)) = tokens.get(i) {
                scope.aliases.insert(alias.clone(), name.clone());
                i += 1;
            }
            scope.aliases.entry(name.clone()).or_insert_with(|| name.clone());
            scope.tables.push(name);
            expect_table = false;
            continue;
        }
        match &tokens[i] {
            Token::Symbol(",") => {
                expect_table = true;
                i += 1;
            }
            Token::Keyword("join") => {
                expect_table = true;
                i += 1;
            }
            Token::Keyword("inner" | "left" | "right" | "outer" | "cross" | "natural") => i += 1,
            Token::Keyword("on") => {
                let start = i + 1;
                let mut end = start;
                while end < tokens.len()
                    && !(d[end] == 0
                        && (is_sym(tokens.get(end), ",")
                            || matches!(
                                tokens[end],
                                Token::Keyword("join" | "inner" | "left" | "right" | "cross" | "natural")
                            )))
                {
                    end += 1;
                }
                on_conditions.push(&tokens[start..end]);
                i = end;
            }
            Token::Keyword("using") => return Err(unsupported("JOIN ... USING")),
            other => return Err(Error::SqlParse(format!("unexpected {other:?} in FROM"))),
        }
    }
    if expect_table {
        return Err(Error::SqlParse("FROM clause ends without a table".into()));
    }
    Ok(on_conditions)
}

fn parse_simple(tokens: &[Token]) -> Result<ClauseSet> {
    if !is_kw(tokens.first(), "select") {
        return Err(match tokens.first() {
            Some(Token::Keyword("with")) => unsupported("WITH"),
            Some(Token::Keyword("values")) => unsupported("VALUES"),
            _ => Error::SqlParse("expected SELECT".into()),
        });
    }
    if tokens.iter().any(|t| is_kw(Some(t), "over")) {
        return Err(unsupported("window function"));
    }
    let d = depths(tokens)?;
    let mut bounds: Vec<(&str, usize)> = Vec::new();
    for (i, t) in tokens.iter().enumerate().skip(1) {
        if let Token::Keyword(k) = t {
            if d[i] == 0 && CLAUSES.contains(k) {
                if bounds.iter().any(|(seen, _)| seen == k) {
                    return Err(Error::SqlParse(format!("repeated {} clause", k.to_uppercase())));
                }
                bounds.push((k, i));
            }
        }
    }
    let segment = |name: &str| -> Option<&[Token]> {
        let pos = bounds.iter().position(|(k, _)| *k == name)?;
        let start = bounds[pos].1 + 1;
        let end = bounds.get(pos + 1).map_or(tokens.len(), |(_, i)| *i);
        Some(&tokens[start..end])
    };
    let strip_by = |seg: &[Token], name: &str| -> Result<Vec<Token>> {
        match seg.split_first() {
            Some((Token::Keyword("by"), rest)) => Ok(rest.to_vec()),
            _ => Err(Error::SqlParse(format!("expected BY after {name}"))),
        }
    };

    let mut set = ClauseSet::default();
    let mut scope = Scope::default();
    if let Some(from) = segment("from") {
        let on = parse_from(from, &mut scope)?;
        set.from_tables = scope.tables.iter().cloned().collect();
        for cond in on {
            render_conjuncts(cond, &scope, &mut set.join_conditions)?;
        }
    }

    let select_end = bounds.first().map_or(tokens.len(), |(_, i)| *i);
    let mut select = &tokens[1..select_end];
    if is_kw(select.first(), "distinct") {
        set.distinct = true;
        select = &select[1..];
    } else if is_kw(select.first(), "all") {
        select = &select[1..];
    }
    for item in split_top(select, |t| is_sym(Some(t), ","))? {
        let item = match item.iter().rposition(|t| is_kw(Some(t), "as")) {
            Some(p) if p + 2 == item.len() && depths(item)?[p] == 0 => &item[..p],
            _ => item,
        };
        if item.is_empty() {
            return Err(Error::SqlParse("empty select item".into()));
        }
        set.select_items.insert(render_expr(item, &scope)?);
    }

    if let Some(seg) = segment("where") {
        render_conjuncts(seg, &scope, &mut set.where_predicates)?;
    }
    if let Some(seg) = segment("group") {
        for item in split_top(&strip_by(seg, "GROUP")?, |t| is_sym(Some(t), ","))? {
            set.group_by.insert(render_expr(item, &scope)?);
        }
    }
    if let Some(seg) = segment("having") {
        render_conjuncts(seg, &scope, &mut set.having)?;
    }
    if let Some(seg) = segment("order") {
        for item in split_top(&strip_by(seg, "ORDER")?, |t| is_sym(Some(t), ","))? {
            let (expr, dir) = match item.last() {
                Some(Token::Keyword("desc")) => (&item[..item.len() - 1], "DESC"),
                Some(Token::Keyword("asc")) => (&item[..item.len() - 1], "ASC"),
                _ => (item, "ASC"),
            };
            set.order_by.push(format!("{} {dir}", render_expr(expr, &scope)?));
        }
    }
    set.limit = segment("limit").is_some();
    Ok(set)
}

/// Parses one SELECT statement (with at most one set operation) into clauses.
pub fn parse_clauses(sql: &str) -> Result<ClauseSet> {
    let tokens = tokenize(sql)?;
    if tokens.is_empty() {
        return Err(Error::SqlParse("empty statement".into()));
    }
    parse_tokens(&tokens)
}

/// Whether the outermost query has an ORDER BY.
pub fn has_top_level_order_by(sql: &str) -> bool {
    let Ok(tokens) = tokenize(sql) else {
        return false;
    };
    let Ok(d) = depths(&tokens) else {
        return false;
    };
    tokens
        .iter()
        .enumerate()
        .any(|(i, t)| d[i] == 0 && is_kw(Some(t), "order") && is_kw(tokens.get(i + 1), "by"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn reads_simple_query() {
        let c = parse_clauses("SELECT name FROM singer WHERE age > 20").unwrap();
        assert_eq!(c.select_items, set(&["singer.name"]));
        assert_eq!(c.from_tables, set(&["singer"]));
        assert_eq!(c.where_predicates, set(&["singer.age > ?"]));
    }

    #[test]
    fn aliases_resolve() {
        assert_eq!(
            parse_clauses("SELECT T1.name FROM singer AS T1").unwrap(),
            parse_clauses("SELECT name FROM singer").unwrap()
        );
        let c = parse_clauses(
            "SELECT T2.Model FROM car_makers AS T1 JOIN model_list AS T2 ON T1.Id = T2.Maker WHERE T1.Maker = 'amc'",
        )
        .unwrap();
        assert_eq!(c.join_conditions, set(&["car_makers.id = model_list.maker"]));
        assert_eq!(c.where_predicates, set(&["car_makers.maker = ?"]));
    }

    #[test]
    fn between_is_one_predicate() {
        let c = parse_clauses("SELECT a FROM t WHERE b BETWEEN 1 AND 5 AND c = 'x'").unwrap();
        assert_eq!(c.where_predicates, set(&["t.b BETWEEN ? AND ?", "t.c = ?"]));
    }

    #[test]
    fn subqueries_and_set_ops() {
        let c = parse_clauses(
            "SELECT name FROM singer WHERE age > (SELECT avg(age) FROM singer) UNION SELECT name FROM actor",
        )
        .unwrap();
        assert_eq!(
            c.where_predicates,
            set(&["singer.age > (SELECT avg(singer.age) FROM singer)"])
        );
        assert!(matches!(c.compound, Some((SetOperator::Union, _))));
        assert!(matches!(
            parse_clauses("SELECT a FROM t UNION SELECT a FROM u EXCEPT SELECT a FROM v"),
            Err(Error::UnsupportedSql(_))
        ));
    }

    #[test]
    fn unsupported_constructs_are_named() {
        for (sql, construct) in [
            ("WITH x AS (SELECT 1) SELECT * FROM x", "WITH"),
            ("SELECT rank() OVER (ORDER BY a) FROM t", "window function"),
            ("SELECT a FROM t JOIN u USING (id)", "JOIN ... USING"),
        ] {
            match parse_clauses(sql) {
                Err(Error::UnsupportedSql(c)) => assert_eq!(c, construct),
                other => panic!("{sql}: {other:?}"),
            }
        }
        assert!(parse_clauses("DELETE FROM t").is_err());
        assert!(parse_clauses("SELECT a FROM t; DROP TABLE t").is_err());
    }

    #[test]
    fn canonical_rendering_is_a_fixed_point() {
        for sql in [
            "SELECT count(*) FROM singer",
            "SELECT DISTINCT T1.name, T2.title FROM singer AS T1 JOIN song AS T2 ON T2.singer_id = T1.singer_id WHERE T1.age BETWEEN 20 AND 30 ORDER BY T1.name DESC LIMIT 3",
            "SELECT country, count(*) FROM singer GROUP BY country HAVING count(*) > 1",
            "SELECT name FROM singer WHERE singer_id NOT IN (SELECT singer_id FROM song) INTERSECT SELECT name FROM singer WHERE age < 40",
            "SELECT a FROM (SELECT a FROM t WHERE b = 1) AS s",
        ] {
            let c = parse_clauses(sql).unwrap();
            let again = parse_clauses(&c.to_string()).unwrap();
            assert_eq!(again, c, "{sql}\n{c}");
        }
    }

    #[test]
    fn top_level_order_by() {
        assert!(has_top_level_order_by("SELECT a FROM t ORDER BY a"));
        assert!(!has_top_level_order_by("SELECT a FROM (SELECT a FROM t ORDER BY a)"));
        assert!(!has_top_level_order_by("SELECT 'order by' FROM t"));
    }
}
