//! Recursive-descent parser for the mini-language front end.
//!
//! ```text
//! program := stmt+
//! stmt    := decl | assign | if | while | for | block | exprstmt
//! decl    := type IDENT ["=" expr] ";"
//! assign  := IDENT "=" expr ";"
//! if      := "if" "(" expr ")" stmt ["else" stmt]
//! while   := "while" "(" expr ")" stmt
//! for     := "for" "(" [decl | assign] expr ";" [IDENT "=" expr] ")" stmt
//! block   := "{" stmt* "}"
//! expr    := binary over || && == != < > <= >= + - * /, prefix ! and -,
//!            IDENT "(" args ")", IDENT, INT, STRING, "(" expr ")"
//! ```
//!
//! Comments, punctuation and delimiters never reach the tree.

use super::{normalize_labels, AstTree};
use crate::error::{Error, Result};

pub const TYPE_KEYWORDS: &[&str] = &[
    "int", "long", "short", "byte", "float", "double", "boolean", "char", "String", "var",
];

const KEYWORDS: &[&str] = &["if", "else", "while", "for"];

const MAX_NESTING: usize = 256;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

const PUNCTS: &[&str] = &[
    "||", "&&", "==", "!=", "<=", ">=", "<", ">", "+", "-", "*", "/", "!", "=", "(", ")", "{",
    "}", ";", ",",
];

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(source: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && next == Some('/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && next == Some('*') {
            let (l, cl) = (line, col);
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(syntax(l, cl, "unterminated block comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }

        let (start_line, start_col) = (line, col);
        let start = i;
        let tok = if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if c.is_ascii_digit() {
            lex_number(&chars, &mut i);
            col += i - start;
            Tok::Number(chars[start..i].iter().collect())
        } else if c == '"' {
            bump!();
            loop {
                match chars.get(i) {
                    None | Some('\n') => {
                        return Err(syntax(start_line, start_col, "unterminated string literal"))
                    }
                    Some('"') => {
                        bump!();
                        break;
                    }
                    Some('\\') => {
                        bump!();
                        if i < chars.len() {
                            bump!();
                        }
                    }
                    Some(_) => bump!(),
                }
            }
            Tok::Str(chars[start..i].iter().collect())
        } else {
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
                Some(p) => {
                    for _ in 0..p.len() {
                        bump!();
                    }
                    Tok::Punct(p)
                }
                None => {
                    return Err(syntax(start_line, start_col, format!("unexpected character '{c}'")))
                }
            }
        };
        out.push(Token {
            tok,
            line: start_line,
            column: start_col,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

// Integer, hexadecimal, real and exponent forms with an optional type suffix.
fn lex_number(chars: &[char], i: &mut usize) {
    let at = |k: usize| chars.get(k).copied().unwrap_or('\0');
    if at(*i) == '0' && matches!(at(*i + 1), 'x' | 'X') && at(*i + 2).is_ascii_hexdigit() {
        *i += 2;
        while at(*i).is_ascii_hexdigit() {
            *i += 1;
        }
    } else {
        while at(*i).is_ascii_digit() {
            *i += 1;
        }
        if at(*i) == '.' && at(*i + 1).is_ascii_digit() {
            *i += 1;
            while at(*i).is_ascii_digit() {
                *i += 1;
            }
        }
        if matches!(at(*i), 'e' | 'E') {
            let mut k = *i + 1;
            if matches!(at(k), '+' | '-') {
                k += 1;
            }
            if at(k).is_ascii_digit() {
                *i = k;
                while at(*i).is_ascii_digit() {
                    *i += 1;
                }
            }
        }
    }
    if matches!(at(*i), 'l' | 'L' | 'f' | 'F' | 'd' | 'D') {
        *i += 1;
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    nesting: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let k = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[k].tok
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>) -> Error {
        let t = &self.tokens[self.pos];
        let found = match &t.tok {
            Tok::Ident(s) | Tok::Number(s) | Tok::Str(s) => format!("'{s}'"),
            Tok::Punct(p) => format!("'{p}'"),
            Tok::Eof => "end of input".to_string(),
        };
        syntax(t.line, t.column, format!("{}, found {found}", message.into()))
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_punct(&mut self, p: &str) -> Result<()> {
        if self.is_punct(p) {
            self.advance();
            Ok(())
        } else {
            Err(self.error_here(format!("expected '{p}'")))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<()> {
        if self.is_keyword(kw) {
            self.advance();
            Ok(())
        } else {
            Err(self.error_here(format!("expected '{kw}'")))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Tok::Ident(s) if !is_reserved(s) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => Err(self.error_here("expected identifier")),
        }
    }

    fn enter(&mut self) -> Result<()> {
        self.nesting += 1;
        if self.nesting > MAX_NESTING {
            return Err(self.error_here(format!("nesting deeper than {MAX_NESTING}")));
        }
        Ok(())
    }

    fn program(&mut self) -> Result<AstTree> {
        if matches!(self.peek(), Tok::Eof) {
            return Err(self.error_here("empty program"));
        }
        let mut stmts = Vec::new();
        while !matches!(self.peek(), Tok::Eof) {
            stmts.push(self.stmt()?);
        }
        Ok(AstTree::node("CompilationUnit", stmts))
    }

    fn stmt(&mut self) -> Result<AstTree> {
        self.enter()?;
        let s = match self.peek().clone() {
            Tok::Punct("{") => self.block(),
            Tok::Ident(kw) if kw == "if" => self.if_stmt(),
            Tok::Ident(kw) if kw == "while" => self.while_stmt(),
            Tok::Ident(kw) if kw == "for" => self.for_stmt(),
            Tok::Ident(t) if is_type(&t) => self.decl(),
            Tok::Ident(_) if self.starts_assign() => self.assign(true),
            _ => {
                let e = self.expr()?;
                self.expect_punct(";")?;
                Ok(AstTree::node("ExprStmt", vec![e]))
            }
        };
        self.nesting -= 1;
        s
    }

    fn starts_assign(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if !is_reserved(s))
            && matches!(self.peek_at(1), Tok::Punct("="))
    }

    fn block(&mut self) -> Result<AstTree> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if matches!(self.peek(), Tok::Eof) {
                return Err(self.error_here("expected '}'"));
            }
            stmts.push(self.stmt()?);
        }
        self.advance();
        Ok(AstTree::node("BlockStmt", stmts))
    }

    fn decl(&mut self) -> Result<AstTree> {
        let ty = match self.advance().tok {
            Tok::Ident(t) => t,
            _ => unreachable!("decl starts at a type keyword"),
        };
        let name = self.ident()?;
        let mut children = vec![AstTree::leaf(ty), AstTree::leaf(name)];
        if self.is_punct("=") {
            self.advance();
            children.push(self.expr()?);
        }
        self.expect_punct(";")?;
        Ok(AstTree::node("VariableDeclaration", children))
    }

    fn assign(&mut self, terminated: bool) -> Result<AstTree> {
        let name = self.ident()?;
        self.expect_punct("=")?;
        let value = self.expr()?;
        if terminated {
            self.expect_punct(";")?;
        }
        Ok(AstTree::node("AssignStmt", vec![AstTree::leaf(name), value]))
    }

    fn condition(&mut self) -> Result<AstTree> {
        self.expect_punct("(")?;
        let c = self.expr()?;
        self.expect_punct(")")?;
        Ok(c)
    }

    fn if_stmt(&mut self) -> Result<AstTree> {
        self.expect_keyword("if")?;
        let mut children = vec![self.condition()?, self.stmt()?];
        if self.is_keyword("else") {
            self.advance();
            children.push(self.stmt()?);
        }
        Ok(AstTree::node("IfStmt", children))
    }

    fn while_stmt(&mut self) -> Result<AstTree> {
        self.expect_keyword("while")?;
        let cond = self.condition()?;
        let body = self.stmt()?;
        Ok(AstTree::node("WhileStmt", vec![cond, body]))
    }

    fn for_stmt(&mut self) -> Result<AstTree> {
        self.expect_keyword("for")?;
        self.expect_punct("(")?;
        let mut children = Vec::new();
        match self.peek().clone() {
            Tok::Ident(t) if is_type(&t) => children.push(self.decl()?),
            Tok::Ident(_) if self.starts_assign() => children.push(self.assign(true)?),
            // Empty initializer written C-style.
            Tok::Punct(";") => {
                self.advance();
            }
            _ => {}
        }
        children.push(self.expr()?);
        self.expect_punct(";")?;
        if !self.is_punct(")") {
            children.push(self.assign(false)?);
        }
        self.expect_punct(")")?;
        children.push(self.stmt()?);
        Ok(AstTree::node("ForStmt", children))
    }

    fn expr(&mut self) -> Result<AstTree> {
        self.binary(0)
    }

    fn binary(&mut self, level: usize) -> Result<AstTree> {
        const LEVELS: &[&[&str]] = &[
            &["||"],
            &["&&"],
            &["==", "!="],
            &["<", ">", "<=", ">="],
            &["+", "-"],
            &["*", "/"],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        while let Tok::Punct(p) = *self.peek() {
            if !LEVELS[level].contains(&p) {
                break;
            }
            self.advance();
            let rhs = self.binary(level + 1)?;
            lhs = AstTree::node(p, vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<AstTree> {
        if let Tok::Punct(p @ ("!" | "-")) = *self.peek() {
            self.enter()?;
            self.advance();
            let operand = self.unary()?;
            self.nesting -= 1;
            return Ok(AstTree::node(p, vec![operand]));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<AstTree> {
        match self.peek().clone() {
            Tok::Number(n) => {
                self.advance();
                Ok(AstTree::leaf(n))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(AstTree::leaf(s))
            }
            Tok::Punct("(") => {
                self.enter()?;
                self.advance();
                let e = self.expr()?;
                self.expect_punct(")")?;
                self.nesting -= 1;
                Ok(e)
            }
            Tok::Ident(s) if !is_reserved(&s) => {
                self.advance();
                if self.is_punct("(") {
                    self.advance();
                    let mut children = vec![AstTree::leaf(s)];
                    if !self.is_punct(")") {
                        children.push(self.expr()?);
                        while self.is_punct(",") {
                            self.advance();
                            children.push(self.expr()?);
                        }
                    }
                    self.expect_punct(")")?;
                    Ok(AstTree::node("MethodCallExpr", children))
                } else {
                    Ok(AstTree::leaf(s))
                }
            }
            _ => Err(self.error_here("expected expression")),
        }
    }
}

fn is_type(word: &str) -> bool {
    TYPE_KEYWORDS.contains(&word)
}

fn is_reserved(word: &str) -> bool {
    KEYWORDS.contains(&word) || is_type(word)
}

/// Parses without literal normalization: literal leaves keep their source text.
pub fn parse_mini_raw(source: &str) -> Result<AstTree> {
    let tokens = lex(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        nesting: 0,
    };
    parser.program()
}

/// Parses mini-language source into a normalized AST.
pub fn parse_mini(source: &str) -> Result<AstTree> {
    parse_mini_raw(source).map(normalize_labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(s: &str) -> AstTree {
        AstTree::leaf(s)
    }

    fn node(s: &str, c: Vec<AstTree>) -> AstTree {
        AstTree::node(s, c)
    }

    #[test]
    fn declaration_with_literal() {
        let t = parse_mini("int i = 0;").unwrap();
        assert_eq!(
            t,
            node(
                "CompilationUnit",
                vec![node(
                    "VariableDeclaration",
                    vec![leaf("int"), leaf("i"), leaf("IntegerLiteralExpr")]
                )]
            )
        );
    }

    #[test]
    fn while_loop_shape() {
        let t = parse_mini("while (x < 10) { x = x + 1; }").unwrap();
        let w = &t.children[0];
        assert_eq!(w.label, "WhileStmt");
        let kids: Vec<_> = w.children.iter().map(|c| c.label.as_str()).collect();
        assert_eq!(kids, ["<", "BlockStmt"]);
        assert_eq!(
            w.children[1],
            node(
                "BlockStmt",
                vec![node(
                    "AssignStmt",
                    vec![leaf("x"), node("+", vec![leaf("x"), leaf("IntegerLiteralExpr")])]
                )]
            )
        );
    }

    #[test]
    fn bad_character_reports_line_one() {
        match parse_mini("int i = @;") {
            Err(Error::Syntax { line, column, .. }) => {
                assert_eq!(line, 1);
                assert_eq!(column, 9);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn empty_and_comment_only_inputs_fail() {
        assert!(matches!(parse_mini(""), Err(Error::Syntax { .. })));
        assert!(matches!(parse_mini("  // nothing\n /* here */ "), Err(Error::Syntax { .. })));
    }

    #[test]
    fn comments_and_strings() {
        let src = "// header\nString s = \"Hello World\"; /* gone */\nprint(s, 1.5e3);";
        let t = parse_mini(src).unwrap();
        assert_eq!(t.children.len(), 2);
        assert_eq!(t.children[0].children[2].label, "StringLiteralExpr");
        let call = &t.children[1].children[0];
        assert_eq!(call.label, "MethodCallExpr");
        let labels: Vec<_> = call.children.iter().map(|c| c.label.as_str()).collect();
        assert_eq!(labels, ["print", "s", "DoubleLiteralExpr"]);
    }

    #[test]
    fn precedence_and_unary() {
        let t = parse_mini("y = !a || b && c == 1 + 2 * -3;").unwrap();
        let rhs = &t.children[0].children[1];
        assert_eq!(rhs.label, "||");
        assert_eq!(rhs.children[0], node("!", vec![leaf("a")]));
        let and = &rhs.children[1];
        assert_eq!(and.label, "&&");
        let eq = &and.children[1];
        assert_eq!(eq.label, "==");
        let plus = &eq.children[1];
        assert_eq!(plus.label, "+");
        assert_eq!(plus.children[1].label, "*");
        assert_eq!(plus.children[1].children[1], node("-", vec![leaf("IntegerLiteralExpr")]));
    }

    #[test]
    fn for_and_if_else() {
        let t = parse_mini("for (int i = 0; i < n; i = i + 1) if (i == 2) f(); else { g(i); }").unwrap();
        let f = &t.children[0];
        assert_eq!(f.label, "ForStmt");
        let labels: Vec<_> = f.children.iter().map(|c| c.label.as_str()).collect();
        assert_eq!(labels, ["VariableDeclaration", "<", "AssignStmt", "IfStmt"]);
        assert_eq!(f.children[3].children.len(), 3);
        let bare = parse_mini("for (i < n;) x = 1;").unwrap();
        assert_eq!(bare.children[0].children.len(), 2);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_mini("int x = 1;\nwhile (x < ) {}").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 2, column: 12, .. }), "{err}");
        assert!(parse_mini("if (x) { y = 1;").is_err());
        assert!(parse_mini("s = \"open;").is_err());
        assert!(parse_mini("int while = 2;").is_err());
    }

    #[test]
    fn deterministic() {
        let src = "int a = 3; while (a > 0) { a = a - 1; log(\"tick\"); }";
        assert_eq!(parse_mini(src).unwrap(), parse_mini(src).unwrap());
    }

    #[test]
    fn excessive_nesting_is_an_error_not_a_crash() {
        let src = format!("x = {}1{};", "(".repeat(5000), ")".repeat(5000));
        assert!(matches!(parse_mini(&src), Err(Error::Syntax { .. })));
    }
}
