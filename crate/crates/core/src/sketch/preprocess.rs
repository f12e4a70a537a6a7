//! Lexical pre-pass over sketch text.
//!
//! Sketch authors (and language models) write operator candidates as bare
//! tokens, `arithmetic(a, b, +, *)`, which is not valid JavaScript. This pass
//! quotes such tokens so a standard parser accepts the text, and rewrites
//! C-style declarations such as `for (int i = 0; ...)` to `let`. Every edit is
//! recorded so byte offsets in the rewritten text can be mapped back.

const OP_CHARS: &str = "+-*/%<>=!&|^~?:";
const OP_WORDS: &[&str] = &[
    "typeof", "void", "delete", "in", "instanceof", "and", "or", "not",
];
const C_TYPES: &[&str] = &["int", "float", "double", "long", "char"];
const REGEX_AFTER_WORDS: &[&str] = &[
    "return", "typeof", "case", "do", "else", "in", "of", "new", "delete", "void", "throw",
    "instanceof", "yield", "await",
];

/// Names of expression generator callees, lower-cased.
pub(crate) const EXPRESSION_CALLEES: &[&str] = &["arithmetic", "relation", "logic"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tok {
    Word,
    Punct,
    Open,
    Close,
    Comma,
    Dot,
    Other,
}

#[derive(Debug, Clone, Copy)]
struct Token {
    kind: Tok,
    start: usize,
    end: usize,
}

#[derive(Debug, Clone)]
struct Edit {
    start: usize,
    end: usize,
    replacement: String,
}

/// Rewritten text plus the offset map back to the original.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub text: String,
    // (original start, original end, new start, new end), sorted.
    spans: Vec<(usize, usize, usize, usize)>,
    pub repairs: Vec<String>,
}

impl Preprocessed {
    /// Maps a byte offset in the rewritten text to the original text. Offsets
    /// inside a rewritten region map to that region's start.
    pub fn to_original(&self, offset: usize) -> usize {
        let mut delta: isize = 0;
        for &(os, oe, ns, ne) in &self.spans {
            if offset < ns {
                break;
            }
            if offset < ne {
                return os;
            }
            delta = oe as isize - ne as isize;
        }
        (offset as isize + delta).max(0) as usize
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    tokens: Vec<Token>,
    // true entries mark a `${` opened inside a template literal
    braces: Vec<bool>,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn push(&mut self, kind: Tok, start: usize) {
        self.tokens.push(Token {
            kind,
            start,
            end: self.pos,
        });
    }

    fn regex_allowed(&self) -> bool {
        let Some(prev) = self.tokens.last() else {
            return true;
        };
        let text = &self.src[prev.start..prev.end];
        match prev.kind {
            Tok::Word => REGEX_AFTER_WORDS.contains(&text),
            Tok::Punct | Tok::Comma => true,
            Tok::Open => true,
            Tok::Close => text == "}",
            Tok::Dot | Tok::Other => false,
        }
    }

    /// Skips a string body after its opening quote.
    fn string(&mut self, quote: char) {
        while let Some(c) = self.bump() {
            if c == '\\' {
                self.bump();
            } else if c == quote || c == '\n' {
                break;
            }
        }
    }

    /// Skips a template chunk; stops after the closing backtick or after `${`.
    fn template_chunk(&mut self) {
        while let Some(c) = self.bump() {
            match c {
                '\\' => {
                    self.bump();
                }
                '`' => return,
                '$' if self.peek() == Some('{') => {
                    self.bump();
                    self.braces.push(true);
                    return;
                }
                _ => {}
            }
        }
    }

    fn regex(&mut self) {
        let mut in_class = false;
        while let Some(c) = self.bump() {
            match c {
                '\\' => {
                    self.bump();
                }
                '[' => in_class = true,
                ']' => in_class = false,
                '/' if !in_class => break,
                '\n' => break,
                _ => {}
            }
        }
        while self.peek().is_some_and(is_ident_char) {
            self.bump();
        }
    }

    fn run(mut self) -> Vec<Token> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            if c.is_whitespace() {
                self.bump();
                continue;
            }
            if c == '/' && self.peek_at(1) == Some('/') {
                while self.peek().is_some_and(|c| c != '\n') {
                    self.bump();
                }
                continue;
            }
            if c == '/' && self.peek_at(1) == Some('*') {
                self.pos += 2;
                match self.src[self.pos..].find("*/") {
                    Some(i) => self.pos += i + 2,
                    None => self.pos = self.src.len(),
                }
                continue;
            }
            if c == '\'' || c == '"' {
                self.bump();
                self.string(c);
                self.push(Tok::Other, start);
                continue;
            }
            if c == '`' {
                self.bump();
                self.template_chunk();
                self.push(Tok::Other, start);
                continue;
            }
            if is_ident_start(c) {
                while self.peek().is_some_and(is_ident_char) {
                    self.bump();
                }
                self.push(Tok::Word, start);
                continue;
            }
            if c.is_ascii_digit() || (c == '.' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())) {
                let mut prev = ' ';
                while let Some(d) = self.peek() {
                    let exp_sign = (d == '+' || d == '-') && (prev == 'e' || prev == 'E');
                    if !(is_ident_char(d) || d == '.' || exp_sign) {
                        break;
                    }
                    prev = d;
                    self.bump();
                }
                self.push(Tok::Other, start);
                continue;
            }
            if c == '/' && self.regex_allowed() {
                let rest = self.src[self.pos + 1..].trim_start();
                if !(rest.starts_with(',') || rest.starts_with(')')) {
                    self.bump();
                    self.regex();
                    self.push(Tok::Other, start);
                    continue;
                }
            }
            match c {
                '(' | '[' | '{' => {
                    self.bump();
                    if c == '{' {
                        self.braces.push(false);
                    }
                    self.push(Tok::Open, start);
                }
                ')' | ']' => {
                    self.bump();
                    self.push(Tok::Close, start);
                }
                '}' => {
                    self.bump();
                    if self.braces.pop() == Some(true) {
                        self.template_chunk();
                        self.push(Tok::Other, start);
                    } else {
                        self.push(Tok::Close, start);
                    }
                }
                ',' => {
                    self.bump();
                    self.push(Tok::Comma, start);
                }
                '.' => {
                    self.bump();
                    while self.peek() == Some('.') {
                        self.bump();
                    }
                    self.push(Tok::Dot, start);
                }
                _ if OP_CHARS.contains(c) => {
                    while let Some(d) = self.peek() {
                        if !OP_CHARS.contains(d) {
                            break;
                        }
                        if d == '/' && matches!(self.peek_at(1), Some('/') | Some('*')) {
                            break;
                        }
                        self.bump();
                    }
                    self.push(Tok::Punct, start);
                }
                _ => {
                    self.bump();
                    self.push(Tok::Other, start);
                }
            }
        }
        self.tokens
    }
}

fn tokenize(src: &str) -> Vec<Token> {
    Lexer {
        src,
        pos: 0,
        tokens: Vec::new(),
        braces: Vec::new(),
    }
    .run()
}

/// Splits the argument list whose `(` is at token index `open`. Returns the
/// token index ranges of each argument.
fn split_args(toks: &[Token], open: usize) -> Vec<(usize, usize)> {
    let mut args = Vec::new();
    let mut depth = 0usize;
    let mut arg_start = open + 1;
    for (i, t) in toks.iter().enumerate().skip(open + 1) {
        match t.kind {
            Tok::Open => depth += 1,
            Tok::Close if depth == 0 => {
                if i > arg_start {
                    args.push((arg_start, i));
                }
                return args;
            }
            Tok::Close => depth -= 1,
            Tok::Comma if depth == 0 => {
                args.push((arg_start, i));
                arg_start = i + 1;
            }
            _ => {}
        }
    }
    args
}

/// Applies the pre-pass to `src`.
pub fn preprocess(src: &str) -> Preprocessed {
    let toks = tokenize(src);
    let mut edits: Vec<Edit> = Vec::new();
    let mut repairs = Vec::new();
    let text = |t: &Token| &src[t.start..t.end];

    for (i, t) in toks.iter().enumerate() {
        if t.kind != Tok::Word {
            continue;
        }
        let after_dot = i > 0 && toks[i - 1].kind == Tok::Dot;
        let word = text(t);
        let lower = word.to_ascii_lowercase();

        // C-style typed declaration: `int i = ...`
        if !after_dot
            && C_TYPES.contains(&word)
            && toks.get(i + 1).is_some_and(|n| n.kind == Tok::Word)
            && toks.get(i + 2).is_some_and(|n| text(n) == "=")
        {
            edits.push(Edit {
                start: t.start,
                end: t.end,
                replacement: "let".into(),
            });
            repairs.push(format!("rewrote C-style declaration `{word}` to `let`"));
            continue;
        }

        if after_dot || !EXPRESSION_CALLEES.contains(&lower.as_str()) {
            continue;
        }
        let Some(open) = toks.get(i + 1) else { continue };
        if open.kind != Tok::Open || text(open) != "(" {
            continue;
        }
        for (n, (a, b)) in split_args(&toks, i + 1).into_iter().enumerate() {
            if n < 2 || a >= b {
                continue;
            }
            let arg = &toks[a..b];
            let bare_punct = arg.iter().all(|t| t.kind == Tok::Punct);
            let op_word = arg.len() == 1
                && arg[0].kind == Tok::Word
                && OP_WORDS.contains(&text(&arg[0]).to_ascii_lowercase().as_str());
            if bare_punct || op_word {
                let token: String = arg.iter().map(text).collect();
                edits.push(Edit {
                    start: arg[0].start,
                    end: arg[arg.len() - 1].end,
                    replacement: format!("\"{token}\""),
                });
            }
        }
    }

    edits.sort_by_key(|e| e.start);
    let mut out = String::with_capacity(src.len() + edits.len() * 2);
    let mut spans = Vec::new();
    let mut last = 0;
    for e in edits {
        if e.start < last {
            continue;
        }
        out.push_str(&src[last..e.start]);
        let ns = out.len();
        out.push_str(&e.replacement);
        spans.push((e.start, e.end, ns, out.len()));
        last = e.end;
    }
    out.push_str(&src[last..]);
    Preprocessed {
        text: out,
        spans,
        repairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotes_bare_operator_arguments() {
        let p = preprocess("let a = arithmetic(numberLiteral, 2, +, *);");
        assert_eq!(p.text, "let a = arithmetic(numberLiteral, 2, \"+\", \"*\");");
    }

    #[test]
    fn handles_nested_calls_and_multichar_ops() {
        let src = "logic(relation(a, b, <=), relation(c, d, !==), &&, ||)";
        let p = preprocess(src);
        assert_eq!(
            p.text,
            "logic(relation(a, b, \"<=\"), relation(c, d, \"!==\"), \"&&\", \"||\")"
        );
    }

    #[test]
    fn leaves_operands_and_strings_alone() {
        let src = "relation(x - 1, \"+\", ===); f(a, b, +)";
        let p = preprocess(src);
        assert_eq!(p.text, "relation(x - 1, \"+\", \"===\"); f(a, b, +)");
    }

    #[test]
    fn division_operator_is_not_a_regex() {
        let p = preprocess("arithmetic(a, b, /, %)");
        assert_eq!(p.text, "arithmetic(a, b, \"/\", \"%\")");
        let p = preprocess("let r = /a+/g; arithmetic(a, b, -)");
        assert_eq!(p.text, "let r = /a+/g; arithmetic(a, b, \"-\")");
    }

    #[test]
    fn operator_words_are_quoted() {
        let p = preprocess("logic(a, b, AND, OR)\nrelation(k, o, in)");
        assert_eq!(p.text, "logic(a, b, \"AND\", \"OR\")\nrelation(k, o, \"in\")");
    }

    #[test]
    fn rewrites_c_style_loop_declaration() {
        let p = preprocess("for (int i = 0; i < 3; i++) {}");
        assert_eq!(p.text, "for (let i = 0; i < 3; i++) {}");
        assert_eq!(p.repairs.len(), 1);
    }

    #[test]
    fn template_interpolation_is_scanned() {
        let p = preprocess("`v=${arithmetic(a, b, +)}`; // arithmetic(a, b, +)");
        assert_eq!(p.text, "`v=${arithmetic(a, b, \"+\")}`; // arithmetic(a, b, +)");
    }

    #[test]
    fn offsets_map_back() {
        let src = "x(arithmetic(a, b, +), c)";
        let p = preprocess(src);
        let c_new = p.text.find('c').unwrap();
        assert_eq!(p.to_original(c_new), src.find('c').unwrap());
        let plus_new = p.text.find('"').unwrap();
        assert_eq!(p.to_original(plus_new), src.find('+').unwrap());
        assert_eq!(p.to_original(1), 1);
    }
}
