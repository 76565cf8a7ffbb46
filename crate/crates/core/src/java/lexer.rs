use super::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(String),
    Float(String),
    Str(String),
    Char(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

// Longest first. `>` is never merged with a following `>` so that nested
// generic closers lex cleanly; the parser reassembles shift operators.
const PUNCT: &[&str] = &[
    "<<=", "...", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", ">=", "+=", "-=", "*=",
    "/=", "%=", "&=", "|=", "^=", "<<", "(", ")", "{", "}", "[", "]", ";", ",", ".", "@", "=",
    ">", "<", "!", "~", "?", ":", "+", "-", "*", "/", "&", "|", "^", "%",
];

pub fn tokenize(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;

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
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let (l0, c0) = (line, col);
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(SyntaxError::new(l0, c0, "unterminated comment"));
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
        let (tl, tc) = (line, col);
        if c.is_alphabetic() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            out.push(Token { tok: Tok::Ident(word), line: tl, col: tc });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            let mut float = false;
            if c == '0' && matches!(chars.get(i + 1), Some('x' | 'X' | 'b' | 'B')) {
                bump!();
                bump!();
                while i < chars.len() && (chars[i].is_ascii_hexdigit() || chars[i] == '_') {
                    bump!();
                }
            } else {
                while i < chars.len() {
                    let d = chars[i];
                    if d.is_ascii_digit() || d == '_' {
                        bump!();
                    } else if d == '.' && chars.get(i + 1).map_or(true, |n| n.is_ascii_digit() || !n.is_alphabetic()) && !float {
                        // `1.` and `1.5` are floats; `1..` never occurs in Java.
                        float = true;
                        bump!();
                    } else if (d == 'e' || d == 'E')
                        && chars
                            .get(i + 1)
                            .is_some_and(|n| n.is_ascii_digit() || *n == '+' || *n == '-')
                    {
                        float = true;
                        bump!();
                        bump!();
                    } else {
                        break;
                    }
                }
            }
            if i < chars.len() && matches!(chars[i], 'l' | 'L' | 'f' | 'F' | 'd' | 'D') {
                float |= matches!(chars[i], 'f' | 'F' | 'd' | 'D');
                bump!();
            }
            let lit: String = chars[start..i].iter().collect();
            let tok = if float { Tok::Float(lit) } else { Tok::Int(lit) };
            out.push(Token { tok, line: tl, col: tc });
            continue;
        }
        if c == '"' {
            if chars.get(i + 1) == Some(&'"') && chars.get(i + 2) == Some(&'"') {
                bump!();
                bump!();
                bump!();
                let start = i;
                loop {
                    if i >= chars.len() {
                        return Err(SyntaxError::new(tl, tc, "unterminated text block"));
                    }
                    if chars[i] == '\\' {
                        bump!();
                        if i < chars.len() {
                            bump!();
                        }
                        continue;
                    }
                    if chars[i] == '"' && chars.get(i + 1) == Some(&'"') && chars.get(i + 2) == Some(&'"') {
                        break;
                    }
                    bump!();
                }
                let body: String = chars[start..i].iter().collect();
                bump!();
                bump!();
                bump!();
                out.push(Token { tok: Tok::Str(body), line: tl, col: tc });
                continue;
            }
            let start = i;
            let body = quoted(&chars, &mut i, '"')
                .ok_or_else(|| SyntaxError::new(tl, tc, "unterminated string literal"))?;
            col += (i - start) as u32;
            out.push(Token { tok: Tok::Str(body), line: tl, col: tc });
            continue;
        }
        if c == '\'' {
            let start = i;
            let body = quoted(&chars, &mut i, '\'')
                .ok_or_else(|| SyntaxError::new(tl, tc, "unterminated character literal"))?;
            col += (i - start) as u32;
            out.push(Token { tok: Tok::Char(body), line: tl, col: tc });
            continue;
        }
        let rest = &chars[i..];
        let Some(p) = PUNCT.iter().find(|p| {
            let pc: Vec<char> = p.chars().collect();
            rest.len() >= pc.len() && rest[..pc.len()] == pc[..]
        }) else {
            return Err(SyntaxError::new(tl, tc, format!("unexpected character `{c}`")));
        };
        for _ in 0..p.len() {
            bump!();
        }
        out.push(Token { tok: Tok::Punct(p), line: tl, col: tc });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

// Advances `i` past the closing quote; literals never span lines.
fn quoted(chars: &[char], i: &mut usize, q: char) -> Option<String> {
    let mut j = *i + 1;
    let mut body = String::new();
    while j < chars.len() {
        match chars[j] {
            '\\' => {
                body.push('\\');
                if let Some(&n) = chars.get(j + 1) {
                    body.push(n);
                }
                j += 2;
            }
            '\n' => return None,
            c if c == q => {
                *i = j + 1;
                return Some(body);
            }
            c => {
                body.push(c);
                j += 1;
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<Tok> {
        tokenize(text).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn basic_tokens() {
        let toks = kinds("int x = 0x1F + 2.5f; // c\n s = \"a\\\"b\";");
        assert_eq!(toks[0], Tok::Ident("int".into()));
        assert_eq!(toks[3], Tok::Int("0x1F".into()));
        assert_eq!(toks[5], Tok::Float("2.5f".into()));
        assert!(toks.contains(&Tok::Str("a\\\"b".into())));
    }

    #[test]
    fn generic_closers_stay_split() {
        let toks = kinds("List<List<String>> a;");
        let gts = toks.iter().filter(|t| **t == Tok::Punct(">")).count();
        assert_eq!(gts, 2);
    }

    #[test]
    fn positions_track_lines() {
        let toks = tokenize("a\n  /* x\n */ b \"s\" c").unwrap();
        assert_eq!((toks[0].line, toks[0].col), (1, 1));
        assert_eq!((toks[1].line, toks[1].col), (3, 5));
        assert_eq!((toks[3].line, toks[3].col), (3, 11));
    }

    #[test]
    fn unterminated_string_is_an_error() {
        let err = tokenize("x = \"abc\n;").unwrap_err();
        assert_eq!(err.line, 1);
    }
}
