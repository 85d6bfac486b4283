//! Text utilities over guest-language (Python) program sources.

use sha2::{Digest, Sha256};

/// Removes `#` comments that are not inside string literals.
pub fn strip_comments(source: &str) -> String {
    let chars: Vec<char> = source.chars().collect();
    let mut out = String::with_capacity(source.len());
    let mut i = 0;
    // Some((quote, triple)) while inside a string literal
    let mut in_string: Option<(char, bool)> = None;
    while i < chars.len() {
        let c = chars[i];
        match in_string {
            Some((q, triple)) => {
                out.push(c);
                if c == '\\' && i + 1 < chars.len() {
                    out.push(chars[i + 1]);
                    i += 2;
                    continue;
                }
                if c == q {
                    if !triple {
                        in_string = None;
                    } else if chars.get(i + 1) == Some(&q) && chars.get(i + 2) == Some(&q) {
                        out.push(q);
                        out.push(q);
                        i += 2;
                        in_string = None;
                    }
                } else if c == '\n' && !triple {
                    in_string = None;
                }
                i += 1;
            }
            None => {
                if c == '#' {
                    while i < chars.len() && chars[i] != '\n' {
                        i += 1;
                    }
                    continue;
                }
                if c == '\'' || c == '"' {
                    let triple = chars.get(i + 1) == Some(&c) && chars.get(i + 2) == Some(&c);
                    in_string = Some((c, triple));
                    if triple {
                        out.push(c);
                        out.push(c);
                        i += 2;
                    }
                }
                out.push(c);
                i += 1;
            }
        }
    }
    out
}

/// Collapses every whitespace run to one space and trims the ends.
pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Comments stripped, whitespace collapsed.
pub fn normalize(source: &str) -> String {
    collapse_whitespace(&strip_comments(source))
}

/// Hex sha256 of the normalized source; identifies a program for novelty
/// checks and executor tables.
pub fn source_hash(source: &str) -> String {
    sha256_hex(normalize(source).as_bytes())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Number of lexemes: maximal runs of identifier characters, plus every
/// other non-whitespace character on its own. Comments are not counted.
pub fn lexeme_count(source: &str) -> usize {
    let stripped = strip_comments(source);
    let mut count = 0;
    let mut in_ident = false;
    for c in stripped.chars() {
        if c.is_alphanumeric() || c == '_' {
            if !in_ident {
                count += 1;
                in_ident = true;
            }
        } else {
            in_ident = false;
            if !c.is_whitespace() {
                count += 1;
            }
        }
    }
    count
}
