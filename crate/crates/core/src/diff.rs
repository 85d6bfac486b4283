//! SEARCH/REPLACE edit blocks in model responses.

use thiserror::Error;

pub const SEARCH_MARKER: &str = "<<<<<<< SEARCH";
pub const DIVIDER_MARKER: &str = "=======";
pub const REPLACE_MARKER: &str = ">>>>>>> REPLACE";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffBlock {
    pub search: String,
    pub replace: String,
}

impl DiffBlock {
    pub fn new(search: impl Into<String>, replace: impl Into<String>) -> Self {
        DiffBlock {
            search: search.into(),
            replace: replace.into(),
        }
    }

    pub fn reversed(&self) -> DiffBlock {
        DiffBlock::new(self.replace.clone(), self.search.clone())
    }

    pub fn render(&self) -> String {
        format!(
            "{SEARCH_MARKER}\n{}\n{DIVIDER_MARKER}\n{}\n{REPLACE_MARKER}\n",
            self.search, self.replace
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedResponse {
    Diffs(Vec<DiffBlock>),
    FullRewrite(String),
    ParseFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffApplyKind {
    NoMatch,
    AmbiguousMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("{kind:?} for block {block_index}")]
pub struct DiffApplyError {
    pub kind: DiffApplyKind,
    pub block_index: usize,
}

fn is_marker(line: &str, marker: &str) -> bool {
    line.trim_end() == marker
}

/// Extracts edit blocks; falls back to a single fenced program.
pub fn parse_response(text: &str) -> ParsedResponse {
    let lines: Vec<&str> = text.lines().collect();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if !is_marker(lines[i], SEARCH_MARKER) {
            i += 1;
            continue;
        }
        let start = i + 1;
        let Some(div) = (start..lines.len()).find(|&j| is_marker(lines[j], DIVIDER_MARKER)) else {
            break;
        };
        let Some(end) = (div + 1..lines.len()).find(|&j| is_marker(lines[j], REPLACE_MARKER)) else {
            break;
        };
        let search = lines[start..div].join("\n");
        let replace = lines[div + 1..end].join("\n");
        if !search.is_empty() && search != replace {
            blocks.push(DiffBlock { search, replace });
        }
        i = end + 1;
    }
    if !blocks.is_empty() {
        return ParsedResponse::Diffs(blocks);
    }
    let fences = fenced_blocks(&lines);
    match fences.as_slice() {
        [only] if !only.trim().is_empty() => ParsedResponse::FullRewrite(only.clone()),
        _ => ParsedResponse::ParseFailure,
    }
}

fn fenced_blocks(lines: &[&str]) -> Vec<String> {
    let mut out = Vec::new();
    let mut open: Option<Vec<&str>> = None;
    for line in lines {
        let fence = line.trim_start().starts_with("```");
        match (&mut open, fence) {
            (None, true) => open = Some(Vec::new()),
            (Some(body), true) => {
                let mut text = body.join("\n");
                text.push('\n');
                out.push(text);
                open = None;
            }
            (Some(body), false) => body.push(line),
            (None, false) => {}
        }
    }
    out
}

/// Applies blocks in order; each search text must occur exactly once.
pub fn apply_diffs(source: &str, blocks: &[DiffBlock]) -> Result<String, DiffApplyError> {
    let mut current = source.to_string();
    for (block_index, block) in blocks.iter().enumerate() {
        let fail = |kind| DiffApplyError { kind, block_index };
        let hits: Vec<usize> = overlapping_matches(&current, &block.search).take(2).collect();
        let at = match hits.as_slice() {
            [] => return Err(fail(DiffApplyKind::NoMatch)),
            [at] => *at,
            _ => return Err(fail(DiffApplyKind::AmbiguousMatch)),
        };
        current.replace_range(at..at + block.search.len(), &block.replace);
    }
    Ok(current)
}

fn overlapping_matches<'a>(haystack: &'a str, needle: &'a str) -> impl Iterator<Item = usize> + 'a {
    let mut from = 0;
    std::iter::from_fn(move || {
        if needle.is_empty() {
            return None;
        }
        let pos = from + haystack.get(from..)?.find(needle)?;
        from = pos + haystack[pos..].chars().next().map_or(1, char::len_utf8);
        Some(pos)
    })
}
