//! Dictionary-driven entity annotation.
//!
//! Matching is leftmost-longest over characters: scanning left to right, the
//! longest dictionary entry starting at the current position wins and
//! scanning resumes after it. Offsets count Unicode scalar values, as in
//! brat standoff files.

use std::collections::HashMap;
use std::fmt::Write;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DictEntry {
    pub surface: String,
    pub kind: String,
}

/// Parses one entry per line, `surface` or `surface<TAB>type`. Blank lines
/// are skipped; the type defaults to `Entity`.
pub fn parse_dictionary(text: &str) -> Vec<DictEntry> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (surface, kind) = l.split_once('\t').unwrap_or((l, "Entity"));
            DictEntry {
                surface: surface.trim().to_string(),
                kind: kind.trim().to_string(),
            }
        })
        .filter(|e| !e.surface.is_empty())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Span {
    /// Character offsets, end exclusive.
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub kind: String,
}

pub struct Matcher {
    entries: HashMap<Vec<char>, String>,
    max_len: usize,
}

impl Matcher {
    /// Later duplicates of a surface string replace earlier ones.
    pub fn new(dictionary: &[DictEntry]) -> Self {
        let mut entries = HashMap::new();
        let mut max_len = 0;
        for e in dictionary {
            let chars: Vec<char> = e.surface.chars().collect();
            if chars.is_empty() {
                continue;
            }
            max_len = max_len.max(chars.len());
            entries.insert(chars, e.kind.clone());
        }
        Matcher { entries, max_len }
    }

    pub fn find(&self, text: &str) -> Vec<Span> {
        let chars: Vec<char> = text.chars().collect();
        let mut spans = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let longest = (1..=self.max_len.min(chars.len() - i))
                .rev()
                .find_map(|len| self.entries.get(&chars[i..i + len]).map(|k| (len, k)));
            match longest {
                Some((len, kind)) => {
                    spans.push(Span {
                        start: i,
                        end: i + len,
                        surface: chars[i..i + len].iter().collect(),
                        kind: kind.clone(),
                    });
                    i += len;
                }
                None => i += 1,
            }
        }
        spans
    }
}

pub fn dict_match(text: &str, dictionary: &[DictEntry]) -> Vec<Span> {
    Matcher::new(dictionary).find(text)
}

/// `T{n}\t{type} {start} {end}\t{surface}` lines, numbered from `first_id`.
pub fn to_standoff(spans: &[Span], first_id: usize) -> String {
    let mut out = String::new();
    for (n, s) in spans.iter().enumerate() {
        writeln!(
            out,
            "T{}\t{} {} {}\t{}",
            first_id + n,
            s.kind,
            s.start,
            s.end,
            s.surface
        )
        .expect("string write");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entries(words: &[&str]) -> Vec<DictEntry> {
        words
            .iter()
            .map(|w| DictEntry {
                surface: w.to_string(),
                kind: "Entity".into(),
            })
            .collect()
    }

    #[test]
    fn empty_dictionary_matches_nothing() {
        assert!(dict_match("白杨树下", &[]).is_empty());
    }

    #[test]
    fn longest_entry_wins() {
        let spans = dict_match("路边的白杨树很高", &entries(&["白杨树", "树"]));
        assert_eq!(spans.len(), 1);
        assert_eq!(
            (spans[0].start, spans[0].end, spans[0].surface.as_str()),
            (3, 6, "白杨树")
        );
        assert_eq!(to_standoff(&spans, 1), "T1\tEntity 3 6\t白杨树\n");
    }

    #[test]
    fn dictionary_lines() {
        let d = parse_dictionary("tree\nriver\tPlace\n\n");
        assert_eq!(d.len(), 2);
        assert_eq!(d[1].kind, "Place");
    }
}
