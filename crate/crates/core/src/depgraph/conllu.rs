//! Reading and writing CoNLL-U blocks.
//!
//! Only ID, FORM, UPOS, HEAD and DEPREL are interpreted; the other five
//! columns ride along untouched. Comment lines, multi-word token ranges
//! (`3-4`) and empty nodes (`5.1`) are skipped.

use std::fmt::Write as _;

use thiserror::Error;

use super::{DependencyTree, OpaqueColumns, Token, TreeError};

/// A parse failure, located by 1-based sentence ordinal and file line.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ConlluError {
    #[error("sentence {sentence}, line {line}: malformed line: {reason}")]
    MalformedLine {
        sentence: usize,
        line: usize,
        reason: String,
    },
    #[error("sentence {sentence}, line {line}: tokens {first} and {second} both have head 0")]
    MultipleRoots {
        sentence: usize,
        line: usize,
        first: usize,
        second: usize,
    },
    #[error("sentence {sentence}, line {line}: no token has head 0")]
    NoRoot { sentence: usize, line: usize },
    #[error("sentence {sentence}, line {line}: head chain from token {token} is cyclic")]
    CycleDetected { sentence: usize, line: usize, token: usize },
    #[error("sentence {sentence}, line {line}: head {head} of token {token} is outside 0..={len}")]
    HeadOutOfRange {
        sentence: usize,
        line: usize,
        token: usize,
        head: usize,
        len: usize,
    },
}

impl ConlluError {
    pub fn line(&self) -> usize {
        match *self {
            ConlluError::MalformedLine { line, .. }
            | ConlluError::MultipleRoots { line, .. }
            | ConlluError::NoRoot { line, .. }
            | ConlluError::CycleDetected { line, .. }
            | ConlluError::HeadOutOfRange { line, .. } => line,
        }
    }
}

struct Block {
    first_line: usize,
    tokens: Vec<Token>,
    lines: Vec<usize>,
}

/// Parses every sentence block in `text` into a validated tree.
pub fn parse_conllu(text: &str) -> Result<Vec<DependencyTree>, ConlluError> {
    let mut trees = Vec::new();
    let mut block: Option<Block> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            if let Some(b) = block.take() {
                trees.push(finish(b, trees.len() + 1)?);
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let sentence = trees.len() + 1;
        let b = block.get_or_insert_with(|| Block {
            first_line: lineno,
            tokens: Vec::new(),
            lines: Vec::new(),
        });
        if let Some(tok) = parse_token_line(line, sentence, lineno)? {
            b.tokens.push(tok);
            b.lines.push(lineno);
        }
    }
    if let Some(b) = block.take() {
        trees.push(finish(b, trees.len() + 1)?);
    }
    Ok(trees)
}

fn parse_token_line(line: &str, sentence: usize, lineno: usize) -> Result<Option<Token>, ConlluError> {
    let cols: Vec<&str> = if line.contains('\t') {
        line.split('\t').collect()
    } else {
        line.split_whitespace().collect()
    };
    let malformed = |reason: String| ConlluError::MalformedLine {
        sentence,
        line: lineno,
        reason,
    };
    if cols.len() != 10 {
        return Err(malformed(format!("expected 10 columns, found {}", cols.len())));
    }
    if cols[0].contains('-') || cols[0].contains('.') {
        return Ok(None);
    }
    let index: usize = cols[0]
        .parse()
        .map_err(|_| malformed(format!("ID {:?} is not a positive integer", cols[0])))?;
    if index == 0 {
        return Err(malformed("ID must be at least 1".into()));
    }
    let head: usize = cols[6]
        .parse()
        .map_err(|_| malformed(format!("HEAD {:?} is not an integer", cols[6])))?;
    Ok(Some(Token {
        index,
        form: cols[1].to_string(),
        pos: cols[3].to_string(),
        head,
        deprel: cols[7].to_string(),
        extra: OpaqueColumns {
            lemma: cols[2].to_string(),
            xpos: cols[4].to_string(),
            feats: cols[5].to_string(),
            deps: cols[8].to_string(),
            misc: cols[9].to_string(),
        },
    }))
}

fn finish(block: Block, sentence: usize) -> Result<DependencyTree, ConlluError> {
    let line_of = |token: usize| {
        block
            .tokens
            .iter()
            .position(|t| t.index == token)
            .map(|p| block.lines[p])
            .unwrap_or(block.first_line)
    };
    if block.tokens.is_empty() {
        return Err(ConlluError::MalformedLine {
            sentence,
            line: block.first_line,
            reason: "sentence block has no token lines".into(),
        });
    }
    let lines = block.lines.clone();
    DependencyTree::new(block.tokens.clone()).map_err(|e| match e {
        TreeError::Empty => unreachable!("checked above"),
        TreeError::NonContiguous { expected, found } => ConlluError::MalformedLine {
            sentence,
            line: lines[expected - 1],
            reason: format!("expected token ID {expected}, found {found}"),
        },
        TreeError::MultipleRoots { first, second } => ConlluError::MultipleRoots {
            sentence,
            line: line_of(second),
            first,
            second,
        },
        TreeError::NoRoot => ConlluError::NoRoot {
            sentence,
            line: block.first_line,
        },
        TreeError::CycleDetected { token } => ConlluError::CycleDetected {
            sentence,
            line: line_of(token),
            token,
        },
        TreeError::HeadOutOfRange { token, head, len } => ConlluError::HeadOutOfRange {
            sentence,
            line: line_of(token),
            token,
            head,
            len,
        },
    })
}

/// Writes trees back as CoNLL-U, one blank line after each sentence.
pub fn serialize_conllu(trees: &[DependencyTree]) -> String {
    let mut out = String::new();
    for tree in trees {
        for t in tree.tokens() {
            let x = &t.extra;
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                t.index, t.form, x.lemma, t.pos, x.xpos, x.feats, t.head, t.deprel, x.deps, x.misc
            )
            .unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_sentence() {
        let trees = parse_conllu("1\thi\t_\tINTJ\t_\t_\t0\troot\t_\t_\n").unwrap();
        assert_eq!(trees.len(), 1);
        assert_eq!(trees[0].len(), 1);
        assert_eq!(trees[0].root(), 1);
        assert_eq!(trees[0].token(1).pos, "INTJ");
    }

    #[test]
    fn two_roots_rejected() {
        let text = "1\ta\t_\tX\t_\t_\t0\troot\t_\t_\n2\tb\t_\tX\t_\t_\t0\troot\t_\t_\n";
        assert_eq!(
            parse_conllu(text),
            Err(ConlluError::MultipleRoots {
                sentence: 1,
                line: 2,
                first: 1,
                second: 2
            })
        );
    }

    #[test]
    fn errors_name_sentence_and_line() {
        let good = "1\ta\t_\tX\t_\t_\t0\troot\t_\t_\n";
        let text = format!("# c\n{good}\n{good}2\tb\t_\tX\t_\t_\t7\tdep\t_\t_\n");
        assert_eq!(
            parse_conllu(&text),
            Err(ConlluError::HeadOutOfRange {
                sentence: 2,
                line: 5,
                token: 2,
                head: 7,
                len: 2
            })
        );

        let text = "1\ta\t_\tX\t_\t_\tzero\troot\t_\t_\n";
        assert!(matches!(
            parse_conllu(text),
            Err(ConlluError::MalformedLine {
                sentence: 1,
                line: 1,
                ..
            })
        ));
        let text = "1\ta\t_\tX\t_\t_\t0\troot\t_\n";
        assert!(matches!(parse_conllu(text), Err(ConlluError::MalformedLine { .. })));

        let text = "1\ta\t_\tX\t_\t_\t2\tdep\t_\t_\n2\tb\t_\tX\t_\t_\t1\tdep\t_\t_\n";
        assert_eq!(parse_conllu(text), Err(ConlluError::NoRoot { sentence: 1, line: 1 }));

        let text = "1\ta\t_\tX\t_\t_\t0\troot\t_\t_\n2\tb\t_\tX\t_\t_\t3\tdep\t_\t_\n3\tc\t_\tX\t_\t_\t2\tdep\t_\t_\n";
        assert_eq!(
            parse_conllu(text),
            Err(ConlluError::CycleDetected {
                sentence: 1,
                line: 2,
                token: 2
            })
        );
    }

    #[test]
    fn skips_ranges_and_empty_nodes() {
        let text = "# sent_id = 1\n1-2\tdu\t_\t_\t_\t_\t_\t_\t_\t_\n1\tde\t_\tADP\t_\t_\t2\tcase\t_\t_\n2\tle\t_\tDET\t_\t_\t0\troot\t_\t_\n2.1\tx\t_\tX\t_\t_\t_\t_\t_\t_\n\n\n";
        let trees = parse_conllu(text).unwrap();
        assert_eq!(trees.len(), 1);
        assert_eq!(trees[0].len(), 2);
    }

    #[test]
    fn five_token_fixture_is_acyclic() {
        let heads = [2, 0, 2, 5, 3];
        let text: String = heads
            .iter()
            .enumerate()
            .map(|(i, h)| format!("{}\tw{}\t_\tX\t_\t_\t{}\tdep\t_\t_\n", i + 1, i + 1, h))
            .collect();
        let tree = parse_conllu(&text).unwrap().remove(0);
        for start in 1..=5 {
            let mut cur = start;
            let mut steps = 0;
            while cur != 0 {
                cur = heads[cur - 1];
                steps += 1;
                assert!(steps <= 5);
            }
        }
        assert_eq!(tree.root(), 2);
    }

    #[test]
    fn opaque_columns_survive() {
        let text = "1\tDogs\tdog\tNOUN\tNNS\tNumber=Plur\t2\tnsubj\t2:nsubj\tSpaceAfter=No\n2\tbark\tbark\tVERB\tVBP\t_\t0\troot\t0:root\t_\n\n";
        let trees = parse_conllu(text).unwrap();
        assert_eq!(serialize_conllu(&trees), text);
    }
}
