//! Question tokens, tokenization and entity-to-placeholder substitution.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Token {
    Word(String),
    /// Stands for the grounded entity of the given triple; unindexed inside
    /// sub-questions.
    Placeholder(Option<usize>),
}

impl Token {
    pub fn word(s: &str) -> Self {
        Token::Word(s.into())
    }

    pub fn is_placeholder(&self) -> bool {
        matches!(self, Token::Placeholder(_))
    }

    /// `PH3` / `PH` for placeholders, the word otherwise.
    pub fn surface(&self) -> String {
        match self {
            Token::Word(w) => w.clone(),
            Token::Placeholder(Some(k)) => format!("PH{k}"),
            Token::Placeholder(None) => "PH".into(),
        }
    }

    /// Inverse of [`Token::surface`].
    pub fn parse(s: &str) -> Self {
        if s == "PH" {
            return Token::Placeholder(None);
        }
        if let Some(rest) = s.strip_prefix("PH") {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                if let Ok(k) = rest.parse() {
                    return Token::Placeholder(Some(k));
                }
            }
        }
        Token::Word(s.into())
    }

    /// The same token with any placeholder index dropped.
    pub fn unindexed(&self) -> Self {
        match self {
            Token::Placeholder(_) => Token::Placeholder(None),
            w => w.clone(),
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface())
    }
}

pub type TokenSequence = Vec<Token>;

pub fn surfaces(tokens: &[Token]) -> Vec<String> {
    tokens.iter().map(Token::surface).collect()
}

pub fn parse_tokens<S: AsRef<str>>(items: &[S]) -> TokenSequence {
    items.iter().map(|s| Token::parse(s.as_ref())).collect()
}

pub fn to_words(items: &[&str]) -> TokenSequence {
    items.iter().map(|s| Token::word(s)).collect()
}

const PUNCT: &[char] = &['?', '!', '.', ',', ';', ':', '"', '(', ')'];

/// Lowercases, splits on whitespace, peels leading and trailing punctuation
/// into their own tokens and splits a trailing `'s`.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.to_lowercase().split_whitespace() {
        let mut word = chunk;
        while let Some(c) = word.chars().next().filter(|c| PUNCT.contains(c)) {
            out.push(c.to_string());
            word = &word[c.len_utf8()..];
        }
        let mut tail = Vec::new();
        while let Some(c) = word.chars().last().filter(|c| PUNCT.contains(c)) {
            tail.push(c.to_string());
            word = &word[..word.len() - c.len_utf8()];
        }
        if let Some(stem) = word.strip_suffix("'s").filter(|s| !s.is_empty()) {
            out.push(stem.to_string());
            out.push("'s".into());
        } else if !word.is_empty() {
            out.push(word.to_string());
        }
        out.extend(tail.into_iter().rev());
    }
    out
}

/// Result of [`replace_entities`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replaced {
    pub tokens: TokenSequence,
    /// Entity indices whose name could not be found.
    pub unmatched: Vec<usize>,
}

/// Replaces entity mentions with indexed placeholders.
///
/// Entities are processed longest name first. Each one replaces the longest
/// contiguous run of its name tokens found among the remaining words
/// (earliest on ties); names with no overlap are reported as unmatched.
pub fn replace_entities(question: &str, entities: &[(usize, &str)]) -> Replaced {
    let mut tokens: TokenSequence = tokenize(question).into_iter().map(Token::Word).collect();
    let mut order: Vec<(usize, Vec<String>)> = entities
        .iter()
        .map(|&(k, name)| (k, tokenize(name)))
        .collect();
    // Stable: equal lengths keep input order.
    order.sort_by(|a, b| b.1.len().cmp(&a.1.len()));
    let mut unmatched = Vec::new();
    for (k, name) in order {
        match longest_span(&tokens, &name) {
            Some((start, len)) => {
                tokens.splice(start..start + len, [Token::Placeholder(Some(k))]);
            }
            None => unmatched.push(k),
        }
    }
    unmatched.sort_unstable();
    Replaced { tokens, unmatched }
}

/// Longest run of question words equal to a contiguous slice of `name`;
/// ties go to the earliest question position.
fn longest_span(tokens: &[Token], name: &[String]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for i in 0..tokens.len() {
        for j in 0..name.len() {
            let mut len = 0;
            while i + len < tokens.len()
                && j + len < name.len()
                && matches!(&tokens[i + len], Token::Word(w) if *w == name[j + len])
            {
                len += 1;
            }
            if len > 0 && best.map_or(true, |(_, l)| len > l) {
                best = Some((i, len));
            }
        }
    }
    best
}
