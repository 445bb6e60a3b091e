//! Symbol tables for words, entity types and predicates.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::kg::QueryGraph;
use crate::text::Token;

pub const BOS: usize = 0;
pub const EOS: usize = 1;
pub const UNK: usize = 2;
pub const DELIM: usize = 3;
pub const PH: usize = 4;

const RESERVED: [&str; 5] = ["<bos>", "<eos>", "<unk>", "<d>", "<ph>"];

/// A string ↔ id table; ids are assigned in sorted order after any
/// reserved entries. Unknown strings map to the `unk` id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolTable {
    symbols: Vec<String>,
    index: BTreeMap<String, usize>,
    unk: usize,
}

impl SymbolTable {
    pub fn new<I, S>(reserved: &[&str], unk: usize, items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut symbols: Vec<String> = reserved.iter().map(|s| String::from(*s)).collect();
        let extra: BTreeSet<String> = items.into_iter().map(Into::into).collect();
        symbols.extend(extra.into_iter().filter(|s| !reserved.contains(&s.as_str())));
        Self::from_symbols(symbols, unk)
    }

    /// Rebuilds a table from its exact symbol list.
    pub fn from_symbols(symbols: Vec<String>, unk: usize) -> Self {
        let index = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        SymbolTable {
            symbols,
            index,
            unk,
        }
    }

    pub fn id(&self, s: &str) -> usize {
        self.index.get(s).copied().unwrap_or(self.unk)
    }

    pub fn contains(&self, s: &str) -> bool {
        self.index.contains_key(s)
    }

    pub fn symbol(&self, id: usize) -> &str {
        &self.symbols[id]
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// All lookup tables a model needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureTables {
    /// Question words and name tokens; reserved ids `BOS..=PH` come first.
    pub words: SymbolTable,
    pub entity_types: SymbolTable,
    /// Forward predicates `p` and inverse predicates `^p`.
    pub predicates: SymbolTable,
}

pub const ROLE_COUNT: usize = 3;

impl FeatureTables {
    /// Builds tables from graphs plus any token sequences (references and
    /// sub-questions) that should be in the word vocabulary.
    pub fn build<'a, G, Q>(graphs: G, questions: Q) -> Self
    where
        G: IntoIterator<Item = &'a QueryGraph>,
        Q: IntoIterator<Item = &'a [Token]>,
    {
        let mut words = BTreeSet::new();
        let mut types = BTreeSet::new();
        let mut preds = BTreeSet::new();
        for g in graphs {
            for n in &g.nodes {
                types.insert(n.entity_type.clone());
                words.extend(n.type_name.iter().cloned());
            }
            for t in &g.triples {
                preds.insert(t.predicate.clone());
                preds.insert(inverse(&t.predicate));
                words.extend(t.predicate_name.iter().cloned());
                words.extend(t.inverse_name.iter().cloned());
            }
        }
        for q in questions {
            for tok in q {
                if let Token::Word(w) = tok {
                    words.insert(w.clone());
                }
            }
        }
        FeatureTables {
            words: SymbolTable::new(&RESERVED, UNK, words),
            entity_types: SymbolTable::new(&["<unk>"], 0, types),
            predicates: SymbolTable::new(&["<unk>"], 0, preds),
        }
    }

    /// Id fed to the model for an input token.
    pub fn input_id(&self, tok: &Token) -> usize {
        match tok {
            Token::Word(w) => self.words.id(w),
            Token::Placeholder(_) => PH,
        }
    }

    /// Words the decoder may emit: everything but BOS, DELIM and PH.
    pub fn output_mask(&self) -> Vec<bool> {
        (0..self.words.len())
            .map(|i| !matches!(i, BOS | DELIM | PH))
            .collect()
    }
}

/// Symbol of the inverse direction of a predicate.
pub fn inverse(p: &str) -> String {
    let mut s = String::from("^");
    s.push_str(p);
    s
}
