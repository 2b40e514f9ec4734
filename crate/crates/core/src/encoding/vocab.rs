use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use super::{Corpus, MelodySequence, Token};
use crate::error::{Error, Result};

const START_ID: usize = 0;
const END_ID: usize = 1;
const NC_ID: usize = 2;
const HOLD_ID: usize = 3;

/// Dense ids for token surfaces.
///
/// Ids `0..4` are always `START`, `END`, `NC`, `__`; notes follow in pitch
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<Token>,
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    /// Vocabulary over the given notes (other tokens are ignored) plus the
    /// four fixed symbols.
    pub fn from_tokens<I: IntoIterator<Item = Token>>(tokens: I) -> Self {
        let notes: BTreeSet<_> = tokens.into_iter().filter_map(|t| t.pitch()).collect();
        let mut all = alloc::vec![Token::Start, Token::End, Token::NoConstraint, Token::Hold];
        all.extend(notes.into_iter().map(Token::Note));
        let index = all
            .iter()
            .enumerate()
            .map(|(i, t)| (t.surface(), i))
            .collect();
        Self { tokens: all, index }
    }

    pub fn from_corpus(corpus: &Corpus) -> Self {
        Self::from_tokens(
            corpus
                .sequences
                .iter()
                .flat_map(|s| s.tokens().iter().copied()),
        )
    }

    /// Rebuilds a vocabulary from its surfaces in id order; the order must
    /// be the canonical one produced by [`Vocabulary::from_tokens`].
    pub fn from_surfaces<S: AsRef<str>>(surfaces: &[S]) -> Result<Self> {
        let tokens: Vec<Token> = surfaces
            .iter()
            .map(|s| s.as_ref().parse())
            .collect::<Result<_>>()?;
        let vocab = Self::from_tokens(tokens.iter().copied());
        if vocab.tokens != tokens {
            return Err(crate::error::invalid(
                "vocabulary surfaces are not in canonical order",
            ));
        }
        Ok(vocab)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn token(&self, id: usize) -> Token {
        self.tokens[id]
    }

    pub fn surface(&self, id: usize) -> String {
        self.tokens[id].surface()
    }

    pub fn surfaces(&self) -> Vec<String> {
        self.tokens.iter().map(Token::surface).collect()
    }

    pub fn id(&self, token: &Token) -> Option<usize> {
        self.index.get(&token.surface()).copied()
    }

    pub fn lookup(&self, surface: &str) -> Result<usize> {
        self.index
            .get(surface)
            .copied()
            .ok_or_else(|| Error::UnknownToken(surface.into()))
    }

    pub fn start(&self) -> usize {
        START_ID
    }

    pub fn end(&self) -> usize {
        END_ID
    }

    pub fn nc(&self) -> usize {
        NC_ID
    }

    pub fn hold(&self) -> usize {
        HOLD_ID
    }

    pub fn is_special(&self, id: usize) -> bool {
        id < HOLD_ID
    }

    /// Ids of the non-special tokens (HOLD and notes).
    pub fn alphabet(&self) -> Vec<usize> {
        (HOLD_ID..self.len()).collect()
    }

    pub fn encode(&self, seq: &MelodySequence) -> Result<Vec<usize>> {
        seq.tokens()
            .iter()
            .map(|t| self.id(t).ok_or_else(|| Error::UnknownToken(t.surface())))
            .collect()
    }

    /// Surfaces joined by single spaces.
    pub fn render(&self, ids: &[usize]) -> String {
        let mut out = String::new();
        for (i, &id) in ids.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&self.surface(id));
        }
        out
    }

    pub fn contains_corpus(&self, corpus: &Corpus) -> bool {
        corpus
            .sequences
            .iter()
            .all(|s| s.tokens().iter().all(|t| self.id(t).is_some()))
    }
}
