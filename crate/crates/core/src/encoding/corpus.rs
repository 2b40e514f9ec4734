use alloc::string::String;
use alloc::vec::Vec;

use super::{Pitch, Token};
use crate::error::{invalid, Error, Result};

/// An encoded monophonic melody at sixteenth-note resolution.
///
/// Non-empty, starts with a note and contains no special tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MelodySequence {
    tokens: Vec<Token>,
}

impl MelodySequence {
    /// Sixteenth notes per beat.
    pub const SUBDIVISIONS_PER_BEAT: usize = 4;

    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        match tokens.first() {
            None => return Err(invalid("a melody needs at least one token")),
            Some(Token::Note(_)) => {}
            Some(other) => {
                return Err(invalid(alloc::format!("a melody cannot begin with `{other}`")))
            }
        }
        if let Some(t) = tokens.iter().find(|t| t.is_special()) {
            return Err(invalid(alloc::format!("special token `{t}` inside a melody")));
        }
        Ok(Self { tokens })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn pitches(&self) -> impl Iterator<Item = Pitch> + '_ {
        self.tokens.iter().filter_map(Token::pitch)
    }

    /// Corpus-format line: surfaces joined by single spaces.
    pub fn to_line(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            use core::fmt::Write;
            let _ = write!(out, "{t}");
        }
        out
    }
}

/// Each `(pitch, duration)` becomes the note followed by `duration - 1` holds.
pub fn encode_notes(events: &[(Pitch, u32)]) -> Result<MelodySequence> {
    let mut tokens = Vec::with_capacity(events.iter().map(|e| e.1 as usize).sum());
    for &(pitch, duration) in events {
        if duration == 0 {
            return Err(invalid(alloc::format!("zero duration for {pitch}")));
        }
        tokens.push(Token::Note(pitch));
        tokens.extend(core::iter::repeat_n(Token::Hold, duration as usize - 1));
    }
    MelodySequence::new(tokens)
}

/// Inverse of [`encode_notes`].
pub fn decode_notes(seq: &MelodySequence) -> Vec<(Pitch, u32)> {
    let mut events: Vec<(Pitch, u32)> = Vec::new();
    for t in seq.tokens() {
        match t {
            Token::Note(p) => events.push((*p, 1)),
            Token::Hold => {
                if let Some(last) = events.last_mut() {
                    last.1 += 1;
                }
            }
            _ => unreachable!("melody invariant excludes special tokens"),
        }
    }
    events
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    pub sequences: Vec<MelodySequence>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, sequences: Vec<MelodySequence>) -> Self {
        Self {
            name: name.into(),
            sequences,
        }
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Lowest and highest pitch by MIDI number.
    pub fn pitch_range(&self) -> Option<(Pitch, Pitch)> {
        let mut pitches = self.sequences.iter().flat_map(|s| s.pitches());
        let first = pitches.next()?;
        Some(pitches.fold((first, first), |(lo, hi), p| {
            (
                if p.midi() < lo.midi() { p } else { lo },
                if p.midi() > hi.midi() { p } else { hi },
            )
        }))
    }

    /// One line per sequence, each terminated by `\n`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.sequences {
            out.push_str(&s.to_line());
            out.push('\n');
        }
        out
    }
}

/// Parses the corpus text format: one melody per line, whitespace-separated
/// token surfaces, lines whose first non-blank character is `#` are
/// comments, blank lines are skipped.
pub fn parse_corpus(text: &str, name: &str) -> Result<Corpus> {
    let mut sequences = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = Vec::new();
        for (column, surface) in split_with_columns(line) {
            let err = |message: String| Error::Parse {
                line: line_no + 1,
                column,
                message,
            };
            let token: Token = surface
                .parse()
                .map_err(|_| err(alloc::format!("unknown token `{surface}`")))?;
            if token.is_special() {
                return Err(err(alloc::format!("special token `{surface}` inside a melody")));
            }
            if tokens.is_empty() && token == Token::Hold {
                return Err(err("a melody cannot begin with a hold".into()));
            }
            tokens.push(token);
        }
        sequences.push(MelodySequence { tokens });
    }
    Ok(Corpus::new(name, sequences))
}

/// Whitespace-separated tokens with their 1-based character column.
fn split_with_columns(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut chars = line.char_indices().enumerate().peekable();
    core::iter::from_fn(move || {
        while let Some(&(_, (_, c))) = chars.peek() {
            if !c.is_whitespace() {
                break;
            }
            chars.next();
        }
        let (col, (start, _)) = chars.next()?;
        let mut end = line.len();
        while let Some(&(_, (i, c))) = chars.peek() {
            if c.is_whitespace() {
                end = i;
                break;
            }
            chars.next();
        }
        Some((col + 1, &line[start..end]))
    })
}
