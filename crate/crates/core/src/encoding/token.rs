use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use crate::error::{invalid, Error, Result};

pub const HOLD_SURFACE: &str = "__";
const START_SURFACE: &str = "START";
const END_SURFACE: &str = "END";
const NC_SURFACE: &str = "NC";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    C,
    D,
    E,
    F,
    G,
    A,
    B,
}

impl Letter {
    const ALL: [Letter; 7] = [
        Letter::C,
        Letter::D,
        Letter::E,
        Letter::F,
        Letter::G,
        Letter::A,
        Letter::B,
    ];

    /// Position within the octave, `C = 0 .. B = 6`.
    pub fn step(self) -> i32 {
        self as i32
    }

    pub fn from_step(step: i32) -> Letter {
        Self::ALL[step.rem_euclid(7) as usize]
    }

    /// Semitones above C of the natural note.
    pub fn natural_semitone(self) -> i32 {
        [0, 2, 4, 5, 7, 9, 11][self as usize]
    }

    fn from_char(c: char) -> Option<Letter> {
        Some(match c {
            'C' => Letter::C,
            'D' => Letter::D,
            'E' => Letter::E,
            'F' => Letter::F,
            'G' => Letter::G,
            'A' => Letter::A,
            'B' => Letter::B,
            _ => return None,
        })
    }

    fn as_char(self) -> char {
        ['C', 'D', 'E', 'F', 'G', 'A', 'B'][self as usize]
    }
}

/// A spelled pitch: letter, accidental in `-2..=2` semitones and octave in
/// scientific pitch notation (`C4` is middle C).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pitch {
    letter: Letter,
    accidental: i8,
    octave: i32,
}

impl Pitch {
    pub fn new(letter: Letter, accidental: i8, octave: i32) -> Result<Self> {
        if !(-2..=2).contains(&accidental) {
            return Err(Error::OutOfSpelling(alloc::format!(
                "accidental of {accidental} semitones on {letter:?}"
            )));
        }
        Ok(Self {
            letter,
            accidental,
            octave,
        })
    }

    pub fn letter(&self) -> Letter {
        self.letter
    }

    pub fn accidental(&self) -> i8 {
        self.accidental
    }

    pub fn octave(&self) -> i32 {
        self.octave
    }

    /// MIDI key number (`C4 = 60`). Enharmonic spellings share a number.
    pub fn midi(&self) -> i32 {
        12 * (self.octave + 1) + self.letter.natural_semitone() + self.accidental as i32
    }

    /// Absolute diatonic index: `octave * 7 + letter step`.
    pub fn diatonic_index(&self) -> i32 {
        self.octave * 7 + self.letter.step()
    }
}

impl Ord for Pitch {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        (self.midi(), self.diatonic_index()).cmp(&(other.midi(), other.diatonic_index()))
    }
}

impl PartialOrd for Pitch {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Pitch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter.as_char())?;
        let mark = if self.accidental > 0 { '#' } else { 'b' };
        for _ in 0..self.accidental.unsigned_abs() {
            write!(f, "{mark}")?;
        }
        write!(f, "{}", self.octave)
    }
}

impl FromStr for Pitch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || invalid(alloc::format!("`{s}` is not a note name"));
        let mut chars = s.chars();
        let letter = chars.next().and_then(Letter::from_char).ok_or_else(bad)?;
        let rest = chars.as_str();
        let marks = rest.chars().take_while(|c| *c == '#' || *c == 'b').count();
        let (acc_text, octave_text) = rest.split_at(marks);
        let accidental = match acc_text {
            "" => 0,
            "#" => 1,
            "##" => 2,
            "b" => -1,
            "bb" => -2,
            _ => return Err(bad()),
        };
        let digits = octave_text.strip_prefix('-').unwrap_or(octave_text);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        // Canonical form only: no leading zeros, no "-0".
        if (digits.len() > 1 && digits.starts_with('0')) || octave_text == "-0" {
            return Err(bad());
        }
        let octave: i32 = octave_text.parse().map_err(|_| bad())?;
        Pitch::new(letter, accidental, octave)
    }
}

/// One sixteenth-note step of an encoded melody, or a special symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    Start,
    End,
    NoConstraint,
    Hold,
    Note(Pitch),
}

impl Token {
    /// `START`, `END` and `NC`.
    pub fn is_special(&self) -> bool {
        matches!(self, Token::Start | Token::End | Token::NoConstraint)
    }

    pub fn surface(&self) -> String {
        use alloc::string::ToString;
        self.to_string()
    }

    pub fn pitch(&self) -> Option<Pitch> {
        match self {
            Token::Note(p) => Some(*p),
            _ => None,
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Start => f.write_str(START_SURFACE),
            Token::End => f.write_str(END_SURFACE),
            Token::NoConstraint => f.write_str(NC_SURFACE),
            Token::Hold => f.write_str(HOLD_SURFACE),
            Token::Note(p) => write!(f, "{p}"),
        }
    }
}

impl FromStr for Token {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            START_SURFACE => Token::Start,
            END_SURFACE => Token::End,
            NC_SURFACE => Token::NoConstraint,
            HOLD_SURFACE => Token::Hold,
            _ => Token::Note(s.parse().map_err(|_| Error::UnknownToken(s.into()))?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn parses_and_prints_note_names() {
        for s in ["D4", "F#4", "Bb3", "C##5", "Ebb2", "G-1", "A10"] {
            let p: Pitch = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert_eq!("C4".parse::<Pitch>().unwrap().midi(), 60);
        assert_eq!("B#3".parse::<Pitch>().unwrap().midi(), 60);
        assert_eq!("F#4".parse::<Pitch>().unwrap().midi(), 66);
    }

    #[test]
    fn rejects_non_canonical_names() {
        for s in ["H4", "C", "C#b4", "C###4", "c4", "C04", "C-0", "C4x", "", "#4"] {
            assert!(s.parse::<Pitch>().is_err(), "{s}");
        }
    }

    #[test]
    fn token_surfaces_are_bijective() {
        for s in ["__", "START", "END", "NC", "E4", "Gb5"] {
            let t: Token = s.parse().unwrap();
            assert_eq!(t.to_string(), s);
        }
        assert!(matches!("X9".parse::<Token>(), Err(Error::UnknownToken(_))));
    }
}
