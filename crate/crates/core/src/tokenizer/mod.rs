//! Tokenizers, collision enumeration and the collision-aware text likelihood.
//!
//! # Vocabulary file format
//!
//! UTF-8 text, one entry per `\n`-terminated line:
//!
//! ```text
//! # comment (only when `#` is the first byte of the line)
//! !name<TAB>toy
//! 1<TAB>a
//! 2<TAB>!=
//! !eos<TAB>3
//! ```
//!
//! * `<id><TAB><word>` declares token `id` (decimal). Ids must be dense in `1..=|vocab|`.
//! * The word is every byte after the first TAB up to the line end. A single
//!   trailing `\r` is dropped, so CRLF files read the same as LF files.
//! * Inside a word `\\`, `\t`, `\n` and `\r` are escapes for backslash, TAB,
//!   LF and CR; any other backslash sequence is an error. Words are nonempty.
//! * `!eos<TAB><id>` declares the end-of-string token, which must not be a
//!   vocabulary id and decodes to the empty string. Exactly one is required.
//! * `!name<TAB><name>` is optional.
//! * Blank lines are ignored.
//!
//! [`TokenizerSpec::to_file_string`] writes the canonical form: the name line,
//! ids in increasing order, then the EOS line.

mod collision;
mod evalplus;
mod trie;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use collision::{get_collision, get_collision_with, CollisionSearch};
pub use evalplus::{eval_plus, eval_plus_ln, seq_ln_prob, EvalPlus, SuffixContext, TokenDist};
pub use trie::PrefixIndex;

pub type TokenId = u32;

/// A token sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(pub Vec<TokenId>);

impl TokenSeq {
    pub fn new(ids: Vec<TokenId>) -> Self {
        Self(ids)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ids(&self) -> &[TokenId] {
        &self.0
    }

    /// Checks that nothing but EOS follows the first EOS.
    pub fn is_well_formed(&self, eos: TokenId) -> bool {
        match self.0.iter().position(|&t| t == eos) {
            Some(i) => self.0[i..].iter().all(|&t| t == eos),
            None => true,
        }
    }

    /// The sequence with any trailing EOS run removed.
    pub fn without_eos(&self, eos: TokenId) -> TokenSeq {
        let end = self.0.iter().position(|&t| t == eos).unwrap_or(self.0.len());
        TokenSeq(self.0[..end].to_vec())
    }
}

impl From<Vec<TokenId>> for TokenSeq {
    fn from(v: Vec<TokenId>) -> Self {
        Self(v)
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

/// Vocabulary plus end-of-string token.
#[derive(Debug, Clone)]
pub struct TokenizerSpec {
    name: String,
    /// `vocab[i]` is the word of token `i + 1`.
    vocab: Vec<String>,
    eos_id: TokenId,
    index: PrefixIndex,
}

impl TokenizerSpec {
    /// Builds a spec from the words of tokens `1..=words.len()`, in order.
    pub fn new(name: impl Into<String>, words: Vec<String>, eos_id: TokenId) -> Result<Self> {
        if let Some(i) = words.iter().position(String::is_empty) {
            return Err(Error::InvalidParameter(format!("token {} has an empty word", i + 1)));
        }
        if eos_id >= 1 && (eos_id as usize) <= words.len() {
            return Err(Error::InvalidParameter(format!("eos id {eos_id} collides with a vocabulary id")));
        }
        let index = PrefixIndex::new(words.iter().enumerate().map(|(i, w)| (i as TokenId + 1, w.as_str())));
        Ok(Self {
            name: name.into(),
            vocab: words,
            eos_id,
            index,
        })
    }

    pub fn from_words<S: AsRef<str>>(name: &str, words: &[S]) -> Result<Self> {
        let words: Vec<String> = words.iter().map(|w| w.as_ref().to_owned()).collect();
        let eos = words.len() as TokenId + 1;
        Self::new(name, words, eos)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eos_id(&self) -> TokenId {
        self.eos_id
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Non-EOS token ids.
    pub fn token_ids(&self) -> impl Iterator<Item = TokenId> {
        1..=self.vocab.len() as TokenId
    }

    pub fn word(&self, id: TokenId) -> Option<&str> {
        if id == self.eos_id {
            return Some("");
        }
        let i = (id as usize).checked_sub(1)?;
        self.vocab.get(i).map(String::as_str)
    }

    pub fn prefix_index(&self) -> &PrefixIndex {
        &self.index
    }

    /// Greedy longest-match segmentation, left to right.
    pub fn encode(&self, text: &str) -> Result<TokenSeq> {
        let bytes = text.as_bytes();
        let mut pos = 0;
        let mut out = Vec::new();
        while pos < bytes.len() {
            // prefixes come shortest first; ties on length go to the lowest id
            let best = self
                .index
                .prefixes_of(&bytes[pos..])
                .into_iter()
                .fold(None, |best: Option<(usize, TokenId)>, (len, id)| match best {
                    Some((l, _)) if l >= len => best,
                    _ => Some((len, id)),
                });
            let (len, id) = best.ok_or(Error::Untokenizable(pos))?;
            out.push(id);
            pos += len;
        }
        Ok(TokenSeq(out))
    }

    pub fn decode(&self, sigma: &TokenSeq) -> Result<String> {
        self.decode_ids(sigma.ids())
    }

    pub fn decode_ids(&self, ids: &[TokenId]) -> Result<String> {
        let mut s = String::new();
        for &t in ids {
            s.push_str(self.word(t).ok_or(Error::UnknownToken(t))?);
        }
        Ok(s)
    }

    pub fn parse(src: &str) -> Result<Self> {
        let mut name = String::from("unnamed");
        let mut eos = None;
        let mut entries: Vec<(TokenId, String, usize)> = Vec::new();
        for (i, raw) in src.split('\n').enumerate() {
            let line_no = i + 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| Error::Parse {
                line: line_no,
                msg: msg.to_owned(),
            };
            let (key, value) = line.split_once('\t').ok_or_else(|| err("expected `<key><TAB><value>`"))?;
            match key {
                "!eos" => {
                    if eos.is_some() {
                        return Err(err("duplicate !eos"));
                    }
                    eos = Some(value.parse::<TokenId>().map_err(|_| err("bad eos id"))?);
                }
                "!name" => name = value.to_owned(),
                _ => {
                    let id = key.parse::<TokenId>().map_err(|_| err("bad token id"))?;
                    let word = unescape(value).map_err(|m| err(&m))?;
                    entries.push((id, word, line_no));
                }
            }
        }
        let eos = eos.ok_or(Error::Parse {
            line: 0,
            msg: "missing !eos".into(),
        })?;
        entries.sort_by_key(|e| e.0);
        for (k, (id, _, line)) in entries.iter().enumerate() {
            if *id as usize != k + 1 {
                return Err(Error::Parse {
                    line: *line,
                    msg: format!("token ids must be dense in 1..={}; found {id}", entries.len()),
                });
            }
        }
        Self::new(name, entries.into_iter().map(|e| e.1).collect(), eos)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_file_string(&self) -> String {
        let mut s = format!("!name\t{}\n", self.name);
        for (i, w) in self.vocab.iter().enumerate() {
            s.push_str(&format!("{}\t{}\n", i + 1, escape(w)));
        }
        s.push_str(&format!("!eos\t{}\n", self.eos_id));
        s
    }
}

fn unescape(s: &str) -> std::result::Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => return Err(format!("bad escape `\\{}`", other.map(String::from).unwrap_or_default())),
        }
    }
    if out.is_empty() {
        return Err("empty word".into());
    }
    Ok(out)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}
