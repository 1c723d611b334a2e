//! WordPiece tokenization: vocabulary files, a frequency-based vocabulary
//! builder, BERT-style pre-tokenization and fixed-length encoding.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CleanExample;

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const SPECIAL_TOKENS: [&str; 4] = [PAD, UNK, CLS, SEP];
pub const CONTINUATION_PREFIX: &str = "##";

/// Input length limit of the encoder, including [CLS] and [SEP].
pub const MAX_LEN: usize = 128;

/// Words longer than this (in chars) become [UNK] without a tiling attempt.
pub const MAX_WORD_CHARS: usize = 100;

/// Specials plus a 26-letter alphabet.
pub const MIN_BUILD_SIZE: usize = SPECIAL_TOKENS.len() + 26;

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("duplicate token {token:?} on lines {first} and {second}")]
    Duplicate {
        token: String,
        first: usize,
        second: usize,
    },
    #[error("vocabulary lacks special token {0}")]
    MissingSpecial(&'static str),
    #[error("[PAD] must have id 0, found at id {0}")]
    PadNotFirst(u32),
    #[error("empty token on line {0}")]
    EmptyToken(usize),
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("target vocabulary size {0} is below the minimum of {MIN_BUILD_SIZE}")]
    TargetTooSmall(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Token list with dense ids; id is the position in the list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    pad: u32,
    unk: u32,
    cls: u32,
    sep: u32,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, TokenizerError> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() {
                return Err(TokenizerError::EmptyToken(i + 1));
            }
            if let Some(prev) = index.insert(tok.clone(), i as u32) {
                return Err(TokenizerError::Duplicate {
                    token: tok.clone(),
                    first: prev as usize + 1,
                    second: i + 1,
                });
            }
        }
        let special = |name: &'static str| {
            index
                .get(name)
                .copied()
                .ok_or(TokenizerError::MissingSpecial(name))
        };
        let (pad, unk, cls, sep) = (special(PAD)?, special(UNK)?, special(CLS)?, special(SEP)?);
        if pad != 0 {
            return Err(TokenizerError::PadNotFirst(pad));
        }
        Ok(Self {
            tokens,
            index,
            pad,
            unk,
            cls,
            sep,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TokenizerError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// One token per line; a single trailing newline is allowed.
    pub fn parse(contents: &str) -> Result<Self, TokenizerError> {
        let body = contents.strip_suffix('\n').unwrap_or(contents);
        let tokens = body
            .split('\n')
            .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
            .collect();
        Self::from_tokens(tokens)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        for t in &self.tokens {
            w.write_all(t.as_bytes())?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> io::Result<()> {
        self.write_to(io::BufWriter::new(fs::File::create(path)?))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn pad_id(&self) -> u32 {
        self.pad
    }

    pub fn unk_id(&self) -> u32 {
        self.unk
    }

    pub fn cls_id(&self) -> u32 {
        self.cls
    }

    pub fn sep_id(&self) -> u32 {
        self.sep
    }

    pub fn is_continuation(&self, id: u32) -> bool {
        self.token(id)
            .is_some_and(|t| t.starts_with(CONTINUATION_PREFIX))
    }
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation() || (!c.is_ascii() && !c.is_alphanumeric() && !c.is_whitespace())
}

/// Lowercases, splits on whitespace and isolates every punctuation character.
pub fn pre_tokenize(text: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut current = String::new();
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_whitespace() || c.is_control() {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
        } else if is_punctuation(c) {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            words.push(c.to_string());
        } else {
            current.push(c);
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    words
}

/// Splits one word into vocabulary pieces, longest prefix first.
///
/// At each position the longest matching piece is taken; if the remainder
/// cannot be tiled the next shorter piece is tried. Returns `None` when the
/// word has no tiling at all.
pub fn word_pieces(word: &str, vocab: &Vocabulary) -> Option<Vec<u32>> {
    let chars: Vec<char> = word.chars().collect();
    if chars.is_empty() || chars.len() > MAX_WORD_CHARS {
        return None;
    }
    let mut dead = vec![false; chars.len()];
    let mut out = Vec::new();
    let mut piece = String::new();
    tile(&chars, 0, vocab, &mut dead, &mut out, &mut piece).then_some(out)
}

fn tile(
    chars: &[char],
    start: usize,
    vocab: &Vocabulary,
    dead: &mut [bool],
    out: &mut Vec<u32>,
    piece: &mut String,
) -> bool {
    if start == chars.len() {
        return true;
    }
    if dead[start] {
        return false;
    }
    for end in (start + 1..=chars.len()).rev() {
        piece.clear();
        if start > 0 {
            piece.push_str(CONTINUATION_PREFIX);
        }
        piece.extend(&chars[start..end]);
        if let Some(id) = vocab.id(piece) {
            out.push(id);
            if tile(chars, end, vocab, dead, out, piece) {
                return true;
            }
            out.pop();
        }
    }
    dead[start] = true;
    false
}

/// Fixed-length id sequence: `[CLS] pieces [SEP]` then `[PAD]` up to `max_len`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Encoding {
    pub ids: Vec<u32>,
    pub attention_mask: Vec<u8>,
    pub real_len: usize,
}

#[derive(Serialize, Deserialize)]
struct EncodingDump {
    ids: Vec<u32>,
    mask: Vec<u8>,
}

impl Encoding {
    pub fn max_len(&self) -> usize {
        self.ids.len()
    }

    /// Ids of the unpadded prefix.
    pub fn real_ids(&self) -> &[u32] {
        &self.ids[..self.real_len]
    }

    /// `{"ids":[...],"mask":[...]}`
    pub fn to_debug_json(&self) -> String {
        serde_json::to_string(&EncodingDump {
            ids: self.ids.clone(),
            mask: self.attention_mask.clone(),
        })
        .expect("encoding dump serializes")
    }
}

/// Encodes `text`, keeping the head of the sequence when it exceeds `max_len`.
///
/// Panics if `max_len < 2`.
pub fn encode(text: &str, vocab: &Vocabulary, max_len: usize) -> Encoding {
    assert!(max_len >= 2, "max_len must leave room for [CLS] and [SEP]");
    let budget = max_len - 2;
    let mut ids = Vec::with_capacity(max_len);
    ids.push(vocab.cls_id());
    for word in pre_tokenize(text) {
        if ids.len() > budget {
            break;
        }
        match word_pieces(&word, vocab) {
            Some(pieces) => ids.extend(pieces),
            None => ids.push(vocab.unk_id()),
        }
    }
    ids.truncate(budget + 1);
    ids.push(vocab.sep_id());
    let real_len = ids.len();
    ids.resize(max_len, vocab.pad_id());
    let attention_mask = (0..max_len).map(|i| u8::from(i < real_len)).collect();
    Encoding {
        ids,
        attention_mask,
        real_len,
    }
}

/// Builds a vocabulary from corpus statistics.
///
/// Layout: the four specials, then every observed character both as a
/// word-initial piece and as a `##` continuation, then whole words and `##`
/// suffixes by descending frequency (ties lexicographic) until `target_size`
/// is reached. The character inventory is always kept in full, so the result
/// can exceed `target_size` on corpora with very many distinct characters.
pub fn build_vocab(corpus: &[CleanExample], target_size: usize) -> Result<Vocabulary, TokenizerError> {
    if corpus.is_empty() {
        return Err(TokenizerError::EmptyCorpus);
    }
    if target_size < MIN_BUILD_SIZE {
        return Err(TokenizerError::TargetTooSmall(target_size));
    }
    let mut word_counts: HashMap<String, u64> = HashMap::new();
    for ex in corpus {
        for w in pre_tokenize(&ex.text) {
            *word_counts.entry(w).or_insert(0) += 1;
        }
    }

    let chars: BTreeSet<char> = word_counts.keys().flat_map(|w| w.chars()).collect();
    let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
    for c in &chars {
        tokens.push(c.to_string());
    }
    for c in &chars {
        tokens.push(format!("{CONTINUATION_PREFIX}{c}"));
    }

    let mut candidates: HashMap<String, u64> = HashMap::new();
    for (word, &count) in &word_counts {
        let wc: Vec<char> = word.chars().collect();
        if wc.len() < 2 || wc.len() > MAX_WORD_CHARS {
            continue;
        }
        *candidates.entry(word.clone()).or_insert(0) += count;
        for i in 1..wc.len() - 1 {
            let suffix: String = wc[i..].iter().collect();
            *candidates
                .entry(format!("{CONTINUATION_PREFIX}{suffix}"))
                .or_insert(0) += count;
        }
    }
    let mut ranked: Vec<(String, u64)> = candidates
        .into_iter()
        .filter(|(t, _)| !SPECIAL_TOKENS.contains(&t.as_str()))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let room = target_size.saturating_sub(tokens.len());
    tokens.extend(ranked.into_iter().take(room).map(|(t, _)| t));
    Vocabulary::from_tokens(tokens)
}
