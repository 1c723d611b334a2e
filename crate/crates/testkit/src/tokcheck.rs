//! Encoder-versus-oracle sweeps over random vocabularies.

use std::collections::HashSet;

use issuebert::rng::SeededRng;
use issuebert::tokenizer::{encode, Vocabulary, MAX_LEN, SPECIAL_TOKENS};

use crate::wordpiece::expected_tokens;

pub const MAX_PIECES: usize = 50;
pub const MAX_WORD: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub text: String,
    pub vocab: Vec<String>,
    pub max_len: usize,
    pub expected: Vec<String>,
    pub actual: Vec<String>,
}

pub fn vocabulary(pieces: &HashSet<String>) -> Vocabulary {
    let mut sorted: Vec<String> = pieces.iter().cloned().collect();
    sorted.sort();
    let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
    tokens.extend(sorted);
    Vocabulary::from_tokens(tokens).expect("valid vocabulary")
}

/// Runs the encoder and the oracle on one input.
pub fn compare(text: &str, pieces: &HashSet<String>, vocab: &Vocabulary, max_len: usize) -> Result<(), Box<Mismatch>> {
    let enc = encode(text, vocab, max_len);
    let actual: Vec<String> = enc
        .real_ids()
        .iter()
        .map(|&id| vocab.token(id).expect("id in range").to_string())
        .collect();
    let expected = expected_tokens(text, pieces, max_len);
    let mask_ok = enc.attention_mask.iter().enumerate().all(|(i, &m)| m == u8::from(i < enc.real_len));
    let pad_ok = enc.ids[enc.real_len..].iter().all(|&id| id == vocab.pad_id());
    if actual == expected && enc.ids.len() == max_len && mask_ok && pad_ok {
        Ok(())
    } else {
        Err(Box::new(Mismatch {
            text: text.to_string(),
            vocab: vocab.tokens().to_vec(),
            max_len,
            expected,
            actual,
        }))
    }
}

fn random_piece(rng: &mut SeededRng, alphabet: &[char], max_len: usize) -> String {
    let len = 1 + rng.below(max_len);
    let body: String = (0..len).map(|_| alphabet[rng.below(alphabet.len())]).collect();
    if rng.uniform() < 0.5 {
        format!("##{body}")
    } else {
        body
    }
}

fn random_pieces(rng: &mut SeededRng, alphabet: &[char], max_piece: usize) -> HashSet<String> {
    let target = 1 + rng.below(MAX_PIECES);
    let mut pieces = HashSet::new();
    for _ in 0..target * 4 {
        if pieces.len() == target {
            break;
        }
        pieces.insert(random_piece(rng, alphabet, max_piece));
    }
    pieces
}

fn all_words(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut layer = vec![String::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(layer.len() * alphabet.len());
        for w in &layer {
            for &c in alphabet {
                let mut v = w.clone();
                v.push(c);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Every word over `{a, b}` of length 1 to 12 against `vocabularies` random
/// piece sets of at most 50 entries, plus the complete set of pieces up to
/// length 2. Returns the number of words checked.
pub fn exhaustive(vocabularies: usize, seed: u64) -> Result<usize, Box<Mismatch>> {
    let alphabet = ['a', 'b'];
    let words = all_words(&alphabet, MAX_WORD);
    let mut rng = SeededRng::new(seed);
    let mut sets: Vec<HashSet<String>> = (0..vocabularies).map(|_| random_pieces(&mut rng, &alphabet, 4)).collect();
    let mut full = HashSet::new();
    for w in all_words(&alphabet, 2) {
        full.insert(format!("##{w}"));
        full.insert(w);
    }
    sets.push(full);
    let mut checked = 0;
    for pieces in &sets {
        let vocab = vocabulary(pieces);
        for w in &words {
            compare(w, pieces, &vocab, MAX_WORD + 2)?;
            checked += 1;
        }
    }
    Ok(checked)
}

/// Random multi-word texts (letters, punctuation, mixed whitespace, upper
/// case) with random vocabularies and random `max_len`.
pub fn fuzz(cases: usize, seed: u64) -> Result<usize, Box<Mismatch>> {
    let letters = ['a', 'b', 'c', 'A', 'B'];
    let piece_letters = ['a', 'b', 'c'];
    let others = [' ', ' ', '\t', '\n', '.', ',', '!', '?', '-', '(', ')', 'é', '…'];
    let mut rng = SeededRng::new(seed);
    for _ in 0..cases {
        let mut pieces = random_pieces(&mut rng, &piece_letters, 3);
        for p in [".", ",", "!", "é"] {
            if rng.uniform() < 0.5 {
                pieces.insert(p.to_string());
            }
        }
        let vocab = vocabulary(&pieces);
        let len = rng.below(60);
        let text: String = (0..len)
            .map(|_| {
                if rng.uniform() < 0.75 {
                    letters[rng.below(letters.len())]
                } else {
                    others[rng.below(others.len())]
                }
            })
            .collect();
        let max_len = 2 + rng.below(30);
        compare(&text, &pieces, &vocab, max_len)?;
    }
    Ok(cases)
}

/// Long inputs at the default cap: `real_len ≤ 128` and the last real token
/// is `[SEP]`. Returns the number of inputs that actually needed truncation.
pub fn truncation(cases: usize, seed: u64) -> Result<usize, String> {
    let mut rng = SeededRng::new(seed);
    let pieces: HashSet<String> = ["a", "b", "ab", "##a", "##b"].iter().map(|s| s.to_string()).collect();
    let vocab = vocabulary(&pieces);
    let mut truncated = 0;
    for _ in 0..cases {
        let words = rng.below(400);
        let text: Vec<String> = (0..words)
            .map(|_| (0..1 + rng.below(5)).map(|_| if rng.uniform() < 0.5 { 'a' } else { 'b' }).collect())
            .collect();
        let enc = encode(&text.join(" "), &vocab, MAX_LEN);
        if enc.real_len > MAX_LEN || enc.ids[enc.real_len - 1] != vocab.sep_id() || enc.ids[0] != vocab.cls_id() {
            return Err(format!("bad encoding for {} words: real_len {}", words, enc.real_len));
        }
        if compare(&text.join(" "), &pieces, &vocab, MAX_LEN).is_err() {
            return Err(format!("oracle mismatch for {} words", words));
        }
        truncated += usize::from(enc.real_len == MAX_LEN);
    }
    Ok(truncated)
}
