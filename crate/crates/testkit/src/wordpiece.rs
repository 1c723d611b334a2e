//! Brute-force WordPiece: enumerate every tiling of a word by vocabulary
//! pieces and pick the one a longest-prefix-first search must return, i.e.
//! the tiling whose sequence of piece lengths is lexicographically greatest.

use std::collections::HashSet;

pub const MAX_WORD_CHARS: usize = 100;

/// All segmentations of `word` where the first piece is a plain entry and each
/// later piece `p` appears as `##p`.
pub fn tilings(word: &str, pieces: &HashSet<String>) -> Vec<Vec<String>> {
    let chars: Vec<char> = word.chars().collect();
    let mut out = Vec::new();
    let mut current = Vec::new();
    walk(&chars, 0, pieces, &mut current, &mut out);
    out
}

fn walk(chars: &[char], start: usize, pieces: &HashSet<String>, cur: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
    if start == chars.len() {
        out.push(cur.clone());
        return;
    }
    for end in start + 1..=chars.len() {
        let body: String = chars[start..end].iter().collect();
        let piece = if start == 0 { body } else { format!("##{body}") };
        if pieces.contains(&piece) {
            cur.push(piece);
            walk(chars, end, pieces, cur, out);
            cur.pop();
        }
    }
}

/// The expected segmentation, or `None` when no tiling exists.
///
/// Walks every tiling like [`tilings`] but only keeps the running maximum of
/// the piece-length sequence, which avoids materializing all of them.
pub fn expected_pieces(word: &str, pieces: &HashSet<String>) -> Option<Vec<String>> {
    let chars: Vec<char> = word.chars().collect();
    if chars.len() > MAX_WORD_CHARS || chars.is_empty() {
        return None;
    }
    let plain: HashSet<&str> = pieces.iter().filter(|p| !p.starts_with("##")).map(String::as_str).collect();
    let cont: HashSet<&str> = pieces.iter().filter_map(|p| p.strip_prefix("##")).collect();
    // Byte offsets of each char boundary so pieces can be looked up as slices.
    let mut bounds: Vec<usize> = word.char_indices().map(|(i, _)| i).collect();
    bounds.push(word.len());
    let mut best: Option<Vec<usize>> = None;
    let mut cur = Vec::new();
    search(word, &bounds, 0, &plain, &cont, &mut cur, &mut best);
    best.map(|cuts| {
        let mut start = 0;
        cuts.iter()
            .map(|&end| {
                let body = &word[bounds[start]..bounds[end]];
                let piece = if start == 0 { body.to_string() } else { format!("##{body}") };
                start = end;
                piece
            })
            .collect()
    })
}

/// `cur` holds the end positions of the pieces chosen so far; end positions
/// compare lexicographically exactly like piece lengths do.
fn search(
    word: &str,
    bounds: &[usize],
    start: usize,
    plain: &HashSet<&str>,
    cont: &HashSet<&str>,
    cur: &mut Vec<usize>,
    best: &mut Option<Vec<usize>>,
) {
    let n = bounds.len() - 1;
    if start == n {
        if best.as_ref().is_none_or(|b| cur.as_slice() > b.as_slice()) {
            *best = Some(cur.clone());
        }
        return;
    }
    let set = if start == 0 { plain } else { cont };
    for end in start + 1..=n {
        if set.contains(&word[bounds[start]..bounds[end]]) {
            cur.push(end);
            search(word, bounds, end, plain, cont, cur, best);
            cur.pop();
        }
    }
}

/// Whitespace (and control character) split, lowercase, and every
/// punctuation character on its own.
pub fn split_words(text: &str) -> Vec<String> {
    let mut words = Vec::new();
    let lower: String = text.chars().flat_map(char::to_lowercase).collect();
    for chunk in lower.split(|c: char| c.is_whitespace() || c.is_control()).filter(|c| !c.is_empty()) {
        let mut cur = String::new();
        for c in chunk.chars() {
            let punct = c.is_ascii_punctuation() || (!c.is_ascii() && !c.is_alphanumeric() && !c.is_whitespace());
            if punct {
                if !cur.is_empty() {
                    words.push(std::mem::take(&mut cur));
                }
                words.push(c.to_string());
            } else {
                cur.push(c);
            }
        }
        if !cur.is_empty() {
            words.push(cur);
        }
    }
    words
}

/// Expected token strings for `text`: `[CLS]`, pieces (or `[UNK]` per
/// untileable word), `[SEP]`, with the head kept and `[SEP]` forced last when
/// the sequence exceeds `max_len`.
pub fn expected_tokens(text: &str, pieces: &HashSet<String>, max_len: usize) -> Vec<String> {
    let mut toks = vec!["[CLS]".to_string()];
    for w in split_words(text) {
        match expected_pieces(&w, pieces) {
            Some(p) => toks.extend(p),
            None => toks.push("[UNK]".to_string()),
        }
    }
    toks.truncate(max_len - 1);
    toks.push("[SEP]".to_string());
    toks
}
