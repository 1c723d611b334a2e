use std::collections::HashSet;

use issuebert::tokenizer::{encode, pre_tokenize, word_pieces, Vocabulary, CONTINUATION_PREFIX};
use issuebert_testkit::tokcheck;
use issuebert_testkit::wordpiece::{expected_pieces, split_words};

#[test]
fn exhaustive_two_letter_sweep() {
    let checked = tokcheck::exhaustive(24, 2024).unwrap_or_else(|m| panic!("{m:#?}"));
    assert_eq!(checked, 25 * 8190);
}

#[test]
fn random_text_fuzz() {
    assert_eq!(tokcheck::fuzz(1000, 77).unwrap_or_else(|m| panic!("{m:#?}")), 1000);
}

#[test]
fn truncation_keeps_sep() {
    let truncated = tokcheck::truncation(300, 5).unwrap();
    assert!(truncated > 50, "only {truncated} inputs reached the cap");
}

#[test]
fn pre_tokenizer_agrees_with_oracle_split() {
    for text in ["Hello, World!", "a\tb\r\nc", "x--y", "naïve café…", "", "  ", "\u{1}ctl"] {
        assert_eq!(pre_tokenize(text), split_words(text), "{text:?}");
    }
}

fn detokenize(pieces: &[u32], vocab: &Vocabulary) -> String {
    pieces
        .iter()
        .map(|&id| {
            let t = vocab.token(id).unwrap();
            t.strip_prefix(CONTINUATION_PREFIX).unwrap_or(t).to_string()
        })
        .collect()
}

#[test]
fn pieces_reassemble_the_word() {
    let pieces: HashSet<String> = ["un", "##know", "##n", "know", "##ing", "a", "##a", "##b", "b"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let vocab = tokcheck::vocabulary(&pieces);
    for word in ["unknown", "knowing", "abba", "b", "ab"] {
        let ids = word_pieces(word, &vocab).unwrap();
        assert_eq!(detokenize(&ids, &vocab), word);
        let oracle: Vec<u32> = expected_pieces(word, &pieces)
            .unwrap()
            .iter()
            .map(|p| vocab.id(p).unwrap())
            .collect();
        assert_eq!(ids, oracle);
    }
    assert_eq!(word_pieces("zebra", &vocab), None);
    let enc = encode("unknown zebra", &vocab, 16);
    let toks: Vec<&str> = enc.real_ids().iter().map(|&i| vocab.token(i).unwrap()).collect();
    assert_eq!(toks, ["[CLS]", "un", "##know", "##n", "[UNK]", "[SEP]"]);
}
