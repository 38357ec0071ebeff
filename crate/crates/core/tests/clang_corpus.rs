//! Assembler and decoder checked against words produced by clang.

use rvmb_core::isa::{decode, encode};
use rvmb_core::loader::assemble;

fn corpus() -> Vec<(u32, &'static str)> {
    include_str!("fixtures/clang_corpus.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let (w, src) = l.split_once('\t').unwrap();
            (u32::from_str_radix(w, 16).unwrap(), src)
        })
        .collect()
}

fn word_of(src: &str) -> u32 {
    let bytes = assemble(src).unwrap_or_else(|e| panic!("{src}: {e}"));
    assert_eq!(bytes.len(), 4, "{src}");
    u32::from_le_bytes(bytes.try_into().unwrap())
}

#[test]
fn assembler_matches_clang() {
    let c = corpus();
    assert!(c.len() > 2500);
    for (word, src) in c {
        assert_eq!(word_of(src), word, "{src}: expected {word:08x}");
    }
}

#[test]
fn decoder_recovers_mnemonic_and_reassembles() {
    for (word, src) in corpus() {
        let i = decode(word).unwrap_or_else(|_| panic!("{word:08x} ({src}) rejected"));
        assert_eq!(i.raw, word);
        assert_eq!(i.op.mnemonic(), src.split_whitespace().next().unwrap(), "{word:08x}");
        assert_eq!(encode(&i).unwrap(), word, "{src}");
        assert_eq!(word_of(&i.to_string()), word, "{src} displayed as {i}");
    }
}
