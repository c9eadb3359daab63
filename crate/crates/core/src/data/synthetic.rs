//! Small generated corpora for tests, demos and smoke runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every user walks the item ring `i0 -> i1 -> ... -> i{items-1} -> i0`
/// from a different start, so the next item is a deterministic function of
/// the current one. Returned in the one-user-per-line text format.
pub fn successor_corpus(users: usize, items: usize, min_len: usize) -> String {
    let mut out = String::new();
    for u in 0..users {
        let start = (u * 3) % items;
        let len = min_len + u % 4;
        out.push_str(&format!("u{u}"));
        for k in 0..len {
            out.push_str(&format!(" i{}", (start + k) % items));
        }
        out.push('\n');
    }
    out
}

/// Corpus plus category map where items belong to `categories` equal-sized
/// genres and users stay in a genre with probability `stickiness` before
/// jumping to another. Returns `(corpus_text, category_map_text)`.
pub fn genre_corpus(
    users: usize,
    items: usize,
    categories: usize,
    len_range: (usize, usize),
    stickiness: f64,
    seed: u64,
) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_cat = items.div_ceil(categories);
    let mut corpus = String::new();
    for u in 0..users {
        let len = rng.random_range(len_range.0..=len_range.1);
        let mut cat = rng.random_range(0..categories);
        // users have a personal favourite within each genre
        let offset = rng.random_range(0..per_cat);
        corpus.push_str(&format!("user{u}"));
        let mut pos = offset;
        for _ in 0..len {
            if !rng.random_bool(stickiness) {
                cat = rng.random_range(0..categories);
            }
            pos = if rng.random_bool(0.7) {
                pos + 1
            } else {
                rng.random_range(0..per_cat)
            };
            let item = (cat * per_cat + pos % per_cat).min(items - 1);
            corpus.push_str(&format!(" item{item}"));
        }
        corpus.push('\n');
    }
    let mut map = String::new();
    for item in 0..items {
        map.push_str(&format!("item{item} genre{}\n", item / per_cat));
    }
    (corpus, map)
}
