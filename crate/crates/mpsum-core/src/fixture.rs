//! Bundled synthetic review fixture: the gold summary is always the first
//! sentence, and relevant / irrelevant sentences draw from disjoint
//! vocabulary pools, so prepare/train/evaluate run end to end without any
//! external corpus.

use std::path::Path;

use crate::error::Result;
use crate::numerics::rng_derive;
use crate::text::Review;

const PRODUCTS: [&str; 5] = [
    "coffee",
    "espresso roast",
    "tea blend",
    "green tea",
    "cold brew",
];

const TASTE_WORDS: [&str; 8] = [
    "wonderful",
    "rich",
    "smooth",
    "bold",
    "delicious",
    "fragrant",
    "balanced",
    "vibrant",
];

const NOTES: [&str; 4] = ["caramel", "honey", "citrus", "cocoa"];

// Token-disjoint from the sentences built out of the pools above; that
// keeps the ROUGE annotation clean (first sentence 1, the rest 0).
const FILLER: [&str; 10] = [
    "the box arrived dented near the lid",
    "delivery took nine days through customs",
    "packaging tape covered every corner",
    "the label was printed upside down",
    "the warehouse shipped the wrong item first",
    "tracking never updated for most stops",
    "the courier left it by the gate",
    "the carton corners were crushed flat",
    "customer support kept me waiting forever",
    "the return form asked for serial numbers",
];

/// Deterministically generate `count` synthetic reviews.
pub fn synthetic_reviews(count: usize, seed: u64) -> Vec<Review> {
    let mut rng = rng_derive(seed, "fixture");
    (0..count)
        .map(|i| {
            let product = PRODUCTS[rng.below(PRODUCTS.len())];
            let a = TASTE_WORDS[rng.below(TASTE_WORDS.len())];
            let b = TASTE_WORDS[rng.below(TASTE_WORDS.len())];
            let note = NOTES[rng.below(NOTES.len())];
            let first = format!("This {product} tastes {a} and {b} with notes of {note}.");

            let n_filler = 3 + rng.below(3); // 3..=5 irrelevant sentences
            let mut sentences = vec![first.clone()];
            let mut last = usize::MAX;
            for _ in 0..n_filler {
                let mut pick = rng.below(FILLER.len());
                if pick == last {
                    pick = (pick + 1) % FILLER.len();
                }
                last = pick;
                sentences.push(format!(
                    "{}{}.",
                    FILLER[pick][..1].to_uppercase(),
                    &FILLER[pick][1..]
                ));
            }

            Review {
                review_id: format!("rev-{i:03}"),
                text: sentences.join(" "),
                summary: Some(first),
            }
        })
        .collect()
}

pub fn write_fixture(path: &Path, count: usize, seed: u64) -> Result<()> {
    let mut out = String::new();
    for review in synthetic_reviews(count, seed) {
        out.push_str(&serde_json::to_string(&review)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
