//! Synthetic rating data for the benchmarks: a seeded, MovieLens-shaped
//! corpus with genre-skewed user profiles.

use std::sync::Arc;

use rand::Rng;

use recal_core::data::{Dataset, ItemCatalog, RatingRecord};
use recal_core::rng::{derived_rng, Purpose};
use recal_core::{ItemId, UserId};

const GENRES: [&str; 6] = ["Action", "Comedy", "Drama", "Horror", "Romance", "Sci-Fi"];

/// A dataset of `n_users x n_items` with roughly `density` of the cells
/// rated. Users favor one genre; ratings track a per-item quality plus a
/// genre bonus.
pub fn synthetic_dataset(n_users: u32, n_items: u32, density: f64, seed: u64) -> Arc<Dataset> {
    let mut rng = derived_rng(seed, Purpose::ModelInit, 0);
    let quality: Vec<f64> = (0..n_items).map(|_| rng.random_range(2..=4) as f64).collect();
    let mut records = Vec::new();
    let mut timestamp = 1_000_000_000i64;
    for user in 1..=n_users {
        let preferred = (user as usize - 1) % GENRES.len();
        for item in 1..=n_items {
            let genre = (item as usize - 1) % GENRES.len();
            let boost = if genre == preferred { 3.0 } else { 1.0 };
            if rng.random_range(0.0..1.0) >= density * boost {
                continue;
            }
            let bonus = if genre == preferred { 1.0 } else { 0.0 };
            let rating = (quality[item as usize - 1] + bonus + rng.random_range(-1.0..=1.0))
                .round()
                .clamp(1.0, 5.0);
            timestamp += 1;
            records.push(RatingRecord {
                user: UserId(user),
                item: ItemId(item),
                rating,
                timestamp,
            });
        }
    }
    Arc::new(Dataset::from_records(records).unwrap())
}

/// Catalog matching [`synthetic_dataset`]: every item carries one genre,
/// every third item a second one.
pub fn synthetic_catalog(n_items: u32) -> ItemCatalog {
    let entries = (1..=n_items)
        .map(|item| {
            let mut genres = vec![GENRES[(item as usize - 1) % GENRES.len()].to_owned()];
            if item % 3 == 0 {
                genres.push(GENRES[(item as usize + 1) % GENRES.len()].to_owned());
            }
            (ItemId(item), genres)
        })
        .collect();
    ItemCatalog::new(entries).unwrap()
}
