//! Rating-data ingestion: MovieLens-format parsers, the in-memory sparse
//! dataset, the seeded per-user train/test split, and per-item rating means.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead, Write};

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::rng::{derived_rng, Purpose};

/// Lowest rating accepted on parse.
pub const MIN_RATING: f64 = 1.0;
/// Highest rating accepted on parse.
pub const MAX_RATING: f64 = 5.0;

/// Opaque user identifier as it appears in the input files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(pub u32);

/// Opaque item identifier as it appears in the input files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ItemId(pub u32);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One observed rating. Timestamps are carried through for serialization but
/// ignored by every algorithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingRecord {
    pub user: UserId,
    pub item: ItemId,
    pub rating: f64,
    pub timestamp: i64,
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate rating for user {user} and item {item}")]
    DuplicateRating { user: UserId, item: ItemId },
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("dataset is empty")]
    Empty,
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("unknown item {0}")]
    UnknownItem(ItemId),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

/// Immutable sparse rating dataset with user- and item-major views.
///
/// Users and items are additionally mapped onto dense indexes
/// `0..n_users()` / `0..n_items()` in ascending id order; the algorithm
/// crates work on those indexes and translate back at the API boundary.
/// Once built, a `Dataset` is read-only and safe to share across threads.
#[derive(Debug, Clone)]
pub struct Dataset {
    records: Vec<RatingRecord>,
    users: Vec<UserId>,
    items: Vec<ItemId>,
    user_pos: HashMap<UserId, usize>,
    item_pos: HashMap<ItemId, usize>,
    /// Per user: `(dense item index, rating)` sorted by item index.
    user_profiles: Vec<Vec<(usize, f64)>>,
    /// Per item: `(dense user index, rating)` sorted by user index.
    item_profiles: Vec<Vec<(usize, f64)>>,
}

impl Dataset {
    /// Builds a dataset from raw records. Records are put into canonical
    /// `(user, item)` order; duplicate pairs are rejected.
    pub fn from_records(mut records: Vec<RatingRecord>) -> Result<Self, DataError> {
        if records.is_empty() {
            return Err(DataError::Empty);
        }
        records.sort_by_key(|r| (r.user, r.item));
        for pair in records.windows(2) {
            if pair[0].user == pair[1].user && pair[0].item == pair[1].item {
                return Err(DataError::DuplicateRating {
                    user: pair[1].user,
                    item: pair[1].item,
                });
            }
        }

        let mut users: Vec<UserId> = records.iter().map(|r| r.user).collect();
        users.dedup();
        let mut items: Vec<ItemId> = records.iter().map(|r| r.item).collect();
        items.sort_unstable();
        items.dedup();

        let user_pos: HashMap<UserId, usize> =
            users.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        let item_pos: HashMap<ItemId, usize> =
            items.iter().enumerate().map(|(i, &it)| (it, i)).collect();

        let mut user_profiles = vec![Vec::new(); users.len()];
        let mut item_profiles = vec![Vec::new(); items.len()];
        for r in &records {
            let u = user_pos[&r.user];
            let i = item_pos[&r.item];
            user_profiles[u].push((i, r.rating));
            item_profiles[i].push((u, r.rating));
        }
        for profile in &mut user_profiles {
            profile.sort_unstable_by_key(|&(i, _)| i);
        }
        // item_profiles are already sorted by user index because records are
        // visited in ascending user order.

        Ok(Dataset {
            records,
            users,
            items,
            user_pos,
            item_pos,
            user_profiles,
            item_profiles,
        })
    }

    pub fn n_records(&self) -> usize {
        self.records.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Records in canonical `(user, item)` order.
    pub fn records(&self) -> &[RatingRecord] {
        &self.records
    }

    /// All user ids in ascending order; position equals dense index.
    pub fn user_ids(&self) -> &[UserId] {
        &self.users
    }

    /// All item ids in ascending order; position equals dense index.
    pub fn item_ids(&self) -> &[ItemId] {
        &self.items
    }

    pub fn user_index(&self, user: UserId) -> Option<usize> {
        self.user_pos.get(&user).copied()
    }

    pub fn item_index(&self, item: ItemId) -> Option<usize> {
        self.item_pos.get(&item).copied()
    }

    pub fn user_id(&self, index: usize) -> UserId {
        self.users[index]
    }

    pub fn item_id(&self, index: usize) -> ItemId {
        self.items[index]
    }

    /// `(dense item index, rating)` pairs for one user, ascending by index.
    pub fn user_profile(&self, user_index: usize) -> &[(usize, f64)] {
        &self.user_profiles[user_index]
    }

    /// `(dense user index, rating)` pairs for one item, ascending by index.
    pub fn item_raters(&self, item_index: usize) -> &[(usize, f64)] {
        &self.item_profiles[item_index]
    }

    /// `(item id, rating)` pairs for one user, ascending by item id.
    pub fn user_ratings(&self, user: UserId) -> Result<Vec<(ItemId, f64)>, DataError> {
        let u = self.user_index(user).ok_or(DataError::UnknownUser(user))?;
        Ok(self.user_profiles[u]
            .iter()
            .map(|&(i, r)| (self.items[i], r))
            .collect())
    }

    pub fn rating(&self, user: UserId, item: ItemId) -> Option<f64> {
        let u = self.user_index(user)?;
        let i = self.item_index(item)?;
        self.user_profiles[u]
            .binary_search_by_key(&i, |&(idx, _)| idx)
            .ok()
            .map(|pos| self.user_profiles[u][pos].1)
    }

    pub fn global_mean(&self) -> f64 {
        let sum: f64 = self.records.iter().map(|r| r.rating).sum();
        sum / self.records.len() as f64
    }

    /// Stable 64-bit fingerprint of the rating triples (FNV-1a over the
    /// canonical record order). Used to tie persisted models to the dataset
    /// they were trained on.
    pub fn fingerprint(&self) -> u64 {
        let mut hash = 0xcbf2_9ce4_8422_2325_u64;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                hash ^= b as u64;
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for r in &self.records {
            eat(&r.user.0.to_le_bytes());
            eat(&r.item.0.to_le_bytes());
            eat(&r.rating.to_bits().to_le_bytes());
        }
        hash
    }
}

/// Item catalog: genre assignments plus the ordered genre universe.
///
/// Genres are interned; a genre's index in [`genre_universe`] is its dense
/// id throughout the metrics code.
///
/// [`genre_universe`]: ItemCatalog::genre_universe
#[derive(Debug, Clone)]
pub struct ItemCatalog {
    genre_universe: Vec<String>,
    genres_of: BTreeMap<ItemId, Vec<usize>>,
}

impl ItemCatalog {
    /// Builds a catalog from `(item, genre labels)` pairs. The genre universe
    /// is the sorted union of every label seen.
    pub fn new(entries: Vec<(ItemId, Vec<String>)>) -> Result<Self, DataError> {
        let mut universe: Vec<String> = entries
            .iter()
            .flat_map(|(_, genres)| genres.iter().cloned())
            .collect();
        universe.sort_unstable();
        universe.dedup();
        let genre_pos: HashMap<&str, usize> = universe
            .iter()
            .enumerate()
            .map(|(i, g)| (g.as_str(), i))
            .collect();

        let mut genres_of = BTreeMap::new();
        for (item, labels) in entries {
            if labels.is_empty() {
                return Err(DataError::Parse {
                    line: 0,
                    message: format!("item {item} has an empty genre list"),
                });
            }
            let mut ids: Vec<usize> = labels.iter().map(|g| genre_pos[g.as_str()]).collect();
            ids.sort_unstable();
            ids.dedup();
            if genres_of.insert(item, ids).is_some() {
                return Err(DataError::Parse {
                    line: 0,
                    message: format!("item {item} listed twice"),
                });
            }
        }
        Ok(ItemCatalog {
            genre_universe: universe,
            genres_of,
        })
    }

    /// Sorted list of all genre labels.
    pub fn genre_universe(&self) -> &[String] {
        &self.genre_universe
    }

    pub fn n_genres(&self) -> usize {
        self.genre_universe.len()
    }

    pub fn n_items(&self) -> usize {
        self.genres_of.len()
    }

    /// Dense genre ids for an item, ascending.
    pub fn genres_of(&self, item: ItemId) -> Option<&[usize]> {
        self.genres_of.get(&item).map(|v| v.as_slice())
    }

    pub fn genre_labels_of(&self, item: ItemId) -> Option<Vec<&str>> {
        self.genres_of(item)
            .map(|ids| ids.iter().map(|&g| self.genre_universe[g].as_str()).collect())
    }
}

/// Result of [`split`]: disjoint train/test datasets plus the seed that
/// produced them.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Option<Dataset>,
    pub seed: u64,
}

fn parse_field<T: std::str::FromStr>(
    field: &str,
    name: &str,
    line: usize,
) -> Result<T, DataError> {
    field.trim().parse().map_err(|_| DataError::Parse {
        line,
        message: format!("{name} field {field:?} is not numeric"),
    })
}

/// Parses a MovieLens `ratings.dat` stream: one `UserID::MovieID::Rating::
/// Timestamp` record per line. Ratings outside `[1, 5]`, malformed lines and
/// duplicate `(user, item)` pairs are rejected with the offending line
/// number.
pub fn parse_ratings<R: BufRead>(reader: R) -> Result<Dataset, DataError> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split("::").collect();
        if fields.len() != 4 {
            return Err(DataError::Parse {
                line: line_no,
                message: format!("expected 4 '::'-separated fields, found {}", fields.len()),
            });
        }
        let user: u32 = parse_field(fields[0], "user", line_no)?;
        let item: u32 = parse_field(fields[1], "item", line_no)?;
        let rating: f64 = parse_field(fields[2], "rating", line_no)?;
        let timestamp: i64 = parse_field(fields[3], "timestamp", line_no)?;
        if !(MIN_RATING..=MAX_RATING).contains(&rating) {
            return Err(DataError::Parse {
                line: line_no,
                message: format!("rating {rating} outside [{MIN_RATING}, {MAX_RATING}]"),
            });
        }
        records.push(RatingRecord {
            user: UserId(user),
            item: ItemId(item),
            rating,
            timestamp,
        });
    }
    Dataset::from_records(records)
}

/// Parses a MovieLens `movies.dat` stream: `MovieID::Title::Genre1|Genre2`.
/// Titles may contain Latin-1 bytes, so the stream is decoded lossily.
pub fn parse_items<R: BufRead>(mut reader: R) -> Result<ItemCatalog, DataError> {
    let mut entries = Vec::new();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = String::from_utf8_lossy(&buf);
        let line = line.trim_end_matches(['\n', '\r']);
        if line.is_empty() {
            continue;
        }
        // Titles may themselves contain "::"? They do not in MovieLens, but
        // genres are always the final field, so split from both ends.
        let (id_part, rest) = line.split_once("::").ok_or_else(|| DataError::Parse {
            line: line_no,
            message: "expected MovieID::Title::Genres".into(),
        })?;
        let (_title, genre_part) = rest.rsplit_once("::").ok_or_else(|| DataError::Parse {
            line: line_no,
            message: "expected MovieID::Title::Genres".into(),
        })?;
        let item: u32 = parse_field(id_part, "item", line_no)?;
        let genres: Vec<String> = genre_part
            .split('|')
            .map(str::trim)
            .filter(|g| !g.is_empty())
            .map(str::to_owned)
            .collect();
        if genres.is_empty() {
            return Err(DataError::Parse {
                line: line_no,
                message: format!("item {item} has an empty genre list"),
            });
        }
        entries.push((ItemId(item), genres));
    }
    if entries.is_empty() {
        return Err(DataError::Empty);
    }
    ItemCatalog::new(entries)
}

/// Per-user stratified train/test split.
///
/// Each user's ratings are shuffled with a generator derived from
/// `(seed, user id)` and the first `ceil(train_fraction * n)` go to train.
/// Users whose entire profile lands in train (e.g. a single rating) are
/// simply absent from test. The same inputs and seed reproduce the same
/// split bit for bit.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<SplitPair, DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::InvalidFraction(train_fraction));
    }
    let mut train_records = Vec::with_capacity(dataset.n_records());
    let mut test_records = Vec::new();

    for (u, user) in dataset.user_ids().iter().enumerate() {
        let profile = dataset.user_profile(u);
        // Canonical ascending-item order before shuffling, so the result is
        // independent of how the input records were ordered.
        let mut order: Vec<usize> = (0..profile.len()).collect();
        let mut rng = derived_rng(seed, Purpose::Split, user.0 as u64);
        order.shuffle(&mut rng);

        // ceil(fraction * n) with decimal intent: a product within 1e-9 of
        // an integer is treated as that integer, so 0.8 * 10 is 8 even when
        // the f64 product lands one ulp off.
        let raw = train_fraction * profile.len() as f64;
        let n_train = if (raw - raw.round()).abs() < 1e-9 {
            raw.round() as usize
        } else {
            raw.ceil() as usize
        };
        let n_train = n_train.clamp(1, profile.len());
        for (rank, &pos) in order.iter().enumerate() {
            let (item_idx, rating) = profile[pos];
            let item = dataset.item_id(item_idx);
            let timestamp = dataset
                .records()
                .binary_search_by_key(&(*user, item), |r| (r.user, r.item))
                .map(|i| dataset.records()[i].timestamp)
                .unwrap_or(0);
            let record = RatingRecord {
                user: *user,
                item,
                rating,
                timestamp,
            };
            if rank < n_train {
                train_records.push(record);
            } else {
                test_records.push(record);
            }
        }
    }

    let train = Dataset::from_records(train_records)?;
    let test = if test_records.is_empty() {
        None
    } else {
        Some(Dataset::from_records(test_records)?)
    };
    Ok(SplitPair { train, test, seed })
}

/// Mean rating per item over the given dataset, including every rater.
/// Items absent from the dataset are absent from the map.
pub fn item_means(train: &Dataset) -> BTreeMap<ItemId, f64> {
    let mut means = BTreeMap::new();
    for (i, item) in train.item_ids().iter().enumerate() {
        let raters = train.item_raters(i);
        let sum: f64 = raters.iter().map(|&(_, r)| r).sum();
        means.insert(*item, sum / raters.len() as f64);
    }
    means
}

/// Per-item `(sum, count)` of ratings; the building block for leave-one-out
/// means when the querying user's own rating is to be excluded.
pub fn item_mean_stats(train: &Dataset) -> BTreeMap<ItemId, (f64, usize)> {
    let mut stats = BTreeMap::new();
    for (i, item) in train.item_ids().iter().enumerate() {
        let raters = train.item_raters(i);
        let sum: f64 = raters.iter().map(|&(_, r)| r).sum();
        stats.insert(*item, (sum, raters.len()));
    }
    stats
}

/// Writes the dataset back out in the `::`-separated rating format.
pub fn write_ratings_dat<W: Write>(dataset: &Dataset, mut writer: W) -> io::Result<()> {
    for r in dataset.records() {
        writeln!(writer, "{}::{}::{}::{}", r.user, r.item, r.rating, r.timestamp)?;
    }
    Ok(())
}

/// Writes the canonical CSV serialization used for split persistence:
/// a `user_id,item_id,rating,timestamp` header followed by one row per
/// record in canonical order.
pub fn write_ratings_csv<W: Write>(dataset: &Dataset, mut writer: W) -> io::Result<()> {
    writeln!(writer, "user_id,item_id,rating,timestamp")?;
    for r in dataset.records() {
        writeln!(writer, "{},{},{},{}", r.user, r.item, r.rating, r.timestamp)?;
    }
    Ok(())
}

/// Reads the CSV form written by [`write_ratings_csv`].
pub fn read_ratings_csv<R: BufRead>(reader: R) -> Result<Dataset, DataError> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || (line_no == 1 && line.starts_with("user_id,")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(DataError::Parse {
                line: line_no,
                message: format!("expected 4 comma-separated fields, found {}", fields.len()),
            });
        }
        records.push(RatingRecord {
            user: UserId(parse_field(fields[0], "user", line_no)?),
            item: ItemId(parse_field(fields[1], "item", line_no)?),
            rating: parse_field(fields[2], "rating", line_no)?,
            timestamp: parse_field(fields[3], "timestamp", line_no)?,
        });
    }
    Dataset::from_records(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn record(user: u32, item: u32, rating: f64) -> RatingRecord {
        RatingRecord {
            user: UserId(user),
            item: ItemId(item),
            rating,
            timestamp: 0,
        }
    }

    #[test]
    fn parses_a_well_formed_line() {
        let data = parse_ratings(Cursor::new("1::1193::5::978300760\n")).unwrap();
        assert_eq!(data.n_records(), 1);
        let r = data.records()[0];
        assert_eq!(r.user, UserId(1));
        assert_eq!(r.item, ItemId(1193));
        assert_eq!(r.rating, 5.0);
        assert_eq!(r.timestamp, 978300760);
    }

    #[test]
    fn rejects_out_of_range_rating() {
        let err = parse_ratings(Cursor::new("1::1193::9::978300760\n")).unwrap_err();
        match err {
            DataError::Parse { line, message } => {
                assert_eq!(line, 1);
                assert!(message.contains("outside"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_wrong_field_count_with_line_number() {
        let err = parse_ratings(Cursor::new("1::2::3::4\n5::6::3\n")).unwrap_err();
        match err {
            DataError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicate_pairs() {
        let err = parse_ratings(Cursor::new("1::2::3::0\n1::2::4::1\n")).unwrap_err();
        assert!(matches!(err, DataError::DuplicateRating { .. }));
    }

    #[test]
    fn parses_movie_lines_and_builds_universe() {
        let input = "1::Toy Story (1995)::Animation|Children's|Comedy\n\
                     2::Jumanji (1995)::Adventure|Children's|Fantasy\n";
        let catalog = parse_items(Cursor::new(input)).unwrap();
        assert_eq!(catalog.genres_of(ItemId(1)).unwrap().len(), 3);
        assert_eq!(
            catalog.genre_universe(),
            &["Adventure", "Animation", "Children's", "Comedy", "Fantasy"]
        );
    }

    #[test]
    fn rejects_empty_genre_list() {
        let err = parse_items(Cursor::new("5::X::\n")).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 1, .. }));
    }

    #[test]
    fn tolerates_latin1_titles() {
        let mut bytes = b"1::Am\xe9lie (2001)::Comedy|Romance\n".to_vec();
        bytes.extend_from_slice(b"2::Plain::Drama\n");
        let catalog = parse_items(Cursor::new(bytes)).unwrap();
        assert_eq!(catalog.n_items(), 2);
    }

    #[test]
    fn indexes_invert_records() {
        let data = Dataset::from_records(vec![
            record(1, 10, 4.0),
            record(1, 20, 2.0),
            record(2, 10, 5.0),
        ])
        .unwrap();
        assert_eq!(data.n_users(), 2);
        assert_eq!(data.n_items(), 2);
        assert_eq!(
            data.user_ratings(UserId(1)).unwrap(),
            vec![(ItemId(10), 4.0), (ItemId(20), 2.0)]
        );
        let i10 = data.item_index(ItemId(10)).unwrap();
        assert_eq!(data.item_raters(i10).len(), 2);
        assert_eq!(data.rating(UserId(2), ItemId(10)), Some(5.0));
        assert_eq!(data.rating(UserId(2), ItemId(20)), None);
    }

    #[test]
    fn split_is_deterministic_and_exhaustive() {
        let mut records = Vec::new();
        for u in 1..=20u32 {
            for i in 1..=10u32 {
                records.push(record(u, i, f64::from((u + i) % 5 + 1)));
            }
        }
        let data = Dataset::from_records(records).unwrap();
        let a = split(&data, 0.8, 7).unwrap();
        let b = split(&data, 0.8, 7).unwrap();
        assert_eq!(a.train.records(), b.train.records());
        assert_eq!(
            a.test.as_ref().unwrap().records(),
            b.test.as_ref().unwrap().records()
        );
        assert_eq!(
            a.train.n_records() + a.test.as_ref().unwrap().n_records(),
            data.n_records()
        );
        // Per user: ceil(0.8 * 10) = 8 in train, 2 in test.
        for u in 0..a.train.n_users() {
            assert_eq!(a.train.user_profile(u).len(), 8);
        }
    }

    #[test]
    fn split_sends_single_rating_users_to_train() {
        let data = Dataset::from_records(vec![
            record(1, 1, 3.0),
            record(2, 1, 4.0),
            record(2, 2, 2.0),
        ])
        .unwrap();
        let pair = split(&data, 0.8, 1).unwrap();
        assert_eq!(pair.train.user_ratings(UserId(1)).unwrap().len(), 1);
        if let Some(test) = &pair.test {
            assert!(test.user_index(UserId(1)).is_none());
            // Every test user must also appear in train.
            for user in test.user_ids() {
                assert!(pair.train.user_index(*user).is_some());
            }
        }
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let data = Dataset::from_records(vec![record(1, 1, 3.0)]).unwrap();
        assert!(matches!(
            split(&data, 1.0, 0),
            Err(DataError::InvalidFraction(_))
        ));
        assert!(matches!(
            split(&data, 0.0, 0),
            Err(DataError::InvalidFraction(_))
        ));
    }

    #[test]
    fn item_means_match_hand_values() {
        let data = Dataset::from_records(vec![
            record(1, 1, 2.0),
            record(2, 1, 2.0),
            record(3, 1, 2.0),
            record(1, 2, 5.0),
            record(2, 2, 3.0),
            record(1, 3, 4.0),
            record(2, 3, 2.0),
            record(3, 3, 5.0),
            record(4, 3, 1.0),
        ])
        .unwrap();
        let means = item_means(&data);
        assert_eq!(means[&ItemId(1)], 2.0);
        assert_eq!(means[&ItemId(2)], 4.0);
        assert_eq!(means[&ItemId(3)], 3.0);
        assert!(means.values().all(|m| (1.0..=5.0).contains(m)));
    }

    #[test]
    fn dat_round_trip_is_identity() {
        let data = Dataset::from_records(vec![
            record(3, 7, 4.5),
            record(1, 2, 1.0),
            record(2, 7, 3.0),
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_ratings_dat(&data, &mut buf).unwrap();
        let reparsed = parse_ratings(Cursor::new(buf)).unwrap();
        assert_eq!(reparsed.records(), data.records());
    }

    #[test]
    fn csv_round_trip_is_identity() {
        let data = Dataset::from_records(vec![record(3, 7, 4.5), record(1, 2, 1.0)]).unwrap();
        let mut buf = Vec::new();
        write_ratings_csv(&data, &mut buf).unwrap();
        let reparsed = read_ratings_csv(Cursor::new(buf)).unwrap();
        assert_eq!(reparsed.records(), data.records());
    }

    mod round_trip {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn serialize_then_parse_is_identity(
                cells in proptest::collection::btree_map(
                    (1u32..30, 1u32..30),
                    (1.0f64..=5.0, 0i64..2_000_000_000),
                    1..60,
                )
            ) {
                let records: Vec<RatingRecord> = cells
                    .iter()
                    .map(|(&(u, i), &(r, t))| RatingRecord {
                        user: UserId(u),
                        item: ItemId(i),
                        rating: r,
                        timestamp: t,
                    })
                    .collect();
                let data = Dataset::from_records(records).unwrap();
                let mut buf = Vec::new();
                write_ratings_dat(&data, &mut buf).unwrap();
                let reparsed = parse_ratings(Cursor::new(buf)).unwrap();
                prop_assert_eq!(reparsed.records(), data.records());
            }
        }
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = Dataset::from_records(vec![record(1, 1, 3.0), record(1, 2, 4.0)]).unwrap();
        let b = Dataset::from_records(vec![record(1, 2, 4.0), record(1, 1, 3.0)]).unwrap();
        let c = Dataset::from_records(vec![record(1, 1, 3.0), record(1, 2, 5.0)]).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
    }
}
