//! Delimiter-separated ratings files: `user, item, rating[, timestamp]`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of malformed rows tolerated before parsing fails.
pub const MAX_MALFORMED_FRACTION: f64 = 0.01;
const MALFORMED_SAMPLES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Movielens,
    Jester,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Movielens => "movielens",
            DatasetKind::Jester => "jester",
        }
    }

    pub fn tag(self) -> u32 {
        match self {
            DatasetKind::Movielens => 0,
            DatasetKind::Jester => 1,
        }
    }

    pub fn from_tag(tag: u32) -> Result<Self> {
        match tag {
            0 => Ok(DatasetKind::Movielens),
            1 => Ok(DatasetKind::Jester),
            other => Err(Error::data(format!("unknown dataset tag {other}"))),
        }
    }

    pub fn scale(self) -> RatingScale {
        match self {
            DatasetKind::Movielens => RatingScale {
                min: 0.5,
                max: 5.0,
                step: Some(0.5),
            },
            DatasetKind::Jester => RatingScale {
                min: -10.0,
                max: 10.0,
                step: None,
            },
        }
    }

    /// Binary reward for a rating: MovieLens pays on ratings above 3, Jester on
    /// ratings above 0. Unrated pairs pay 0.
    pub fn binarize(self, rating: Option<f64>) -> u8 {
        match (self, rating) {
            (_, None) => 0,
            (DatasetKind::Movielens, Some(r)) => u8::from(r > 3.0),
            (DatasetKind::Jester, Some(r)) => u8::from(r > 0.0),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "movielens" => Ok(DatasetKind::Movielens),
            "jester" => Ok(DatasetKind::Jester),
            other => Err(Error::invalid(format!("unknown dataset '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
    /// Grid step for discrete scales; `None` for continuous ones.
    pub step: Option<f64>,
}

impl RatingScale {
    pub fn contains(&self, r: f64) -> bool {
        if !r.is_finite() || r < self.min || r > self.max {
            return false;
        }
        match self.step {
            Some(step) => {
                let k = (r - self.min) / step;
                (k - k.round()).abs() < 1e-9
            }
            None => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub user: u64,
    pub item: u64,
    pub rating: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatingsTable {
    pub triplets: Vec<Rating>,
    pub scale: RatingScale,
    /// Rows rejected during parsing.
    pub malformed: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum HeaderMode {
    /// Skip the first line when its first field is not a number.
    #[default]
    Auto,
    Skip,
    None,
}

#[derive(Clone, Debug)]
pub struct ParseOptions {
    pub delimiter: String,
    pub header: HeaderMode,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            delimiter: ",".into(),
            header: HeaderMode::Auto,
        }
    }
}

impl RatingsTable {
    /// Build from records, dropping earlier duplicates of a `(user, item)` pair.
    pub fn from_ratings(records: Vec<Rating>, scale: RatingScale) -> Self {
        let mut last: HashMap<(u64, u64), usize> = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            last.insert((r.user, r.item), i);
        }
        let triplets = records
            .into_iter()
            .enumerate()
            .filter(|(i, r)| last[&(r.user, r.item)] == *i)
            .map(|(_, r)| r)
            .collect();
        Self {
            triplets,
            scale,
            malformed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn num_users(&self) -> usize {
        self.triplets.iter().map(|r| r.user).collect::<HashSet<_>>().len()
    }

    pub fn num_items(&self) -> usize {
        self.triplets.iter().map(|r| r.item).collect::<HashSet<_>>().len()
    }

    /// Keep only ratings of the given items.
    pub fn restrict_items(&self, items: &[u64]) -> RatingsTable {
        let keep: HashSet<u64> = items.iter().copied().collect();
        RatingsTable {
            triplets: self.triplets.iter().filter(|r| keep.contains(&r.item)).copied().collect(),
            scale: self.scale,
            malformed: self.malformed,
        }
    }
}

pub fn parse_ratings(path: &Path, kind: DatasetKind, opts: &ParseOptions) -> Result<RatingsTable> {
    let file = File::open(path)?;
    parse_ratings_from(BufReader::new(file), kind, opts)
}

pub fn parse_ratings_from<R: BufRead>(reader: R, kind: DatasetKind, opts: &ParseOptions) -> Result<RatingsTable> {
    if opts.delimiter.is_empty() {
        return Err(Error::invalid("delimiter must not be empty"));
    }
    let scale = kind.scale();
    let mut records = Vec::new();
    let mut malformed = Vec::new();
    let mut rows = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if lineno == 0 {
            let first = trimmed.split(opts.delimiter.as_str()).next().unwrap_or("").trim();
            let skip = match opts.header {
                HeaderMode::Skip => true,
                HeaderMode::None => false,
                HeaderMode::Auto => first.parse::<f64>().is_err(),
            };
            if skip {
                continue;
            }
        }
        rows += 1;
        match parse_row(trimmed, &opts.delimiter, &scale) {
            Some(r) => records.push(r),
            None => malformed.push((lineno + 1, line.clone())),
        }
    }

    if rows > 0 && malformed.len() as f64 > MAX_MALFORMED_FRACTION * rows as f64 {
        let samples: Vec<String> = malformed
            .iter()
            .take(MALFORMED_SAMPLES)
            .map(|(n, l)| format!("line {n}: {l}"))
            .collect();
        return Err(Error::data(format!(
            "{} of {rows} rows malformed; first offenders: {}",
            malformed.len(),
            samples.join(" | ")
        )));
    }

    let mut table = RatingsTable::from_ratings(records, scale);
    table.malformed = malformed.len();
    Ok(table)
}

fn parse_row(line: &str, delimiter: &str, scale: &RatingScale) -> Option<Rating> {
    let mut fields = line.split(delimiter).map(str::trim);
    let user = fields.next()?.parse::<u64>().ok()?;
    let item = fields.next()?.parse::<u64>().ok()?;
    let rating = fields.next()?.parse::<f64>().ok()?;
    if !scale.contains(rating) {
        return None;
    }
    Some(Rating { user, item, rating })
}

/// The `count` most-rated items; ties broken by higher mean rating, then by
/// lower item id.
pub fn select_top_items(table: &RatingsTable, count: usize) -> Result<Vec<u64>> {
    let mut stats: HashMap<u64, (usize, f64)> = HashMap::new();
    for r in &table.triplets {
        let e = stats.entry(r.item).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += r.rating;
    }
    if count > stats.len() {
        return Err(Error::invalid(format!(
            "requested {count} top items but the table has only {} distinct items",
            stats.len()
        )));
    }
    let mut ranked: Vec<(u64, usize, f64)> = stats
        .into_iter()
        .map(|(item, (n, sum))| (item, n, sum / n as f64))
        .collect();
    ranked.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then_with(|| b.2.total_cmp(&a.2))
            .then_with(|| a.0.cmp(&b.0))
    });
    Ok(ranked.into_iter().take(count).map(|(item, _, _)| item).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str, kind: DatasetKind) -> Result<RatingsTable> {
        parse_ratings_from(text.as_bytes(), kind, &ParseOptions::default())
    }

    #[test]
    fn empty_file() {
        let t = parse("", DatasetKind::Movielens).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.num_users(), 0);
    }

    #[test]
    fn three_line_csv() {
        let t = parse("1,10,4.5\n2,10,3.0\n2,11,0.5\n", DatasetKind::Movielens).unwrap();
        assert_eq!(
            t.triplets,
            vec![
                Rating { user: 1, item: 10, rating: 4.5 },
                Rating { user: 2, item: 10, rating: 3.0 },
                Rating { user: 2, item: 11, rating: 0.5 },
            ]
        );
        assert_eq!(t.malformed, 0);
    }

    #[test]
    fn header_and_timestamp_columns() {
        let text = "userId,movieId,rating,timestamp\n1,31,2.5,1260759144\n1,1029,3.0,1260759179\n";
        let t = parse(text, DatasetKind::Movielens).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.triplets[1].item, 1029);
    }

    #[test]
    fn double_colon_delimiter() {
        let opts = ParseOptions {
            delimiter: "::".into(),
            header: HeaderMode::None,
        };
        let t = parse_ratings_from("1::1193::5::978300760\n".as_bytes(), DatasetKind::Movielens, &opts).unwrap();
        assert_eq!(t.triplets[0], Rating { user: 1, item: 1193, rating: 5.0 });
    }

    #[test]
    fn out_of_scale_row_is_malformed() {
        let mut text = String::new();
        for u in 0..200 {
            text.push_str(&format!("{u},1,4.0\n"));
        }
        text.push_str("7,2,6.0\n");
        let t = parse(&text, DatasetKind::Movielens).unwrap();
        assert_eq!(t.len(), 200);
        assert_eq!(t.malformed, 1);
        // Off-grid MovieLens rating.
        assert!(!DatasetKind::Movielens.scale().contains(3.3));
        assert!(DatasetKind::Jester.scale().contains(-9.71));
    }

    #[test]
    fn too_many_malformed_rows() {
        let err = parse("1,1,4.0\n1,2,banana\n", DatasetKind::Movielens).unwrap_err();
        match err {
            Error::Data(msg) => assert!(msg.contains("banana")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicates_keep_last() {
        let t = parse("1,1,2.0\n1,1,4.5\n", DatasetKind::Movielens);
        // 0 malformed of 2 rows.
        let t = t.unwrap();
        assert_eq!(t.triplets, vec![Rating { user: 1, item: 1, rating: 4.5 }]);
    }

    #[test]
    fn missing_file_is_io_error() {
        let r = parse_ratings(Path::new("/nonexistent/ratings.csv"), DatasetKind::Jester, &ParseOptions::default());
        assert!(matches!(r, Err(Error::Io(_))));
    }

    #[test]
    fn top_items_by_count_then_mean() {
        let rows = vec![
            (1, 7, 3.0), (2, 7, 3.0), (3, 7, 3.0),
            (1, 3, 5.0), (2, 3, 4.0),
            (1, 4, 3.0), (2, 4, 3.0),
            (1, 9, 1.0),
            (3, 5, 2.0),
        ];
        let table = RatingsTable::from_ratings(
            rows.into_iter().map(|(user, item, rating)| Rating { user, item, rating }).collect(),
            DatasetKind::Movielens.scale(),
        );
        assert_eq!(select_top_items(&table, 1).unwrap(), vec![7]);
        assert_eq!(select_top_items(&table, 3).unwrap(), vec![7, 3, 4]);
        // Equal count and mean: lower id first.
        assert_eq!(select_top_items(&table, 5).unwrap(), vec![7, 3, 4, 5, 9]);
        assert!(select_top_items(&table, 6).is_err());
    }

    #[test]
    fn binarization_rules() {
        assert_eq!(DatasetKind::Movielens.binarize(Some(3.5)), 1);
        assert_eq!(DatasetKind::Movielens.binarize(Some(3.0)), 0);
        assert_eq!(DatasetKind::Movielens.binarize(Some(4.5)), 1);
        assert_eq!(DatasetKind::Movielens.binarize(None), 0);
        assert_eq!(DatasetKind::Jester.binarize(Some(-2.1)), 0);
        assert_eq!(DatasetKind::Jester.binarize(Some(0.0)), 0);
        assert_eq!(DatasetKind::Jester.binarize(Some(0.01)), 1);
        assert_eq!(DatasetKind::Jester.binarize(None), 0);
    }

    proptest! {
        #[test]
        fn movielens_grid_binarization(step in 1u32..=10) {
            let r = step as f64 * 0.5;
            prop_assert!(DatasetKind::Movielens.scale().contains(r));
            prop_assert_eq!(DatasetKind::Movielens.binarize(Some(r)), u8::from(step > 6));
        }

        #[test]
        fn jester_binarization(r in -10.0f64..=10.0) {
            prop_assert_eq!(DatasetKind::Jester.binarize(Some(r)), u8::from(r > 0.0));
        }
    }
}
