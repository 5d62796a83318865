//! Joins the three Book-Crossing dump files (`BX-Book-Ratings.csv`,
//! `BX-Users.csv`, `BX-Books.csv`) into one interaction table.
//!
//! The dump is semicolon-separated, double-quoted and Latin-1 encoded, and a
//! handful of book rows contain stray backslash escapes. Rows that cannot be
//! parsed are skipped and counted instead of aborting the load.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::engine::init::rng_for;
use crate::error::{Error, Result};
use crate::ingest::{PrepareOptions, Table, BOOK_CROSSING_THRESHOLD};

pub const RATINGS_FILE: &str = "BX-Book-Ratings.csv";
pub const USERS_FILE: &str = "BX-Users.csv";
pub const BOOKS_FILE: &str = "BX-Books.csv";

pub const COLUMNS: [&str; 8] = [
    "user_id",
    "isbn",
    "rating",
    "age",
    "country",
    "author",
    "year",
    "publisher",
];

#[derive(Debug, Clone, PartialEq)]
pub struct BookCrossingOptions {
    /// Keep at most this many interactions (seeded sample); `None` keeps all.
    pub max_interactions: Option<usize>,
    /// Drop implicit interactions (rating 0).
    pub explicit_only: bool,
    pub seed: u64,
}

impl Default for BookCrossingOptions {
    fn default() -> Self {
        Self {
            max_interactions: Some(50_000),
            explicit_only: false,
            seed: 2023,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BookCrossing {
    pub table: Table,
    pub skipped_rows: usize,
}

fn lenient_rows(path: &Path, width: usize, skipped: &mut usize) -> Result<Vec<Vec<String>>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b';')
        .escape(Some(b'\\'))
        .flexible(true)
        .has_headers(true)
        .from_reader(&bytes[..]);
    let mut rows = Vec::new();
    for rec in rdr.byte_records() {
        match rec {
            Ok(r) if r.len() >= width => rows.push(
                r.iter()
                    .take(width)
                    .map(|c| match std::str::from_utf8(c) {
                        Ok(s) => s.replace(['\t', '\n', '\r'], " "),
                        Err(_) => c.iter().map(|&b| b as char).collect(),
                    })
                    .collect(),
            ),
            _ => *skipped += 1,
        }
    }
    Ok(rows)
}

pub fn load(dir: &Path, opts: &BookCrossingOptions) -> Result<BookCrossing> {
    let mut skipped = 0;
    let ratings = lenient_rows(&dir.join(RATINGS_FILE), 3, &mut skipped)?;
    let users: HashMap<String, (String, String)> =
        lenient_rows(&dir.join(USERS_FILE), 3, &mut skipped)?
            .into_iter()
            .map(|r| {
                let country = r[1].rsplit(',').next().unwrap_or("").trim().to_string();
                (r[0].clone(), (r[2].clone(), country))
            })
            .collect();
    let books: HashMap<String, (String, String, String)> =
        lenient_rows(&dir.join(BOOKS_FILE), 5, &mut skipped)?
            .into_iter()
            .map(|r| (r[0].clone(), (r[2].clone(), r[3].clone(), r[4].clone())))
            .collect();

    let mut rows: Vec<Vec<String>> = ratings
        .into_iter()
        .filter(|r| !(opts.explicit_only && r[2].trim() == "0"))
        .map(|r| {
            let (age, country) = users.get(&r[0]).cloned().unwrap_or_default();
            let (author, year, publisher) = books.get(&r[1]).cloned().unwrap_or_default();
            vec![
                r[0].clone(),
                r[1].clone(),
                r[2].clone(),
                age,
                country,
                author,
                year,
                publisher,
            ]
        })
        .collect();
    if let Some(n) = opts.max_interactions {
        if rows.len() > n {
            rows.shuffle(&mut rng_for(opts.seed, "bookcrossing-subsample"));
            rows.truncate(n);
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(BookCrossing {
        table: Table {
            header: COLUMNS.iter().map(|s| s.to_string()).collect(),
            rows,
        },
        skipped_rows: skipped,
    })
}

/// Prepare options for the joined table: all attributes categorical, age
/// and publication year bucketized into deciles.
pub fn prepare_options(seed: u64) -> PrepareOptions {
    let mut o = PrepareOptions::new(
        "rating",
        &[
            "user_id",
            "isbn",
            "age",
            "country",
            "author",
            "year",
            "publisher",
        ],
        BOOK_CROSSING_THRESHOLD,
    );
    o.bucketize = vec![("age".into(), 10), ("year".into(), 10)];
    o.seed = seed;
    o
}
