//! Fixtures shared by the benchmarks.

use patterncard::learners::TrainingSet;
use patterncard::querygraph::{parse_sql, QueryDag};

/// A four-way star join with one filter per table.
pub fn star_query() -> QueryDag {
    parse_sql(
        "SELECT COUNT(*) FROM title t, movie_companies mc, cast_info ci, movie_keyword mk \
         WHERE t.id = mc.movie_id AND t.id = ci.movie_id AND t.id = mk.movie_id \
         AND t.production_year > 1990 AND mc.company_type_id = 2 AND ci.role_id = 4 AND mk.keyword_id < 900",
        None,
    )
    .expect("valid query")
}

/// `n` rows of a smooth target over `d` features.
pub fn training_set(n: usize, d: usize) -> TrainingSet {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..d).map(|j| ((i * (j + 3)) % 97) as f64).collect())
        .collect();
    let y: Vec<f64> = rows.iter().map(|r| r.iter().sum::<f64>().ln_1p()).collect();
    TrainingSet::from_targets(&rows, &y).expect("consistent rows")
}
