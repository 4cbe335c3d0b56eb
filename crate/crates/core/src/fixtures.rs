//! Small shipped datasets used by tests, docs, and the CLI examples.

use crate::data::{Dataset, OutcomeColumn};

/// The worked eight-record example: one binary covariate, both strata
/// balanced, every estimator lands on exactly 0.5.
pub const D1_CSV: &str = "\
x,z,y
0,1,1
0,1,0
0,0,0
0,0,0
1,1,1
1,1,1
1,0,1
1,0,0
";

/// The eight-record example as an in-memory dataset (columns x, z, y).
pub fn d1() -> Dataset {
    Dataset::new(
        vec![("x".into(), vec![0, 0, 0, 0, 1, 1, 1, 1])],
        ("z".into(), vec![1, 1, 0, 0, 1, 1, 0, 0]),
        ("y".into(), OutcomeColumn::Binary(vec![1, 0, 0, 0, 1, 1, 1, 0])),
    )
    .expect("fixture is well-formed")
}
