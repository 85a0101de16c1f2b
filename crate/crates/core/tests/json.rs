use serde::Serialize;
use shallow_learner::error::Error;

use shallow_learner::json::*;
use serde::Deserialize;

#[derive(Serialize, Deserialize, Debug, PartialEq)]
struct Sample {
    zeta: f64,
    alpha: Vec<f64>,
}

#[test]
fn keys_sorted_and_floats_fixed() {
    let s = Sample { zeta: 0.1, alpha: vec![1.0, -2.5e-7] };
    let text = to_canonical_string(&s).unwrap();
    assert_eq!(
        text,
        r#"{"alpha":[1.0000000000000000e0,-2.4999999999999999e-7],"zeta":1.0000000000000001e-1}"#
    );
    let back: Sample = from_str_with_path(&text).unwrap();
    assert_eq!(back, s);
}

#[test]
fn schema_errors_carry_pointer() {
    let err = from_str_with_path::<Sample>(r#"{"zeta":1.0,"alpha":[1.0,"x"]}"#).unwrap_err();
    match err {
        Error::Schema { pointer, .. } => assert_eq!(pointer, "/alpha/1"),
        other => panic!("unexpected {other:?}"),
    }
}
