//! Shared fixtures for the integration suites: the two reference
//! environment pairs used throughout the crate's validation corpus.
#![allow(dead_code)]

use lv_switch::env::{EnvPair, Environment};

/// Reference configuration with `I = (1/2 - sqrt6/8, 1/2 + sqrt6/8)` and,
/// for `rho = 5.5`, `J` strictly inside `I`. `rho` is the `d` coefficient
/// of the second environment.
pub fn top_pair(rho: f64) -> EnvPair {
    EnvPair::new(
        Environment::new(1.0, 1.0, 2.0, 2.0, 1.0, 5.0).unwrap(),
        Environment::new(3.0, 3.0, 4.0, rho, 5.0, 1.0).unwrap(),
    )
    .unwrap()
}

/// Configuration with `I = (2/7, 1/2)`; `rho` moves `J` (disjoint from `I`
/// at 6.8, overlapping at 6.2).
pub fn bottom_pair(rho: f64) -> EnvPair {
    EnvPair::new(
        Environment::new(1.0, 2.0 / 3.0, 2.0, 4.0 / 3.0, 1.0, 2.0).unwrap(),
        Environment::new(3.0, 3.0, 4.0, rho, 5.0, 1.0).unwrap(),
    )
    .unwrap()
}

/// JSON pair-file body matching [`top_pair`], for CLI-level tests.
pub fn top_pair_json(rho: f64) -> String {
    format!(
        concat!(
            "{{\n",
            "  \"env0\": {{\"a\": 1.0, \"b\": 1.0, \"c\": 2.0, \"d\": 2.0, ",
            "\"alpha\": 1.0, \"beta\": 5.0}},\n",
            "  \"env1\": {{\"a\": 3.0, \"b\": 3.0, \"c\": 4.0, \"d\": {rho}, ",
            "\"alpha\": 5.0, \"beta\": 1.0}}\n",
            "}}\n"
        ),
        rho = rho
    )
}

/// JSON pair-file body matching [`bottom_pair`].
pub fn bottom_pair_json(rho: f64) -> String {
    format!(
        concat!(
            "{{\n",
            "  \"env0\": {{\"a\": 1.0, \"b\": 0.6666666666666666, \"c\": 2.0, ",
            "\"d\": 1.3333333333333333, \"alpha\": 1.0, \"beta\": 2.0}},\n",
            "  \"env1\": {{\"a\": 3.0, \"b\": 3.0, \"c\": 4.0, \"d\": {rho}, ",
            "\"alpha\": 5.0, \"beta\": 1.0}}\n",
            "}}\n"
        ),
        rho = rho
    )
}

/// Relative closeness helper shared by the suites.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1.0_f64.max(a.abs().max(b.abs()))
}
