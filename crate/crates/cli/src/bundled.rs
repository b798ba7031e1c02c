//! Scenario files shipped with the binary.

pub const BUNDLED: &[(&str, &str)] = &[
    ("recursive-d8", include_str!("../scenarios/recursive-d8.toml")),
    ("arace-d8", include_str!("../scenarios/arace-d8.toml")),
    ("proof-carrying-line2", include_str!("../scenarios/proof-carrying-line2.toml")),
    ("adversary-full", include_str!("../scenarios/adversary-full.toml")),
    ("envelope-paper", include_str!("../scenarios/envelope-paper.toml")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn get(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Expected simulate report for a bundled scenario.
pub fn golden(name: &str) -> Option<&'static str> {
    match name {
        "recursive-d8" => Some(include_str!("../scenarios/golden/recursive-d8.json")),
        "arace-d8" => Some(include_str!("../scenarios/golden/arace-d8.json")),
        "proof-carrying-line2" => Some(include_str!("../scenarios/golden/proof-carrying-line2.json")),
        "adversary-full" => Some(include_str!("../scenarios/golden/adversary-full.json")),
        "envelope-paper" => Some(include_str!("../scenarios/golden/envelope-paper.json")),
        _ => None,
    }
}
