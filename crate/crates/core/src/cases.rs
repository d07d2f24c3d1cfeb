//! Bundled IEEE test systems in MATPOWER format.

use crate::error::Result;
use crate::grid::{parse_case, Network};

pub const IEEE14: &str = include_str!("../fixtures/ieee14.m");
pub const IEEE30: &str = include_str!("../fixtures/ieee30.m");
pub const IEEE118: &str = include_str!("../fixtures/ieee118.m");

/// Case text for a bundled alias (`ieee14`, `ieee30`, `ieee118`).
pub fn bundled_text(alias: &str) -> Option<&'static str> {
    match alias {
        "ieee14" => Some(IEEE14),
        "ieee30" => Some(IEEE30),
        "ieee118" => Some(IEEE118),
        _ => None,
    }
}

pub fn ieee14() -> Network {
    parse_case(IEEE14).expect("bundled case parses")
}

pub fn ieee30() -> Network {
    parse_case(IEEE30).expect("bundled case parses")
}

pub fn ieee118() -> Network {
    parse_case(IEEE118).expect("bundled case parses")
}

pub fn load_bundled(alias: &str) -> Option<Result<Network>> {
    bundled_text(alias).map(parse_case)
}
