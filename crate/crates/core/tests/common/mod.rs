#![allow(dead_code)]

#[macro_use]
pub mod nlp_cases;
