#![allow(dead_code)]

pub mod gen;
pub mod invariants;
pub mod oracle;
