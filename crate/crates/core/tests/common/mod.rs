#![allow(dead_code)]
pub mod cgen;
pub mod corpus;
pub mod tdist;
