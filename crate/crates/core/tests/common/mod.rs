#![allow(dead_code)]

pub use dislocade::oracle::*;
