#![allow(dead_code)]

pub mod clusters;
pub mod oracle;
