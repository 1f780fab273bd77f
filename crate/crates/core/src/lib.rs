pub mod analytics;
pub mod case;
pub mod cli;
pub mod demo;
pub mod dr;
pub mod lp;
pub mod market;
pub mod mining;
pub mod network;
