pub mod analyzer;
pub mod gateway;
pub mod memory;
pub mod metrics;
pub mod pipeline;

mod fsutil;
