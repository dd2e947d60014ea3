pub mod alignment;
pub mod correlation;
pub mod human;
pub mod metrics;
pub mod report;
pub mod resources;
pub mod text;
