//! File formats: weights, MNIST IDX containers and CSV reports.

pub mod idx;
pub mod report;
pub mod weights;
