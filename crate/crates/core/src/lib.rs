pub mod adaptive;
pub mod estimators;
pub mod geometry;
pub mod linalg;
pub mod oracle;
pub mod samples;
pub mod stats;
pub mod surrogate;
pub mod testbed;
pub mod experiment;
