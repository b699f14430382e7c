//! Cohort manifests, synthetic cohorts, matrix files and checkpoints.

pub mod checkpoint;
pub mod cohort;
pub mod matrix_io;
pub mod synthetic;

pub use checkpoint::Checkpoint;
pub use cohort::{cohort_from_matrices, load_cohort, save_cohort, Cohort, CohortManifest};
pub use matrix_io::{read_matrix, write_matrix, write_vector};
pub use synthetic::{generate_synthetic, synthetic_subject, SyntheticSpec};
