//! On-disk formats: binary descriptor files, the `GRA1` affinity text format,
//! ranking exports, label files and identifier sidecars.

mod gra;
mod labels;
mod rankings;
mod vectors;

pub use gra::{format_sig9, read_affinity, write_affinity};
pub use labels::{read_labels, write_labels};
pub use rankings::{read_rankings, rankings_from_records, write_rankings, RankingRecord};
pub use vectors::{decode_vectors, encode_vectors, read_descriptors, read_ids, write_descriptors, write_ids};
