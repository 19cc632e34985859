//! Data pipeline and target machinery for BEST-RQ style speech pretraining:
//! segmentation, log-mel features, a frozen random-projection quantizer,
//! span masking, dynamic-chunk attention masks, a seeded conformer forward
//! pass and forward-only downstream heads.

pub mod ingest;
pub mod rng;
pub mod features;
pub mod quantizer;
pub mod masking;
pub mod chunking;
pub mod encoder;
pub mod heads;
