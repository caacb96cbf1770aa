//! Hölder cocycles over full shifts with values in bi-invariant metric
//! groups, and the numerical pipeline that untwists them.

pub mod holonomy;
pub mod pipeline;
pub mod spec;
pub mod target;

pub use holonomy::{Anchor, HolonomyCertificate, HolonomySign};
pub use pipeline::{
    extract_homomorphism, generator_independence, holder_modulus, holonomy_identity_check, plus_minus_agree,
    specification_decay, DecayRow, Extraction, HolderFit, TransferTable, DEFAULT_EPSILON,
};
pub use spec::{images_from_basis, BlockMap, CocycleFile, CocycleSpec};
pub use target::{FiniteGroup, HElem, MetricGroup, RealVector, TargetFile, TargetGroup, Torus};
