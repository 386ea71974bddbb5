//! Monte-Carlo checks of measure contraction, ray structure and cut loci.

mod profile;
mod rays;
mod verify;

pub use profile::MCPProfile;
pub use rays::{
    direction_bin, disintegrate, ray_coverage, sc_frequency, sc_membership, shape_bin, BinKind, CoverageReport, RayBin,
    RayDecomposition, ScScan,
};
pub use verify::{
    contraction_profile, mcp_verify, mcp_verify_with, strong_mcp_verify, trial_rng, ContractionEstimator,
    EstimatorRegistry, JacobianEstimator, McpConfig, McpReport, McpRow, McpWitness, NeighborhoodEstimator, RatioProbe,
    Resolution,
};
