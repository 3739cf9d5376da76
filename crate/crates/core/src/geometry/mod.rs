//! Weights `η` satisfying the decay condition, and the bicharacteristic rays along which they decrease.

mod condition;
mod rays;

pub use condition::{
    best_linear_eta, certify_condition, minimal_time, search_linear_eta, Certification, WeightCandidate, CERT_POINTS_PER_AXIS,
};
pub use rays::{branch_value_and_grad, random_seeds, trace_ray, trace_rays, Ray, RayIssue, RaySample, RaySeed, OVERLAP_THRESHOLD};
