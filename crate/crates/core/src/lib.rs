pub mod certify;
pub mod cloud;
pub mod collar;
pub mod geomaps;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod polyring;
pub mod rng;
pub mod sampler;
