pub mod cli;
pub mod dynamics;
pub mod metrics;
pub mod pipeline;
pub mod plot;
pub mod poly;
pub mod sdp;
pub mod sos;
