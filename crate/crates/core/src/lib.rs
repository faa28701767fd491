pub mod annotations;
pub mod behavior;
pub mod description;
pub mod features;
pub mod http;
pub mod kinematics;
pub mod renderer;
pub mod retrieval;
pub mod spatial;
pub mod stroke_log;
