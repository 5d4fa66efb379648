pub mod evaluate;
pub mod explain;
pub mod fit_cann;
pub mod fit_glm;
pub mod prepare;
pub mod synth;
pub mod tune;
