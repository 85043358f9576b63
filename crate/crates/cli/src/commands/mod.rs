pub mod bo;
pub mod fit;
pub mod gsa;
pub mod sample;
pub mod validate;
