pub mod model;
pub mod precision;
pub mod series;
pub mod gfunction;
pub mod reference;
pub mod spectrum;
