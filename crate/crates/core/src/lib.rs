pub mod pointlin;
pub mod torusfield;
pub mod hermitian;
pub mod cohomlab;
pub mod lab;
