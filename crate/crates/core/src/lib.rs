pub mod charts;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod flow;
pub mod maps;
pub mod numdiff;
pub mod observables;
pub mod quat;
pub mod sampling;
pub mod verify;
