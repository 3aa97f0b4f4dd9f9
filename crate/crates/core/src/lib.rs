//! Continuous-assurance toolkit: explicit-state DTMC model checking of a
//! PRISM-style modelling language, and generation and maintenance of a
//! traceable GSN assurance argument from the verification results.

pub mod diag;
pub mod engine;
pub mod gsn;
pub mod hash;
pub mod lifecycle;
pub mod model;
pub mod parser;
pub mod pipeline;
pub mod statespace;
pub mod transformer;
