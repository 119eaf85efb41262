//! Workflow models from OpenRefine operation histories.
//!
//! [`recipe`] parses the exported JSON, [`effects`] traces how each step
//! changes the column schema, [`graph`] builds linear, parallel and collapsed
//! models, and [`emit`] renders them as DOT or YesWorkflow text. [`engine`] is
//! a small interpreter used to check that reorderings allowed by the parallel
//! model leave results unchanged.

pub mod cli;
pub mod effects;
pub mod emit;
pub mod engine;
pub mod graph;
pub mod grel;
pub mod recipe;
