//! PID gain autotuning with a zero-step advantage actor-critic on a
//! simulated two-link arm.

pub mod agent;
pub mod cli;
pub mod control;
pub mod harness;
pub mod neuralnet;
pub mod numfmt;
pub mod plant;
pub mod spline;
pub mod tracking;
pub mod trajectory;
