//! Execution of hybrid closed loops: adaptive flow inside `C_q`, guard
//! localization on dense output, jumps, and arc recording.
//!
//! Where flow and jump sets overlap the executor jumps as soon as the state
//! reaches `D_q`, which selects one solution among the possible ones.

mod arc;
mod event;
mod integrator;
mod simulate;

pub use arc::{HybridArc, HybridTime, JumpRecord, Phase, Sample, Termination};
pub use event::{first_crossing, locate_event, Event};
pub use integrator::{
    flow_step, integrate_fixed, trial_step, AcceptedStep, DenseSegment, IntegratorConfig, Rhs,
    Stepper, TrialStep,
};
pub use simulate::{simulate, simulate_batch, ConstantMode, HybridController};
