//! Runs the built-in oracle checks, then again with injected faults to show
//! that they are caught.

use dmimo::harness::{run_conformance, run_conformance_with, Faults};

fn main() {
    println!("{}", run_conformance());
    let faulty = run_conformance_with(Faults {
        flip_cancellation: true,
        sigma_user_dimension: true,
    });
    println!("with injected faults:\n{faulty}");
}
