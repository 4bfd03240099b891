//! Workloads shared by the benchmarks.

use adcl_core::parser::{parse, parse_formula};
use adcl_core::ts::{Location, Provenance};
use adcl_core::{Formula, Transition, TransitionSystem};

/// Needs two accelerations to get past a 5000-step prefix.
pub const LEADING: &str = include_str!("../../../corpus/leading.its");

pub const COUNTER_UP: &str = include_str!("../../../corpus/counter_up.its");

pub fn system(text: &str) -> TransitionSystem {
    parse(text).expect("workload parses")
}

/// A recursive transition at `l` over `x, y, z`.
pub fn self_loop(cond: &str) -> Transition {
    let names: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    let cond: Formula = parse_formula(cond, &names, true).expect("workload parses");
    let l = Location::new("l");
    Transition::new(l.clone(), l, cond, Provenance::Original(0)).expect("valid transition")
}

/// The `x < z` branch of the leading loop.
pub fn below_branch() -> Transition {
    self_loop("y <= 2*z && x' = x + 1 && x < z && y' = y && z' = z")
}

/// The swap-and-decrement cycle, one transition per step.
pub fn swap_cycle() -> Vec<Transition> {
    [
        "x = y && x > 0 && x' = x && y' = y - 1 && z' = z",
        "x > 0 && y > 0 && x' = y && x > y && y' = x && z' = z",
        "x > 0 && y > 0 && x' = y && x < y && y' = y && z' = z",
    ]
    .iter()
    .map(|c| self_loop(c))
    .collect()
}
