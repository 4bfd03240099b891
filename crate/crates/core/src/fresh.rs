//! Fresh parameter names (`v$k` for chaining intermediates, `n$k` for
//! iteration counters).
//!
//! The counter is thread local: one search instance runs on one thread, so
//! names are deterministic per instance and never shared between instances.

use std::cell::Cell;

use crate::formula::{Formula, VarId};

thread_local! {
    static NEXT: Cell<u64> = const { Cell::new(0) };
}

pub fn fresh_param(prefix: &str) -> VarId {
    let k = NEXT.with(|n| {
        let k = n.get();
        n.set(k + 1);
        k
    });
    VarId::param(&format!("{prefix}${k}"))
}

/// Make sure future names do not collide with `name` (used after parsing
/// formulas that already contain generated parameters).
pub fn observe(name: &str) {
    if let Some(k) = name
        .rsplit_once('$')
        .and_then(|(_, k)| k.parse::<u64>().ok())
    {
        NEXT.with(|n| n.set(n.get().max(k + 1)));
    }
}

pub fn observe_formula(f: &Formula) {
    for v in f.params() {
        if let VarId::Param(p) = v {
            observe(&p);
        }
    }
}

/// Restart numbering. Callers must ensure that no live formula uses a
/// generated name (or call [`observe_formula`] for those that do).
pub fn reset() {
    NEXT.with(|n| n.set(0));
}
