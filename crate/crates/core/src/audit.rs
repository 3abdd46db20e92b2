//! Process-wide record of constraint checks.
//!
//! Every [`Embedding`](crate::lpe::Embedding) and every centroid produced by
//! the library reports its constraint residual here. Test suites read the
//! tallies to assert that nothing produced during a run violated its
//! invariant.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

static CHECKED: AtomicUsize = AtomicUsize::new(0);
static VIOLATIONS: Mutex<Vec<String>> = Mutex::new(Vec::new());

pub fn observe(what: &str, residual: f64, tol: f64) {
    CHECKED.fetch_add(1, Ordering::Relaxed);
    if !(residual <= tol) {
        let mut v = VIOLATIONS.lock().unwrap_or_else(|e| e.into_inner());
        v.push(format!("{what}: residual {residual:e} > {tol:e}"));
    }
}

#[derive(Debug, Clone, Default)]
pub struct AuditSnapshot {
    pub checked: usize,
    pub violations: Vec<String>,
}

pub fn snapshot() -> AuditSnapshot {
    AuditSnapshot {
        checked: CHECKED.load(Ordering::Relaxed),
        violations: VIOLATIONS.lock().unwrap_or_else(|e| e.into_inner()).clone(),
    }
}
