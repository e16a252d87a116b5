//! Lightweight invocation counters for the attention and anchor-proposal
//! entry points.
//!
//! The ablation flags promise that a disabled module is never entered, not
//! merely that its output is discarded. These counters make that promise
//! checkable from tests and from `selftest`. Three counters are kept
//! because the anchor-proposal path legitimately uses cross-attention
//! internally: disabling the pairwise attention block must zero the block
//! counter without touching anchor proposal.
//!
//! Counters are per-thread so concurrent trackers cannot contaminate each
//! other's accounting; measure on the thread that runs the forward.

use std::cell::Cell;

thread_local! {
    static PSAN_BLOCK_CALLS: Cell<u64> = const { Cell::new(0) };
    static ATTENTION_CALLS: Cell<u64> = const { Cell::new(0) };
    static APN_CALLS: Cell<u64> = const { Cell::new(0) };
}

pub(crate) fn note_psan_block() {
    PSAN_BLOCK_CALLS.with(|c| c.set(c.get() + 1));
}

pub(crate) fn note_attention() {
    ATTENTION_CALLS.with(|c| c.set(c.get() + 1));
}

pub(crate) fn note_apn() {
    APN_CALLS.with(|c| c.set(c.get() + 1));
}

/// Counter snapshot for the current thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CallCounts {
    /// Whole pairwise attention block invocations.
    pub psan_block: u64,
    /// Any self- or cross-attention primitive invocation.
    pub attention: u64,
    /// Anchor-proposal invocations (fusion, anchor regression, or the full
    /// forward).
    pub apn: u64,
}

pub fn counts() -> CallCounts {
    CallCounts {
        psan_block: PSAN_BLOCK_CALLS.with(Cell::get),
        attention: ATTENTION_CALLS.with(Cell::get),
        apn: APN_CALLS.with(Cell::get),
    }
}

/// Runs `f` on the current thread and reports how many calls of each kind
/// it triggered.
pub fn counted<T>(f: impl FnOnce() -> T) -> (T, CallCounts) {
    let before = counts();
    let out = f();
    let after = counts();
    (
        out,
        CallCounts {
            psan_block: after.psan_block - before.psan_block,
            attention: after.attention - before.attention,
            apn: after.apn - before.apn,
        },
    )
}
