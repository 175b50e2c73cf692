//! A counting global allocator for peak-memory measurements.
//!
//! Install it in a binary or test crate root with
//! `#[global_allocator] static A: TrackingAllocator = TrackingAllocator::new();`
//! then bracket the code under measurement with [`reset_peak`] /
//! [`peak_bytes`]. When nothing installed it, [`peak_bytes`] returns `None`
//! and the library reports memory as untracked.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicBool, AtomicIsize, Ordering};

static INSTALLED: AtomicBool = AtomicBool::new(false);
static CURRENT: AtomicIsize = AtomicIsize::new(0);
static PEAK: AtomicIsize = AtomicIsize::new(0);

/// Thin wrapper over the system allocator that tracks live and peak bytes.
pub struct TrackingAllocator;

impl TrackingAllocator {
    pub const fn new() -> Self {
        TrackingAllocator
    }
}

impl Default for TrackingAllocator {
    fn default() -> Self {
        Self::new()
    }
}

fn record_alloc(size: usize) {
    if !INSTALLED.load(Ordering::Relaxed) {
        INSTALLED.store(true, Ordering::Relaxed);
    }
    let now = CURRENT.fetch_add(size as isize, Ordering::Relaxed) + size as isize;
    PEAK.fetch_max(now, Ordering::Relaxed);
}

fn record_dealloc(size: usize) {
    CURRENT.fetch_sub(size as isize, Ordering::Relaxed);
}

unsafe impl GlobalAlloc for TrackingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            record_alloc(layout.size());
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        record_dealloc(layout.size());
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = System.realloc(ptr, layout, new_size);
        if !p.is_null() {
            record_dealloc(layout.size());
            record_alloc(new_size);
        }
        p
    }
}

/// Whether the tracking allocator is serving this process.
pub fn is_active() -> bool {
    INSTALLED.load(Ordering::Relaxed)
}

/// Bytes currently live.
pub fn current_bytes() -> u64 {
    CURRENT.load(Ordering::Relaxed).max(0) as u64
}

/// Start a fresh peak measurement from the currently live amount.
pub fn reset_peak() {
    PEAK.store(CURRENT.load(Ordering::Relaxed), Ordering::Relaxed);
}

/// Peak live bytes since the last [`reset_peak`], or `None` when the
/// allocator is not installed.
pub fn peak_bytes() -> Option<u64> {
    if is_active() {
        Some(PEAK.load(Ordering::Relaxed).max(0) as u64)
    } else {
        None
    }
}
