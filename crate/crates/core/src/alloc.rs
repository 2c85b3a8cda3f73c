//! Allocator tuning for long training runs.

/// Keeps large tensor buffers on the heap instead of fresh `mmap`
/// regions, so steady-state training does not page-fault on every
/// allocation. Only has an effect with glibc; a no-op elsewhere.
pub fn retain_freed_memory() {
    #[cfg(all(target_os = "linux", target_env = "gnu"))]
    // SAFETY: mallopt only adjusts allocator thresholds and is called
    // with valid parameter constants.
    unsafe {
        libc::mallopt(libc::M_MMAP_THRESHOLD, 32 << 20);
        libc::mallopt(libc::M_TRIM_THRESHOLD, 1 << 30);
    }
}
