#pragma once

namespace smartaug {

/// Keeps freed tensor buffers in the heap instead of returning them to the
/// OS. Training allocates and frees the same multi-megabyte buffers every
/// step; with glibc's defaults each one is a fresh mmap and a page-fault storm.
/// Call once at program start. No-op on non-glibc platforms.
void configure_allocator();

}  // namespace smartaug
