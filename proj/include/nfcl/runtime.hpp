#pragma once

namespace nfcl {

/// Keeps freed tensor buffers in the heap instead of returning them to the
/// kernel. Training allocates and frees the same few hundred-kilobyte buffers
/// every iteration; with glibc's defaults each one becomes an mmap/munmap pair
/// and a fresh round of page faults. Call once at program start.
void configure_allocator();

}  // namespace nfcl
