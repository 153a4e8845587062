#pragma once

namespace promptdt {

/// Keeps freed tensor buffers in the heap instead of returning them to the
/// kernel. Training allocates and frees the same large buffers every
/// iteration; without this each one is a fresh mmap with page faults.
void tune_allocator();

}  // namespace promptdt
