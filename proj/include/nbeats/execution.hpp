#pragma once

namespace nbeats {

// Kernels with an OpenMP path keep a serial reference with identical results
// (bitwise where the work partition is fixed, see each kernel).
enum class Execution { Serial, Parallel };

// Sets the OpenMP thread count for parallel kernels; n == 0 leaves the runtime default.
void set_thread_count(int n);
int thread_count();

}  // namespace nbeats
