#pragma once

namespace motionseg {

// Thread count used by the OpenMP kernels. Results never depend on it.
void set_thread_count(int threads);
int thread_count();

}  // namespace motionseg
