#pragma once

#include <cstddef>
#include <functional>

namespace hallci {

// Worker count used by parallel_for. Results never depend on it: every task
// writes its own output and reductions run in a fixed order afterwards.
void set_thread_count(int n);
int thread_count();

void parallel_for(int n, const std::function<void(int)>& task);

// Pairwise summation with a fixed split, so the result depends only on the data.
double pairwise_sum(const double* v, std::size_t n);

}  // namespace hallci
