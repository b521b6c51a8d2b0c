// Runs every acceptance criterion; one pass/fail line each. Exit 1 on any failure.

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "bobw/acceptance.hpp"

int main() {
  bobw::AcceptanceOptions opt;
  opt.fixture_dir = BOBW_FIXTURE_DIR;
  opt.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* t = std::getenv("BOBW_THREADS")) opt.threads = std::max(1, std::atoi(t));
  const auto results = bobw::run_acceptance(opt, std::cout);
  int failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  std::cout << results.size() << " criteria, " << failed << " failed\n";
  return failed == 0 ? 0 : 1;
}
