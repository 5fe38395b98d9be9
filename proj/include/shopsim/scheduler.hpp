#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stop_token>
#include <vector>

#include "shopsim/pipeline.hpp"
#include "shopsim/trace.hpp"

namespace shopsim {

struct BatchOptions {
  int parallel = 1;
  bool record_prompts = false;
  // Called after each run is persisted, from the worker thread.
  std::function<void(const Trajectory&)> on_done;
};

struct BatchSummary {
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;  // never started because of a stop request
  std::vector<Trajectory> trajectories;  // persisted ones, in matrix order
};

// Work queue over `runs` with at most `parallel` in flight. On a stop
// request, in-flight runs fail at their next stage boundary and are still
// persisted; queued runs are skipped.
BatchSummary run_batch(const std::vector<RunSpec>& runs, const BackendMap& backends, TraceStore& store,
                       const BatchOptions& options, std::stop_token stop = {});

// Routes SIGINT/SIGTERM to a stop source for the lifetime of the guard.
class InterruptGuard {
 public:
  InterruptGuard();
  ~InterruptGuard();
  InterruptGuard(const InterruptGuard&) = delete;
  InterruptGuard& operator=(const InterruptGuard&) = delete;

  std::stop_token token() const;

 private:
  struct State;
  std::unique_ptr<State> state_;
};

}  // namespace shopsim
