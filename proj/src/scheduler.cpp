#include "shopsim/scheduler.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <mutex>
#include <optional>
#include <thread>

#include "shopsim/error.hpp"

namespace shopsim {

BatchSummary run_batch(const std::vector<RunSpec>& runs, const BackendMap& backends, TraceStore& store,
                       const BatchOptions& options, std::stop_token stop) {
  if (options.parallel < 1) throw ConfigError("parallel: must be >= 1");
  std::vector<std::optional<Trajectory>> results(runs.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;

  auto worker = [&] {
    PipelineOptions popts;
    popts.record_prompts = options.record_prompts;
    popts.stop = stop;
    for (;;) {
      if (stop.stop_requested()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      try {
        Trajectory t = run_simulation(runs[i], backends, popts);
        store.append(t);
        if (options.on_done) options.on_done(t);
        results[i] = std::move(t);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  {
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(options.parallel), std::max<std::size_t>(runs.size(), 1));
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (std::size_t k = 0; k < n; ++k) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  BatchSummary s;
  for (auto& r : results) {
    if (!r) {
      ++s.skipped;
      continue;
    }
    (r->status == RunStatus::completed ? s.completed : s.failed)++;
    s.trajectories.push_back(std::move(*r));
  }
  return s;
}

namespace {

volatile std::sig_atomic_t g_interrupted = 0;
std::atomic<bool> g_active{false};

extern "C" void on_signal(int) { g_interrupted = 1; }

}  // namespace

struct InterruptGuard::State {
  std::stop_source source;
  void (*prev_int)(int) = SIG_DFL;
  void (*prev_term)(int) = SIG_DFL;
  std::jthread watcher;  // last, so it stops before the rest is destroyed
};

InterruptGuard::InterruptGuard() : state_(std::make_unique<State>()) {
  if (g_active.exchange(true)) throw Error("only one InterruptGuard may be active");
  g_interrupted = 0;
  state_->prev_int = std::signal(SIGINT, on_signal);
  state_->prev_term = std::signal(SIGTERM, on_signal);
  state_->watcher = std::jthread([src = state_->source](std::stop_token self) mutable {
    while (!self.stop_requested()) {
      if (g_interrupted) {
        src.request_stop();
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  });
}

InterruptGuard::~InterruptGuard() {
  state_->watcher = {};
  std::signal(SIGINT, state_->prev_int);
  std::signal(SIGTERM, state_->prev_term);
  g_active = false;
}

std::stop_token InterruptGuard::token() const { return state_->source.get_token(); }

}  // namespace shopsim
