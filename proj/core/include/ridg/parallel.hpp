#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <vector>

#include "ridg/metrics.hpp"
#include "ridg/stepper.hpp"

namespace ridg {

// Cooperative cancellation shared by all blocking primitives, so one failing
// worker releases the others instead of deadlocking them.
struct CancelToken {
  std::atomic<bool> flag{false};
  void cancel() { flag.store(true); }
  bool cancelled() const { return flag.load(); }
};

// Thrown inside workers woken by a cancelled token; swallowed by the runner.
struct OperationAborted : std::runtime_error {
  OperationAborted() : std::runtime_error("aborted by another task") {}
};

struct Message {
  int from = -1;
  int epoch = -1;
  int tag = -1;
  std::vector<double> payload;
};

// Per-worker inbox; messages are matched exactly on (from, epoch, tag).
// A stale epoch for the same (from, tag) aborts, and waits carry a watchdog.
class Mailbox {
 public:
  void push(Message m);
  Message wait_for(int from, int epoch, int tag, CancelToken& cancel,
                   double timeout_seconds, double* waited_seconds);

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Message> queue_;
};

// Epoch-tagged all-reduce across a fixed set of parties. Max is
// order-independent; the ordered sum combines deposits in member order so
// every worker sees the same bits.
class Reducer {
 public:
  explicit Reducer(int parties);
  double allreduce_max(int member, int epoch, double value,
                       CancelToken& cancel, double timeout_seconds,
                       double* waited_seconds);
  double allreduce_sum_ordered(int member, int epoch, double value,
                               CancelToken& cancel, double timeout_seconds,
                               double* waited_seconds);

 private:
  double reduce(int member, int epoch, double value, bool ordered,
                CancelToken& cancel, double timeout_seconds,
                double* waited_seconds);
  std::mutex mutex_;
  std::condition_variable cv_;
  int parties_;
  int count_ = 0;
  int epoch_ = -1;
  long generation_ = 0;
  std::vector<double> values_;
  double result_ = 0.0;
};

struct TaskInstrumentation {
  int task = -1;
  long halo_messages_sent = 0;
  long payload_elements = 0;  // doubles shipped through halo messages
  long reductions = 0;
  double wait_seconds = 0.0;
  double compute_seconds = 0.0;
  double loop_seconds = 0.0;  // stepping loop wall clock of this task
};

std::string instrumentation_csv_header();
std::string instrumentation_csv_row(const TaskInstrumentation& t);

struct ParallelOptions {
  int threads_per_task = 1;
  double final_time = -1.0;  // <= 0 selects the problem default
  double watchdog_seconds = 60.0;
  // Overwrite halo storage with NaN before every exchange; any element the
  // protocol fails to refresh then poisons the result.
  bool poison_stale_halos = false;
  std::shared_ptr<SchemeContext> context;  // optional, shared across runs
};

struct ParallelResult {
  StateField state;
  RunSummary summary;  // runtime_s = max task stepping loop
  std::vector<TaskInstrumentation> tasks;

  long halo_messages_total() const {
    long n = 0;
    for (const auto& t : tasks) n += t.halo_messages_sent;
    return n;
  }
};

// Runs the configured scheme with one worker thread per task subdomain,
// message-passing halo exchange, and an all-reduce per step for the CFL
// bound. The final coefficients are bitwise identical to the serial run.
ParallelResult run_parallel(const ProblemSetup& problem,
                            const SchemeConfig& cfg, const CartesianMesh& mesh,
                            const std::array<int, 3>& tasks_per_axis,
                            const ParallelOptions& options = {});

struct ScalingStudy {
  std::vector<MetricsRecord> records;
  std::vector<std::vector<TaskInstrumentation>> instrumentation;
  std::vector<long> comms_measured;
};

// Strong-scaling driver: one run per task count (total tasks, split evenly
// per axis), with speedup/efficiency against the 1-task baseline and both
// the analytic and instrumented communication counts.
// analytic_stages = 0 uses the stage count of the integrator actually run.
ScalingStudy scaling_study(const ProblemSetup& problem, const SchemeConfig& cfg,
                           const CartesianMesh& mesh,
                           const std::vector<int>& task_counts,
                           const ParallelOptions& options = {},
                           int analytic_stages = 0);

// Per-axis split of a total task count for this mesh; rejects counts that
// are not perfect dim-th powers or do not divide the mesh.
std::array<int, 3> tasks_per_axis_for(int total_tasks,
                                      const CartesianMesh& mesh);

}  // namespace ridg
