#include "ridg/parallel.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <thread>

#include "ridg/errors.hpp"
#include "ridg/threading.hpp"

namespace ridg {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

void Mailbox::push(Message m) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    queue_.push_back(std::move(m));
  }
  cv_.notify_all();
}

Message Mailbox::wait_for(int from, int epoch, int tag, CancelToken& cancel,
                          double timeout_seconds, double* waited_seconds) {
  const auto t0 = Clock::now();
  std::unique_lock<std::mutex> lock(mutex_);
  for (;;) {
    for (auto it = queue_.begin(); it != queue_.end(); ++it) {
      if (it->from != from || it->tag != tag) continue;
      if (it->epoch != epoch)
        throw ValidationError("halo exchange: epoch mismatch (expected " +
                              std::to_string(epoch) + ", found " +
                              std::to_string(it->epoch) + ")");
      Message m = std::move(*it);
      queue_.erase(it);
      if (waited_seconds) *waited_seconds += seconds_since(t0);
      return m;
    }
    if (cancel.cancelled()) throw OperationAborted();
    if (seconds_since(t0) > timeout_seconds)
      throw std::runtime_error("halo exchange: watchdog timeout");
    cv_.wait_for(lock, std::chrono::milliseconds(50));
  }
}

Reducer::Reducer(int parties) : parties_(parties), values_(parties, 0.0) {}

double Reducer::reduce(int member, int epoch, double value, bool ordered,
                       CancelToken& cancel, double timeout_seconds,
                       double* waited_seconds) {
  const auto t0 = Clock::now();
  std::unique_lock<std::mutex> lock(mutex_);
  if (count_ == 0)
    epoch_ = epoch;
  else if (epoch != epoch_)
    throw ValidationError("allreduce: epoch mismatch (expected " +
                          std::to_string(epoch_) + ", got " +
                          std::to_string(epoch) + ")");
  values_[member] = value;
  const long my_generation = generation_;
  if (++count_ == parties_) {
    if (ordered) {
      double sum = 0.0;
      for (int i = 0; i < parties_; ++i) sum += values_[i];
      result_ = sum;
    } else {
      double mx = values_[0];
      for (int i = 1; i < parties_; ++i) mx = std::max(mx, values_[i]);
      result_ = mx;
    }
    count_ = 0;
    ++generation_;
    cv_.notify_all();
    if (waited_seconds) *waited_seconds += seconds_since(t0);
    return result_;
  }
  while (generation_ == my_generation) {
    if (cancel.cancelled()) throw OperationAborted();
    if (seconds_since(t0) > timeout_seconds)
      throw std::runtime_error("allreduce: watchdog timeout");
    cv_.wait_for(lock, std::chrono::milliseconds(50));
  }
  if (waited_seconds) *waited_seconds += seconds_since(t0);
  return result_;
}

double Reducer::allreduce_max(int member, int epoch, double value,
                              CancelToken& cancel, double timeout_seconds,
                              double* waited_seconds) {
  return reduce(member, epoch, value, false, cancel, timeout_seconds,
                waited_seconds);
}

double Reducer::allreduce_sum_ordered(int member, int epoch, double value,
                                      CancelToken& cancel,
                                      double timeout_seconds,
                                      double* waited_seconds) {
  return reduce(member, epoch, value, true, cancel, timeout_seconds,
                waited_seconds);
}

std::string instrumentation_csv_header() {
  return "task,halo_messages,payload_elements,reductions,wait_s,compute_s,"
         "loop_s";
}

std::string instrumentation_csv_row(const TaskInstrumentation& t) {
  char buf[192];
  std::snprintf(buf, sizeof buf, "%d,%ld,%ld,%ld,%.4f,%.4f,%.4f", t.task,
                t.halo_messages_sent, t.payload_elements, t.reductions,
                t.wait_seconds, t.compute_seconds, t.loop_seconds);
  return buf;
}

namespace {

int offset_index(const std::array<int, 3>& off, int dim) {
  int idx = 0;
  for (int a = dim - 1; a >= 0; --a) idx = idx * 3 + (off[a] + 1);
  return idx;
}

struct WorkerData {
  CoefficientField q;       // global-sized; owned and halo slots used
  CoefficientField q_next;  // corrector / RK stage output
  CoefficientField w;       // ridg predictions
  CoefficientField stage1, stage2;  // RK registers
  std::vector<long> owned, interior, boundary;
  std::vector<const HaloMap*> vertex_halos, face_halos;
  TaskInstrumentation instr;
  RunSummary partial;
  int steps = 0;
};

struct SharedState {
  const ProblemSetup* problem = nullptr;
  const SchemeConfig* cfg = nullptr;
  const CartesianMesh* mesh = nullptr;
  const Decomposition* dec = nullptr;
  SchemeContext* ctx = nullptr;
  double final_time = 0.0;
  ParallelOptions options;
  std::vector<Mailbox>* mailboxes = nullptr;
  Reducer* reducer = nullptr;
  CancelToken* cancel = nullptr;
  std::vector<WorkerData>* workers = nullptr;
};

// Interior = every region (vertex) neighbor is owned; along axes with a
// single task the whole axis is local.
void classify_cells(const SharedState& s, int task, WorkerData& wd) {
  const TaskDomain& td = s.dec->tasks[task];
  const int d = s.mesh->dim;
  wd.owned = td.owned_cells;
  for (long cell : td.owned_cells) {
    const std::array<int, 3> c = s.mesh->coords(cell);
    bool interior = true;
    for (int a = 0; a < d; ++a) {
      if (s.dec->tasks_per_axis[a] == 1) continue;
      if (c[a] == td.cell_lo[a] || c[a] == td.cell_hi[a] - 1) interior = false;
    }
    (interior ? wd.interior : wd.boundary).push_back(cell);
  }
  for (const HaloMap& hm : td.halos) {
    wd.vertex_halos.push_back(&hm);
    int nonzero = 0;
    for (int a = 0; a < d; ++a) nonzero += hm.offset[a] != 0;
    if (nonzero == 1) wd.face_halos.push_back(&hm);
  }
}

void post_sends(const SharedState& s, int task, WorkerData& wd,
                const CoefficientField& field,
                const std::vector<const HaloMap*>& halos, int epoch) {
  const int d = s.mesh->dim;
  for (const HaloMap* hm : halos) {
    Message m;
    m.from = task;
    m.epoch = epoch;
    m.tag = offset_index(hm->offset, d);
    m.payload.resize(hm->send_cells.size() * field.block_size);
    double* dst = m.payload.data();
    for (long cell : hm->send_cells) {
      std::memcpy(dst, field.block(cell), sizeof(double) * field.block_size);
      dst += field.block_size;
    }
    wd.instr.halo_messages_sent++;
    wd.instr.payload_elements += static_cast<long>(m.payload.size());
    (*s.mailboxes)[hm->neighbor_task].push(std::move(m));
  }
}

void receive_halos(const SharedState& s, int task, WorkerData& wd,
                   CoefficientField& field,
                   const std::vector<const HaloMap*>& halos, int epoch) {
  const int d = s.mesh->dim;
  if (s.options.poison_stale_halos) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const HaloMap* hm : halos)
      for (long cell : hm->recv_cells)
        std::fill(field.block(cell), field.block(cell) + field.block_size, nan);
  }
  for (const HaloMap* hm : halos) {
    std::array<int, 3> mirror{0, 0, 0};
    for (int a = 0; a < d; ++a) mirror[a] = -hm->offset[a];
    Message m = (*s.mailboxes)[task].wait_for(
        hm->neighbor_task, epoch, offset_index(mirror, d), *s.cancel,
        s.options.watchdog_seconds, &wd.instr.wait_seconds);
    const double* src = m.payload.data();
    for (long cell : hm->recv_cells) {
      std::memcpy(field.block(cell), src, sizeof(double) * field.block_size);
      src += field.block_size;
    }
  }
}

// One halo exchange round: non-blocking sends first, receives after the
// caller has done whatever interior work it wants to overlap.
void exchange(const SharedState& s, int task, WorkerData& wd,
              CoefficientField& field,
              const std::vector<const HaloMap*>& halos, int epoch) {
  post_sends(s, task, wd, field, halos, epoch);
  receive_halos(s, task, wd, field, halos, epoch);
}

void predict_cells(const SharedState& s, int task, WorkerData& wd,
                   const std::vector<long>& cells, double dt,
                   PredictStats& stats) {
  const PredictorContext& pc = *s.ctx->predictor();
  const SchemeConfig& cfg = *s.cfg;
  std::array<double, 3> h{1.0, 1.0, 1.0};
  for (int a = 0; a < s.mesh->dim; ++a) h[a] = s.mesh->spacing(a);
  const int tt = pc.theta_t();

  if (pc.law().is_linear() && cfg.newton.linear_fast_path) {
    auto op = pc.fast_operator(dt, h, cfg.backend);
    parallel_for(static_cast<long>(cells.size()), s.options.threads_per_task,
                 [&](long idx) {
                   const long i = cells[idx];
                   Eigen::VectorXd qreg;
                   gather_region(wd.q, *s.mesh, i, pc, qreg);
                   fast_predict_element(qreg, *op, pc, wd.w.block(i));
                 });
    stats.max_iterations = std::max(stats.max_iterations, 1);
    stats.total_iterations += static_cast<long>(cells.size());
    return;
  }
  std::mutex stats_mutex;
  parallel_for(static_cast<long>(cells.size()), s.options.threads_per_task,
               [&](long idx) {
                 const long i = cells[idx];
                 Eigen::VectorXd qreg;
                 gather_region(wd.q, *s.mesh, i, pc, qreg);
                 PredictResult r;
                 try {
                   r = predict_region(qreg, pc, dt, h, cfg.newton, cfg.backend);
                 } catch (NonConvergence& e) {
                   e.element = i;
                   e.task = task;
                   throw;
                 }
                 std::memcpy(wd.w.block(i), r.w_central.data(),
                             sizeof(double) * tt);
                 std::lock_guard<std::mutex> lock(stats_mutex);
                 stats.max_iterations = std::max(stats.max_iterations, r.iterations);
                 stats.total_iterations += r.iterations;
               });
}

// The RKDG stage loop mirrors ssprk_step's arithmetic exactly, with a face
// halo exchange of the differentiated register before every rhs evaluation.
// reduce_max agrees on the flux-offset reference and on the equilibrium
// short-circuit across tasks.
void rkdg_worker_step(const SharedState& s, int task, WorkerData& wd, double dt,
                      int stages, int& epoch,
                      const std::function<double(double)>& reduce_max) {
  const SchemeContext& ctx = *s.ctx;
  const int th = ctx.theta();
  const int threads = s.options.threads_per_task;

  const double ref = reduce_max(max_mean_state_cells(wd.q, wd.owned));
  auto rhs_into = [&](CoefficientField& v, CoefficientField& out) {
    exchange(s, task, wd, v, wd.face_halos, epoch++);
    rkdg_rhs_cells(wd.owned, v, ctx, *s.mesh, ref, out, threads);
  };
  auto local_max_abs = [&](const CoefficientField& v) {
    double m = 0.0;
    for (long i : wd.owned)
      for (int k = 0; k < th; ++k) m = std::max(m, std::abs(v.block(i)[k]));
    return m;
  };

  CoefficientField& rhs = wd.q_next;
  if (stages == 3) {
    CoefficientField& u1 = wd.stage1;
    CoefficientField& u2 = wd.stage2;
    rhs_into(wd.q, rhs);
    if (reduce_max(local_max_abs(rhs)) == 0.0) return;
    for (long i : wd.owned)
      for (int k = 0; k < th; ++k)
        u1.block(i)[k] = wd.q.block(i)[k] + dt * rhs.block(i)[k];
    rhs_into(u1, rhs);
    for (long i : wd.owned)
      for (int k = 0; k < th; ++k) {
        const double v = u1.block(i)[k] + dt * rhs.block(i)[k];
        u2.block(i)[k] = 0.75 * wd.q.block(i)[k] + 0.25 * v;
      }
    rhs_into(u2, rhs);
    for (long i : wd.owned)
      for (int k = 0; k < th; ++k) {
        const double v = u2.block(i)[k] + dt * rhs.block(i)[k];
        wd.q.block(i)[k] = (wd.q.block(i)[k] + 2.0 * v) / 3.0;
      }
    return;
  }
  // Ketcheson's 10-stage scheme; q1/q2 are the two registers.
  CoefficientField& q1 = wd.stage1;
  CoefficientField& q2 = wd.stage2;
  for (long i : wd.owned)
    for (int k = 0; k < th; ++k) {
      q1.block(i)[k] = wd.q.block(i)[k];
      q2.block(i)[k] = wd.q.block(i)[k];
    }
  rhs_into(q1, rhs);
  if (reduce_max(local_max_abs(rhs)) == 0.0) return;
  for (long i : wd.owned)
    for (int k = 0; k < th; ++k) q1.block(i)[k] += dt / 6.0 * rhs.block(i)[k];
  for (int stage = 1; stage < 5; ++stage) {
    rhs_into(q1, rhs);
    for (long i : wd.owned)
      for (int k = 0; k < th; ++k) q1.block(i)[k] += dt / 6.0 * rhs.block(i)[k];
  }
  for (long i : wd.owned)
    for (int k = 0; k < th; ++k) {
      q2.block(i)[k] = 0.04 * q2.block(i)[k] + 0.36 * q1.block(i)[k];
      q1.block(i)[k] = 15.0 * q2.block(i)[k] - 5.0 * q1.block(i)[k];
    }
  for (int stage = 5; stage < 9; ++stage) {
    rhs_into(q1, rhs);
    for (long i : wd.owned)
      for (int k = 0; k < th; ++k) q1.block(i)[k] += dt / 6.0 * rhs.block(i)[k];
  }
  rhs_into(q1, rhs);
  for (long i : wd.owned)
    for (int k = 0; k < th; ++k)
      wd.q.block(i)[k] =
          q2.block(i)[k] + 0.6 * q1.block(i)[k] + 0.1 * dt * rhs.block(i)[k];
}

void worker_main(const SharedState& s, int task) {
  WorkerData& wd = (*s.workers)[task];
  const SchemeConfig& cfg = *s.cfg;
  const SchemeContext& ctx = *s.ctx;
  const CartesianMesh& mesh = *s.mesh;
  const bool ridg = cfg.scheme == SchemeConfig::Scheme::Ridg;
  const int stages = ridg ? 0 : ctx.stages_per_step();
  const double T = s.final_time;
  int epoch = 0;

  auto reduce_max = [&](double v) {
    wd.instr.reductions++;
    return s.reducer->allreduce_max(task, epoch++, v, *s.cancel,
                                    s.options.watchdog_seconds,
                                    &wd.instr.wait_seconds);
  };
  auto reduce_sum = [&](double v) {
    wd.instr.reductions++;
    return s.reducer->allreduce_sum_ordered(task, epoch++, v, *s.cancel,
                                            s.options.watchdog_seconds,
                                            &wd.instr.wait_seconds);
  };

  project_initial_cells(*s.problem, mesh, cfg.mdeg, cfg.projection_points,
                        wd.owned, wd.q, s.options.threads_per_task);
  double partial = 0.0;
  for (long i : wd.owned) partial += wd.q.block(i)[0];
  wd.partial.initial_integral = reduce_sum(partial) * mesh.cell_volume();
  double partial_sq = 0.0;
  for (long i : wd.owned) {
    const double* b = wd.q.block(i);
    for (int k = 0; k < ctx.theta(); ++k) partial_sq += b[k] * b[k];
  }
  const double norm0 = std::sqrt(reduce_sum(partial_sq));

  const auto loop_begin = Clock::now();
  double t = 0.0;
  int step = 0;
  while (t < T) {
    const double lam_local = max_wave_speed_cells(wd.q, mesh, ctx, wd.owned);
    const double lam = reduce_max(lam_local);
    double dt = compute_dt(cfg.nu, mesh, lam);
    bool final_step = false;
    const double remaining = T - t;
    if (remaining <= dt * (1.0 + 1e-9)) {
      dt = remaining;
      final_step = true;
    }

    if (ridg) {
      // Predictions need vertex-neighbor data before the step; boundary
      // predictions wait for the halos while interior work proceeds, and the
      // correction likewise overlaps with the prediction exchange.
      PredictStats pstats;
      const int epoch_q = epoch++;
      post_sends(s, task, wd, wd.q, wd.vertex_halos, epoch_q);
      predict_cells(s, task, wd, wd.interior, dt, pstats);
      receive_halos(s, task, wd, wd.q, wd.vertex_halos, epoch_q);
      predict_cells(s, task, wd, wd.boundary, dt, pstats);
      const int epoch_w = epoch++;
      post_sends(s, task, wd, wd.w, wd.vertex_halos, epoch_w);
      const double ref = reduce_max(max_mean_state_cells(wd.w, wd.owned));
      correct_cells(wd.interior, wd.q, wd.w, ctx, dt, mesh, ref, wd.q_next,
                    s.options.threads_per_task);
      receive_halos(s, task, wd, wd.w, wd.vertex_halos, epoch_w);
      correct_cells(wd.boundary, wd.q, wd.w, ctx, dt, mesh, ref, wd.q_next,
                    s.options.threads_per_task);
      for (long i : wd.owned)
        std::memcpy(wd.q.block(i), wd.q_next.block(i),
                    sizeof(double) * ctx.theta());
      wd.partial.newton_total += pstats.total_iterations;
      wd.partial.newton_max = std::max(wd.partial.newton_max,
                                       pstats.max_iterations);
    } else {
      rkdg_worker_step(s, task, wd, dt, stages, epoch, reduce_max);
    }
    ++step;
    t = final_step ? T : t + dt;

    double sq = 0.0;
    for (long i : wd.owned) {
      const double* b = wd.q.block(i);
      for (int k = 0; k < ctx.theta(); ++k) sq += b[k] * b[k];
    }
    const double norm = std::sqrt(reduce_sum(sq));
    if (!std::isfinite(norm) || norm > 10.0 * norm0)
      throw Instability(step, t, norm / norm0);
  }
  wd.instr.loop_seconds = seconds_since(loop_begin);
  wd.instr.compute_seconds = wd.instr.loop_seconds - wd.instr.wait_seconds;
  wd.steps = step;
  wd.partial.final_time = t;
}

}  // namespace

std::array<int, 3> tasks_per_axis_for(int total_tasks,
                                      const CartesianMesh& mesh) {
  if (total_tasks < 1)
    throw ValidationError("tasks: task count must be positive");
  const int d = mesh.dim;
  const int per_axis =
      static_cast<int>(std::llround(std::pow(double(total_tasks), 1.0 / d)));
  int check = 1;
  for (int a = 0; a < d; ++a) check *= per_axis;
  if (check != total_tasks)
    throw ValidationError("tasks: " + std::to_string(total_tasks) +
                          " is not a per-axis-even split for dim " +
                          std::to_string(d));
  std::array<int, 3> out{1, 1, 1};
  for (int a = 0; a < d; ++a) out[a] = per_axis;
  return out;
}

ParallelResult run_parallel(const ProblemSetup& problem,
                            const SchemeConfig& cfg, const CartesianMesh& mesh,
                            const std::array<int, 3>& tasks_per_axis,
                            const ParallelOptions& options) {
  const Decomposition dec = decompose(mesh, tasks_per_axis);
  const int ntasks = dec.task_count();

  std::shared_ptr<SchemeContext> ctx = options.context;
  if (!ctx) ctx = std::make_shared<SchemeContext>(problem, cfg);
  if (mesh.dim != problem.law.dim)
    throw ValidationError("run_parallel: mesh dimension mismatch");
  const bool ridg = cfg.scheme == SchemeConfig::Scheme::Ridg;
  if (ridg)
    for (int a = 0; a < mesh.dim; ++a)
      if (mesh.cells[a] < 3)
        throw ValidationError(
            "the regionally implicit scheme needs at least 3 cells per axis");

  const double T = options.final_time > 0.0 ? options.final_time
                                            : problem.default_final_time;

  std::vector<Mailbox> mailboxes(ntasks);
  Reducer reducer(ntasks);
  CancelToken cancel;
  std::vector<WorkerData> workers(ntasks);

  SharedState shared;
  shared.problem = &problem;
  shared.cfg = &cfg;
  shared.mesh = &mesh;
  shared.dec = &dec;
  shared.ctx = ctx.get();
  shared.final_time = T;
  shared.options = options;
  shared.mailboxes = &mailboxes;
  shared.reducer = &reducer;
  shared.cancel = &cancel;
  shared.workers = &workers;

  const long n = mesh.total_cells();
  const int th = ctx->theta();
  for (int tsk = 0; tsk < ntasks; ++tsk) {
    WorkerData& wd = workers[tsk];
    wd.instr.task = tsk;
    classify_cells(shared, tsk, wd);
    wd.q = CoefficientField(n, th);
    wd.q_next = CoefficientField(n, th);
    if (ridg)
      wd.w = CoefficientField(n, ctx->predictor()->theta_t());
    else {
      wd.stage1 = CoefficientField(n, th);
      wd.stage2 = CoefficientField(n, th);
    }
  }

  std::vector<std::exception_ptr> errors(ntasks);
  std::vector<std::thread> pool;
  pool.reserve(ntasks);
  for (int tsk = 0; tsk < ntasks; ++tsk)
    pool.emplace_back([&, tsk] {
      try {
        worker_main(shared, tsk);
      } catch (...) {
        errors[tsk] = std::current_exception();
        cancel.cancel();
      }
    });
  for (auto& th_ : pool) th_.join();

  // Prefer the originating failure over the aborts it triggered elsewhere.
  std::exception_ptr first;
  for (int tsk = 0; tsk < ntasks; ++tsk) {
    if (!errors[tsk]) continue;
    try {
      std::rethrow_exception(errors[tsk]);
    } catch (const OperationAborted&) {
      continue;
    } catch (...) {
      if (!first) first = errors[tsk];
    }
  }
  if (first) std::rethrow_exception(first);

  ParallelResult result;
  result.state.q = CoefficientField(n, th);
  result.state.time = workers.empty() ? T : workers[0].partial.final_time;
  for (const WorkerData& wd : workers)
    for (long i : wd.owned)
      std::memcpy(result.state.q.block(i), wd.q.block(i), sizeof(double) * th);

  RunSummary s;
  s.steps = workers.empty() ? 0 : workers[0].steps;
  s.final_time = result.state.time;
  s.stages_per_step = ctx->stages_per_step();
  s.initial_integral = workers.empty() ? 0.0 : workers[0].partial.initial_integral;
  double final_partial = 0.0;
  for (const WorkerData& wd : workers) {
    s.runtime_s = std::max(s.runtime_s, wd.instr.loop_seconds);
    s.newton_total += wd.partial.newton_total;
    s.newton_max = std::max(s.newton_max, wd.partial.newton_max);
    for (long i : wd.owned) final_partial += wd.q.block(i)[0];
  }
  s.final_integral = final_partial * mesh.cell_volume();
  if (problem.has_exact()) {
    const double tf = result.state.time;
    s.error = l2_relative_error(result.state.q, mesh, cfg.mdeg,
                                [&](const std::array<double, 3>& x) {
                                  return problem.exact(tf, x);
                                });
  }
  result.summary = s;
  for (const WorkerData& wd : workers) result.tasks.push_back(wd.instr);
  return result;
}

ScalingStudy scaling_study(const ProblemSetup& problem, const SchemeConfig& cfg,
                           const CartesianMesh& mesh,
                           const std::vector<int>& task_counts,
                           const ParallelOptions& options,
                           int analytic_stages) {
  ScalingStudy study;
  std::vector<std::pair<int, double>> runtimes;

  ParallelOptions opts = options;
  if (!opts.context) opts.context = std::make_shared<SchemeContext>(problem, cfg);
  const int theta = opts.context->theta();
  const int stages =
      analytic_stages > 0 ? analytic_stages : opts.context->stages_per_step();

  for (int tasks : task_counts) {
    const std::array<int, 3> grid = tasks_per_axis_for(tasks, mesh);
    ParallelResult r = run_parallel(problem, cfg, mesh, grid, opts);

    MetricsRecord rec;
    rec.scheme = scheme_name(cfg.scheme);
    rec.mdeg = cfg.mdeg;
    rec.nu = cfg.nu;
    rec.dim = mesh.dim;
    rec.mesh_cells = mesh.cells;
    rec.dof = static_cast<long>(theta) * mesh.total_cells();
    rec.efom_per_axis = efom(theta, mesh.total_cells(), mesh.dim);
    rec.error = r.summary.error;
    rec.runtime_s = r.summary.runtime_s;
    if (std::isfinite(rec.error) && rec.runtime_s > 0.0)
      rec.quality = quality(rec.error, rec.runtime_s);
    rec.tasks = tasks;
    rec.cores = tasks * std::max(1, opts.threads_per_task);
    rec.dof_per_core = static_cast<double>(rec.dof) / rec.cores;
    rec.steps = r.summary.steps;
    rec.comms = comms_estimate(tasks, r.summary.steps, stages,
                               comms_per_stage(mesh.dim));
    study.comms_measured.push_back(r.halo_messages_total());
    study.instrumentation.push_back(r.tasks);
    study.records.push_back(rec);
    runtimes.emplace_back(tasks, r.summary.runtime_s);
  }

  bool has_baseline = false;
  for (const auto& [tasks, rt] : runtimes) has_baseline |= tasks == 1;
  if (has_baseline) {
    const std::vector<ScalingPoint> pts = speedup_efficiency(runtimes);
    for (size_t i = 0; i < pts.size(); ++i) {
      study.records[i].speedup = pts[i].speedup;
      study.records[i].efficiency_pct = pts[i].efficiency_pct;
    }
  }
  return study;
}

}  // namespace ridg
