#pragma once

#include <sys/types.h>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wsrl/agent.hpp"
#include "wsrl/workspace.hpp"

namespace wsrl {

// Workspace storage in POSIX shared memory, shared by n worker processes.
// Variable i lives in region "/wspc-<uuid>-<i>" laid out [T_max, B*n, item...];
// worker k owns rows [k*B, (k+1)*B). A further region holds the written mask
// (one byte per variable, timestep and worker) and another the parameter
// values broadcast before each run.
class SharedWorkspace {
 public:
  struct Variable {
    std::string name;
    Shape item_shape;
  };

  SharedWorkspace(std::vector<Variable> variables, int64_t batch_per_worker, int64_t n_workers, int64_t t_max,
                  int64_t n_parameters = 0);
  ~SharedWorkspace();
  SharedWorkspace(const SharedWorkspace&) = delete;
  SharedWorkspace& operator=(const SharedWorkspace&) = delete;

  const std::string& run_id() const { return run_id_; }
  const std::vector<Variable>& variables() const { return vars_; }
  int64_t batch_per_worker() const { return batch_; }
  int64_t n_workers() const { return n_workers_; }
  int64_t time_capacity() const { return t_max_; }
  // Shared-memory object names, in variable order, then mask and parameters.
  std::vector<std::string> region_names() const;
  bool released() const { return released_; }

  // Copies every written slot of `local` ([B, ...] tensors) into worker k's rows.
  void write_slice(int64_t worker, const Workspace& local);
  // Worker k's written slots as a plain workspace of batch B.
  Workspace read_slice(int64_t worker) const;
  bool is_written(const std::string& name, int64_t t, int64_t worker) const;

  // Plain-workspace copy of every slot written by all workers, batch B*n.
  // Throws while a run is in progress.
  Workspace snapshot() const;
  // Moves timestep t of every variable to timestep 0 and forgets the rest.
  void copy_step_to_front(int64_t t);
  void clear();

  void store_parameters(const std::vector<Tensor>& params);
  void load_parameters(std::vector<Tensor>& params) const;

  // Unmaps and unlinks every region; later access throws RemoteError.
  void release();

 private:
  friend class RemoteAgent;

  struct Region {
    std::string name;
    void* data = nullptr;
    size_t bytes = 0;
  };

  size_t var_index(const std::string& name) const;
  int64_t item_numel(size_t v) const;
  float* var_data(size_t v) const;
  uint8_t* mask(size_t v, int64_t t, int64_t worker) const;
  void check_live() const;

  std::string run_id_;
  std::vector<Variable> vars_;
  int64_t batch_, n_workers_, t_max_, n_parameters_;
  std::vector<Region> regions_;
  bool released_ = false;
  bool running_ = false;
};

// Coordinator-side handle of n forked workers, each holding a copy of the agent
// seeded with seed + k and bound to slice k of a SharedWorkspace. Workers run
// without gradient recording. Any worker failure fails the whole run, stops the
// workers and releases the shared workspace.
class RemoteAgent {
 public:
  ~RemoteAgent();
  RemoteAgent(const RemoteAgent&) = delete;
  RemoteAgent& operator=(const RemoteAgent&) = delete;

  int64_t num_processes() const { return static_cast<int64_t>(workers_.size()); }
  const std::shared_ptr<SharedWorkspace>& workspace() const { return workspace_; }

  void execute(SharedWorkspace& sw, const KwArgs& kwargs);
  void execute_async(SharedWorkspace& sw, const KwArgs& kwargs);
  // Polls without blocking. Throws WorkerError if a finished run failed.
  bool is_running();
  void join();
  // Stops the workers and releases the shared workspace.
  void close();
  bool closed() const { return closed_; }

 private:
  friend struct RemoteFactory;

  struct Worker {
    pid_t pid = -1;
    int command_fd = -1;  // coordinator -> worker
    int result_fd = -1;   // worker -> coordinator
    bool pending = false;
  };

  RemoteAgent(AgentPtr agent, std::shared_ptr<SharedWorkspace> sw);
  void spawn(uint64_t seed);
  void start(SharedWorkspace& sw, const KwArgs& kwargs);
  void collect(size_t k);
  void fail(const std::string& message, int64_t worker);

  AgentPtr agent_;
  std::shared_ptr<SharedWorkspace> workspace_;
  std::vector<Worker> workers_;
  bool running_ = false;
  bool closed_ = false;
  std::optional<std::pair<int64_t, std::string>> failure_;
};

struct RemoteOptions {
  uint64_t seed = 0;
  // 0 means the probe's time extent.
  int64_t time_capacity = 0;
};

struct Remote {
  std::unique_ptr<RemoteAgent> agent;
  std::shared_ptr<SharedWorkspace> workspace;
};

// Runs `agent` once on a fresh workspace under probe_kwargs to learn variable
// shapes and the per-worker batch, allocates the shared arena
// [T_max, B*n, ...] and forks n workers.
Remote create_remote(const AgentPtr& agent, int64_t num_processes, const KwArgs& probe_kwargs,
                     const RemoteOptions& options = {});

void remote_execute(RemoteAgent& ra, SharedWorkspace& sw, const KwArgs& kwargs);
void remote_execute_async(RemoteAgent& ra, SharedWorkspace& sw, const KwArgs& kwargs);
inline bool is_running(RemoteAgent& ra) { return ra.is_running(); }
inline void join(RemoteAgent& ra) { ra.join(); }
inline Workspace snapshot(const SharedWorkspace& sw) { return sw.snapshot(); }

}  // namespace wsrl
