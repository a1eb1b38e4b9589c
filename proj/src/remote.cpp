#include "wsrl/remote.hpp"

#include <fcntl.h>
#include <poll.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <csignal>
#include <cstring>
#include <random>

#include "wsrl/errors.hpp"
#include "wsrl/wire.hpp"

namespace wsrl {

namespace {

std::string make_run_id() {
  std::random_device rd;
  std::mt19937_64 gen((static_cast<uint64_t>(rd()) << 32) ^ rd() ^ static_cast<uint64_t>(::getpid()));
  static const char* hex = "0123456789abcdef";
  std::string id;
  for (int i = 0; i < 32; ++i) {
    if (i == 8 || i == 12 || i == 16 || i == 20) id += '-';
    id += hex[gen() & 0xF];
  }
  return id;
}

void* map_region(const std::string& name, size_t bytes) {
  const std::string path = "/" + name;
  const int fd = ::shm_open(path.c_str(), O_CREAT | O_EXCL | O_RDWR, 0600);
  if (fd < 0) throw RemoteError("shm_open " + path + ": " + std::strerror(errno));
  if (::ftruncate(fd, static_cast<off_t>(bytes)) != 0) {
    const int err = errno;
    ::close(fd);
    ::shm_unlink(path.c_str());
    throw RemoteError("ftruncate " + path + ": " + std::strerror(err));
  }
  void* p = ::mmap(nullptr, bytes, PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
  ::close(fd);
  if (p == MAP_FAILED) {
    ::shm_unlink(path.c_str());
    throw RemoteError("mmap " + path + ": " + std::strerror(errno));
  }
  return p;
}

}  // namespace

SharedWorkspace::SharedWorkspace(std::vector<Variable> variables, int64_t batch_per_worker, int64_t n_workers,
                                 int64_t t_max, int64_t n_parameters)
    : run_id_(make_run_id()),
      vars_(std::move(variables)),
      batch_(batch_per_worker),
      n_workers_(n_workers),
      t_max_(t_max),
      n_parameters_(n_parameters) {
  if (vars_.empty()) throw RemoteError("shared workspace needs at least one variable");
  if (batch_ < 1 || n_workers_ < 1 || t_max_ < 1) {
    throw RemoteError("shared workspace needs B >= 1, n >= 1 and T_max >= 1");
  }
  std::vector<size_t> sizes;
  for (size_t v = 0; v < vars_.size(); ++v) {
    sizes.push_back(static_cast<size_t>(t_max_ * batch_ * n_workers_ * item_numel(v)) * sizeof(float));
  }
  sizes.push_back(vars_.size() * static_cast<size_t>(t_max_ * n_workers_));
  sizes.push_back(static_cast<size_t>(n_parameters_) * sizeof(float));
  try {
    for (size_t i = 0; i < sizes.size(); ++i) {
      std::string suffix = i < vars_.size() ? std::to_string(i) : (i == vars_.size() ? "mask" : "params");
      Region r{"wspc-" + run_id_ + "-" + suffix, nullptr, std::max<size_t>(sizes[i], 1)};
      r.data = map_region(r.name, r.bytes);
      regions_.push_back(r);
    }
  } catch (...) {
    release();
    throw;
  }
}

SharedWorkspace::~SharedWorkspace() { release(); }

std::vector<std::string> SharedWorkspace::region_names() const {
  std::vector<std::string> out;
  for (const auto& r : regions_) out.push_back(r.name);
  return out;
}

void SharedWorkspace::release() {
  if (released_) return;
  released_ = true;
  for (auto& r : regions_) {
    if (r.data != nullptr) ::munmap(r.data, r.bytes);
    ::shm_unlink(("/" + r.name).c_str());
    r.data = nullptr;
  }
}

void SharedWorkspace::check_live() const {
  if (released_) throw RemoteError("shared workspace " + run_id_ + " has been released");
}

size_t SharedWorkspace::var_index(const std::string& name) const {
  for (size_t v = 0; v < vars_.size(); ++v) {
    if (vars_[v].name == name) return v;
  }
  throw RemoteError("variable '" + name + "' was not written by the probe run");
}

int64_t SharedWorkspace::item_numel(size_t v) const { return shape_numel(vars_[v].item_shape); }

float* SharedWorkspace::var_data(size_t v) const { return static_cast<float*>(regions_[v].data); }

uint8_t* SharedWorkspace::mask(size_t v, int64_t t, int64_t worker) const {
  auto* base = static_cast<uint8_t*>(regions_[vars_.size()].data);
  return base + (static_cast<int64_t>(v) * t_max_ + t) * n_workers_ + worker;
}

bool SharedWorkspace::is_written(const std::string& name, int64_t t, int64_t worker) const {
  check_live();
  if (t < 0 || t >= t_max_ || worker < 0 || worker >= n_workers_) return false;
  return *mask(var_index(name), t, worker) != 0;
}

void SharedWorkspace::write_slice(int64_t worker, const Workspace& local) {
  check_live();
  if (worker < 0 || worker >= n_workers_) throw RangeError("worker index " + std::to_string(worker) + " out of range");
  if (local.empty()) return;
  if (local.batch_size() != batch_) {
    throw BatchMismatchError("worker slice has batch " + std::to_string(local.batch_size()) + ", shared workspace expects " +
                             std::to_string(batch_));
  }
  // Validate everything before touching shared memory.
  for (const auto& name : local.variables()) {
    const size_t v = var_index(name);
    if (local.item_shape(name) != vars_[v].item_shape) {
      throw ItemShapeMismatchError("variable '" + name + "' has item shape " + shape_str(local.item_shape(name)) +
                                   ", shared workspace holds " + shape_str(vars_[v].item_shape));
    }
    if (local.time_size(name) > t_max_) {
      throw RangeError("variable '" + name + "' written at t=" + std::to_string(local.time_size(name) - 1) +
                       " beyond shared capacity T_max=" + std::to_string(t_max_));
    }
  }
  for (const auto& name : local.variables()) {
    const size_t v = var_index(name);
    const int64_t row = batch_ * item_numel(v);
    for (int64_t t = 0; t < local.time_size(name); ++t) {
      if (!local.is_written(name, t)) continue;
      const Tensor x = local.get(name, t);
      float* dst = var_data(v) + (t * n_workers_ + worker) * row;
      std::memcpy(dst, x.data().data(), static_cast<size_t>(row) * sizeof(float));
      *mask(v, t, worker) = 1;
    }
  }
}

Workspace SharedWorkspace::read_slice(int64_t worker) const {
  check_live();
  Workspace ws;
  for (size_t v = 0; v < vars_.size(); ++v) {
    const int64_t row = batch_ * item_numel(v);
    Shape shape{batch_};
    shape.insert(shape.end(), vars_[v].item_shape.begin(), vars_[v].item_shape.end());
    for (int64_t t = 0; t < t_max_; ++t) {
      if (*mask(v, t, worker) == 0) continue;
      Tensor x = Tensor::zeros(shape);
      const float* src = var_data(v) + (t * n_workers_ + worker) * row;
      std::copy(src, src + row, x.mutable_data().begin());
      ws.set(vars_[v].name, t, x);
    }
  }
  return ws;
}

Workspace SharedWorkspace::snapshot() const {
  check_live();
  if (running_) throw AlreadyRunningError("snapshot requested while a remote run is in progress");
  Workspace ws;
  for (size_t v = 0; v < vars_.size(); ++v) {
    const int64_t block = batch_ * n_workers_ * item_numel(v);
    Shape shape{batch_ * n_workers_};
    shape.insert(shape.end(), vars_[v].item_shape.begin(), vars_[v].item_shape.end());
    for (int64_t t = 0; t < t_max_; ++t) {
      bool all = true;
      for (int64_t k = 0; k < n_workers_; ++k) all = all && *mask(v, t, k) != 0;
      if (!all) continue;
      Tensor x = Tensor::zeros(shape);
      const float* src = var_data(v) + t * block;
      std::copy(src, src + block, x.mutable_data().begin());
      ws.set(vars_[v].name, t, x);
    }
  }
  return ws;
}

void SharedWorkspace::copy_step_to_front(int64_t t) {
  check_live();
  if (running_) throw AlreadyRunningError("shared workspace modified while a remote run is in progress");
  if (t < 0 || t >= t_max_) throw RangeError("timestep " + std::to_string(t) + " outside shared capacity");
  for (size_t v = 0; v < vars_.size(); ++v) {
    const int64_t row = batch_ * item_numel(v);
    for (int64_t k = 0; k < n_workers_; ++k) {
      const bool written = *mask(v, t, k) != 0;
      if (written && t != 0) {
        std::memcpy(var_data(v) + k * row, var_data(v) + (t * n_workers_ + k) * row,
                    static_cast<size_t>(row) * sizeof(float));
      }
      *mask(v, 0, k) = written ? 1 : 0;
      for (int64_t s = 1; s < t_max_; ++s) *mask(v, s, k) = 0;
    }
  }
}

void SharedWorkspace::clear() {
  check_live();
  if (running_) throw AlreadyRunningError("shared workspace modified while a remote run is in progress");
  std::memset(regions_[vars_.size()].data, 0, regions_[vars_.size()].bytes);
}

void SharedWorkspace::store_parameters(const std::vector<Tensor>& params) {
  check_live();
  auto* dst = static_cast<float*>(regions_[vars_.size() + 1].data);
  int64_t offset = 0;
  for (const auto& p : params) {
    if (offset + p.numel() > n_parameters_) throw RemoteError("parameter layout does not match the shared region");
    std::copy(p.data().begin(), p.data().end(), dst + offset);
    offset += p.numel();
  }
  if (offset != n_parameters_) throw RemoteError("parameter layout does not match the shared region");
}

void SharedWorkspace::load_parameters(std::vector<Tensor>& params) const {
  check_live();
  const auto* src = static_cast<const float*>(regions_[vars_.size() + 1].data);
  int64_t offset = 0;
  for (auto& p : params) {
    if (offset + p.numel() > n_parameters_) throw RemoteError("parameter layout does not match the shared region");
    auto out = p.mutable_data();
    std::copy(src + offset, src + offset + p.numel(), out.begin());
    offset += p.numel();
  }
}

RemoteAgent::RemoteAgent(AgentPtr agent, std::shared_ptr<SharedWorkspace> sw)
    : agent_(std::move(agent)), workspace_(std::move(sw)) {}

RemoteAgent::~RemoteAgent() {
  try {
    close();
  } catch (...) {
  }
}

void RemoteAgent::spawn(uint64_t seed) {
  for (int64_t k = 0; k < workspace_->n_workers(); ++k) {
    int cmd[2], res[2];
    if (::pipe(cmd) != 0) throw RemoteError(std::string("pipe: ") + std::strerror(errno));
    if (::pipe(res) != 0) {
      ::close(cmd[0]);
      ::close(cmd[1]);
      throw RemoteError(std::string("pipe: ") + std::strerror(errno));
    }
    const pid_t pid = ::fork();
    if (pid < 0) {
      for (int fd : {cmd[0], cmd[1], res[0], res[1]}) ::close(fd);
      throw RemoteError(std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
      ::close(cmd[1]);
      ::close(res[0]);
      for (const auto& w : workers_) {
        ::close(w.command_fd);
        ::close(w.result_fd);
      }
      int code = 0;
      try {
        agent_->seed(seed + static_cast<uint64_t>(k));
        while (auto m = wire::read_message(cmd[0])) {
          if (m->command == wire::Command::kStop) {
            wire::write_message(res[1], wire::Message::of(wire::Command::kAck));
            break;
          }
          if (m->command != wire::Command::kRun) {
            wire::write_message(res[1], wire::Message::error("unexpected command"));
            continue;
          }
          try {
            auto params = agent_->parameters();
            workspace_->load_parameters(params);
            Workspace local = workspace_->read_slice(k);
            {
              NoGradGuard no_grad;
              agent_->execute(local, m->kwargs);
            }
            workspace_->write_slice(k, local);
            wire::write_message(res[1], wire::Message::of(wire::Command::kDone));
          } catch (const std::exception& e) {
            wire::write_message(res[1], wire::Message::error(e.what()));
          }
        }
      } catch (...) {
        code = 3;
      }
      ::_exit(code);
    }
    ::close(cmd[0]);
    ::close(res[1]);
    workers_.push_back(Worker{pid, cmd[1], res[0], false});
  }
}

void RemoteAgent::start(SharedWorkspace& sw, const KwArgs& kwargs) {
  if (closed_) throw RemoteError("remote agent is closed");
  if (running_) throw AlreadyRunningError("remote agent is already running");
  if (&sw != workspace_.get()) throw RemoteError("shared workspace does not belong to this remote agent");
  workspace_->store_parameters(agent_->parameters());
  failure_.reset();
  running_ = true;
  workspace_->running_ = true;
  const auto message = wire::Message::run(kwargs);
  for (size_t k = 0; k < workers_.size(); ++k) {
    try {
      wire::write_message(workers_[k].command_fd, message);
      workers_[k].pending = true;
    } catch (const RemoteError& e) {
      fail(e.what(), static_cast<int64_t>(k));
    }
  }
}

void RemoteAgent::collect(size_t k) {
  Worker& w = workers_[k];
  std::optional<wire::Message> m;
  try {
    m = wire::read_message(w.result_fd);
  } catch (const RemoteError& e) {
    w.pending = false;
    failure_ = {static_cast<int64_t>(k), e.what()};
    return;
  }
  w.pending = false;
  if (!m) {
    int status = 0;
    std::string how = "exited";
    if (::waitpid(w.pid, &status, 0) == w.pid) {
      w.pid = -1;
      if (WIFSIGNALED(status)) how = "was killed by signal " + std::to_string(WTERMSIG(status));
      if (WIFEXITED(status)) how = "exited with status " + std::to_string(WEXITSTATUS(status));
    }
    failure_ = {static_cast<int64_t>(k), "process " + how};
  } else if (m->command == wire::Command::kErr) {
    failure_ = {static_cast<int64_t>(k), m->text};
  } else if (m->command != wire::Command::kDone) {
    failure_ = {static_cast<int64_t>(k), "unexpected reply"};
  }
}

void RemoteAgent::fail(const std::string& message, int64_t worker) {
  for (auto& w : workers_) {
    if (w.pid > 0) {
      ::kill(w.pid, SIGKILL);
      ::waitpid(w.pid, nullptr, 0);
      w.pid = -1;
    }
  }
  running_ = false;
  workspace_->running_ = false;
  close();
  throw WorkerError("worker " + std::to_string(worker) + ": " + message, static_cast<int>(worker));
}

bool RemoteAgent::is_running() {
  if (!running_) return false;
  std::vector<pollfd> fds;
  std::vector<size_t> index;
  for (size_t k = 0; k < workers_.size(); ++k) {
    if (!workers_[k].pending) continue;
    fds.push_back({workers_[k].result_fd, POLLIN, 0});
    index.push_back(k);
  }
  if (!fds.empty() && ::poll(fds.data(), fds.size(), 0) > 0) {
    for (size_t i = 0; i < fds.size(); ++i) {
      if (fds[i].revents != 0) collect(index[i]);
    }
  }
  if (failure_) fail(failure_->second, failure_->first);
  const bool pending = std::any_of(workers_.begin(), workers_.end(), [](const Worker& w) { return w.pending; });
  if (!pending) {
    running_ = false;
    workspace_->running_ = false;
  }
  return pending;
}

void RemoteAgent::join() {
  while (running_) {
    std::vector<pollfd> fds;
    std::vector<size_t> index;
    for (size_t k = 0; k < workers_.size(); ++k) {
      if (!workers_[k].pending) continue;
      fds.push_back({workers_[k].result_fd, POLLIN, 0});
      index.push_back(k);
    }
    if (fds.empty()) {
      running_ = false;
      workspace_->running_ = false;
      break;
    }
    const int ready = ::poll(fds.data(), fds.size(), -1);
    if (ready < 0 && errno != EINTR) fail(std::string("poll: ") + std::strerror(errno), -1);
    for (size_t i = 0; ready > 0 && i < fds.size(); ++i) {
      if (fds[i].revents != 0) collect(index[i]);
    }
    if (failure_) fail(failure_->second, failure_->first);
  }
}

void RemoteAgent::execute(SharedWorkspace& sw, const KwArgs& kwargs) {
  start(sw, kwargs);
  join();
}

void RemoteAgent::execute_async(SharedWorkspace& sw, const KwArgs& kwargs) { start(sw, kwargs); }

void RemoteAgent::close() {
  if (closed_) return;
  closed_ = true;
  for (auto& w : workers_) {
    if (w.pid > 0) {
      if (running_) {
        ::kill(w.pid, SIGKILL);
      } else {
        try {
          wire::write_message(w.command_fd, wire::Message::of(wire::Command::kStop));
        } catch (const RemoteError&) {
          ::kill(w.pid, SIGKILL);
        }
      }
      ::waitpid(w.pid, nullptr, 0);
      w.pid = -1;
    }
    if (w.command_fd >= 0) ::close(w.command_fd);
    if (w.result_fd >= 0) ::close(w.result_fd);
    w.command_fd = w.result_fd = -1;
  }
  running_ = false;
  workspace_->running_ = false;
  workspace_->release();
}

struct RemoteFactory {
  static std::unique_ptr<RemoteAgent> make(AgentPtr agent, std::shared_ptr<SharedWorkspace> sw, uint64_t seed) {
    std::unique_ptr<RemoteAgent> ra(new RemoteAgent(std::move(agent), std::move(sw)));
    ra->spawn(seed);
    return ra;
  }
};

Remote create_remote(const AgentPtr& agent, int64_t num_processes, const KwArgs& probe_kwargs,
                     const RemoteOptions& options) {
  if (!agent) throw RemoteError("create_remote: null agent");
  if (num_processes < 1) throw RemoteError("create_remote: need at least one process");
  static const bool sigpipe_ignored = [] {
    std::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)sigpipe_ignored;

  Workspace probe;
  {
    NoGradGuard no_grad;
    agent->execute(probe, probe_kwargs);
  }
  if (probe.empty()) throw RemoteError("create_remote: the probe run wrote no variables");
  std::vector<SharedWorkspace::Variable> vars;
  for (const auto& name : probe.variables()) vars.push_back({name, probe.item_shape(name)});
  const int64_t t_max = options.time_capacity > 0 ? options.time_capacity : probe.time_size();
  int64_t n_params = 0;
  for (const auto& p : agent->parameters()) n_params += p.numel();

  auto sw = std::make_shared<SharedWorkspace>(std::move(vars), probe.batch_size(), num_processes, t_max, n_params);
  return {RemoteFactory::make(agent, sw, options.seed), sw};
}

void remote_execute(RemoteAgent& ra, SharedWorkspace& sw, const KwArgs& kwargs) { ra.execute(sw, kwargs); }

void remote_execute_async(RemoteAgent& ra, SharedWorkspace& sw, const KwArgs& kwargs) { ra.execute_async(sw, kwargs); }

}  // namespace wsrl
