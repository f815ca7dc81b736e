#include "redspace/evaluator.hpp"

#include <nlohmann/json.hpp>

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstring>
#include <memory>
#include <mutex>

namespace redspace {

namespace {

class SubprocessEvaluator {
 public:
  explicit SubprocessEvaluator(EvaluatorSpec spec) : spec_(std::move(spec)) {
    if (spec_.command.empty())
      throw std::invalid_argument("external_evaluator: empty command");
  }

  ~SubprocessEvaluator() { shutdown(); }

  Vector evaluate(const Vector& s) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (pid_ < 0) spawn();

    nlohmann::json req;
    req["s"] = std::vector<double>(s.begin(), s.end());
    std::string line = req.dump();
    line.push_back('\n');
    write_all(line);

    std::string reply = read_line();
    nlohmann::json res;
    try {
      res = nlohmann::json::parse(reply);
    } catch (const std::exception&) {
      throw std::runtime_error("evaluator: malformed reply line: " + reply);
    }
    if (!res.contains("y") || !res["y"].is_array())
      throw std::runtime_error("evaluator: reply missing \"y\" array");
    std::vector<double> y = res["y"].get<std::vector<double>>();
    if (static_cast<Index>(y.size()) != spec_.output_dim)
      throw std::runtime_error("evaluator: expected " +
                               std::to_string(spec_.output_dim) + " outputs, got " +
                               std::to_string(y.size()));
    for (double v : y)
      if (!std::isfinite(v))
        throw std::runtime_error("evaluator: non-finite output value");
    return Eigen::Map<const Vector>(y.data(), static_cast<Index>(y.size()));
  }

 private:
  void spawn() {
    // EPIPE from write() instead of process death when the child exits early.
    signal(SIGPIPE, SIG_IGN);
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0)
      throw std::runtime_error("evaluator: pipe() failed");
    pid_t pid = fork();
    if (pid < 0) throw std::runtime_error("evaluator: fork() failed");
    if (pid == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      std::vector<char*> argv;
      for (const std::string& a : spec_.command) argv.push_back(const_cast<char*>(a.c_str()));
      argv.push_back(nullptr);
      execvp(argv[0], argv.data());
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    pid_ = pid;
  }

  void write_all(const std::string& data) {
    size_t off = 0;
    while (off < data.size()) {
      ssize_t w = ::write(write_fd_, data.data() + off, data.size() - off);
      if (w <= 0) throw std::runtime_error("evaluator: child stdin closed (spawn failure?)");
      off += static_cast<size_t>(w);
    }
  }

  std::string read_line() {
    while (true) {
      size_t nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      struct pollfd pfd{read_fd_, POLLIN, 0};
      int pr = poll(&pfd, 1, spec_.timeout_ms);
      if (pr == 0) throw std::runtime_error("evaluator: timeout waiting for reply");
      if (pr < 0) throw std::runtime_error("evaluator: poll() failed");
      char chunk[4096];
      ssize_t r = ::read(read_fd_, chunk, sizeof(chunk));
      if (r <= 0) throw std::runtime_error("evaluator: child exited before replying");
      buffer_.append(chunk, static_cast<size_t>(r));
    }
  }

  void shutdown() {
    if (write_fd_ >= 0) close(write_fd_);
    if (read_fd_ >= 0) close(read_fd_);
    if (pid_ > 0) {
      int status = 0;
      for (int i = 0; i < 50; ++i) {
        if (waitpid(pid_, &status, WNOHANG) == pid_) return;
        usleep(10000);
      }
      kill(pid_, SIGKILL);
      waitpid(pid_, &status, 0);
    }
  }

  EvaluatorSpec spec_;
  std::mutex mutex_;
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::string buffer_;
};

}  // namespace

Problem external_evaluator(const EvaluatorSpec& spec) {
  if (!spec.domain.has_value())
    throw std::invalid_argument("external_evaluator: spec needs a design domain");
  auto runner = std::make_shared<SubprocessEvaluator>(spec);
  return Problem::from_vector_evaluator(
      *spec.domain, spec.output_dim,
      [runner](const Vector& s) { return runner->evaluate(s); }, spec.known_optimum);
}

}  // namespace redspace
