#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "agency/backend.hpp"
#include "agency/problem_model.hpp"
#include "agency/sim.hpp"

namespace agency::testing {

inline model::ProblemStatement make_statement(std::string id = "PROBTest") {
  model::ProblemStatement s;
  s.id = std::move(id);
  s.title = "Test problem";
  s.body_text = "A plate of length L sits in a flow of speed U. Estimate the drag.";
  s.qoi = {"drag force"};
  return s;
}

inline model::Realization make_realization(std::size_t index, std::optional<std::string> label = std::nullopt) {
  model::Realization r;
  r.index = index;
  r.raw_output = "## Part 1\nd" + std::to_string(index) + "\n## Part 2\nm\n## Part 3\ns\n## Part 4\nv\n";
  r.part1_data_completion = "d" + std::to_string(index);
  r.part2_model = "m";
  r.part3_solution_procedure = "s";
  r.part4_verification_validation = "v";
  r.class_label = std::move(label);
  return r;
}

inline runtime::BackendConfig sim_config(int max_parallel = 1) {
  runtime::BackendConfig c;
  c.kind = runtime::BackendKind::Simulated;
  c.max_parallel = max_parallel;
  c.retry.base_backoff = std::chrono::milliseconds(0);
  return c;
}

inline void no_sleep(std::chrono::milliseconds) {}

inline sim::ProblemProfile make_profile(std::string id, std::vector<std::pair<std::string, double>> classes,
                                        std::vector<std::string> correct, std::uint64_t seed = 1) {
  sim::ProblemProfile p;
  p.problem_id = std::move(id);
  p.seed = seed;
  for (auto& [label, prob] : classes) {
    sim::ProfileClass c;
    c.label = label;
    c.prob = prob;
    c.correct = std::find(correct.begin(), correct.end(), label) != correct.end();
    c.canonical_answer_text = "## Part 1\nfill\n## Part 2\nmodel\n## Part 3\nsolve\n## Part 4\ncheck\nAnswer: " + label;
    p.classes.push_back(std::move(c));
  }
  return p;
}

// Backend driven by a callback; records every request it sees and the
// largest number of overlapping calls.
class ScriptedBackend final : public runtime::ModelBackend {
 public:
  using Script = std::function<runtime::ChatResponse(const runtime::ChatRequest&, int call_number)>;

  ScriptedBackend(runtime::BackendConfig config, Script script)
      : ModelBackend(std::move(config)), script_(std::move(script)) {}

  runtime::ChatResponse complete(const runtime::ChatRequest& request) override {
    const int now = ++in_flight_;
    int seen = peak_.load();
    while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
    }
    int call;
    {
      std::lock_guard lock(mu_);
      call = static_cast<int>(requests_.size());
      requests_.push_back({request.role, request.session_id, request.index, request.system_text, request.user_text});
    }
    struct Leave {
      std::atomic<int>& n;
      ~Leave() { --n; }
    } leave{in_flight_};
    return script_(request, call);
  }

  struct Seen {
    runtime::AgentRole role;
    std::string session_id;
    std::size_t index;
    std::string system_text;
    std::string user_text;
  };

  std::vector<Seen> requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }
  int peak_in_flight() const { return peak_.load(); }

 private:
  Script script_;
  mutable std::mutex mu_;
  std::vector<Seen> requests_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_{0};
};

inline std::string solve_text(std::size_t index) {
  return "## Part 1\ndata " + std::to_string(index) + "\n## Part 2\nmodel\n## Part 3\nprocedure\n## Part 4\ncheck\n";
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           ("agency-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace agency::testing
