#pragma once

/// @file
/// Multi-model tree search over reasoning states. Several candidate
/// generators propose the next structured section, a panel of judge models
/// scores each proposal, non-negative proposals join the tree, values
/// propagate to the root as visit-weighted means, and a UCB rule picks the
/// next node to grow. Complete root-to-conclusion traces are harvested as
/// structured responses.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "traceopt/common.hpp"
#include "traceopt/judge.hpp"
#include "traceopt/longcot.hpp"

namespace traceopt::mcts {

class ExpanderFailure : public ExternalError {
 public:
  using ExternalError::ExternalError;
};

class NoCandidates : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EmptyCandidateSet : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NoCompletePath : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct SearchNode {
  int id = -1;
  std::string state_text;  ///< one structured section added at this node
  std::optional<int> parent;
  std::vector<int> children;
  double value = 0.0;       ///< V
  std::int64_t visits = 0;  ///< N
  std::string expander_id;  ///< comma-joined when candidates collide
  double reward = 0.0;      ///< simulation reward at incorporation
  bool terminal = false;    ///< state_text is a conclusion section
  bool dead_end = false;    ///< closed: pruned empty or subtree exhausted
  bool expanded = false;
};

struct SearchConfig {
  double exploration = 1.0;      ///< UCB exploration weight
  int max_depth = 8;             ///< guards non-terminating expanders
  int expansions_per_model = 2;  ///< candidates requested per expander
  int max_iterations = 50;
  std::uint64_t seed = 0;
  /// Judge personas for simulation; simulation averages over all of them.
  std::vector<std::string> models = {"evaluator_a", "evaluator_b", "evaluator_c"};
  /// Skip expanders that throw instead of aborting the search. At least one
  /// expander must still succeed.
  bool continue_on_expander_failure = false;
};

void validate(const SearchConfig& config);

/// Candidate generator contract. Outputs must each parse as exactly one
/// structured section.
class Expander {
 public:
  virtual ~Expander() = default;
  virtual std::string id() const = 0;
  /// Up to `count` candidate step texts given the states from the root to
  /// the node being expanded (root's empty state excluded).
  virtual std::vector<std::string> generate(const TaskInstance& task,
                                            const std::vector<std::string>& ancestors,
                                            int count, std::uint64_t seed) = 0;
};

struct SearchTree {
  std::vector<SearchNode> nodes;  ///< index == id; node 0 is the root

  static SearchTree with_root();

  SearchNode& at(int id);
  const SearchNode& at(int id) const;
  int depth(int id) const;  ///< root has depth 0
  /// State texts from the root (exclusive) down to `id` (inclusive).
  std::vector<std::string> states_to(int id) const;
  /// Assigns the next id, links the child, and returns its id.
  int add_child(int parent_id, SearchNode node);
};

/// Stable fixture key for a partial trace.
std::string ancestor_hash(const std::vector<std::string>& ancestors);

/// Replays candidate steps from a JSONL fixture. Records are either
/// {"ancestor_hash": h, "candidates": [...]} or
/// {"ancestors": [...], "candidates": [...]}, optionally restricted with
/// "task_id". Unknown traces produce no candidates.
class ScriptedExpander : public Expander {
 public:
  ScriptedExpander(std::string id, const std::filesystem::path& fixture);

  std::string id() const override { return id_; }
  std::vector<std::string> generate(const TaskInstance& task,
                                    const std::vector<std::string>& ancestors,
                                    int count, std::uint64_t seed) override;

 private:
  std::string id_;
  std::map<std::string, std::vector<std::string>> candidates_;
};

/// Union of all expanders' proposals for `node_id`, deduplicated by state
/// text (provenance keeps every contributing expander id) and sorted by the
/// stable key (state_text, expander_id). Returned nodes are not yet attached:
/// V = 0, N = 0, id unset.
std::vector<SearchNode> expand(const SearchTree& tree, int node_id,
                               const TaskInstance& task,
                               const std::vector<Expander*>& expanders,
                               const SearchConfig& config);

/// Mean over judge models of (visual + spatial + logical); in [-3, 3].
double simulate(const SearchNode& candidate, const TaskInstance& task,
                judge::JudgeBackend& judge, const std::vector<std::string>& models);

/// Keeps candidates with reward >= 0 in order, recording the reward.
std::vector<SearchNode> prune(
    const std::vector<std::pair<SearchNode, double>>& scored);

/// One (visits, reward) contribution per newly accepted child.
using ChildContribution = std::pair<std::int64_t, double>;

/// Folds the children's value mass into every ancestor from `leaf_parent_id`
/// to the root: V <- (N*V + sum N_c*R_c) / (N + sum N_c), N <- N + sum N_c.
void backprop(SearchTree& tree, int leaf_parent_id,
              const std::vector<ChildContribution>& contributions);

/// Argmax of V(c) + exploration * sqrt(ln N(parent) / (1 + N(c))); ties go
/// to the earliest candidate in the given (stable-key) order.
int select(const SearchTree& tree, int parent_id,
           const std::vector<int>& candidate_ids, const SearchConfig& config);

struct HarvestedPath {
  longcot::LongCoTResponse response;
  double mean_reward = 0.0;       ///< mean node reward along the path
  std::vector<int> node_ids;      ///< root excluded
};

struct SearchResult {
  SearchTree tree;
  std::vector<HarvestedPath> paths;  ///< ranked by mean reward, descending
};

/// Runs expand/simulate/prune/backprop/select until the iteration budget is
/// spent or every frontier is terminal or dead-end, backtracking to the best
/// open node by UCB when a branch dies. Throws NoCompletePath when no
/// conclusion node was ever attached.
SearchResult search(const TaskInstance& task,
                    const std::vector<Expander*>& expanders,
                    judge::JudgeBackend& judge, const SearchConfig& config);

/// JSONL of {id, parent, state_text, V, N, expander_id, reward, terminal};
/// parent is null on the root row. Exploration flags (dead_end, expanded)
/// are runtime state and are not dumped.
nlohmann::json node_to_json(const SearchNode& node);
void dump_tree(const SearchTree& tree, const std::filesystem::path& path);
SearchTree load_tree(const std::filesystem::path& path);

}  // namespace traceopt::mcts
