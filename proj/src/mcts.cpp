#include "traceopt/mcts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <tuple>

namespace traceopt::mcts {

void validate(const SearchConfig& config) {
  if (!(config.exploration > 0.0)) {
    throw ValidationError("exploration weight must be positive");
  }
  if (config.max_depth < 1) throw ValidationError("max_depth must be positive");
  if (config.expansions_per_model < 1) {
    throw ValidationError("expansions_per_model must be positive");
  }
  if (config.max_iterations < 0) {
    throw ValidationError("max_iterations must be non-negative");
  }
  if (config.models.empty()) {
    throw ValidationError("at least one evaluation model is required");
  }
}

SearchTree SearchTree::with_root() {
  SearchTree tree;
  SearchNode root;
  root.id = 0;
  tree.nodes.push_back(std::move(root));
  return tree;
}

SearchNode& SearchTree::at(int id) {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes.size()) {
    throw ValidationError("unknown node id " + std::to_string(id));
  }
  return nodes[id];
}

const SearchNode& SearchTree::at(int id) const {
  return const_cast<SearchTree*>(this)->at(id);
}

int SearchTree::depth(int id) const {
  int d = 0;
  for (const SearchNode* n = &at(id); n->parent; n = &at(*n->parent)) ++d;
  return d;
}

std::vector<std::string> SearchTree::states_to(int id) const {
  std::vector<std::string> states;
  for (const SearchNode* n = &at(id); n->parent; n = &at(*n->parent)) {
    states.push_back(n->state_text);
  }
  std::reverse(states.begin(), states.end());
  return states;
}

int SearchTree::add_child(int parent_id, SearchNode node) {
  SearchNode& parent = at(parent_id);
  if (parent.terminal) {
    throw ValidationError("terminal nodes cannot take children");
  }
  node.id = static_cast<int>(nodes.size());
  node.parent = parent_id;
  parent.children.push_back(node.id);
  nodes.push_back(std::move(node));
  return nodes.back().id;
}

std::string ancestor_hash(const std::vector<std::string>& ancestors) {
  // Length-prefixed concatenation so no join separator can be forged.
  std::string key;
  for (const std::string& s : ancestors) {
    key += std::to_string(s.size());
    key += ':';
    key += s;
    key += ';';
  }
  return fnv1a64_hex(key);
}

ScriptedExpander::ScriptedExpander(std::string id,
                                   const std::filesystem::path& fixture)
    : id_(std::move(id)) {
  for_each_jsonl(fixture, [this, &fixture](std::size_t line,
                                           const nlohmann::json& record) {
    if (!record.contains("candidates") || !record.at("candidates").is_array()) {
      throw ValidationError(fixture.string() + ":" + std::to_string(line) +
                            ": scripted record needs a 'candidates' array");
    }
    std::string hash;
    if (record.contains("ancestor_hash")) {
      hash = record.at("ancestor_hash").get<std::string>();
    } else if (record.contains("ancestors")) {
      hash = ancestor_hash(record.at("ancestors").get<std::vector<std::string>>());
    } else {
      throw ValidationError(fixture.string() + ":" + std::to_string(line) +
                            ": scripted record needs 'ancestor_hash' or 'ancestors'");
    }
    std::string key = record.value("task_id", std::string{}) + "|" + hash;
    auto [it, inserted] = candidates_.emplace(
        key, record.at("candidates").get<std::vector<std::string>>());
    if (!inserted) {
      throw ValidationError(fixture.string() + ":" + std::to_string(line) +
                            ": duplicate scripted key " + key);
    }
  });
}

std::vector<std::string> ScriptedExpander::generate(
    const TaskInstance& task, const std::vector<std::string>& ancestors, int count,
    std::uint64_t /*seed*/) {
  std::string hash = ancestor_hash(ancestors);
  auto it = candidates_.find(task.task_id + "|" + hash);
  if (it == candidates_.end()) it = candidates_.find("|" + hash);
  if (it == candidates_.end()) return {};
  std::vector<std::string> out = it->second;
  if (static_cast<int>(out.size()) > count) out.resize(count);
  return out;
}

std::vector<SearchNode> expand(const SearchTree& tree, int node_id,
                               const TaskInstance& task,
                               const std::vector<Expander*>& expanders,
                               const SearchConfig& config) {
  validate(config);
  if (expanders.empty()) throw ValidationError("expand needs at least one expander");
  const SearchNode& node = tree.at(node_id);
  if (node.terminal) {
    throw ValidationError("node " + std::to_string(node_id) + " is terminal");
  }
  if (tree.depth(node_id) >= config.max_depth) {
    throw ValidationError("node " + std::to_string(node_id) +
                          " is at the depth limit");
  }

  std::vector<std::string> ancestors = tree.states_to(node_id);

  // text -> contributing expander ids, insertion-ordered texts for stability.
  std::map<std::string, std::set<std::string>> provenance;
  std::vector<std::string> failures;
  for (std::size_t k = 0; k < expanders.size(); ++k) {
    Expander* expander = expanders[k];
    std::vector<std::string> texts;
    try {
      std::uint64_t seed =
          config.seed ^ fnv1a64(task.task_id) ^ (0x9e3779b97f4a7c15ULL * (node_id + 1));
      texts = expander->generate(task, ancestors, config.expansions_per_model, seed);
    } catch (const std::exception& e) {
      std::string what = expander->id() + ": " + e.what();
      if (!config.continue_on_expander_failure) {
        throw ExpanderFailure("expander " + what);
      }
      failures.push_back(std::move(what));
      continue;
    }
    for (std::string& text : texts) {
      try {
        longcot::parse_section(text);
      } catch (const ValidationError& e) {
        throw ExpanderFailure("expander " + expander->id() +
                              " produced a malformed section: " + e.what());
      }
      provenance[text].insert(expander->id());
    }
  }
  if (failures.size() == expanders.size()) {
    throw ExpanderFailure("all expanders failed; first: " + failures.front());
  }
  if (provenance.empty()) {
    throw NoCandidates("no expander produced a candidate for node " +
                       std::to_string(node_id));
  }

  std::vector<SearchNode> candidates;
  for (const auto& [text, ids] : provenance) {
    SearchNode cand;
    cand.state_text = text;
    cand.parent = node_id;
    std::string joined;
    for (const std::string& eid : ids) {
      if (!joined.empty()) joined += ',';
      joined += eid;
    }
    cand.expander_id = std::move(joined);
    cand.terminal =
        longcot::parse_section(text).kind == longcot::SectionKind::conclusion;
    candidates.push_back(std::move(cand));
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const SearchNode& a, const SearchNode& b) {
                     return std::tie(a.state_text, a.expander_id) <
                            std::tie(b.state_text, b.expander_id);
                   });
  return candidates;
}

double simulate(const SearchNode& candidate, const TaskInstance& task,
                judge::JudgeBackend& judge, const std::vector<std::string>& models) {
  if (candidate.state_text.empty()) {
    throw ValidationError("cannot simulate a candidate without state text");
  }
  if (models.empty()) {
    throw ValidationError("simulation needs at least one evaluation model");
  }
  judge::JudgeRequest req =
      judge::make_request(task, candidate.state_text, judge::Rubric::node);
  auto judged = judge::judge_node(judge, req, models);
  double sum = 0.0;
  for (const judge::NodeIndicators& ind : judged.value) {
    sum += ind.visual + ind.spatial + ind.logical;
  }
  return sum / static_cast<double>(models.size());
}

std::vector<SearchNode> prune(
    const std::vector<std::pair<SearchNode, double>>& scored) {
  std::vector<SearchNode> kept;
  for (const auto& [node, reward] : scored) {
    if (reward >= 0.0) {
      kept.push_back(node);
      kept.back().reward = reward;
    }
  }
  return kept;
}

void backprop(SearchTree& tree, int leaf_parent_id,
              const std::vector<ChildContribution>& contributions) {
  std::int64_t count = 0;
  double mass = 0.0;
  for (const auto& [n_c, r_c] : contributions) {
    if (n_c < 1) {
      throw ValidationError("child contributions need at least one visit");
    }
    count += n_c;
    mass += static_cast<double>(n_c) * r_c;
  }
  if (count == 0) return;

  int id = leaf_parent_id;
  while (true) {
    SearchNode& node = tree.at(id);
    double n = static_cast<double>(node.visits);
    node.value = (n * node.value + mass) / (n + static_cast<double>(count));
    node.visits += count;
    if (!node.parent) break;
    id = *node.parent;
  }
}

int select(const SearchTree& tree, int parent_id,
           const std::vector<int>& candidate_ids, const SearchConfig& config) {
  if (candidate_ids.empty()) {
    throw EmptyCandidateSet("select needs at least one candidate");
  }
  const SearchNode& parent = tree.at(parent_id);
  if (parent.visits < 1) {
    throw ValidationError("select requires a visited parent (N >= 1)");
  }
  double log_n = std::log(static_cast<double>(parent.visits));
  int best = candidate_ids.front();
  double best_score = -std::numeric_limits<double>::infinity();
  for (int id : candidate_ids) {
    const SearchNode& c = tree.at(id);
    double score =
        c.value + config.exploration *
                      std::sqrt(log_n / (1.0 + static_cast<double>(c.visits)));
    if (score > best_score) {
      best_score = score;
      best = id;
    }
  }
  return best;
}

namespace {

// A subtree can still produce work if it reaches any unexpanded, eligible
// node. Terminal and dead-end nodes are closed.
bool subtree_open(const SearchTree& tree, int id, const SearchConfig& config) {
  const SearchNode& node = tree.at(id);
  if (node.dead_end || node.terminal) return false;
  if (tree.depth(id) >= config.max_depth) return false;
  if (!node.expanded) return true;
  for (int child : node.children) {
    if (subtree_open(tree, child, config)) return true;
  }
  return false;
}

// Best unexpanded eligible node anywhere in the tree, by UCB against its own
// parent; -1 when the tree is exhausted.
int best_frontier(const SearchTree& tree, const SearchConfig& config) {
  int best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const SearchNode& node : tree.nodes) {
    if (node.expanded || node.dead_end || node.terminal || !node.parent) continue;
    if (tree.depth(node.id) >= config.max_depth) continue;
    const SearchNode& parent = tree.at(*node.parent);
    if (parent.visits < 1) continue;
    double score = node.value +
                   config.exploration *
                       std::sqrt(std::log(static_cast<double>(parent.visits)) /
                                 (1.0 + static_cast<double>(node.visits)));
    if (score > best_score) {
      best_score = score;
      best = node.id;
    }
  }
  return best;
}

}  // namespace

SearchResult search(const TaskInstance& task, const std::vector<Expander*>& expanders,
                    judge::JudgeBackend& judge, const SearchConfig& config) {
  validate(config);
  if (expanders.empty()) throw ValidationError("search needs at least one expander");

  SearchResult result;
  result.tree = SearchTree::with_root();
  SearchTree& tree = result.tree;
  int current = 0;

  for (int iteration = 0; iteration < config.max_iterations; ++iteration) {
    // Resolve `current` to an unexpanded eligible node, descending through
    // expanded nodes by UCB and backtracking when the branch is closed.
    bool exhausted = false;
    while (true) {
      SearchNode& cur = tree.at(current);
      if (cur.terminal || cur.dead_end || tree.depth(current) >= config.max_depth) {
        if (!cur.terminal) cur.dead_end = true;
        current = best_frontier(tree, config);
        if (current < 0) {
          exhausted = true;
          break;
        }
        continue;
      }
      if (!cur.expanded) break;
      std::vector<int> open;
      for (int child : cur.children) {
        if (subtree_open(tree, child, config)) open.push_back(child);
      }
      if (open.empty()) {
        cur.dead_end = true;
        continue;
      }
      current = select(tree, current, open, config);
    }
    if (exhausted) break;

    std::vector<SearchNode> candidates;
    try {
      candidates = expand(tree, current, task, expanders, config);
    } catch (const NoCandidates&) {
      tree.at(current).expanded = true;
      tree.at(current).dead_end = true;
      continue;
    }

    std::vector<std::pair<SearchNode, double>> scored;
    scored.reserve(candidates.size());
    for (SearchNode& cand : candidates) {
      double reward = simulate(cand, task, judge, config.models);
      scored.emplace_back(std::move(cand), reward);
    }

    std::vector<SearchNode> accepted = prune(scored);
    tree.at(current).expanded = true;
    if (accepted.empty()) {
      tree.at(current).dead_end = true;
      continue;
    }

    std::vector<int> child_ids;
    std::vector<ChildContribution> contributions;
    for (SearchNode& child : accepted) {
      child.visits = 1;
      child.value = child.reward;
      contributions.emplace_back(1, child.reward);
      child_ids.push_back(tree.add_child(current, std::move(child)));
    }
    backprop(tree, current, contributions);
    current = select(tree, current, child_ids, config);
  }

  // Every conclusion node in the final tree closes a complete trace.
  for (const SearchNode& node : tree.nodes) {
    if (!node.terminal) continue;
    HarvestedPath path;
    for (const SearchNode* n = &node; n->parent; n = &tree.at(*n->parent)) {
      path.node_ids.push_back(n->id);
    }
    std::reverse(path.node_ids.begin(), path.node_ids.end());
    std::string text;
    double reward_sum = 0.0;
    for (int id : path.node_ids) {
      if (!text.empty()) text += "\n\n";
      text += tree.at(id).state_text;
      reward_sum += tree.at(id).reward;
    }
    text += '\n';
    path.mean_reward = reward_sum / static_cast<double>(path.node_ids.size());
    path.response = longcot::parse_longcot(text);
    result.paths.push_back(std::move(path));
  }
  std::stable_sort(result.paths.begin(), result.paths.end(),
                   [](const HarvestedPath& a, const HarvestedPath& b) {
                     return a.mean_reward > b.mean_reward;
                   });
  if (result.paths.empty()) {
    throw NoCompletePath("search finished without reaching a conclusion section");
  }
  return result;
}

nlohmann::json node_to_json(const SearchNode& node) {
  nlohmann::json j = {{"id", node.id},
                      {"state_text", node.state_text},
                      {"V", node.value},
                      {"N", node.visits},
                      {"expander_id", node.expander_id},
                      {"reward", node.reward},
                      {"terminal", node.terminal}};
  if (node.parent) {
    j["parent"] = *node.parent;
  } else {
    j["parent"] = nullptr;
  }
  return j;
}

void dump_tree(const SearchTree& tree, const std::filesystem::path& path) {
  std::vector<nlohmann::json> rows;
  rows.reserve(tree.nodes.size());
  for (const SearchNode& node : tree.nodes) rows.push_back(node_to_json(node));
  write_jsonl(path, rows);
}

SearchTree load_tree(const std::filesystem::path& path) {
  SearchTree tree;
  for_each_jsonl(path, [&tree](std::size_t line, const nlohmann::json& j) {
    SearchNode node;
    node.id = j.at("id").get<int>();
    if (node.id != static_cast<int>(tree.nodes.size())) {
      throw ValidationError("tree dump line " + std::to_string(line) +
                            ": node ids must be contiguous from 0");
    }
    node.state_text = j.at("state_text").get<std::string>();
    node.value = j.at("V").get<double>();
    node.visits = j.at("N").get<std::int64_t>();
    node.expander_id = j.at("expander_id").get<std::string>();
    node.reward = j.at("reward").get<double>();
    node.terminal = j.at("terminal").get<bool>();
    if (!j.at("parent").is_null()) {
      int parent = j.at("parent").get<int>();
      if (parent >= node.id || parent < 0) {
        throw ValidationError("tree dump line " + std::to_string(line) +
                              ": parent must precede child");
      }
      node.parent = parent;
      tree.nodes[parent].children.push_back(node.id);
    } else if (node.id != 0) {
      throw ValidationError("tree dump line " + std::to_string(line) +
                            ": only the root may lack a parent");
    }
    tree.nodes.push_back(std::move(node));
  });
  if (tree.nodes.empty()) throw ValidationError("tree dump is empty");
  return tree;
}

}  // namespace traceopt::mcts
