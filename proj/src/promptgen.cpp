#include "promptgen.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "errors.hpp"

namespace metaid {

using nlohmann::json;

namespace {

void replace_all(std::string& text, const std::string& needle, const std::string& value) {
  size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), value);
    pos += value.size();
  }
}

}  // namespace

const char* task_name(Task task) {
  switch (task) {
    case Task::sequential: return "sequential";
    case Task::direct: return "direct";
    case Task::rating: return "rating";
    case Task::explanation: return "explanation";
    case Task::review: return "review";
  }
  return "sequential";
}

Task task_from_name(const std::string& name) {
  for (Task t : all_tasks())
    if (name == task_name(t)) return t;
  throw UsageError("unknown task: " + name);
}

const std::vector<Task>& all_tasks() {
  static const std::vector<Task> tasks = {Task::sequential, Task::direct, Task::rating,
                                          Task::explanation, Task::review};
  return tasks;
}

TemplateSet default_templates() {
  TemplateSet set;
  set.templates[Task::sequential] = {
      "Considering {user} has interacted with items {history}. What is the next "
      "recommendation for the user?",
      "{target}"};
  set.templates[Task::direct] = {"What should we recommend for {user}?", "{target}"};
  set.templates[Task::rating] = {
      "Which star rating will {user} give to item {item}? (1 being the lowest and 5 "
      "being the highest).",
      "{rating}"};
  set.templates[Task::explanation] = {
      "According to the feature word {feature}, generate a {rating}-star explanation "
      "for {user} about {item}.",
      "{target}"};
  set.templates[Task::review] = {
      "Write a short sentence to summarize the following product review from {user}: "
      "{review}",
      "{target}"};
  return set;
}

TemplateSet load_templates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open template file: " + path);
  TemplateSet set;
  std::string line;
  uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string task, input, output;
    if (!std::getline(ss, task, '\t') || !std::getline(ss, input, '\t') ||
        !std::getline(ss, output))
      throw DataError("template line " + std::to_string(line_no) + ": expected 3 columns");
    set.templates[task_from_name(task)] = {input, output};
  }
  if (set.templates.empty()) throw DataError("template file defines no tasks: " + path);
  return set;
}

PromptExample render_example(Task task, const IdAssignment& assignment,
                             const TemplateSet& templates, const RenderInputs& inputs) {
  auto it = templates.templates.find(task);
  if (it == templates.templates.end())
    throw UsageError(std::string("no template for task ") + task_name(task));
  std::string user = assignment.surface_of(true, inputs.user);
  std::string item = assignment.surface_of(false, inputs.item);
  std::string history;
  for (size_t k = 0; k < inputs.history.size(); ++k) {
    if (k) history += ", ";
    history += assignment.surface_of(false, inputs.history[k]);
  }
  bool item_target = task == Task::sequential || task == Task::direct;
  std::string target = item_target ? item : inputs.target_text;

  PromptExample example;
  example.task = task;
  example.input_text = it->second.input;
  example.output_text = it->second.output;
  for (std::string* text : {&example.input_text, &example.output_text}) {
    replace_all(*text, "{user}", user);
    replace_all(*text, "{history}", history);
    replace_all(*text, "{item}", item);
    replace_all(*text, "{target}", target);
    replace_all(*text, "{rating}", std::to_string(inputs.rating));
    replace_all(*text, "{review}", inputs.review_text);
    replace_all(*text, "{feature}", inputs.feature_word);
  }
  return example;
}

std::map<Task, uint64_t> emit_corpus(const DatasetIndex& index, const DatasetSplits& splits,
                                     const IdAssignment& assignment,
                                     const std::vector<Task>& tasks,
                                     const TemplateSet& templates, const std::string& path) {
  if (assignment.user_ids.size() != index.user_count() ||
      assignment.item_ids.size() != index.item_count())
    throw DataError("assignment does not cover the index");
  std::vector<const char*> split_of(index.interactions.size(), nullptr);
  for (uint32_t id : splits.train) split_of.at(id) = "train";
  for (uint32_t id : splits.validation) split_of.at(id) = "validation";
  for (uint32_t id : splits.test) split_of.at(id) = "test";

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  std::map<Task, uint64_t> counts;
  for (Task t : tasks) counts[t] = 0;

  auto write_line = [&](Task task, const PromptExample& ex, const char* split) {
    json line;
    line["task"] = task_name(task);
    line["input"] = ex.input_text;
    line["output"] = ex.output_text;
    line["split"] = split;
    out << line.dump() << '\n';
    ++counts[task];
  };

  for (Task task : all_tasks()) {
    if (std::find(tasks.begin(), tasks.end(), task) == tasks.end()) continue;
    for (uint32_t u = 0; u < index.user_count(); ++u) {
      const auto& seq = index.per_user_sequence[u];
      for (size_t p = 0; p < seq.size(); ++p) {
        uint32_t id = seq[p];
        const char* split = split_of[id];
        if (!split) continue;  // interaction belongs to no split (dropped user)
        const Interaction& x = index.interactions[id];
        RenderInputs in;
        in.user = u;
        in.item = x.item;
        in.rating = x.rating;
        switch (task) {
          case Task::sequential: {
            if (p == 0) continue;  // no history yet
            for (size_t q = 0; q < p; ++q)
              in.history.push_back(index.interactions[seq[q]].item);
            break;
          }
          case Task::direct:
          case Task::rating:
            break;
          case Task::explanation: {
            if (x.explanation.empty() || x.feature_word.empty()) continue;
            in.feature_word = x.feature_word;
            in.target_text = x.explanation;
            break;
          }
          case Task::review: {
            if (x.review_text.empty() || x.summary.empty()) continue;
            in.review_text = x.review_text;
            in.target_text = x.summary;
            break;
          }
        }
        write_line(task, render_example(task, assignment, templates, in), split);
      }
    }
  }
  if (!out) throw DataError("write failed: " + path);
  return counts;
}

IdTrie build_id_trie(const IdAssignment& assignment) {
  IdTrie trie;
  for (uint32_t i = 0; i < assignment.item_ids.size(); ++i) {
    uint32_t node = 0;
    for (const auto& tok : assignment.item_ids[i]) {
      auto it = trie.nodes[node].children.find(tok);
      if (it == trie.nodes[node].children.end()) {
        uint32_t child = static_cast<uint32_t>(trie.nodes.size());
        trie.nodes[node].children.emplace(tok, child);
        trie.nodes.emplace_back();
        node = child;
      } else {
        node = it->second;
      }
    }
    if (trie.nodes[node].item != -1)
      throw std::runtime_error("duplicate item id sequence at item " + std::to_string(i));
    trie.nodes[node].item = static_cast<int64_t>(i);
  }
  return trie;
}

uint64_t trie_path_count(const IdTrie& trie) {
  uint64_t count = 0;
  for (const auto& node : trie.nodes)
    if (node.item != -1) ++count;
  return count;
}

std::vector<std::string> valid_continuations(const IdTrie& trie,
                                             const std::vector<std::string>& prefix) {
  uint32_t node = 0;
  for (const auto& tok : prefix) {
    auto it = trie.nodes[node].children.find(tok);
    if (it == trie.nodes[node].children.end()) return {};
    node = it->second;
  }
  std::vector<std::string> out;
  out.reserve(trie.nodes[node].children.size());
  for (const auto& [tok, child] : trie.nodes[node].children) out.push_back(tok);
  return out;
}

std::vector<std::vector<std::string>> enumerate_trie_paths(const IdTrie& trie) {
  std::vector<std::vector<std::string>> paths;
  std::vector<std::string> stack;
  auto walk = [&](auto&& self, uint32_t node) -> void {
    if (trie.nodes[node].item != -1) paths.push_back(stack);
    for (const auto& [tok, child] : trie.nodes[node].children) {
      stack.push_back(tok);
      self(self, child);
      stack.pop_back();
    }
  };
  walk(walk, 0);
  return paths;
}

void save_trie_json(const IdTrie& trie, const DatasetIndex& index, const std::string& path) {
  auto to_json = [&](auto&& self, uint32_t node) -> json {
    json obj = json::object();
    if (trie.nodes[node].item != -1) {
      uint32_t item = static_cast<uint32_t>(trie.nodes[node].item);
      obj["item_index"] = item;
      if (item < index.item_count()) obj["item_key"] = index.item_names[item];
    }
    if (!trie.nodes[node].children.empty()) {
      json kids = json::object();
      for (const auto& [tok, child] : trie.nodes[node].children) kids[tok] = self(self, child);
      obj["children"] = std::move(kids);
    }
    return obj;
  };
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << to_json(to_json, 0).dump() << '\n';
  if (!out) throw DataError("write failed: " + path);
}

IdTrie load_trie_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw DataError("invalid JSON in " + path);
  IdTrie trie;
  auto from_json = [&](auto&& self, const json& obj, uint32_t node) -> void {
    if (!obj.is_object()) throw DataError("malformed trie node in " + path);
    if (obj.contains("item_index"))
      trie.nodes[node].item = obj["item_index"].get<int64_t>();
    if (obj.contains("children")) {
      for (const auto& [tok, sub] : obj["children"].items()) {
        uint32_t child = static_cast<uint32_t>(trie.nodes.size());
        trie.nodes.emplace_back();
        trie.nodes[node].children.emplace(tok, child);
        self(self, sub, child);
      }
    }
  };
  from_json(from_json, doc, 0);
  return trie;
}

}  // namespace metaid
