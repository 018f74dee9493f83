#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "idgen.hpp"
#include "ingest.hpp"

namespace metaid {

enum class Task { sequential, direct, rating, explanation, review };

const char* task_name(Task task);
Task task_from_name(const std::string& name);
// All five tasks in canonical emission order.
const std::vector<Task>& all_tasks();

struct TaskTemplate {
  std::string input;
  std::string output;
};

// Placeholders: {user}, {history}, {item}, {target}, {rating}, {review},
// {feature}. ID surfaces are substituted space-joined; {history} joins item
// surfaces with ", ".
struct TemplateSet {
  std::map<Task, TaskTemplate> templates;
};

TemplateSet default_templates();
// Plain text, one "task<TAB>input template<TAB>output template" line per task.
TemplateSet load_templates(const std::string& path);

struct PromptExample {
  Task task = Task::sequential;
  std::string input_text;
  std::string output_text;
};

struct RenderInputs {
  uint32_t user = 0;
  std::vector<uint32_t> history;  // item indices, oldest first
  uint32_t item = 0;              // target or subject item
  int rating = 0;
  std::string review_text;
  std::string feature_word;
  std::string target_text;  // explanation or summary output
};

PromptExample render_example(Task task, const IdAssignment& assignment,
                             const TemplateSet& templates, const RenderInputs& inputs);

// One JSON object per line: {"task", "input", "output", "split"}. Examples are
// ordered task-major, then by user index, then by sequence position; each
// example carries the split of its target interaction. Interactions outside
// every split (dropped users) are skipped. Returns per-task line counts.
std::map<Task, uint64_t> emit_corpus(const DatasetIndex& index, const DatasetSplits& splits,
                                     const IdAssignment& assignment,
                                     const std::vector<Task>& tasks,
                                     const TemplateSet& templates, const std::string& path);

// Prefix tree over item ID token sequences. A terminal may sit on an interior
// node when one item's sequence prefixes another's.
struct IdTrie {
  struct Node {
    std::map<std::string, uint32_t> children;
    int64_t item = -1;  // terminal item index, or -1
  };
  std::vector<Node> nodes;  // nodes[0] is the root

  IdTrie() { nodes.emplace_back(); }
};

IdTrie build_id_trie(const IdAssignment& assignment);

uint64_t trie_path_count(const IdTrie& trie);

// Tokens extending the prefix along some valid path, sorted; empty for an
// unknown prefix.
std::vector<std::string> valid_continuations(const IdTrie& trie,
                                             const std::vector<std::string>& prefix);

// Every root-to-terminal token sequence, in sorted token order.
std::vector<std::vector<std::string>> enumerate_trie_paths(const IdTrie& trie);

void save_trie_json(const IdTrie& trie, const DatasetIndex& index, const std::string& path);
IdTrie load_trie_json(const std::string& path);

}  // namespace metaid
