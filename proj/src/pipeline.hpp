#pragma once

#include <string>
#include <vector>

#include "configfile.hpp"

namespace metaid {

struct StageArtifact {
  std::string file;  // name relative to the workdir
  std::string sha256;
};

struct StageRecord {
  std::string name;
  std::string fingerprint;  // hash of stage settings + input artifact digests
  std::vector<StageArtifact> outputs;
  bool skipped = false;  // reused from a previous run
};

// Stage names in execution order: ingest, graph, walk, embed, cluster, idgen,
// metrics, promptgen.
const std::vector<std::string>& pipeline_stage_names();

// Runs stages first..upto (all when upto is empty). A stage whose fingerprint
// and output digests match the existing manifest is skipped unless force.
// Failed stages leave their outputs with a ".partial" suffix and abort with
// the stage name in the error. manifest.json is rewritten after every
// completed stage.
std::vector<StageRecord> run_pipeline(const PipelineConfig& config, const std::string& upto,
                                      bool force);

}  // namespace metaid
