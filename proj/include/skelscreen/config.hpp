#pragma once

#include <filesystem>
#include <string>

#include "skelscreen/gbdt.hpp"
#include "skelscreen/localize.hpp"
#include "skelscreen/rules.hpp"

namespace skelscreen {

// Every tunable constant of the pipeline in one place. Defaults are the
// shipped configuration; a config file and command-line overrides layer on
// top.
struct PipelineConfig {
    HuThresholds thresholds;       // [localize] hu_border_low / hu_border_high
    int min_bone_voxels = 10;      // [localize] min_bone_voxels
    SpectralParams spectral;       // [spectral] k_neighbors / embed_dim
    GbdtParams gbdt;               // [gbdt] n_rounds / learning_rate / max_depth
    FeatureConfig feature_config;  // [features] feature_config
    RuleThresholds rules;          // [rules] rule1_delta / rule2_min_bodies / rule3_delta
    std::string taxonomy_path;     // [paths] taxonomy (empty = built-in)
    std::string model_path;        // [paths] model

    void validate() const;
};

// INI-style UTF-8 config: `[section]` headers, `key = value` lines, `#`
// comments. Unknown keys are rejected so typos cannot silently no-op.
PipelineConfig load_config(const std::filesystem::path& path);

// Applies one `section.key=value` override (the CLI's --set option).
void apply_override(PipelineConfig& config, const std::string& assignment);

} // namespace skelscreen
