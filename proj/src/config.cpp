#include "skelscreen/config.hpp"

#include <fstream>

#include "skelscreen/errors.hpp"

namespace skelscreen {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

void assign(PipelineConfig& c, const std::string& section,
            const std::string& key, const std::string& value) {
    const std::string full = section + "." + key;
    try {
        if (full == "localize.hu_border_low") {
            c.thresholds.border_low = static_cast<int16_t>(std::stoi(value));
        } else if (full == "localize.hu_border_high") {
            c.thresholds.border_high = static_cast<int16_t>(std::stoi(value));
        } else if (full == "localize.min_bone_voxels") {
            c.min_bone_voxels = std::stoi(value);
        } else if (full == "spectral.k_neighbors") {
            c.spectral.k_neighbors = std::stoi(value);
        } else if (full == "spectral.embed_dim") {
            c.spectral.embed_dim = std::stoi(value);
        } else if (full == "gbdt.n_rounds") {
            c.gbdt.n_rounds = std::stoi(value);
        } else if (full == "gbdt.learning_rate") {
            c.gbdt.learning_rate = std::stod(value);
        } else if (full == "gbdt.max_depth") {
            c.gbdt.max_depth = std::stoi(value);
        } else if (full == "features.feature_config") {
            c.feature_config = parse_feature_config(value);
        } else if (full == "rules.rule1_delta") {
            c.rules.rule1_delta = std::stod(value);
        } else if (full == "rules.rule2_min_bodies") {
            c.rules.rule2_min_bodies = std::stoi(value);
        } else if (full == "rules.rule3_delta") {
            c.rules.rule3_delta = std::stod(value);
        } else if (full == "paths.taxonomy") {
            c.taxonomy_path = value;
        } else if (full == "paths.model") {
            c.model_path = value;
        } else {
            throw Error(ErrorCode::bad_format, "unknown config key: " + full);
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        throw Error(ErrorCode::bad_value,
                    "bad value for config key " + full + ": " + value);
    }
}

} // namespace

void PipelineConfig::validate() const {
    if (!(thresholds.border_low > 0) ||
        !(thresholds.border_high >= thresholds.border_low)) {
        throw Error(ErrorCode::bad_value,
                    "HU thresholds must satisfy 0 < low <= high");
    }
    if (min_bone_voxels < 1) {
        throw Error(ErrorCode::bad_value, "min_bone_voxels must be >= 1");
    }
    if (spectral.k_neighbors < 1 || spectral.embed_dim < 1) {
        throw Error(ErrorCode::bad_value, "spectral parameters must be >= 1");
    }
    if (gbdt.n_rounds < 1 || gbdt.max_depth < 1 ||
        !(gbdt.learning_rate > 0.0)) {
        throw Error(ErrorCode::bad_value, "GBDT hyperparameters must be positive");
    }
    if (!feature_config.any()) {
        throw Error(ErrorCode::bad_value, "feature config must be non-empty");
    }
    if (!(rules.rule1_delta > 0.0) || rules.rule2_min_bodies < 1 ||
        !(rules.rule3_delta > 0.0)) {
        throw Error(ErrorCode::bad_value, "rule thresholds must be positive");
    }
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::missing_file,
                    "cannot open config file: " + path.string());
    }
    PipelineConfig c;
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw Error(ErrorCode::bad_format,
                            "malformed section header at line " +
                                std::to_string(line_no));
            }
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::bad_format,
                        "expected key = value at line " +
                            std::to_string(line_no));
        }
        assign(c, section, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    c.validate();
    return c;
}

void apply_override(PipelineConfig& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
        throw Error(ErrorCode::usage,
                    "override must look like section.key=value: " +
                        assignment);
    }
    assign(config, trim(assignment.substr(0, dot)),
           trim(assignment.substr(dot + 1, eq - dot - 1)),
           trim(assignment.substr(eq + 1)));
}

} // namespace skelscreen
