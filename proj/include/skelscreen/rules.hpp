#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "skelscreen/relabel.hpp"

namespace skelscreen {

enum class Verdict : uint8_t { normal = 0, abnormal = 1 };

struct RuleThresholds {
    double rule1_delta = 0.20;  // adjacent vertebral-body voxel-count gap
    int rule2_min_bodies = 19;  // thoracic+lumbar vertebral bodies
    double rule3_delta = 0.50;  // caudal rib length gap
};

struct RuleEvidence {
    int rule = 0;
    std::vector<int> bone_ids;
    double measured = 0.0; // the delta or count the rule looked at
    std::string note;
};

struct RuleOutcome {
    bool fired = false;
    bool evaluable = true;
    std::vector<RuleEvidence> evidence;
    std::vector<std::string> warnings;
};

struct ScreeningReport {
    int fetus_id = 0;
    bool rule1_fired = false;
    bool rule2_fired = false;
    bool rule3_fired = false;
    Verdict verdict = Verdict::normal;
    std::vector<RuleEvidence> evidence;
    std::vector<std::string> warnings;
};

// Rule 1: adjacent vertebral bodies (ordered head to tail) must have a
// similar voxel count; fires when |Na-Nb|/max(Na,Nb) >= threshold for any
// adjacent pair. Input pairs are (bone_id, n_voxels) in spine order.
RuleOutcome rule1_vertebral_volume(
    const std::vector<std::pair<int, std::int64_t>>& ordered_bodies,
    double delta_threshold);

// Rule 2: thoracic+lumbar vertebral-body count must reach the minimum;
// fires when count < minimum.
RuleOutcome rule2_vertebral_count(const std::vector<int>& body_bone_ids,
                                  int min_bodies);

// Rule 3: per side, the most caudal rib and its neighbor must have a
// similar major axis; fires when |Ma-Mb|/max >= threshold on either side.
// Inputs are (bone_id, major_axis_mm) ordered ascending x (tail first).
RuleOutcome rule3_caudal_rib(
    const std::vector<std::pair<int, double>>& left_ribs_by_x,
    const std::vector<std::pair<int, double>>& right_ribs_by_x,
    double delta_threshold);

// Runs the three rules over a labeled (and relabeled) fetus and aggregates
// the verdict: abnormal iff any rule fired.
ScreeningReport screen(int fetus_id, const std::vector<SkeletalBone>& bones,
                       const Taxonomy& taxonomy,
                       const RuleThresholds& thresholds = RuleThresholds{},
                       const std::vector<std::string>& carried_warnings = {});

std::string verdict_name(Verdict v);
std::string report_to_json(const ScreeningReport& report);
void write_report_json(const ScreeningReport& report,
                       const std::filesystem::path& path);

} // namespace skelscreen
