#include "skelscreen/rules.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "skelscreen/errors.hpp"

namespace skelscreen {

namespace {

double pair_delta(double a, double b) {
    const double m = std::max(a, b);
    if (m <= 0.0) return 0.0;
    return std::abs(a - b) / m;
}

} // namespace

RuleOutcome rule1_vertebral_volume(
    const std::vector<std::pair<int, std::int64_t>>& ordered_bodies,
    double delta_threshold) {
    RuleOutcome out;
    if (ordered_bodies.size() < 2) {
        out.evaluable = false;
        out.warnings.push_back(
            "rule 1 not evaluable: fewer than 2 vertebral bodies");
        return out;
    }
    for (size_t i = 0; i + 1 < ordered_bodies.size(); ++i) {
        const auto& [id_a, n_a] = ordered_bodies[i];
        const auto& [id_b, n_b] = ordered_bodies[i + 1];
        const double delta =
            pair_delta(static_cast<double>(n_a), static_cast<double>(n_b));
        if (delta >= delta_threshold) {
            out.fired = true;
            out.evidence.push_back(
                {1, {id_a, id_b}, delta, "adjacent vertebral-body voxel gap"});
        }
    }
    return out;
}

RuleOutcome rule2_vertebral_count(const std::vector<int>& body_bone_ids,
                                  int min_bodies) {
    RuleOutcome out;
    const int count = static_cast<int>(body_bone_ids.size());
    if (count < min_bodies) {
        out.fired = true;
        out.evidence.push_back({2, body_bone_ids, static_cast<double>(count),
                                "thoracic+lumbar vertebral-body count below " +
                                    std::to_string(min_bodies)});
    }
    return out;
}

RuleOutcome rule3_caudal_rib(
    const std::vector<std::pair<int, double>>& left_ribs_by_x,
    const std::vector<std::pair<int, double>>& right_ribs_by_x,
    double delta_threshold) {
    RuleOutcome out;
    bool any_side = false;
    auto eval_side = [&](const std::vector<std::pair<int, double>>& ribs,
                         const char* side) {
        if (ribs.size() < 2) {
            out.warnings.push_back(std::string("rule 3 not evaluable on ") +
                                   side + " side: fewer than 2 ribs");
            return;
        }
        any_side = true;
        // Ascending x = caudal first; compare the most caudal rib with its
        // head-side neighbor.
        const auto& [id_last, m_last] = ribs[0];
        const auto& [id_prev, m_prev] = ribs[1];
        const double delta = pair_delta(m_last, m_prev);
        if (delta >= delta_threshold) {
            out.fired = true;
            out.evidence.push_back(
                {3,
                 {id_last, id_prev},
                 delta,
                 std::string("caudal rib length gap on ") + side + " side"});
        }
    };
    eval_side(left_ribs_by_x, "left");
    eval_side(right_ribs_by_x, "right");
    out.evaluable = any_side;
    return out;
}

ScreeningReport screen(int fetus_id, const std::vector<SkeletalBone>& bones,
                       const Taxonomy& taxonomy,
                       const RuleThresholds& thresholds,
                       const std::vector<std::string>& carried_warnings) {
    ScreeningReport report;
    report.fetus_id = fetus_id;
    report.warnings = carried_warnings;

    std::vector<const SkeletalBone*> bodies;
    std::vector<int> thoracolumbar_ids;
    std::vector<std::pair<int, double>> left_ribs, right_ribs;
    for (const SkeletalBone& b : bones) {
        const BoneGroup g = taxonomy.group_of(b.label);
        if (is_vertebral_body(g)) {
            bodies.push_back(&b);
            if (g == BoneGroup::vertebral_body_thoracic ||
                g == BoneGroup::vertebral_body_lumbar) {
                thoracolumbar_ids.push_back(b.bone_id);
            }
        } else if (g == BoneGroup::rib_left) {
            left_ribs.emplace_back(b.bone_id, b.major_axis_mm);
        } else if (g == BoneGroup::rib_right) {
            right_ribs.emplace_back(b.bone_id, b.major_axis_mm);
        }
    }

    // Spine order = ascending x along the vertebral-body curve.
    std::sort(bodies.begin(), bodies.end(),
              [](const SkeletalBone* a, const SkeletalBone* b) {
                  if (a->bac_centroid_mm.x() != b->bac_centroid_mm.x())
                      return a->bac_centroid_mm.x() < b->bac_centroid_mm.x();
                  return a->bone_id < b->bone_id;
              });
    std::vector<std::pair<int, std::int64_t>> ordered_bodies;
    ordered_bodies.reserve(bodies.size());
    for (const SkeletalBone* b : bodies) {
        ordered_bodies.emplace_back(b->bone_id, b->n_voxels);
    }

    // Subtype boundary pairs are kept in the evidence trail so cross-region
    // comparisons stay auditable.
    for (size_t i = 0; i + 1 < bodies.size(); ++i) {
        const BoneGroup ga = taxonomy.group_of(bodies[i]->label);
        const BoneGroup gb = taxonomy.group_of(bodies[i + 1]->label);
        if (ga != gb) {
            report.evidence.push_back(
                {1,
                 {bodies[i]->bone_id, bodies[i + 1]->bone_id},
                 pair_delta(static_cast<double>(bodies[i]->n_voxels),
                            static_cast<double>(bodies[i + 1]->n_voxels)),
                 "vertebral subtype boundary pair (informational)"});
        }
    }

    auto sort_ribs = [](std::vector<std::pair<int, double>>& ribs,
                        const std::vector<SkeletalBone>& all) {
        std::sort(ribs.begin(), ribs.end(), [&](const auto& a, const auto& b) {
            auto x_of = [&](int id) {
                for (const SkeletalBone& s : all) {
                    if (s.bone_id == id) return s.bac_centroid_mm.x();
                }
                return 0.0;
            };
            const double xa = x_of(a.first), xb = x_of(b.first);
            if (xa != xb) return xa < xb;
            return a.first < b.first;
        });
    };
    sort_ribs(left_ribs, bones);
    sort_ribs(right_ribs, bones);

    RuleOutcome r1 =
        rule1_vertebral_volume(ordered_bodies, thresholds.rule1_delta);
    RuleOutcome r2 =
        rule2_vertebral_count(thoracolumbar_ids, thresholds.rule2_min_bodies);
    RuleOutcome r3 =
        rule3_caudal_rib(left_ribs, right_ribs, thresholds.rule3_delta);

    auto absorb = [&](const RuleOutcome& o, bool& fired_flag) {
        fired_flag = o.fired;
        report.evidence.insert(report.evidence.end(), o.evidence.begin(),
                               o.evidence.end());
        report.warnings.insert(report.warnings.end(), o.warnings.begin(),
                               o.warnings.end());
    };
    absorb(r1, report.rule1_fired);
    absorb(r2, report.rule2_fired);
    absorb(r3, report.rule3_fired);

    report.verdict = (report.rule1_fired || report.rule2_fired ||
                      report.rule3_fired)
                         ? Verdict::abnormal
                         : Verdict::normal;
    return report;
}

std::string verdict_name(Verdict v) {
    return v == Verdict::abnormal ? "Abnormal" : "Normal";
}

std::string report_to_json(const ScreeningReport& report) {
    nlohmann::json j;
    j["fetus_id"] = report.fetus_id;
    j["rule1_fired"] = report.rule1_fired;
    j["rule2_fired"] = report.rule2_fired;
    j["rule3_fired"] = report.rule3_fired;
    j["verdict"] = verdict_name(report.verdict);
    j["evidence"] = nlohmann::json::array();
    for (const RuleEvidence& e : report.evidence) {
        nlohmann::json je;
        je["rule"] = e.rule;
        je["bone_ids"] = e.bone_ids;
        je["measured"] = e.measured;
        je["note"] = e.note;
        j["evidence"].push_back(je);
    }
    j["warnings"] = report.warnings;
    return j.dump(2) + "\n";
}

void write_report_json(const ScreeningReport& report,
                       const std::filesystem::path& path) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::missing_file,
                        "cannot create report file: " + path.string());
        }
        out << report_to_json(report);
    }
    std::filesystem::rename(tmp, path);
}

} // namespace skelscreen
