#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "skelscreen/config.hpp"
#include "skelscreen/gbdt.hpp"
#include "skelscreen/metrics.hpp"
#include "skelscreen/phantom.hpp"
#include "skelscreen/relabel.hpp"
#include "skelscreen/rules.hpp"

namespace skelscreen {

// Localization output for one scan: filtered volume geometry plus the
// per-fetus bone instances.
struct LocalizedScan {
    std::array<int, 3> dims{0, 0, 0};
    std::array<double, 3> spacing_mm{0, 0, 0};
    std::vector<BoneInstance> instances; // fetus ids assigned
};

// filter -> classify -> watershed -> components -> fetus split. scan_ref
// (usually the header file name) is stamped onto every instance.
LocalizedScan localize_scan(const VoxelVolume& scan,
                            const PipelineConfig& config,
                            const std::string& scan_ref = {});

// Per-fetus state carried through featurization, classification,
// relabeling and screening.
struct FetusPipeline {
    int fetus_id = 0;
    std::vector<int> instance_ids; // row order of the matrices
    BodyFrame frame;
    FeatureMatrix raw;
    FeatureMatrix bac;
    FeatureMatrix assembled; // per feature config, classifier input
    std::vector<SkeletalBone> bones; // labels after relabeling
    std::vector<RelabelDiff> relabel_diffs;
    ScreeningReport report;
};

struct ScreenOutput {
    LocalizedScan localized;
    std::vector<FetusPipeline> fetuses;
};

// Feature assembly shared by training and screening: blocks in the fixed
// order raw, bac, spectral(raw), spectral(bac), selected by the config.
FeatureMatrix assemble_classifier_features(const FeatureMatrix& raw,
                                           const FeatureMatrix& bac,
                                           const FeatureConfig& config,
                                           const SpectralParams& spectral,
                                           const ColumnStats& raw_stats,
                                           const ColumnStats& bac_stats);

// Full screening pipeline for one scan.
ScreenOutput screen_volume(const VoxelVolume& scan, const GbdtModel& model,
                           const PipelineConfig& config,
                           const std::string& scan_ref = {});

// Majority-overlap matching of localized instances against a truth label
// volume; returns the truth bone label per instance (-1 when an instance
// has no truth overlap).
std::vector<int> match_instance_labels(const std::vector<BoneInstance>& instances,
                                       const PhantomTruth& truth);

// One training scan: a volume header whose truth bundle shares its stem
// (<stem>.hdr, <stem>_truth.hdr, <stem>_truth.json).
struct ManifestEntry {
    std::filesystem::path volume_header;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

// Trains a model from manifest scans: localize, featurize, BAC, fit
// normalization stats on the pooled training bones, embed per fetus,
// assemble per feature config, boost. Progress notes go to log when given.
GbdtModel train_from_manifest(const std::vector<ManifestEntry>& entries,
                              const PipelineConfig& config,
                              std::ostream* log = nullptr);

// Prediction CSV helpers (screen output / eval input).
struct LabelRow {
    int bone_id = 0;
    int fetus_id = 0;
    int label = 0;
};
void write_label_csv(const std::vector<LabelRow>& rows,
                     const Taxonomy& taxonomy,
                     const std::filesystem::path& path);
std::vector<LabelRow> read_label_csv(const std::filesystem::path& path);

struct VerdictRow {
    std::string scan;
    int fetus_id = 0;
    Verdict verdict = Verdict::normal;
    std::string rules_fired; // e.g. "1+3"
};
void write_verdict_csv(const std::vector<VerdictRow>& rows,
                       const std::filesystem::path& path);
std::vector<VerdictRow> read_verdict_csv(const std::filesystem::path& path);

} // namespace skelscreen
