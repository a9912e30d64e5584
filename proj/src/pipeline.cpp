#include "skelscreen/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "skelscreen/errors.hpp"

namespace skelscreen {

namespace {

// Re-tag module errors with the pipeline stage that raised them.
template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.code(), std::string("[") + name + "] " + e.what());
    }
}

} // namespace

LocalizedScan localize_scan(const VoxelVolume& scan,
                            const PipelineConfig& config,
                            const std::string& scan_ref) {
    const VoxelVolume filtered =
        stage("filter", [&] { return median_filter3(scan); });
    const VoxelClassMap resolved = stage("localize", [&] {
        return watershed_resolve(filtered, classify_voxels(filtered,
                                                           config.thresholds));
    });
    LocalizedScan out;
    out.dims = scan.dims;
    out.spacing_mm = scan.spacing_mm;
    out.instances = stage("localize", [&] {
        return connected_components(resolved, config.min_bone_voxels);
    });
    for (BoneInstance& b : out.instances) b.volume_ref = scan_ref;
    if (!out.instances.empty()) {
        stage("split", [&] {
            split_fetuses(out.instances, scan.spacing_mm);
            return 0;
        });
    }
    return out;
}

FeatureMatrix assemble_classifier_features(const FeatureMatrix& raw,
                                           const FeatureMatrix& bac,
                                           const FeatureConfig& config,
                                           const SpectralParams& spectral,
                                           const ColumnStats& raw_stats,
                                           const ColumnStats& bac_stats) {
    std::vector<const FeatureMatrix*> blocks;
    FeatureMatrix spectral_raw, spectral_bac;
    if (config.raw) blocks.push_back(&raw);
    if (config.bac) blocks.push_back(&bac);
    if (config.spectral_raw) {
        spectral_raw = spectral_embed(raw, spectral, raw_stats);
        blocks.push_back(&spectral_raw);
    }
    if (config.spectral_bac) {
        spectral_bac = spectral_embed(bac, spectral, bac_stats);
        blocks.push_back(&spectral_bac);
    }
    if (blocks.empty()) {
        throw Error(ErrorCode::bad_value, "empty feature config");
    }
    FeatureMatrix out = *blocks[0];
    for (size_t i = 1; i < blocks.size(); ++i) {
        out = concat_features(out, *blocks[i]);
    }
    out.stage = FeatureStage::concat16;
    return out;
}

namespace {

struct FetusFeatures {
    int fetus_id = 0;
    std::vector<int> instance_ids;
    std::vector<const BoneInstance*> instances;
    std::vector<BoneFeatures> features;
    FeatureMatrix raw;
    FeatureMatrix bac;
    BodyFrame frame;
};

std::vector<FetusFeatures> featurize_fetuses(const LocalizedScan& scan,
                                             std::vector<std::string>* notes) {
    std::map<int, FetusFeatures> by_fetus;
    for (const BoneInstance& b : scan.instances) {
        FetusFeatures& f = by_fetus[b.fetus_id];
        f.fetus_id = b.fetus_id;
        f.instance_ids.push_back(b.id);
        f.instances.push_back(&b);
        f.features.push_back(extract_features(b, scan.spacing_mm));
    }
    std::vector<FetusFeatures> out;
    for (auto& [id, f] : by_fetus) {
        if (f.features.size() < 3) {
            if (notes) {
                notes->push_back("fetus " + std::to_string(id) +
                                 " skipped: fewer than 3 bones");
            }
            continue;
        }
        f.raw = stage("features", [&] {
            return assemble_matrix(f.features, f.instance_ids);
        });
        f.frame = stage("bac", [&] { return fit_bac(f.raw); });
        f.bac = stage("bac", [&] { return apply_bac(f.raw, f.frame); });
        out.push_back(std::move(f));
    }
    return out;
}

} // namespace

ScreenOutput screen_volume(const VoxelVolume& scan, const GbdtModel& model,
                           const PipelineConfig& config,
                           const std::string& scan_ref) {
    ScreenOutput out;
    out.localized = localize_scan(scan, config, scan_ref);

    std::vector<std::string> notes;
    std::vector<FetusFeatures> fetuses = featurize_fetuses(out.localized, &notes);

    for (FetusFeatures& f : fetuses) {
        FetusPipeline fp;
        fp.fetus_id = f.fetus_id;
        fp.instance_ids = f.instance_ids;
        fp.frame = f.frame;
        fp.raw = f.raw;
        fp.bac = f.bac;
        fp.assembled = stage("embed", [&] {
            return assemble_classifier_features(
                f.raw, f.bac, model.feature_config, model.spectral,
                model.raw_stats, model.bac_stats);
        });
        const std::vector<Prediction> preds = stage("predict", [&] {
            return predict(model, fp.assembled.values);
        });
        for (size_t i = 0; i < preds.size(); ++i) {
            SkeletalBone b;
            b.bone_id = f.instance_ids[i];
            b.label = preds[i].label;
            b.bac_centroid_mm =
                fp.bac.values.row(static_cast<int>(i)).segment<3>(1).transpose();
            b.n_voxels = f.features[i].n_voxels;
            b.major_axis_mm = f.features[i].major_axis_mm;
            fp.bones.push_back(b);
        }
        RelabelResult relabeled = stage("relabel", [&] {
            return relabel_fetus(fp.bones, out.localized.instances, fp.frame,
                                 out.localized.spacing_mm, model.taxonomy);
        });
        fp.relabel_diffs = std::move(relabeled.diffs);
        std::vector<std::string> warnings = std::move(relabeled.warnings);
        warnings.insert(warnings.end(), notes.begin(), notes.end());
        fp.report = stage("rules", [&] {
            return screen(f.fetus_id, fp.bones, model.taxonomy, config.rules,
                          warnings);
        });
        out.fetuses.push_back(std::move(fp));
    }
    return out;
}

std::vector<int> match_instance_labels(
    const std::vector<BoneInstance>& instances, const PhantomTruth& truth) {
    std::map<int, int> label_of_truth_id;
    for (const TruthBone& b : truth.bones) {
        label_of_truth_id[b.truth_id] = b.label;
    }
    std::vector<int> labels;
    labels.reserve(instances.size());
    for (const BoneInstance& inst : instances) {
        std::map<int, int> votes;
        for (const GridCoord& c : inst.voxels) {
            const uint16_t id = truth.labels.at(c.x, c.y, c.z);
            if (id != 0) votes[id]++;
        }
        int best_id = 0, best_count = 0;
        for (const auto& [id, count] : votes) {
            if (count > best_count) {
                best_count = count;
                best_id = id;
            }
        }
        if (best_id == 0) {
            labels.push_back(-1);
            continue;
        }
        const auto it = label_of_truth_id.find(best_id);
        labels.push_back(it == label_of_truth_id.end() ? -1 : it->second);
    }
    return labels;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::missing_file,
                    "cannot open manifest: " + path.string());
    }
    std::vector<ManifestEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#') continue;
        const auto e = line.find_last_not_of(" \t\r");
        std::filesystem::path p = line.substr(b, e - b + 1);
        if (p.is_relative()) {
            p = path.parent_path() / p;
        }
        entries.push_back({p});
    }
    if (entries.empty()) {
        throw Error(ErrorCode::bad_value, "manifest lists no volumes");
    }
    return entries;
}

namespace {

std::string truth_stem(const std::filesystem::path& volume_header) {
    std::filesystem::path p = volume_header.filename();
    p.replace_extension();
    return p.string();
}

} // namespace

GbdtModel train_from_manifest(const std::vector<ManifestEntry>& entries,
                              const PipelineConfig& config,
                              std::ostream* log) {
    const Taxonomy taxonomy = config.taxonomy_path.empty()
                                  ? default_taxonomy()
                                  : load_taxonomy(config.taxonomy_path);

    struct TrainFetus {
        FeatureMatrix raw;
        FeatureMatrix bac;
        std::vector<int> labels;
    };
    std::vector<TrainFetus> fetuses;
    std::int64_t pooled_rows = 0;

    for (const ManifestEntry& entry : entries) {
        const VoxelVolume scan =
            stage("load", [&] { return load_volume(entry.volume_header); });
        const PhantomTruth truth = stage("load", [&] {
            return load_truth_bundle(entry.volume_header.parent_path(),
                                     truth_stem(entry.volume_header));
        });
        const LocalizedScan localized = localize_scan(
            scan, config, entry.volume_header.filename().string());
        const std::vector<int> truth_labels =
            match_instance_labels(localized.instances, truth);
        std::map<int, int> label_by_instance;
        for (size_t i = 0; i < localized.instances.size(); ++i) {
            label_by_instance[localized.instances[i].id] = truth_labels[i];
        }

        std::vector<std::string> notes;
        for (FetusFeatures& f : featurize_fetuses(localized, &notes)) {
            TrainFetus tf;
            tf.raw = std::move(f.raw);
            tf.bac = std::move(f.bac);
            bool usable = true;
            for (int id : f.instance_ids) {
                const int label = label_by_instance[id];
                if (label < 0) usable = false;
                tf.labels.push_back(label);
            }
            if (!usable) {
                if (log) {
                    *log << "skipping fetus with unmatched instance in "
                         << entry.volume_header << "\n";
                }
                continue;
            }
            pooled_rows += tf.labels.size();
            fetuses.push_back(std::move(tf));
        }
        if (log) {
            *log << "featurized " << entry.volume_header.filename().string()
                 << " (" << localized.instances.size() << " bones)\n";
        }
    }
    if (fetuses.empty() || pooled_rows == 0) {
        throw Error(ErrorCode::bad_value,
                    "no usable training fetuses in manifest");
    }

    // Normalization statistics come from the pooled training bones only.
    Eigen::MatrixXd pooled_raw(pooled_rows, 8), pooled_bac(pooled_rows, 8);
    {
        std::int64_t r = 0;
        for (const TrainFetus& tf : fetuses) {
            pooled_raw.middleRows(r, tf.raw.rows()) = tf.raw.values;
            pooled_bac.middleRows(r, tf.bac.rows()) = tf.bac.values;
            r += tf.raw.rows();
        }
    }
    GbdtModel model;
    model.params = config.gbdt;
    model.n_classes = taxonomy.size();
    model.taxonomy = taxonomy;
    model.feature_config = config.feature_config;
    model.spectral = config.spectral;
    model.raw_stats = fit_column_stats(pooled_raw);
    model.bac_stats = fit_column_stats(pooled_bac);

    Eigen::MatrixXd x;
    std::vector<int> y;
    {
        std::int64_t r = 0;
        for (const TrainFetus& tf : fetuses) {
            const FeatureMatrix assembled = assemble_classifier_features(
                tf.raw, tf.bac, model.feature_config, model.spectral,
                model.raw_stats, model.bac_stats);
            if (x.size() == 0) {
                x.resize(pooled_rows, assembled.cols());
            }
            x.middleRows(r, assembled.rows()) = assembled.values;
            r += assembled.rows();
            y.insert(y.end(), tf.labels.begin(), tf.labels.end());
        }
    }
    model.n_features = static_cast<int>(x.cols());

    if (log) {
        *log << "training on " << x.rows() << " bones x " << x.cols()
             << " features, " << model.params.n_rounds << " rounds\n";
    }
    model.trees = stage("train", [&] {
        return train_gbdt(x, y, model.n_classes, model.params, nullptr);
    });
    return model;
}

void write_label_csv(const std::vector<LabelRow>& rows,
                     const Taxonomy& taxonomy,
                     const std::filesystem::path& path) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::missing_file,
                        "cannot create label CSV: " + path.string());
        }
        out << "bone_id,fetus_id,label,label_name\n";
        for (const LabelRow& r : rows) {
            out << r.bone_id << ',' << r.fetus_id << ',' << r.label << ','
                << taxonomy.name_of(r.label) << '\n';
        }
    }
    std::filesystem::rename(tmp, path);
}

std::vector<LabelRow> read_label_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::missing_file,
                    "cannot open label CSV: " + path.string());
    }
    std::vector<LabelRow> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first && line.rfind("bone_id", 0) == 0) {
            first = false;
            continue;
        }
        first = false;
        std::istringstream ls(line);
        std::string cell;
        LabelRow r;
        if (!std::getline(ls, cell, ',')) continue;
        r.bone_id = std::stoi(cell);
        if (!std::getline(ls, cell, ',')) {
            throw Error(ErrorCode::bad_format, "malformed label CSV line");
        }
        r.fetus_id = std::stoi(cell);
        if (!std::getline(ls, cell, ',')) {
            throw Error(ErrorCode::bad_format, "malformed label CSV line");
        }
        r.label = std::stoi(cell);
        rows.push_back(r);
    }
    return rows;
}

void write_verdict_csv(const std::vector<VerdictRow>& rows,
                       const std::filesystem::path& path) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::missing_file,
                        "cannot create verdict CSV: " + path.string());
        }
        out << "scan,fetus,verdict,rules_fired\n";
        for (const VerdictRow& r : rows) {
            out << r.scan << ',' << r.fetus_id << ','
                << verdict_name(r.verdict) << ',' << r.rules_fired << '\n';
        }
    }
    std::filesystem::rename(tmp, path);
}

std::vector<VerdictRow> read_verdict_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::missing_file,
                    "cannot open verdict CSV: " + path.string());
    }
    std::vector<VerdictRow> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first && line.rfind("scan,", 0) == 0) {
            first = false;
            continue;
        }
        first = false;
        std::istringstream ls(line);
        VerdictRow r;
        std::string cell;
        if (!std::getline(ls, r.scan, ',')) continue;
        if (!std::getline(ls, cell, ',')) {
            throw Error(ErrorCode::bad_format, "malformed verdict CSV line");
        }
        r.fetus_id = std::stoi(cell);
        if (!std::getline(ls, cell, ',')) {
            throw Error(ErrorCode::bad_format, "malformed verdict CSV line");
        }
        if (cell != "Normal" && cell != "Abnormal") {
            throw Error(ErrorCode::bad_value, "unknown verdict: " + cell);
        }
        r.verdict = cell == "Abnormal" ? Verdict::abnormal : Verdict::normal;
        std::getline(ls, r.rules_fired, ',');
        rows.push_back(r);
    }
    return rows;
}

} // namespace skelscreen
