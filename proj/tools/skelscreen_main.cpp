// skelscreen: micro-CT fetal skeleton screening pipeline CLI.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "skelscreen/errors.hpp"
#include "skelscreen/mesh.hpp"
#include "skelscreen/pipeline.hpp"

namespace fs = std::filesystem;
using namespace skelscreen;

namespace {

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;
};

PipelineConfig resolve_config(const CommonOptions& common) {
    PipelineConfig config;
    if (!common.config_path.empty()) {
        config = load_config(common.config_path);
    }
    for (const std::string& o : common.overrides) {
        apply_override(config, o);
    }
    config.validate();
    return config;
}

void add_common(CLI::App* cmd, CommonOptions& common) {
    cmd->add_option("--config", common.config_path,
                    "INI config file (defaults apply when omitted)");
    cmd->add_option("--set", common.overrides,
                    "config override, e.g. --set gbdt.n_rounds=100");
}

void write_frame_json(const BodyFrame& frame, const fs::path& path) {
    nlohmann::json j;
    std::vector<double> rot;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) rot.push_back(frame.rotation(r, c));
    }
    j["rotation"] = rot;
    j["translation_mm"] = {frame.translation_mm.x(), frame.translation_mm.y(),
                           frame.translation_mm.z()};
    j["head_sign_flipped"] = frame.head_sign_flipped;
    std::ofstream out(path);
    out << j.dump(2) << '\n';
}

Eigen::Matrix3d euler_deg_to_rotation(double rx, double ry, double rz) {
    const double d = 3.14159265358979323846 / 180.0;
    return (Eigen::AngleAxisd(rz * d, Eigen::Vector3d::UnitZ()) *
            Eigen::AngleAxisd(ry * d, Eigen::Vector3d::UnitY()) *
            Eigen::AngleAxisd(rx * d, Eigen::Vector3d::UnitX()))
        .toRotationMatrix();
}

Injection parse_injection(const std::string& text) {
    std::vector<std::string> parts;
    std::string cell;
    std::istringstream in(text);
    while (std::getline(in, cell, ':')) parts.push_back(cell);
    if (parts.empty()) {
        throw Error(ErrorCode::usage, "empty injection spec");
    }
    Injection inj;
    if (parts[0] == "remove_vertebra" && parts.size() == 2) {
        inj.kind = Injection::Kind::remove_vertebra;
        inj.vertebra_index = std::stoi(parts[1]);
    } else if (parts[0] == "scale_vertebra" && parts.size() == 3) {
        inj.kind = Injection::Kind::scale_vertebra;
        inj.vertebra_index = std::stoi(parts[1]);
        inj.factor = std::stod(parts[2]);
    } else if (parts[0] == "shorten_caudal_rib" && parts.size() == 3) {
        inj.kind = Injection::Kind::shorten_caudal_rib;
        if (parts[1] == "left") inj.side = 0;
        else if (parts[1] == "right") inj.side = 1;
        else throw Error(ErrorCode::usage, "rib side must be left or right");
        inj.factor = std::stod(parts[2]);
    } else {
        throw Error(ErrorCode::usage,
                    "injection must be remove_vertebra:<v>, "
                    "scale_vertebra:<v>:<factor> or "
                    "shorten_caudal_rib:<side>:<factor>");
    }
    return inj;
}

std::string rules_fired_string(const ScreeningReport& r) {
    std::string s;
    auto add = [&](int n) {
        if (!s.empty()) s += '+';
        s += std::to_string(n);
    };
    if (r.rule1_fired) add(1);
    if (r.rule2_fired) add(2);
    if (r.rule3_fired) add(3);
    return s;
}

int run_screen(const std::string& volume_path, const std::string& model_path,
               const std::string& out_dir, bool meshes, bool dump,
               const CommonOptions& common) {
    const PipelineConfig config = resolve_config(common);
    const GbdtModel model = load_model(model_path);
    const VoxelVolume scan = load_volume(volume_path);
    fs::create_directories(out_dir);

    const ScreenOutput out = screen_volume(
        scan, model, config, fs::path(volume_path).filename().string());

    std::vector<LabelRow> label_rows;
    std::vector<VerdictRow> verdict_rows;
    for (const FetusPipeline& f : out.fetuses) {
        for (const SkeletalBone& b : f.bones) {
            label_rows.push_back({b.bone_id, f.fetus_id, b.label});
        }
        const std::string suffix = "_f" + std::to_string(f.fetus_id);
        write_report_json(f.report,
                          fs::path(out_dir) / ("report" + suffix + ".json"));
        write_relabel_csv(f.relabel_diffs, model.taxonomy,
                          fs::path(out_dir) / ("relabel" + suffix + ".csv"));
        verdict_rows.push_back({fs::path(volume_path).filename().string(),
                                f.fetus_id, f.report.verdict,
                                rules_fired_string(f.report)});
        if (dump) {
            write_feature_csv(f.raw, fs::path(out_dir) /
                                         ("features_raw" + suffix + ".csv"));
            write_feature_csv(f.bac, fs::path(out_dir) /
                                         ("features_bac" + suffix + ".csv"));
            write_feature_csv(f.assembled,
                              fs::path(out_dir) /
                                  ("features_classifier" + suffix + ".csv"));
            write_frame_json(f.frame,
                             fs::path(out_dir) / ("frame" + suffix + ".json"));
        }
    }
    write_label_csv(label_rows, model.taxonomy,
                    fs::path(out_dir) / "labels.csv");
    write_verdict_csv(verdict_rows, fs::path(out_dir) / "summary.csv");
    if (dump) {
        save_label_volume(
            instance_label_volume(out.localized.dims, out.localized.spacing_mm,
                                  out.localized.instances),
            fs::path(out_dir) / "instances.hdr");
    }
    if (meshes) {
        const fs::path mesh_dir = fs::path(out_dir) / "meshes";
        fs::create_directories(mesh_dir);
        for (const BoneInstance& b : out.localized.instances) {
            write_ply(surface_mesh(b, out.localized.spacing_mm),
                      mesh_dir / ("bone_" + std::to_string(b.id) + ".ply"));
        }
    }
    for (const FetusPipeline& f : out.fetuses) {
        std::cout << "fetus " << f.fetus_id << ": "
                  << verdict_name(f.report.verdict);
        const std::string fired = rules_fired_string(f.report);
        if (!fired.empty()) std::cout << " (rules " << fired << ")";
        std::cout << "\n";
    }
    return 0;
}

int run_train(const std::string& manifest_path, const std::string& out_path,
              const CommonOptions& common) {
    const PipelineConfig config = resolve_config(common);
    const std::vector<ManifestEntry> entries = read_manifest(manifest_path);
    const GbdtModel model = train_from_manifest(entries, config, &std::cerr);
    save_model(model, out_path);
    std::cout << "model written to " << out_path << " ("
              << model.trees.size() << " trees, features="
              << feature_config_to_string(model.feature_config) << ")\n";
    return 0;
}

int run_eval_labels(const std::string& pred_path, const std::string& truth_path,
                    int n_classes) {
    const std::vector<LabelRow> pred = read_label_csv(pred_path);
    const std::vector<LabelRow> truth = read_label_csv(truth_path);
    std::vector<int> p, t;
    for (const LabelRow& r : pred) p.push_back(r.label);
    for (const LabelRow& r : truth) t.push_back(r.label);
    const EvalResult r = evaluate_labels(p, t, n_classes);
    nlohmann::json j;
    j["n"] = p.size();
    j["accuracy"] = r.accuracy;
    j["macro_sensitivity"] = r.macro_sensitivity;
    j["macro_precision"] = r.macro_precision;
    std::cout << j.dump(2) << '\n';
    return 0;
}

int run_eval_verdicts(const std::string& pred_path,
                      const std::string& truth_path) {
    std::vector<Verdict> p, t;
    for (const VerdictRow& r : read_verdict_csv(pred_path)) {
        p.push_back(r.verdict);
    }
    for (const VerdictRow& r : read_verdict_csv(truth_path)) {
        t.push_back(r.verdict);
    }
    const BinaryEval b = evaluate_verdicts(p, t);
    nlohmann::json j;
    j["n"] = p.size();
    j["tp"] = b.tp;
    j["fp"] = b.fp;
    j["tn"] = b.tn;
    j["fn"] = b.fn;
    j["sensitivity"] = b.sensitivity;
    j["precision"] = b.precision;
    j["accuracy"] = b.accuracy;
    std::cout << j.dump(2) << '\n';
    return 0;
}

int run_localize(const std::string& volume_path, const std::string& out_dir,
                 bool meshes, const CommonOptions& common) {
    const PipelineConfig config = resolve_config(common);
    const VoxelVolume scan = load_volume(volume_path);
    fs::create_directories(out_dir);
    const LocalizedScan localized = localize_scan(scan, config);
    save_label_volume(
        instance_label_volume(localized.dims, localized.spacing_mm,
                              localized.instances),
        fs::path(out_dir) / "instances.hdr");
    {
        std::ofstream csv(fs::path(out_dir) / "instances.csv");
        csv << "bone_id,fetus_id,n_voxels\n";
        for (const BoneInstance& b : localized.instances) {
            csv << b.id << ',' << b.fetus_id << ',' << b.voxels.size() << '\n';
        }
    }
    if (meshes) {
        const fs::path mesh_dir = fs::path(out_dir) / "meshes";
        fs::create_directories(mesh_dir);
        for (const BoneInstance& b : localized.instances) {
            write_ply(surface_mesh(b, localized.spacing_mm),
                      mesh_dir / ("bone_" + std::to_string(b.id) + ".ply"));
        }
    }
    std::cout << localized.instances.size() << " bone instances\n";
    return 0;
}

int run_features(const std::string& volume_path, const std::string& out_dir,
                 const CommonOptions& common) {
    const PipelineConfig config = resolve_config(common);
    const VoxelVolume scan = load_volume(volume_path);
    fs::create_directories(out_dir);
    const LocalizedScan localized = localize_scan(scan, config);

    std::map<int, std::vector<const BoneInstance*>> by_fetus;
    for (const BoneInstance& b : localized.instances) {
        by_fetus[b.fetus_id].push_back(&b);
    }
    for (const auto& [fetus_id, bones] : by_fetus) {
        std::vector<BoneFeatures> features;
        std::vector<int> ids;
        for (const BoneInstance* b : bones) {
            features.push_back(extract_features(*b, localized.spacing_mm));
            ids.push_back(b->id);
        }
        const std::string suffix = "_f" + std::to_string(fetus_id);
        const FeatureMatrix raw = assemble_matrix(features, ids);
        write_feature_csv(raw, fs::path(out_dir) /
                                   ("features_raw" + suffix + ".csv"));
        if (raw.rows() < 3) continue;
        const BodyFrame frame = fit_bac(raw);
        const FeatureMatrix bac = apply_bac(raw, frame);
        write_feature_csv(bac, fs::path(out_dir) /
                                   ("features_bac" + suffix + ".csv"));
        write_frame_json(frame,
                         fs::path(out_dir) / ("frame" + suffix + ".json"));
        if (raw.rows() >= 2) {
            // Standalone mode: normalization statistics fitted on this
            // fetus itself (a trained model carries its own instead).
            const FeatureMatrix spec_bac = spectral_embed(
                bac, config.spectral, fit_column_stats(bac.values));
            write_feature_csv(spec_bac,
                              fs::path(out_dir) /
                                  ("features_spectral_bac" + suffix + ".csv"));
            write_feature_csv(concat_features(bac, spec_bac),
                              fs::path(out_dir) /
                                  ("features_concat16" + suffix + ".csv"));
        }
    }
    std::cout << "feature matrices written to " << out_dir << "\n";
    return 0;
}

int run_relabel(const std::string& volume_path, const std::string& labels_path,
                const std::string& instances_path,
                const std::string& taxonomy_path, const std::string& out_dir,
                const CommonOptions& common) {
    const PipelineConfig config = resolve_config(common);
    const Taxonomy taxonomy = taxonomy_path.empty()
                                  ? default_taxonomy()
                                  : load_taxonomy(taxonomy_path);
    const std::vector<LabelRow> label_rows = read_label_csv(labels_path);
    fs::create_directories(out_dir);

    // A dumped instance volume resumes the pipeline without re-running
    // localization.
    LocalizedScan localized;
    if (!instances_path.empty()) {
        const LabelVolume lv = load_label_volume(instances_path);
        localized.dims = lv.dims;
        localized.spacing_mm = lv.spacing_mm;
        localized.instances = instances_from_label_volume(lv);
        if (!localized.instances.empty()) {
            split_fetuses(localized.instances, lv.spacing_mm);
        }
    } else {
        const VoxelVolume scan = load_volume(volume_path);
        localized = localize_scan(scan, config,
                                  fs::path(volume_path).filename().string());
    }
    std::map<int, int> label_of;
    for (const LabelRow& r : label_rows) label_of[r.bone_id] = r.label;

    std::map<int, std::vector<const BoneInstance*>> by_fetus;
    for (const BoneInstance& b : localized.instances) {
        by_fetus[b.fetus_id].push_back(&b);
    }
    std::vector<LabelRow> out_rows;
    for (const auto& [fetus_id, bones] : by_fetus) {
        std::vector<BoneFeatures> features;
        std::vector<int> ids;
        for (const BoneInstance* b : bones) {
            features.push_back(extract_features(*b, localized.spacing_mm));
            ids.push_back(b->id);
        }
        const FeatureMatrix raw = assemble_matrix(features, ids);
        if (raw.rows() < 3) continue;
        const BodyFrame frame = fit_bac(raw);
        const FeatureMatrix bac = apply_bac(raw, frame);

        std::vector<SkeletalBone> skeletal;
        for (size_t i = 0; i < ids.size(); ++i) {
            const auto it = label_of.find(ids[i]);
            if (it == label_of.end()) {
                throw Error(ErrorCode::bad_value,
                            "labels CSV is missing bone " +
                                std::to_string(ids[i]));
            }
            SkeletalBone sb;
            sb.bone_id = ids[i];
            sb.label = it->second;
            sb.bac_centroid_mm =
                bac.values.row(static_cast<int>(i)).segment<3>(1).transpose();
            sb.n_voxels = features[i].n_voxels;
            sb.major_axis_mm = features[i].major_axis_mm;
            skeletal.push_back(sb);
        }
        const RelabelResult result =
            relabel_fetus(skeletal, localized.instances, frame,
                          localized.spacing_mm, taxonomy);
        write_relabel_csv(result.diffs, taxonomy,
                          fs::path(out_dir) /
                              ("relabel_f" + std::to_string(fetus_id) + ".csv"));
        for (const SkeletalBone& sb : skeletal) {
            out_rows.push_back({sb.bone_id, fetus_id, sb.label});
        }
    }
    write_label_csv(out_rows, taxonomy, fs::path(out_dir) / "labels.csv");
    std::cout << "relabeled labels written to " << out_dir << "\n";
    return 0;
}

int run_phantom(const std::string& out_dir, const std::string& stem,
                uint64_t seed, double noise, double spacing,
                const std::vector<std::string>& injection_specs,
                const std::vector<double>& pose_deg,
                const std::vector<double>& pose_shift, double pair_offset) {
    PhantomSpec spec;
    spec.seed = seed;
    spec.noise_hu = noise;
    spec.spacing_mm = spacing;
    for (const std::string& s : injection_specs) {
        spec.injections.push_back(parse_injection(s));
    }
    if (!pose_deg.empty()) {
        if (pose_deg.size() != 3) {
            throw Error(ErrorCode::usage, "--pose-deg needs rx ry rz");
        }
        spec.pose_rotation =
            euler_deg_to_rotation(pose_deg[0], pose_deg[1], pose_deg[2]);
    }
    if (!pose_shift.empty()) {
        if (pose_shift.size() != 3) {
            throw Error(ErrorCode::usage, "--pose-shift needs x y z");
        }
        spec.pose_translation_mm =
            Eigen::Vector3d(pose_shift[0], pose_shift[1], pose_shift[2]);
    }
    auto [volume, truth] =
        pair_offset > 0.0
            ? generate_pair(spec, Eigen::Vector3d(0.0, pair_offset, 0.0))
            : generate(spec);
    write_phantom_bundle(volume, truth, out_dir, stem);
    std::cout << "phantom " << stem << ": " << truth.bones.size()
              << " bones, expected " << verdict_name(truth.expected_verdict)
              << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"micro-CT fetal skeleton localization, labeling and "
                 "abnormality screening"};
    app.require_subcommand(1);

    // screen
    auto* screen_cmd =
        app.add_subcommand("screen", "run the full pipeline on one scan");
    std::string s_volume, s_model, s_out;
    bool s_meshes = false, s_dump = false;
    CommonOptions s_common;
    screen_cmd->add_option("--volume", s_volume, "volume header (.hdr)")
        ->required();
    screen_cmd->add_option("--model", s_model, "trained model file")
        ->required();
    screen_cmd->add_option("--out", s_out, "output directory")->required();
    screen_cmd->add_flag("--meshes", s_meshes, "export per-bone PLY meshes");
    screen_cmd->add_flag("--dump", s_dump,
                         "dump intermediate stage files (resumable)");
    add_common(screen_cmd, s_common);

    // train
    auto* train_cmd = app.add_subcommand("train", "train a labeling model");
    std::string t_manifest, t_out;
    CommonOptions t_common;
    train_cmd->add_option("--manifest", t_manifest,
                          "text file listing volume headers")
        ->required();
    train_cmd->add_option("--out", t_out, "model output path")->required();
    add_common(train_cmd, t_common);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate predictions");
    eval_cmd->require_subcommand(1);
    auto* eval_labels_cmd =
        eval_cmd->add_subcommand("labels", "multi-class labeling metrics");
    std::string el_pred, el_truth;
    int el_classes = 40;
    eval_labels_cmd->add_option("--pred", el_pred, "prediction label CSV")
        ->required();
    eval_labels_cmd->add_option("--truth", el_truth, "truth label CSV")
        ->required();
    eval_labels_cmd->add_option("--classes", el_classes, "class count");
    auto* eval_verdicts_cmd =
        eval_cmd->add_subcommand("verdicts", "binary screening metrics");
    std::string ev_pred, ev_truth;
    eval_verdicts_cmd->add_option("--pred", ev_pred, "prediction verdict CSV")
        ->required();
    eval_verdicts_cmd->add_option("--truth", ev_truth, "truth verdict CSV")
        ->required();

    // localize
    auto* loc_cmd =
        app.add_subcommand("localize", "unsupervised bone localization");
    std::string l_volume, l_out;
    bool l_meshes = false;
    CommonOptions l_common;
    loc_cmd->add_option("--volume", l_volume, "volume header")->required();
    loc_cmd->add_option("--out", l_out, "output directory")->required();
    loc_cmd->add_flag("--meshes", l_meshes, "export per-bone PLY meshes");
    add_common(loc_cmd, l_common);

    // features
    auto* feat_cmd =
        app.add_subcommand("features", "feature extraction stages");
    std::string f_volume, f_out;
    CommonOptions f_common;
    feat_cmd->add_option("--volume", f_volume, "volume header")->required();
    feat_cmd->add_option("--out", f_out, "output directory")->required();
    add_common(feat_cmd, f_common);

    // relabel
    auto* rel_cmd = app.add_subcommand(
        "relabel", "curve-fitting relabel of an existing labels CSV");
    std::string r_volume, r_labels, r_instances, r_taxonomy, r_out;
    CommonOptions r_common;
    rel_cmd->add_option("--volume", r_volume, "volume header");
    rel_cmd->add_option("--instances", r_instances,
                        "dumped instance label volume (skips localization)");
    rel_cmd->add_option("--labels", r_labels, "labels CSV to fix")->required();
    rel_cmd->add_option("--taxonomy", r_taxonomy, "taxonomy CSV (optional)");
    rel_cmd->add_option("--out", r_out, "output directory")->required();
    add_common(rel_cmd, r_common);

    // phantom
    auto* ph_cmd =
        app.add_subcommand("phantom", "generate a synthetic ground-truth scan");
    std::string p_out, p_stem = "phantom";
    uint64_t p_seed = 0;
    double p_noise = 15.0, p_spacing = 0.06, p_pair = 0.0;
    std::vector<std::string> p_inject;
    std::vector<double> p_pose_deg, p_pose_shift;
    ph_cmd->add_option("--out", p_out, "output directory")->required();
    ph_cmd->add_option("--stem", p_stem, "file stem (default: phantom)");
    ph_cmd->add_option("--seed", p_seed, "generator seed");
    ph_cmd->add_option("--noise", p_noise, "HU noise stddev");
    ph_cmd->add_option("--spacing", p_spacing, "voxel size in mm");
    ph_cmd->add_option("--inject", p_inject,
                       "abnormality injection, e.g. remove_vertebra:12");
    ph_cmd->add_option("--pose-deg", p_pose_deg,
                       "pose rotation: rx ry rz in degrees")
        ->expected(3);
    ph_cmd->add_option("--pose-shift", p_pose_shift,
                       "pose translation in mm: x y z")
        ->expected(3);
    ph_cmd->add_option("--pair-offset", p_pair,
                       "emit two fetuses separated by this many mm in y");

    try {
        app.parse(argc, argv);
        if (*screen_cmd) {
            return run_screen(s_volume, s_model, s_out, s_meshes, s_dump,
                              s_common);
        }
        if (*train_cmd) return run_train(t_manifest, t_out, t_common);
        if (*eval_labels_cmd) {
            return run_eval_labels(el_pred, el_truth, el_classes);
        }
        if (*eval_verdicts_cmd) return run_eval_verdicts(ev_pred, ev_truth);
        if (*loc_cmd) return run_localize(l_volume, l_out, l_meshes, l_common);
        if (*feat_cmd) return run_features(f_volume, f_out, f_common);
        if (*rel_cmd) {
            if (r_volume.empty() && r_instances.empty()) {
                throw Error(ErrorCode::usage,
                            "relabel needs --volume or --instances");
            }
            return run_relabel(r_volume, r_labels, r_instances, r_taxonomy,
                               r_out, r_common);
        }
        if (*ph_cmd) {
            return run_phantom(p_out, p_stem, p_seed, p_noise, p_spacing,
                               p_inject, p_pose_deg, p_pose_shift, p_pair);
        }
        return static_cast<int>(ErrorCode::usage);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return static_cast<int>(ErrorCode::usage);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
