#include "skelscreen/taxonomy.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "skelscreen/errors.hpp"

namespace skelscreen {

bool is_vertebral_body(BoneGroup g) {
    return g == BoneGroup::vertebral_body_cervical ||
           g == BoneGroup::vertebral_body_thoracic ||
           g == BoneGroup::vertebral_body_lumbar;
}

std::string group_name(BoneGroup g) {
    switch (g) {
        case BoneGroup::vertebral_body_cervical: return "vertebral_body_cervical";
        case BoneGroup::vertebral_body_thoracic: return "vertebral_body_thoracic";
        case BoneGroup::vertebral_body_lumbar: return "vertebral_body_lumbar";
        case BoneGroup::vertebral_arch_left: return "vertebral_arch_left";
        case BoneGroup::vertebral_arch_right: return "vertebral_arch_right";
        case BoneGroup::rib_left: return "rib_left";
        case BoneGroup::rib_right: return "rib_right";
        case BoneGroup::ilium: return "ilium";
        case BoneGroup::other: return "other";
    }
    throw Error(ErrorCode::bad_value, "unknown bone group");
}

BoneGroup group_from_name(const std::string& name) {
    for (int g = 0; g <= static_cast<int>(BoneGroup::other); ++g) {
        if (group_name(static_cast<BoneGroup>(g)) == name) {
            return static_cast<BoneGroup>(g);
        }
    }
    throw Error(ErrorCode::bad_format, "unknown bone group name: " + name);
}

int Taxonomy::index_of(const std::string& name) const {
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == name) return static_cast<int>(i);
    }
    return -1;
}

int Taxonomy::first_label_of(BoneGroup g) const {
    for (size_t i = 0; i < groups.size(); ++i) {
        if (groups[i] == g) return static_cast<int>(i);
    }
    return -1;
}

void Taxonomy::validate() const {
    if (labels.size() != 40) {
        throw Error(ErrorCode::bad_value,
                    "taxonomy must have exactly 40 labels, got " +
                        std::to_string(labels.size()));
    }
    if (groups.size() != labels.size()) {
        throw Error(ErrorCode::bad_value,
                    "taxonomy groups not parallel to labels");
    }
    std::set<std::string> unique(labels.begin(), labels.end());
    if (unique.size() != labels.size()) {
        throw Error(ErrorCode::bad_value, "taxonomy labels must be unique");
    }
}

Taxonomy default_taxonomy() {
    Taxonomy t;
    auto add = [&](const std::string& name, BoneGroup g) {
        t.labels.push_back(name);
        t.groups.push_back(g);
    };
    add("nasal_bone", BoneGroup::other);
    add("frontal_bone", BoneGroup::other);
    add("parietal_bone_left", BoneGroup::other);
    add("parietal_bone_right", BoneGroup::other);
    add("interparietal_bone", BoneGroup::other);
    add("occipital_bone", BoneGroup::other);
    add("maxilla_left", BoneGroup::other);
    add("maxilla_right", BoneGroup::other);
    add("mandible_left", BoneGroup::other);
    add("mandible_right", BoneGroup::other);
    add("zygomatic_arch_left", BoneGroup::other);
    add("zygomatic_arch_right", BoneGroup::other);
    add("cervical_vertebral_body", BoneGroup::vertebral_body_cervical);
    add("thoracic_vertebral_body", BoneGroup::vertebral_body_thoracic);
    add("lumbar_vertebral_body", BoneGroup::vertebral_body_lumbar);
    add("sacral_vertebral_body", BoneGroup::other);
    add("caudal_vertebral_body", BoneGroup::other);
    add("vertebral_arch_left", BoneGroup::vertebral_arch_left);
    add("vertebral_arch_right", BoneGroup::vertebral_arch_right);
    add("rib_left", BoneGroup::rib_left);
    add("rib_right", BoneGroup::rib_right);
    add("sternebra", BoneGroup::other);
    add("clavicle_left", BoneGroup::other);
    add("clavicle_right", BoneGroup::other);
    add("scapula_left", BoneGroup::other);
    add("scapula_right", BoneGroup::other);
    add("humerus_left", BoneGroup::other);
    add("humerus_right", BoneGroup::other);
    add("radius_left", BoneGroup::other);
    add("radius_right", BoneGroup::other);
    add("ulna_left", BoneGroup::other);
    add("ulna_right", BoneGroup::other);
    add("ilium_left", BoneGroup::ilium);
    add("ilium_right", BoneGroup::ilium);
    add("ischium_left", BoneGroup::other);
    add("ischium_right", BoneGroup::other);
    add("femur_left", BoneGroup::other);
    add("femur_right", BoneGroup::other);
    add("tibia_left", BoneGroup::other);
    add("tibia_right", BoneGroup::other);
    t.validate();
    return t;
}

Taxonomy load_taxonomy(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::missing_file,
                    "cannot open taxonomy file: " + path.string());
    }
    Taxonomy t;
    std::string line;
    int expected = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string index_s, label, group_s;
        if (!std::getline(ls, index_s, ',') || !std::getline(ls, label, ',') ||
            !std::getline(ls, group_s)) {
            throw Error(ErrorCode::bad_format,
                        "malformed taxonomy line: " + line);
        }
        if (std::stoi(index_s) != expected) {
            throw Error(ErrorCode::bad_format,
                        "taxonomy indices must be consecutive from 0");
        }
        ++expected;
        t.labels.push_back(label);
        t.groups.push_back(group_from_name(group_s));
    }
    t.validate();
    return t;
}

void save_taxonomy(const Taxonomy& t, const std::filesystem::path& path) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::missing_file,
                        "cannot create taxonomy file: " + path.string());
        }
        for (int i = 0; i < t.size(); ++i) {
            out << i << ',' << t.labels[i] << ',' << group_name(t.groups[i])
                << '\n';
        }
    }
    std::filesystem::rename(tmp, path);
}

} // namespace skelscreen
