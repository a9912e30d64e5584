#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace skelscreen {

// Anatomical group tags. Everything downstream of classification (curve
// relabeling, screening rules) keys on these, never on label names.
enum class BoneGroup : uint8_t {
    vertebral_body_cervical = 0,
    vertebral_body_thoracic = 1,
    vertebral_body_lumbar = 2,
    vertebral_arch_left = 3,
    vertebral_arch_right = 4,
    rib_left = 5,
    rib_right = 6,
    ilium = 7,
    other = 8,
};

bool is_vertebral_body(BoneGroup g);
std::string group_name(BoneGroup g);
BoneGroup group_from_name(const std::string& name);

struct Taxonomy {
    std::vector<std::string> labels;  // index = class id
    std::vector<BoneGroup> groups;    // parallel to labels

    int size() const { return static_cast<int>(labels.size()); }
    BoneGroup group_of(int label) const { return groups[label]; }
    const std::string& name_of(int label) const { return labels[label]; }
    // -1 when the name is unknown.
    int index_of(const std::string& name) const;
    // First label carrying the group, -1 if none.
    int first_label_of(BoneGroup g) const;

    void validate() const; // 40 unique labels, groups parallel
};

// The default 40-type rat-fetus taxonomy shipped with the toolkit.
Taxonomy default_taxonomy();

// UTF-8 lines `index,label,group`.
Taxonomy load_taxonomy(const std::filesystem::path& path);
void save_taxonomy(const Taxonomy& t, const std::filesystem::path& path);

} // namespace skelscreen
