#pragma once

#include <string>
#include <vector>

namespace orthoforge {

// Line-oriented "[section]" + "key = value" store driving the pipeline
// stages.  Order is preserved and writes are deterministic, so re-running a
// stage against an unchanged manifest rewrites byte-identical files.
class Manifest {
  public:
    Manifest() = default;

    static Manifest read(const std::string& path);
    static Manifest parse(const std::string& text, const std::string& origin);
    void write(const std::string& path) const;
    std::string serialize() const;

    bool has(const std::string& section, const std::string& key) const;
    // Missing section/key throws InvalidInput naming both.
    const std::string& get(const std::string& section,
                           const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key) const;
    double get_double_or(const std::string& section, const std::string& key,
                         double fallback) const;
    long long get_int(const std::string& section, const std::string& key) const;
    long long get_int_or(const std::string& section, const std::string& key,
                         long long fallback) const;
    // Comma-separated list value.
    std::vector<std::string> get_list(const std::string& section,
                                      const std::string& key) const;

    // Inserts the section or key when absent, keeping insertion order.
    void set(const std::string& section, const std::string& key,
             const std::string& value);

    // Directory of the file this manifest was read from; relative artifact
    // paths resolve against it.
    const std::string& origin_dir() const { return origin_dir_; }
    void set_origin_dir(const std::string& dir) { origin_dir_ = dir; }
    std::string resolve(const std::string& path) const;

    std::vector<std::string> section_names() const;

  private:
    struct Section {
        std::string name;
        std::vector<std::pair<std::string, std::string>> entries;
    };
    const Section* find(const std::string& name) const;
    Section* find(const std::string& name);

    std::vector<Section> sections_;
    std::string origin_dir_ = ".";
};

}  // namespace orthoforge
