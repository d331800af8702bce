#include "orthoforge/manifest.hpp"

#include <sstream>

#include "orthoforge/error.hpp"
#include "orthoforge/textio.hpp"

namespace orthoforge {

namespace {

std::string dir_of(const std::string& path) {
    auto slash = path.find_last_of('/');
    if (slash == std::string::npos) return ".";
    if (slash == 0) return "/";
    return path.substr(0, slash);
}

}  // namespace

Manifest Manifest::read(const std::string& path) {
    return parse(read_text_file(path), dir_of(path));
}

Manifest Manifest::parse(const std::string& text, const std::string& origin) {
    Manifest m;
    m.origin_dir_ = origin;
    std::istringstream in(text);
    std::string line;
    std::string current;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s{trim(line)};
        if (s.empty() || s[0] == '#') continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw InvalidInput("manifest line " + fmt_int(lineno) +
                                   ": unterminated section header");
            current = std::string{trim(s.substr(1, s.size() - 2))};
            if (current.empty())
                throw InvalidInput("manifest line " + fmt_int(lineno) +
                                   ": empty section name");
            if (!m.find(current))
                m.sections_.push_back(Section{current, {}});
            continue;
        }
        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw InvalidInput("manifest line " + fmt_int(lineno) +
                               ": expected key = value");
        if (current.empty())
            throw InvalidInput("manifest line " + fmt_int(lineno) +
                               ": key outside any [section]");
        std::string key{trim(s.substr(0, eq))};
        std::string value{trim(s.substr(eq + 1))};
        if (key.empty())
            throw InvalidInput("manifest line " + fmt_int(lineno) +
                               ": empty key");
        m.set(current, key, value);
    }
    return m;
}

std::string Manifest::serialize() const {
    std::string out;
    for (std::size_t i = 0; i < sections_.size(); ++i) {
        if (i) out += '\n';
        out += '[';
        out += sections_[i].name;
        out += "]\n";
        for (const auto& kv : sections_[i].entries) {
            out += kv.first;
            out += " = ";
            out += kv.second;
            out += '\n';
        }
    }
    return out;
}

void Manifest::write(const std::string& path) const {
    write_text_file(path, serialize());
}

const Manifest::Section* Manifest::find(const std::string& name) const {
    for (const auto& s : sections_)
        if (s.name == name) return &s;
    return nullptr;
}

Manifest::Section* Manifest::find(const std::string& name) {
    for (auto& s : sections_)
        if (s.name == name) return &s;
    return nullptr;
}

bool Manifest::has(const std::string& section, const std::string& key) const {
    const Section* s = find(section);
    if (!s) return false;
    for (const auto& kv : s->entries)
        if (kv.first == key) return true;
    return false;
}

const std::string& Manifest::get(const std::string& section,
                                 const std::string& key) const {
    const Section* s = find(section);
    if (!s) throw InvalidInput("manifest has no [" + section + "] section");
    for (const auto& kv : s->entries)
        if (kv.first == key) return kv.second;
    throw InvalidInput("manifest [" + section + "] has no key '" + key + "'");
}

std::string Manifest::get_or(const std::string& section, const std::string& key,
                             const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

double Manifest::get_double(const std::string& section,
                            const std::string& key) const {
    return parse_double(get(section, key), section + "." + key);
}

double Manifest::get_double_or(const std::string& section,
                               const std::string& key, double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
}

long long Manifest::get_int(const std::string& section,
                            const std::string& key) const {
    return parse_int(get(section, key), section + "." + key);
}

long long Manifest::get_int_or(const std::string& section,
                               const std::string& key,
                               long long fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
}

std::vector<std::string> Manifest::get_list(const std::string& section,
                                            const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& part : split(get(section, key), ',')) {
        std::string t{trim(part)};
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

void Manifest::set(const std::string& section, const std::string& key,
                   const std::string& value) {
    Section* s = find(section);
    if (!s) {
        sections_.push_back(Section{section, {}});
        s = &sections_.back();
    }
    for (auto& kv : s->entries) {
        if (kv.first == key) {
            kv.second = value;
            return;
        }
    }
    s->entries.emplace_back(key, value);
}

std::string Manifest::resolve(const std::string& path) const {
    if (path.empty()) throw InvalidInput("empty path in manifest");
    if (path.front() == '/') return path;
    return origin_dir_ + "/" + path;
}

std::vector<std::string> Manifest::section_names() const {
    std::vector<std::string> out;
    out.reserve(sections_.size());
    for (const auto& s : sections_) out.push_back(s.name);
    return out;
}

}  // namespace orthoforge
