#include "qevade/vocabulary.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <utility>

#include "qevade/errors.hpp"

namespace qevade {

Vocabulary Vocabulary::from_names(std::vector<std::string> names) {
    if (names.empty()) throw EmptyVocabulary();
    Vocabulary v;
    v.names_ = std::move(names);
    v.index_.reserve(v.names_.size());
    for (std::size_t i = 0; i < v.names_.size(); ++i) {
        const std::string& name = v.names_[i];
        if (name.empty()) throw Error("permission name must not be empty");
        if (!v.index_.emplace(name, i).second) throw DuplicatePermission(name);
    }
    return v;
}

Vocabulary Vocabulary::load(std::istream& in) {
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) names.push_back(line);
    }
    return from_names(std::move(names));
}

Vocabulary Vocabulary::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open vocabulary file: " + path);
    return load(in);
}

void Vocabulary::save(std::ostream& out) const {
    for (const std::string& name : names_) out << name << '\n';
}

std::optional<std::size_t> Vocabulary::index_of(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

}  // namespace qevade
