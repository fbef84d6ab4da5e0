#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace qevade {

/// Ordered set of unique permission names. A vocabulary fixes the positional
/// meaning of every feature vector bound to it; the index<->name mapping is a
/// bijection and the order survives serialization round trips.
class Vocabulary {
public:
    /// Builds a vocabulary from names, preserving order.
    /// Throws EmptyVocabulary for an empty list, DuplicatePermission on a
    /// repeated name, Error on an empty name.
    static Vocabulary from_names(std::vector<std::string> names);

    /// Reads one permission name per line (blank lines ignored).
    static Vocabulary load(std::istream& in);
    static Vocabulary load_file(const std::string& path);

    /// Writes one name per line, LF endings.
    void save(std::ostream& out) const;

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(std::size_t index) const { return names_.at(index); }
    std::optional<std::size_t> index_of(std::string_view name) const;
    bool contains(std::string_view name) const { return index_of(name).has_value(); }

    bool operator==(const Vocabulary& other) const { return names_ == other.names_; }

private:
    Vocabulary() = default;

    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace qevade
