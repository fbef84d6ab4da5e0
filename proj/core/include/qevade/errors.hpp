#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qevade {

/// Base class for all qevade errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// ---- vocabulary / dataset -------------------------------------------------

class DuplicatePermission : public Error {
public:
    explicit DuplicatePermission(const std::string& name)
        : Error("duplicate permission name: " + name), name_(name) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class EmptyVocabulary : public Error {
public:
    EmptyVocabulary() : Error("vocabulary must contain at least one permission name") {}
};

/// A CSV cell that is not a valid {0,1} value. `row` is the 1-based line
/// number in the file (the header is line 1), `col` the 1-based field index.
class MalformedCell : public Error {
public:
    MalformedCell(std::size_t row, std::size_t col, const std::string& detail)
        : Error("malformed cell at row " + std::to_string(row) + ", col " +
                std::to_string(col) + ": " + detail),
          row_(row),
          col_(col) {}
    std::size_t row() const { return row_; }
    std::size_t col() const { return col_; }

private:
    std::size_t row_;
    std::size_t col_;
};

class VocabularyMismatch : public Error {
public:
    explicit VocabularyMismatch(const std::string& what) : Error(what) {}
};

class InsufficientData : public Error {
public:
    explicit InsufficientData(const std::string& what) : Error(what) {}
};

class SingleClassDataset : public Error {
public:
    explicit SingleClassDataset(const std::string& what) : Error(what) {}
};

class IndexOutOfRange : public Error {
public:
    explicit IndexOutOfRange(const std::string& what) : Error(what) {}
};

// ---- manifest parsing -----------------------------------------------------

/// Malformed XML. Carries the 1-based line/column of the offending input.
class ParseError : public Error {
public:
    ParseError(std::size_t line, std::size_t column, const std::string& detail)
        : Error("parse error at " + std::to_string(line) + ":" + std::to_string(column) +
                ": " + detail),
          line_(line),
          column_(column) {}
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

class NotAManifest : public Error {
public:
    explicit NotAManifest(const std::string& root)
        : Error("document root is <" + root + ">, expected <manifest>") {}
};

class EmptyCorpus : public Error {
public:
    explicit EmptyCorpus(const std::string& what) : Error(what) {}
};

// ---- detectors ------------------------------------------------------------

class UnsupportedModel : public Error {
public:
    explicit UnsupportedModel(const std::string& what) : Error(what) {}
};

// ---- reinforcement learning -----------------------------------------------

class EmptyPool : public Error {
public:
    explicit EmptyPool(const std::string& what) : Error(what) {}
};

class InvalidAction : public Error {
public:
    explicit InvalidAction(const std::string& what) : Error(what) {}
};

class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string& what) : Error(what) {}
};

class EmptyPolicySet : public Error {
public:
    EmptyPolicySet() : Error("multi-policy attack requires at least one policy") {}
};

class EmptySet : public Error {
public:
    explicit EmptySet(const std::string& what) : Error(what) {}
};

// ---- harness --------------------------------------------------------------

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace qevade
