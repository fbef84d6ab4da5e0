#pragma once

#include <set>
#include <string>
#include <vector>

#include "qevade/dataset.hpp"
#include "qevade/vocabulary.hpp"

namespace qevade {

/// Permissions requested by one manifest document. `requested` holds the
/// names found in the document; `unknown` receives the names rejected by
/// vocabulary filtering (see build_feature_row). Name matching is exact and
/// case-sensitive.
struct ManifestParseResult {
    std::set<std::string> requested;
    std::vector<std::string> unknown;
    std::string source_id;
};

/// Extracts the requested permissions from decoded Android manifest XML text:
/// the android:name attribute values of every <uses-permission> and
/// <uses-permission-sdk-23> element, duplicates collapsed. Permissions
/// limited by maxSdkVersion still count as requested.
/// Throws ParseError (with line/column) on malformed XML and NotAManifest
/// when the document root is not <manifest>.
ManifestParseResult parse_manifest(const std::string& xml_text,
                                   const std::string& source_id = "");

/// Builds the binary feature row for a parse result: bit i is set iff
/// vocabulary name i was requested. Requested names absent from the
/// vocabulary are moved into result.unknown and excluded.
PermissionVector build_feature_row(ManifestParseResult& result,
                                   const Vocabulary& vocabulary);

struct IngestSkip {
    std::string file;
    std::string reason;
};

struct IngestResult {
    LabeledDataset dataset;
    std::vector<IngestSkip> skipped;
};

/// Parses every regular file in `directory` (sorted by file name) as a
/// manifest and emits one labeled sample per successfully parsed file.
/// Per-file failures are collected into the skip report; zero successes is
/// an EmptyCorpus error.
IngestResult ingest_corpus(const std::string& directory,
                           std::shared_ptr<const Vocabulary> vocabulary, int label);

}  // namespace qevade
