#include "qevade/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qevade/errors.hpp"

namespace qevade {

namespace {

// Minimal XML scanner: elements, attributes, comments, processing
// instructions, DOCTYPE and CDATA. Enough to walk decoded manifest files;
// no namespace resolution (attribute names are matched verbatim).
class XmlScanner {
public:
    explicit XmlScanner(const std::string& text, ManifestParseResult& out)
        : text_(text), out_(out) {}

    void parse() {
        skip_bom();
        skip_misc(true);
        if (at_end()) fail("document has no root element");
        std::string root = parse_element();
        if (root != "manifest") throw NotAManifest(root);
        skip_misc(false);
        if (!at_end()) fail("content after document root");
    }

private:
    [[noreturn]] void fail(const std::string& detail) const {
        throw ParseError(line_, col_, detail);
    }

    bool at_end() const { return pos_ >= text_.size(); }

    char peek(std::size_t ahead = 0) const {
        return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
    }

    char advance() {
        if (at_end()) fail("unexpected end of document");
        char c = text_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        advance();
    }

    bool consume_if(const char* literal) {
        std::size_t n = std::char_traits<char>::length(literal);
        if (text_.compare(pos_, n, literal) != 0) return false;
        for (std::size_t i = 0; i < n; ++i) advance();
        return true;
    }

    void skip_bom() {
        if (text_.compare(0, 3, "\xEF\xBB\xBF") == 0) pos_ = 3;
    }

    static bool is_space(char c) {
        return c == ' ' || c == '\t' || c == '\r' || c == '\n';
    }

    static bool is_name_start(char c) {
        return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == ':';
    }

    static bool is_name_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == ':' ||
               c == '-' || c == '.';
    }

    void skip_space() {
        while (!at_end() && is_space(peek())) advance();
    }

    // Whitespace, comments, PIs and (in the prolog) a DOCTYPE declaration.
    void skip_misc(bool prolog) {
        for (;;) {
            skip_space();
            if (consume_if("<!--")) {
                skip_comment_body();
            } else if (peek() == '<' && peek(1) == '?') {
                skip_pi();
            } else if (prolog && peek() == '<' && peek(1) == '!') {
                skip_doctype();
            } else {
                return;
            }
        }
    }

    void skip_comment_body() {
        for (;;) {
            if (at_end()) fail("unterminated comment");
            if (consume_if("-->")) return;
            advance();
        }
    }

    void skip_pi() {
        advance();  // <
        advance();  // ?
        for (;;) {
            if (at_end()) fail("unterminated processing instruction");
            if (consume_if("?>")) return;
            advance();
        }
    }

    void skip_doctype() {
        advance();  // <
        advance();  // !
        int brackets = 0;
        for (;;) {
            if (at_end()) fail("unterminated declaration");
            char c = advance();
            if (c == '[') ++brackets;
            else if (c == ']') --brackets;
            else if (c == '>' && brackets == 0) return;
        }
    }

    std::string parse_name() {
        if (!is_name_start(peek())) fail("expected a name");
        std::string name;
        name.push_back(advance());
        while (!at_end() && is_name_char(peek())) name.push_back(advance());
        return name;
    }

    std::string parse_attribute_value() {
        char quote = peek();
        if (quote != '"' && quote != '\'') fail("attribute value must be quoted");
        advance();
        std::string value;
        for (;;) {
            if (at_end()) fail("unterminated attribute value");
            char c = peek();
            if (c == quote) {
                advance();
                return value;
            }
            if (c == '<') fail("'<' not allowed in attribute value");
            if (c == '&') {
                value += parse_entity();
            } else {
                value.push_back(advance());
            }
        }
    }

    std::string parse_entity() {
        advance();  // &
        std::string entity;
        while (!at_end() && peek() != ';') entity.push_back(advance());
        if (at_end()) fail("unterminated entity reference");
        advance();  // ;
        if (entity == "amp") return "&";
        if (entity == "lt") return "<";
        if (entity == "gt") return ">";
        if (entity == "apos") return "'";
        if (entity == "quot") return "\"";
        if (entity.size() > 1 && entity[0] == '#') {
            int base = 10;
            std::size_t digits = 1;
            if (entity[1] == 'x' || entity[1] == 'X') {
                base = 16;
                digits = 2;
            }
            char* end = nullptr;
            unsigned long code = std::strtoul(entity.c_str() + digits, &end, base);
            if (end == nullptr || *end != '\0' || code == 0 || code > 0x10FFFF) {
                fail("invalid character reference '&" + entity + ";'");
            }
            return encode_utf8(static_cast<std::uint32_t>(code));
        }
        fail("unknown entity '&" + entity + ";'");
    }

    static std::string encode_utf8(std::uint32_t code) {
        std::string out;
        if (code < 0x80) {
            out.push_back(static_cast<char>(code));
        } else if (code < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (code >> 6)));
            out.push_back(static_cast<char>(0x80 | (code & 0x3F)));
        } else if (code < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (code >> 12)));
            out.push_back(static_cast<char>(0x80 | ((code >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (code & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (code >> 18)));
            out.push_back(static_cast<char>(0x80 | ((code >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((code >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (code & 0x3F)));
        }
        return out;
    }

    // Parses one element (cursor on '<'); returns the element name.
    std::string parse_element() {
        expect('<');
        std::string name = parse_name();

        std::string android_name;
        bool has_android_name = false;
        for (;;) {
            bool had_space = !at_end() && is_space(peek());
            skip_space();
            if (peek() == '/' || peek() == '>') break;
            if (!had_space) fail("expected whitespace before attribute");
            std::string attr = parse_name();
            skip_space();
            expect('=');
            skip_space();
            std::string value = parse_attribute_value();
            if (attr == "android:name") {
                android_name = value;
                has_android_name = true;
            }
        }

        if ((name == "uses-permission" || name == "uses-permission-sdk-23") &&
            has_android_name) {
            out_.requested.insert(android_name);
        }

        if (consume_if("/>")) return name;
        expect('>');
        parse_content(name);
        return name;
    }

    void parse_content(const std::string& open_name) {
        for (;;) {
            if (at_end()) fail("missing end tag for <" + open_name + ">");
            char c = peek();
            if (c == '<') {
                if (consume_if("<!--")) {
                    skip_comment_body();
                } else if (consume_if("<![CDATA[")) {
                    skip_cdata();
                } else if (peek(1) == '?') {
                    skip_pi();
                } else if (peek(1) == '/') {
                    advance();  // <
                    advance();  // /
                    std::string close = parse_name();
                    if (close != open_name) {
                        fail("end tag </" + close + "> does not match <" + open_name + ">");
                    }
                    skip_space();
                    expect('>');
                    return;
                } else {
                    parse_element();
                }
            } else if (c == '&') {
                parse_entity();
            } else {
                advance();  // character data
            }
        }
    }

    void skip_cdata() {
        for (;;) {
            if (at_end()) fail("unterminated CDATA section");
            if (consume_if("]]>")) return;
            advance();
        }
    }

    const std::string& text_;
    ManifestParseResult& out_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
};

}  // namespace

ManifestParseResult parse_manifest(const std::string& xml_text,
                                   const std::string& source_id) {
    ManifestParseResult result;
    result.source_id = source_id;
    XmlScanner scanner(xml_text, result);
    scanner.parse();
    return result;
}

PermissionVector build_feature_row(ManifestParseResult& result,
                                   const Vocabulary& vocabulary) {
    PermissionVector row = PermissionVector::zeros(vocabulary.size());
    std::set<std::string> known;
    for (const std::string& name : result.requested) {
        if (auto idx = vocabulary.index_of(name)) {
            row.set_bit(*idx);
            known.insert(name);
        } else {
            result.unknown.push_back(name);
        }
    }
    result.requested = std::move(known);
    return row;
}

IngestResult ingest_corpus(const std::string& directory,
                           std::shared_ptr<const Vocabulary> vocabulary, int label) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(directory)) {
        throw Error("not a directory: " + directory);
    }

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(directory)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    std::vector<LabeledSample> samples;
    std::vector<IngestSkip> skipped;
    for (const fs::path& file : files) {
        std::ifstream in(file, std::ios::binary);
        if (!in) {
            skipped.push_back({file.filename().string(), "cannot open file"});
            continue;
        }
        std::ostringstream buffer;
        buffer << in.rdbuf();
        try {
            ManifestParseResult parsed =
                parse_manifest(buffer.str(), file.filename().string());
            samples.push_back({build_feature_row(parsed, *vocabulary), label});
        } catch (const Error& e) {
            skipped.push_back({file.filename().string(), e.what()});
        }
    }

    if (samples.empty()) {
        throw EmptyCorpus("no manifest in " + directory + " could be parsed (" +
                          std::to_string(skipped.size()) + " skipped)");
    }
    return {LabeledDataset(std::move(vocabulary), std::move(samples)), std::move(skipped)};
}

}  // namespace qevade
