#include "qevade/report_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "qevade/errors.hpp"

namespace qevade {

using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void spill(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << text;
}

// Shortest round-trip decimal form, matching the JSON emitter, so CSV cells
// equal the report fields exactly.
std::string format_double(double value) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    (void)ec;
    return std::string(buf, ptr);
}

}  // namespace

std::string attack_report_to_json(const AttackReport& report) {
    json j;
    j["format"] = "qevade-attack-v1";
    j["mode"] = std::string(attack_mode_name(report.mode));
    j["model_id"] = report.model_id;
    j["budget"] = report.budget;
    j["fooling_rate"] = report.fooling_rate;
    json outcomes = json::array();
    for (const AttackOutcome& o : report.outcomes) {
        json jo;
        jo["original"] = o.original.to_string();
        jo["final"] = o.final_state ? json(o.final_state->to_string()) : json(nullptr);
        jo["n_modified"] = o.n_modified;
        jo["succeeded"] = o.succeeded;
        jo["model_id"] = o.model_id;
        jo["policy_id"] = o.policy_id ? json(*o.policy_id) : json(nullptr);
        outcomes.push_back(std::move(jo));
    }
    j["outcomes"] = std::move(outcomes);
    return j.dump(2) + "\n";
}

AttackReport attack_report_from_json(const std::string& text) {
    json j = json::parse(text);
    if (j.at("format").get<std::string>() != "qevade-attack-v1") {
        throw Error("not a qevade attack report");
    }
    AttackReport report;
    auto mode = attack_mode_from_name(j.at("mode").get<std::string>());
    if (!mode) throw Error("unknown attack mode");
    report.mode = *mode;
    report.model_id = j.at("model_id").get<std::string>();
    report.budget = j.at("budget").get<std::size_t>();
    report.fooling_rate = j.at("fooling_rate").get<double>();
    for (const json& jo : j.at("outcomes")) {
        AttackOutcome o;
        o.original = PermissionVector::from_string(jo.at("original").get<std::string>());
        if (!jo.at("final").is_null()) {
            o.final_state =
                PermissionVector::from_string(jo.at("final").get<std::string>());
        }
        o.n_modified = jo.at("n_modified").get<std::size_t>();
        o.succeeded = jo.at("succeeded").get<bool>();
        o.model_id = jo.at("model_id").get<std::string>();
        if (!jo.at("policy_id").is_null()) {
            o.policy_id = jo.at("policy_id").get<std::string>();
        }
        report.outcomes.push_back(std::move(o));
    }
    return report;
}

void save_attack_report_file(const AttackReport& report, const std::string& path) {
    spill(path, attack_report_to_json(report));
}

AttackReport load_attack_report_file(const std::string& path) {
    return attack_report_from_json(slurp(path));
}

void write_attack_summary_csv(std::span<const AttackReport> reports, std::ostream& out) {
    out << "model_id,mode,budget,fooling_rate\n";
    for (const AttackReport& r : reports) {
        out << r.model_id << ',' << attack_mode_name(r.mode) << ',' << r.budget << ','
            << format_double(r.fooling_rate) << '\n';
    }
}

std::string defense_report_to_json(const DefenseReport& report) {
    json rows = json::array();
    for (const DefenseRow& r : report.rows) {
        json jr;
        jr["model_id"] = r.model_id;
        jr["mode"] = std::string(attack_mode_name(r.mode));
        jr["budget"] = r.budget;
        jr["fr_before"] = r.fr_before;
        jr["fr_after"] = r.fr_after;
        jr["acc_before"] = r.acc_before;
        jr["acc_after"] = r.acc_after;
        rows.push_back(std::move(jr));
    }
    json j;
    j["format"] = "qevade-defense-v1";
    j["rows"] = std::move(rows);
    return j.dump(2) + "\n";
}

DefenseReport defense_report_from_json(const std::string& text) {
    json j = json::parse(text);
    if (j.at("format").get<std::string>() != "qevade-defense-v1") {
        throw Error("not a qevade defense report");
    }
    DefenseReport report;
    for (const json& jr : j.at("rows")) {
        DefenseRow r;
        r.model_id = jr.at("model_id").get<std::string>();
        auto mode = attack_mode_from_name(jr.at("mode").get<std::string>());
        if (!mode) throw Error("unknown attack mode");
        r.mode = *mode;
        r.budget = jr.at("budget").get<std::size_t>();
        r.fr_before = jr.at("fr_before").get<double>();
        r.fr_after = jr.at("fr_after").get<double>();
        r.acc_before = jr.at("acc_before").get<double>();
        r.acc_after = jr.at("acc_after").get<double>();
        report.rows.push_back(std::move(r));
    }
    return report;
}

void save_defense_report_file(const DefenseReport& report, const std::string& path) {
    spill(path, defense_report_to_json(report));
}

DefenseReport load_defense_report_file(const std::string& path) {
    return defense_report_from_json(slurp(path));
}

void write_defense_csv(const DefenseReport& report, std::ostream& out) {
    out << "model_id,mode,budget,fr_before,fr_after,acc_before,acc_after\n";
    for (const DefenseRow& r : report.rows) {
        out << r.model_id << ',' << attack_mode_name(r.mode) << ',' << r.budget << ','
            << format_double(r.fr_before) << ',' << format_double(r.fr_after) << ','
            << format_double(r.acc_before) << ',' << format_double(r.acc_after) << '\n';
    }
}

std::string ranking_to_json(const ImportanceRanking& ranking,
                            const std::vector<std::string>& names) {
    json j;
    j["format"] = "qevade-ranking-v1";
    j["names"] = names;
    j["scores"] = ranking.scores;
    j["order"] = ranking.order;
    return j.dump(2) + "\n";
}

ImportanceRanking ranking_from_json(const std::string& text,
                                    std::vector<std::string>* names) {
    json j = json::parse(text);
    if (j.at("format").get<std::string>() != "qevade-ranking-v1") {
        throw Error("not a qevade ranking file");
    }
    if (names) *names = j.at("names").get<std::vector<std::string>>();
    ImportanceRanking ranking;
    ranking.scores = j.at("scores").get<std::vector<double>>();
    ranking.order = j.at("order").get<std::vector<std::size_t>>();
    return ranking;
}

void write_ranking_text(const ImportanceRanking& ranking,
                        const std::vector<std::string>& names, std::size_t top_k,
                        std::ostream& out) {
    std::size_t shown = std::min(top_k, ranking.order.size());
    out << "rank | permission | importance\n";
    for (std::size_t r = 0; r < shown; ++r) {
        std::size_t f = ranking.order[r];
        out << (r + 1) << " | " << names.at(f) << " | " << format_double(ranking.scores[f])
            << '\n';
    }
}

// ---- SVG charts ---------------------------------------------------------------

namespace {

constexpr double kChartWidth = 760.0;
constexpr double kLabelWidth = 230.0;
constexpr double kBarHeight = 14.0;
constexpr double kBarGap = 3.0;
constexpr double kGroupGap = 16.0;
constexpr double kHeaderHeight = 48.0;
constexpr double kAxisHeight = 30.0;

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

struct Bar {
    std::string label;  // right of the bar
    double percent = 0.0;
    std::string color;
};

struct BarGroup {
    std::string label;  // model annotation
    std::vector<Bar> bars;
};

std::string render_bar_chart(const std::string& title,
                             const std::vector<BarGroup>& groups) {
    double plot_width = kChartWidth - kLabelWidth - 80.0;
    double y = kHeaderHeight;
    std::ostringstream body;
    for (const BarGroup& group : groups) {
        double group_top = y;
        for (const Bar& bar : group.bars) {
            double w = std::clamp(bar.percent, 0.0, 100.0) / 100.0 * plot_width;
            body << "  <rect x=\"" << kLabelWidth << "\" y=\"" << y << "\" width=\"" << w
                 << "\" height=\"" << kBarHeight << "\" fill=\"" << bar.color << "\"/>\n";
            body << "  <text x=\"" << (kLabelWidth + w + 4) << "\" y=\""
                 << (y + kBarHeight - 3) << "\" font-size=\"10\" fill=\"#333\">"
                 << escape_xml(bar.label) << "</text>\n";
            y += kBarHeight + kBarGap;
        }
        double group_middle = (group_top + y - kBarGap) / 2.0;
        body << "  <text x=\"" << (kLabelWidth - 8) << "\" y=\"" << (group_middle + 4)
             << "\" font-size=\"11\" text-anchor=\"end\" fill=\"#000\">"
             << escape_xml(group.label) << "</text>\n";
        y += kGroupGap;
    }

    double height = y + kAxisHeight;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kChartWidth
        << "\" height=\"" << height << "\" viewBox=\"0 0 " << kChartWidth << " "
        << height << "\">\n";
    svg << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "  <text x=\"" << kChartWidth / 2 << "\" y=\"24\" font-size=\"15\" "
        << "text-anchor=\"middle\" font-weight=\"bold\">" << escape_xml(title)
        << "</text>\n";
    // percent axis, fixed 0..100
    for (int tick = 0; tick <= 100; tick += 20) {
        double x = kLabelWidth + tick / 100.0 * plot_width;
        svg << "  <line x1=\"" << x << "\" y1=\"" << kHeaderHeight - 6 << "\" x2=\"" << x
            << "\" y2=\"" << (height - kAxisHeight) << "\" stroke=\"#ddd\"/>\n";
        svg << "  <text x=\"" << x << "\" y=\"" << (height - kAxisHeight + 14)
            << "\" font-size=\"10\" text-anchor=\"middle\" fill=\"#555\">" << tick
            << "</text>\n";
    }
    svg << "  <text x=\"" << (kLabelWidth + plot_width / 2) << "\" y=\"" << (height - 6)
        << "\" font-size=\"11\" text-anchor=\"middle\" fill=\"#555\">"
        << "fooling rate (%)</text>\n";
    svg << body.str();
    svg << "</svg>\n";
    return svg.str();
}

const char* kBudgetColors[] = {"#9ecae1", "#6baed6", "#4292c6", "#2171b5",
                               "#08519c", "#08306b"};

}  // namespace

std::string render_fooling_chart_svg(
    const std::string& title, std::span<const AttackReport> reports,
    const std::map<std::string, double>& baseline_accuracy) {
    // group reports per model, keep first-seen model order
    std::vector<std::string> model_order;
    std::map<std::string, std::vector<const AttackReport*>> by_model;
    for (const AttackReport& r : reports) {
        if (!by_model.count(r.model_id)) model_order.push_back(r.model_id);
        by_model[r.model_id].push_back(&r);
    }

    std::vector<BarGroup> groups;
    for (const std::string& model : model_order) {
        BarGroup group;
        group.label = model;
        auto acc = baseline_accuracy.find(model);
        if (acc != baseline_accuracy.end()) {
            group.label += " (acc " + format_double(acc->second) + ")";
        }
        std::vector<const AttackReport*> rs = by_model[model];
        std::sort(rs.begin(), rs.end(), [](const AttackReport* a, const AttackReport* b) {
            return a->budget < b->budget;
        });
        std::size_t color = 0;
        for (const AttackReport* r : rs) {
            Bar bar;
            bar.percent = r->fooling_rate;
            bar.label = "b=" + std::to_string(r->budget) + ": " +
                        format_double(r->fooling_rate);
            bar.color = kBudgetColors[color % 6];
            ++color;
            group.bars.push_back(std::move(bar));
        }
        groups.push_back(std::move(group));
    }
    return render_bar_chart(title, groups);
}

std::string render_defense_chart_svg(const std::string& title,
                                     const DefenseReport& report, AttackMode mode) {
    std::vector<std::string> model_order;
    std::map<std::string, std::vector<const DefenseRow*>> by_model;
    for (const DefenseRow& r : report.rows) {
        if (r.mode != mode) continue;
        if (!by_model.count(r.model_id)) model_order.push_back(r.model_id);
        by_model[r.model_id].push_back(&r);
    }

    std::vector<BarGroup> groups;
    for (const std::string& model : model_order) {
        std::vector<const DefenseRow*> rs = by_model[model];
        std::sort(rs.begin(), rs.end(), [](const DefenseRow* a, const DefenseRow* b) {
            return a->budget < b->budget;
        });
        BarGroup group;
        group.label = model + " (acc " + format_double(rs.front()->acc_after) + ")";
        for (const DefenseRow* r : rs) {
            group.bars.push_back({"b=" + std::to_string(r->budget) +
                                      " before: " + format_double(r->fr_before),
                                  r->fr_before, "#c6dbef"});
            group.bars.push_back({"b=" + std::to_string(r->budget) +
                                      " after: " + format_double(r->fr_after),
                                  r->fr_after, "#e6550d"});
        }
        groups.push_back(std::move(group));
    }
    return render_bar_chart(title, groups);
}

}  // namespace qevade
