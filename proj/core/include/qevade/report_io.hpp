#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qevade/attack.hpp"
#include "qevade/defense.hpp"
#include "qevade/detector.hpp"

namespace qevade {

std::string attack_report_to_json(const AttackReport& report);
AttackReport attack_report_from_json(const std::string& text);
void save_attack_report_file(const AttackReport& report, const std::string& path);
AttackReport load_attack_report_file(const std::string& path);

/// One row per report: model_id,mode,budget,fooling_rate.
void write_attack_summary_csv(std::span<const AttackReport> reports, std::ostream& out);

std::string defense_report_to_json(const DefenseReport& report);
DefenseReport defense_report_from_json(const std::string& text);
void save_defense_report_file(const DefenseReport& report, const std::string& path);
DefenseReport load_defense_report_file(const std::string& path);

/// One row per entry: model,mode,budget,fr_before,fr_after,acc_before,acc_after.
void write_defense_csv(const DefenseReport& report, std::ostream& out);

std::string ranking_to_json(const ImportanceRanking& ranking,
                            const std::vector<std::string>& names);
ImportanceRanking ranking_from_json(const std::string& text,
                                    std::vector<std::string>* names = nullptr);

/// Human-readable ranked permission list (rank | name | score).
void write_ranking_text(const ImportanceRanking& ranking,
                        const std::vector<std::string>& names, std::size_t top_k,
                        std::ostream& out);

/// Horizontal bar chart of fooling rates: one group per model (annotated
/// with its baseline accuracy when provided), one bar per budget, percent
/// axis fixed at 0..100. Values are taken verbatim from the reports.
std::string render_fooling_chart_svg(
    const std::string& title, std::span<const AttackReport> reports,
    const std::map<std::string, double>& baseline_accuracy);

/// Paired before/after bars for one attack mode of a defense report.
std::string render_defense_chart_svg(const std::string& title,
                                     const DefenseReport& report, AttackMode mode);

}  // namespace qevade
