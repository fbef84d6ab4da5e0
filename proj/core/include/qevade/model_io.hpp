#pragma once

#include <string>

#include "qevade/detector.hpp"
#include "qevade/qlearn.hpp"

namespace qevade {

/// JSON serialization of trained models, Q-tables and policies. Numbers are
/// written in shortest round-trip form, so save/load/save is byte-identical.

std::string model_to_json(const DetectorModel& model);
DetectorModel model_from_json(const std::string& text);
void save_model_file(const DetectorModel& model, const std::string& path);
DetectorModel load_model_file(const std::string& path);

std::string qtable_to_json(const QTable& table);
QTable qtable_from_json(const std::string& text);
void save_qtable_file(const QTable& table, const std::string& path);
QTable load_qtable_file(const std::string& path);

std::string policy_to_json(const AttackPolicy& policy);
AttackPolicy policy_from_json(const std::string& text);
void save_policy_file(const AttackPolicy& policy, const std::string& path);
AttackPolicy load_policy_file(const std::string& path);

}  // namespace qevade
