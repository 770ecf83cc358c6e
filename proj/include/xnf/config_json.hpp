#pragma once

#include <json.hpp>

#include "xnf/alignment.hpp"
#include "xnf/corpus_io.hpp"
#include "xnf/losses.hpp"
#include "xnf/tagger.hpp"

// JSON mappings for the configuration structs. Missing keys keep defaults.
namespace xnf {

void to_json(nlohmann::json& j, const LossKind& k);
void from_json(const nlohmann::json& j, LossKind& k);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

void to_json(nlohmann::json& j, const TaggerConfig& c);
void from_json(const nlohmann::json& j, TaggerConfig& c);

void to_json(nlohmann::json& j, const AlignerConfig& c);
void from_json(const nlohmann::json& j, AlignerConfig& c);

void to_json(nlohmann::json& j, const SynthSpec& s);
void from_json(const nlohmann::json& j, SynthSpec& s);

}  // namespace xnf
