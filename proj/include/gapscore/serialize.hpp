#pragma once

#include <filesystem>
#include <iosfwd>
#include <variant>

#include "gapscore/egmm.hpp"
#include "gapscore/iforest.hpp"
#include "gapscore/loda.hpp"

namespace gapscore {

// Fitted models are stored as JSON objects:
//   {"format": "gapscore-model", "version": 1, "algorithm": "iforest" | "loda" | "egmm", ...}
// Doubles are written with round-trip precision, so a saved model scores
// bit-identically after loading.
inline constexpr int kModelFormatVersion = 1;

using AnyModel = std::variant<IsolationForest, LodaModel, EgmmModel>;

void save_model(const AnyModel& model, std::ostream& out);
void save_model(const AnyModel& model, const std::filesystem::path& path);

// Throws FormatError on malformed input, unknown algorithm or version.
AnyModel load_model(std::istream& in);
AnyModel load_model(const std::filesystem::path& path);

}  // namespace gapscore
