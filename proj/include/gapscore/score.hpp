#pragma once

namespace gapscore {

// Higher score = more anomalous, for every detector.
struct ScoreResult {
  double score = 0.0;
  // True when no ensemble member could score the query and `score` is the
  // detector's neutral constant.
  bool fallback = false;
};

enum class TreeStrategy { kBaseline, kProportional, kReduced };
enum class LodaStrategy { kBaseline, kReduced };
enum class DensityStrategy { kBaseline, kMarginal };

// Isolation Forest score reported when no reduced tree applies.
inline constexpr double kIforestNeutralScore = 0.5;

}  // namespace gapscore
