#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace edu4fd {

/// The closed set of rhetorical relations, in the order used for parameter
/// indexing and for every rendered report.
enum class Relation : std::uint8_t {
  kTopicComment,
  kTopicChange,
  kTextual,
  kTemporal,
  kSummary,
  kSameUnit,
  kMannerMeans,
  kJoint,
  kExplanation,
  kEvaluation,
  kRoot,
  kEnablement,
  kElaboration,
  kContrast,
  kCondition,
  kComparison,
  kCause,
  kBackground,
  kAttribution,
};

inline constexpr std::size_t kNumRelations = 19;

inline constexpr std::array<std::string_view, kNumRelations> kRelationNames = {
    "Topic-comment", "Topic-change", "Textual",     "Temporal",    "Summary",
    "Same-unit",     "Manner-means", "Joint",       "Explanation", "Evaluation",
    "Root",          "Enablement",   "Elaboration", "Contrast",    "Condition",
    "Comparison",    "Cause",        "Background",  "Attribution",
};

inline constexpr std::size_t index_of(Relation r) { return static_cast<std::size_t>(r); }

inline std::string_view relation_name(Relation r) { return kRelationNames[index_of(r)]; }

inline std::optional<Relation> parse_relation(std::string_view name) {
  for (std::size_t i = 0; i < kNumRelations; ++i) {
    if (kRelationNames[i] == name) return static_cast<Relation>(i);
  }
  return std::nullopt;
}

}  // namespace edu4fd
