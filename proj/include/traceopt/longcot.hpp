/// @file longcot.hpp
/// @brief Parse, validate, render, and segment structured reasoning traces.
///
/// A trace document is a sequence of markdown-style sections, each opened by
/// an exact heading line:
///
///   ### Description            (required)
///   ### Rationale              (optional)
///   ### Let's think step by step   (optional, content-free marker)
///   ### Step N                 (N = 1, 2, ... contiguous)
///   ### In Conclusion          (required)
///
/// Sections appear in that order. Heading matching is exact (case-sensitive,
/// single space after `###`); lenient mode additionally tolerates trailing
/// whitespace on heading lines.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "traceopt/common.hpp"

namespace traceopt::longcot {

enum class ParseErrorKind {
  missing_description,
  missing_conclusion,
  non_contiguous_steps,
  unknown_heading,
  misplaced_heading,
  unexpected_content,
};

std::string_view to_string(ParseErrorKind k);

class ParseError : public ValidationError {
 public:
  ParseError(ParseErrorKind kind, std::size_t line, const std::string& detail);

  ParseErrorKind kind() const { return kind_; }
  /// 1-based line number of the offending line (0 = end of document).
  std::size_t line() const { return line_; }

 private:
  ParseErrorKind kind_;
  std::size_t line_;
};

struct Step {
  int index = 0;
  std::string text;

  bool operator==(const Step&) const = default;
};

struct LongCoTResponse {
  std::string raw_text;  ///< document text as parsed; not part of equality
  std::string description;
  std::string rationale;  ///< empty string means the section is absent
  bool step_marker = false;
  std::vector<Step> steps;
  std::string conclusion;
  std::string desc_segment;
  std::string reason_segment;
};

/// Equality over semantic fields; raw_text is provenance, not content.
bool operator==(const LongCoTResponse& a, const LongCoTResponse& b);

struct ParseOptions {
  bool lenient = false;
};

/// Parses a trace document. Throws ParseError naming the offending line.
LongCoTResponse parse_longcot(std::string_view text, ParseOptions opts = {});

/// Canonical serialization: fixed heading order, one blank line between
/// sections, trailing newline. Inverse of parse_longcot on valid responses.
/// Throws ValidationError if `resp` violates its invariants.
std::string render_longcot(const LongCoTResponse& resp);

/// Checks the response invariants (segment consistency, step contiguity,
/// bodies free of heading lines and edge blank lines).
void validate(const LongCoTResponse& resp);

/// Splits the trace into its two functional segments:
/// desc = description body; reason = rationale + steps + conclusion bodies
/// joined in document order.
std::pair<std::string, std::string> segment(const LongCoTResponse& resp);

/// A numeric length found in the conclusion, normalized to meters.
struct ConclusionValue {
  double value_meters = 0.0;
  std::string unit;         ///< canonical source unit: mm, cm, m, km, in, ft
  std::size_t begin = 0;    ///< numeric literal span within the conclusion
  std::size_t end = 0;
  double raw_value = 0.0;   ///< literal value in the source unit
  int decimals = 0;         ///< decimal places of the literal
};

/// All numeric literals with a recognized length unit in the conclusion,
/// in text order, converted to meters. Unknown units are ignored.
std::vector<ConclusionValue> extract_conclusion_values(const LongCoTResponse& resp);

/// Same scan over arbitrary text (used by the evaluation tooling).
std::vector<ConclusionValue> extract_length_values(std::string_view text);

/// First length in `text` in meters; a bare number is taken as meters.
std::optional<double> parse_length(const std::string& text);

/// One structured section, e.g. a single search-candidate step.
enum class SectionKind { description, rationale, step_marker, step, conclusion };

struct Section {
  SectionKind kind = SectionKind::step;
  int step_index = 0;  ///< meaningful only for kind == step
  std::string body;
};

/// Parses a fragment consisting of exactly one section (heading + body).
Section parse_section(std::string_view text, ParseOptions opts = {});

}  // namespace traceopt::longcot
