#include "traceopt/longcot.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <map>
#include <sstream>

namespace traceopt::longcot {

namespace {

constexpr std::string_view kDescriptionHeading = "### Description";
constexpr std::string_view kRationaleHeading = "### Rationale";
constexpr std::string_view kStepMarkerHeading = "### Let's think step by step";
constexpr std::string_view kStepPrefix = "### Step ";
constexpr std::string_view kConclusionHeading = "### In Conclusion";

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      // No trailing newline: the remainder is the last line (may be empty
      // only if the document itself is empty, handled by the caller).
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::string_view rstrip(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t\r") == std::string_view::npos;
}

/// Parses "### Step N" with N a canonical positive integer (no sign, no
/// leading zeros). Returns 0 when the line is not a step heading.
int parse_step_index(std::string_view line) {
  if (line.substr(0, kStepPrefix.size()) != kStepPrefix) return 0;
  std::string_view digits = line.substr(kStepPrefix.size());
  if (digits.empty() || digits[0] == '0') return 0;
  int value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || value < 1) return 0;
  return value;
}

struct Heading {
  SectionKind kind;
  int step_index = 0;
};

/// Classifies a heading line, already whitespace-normalized per mode.
/// Returns nullopt for an unrecognized heading.
std::optional<Heading> classify_heading(std::string_view line) {
  if (line == kDescriptionHeading) return Heading{SectionKind::description};
  if (line == kRationaleHeading) return Heading{SectionKind::rationale};
  if (line == kStepMarkerHeading) return Heading{SectionKind::step_marker};
  if (line == kConclusionHeading) return Heading{SectionKind::conclusion};
  if (int n = parse_step_index(line); n > 0) return Heading{SectionKind::step, n};
  return std::nullopt;
}

/// Joins body lines, dropping leading/trailing blank lines but keeping
/// interior ones.
std::string join_body(const std::vector<std::string_view>& lines,
                      std::size_t begin, std::size_t end) {
  while (begin < end && is_blank(lines[begin])) ++begin;
  while (end > begin && is_blank(lines[end - 1])) --end;
  std::string body;
  for (std::size_t i = begin; i < end; ++i) {
    if (!body.empty()) body += '\n';
    body += lines[i];
  }
  return body;
}

int section_rank(SectionKind k) {
  switch (k) {
    case SectionKind::description: return 0;
    case SectionKind::rationale: return 1;
    case SectionKind::step_marker: return 2;
    case SectionKind::step: return 3;
    case SectionKind::conclusion: return 4;
  }
  return 4;
}

bool body_has_heading_line(const std::string& body) {
  std::size_t pos = 0;
  while (pos <= body.size()) {
    if (body.compare(pos, 3, "###") == 0) return true;
    std::size_t nl = body.find('\n', pos);
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  return false;
}

struct UnitInfo {
  const char* canonical;
  double to_meters;
};

const std::map<std::string, UnitInfo, std::less<>>& unit_lexicon() {
  static const std::map<std::string, UnitInfo, std::less<>> table = {
      {"mm", {"mm", 1e-3}},
      {"millimeter", {"mm", 1e-3}},  {"millimeters", {"mm", 1e-3}},
      {"millimetre", {"mm", 1e-3}},  {"millimetres", {"mm", 1e-3}},
      {"cm", {"cm", 1e-2}},
      {"centimeter", {"cm", 1e-2}},  {"centimeters", {"cm", 1e-2}},
      {"centimetre", {"cm", 1e-2}},  {"centimetres", {"cm", 1e-2}},
      {"m", {"m", 1.0}},
      {"meter", {"m", 1.0}},         {"meters", {"m", 1.0}},
      {"metre", {"m", 1.0}},         {"metres", {"m", 1.0}},
      {"km", {"km", 1e3}},
      {"kilometer", {"km", 1e3}},    {"kilometers", {"km", 1e3}},
      {"kilometre", {"km", 1e3}},    {"kilometres", {"km", 1e3}},
      {"in", {"in", 0.0254}},
      {"inch", {"in", 0.0254}},      {"inches", {"in", 0.0254}},
      {"ft", {"ft", 0.3048}},
      {"foot", {"ft", 0.3048}},      {"feet", {"ft", 0.3048}},
  };
  return table;
}

}  // namespace

std::string_view to_string(ParseErrorKind k) {
  switch (k) {
    case ParseErrorKind::missing_description: return "MissingDescription";
    case ParseErrorKind::missing_conclusion: return "MissingConclusion";
    case ParseErrorKind::non_contiguous_steps: return "NonContiguousSteps";
    case ParseErrorKind::unknown_heading: return "UnknownHeading";
    case ParseErrorKind::misplaced_heading: return "MisplacedHeading";
    case ParseErrorKind::unexpected_content: return "UnexpectedContent";
  }
  return "ParseError";
}

ParseError::ParseError(ParseErrorKind kind, std::size_t line, const std::string& detail)
    : ValidationError(std::string(to_string(kind)) + " at line " +
                      std::to_string(line) + ": " + detail),
      kind_(kind),
      line_(line) {}

bool operator==(const LongCoTResponse& a, const LongCoTResponse& b) {
  return a.description == b.description && a.rationale == b.rationale &&
         a.step_marker == b.step_marker && a.steps == b.steps &&
         a.conclusion == b.conclusion && a.desc_segment == b.desc_segment &&
         a.reason_segment == b.reason_segment;
}

LongCoTResponse parse_longcot(std::string_view text, ParseOptions opts) {
  if (text.empty()) {
    throw ParseError(ParseErrorKind::missing_description, 0, "empty document");
  }
  auto lines = split_lines(text);

  struct RawSection {
    Heading heading;
    std::size_t heading_line;  // 1-based
    std::size_t body_begin, body_end;
  };
  std::vector<RawSection> sections;

  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (line.substr(0, 3) != "###") {
      if (sections.empty() && !is_blank(line)) {
        throw ParseError(ParseErrorKind::missing_description, i + 1,
                         "content before any section heading");
      }
      continue;
    }
    std::string_view candidate = opts.lenient ? rstrip(line) : line;
    auto heading = classify_heading(candidate);
    if (!heading) {
      throw ParseError(ParseErrorKind::unknown_heading, i + 1, std::string(line));
    }
    if (!sections.empty()) sections.back().body_end = i;
    sections.push_back({*heading, i + 1, i + 1, lines.size()});
  }

  if (sections.empty() ||
      sections.front().heading.kind != SectionKind::description) {
    // First heading present but not Description, or no headings at all.
    std::size_t line = sections.empty() ? 1 : sections.front().heading_line;
    throw ParseError(ParseErrorKind::missing_description, line,
                     "document must open with the Description section");
  }

  LongCoTResponse resp;
  resp.raw_text = std::string(text);

  int last_rank = -1;
  int last_step = 0;
  for (const auto& sec : sections) {
    int rank = section_rank(sec.heading.kind);
    bool repeatable = sec.heading.kind == SectionKind::step;
    if (rank < last_rank || (rank == last_rank && !repeatable)) {
      throw ParseError(ParseErrorKind::misplaced_heading, sec.heading_line,
                       "section out of order or duplicated");
    }
    last_rank = rank;

    std::string body = join_body(lines, sec.body_begin, sec.body_end);
    switch (sec.heading.kind) {
      case SectionKind::description:
        resp.description = std::move(body);
        break;
      case SectionKind::rationale:
        resp.rationale = std::move(body);
        break;
      case SectionKind::step_marker:
        resp.step_marker = true;
        if (!body.empty()) {
          if (!opts.lenient) {
            throw ParseError(ParseErrorKind::unexpected_content, sec.heading_line + 1,
                             "the step-by-step marker carries no body text");
          }
          // Lenient mode folds marker body into the first step's preamble.
          resp.steps.push_back({0, std::move(body)});
        }
        break;
      case SectionKind::step: {
        int expected = last_step + 1;
        if (sec.heading.step_index != expected) {
          throw ParseError(ParseErrorKind::non_contiguous_steps, sec.heading_line,
                           "expected Step " + std::to_string(expected) + ", found Step " +
                               std::to_string(sec.heading.step_index));
        }
        last_step = sec.heading.step_index;
        if (!resp.steps.empty() && resp.steps.back().index == 0) {
          // Attach a lenient-mode marker preamble to this first step.
          resp.steps.back().index = sec.heading.step_index;
          resp.steps.back().text += body.empty() ? "" : "\n" + body;
        } else {
          resp.steps.push_back({sec.heading.step_index, std::move(body)});
        }
        break;
      }
      case SectionKind::conclusion:
        resp.conclusion = std::move(body);
        break;
    }
  }

  if (section_rank(sections.back().heading.kind) != section_rank(SectionKind::conclusion)) {
    throw ParseError(ParseErrorKind::missing_conclusion, lines.size(),
                     "document must end with the In Conclusion section");
  }
  if (!resp.steps.empty() && resp.steps.back().index == 0) {
    throw ParseError(ParseErrorKind::non_contiguous_steps, lines.size(),
                     "marker preamble without any step section");
  }

  auto [desc, reason] = segment(resp);
  resp.desc_segment = std::move(desc);
  resp.reason_segment = std::move(reason);
  return resp;
}

std::pair<std::string, std::string> segment(const LongCoTResponse& resp) {
  std::string reason;
  auto append = [&reason](const std::string& part) {
    if (part.empty()) return;
    if (!reason.empty()) reason += '\n';
    reason += part;
  };
  append(resp.rationale);
  for (const auto& step : resp.steps) append(step.text);
  append(resp.conclusion);
  return {resp.description, reason};
}

void validate(const LongCoTResponse& resp) {
  auto check_body = [](const std::string& body, const char* name) {
    if (body_has_heading_line(body)) {
      throw ValidationError(std::string("InvariantViolation: ") + name +
                            " body contains a heading line");
    }
    if (!body.empty()) {
      auto lines = split_lines(body);
      if (is_blank(lines.front()) || is_blank(lines.back())) {
        throw ValidationError(std::string("InvariantViolation: ") + name +
                              " body has leading or trailing blank lines");
      }
    }
  };
  check_body(resp.description, "description");
  check_body(resp.rationale, "rationale");
  check_body(resp.conclusion, "conclusion");
  for (std::size_t i = 0; i < resp.steps.size(); ++i) {
    if (resp.steps[i].index != static_cast<int>(i) + 1) {
      throw ValidationError("InvariantViolation: step indices must be contiguous from 1");
    }
    check_body(resp.steps[i].text, "step");
  }
  if (resp.desc_segment != resp.description) {
    throw ValidationError("InvariantViolation: desc_segment does not match description");
  }
  auto [desc, reason] = segment(resp);
  (void)desc;
  if (resp.reason_segment != reason) {
    throw ValidationError("InvariantViolation: reason_segment does not match sections");
  }
}

std::string render_longcot(const LongCoTResponse& resp) {
  validate(resp);
  std::string out;
  auto emit = [&out](std::string_view heading, const std::string& body) {
    if (!out.empty()) out += '\n';
    out += heading;
    out += '\n';
    if (!body.empty()) {
      out += body;
      out += '\n';
    }
  };
  emit(kDescriptionHeading, resp.description);
  if (!resp.rationale.empty()) emit(kRationaleHeading, resp.rationale);
  if (resp.step_marker) emit(kStepMarkerHeading, "");
  for (const auto& step : resp.steps) {
    emit(std::string(kStepPrefix) + std::to_string(step.index), step.text);
  }
  emit(kConclusionHeading, resp.conclusion);
  return out;
}

std::vector<ConclusionValue> extract_length_values(std::string_view text) {
  std::vector<ConclusionValue> out;
  std::size_t i = 0;
  auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  auto is_alpha = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
  };
  while (i < text.size()) {
    if (!is_digit(text[i]) && text[i] != '.') {
      ++i;
      continue;
    }
    // Numbers embedded in identifiers ("region1") are not measurements.
    if (i > 0 && (is_alpha(text[i - 1]) || is_digit(text[i - 1]))) {
      while (i < text.size() && (is_digit(text[i]) || text[i] == '.')) ++i;
      continue;
    }
    std::size_t num_begin = i;
    bool negative = false;
    if (i > 0 && (text[i - 1] == '-' || text[i - 1] == '+') &&
        (i < 2 || !is_digit(text[i - 2]))) {
      negative = text[i - 1] == '-';
      num_begin = i - 1;
    }
    std::size_t j = i;
    while (j < text.size() && is_digit(text[j])) ++j;
    int decimals = 0;
    if (j < text.size() && text[j] == '.' && j + 1 < text.size() && is_digit(text[j + 1])) {
      std::size_t frac = ++j;
      while (j < text.size() && is_digit(text[j])) ++j;
      decimals = static_cast<int>(j - frac);
    }
    if (j == i) {  // a lone '.'
      ++i;
      continue;
    }
    std::size_t num_end = j;
    // Optional whitespace, then a unit word.
    std::size_t k = num_end;
    while (k < text.size() && (text[k] == ' ' || text[k] == '\t')) ++k;
    std::size_t unit_begin = k;
    while (k < text.size() && is_alpha(text[k])) ++k;
    i = num_end;
    if (k == unit_begin) continue;
    if (k < text.size() && is_digit(text[k])) continue;  // e.g. "3x4" oddities
    std::string unit_word(text.substr(unit_begin, k - unit_begin));
    std::transform(unit_word.begin(), unit_word.end(), unit_word.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    auto it = unit_lexicon().find(unit_word);
    if (it == unit_lexicon().end()) continue;

    double raw = std::stod(std::string(text.substr(num_begin, num_end - num_begin)));
    (void)negative;
    ConclusionValue v;
    v.raw_value = raw;
    v.unit = it->second.canonical;
    v.value_meters = raw * it->second.to_meters;
    v.begin = num_begin;
    v.end = num_end;
    v.decimals = decimals;
    out.push_back(v);
    i = k;
  }
  return out;
}

std::vector<ConclusionValue> extract_conclusion_values(const LongCoTResponse& resp) {
  return extract_length_values(resp.conclusion);
}

std::optional<double> parse_length(const std::string& text) {
  auto values = extract_length_values(text);
  if (!values.empty()) return values.front().value_meters;
  try {
    std::size_t consumed = 0;
    double bare = std::stod(text, &consumed);
    // Only a bare number (plus whitespace) defaults to meters.
    for (std::size_t i = consumed; i < text.size(); ++i) {
      if (!std::isspace(static_cast<unsigned char>(text[i]))) return std::nullopt;
    }
    return bare;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

Section parse_section(std::string_view text, ParseOptions opts) {
  auto lines = split_lines(text);
  if (lines.empty()) {
    throw ParseError(ParseErrorKind::unknown_heading, 0, "empty section fragment");
  }
  std::string_view first = opts.lenient ? rstrip(lines[0]) : lines[0];
  auto heading = classify_heading(first);
  if (!heading) {
    throw ParseError(ParseErrorKind::unknown_heading, 1, std::string(lines[0]));
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].substr(0, 3) == "###") {
      throw ParseError(ParseErrorKind::misplaced_heading, i + 1,
                       "section fragment contains more than one heading");
    }
  }
  Section sec;
  sec.kind = heading->kind;
  sec.step_index = heading->step_index;
  sec.body = join_body(lines, 1, lines.size());
  if (sec.kind == SectionKind::step_marker && !sec.body.empty() && !opts.lenient) {
    throw ParseError(ParseErrorKind::unexpected_content, 2,
                     "the step-by-step marker carries no body text");
  }
  return sec;
}

}  // namespace traceopt::longcot
