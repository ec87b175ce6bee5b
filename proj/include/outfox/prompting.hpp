#pragma once

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "outfox/corpus.hpp"
#include "outfox/error.hpp"

namespace outfox {

// Separator between prompt blocks. Golden prompt files pin this value.
inline constexpr std::string_view kBlockSeparator = "\n";

inline constexpr std::string_view kDetectorInstruction =
    "Please classify whether the text is generated by a human or a Language Model (LM).";

inline constexpr std::string_view kAttackDescription =
    "Here are the results of detecting whether each essay from each problem statement is "
    "generated by a Human or a Language Model (LM)";

// "{N}" is replaced by the word budget.
inline constexpr std::string_view kAttackInstruction =
    "Given the following problem statement, please write an essay detected as Human in {N} "
    "words with a clear opinion";

struct DetectorExample {
  std::string essay;
  Label label = Label::Human;
  // True for attacker-generated essays (label is still LM).
  bool attacked = false;
  // Problem the essay belongs to, for provenance only.
  std::string problem_id;

  bool operator==(const DetectorExample&) const = default;
};

struct DetectorContext {
  std::vector<DetectorExample> examples;
  std::string instruction{kDetectorInstruction};
};

struct AttackExample {
  std::string problem_statement;
  Label predicted = Label::LM;
  std::string essay;
  std::string problem_id;

  bool operator==(const AttackExample&) const = default;
};

struct AttackContext {
  std::vector<AttackExample> examples;
  std::string description{kAttackDescription};
  std::string instruction{kAttackInstruction};
  std::int64_t word_budget = 0;
};

inline std::string render_detector_prompt(const DetectorContext& ctx, std::string_view target_essay) {
  std::string out = ctx.instruction;
  for (const auto& ex : ctx.examples) {
    out += kBlockSeparator;
    out += "Text: ";
    out += ex.essay;
    out += " Answer: ";
    out += to_string(ex.label);
  }
  out += kBlockSeparator;
  out += "Text: ";
  out += target_essay;
  out += ". Answer: ";
  return out;
}

inline std::string substitute_word_budget(std::string_view instruction, std::int64_t n) {
  static constexpr std::string_view placeholder = "{N}";
  std::string out;
  std::size_t pos = 0;
  while (true) {
    auto hit = instruction.find(placeholder, pos);
    if (hit == std::string_view::npos) break;
    out.append(instruction.substr(pos, hit - pos));
    out += std::to_string(n);
    pos = hit + placeholder.size();
  }
  out.append(instruction.substr(pos));
  return out;
}

// The target block always requests the Human label explicitly.
inline std::string render_attacker_prompt(const AttackContext& ctx, std::string_view problem) {
  std::string out = ctx.description;
  for (const auto& ex : ctx.examples) {
    out += kBlockSeparator;
    out += "Problem Statement: ";
    out += ex.problem_statement;
    out += ". Answer: ";
    out += to_string(ex.predicted);
    out += ". Essay: ";
    out += ex.essay;
  }
  out += kBlockSeparator;
  out += substitute_word_budget(ctx.instruction, ctx.word_budget);
  out += kBlockSeparator;
  out += "Problem Statement: ";
  out += problem;
  out += ". Answer: Human. Essay: ";
  return out;
}

// First marker wins: "human" -> Human, "lm" / "language model" -> LM.
// Matching is case-insensitive on word boundaries.
inline Label parse_label(std::string_view completion) {
  std::string lower(completion.size(), '\0');
  for (std::size_t i = 0; i < completion.size(); ++i)
    lower[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(completion[i])));

  auto is_word = [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return u >= 0x80 || std::isalnum(u) || c == '_';
  };
  struct Marker {
    std::string_view text;
    Label label;
  };
  static constexpr Marker markers[] = {
      {"human", Label::Human}, {"lm", Label::LM}, {"language model", Label::LM}};

  std::size_t best_pos = std::string::npos;
  Label best = Label::Human;
  for (const auto& m : markers) {
    std::size_t pos = 0;
    while ((pos = lower.find(m.text, pos)) != std::string::npos) {
      const bool left_ok = pos == 0 || !is_word(lower[pos - 1]);
      const std::size_t end = pos + m.text.size();
      const bool right_ok = end == lower.size() || !is_word(lower[end]);
      if (left_ok && right_ok) break;
      ++pos;
    }
    if (pos != std::string::npos && pos < best_pos) {
      best_pos = pos;
      best = m.label;
    }
  }
  if (best_pos == std::string::npos)
    throw UnparseableLabelError("no label marker in completion: '" +
                                std::string(completion.substr(0, 80)) + "'");
  return best;
}

}  // namespace outfox
