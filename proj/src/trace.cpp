#include "trajselect/trace.hpp"

#include <algorithm>
#include <cctype>

#include "trajselect/errors.hpp"
#include "trajselect/rng.hpp"

namespace trajselect {

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kBoxed = "\\boxed{";

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isspace(c) != 0;
  });
}

}  // namespace

std::string trim(const std::string& s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

std::pair<std::string, std::string> extract_think_span(
    const std::string& response_text) {
  const std::size_t open = response_text.find(kThinkOpen);
  if (open != std::string::npos) {
    const std::size_t body = open + kThinkOpen.size();
    const std::size_t close = response_text.find(kThinkClose, body);
    if (close != std::string::npos) {
      return {response_text.substr(body, close - body),
              response_text.substr(close + kThinkClose.size())};
    }
  }
  return {response_text, response_text};
}

std::vector<std::string> segment_steps(const std::string& trace_text) {
  std::vector<std::string> steps;
  std::size_t pos = 0;
  while (pos <= trace_text.size()) {
    const std::size_t next = trace_text.find("\n\n", pos);
    const std::size_t end = next == std::string::npos ? trace_text.size() : next;
    std::string segment = trace_text.substr(pos, end - pos);
    if (!segment.empty() && !is_blank(segment)) {
      steps.push_back(std::move(segment));
    }
    if (next == std::string::npos) break;
    pos = next + 2;
  }
  return steps;
}

std::vector<std::size_t> step_final_token_indices(
    const std::vector<int>& full_token_ids,
    const std::vector<std::string>& step_texts, const TokenizeFn& tokenize) {
  std::vector<std::size_t> indices;
  indices.reserve(step_texts.size());
  std::size_t cursor = 0;
  for (std::size_t s = 0; s < step_texts.size(); ++s) {
    const std::vector<int> needle = tokenize(step_texts[s]);
    if (needle.empty()) {
      throw StepAlignmentError("step " + std::to_string(s) +
                               " produced no tokens");
    }
    const auto it = std::search(full_token_ids.begin() +
                                    static_cast<std::ptrdiff_t>(cursor),
                                full_token_ids.end(), needle.begin(),
                                needle.end());
    if (it == full_token_ids.end()) {
      throw StepAlignmentError("step " + std::to_string(s) +
                               " not found in token stream");
    }
    const std::size_t begin =
        static_cast<std::size_t>(it - full_token_ids.begin());
    const std::size_t last = begin + needle.size() - 1;
    indices.push_back(last);
    cursor = last + 1;
  }
  return indices;
}

std::optional<std::string> extract_answer(const std::string& answer_text) {
  std::optional<std::string> result;
  std::size_t search = 0;
  while (true) {
    const std::size_t at = answer_text.find(kBoxed, search);
    if (at == std::string::npos) break;
    search = at + 1;
    // Scan with brace depth counting; an occurrence that never closes is
    // skipped.
    int depth = 1;
    const std::size_t body = at + kBoxed.size();
    for (std::size_t i = body; i < answer_text.size(); ++i) {
      const char c = answer_text[i];
      if (c == '{') {
        ++depth;
      } else if (c == '}') {
        --depth;
        if (depth == 0) {
          result = trim(answer_text.substr(body, i - body));
          break;
        }
      }
    }
  }
  return result;
}

HashTokenizer::HashTokenizer(int vocab_size) : vocab_size_(vocab_size) {
  if (vocab_size < 1) throw ConfigError("vocab_size must be >= 1");
}

std::vector<int> HashTokenizer::tokenize(const std::string& text) const {
  std::vector<int> ids;
  const auto push = [&](std::string_view token) {
    ids.push_back(static_cast<int>(rng::fnv1a(token) %
                                   static_cast<std::uint64_t>(vocab_size_)));
  };
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (std::isalnum(c)) {
      std::size_t j = i + 1;
      while (j < text.size() &&
             std::isalnum(static_cast<unsigned char>(text[j]))) {
        ++j;
      }
      push(std::string_view(text).substr(i, j - i));
      i = j;
    } else {
      push(std::string_view(text).substr(i, 1));
      ++i;
    }
  }
  return ids;
}

ReasoningTrace parse_trace(const std::string& response_text,
                           const HashTokenizer& tokenizer) {
  ReasoningTrace trace;
  trace.raw_text = response_text;
  auto [trace_text, answer_text] = extract_think_span(response_text);
  trace.answer_text = std::move(answer_text);

  const std::vector<std::string> texts = segment_steps(trace_text);
  if (texts.empty()) return trace;

  const std::vector<int> full_ids = tokenizer.tokenize(response_text);
  const std::vector<std::size_t> finals = step_final_token_indices(
      full_ids, texts,
      [&](const std::string& s) { return tokenizer.tokenize(s); });
  trace.steps.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    trace.steps.push_back(StepText{texts[i], finals[i]});
  }
  return trace;
}

}  // namespace trajselect
