#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace trajselect {

struct Query {
  std::string id;
  std::string text;
  std::string gold_answer;
};

struct StepText {
  std::string text;
  std::size_t final_token_index = 0;  // index into the full tokenized response
};

struct ReasoningTrace {
  std::string raw_text;  // full response as emitted by the sampler
  std::vector<StepText> steps;
  std::string answer_text;  // response body after the think span
};

struct TrajectoryRecord {
  std::string query_id;
  ReasoningTrace trace;
  std::vector<std::vector<double>> step_hiddens;  // one vector per step
  std::optional<std::string> extracted_answer;
  int outcome = 0;  // 1 iff the extracted answer matches the gold answer
};

// Splits a response into (trace_text, answer_text). The trace is the content
// between the first <think> and the first </think> after it; the answer is
// everything after that tag. With either tag missing the whole input plays
// both roles.
std::pair<std::string, std::string> extract_think_span(
    const std::string& response_text);

// Splits on "\n\n" and drops empty or whitespace-only segments.
std::vector<std::string> segment_steps(const std::string& trace_text);

using TokenizeFn = std::function<std::vector<int>(const std::string&)>;

// Locates each step's token subsequence in the full token stream and returns
// the index of its last token. Indices are strictly increasing. Throws
// StepAlignmentError when a step cannot be found at or after the previous
// step's end.
std::vector<std::size_t> step_final_token_indices(
    const std::vector<int>& full_token_ids,
    const std::vector<std::string>& step_texts, const TokenizeFn& tokenize);

// Content of the last balanced \boxed{...}, whitespace-trimmed. Brace depth
// is counted, so nested braces survive. Occurrences that never close are
// ignored.
std::optional<std::string> extract_answer(const std::string& answer_text);

std::string trim(const std::string& s);

// Whitespace-plus-punctuation tokenizer with hashed vocabulary ids: a token
// is a maximal alphanumeric run or a single other non-space character, and
// its id is a hash reduced modulo the vocabulary size.
class HashTokenizer {
 public:
  explicit HashTokenizer(int vocab_size);

  std::vector<int> tokenize(const std::string& text) const;
  int vocab_size() const { return vocab_size_; }

 private:
  int vocab_size_;
};

// Builds a ReasoningTrace from raw response text: think-span extraction,
// step segmentation, and token alignment with the given tokenizer.
ReasoningTrace parse_trace(const std::string& response_text,
                           const HashTokenizer& tokenizer);

}  // namespace trajselect
