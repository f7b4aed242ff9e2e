#include "saup/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace saup {

namespace {

// 64 entries, id = index. Slices: [1,16] class names, [17,40] attack-target
// words, [41,58] prompt words, [59,63] filler.
const char* kWords[Tokenizer::kVocabSize] = {
    "<eos>",
    // class names
    "amber", "basalt", "coral", "dune", "ember", "fjord", "grove", "harbor",
    "islet", "juniper", "kelp", "lagoon", "meadow", "nectar", "onyx",
    "prairie",
    // target words
    "quartz", "raven", "saddle", "tulip", "umbra", "violet", "walnut", "xenon",
    "yarrow", "zephyr", "beacon", "cedar", "delta", "falcon", "garnet",
    "hazel", "iris", "jade", "lotus", "maple", "nickel", "opal", "pearl",
    "slate",
    // prompt words
    "describe", "this", "image", "what", "is", "in", "the", "picture", "scene",
    "shown", "tell", "me", "about", "summarize", "content", "view", "photo",
    "happening",
    // filler
    "north", "south", "east", "west", "zero"};

std::string lowercase(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

Tokenizer::Tokenizer() : words_(kWords, kWords + kVocabSize) {}

std::vector<int> Tokenizer::encode(const std::string& text) const {
  std::vector<int> ids;
  std::istringstream in(text);
  std::string word;
  while (in >> word) ids.push_back(id(lowercase(word)));
  return ids;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += word(ids[i]);
  }
  return out;
}

const std::string& Tokenizer::word(int id) const {
  if (id < 0 || id >= kVocabSize)
    throw VocabularyError("token id " + std::to_string(id) +
                          " outside [0," + std::to_string(kVocabSize - 1) + "]");
  return words_[id];
}

int Tokenizer::id(const std::string& word) const {
  for (int i = 0; i < kVocabSize; ++i)
    if (words_[i] == word) return i;
  throw VocabularyError("word '" + word + "' not in vocabulary");
}

bool Tokenizer::contains(const std::string& word) const {
  for (int i = 0; i < kVocabSize; ++i)
    if (words_[i] == word) return true;
  return false;
}

const Tokenizer& tokenizer() {
  static const Tokenizer instance;
  return instance;
}

}  // namespace saup
