#ifndef SAUP_TOKENIZER_HPP
#define SAUP_TOKENIZER_HPP

#include <string>
#include <vector>

#include "saup/error.hpp"

namespace saup {

// Fixed 64-word vocabulary shared by every model in this repo.
// Id 0 is <eos>; ids 1..63 are lowercase words. Tokenization is
// case-insensitive whitespace splitting; unknown words throw.
class Tokenizer {
 public:
  static constexpr int kVocabSize = 64;
  static constexpr int kEosId = 0;

  Tokenizer();

  int vocab_size() const { return kVocabSize; }
  int eos_id() const { return kEosId; }

  // Splits on whitespace, lowercases, maps each word to its id.
  // Throws VocabularyError on a word outside the vocabulary.
  std::vector<int> encode(const std::string& text) const;

  // Joins words with single spaces; <eos> renders as "<eos>".
  // Throws VocabularyError on an id outside [0, 63].
  std::string decode(const std::vector<int>& ids) const;

  const std::string& word(int id) const;
  int id(const std::string& word) const;
  bool contains(const std::string& word) const;

 private:
  std::vector<std::string> words_;
};

// The shared tokenizer instance (construction is cheap but this keeps the
// table in one place).
const Tokenizer& tokenizer();

}  // namespace saup

#endif  // SAUP_TOKENIZER_HPP
