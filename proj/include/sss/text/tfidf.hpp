#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sss/error.hpp"
#include "sss/text/tokenize.hpp"
#include "sss/types.hpp"

namespace sss::text {

/// Uni- and bi-grams of a token list; bigrams are joined with a single space.
inline std::vector<std::string> ngrams(const TokenList& tokens, int max_n = 2) {
  std::vector<std::string> out;
  for (int n = 1; n <= max_n; ++n) {
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      std::string g = tokens[i];
      for (int k = 1; k < n; ++k) g += ' ' + tokens[i + k];
      out.push_back(std::move(g));
    }
  }
  return out;
}

/// TF-IDF over a frozen vocabulary of the top-F n-grams by raw corpus count.
///   tf  = raw count in the document
///   idf = ln((1 + n_docs) / (1 + df)) + 1
/// Rows are L2-normalized; rows with no vocabulary term stay zero.
class TfidfModel {
 public:
  explicit TfidfModel(std::size_t max_features = 100, int max_ngram = 2)
      : max_features_(max_features), max_ngram_(max_ngram) {}

  void fit(std::span<const std::string> texts) {
    std::unordered_map<std::string, std::size_t> corpus_count;
    std::unordered_map<std::string, std::size_t> doc_count;
    for (const auto& text : texts) {
      auto grams = ngrams(tokenize(text), max_ngram_);
      for (const auto& g : grams) ++corpus_count[g];
      std::sort(grams.begin(), grams.end());
      grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
      for (const auto& g : grams) ++doc_count[g];
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(corpus_count.begin(), corpus_count.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (ranked.size() > max_features_) ranked.resize(max_features_);

    vocabulary_.clear();
    df_.clear();
    column_.clear();
    for (const auto& [term, count] : ranked) {
      column_.emplace(term, vocabulary_.size());
      vocabulary_.push_back(term);
      df_.push_back(doc_count[term]);
    }
    n_docs_fit_ = texts.size();
    idf_.resize(vocabulary_.size());
    for (std::size_t j = 0; j < vocabulary_.size(); ++j) {
      idf_[j] = std::log((1.0 + static_cast<double>(n_docs_fit_)) / (1.0 + static_cast<double>(df_[j]))) + 1.0;
    }
    fitted_ = true;
  }

  Matrix transform(std::span<const std::string> texts) const {
    if (!fitted_) throw StateError("tfidf transform called before fit");
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(vocabulary_.size()));
    for (std::size_t i = 0; i < texts.size(); ++i) {
      for (const auto& g : ngrams(tokenize(texts[i]), max_ngram_)) {
        auto it = column_.find(g);
        if (it != column_.end()) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(it->second)) += 1.0;
      }
      auto row = out.row(static_cast<Eigen::Index>(i));
      for (Eigen::Index j = 0; j < row.size(); ++j) row(j) *= idf_[static_cast<std::size_t>(j)];
      const double norm = row.norm();
      if (norm > 0) row /= norm;
    }
    return out;
  }

  bool fitted() const { return fitted_; }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  const std::vector<std::size_t>& document_frequency() const { return df_; }
  std::size_t n_docs_fit() const { return n_docs_fit_; }

 private:
  std::size_t max_features_;
  int max_ngram_;
  bool fitted_ = false;
  std::vector<std::string> vocabulary_;
  std::vector<std::size_t> df_;
  std::vector<double> idf_;
  std::map<std::string, std::size_t> column_;
  std::size_t n_docs_fit_ = 0;
};

}  // namespace sss::text
