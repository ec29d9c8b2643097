#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>

#include "vulnres/error.hpp"
#include "vulnres/localization.hpp"
#include "vulnres/util/text.hpp"

namespace vulnres {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

template <typename Visit>
void for_each_token(std::string_view text, Visit&& visit) {
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    visit(std::string_view(token));
    if (token.find('_') != std::string::npos) {
      for (const auto& part : text::split(token, '_'))
        if (!part.empty() && part.size() != token.size()) visit(std::string_view(part));
    }
    token.clear();
  };
  for (char c : text) {
    if (text::is_ident_char(c)) {
      token += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      flush();
    }
  }
  flush();
}

}  // namespace

HashingEmbedder::HashingEmbedder(size_t dimension) : dimension_(dimension) {
  if (dimension_ == 0) throw Error(ErrorCode::EmbedderError, "embedding dimension must be positive");
}

std::vector<float> HashingEmbedder::embed_one(std::string_view text) const {
  std::vector<float> v(dimension_, 0.0f);
  for_each_token(text, [&](std::string_view token) {
    std::uint64_t h = fnv1a(token);
    v[h % dimension_] += (h >> 63) ? -1.0f : 1.0f;
  });
  return v;
}

EmbeddingBatch HashingEmbedder::embed(const std::vector<std::string>& texts) {
  EmbeddingBatch out;
  out.vectors.resize(texts.size());
  const auto n = static_cast<std::int64_t>(texts.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t i = 0; i < n; ++i) out.vectors[i] = embed_one(texts[i]);
  return out;
}

EmbeddingBatch HashingEmbedder::embed_serial(const std::vector<std::string>& texts) const {
  EmbeddingBatch out;
  for (const auto& t : texts) out.vectors.push_back(embed_one(t));
  return out;
}

double cosine_similarity(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::EmbedderError, "embedding dimensions differ");
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> score_chunks(const std::vector<float>& query, const std::vector<std::vector<float>>& chunks) {
  std::vector<double> scores(chunks.size());
  const auto n = static_cast<std::int64_t>(chunks.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) scores[i] = cosine_similarity(query, chunks[i]);
  return scores;
}

std::vector<double> score_chunks_serial(const std::vector<float>& query,
                                        const std::vector<std::vector<float>>& chunks) {
  std::vector<double> scores;
  scores.reserve(chunks.size());
  for (const auto& c : chunks) scores.push_back(cosine_similarity(query, c));
  return scores;
}

std::vector<Chunk> chunk_content(const std::string& file, std::string_view content, size_t chunk_lines) {
  if (chunk_lines == 0) throw Error(ErrorCode::InvalidConfig, "chunk size must be positive");
  std::vector<Chunk> out;
  const auto starts = text::line_starts(content);
  const size_t total = text::split_lines(content).size();
  for (size_t first = 0; first < total; first += chunk_lines) {
    size_t last = std::min(total, first + chunk_lines);
    size_t begin = starts[first];
    size_t end = last < starts.size() ? starts[last] : content.size();
    out.push_back(Chunk{file, out.size(), std::string(content.substr(begin, end - begin)),
                        LineRange{static_cast<int>(first + 1), static_cast<int>(last)}});
  }
  return out;
}

std::vector<ScoredFile> rank_files(const std::vector<Chunk>& chunks, const std::vector<double>& scores) {
  if (chunks.size() != scores.size()) throw Error(ErrorCode::EmbedderError, "one score per chunk expected");
  std::map<std::string, double> best;
  for (size_t i = 0; i < chunks.size(); ++i) {
    auto [it, inserted] = best.emplace(chunks[i].file, scores[i]);
    if (!inserted) it->second = std::max(it->second, scores[i]);
  }
  std::vector<ScoredFile> out;
  for (const auto& [file, score] : best) out.push_back({file, score});
  std::stable_sort(out.begin(), out.end(), [](const ScoredFile& a, const ScoredFile& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.file < b.file;
  });
  return out;
}

}  // namespace vulnres
