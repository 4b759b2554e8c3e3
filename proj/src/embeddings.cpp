// SPDX-License-Identifier: Apache-2.0
#include "genre/embeddings.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "genre/binary_io.hpp"
#include "genre/error.hpp"

namespace genre {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_real(std::string_view field, std::size_t line_no) {
  const std::string s(field);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
    throw FormatError("embeddings line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  return v;
}

EmbeddingMatrix finish(std::vector<std::optional<std::vector<double>>> rows, std::size_t dim, Rng& rng,
                       bool trainable) {
  EmbeddingMatrix out;
  out.trainable = trainable;
  std::vector<double> values(rows.size() * dim, 0.0);
  for (std::size_t id = 1; id < rows.size(); ++id) {
    double* dst = values.data() + id * dim;
    if (rows[id]) {
      std::copy(rows[id]->begin(), rows[id]->end(), dst);
      ++out.found;
    } else {
      for (std::size_t j = 0; j < dim; ++j) dst[j] = rng.uniform(-kUnknownInitRange, kUnknownInitRange);
      ++out.missing;
    }
  }
  out.table = trainable ? Tensor::parameter({rows.size(), dim}, std::move(values))
                        : Tensor::constant({rows.size(), dim}, std::move(values));
  return out;
}

}  // namespace

EmbeddingMatrix parse_embeddings(std::string_view text, const Vocab& vocab, Rng& rng,
                                 std::size_t expected_dim, bool trainable) {
  std::size_t line_no = 0, start = 0;
  auto next_line = [&](std::string_view& line) {
    while (start < text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      line = text.substr(start, end - start);
      start = end + 1;
      ++line_no;
      if (!split_ws(line).empty()) return true;
    }
    return false;
  };

  std::string_view line;
  if (!next_line(line)) throw FormatError("embeddings: empty file");
  const auto header = split_ws(line);
  if (header.size() != 2) {
    throw FormatError("embeddings line " + std::to_string(line_no) + ": header must be '<count> <dim>'");
  }
  const double declared_count = parse_real(header[0], line_no);
  const double declared_dim = parse_real(header[1], line_no);
  if (declared_count < 0 || declared_dim < 1 || declared_count != std::floor(declared_count) ||
      declared_dim != std::floor(declared_dim)) {
    throw FormatError("embeddings line " + std::to_string(line_no) + ": invalid header");
  }
  const auto count = static_cast<std::size_t>(declared_count);
  const auto dim = static_cast<std::size_t>(declared_dim);
  if (dim != expected_dim) {
    throw FormatError("embeddings line " + std::to_string(line_no) + ": declared dimension " +
                      std::to_string(dim) + ", expected " + std::to_string(expected_dim));
  }

  std::vector<std::optional<std::vector<double>>> rows(vocab.size());
  std::size_t seen = 0;
  while (seen < count && next_line(line)) {
    const auto fields = split_ws(line);
    if (fields.size() != dim + 1) {
      throw FormatError("embeddings line " + std::to_string(line_no) + ": expected " +
                        std::to_string(dim + 1) + " fields, found " + std::to_string(fields.size()));
    }
    ++seen;
    const std::string token(fields[0]);
    std::vector<double> vec(dim);
    for (std::size_t j = 0; j < dim; ++j) vec[j] = parse_real(fields[j + 1], line_no);
    if (!vocab.contains(token)) continue;
    auto& slot = rows[static_cast<std::size_t>(vocab.id(token))];
    if (!slot) slot = std::move(vec);
  }
  if (seen < count) {
    throw FormatError("embeddings: header declares " + std::to_string(count) + " vectors, file holds " +
                      std::to_string(seen));
  }
  return finish(std::move(rows), dim, rng, trainable);
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const Vocab& vocab, Rng& rng,
                                std::size_t expected_dim, bool trainable) {
  const std::string text = read_file_text(path);
  try {
    return parse_embeddings(text, vocab, rng, expected_dim, trainable);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

EmbeddingMatrix random_embeddings(const Vocab& vocab, std::size_t dim, Rng& rng, bool trainable) {
  return finish(std::vector<std::optional<std::vector<double>>>(vocab.size()), dim, rng, trainable);
}

}  // namespace genre
