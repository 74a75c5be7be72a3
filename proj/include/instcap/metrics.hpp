// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <string>
#include <vector>

#include "instcap/error.hpp"
#include "instcap/model_adapter.hpp"
#include "instcap/tensor.hpp"
#include "instcap/text.hpp"
#include "instcap/video_ingest.hpp"

namespace instcap {

/// Weight for one layer, broadcast over (height, width, channel). Each
/// dimension is either 1 or equal to the latent's.
struct WeightTensor {
  std::array<uint64_t, 3> shape{1, 1, 1};
  std::vector<double> values{1.0};

  static WeightTensor scalar(double w) { return {{1, 1, 1}, {w}}; }
};

struct LayerWeights {
  std::vector<WeightTensor> layers;

  static LayerWeights unit(size_t n_layers = 1) { return {std::vector<WeightTensor>(n_layers, WeightTensor::scalar(1.0))}; }
  static LayerWeights uniform(size_t n_layers, double w) { return {std::vector<WeightTensor>(n_layers, WeightTensor::scalar(w))}; }
};

namespace detail {

inline void check_latent_pair(const LatentTensor& a, const LatentTensor& b) {
  if (a.shape.size() != 5) throw Error(ErrorKind::ShapeMismatch, "latents must have rank 5 (layer, time, height, width, channel)");
  if (a.shape != b.shape) throw Error(ErrorKind::ShapeMismatch, "latent shapes differ");
  if (a.values.size() != LatentTensor::element_count(a.shape) || b.values.size() != a.values.size())
    throw Error(ErrorKind::ShapeMismatch, "latent value count does not match its shape");
}

inline void check_weights(const LayerWeights& w, const std::vector<uint64_t>& shape) {
  if (w.layers.size() != shape[0])
    throw Error(ErrorKind::ShapeMismatch, "need one weight per layer: " + std::to_string(shape[0]) + " layers, " +
                                              std::to_string(w.layers.size()) + " weights");
  for (const auto& wl : w.layers) {
    size_t n = 1;
    for (int d = 0; d < 3; ++d) {
      if (wl.shape[d] != 1 && wl.shape[d] != shape[2 + d])
        throw Error(ErrorKind::ShapeMismatch, "layer weight does not broadcast over (height, width, channel)");
      n *= wl.shape[d];
    }
    if (wl.values.size() != n) throw Error(ErrorKind::ShapeMismatch, "layer weight value count does not match its shape");
    for (double v : wl.values)
      if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorKind::PreconditionError, "layer weights must be finite and non-negative");
  }
}

}  // namespace detail

/// Weighted squared latent distance: the sum over layers, time steps and
/// spatial positions of ||w_l * (a - b)||^2, the norm running over channels.
inline double vae_distance(const LatentTensor& z_gt, const LatentTensor& z_rec, const LayerWeights& w = LayerWeights::unit()) {
  detail::check_latent_pair(z_gt, z_rec);
  detail::check_weights(w, z_gt.shape);
  const auto L = z_gt.shape[0], T = z_gt.shape[1], H = z_gt.shape[2], W = z_gt.shape[3], C = z_gt.shape[4];
  double sum = 0.0;
  size_t idx = 0;
  for (uint64_t l = 0; l < L; ++l) {
    const auto& wl = w.layers[l];
    for (uint64_t t = 0; t < T; ++t)
      for (uint64_t h = 0; h < H; ++h)
        for (uint64_t x = 0; x < W; ++x)
          for (uint64_t c = 0; c < C; ++c, ++idx) {
            const uint64_t wh = wl.shape[0] == 1 ? 0 : h, ww = wl.shape[1] == 1 ? 0 : x, wc = wl.shape[2] == 1 ? 0 : c;
            const double weight = wl.values[(wh * wl.shape[1] + ww) * wl.shape[2] + wc];
            const double d = weight * (static_cast<double>(z_gt.values[idx]) - static_cast<double>(z_rec.values[idx]));
            sum += d * d;
          }
  }
  if (!std::isfinite(sum)) throw Error(ErrorKind::PreconditionError, "latents contain non-finite values");
  return sum;
}

/// vae_distance divided by the element count.
inline double vae_distance_per_element(const LatentTensor& z_gt, const LatentTensor& z_rec,
                                       const LayerWeights& w = LayerWeights::unit()) {
  const double d = vae_distance(z_gt, z_rec, w);
  return z_gt.values.empty() ? 0.0 : d / static_cast<double>(z_gt.values.size());
}

inline const std::vector<std::string>& sentence_abbreviations() {
  static const std::vector<std::string> k{"mr.", "mrs.", "ms.", "dr.", "st.", "prof.", "jr.", "sr.", "vs.", "e.g.", "i.e.", "etc."};
  return k;
}

/// Splits at '.', '!' or '?' followed by whitespace and an uppercase letter,
/// or by the end of the text. A '.' ending a listed abbreviation does not split.
inline std::vector<std::string> split_sentences(const std::string& caption) {
  std::vector<std::string> out;
  const auto& s = caption;
  auto push = [&](size_t b, size_t e) {
    auto seg = text::trim(std::string_view(s).substr(b, e - b));
    if (!seg.empty()) out.push_back(std::move(seg));
  };
  size_t start = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c != '.' && c != '!' && c != '?') continue;
    size_t end = i + 1;
    while (end < s.size() && (s[end] == '.' || s[end] == '!' || s[end] == '?' || s[end] == '"' || s[end] == '\'' || s[end] == ')'))
      ++end;
    size_t next = end;
    while (next < s.size() && text::is_space(s[next])) ++next;
    bool boundary = next == s.size();
    if (!boundary && next > end && std::isupper(static_cast<unsigned char>(s[next]))) {
      boundary = true;
      if (c == '.' && end == i + 1) {
        size_t ws = i;
        while (ws > start && !text::is_space(s[ws - 1])) --ws;
        const auto word = text::to_lower(s.substr(ws, i + 1 - ws));
        for (const auto& a : sentence_abbreviations())
          if (word == a) boundary = false;
      }
    }
    if (boundary) {
      push(start, end);
      start = next;
    }
    i = end - 1;
  }
  if (start < s.size()) push(start, s.size());
  return out;
}

using SimilarityMatrix = std::vector<std::vector<double>>;

/// Mean over sentences of the mean similarity over frames.
inline double clip_senbysen(const SimilarityMatrix& m) {
  if (m.empty() || m.front().empty()) throw Error(ErrorKind::EmptyInput, "similarity matrix needs at least one sentence and one frame");
  const size_t t = m.front().size();
  // Means are taken about the first element so constant input comes back exactly.
  auto shifted_mean = [](const std::vector<double>& xs) {
    double d = 0.0;
    for (double x : xs) d += x - xs.front();
    return xs.front() + d / static_cast<double>(xs.size());
  };
  std::vector<double> rows;
  rows.reserve(m.size());
  for (const auto& row : m) {
    if (row.size() != t) throw Error(ErrorKind::ShapeMismatch, "similarity matrix rows differ in length");
    for (double v : row)
      if (!std::isfinite(v)) throw Error(ErrorKind::PreconditionError, "similarity matrix has non-finite values");
    rows.push_back(shifted_mean(row));
  }
  return shifted_mean(rows);
}

inline double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size() || a.empty()) throw Error(ErrorKind::ShapeMismatch, "embedding sizes differ");
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * b[i];
    na += double(a[i]) * a[i];
    nb += double(b[i]) * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / std::sqrt(na * nb);
}

/// Sentence-by-frame cosine similarities from the adapter's embeddings.
inline SimilarityMatrix similarity_matrix(const std::vector<std::string>& sentences, const FrameSequence& frames,
                                          ModelAdapter& adapter) {
  std::vector<std::vector<float>> image_emb;
  for (const auto& f : frames.frames) image_emb.push_back(adapter.embed_image(f.image));
  SimilarityMatrix m;
  for (const auto& s : sentences) {
    const auto te = adapter.embed_text(s);
    std::vector<double> row;
    for (const auto& ie : image_emb) row.push_back(cosine(te, ie));
    m.push_back(std::move(row));
  }
  return m;
}

}  // namespace instcap
