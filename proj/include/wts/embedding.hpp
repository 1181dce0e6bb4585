// SPDX-License-Identifier: Apache-2.0
#pragma once

// Embedding datasets: image features with observed (and optionally true)
// labels plus one text prototype per class. Stored as float32 on disk in the
// WTSEMB1 layout, held as double in memory.
//
//   magic "WTSEMB1\0" | u32 N | u32 D | u32 C | u8 has_true_labels
//   N*D f32 image embeddings (row-major) | N u32 observed labels
//   [N u32 true labels] | C*D f32 text embeddings
//   C x (u16 length + UTF-8 class name)
//
// All integers and floats are little-endian.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wts/binary_io.hpp"
#include "wts/error.hpp"
#include "wts/matrix.hpp"
#include "wts/random.hpp"

namespace wts {

inline constexpr std::string_view kEmbeddingMagic{"WTSEMB1\0", 8};

struct EmbeddingDataset {
  Matrix image_embeddings;  ///< N x D
  Labels observed_labels;
  std::optional<Labels> true_labels;
  Matrix text_embeddings;  ///< C x D
  std::vector<std::string> class_names;

  std::size_t size() const { return image_embeddings.rows(); }
  std::size_t dim() const { return image_embeddings.cols(); }
  std::size_t classes() const { return text_embeddings.rows(); }

  void validate() const {
    if (size() == 0) throw Error("empty dataset");
    if (dim() < 2) throw Error("embedding dimension must be at least 2");
    if (classes() < 2) throw Error("dataset needs at least 2 classes");
    if (text_embeddings.cols() != dim()) throw Error("text and image embedding dimensions differ");
    if (class_names.size() != classes()) throw Error("class name count does not match C");
    if (observed_labels.size() != size()) throw Error("observed label count does not match N");
    if (true_labels && true_labels->size() != size()) throw Error("true label count does not match N");
    if (!all_finite(image_embeddings.data())) throw Error("non-finite value (NaN/Inf) in image embeddings");
    if (!all_finite(text_embeddings.data())) throw Error("non-finite value (NaN/Inf) in text embeddings");
    for (Label y : observed_labels)
      if (y >= classes()) throw Error("label out of range: observed label " + std::to_string(y));
    if (true_labels)
      for (Label y : *true_labels)
        if (y >= classes()) throw Error("label out of range: true label " + std::to_string(y));
    for (std::size_t c = 0; c < classes(); ++c)
      if (norm2(text_embeddings.row(c)) == 0.0) throw Error("text prototype " + std::to_string(c) + " has zero norm");
  }

  /// Subset of samples by index; prototypes and names are shared.
  EmbeddingDataset select(std::span<const std::size_t> idx) const {
    EmbeddingDataset out{gather_rows(image_embeddings, idx), Labels(idx.size()), std::nullopt, text_embeddings,
                         class_names};
    for (std::size_t i = 0; i < idx.size(); ++i) out.observed_labels[i] = observed_labels[idx[i]];
    if (true_labels) {
      Labels t(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) t[i] = (*true_labels)[idx[i]];
      out.true_labels = std::move(t);
    }
    return out;
  }
};

/// Scales every row to unit L2 norm.
inline Matrix normalize_rows(Matrix m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double n = norm2(row);
    if (n == 0.0) throw Error("normalize_rows: row " + std::to_string(r) + " is zero");
    for (double& v : row) v /= n;
  }
  return m;
}

// --- binary format ---------------------------------------------------------

inline std::string serialize_dataset(const EmbeddingDataset& ds) {
  ds.validate();
  io::ByteWriter w;
  w.raw(kEmbeddingMagic);
  w.u32(static_cast<std::uint32_t>(ds.size()));
  w.u32(static_cast<std::uint32_t>(ds.dim()));
  w.u32(static_cast<std::uint32_t>(ds.classes()));
  w.u8(ds.true_labels ? 1 : 0);
  for (double v : ds.image_embeddings.data()) w.f32(static_cast<float>(v));
  for (Label y : ds.observed_labels) w.u32(static_cast<std::uint32_t>(y));
  if (ds.true_labels)
    for (Label y : *ds.true_labels) w.u32(static_cast<std::uint32_t>(y));
  for (double v : ds.text_embeddings.data()) w.f32(static_cast<float>(v));
  for (const auto& name : ds.class_names) {
    if (name.size() > UINT16_MAX) throw Error("class name too long: " + name.substr(0, 32));
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.raw(name);
  }
  return w.bytes();
}

inline EmbeddingDataset parse_dataset(std::string_view bytes) {
  io::ByteReader r(bytes);
  if (bytes.size() < kEmbeddingMagic.size() || bytes.substr(0, kEmbeddingMagic.size()) != kEmbeddingMagic)
    throw Error("bad magic: not a WTSEMB1 embedding file");
  r.raw(kEmbeddingMagic.size(), "magic");
  const std::size_t n = r.get<std::uint32_t>("header");
  const std::size_t d = r.get<std::uint32_t>("header");
  const std::size_t c = r.get<std::uint32_t>("header");
  const std::uint8_t has_true = r.get<std::uint8_t>("header");
  if (n == 0) throw Error("empty dataset");
  if (d < 2) throw Error("embedding dimension must be at least 2");
  if (c < 2) throw Error("dataset needs at least 2 classes");
  if (has_true > 1) throw Error("corrupt header: has_true_labels must be 0 or 1");
  const std::size_t payload = n * d * 4 + n * 4 * (1 + has_true) + c * d * 4;
  if (r.remaining() < payload) throw Error("truncated file: header declares more data than present");

  EmbeddingDataset ds;
  auto read_floats = [&](Matrix& m, std::size_t rows, const char* what) {
    m = Matrix(rows, d);
    for (double& v : m.data()) v = r.get<float>(what);
  };
  auto read_labels = [&](Labels& out, const char* what) {
    out.resize(n);
    for (auto& y : out) {
      y = r.get<std::uint32_t>(what);
      if (y >= c) throw Error(std::string("label out of range: ") + what + " " + std::to_string(y));
    }
  };
  read_floats(ds.image_embeddings, n, "image embeddings");
  if (!all_finite(ds.image_embeddings.data())) throw Error("non-finite value (NaN/Inf) in image embeddings");
  read_labels(ds.observed_labels, "observed label");
  if (has_true) {
    Labels t;
    read_labels(t, "true label");
    ds.true_labels = std::move(t);
  }
  read_floats(ds.text_embeddings, c, "text embeddings");
  if (!all_finite(ds.text_embeddings.data())) throw Error("non-finite value (NaN/Inf) in text embeddings");
  ds.class_names.reserve(c);
  for (std::size_t k = 0; k < c; ++k) {
    const std::size_t len = r.get<std::uint16_t>("class name length");
    ds.class_names.emplace_back(r.raw(len, "class name"));
  }
  if (r.remaining() != 0) throw Error("unexpected trailing bytes after class names");
  ds.validate();
  return ds;
}

inline EmbeddingDataset load_dataset(const std::string& path) { return parse_dataset(io::read_file(path)); }

inline void save_dataset(const std::string& path, const EmbeddingDataset& ds) {
  io::write_file(path, serialize_dataset(ds));
}

// --- synthetic generator ---------------------------------------------------

/// Desk-scale stand-in for frozen vision-language features. Class centroids
/// lie on the unit sphere; teacher_quality blends each text prototype
/// between its centroid (1.0) and an unrelated random direction.
struct SyntheticSpec {
  std::size_t classes = 10;
  std::size_t dim = 32;
  std::size_t samples_per_class = 500;
  double cluster_spread = 0.1;
  double teacher_quality = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (classes < 2) throw Error("synthetic spec: classes must be >= 2");
    if (dim < 2) throw Error("synthetic spec: dim must be >= 2");
    if (samples_per_class == 0) throw Error("synthetic spec: samples_per_class must be positive");
    if (!(cluster_spread > 0.0)) throw Error("synthetic spec: cluster_spread must be positive");
    if (!(teacher_quality > 0.0 && teacher_quality <= 1.0))
      throw Error("synthetic spec: teacher_quality must lie in (0, 1]");
  }
};

namespace detail {

inline std::vector<double> random_unit(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(dim);
  double n = 0.0;
  do {
    for (double& x : v) x = g(rng);
    n = norm2(v);
  } while (n == 0.0);
  for (double& x : v) x /= n;
  return v;
}

// Values are snapped to float32 so a generated dataset equals its own
// saved-and-reloaded image.
inline void snap_to_float(Matrix& m) {
  for (double& v : m.data()) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace detail

struct SyntheticSplit {
  EmbeddingDataset train;
  EmbeddingDataset test;
};

/// Train and test sets drawn from the same centroids and prototypes; the
/// test set has test_per_class clean samples per class (balanced).
inline SyntheticSplit generate_synthetic_split(const SyntheticSpec& spec, std::size_t test_per_class) {
  spec.validate();
  const std::size_t C = spec.classes, D = spec.dim;
  Rng world(spec.seed);
  Matrix centroids(C, D), text(C, D);
  for (std::size_t c = 0; c < C; ++c) {
    const auto mu = detail::random_unit(D, world);
    std::copy(mu.begin(), mu.end(), centroids.row(c).begin());
  }
  for (std::size_t c = 0; c < C; ++c) {
    const auto r = detail::random_unit(D, world);
    for (std::size_t k = 0; k < D; ++k)
      text(c, k) = spec.teacher_quality * centroids(c, k) + (1.0 - spec.teacher_quality) * r[k];
  }
  text = normalize_rows(std::move(text));
  detail::snap_to_float(text);

  std::vector<std::string> names(C);
  for (std::size_t c = 0; c < C; ++c) names[c] = "class_" + std::to_string(c);

  auto draw = [&](std::size_t per_class, Rng& rng) {
    std::normal_distribution<double> g(0.0, spec.cluster_spread);
    Matrix images(C * per_class, D);
    Labels labels(C * per_class);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t s = 0; s < per_class; ++s) {
        const std::size_t i = c * per_class + s;
        labels[i] = c;
        for (std::size_t k = 0; k < D; ++k) images(i, k) = centroids(c, k) + g(rng);
      }
    }
    images = normalize_rows(std::move(images));
    detail::snap_to_float(images);
    return EmbeddingDataset{std::move(images), labels, labels, text, names};
  };

  Rng train_rng(spec.seed ^ 0x9E3779B97F4A7C15ULL);
  Rng test_rng(spec.seed ^ 0xC2B2AE3D27D4EB4FULL);
  SyntheticSplit out{draw(spec.samples_per_class, train_rng), EmbeddingDataset{}};
  if (test_per_class > 0) out.test = draw(test_per_class, test_rng);
  return out;
}

inline EmbeddingDataset generate_synthetic(const SyntheticSpec& spec) {
  return generate_synthetic_split(spec, 0).train;
}

}  // namespace wts
