#include "trustnet/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace trustnet {

namespace {

constexpr std::size_t kMagicSize = sizeof(kModelMagic) - 1;

class Writer {
 public:
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  template <typename Derived>
  void floats(const Eigen::DenseBase<Derived>& m) {
    // Row-major order regardless of the expression's storage.
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) u32(std::bit_cast<std::uint32_t>(m(i, j)));
    }
  }
  std::string take() { return std::move(out_); }
  void raw(const char* data, std::size_t n) { out_.append(data, n); }

 private:
  void le(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  MatrixF matrix(std::size_t rows, std::size_t cols) {
    MatrixF m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f32();
    return m;
  }

 private:
  std::uint64_t le(int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    }
    return v;
  }
  const std::string& bytes_;
  std::size_t pos_ = kMagicSize;
};

}  // namespace

std::string serialize_model(const TrainedModel& model) {
  const auto& p = model.params;
  const auto n = static_cast<std::uint32_t>(model.embeddings.rows());
  const auto d = static_cast<std::uint32_t>(model.embeddings.cols());
  const auto n_h = model.arch == Architecture::SimpleNN ? 0U : static_cast<std::uint32_t>(p.hidden());
  if (model.raw_ids.size() != n) throw std::invalid_argument("model raw-id table size mismatch");

  Writer w;
  w.raw(kModelMagic, kMagicSize);
  w.u32(n);
  w.u32(d);
  w.u32(n_h);
  w.floats(model.embeddings);
  if (n_h > 0) {
    w.floats(p.w_star);
    w.floats(p.w_plus);
    w.floats(p.b1);
    w.floats(p.u_out);
    w.floats(p.b2);
  } else {
    w.floats(VectorF::Zero(2));
  }
  for (std::uint32_t u = 0; u < n; ++u) {
    w.u64(static_cast<std::uint64_t>(model.raw_ids[u]));
    w.u64(u);
  }
  return w.take();
}

TrainedModel deserialize_model(const std::string& bytes) {
  if (bytes.size() < kMagicSize + 12 || std::memcmp(bytes.data(), kModelMagic, kMagicSize) != 0) {
    throw DataError("not a trust model file (bad magic)");
  }
  Reader r(bytes);
  const std::uint64_t n = r.u32();
  const std::uint64_t d = r.u32();
  const std::uint64_t n_h = r.u32();
  const std::uint64_t floats = n * d + 2 * n_h * d + n_h + 2 * n_h + 2;
  const std::uint64_t expected = kMagicSize + 12 + 4 * floats + 16 * n;
  if (bytes.size() != expected) {
    throw DataError("model file has " + std::to_string(bytes.size()) + " bytes, expected " +
                    std::to_string(expected));
  }

  TrainedModel model;
  model.arch = n_h == 0 ? Architecture::SimpleNN : Architecture::Joint;
  model.embeddings = r.matrix(n, d);
  if (n_h > 0) {
    model.params.w_star = r.matrix(n_h, d);
    model.params.w_plus = r.matrix(n_h, d);
    model.params.b1 = r.matrix(n_h, 1);
    model.params.u_out = r.matrix(2, n_h);
    model.params.b2 = r.matrix(2, 1);
  } else {
    model.params = ModelParams<float>::zeros(static_cast<Eigen::Index>(d), 0);
    model.params.b2 = r.matrix(2, 1);
  }
  model.raw_ids.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto raw = static_cast<RawId>(r.u64());
    const auto dense = r.u64();
    if (dense >= n) throw DataError("model id mapping out of range");
    model.raw_ids[dense] = raw;
  }
  if (!model.embeddings.allFinite() || !model.params.all_finite()) {
    throw NumericError("model file contains non-finite values");
  }
  return model;
}

void save_model(const TrainedModel& model, const std::string& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing model '" + path + "'");
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace trustnet
