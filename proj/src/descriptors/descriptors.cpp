#include "gait/descriptors/descriptors.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>

#include "gait/error.hpp"
#include "gait/io/digest.hpp"

namespace gait::descriptors {

static_assert(std::endian::native == std::endian::little, "descriptor store assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'G', 'A', 'I', 'T', 'D', 'S', 'C', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename V>
void put(std::string& out, V v) {
  char buf[sizeof(V)];
  std::memcpy(buf, &v, sizeof(V));
  out.append(buf, sizeof(V));
}

void put_string(std::string& out, const std::string& s) {
  put<std::uint32_t>(out, std::uint32_t(s.size()));
  out += s;
}

struct Reader {
  std::string_view bytes;
  std::size_t pos = 0;

  template <typename V>
  V get() {
    if (bytes.size() - pos < sizeof(V)) throw InputError("descriptor store is truncated");
    V v;
    std::memcpy(&v, bytes.data() + pos, sizeof(V));
    pos += sizeof(V);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    if (bytes.size() - pos < n) throw InputError("descriptor store is truncated");
    std::string s(bytes.substr(pos, n));
    pos += n;
    return s;
  }
};

void append_number(std::string& out, double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, r.ptr);
}

// Values of each dimension are summed in sorted order, so the mean does not
// depend on the order of the features.
std::vector<double> mean_of(std::span<const FrameFeature> features, const Part* only) {
  std::vector<const std::vector<double>*> rows;
  for (const auto& f : features) {
    if (only && f.part != *only) continue;
    if (f.vector.empty() || (!rows.empty() && f.vector.size() != rows[0]->size())) {
      throw InputError("frame features have differing lengths");
    }
    rows.push_back(&f.vector);
  }
  if (rows.empty()) return {};
  const std::size_t width = rows[0]->size();
  std::vector<double> mean(width), column(rows.size());
  for (std::size_t k = 0; k < width; ++k) {
    for (std::size_t i = 0; i < rows.size(); ++i) column[i] = (*rows[i])[k];
    std::sort(column.begin(), column.end());
    double s = 0;
    for (double v : column) s += v;
    mean[k] = s / double(rows.size());
  }
  return mean;
}

}  // namespace

std::string_view to_string(Fusion f) { return f == Fusion::avg ? "avg" : "concat"; }

Fusion parse_fusion(std::string_view s) {
  if (s == "avg") return Fusion::avg;
  if (s == "concat") return Fusion::concat;
  throw ConfigError("unknown fusion '" + std::string(s) + "' (avg | concat)");
}

std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::normal: return "normal";
    case Condition::shoes: return "shoes";
    case Condition::backpack: return "backpack";
    case Condition::other: return "other";
  }
  return "other";
}

Condition parse_condition(std::string_view s) {
  for (Condition c : {Condition::normal, Condition::shoes, Condition::backpack, Condition::other}) {
    if (to_string(c) == s) return c;
  }
  throw InputError("unknown descriptor condition '" + std::string(s) + "'");
}

void l2_normalize(std::vector<double>& v) {
  double ss = 0;
  for (double x : v) ss += x * x;
  const double norm = std::sqrt(ss);
  if (!std::isfinite(norm) || norm < 1e-12) throw DegenerateDescriptorError("descriptor has zero or non-finite norm");
  for (double& x : v) x /= norm;
}

template <typename T>
std::vector<FrameFeature> extract_features(const nets::Model<T>& model, std::span<const posepatch::Patch> patches,
                                           std::size_t batch) {
  if (model.spec.input_size != posepatch::kPatchSide) {
    throw DimensionError("model input size " + std::to_string(model.spec.input_size) + " does not match 48x48 patches");
  }
  if (batch == 0) throw ConfigError("extraction batch must be positive");
  std::vector<FrameFeature> out;
  out.reserve(patches.size());
  for (std::size_t start = 0; start < patches.size(); start += batch) {
    const std::size_t n = std::min(batch, patches.size() - start);
    tensornet::Tensor<T> x({n, 3, posepatch::kPatchSide, posepatch::kPatchSide});
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = patches[start + i];
      if (p.values.size() != posepatch::kPatchValues) throw DimensionError("patch is not 3x48x48");
      std::copy(p.values.begin(), p.values.end(), x.data().begin() + std::ptrdiff_t(i * posepatch::kPatchValues));
    }
    const auto f = model.net.features(x, model.params);
    const std::size_t width = f.size() / n;
    for (std::size_t i = 0; i < n; ++i) {
      FrameFeature ff{patches[start + i].part, patches[start + i].pair_index, std::vector<double>(width)};
      for (std::size_t k = 0; k < width; ++k) {
        const double v = double(f.ptr()[i * width + k]);
        if (!std::isfinite(v)) throw NumericError("non-finite feature value");
        ff.vector[k] = v;
      }
      out.push_back(std::move(ff));
    }
  }
  return out;
}

template std::vector<FrameFeature> extract_features(const nets::Model<float>&, std::span<const posepatch::Patch>,
                                                    std::size_t);
template std::vector<FrameFeature> extract_features(const nets::Model<double>&, std::span<const posepatch::Patch>,
                                                    std::size_t);

GaitDescriptor fuse_avg(std::span<const FrameFeature> features) {
  if (features.empty()) throw InputError("cannot fuse an empty feature set");
  GaitDescriptor d;
  d.fusion = Fusion::avg;
  d.vector = mean_of(features, nullptr);
  l2_normalize(d.vector);
  return d;
}

GaitDescriptor fuse_concat(std::span<const FrameFeature> features, std::span<const Part> parts) {
  if (parts.empty()) throw ConfigError("no parts selected for fusion");
  for (const auto& f : features) {
    if (std::find(parts.begin(), parts.end(), f.part) == parts.end()) {
      throw InputError("feature of unselected part '" + std::string(posepatch::to_string(f.part)) + "'");
    }
  }
  GaitDescriptor d;
  d.fusion = Fusion::concat;
  std::size_t width = 0;
  for (Part p : parts) {
    auto m = mean_of(features, &p);
    if (m.empty()) throw InputError("no features for part '" + std::string(posepatch::to_string(p)) + "'");
    if (width == 0) width = m.size();
    if (m.size() != width) throw InputError("frame features have differing lengths");
    d.vector.insert(d.vector.end(), m.begin(), m.end());
  }
  l2_normalize(d.vector);
  return d;
}

GaitDescriptor fuse(Fusion mode, std::span<const FrameFeature> features, std::span<const Part> parts) {
  return mode == Fusion::avg ? fuse_avg(features) : fuse_concat(features, parts);
}

double PcaModel::discarded_variance() const {
  double s = 0;
  for (Eigen::Index i = Eigen::Index(k()); i < spectrum.size(); ++i) s += spectrum[i];
  return s;
}

PcaModel pca_fit(const std::vector<std::vector<double>>& rows, std::size_t k) {
  const std::size_t n = rows.size();
  if (n < 2) throw InputError("PCA needs at least two vectors");
  const std::size_t d = rows[0].size();
  for (const auto& r : rows) {
    if (r.size() != d) throw InputError("PCA input vectors differ in length");
  }
  if (k == 0 || k > std::min(d, n - 1)) {
    throw InputError("PCA dimension " + std::to_string(k) + " exceeds min(d, n - 1) = " +
                     std::to_string(std::min(d, n - 1)));
  }
  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i) x.row(Eigen::Index(i)) = Eigen::Map<const Eigen::RowVectorXd>(rows[i].data(), Eigen::Index(d));
  PcaModel m;
  m.mean = x.colwise().mean().transpose();
  x.rowwise() -= m.mean.transpose();
  const double denom = double(n - 1);

  Eigen::MatrixXd vectors;  // d x r, descending
  Eigen::VectorXd values;
  if (d <= n) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((x.transpose() * x) / denom);
    if (es.info() != Eigen::Success) throw NumericError("covariance eigen-decomposition failed");
    values = es.eigenvalues().reverse();
    vectors = es.eigenvectors().rowwise().reverse();
  } else {
    // Gram route: X X^T u = l u  =>  X^T u / |X^T u| is a covariance eigenvector
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((x * x.transpose()) / denom);
    if (es.info() != Eigen::Success) throw NumericError("Gram eigen-decomposition failed");
    values = es.eigenvalues().reverse();
    const Eigen::MatrixXd u = es.eigenvectors().rowwise().reverse();
    vectors.resize(Eigen::Index(d), Eigen::Index(k));
    for (Eigen::Index c = 0; c < Eigen::Index(k); ++c) {
      Eigen::VectorXd v = x.transpose() * u.col(c);
      const double norm = v.norm();
      if (!(norm > 0)) throw NumericError("PCA component " + std::to_string(c) + " has zero variance");
      vectors.col(c) = v / norm;
    }
  }
  m.spectrum = values.cwiseMax(0.0);
  m.components = vectors.leftCols(Eigen::Index(k));
  for (Eigen::Index c = 0; c < m.components.cols(); ++c) {
    Eigen::Index arg = 0;
    m.components.col(c).cwiseAbs().maxCoeff(&arg);
    if (m.components(arg, c) < 0) m.components.col(c) *= -1.0;
  }
  return m;
}

PcaModel pca_fit(std::span<const GaitDescriptor> descriptors, std::size_t k) {
  std::vector<std::vector<double>> rows;
  for (const auto& d : descriptors) rows.push_back(d.vector);
  return pca_fit(rows, k);
}

Eigen::VectorXd pca_transform(const PcaModel& model, std::span<const double> x) {
  if (x.size() != model.dim()) throw InputError("PCA input has length " + std::to_string(x.size()) + ", expected " + std::to_string(model.dim()));
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), Eigen::Index(x.size()));
  return model.components.transpose() * (v - model.mean);
}

Eigen::VectorXd pca_reconstruct(const PcaModel& model, std::span<const double> x) {
  return model.mean + model.components * pca_transform(model, x);
}

GaitDescriptor pca_project(const PcaModel& model, const GaitDescriptor& d) {
  GaitDescriptor out = d;
  const Eigen::VectorXd y = pca_transform(model, d.vector);
  out.vector.assign(y.data(), y.data() + y.size());
  l2_normalize(out.vector);
  out.pca_dim = model.k();
  return out;
}

std::string encode_store(std::span<const GaitDescriptor> ds) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, ds.size());
  for (const auto& d : ds) {
    put<std::int32_t>(out, d.label);
    put<std::uint8_t>(out, std::uint8_t(d.condition));
    put<std::uint8_t>(out, std::uint8_t(d.fusion));
    put<std::uint32_t>(out, std::uint32_t(d.pca_dim));
    put_string(out, d.subject);
    put_string(out, d.video);
    put<std::uint64_t>(out, d.vector.size());
    for (double v : d.vector) put<double>(out, v);
  }
  return out;
}

std::vector<GaitDescriptor> decode_store(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw InputError("not a descriptor store");
  }
  Reader r{bytes, sizeof kMagic};
  if (r.get<std::uint32_t>() != kVersion) throw InputError("unsupported descriptor store version");
  const auto count = r.get<std::uint64_t>();
  std::vector<GaitDescriptor> ds;
  for (std::uint64_t i = 0; i < count; ++i) {
    GaitDescriptor d;
    d.label = r.get<std::int32_t>();
    const auto cond = r.get<std::uint8_t>();
    const auto fusion = r.get<std::uint8_t>();
    if (cond > std::uint8_t(Condition::other) || fusion > std::uint8_t(Fusion::concat)) {
      throw InputError("descriptor store has an invalid tag");
    }
    d.condition = Condition(cond);
    d.fusion = Fusion(fusion);
    d.pca_dim = r.get<std::uint32_t>();
    d.subject = r.get_string();
    d.video = r.get_string();
    const auto n = r.get<std::uint64_t>();
    if (n > (bytes.size() - r.pos) / sizeof(double)) throw InputError("descriptor store is truncated");
    d.vector.resize(n);
    for (auto& v : d.vector) v = r.get<double>();
    ds.push_back(std::move(d));
  }
  if (r.pos != bytes.size()) throw InputError("trailing bytes in descriptor store");
  return ds;
}

void write_store(const std::filesystem::path& path, std::span<const GaitDescriptor> ds) {
  io::write_file_atomic(path, encode_store(ds));
}

std::vector<GaitDescriptor> read_store(const std::filesystem::path& path) { return decode_store(io::read_file(path)); }

std::string store_csv(std::span<const GaitDescriptor> ds) {
  std::string out = "subject,label,video,condition,fusion,pca_dim,values\n";
  for (const auto& d : ds) {
    out += d.subject + ',' + std::to_string(d.label) + ',' + d.video + ',' + std::string(to_string(d.condition)) + ',' +
           std::string(to_string(d.fusion)) + ',' + std::to_string(d.pca_dim) + ',';
    for (std::size_t i = 0; i < d.vector.size(); ++i) {
      if (i) out += ' ';
      append_number(out, d.vector[i]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace gait::descriptors
