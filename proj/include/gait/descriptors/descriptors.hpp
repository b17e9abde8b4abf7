#pragma once

// Per-patch features from the last hidden layer, video-level fusion, L2
// normalization, PCA and the descriptor store.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "gait/nets/architectures.hpp"
#include "gait/posepatch/patches.hpp"

namespace gait::descriptors {

using posepatch::Part;

struct FrameFeature {
  Part part = Part::full_body;
  std::size_t pair_index = 0;
  std::vector<double> vector;
};

enum class Fusion { avg, concat };
std::string_view to_string(Fusion f);
Fusion parse_fusion(std::string_view s);  // ConfigError

enum class Condition { normal, shoes, backpack, other };
std::string_view to_string(Condition c);
Condition parse_condition(std::string_view s);  // InputError

struct GaitDescriptor {
  std::string subject;
  int label = 0;
  std::string video;
  Condition condition = Condition::normal;
  Fusion fusion = Fusion::avg;
  std::size_t pca_dim = 0;  // 0 = not projected
  std::vector<double> vector;
  bool operator==(const GaitDescriptor&) const = default;
};

/// Divides by the Euclidean norm; DegenerateDescriptorError when the norm is
/// below 1e-12 or not finite.
void l2_normalize(std::vector<double>& v);

/// Eval-mode features of a batch of patches, in patch order. Throws
/// DimensionError when a patch is not 3x48x48 or the model expects another
/// input size, NumericError on non-finite features.
template <typename T>
std::vector<FrameFeature> extract_features(const nets::Model<T>& model, std::span<const posepatch::Patch> patches,
                                           std::size_t batch = 64);

/// Mean over every feature, normalized. InputError on empty input or ragged lengths.
GaitDescriptor fuse_avg(std::span<const FrameFeature> features);

/// Per-part temporal means, concatenated in the order of `parts`, normalized.
/// InputError naming the part when a selected part has no features, or when
/// a feature belongs to an unselected part.
GaitDescriptor fuse_concat(std::span<const FrameFeature> features, std::span<const Part> parts);

GaitDescriptor fuse(Fusion mode, std::span<const FrameFeature> features, std::span<const Part> parts);

struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // d x k, orthonormal columns
  Eigen::VectorXd spectrum;    // every eigenvalue of the sample covariance that can be nonzero, descending
  std::size_t k() const { return std::size_t(components.cols()); }
  std::size_t dim() const { return std::size_t(mean.size()); }
  /// Sum of the eigenvalues past the first k.
  double discarded_variance() const;
};

/// Eigen-decomposition of the sample covariance (divisor n - 1). Columns are
/// sign-fixed so that their largest-magnitude entry is positive. InputError
/// unless 1 <= k <= min(d, n - 1) and all rows share one length.
PcaModel pca_fit(const std::vector<std::vector<double>>& rows, std::size_t k);
PcaModel pca_fit(std::span<const GaitDescriptor> descriptors, std::size_t k);

/// components^T (x - mean), not normalized.
Eigen::VectorXd pca_transform(const PcaModel& model, std::span<const double> x);
/// mean + components * components^T (x - mean)
Eigen::VectorXd pca_reconstruct(const PcaModel& model, std::span<const double> x);

/// Projection followed by re-normalization; keeps labels and metadata.
GaitDescriptor pca_project(const PcaModel& model, const GaitDescriptor& d);

/// Binary store: "GAITDSC1", u32 version, u64 count, then per record
/// label i32, condition u8, fusion u8, pca_dim u32, subject and video as
/// u32-length-prefixed strings, u64 length, doubles. Little-endian.
std::string encode_store(std::span<const GaitDescriptor> ds);
std::vector<GaitDescriptor> decode_store(std::string_view bytes);  // InputError on malformed data
void write_store(const std::filesystem::path& path, std::span<const GaitDescriptor> ds);
std::vector<GaitDescriptor> read_store(const std::filesystem::path& path);
std::string store_csv(std::span<const GaitDescriptor> ds);

}  // namespace gait::descriptors
