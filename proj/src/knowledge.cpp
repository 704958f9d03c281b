#include <algorithm>
#include <cmath>

#include "prefcore/catalog.hpp"
#include "prefcore/error.hpp"
#include "prefcore/random.hpp"

namespace prefcore {

KnowledgeEncoder::KnowledgeEncoder(std::vector<std::string> vocabulary,
                                   std::size_t dim, std::uint64_t seed,
                                   double scale)
    : vocabulary_(std::move(vocabulary)), scale_(scale) {
  std::sort(vocabulary_.begin(), vocabulary_.end());
  vocabulary_.erase(std::unique(vocabulary_.begin(), vocabulary_.end()),
                    vocabulary_.end());
  Rng rng(derive_seed(seed, {0x6b6e6f77ULL}));
  projection_.resize(static_cast<Eigen::Index>(dim),
                     static_cast<Eigen::Index>(vocabulary_.size()));
  for (Eigen::Index i = 0; i < projection_.rows(); ++i) {
    for (Eigen::Index j = 0; j < projection_.cols(); ++j) {
      projection_(i, j) = gaussian(rng);
    }
  }
}

Vec KnowledgeEncoder::encode(const AttributeSet& attributes) const {
  Vec hot = Vec::Zero(static_cast<Eigen::Index>(vocabulary_.size()));
  for (const auto& attr : attributes) {
    auto it = std::lower_bound(vocabulary_.begin(), vocabulary_.end(), attr);
    if (it == vocabulary_.end() || *it != attr) {
      throw DataError("attribute '" + attr + "' not in knowledge vocabulary");
    }
    hot(it - vocabulary_.begin()) = 1.0;
  }
  const double norm = std::sqrt(std::max<double>(1.0, static_cast<double>(attributes.size())));
  return Vec::Ones(projection_.rows()) + (scale_ / norm) * (projection_ * hot);
}

}  // namespace prefcore
