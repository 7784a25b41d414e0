#pragma once

#include <string>
#include <vector>

#include "cir/fusion.hpp"
#include "cir/synthetic.hpp"

namespace cir {

struct RetrievalQuery {
  std::string query_id;
  std::string image_id;
  std::string caption;
};

// Row-major embeddings, one row per id, computed in parallel.
Tensor embed_catalog(const FusionModel<float>& model, const EmbeddingSource& source,
                     const std::vector<std::string>& image_ids);
Tensor embed_queries(const FusionModel<float>& model, const EmbeddingSource& source,
                     const std::vector<RetrievalQuery>& queries);

// scores = queries * catalog^T.
Tensor score_matrix(const Tensor& query_embs, const Tensor& catalog_embs);

// Catalog indices by descending score, ties by ascending id.
std::vector<std::size_t> rank_indices(std::span<const float> scores,
                                      const std::vector<std::string>& ids);
std::vector<std::string> rank_ids(std::span<const float> scores,
                                  const std::vector<std::string>& ids);

}  // namespace cir
