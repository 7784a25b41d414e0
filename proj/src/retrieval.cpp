#include "cir/retrieval.hpp"

#include <algorithm>
#include <numeric>

#include "cir/kernels.hpp"

namespace cir {

Tensor embed_catalog(const FusionModel<float>& model, const EmbeddingSource& source,
                     const std::vector<std::string>& image_ids) {
  Tensor out({image_ids.size(), model.dim});
  kernels::parallel_for(image_ids.size(), [&](std::size_t i) {
    const Encoded e = source.image(image_ids[i]);
    const Tensor v = embed_catalog_item(model, e.pooled, e.tokens);
    std::copy(v.data().begin(), v.data().end(), out.row(i).begin());
  });
  return out;
}

Tensor embed_queries(const FusionModel<float>& model, const EmbeddingSource& source,
                     const std::vector<RetrievalQuery>& queries) {
  Tensor out({queries.size(), model.dim});
  kernels::parallel_for(queries.size(), [&](std::size_t i) {
    const Encoded img = source.image(queries[i].image_id);
    const Encoded txt = source.text(queries[i].caption);
    const Tensor v = fuse(model, img.pooled, txt.pooled, img.tokens, txt.tokens);
    std::copy(v.data().begin(), v.data().end(), out.row(i).begin());
  });
  return out;
}

Tensor score_matrix(const Tensor& query_embs, const Tensor& catalog_embs) {
  require(query_embs.cols() == catalog_embs.cols(), ErrorKind::kDimension,
          "query and catalog embeddings differ in width");
  Tensor scores({query_embs.rows(), catalog_embs.rows()});
  kernels::dot_scores_parallel(query_embs.rows(), catalog_embs.rows(), query_embs.cols(),
                               query_embs.data().data(), catalog_embs.data().data(),
                               scores.data().data());
  return scores;
}

std::vector<std::size_t> rank_indices(std::span<const float> scores,
                                      const std::vector<std::string>& ids) {
  require(scores.size() == ids.size(), ErrorKind::kDimension, "scores and ids differ in length");
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  return order;
}

std::vector<std::string> rank_ids(std::span<const float> scores,
                                  const std::vector<std::string>& ids) {
  std::vector<std::string> out;
  for (auto i : rank_indices(scores, ids)) out.push_back(ids[i]);
  return out;
}

}  // namespace cir
