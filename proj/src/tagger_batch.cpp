#include "tagger_kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace xnf {

std::vector<LabeledSentence> predict_batch(const TaggerModel& model,
                                           const std::vector<std::vector<std::string>>& sentences) {
  std::vector<LabeledSentence> out(sentences.size());
  const auto n = static_cast<std::ptrdiff_t>(sentences.size());
#pragma omp parallel
  {
    detail::Workspace ws(model.config);
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      out[static_cast<std::size_t>(i)] = detail::predict_with(model, sentences[static_cast<std::size_t>(i)], ws);
    }
  }
  return out;
}

std::vector<LabeledSentence> predict_batch_serial(const TaggerModel& model,
                                                  const std::vector<std::vector<std::string>>& sentences) {
  std::vector<LabeledSentence> out;
  out.reserve(sentences.size());
  detail::Workspace ws(model.config);
  for (const auto& s : sentences) out.push_back(detail::predict_with(model, s, ws));
  return out;
}

}  // namespace xnf
