#include "tkgt/tkge.hpp"

namespace tkgt {

ModelKind parse_model_kind(const std::string& name) {
  if (name == "dyernie") return ModelKind::kDyernie;
  if (name == "de") return ModelKind::kDe;
  if (name == "utee") return ModelKind::kUtee;
  if (name == "sf") return ModelKind::kSf;
  throw std::runtime_error("unknown model kind: " + name +
                           " (expected dyernie, de, utee, or sf)");
}

const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kDyernie: return "dyernie";
    case ModelKind::kDe: return "de";
    case ModelKind::kUtee: return "utee";
    case ModelKind::kSf: return "sf";
  }
  return "?";
}

std::vector<Quadruple> negative_sample(const Quadruple& q, std::size_t m, std::size_t n_entities,
                                       Rng& rng) {
  if (m < 1) throw std::runtime_error("negative_sample: m must be >= 1");
  if (n_entities < 2)
    throw std::runtime_error("negative_sample: need at least two entities to corrupt");
  std::vector<Quadruple> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    Quadruple neg = q;
    bool corrupt_subject = rng.uniform_index(2) == 0;
    std::int32_t original = corrupt_subject ? q.subj : q.obj;
    auto repl = static_cast<std::int32_t>(
        rng.uniform_index_excluding(n_entities, static_cast<std::size_t>(original)));
    (corrupt_subject ? neg.subj : neg.obj) = repl;
    out.push_back(neg);
  }
  return out;
}

}  // namespace tkgt
