#include "tkgt/evaluator.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

namespace tkgt {

double rank_from_scores(const std::vector<double>& scores, std::size_t gt,
                        const std::vector<char>* removed) {
  if (gt >= scores.size())
    throw std::runtime_error("rank: ground truth " + std::to_string(gt) +
                             " outside the candidate set of " + std::to_string(scores.size()));
  if (removed && (*removed)[gt])
    throw std::runtime_error("rank: ground truth must not be filtered out");
  double target = scores[gt];
  std::size_t greater = 0, ties = 0;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (c == gt) continue;
    if (removed && (*removed)[c]) continue;
    if (scores[c] > target)
      ++greater;
    else if (scores[c] == target)
      ++ties;
  }
  return 1.0 + static_cast<double>(greater) + static_cast<double>(ties) / 2.0;
}

RankingReport aggregate_ranks(std::vector<double> ranks, const std::string& setting) {
  RankingReport r;
  r.setting = setting;
  r.n_queries = ranks.size();
  for (double rank : ranks) {
    r.mrr += 1.0 / rank;
    r.hits1 += rank <= 1.0 ? 1.0 : 0.0;
    r.hits3 += rank <= 3.0 ? 1.0 : 0.0;
    r.hits10 += rank <= 10.0 ? 1.0 : 0.0;
  }
  if (!ranks.empty()) {
    double n = static_cast<double>(ranks.size());
    r.mrr /= n;
    r.hits1 /= n;
    r.hits3 /= n;
    r.hits10 /= n;
  }
  r.ranks = std::move(ranks);
  return r;
}

std::string report_json(const RankingReport& r) {
  nlohmann::json j;
  j["setting"] = r.setting;
  j["mrr"] = r.mrr;
  j["hits1"] = r.hits1;
  j["hits3"] = r.hits3;
  j["hits10"] = r.hits10;
  j["n_queries"] = r.n_queries;
  return j.dump();
}

std::string report_table(const RankingReport& raw, const RankingReport& filtered) {
  std::ostringstream os;
  auto row = [&os](const RankingReport& r) {
    os.setf(std::ios::fixed);
    os.precision(4);
    os << "  " << r.setting;
    for (std::size_t i = r.setting.size(); i < 10; ++i) os << ' ';
    os << r.mrr << "  " << r.hits1 << "  " << r.hits3 << "  " << r.hits10 << "  "
       << r.n_queries << '\n';
  };
  os << "  setting   mrr     hits@1  hits@3  hits@10 queries\n";
  row(raw);
  row(filtered);
  return os.str();
}

}  // namespace tkgt
