#include <algorithm>

#include <json.hpp>

#include "clinqa/generation.hpp"

namespace clinqa::generation {

std::vector<ScaleManifest> build_scale_plan(const ScalePlan& plan, std::span<const corpus::Document> corpus,
                                            const std::filesystem::path& out_root) {
  if (plan.doc_counts.empty() || plan.pairs_per_doc.empty() || plan.seeds.empty())
    throw ConfigError("scale plan needs document counts, pair counts and seeds");
  for (std::size_t i = 0; i < plan.doc_counts.size(); ++i) {
    if (plan.doc_counts[i] < 1) throw ConfigError("scale plan document counts must be at least 1");
    if (i > 0 && plan.doc_counts[i] <= plan.doc_counts[i - 1])
      throw ConfigError("scale plan document counts must be strictly increasing");
  }
  for (std::size_t i = 0; i < plan.pairs_per_doc.size(); ++i) {
    if (plan.pairs_per_doc[i] < 1) throw ConfigError("scale plan pairs per document must be at least 1");
    if (i > 0 && plan.pairs_per_doc[i] <= plan.pairs_per_doc[i - 1])
      throw ConfigError("scale plan pairs per document must be strictly increasing");
  }
  for (auto n : plan.doc_counts) {
    if (n > corpus.size()) {
      throw DataError("scale plan asks for " + std::to_string(n) + " documents but the corpus has " +
                      std::to_string(corpus.size()));
    }
  }

  std::vector<ScaleManifest> out;
  for (auto n : plan.doc_counts) {
    for (auto q : plan.pairs_per_doc) {
      ScaleManifest m;
      m.name = "docs" + std::to_string(n) + "_pairs" + std::to_string(q);
      m.doc_count = n;
      m.pairs_per_doc = q;
      for (auto seed : plan.seeds) {
        m.samples.push_back(corpus::sample_documents(corpus, n, seed));
        m.output_dirs.push_back(out_root / m.name / ("seed-" + std::to_string(seed)));
      }
      out.push_back(std::move(m));
    }
  }
  return out;
}

std::string manifest_to_json(const ScaleManifest& manifest) {
  nlohmann::ordered_json j;
  j["name"] = manifest.name;
  j["doc_count"] = manifest.doc_count;
  j["pairs_per_doc"] = manifest.pairs_per_doc;
  auto samples = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
    nlohmann::ordered_json s;
    s["seed"] = manifest.samples[i].seed;
    s["output_dir"] = manifest.output_dirs[i].generic_string();
    s["doc_ids"] = manifest.samples[i].doc_ids;
    samples.push_back(std::move(s));
  }
  j["samples"] = std::move(samples);
  return j.dump(2) + "\n";
}

}  // namespace clinqa::generation
