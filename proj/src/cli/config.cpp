#include <fstream>
#include <sstream>

#include <json.hpp>

#include "clinqa/cli.hpp"
#include "clinqa/openai_backend.hpp"
#include "clinqa/text.hpp"

namespace clinqa::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

template <typename T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return kConfig;
  if (dynamic_cast<const llm::BackendError*>(&e) != nullptr) return kBackend;
  if (dynamic_cast<const DataError*>(&e) != nullptr || dynamic_cast<const ParseError*>(&e) != nullptr) return kData;
  if (dynamic_cast<const std::invalid_argument*>(&e) != nullptr) return kConfig;
  return kInternal;
}

void apply_config_json(RunConfig& c, std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "dataset") {
      c.dataset = prompting::parse_dataset(get_as<std::string>(v, key));
    } else if (key == "strategy") {
      c.strategy = prompting::parse_strategy(get_as<std::string>(v, key));
    } else if (key == "schema") {
      if (v.is_null()) {
        c.schema.reset();
      } else {
        c.schema = prompting::parse_schema_variant(get_as<std::string>(v, key));
      }
    } else if (key == "model_id") {
      c.model_id = get_as<std::string>(v, key);
    } else if (key == "questions_per_unit") {
      c.questions_per_unit = get_as<std::size_t>(v, key);
    } else if (key == "seed") {
      c.seed = get_as<std::uint64_t>(v, key);
    } else if (key == "parallelism") {
      c.parallelism = get_as<std::size_t>(v, key);
    } else if (key == "backend") {
      c.backend = get_as<std::string>(v, key);
    } else if (key == "corpus") {
      c.corpus = get_as<std::string>(v, key);
    } else if (key == "corpus_format") {
      c.corpus_format = corpus::parse_format(get_as<std::string>(v, key));
    } else if (key == "docs") {
      if (v.is_null()) {
        c.docs.reset();
      } else {
        c.docs = get_as<std::size_t>(v, key);
      }
    } else if (key == "gold") {
      c.gold = get_as<std::string>(v, key);
    } else if (key == "manifest") {
      c.manifest = get_as<std::string>(v, key);
    } else if (key == "out") {
      c.out = get_as<std::string>(v, key);
    } else if (key == "prices") {
      c.prices = get_as<std::string>(v, key);
    } else if (key == "max_rounds") {
      c.max_rounds = get_as<std::size_t>(v, key);
    } else if (key == "overgen_batch") {
      c.overgen_batch = get_as<std::size_t>(v, key);
    } else if (key == "segment_words") {
      c.segment_words = get_as<std::size_t>(v, key);
    } else if (key == "mock_answerable_per_call") {
      if (v.is_null()) {
        c.mock_answerable_per_call.reset();
      } else {
        c.mock_answerable_per_call = get_as<std::size_t>(v, key);
      }
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  RunConfig c;
  apply_config_json(c, ss.str());
  return c;
}

void validate(const RunConfig& c) {
  if (c.questions_per_unit < 1) throw ConfigError("questions per unit must be at least 1");
  if (c.parallelism < 1) throw ConfigError("parallelism must be at least 1");
  if (c.max_rounds < 1 || c.overgen_batch < 1) throw ConfigError("max_rounds and overgen_batch must be at least 1");
  if (c.segment_words < 1) throw ConfigError("segment_words must be at least 1");
  if (c.docs && *c.docs < 1) throw ConfigError("--docs must be at least 1");
  if (prompting::requires_summary(c.strategy)) {
    if (!c.schema) {
      throw ConfigError("strategy " + std::string(prompting::to_string(c.strategy)) + " needs a summary schema (--schema)");
    }
    prompting::summary_schema(c.dataset, *c.schema);
  }
  if (c.strategy == prompting::Strategy::gold_question) {
    if (c.gold.empty()) throw ConfigError("gold_question mode needs a gold file (--gold)");
  } else if (c.corpus.empty()) {
    throw ConfigError("no corpus given (--corpus)");
  }
  if (!c.manifest.empty() && c.docs) throw ConfigError("--manifest and --docs are mutually exclusive");
  parse_backend(c.backend);
  const auto prices = price_table(c.prices);
  if (!prices.contains(c.model_id)) throw ConfigError("no price for model '" + c.model_id + "'");
}

std::string config_to_json(const RunConfig& c) {
  ordered_json j;
  j["dataset"] = prompting::to_string(c.dataset);
  j["strategy"] = prompting::to_string(c.strategy);
  j["schema"] = c.schema ? ordered_json(prompting::to_string(*c.schema)) : ordered_json(nullptr);
  j["model_id"] = c.model_id;
  j["questions_per_unit"] = c.questions_per_unit;
  j["seed"] = c.seed;
  j["parallelism"] = c.parallelism;
  j["backend"] = c.backend;
  j["corpus"] = c.corpus.generic_string();
  j["corpus_format"] = corpus::to_string(c.corpus_format);
  j["docs"] = c.docs ? ordered_json(*c.docs) : ordered_json(nullptr);
  j["gold"] = c.gold.generic_string();
  j["manifest"] = c.manifest.generic_string();
  j["out"] = c.out.generic_string();
  j["prices"] = c.prices.generic_string();
  j["max_rounds"] = c.max_rounds;
  j["overgen_batch"] = c.overgen_batch;
  j["segment_words"] = c.segment_words;
  j["mock_answerable_per_call"] =
      c.mock_answerable_per_call ? ordered_json(*c.mock_answerable_per_call) : ordered_json(nullptr);
  return j.dump(2);
}

std::string config_hash(const RunConfig& c) {
  auto j = ordered_json::parse(config_to_json(c));
  j.erase("out");
  j.erase("parallelism");
  return text::hex64(text::fnv1a64(j.dump()));
}

BackendSpec parse_backend(std::string_view spec) {
  if (spec == "live") return {true, {}};
  if (spec == "mock") return {false, {}};
  if (spec.starts_with("mock:") && spec.size() > 5) return {false, fs::path(std::string(spec.substr(5)))};
  throw ConfigError("unknown backend '" + std::string(spec) + "' (expected live, mock or mock:<transcript>)");
}

std::shared_ptr<llm::Backend> make_backend(const BackendSpec& spec, std::uint64_t seed,
                                           std::optional<std::size_t> answerable_per_call) {
  if (spec.live) return std::make_shared<llm::OpenAIBackend>(llm::openai_config_from_env());
  llm::MockOptions opts;
  opts.seed = seed;
  opts.answerable_per_call = answerable_per_call;
  auto mock = std::make_shared<llm::MockBackend>(opts);
  if (!spec.transcript.empty()) mock->load_transcript(spec.transcript);
  return mock;
}

llm::GatewayOptions gateway_options(const BackendSpec& spec, std::size_t parallelism) {
  llm::GatewayOptions opts;
  opts.parallelism = parallelism;
  if (!spec.live) {
    opts.clock = [] { return std::int64_t{0}; };
    opts.sleep = [](std::chrono::milliseconds) {};
  }
  return opts;
}

llm::PriceTable price_table(const fs::path& overrides) {
  auto table = llm::default_price_table();
  if (!overrides.empty()) {
    for (auto& [model, rate] : llm::load_price_table(overrides)) table[model] = rate;
  }
  return table;
}

}  // namespace clinqa::cli
