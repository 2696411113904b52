#include "monotree/dynamic.hpp"

#include <json.hpp>

#include "monotree/component_scale.hpp"

namespace monotree {

EmbedRunner dynamic_runner(DynamicConfig cfg) {
  if (cfg.trigger_ratio > 0.25)
    throw MetricError("dynamic merge trigger ratio must be <= 1/4");
  return [cfg](const UpdateSequence& seq, const MetricSpace& metric,
               std::uint64_t seed, const StepSink& sink) {
    EmbedderSpec spec;
    spec.name = "dynamic";
    spec.top_factor = 32.0;
    double cap = cfg.safety_ratio;
    spec.diameter_bound = [cap](double s, int) { return cap * s; };
    spec.make_scale = [&metric, cfg, seed](int level, MergeSink ms) {
      ComponentScaleConfig c;
      c.policy = ComponentScaleConfig::Policy::DynamicSumRule;
      c.seed = seed;
      c.trigger_ratio = cfg.trigger_ratio;
      c.safety_ratio = cfg.safety_ratio;
      return std::make_unique<ComponentScale>(level, metric, std::move(c), std::move(ms));
    };
    MultiScaleEmbedder e(seq, metric, std::move(spec), seed, cfg.checks);
    e.run(sink);
  };
}

EmbeddingTrace embed_dynamic(const UpdateSequence& seq, const MetricSpace& metric,
                             const DynamicConfig& cfg, bool with_trees) {
  nlohmann::json j;
  j["trigger_ratio"] = cfg.trigger_ratio;
  j["safety_ratio"] = cfg.safety_ratio;
  j["seed"] = cfg.seed;
  return collect_trace(dynamic_runner(cfg), seq, metric, cfg.seed, with_trees,
                       "dynamic", j.dump());
}

}  // namespace monotree
