#include <fstream>
#include <sstream>

#include "aurec/pipeline.hpp"
#include "json.hpp"

namespace aurec {

namespace {

using Json = nlohmann::ordered_json;

constexpr const char* kMagic = "aurec-bundle";
constexpr int kVersion = 1;

Json mat_to_json(const Mat& m) {
  return Json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.a}};
}

Mat mat_from_json(const Json& j) {
  Mat m(j.at("rows").get<int>(), j.at("cols").get<int>());
  m.a = j.at("data").get<std::vector<double>>();
  if (m.a.size() != size_t(m.rows) * m.cols) throw data_error("bundle: matrix size mismatch");
  return m;
}

Json pca_to_json(const PcaBasis& b) {
  return Json{{"mean", b.mean},
              {"components", mat_to_json(b.components)},
              {"eigenvalues", b.eigenvalues}};
}

PcaBasis pca_from_json(const Json& j) {
  PcaBasis b;
  b.mean = j.at("mean").get<Vec>();
  b.components = mat_from_json(j.at("components"));
  b.eigenvalues = j.at("eigenvalues").get<Vec>();
  return b;
}

Json twod_to_json(const TwoDPcaBasis& b) {
  return Json{{"mean_matrix", mat_to_json(b.mean_matrix)},
              {"components", mat_to_json(b.components)},
              {"eigenvalues", b.eigenvalues}};
}

TwoDPcaBasis twod_from_json(const Json& j) {
  TwoDPcaBasis b;
  b.mean_matrix = mat_from_json(j.at("mean_matrix"));
  b.components = mat_from_json(j.at("components"));
  b.eigenvalues = j.at("eigenvalues").get<Vec>();
  return b;
}

Json bucketing_to_json(const StateBucketing& b) {
  return Json{{"n_states", b.n_states}, {"boundaries", b.boundaries}};
}

StateBucketing bucketing_from_json(const Json& j) {
  StateBucketing b;
  b.n_states = j.at("n_states").get<int>();
  b.boundaries = j.at("boundaries").get<Vec>();
  return b;
}

Json gmm_to_json(const Gmm& g) {
  Json comps = Json::array();
  for (const auto& c : g.components)
    comps.push_back(Json{{"weight", c.weight}, {"mean", c.mean}, {"variance", c.variance}});
  return Json{{"components", comps}};
}

Gmm gmm_from_json(const Json& j) {
  Gmm g;
  for (const auto& cj : j.at("components")) {
    Gmm::Component c;
    c.weight = cj.at("weight").get<double>();
    c.mean = cj.at("mean").get<Vec>();
    c.variance = cj.at("variance").get<Vec>();
    g.components.push_back(std::move(c));
  }
  return g;
}

Json hmm_to_json(const AuHmm& m) {
  Json gmms = Json::array();
  for (const auto& g : m.state_gmms) gmms.push_back(gmm_to_json(g));
  return Json{{"au", m.au},
              {"bank", bank_name(m.bank)},
              {"n_states", m.n_states},
              {"state_gmms", gmms},
              {"transitions", mat_to_json(m.transitions)},
              {"initial", m.initial}};
}

AuHmm hmm_from_json(const Json& j) {
  AuHmm m;
  m.au = j.at("au").get<int>();
  m.bank = parse_bank(j.at("bank").get<std::string>());
  m.n_states = j.at("n_states").get<int>();
  for (const auto& gj : j.at("state_gmms")) m.state_gmms.push_back(gmm_from_json(gj));
  m.transitions = mat_from_json(j.at("transitions"));
  m.initial = j.at("initial").get<Vec>();
  return m;
}

Json fusion_to_json(const FusionNet& n) {
  return Json{{"inputs", n.inputs},
              {"hidden", n.hidden},
              {"outputs", n.outputs},
              {"w1", mat_to_json(n.w1)},
              {"b1", n.b1},
              {"w2", mat_to_json(n.w2)},
              {"b2", n.b2},
              {"input_mean", n.input_mean},
              {"input_std", n.input_std},
              {"slot_masked", n.slot_masked},
              {"final_loss", n.final_loss},
              {"seed", n.seed}};
}

FusionNet fusion_from_json(const Json& j) {
  FusionNet n;
  n.inputs = j.at("inputs").get<int>();
  n.hidden = j.at("hidden").get<int>();
  n.outputs = j.at("outputs").get<int>();
  n.w1 = mat_from_json(j.at("w1"));
  n.b1 = j.at("b1").get<Vec>();
  n.w2 = mat_from_json(j.at("w2"));
  n.b2 = j.at("b2").get<Vec>();
  n.input_mean = j.at("input_mean").get<Vec>();
  n.input_std = j.at("input_std").get<Vec>();
  n.slot_masked = j.at("slot_masked").get<std::vector<bool>>();
  n.final_loss = j.at("final_loss").get<double>();
  n.seed = j.at("seed").get<std::uint64_t>();
  return n;
}

Json rules_to_json(const RuleList& rl) {
  Json rules = Json::array();
  for (const auto& r : rl.rules) {
    Json conds = Json::array();
    for (const auto& c : r.conditions)
      conds.push_back(Json{{"slot", c.slot}, {"at_least", c.at_least}, {"threshold", c.threshold}});
    rules.push_back(Json{{"conditions", conds}, {"label", r.label}});
  }
  return Json{{"rules", rules}, {"default", rl.default_label}};
}

RuleList rules_from_json(const Json& j) {
  RuleList rl;
  for (const auto& rj : j.at("rules")) {
    Rule r;
    r.label = rj.at("label").get<std::string>();
    for (const auto& cj : rj.at("conditions"))
      r.conditions.push_back(RuleCondition{cj.at("slot").get<int>(),
                                           cj.at("at_least").get<bool>(),
                                           cj.at("threshold").get<double>()});
    rl.rules.push_back(std::move(r));
  }
  rl.default_label = j.at("default").get<std::string>();
  return rl;
}

Json config_to_json(const PipelineConfig& c) {
  Json j{{"seed", c.seed},
         {"jobs", c.jobs},
         {"track",
          Json{{"window_half", c.track.window_half},
               {"levels", c.track.pyramid_levels},
               {"max_iterations", c.track.max_iterations},
               {"epsilon", c.track.epsilon},
               {"min_eig_factor", c.track.min_eig_factor}}},
         {"crop_margin", c.crop_margin},
         {"geo_k", c.geo_k},
         {"gabor",
          Json{{"scales", c.gabor.scales},
               {"orientations", c.gabor.orientations},
               {"wavelength_base", c.gabor.wavelength_base},
               {"wavelength_ratio", c.gabor.wavelength_ratio},
               {"sigma_factor", c.gabor.sigma_factor},
               {"aspect", c.gabor.aspect}}},
         {"downsample", c.downsample},
         {"k2d", c.k2d},
         {"kfinal", c.kfinal},
         {"gmm_components", c.gmm_components},
         {"default_states", c.default_states},
         {"fusion",
          Json{{"hidden", c.fusion.hidden},
               {"learning_rate", c.fusion.learning_rate},
               {"momentum", c.fusion.momentum},
               {"epochs", c.fusion.epochs},
               {"seed", c.fusion.seed}}},
         {"threshold", c.threshold},
         {"truncation_copies", c.truncation_copies},
         {"rules", Json{{"max_conditions", c.rules.max_conditions}, {"seed", c.rules.seed}}}};
  Json states = Json::object();
  for (const auto& [au, n] : c.states_per_au) states[std::to_string(au)] = n;
  j["states_per_au"] = states;
  if (c.subsets.upper) j["points_upper"] = *c.subsets.upper;
  if (c.subsets.lower) j["points_lower"] = *c.subsets.lower;
  return j;
}

PipelineConfig config_from_json(const Json& j) {
  PipelineConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.jobs = j.at("jobs").get<int>();
  const Json& t = j.at("track");
  c.track.window_half = t.at("window_half").get<int>();
  c.track.pyramid_levels = t.at("levels").get<int>();
  c.track.max_iterations = t.at("max_iterations").get<int>();
  c.track.epsilon = t.at("epsilon").get<double>();
  c.track.min_eig_factor = t.at("min_eig_factor").get<double>();
  c.crop_margin = j.at("crop_margin").get<double>();
  c.geo_k = j.at("geo_k").get<int>();
  const Json& g = j.at("gabor");
  c.gabor.scales = g.at("scales").get<int>();
  c.gabor.orientations = g.at("orientations").get<int>();
  c.gabor.wavelength_base = g.at("wavelength_base").get<double>();
  c.gabor.wavelength_ratio = g.at("wavelength_ratio").get<double>();
  c.gabor.sigma_factor = g.at("sigma_factor").get<double>();
  c.gabor.aspect = g.at("aspect").get<double>();
  c.downsample = j.at("downsample").get<int>();
  c.k2d = j.at("k2d").get<int>();
  c.kfinal = j.at("kfinal").get<int>();
  c.gmm_components = j.at("gmm_components").get<int>();
  c.default_states = j.at("default_states").get<int>();
  const Json& f = j.at("fusion");
  c.fusion.hidden = f.at("hidden").get<int>();
  c.fusion.learning_rate = f.at("learning_rate").get<double>();
  c.fusion.momentum = f.at("momentum").get<double>();
  c.fusion.epochs = f.at("epochs").get<int>();
  c.fusion.seed = f.at("seed").get<std::uint64_t>();
  c.threshold = j.at("threshold").get<double>();
  c.truncation_copies = j.at("truncation_copies").get<int>();
  c.rules.max_conditions = j.at("rules").at("max_conditions").get<int>();
  c.rules.seed = j.at("rules").at("seed").get<std::uint64_t>();
  for (const auto& [key, value] : j.at("states_per_au").items())
    c.states_per_au[std::stoi(key)] = value.get<int>();
  if (j.contains("points_upper")) c.subsets.upper = j.at("points_upper").get<std::vector<int>>();
  if (j.contains("points_lower")) c.subsets.lower = j.at("points_lower").get<std::vector<int>>();
  return c;
}

Json geo_space_to_json(const GeoFeatureSpace& s) {
  Json bases = Json::array();
  for (const auto& b : s.per_state_basis) bases.push_back(pca_to_json(b));
  return Json{{"bucketing", bucketing_to_json(s.bucketing)}, {"per_state_basis", bases}};
}

GeoFeatureSpace geo_space_from_json(const Json& j) {
  GeoFeatureSpace s;
  s.bucketing = bucketing_from_json(j.at("bucketing"));
  for (const auto& bj : j.at("per_state_basis")) s.per_state_basis.push_back(pca_from_json(bj));
  return s;
}

Json app_space_to_json(const AppearanceFeatureSpace& s) {
  Json channels = Json::array();
  for (const auto& state_bases : s.channel_bases) {
    Json per_state = Json::array();
    for (const auto& b : state_bases) per_state.push_back(twod_to_json(b));
    channels.push_back(per_state);
  }
  Json finals = Json::array();
  for (const auto& b : s.final_basis) finals.push_back(pca_to_json(b));
  return Json{{"bucketing", bucketing_to_json(s.bucketing)},
              {"channel_bases", channels},
              {"final_basis", finals}};
}

AppearanceFeatureSpace app_space_from_json(const Json& j) {
  AppearanceFeatureSpace s;
  s.bucketing = bucketing_from_json(j.at("bucketing"));
  for (const auto& state_j : j.at("channel_bases")) {
    std::vector<TwoDPcaBasis> per_state;
    for (const auto& bj : state_j) per_state.push_back(twod_from_json(bj));
    s.channel_bases.push_back(std::move(per_state));
  }
  for (const auto& bj : j.at("final_basis")) s.final_basis.push_back(pca_from_json(bj));
  return s;
}

}  // namespace

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle) {
  Json j;
  j["config"] = config_to_json(bundle.config);
  j["region"] = region_name(bundle.region);
  j["au_list"] = bundle.au_list;
  Json geo_spaces = Json::object();
  for (const auto& [n, s] : bundle.geo_spaces) geo_spaces[std::to_string(n)] = geo_space_to_json(s);
  j["geo_spaces"] = geo_spaces;
  Json app_spaces = Json::object();
  for (const auto& [n, s] : bundle.app_spaces) app_spaces[std::to_string(n)] = app_space_to_json(s);
  j["app_spaces"] = app_spaces;
  Json geo_models = Json::array(), app_models = Json::array();
  for (const auto& m : bundle.geo_models) geo_models.push_back(hmm_to_json(m));
  for (const auto& m : bundle.app_models) app_models.push_back(hmm_to_json(m));
  j["geo_models"] = geo_models;
  j["app_models"] = app_models;
  j["fusion"] = fusion_to_json(bundle.fusion);
  if (bundle.rule_list) j["rules"] = rules_to_json(*bundle.rule_list);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write bundle '" + path.string() + "'");
  out << kMagic << " " << kVersion << "\n" << j.dump(1, '\t') << "\n";
  if (!out) throw data_error("failed writing bundle '" + path.string() + "'");
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open bundle '" + path.string() + "'");
  std::string magic;
  int version = -1;
  in >> magic >> version;
  if (magic != kMagic) throw data_error("'" + path.string() + "': not a model bundle");
  if (version != kVersion)
    throw data_error("'" + path.string() + "': bundle version " + std::to_string(version) +
                     " not supported (expected " + std::to_string(kVersion) + ")");
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw data_error("'" + path.string() + "': corrupt bundle (" + e.what() + ")");
  }

  ModelBundle bundle;
  try {
    bundle.version = version;
    bundle.config = config_from_json(j.at("config"));
    bundle.region = parse_region(j.at("region").get<std::string>());
    bundle.au_list = j.at("au_list").get<std::vector<int>>();
    for (const auto& [key, value] : j.at("geo_spaces").items())
      bundle.geo_spaces.emplace(std::stoi(key), geo_space_from_json(value));
    for (const auto& [key, value] : j.at("app_spaces").items())
      bundle.app_spaces.emplace(std::stoi(key), app_space_from_json(value));
    for (const auto& mj : j.at("geo_models")) bundle.geo_models.push_back(hmm_from_json(mj));
    for (const auto& mj : j.at("app_models")) bundle.app_models.push_back(hmm_from_json(mj));
    bundle.fusion = fusion_from_json(j.at("fusion"));
    if (j.contains("rules")) bundle.rule_list = rules_from_json(j.at("rules"));
  } catch (const data_error&) {
    throw;
  } catch (const std::exception& e) {
    throw data_error("'" + path.string() + "': corrupt bundle (" + e.what() + ")");
  }
  return bundle;
}

}  // namespace aurec
