#include "rocsurv/model_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rocsurv/errors.hpp"

namespace rocsurv {

namespace {

Json partition_to_json(const Partition& partition, bool curves) {
  Json nodes = Json::array();
  for (const auto& node : partition.nodes) {
    Json n;
    n["parent"] = node.parent;
    n["baseline_count"] = node.baseline_count;
    if (node.split) {
      n["coordinate"] = node.split->coordinate;
      n["threshold"] = node.split->threshold;
      n["left"] = node.left;
      n["right"] = node.right;
    }
    if (curves && !node.f_star.empty()) {
      n["f_star"] = node.f_star;
      n["s_star"] = node.s_star;
    }
    nodes.push_back(std::move(n));
  }
  return nodes;
}

Partition partition_from_json(const Json& nodes) {
  Partition partition;
  for (const auto& n : nodes) {
    TreeNode node;
    node.parent = n.at("parent").get<int>();
    node.baseline_count = n.at("baseline_count").get<double>();
    if (n.contains("coordinate")) {
      node.split = SplitRule{n.at("coordinate").get<std::size_t>(), n.at("threshold").get<double>()};
      node.left = n.at("left").get<int>();
      node.right = n.at("right").get<int>();
    }
    if (n.contains("f_star")) {
      node.f_star = n.at("f_star").get<std::vector<double>>();
      node.s_star = n.at("s_star").get<std::vector<double>>();
    }
    partition.nodes.push_back(std::move(node));
  }
  if (partition.nodes.empty()) throw DataError("model has no nodes");
  return partition;
}

Json policy_to_json(const BandwidthPolicy& policy) {
  return {{"mode", policy.mode == BandwidthMode::global_fixed ? "global_fixed" : "node_adaptive"},
          {"global_h", policy.global_h},
          {"c", policy.c},
          {"horizon", policy.horizon}};
}

BandwidthPolicy policy_from_json(const Json& j) {
  BandwidthPolicy policy;
  const auto mode = j.at("mode").get<std::string>();
  if (mode == "global_fixed") {
    policy.mode = BandwidthMode::global_fixed;
  } else if (mode == "node_adaptive") {
    policy.mode = BandwidthMode::node_adaptive;
  } else {
    throw DataError("unknown bandwidth mode '" + mode + "'");
  }
  policy.global_h = j.at("global_h").get<double>();
  policy.c = j.at("c").get<double>();
  policy.horizon = j.at("horizon").get<double>();
  return policy;
}

Json optional_array(const std::vector<std::optional<double>>& values) {
  Json out = Json::array();
  for (const auto& v : values) out.push_back(v ? Json(*v) : Json(nullptr));
  return out;
}

std::vector<std::optional<double>> optional_array_from(const Json& j) {
  std::vector<std::optional<double>> out;
  for (const auto& v : j) out.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
  return out;
}

Json dataset_to_json(const Dataset& data) {
  Json subjects = Json::array();
  for (const auto& s : data.subjects) {
    subjects.push_back({{"id", s.id},
                        {"starts", s.starts},
                        {"stops", s.stops},
                        {"values", s.values},
                        {"y", s.y},
                        {"event", s.event}});
  }
  return {{"covariate_names", data.covariate_names}, {"horizon", data.horizon}, {"subjects", subjects}};
}

Dataset dataset_from_json(const Json& j) {
  std::vector<CovariatePath> paths;
  for (const auto& s : j.at("subjects")) {
    CovariatePath path;
    path.id = s.at("id").get<std::string>();
    path.starts = s.at("starts").get<std::vector<double>>();
    path.stops = s.at("stops").get<std::vector<double>>();
    path.values = s.at("values").get<std::vector<double>>();
    path.y = s.at("y").get<double>();
    path.event = s.at("event").get<bool>();
    paths.push_back(std::move(path));
  }
  return Dataset::make(std::move(paths), j.at("covariate_names").get<std::vector<std::string>>(),
                       j.at("horizon").get<double>());
}

void expect_schema(const Json& j, const char* schema) {
  if (!j.contains("schema") || j.at("schema").get<std::string>() != schema) {
    throw DataError(std::string("unsupported model schema (expected ") + schema + ")");
  }
}

}  // namespace

Json to_json(const TimeGrid& grid) { return {{"times", grid.times}, {"weights", grid.weights}}; }

TimeGrid grid_from_json(const Json& j) {
  TimeGrid grid;
  grid.times = j.at("times").get<std::vector<double>>();
  grid.weights = j.at("weights").get<std::vector<double>>();
  grid.validate();
  return grid;
}

Json to_json(const ConcordanceReport& report) {
  return {{"times", report.times}, {"weights", report.weights}, {"con_t", optional_array(report.con)},
          {"icon", report.icon}};
}

Json to_json(const RocTree& tree) {
  Json j;
  j["schema"] = kTreeSchema;
  j["p"] = tree.p;
  j["n_min"] = tree.n_min;
  j["seed"] = tree.seed;
  j["criterion"] = to_string(tree.criterion);
  j["grid"] = to_json(tree.grid);
  j["bandwidth"] = policy_to_json(tree.policy);
  j["nodes"] = partition_to_json(tree.partition, true);
  Json leaves = Json::array();
  for (const auto& curve : tree.leaf_curves) {
    leaves.push_back({{"f_star", curve.f_star},
                      {"s_star", curve.s_star},
                      {"hazard", optional_array(curve.hazard)},
                      {"bandwidth", curve.bandwidth}});
  }
  j["leaf_curves"] = std::move(leaves);
  Json ecdf = Json::array();
  for (std::size_t a = 0; a < tree.ecdf->num_anchors(); ++a) {
    Json anchor = Json::array();
    for (std::size_t c = 0; c < tree.ecdf->dim(); ++c) anchor.push_back(tree.ecdf->sorted_values(a, c));
    ecdf.push_back(std::move(anchor));
  }
  j["ecdf"] = std::move(ecdf);
  j["increments"] = {{"event_times", tree.increments.event_times},
                     {"num_leaves", tree.increments.num_leaves},
                     {"events", tree.increments.events},
                     {"at_risk", tree.increments.at_risk}};
  j["pruning"] = {{"icon", tree.pruning.icon},
                  {"alpha", tree.pruning.alpha},
                  {"sizes", tree.pruning.sizes},
                  {"beta", tree.pruning.beta}};
  j["cv"] = {{"beta", tree.cv.beta},
             {"mean_heldout_icon", tree.cv.mean_heldout_icon},
             {"folds_used", tree.cv.folds_used},
             {"warnings", tree.cv.warnings},
             {"selected_beta", tree.cv.selected_beta}};
  return j;
}

RocTree tree_from_json(const Json& j) {
  expect_schema(j, kTreeSchema);
  RocTree tree;
  tree.p = j.at("p").get<std::size_t>();
  tree.n_min = j.at("n_min").get<std::size_t>();
  tree.seed = j.at("seed").get<std::uint64_t>();
  tree.criterion = parse_split_criterion(j.at("criterion").get<std::string>());
  tree.grid = grid_from_json(j.at("grid"));
  tree.policy = policy_from_json(j.at("bandwidth"));
  tree.partition = partition_from_json(j.at("nodes"));
  for (const auto& leaf : j.at("leaf_curves")) {
    NodeHazardCurve curve;
    curve.f_star = leaf.at("f_star").get<std::vector<double>>();
    curve.s_star = leaf.at("s_star").get<std::vector<double>>();
    curve.hazard = optional_array_from(leaf.at("hazard"));
    curve.bandwidth = leaf.at("bandwidth").get<double>();
    tree.leaf_curves.push_back(std::move(curve));
  }
  tree.ecdf = std::make_shared<EcdfTable>(EcdfTable::from_parts(
      tree.grid, tree.p, j.at("ecdf").get<std::vector<std::vector<std::vector<double>>>>()));
  const auto& inc = j.at("increments");
  tree.increments.event_times = inc.at("event_times").get<std::vector<double>>();
  tree.increments.num_leaves = inc.at("num_leaves").get<std::size_t>();
  tree.increments.events = inc.at("events").get<std::vector<double>>();
  tree.increments.at_risk = inc.at("at_risk").get<std::vector<double>>();
  if (tree.increments.num_leaves != tree.partition.num_leaves() ||
      tree.leaf_curves.size() != tree.increments.num_leaves) {
    throw DataError("model leaf tables are inconsistent");
  }
  const auto& pr = j.at("pruning");
  tree.pruning.icon = pr.at("icon").get<std::vector<double>>();
  tree.pruning.alpha = pr.at("alpha").get<std::vector<double>>();
  tree.pruning.sizes = pr.at("sizes").get<std::vector<std::size_t>>();
  tree.pruning.beta = pr.at("beta").get<std::vector<double>>();
  const auto& cv = j.at("cv");
  tree.cv.beta = cv.at("beta").get<std::vector<double>>();
  tree.cv.mean_heldout_icon = cv.at("mean_heldout_icon").get<std::vector<double>>();
  tree.cv.folds_used = cv.at("folds_used").get<std::size_t>();
  tree.cv.warnings = cv.at("warnings").get<std::vector<std::string>>();
  tree.cv.selected_beta = cv.at("selected_beta").get<double>();
  return tree;
}

Json to_json(const ForestModel& forest) {
  Json j;
  j["schema"] = kForestSchema;
  const auto& o = forest.options;
  j["options"] = {{"trees", o.trees},
                  {"mtry", forest.mtry},
                  {"n_min", o.n_min},
                  {"mode", to_string(o.mode)},
                  {"subsample_fraction", o.subsample_fraction},
                  {"criterion", to_string(o.criterion)},
                  {"seed", o.seed}};
  j["grid"] = to_json(forest.grid());
  j["bandwidth"] = policy_to_json(forest.policy);
  j["training"] = dataset_to_json(*forest.data->source);
  Json trees = Json::array();
  for (const auto& tree : forest.trees) {
    trees.push_back({{"nodes", partition_to_json(tree.partition, false)},
                     {"weights", tree.weights},
                     {"split_half", tree.split_half}});
  }
  j["trees"] = std::move(trees);
  return j;
}

ForestModel forest_from_json(const Json& j) {
  expect_schema(j, kForestSchema);
  ForestModel forest;
  const auto& o = j.at("options");
  forest.options.trees = o.at("trees").get<std::size_t>();
  forest.mtry = o.at("mtry").get<std::size_t>();
  forest.options.mtry = forest.mtry;
  forest.options.n_min = o.at("n_min").get<std::size_t>();
  forest.options.mode = parse_resample_mode(o.at("mode").get<std::string>());
  forest.options.subsample_fraction = o.at("subsample_fraction").get<double>();
  forest.options.criterion = parse_split_criterion(o.at("criterion").get<std::string>());
  forest.options.seed = o.at("seed").get<std::uint64_t>();
  forest.policy = policy_from_json(j.at("bandwidth"));
  auto data = std::make_shared<const Dataset>(dataset_from_json(j.at("training")));
  forest.data = std::make_shared<const TransformedDataset>(transform(data, grid_from_json(j.at("grid"))));
  for (const auto& t : j.at("trees")) {
    ForestTree tree;
    tree.partition = partition_from_json(t.at("nodes"));
    tree.weights = t.at("weights").get<std::vector<double>>();
    tree.split_half = t.at("split_half").get<std::vector<std::uint32_t>>();
    if (tree.weights.size() != data->size()) throw DataError("forest weights do not match the training data");
    forest.trees.push_back(std::move(tree));
  }
  if (forest.trees.empty()) throw DataError("forest model has no trees");
  return forest;
}

Model model_from_json(const Json& j) {
  const auto schema = j.value("schema", std::string());
  if (schema == kTreeSchema) return tree_from_json(j);
  if (schema == kForestSchema) return forest_from_json(j);
  throw DataError("unsupported model schema '" + schema + "'");
}

Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw DataError("malformed model file '" + path + "': " + e.what());
  }
  try {
    return model_from_json(j);
  } catch (const Json::exception& e) {
    throw DataError("malformed model file '" + path + "': " + e.what());
  }
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out << contents;
    out.flush();
    if (!out) throw DataError("failed while writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw DataError("cannot move model into place at '" + path + "': " + ec.message());
  }
}

}  // namespace rocsurv
