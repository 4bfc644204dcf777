#pragma once

#include <string>
#include <variant>

#include "json.hpp"
#include "rocsurv/concordance.hpp"
#include "rocsurv/forest.hpp"
#include "rocsurv/roc_tree.hpp"

namespace rocsurv {

using Json = nlohmann::json;

inline constexpr const char* kTreeSchema = "rocsurv.tree/1";
inline constexpr const char* kForestSchema = "rocsurv.forest/1";

Json to_json(const TimeGrid& grid);
TimeGrid grid_from_json(const Json& j);

Json to_json(const ConcordanceReport& report);

/// Tree documents carry the split rules, leaf curves, grid, bandwidth, the
/// frozen ECDF tables and the leaf counting-process increments, so a loaded
/// tree predicts without the training data.
Json to_json(const RocTree& tree);
RocTree tree_from_json(const Json& j);

/// Forest documents embed the training histories; the transform is rebuilt
/// on load from the stored grid.
Json to_json(const ForestModel& forest);
ForestModel forest_from_json(const Json& j);

using Model = std::variant<RocTree, ForestModel>;

Model model_from_json(const Json& j);
Model load_model(const std::string& path);

/// Writes to a temporary file in the same directory and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace rocsurv
