#include <fmt/format.h>

#include <json.hpp>

#include <algorithm>

#include "text_util.hpp"
#include "treeforget/errors.hpp"
#include "treeforget/forest.hpp"

namespace treeforget {

namespace {

using Json = nlohmann::ordered_json;

constexpr int kModelVersion = 1;

template <typename T>
T field(const Json& obj, const char* key, std::string_view where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ModelFormatError(fmt::format("{}: missing `{}`", where, key));
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ModelFormatError(fmt::format("{}: `{}` has the wrong type", where, key));
  }
}

Tree tree_from_json(const Json& nodes_json, std::size_t t) {
  if (!nodes_json.is_array() || nodes_json.empty()) {
    throw ModelFormatError(fmt::format("tree {}: `nodes` must be a non-empty array", t));
  }
  std::vector<std::pair<std::int64_t, TreeNode>> indexed;
  for (const auto& rec : nodes_json) {
    const auto where = fmt::format("tree {} node record", t);
    if (!rec.is_object()) throw ModelFormatError(where + " is not an object");
    const auto id = field<std::int64_t>(rec, "id", where);
    const auto kind = field<std::string>(rec, "kind", where);
    TreeNode node;
    if (kind == "leaf") {
      node.scores = field<std::vector<double>>(rec, "scores", where);
    } else if (kind == "split") {
      node.feature = field<std::int32_t>(rec, "feature", where);
      node.threshold = field<double>(rec, "threshold", where);
      node.left = field<std::int32_t>(rec, "left", where);
      node.right = field<std::int32_t>(rec, "right", where);
      if (node.left < 0 || node.right < 0) {
        throw ModelFormatError(fmt::format("tree {} node {}: negative child id", t, id));
      }
    } else {
      throw ModelFormatError(fmt::format("tree {} node {}: unknown kind `{}`", t, id, kind));
    }
    indexed.emplace_back(id, std::move(node));
  }
  std::sort(indexed.begin(), indexed.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<TreeNode> nodes;
  for (std::size_t i = 0; i < indexed.size(); ++i) {
    if (indexed[i].first != static_cast<std::int64_t>(i)) {
      throw ModelFormatError(fmt::format("tree {}: node ids must be 0..{}", t, indexed.size() - 1));
    }
    nodes.push_back(std::move(indexed[i].second));
  }
  try {
    return Tree(std::move(nodes));
  } catch (const ModelFormatError& e) {
    throw ModelFormatError(fmt::format("tree {}: {}", t, e.what()));
  }
}

}  // namespace

std::string model_to_json(const Ensemble& g) {
  Json doc;
  doc["version"] = kModelVersion;
  doc["num_classes"] = g.num_classes();
  doc["feature_names"] = g.feature_names();
  Json trees = Json::array();
  for (std::size_t t = 0; t < g.trees().size(); ++t) {
    Json nodes = Json::array();
    const auto& tree = g.trees()[t];
    for (std::size_t id = 0; id < tree.size(); ++id) {
      const auto& n = tree.node(id);
      Json rec;
      rec["id"] = id;
      if (n.is_leaf()) {
        rec["kind"] = "leaf";
        rec["scores"] = n.scores;
      } else {
        rec["kind"] = "split";
        rec["feature"] = n.feature;
        rec["threshold"] = n.threshold;
        rec["left"] = n.left;
        rec["right"] = n.right;
      }
      nodes.push_back(std::move(rec));
    }
    Json tree_json;
    tree_json["weight"] = g.weights()[t];
    tree_json["nodes"] = std::move(nodes);
    trees.push_back(std::move(tree_json));
  }
  doc["trees"] = std::move(trees);
  return doc.dump(1) + "\n";
}

Ensemble model_from_json(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelFormatError(fmt::format("malformed model JSON: {}", e.what()));
  }
  if (!doc.is_object()) throw ModelFormatError("model must be a JSON object");
  const auto version = field<int>(doc, "version", "model");
  if (version != kModelVersion) {
    throw ModelFormatError(fmt::format("unsupported model version {} (expected {})", version,
                                       kModelVersion));
  }
  const auto num_classes = field<std::size_t>(doc, "num_classes", "model");
  auto feature_names = field<std::vector<std::string>>(doc, "feature_names", "model");
  const auto it = doc.find("trees");
  if (it == doc.end() || !it->is_array()) throw ModelFormatError("model: `trees` must be an array");
  std::vector<Tree> trees;
  std::vector<double> weights;
  for (std::size_t t = 0; t < it->size(); ++t) {
    const auto& tj = (*it)[t];
    if (!tj.is_object()) throw ModelFormatError(fmt::format("tree {} is not an object", t));
    weights.push_back(field<double>(tj, "weight", fmt::format("tree {}", t)));
    const auto nodes = tj.find("nodes");
    if (nodes == tj.end()) throw ModelFormatError(fmt::format("tree {}: missing `nodes`", t));
    trees.push_back(tree_from_json(*nodes, t));
  }
  return {std::move(trees), std::move(weights), num_classes, std::move(feature_names)};
}

void save_model(const Ensemble& g, const std::filesystem::path& path) {
  detail::write_file(path, model_to_json(g));
}

Ensemble load_model(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IngestError("model file not found: " + path.string());
  return model_from_json(detail::read_file(path));
}

}  // namespace treeforget
