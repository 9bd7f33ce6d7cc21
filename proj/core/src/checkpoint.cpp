#include "actc/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "actc/error.hpp"
#include "actc/tensor_io.hpp"
#include "json_util.hpp"

namespace actc {

namespace {
constexpr const char* kPayload = "params.actt";
}

void save_checkpoint(const std::filesystem::path& dir, const ModelGraph& model, const Parameters& params,
                     std::int64_t step) {
  model.check_params(params);
  std::filesystem::create_directories(dir);
  using detail::json;
  json doc;
  doc["format"] = "actc-checkpoint";
  doc["version"] = 1;
  doc["step"] = step;
  doc["payload"] = kPayload;
  json list = json::array();
  for (const ParamInfo& p : model.params()) list.push_back({{"name", p.name}, {"shape", p.shape}});
  doc["params"] = std::move(list);
  save_tensors(dir / kPayload, params);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw FormatError("cannot write " + (dir / "manifest.json").string());
  out << doc.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir, const ModelGraph& model) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw FormatError("no checkpoint manifest in " + dir.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const auto doc = detail::parse_json(ss.str(), "checkpoint manifest");
  detail::require_known_keys(doc, {"format", "version", "step", "payload", "params"}, "checkpoint manifest");
  if (detail::get_required<std::string>(doc, "format", "checkpoint manifest") != "actc-checkpoint") {
    throw FormatError("unrecognized checkpoint format in " + dir.string());
  }
  Checkpoint c;
  c.step = detail::get_required<std::int64_t>(doc, "step", "checkpoint manifest");
  c.params = load_tensors(dir / detail::get_required<std::string>(doc, "payload", "checkpoint manifest"));
  const auto names = doc.at("params");
  if (names.size() != model.params().size()) throw FormatError("checkpoint parameter count does not match model");
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i].value("name", "") != model.params()[i].name) {
      throw FormatError("checkpoint parameter " + std::to_string(i) + " is not " + model.params()[i].name);
    }
  }
  model.check_params(c.params);
  return c;
}

}  // namespace actc
