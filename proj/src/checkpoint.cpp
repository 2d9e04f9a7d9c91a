#include "mntp/checkpoint.hpp"

#include <fstream>

#include "mntp/runconfig.hpp"

namespace mntp {

namespace {

using nlohmann::ordered_json;

void write_floats(std::ofstream& out, const float* data, size_t count) {
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(count * sizeof(float)));
}

void read_floats(std::ifstream& in, float* data, size_t count,
                 uint64_t offset) {
  in.read(reinterpret_cast<char*>(data),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (static_cast<size_t>(in.gcount()) != count * sizeof(float))
    throw FormatError("checkpoint blob truncated", offset);
}

}  // namespace

void Checkpoint::restore_optimizer(AdamW& opt) const {
  if (!has_optimizer)
    throw CapabilityError("checkpoint was saved without optimizer state and "
                          "supports inference only");
  opt.moments_m() = opt_m;
  opt.moments_v() = opt_v;
  opt.set_t(opt_t);
}

void save_checkpoint(const std::string& prefix, const ModelState<float>& state,
                     const TrainConfig& train, int64_t step,
                     const AdamW* opt) {
  auto params = state.named_params();
  if (opt && !opt->moments_m().empty() &&
      opt->moments_m().size() != params.size())
    throw ArgumentError("optimizer state does not match the parameter list");
  bool with_opt = opt && !opt->moments_m().empty();

  ordered_json manifest;
  manifest["format"] = "mntp-checkpoint";
  manifest["version"] = 1;
  manifest["step"] = step;
  manifest["model"] = to_json(state.cfg);
  manifest["head"] = to_json(state.head.cfg);
  manifest["train"] = to_json(train);
  ordered_json plist = ordered_json::array();
  for (const auto& [name, t] : params) {
    ordered_json shape = ordered_json::array();
    for (int d : t.shape()) shape.push_back(d);
    plist.push_back(ordered_json{{"name", name}, {"shape", shape}});
  }
  manifest["params"] = plist;
  manifest["optimizer"] =
      ordered_json{{"present", with_opt}, {"t", with_opt ? opt->t() : 0}};

  std::ofstream mf(prefix + ".manifest.json", std::ios::trunc);
  if (!mf)
    throw ArgumentError("cannot write checkpoint manifest at '" + prefix +
                        ".manifest.json'");
  mf << manifest.dump(2) << "\n";
  mf.close();
  if (!mf) throw Error("failed writing checkpoint manifest");

  std::ofstream blob(prefix + ".blob", std::ios::binary | std::ios::trunc);
  if (!blob)
    throw ArgumentError("cannot write checkpoint blob at '" + prefix +
                        ".blob'");
  for (const auto& [name, t] : params)
    write_floats(blob, t.vals().data(), static_cast<size_t>(t.size()));
  if (with_opt) {
    for (const auto& m : opt->moments_m())
      write_floats(blob, m.data(), m.size());
    for (const auto& v : opt->moments_v())
      write_floats(blob, v.data(), v.size());
  }
  blob.close();
  if (!blob) throw Error("failed writing checkpoint blob");
}

Checkpoint load_checkpoint(const std::string& prefix) {
  std::ifstream mf(prefix + ".manifest.json");
  if (!mf)
    throw ArgumentError("cannot open checkpoint manifest at '" + prefix +
                        ".manifest.json'");
  ordered_json manifest;
  try {
    manifest = ordered_json::parse(mf);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint manifest: ") + e.what(), 0);
  }
  if (manifest.value("format", "") != "mntp-checkpoint" ||
      manifest.value("version", 0) != 1)
    throw FormatError("not a version-1 checkpoint manifest", 0);

  Checkpoint ck;
  ck.step = manifest.at("step").get<int64_t>();
  ModelConfig mc = model_config_from_json(manifest.at("model"), "model");
  HeadConfig hc = head_config_from_json(manifest.at("head"), "head");
  ck.train = train_config_from_json(manifest.at("train"), "train");
  ck.state = make_model<float>(mc, hc, 0);

  auto params = ck.state.named_params();
  const auto& plist = manifest.at("params");
  if (plist.size() != params.size())
    throw FormatError("manifest parameter list does not match the model", 0);
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& entry = plist.at(i);
    if (entry.at("name").get<std::string>() != params[i].first)
      throw FormatError("parameter order mismatch at '" + params[i].first +
                        "'", 0);
    std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
    if (shape != params[i].second.shape())
      throw FormatError("parameter shape mismatch at '" + params[i].first +
                        "'", 0);
  }

  std::ifstream blob(prefix + ".blob", std::ios::binary);
  if (!blob)
    throw ArgumentError("cannot open checkpoint blob at '" + prefix +
                        ".blob'");
  uint64_t offset = 0;
  for (auto& [name, t] : params) {
    read_floats(blob, t.vals_mut().data(), static_cast<size_t>(t.size()),
                offset);
    offset += static_cast<uint64_t>(t.size()) * sizeof(float);
  }
  const auto& oj = manifest.at("optimizer");
  ck.has_optimizer = oj.at("present").get<bool>();
  if (ck.has_optimizer) {
    ck.opt_t = oj.at("t").get<int64_t>();
    ck.opt_m.resize(params.size());
    ck.opt_v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      ck.opt_m[i].resize(static_cast<size_t>(params[i].second.size()));
      read_floats(blob, ck.opt_m[i].data(), ck.opt_m[i].size(), offset);
      offset += ck.opt_m[i].size() * sizeof(float);
    }
    for (size_t i = 0; i < params.size(); ++i) {
      ck.opt_v[i].resize(static_cast<size_t>(params[i].second.size()));
      read_floats(blob, ck.opt_v[i].data(), ck.opt_v[i].size(), offset);
      offset += ck.opt_v[i].size() * sizeof(float);
    }
  }
  blob.peek();
  if (!blob.eof())
    throw FormatError("checkpoint blob has trailing bytes", offset);
  return ck;
}

}  // namespace mntp
