// Operator surface: dataset synthesis, training, sampling, evaluation,
// ablation presets, schedule histograms and codec checks. Exit codes:
// 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mntp/checkpoint.hpp"
#include "mntp/codec.hpp"
#include "mntp/decode.hpp"
#include "mntp/eval.hpp"
#include "mntp/masking.hpp"
#include "mntp/runconfig.hpp"
#include "mntp/trainer.hpp"

using nlohmann::ordered_json;

namespace {

struct MakeDataArgs {
  std::string process, out;
  int count = 0, length = 32, classes = 3, skip = 0;
  uint64_t seed = 0;
  int64_t process_seed = -1;  // < 0: same as seed
  int dim = 4, cond_len = 2, cond_dim = 3;
  double rho = 0.8, sigma = 0.5;
  int frames = 16, bands = 16, channels = 2, patch = 4;
  double noise = 0.05;
};

struct TrainArgs {
  std::string config, resume, data, out;
  int64_t steps = -1;  // < 0: take the config's value
};

struct SampleArgs {
  std::string ckpt, out, cond_from, order = "causal";
  int count = 0, n = 0, rounds = 8;
  uint64_t seed = 0;
  int steps = 100;
  double tau = 1.0, omega0 = 7.0;
  bool cfg = false, lower_variance = false;
};

struct EvalArgs {
  std::string ckpt, data, gen, sidecar, out;
  int reps = 4;
  uint64_t eval_seed = 1000;
  double rtf_clip_seconds = 0.0;
  int rtf_n = 256, rtf_steps = 100;
};

struct AblateArgs {
  std::string row, model = "mini", data, out;
  int64_t steps = 0;
  int batch = 64, max_seq = 0;
  double lr = 1e-4;
  uint64_t seed = 0;
};

struct HistArgs {
  std::string preset, out_csv;
  int bins = 50;
  int64_t samples = 100000;
  uint64_t seed = 0;
};

struct RoundtripArgs {
  std::string geometry;
  uint64_t seed = 0;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw mntp::ArgumentError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw mntp::ArgumentError("failed writing '" + path + "'");
}

ordered_json slurp_json(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw mntp::ArgumentError("cannot open '" + path + "'");
  try {
    return ordered_json::parse(f);
  } catch (const ordered_json::parse_error& e) {
    throw mntp::ArgumentError(path + ": " + e.what());
  }
}

int cmd_make_data(const MakeDataArgs& a) {
  if (a.skip < 0) throw mntp::ArgumentError("make-data: skip must be >= 0");
  std::vector<mntp::CvtkRecord> records;
  ordered_json sidecar;
  sidecar["process"] = a.process;
  sidecar["count"] = a.count;
  sidecar["skip"] = a.skip;
  sidecar["seed"] = a.seed;
  uint64_t pseed = a.process_seed < 0 ? a.seed
                                      : static_cast<uint64_t>(a.process_seed);
  int total = a.skip + a.count;
  if (a.process == "gaussian-ar") {
    mntp::GaussianArProcess proc = mntp::make_gaussian_ar_process(
        a.dim, a.classes, a.rho, a.sigma, a.cond_len, a.cond_dim, pseed);
    records = mntp::sample_gaussian_ar_dataset(proc, total, a.length, a.seed);
    sidecar["length"] = a.length;
    ordered_json p;
    p["dim"] = proc.dim;
    p["classes"] = proc.classes;
    p["rho"] = proc.rho;
    p["sigma"] = proc.sigma;
    p["cond_len"] = proc.cond_len;
    p["cond_dim"] = proc.cond_dim;
    p["seed"] = proc.seed;
    p["A"] = proc.A;
    p["class_bias"] = proc.class_bias;
    p["class_cond"] = proc.class_cond;
    sidecar["params"] = std::move(p);
  } else if (a.process == "sinusoid-map") {
    records = mntp::sample_sinusoid_map_dataset(
        a.frames, a.bands, a.channels, a.patch, a.classes, a.noise,
        a.cond_len, a.cond_dim, total, a.seed);
    ordered_json p;
    p["frames"] = a.frames;
    p["bands"] = a.bands;
    p["channels"] = a.channels;
    p["patch"] = a.patch;
    p["classes"] = a.classes;
    p["noise"] = a.noise;
    p["cond_len"] = a.cond_len;
    p["cond_dim"] = a.cond_dim;
    sidecar["params"] = std::move(p);
  } else {
    throw mntp::ArgumentError("unknown process '" + a.process +
                              "' (expected gaussian-ar or sinusoid-map)");
  }
  records.erase(records.begin(), records.begin() + a.skip);
  mntp::write_cvtk(a.out, records);
  write_text(a.out + ".json", sidecar.dump(2) + "\n");
  std::cout << "wrote " << records.size() << " records to " << a.out << "\n";
  return 0;
}

int run_training(mntp::ModelState<float> model, const mntp::TrainConfig& tc,
                 const std::vector<mntp::CvtkRecord>& data,
                 const std::string& out, int64_t start_step,
                 const mntp::Checkpoint* resume_from) {
  mntp::Trainer trainer(std::move(model), tc);
  if (resume_from) resume_from->restore_optimizer(trainer.optimizer());
  std::ofstream csv(out + ".loss.csv", start_step == 0
                                           ? std::ios::binary
                                           : std::ios::binary | std::ios::app);
  if (!csv)
    throw mntp::ArgumentError("cannot open '" + out + ".loss.csv'");
  // The trainer emits the header only at step 0; a resume that lands in a
  // fresh file still gets one.
  if (start_step > 0 && csv.tellp() == std::streamoff(0)) csv << "step,loss\n";
  trainer.run(data, start_step, &csv);
  mntp::save_checkpoint(out, trainer.model(), trainer.config(),
                        trainer.config().steps, &trainer.optimizer());
  std::cout << "trained to step " << trainer.config().steps
            << ", checkpoint at " << out << ".manifest.json\n";
  return 0;
}

int cmd_train(const TrainArgs& a) {
  auto data = mntp::read_cvtk(a.data);
  if (!a.resume.empty()) {
    mntp::Checkpoint ck = mntp::load_checkpoint(a.resume);
    mntp::TrainConfig tc = ck.train;
    if (a.steps >= 0) tc.steps = a.steps;
    if (tc.steps < ck.step)
      throw mntp::ArgumentError("checkpoint is already at step " +
                                std::to_string(ck.step));
    return run_training(std::move(ck.state), tc, data, a.out, ck.step, &ck);
  }
  mntp::RunConfig rc = mntp::load_run_config(a.config);
  if (a.steps >= 0) rc.train.steps = a.steps;
  auto model =
      mntp::make_model<float>(rc.model, rc.head, rc.train.seed);
  return run_training(std::move(model), rc.train, data, a.out, 0, nullptr);
}

int cmd_sample(const SampleArgs& a) {
  mntp::Checkpoint ck = mntp::load_checkpoint(a.ckpt);
  const mntp::ModelConfig& mc = ck.state.cfg;
  mntp::NoiseSchedule sched = mntp::NoiseSchedule::cosine(ck.train.diffusion_T);
  mntp::DecodePolicy policy;
  policy.steps = a.steps;
  policy.tau = a.tau;
  policy.omega0 = a.omega0;
  policy.cfg = a.cfg;
  policy.lower_variance = a.lower_variance;
  if (a.count < 1) throw mntp::ArgumentError("sample: count must be positive");

  std::vector<std::vector<float>> conds(a.count);
  if (!a.cond_from.empty()) {
    auto source = mntp::read_cvtk(a.cond_from);
    if (source.empty())
      throw mntp::ArgumentError("sample: condition source is empty");
    for (int i = 0; i < a.count; ++i)
      conds[i] = mntp::fit_condition(source[i % source.size()].cond,
                                     mc.cond_len, mc.cond_dim);
  }
  std::vector<uint64_t> ids(a.count);
  for (int i = 0; i < a.count; ++i) ids[i] = static_cast<uint64_t>(i);

  std::vector<std::vector<float>> tokens;
  if (a.order == "causal") {
    tokens = mntp::decode_causal(ck.state, sched, policy, conds, a.n, a.seed,
                                 ids);
  } else if (a.order == "random" || a.order == "l2r") {
    tokens = mntp::decode_random_order(ck.state, sched, policy, conds, a.n,
                                       a.rounds, a.order == "l2r", a.seed,
                                       ids);
  } else {
    throw mntp::ArgumentError("sample: order must be causal, random or l2r");
  }

  std::vector<mntp::CvtkRecord> records(a.count);
  for (int i = 0; i < a.count; ++i) {
    mntp::CvtkRecord& rec = records[i];
    rec.token_count = static_cast<uint32_t>(a.n);
    rec.token_dim = static_cast<uint32_t>(mc.token_dim);
    if (!conds[i].empty()) {
      rec.cond_len = static_cast<uint32_t>(mc.cond_len);
      rec.cond_dim = static_cast<uint32_t>(mc.cond_dim);
      rec.cond = conds[i];
    }
    rec.tokens = std::move(tokens[i]);
  }
  mntp::write_cvtk(a.out, records);
  std::cout << "sampled " << a.count << " sequences to " << a.out << "\n";
  return 0;
}

mntp::GaussianArProcess process_from_sidecar(const std::string& path) {
  ordered_json j = slurp_json(path);
  if (j.value("process", "") != std::string("gaussian-ar"))
    throw mntp::CapabilityError(
        "oracle deltas need a gaussian-ar sidecar, got '" +
        j.value("process", std::string("?")) + "'");
  ordered_json p = j.at("params");
  mntp::GaussianArProcess proc;
  proc.dim = p.at("dim").get<int>();
  proc.classes = p.at("classes").get<int>();
  proc.rho = p.at("rho").get<double>();
  proc.sigma = p.at("sigma").get<double>();
  proc.cond_len = p.at("cond_len").get<int>();
  proc.cond_dim = p.at("cond_dim").get<int>();
  proc.seed = p.at("seed").get<uint64_t>();
  proc.A = p.at("A").get<std::vector<double>>();
  proc.class_bias = p.at("class_bias").get<std::vector<double>>();
  proc.class_cond = p.at("class_cond").get<std::vector<double>>();
  size_t d = static_cast<size_t>(proc.dim);
  if (proc.A.size() != d * d ||
      proc.class_bias.size() != static_cast<size_t>(proc.classes) * d)
    throw mntp::ArgumentError(path + ": process parameter sizes are "
                              "inconsistent");
  return proc;
}

int cmd_eval(const EvalArgs& a) {
  mntp::Checkpoint ck = mntp::load_checkpoint(a.ckpt);
  auto data = mntp::read_cvtk(a.data);
  mntp::NoiseSchedule sched = mntp::NoiseSchedule::cosine(ck.train.diffusion_T);

  mntp::EvalReport rep;
  rep.seeds = {ck.train.seed, a.eval_seed};
  ordered_json cfg_echo;
  cfg_echo["model"] = mntp::to_json(ck.state.cfg);
  cfg_echo["head"] = mntp::to_json(ck.state.head.cfg);
  cfg_echo["train"] = mntp::to_json(ck.train);
  ordered_json eval_echo;
  eval_echo["data"] = a.data;
  eval_echo["reps"] = a.reps;
  eval_echo["eval_seed"] = a.eval_seed;

  if (!a.gen.empty()) {
    auto gen = mntp::read_cvtk(a.gen);
    rep.latent_fd = mntp::frechet_distance(mntp::fit_token_gaussian(gen),
                                           mntp::fit_token_gaussian(data));
    eval_echo["gen"] = a.gen;
  }

  mntp::StepProfile prof = mntp::step_profile(ck.train, ck.train.steps);
  if (prof.attention == mntp::AttentionMode::causal &&
      prof.predict != mntp::PredictMode::masked)
    rep.heldout_diff_loss = mntp::heldout_diffusion_loss(
        ck.state, ck.train, sched, data, a.eval_seed, a.reps);

  if (!a.sidecar.empty()) {
    mntp::GaussianArProcess proc = process_from_sidecar(a.sidecar);
    const auto& judged = a.gen.empty() ? data : mntp::read_cvtk(a.gen);
    rep.ar_coeff_error = mntp::ar_coefficient_error(judged, proc);
    rep.moment_error = mntp::stationary_moment_error(judged, proc);
    eval_echo["sidecar"] = a.sidecar;
  }

  if (a.rtf_clip_seconds > 0.0) {
    mntp::DecodePolicy policy;
    policy.steps = a.rtf_steps;
    rep.rtf = mntp::measure_rtf(ck.state, sched, policy, a.rtf_n,
                                a.rtf_clip_seconds);
    eval_echo["rtf_n"] = a.rtf_n;
    eval_echo["rtf_steps"] = a.rtf_steps;
    eval_echo["rtf_clip_seconds"] = a.rtf_clip_seconds;
  }

  cfg_echo["eval"] = std::move(eval_echo);
  rep.config = std::move(cfg_echo);
  write_text(a.out, rep.to_json().dump(2) + "\n");
  std::cout << "report written to " << a.out << "\n";
  return 0;
}

int cmd_ablate(const AblateArgs& a) {
  if (a.row.size() != 1)
    throw mntp::ArgumentError("ablate: row must be a single letter a..k");
  mntp::TrainConfig tc = mntp::make_ablation_config(a.row[0], a.steps);
  tc.batch = a.batch;
  tc.lr = a.lr;
  tc.seed = a.seed;

  auto data = mntp::read_cvtk(a.data);
  mntp::CvtkDims dims = mntp::require_homogeneous(data);
  mntp::ModelConfig mc = mntp::ModelConfig::preset(a.model);
  mc.token_dim = static_cast<int>(dims.token_dim);
  mc.cond_len = static_cast<int>(dims.cond_len);
  mc.cond_dim = static_cast<int>(dims.cond_dim);
  mc.target_pos_emb = tc.target_pos_emb;
  uint32_t longest = 0;
  for (const auto& rec : data)
    longest = std::max(longest, rec.token_count);
  mc.max_seq = a.max_seq > 0 ? a.max_seq : static_cast<int>(longest);
  mntp::HeadConfig hc;
  hc.token_dim = mc.token_dim;
  hc.z_dim = mc.hidden;

  auto model = mntp::make_model<float>(mc, hc, tc.seed);
  return run_training(std::move(model), tc, data, a.out, 0, nullptr);
}

int cmd_schedule_hist(const HistArgs& a) {
  if (a.bins < 1) throw mntp::ArgumentError("schedule-hist: bins must be >= 1");
  if (a.samples < 1)
    throw mntp::ArgumentError("schedule-hist: samples must be >= 1");
  mntp::MaskSchedule sched = mntp::schedule_preset(a.preset);
  mntp::Rng rng(a.seed, "schedule-hist");
  std::vector<int64_t> counts(a.bins, 0);
  for (int64_t i = 0; i < a.samples; ++i) {
    double r = mntp::sample_ratio(sched, rng);
    int b = std::min(static_cast<int>(r * a.bins), a.bins - 1);
    ++counts[b];
  }
  std::ostringstream csv;
  csv << "bin_center,density\n";
  double width = 1.0 / a.bins;
  for (int b = 0; b < a.bins; ++b) {
    double center = (b + 0.5) * width;
    double density =
        static_cast<double>(counts[b]) / (a.samples * width);
    csv << std::setprecision(17) << center << "," << density << "\n";
  }
  write_text(a.out_csv, csv.str());
  std::cout << "histogram written to " << a.out_csv << "\n";
  return 0;
}

int cmd_roundtrip_check(const RoundtripArgs& a) {
  int f = 0, b = 0, c = 0, p = 0;
  char x1 = 0, x2 = 0, x3 = 0;
  std::istringstream in(a.geometry);
  in >> f >> x1 >> b >> x2 >> c >> x3 >> p;
  if (!in || x1 != 'x' || x2 != 'x' || x3 != 'x' || !in.eof())
    throw mntp::ArgumentError("geometry must look like FRAMESxBANDSxCHANNELSx"
                              "PATCH, e.g. 1024x16x8x4");
  mntp::LatentMap map = mntp::LatentMap::zeros(f, b, c);
  mntp::Rng rng(a.seed, "roundtrip");
  for (auto& v : map.data) v = static_cast<float>(rng.gaussian());
  mntp::TokenSequence seq = mntp::patchify(map, p);
  mntp::LatentMap back = mntp::unpatchify(seq);
  if (back.frames != map.frames || back.bands != map.bands ||
      back.channels != map.channels || back.data != map.data)
    throw mntp::NumericError("codec round trip is not the identity for " +
                             a.geometry);
  std::cout << "round trip exact for " << a.geometry << " (" << seq.geom.count()
            << " tokens of dim " << seq.geom.dim() << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continuous-token language modeling workbench"};
  app.require_subcommand(1);

  MakeDataArgs md;
  CLI::App* mk = app.add_subcommand("make-data", "synthesize a dataset");
  mk->add_option("--process", md.process, "gaussian-ar | sinusoid-map")
      ->required();
  mk->add_option("--count", md.count, "number of records")->required();
  mk->add_option("--out", md.out, "output CVTK path (sidecar at <out>.json)")
      ->required();
  mk->add_option("--length", md.length, "tokens per record (gaussian-ar)");
  mk->add_option("--classes", md.classes, "condition classes");
  mk->add_option("--seed", md.seed, "generation seed");
  mk->add_option("--process-seed", md.process_seed,
                 "seed for the process parameters (default: --seed)");
  mk->add_option("--skip", md.skip,
                 "records to discard from the front of the stream");
  mk->add_option("--dim", md.dim, "token dimension (gaussian-ar)");
  mk->add_option("--rho", md.rho, "spectral radius (gaussian-ar)");
  mk->add_option("--sigma", md.sigma, "noise std (gaussian-ar)");
  mk->add_option("--cond-len", md.cond_len, "condition prefix length");
  mk->add_option("--cond-dim", md.cond_dim, "condition embedding dim");
  mk->add_option("--frames", md.frames, "latent frames (sinusoid-map)");
  mk->add_option("--bands", md.bands, "latent bands (sinusoid-map)");
  mk->add_option("--channels", md.channels, "latent channels (sinusoid-map)");
  mk->add_option("--patch", md.patch, "patch size (sinusoid-map)");
  mk->add_option("--noise", md.noise, "map jitter std (sinusoid-map)");

  TrainArgs tr;
  CLI::App* tn = app.add_subcommand("train", "train a model");
  auto* cfg_opt =
      tn->add_option("--config", tr.config, "run configuration JSON")
          ->check(CLI::ExistingFile);
  auto* res_opt =
      tn->add_option("--resume", tr.resume, "checkpoint prefix to resume");
  cfg_opt->excludes(res_opt);
  res_opt->excludes(cfg_opt);
  tn->add_option("--data", tr.data, "training CVTK file")
      ->required()
      ->check(CLI::ExistingFile);
  tn->add_option("--out", tr.out, "output prefix (checkpoint + loss CSV)")
      ->required();
  tn->add_option("--steps", tr.steps, "override total steps");

  SampleArgs sm;
  CLI::App* sp = app.add_subcommand("sample", "decode sequences");
  sp->add_option("--ckpt", sm.ckpt, "checkpoint prefix")->required();
  sp->add_option("--out", sm.out, "output CVTK path")->required();
  sp->add_option("--count", sm.count, "sequences to generate")->required();
  sp->add_option("--n", sm.n, "tokens per sequence")->required();
  sp->add_option("--seed", sm.seed, "decode seed");
  sp->add_option("--steps", sm.steps, "reverse-process steps per token");
  sp->add_option("--tau", sm.tau, "posterior noise temperature");
  sp->add_option("--omega0", sm.omega0, "guidance anneal start");
  sp->add_flag("--cfg", sm.cfg, "classifier-free guidance");
  sp->add_flag("--lower-variance", sm.lower_variance,
               "posterior sigma instead of sqrt(1-alpha')");
  sp->add_option("--order", sm.order, "causal | random | l2r");
  sp->add_option("--rounds", sm.rounds, "rounds for random/l2r order");
  sp->add_option("--cond-from", sm.cond_from,
                 "CVTK file whose conditions are reused round-robin")
      ->check(CLI::ExistingFile);

  EvalArgs ev;
  CLI::App* el = app.add_subcommand("eval", "evaluate a model");
  el->add_option("--ckpt", ev.ckpt, "checkpoint prefix")->required();
  el->add_option("--data", ev.data, "held-out CVTK file")
      ->required()
      ->check(CLI::ExistingFile);
  el->add_option("--gen", ev.gen, "generated CVTK file for latent FD")
      ->check(CLI::ExistingFile);
  el->add_option("--sidecar", ev.sidecar,
                 "make-data sidecar JSON for oracle deltas")
      ->check(CLI::ExistingFile);
  el->add_option("--out", ev.out, "report JSON path")->required();
  el->add_option("--reps", ev.reps, "noise draws per held-out position");
  el->add_option("--eval-seed", ev.eval_seed, "seed for held-out draws");
  el->add_option("--rtf-clip-seconds", ev.rtf_clip_seconds,
                 "clip duration; > 0 adds a timing-dependent RTF field");
  el->add_option("--rtf-n", ev.rtf_n, "tokens per RTF decode");
  el->add_option("--rtf-steps", ev.rtf_steps, "steps per RTF decode");

  AblateArgs ab;
  CLI::App* al = app.add_subcommand("ablate", "train one ablation row");
  al->add_option("--row", ab.row, "ablation row a..k")->required();
  al->add_option("--steps", ab.steps, "training steps")->required();
  al->add_option("--data", ab.data, "training CVTK file")
      ->required()
      ->check(CLI::ExistingFile);
  al->add_option("--out", ab.out, "output prefix")->required();
  al->add_option("--model", ab.model, "model preset (default mini)");
  al->add_option("--batch", ab.batch, "batch size");
  al->add_option("--max-seq", ab.max_seq,
                 "context length (default: longest record)");
  al->add_option("--lr", ab.lr, "learning rate");
  al->add_option("--seed", ab.seed, "training seed");

  HistArgs hi;
  CLI::App* sh = app.add_subcommand("schedule-hist",
                                    "masking-ratio histogram CSV");
  sh->add_option("--preset", hi.preset, "schedule preset name")->required();
  sh->add_option("--out-csv", hi.out_csv, "output CSV path")->required();
  sh->add_option("--bins", hi.bins, "histogram bins");
  sh->add_option("--samples", hi.samples, "draws");
  sh->add_option("--seed", hi.seed, "draw seed");

  RoundtripArgs rt;
  CLI::App* rc = app.add_subcommand("roundtrip-check",
                                    "verify the codec identity");
  rc->add_option("--geometry", rt.geometry,
                 "FRAMESxBANDSxCHANNELSxPATCH, e.g. 1024x16x8x4")
      ->required();
  rc->add_option("--seed", rt.seed, "map fill seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (mk->parsed()) return cmd_make_data(md);
    if (tn->parsed()) {
      if (tr.config.empty() && tr.resume.empty()) {
        std::cerr << "train: one of --config or --resume is required\n";
        return 2;
      }
      return cmd_train(tr);
    }
    if (sp->parsed()) return cmd_sample(sm);
    if (el->parsed()) return cmd_eval(ev);
    if (al->parsed()) return cmd_ablate(ab);
    if (sh->parsed()) return cmd_schedule_hist(hi);
    if (rc->parsed()) return cmd_roundtrip_check(rt);
  } catch (const mntp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
