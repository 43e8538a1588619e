#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vimcan/vimcan.hpp"

using namespace vimcan;
using nlohmann::json;

namespace {

// Exit codes: 1 library error, 2 usage error, 3 gradient check over tolerance.
int report_error(const std::string& code, const std::string& detail, int exit_code) {
  std::string flat = detail;
  for (char& c : flat)
    if (c == '\n') c = ' ';
  std::fprintf(stderr, "error: %s: %s\n", code.c_str(), flat.c_str());
  return exit_code;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoError, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::FormatError, path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot write " + path);
  out << text;
  require(out.good(), ErrorCode::IoError, "write failed for " + path);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

model::ModelConfig preset(const std::string& name) {
  if (name == "tiny") return model::ModelConfig::tiny();
  if (name == "small") return model::ModelConfig::small();
  if (name == "table1") return model::ModelConfig::table_row(1);
  if (name == "table2") return model::ModelConfig::table_row(2);
  if (name == "table3") return model::ModelConfig::table_row(3);
  fail(ErrorCode::InvalidConfig, "unknown preset '" + name + "'");
}

// Either {"model": {...}, "train": {...}} or one flat object holding fields of
// both. A "preset" key in the model part picks the base the fields override.
struct RunConfig {
  model::ModelConfig model;
  train::TrainConfig train;
};

RunConfig parse_run_config(const json& j) {
  require(j.is_object(), ErrorCode::InvalidConfig, "config must be a JSON object");
  const bool sectioned = j.contains("model") || j.contains("train");
  const json mj = sectioned ? j.value("model", json::object()) : j;
  const json tj = sectioned ? j.value("train", json::object()) : j;
  json merged = preset(mj.value("preset", std::string("tiny"))).to_json();
  for (const auto& [k, v] : mj.items())
    if (k != "preset") merged[k] = v;
  return {model::ModelConfig::from_json(merged), train::TrainConfig::from_json(tj)};
}

std::vector<std::size_t> parse_lengths(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(item, &used);
      require(used == item.size() && v > 0, ErrorCode::InvalidArgument, "bad length '" + item + "'");
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      fail(ErrorCode::InvalidArgument, "bad length '" + item + "'");
    }
  }
  require(!out.empty(), ErrorCode::InvalidArgument, "no lengths given");
  return out;
}

json pose_json(const preprocess::PoseSequence3D& p) {
  json frames = json::array();
  for (std::size_t t = 0; t < p.frames; ++t) {
    json joints = json::array();
    for (std::size_t j = 0; j < skeleton::kNumJoints; ++j)
      joints.push_back({p(t, j, 0), p(t, j, 1), p(t, j, 2)});
    frames.push_back(std::move(joints));
  }
  return frames;
}

struct GradcheckFailed {
  std::string detail;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ViMCAN: 3D pose from 2D keypoints and IMUs"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic dataset (JSON lines)");
  std::string synth_out;
  std::size_t synth_count = 8, synth_len = 81;
  std::uint64_t synth_seed = 0;
  double synth_noise = 0.0;
  synth->add_option("--out", synth_out, "output dataset")->required();
  synth->add_option("--count", synth_count, "number of sequences")->check(CLI::PositiveNumber);
  synth->add_option("--len", synth_len, "frames per sequence");
  synth->add_option("--seed", synth_seed, "seed of the first sequence; sequence k uses seed + k");
  synth->add_option("--noise", synth_noise, "IMU rotation noise (radians)");

  // train
  auto* trn = app.add_subcommand("train", "train a model and write a checkpoint");
  std::string train_data, train_config, train_out, train_log;
  std::optional<std::uint64_t> train_seed;
  trn->add_option("--data", train_data, "training dataset")->required();
  trn->add_option("--config", train_config, "JSON config (model and train fields)");
  trn->add_option("--out", train_out, "checkpoint to write")->required();
  trn->add_option("--seed", train_seed, "overrides the config seed (init and sampling)");
  trn->add_option("--log", train_log, "per-epoch loss log (JSON)");

  // eval
  auto* evl = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_data, eval_ckpt, eval_report;
  evl->add_option("--data", eval_data, "evaluation dataset")->required();
  evl->add_option("--ckpt", eval_ckpt, "checkpoint")->required();
  evl->add_option("--report", eval_report, "report file, .json or .csv")->required();

  // infer
  auto* inf = app.add_subcommand("infer", "write 3D predictions (JSON lines)");
  std::string infer_data, infer_ckpt, infer_out;
  inf->add_option("--data", infer_data, "input dataset")->required();
  inf->add_option("--ckpt", infer_ckpt, "checkpoint")->required();
  inf->add_option("--out", infer_out, "predictions file")->required();

  // bench
  auto* bench = app.add_subcommand("bench", "temporal-block memory and speed");
  std::string bench_mode = "memory", bench_variant = "both", bench_lengths = "64,128,256,512", bench_csv_path;
  std::size_t bench_runs = 3;
  bench->add_option("--mode", bench_mode)->check(CLI::IsMember({"memory", "fps"}));
  bench->add_option("--lengths", bench_lengths, "comma-separated sequence lengths");
  bench->add_option("--variant", bench_variant)->check(CLI::IsMember({"ssm", "attention", "both"}));
  bench->add_option("--runs", bench_runs, "timed forwards per row in fps mode")->check(CLI::PositiveNumber);
  bench->add_option("--csv", bench_csv_path, "CSV output (stdout if omitted)");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  std::string gc_scale = "tiny";
  double gc_tol = 1e-4;
  gc->add_option("--scale", gc_scale)->check(CLI::IsMember({"tiny", "small"}));
  gc->add_option("--tol", gc_tol, "maximum relative error")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("UsageError", e.what(), 2);
  }

  try {
    if (*synth) {
      std::vector<preprocess::Sequence> seqs;
      for (std::size_t k = 0; k < synth_count; ++k)
        seqs.push_back(preprocess::synth_sequence(synth_seed + k, synth_len, synth_noise));
      preprocess::save_dataset(synth_out, seqs);
      std::printf("wrote %zu sequences of %zu frames to %s\n", synth_count, synth_len, synth_out.c_str());
    } else if (*trn) {
      RunConfig rc = train_config.empty() ? RunConfig{model::ModelConfig::tiny(), {}}
                                          : parse_run_config(read_json_file(train_config));
      if (train_seed) rc.train.seed = *train_seed;
      const auto data = preprocess::load_dataset(train_data);
      auto m = model::init_model(rc.model, rc.train.seed);
      std::printf("model: %zu parameters\n", m.count_params());
      const auto res = train::train(m, data, rc.train, [](const train::EpochLog& e) {
        std::printf("epoch %zu lr %.6g loss %.6f\n", e.epoch + 1, e.lr, e.mean_loss);
        std::fflush(stdout);
      });
      model::save_checkpoint(m, train_out);
      if (!train_log.empty()) write_text_file(train_log, res.to_json().dump(2) + "\n");
      std::printf("wrote %s after %zu steps\n", train_out.c_str(), res.steps);
    } else if (*evl) {
      const bool csv = ends_with(eval_report, ".csv");
      require(csv || ends_with(eval_report, ".json"), ErrorCode::InvalidArgument,
              "report must end in .json or .csv");
      const auto m = model::load_checkpoint(eval_ckpt);
      const auto report = train::evaluate(m, preprocess::load_dataset(eval_data));
      write_text_file(eval_report, csv ? report.to_csv() : report.to_json().dump(2) + "\n");
      std::printf("P1 %.3f mm  P2 %.3f mm", report.p1_mm, report.p2_mm);
      for (const auto& [th, v] : report.pck) std::printf("  PCK@%g %.2f%%", th, v);
      std::printf("\n");
    } else if (*inf) {
      const auto m = model::load_checkpoint(infer_ckpt);
      const auto data = preprocess::load_dataset(infer_data);
      std::ostringstream os;
      for (const auto& s : data) {
        s.validate();
        const json row = {{"id", s.id}, {"frames", s.frames()}, {"pose3d", pose_json(train::predict_sequence(m, s))}};
        os << row.dump() << '\n';
      }
      write_text_file(infer_out, os.str());
      std::printf("wrote predictions for %zu sequences to %s\n", data.size(), infer_out.c_str());
    } else if (*bench) {
      train::MemoryBenchConfig cfg;
      cfg.lengths = parse_lengths(bench_lengths);
      if (bench_variant == "ssm") cfg.variants = {train::BenchVariant::Ssm};
      else if (bench_variant == "attention") cfg.variants = {train::BenchVariant::Attention};
      cfg.runs = bench_mode == "fps" ? bench_runs : 1;
      const std::string csv = train::bench_csv(train::bench_memory(cfg));
      if (bench_csv_path.empty()) std::fputs(csv.c_str(), stdout);
      else write_text_file(bench_csv_path, csv);
    } else if (*gc) {
      const auto t0 = std::chrono::steady_clock::now();
      bool ok = true;
      for (const auto& r : checks::block_suite()) {
        std::printf("%-20s max rel %.3e over %zu coords\n", r.name.c_str(), r.result.max_rel_error,
                    r.result.coords_checked);
        ok = ok && r.result.max_rel_error <= gc_tol;
      }
      const auto cfg = gc_scale == "tiny" ? model::ModelConfig::tiny() : model::ModelConfig::small();
      const auto full = checks::check_full_model(cfg, 5);
      std::printf("%-20s max rel %.3e over %zu coords (floor %.2e)\n", ("model_" + gc_scale).c_str(),
                  full.max_rel_error, full.coords_checked, full.floor);
      ok = ok && full.max_rel_error <= gc_tol;
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::printf("%s in %.1f s\n", ok ? "ok" : "FAILED", secs);
      if (!ok) throw GradcheckFailed{"max relative error above " + std::to_string(gc_tol)};
    }
  } catch (const Error& e) {
    const std::string what = e.what();
    const std::string code(to_string(e.code()));
    const std::string detail = what.starts_with(code + ": ") ? what.substr(code.size() + 2) : what;
    return report_error(code, detail, 1);
  } catch (const GradcheckFailed& e) {
    return report_error("GradcheckFailed", e.detail, 3);
  } catch (const std::bad_alloc&) {
    return report_error("OutOfMemory", "allocation failed", 1);
  } catch (const std::exception& e) {
    return report_error("Internal", e.what(), 1);
  }
  return 0;
}
