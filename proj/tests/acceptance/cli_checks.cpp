// Runs each pipeline stage of the command-line tool twice and compares the
// output digests recorded in manifest.json.

#include <cstdlib>
#include <fstream>

#include "acceptance.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace acceptance {

namespace {

constexpr const char* kConfig = R"({
  "seed": 21,
  "synth": {"clips": 16, "frames": 96, "flip_fraction": 0.25, "jitter_fraction": 0.25},
  "tokenizer": {"levels": [5, 5, 5, 5], "width": 32, "depth": 1},
  "tokenizer_training": {"steps": 150, "batch": 4, "window": 32},
  "generator": {"layers": 2, "width": 32, "heads": 2, "max_motion_length": 32},
  "generator_training": {"steps": 150, "batch": 4},
  "sampling": {"strategy": "top-k", "top_k": 5, "temperature": 0.9}
})";

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

struct Stage {
  std::string name;
  std::string args;  // everything after the subcommand except --out-dir
};

std::string digest_of(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) return {};
  return nlohmann::json::parse(in).at("outputs_digest").get<std::string>();
}

}  // namespace

Outcome cli_determinism(const fs::path& cli, const fs::path& work) {
  fs::remove_all(work);
  fs::create_directories(work);
  const fs::path config = work / "config.json";
  std::ofstream(config) << kConfig;
  const std::string common = " --config " + quote(config);
  auto run = [&](const std::string& sub, const std::string& args, const fs::path& out, int workers) {
    const std::string cmd = quote(cli) + " " + sub + common + " --workers " + std::to_string(workers) + " --out-dir " +
                            quote(out) + " " + args + " > /dev/null 2>> " + quote(work / "stderr.log");
    return std::system(cmd.c_str());
  };

  if (run("synth", "", work / "synth", 1) != 0) return {false, "synth failed; see " + (work / "stderr.log").string()};
  const fs::path a = work / "a";
  const std::vector<Stage> stages{
      {"curate", "--motions " + quote(work / "synth/motions") + " --detections " + quote(work / "synth/detections.jsonl")},
      {"train-fsq", "--motions " + quote(a / "curate/curated")},
      {"tokenize", "--tokenizer " + quote(a / "train-fsq/tokenizer.ckpt") + " --motions " + quote(a / "curate/curated") +
                       " --captions " + quote(work / "synth/captions.jsonl")},
      {"train-gen", "--pairs " + quote(a / "tokenize/pairs.jsonl") + " --tokenizer " + quote(a / "train-fsq/tokenizer.ckpt")},
      {"generate", "--generator " + quote(a / "train-gen/generator.ckpt") + " --tokenizer " +
                       quote(a / "train-fsq/tokenizer.ckpt") + " --text 'a person walks slowly straight ahead'" +
                       " --text 'a person walks briskly turning left' --text 'a person walks steadily turning right'"},
      {"eval", "--reference " + quote(a / "curate/curated") + " --candidate " + quote(a / "generate/motions") +
                   " --tokenizer " + quote(a / "train-fsq/tokenizer.ckpt")},
  };

  bool pass = true;
  std::string report;
  for (const auto& stage : stages) {
    // later stages read the first run's outputs, so each stage is compared on identical inputs
    const int rc_a = run(stage.name, stage.args, a / stage.name, 1);
    const int rc_b = run(stage.name, stage.args, work / "b" / stage.name, 4);
    const std::string da = digest_of(a / stage.name), db = digest_of(work / "b" / stage.name);
    const bool same = rc_a == 0 && rc_b == 0 && !da.empty() && da == db;
    pass = pass && same;
    report += stage.name + (same ? " identical (" + da.substr(0, 12) + ")" : " DIFFERENT") + "; ";
    if (rc_a != 0 || rc_b != 0) {
      report += "exit codes " + std::to_string(rc_a) + "/" + std::to_string(rc_b) + "; ";
      break;
    }
  }
  return {pass, detail() << report << "runs with 1 and 4 workers"};
}

}  // namespace acceptance
