// fmloc: run one experiment from a JSON config.
//   fmloc decay --config cfg.json --seed 7 --samples 2000 --workers 4 --out runs/a --plot

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "fmloc/fmloc.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> samples;
  std::optional<std::uint64_t> workers;
  std::optional<std::string> out;
  std::string format = "both";
  bool plot = false;
  bool resume = false;
};

void add_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "experiment config (JSON)")->required();
  sub->add_option("--seed", f.seed, "master seed (overrides config)");
  sub->add_option("--samples", f.samples, "number of samples (overrides config)");
  sub->add_option("--workers", f.workers, "worker threads, 0 = all cores");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--format", f.format, "csv, json or both")->check(CLI::IsMember({"csv", "json", "both"}));
  sub->add_flag("--plot", f.plot, "also write plot.svg");
  sub->add_flag("--resume", f.resume, "continue from samples.jsonl in the output directory");
}

int run(const std::string& kind, const Flags& f) {
  using namespace fmloc;
  using runner::json;
  try {
    std::ifstream in(f.config);
    if (!in) throw IoError("cannot open config '" + f.config + "'");
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError(e.what(), "<root>");
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object", "<root>");
    if (doc.contains("kind") && doc["kind"] != kind)
      throw ConfigError("config is for '" + doc["kind"].dump() + "', not '" + kind + "'", "kind");
    doc["kind"] = kind;
    if (f.seed) doc["master_seed"] = *f.seed;
    if (f.samples) doc["samples"] = *f.samples;
    if (f.workers) doc["workers"] = *f.workers;
    if (f.out) doc["output"] = *f.out;

    const auto cfg = runner::parse_config(std::move(doc));
    runner::RunOptions opt;
    opt.resume = f.resume;
    opt.plot = f.plot;
    opt.csv = f.format != "json";
    opt.json_out = f.format != "csv";
    const auto out = runner::run(cfg, opt);
    if (!out.notice.empty()) std::cerr << "notice: " << out.notice << "\n";
    std::cout << "wrote " << out.dir.string() << " (digest " << out.record.digest << ")";
    if (out.reused_samples) std::cout << ", resumed " << out.reused_samples << " samples";
    std::cout << "\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fractional-moment localization experiments"};
  app.require_subcommand(1);
  Flags flags;
  std::string chosen;
  for (const char* kind : fmloc::runner::kKinds) {
    auto* sub = app.add_subcommand(kind, std::string("run a '") + kind + "' experiment");
    add_flags(sub, flags);
    sub->callback([&chosen, kind] { chosen = kind; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  return run(chosen, flags);
}
