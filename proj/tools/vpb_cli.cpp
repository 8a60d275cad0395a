// Command-line front end. Talks to the library only through vpb.h.
#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vpb/vpb.h>

namespace {

struct Failure {
  int code;
};

void check(vpb_status s) {
  if (s != VPB_OK) {
    std::cerr << "vpb: " << vpb_last_error() << "\n";
    throw Failure{static_cast<int>(s)};
  }
}

struct ConfigHandle {
  vpb_config* p = nullptr;
  ~ConfigHandle() { vpb_config_destroy(p); }
};

struct ModelHandle {
  vpb_model* p = nullptr;
  ~ModelHandle() { vpb_model_destroy(p); }
};

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { vpb_free_string(p); }
};

std::string join(const std::string& dir, const std::string& name) {
  if (dir.empty()) return name;
  return dir.back() == '/' ? dir + name : dir + "/" + name;
}

void print_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "vpb: cannot read '" << path << "'\n";
    throw Failure{VPB_ERR_IO};
  }
  std::cout << in.rdbuf();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinetic-to-fluid limit experiments for a two-species Boltzmann-Poisson system"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir = ".", cache_dir;
  int threads = 0;
  app.add_option("--config", config_path, "Flat key = value run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--cache", cache_dir, "Directory for basis and operator caches");

  auto* coeffs = app.add_subcommand("coeffs", "Print transport coefficients and residuals as JSON");
  bool dump_operators = false;
  std::string table;
  coeffs->add_flag("--dump-operators", dump_operators, "Write eigenvalue spectra of L1, L2 to OUT/spectra.csv");
  coeffs->add_option("--table", table, "Emit a sample table as CSV instead of the JSON")
      ->check(CLI::IsMember({"alpha-beta"}));

  auto* simulate = app.add_subcommand("simulate", "One kinetic run");
  auto* fluid = app.add_subcommand("fluid", "One fluid reference run");
  auto* sweep = app.add_subcommand("sweep", "Epsilon sweep against the fluid reference");
  auto* selftest = app.add_subcommand("selftest", "Fast property checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    ConfigHandle cfg;
    check(vpb_config_create(&cfg.p));
    if (!config_path.empty()) check(vpb_config_load_file(cfg.p, config_path.c_str()));
    if (!cache_dir.empty()) check(vpb_config_set(cfg.p, "cache", cache_dir.c_str()));
    if (threads > 0) check(vpb_config_set(cfg.p, "threads", std::to_string(threads).c_str()));

    ModelHandle model;
    check(vpb_model_build(cfg.p, &model.p));
    OwnedString json;

    if (coeffs->parsed()) {
      if (dump_operators) {
        const std::string path = join(out_dir, "spectra.csv");
        check(vpb_model_write_spectra(model.p, path.c_str()));
        std::cerr << "wrote " << path << "\n";
      }
      if (table == "alpha-beta") {
        const std::string path = join(out_dir, "alpha_beta.csv");
        check(vpb_model_write_alpha_beta(model.p, path.c_str()));
        print_file(path);
      } else {
        check(vpb_model_coefficients_json(model.p, &json.p));
        std::cout << json.p;
      }
    } else if (simulate->parsed()) {
      check(vpb_simulate(model.p, cfg.p, out_dir.c_str(), &json.p));
      std::cout << json.p;
    } else if (fluid->parsed()) {
      check(vpb_fluid(model.p, cfg.p, out_dir.c_str(), &json.p));
      std::cout << json.p;
    } else if (sweep->parsed()) {
      check(vpb_sweep(model.p, cfg.p, out_dir.c_str(), threads, &json.p));
      std::cout << json.p;
    } else if (selftest->parsed()) {
      int failures = 0;
      check(vpb_selftest(model.p, &json.p, &failures));
      std::cout << json.p;
      if (failures > 0) return VPB_ERR_NUMERICAL;
    }
  } catch (const Failure& f) {
    return f.code;
  }
  return 0;
}
