// Golden replay check for the CLI: reruns every shipped example config and
// requires the RunRecord's (config_hash, seed, metrics) block to reproduce
// the checked-in golden byte for byte. Also exercises the CSV output shape
// and the documented error exit codes.
//
// Usage: cli_golden <path-to-winhalt> <repo-source-dir>

#include "json.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int g_failures = 0;

void expect(bool ok, const std::string& what) {
  if (!ok) {
    std::cout << "[FAIL] " << what << "\n";
    ++g_failures;
  } else {
    std::cout << "[ok] " << what << "\n";
  }
}

int run_cli(const std::string& cli, const std::string& args) {
  const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

json load_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: cli_golden <winhalt> <source-dir>\n";
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path src = argv[2];
  const fs::path work = fs::temp_directory_path() / "winhalt_golden";
  fs::remove_all(work);
  fs::create_directories(work);

  std::vector<fs::path> goldens;
  for (const auto& entry : fs::directory_iterator(src / "tests" / "golden")) {
    if (entry.path().extension() == ".json") goldens.push_back(entry.path());
  }
  std::sort(goldens.begin(), goldens.end());
  expect(!goldens.empty(), "golden files present");

  for (const auto& golden_path : goldens) {
    std::string name = golden_path.filename().string();
    name = name.substr(0, name.size() - std::string(".golden.json").size());
    const fs::path config = src / "configs" / (name + ".json");
    const fs::path out = work / name;
    const int code =
        run_cli(cli, "--config " + config.string() + " --out " + out.string());
    expect(code == 0, name + ": exit code 0");
    if (code != 0) continue;
    const json rec = load_json(out / "run_record.json");
    const json golden = load_json(golden_path);
    const json got{{"config_hash", rec.at("config_hash")},
                   {"seed", rec.at("seed")},
                   {"metrics", rec.at("metrics")}};
    expect(got.dump() == golden.dump(), name + ": metrics block reproduces the golden");
  }

  // Replay determinism: same config twice, byte-identical metrics.
  {
    const fs::path config = src / "configs" / "derandomize_coin.json";
    const fs::path out1 = work / "replay1";
    const fs::path out2 = work / "replay2";
    run_cli(cli, "--config " + config.string() + " --out " + out1.string());
    run_cli(cli, "--config " + config.string() + " --out " + out2.string());
    expect(load_json(out1 / "run_record.json").at("metrics").dump() ==
               load_json(out2 / "run_record.json").at("metrics").dump(),
           "replay determinism");
  }

  // CSV output shape.
  {
    const fs::path config = src / "configs" / "winprob_exact_coin.json";
    const fs::path out = work / "csv_check";
    run_cli(cli, "--config " + config.string() + " --out " + out.string() +
                     " --format csv");
    std::ifstream csv(out / "results.csv");
    std::string header, row;
    std::getline(csv, header);
    std::getline(csv, row);
    expect(header == "metric,value", "csv header");
    expect(row == "exact_win_prob,3/4", "csv exact value row");
  }

  // Error exit codes: 2 config, 3 precondition, 4 search not found.
  {
    const fs::path bad = work / "bad.json";
    std::ofstream(bad) << "{}";
    expect(run_cli(cli, "--config " + bad.string() + " --out " + (work / "e1").string()) ==
               2,
           "empty config exits 2");
    const fs::path nomass = work / "nomass.json";
    std::ofstream(nomass) << R"({"subcommand":"fragment","game":{"horizon":2,
      "max_action":2,"agent":{"type":"uniform","actions":2},
      "env":{"type":"never_halt"}},"params":{"s":2}})";
    expect(run_cli(cli, "--config " + nomass.string() + " --out " +
                            (work / "e2").string()) == 3,
           "insufficient mass exits 3");
    const fs::path nf = work / "notfound.json";
    std::ofstream(nf) << R"({"subcommand":"search","game":{"horizon":2,
      "max_action":4,"env":{"type":"never_halt"}},"params":{"max_bits":10}})";
    expect(run_cli(cli, "--config " + nf.string() + " --out " +
                            (work / "e3").string()) == 4,
           "search not-found exits 4");
  }

  // The report subcommand sweeps the records written above.
  {
    const fs::path report_cfg = work / "report.json";
    std::ofstream(report_cfg) << R"({"subcommand":"report","params":{"dir":")" +
                                     work.string() + R"("}})";
    const fs::path out = work / "report_out";
    expect(run_cli(cli, "--config " + report_cfg.string() + " --out " + out.string()) ==
               0,
           "report exits 0");
    const json rec = load_json(out / "run_record.json");
    expect(rec.at("metrics").at("count").get<int>() >= 10, "report sees the run records");
  }

  if (g_failures) {
    std::cout << g_failures << " golden check(s) failed\n";
    return 1;
  }
  std::cout << "all golden checks passed\n";
  return 0;
}
