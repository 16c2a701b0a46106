// Serial-vs-OpenMP comparison for the three data-parallel kernels:
// Monte-Carlo trials, derandomization sampling, and program-search
// evaluation. Each kernel's parallel run must reproduce the serial result
// exactly; the table reports wall times and speedup.

#include "winhalt/complexity.hpp"
#include "winhalt/derandomize.hpp"
#include "winhalt/engine.hpp"
#include "winhalt/zoo.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

using namespace winhalt;

namespace {

double time_of(const std::function<void()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void row(const char* kernel, double serial, double parallel, bool equal) {
  std::printf("%-28s %10.3fs %10.3fs %8.2fx   %s\n", kernel, serial, parallel,
              serial / parallel, equal ? "results equal" : "RESULTS DIFFER");
}

}  // namespace

int main() {
  std::printf("threads available: %d\n\n", omp_get_max_threads());
  std::printf("%-28s %11s %11s %9s\n", "kernel", "serial", "parallel", "speedup");

  {
    EvenOddsSpec spec = EvenOddsSpec::zeros(1000, 32);
    GameConfig cfg = even_odds_config(1000, 7);
    const AgentBehavior coin = AgentBehavior::uniform(2);
    const EnvironmentBehavior env = even_odds_env(spec);
    McResult s, p;
    const double ts = time_of([&] { s = mc_win_prob(coin, env, cfg, 100000, 1); });
    const double tp = time_of([&] { p = mc_win_prob(coin, env, cfg, 100000, 0); });
    row("monte-carlo trials", ts, tp, s.wins == p.wins && s.freezes == p.freezes);
  }

  {
    const AgentBehavior agent = AgentBehavior::uniform(3);
    const EnvironmentBehavior env = EnvironmentBehavior::halt_iff_action(2);
    GameConfig cfg{4, 3, 0};
    DerandomizationReport s, p;
    const double ts = time_of([&] { s = derandomize(agent, env, 2, 16, cfg, 11, 1); });
    const double tp = time_of([&] { p = derandomize(agent, env, 2, 16, cfg, 11, 0); });
    row("derandomize sampling", ts, tp,
        s.sample_weights == p.sample_weights && s.winner == p.winner);
  }

  {
    const EnvironmentBehavior env = EnvironmentBehavior::deterministic(
        [](const History& h, std::uint32_t a) {
          if (h.size() < 1) return Response::number((a * 3 + 1) % 16);
          return (a + h.back().response.value) % 16 == 11 ? Response::halt()
                                                          : Response::number(a % 16);
        });
    GameConfig cfg{2, 16, 0};
    std::optional<SearchResult> s, p;
    const double ts = time_of(
        [&] { s = min_winning_description(env, cfg, 22, Rat(0), AgentSpace::all(), 64, 1); });
    const double tp = time_of(
        [&] { p = min_winning_description(env, cfg, 22, Rat(0), AgentSpace::all(), 64, 0); });
    row("program search", ts, tp,
        s.has_value() == p.has_value() && (!s || s->program == p->program));
  }

  return 0;
}
