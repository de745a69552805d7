// Times the OpenMP kernels against their serial reference twins and checks
// that both produce bit-identical output. The serial twins are the
// correctness oracles; if "identical" ever says no, the parallel kernel is
// broken no matter how fast it is.

#include <bit>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "causalid/admg.hpp"
#include "causalid/identify.hpp"
#include "causalid/scmsim.hpp"
#include "causalid/symexpr.hpp"

#ifdef _OPENMP
#include <omp.h>
#else
namespace {
int omp_get_max_threads() { return 1; }
void omp_set_num_threads(int) {}
}  // namespace
#endif

using namespace causalid;

namespace {

double timed(const std::function<void()>& fn) {
  auto t0 = std::chrono::steady_clock::now();
  fn();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

bool tables_identical(const ContingencyTable& a, const ContingencyTable& b) {
  if (a.columns() != b.columns() || a.cards() != b.cards()) return false;
  std::vector<int> cell(a.columns().size(), 0);
  for (;;) {
    if (!same_bits(a.at(cell), b.at(cell))) return false;
    std::size_t i = 0;
    for (; i < cell.size(); ++i) {
      if (++cell[i] < a.cards()[i]) break;
      cell[i] = 0;
    }
    if (i == cell.size()) return true;
  }
}

bool results_identical(const std::vector<SimResult>& a,
                       const std::vector<SimResult>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_bits(a[i].bias, b[i].bias) || !same_bits(a[i].rmse, b[i].rmse))
      return false;
    if (a[i].used != b[i].used || a[i].dropped != b[i].dropped ||
        a[i].degenerate != b[i].degenerate)
      return false;
    if (a[i].estimates.size() != b[i].estimates.size()) return false;
    for (std::size_t r = 0; r < a[i].estimates.size(); ++r)
      if (!same_bits(a[i].estimates[r], b[i].estimates[r])) return false;
  }
  return true;
}

void report(const std::string& name, double serial_s, double parallel_s,
            bool identical, bool* all_ok) {
  std::printf("%-34s %9.3fs %11.3fs %8.2fx  %s\n", name.c_str(), serial_s,
              parallel_s, serial_s / parallel_s, identical ? "yes" : "NO");
  if (!identical) *all_ok = false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serial-vs-parallel kernel benchmark"};
  std::uint64_t draws = 4'000'000;
  int reps = 400, rct_n = 400, survey_n = 2000;
  app.add_option("--draws", draws, "Monte-Carlo draws");
  app.add_option("--reps", reps, "Replications per harness cell");
  app.add_option("--rct", rct_n, "Trial recruits per replication");
  app.add_option("--survey", survey_n, "Survey rows per replication");
  CLI11_PARSE(app, argc, argv);

  std::printf("OpenMP max threads: %d\n\n", omp_get_max_threads());
  std::printf("%-34s %10s %12s %9s  %s\n", "kernel", "serial", "parallel",
              "speedup", "identical");
  bool all_ok = true;

  Study study = bundled_study();

  {
    CounterRng rng(2024, 7);
    Assignment dox{{"X", 1}};
    ContingencyTable ser({}, {}), par({}, {});
    double ts = timed([&] { ser = study.scm.mc_joint_serial(dox, {}, draws, rng); });
    double tp = timed([&] { par = study.scm.mc_joint(dox, {}, draws, rng); });
    char name[64];
    std::snprintf(name, sizeof name, "monte-carlo joint (%.1fM draws)",
                  static_cast<double>(draws) / 1e6);
    report(name, ts, tp, tables_identical(ser, par), &all_ok);
  }

  {
    char grid[96];
    std::snprintf(grid, sizeof grid, "rct=%d survey=%d reps=%d", rct_n, survey_n,
                  reps);
    auto scenarios = parse_scenarios(grid, study.trapdoor_var, {1, 0});
    std::vector<SimResult> ser, par;
    double ts = timed([&] { ser = run_scenarios_serial(study, scenarios, 99, false); });
    double tp = timed([&] { par = run_scenarios(study, scenarios, 99, false); });
    char name[64];
    std::snprintf(name, sizeof name, "replication harness (%d reps)", 2 * reps);
    report(name, ts, tp, results_identical(ser, par), &all_ok);
  }

  {
    // Two-treatment trial + covariate surveys: the largest bundled search.
    Admg g({{"X1"}, {"Z1"}, {"Z2"}, {"S", VertexKind::selection}, {"Y"},
            {"X2"}, {"Z3"}, {"Z4"}},
           {{"X1", "Z1"}, {"Z1", "Z2"}, {"Z2", "S"}, {"X1", "Y"},
            {"X2", "Z3"}, {"Z3", "Z4"}, {"Z4", "S"}, {"X2", "Y"}},
           {{"X1", "Z4"}, {"X2", "Z2"}, {"Y", "Z2"}, {"Y", "Z4"}});
    std::vector<DistTerm> inputs{
        make_term({"Y", "Z1", "Z2", "Z3", "Z4"}, {"X1", "X2"}, {"S"}, {"S"}),
        make_term({"Z1", "Z2"}), make_term({"Z3", "Z4"})};
    DistTerm query = make_term({"Y"}, {"X1", "X2"});
    std::string ser_out, par_out;
    SearchStats ser_stats, par_stats;
    omp_set_num_threads(1);
    double ts = timed([&] {
      auto d = derive(g, inputs, query, {}, &ser_stats);
      ser_out = d ? render(d->result, Style::text) : "";
    });
    omp_set_num_threads(omp_get_max_threads());
    double tp = timed([&] {
      auto d = derive(g, inputs, query, {}, &par_stats);
      par_out = d ? render(d->result, Style::text) : "";
    });
    bool identical = !ser_out.empty() && ser_out == par_out &&
                     ser_stats.expressions == par_stats.expressions;
    report("derivation search (two-treatment)", ts, tp, identical, &all_ok);
  }

  if (!all_ok) {
    std::fprintf(stderr, "\nFAIL: a parallel kernel diverged from its serial twin\n");
    return 1;
  }
  return 0;
}
