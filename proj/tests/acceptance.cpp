// End-to-end acceptance run: one PASS/FAIL line per criterion, exit status 1
// when any criterion fails.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "nfcl/continual.hpp"
#include "nfcl/errors.hpp"
#include "nfcl/experiment.hpp"
#include "nfcl/metrics.hpp"
#include "nfcl/phantom.hpp"
#include "nfcl/runtime.hpp"
#include "nfcl/scatter.hpp"
#include "nfcl/volume.hpp"
#include "support.hpp"

namespace {

using namespace nfcl;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr Arch kArchs[] = {Arch::PeRelu, Arch::Siren, Arch::Finer, Arch::Diner};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  if (!ok) ++failures;
  std::printf("criterion %d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(NFCL_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Two domain tasks on a 4x4x2 grid (two frames) and the image/labels pair of
// the signal sequence, small enough for exhaustive finite differences.
std::vector<Task> gradient_tasks(bool signal, std::uint64_t seed) {
  std::vector<Task> tasks(2);
  if (signal) {
    const PhantomFrame f = phantom(4, 4, 2, -1.0, seed);
    tasks[0].grid = tasks[1].grid = GridSpec{{4, 4, 2}, std::nullopt};
    tasks[0].kind = tasks[1].kind = TaskKind::SignalLayer;
    tasks[0].target = normalize_intensity(f.image);
    tasks[1].target = f.labels;
    tasks[1].loss = LossKind::CrossEntropy;
    tasks[1].channels = {1, 5};
  } else {
    std::vector<Volume> images = {phantom(4, 4, 2, -1.0, seed).image, phantom(4, 4, 2, 1.0, seed).image};
    normalize_intensity(images);
    for (std::uint32_t f = 0; f < 2; ++f) {
      tasks[f].grid = GridSpec{{4, 4, 2}, TimeAxis{2, f}};
      tasks[f].target = images[f];
    }
  }
  tasks[1].id = 2;
  return tasks;
}

// Worst relative error between backprop and central differences of
// L_total = L_fit + lambda L_distil on the second task of a sequence.
double gradient_error(Arch arch, std::uint64_t draw) {
  const bool signal = draw % 2 == 1;
  const auto tasks = gradient_tasks(signal, draw);
  ModelConfig mc = ModelConfig::defaults(arch, static_cast<std::uint32_t>(tasks[0].grid.coord_dims()), 1);
  mc.hidden_layers = 2;
  mc.hidden_width = 8;
  mc.seed = draw;
  FieldModel<double> student = build_model<double>(mc, &tasks[0].grid);
  const auto teacher = snapshot_teacher(student);
  prepare_for_task(student, tasks[1]);
  std::mt19937_64 rng(draw ^ 0xacce55);
  for (auto& e : student.params()) {
    for (auto& v : e.value.values()) v += std::uniform_real_distribution<double>(-0.2, 0.2)(rng);
  }

  const auto grid = make_grid<double>(tasks[1].grid);
  const auto all_targets = task_targets<double>(tasks[1]);
  std::vector<std::uint32_t> rows(grid.rows());
  std::iota(rows.begin(), rows.end(), 0u);
  std::shuffle(rows.begin(), rows.end(), rng);
  rows.resize(12);
  const auto coords = gather_rows(grid, rows);
  const auto targets = gather_rows(all_targets, rows);
  const auto x_distil = sample_distill_coords<double>(std::span(tasks).first(1), 12, rng);
  const auto soft = distill_targets(teacher, x_distil);
  const double lambda = 1.0;

  auto record = [&](Graph<double>& g) {
    const Var raw = student.forward_raw(g, coords);
    const Var fit = fit_loss(g, student, raw, targets, tasks[1].loss, tasks[1].channels, 1.0);
    return g.add(fit, g.scale(distill_loss(g, student, teacher, x_distil, soft, 1.0), lambda));
  };
  Graph<double> g(student.params());
  const GradSet<double> analytic = g.backward(record(g));
  const GradSet<double> numeric = test::numeric_gradient(student.params(), [&] {
    Graph<double> h(student.params());
    return h.scalar(record(h));
  });
  double worst = 0;
  for (std::size_t p = 0; p < analytic.size(); ++p) {
    for (std::size_t i = 0; i < analytic[p].size(); ++i) {
      worst = std::max(worst, test::relative_error(analytic[p][i], numeric[p][i]));
    }
  }
  return worst;
}

void criterion_gradients() {
  const auto start = Clock::now();
  constexpr std::uint64_t kDraws = 100;
  double worst = 0;
  std::string per_arch;
  for (Arch a : kArchs) {
    double arch_worst = 0;
    for (std::uint64_t d = 0; d < kDraws; ++d) arch_worst = std::max(arch_worst, gradient_error(a, d));
    per_arch += std::string(arch_name(a)) + "=" + fmt("%.2e", arch_worst) + " ";
    worst = std::max(worst, arch_worst);
  }
  const double secs = seconds_since(start);
  report(1, worst < 1e-4 && secs < 60.0,
         per_arch + "(" + std::to_string(kDraws) + " draws each, " + fmt("%.1f s", secs) + ")");
}

void criterion_fitting() {
  // Full-size configuration: 3 x 256, 500 iterations, batch 4096.
  std::vector<Volume> frames = {phantom(32, 32, 8, -1.0, 0).image};
  normalize_intensity(frames);
  Task task;
  task.grid = GridSpec{{32, 32, 8}, std::nullopt};
  task.target = frames[0];
  bool ok = true;
  std::string detail;
  for (Arch a : kArchs) {
    ModelConfig mc = ModelConfig::defaults(a, 3, 1);
    auto model = build_model<float>(mc, &task.grid);
    TrainConfig tc;
    tc.lr = TrainConfig::default_lr(a);
    const auto start = Clock::now();
    fit_task(model, task, tc);
    const double secs = seconds_since(start);
    const double p = psnr(predict_intensity(model, task.grid), task.target);
    const double need = a == Arch::PeRelu ? 20.0 : 28.0;
    ok = ok && p >= need && secs < 120.0;
    detail += std::string(arch_name(a)) + "=" + fmt("%.1f dB", p) + fmt("/%.0fs ", secs);
  }
  report(2, ok, detail);
}

using Key = std::tuple<std::string, std::string, std::uint32_t, std::string>;

std::map<Key, SummaryRow> index_summary(const std::vector<MetricsRow>& rows) {
  std::map<Key, SummaryRow> out;
  for (const auto& s : aggregate(rows)) out[{s.model, s.strategy, s.trained_through_task, s.eval_target}] = s;
  return out;
}

double summary_psnr(const std::map<Key, SummaryRow>& s, Arch a, const char* strategy, std::uint32_t task,
                    const std::string& target) {
  const auto it = s.find({std::string(arch_name(a)), strategy, task, target});
  if (it == s.end() || !it->second.psnr) throw ContractError("no summary for " + target);
  return *it->second.psnr;
}

void criteria_domain(const fs::path& work, double& seconds) {
  ExperimentConfig cfg;
  cfg.experiment = Experiment::DomainExpansion;
  cfg.out_dir = work / "domain";
  cfg.write_checkpoints = false;
  const auto start = Clock::now();
  const auto rows = run_experiment(cfg);
  seconds = seconds_since(start);
  const auto s = index_summary(rows);
  const std::uint32_t last = cfg.frames;
  const std::string last_frame = "frame" + std::to_string(last);

  bool ok3 = true;
  std::string d3;
  for (Arch a : {Arch::Siren, Arch::Finer}) {
    const double after1 = summary_psnr(s, a, "baseline", 1, "frame1");
    const double afterL = summary_psnr(s, a, "baseline", last, "frame1");
    ok3 = ok3 && afterL <= after1 - 5.0;
    d3 += std::string(arch_name(a)) + " frame1 " + fmt("%.2f", after1) + fmt(" -> %.2f dB ", afterL);
  }
  report(3, ok3, d3);

  bool ok4 = true;
  std::string d4;
  for (Arch a : kArchs) {
    const double b1 = summary_psnr(s, a, "baseline", last, "frame1");
    const double k1 = summary_psnr(s, a, "distillation", last, "frame1");
    const double bL = summary_psnr(s, a, "baseline", last, last_frame);
    const double kL = summary_psnr(s, a, "distillation", last, last_frame);
    ok4 = ok4 && k1 >= b1 + 2.0 && kL >= bL - 2.0;
    d4 += std::string(arch_name(a)) + " f1 " + fmt("%.2f", b1) + fmt("/%.2f", k1) + " f" + std::to_string(last) +
          " " + fmt("%.2f", bL) + fmt("/%.2f ", kL);
  }
  report(4, ok4, d4 + "(baseline/distillation dB)");
}

void criterion_signal(const fs::path& work, double& seconds) {
  ExperimentConfig cfg;
  cfg.experiment = Experiment::SignalExpansion;
  cfg.out_dir = work / "signal";
  cfg.write_checkpoints = false;
  const auto start = Clock::now();
  const auto rows = run_experiment(cfg);
  seconds = seconds_since(start);
  const auto s = index_summary(rows);
  bool ok = true;
  std::string detail;
  for (Arch a : kArchs) {
    const auto it = s.find({std::string(arch_name(a)), "distillation", 2, "mask"});
    double dsc = 0;
    if (it != s.end() && !it->second.dice.empty()) {
      for (double d : it->second.dice) dsc += d;
      dsc /= static_cast<double>(it->second.dice.size());
    }
    const double pb = summary_psnr(s, a, "baseline", 2, "image");
    const double pk = summary_psnr(s, a, "distillation", 2, "image");
    ok = ok && dsc >= 0.84 && dsc <= 1.0 && pk >= pb;
    detail += std::string(arch_name(a)) + " dsc=" + fmt("%.3f", dsc) + " psnr " + fmt("%.2f", pb) +
              fmt("/%.2f ", pk);
  }
  report(5, ok, detail);
}

void criterion_zero_lambda() {
  DistillConfig zero;
  zero.lambda = 0.0;
  TrainConfig tc;
  tc.iterations = 30;
  tc.batch_coords = 256;
  bool ok = true;
  for (Arch a : kArchs) {
    for (bool signal : {false, true}) {
      std::vector<Volume> images;
      std::vector<Task> tasks;
      if (signal) {
        tasks = gradient_tasks(true, 3);
        const PhantomFrame f = phantom(16, 16, 4, -1.0, 3);
        for (auto& t : tasks) t.grid = GridSpec{{16, 16, 4}, std::nullopt};
        tasks[0].target = normalize_intensity(f.image);
        tasks[1].target = f.labels;
      } else {
        for (std::uint32_t f = 0; f < 4; ++f) images.push_back(phantom(16, 16, 4, TimeAxis{4, f}.value(), 3).image);
        normalize_intensity(images);
        for (std::uint32_t f = 0; f < 4; ++f) {
          Task t;
          t.id = f + 1;
          t.grid = GridSpec{{16, 16, 4}, TimeAxis{4, f}};
          t.target = images[f];
          tasks.push_back(std::move(t));
        }
      }
      ModelConfig mc = ModelConfig::defaults(a, static_cast<std::uint32_t>(tasks[0].grid.coord_dims()), 1);
      mc.hidden_width = 32;
      tc.lr = TrainConfig::default_lr(a);
      auto base = build_model<float>(mc, &tasks[0].grid);
      auto dist = base;
      const auto tb = continual_fit(base, std::span(tasks), Strategy::Baseline, tc, zero);
      const auto td = continual_fit(dist, std::span(tasks), Strategy::Distillation, tc, zero);
      ok = ok && base.params() == dist.params() && base.coord_index() == dist.coord_index();
      for (std::size_t k = 0; k < tb.size(); ++k) {
        for (std::size_t i = 0; i < tb[k].rows.size(); ++i) {
          ok = ok && tb[k].rows[i].loss_total == td[k].rows[i].loss_total;
        }
      }
    }
  }
  report(6, ok, "parameters, coordinate maps and loss traces compared bitwise, 4 archs x domain/signal");
}

void criterion_metrics() {
  bool ok = true;
  std::string detail;
  std::mt19937_64 rng(77);
  std::vector<float> a(10 * 12 * 3);
  for (auto& v : a) v = std::uniform_real_distribution<float>(0, 1)(rng);
  const Volume x = Volume::intensity({10, 12, 3}, a);
  ok = ok && psnr(x, x) == kPsnrCap;
  Volume y = x;
  for (auto& v : y.intensities) v += 0.1f;  // MSE 0.01
  ok = ok && std::abs(psnr(x, y) - 20.0) < 1e-4;
  ok = ok && std::abs(ssim(x, x) - 1.0) < 1e-12;
  const Volume l = Volume::label_map({1, 1, 4}, {1, 1, 0, 2});
  ok = ok && dice(l, l, 1) == 1.0;
  ok = ok && dice(l, Volume::label_map({1, 1, 4}, {0, 0, 1, 2}), 3) == 1.0;
  ok = ok && dice(Volume::label_map({1, 1, 4}, {1, 0, 0, 0}), Volume::label_map({1, 1, 4}, {0, 1, 0, 0}), 1) == 0.0;
  ok = ok && std::abs(dice(Volume::label_map({1, 1, 4}, {1, 1, 0, 0}), Volume::label_map({1, 1, 4}, {1, 0, 0, 0}), 1) -
                      2.0 / 3.0) < 1e-15;
  detail += ok ? "unit values ok; " : "unit values wrong; ";

  double worst = 0;
  for (int pair = 0; pair < 20; ++pair) {
    const std::vector<std::uint32_t> dims = {static_cast<std::uint32_t>(8 + pair % 5),
                                             static_cast<std::uint32_t>(9 + pair % 3), 2};
    std::vector<float> p(dims[0] * dims[1] * dims[2]), r(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = std::uniform_real_distribution<float>(0, 1)(rng);
      r[i] = std::clamp(p[i] + std::normal_distribution<float>(0, 0.2f)(rng), 0.0f, 1.0f);
    }
    const Volume vp = Volume::intensity(dims, p), vr = Volume::intensity(dims, r);
    worst = std::max(worst, std::abs(ssim(vp, vr) - test::brute_force_ssim(vp, vr)));
  }
  ok = ok && worst < 1e-4;
  report(7, ok, detail + "SSIM vs brute force max |diff| " + fmt("%.2e", worst) + " over 20 pairs");
}

void criterion_determinism(const fs::path& work) {
  const fs::path dir = work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string common =
      " --experiment domain --cases 2 --dims 12x12x4 --frames 3 --iters 20 --width 16 --batch 256 --no-checkpoints";
  bool ok = true;
  std::string detail;
  for (const char* run : {"a", "b"}) {
    const int code = run_cli("continual" + common + " --out " + (dir / run).string(), dir / "log.txt");
    if (code != 0) {
      ok = false;
      detail += std::string("continual exited ") + std::to_string(code) + "; ";
    }
  }
  for (const char* f : {"metrics.csv", "scatter_psnr.svg", "scatter_ssim.svg"}) {
    const std::string a = slurp(dir / "a" / f), b = slurp(dir / "b" / f);
    if (a.empty() || a != b) {
      ok = false;
      detail += std::string(f) + " differs; ";
    }
  }
  if (ok) detail += "metrics.csv and SVGs byte-identical; ";

  const PhantomFrame frame = phantom(9, 7, 5, 0.3, 11);
  const Volume image = normalize_intensity(frame.image);
  save_volume(image, dir / "image.nfv");
  save_volume(frame.labels, dir / "labels.nfv");
  const bool round_trip = load_volume(dir / "image.nfv") == image && load_volume(dir / "labels.nfv") == frame.labels &&
                          encode_volume(load_volume(dir / "image.nfv")) == encode_volume(image);
  ok = ok && round_trip;
  detail += round_trip ? "NFV round trip exact; " : "NFV round trip differs; ";

  auto bytes = encode_volume(image);
  bytes[3] ^= 0xff;
  std::ofstream(dir / "bad_magic.nfv", std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                                                 static_cast<std::streamsize>(bytes.size()));
  bytes = encode_volume(image);
  bytes.resize(bytes.size() - 5);
  std::ofstream(dir / "truncated.nfv", std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                                                static_cast<std::streamsize>(bytes.size()));
  for (const char* bad : {"bad_magic.nfv", "truncated.nfv"}) {
    const int code = run_cli("eval --pred " + (dir / bad).string() + " --ref " + (dir / "image.nfv").string(),
                             dir / "log.txt");
    ok = ok && code == 2;
    detail += std::string(bad) + " -> exit " + std::to_string(code) + "; ";
  }
  report(8, ok, detail);
}

}  // namespace

int main(int argc, char** argv) {
  configure_allocator();
  CLI::App app{"End-to-end acceptance checks"};
  fs::path work = fs::temp_directory_path() / "nfcl_acceptance";
  app.add_option("--work-dir", work, "Scratch directory for experiment outputs");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  try {
    criterion_gradients();
    criterion_fitting();
    double domain_secs = 0, signal_secs = 0;
    criteria_domain(work, domain_secs);
    criterion_signal(work, signal_secs);
    criterion_zero_lambda();
    criterion_metrics();
    criterion_determinism(work);
    report(9, domain_secs <= 600.0 && signal_secs <= 600.0,
           "default matrix: domain " + fmt("%.0f s", domain_secs) + ", signal " + fmt("%.0f s", signal_secs));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
