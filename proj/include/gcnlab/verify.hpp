#pragma once

// Empirical verification harness: inequality checks on the subspace distance
// under skip sampling, the balanced-gradient cancellation check, and the
// random-graph experiment measuring how skipping slows the collapse of
// features toward the subspace.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "gcnlab/dense.hpp"
#include "gcnlab/diagnostics.hpp"
#include "gcnlab/graph.hpp"
#include "gcnlab/model.hpp"
#include "gcnlab/rng.hpp"

namespace gcnlab {

inline constexpr double kBoundTol = 1e-9;

/// One checked inequality. For upper bounds satisfied means
/// lhs <= rhs + kBoundTol; for lower bounds lhs >= rhs - kBoundTol.
struct BoundReport {
  std::string check;
  std::size_t n = 0;
  double p = 0.0;
  double s = 0.0;
  double rho = 0.0;
  std::uint64_t seed = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // rhs - lhs for upper bounds, lhs - rhs for lower
  bool is_upper = true;
  bool satisfied = false;
  bool skipped = false;
  std::string reason;
};

namespace detail {

inline BoundReport make_bound(std::string check, double lhs, double rhs, bool is_upper,
                              double tol = kBoundTol) {
  BoundReport r;
  r.check = std::move(check);
  r.lhs = lhs;
  r.rhs = rhs;
  r.is_upper = is_upper;
  r.slack = is_upper ? rhs - lhs : lhs - rhs;
  r.satisfied = r.slack >= -tol;
  return r;
}

inline BoundReport make_skipped(std::string check, std::string reason) {
  BoundReport r;
  r.check = std::move(check);
  r.skipped = true;
  r.satisfied = true;
  r.reason = std::move(reason);
  return r;
}

}  // namespace detail

/// Everything the distance checks need about one graph.
struct SpectralContext {
  Graph graph;
  NormAdj adj;
  SubspaceBasis basis;
  double lambda = 0.0;
};

inline SpectralContext make_spectral_context(Graph g, double tol = 1e-10,
                                             std::size_t max_iter = 200000) {
  SpectralContext c;
  c.graph = std::move(g);
  c.adj = normalize_adjacency(c.graph);
  c.basis = subspace_basis(c.graph);
  c.lambda = lambda_second(c.adj, c.basis, tol, max_iter);
  return c;
}

/// d^2(Z+Y) <= d^2(Z) + d^2(Y) + 2 d(Z) d(Y) and the matching lower bound
/// for Z-Y.
inline std::pair<BoundReport, BoundReport> check_subspace_triangle(
    const Dense& z, const Dense& y, const SubspaceBasis& basis) {
  if (!z.same_shape(y)) throw std::invalid_argument("check_subspace_triangle: shape mismatch");
  double dz = subspace_distance(z, basis);
  double dy = subspace_distance(y, basis);
  Dense sum = z, diff = z;
  for (std::size_t i = 0; i < z.data.size(); ++i) {
    sum.data[i] += y.data[i];
    diff.data[i] -= y.data[i];
  }
  double dsum = subspace_distance(sum, basis);
  double ddiff = subspace_distance(diff, basis);
  // squared distances grow with the data; scale the tolerance accordingly
  double scale = std::max(1.0, dz * dz + dy * dy);
  auto upper = detail::make_bound("triangle_upper", dsum * dsum,
                                  dz * dz + dy * dy + 2.0 * dz * dy, true,
                                  kBoundTol * scale);
  auto lower = detail::make_bound("triangle_lower", ddiff * ddiff,
                                  dz * dz + dy * dy - 2.0 * dz * dy, false,
                                  kBoundTol * scale);
  return {upper, lower};
}

namespace detail {

struct SkipInstance {
  double s = 0.0;       // top singular value of the weight
  double d_x = 0.0;     // d(X)
  double d_x1 = 0.0;    // d(relu(A_hat X W))
  double d_ex2 = 0.0;   // d((1-rho) X1 + rho X)
};

inline SkipInstance eval_skip_instance(const SpectralContext& ctx, const Dense& x,
                                       const Dense& w, double rho) {
  SkipInstance inst;
  inst.s = top_singular_value(w);
  Dense x1 = relu(spmm(ctx.adj, matmul(x, w)));
  Dense ex2 = x1;
  for (std::size_t i = 0; i < ex2.data.size(); ++i)
    ex2.data[i] = (1.0 - rho) * x1.data[i] + rho * x.data[i];
  inst.d_x = subspace_distance(x, ctx.basis);
  inst.d_x1 = subspace_distance(x1, ctx.basis);
  inst.d_ex2 = subspace_distance(ex2, ctx.basis);
  return inst;
}

}  // namespace detail

/// In expectation, one skip layer lands no closer to the subspace than
/// (s*lambda + rho(1 - s*lambda)) d(X); the plain layer obeys d(X1) <=
/// s*lambda d(X). Returns {skip bound, vanilla bound}.
inline std::pair<BoundReport, BoundReport> check_skip_upper(const SpectralContext& ctx,
                                                            const Dense& x, const Dense& w,
                                                            double rho) {
  if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("check_skip_upper: rho outside [0, 1]");
  auto inst = detail::eval_skip_instance(ctx, x, w, rho);
  double sl = inst.s * ctx.lambda;
  double scale = std::max(1.0, inst.d_x);
  auto skip = detail::make_bound("skip_upper", inst.d_ex2,
                                 (sl + rho * (1.0 - sl)) * inst.d_x, true,
                                 kBoundTol * scale);
  auto vanilla = detail::make_bound("vanilla_upper", inst.d_x1, sl * inst.d_x, true,
                                    kBoundTol * scale);
  return {skip, vanilla};
}

/// When rho d(X) > (1-rho) d(X1), the expected skip output keeps distance at
/// least (rho(1/(s*lambda) + 1) - 1) d(X1); when additionally
/// rho(1/(s*lambda) + 1) > 2 the expected output is strictly farther than the
/// plain one. Instances failing the premise come back as skipped reports.
inline std::vector<BoundReport> check_skip_lower(const SpectralContext& ctx, const Dense& x,
                                                 const Dense& w, double rho) {
  if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("check_skip_lower: rho outside [0, 1]");
  auto inst = detail::eval_skip_instance(ctx, x, w, rho);
  if (inst.d_x1 < 1e-12)
    return {detail::make_skipped("skip_lower", "d(X1) below tolerance, ratio undefined")};
  if (!(rho * inst.d_x > (1.0 - rho) * inst.d_x1))
    return {detail::make_skipped("skip_lower", "premise rho*d(X) > (1-rho)*d(X1) fails")};
  double sl = inst.s * ctx.lambda;
  double coeff = rho * (1.0 / sl + 1.0) - 1.0;
  double scale = std::max(1.0, inst.d_x1);
  std::vector<BoundReport> out;
  out.push_back(detail::make_bound("skip_lower", inst.d_ex2, coeff * inst.d_x1, false,
                                   kBoundTol * scale));
  if (rho * (1.0 / sl + 1.0) > 2.0)
    out.push_back(detail::make_bound("skip_ratio", inst.d_ex2 / inst.d_x1, 1.0, false));
  return out;
}

/// Zero logits with a class-balanced batch: the per-class column sums of the
/// cross-entropy gradient cancel to numerical zero.
inline BoundReport check_balanced_gradient(std::size_t num_classes, std::size_t batch) {
  if (num_classes == 0 || batch == 0 || batch % num_classes != 0)
    throw std::invalid_argument("check_balanced_gradient: batch not divisible by classes");
  Dense z(batch, num_classes);
  std::vector<int> labels(batch);
  std::vector<std::size_t> ids(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    labels[i] = static_cast<int>(i % num_classes);
    ids[i] = i;
  }
  CrossEntropy ce = cross_entropy(z, labels, ids);
  double worst = 0.0;
  for (std::size_t j = 0; j < num_classes; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < batch; ++i) col += ce.grad(i, j);
    worst = std::max(worst, std::abs(col));
  }
  BoundReport r = detail::make_bound("balanced_gradient", worst, 0.0, true, 1e-12);
  r.n = batch;
  r.s = static_cast<double>(num_classes);
  return r;
}

// ---------------------------------------------------------------------------
// Random-instance sweeps. Each instance derives its own stream from
// (seed, suite tag, instance index), so instances are order- and
// schedule-independent.

struct SweepConfig {
  std::size_t instances = 1000;
  std::size_t feat_dim = 16;
  std::uint64_t seed = 0;
  double lambda_tol = 1e-10;
  std::size_t max_iter = 200000;
};

namespace detail {

struct InstanceDraw {
  std::size_t n;
  double p;
  double s;
  double rho;
  std::uint64_t graph_seed;
  Rng rng;
};

inline InstanceDraw draw_instance(const SweepConfig& cfg, std::uint64_t tag, std::size_t idx) {
  Rng rng(mix_seed(cfg.seed, tag, static_cast<std::uint64_t>(idx)));
  static constexpr double s_grid[3] = {0.1, 0.5, 0.9};
  static constexpr double rho_grid[3] = {0.25, 0.5, 0.75};
  InstanceDraw d{50 + static_cast<std::size_t>(rng.next_u64() % 51),
                 0.0,
                 s_grid[rng.next_u64() % 3],
                 rho_grid[rng.next_u64() % 3],
                 rng.next_u64(),
                 rng};
  d.p = d.rng.uniform(0.3, 0.5);
  return d;
}

inline Dense gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
  Dense x(rows, cols);
  for (double& v : x.data) v = rng.normal();
  return x;
}

}  // namespace detail

/// Random Gaussian pairs, both triangle inequalities per instance.
inline std::vector<BoundReport> triangle_sweep(const SweepConfig& cfg) {
  std::vector<BoundReport> out;
  out.reserve(cfg.instances * 2);
  for (std::size_t i = 0; i < cfg.instances; ++i) {
    auto d = detail::draw_instance(cfg, 0x7472ULL, i);
    Graph g = erdos_renyi(d.n, d.p, d.graph_seed);
    SubspaceBasis basis = subspace_basis(g);
    Dense z = detail::gaussian(g.n, cfg.feat_dim, d.rng);
    Dense y = detail::gaussian(g.n, cfg.feat_dim, d.rng);
    auto [upper, lower] = check_subspace_triangle(z, y, basis);
    for (BoundReport* r : {&upper, &lower}) {
      r->n = d.n;
      r->p = d.p;
      r->seed = d.graph_seed;
      out.push_back(*r);
    }
  }
  return out;
}

namespace detail {

template <class Fn>
std::vector<BoundReport> skip_sweep(const SweepConfig& cfg, std::uint64_t tag, Fn&& check) {
  std::vector<BoundReport> out;
  for (std::size_t i = 0; i < cfg.instances; ++i) {
    auto d = draw_instance(cfg, tag, i);
    SpectralContext ctx = make_spectral_context(erdos_renyi(d.n, d.p, d.graph_seed),
                                                cfg.lambda_tol, cfg.max_iter);
    Dense x = relu(gaussian(ctx.graph.n, cfg.feat_dim, d.rng));
    Dense w = rescale_to_singular_value(
        glorot_init(cfg.feat_dim, cfg.feat_dim, d.rng.next_u64()), d.s);
    for (BoundReport r : check(ctx, x, w, d.rho)) {
      r.n = d.n;
      r.p = d.p;
      r.s = d.s;
      r.rho = d.rho;
      r.seed = d.graph_seed;
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace detail

inline std::vector<BoundReport> upper_bound_sweep(const SweepConfig& cfg) {
  return detail::skip_sweep(cfg, 0x7570ULL, [](const SpectralContext& ctx, const Dense& x,
                                               const Dense& w, double rho) {
    auto [skip, vanilla] = check_skip_upper(ctx, x, w, rho);
    return std::vector<BoundReport>{skip, vanilla};
  });
}

inline std::vector<BoundReport> lower_bound_sweep(const SweepConfig& cfg) {
  return detail::skip_sweep(cfg, 0x6c6fULL, [](const SpectralContext& ctx, const Dense& x,
                                               const Dense& w, double rho) {
    return check_skip_lower(ctx, x, w, rho);
  });
}

/// The exact cancellation check over a small grid of class/batch sizes.
inline std::vector<BoundReport> balanced_gradient_suite() {
  const std::pair<std::size_t, std::size_t> grid[] = {{2, 4}, {3, 9}, {7, 140}};
  std::vector<BoundReport> out;
  for (auto [c, b] : grid) out.push_back(check_balanced_gradient(c, b));
  return out;
}

inline void write_bounds_csv(const std::vector<BoundReport>& reports, const std::string& path) {
  std::ofstream out(path);
  out << "check,n,p,s,rho,seed,lhs,rhs,slack,satisfied,skipped,reason\n";
  char buf[256];
  for (const BoundReport& r : reports) {
    std::snprintf(buf, sizeof(buf), "%s,%zu,%.10g,%.10g,%.10g,%llu,%.12g,%.12g,%.12g,%d,%d,%s\n",
                  r.check.c_str(), r.n, r.p, r.s, r.rho,
                  static_cast<unsigned long long>(r.seed), r.lhs, r.rhs, r.slack,
                  r.satisfied ? 1 : 0, r.skipped ? 1 : 0, r.reason.c_str());
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// Random-graph depth experiment: one fixed graph; per (rho, s) cell and run,
// fresh Gaussian features and per-layer rescaled Glorot weights, skip masks
// drawn per layer; distances to the subspace tracked per layer.

struct Fig4Config {
  std::size_t n = 500;
  double p = 0.5;
  std::size_t depth = 10;
  std::vector<double> rho_grid{0.0, 0.1, 0.25, 0.5, 0.75};
  std::vector<double> s_grid{0.1, 0.5, 0.9};
  std::size_t runs = 100;
  std::size_t feat_dim = 64;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0 picks hardware concurrency
};

struct Fig4Cell {
  double rho = 0.0;
  double s = 0.0;
  std::vector<double> mean_log_ratio_per_layer;  // vs the input features
  double mean_one_layer_log_ratio = 0.0;         // skip vs plain, first layer
  bool has_one_layer = false;                    // false on the rho = 0 column
};

struct Fig4Result {
  Fig4Config config;
  std::vector<Fig4Cell> cells;  // rho-major, then s
};

namespace detail {

inline Fig4Cell fig4_cell(const Fig4Config& cfg, const SpectralContext& ctx,
                          std::size_t rho_idx, std::size_t s_idx) {
  Fig4Cell cell;
  cell.rho = cfg.rho_grid[rho_idx];
  cell.s = cfg.s_grid[s_idx];
  cell.mean_log_ratio_per_layer.assign(cfg.depth, 0.0);
  double one_layer_acc = 0.0;
  const std::size_t n = ctx.graph.n;
  for (std::size_t run = 0; run < cfg.runs; ++run) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(rho_idx),
                     static_cast<std::uint64_t>(s_idx), static_cast<std::uint64_t>(run)));
    Dense x0;
    double d0 = 0.0;
    for (int attempt = 0; attempt < 100; ++attempt) {
      x0 = gaussian(n, cfg.feat_dim, rng);
      d0 = subspace_distance(x0, ctx.basis);
      if (d0 >= 1e-12) break;
    }
    if (d0 < 1e-12) throw ConvergenceError("fig4: degenerate input features", d0);

    Dense x = x0;
    std::vector<std::uint8_t> mask(n, 0);
    for (std::size_t l = 0; l < cfg.depth; ++l) {
      Dense w = rescale_to_singular_value(
          glorot_init(cfg.feat_dim, cfg.feat_dim, rng.next_u64()), cell.s);
      for (auto& f : mask) f = rng.bernoulli(cell.rho) ? 1 : 0;
      Dense h = matmul(x, w);
      Dense pre = spmm_skip_rows(ctx.adj, h, mask);
      for (std::size_t i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        const double* xi = x.row(i);
        double* pi = pre.row(i);
        for (std::size_t j = 0; j < cfg.feat_dim; ++j) pi[j] = xi[j];
      }
      if (l == 0 && cell.rho > 0.0) {
        // plain first layer for the one-layer comparison
        Dense x1 = relu(spmm(ctx.adj, h));
        Dense x2 = relu(pre);
        one_layer_acc += std::log(subspace_distance(x2, ctx.basis) /
                                  subspace_distance(x1, ctx.basis));
        x = std::move(x2);
      } else {
        x = relu(pre);
      }
      cell.mean_log_ratio_per_layer[l] += std::log(subspace_distance(x, ctx.basis) / d0);
    }
  }
  double inv_runs = 1.0 / static_cast<double>(cfg.runs);
  for (double& v : cell.mean_log_ratio_per_layer) v *= inv_runs;
  if (cell.rho > 0.0) {
    cell.has_one_layer = true;
    cell.mean_one_layer_log_ratio = one_layer_acc * inv_runs;
  }
  return cell;
}

}  // namespace detail

inline Fig4Result fig4_experiment(const Fig4Config& cfg) {
  if (cfg.runs == 0 || cfg.depth == 0) throw std::invalid_argument("fig4: empty configuration");
  Fig4Result result;
  result.config = cfg;
  SpectralContext ctx = make_spectral_context(erdos_renyi(cfg.n, cfg.p, cfg.seed));

  std::size_t cells = cfg.rho_grid.size() * cfg.s_grid.size();
  result.cells.resize(cells);
  std::size_t workers = cfg.threads ? cfg.threads : std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= cells) return;
      std::size_t ri = c / cfg.s_grid.size();
      std::size_t si = c % cfg.s_grid.size();
      result.cells[c] = detail::fig4_cell(cfg, ctx, ri, si);
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  return result;
}

inline void write_fig4_csvs(const Fig4Result& r, const std::string& dir) {
  {
    std::ofstream out(dir + "/fig4a.csv");
    out << "rho,s,layer,mean_log_ratio\n";
    char buf[160];
    for (const Fig4Cell& c : r.cells)
      for (std::size_t l = 0; l < c.mean_log_ratio_per_layer.size(); ++l) {
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%zu,%.10g\n", c.rho, c.s, l + 1,
                      c.mean_log_ratio_per_layer[l]);
        out << buf;
      }
  }
  {
    std::ofstream out(dir + "/fig4b.csv");
    out << "rho,s,mean_log_ratio\n";
    char buf[120];
    for (const Fig4Cell& c : r.cells) {
      if (!c.has_one_layer) continue;
      std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g\n", c.rho, c.s,
                    c.mean_one_layer_log_ratio);
      out << buf;
    }
  }
}

}  // namespace gcnlab
