#pragma once

// Scenario simulation: follow the occupied equilibrium along a control path,
// register per-sector catastrophes, maintain the synchronization window A(t)
// and order parameter |A(t)|/k, declare apocalyptic times, and build the
// catastrophe graph.

#include "catnet/control_path.hpp"
#include "catnet/diagnostics.hpp"

#include <map>
#include <numeric>
#include <random>
#include <set>

namespace catnet {

enum class Mechanism { FoldDisappearance, StabilityFlip };

inline constexpr std::string_view to_string(Mechanism m) {
  return m == Mechanism::FoldDisappearance ? "fold_disappearance" : "stability_flip";
}

struct CatastropheEvent {
  double time = 0.0;
  int sector = 0;
  Mechanism mechanism = Mechanism::FoldDisappearance;
  SectorSignature pre_signature;
  SectorSignature post_signature;
  double jump_size = 0.0; // ||delta x_sector|| of the relaxed state
  /// True when the sector was reached through coupling: its own branch was
  /// lost only after another sector moved.
  bool induced = false;
  Vector alpha; // controls at the event step
  SingularityDiagnostics diagnostics; // at the last pre-event equilibrium
};

/// Threshold on |A(t)|: an integer count L_c or a fraction phi_c of k.
struct Threshold {
  enum class Kind { Count, Fraction };
  Kind kind = Kind::Count;
  int count = 2;
  double fraction = 0.5;

  static Threshold at_least(int l_c) { return {Kind::Count, l_c, 0.0}; }
  static Threshold phi(double phi_c) { return {Kind::Fraction, 0, phi_c}; }

  bool met(int active, int k) const {
    return kind == Kind::Count ? active >= count
                               : static_cast<double>(active) / k >= fraction;
  }
};

struct GraphEdge {
  int i = 0, j = 0; // i < j
  double min_alignment_angle = std::numeric_limits<double>::quiet_NaN();
  int co_event_count = 0;
};

struct CatastropheGraph {
  int k = 0;
  std::vector<GraphEdge> edges;

  bool has_edge(int a, int b) const {
    if (a > b)
      std::swap(a, b);
    return std::any_of(edges.begin(), edges.end(),
                       [&](const GraphEdge &e) { return e.i == a && e.j == b; });
  }

  /// Connected components, each sorted, ordered by smallest member.
  std::vector<std::vector<int>> components() const {
    std::vector<int> parent(k);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int v) {
      while (parent[v] != v)
        v = parent[v] = parent[parent[v]];
      return v;
    };
    for (const auto &e : edges)
      parent[find(e.i)] = find(e.j);
    std::map<int, std::vector<int>> groups;
    for (int v = 0; v < k; ++v)
      groups[find(v)].push_back(v);
    std::vector<std::vector<int>> out;
    for (auto &[root, members] : groups)
      out.push_back(std::move(members));
    std::sort(out.begin(), out.end());
    return out;
  }
};

struct StepRecord {
  double t = 0.0;
  Vector alpha;
  Vector x;
  std::vector<int> in_a; // 0/1 per sector
  double phi = 0.0;
};

struct ApocalypticTime {
  double time = 0.0;
  int active = 0; // |A(t)|
  std::vector<int> members;
  std::vector<std::vector<int>> triggered_components; // components meeting A(t)
};

struct CascadeReport {
  int k = 0;
  double tau_sync = 0.0;
  std::vector<CatastropheEvent> events; // time-ordered
  std::vector<StepRecord> steps;        // empty unless recorded
  CatastropheGraph graph;
  std::vector<ApocalypticTime> apocalyptic_times;

  /// A(t): sectors with an event in (t - tau_sync, t].
  std::vector<int> active_sectors(double t) const {
    std::set<int> s;
    for (const auto &e : events)
      if (e.time <= t && e.time > t - tau_sync)
        s.insert(e.sector);
    return {s.begin(), s.end()};
  }

  /// Order parameter Phi(t) = |A(t)| / k.
  double order_parameter(double t) const {
    return static_cast<double>(active_sectors(t).size()) / k;
  }
};

struct CascadeOptions {
  double tau_sync = 0.05;
  Threshold threshold = Threshold::at_least(2);
  double angle_max = 10.0; // degrees
  SearchBox box;
  RelaxOptions relax;
  ContinuationOptions continuation;
  double attribution_tol = 1e-3;
  double tol_rank = default_tol_rank;
  double same_state_tol = 1e-4; // relaxed state vs continued equilibrium
  bool record_steps = true;
};

/// The relaxed state left the escape radius: the potential is not confining
/// along this path.
class ScenarioAborted : public std::runtime_error {
public:
  ScenarioAborted(const std::string &what, double time)
      : std::runtime_error(what), time_(time) {}
  double time() const { return time_; }

private:
  double time_;
};

/// Edge (i, j) iff eps*lambda_ij != 0, the two sectors have events within
/// tau_sync of each other, and at the earlier event's diagnostics either the
/// joint corank is >= 2 or the i/j normal angle is <= angle_max.
inline CatastropheGraph build_graph(const NetworkSystem &sys,
                                    const std::vector<CatastropheEvent> &events, double tau_sync,
                                    double angle_max) {
  CatastropheGraph g;
  g.k = sys.k();
  std::map<std::pair<int, int>, GraphEdge> edges;
  for (std::size_t a = 0; a < events.size(); ++a) {
    for (std::size_t b = a + 1; b < events.size(); ++b) {
      const auto *ea = &events[a], *eb = &events[b];
      if (eb->time - ea->time > tau_sync)
        break;
      if (ea->sector == eb->sector)
        continue;
      if (std::abs(eb->time - ea->time) > tau_sync)
        continue;
      const int i = std::min(ea->sector, eb->sector), j = std::max(ea->sector, eb->sector);
      if (sys.coupling_weight(i, j) == 0.0)
        continue;
      const auto &diag = (eb->time < ea->time ? eb : ea)->diagnostics;
      const double angle =
          diag.pairwise_angles.size() ? diag.pairwise_angles(i, j)
                                      : std::numeric_limits<double>::quiet_NaN();
      const bool aligned = std::isfinite(angle) && angle <= angle_max;
      if (!(diag.corank >= 2 || aligned))
        continue;
      auto &e = edges[{i, j}];
      e.i = i;
      e.j = j;
      ++e.co_event_count;
      if (std::isfinite(angle) &&
          (!std::isfinite(e.min_alignment_angle) || angle < e.min_alignment_angle))
        e.min_alignment_angle = angle;
    }
  }
  for (auto &[key, e] : edges)
    g.edges.push_back(e);
  return g;
}

namespace detail {

inline NetworkEquilibrium settle(const NetworkSystem &sys, const Vector &x, const Vector &alpha) {
  const NewtonResult r = network_newton(sys, alpha, x);
  return make_equilibrium(sys, r.converged ? r.x : x, alpha);
}

inline double sector_distance(const NetworkSystem &sys, const Vector &a, const Vector &b, int i) {
  return (sys.sector_x(a, i) - sys.sector_x(b, i)).norm();
}

inline std::vector<std::vector<int>> components_meeting(const CatastropheGraph &g,
                                                        const std::vector<int> &members) {
  std::vector<std::vector<int>> out;
  for (auto &c : g.components()) {
    const bool meets = std::any_of(c.begin(), c.end(), [&](int v) {
      return std::find(members.begin(), members.end(), v) != members.end();
    });
    if (meets)
      out.push_back(std::move(c));
  }
  return out;
}

} // namespace detail

/// Simulate one scenario. Per path step: continue the occupied equilibrium,
/// relax the state by gradient flow, and emit events:
///  - FoldDisappearance when continuation signals a fold. The fold is
///    attributed to every sector whose diagonal block has smallest
///    |eigenvalue| < attribution_tol at the last pre-fold point (always
///    including the smallest one), plus every other sector whose own branch,
///    followed while the rest of the network relaxes, is lost (propagation
///    through coupling).
///  - StabilityFlip when a sector block changes its number of negative
///    eigenvalues, or when the relaxed state leaves a still-existing
///    equilibrium that lost stability.
inline CascadeReport run_scenario(const NetworkSystem &sys, const ControlPath &path,
                                  const Vector &x0, const CascadeOptions &opts) {
  require(opts.tau_sync > 0.0, "run_scenario: tau_sync must be > 0");
  require(x0.size() == sys.n(), "run_scenario: x0 length mismatch");
  require(!path.values.empty() && path.values.front().size() == sys.p(),
          "run_scenario: path dimension mismatch");
  require(opts.box.contains(x0), "run_scenario: x0 outside the search box");

  CascadeReport report;
  report.k = sys.k();
  report.tau_sync = opts.tau_sync;
  const int k = sys.k();
  std::vector<double> last_event(k, -std::numeric_limits<double>::infinity());

  auto relax_at = [&](const Vector &x, const Vector &alpha, double t) {
    try {
      return relax(sys, x, alpha, opts.relax).x;
    } catch (const EscapeError &e) {
      throw ScenarioAborted("scenario aborted at t=" + std::to_string(t) +
                                ": state left escape radius " +
                                std::to_string(opts.relax.escape_radius) +
                                " (potential not confining along this path)",
                            t);
    }
  };

  auto active = [&](double t) {
    std::vector<int> a;
    for (int i = 0; i < k; ++i)
      if (last_event[i] > t - opts.tau_sync && last_event[i] <= t)
        a.push_back(i);
    return a;
  };

  auto record = [&](double t, const Vector &alpha, const Vector &x) {
    if (!opts.record_steps)
      return;
    StepRecord s;
    s.t = t;
    s.alpha = alpha;
    s.x = x;
    s.in_a.assign(k, 0);
    const auto a = active(t);
    for (int i : a)
      s.in_a[i] = 1;
    s.phi = static_cast<double>(a.size()) / k;
    report.steps.push_back(std::move(s));
  };

  // The flow can stall on a saddle or maximum (e.g. starting at a symmetric
  // point). Leave it along the most negative curvature direction so the
  // scenario starts from a stable state.
  Vector x = relax_at(x0, path.values[0], path.times[0]);
  for (int attempt = 0; attempt < sys.n(); ++attempt) {
    const Matrix h0 = network_hessian(sys, x, path.values[0]);
    Eigen::SelfAdjointEigenSolver<Matrix> es(h0);
    if (es.eigenvalues()[0] >= 0.0)
      break;
    Vector dir = es.eigenvectors().col(0);
    for (Eigen::Index q = 0; q < dir.size(); ++q)
      if (std::abs(dir[q]) > 1e-12) {
        if (dir[q] < 0.0)
          dir = -dir;
        break;
      }
    x = relax_at(Vector(x + 1e-3 * dir), path.values[0], path.times[0]);
  }
  NetworkEquilibrium eq = detail::settle(sys, x, path.values[0]);
  x = eq.x;
  record(path.times[0], path.values[0], x);

  for (std::size_t s = 1; s < path.size(); ++s) {
    const double t = path.times[s];
    const Vector &alpha = path.values[s];
    const Vector &alpha_prev = path.values[s - 1];
    const ContinuationResult cont = continue_equilibrium(sys, eq, alpha, opts.continuation);
    const Vector rx = relax_at(x, alpha, t);

    std::vector<int> hit;
    std::vector<bool> induced(k, false);
    Mechanism mech = Mechanism::FoldDisappearance;
    const NetworkEquilibrium *pre = &eq;
    NetworkEquilibrium next;

    auto branch_lost = [&](int i) {
      const auto xi = continue_sector(sys, i, x, alpha_prev, rx, alpha, opts.continuation);
      return !xi || inf_norm(*xi - sys.sector_x(rx, i)) > opts.same_state_tol;
    };

    if (const auto *fold = std::get_if<FoldSignal>(&cont)) {
      pre = &fold->last_good;
      int smallest = 0;
      for (int i = 0; i < k; ++i) {
        const double m = pre->sector_signatures[i].min_abs_eigenvalue;
        if (m < pre->sector_signatures[smallest].min_abs_eigenvalue)
          smallest = i;
        if (m < opts.attribution_tol)
          hit.push_back(i);
      }
      if (std::find(hit.begin(), hit.end(), smallest) == hit.end())
        hit.push_back(smallest);
      for (int i = 0; i < k; ++i) {
        if (std::find(hit.begin(), hit.end(), i) != hit.end())
          continue;
        if (branch_lost(i)) {
          hit.push_back(i);
          induced[i] = true;
        }
      }
      next = detail::settle(sys, rx, alpha);
    } else {
      const auto &c = std::get<NetworkEquilibrium>(cont);
      mech = Mechanism::StabilityFlip;
      for (int i = 0; i < k; ++i)
        if (c.sector_signatures[i].negative_eigenvalues !=
            eq.sector_signatures[i].negative_eigenvalues)
          hit.push_back(i);
      if (inf_norm(rx - c.x) <= opts.same_state_tol) {
        next = c;
      } else {
        // The continued equilibrium survives but the state fell off it.
        for (int i = 0; i < k; ++i) {
          if (std::find(hit.begin(), hit.end(), i) != hit.end())
            continue;
          if (branch_lost(i)) {
            hit.push_back(i);
            induced[i] = true;
          }
        }
        if (hit.empty()) {
          int far = 0;
          for (int i = 1; i < k; ++i)
            if (detail::sector_distance(sys, rx, x, i) > detail::sector_distance(sys, rx, x, far))
              far = i;
          hit.push_back(far);
        }
        next = detail::settle(sys, rx, alpha);
      }
    }

    if (!hit.empty()) {
      std::sort(hit.begin(), hit.end());
      const SingularityDiagnostics diag = diagnose(sys, *pre, opts.tol_rank);
      for (int i : hit) {
        CatastropheEvent e;
        e.time = t;
        e.sector = i;
        e.mechanism = mech;
        e.pre_signature = pre->sector_signatures[i];
        e.post_signature = next.sector_signatures[i];
        e.jump_size = detail::sector_distance(sys, rx, x, i);
        e.induced = induced[i];
        e.alpha = alpha;
        e.diagnostics = diag;
        report.events.push_back(std::move(e));
        last_event[i] = t;
      }
      const auto a = active(t);
      if (opts.threshold.met(static_cast<int>(a.size()), k)) {
        ApocalypticTime at;
        at.time = t;
        at.active = static_cast<int>(a.size());
        at.members = a;
        report.apocalyptic_times.push_back(std::move(at));
      }
    }

    eq = std::move(next);
    x = (std::get_if<NetworkEquilibrium>(&cont) && inf_norm(rx - eq.x) <= opts.same_state_tol)
            ? rx
            : eq.x;
    record(t, alpha, x);
  }

  report.graph = build_graph(sys, report.events, opts.tau_sync, opts.angle_max);
  for (auto &at : report.apocalyptic_times)
    at.triggered_components = detail::components_meeting(report.graph, at.members);
  return report;
}

/// Every component of the catastrophe graph that meets A(t) at an
/// apocalyptic time is fully contained in A(t).
inline bool cascade_coverage_check(const CascadeReport &report, const CatastropheGraph &graph) {
  require(!report.apocalyptic_times.empty(),
          "cascade_coverage_check: report has no apocalyptic time");
  for (const auto &at : report.apocalyptic_times) {
    for (const auto &c : detail::components_meeting(graph, at.members))
      for (int v : c)
        if (std::find(at.members.begin(), at.members.end(), v) == at.members.end())
          return false;
  }
  return true;
}

/// True iff two events in distinct sectors lie within tau of each other.
inline bool has_co_event(const CascadeReport &report, double tau) {
  const auto &ev = report.events;
  for (std::size_t a = 0; a < ev.size(); ++a)
    for (std::size_t b = a + 1; b < ev.size() && ev[b].time - ev[a].time <= tau; ++b)
      if (ev[a].sector != ev[b].sector)
        return true;
  return false;
}

/// Number of events that have a partner in another sector within tau.
inline int co_event_count(const CascadeReport &report, double tau) {
  const auto &ev = report.events;
  int count = 0;
  for (std::size_t a = 0; a < ev.size(); ++a) {
    bool partner = false;
    for (std::size_t b = 0; b < ev.size() && !partner; ++b)
      partner = b != a && ev[b].sector != ev[a].sector && std::abs(ev[b].time - ev[a].time) <= tau;
    count += partner;
  }
  return count;
}

using Partition = std::vector<std::vector<int>>;

struct StabilityResult {
  double fraction = 0.0;
  int preserved = 0;
  int trials = 0;
  int aborted = 0;
  Partition reference;
};

/// Perturb every control coordinate by a constant offset and every nonzero
/// lambda_ij by an amount drawn uniformly from [-eta, eta], rerun, and count
/// trials whose component partition matches the unperturbed run.
inline StabilityResult structural_stability_experiment(const NetworkSystem &sys,
                                                       const ControlPath &path, const Vector &x0,
                                                       const CascadeOptions &opts, double eta,
                                                       int trials, std::uint64_t seed) {
  require(eta >= 0.0, "structural_stability_experiment: eta must be >= 0");
  require(trials >= 1, "structural_stability_experiment: trials must be >= 1");
  CascadeOptions quiet = opts;
  quiet.record_steps = false;
  StabilityResult out;
  out.trials = trials;
  out.reference = run_scenario(sys, path, x0, quiet).graph.components();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-eta, eta);
  for (int trial = 0; trial < trials; ++trial) {
    Vector offset(sys.p());
    for (Eigen::Index q = 0; q < offset.size(); ++q)
      offset[q] = eta > 0.0 ? unif(rng) : 0.0;
    CouplingSpec c = sys.coupling();
    for (int i = 0; i < sys.k(); ++i)
      for (int j = i + 1; j < sys.k(); ++j)
        if (c.lambda(i, j) != 0.0) {
          const double d = eta > 0.0 ? unif(rng) : 0.0;
          c.lambda(i, j) += d;
          c.lambda(j, i) = c.lambda(i, j);
        }
    const NetworkSystem perturbed(sys.sectors(), c);
    ControlPath shifted = path;
    for (auto &v : shifted.values)
      v += offset;
    try {
      const auto parts = run_scenario(perturbed, shifted, x0, quiet).graph.components();
      if (parts == out.reference)
        ++out.preserved;
    } catch (const ScenarioAborted &) {
      ++out.aborted;
    }
  }
  out.fraction = static_cast<double>(out.preserved) / trials;
  return out;
}

} // namespace catnet
