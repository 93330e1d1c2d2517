#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "coadapt/analysis.hpp"
#include "coadapt/dynamics.hpp"
#include "coadapt/game.hpp"
#include "coadapt/game_io.hpp"
#include "coadapt/protocol.hpp"

namespace py = pybind11;
using namespace coadapt;

namespace {

py::dict trajectory_dict(const Trajectory& tr) {
  const auto n = static_cast<Eigen::Index>(tr.steps.size());
  const auto dh = n ? tr.steps[0].h.size() : 0;
  const auto dm = n ? tr.steps[0].m.size() : 0;
  Matrix h(n, dh), m(n, dm);
  Vector ch(n), cm(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = tr.steps[static_cast<std::size_t>(i)];
    h.row(i) = s.h.transpose();
    m.row(i) = s.m.transpose();
    ch[i] = s.cost_H;
    cm[i] = s.cost_M;
  }
  py::dict d;
  d["h"] = h;
  d["m"] = m;
  d["cost_H"] = ch;
  d["cost_M"] = cm;
  d["dist_h_ne"] = tr.dist_h_ne;
  d["dist_h_se"] = tr.dist_h_se;
  d["dist_m_ne"] = tr.dist_m_ne;
  d["dist_m_se"] = tr.dist_m_se;
  d["diverged_at"] = tr.diverged_at ? py::object(py::int_(*tr.diverged_at)) : py::none();
  return d;
}

// JSON crosses the boundary as text; the Python side parses it.
std::string dump(const nlohmann::json& j) { return j.dump(); }

}  // namespace

PYBIND11_MODULE(_coadapt, m) {
  m.doc() = "Quadratic human-AI games: equilibria, co-adaptation dynamics, analysis";

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

  py::class_<GameParams>(m, "GameParams")
      .def(py::init<>())
      .def_static("zeros", &GameParams::zeros, py::arg("d_H"), py::arg("d_M"))
      .def_readwrite("A_H", &GameParams::A_H)
      .def_readwrite("B_H", &GameParams::B_H)
      .def_readwrite("D_H", &GameParams::D_H)
      .def_readwrite("a_H", &GameParams::a_H)
      .def_readwrite("b_H", &GameParams::b_H)
      .def_readwrite("A_M", &GameParams::A_M)
      .def_readwrite("B_M", &GameParams::B_M)
      .def_readwrite("D_M", &GameParams::D_M)
      .def_readwrite("a_M", &GameParams::a_M)
      .def_readwrite("b_M", &GameParams::b_M)
      .def_property_readonly("d_H", &GameParams::d_H)
      .def_property_readonly("d_M", &GameParams::d_M)
      .def("to_json", [](const GameParams& p, const std::string& name) {
        return dump(game_to_json(p, name));
      }, py::arg("name") = "");

  py::class_<JointAction>(m, "JointAction")
      .def(py::init<Vector, Vector>(), py::arg("h"), py::arg("m"))
      .def_readwrite("h", &JointAction::h)
      .def_readwrite("m", &JointAction::m)
      .def("__repr__", [](const JointAction& x) {
        return "JointAction(h=" + py::repr(py::cast(x.h)).cast<std::string>() +
               ", m=" + py::repr(py::cast(x.m)).cast<std::string>() + ")";
      });

  py::class_<ConditionReport>(m, "ConditionReport")
      .def_readonly("first_order", &ConditionReport::first_order)
      .def_readonly("second_order", &ConditionReport::second_order)
      .def_readonly("gradient_norm_H", &ConditionReport::gradient_norm_H)
      .def_readonly("gradient_norm_M", &ConditionReport::gradient_norm_M)
      .def_readonly("min_eigenvalue_H", &ConditionReport::min_eigenvalue_H)
      .def_readonly("min_eigenvalue_M", &ConditionReport::min_eigenvalue_M)
      .def("__bool__", &ConditionReport::holds);

  m.def("load_game", [](const std::filesystem::path& p) { return load_game(p).params; });
  m.def("validate", [](const GameParams& p) {
    const auto v = validate(p);
    return py::make_tuple(v.ok(), v.messages);
  });

  auto action = [](const Vector& h, const Vector& mm) { return JointAction{h, mm}; };
  m.def("cost_H", [=](const GameParams& p, const Vector& h, const Vector& mm) { return cost_H(p, action(h, mm)); });
  m.def("cost_M", [=](const GameParams& p, const Vector& h, const Vector& mm) { return cost_M(p, action(h, mm)); });
  m.def("grad_H", [=](const GameParams& p, const Vector& h, const Vector& mm) { return grad_H(p, action(h, mm)); });
  m.def("grad_M", [=](const GameParams& p, const Vector& h, const Vector& mm) { return grad_M(p, action(h, mm)); });
  m.def("best_response_M", &best_response_M);
  m.def("solve_nash", &solve_nash);
  m.def("solve_stackelberg_human_led", &solve_stackelberg_human_led);
  m.def("check_differential_nash", [](const GameParams& p, const JointAction& x) {
    return check_differential_nash(p, x);
  });
  m.def("check_differential_stackelberg", [](const GameParams& p, const JointAction& x) {
    return check_differential_stackelberg(p, x);
  });
  m.def("calibrate_offsets",
        [](const GameParams& tmpl, const Vector& h_ne, std::optional<Vector> h_se) {
          const auto r = calibrate_offsets(tmpl, h_ne, h_se);
          return py::make_tuple(r.params, r.se_residual);
        },
        py::arg("template"), py::arg("h_nash"), py::arg("h_stackelberg") = py::none());

  m.def("ai_step",
        [](const GameParams& p, const Vector& h, const Vector& mm, double alpha) {
          return ai_step(p, h, mm, alpha);
        },
        py::arg("p"), py::arg("h"), py::arg("m"), py::arg("alpha"));

  py::class_<SimConfig>(m, "SimConfig")
      .def(py::init<>())
      .def_readwrite("alpha", &SimConfig::alpha)
      .def_readwrite("eta", &SimConfig::eta)
      .def_readwrite("sigma", &SimConfig::sigma)
      .def_readwrite("T", &SimConfig::T)
      .def_readwrite("K", &SimConfig::K)
      .def_readwrite("h0", &SimConfig::h0)
      .def_readwrite("m0", &SimConfig::m0)
      .def_readwrite("seed", &SimConfig::seed)
      .def_readwrite("divergence_threshold", &SimConfig::divergence_threshold);

  m.def("simulate_zeroth_order", [](const GameParams& p, const SimConfig& c) {
    Trajectory tr;
    {
      py::gil_scoped_release nogil;
      tr = simulate_zeroth_order(p, c);
    }
    return trajectory_dict(tr);
  });
  m.def("simulate_simultaneous_gd", [](const GameParams& p, const SimConfig& c) {
    return trajectory_dict(simulate_simultaneous_gd(p, c));
  });
  m.def("estimate_gradient_bias",
        [](const GameParams& p, const Vector& h, const Vector& mm, double sigma, std::size_t n,
           std::uint64_t seed) {
          const auto e = estimate_gradient_bias(p, h, mm, sigma, n, seed);
          return py::make_tuple(e.mean, e.standard_error);
        },
        py::arg("p"), py::arg("h"), py::arg("m"), py::arg("sigma"), py::arg("n_samples"),
        py::arg("seed") = 0);
  m.def("random_game",
        [](int dh, int dm, std::uint64_t seed, std::optional<std::pair<double, double>> targets) {
          RandomGameOptions opt;
          if (targets) opt.targets = uniform_targets(dh, targets->first, targets->second);
          return random_game(dh, dm, seed, opt);
        },
        py::arg("d_H"), py::arg("d_M"), py::arg("seed") = 0, py::arg("targets") = py::none());

  m.def("build_session",
        [](const std::string& version, const std::string& mode, std::uint64_t seed,
           const std::string& key, const GameParams& game) {
          return dump(session_to_json(build_session(parse_game_version(version),
                                                    parse_display_mode(mode), seed, key, game)));
        });

  m.def("analyze_csv",
        [](const std::filesystem::path& csv, const GameParams& game, double seconds) {
          const auto stats =
              analyze_trials(read_export_csv(csv), solve_equilibria(game), seconds);
          py::list out;
          for (const auto& a : stats.per_alpha) {
            py::dict d;
            d["alpha"] = a.alpha;
            d["trials"] = a.trials;
            d["median_h"] = a.median_h;
            d["median_m"] = a.median_m;
            d["cost_H"] = py::make_tuple(a.cost_H.q25, a.cost_H.q50, a.cost_H.q75);
            d["cost_M"] = py::make_tuple(a.cost_M.q25, a.cost_M.q50, a.cost_M.q75);
            d["dist_h_ne"] = a.dist_h_ne;
            d["dist_h_se"] = a.dist_h_se;
            out.append(d);
          }
          return out;
        },
        py::arg("csv"), py::arg("game"), py::arg("seconds") = 5.0);
}
