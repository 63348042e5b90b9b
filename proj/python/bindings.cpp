#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "carfollow/depthmetrics.hpp"
#include "carfollow/errors.hpp"
#include "carfollow/gbt.hpp"
#include "carfollow/ingest.hpp"
#include "carfollow/kinematics.hpp"
#include "carfollow/leadvehicle.hpp"
#include "carfollow/stats.hpp"
#include "carfollow/synth.hpp"

namespace py = pybind11;
using namespace carfollow;

namespace {

ingest::DepthMap to_map(const std::vector<std::vector<double>>& rows) {
  ingest::DepthMap m;
  m.height = static_cast<std::uint32_t>(rows.size());
  m.width = rows.empty() ? 0 : static_cast<std::uint32_t>(rows.front().size());
  for (const auto& r : rows) {
    if (r.size() != m.width) throw ShapeError("ragged depth map rows");
    m.values.insert(m.values.end(), r.begin(), r.end());
  }
  return m;
}

gbt::Dataset to_dataset(const std::vector<std::string>& names, const std::vector<std::vector<double>>& x,
                        const std::vector<double>& y) {
  if (x.size() != y.size()) throw ShapeError("feature rows and targets differ in length");
  gbt::Dataset ds;
  ds.feature_names = names;
  for (std::size_t i = 0; i < x.size(); ++i) ds.add_row(x[i], y[i]);
  return ds;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "car-following extraction and analysis core";

  py::register_exception<Error>(m, "CarfollowError", PyExc_ValueError);

  m.def("lv_acceleration", &kinematics::lv_acceleration, py::arg("delta_s"), py::arg("delta_u"), py::arg("a_ego"),
        py::arg("t_step"));
  m.def("relative_velocity",
        [](const std::vector<double>& d, const std::vector<double>& t, int window) {
          return kinematics::relative_velocity(d, t, window);
        },
        py::arg("d"), py::arg("t"), py::arg("window") = 5);

  m.def("point_in_triangle",
        [](double x, double y, double width, double height, double left, double right) {
          return leadvehicle::point_in_triangle({x, y}, leadvehicle::make_lane_triangle(width, height, {left, right}));
        },
        py::arg("x"), py::arg("y"), py::arg("width"), py::arg("height"), py::arg("left") = 0.2,
        py::arg("right") = 0.8);

  m.def("fit_calibration",
        [](const std::vector<double>& model_depth, const std::vector<double>& truth) {
          if (model_depth.size() != truth.size()) throw ShapeError("inputs differ in length");
          std::vector<depthmetrics::DepthPair> pairs;
          for (std::size_t i = 0; i < truth.size(); ++i) pairs.push_back({model_depth[i], truth[i]});
          const auto fit = depthmetrics::fit_calibration(pairs);
          return py::dict(py::arg("scale") = fit.scale, py::arg("offset") = fit.offset, py::arg("rmse_m") = fit.rmse_m,
                          py::arg("n_samples") = fit.n_samples);
        });
  m.def("select_model", [](const std::vector<std::pair<std::string, double>>& scores) {
    std::vector<depthmetrics::ModelScore> s;
    for (const auto& [id, rmse] : scores) s.push_back({id, rmse});
    return depthmetrics::select_model(s);
  });

  using Map = std::vector<std::vector<double>>;
  m.def("loss_depth", [](const Map& y, const Map& p) { return depthmetrics::loss_depth(to_map(y), to_map(p)); });
  m.def("loss_grad", [](const Map& y, const Map& p) { return depthmetrics::loss_grad(to_map(y), to_map(p)); });
  m.def("loss_ssim",
        [](const Map& y, const Map& p, bool conventional) {
          return depthmetrics::loss_ssim(to_map(y), to_map(p),
                                         conventional ? depthmetrics::SsimForm::conventional
                                                      : depthmetrics::SsimForm::shifted);
        },
        py::arg("truth"), py::arg("pred"), py::arg("conventional") = false);
  m.def("loss_silog", [](const Map& y, const Map& p) { return depthmetrics::loss_silog(to_map(y), to_map(p)); });

  m.def("t_test",
        [](const std::vector<double>& a, const std::vector<double>& b, double alpha) {
          const auto r = stats::t_test(a, b, alpha);
          return py::dict(py::arg("t") = r.t_stat, py::arg("df") = r.df, py::arg("p") = r.p_value,
                          py::arg("pooled") = r.pooled, py::arg("reject") = r.decision == stats::Decision::reject);
        },
        py::arg("a"), py::arg("b"), py::arg("alpha") = stats::kAlpha);
  m.def("density_estimate",
        [](const std::vector<double>& values, std::size_t points) {
          std::vector<std::pair<double, double>> out;
          for (const auto& p : stats::density_estimate(values, {}, points)) out.emplace_back(p.x, p.f);
          return out;
        },
        py::arg("values"), py::arg("points") = stats::kDensityGridPoints);

  py::class_<gbt::BoostedModel>(m, "BoostedModel")
      .def_property_readonly("feature_names", [](const gbt::BoostedModel& b) { return b.feature_names; })
      .def_property_readonly("n_trees", [](const gbt::BoostedModel& b) { return b.trees.size(); })
      .def("predict", [](const gbt::BoostedModel& b, const std::vector<double>& row) { return gbt::predict(b, row); })
      .def("importance", [](const gbt::BoostedModel& b) { return gbt::feature_importance(b); })
      .def("to_text", [](const gbt::BoostedModel& b) { return gbt::format_model(b); })
      .def_static("from_text", [](const std::string& text) { return gbt::parse_model(text); });
  m.def("train_gbt",
        [](const std::vector<std::string>& names, const Map& x, const std::vector<double>& y, int rounds,
           double learning_rate, int max_depth, double min_child_weight, double reg_lambda, double base_score) {
          gbt::TrainParams p{rounds, learning_rate, max_depth, min_child_weight, reg_lambda, base_score};
          return gbt::train(to_dataset(names, x, y), p);
        },
        py::arg("feature_names"), py::arg("x"), py::arg("y"), py::arg("rounds") = 100, py::arg("learning_rate") = 0.1,
        py::arg("max_depth") = 6, py::arg("min_child_weight") = 1.0, py::arg("reg_lambda") = 1.0,
        py::arg("base_score") = 0.5);

  m.def("default_truth", [] {
    const synth::SyntheticDrive drive(synth::default_scenario());
    std::vector<std::tuple<double, double, double, double, double>> rows;
    for (const auto& r : drive.truth()) rows.emplace_back(r.t, r.gap_m, r.v_rel_mps, r.a_ego, r.a_lv);
    return rows;
  });
}
