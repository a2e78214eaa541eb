#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

#include "forchestra/baselines/ensemble.hpp"
#include "forchestra/cli/run.hpp"
#include "forchestra/data/synthetic.hpp"
#include "forchestra/error.hpp"
#include "forchestra/eval/metrics.hpp"
#include "forchestra/eval/ranking.hpp"
#include "forchestra/model/forchestra.hpp"

namespace py = pybind11;
using namespace forchestra;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) { return {a.data(), a.data() + a.size()}; }

std::vector<std::uint8_t> to_flags(const std::vector<int>& v) { return {v.begin(), v.end()}; }

nn::Tensor to_tensor(const Array& a) {
    nn::Shape shape(a.shape(), a.shape() + a.ndim());
    return nn::Tensor(shape, to_vector(a));
}

Array to_array(const nn::Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    Array out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

class Model {
public:
    explicit Model(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot read '" + path + "'");
        model_ = model::forchestra_from_checkpoint(nlohmann::json::parse(in));
    }
    std::size_t K() const { return model_.config.K; }
    std::size_t parameters() const { return model::count_parameters(model_); }
    py::tuple forecast(const Array& context, const Array& rep_context) {
        const auto r = model::forecast(model_, to_tensor(context), to_tensor(rep_context));
        return py::make_tuple(to_array(r.prediction), to_array(r.weights));
    }

private:
    model::ForchestraModel model_;
};

}  // namespace

PYBIND11_MODULE(_forchestra, m) {
    m.doc() = "Forchestra forecasting toolkit";

    py::register_exception<forchestra::Error>(m, "Error");

    m.def(
        "masked_mae",
        [](const Array& y, const Array& y_hat, const std::vector<int>& availability) {
            return eval::masked_mae(to_vector(y), to_vector(y_hat), to_flags(availability));
        },
        py::arg("y"), py::arg("y_hat"), py::arg("availability"));
    m.def(
        "masked_rmse",
        [](const Array& y, const Array& y_hat, const std::vector<int>& availability) {
            return eval::masked_rmse(to_vector(y), to_vector(y_hat), to_flags(availability));
        },
        py::arg("y"), py::arg("y_hat"), py::arg("availability"));
    m.def(
        "masked_mase",
        [](const Array& y, const Array& y_hat, const std::vector<int>& availability, const Array& history,
           const std::vector<int>& history_availability) {
            return eval::masked_mase(to_vector(y), to_vector(y_hat), to_flags(availability), to_vector(history),
                                     to_flags(history_availability));
        },
        py::arg("y"), py::arg("y_hat"), py::arg("availability"), py::arg("history"), py::arg("history_availability"));

    m.def(
        "rbo",
        [](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b, std::size_t depth, double p) {
            return eval::rbo(a, b, depth, p);
        },
        py::arg("a"), py::arg("b"), py::arg("depth"), py::arg("persistence") = 0.9);

    m.def(
        "ensemble_weights",
        [](const std::vector<double>& scores, const std::string& strategy, std::optional<std::size_t> k,
           double epsilon) {
            baselines::EnsembleSpec spec;
            spec.strategy = baselines::strategy_from_string(strategy);
            spec.k = k;
            spec.epsilon = epsilon;
            return baselines::ensemble_weights(scores, spec);
        },
        py::arg("scores"), py::arg("strategy"), py::arg("k") = std::nullopt, py::arg("epsilon") = 1e-10);

    m.def(
        "generate_synthetic",
        [](std::size_t n_instances, std::size_t n_days, std::size_t n_regimes, std::uint64_t seed, double noise) {
            data::SyntheticSpec spec;
            spec.n_instances = n_instances;
            spec.n_days = n_days;
            spec.n_regimes = n_regimes;
            spec.seed = seed;
            spec.noise_level = noise;
            const auto ds = data::generate_synthetic(spec);
            py::list ids, regimes;
            Array sales({ds.size(), ds.length()});
            py::array_t<std::uint8_t> avail({ds.size(), ds.length()});
            for (std::size_t i = 0; i < ds.size(); ++i) {
                const auto& s = ds.instances[i];
                ids.append(s.id);
                regimes.append(std::stoul(*s.meta("regime")));
                std::copy(s.sales.begin(), s.sales.end(), sales.mutable_data() + i * ds.length());
                std::copy(s.availability.begin(), s.availability.end(), avail.mutable_data() + i * ds.length());
            }
            py::dict out;
            out["ids"] = ids;
            out["regime"] = regimes;
            out["sales"] = sales;
            out["availability"] = avail;
            return out;
        },
        py::arg("n_instances") = 200, py::arg("n_days") = 400, py::arg("n_regimes") = 4, py::arg("seed") = 0,
        py::arg("noise") = 1.0);

    py::class_<Model>(m, "Model")
        .def(py::init<const std::string&>(), py::arg("checkpoint"))
        .def_property_readonly("K", &Model::K)
        .def_property_readonly("parameters", &Model::parameters)
        .def("forecast", &Model::forecast, py::arg("context"), py::arg("rep_context"),
             "scaled predictions [B x P] and importance weights [B x K]");

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = cli::run(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "run a forchestra command; returns (exit code, stdout, stderr)");
}
