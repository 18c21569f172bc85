#include "mvmt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mvmt/errors.hpp"

namespace mvmt {

namespace {

double evaluate_loss(const std::function<ag::Var(ParamStore&)>& loss_builder, ParamStore& params) {
    ag::Var loss = loss_builder(params);
    if (loss->value.size() != 1) raise(ErrorKind::Dimension, "gradient check loss must be scalar");
    const double value = loss->value[0];
    // drop graph references without collecting gradients
    params.collect_gradients();
    params.zero_gradients();
    if (!std::isfinite(value)) raise(ErrorKind::Evaluation, "non-finite loss during gradient check");
    return value;
}

std::uint64_t name_seed(const std::string& name) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace

GradCheckReport finite_difference_check(const std::function<ag::Var(ParamStore&)>& loss_builder,
                                        ParamStore& params, double tolerance,
                                        std::size_t max_coords_per_tensor, double step) {
    max_coords_per_tensor = std::max<std::size_t>(max_coords_per_tensor, 32);
    params.zero_gradients();

    ag::Var loss = loss_builder(params);
    if (loss->value.size() != 1) raise(ErrorKind::Dimension, "gradient check loss must be scalar");
    if (!std::isfinite(loss->value[0])) raise(ErrorKind::Evaluation, "non-finite loss during gradient check");
    ag::backward(loss);
    params.collect_gradients();

    std::map<std::string, Tensor> analytic;
    params.for_each([&](const std::string& name, const ParamStore::Entry& e) { analytic.emplace(name, e.grad); });
    params.zero_gradients();

    GradCheckReport report;
    report.tolerance = tolerance;
    for (const std::string& name : params.names()) {
        ParamStore::Entry& e = params.entry(name);
        const std::size_t n = e.value.size();
        std::vector<std::size_t> coords;
        if (n <= max_coords_per_tensor) {
            coords.resize(n);
            for (std::size_t i = 0; i < n; ++i) coords[i] = i;
        } else {
            Rng rng(name_seed(name));
            coords = rng.sample_without_replacement(n, max_coords_per_tensor);
        }
        GradCheckReport::PerParam per;
        per.name = name;
        per.coords_checked = coords.size();
        for (std::size_t idx : coords) {
            const double saved = e.value[idx];
            e.value[idx] = saved + step;
            const double up = evaluate_loss(loss_builder, params);
            e.value[idx] = saved - step;
            const double down = evaluate_loss(loss_builder, params);
            e.value[idx] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double exact = analytic.at(name)[idx];
            const double denom = std::max({std::fabs(numeric), std::fabs(exact), 1e-3});
            per.max_relative_error = std::max(per.max_relative_error, std::fabs(numeric - exact) / denom);
        }
        report.max_relative_error = std::max(report.max_relative_error, per.max_relative_error);
        report.params.push_back(std::move(per));
    }
    report.pass = report.max_relative_error < tolerance;
    return report;
}

} // namespace mvmt
