#include "fedq/metrics.hpp"

#include <cmath>
#include <string>

#include "fedq/error.hpp"

namespace fedq {

ErrorRate error_rate(std::span<const double> errors) {
    if (errors.empty()) throw ValidationError("error_rate: no errors supplied");
    const double n = static_cast<double>(errors.size());
    double sum = 0.0;
    for (double e : errors) sum += e;
    ErrorRate out;
    out.mean = sum / n;
    if (errors.size() > 1) {
        double ss = 0.0;
        for (double e : errors) ss += (e - out.mean) * (e - out.mean);
        out.standard_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    return out;
}

std::optional<std::uint64_t> samples_to_target(const RunRecord& record, double target) {
    for (const RunRow& row : record.rows) {
        if (row.agent_error <= target) return row.samples_per_agent * record.num_pairs;
    }
    return std::nullopt;
}

RunRecord mean_record(std::span<const RunRecord> records) {
    if (records.empty()) throw ValidationError("mean_record: no records supplied");
    RunRecord out = records.front();
    const double n = static_cast<double>(records.size());
    for (std::size_t i = 0; i < out.rows.size(); ++i) {
        double agent = 0.0;
        double averaged = 0.0;
        for (const RunRecord& r : records) {
            if (r.rows.size() != out.rows.size() || r.rows[i].step != out.rows[i].step) {
                throw DimensionError("mean_record: records have different checkpoints");
            }
            agent += r.rows[i].agent_error;
            averaged += r.rows[i].averaged_error;
        }
        out.rows[i].agent_error = agent / n;
        out.rows[i].averaged_error = averaged / n;
    }
    return out;
}

TrendFit linear_fit(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw DimensionError("linear_fit: xs and ys differ in length");
    if (xs.size() < 2) throw ValidationError("linear_fit: need at least two points");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0) throw ValidationError("linear_fit: xs are all equal");
    TrendFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    // A constant response is fitted exactly by the flat line.
    fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return fit;
}

TrendFit loglog_fit(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw DimensionError("loglog_fit: xs and ys differ in length");
    std::vector<double> lx(xs.size());
    std::vector<double> ly(ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) {
            throw ValidationError("loglog_fit: nonpositive input at index " + std::to_string(i));
        }
        lx[i] = std::log(xs[i]);
        ly[i] = std::log(ys[i]);
    }
    return linear_fit(lx, ly);
}

}  // namespace fedq
