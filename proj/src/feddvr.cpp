#include "fedq/feddvr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fedq/error.hpp"
#include "fedq/sampling.hpp"

namespace fedq {

namespace {

// Stream step = epoch * kEpochStride + iteration (0 is the re-centering round).
constexpr std::uint64_t kEpochStride = std::uint64_t{1} << 20;
constexpr std::uint32_t kMaxEpochs = 1u << 15;

constexpr double kFullConstantL = 39200.0;
constexpr double kSubsampledConstantL = 19600.0;

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

std::uint64_t message_bits(std::size_t dim, unsigned bits, double alpha) {
    if (alpha >= 1.0) return std::uint64_t{bits} * dim;
    return std::uint64_t{subsample_count(dim, alpha)} * (bits + coordinate_id_bits(dim));
}

// Ratio dim / count applied to subsampled inputs; 1 for dense messages.
double subsample_scale(std::size_t dim, double alpha) {
    if (alpha >= 1.0) return 1.0;
    return static_cast<double>(dim) / static_cast<double>(subsample_count(dim, alpha));
}

CompressedMessage compress(std::span<const double> v, const QuantizerConfig& cfg, double alpha,
                           RandomStream& stream) {
    return alpha >= 1.0 ? quantize(v, cfg, stream) : subsample_quantize(v, cfg, alpha, stream);
}

std::string where(std::uint32_t epoch, std::uint64_t iteration, std::uint32_t agent) {
    return "epoch " + std::to_string(epoch) + ", iteration " + std::to_string(iteration) + ", agent " +
           std::to_string(agent);
}

}  // namespace

std::uint64_t ceil_robust(double x) {
    if (!std::isfinite(x) || x < 0.0) throw ValidationError("ceil_robust: argument must be finite and nonnegative");
    const double nearest = std::round(x);
    if (std::abs(x - nearest) <= 1e-12 * std::max(1.0, std::abs(x))) return static_cast<std::uint64_t>(nearest);
    return static_cast<std::uint64_t>(std::ceil(x));
}

void DvrSettings::validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("dvr: gamma must lie in (0, 1)");
    if (!(eps > 0.0 && eps <= 1.0)) throw ValidationError("dvr: eps must lie in (0, 1]");
    if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("dvr: delta must lie in (0, 1)");
    if (!(eta > 0.0 && eta < 1.0)) throw ValidationError("dvr: eta must lie in (0, 1)");
    if (num_agents < 1 || num_agents > kMaxAgents) throw ValidationError("dvr: num_agents out of range");
    if (num_pairs < 1) throw ValidationError("dvr: num_pairs must be positive");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("dvr: alpha must lie in (0, 1]");
    if (!(scale_l > 0.0) || !(scale_b > 0.0)) throw ValidationError("dvr: scale_l and scale_b must be positive");
    if (min_l < 1 || min_b < 1) throw ValidationError("dvr: min_l and min_b must be at least 1");
}

DvrParams derive_params(const DvrSettings& s) {
    s.validate();
    const double horizon = 1.0 / (1.0 - s.gamma);
    DvrParams p;
    p.settings = s;
    p.k0 = static_cast<std::uint32_t>(ceil_robust(std::max(0.0, 0.5 * std::log2(horizon))));
    const auto second = static_cast<std::uint32_t>(ceil_robust(std::max(0.0, 0.5 * std::log2(horizon / (s.eps * s.eps)))));
    p.num_epochs = p.k0 + second;
    if (p.num_epochs == 0) p.num_epochs = 1;
    if (p.num_epochs >= kMaxEpochs) throw ValidationError("dvr: too many epochs");
    p.iters_per_epoch = ceil_robust(2.0 / (s.eta * (1.0 - s.gamma)));
    if (p.iters_per_epoch + 1 >= kEpochStride) throw ValidationError("dvr: too many iterations per epoch");

    const double m = static_cast<double>(s.num_agents);
    p.log_factor = std::log(8.0 * p.num_epochs * static_cast<double>(p.iters_per_epoch) *
                            static_cast<double>(s.num_pairs) / s.delta);

    const double batch = s.scale_b * (2.0 / m) * std::pow(12.0 * s.gamma * horizon, 2) * p.log_factor;
    p.batch_size = std::max(s.min_b, ceil_robust(batch));

    const double resolution = (70.0 * horizon / s.eta) * std::sqrt((4.0 / m) * p.log_factor);
    const double bits = resolution > 1.0 ? static_cast<double>(ceil_robust(std::log2(resolution))) : 1.0;
    p.bits = static_cast<unsigned>(std::clamp(bits, 1.0, 62.0));

    const double constant = s.alpha >= 1.0 ? kFullConstantL : kSubsampledConstantL / s.alpha;
    const double base = s.scale_l * constant * horizon * horizon * p.log_factor;
    for (std::uint32_t k = 1; k <= p.num_epochs; ++k) {
        const std::uint32_t exponent = k <= p.k0 ? k : k - p.k0;
        const double size = base * std::pow(4.0, exponent);
        if (!(size < 1e18)) throw ValidationError("dvr: re-centering sample size overflows");
        p.recentering_sizes.push_back(std::max(s.min_l, ceil_robust(size)));
        p.bounds.push_back(16.0 * std::ldexp(1.0, -static_cast<int>(k)) * horizon);
    }
    return p;
}

EpochSettings epoch_settings(const DvrParams& params, std::uint32_t k) {
    if (k < 1 || k > params.num_epochs) throw ValidationError("epoch_settings: epoch out of range");
    EpochSettings e;
    e.epoch = k;
    e.batch_size = params.batch_size;
    e.iterations = params.iters_per_epoch;
    e.recentering = params.recentering_size(k);
    e.bound = params.bound(k);
    e.bits = params.bits;
    e.eta = params.settings.eta;
    e.alpha = params.settings.alpha;
    return e;
}

RecenterResult estimate_recentered_operator(const TabularMdp& mdp, const QTable& q_bar, std::uint64_t recentering,
                                            std::uint32_t num_agents, const QuantizerConfig& cfg, double alpha,
                                            const RngPlan& plan, std::uint32_t epoch) {
    if (recentering < 1) throw ValidationError("recentered operator: L must be at least 1");
    if (num_agents < 1) throw ValidationError("recentered operator: num_agents must be at least 1");
    if (q_bar.num_states() != mdp.num_states() || q_bar.num_actions() != mdp.num_actions()) {
        throw DimensionError("recentered operator: q_bar shape does not match the MDP");
    }
    cfg.validate();
    const std::size_t pairs = mdp.num_pairs();
    const std::uint64_t per_agent = ceil_div(recentering, num_agents);
    const double scale = subsample_scale(pairs, alpha);
    const auto v_bar = q_bar.state_values();
    const auto rewards = mdp.rewards();
    const auto center = q_bar.values();
    const std::uint64_t step = std::uint64_t{epoch} * kEpochStride;

    RecenterResult out;
    std::vector<double> acc(pairs);
    std::vector<double> diff(pairs);
    std::vector<double> decoded_sum(pairs, 0.0);
    std::uint64_t bits = 0;
    for (std::uint32_t m = 0; m < num_agents; ++m) {
        std::fill(acc.begin(), acc.end(), 0.0);
        RandomStream samples = plan.stream(m, step, StreamPurpose::kRecenterSamples);
        accumulate_next_values(mdp, v_bar, per_agent, samples, acc);
        const double inv = 1.0 / static_cast<double>(per_agent);
        for (std::size_t pair = 0; pair < pairs; ++pair) {
            diff[pair] = rewards[pair] + mdp.gamma() * (acc[pair] * inv) - center[pair];
        }
        out.max_compressor_input = std::max(out.max_compressor_input, sup_norm(diff) * scale);
        RandomStream noise = plan.stream(m, step, StreamPurpose::kRecenterQuantize);
        CompressedMessage msg;
        try {
            msg = compress(diff, cfg, alpha, noise);
        } catch (const CompressorBoundError& e) {
            throw CompressorBoundError(e.coordinate(), e.value(), e.bound(), where(epoch, 0, m) + ", re-centering");
        }
        if (m == 0) bits = msg.bit_cost;
        const auto decoded = decode(msg, cfg, pairs);
        for (std::size_t pair = 0; pair < pairs; ++pair) decoded_sum[pair] += decoded[pair];
    }

    out.estimate = q_bar;
    auto dst = out.estimate.values();
    const double inv_agents = 1.0 / static_cast<double>(num_agents);
    for (std::size_t pair = 0; pair < pairs; ++pair) dst[pair] += decoded_sum[pair] * inv_agents;
    out.ledger.rounds = 1;
    out.ledger.bits_per_agent = bits;
    out.ledger.samples_per_agent_per_sa = per_agent;
    return out;
}

RefineResult refine_estimate(const TabularMdp& mdp, const QTable& q_bar, const EpochSettings& epoch,
                             std::uint32_t num_agents, const RngPlan& plan, const QTable* q_star) {
    if (epoch.batch_size < 1 || epoch.iterations < 1) throw ValidationError("refine: B and I must be at least 1");
    if (epoch.iterations + 1 >= kEpochStride) throw ValidationError("refine: too many iterations");
    if (epoch.epoch >= kMaxEpochs) throw ValidationError("refine: epoch index too large");
    if (!(epoch.eta > 0.0 && epoch.eta <= 1.0)) throw ValidationError("refine: eta must lie in (0, 1]");
    const std::size_t pairs = mdp.num_pairs();
    const double scale = subsample_scale(pairs, epoch.alpha);
    // Subsampled inputs are inflated by dim / count, so the bound grows with them.
    const QuantizerConfig cfg{epoch.bound * scale, epoch.bits};

    RecenterResult recenter = estimate_recentered_operator(mdp, q_bar, epoch.recentering, num_agents, cfg,
                                                           epoch.alpha, plan, epoch.epoch);
    const auto t_tilde = recenter.estimate.values();
    const auto v_bar = q_bar.state_values();

    RefineResult result;
    result.report.epoch = epoch.epoch;
    result.report.bound = epoch.bound;
    result.report.max_compressor_input = recenter.max_compressor_input / scale;
    result.report.ledger = recenter.ledger;

    QTable q = q_bar;
    std::vector<double> acc(pairs);
    std::vector<double> diff(pairs);
    std::vector<double> decoded_sum(pairs);
    const double eta = epoch.eta;
    const double gamma_over_b = mdp.gamma() / static_cast<double>(epoch.batch_size);
    const double inv_agents = 1.0 / static_cast<double>(num_agents);
    std::uint64_t bits = 0;

    for (std::uint64_t i = 1; i <= epoch.iterations; ++i) {
        const std::uint64_t step = std::uint64_t{epoch.epoch} * kEpochStride + i;
        const auto v_prev = q.state_values();
        const auto current = q.values();
        std::fill(decoded_sum.begin(), decoded_sum.end(), 0.0);
        for (std::uint32_t m = 0; m < num_agents; ++m) {
            std::fill(acc.begin(), acc.end(), 0.0);
            RandomStream batch = plan.stream(m, step, StreamPurpose::kIterationBatch);
            accumulate_next_differences(mdp, v_prev, v_bar, epoch.batch_size, batch, acc);
            for (std::size_t pair = 0; pair < pairs; ++pair) {
                const double direction = gamma_over_b * acc[pair] + t_tilde[pair];
                const double half_step = (1.0 - eta) * current[pair] + eta * direction;
                diff[pair] = half_step - current[pair];
            }
            result.report.max_compressor_input = std::max(result.report.max_compressor_input, sup_norm(diff));
            RandomStream noise = plan.stream(m, step, StreamPurpose::kIterationQuantize);
            CompressedMessage msg;
            try {
                msg = compress(diff, cfg, epoch.alpha, noise);
            } catch (const CompressorBoundError& e) {
                throw CompressorBoundError(e.coordinate(), e.value(), e.bound(), where(epoch.epoch, i, m));
            }
            if (m == 0) bits += msg.bit_cost;
            const auto decoded = decode(msg, cfg, pairs);
            for (std::size_t pair = 0; pair < pairs; ++pair) decoded_sum[pair] += decoded[pair];
        }
        auto dst = q.values();
        for (std::size_t pair = 0; pair < pairs; ++pair) dst[pair] += decoded_sum[pair] * inv_agents;
    }

    result.report.ledger.rounds += epoch.iterations;
    result.report.ledger.bits_per_agent += bits;
    result.report.ledger.samples_per_agent_per_sa += epoch.iterations * epoch.batch_size;
    result.report.error = q_star != nullptr ? sup_distance(q, *q_star) : std::numeric_limits<double>::quiet_NaN();
    result.q = std::move(q);
    return result;
}

DvrRun run_fed_dvr(const TabularMdp& mdp, const DvrParams& params, const QTable& q_star, const RngPlan& plan,
                   const DvrRunOptions& options) {
    params.settings.validate();
    if (params.settings.num_pairs != mdp.num_pairs()) {
        throw DimensionError("run_fed_dvr: parameters were derived for a different |S||A|");
    }
    if (q_star.num_states() != mdp.num_states() || q_star.num_actions() != mdp.num_actions()) {
        throw DimensionError("run_fed_dvr: q_star shape does not match the MDP");
    }
    DvrRun run;
    run.q = QTable(mdp.num_states(), mdp.num_actions());
    for (std::uint32_t k = 1; k <= params.num_epochs; ++k) {
        RefineResult r = refine_estimate(mdp, run.q, epoch_settings(params, k), params.settings.num_agents, plan, &q_star);
        run.q = std::move(r.q);
        run.total += r.report.ledger;
        run.epochs.push_back(r.report);
        if (options.stop_below && r.report.error <= *options.stop_below) break;
    }
    return run;
}

RunRecord to_run_record(const DvrRun& run, std::size_t num_pairs) {
    RunRecord record;
    record.num_pairs = num_pairs;
    CommLedger cumulative;
    for (const EpochReport& e : run.epochs) {
        cumulative += e.ledger;
        RunRow row;
        row.step = e.epoch;
        row.samples_per_agent = cumulative.samples_per_agent_per_sa;
        row.agent_error = e.error;
        row.averaged_error = e.error;
        row.rounds = cumulative.rounds;
        row.bits_per_agent = cumulative.bits_per_agent;
        record.rows.push_back(row);
    }
    return record;
}

CommLedger planned_ledger(const DvrParams& params) {
    const auto& s = params.settings;
    CommLedger ledger;
    const std::uint64_t rounds_per_epoch = params.iters_per_epoch + 1;
    ledger.rounds = rounds_per_epoch * params.num_epochs;
    ledger.bits_per_agent = message_bits(s.num_pairs, params.bits, s.alpha) * ledger.rounds;
    for (std::uint64_t l : params.recentering_sizes) {
        ledger.samples_per_agent_per_sa += ceil_div(l, s.num_agents) + params.iters_per_epoch * params.batch_size;
    }
    return ledger;
}

ComplexityBounds complexity_bounds(const DvrParams& params) {
    const auto& s = params.settings;
    const double horizon = 1.0 / (1.0 - s.gamma);
    const double epochs_term = std::log2(horizon / s.eps);
    const double m = static_cast<double>(s.num_agents);
    ComplexityBounds b;
    b.rounds = 16.0 * horizon / s.eta * epochs_term;
    b.bits = 32.0 * static_cast<double>(s.num_pairs) * horizon / s.eta * epochs_term *
             std::log2(70.0 * horizon / s.eta * std::sqrt((4.0 / m) * params.log_factor));
    b.sample_shape = std::pow(horizon, 3) / (s.eta * m * s.eps * s.eps) * epochs_term * params.log_factor;
    return b;
}

}  // namespace fedq
