#include "nplmc/emulator.hpp"

#include "nplmc/error.hpp"
#include "nplmc/estimators.hpp"
#include "nplmc/normal.hpp"
#include "nplmc/parallel.hpp"
#include "nplmc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace nplmc {

namespace {

/// Consecutive draws from one counter stream.
class Draws {
  public:
    Draws(std::uint64_t seed, Stream stream, std::uint32_t unit) : rng_(seed, stream, unit, 0) {}
    double next() { return rng_.uniform(index_++); }
    double next_open() { return rng_.open_uniform(index_++); }
    std::size_t below(std::size_t n) {
        return std::min(n - 1, static_cast<std::size_t>(next() * static_cast<double>(n)));
    }
    template <class T> void shuffle(std::vector<T> &v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

  private:
    CounterStream rng_;
    std::uint32_t index_ = 0;
};

constexpr Segment kSliceSegment[kSliceCount] = {Segment::one, Segment::one, Segment::two,
                                                Segment::two, Segment::three, Segment::three};

struct SliceDistances {
    double min = 0.0;
    double phi = 0.0; ///< sum of d^-15, secondary criterion
};

SliceDistances distances(const std::vector<double> &x, const std::vector<double> &y) {
    SliceDistances s{std::numeric_limits<double>::infinity(), 0.0};
    for (std::size_t a = 0; a < x.size(); ++a) {
        for (std::size_t b = a + 1; b < x.size(); ++b) {
            const double d = std::hypot(x[a] - x[b], y[a] - y[b]);
            s.min = std::min(s.min, d);
            s.phi += std::pow(d, -15.0);
        }
    }
    return s;
}

} // namespace

SlicedDesign sliced_lhd(std::size_t n, std::uint64_t seed, const DesignOptions &options) {
    if (n < 2) {
        throw ValidationError("sliced LHD needs at least 2 points per slice");
    }
    constexpr std::size_t S = kSliceCount;
    const double cells = static_cast<double>(S * n);
    Draws rng(seed, Stream::design, 0);

    // Fine level of slice s inside coarse level l, and a jitter inside that cell.
    std::array<std::vector<std::size_t>, 2> fine;
    std::array<std::vector<double>, 2> jitter;
    for (int d = 0; d < 2; ++d) {
        fine[d].resize(n * S);
        jitter[d].resize(n * S);
        for (std::size_t l = 0; l < n; ++l) {
            std::vector<std::size_t> perm(S);
            std::iota(perm.begin(), perm.end(), 0);
            rng.shuffle(perm);
            for (std::size_t s = 0; s < S; ++s) {
                fine[d][l * S + s] = perm[s];
                jitter[d][l * S + s] = rng.next_open();
            }
        }
    }
    const auto coordinate = [&](int d, std::size_t s, std::size_t level) {
        return (static_cast<double>(level * S + fine[d][level * S + s]) + jitter[d][level * S + s]) / cells;
    };

    SlicedDesign design;
    design.points_per_slice = n;
    design.points.reserve(S * n);
    for (std::size_t s = 0; s < S; ++s) {
        std::array<std::vector<std::size_t>, 2> level;
        for (int d = 0; d < 2; ++d) {
            level[d].resize(n);
            std::iota(level[d].begin(), level[d].end(), 0);
            rng.shuffle(level[d]);
        }
        std::vector<double> x(n);
        std::vector<double> y(n);
        for (std::size_t k = 0; k < n; ++k) {
            x[k] = coordinate(0, s, level[0][k]);
            y[k] = coordinate(1, s, level[1][k]);
        }
        auto current = distances(x, y);
        for (int it = 0; it < options.exchange_iterations; ++it) {
            const int d = rng.next() < 0.5 ? 0 : 1;
            const std::size_t a = rng.below(n);
            std::size_t b = rng.below(n - 1);
            b += b >= a ? 1 : 0;
            auto &coord = d == 0 ? x : y;
            std::swap(level[d][a], level[d][b]);
            std::swap(coord[a], coord[b]);
            const auto trial = distances(x, y);
            if (trial.min > current.min || (trial.min == current.min && trial.phi < current.phi)) {
                current = trial;
            } else {
                std::swap(level[d][a], level[d][b]);
                std::swap(coord[a], coord[b]);
            }
        }
        for (std::size_t k = 0; k < n; ++k) {
            design.points.push_back({x[k], y[k], kSliceSegment[s], (s % 2) == 1});
        }
    }
    return design;
}

double slice_min_distance(const SlicedDesign &design, std::size_t slice) {
    const std::size_t n = design.points_per_slice;
    std::vector<double> x(n);
    std::vector<double> y(n);
    for (std::size_t k = 0; k < n; ++k) {
        x[k] = design.points.at(slice * n + k).b_tilde;
        y[k] = design.points.at(slice * n + k).c_tilde;
    }
    return distances(x, y).min;
}

SlicedDesign random_design(std::size_t per_slice, std::uint64_t seed) {
    SlicedDesign design;
    design.points_per_slice = per_slice;
    for (std::size_t s = 0; s < kSliceCount; ++s) {
        Draws rng(seed, Stream::validation, static_cast<std::uint32_t>(s));
        for (std::size_t k = 0; k < per_slice; ++k) {
            const double b = rng.next_open();
            const double c = rng.next_open();
            design.points.push_back({b, c, kSliceSegment[s], (s % 2) == 1});
        }
    }
    return design;
}

TrainingData generate_training_data(const SlicedDesign &design, std::uint64_t seed,
                                    const TrainingOptions &options) {
    const std::uint32_t K = options.realisations;
    if (K < 4) {
        throw PreconditionError("training data needs K >= 4 realisations per point for the kurtosis");
    }
    const std::size_t n = design.points.size();
    std::vector<TrainingObservation> all(n);
    parallel_for(n, options.threads, [&](std::size_t p) {
        const auto &pt = design.points[p];
        Account account;
        account.id = static_cast<AccountId>(p);
        account.balance = balance_quantile(pt.b_tilde, options.covariates);
        account.credit_score = credit_quantile(pt.c_tilde, options.covariates);
        account.segment = pt.segment;
        account.paid_last_month = pt.paid_prev;
        std::vector<double> totals(K);
        simulate_independent_batch(account, options.horizon, {seed, options.stream}, 0, totals);
        const auto m = sample_moments(totals);
        auto &obs = all[p];
        obs.point = pt;
        obs.balance = account.balance;
        obs.credit_score = account.credit_score;
        obs.variance = m.variance;
        obs.realisations = K;
        if (!m.degenerate) {
            obs.log_variance = std::log(m.variance);
            obs.kurtosis = m.kurtosis;
            obs.noise_variance = std::max(0.0, (m.kurtosis - 1.0) / static_cast<double>(K));
        }
    });
    TrainingData data;
    data.realisations = K;
    std::array<std::size_t, kSliceCount> kept{};
    for (auto &obs : all) {
        const auto s = slice_of(obs.point.segment, obs.point.paid_prev);
        if (obs.variance > 0.0) {
            ++kept[s];
            data.observations.push_back(obs);
        } else {
            ++data.dropped[s];
        }
    }
    for (std::size_t s = 0; s < kSliceCount; ++s) {
        if (kept[s] == 0 && data.dropped[s] > 0) {
            throw DegenerateError("every design point of slice " + std::to_string(s) +
                                  " has zero sample variance; the slice cannot be fitted");
        }
    }
    return data;
}

Emulator::Emulator(EmulatorMode mode, CovariateModel covariates, int horizon)
    : mode_(mode), covariates_(std::move(covariates)), horizon_(horizon), models_(group_count()) {}

std::size_t Emulator::group_count() const noexcept {
    return mode_ == EmulatorMode::per_segment ? 3 : kSliceCount;
}

std::size_t Emulator::group_of(Segment s, bool paid_prev) const noexcept {
    return mode_ == EmulatorMode::per_segment ? static_cast<std::size_t>(segment_number(s) - 1)
                                              : slice_of(s, paid_prev);
}

std::size_t Emulator::feature_count() const noexcept {
    return mode_ == EmulatorMode::per_segment ? 3 : 2;
}

std::vector<double> Emulator::features(double balance, double credit, Segment s, bool paid_prev) const {
    std::vector<double> f{balance_cdf(balance, covariates_), credit_cdf(credit, covariates_)};
    if (mode_ == EmulatorMode::per_segment) {
        const double p1 = payment_probability(credit, s, paid_prev);
        f.push_back(std::sqrt(p1 * (1.0 - p1)));
    }
    return f;
}

void Emulator::set_model(std::size_t group, GpModel model) {
    if (model.dim() != feature_count()) {
        throw ValidationError("emulator: model dimension does not match the emulator mode");
    }
    models_.at(group) = std::move(model);
}

VariancePrediction Emulator::predict(const Account &account) const {
    const auto g = group_of(account.segment, account.paid_last_month);
    const auto &m = models_.at(g);
    if (!m) {
        throw PreconditionError("emulator has no fitted model for segment " +
                                std::to_string(segment_number(account.segment)));
    }
    const auto x = features(account.balance, account.credit_score, account.segment, account.paid_last_month);
    const auto p = m->predict(x.data());
    VariancePrediction out;
    out.log_mean = p.mean;
    out.log_variance = p.variance;
    out.variance = point_ == PointPrediction::median ? std::exp(p.mean) : std::exp(p.mean + 0.5 * p.variance);
    return out;
}

Emulator train_emulator(const TrainingData &data, const EmulatorTrainOptions &options,
                        const CovariateModel &covariates, int horizon) {
    Emulator em(options.mode, covariates, horizon);
    const std::size_t groups = em.group_count();
    const std::size_t dim = em.feature_count();
    std::vector<std::vector<double>> x(groups);
    std::vector<std::vector<double>> y(groups);
    std::vector<std::vector<double>> noise(groups);
    for (const auto &obs : data.observations) {
        const auto g = em.group_of(obs.point.segment, obs.point.paid_prev);
        const auto f = em.features(obs.balance, obs.credit_score, obs.point.segment, obs.point.paid_prev);
        // Fit on the design coordinates themselves; they equal the CDF
        // transforms up to the root-finding tolerance.
        x[g].push_back(obs.point.b_tilde);
        x[g].push_back(obs.point.c_tilde);
        if (dim == 3) {
            x[g].push_back(f[2]);
        }
        y[g].push_back(obs.log_variance);
        noise[g].push_back(obs.noise_variance);
    }
    std::vector<std::optional<GpModel>> fitted(groups);
    parallel_for(groups, options.threads, [&](std::size_t g) {
        if (!y[g].empty()) {
            fitted[g] = fit_gp(dim, x[g], y[g], noise[g], options.fit);
        }
    });
    for (std::size_t g = 0; g < groups; ++g) {
        if (fitted[g]) {
            em.set_model(g, std::move(*fitted[g]));
        }
    }
    return em;
}

namespace {

double correlation(const std::vector<double> &a, const std::vector<double> &b) {
    const auto n = static_cast<double>(a.size());
    if (a.size() < 2) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

struct Accumulator {
    std::vector<double> predicted_sd;
    std::vector<double> sample_sd;
    double sq = 0.0;
    std::size_t covered = 0;

    EmulatorMetrics::Group finish() const {
        EmulatorMetrics::Group g;
        g.n = sample_sd.size();
        if (g.n > 0) {
            g.log_rmse = std::sqrt(sq / static_cast<double>(g.n));
            g.coverage = static_cast<double>(covered) / static_cast<double>(g.n);
            g.correlation = correlation(predicted_sd, sample_sd);
        }
        return g;
    }
};

} // namespace

EmulatorMetrics evaluate_emulator(const Emulator &emulator, const TrainingData &test) {
    const double z = normal_quantile(0.975);
    std::vector<Accumulator> acc(emulator.group_count());
    Accumulator pooled;
    for (const auto &obs : test.observations) {
        Account a;
        a.balance = obs.balance;
        a.credit_score = obs.credit_score;
        a.segment = obs.point.segment;
        a.paid_last_month = obs.point.paid_prev;
        const auto pred = emulator.predict(a);
        const double err = obs.log_variance - pred.log_mean;
        const bool inside = std::abs(err) <= z * std::sqrt(pred.log_variance + obs.noise_variance);
        for (auto *target : {&acc[emulator.group_of(a.segment, a.paid_last_month)], &pooled}) {
            target->predicted_sd.push_back(std::sqrt(pred.variance));
            target->sample_sd.push_back(std::sqrt(obs.variance));
            target->sq += err * err;
            target->covered += inside ? 1 : 0;
        }
    }
    EmulatorMetrics m;
    for (const auto &a : acc) {
        m.groups.push_back(a.finish());
    }
    m.pooled = pooled.finish();
    for (auto d : test.dropped) {
        m.dropped += d;
    }
    return m;
}

EmulatorMetrics validate_emulator(const Emulator &emulator, const SlicedDesign &test,
                                  std::uint32_t realisations, std::uint64_t seed, int threads) {
    TrainingOptions opt;
    opt.realisations = realisations;
    opt.horizon = emulator.horizon();
    opt.stream = Stream::validation;
    opt.threads = threads;
    opt.covariates = emulator.covariates();
    return evaluate_emulator(emulator, generate_training_data(test, seed, opt));
}

} // namespace nplmc
