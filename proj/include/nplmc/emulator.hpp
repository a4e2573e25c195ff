#pragma once

#include "nplmc/gp.hpp"
#include "nplmc/philox.hpp"
#include "nplmc/population.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nplmc {

inline constexpr std::size_t kSliceCount = 6;

/// Slice index of (segment, prior payment): (1,0), (1,1), (2,0), ..., (3,1).
inline constexpr std::size_t slice_of(Segment s, bool paid_prev) noexcept {
    return static_cast<std::size_t>(segment_number(s) - 1) * 2 + (paid_prev ? 1 : 0);
}

struct DesignPoint {
    double b_tilde = 0.0; ///< balance on the CDF scale
    double c_tilde = 0.0; ///< credit score on the CDF scale
    Segment segment = Segment::one;
    bool paid_prev = false;
};

/// Sliced Latin hypercube on [0,1]^2: every slice is an n-level LHD and the
/// union of the six slices is a 6n-level LHD.
struct SlicedDesign {
    std::size_t points_per_slice = 0;
    std::vector<DesignPoint> points; ///< slice-major, slice_of order
};

struct DesignOptions {
    int exchange_iterations = 2000; ///< per slice
};

/// Random sliced LHD improved within each slice by maximin coordinate
/// exchanges. A swap is kept only if the minimum distance does not shrink.
SlicedDesign sliced_lhd(std::size_t points_per_slice, std::uint64_t seed,
                        const DesignOptions &options = {});

/// Smallest pairwise distance among the points of one slice.
double slice_min_distance(const SlicedDesign &design, std::size_t slice);

struct TrainingObservation {
    DesignPoint point;
    double balance = 0.0;
    double credit_score = 0.0;
    double variance = 0.0;     ///< sample variance of K realised totals
    double log_variance = 0.0;
    double kurtosis = 0.0;
    double noise_variance = 0.0; ///< max(0, (kurtosis - 1) / K)
    std::uint32_t realisations = 0;
};

struct TrainingData {
    std::vector<TrainingObservation> observations;
    std::array<std::size_t, kSliceCount> dropped{}; ///< zero-variance points per slice
    std::uint32_t realisations = 0;
};

struct TrainingOptions {
    std::uint32_t realisations = 1000; ///< K
    int horizon = 84;
    Stream stream = Stream::training;
    int threads = 1;
    CovariateModel covariates{};
};

/// Simulates every design point K times as an account with a fixed segment.
/// Points with zero sample variance are dropped; throws DegenerateError if
/// that empties a slice.
TrainingData generate_training_data(const SlicedDesign &design, std::uint64_t seed,
                                    const TrainingOptions &options = {});

enum class EmulatorMode {
    per_segment, ///< three GPs on (b~, c~, sqrt(p1 (1 - p1)))
    per_slice,   ///< six GPs on (b~, c~)
};

enum class PointPrediction {
    median, ///< exp(m)
    mean,   ///< exp(m + s^2 / 2)
};

struct VariancePrediction {
    double variance = 0.0; ///< predicted sigma^2
    double log_mean = 0.0;
    double log_variance = 0.0; ///< posterior variance of log sigma^2
};

class Emulator {
  public:
    static constexpr int kFormatVersion = 1;

    Emulator() = default;
    Emulator(EmulatorMode mode, CovariateModel covariates, int horizon);

    [[nodiscard]] EmulatorMode mode() const noexcept { return mode_; }
    [[nodiscard]] PointPrediction point() const noexcept { return point_; }
    void set_point(PointPrediction p) noexcept { point_ = p; }
    [[nodiscard]] const CovariateModel &covariates() const noexcept { return covariates_; }
    [[nodiscard]] int horizon() const noexcept { return horizon_; }

    [[nodiscard]] std::size_t group_count() const noexcept;
    [[nodiscard]] std::size_t group_of(Segment s, bool paid_prev) const noexcept;
    [[nodiscard]] std::size_t feature_count() const noexcept;
    /// Emulator inputs for an account with the given covariates.
    [[nodiscard]] std::vector<double> features(double balance, double credit, Segment s,
                                               bool paid_prev) const;

    [[nodiscard]] const std::optional<GpModel> &model(std::size_t group) const { return models_.at(group); }
    void set_model(std::size_t group, GpModel model);

    /// Throws PreconditionError if the account's group has no fitted model.
    [[nodiscard]] VariancePrediction predict(const Account &account) const;

  private:
    EmulatorMode mode_ = EmulatorMode::per_segment;
    PointPrediction point_ = PointPrediction::median;
    CovariateModel covariates_{};
    int horizon_ = 84;
    std::vector<std::optional<GpModel>> models_;
};

struct EmulatorTrainOptions {
    EmulatorMode mode = EmulatorMode::per_segment;
    GpFitOptions fit{};
    int threads = 1;
};

Emulator train_emulator(const TrainingData &data, const EmulatorTrainOptions &options,
                        const CovariateModel &covariates = default_covariates(), int horizon = 84);

struct EmulatorMetrics {
    struct Group {
        std::size_t n = 0;
        double log_rmse = 0.0;
        double correlation = 0.0; ///< predicted sd vs sample sd
        double coverage = 0.0;    ///< 95% log-scale interval, posterior plus noise variance
    };
    std::vector<Group> groups; ///< per emulator group (segment or slice)
    Group pooled;
    std::size_t dropped = 0;
};

/// Metrics of an emulator against a set of (held-out) observations.
EmulatorMetrics evaluate_emulator(const Emulator &emulator, const TrainingData &test);

/// Simulates `test` with K realisations per point from the validation stream
/// and evaluates the emulator on it.
EmulatorMetrics validate_emulator(const Emulator &emulator, const SlicedDesign &test,
                                  std::uint32_t realisations, std::uint64_t seed, int threads = 1);

/// Random (not Latin) test points, `per_slice` in every slice.
SlicedDesign random_design(std::size_t per_slice, std::uint64_t seed);

std::string emulator_to_json(const Emulator &emulator);
Emulator emulator_from_json(const std::string &text);

} // namespace nplmc
