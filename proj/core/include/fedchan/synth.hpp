#pragma once

// Parametric synthetic surrogate for ray-traced UAV air-to-ground link data.
// Each city is described by a CityProfile whose link-state probabilities and
// dual-slope path-loss law are known in closed form.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedchan/rng.hpp"

namespace fedchan::synth {

inline constexpr std::size_t kPathCount = 20;
inline constexpr std::size_t kParamsPerPath = 6;
inline constexpr std::size_t kPathDim = kPathCount * kParamsPerPath;  // 120
inline constexpr std::size_t kConditionDim = 5;
inline constexpr std::size_t kFeatureDim = kConditionDim + kPathDim;  // 125
inline constexpr double kMaxPathLoss = 200.0;                        // dB, also the padding sentinel
inline constexpr double kSpeedOfLight = 0.299792458;                  // m/ns
inline constexpr double kTerrestrialGnbHeight = 10.0;                 // m
inline constexpr double kAerialGnbHeight = 30.0;                      // m

/// Per-path parameter order inside a PathVector.
enum PathParam : std::size_t { kLoss = 0, kDelay = 1, kAoaAz = 2, kAoaEl = 3, kAodAz = 4, kAodEl = 5 };

enum class LinkState : std::uint8_t { no_link = 0, los = 1, nlos = 2 };
inline constexpr std::size_t kLinkStateCount = 3;

const char* to_string(LinkState s);

enum class GnbType : std::uint8_t { terrestrial = 0, aerial = 1 };

const char* to_string(GnbType g);

/// UAV position relative to the gNB plus the gNB type.
struct LinkCondition {
    double dx = 0.0;
    double dy = 0.0;
    double dz = 0.0;
    GnbType gnb = GnbType::terrestrial;

    double distance_2d() const;
    double distance_3d() const;
    /// (dx, dy, dz, terrestrial flag, aerial flag)
    std::array<double, kConditionDim> to_vector() const;

    friend bool operator==(const LinkCondition&, const LinkCondition&) = default;
};

/// 20 paths x (loss dB, delay ns, AoA az/el deg, AoD az/el deg).
using PathVector = std::array<double, kPathDim>;

inline double& path_param(PathVector& p, std::size_t path, PathParam k) { return p[path * kParamsPerPath + k]; }
inline double path_param(const PathVector& p, std::size_t path, PathParam k) { return p[path * kParamsPerPath + k]; }

/// Every slot at the 200 dB sentinel with zero delay and angles.
PathVector sentinel_paths();

/// Minimum path loss over the 20 paths.
double strongest_path_loss(const PathVector& p);

struct LinkRecord {
    LinkCondition condition;
    LinkState state = LinkState::no_link;
    PathVector paths = sentinel_paths();

    friend bool operator==(const LinkRecord&, const LinkRecord&) = default;
};

struct CityProfile {
    std::string city_id;
    double pl0 = 61.4;          // dB intercept at 1 m
    double slope1 = 2.0;        // exponent below d_break
    double slope2 = 2.5;        // additional exponent above d_break
    double d_break = 300.0;     // m
    double shadow_sigma = 6.0;  // dB
    double los_decay = 0.004;   // 1/m
    double nolink_range = 800.0;  // m
    double nlos_offset = 18.0;    // dB added to the NLOS strongest path
    double area_radius = 1300.0;  // m, UAV horizontal placement disk
    bool hard_states = false;     // state = argmax of the state probabilities
    double frequency_ghz = 28.0;
    std::uint64_t seed = 1;

    /// Throws ArgumentError when slope2 > slope1 > 0 or shadow_sigma >= 0 fails.
    void validate() const;
};

/// Three heterogeneous stand-ins for the dense-urban cities of the source data.
std::vector<CityProfile> default_profiles();

struct StateProbabilities {
    double no_link = 0.0;
    double los = 0.0;
    double nlos = 0.0;

    double operator[](LinkState s) const;
};

/// P(no link) is 0 inside nolink_range/2 and 1 - exp(-((d - R/2)/(R/2))^2)
/// beyond; given a link, P(LOS) = exp(-d * los_decay * f(h) * g(gnb)) where f
/// shrinks with UAV height and g favours up-tilted aerial gNBs.
StateProbabilities state_probabilities(const CityProfile& profile, const LinkCondition& condition);

LinkState sample_link_state(const CityProfile& profile, const LinkCondition& condition, Rng& rng);

/// Mean strongest-path loss at 3-D distance d before shadowing and clamping.
double mean_strongest_loss(const CityProfile& profile, double distance, LinkState state);

/// Throws ArgumentError for LinkState::no_link.
PathVector sample_paths(const CityProfile& profile, const LinkCondition& condition, LinkState state, Rng& rng);

/// Records [0, n_train) are the training split, the rest the test split.
struct CityDataset {
    CityProfile profile;
    std::vector<LinkRecord> records;
    std::size_t n_train = 0;
    std::size_t n_test = 0;

    std::span<const LinkRecord> train() const { return {records.data(), n_train}; }
    std::span<const LinkRecord> test() const { return {records.data() + n_train, n_test}; }
};

inline constexpr std::array<double, 4> kDefaultHeights = {30.0, 60.0, 90.0, 120.0};

/// Pure function of (profile, n_links, heights): record i draws from its own
/// stream derived from (profile.seed, i), so `workers` never changes output.
CityDataset generate_city(const CityProfile& profile, std::size_t n_links,
                          std::span<const double> heights = kDefaultHeights, unsigned workers = 1);

/// Stratified by link state with largest-remainder quotas.
CityDataset split_train_test(const CityDataset& dataset, double test_fraction, Rng& rng);

/// Records whose state is not NoLink; the path models only see these.
std::vector<LinkRecord> with_paths(std::span<const LinkRecord> records);

/// condition (5) followed by paths (120).
Eigen::VectorXd features(const LinkRecord& record);

/// Per-dimension min/max scaling of the 125 features to [-1, 1].
class FeatureScaler {
public:
    FeatureScaler() = default;
    FeatureScaler(std::vector<double> min, std::vector<double> max);

    static FeatureScaler fit(std::span<const LinkRecord> records);
    /// Bounds covering every input scaler (element-wise min of mins, max of maxes).
    static FeatureScaler merge(std::span<const FeatureScaler> scalers);

    std::size_t dim() const { return min_.size(); }
    const std::vector<double>& min() const { return min_; }
    const std::vector<double>& max() const { return max_; }

    double apply(std::size_t i, double value) const;
    double invert(std::size_t i, double scaled) const;

    Eigen::VectorXd apply(const Eigen::VectorXd& raw) const;
    Eigen::VectorXd invert(const Eigen::VectorXd& scaled) const;

    Eigen::VectorXd scaled_condition(const LinkCondition& c) const;
    Eigen::VectorXd scaled_paths(const PathVector& p) const;
    /// Inverts a scaled 120-vector and clamps path losses to <= 200 dB.
    PathVector unscale_paths(const Eigen::VectorXd& scaled) const;

    std::string to_text() const;
    static FeatureScaler from_text(const std::string& text);

    friend bool operator==(const FeatureScaler&, const FeatureScaler&) = default;

private:
    std::vector<double> min_;
    std::vector<double> max_;
};

}  // namespace fedchan::synth
