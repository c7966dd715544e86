#include "fedchan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>
#include <thread>

#include "fedchan/errors.hpp"

namespace fedchan::synth {

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

double wrap_azimuth(double deg) {
    double w = std::fmod(deg + 180.0, 360.0);
    if (w < 0) w += 360.0;
    return w - 180.0;
}

double clamp_elevation(double deg) { return std::clamp(deg, -90.0, 90.0); }

}  // namespace

const char* to_string(LinkState s) {
    switch (s) {
        case LinkState::no_link: return "nolink";
        case LinkState::los: return "los";
        case LinkState::nlos: return "nlos";
    }
    return "?";
}

const char* to_string(GnbType g) { return g == GnbType::aerial ? "aerial" : "terrestrial"; }

double LinkCondition::distance_2d() const { return std::hypot(dx, dy); }

double LinkCondition::distance_3d() const { return std::sqrt(dx * dx + dy * dy + dz * dz); }

std::array<double, kConditionDim> LinkCondition::to_vector() const {
    return {dx, dy, dz, gnb == GnbType::terrestrial ? 1.0 : 0.0, gnb == GnbType::aerial ? 1.0 : 0.0};
}

PathVector sentinel_paths() {
    PathVector p{};
    for (std::size_t k = 0; k < kPathCount; ++k) path_param(p, k, kLoss) = kMaxPathLoss;
    return p;
}

double strongest_path_loss(const PathVector& p) {
    double best = path_param(p, 0, kLoss);
    for (std::size_t k = 1; k < kPathCount; ++k) best = std::min(best, path_param(p, k, kLoss));
    return best;
}

void CityProfile::validate() const {
    if (!(slope1 > 0.0) || !(slope2 > slope1))
        throw ArgumentError("profile " + city_id + ": requires slope2 > slope1 > 0");
    if (!(shadow_sigma >= 0.0)) throw ArgumentError("profile " + city_id + ": shadow_sigma must be >= 0");
    if (!(d_break > 0.0) || !(nolink_range > 0.0) || !(los_decay >= 0.0) || !(area_radius > 0.0))
        throw ArgumentError("profile " + city_id + ": distances must be positive");
}

std::vector<CityProfile> default_profiles() {
    CityProfile alpha;
    alpha.city_id = "alpha";
    alpha.pl0 = 63.4;
    alpha.slope1 = 2.0;
    alpha.slope2 = 2.6;
    alpha.d_break = 250.0;
    alpha.shadow_sigma = 6.0;
    alpha.los_decay = 0.0022;
    alpha.nolink_range = 800.0;
    alpha.nlos_offset = 18.0;
    alpha.area_radius = 900.0;
    alpha.seed = 101;

    CityProfile bravo;
    bravo.city_id = "bravo";
    bravo.pl0 = 61.4;
    bravo.slope1 = 2.1;
    bravo.slope2 = 2.4;
    bravo.d_break = 300.0;
    bravo.shadow_sigma = 5.0;
    bravo.los_decay = 0.0018;
    bravo.nolink_range = 900.0;
    bravo.nlos_offset = 15.0;
    bravo.area_radius = 1000.0;
    bravo.seed = 202;

    CityProfile charlie;
    charlie.city_id = "charlie";
    charlie.pl0 = 62.4;
    charlie.slope1 = 1.9;
    charlie.slope2 = 2.8;
    charlie.d_break = 220.0;
    charlie.shadow_sigma = 7.0;
    charlie.los_decay = 0.0025;
    charlie.nolink_range = 750.0;
    charlie.nlos_offset = 20.0;
    charlie.area_radius = 850.0;
    charlie.seed = 303;

    return {alpha, bravo, charlie};
}

double StateProbabilities::operator[](LinkState s) const {
    switch (s) {
        case LinkState::no_link: return no_link;
        case LinkState::los: return los;
        case LinkState::nlos: return nlos;
    }
    return 0.0;
}

StateProbabilities state_probabilities(const CityProfile& profile, const LinkCondition& condition) {
    const double d2 = condition.distance_2d();
    const double half = 0.5 * profile.nolink_range;
    double p_nolink = 0.0;
    if (d2 > half) {
        const double u = (d2 - half) / half;
        p_nolink = 1.0 - std::exp(-u * u);
    }
    const double uav_height =
        condition.dz + (condition.gnb == GnbType::aerial ? kAerialGnbHeight : kTerrestrialGnbHeight);
    const double height_factor = 1.0 + std::clamp(120.0 - uav_height, 0.0, 120.0) / 120.0;
    const double gnb_factor = condition.gnb == GnbType::aerial ? 0.6 : 1.0;
    const double p_los_given_link = std::exp(-d2 * profile.los_decay * height_factor * gnb_factor);

    StateProbabilities p;
    p.no_link = p_nolink;
    p.los = (1.0 - p_nolink) * p_los_given_link;
    p.nlos = (1.0 - p_nolink) * (1.0 - p_los_given_link);
    return p;
}

LinkState sample_link_state(const CityProfile& profile, const LinkCondition& condition, Rng& rng) {
    const auto p = state_probabilities(profile, condition);
    if (profile.hard_states) {
        if (p.no_link >= p.los && p.no_link >= p.nlos) return LinkState::no_link;
        return p.los >= p.nlos ? LinkState::los : LinkState::nlos;
    }
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (u < p.no_link) return LinkState::no_link;
    if (u < p.no_link + p.los) return LinkState::los;
    return LinkState::nlos;
}

double mean_strongest_loss(const CityProfile& profile, double distance, LinkState state) {
    const double d = std::max(distance, 1.0);
    double pl = profile.pl0 + 10.0 * profile.slope1 * std::log10(d);
    if (d > profile.d_break) pl += 10.0 * profile.slope2 * std::log10(d / profile.d_break);
    if (state == LinkState::nlos) pl += profile.nlos_offset;
    return pl;
}

PathVector sample_paths(const CityProfile& profile, const LinkCondition& condition, LinkState state, Rng& rng) {
    if (state == LinkState::no_link) throw ArgumentError("sample_paths: NoLink records carry no paths");

    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto exponential = [&](double mean) { return -mean * std::log1p(-unit(rng)); };

    const bool los = state == LinkState::los;
    const double d = std::max(condition.distance_3d(), 1.0);
    const double d2 = condition.distance_2d();

    PathVector p = sentinel_paths();

    const std::size_t min_paths = los ? 6 : 3;
    const std::size_t n_phys =
        min_paths + static_cast<std::size_t>(unit(rng) * static_cast<double>(kPathCount - min_paths + 1));
    const std::size_t n = std::min(n_phys, kPathCount);

    double loss = mean_strongest_loss(profile, d, state) + profile.shadow_sigma * normal(rng);
    double delay = d / kSpeedOfLight + (los ? 0.0 : exponential(15.0));

    const double aoa_az = std::atan2(condition.dy, condition.dx) * kDeg;
    const double aoa_el = std::atan2(condition.dz, d2) * kDeg;
    const double aod_az = wrap_azimuth(aoa_az + 180.0);
    const double aod_el = -aoa_el;

    for (std::size_t k = 0; k < n; ++k) {
        if (k > 0) {
            loss += exponential(2.5) + (k == 1 && los ? 5.0 : 0.0);
            delay += exponential(25.0);
        }
        if (loss >= kMaxPathLoss) break;  // remaining slots keep the sentinel
        path_param(p, k, kLoss) = loss;
        path_param(p, k, kDelay) = delay;
        if (k == 0) {
            const double az_jitter = los ? 0.0 : 15.0 * normal(rng);
            const double el_jitter = los ? 0.0 : 5.0 * normal(rng);
            path_param(p, k, kAoaAz) = wrap_azimuth(aoa_az + az_jitter);
            path_param(p, k, kAoaEl) = clamp_elevation(aoa_el + el_jitter);
            path_param(p, k, kAodAz) = wrap_azimuth(aod_az - az_jitter);
            path_param(p, k, kAodEl) = clamp_elevation(aod_el - el_jitter);
        } else {
            path_param(p, k, kAoaAz) = wrap_azimuth(360.0 * unit(rng) - 180.0);
            path_param(p, k, kAoaEl) = clamp_elevation(aoa_el + 20.0 * normal(rng));
            path_param(p, k, kAodAz) = wrap_azimuth(360.0 * unit(rng) - 180.0);
            path_param(p, k, kAodEl) = clamp_elevation(aod_el + 20.0 * normal(rng));
        }
    }
    // Shadowing can push even the first path past the ceiling.
    for (std::size_t k = 0; k < kPathCount; ++k)
        path_param(p, k, kLoss) = std::min(path_param(p, k, kLoss), kMaxPathLoss);
    return p;
}

namespace {

LinkRecord generate_record(const CityProfile& profile, std::size_t index, std::span<const double> heights) {
    Rng rng = make_rng(profile.seed, {index});
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    LinkRecord r;
    r.condition.gnb = unit(rng) < 0.5 ? GnbType::terrestrial : GnbType::aerial;
    const auto h_index = std::min(static_cast<std::size_t>(unit(rng) * static_cast<double>(heights.size())),
                                  heights.size() - 1);
    const double height = heights[h_index];
    const double radius = profile.area_radius * std::sqrt(unit(rng));
    const double theta = 2.0 * std::numbers::pi * unit(rng);
    r.condition.dx = radius * std::cos(theta);
    r.condition.dy = radius * std::sin(theta);
    r.condition.dz =
        height - (r.condition.gnb == GnbType::aerial ? kAerialGnbHeight : kTerrestrialGnbHeight);
    if (r.condition.distance_3d() == 0.0) r.condition.dx = 1.0;
    r.state = sample_link_state(profile, r.condition, rng);
    if (r.state != LinkState::no_link) r.paths = sample_paths(profile, r.condition, r.state, rng);
    return r;
}

}  // namespace

CityDataset generate_city(const CityProfile& profile, std::size_t n_links, std::span<const double> heights,
                          unsigned workers) {
    profile.validate();
    if (heights.empty()) throw ArgumentError("generate_city: empty height set");
    if (n_links == 0) throw ArgumentError("generate_city: n_links must be positive");

    CityDataset ds;
    ds.profile = profile;
    ds.records.resize(n_links);
    ds.n_train = n_links;
    ds.n_test = 0;

    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n_links)));
    const std::size_t chunk = (n_links + workers - 1) / workers;
    auto run = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) ds.records[i] = generate_record(profile, i, heights);
    };
    if (workers == 1) {
        run(0, n_links);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(n_links, begin + chunk);
            if (begin < end) pool.emplace_back(run, begin, end);
        }
    }
    return ds;
}

CityDataset split_train_test(const CityDataset& dataset, double test_fraction, Rng& rng) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ArgumentError("split_train_test: test fraction must lie in (0, 1)");
    const std::size_t n = dataset.records.size();

    std::array<std::vector<std::size_t>, kLinkStateCount> by_state;
    for (std::size_t i = 0; i < n; ++i) by_state[static_cast<std::size_t>(dataset.records[i].state)].push_back(i);

    // Largest-remainder allocation of the test quota across states.
    const auto total_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    std::array<std::size_t, kLinkStateCount> quota{};
    std::array<double, kLinkStateCount> remainder{};
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < kLinkStateCount; ++s) {
        const double exact = static_cast<double>(by_state[s].size()) * test_fraction;
        quota[s] = static_cast<std::size_t>(std::floor(exact));
        remainder[s] = exact - std::floor(exact);
        assigned += quota[s];
    }
    std::array<std::size_t, kLinkStateCount> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return remainder[a] > remainder[b]; });
    for (std::size_t j = 0; assigned < total_test && j < kLinkStateCount; ++j) {
        const auto s = order[j];
        if (quota[s] < by_state[s].size()) {
            ++quota[s];
            ++assigned;
        }
    }

    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t s = 0; s < kLinkStateCount; ++s) {
        auto& idx = by_state[s];
        std::shuffle(idx.begin(), idx.end(), rng);
        test_idx.insert(test_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(quota[s]));
        train_idx.insert(train_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(quota[s]), idx.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());

    CityDataset out;
    out.profile = dataset.profile;
    out.records.reserve(n);
    for (auto i : train_idx) out.records.push_back(dataset.records[i]);
    for (auto i : test_idx) out.records.push_back(dataset.records[i]);
    out.n_train = train_idx.size();
    out.n_test = test_idx.size();
    return out;
}

std::vector<LinkRecord> with_paths(std::span<const LinkRecord> records) {
    std::vector<LinkRecord> out;
    std::copy_if(records.begin(), records.end(), std::back_inserter(out),
                 [](const LinkRecord& r) { return r.state != LinkState::no_link; });
    return out;
}

Eigen::VectorXd features(const LinkRecord& record) {
    Eigen::VectorXd f(static_cast<Eigen::Index>(kFeatureDim));
    const auto c = record.condition.to_vector();
    for (std::size_t i = 0; i < kConditionDim; ++i) f(static_cast<Eigen::Index>(i)) = c[i];
    for (std::size_t i = 0; i < kPathDim; ++i) f(static_cast<Eigen::Index>(kConditionDim + i)) = record.paths[i];
    return f;
}

FeatureScaler::FeatureScaler(std::vector<double> min, std::vector<double> max)
    : min_(std::move(min)), max_(std::move(max)) {
    if (min_.size() != max_.size()) throw StructuralError("scaler min/max length mismatch");
    for (std::size_t i = 0; i < min_.size(); ++i)
        if (!(max_[i] >= min_[i])) throw ArgumentError("scaler dim " + std::to_string(i) + ": max < min");
}

FeatureScaler FeatureScaler::fit(std::span<const LinkRecord> records) {
    if (records.empty()) throw ArgumentError("fit_scaler: no records");
    std::vector<double> lo(kFeatureDim, std::numeric_limits<double>::infinity());
    std::vector<double> hi(kFeatureDim, -std::numeric_limits<double>::infinity());
    for (const auto& r : records) {
        const auto f = features(r);
        for (std::size_t i = 0; i < kFeatureDim; ++i) {
            lo[i] = std::min(lo[i], f(static_cast<Eigen::Index>(i)));
            hi[i] = std::max(hi[i], f(static_cast<Eigen::Index>(i)));
        }
    }
    return FeatureScaler(std::move(lo), std::move(hi));
}

FeatureScaler FeatureScaler::merge(std::span<const FeatureScaler> scalers) {
    if (scalers.empty()) throw ArgumentError("merge: no scalers");
    std::vector<double> lo = scalers.front().min_, hi = scalers.front().max_;
    for (const auto& s : scalers.subspan(1)) {
        if (s.dim() != lo.size()) throw StructuralError("merge: scaler dimension mismatch");
        for (std::size_t i = 0; i < lo.size(); ++i) {
            lo[i] = std::min(lo[i], s.min_[i]);
            hi[i] = std::max(hi[i], s.max_[i]);
        }
    }
    return FeatureScaler(std::move(lo), std::move(hi));
}

double FeatureScaler::apply(std::size_t i, double value) const {
    const double range = max_[i] - min_[i];
    if (range == 0.0) return 0.0;
    return 2.0 * (value - min_[i]) / range - 1.0;
}

double FeatureScaler::invert(std::size_t i, double scaled) const {
    const double range = max_[i] - min_[i];
    if (range == 0.0) return min_[i];
    return min_[i] + 0.5 * (scaled + 1.0) * range;
}

Eigen::VectorXd FeatureScaler::apply(const Eigen::VectorXd& raw) const {
    if (static_cast<std::size_t>(raw.size()) != dim()) throw StructuralError("scaler: feature length mismatch");
    Eigen::VectorXd out(raw.size());
    for (Eigen::Index i = 0; i < raw.size(); ++i) out(i) = apply(static_cast<std::size_t>(i), raw(i));
    return out;
}

Eigen::VectorXd FeatureScaler::invert(const Eigen::VectorXd& scaled) const {
    if (static_cast<std::size_t>(scaled.size()) != dim()) throw StructuralError("scaler: feature length mismatch");
    Eigen::VectorXd out(scaled.size());
    for (Eigen::Index i = 0; i < scaled.size(); ++i) out(i) = invert(static_cast<std::size_t>(i), scaled(i));
    return out;
}

Eigen::VectorXd FeatureScaler::scaled_condition(const LinkCondition& c) const {
    const auto v = c.to_vector();
    Eigen::VectorXd out(static_cast<Eigen::Index>(kConditionDim));
    for (std::size_t i = 0; i < kConditionDim; ++i) out(static_cast<Eigen::Index>(i)) = apply(i, v[i]);
    return out;
}

Eigen::VectorXd FeatureScaler::scaled_paths(const PathVector& p) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(kPathDim));
    for (std::size_t i = 0; i < kPathDim; ++i) out(static_cast<Eigen::Index>(i)) = apply(kConditionDim + i, p[i]);
    return out;
}

PathVector FeatureScaler::unscale_paths(const Eigen::VectorXd& scaled) const {
    if (static_cast<std::size_t>(scaled.size()) != kPathDim) throw StructuralError("unscale_paths: expected 120 values");
    PathVector p{};
    for (std::size_t i = 0; i < kPathDim; ++i) p[i] = invert(kConditionDim + i, scaled(static_cast<Eigen::Index>(i)));
    for (std::size_t k = 0; k < kPathCount; ++k) {
        path_param(p, k, kLoss) = std::min(path_param(p, k, kLoss), kMaxPathLoss);
        path_param(p, k, kDelay) = std::max(path_param(p, k, kDelay), 0.0);
        path_param(p, k, kAoaAz) = wrap_azimuth(path_param(p, k, kAoaAz));
        path_param(p, k, kAodAz) = wrap_azimuth(path_param(p, k, kAodAz));
        path_param(p, k, kAoaEl) = clamp_elevation(path_param(p, k, kAoaEl));
        path_param(p, k, kAodEl) = clamp_elevation(path_param(p, k, kAodEl));
    }
    return p;
}

std::string FeatureScaler::to_text() const {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "fedchan-scaler " << dim() << "\n";
    for (std::size_t i = 0; i < dim(); ++i) out << min_[i] << " " << max_[i] << "\n";
    return out.str();
}

FeatureScaler FeatureScaler::from_text(const std::string& text) {
    std::istringstream in(text);
    std::string tag;
    std::size_t n = 0;
    if (!(in >> tag >> n) || tag != "fedchan-scaler") throw ParseError("scaler: bad header");
    std::vector<double> lo(n), hi(n);
    for (std::size_t i = 0; i < n; ++i)
        if (!(in >> lo[i] >> hi[i])) throw ParseError("scaler: truncated at dimension " + std::to_string(i));
    return FeatureScaler(std::move(lo), std::move(hi));
}

}  // namespace fedchan::synth
