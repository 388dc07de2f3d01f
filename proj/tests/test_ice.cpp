#include <doctest.h>

#include "iceseg/errors.hpp"
#include "iceseg/ice.hpp"
#include "iceseg/mcmc.hpp"

#include <nlohmann/json.hpp>

#include <random>

using namespace iceseg;

namespace {

PosteriorDraws fake_draws(std::size_t draws, std::vector<std::string> ids, std::vector<double> p) {
    PosteriorDraws d;
    d.draws = draws;
    d.units = ids.size();
    d.unit_ids = std::move(ids);
    d.p = std::move(p);
    return d;
}

IceSummary summary_of(std::vector<std::pair<std::string, double>> values) {
    IceSummary s;
    s.method = "test";
    for (auto &[id, v] : values) {
        CountyIce c;
        c.unit_id = id;
        c.ice = {v, v - 0.1, v + 0.1};
        c.p1 = 0.5 + v / 2;
        c.p2 = 0.5 - v / 2;
        s.counties.push_back(c);
    }
    return s;
}

} // namespace

TEST_CASE("raw ICE") {
    CHECK(raw_ice({"a", "", 100, 30, 30}) == 0.0);
    CHECK(raw_ice({"a", "", 80, 80, 0}) == 1.0);
    CHECK(raw_ice({"a", "", 17, 0, 17}) == -1.0);
    std::mt19937_64 rng(1);
    for (int t = 0; t < 2000; ++t) {
        const std::int64_t n = 1 + static_cast<std::int64_t>(rng() % 50);
        const std::int64_t y1 = static_cast<std::int64_t>(rng() % (n + 1));
        const std::int64_t y2 = static_cast<std::int64_t>(rng() % (n - y1 + 1));
        const double v = raw_ice({"a", "", n, y1, y2});
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("percentile follows linear interpolation exactly") {
    std::vector<double> x(1000);
    for (int i = 0; i < 1000; ++i) {
        x[i] = i + 1.0;
    }
    // h = 999 q; 999 * 0.025 = 24.975 -> 25 + 0.975; 999 * 0.975 = 974.025 -> 975 + 0.025
    CHECK(percentile_sorted(x, 0.025) == doctest::Approx(25.975).epsilon(1e-14));
    CHECK(percentile_sorted(x, 0.975) == doctest::Approx(975.025).epsilon(1e-14));
    CHECK(percentile_sorted(x, 0.0) == 1.0);
    CHECK(percentile_sorted(x, 1.0) == 1000.0);
    std::vector<double> shuffled = x;
    std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(2));
    CHECK(percentile(shuffled, 0.5) == 500.5);
}

TEST_CASE("bootstrap: degenerate county and exact point estimate") {
    const std::vector<CountyObservation> data{{"a", "", 40, 40, 0}, {"b", "", 100, 20, 35},
                                              {"c", "", 60, 10, 10}};
    const auto s = bootstrap_ice(data, 500, 9);
    CHECK(s.counties[0].ice.estimate == 1.0);
    CHECK(s.counties[0].ice.lower == 1.0);
    CHECK(s.counties[0].ice.upper == 1.0);
    const double mean_raw = (raw_ice(data[0]) + raw_ice(data[1]) + raw_ice(data[2])) / 3.0;
    CHECK(s.statewide.estimate == mean_raw);
    for (const auto &c : s.counties) {
        CHECK(c.ice.lower <= c.ice.estimate);
        CHECK(c.ice.estimate <= c.ice.upper);
    }
    CHECK_THROWS(bootstrap_ice(data, 0, 9));
}

TEST_CASE("bootstrap: exchangeable counties and thread independence") {
    const std::vector<CountyObservation> data{{"a", "", 200, 50, 70}, {"b", "", 200, 50, 70}};
    const auto s = bootstrap_ice(data, 4000, 3);
    CHECK(s.counties[0].ice.lower == doctest::Approx(s.counties[1].ice.lower).epsilon(0.05));
    CHECK(s.counties[0].ice.upper == doctest::Approx(s.counties[1].ice.upper).epsilon(0.05));
    const auto t = bootstrap_ice(data, 4000, 3, 4);
    CHECK(to_json(s) == to_json(t));
    // Trinomial resampling: the interval half-width tracks the analytic standard error.
    const double p1 = 0.25, p2 = 0.35;
    const double se = std::sqrt((p1 * (1 - p1) + p2 * (1 - p2) + 2 * p1 * p2) / 200.0);
    CHECK((s.counties[0].ice.upper - s.counties[0].ice.lower) / 2.0 ==
          doctest::Approx(1.96 * se).epsilon(0.08));
}

TEST_CASE("posterior ICE arithmetic") {
    const auto d1 = fake_draws(2, {"x"}, {0.6, 0.8});
    const auto d2 = fake_draws(2, {"x"}, {0.1, 0.1});
    const auto s = posterior_ice(d1, d2);
    CHECK(s.counties[0].ice.estimate == doctest::Approx(0.6));
    CHECK(s.counties[0].ice.lower == doctest::Approx(0.5 + 0.2 * 0.025));
    CHECK(s.statewide.estimate == doctest::Approx(0.6));

    const auto same = posterior_ice(d1, d1);
    CHECK(same.counties[0].ice.lower == 0.0);
    CHECK(same.counties[0].ice.upper == 0.0);

    CHECK_THROWS_AS(posterior_ice(d1, fake_draws(3, {"x"}, {0.1, 0.1, 0.1})), std::invalid_argument);
}

TEST_CASE("posterior ICE is invariant to a common shift") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.2, 0.7);
    std::vector<double> p1(300), p2(300);
    for (std::size_t k = 0; k < 300; ++k) {
        p1[k] = u(rng);
        p2[k] = u(rng);
    }
    const auto base = posterior_ice(fake_draws(100, {"a", "b", "c"}, p1),
                                    fake_draws(100, {"a", "b", "c"}, p2));
    for (auto &x : p1) {
        x += 0.125;
    }
    for (auto &x : p2) {
        x += 0.125;
    }
    const auto shifted = posterior_ice(fake_draws(100, {"a", "b", "c"}, p1),
                                       fake_draws(100, {"a", "b", "c"}, p2));
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(shifted.counties[i].ice.estimate == doctest::Approx(base.counties[i].ice.estimate).epsilon(1e-12));
        CHECK(shifted.counties[i].ice.lower == doctest::Approx(base.counties[i].ice.lower).epsilon(1e-12));
    }
}

TEST_CASE("sign change report") {
    const auto a = summary_of({{"1", -0.1}, {"2", 0.2}, {"3", 0.3}});
    CHECK(std::all_of(sign_change_report(a, a).begin(), sign_change_report(a, a).end(),
                      [](const SignChange &c) { return c.transition == SignTransition::unchanged; }));
    CHECK(sign_changes_csv(sign_change_report(a, a)) == "fips,name,transition,movement\n");

    const auto b = summary_of({{"1", 0.1}, {"2", -0.2}, {"3", 0.4}});
    const auto r = sign_change_report(a, b);
    CHECK(r[0].transition == SignTransition::negative_to_positive);
    CHECK(r[1].transition == SignTransition::positive_to_negative);
    CHECK(r[2].transition == SignTransition::unchanged);
    CHECK(r[0].movement == "p1_up_p2_down_p1_gt_p2");

    const auto c = summary_of({{"1", 0.1}, {"9", 0.1}, {"3", 0.1}});
    CHECK_THROWS_AS(sign_change_report(a, c), DataError);
}

TEST_CASE("summary JSON round trip and missing fields") {
    auto s = summary_of({{"13001", -0.05}, {"13003", 0.25}});
    s.counties[0].name = "Appling";
    s.statewide = {0.1, -0.2, 0.3};
    const auto j = to_json(s);
    const auto back = ice_summary_from_json(j, "x.json");
    CHECK(to_json(back) == j);

    auto broken = j;
    broken["counties"][1].erase("lower");
    try {
        ice_summary_from_json(broken, "x.json");
        FAIL("expected DataError");
    } catch (const DataError &e) {
        CHECK(std::string(e.what()).find("lower") != std::string::npos);
    }
    CHECK(ice_counties_csv(s).rfind("fips,estimate,lower,upper,sign\n13001,", 0) == 0);
}
