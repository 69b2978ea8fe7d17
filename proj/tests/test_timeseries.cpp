#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <map>
#include <string>

#include "nbeats/error.hpp"
#include "nbeats/synthetic.hpp"
#include "nbeats/timeseries.hpp"

using namespace nbeats;

namespace {

std::string csv_for(const std::string& id, YearMonth start, std::size_t n, double base = 100.0) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        out += id + "," + start.plus(static_cast<std::int64_t>(i)).to_string() + "," +
               std::to_string(base + static_cast<double>(i)) + "\n";
    }
    return out;
}

const std::string kHeader = "series_id,month,demand_mwh\n";

TimeSeries ramp(std::size_t n, std::string id = "A") {
    TimeSeries ts{std::move(id), {2000, 1}, {}};
    for (std::size_t i = 0; i < n; ++i) ts.values.push_back(static_cast<double>(i + 1));
    return ts;
}

}  // namespace

TEST_CASE("YearMonth parses strictly and does month arithmetic", "[timeseries]") {
    const auto m = YearMonth::parse("2014-12");
    CHECK(m.year == 2014);
    CHECK(m.month == 12);
    CHECK(m.plus(1).to_string() == "2015-01");
    CHECK(m.plus(-12).to_string() == "2013-12");
    CHECK(YearMonth{2000, 3}.plus(-3).to_string() == "1999-12");
    CHECK(YearMonth{2014, 1} < YearMonth{2014, 2});

    for (const char* bad : {"2014-13", "2014-00", "2014-1", "14-01", "2014/01", "2014-01-01", ""}) {
        INFO(bad);
        CHECK_THROWS_AS(YearMonth::parse(bad), InputError);
    }
}

TEST_CASE("parse_csv groups rows by series and sorts months", "[timeseries][csv]") {
    const std::string text = kHeader + "B,2000-02,5\nA,2000-01,1\nB,2000-01,4\nA,2000-02,2\n";
    const auto d = parse_csv(text);
    REQUIRE(d.size() == 2);
    CHECK(d[0].id == "B");
    CHECK(d[0].values == std::vector<double>{4, 5});
    CHECK(d[1].start.to_string() == "2000-01");
    CHECK(d.index_of("A") == 1);
    CHECK(d.index_of("Z") == -1);
    CHECK_THROWS_AS(d.at("Z"), InputError);
}

TEST_CASE("parse_csv rejects malformed input with row numbers", "[timeseries][csv]") {
    struct Case {
        std::string text;
        std::string fragment;
    };
    const std::vector<Case> cases{
        {"id,month,value\nA,2000-01,1\n", "header"},
        {kHeader + "A,2000-01,1\nA,2000-03,2\n", "gap at row 3"},
        {kHeader + "A,2000-01,1\nA,2000-01,2\n", "duplicate month"},
        {kHeader + "A,2000-01,0\n", "non-positive"},
        {kHeader + "A,2000-01,-3\n", "non-positive"},
        {kHeader + "A,2000-01,abc\n", "row 2: non-numeric"},
        {kHeader + "A,2000-01,nan\n", "non-numeric"},
        {kHeader + "A,2000-1,4\n", "row 2: malformed month"},
        {kHeader + "A,2000-01\n", "3 comma-separated"},
        {kHeader + ",2000-01,4\n", "empty series_id"},
    };
    for (const auto& c : cases) {
        INFO(c.text);
        try {
            (void)parse_csv(c.text);
            FAIL("expected InputError");
        } catch (const InputError& e) {
            CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring(c.fragment));
        }
    }
}

TEST_CASE("CSV round-trips through save and load", "[timeseries][csv]") {
    SyntheticSpec spec;
    spec.series = 4;
    const auto d = make_synthetic_dataset(spec);
    const auto path = std::filesystem::temp_directory_path() / "nbeats_roundtrip.csv";
    save_csv(d, path);
    const auto back = load_csv(path);
    REQUIRE(back.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(back[i].id == d[i].id);
        CHECK(back[i].start == d[i].start);
        CHECK(back[i].values == d[i].values);
    }
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_csv(path), InputError);
}

TEST_CASE("split places validation and test at the end of each series", "[timeseries][split]") {
    const auto d = parse_csv(kHeader + csv_for("A", {2010, 1}, 40) + csv_for("B", {2005, 6}, 30, 500));
    const auto s = split(d, 12, 6);
    REQUIRE(s.bounds().size() == 2);
    CHECK(s.bounds()[0].tuning_end == 16);
    CHECK(s.bounds()[0].full_end == 28);
    CHECK(s.bounds()[1].tuning_end == 6);

    const auto test = s.test_targets(0);
    REQUIRE(test.size() == 12);
    CHECK(test.front() == 100.0 + 28);
    CHECK(test.back() == 100.0 + 39);
    const auto val = s.validation_targets(1);
    CHECK(val.front() == 500.0 + 6);

    const auto tuning = s.tuning_train();
    const auto full = s.full_train();
    CHECK(tuning[0].size() == 16);
    CHECK(full[1].size() == 18);
    CHECK(full[1].values.back() == 500.0 + 17);
}

TEST_CASE("split rejects series shorter than 2H + lookback", "[timeseries][split]") {
    const auto ok = parse_csv(kHeader + csv_for("A", {2010, 1}, 30));
    CHECK_NOTHROW(split(ok, 12, 6));
    const auto short_one = parse_csv(kHeader + csv_for("A", {2010, 1}, 29));
    CHECK_THROWS_WITH(split(short_one, 12, 6), Catch::Matchers::ContainsSubstring("series too short"));
}

TEST_CASE("make_window takes w inputs ending at t and H targets after it", "[timeseries][window]") {
    const auto ts = ramp(20);
    const auto raw = make_window(ts, 8, 6, 4, Scaling::None);
    CHECK(raw.input == std::vector<double>{3, 4, 5, 6, 7, 8});
    CHECK(raw.target == std::vector<double>{9, 10, 11, 12});
    CHECK(raw.scale == 1.0);

    const auto scaled = make_window(ts, 8, 6, 4, Scaling::InputMean);
    CHECK(scaled.scale == Catch::Approx(5.5));
    CHECK(scaled.input.front() == Catch::Approx(3.0 / 5.5));
    CHECK(scaled.target.back() == Catch::Approx(12.0 / 5.5));

    CHECK_NOTHROW(make_window(ts, 6, 6, 4));
    CHECK_NOTHROW(make_window(ts, 16, 6, 4));
    CHECK_THROWS_AS(make_window(ts, 5, 6, 4), InputError);
    CHECK_THROWS_AS(make_window(ts, 17, 6, 4), InputError);

    const auto last = final_window(ts, 6, Scaling::None);
    CHECK(last.input == std::vector<double>{15, 16, 17, 18, 19, 20});
    CHECK(last.target.empty());
}

TEST_CASE("sampler weights series by their window count", "[timeseries][sampler]") {
    const Dataset d({ramp(20, "A"), ramp(10, "B"), ramp(12, "C")});
    const WindowSampler by_windows(d, 6, 4, SeriesWeighting::WindowCount);
    CHECK(by_windows.valid_windows(0) == 11);
    CHECK(by_windows.valid_windows(1) == 1);
    CHECK(by_windows.valid_windows(2) == 3);
    const auto p = by_windows.probabilities();
    CHECK(p[0] == Catch::Approx(11.0 / 15));
    CHECK(p[1] == Catch::Approx(1.0 / 15));

    const WindowSampler by_length(d, 6, 4, SeriesWeighting::SeriesLength);
    CHECK(by_length.probabilities()[0] == Catch::Approx(20.0 / 42));

    const Dataset with_short({ramp(20, "A"), ramp(5, "S")});
    const WindowSampler skip(with_short, 6, 4, SeriesWeighting::SeriesLength);
    CHECK(skip.weights()[1] == 0.0);
    Rng rng(3);
    for (int i = 0; i < 2000; ++i) CHECK(skip.draw(rng).series == 0);

    const Dataset none({ramp(5, "S")});
    CHECK_THROWS_AS(WindowSampler(none, 6, 4), InputError);
}

TEST_CASE("sampler draws every split index inside its valid range", "[timeseries][sampler]") {
    const Dataset d({ramp(20, "A"), ramp(10, "B"), ramp(12, "C")});
    const WindowSampler sampler(d, 6, 4);
    Rng rng(11);
    std::map<std::pair<std::size_t, std::size_t>, int> seen;
    for (int i = 0; i < 30000; ++i) {
        const auto draw = sampler.draw(rng);
        REQUIRE(draw.t >= 6);
        REQUIRE(draw.t <= d[draw.series].size() - 4);
        ++seen[{draw.series, draw.t}];
    }
    CHECK(seen.size() == 15);
    // Every window equally likely: 2000 expected each.
    for (const auto& [key, count] : seen) CHECK(std::abs(count - 2000) < 250);
}

TEST_CASE("sampling is reproducible from the seed", "[timeseries][sampler]") {
    const auto d = make_synthetic_dataset({});
    Rng a(42), b(42), c(43);
    const auto x = sample_batch(d, 64, 12, 12, a);
    const auto y = sample_batch(d, 64, 12, 12, b);
    const auto z = sample_batch(d, 64, 12, 12, c);
    bool same = true, differs = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        same = same && x[i].input == y[i].input && x[i].target == y[i].target;
        differs = differs || x[i].input != z[i].input;
    }
    CHECK(same);
    CHECK(differs);
}

TEST_CASE("synthetic panel matches its specification", "[timeseries][synthetic]") {
    const auto d = make_synthetic_dataset({});
    REQUIRE(d.size() == 35);
    for (const auto& s : d.series()) {
        CHECK(s.end_month() == YearMonth{2014, 12});
        CHECK(s.size() >= 96);
        CHECK(s.size() <= 288);
        for (double v : s.values) REQUIRE(v > 0.0);
    }
    const auto again = make_synthetic_dataset({});
    CHECK(again[7].values == d[7].values);
}
