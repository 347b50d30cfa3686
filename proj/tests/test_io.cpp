#include "test_support.hpp"

#include "trpca/io.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>

#include <unistd.h>

using namespace trpca;
using namespace trpca::testing;

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("trpca-io-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

}  // namespace

TEST_CASE("formatted doubles parse back to the same bits") {
    Rng rng(1);
    for (int i = 0; i < 2000; ++i) {
        const double v = rng.normal() * std::pow(10.0, rng.uniform(-300.0, 300.0));
        const auto back = parse_cell(format_double(v));
        REQUIRE(back.has_value());
        CHECK(*back == v);
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(-2.0) == "-2");
    CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "NaN");
    CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
}

TEST_CASE("cell parsing recognises missing spellings and rejects text") {
    CHECK(!parse_cell("").has_value());
    CHECK(!parse_cell("  ").has_value());
    CHECK(!parse_cell("NaN").has_value());
    CHECK(!parse_cell("na").has_value());
    CHECK(!parse_cell("null").has_value());
    CHECK(*parse_cell(" 2.5 ") == 2.5);
    CHECK(*parse_cell("+3") == 3.0);
    CHECK(*parse_cell("1e-3") == 1e-3);
    CHECK_THROWS_AS((void)parse_cell("abc"), IoError);
    CHECK_THROWS_AS((void)parse_cell("1.5x"), IoError);
}

TEST_CASE("csv lines split on commas outside quotes") {
    const auto cells = split_csv_line("a,\"b,c\",,\"d\"\"e\"");
    REQUIRE(cells.size() == 4);
    CHECK(cells[0] == "a");
    CHECK(cells[1] == "b,c");
    CHECK(cells[2].empty());
    CHECK(cells[3] == "d\"e");
}

TEST_CASE("series csv accepts one or two columns and an optional header") {
    TempDir dir;
    const fs::path one = dir.path / "one.csv";
    write_text_file(one, "value\n1.5\n\nNaN\n-2\n");
    const SignalSeries a = read_series_csv(one);
    REQUIRE(a.size() == 4);
    CHECK(*a.values[0] == 1.5);
    CHECK(!a.values[1].has_value());
    CHECK(!a.values[2].has_value());
    CHECK(*a.values[3] == -2.0);

    const fs::path two = dir.path / "two.csv";
    write_text_file(two, "2024-01-01,3\n2024-01-02,\n2024-01-03,4\n");
    const SignalSeries b = read_series_csv(two);
    REQUIRE(b.size() == 3);
    CHECK(*b.values[0] == 3.0);
    CHECK(!b.values[1].has_value());

    const fs::path bad = dir.path / "bad.csv";
    write_text_file(bad, "1\n2\nthree\n");
    CHECK_THROWS_AS((void)read_series_csv(bad), IoError);
    CHECK_THROWS_AS((void)read_series_csv(dir.path / "absent.csv"), IoError);

    const fs::path out = dir.path / "out.csv";
    write_series_csv(out, a);
    const SignalSeries c = read_series_csv(out);
    REQUIRE(c.size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(c.values[i] == a.values[i]);
}

TEST_CASE("matrix and mask csv round-trip exactly") {
    TempDir dir;
    Rng rng(2);
    const Matrix data = random_matrix(rng, 7, 5) * 1e3;
    const BoolMatrix mask = random_mask(rng, 7, 5, 0.3);
    const fs::path path = dir.path / "m.csv";
    write_matrix_csv(path, data, &mask);
    const ObservationMatrix back = read_matrix_csv(path);
    CHECK(back.mask == mask);
    for (Index j = 0; j < 5; ++j) {
        for (Index i = 0; i < 7; ++i) {
            if (mask(i, j)) CHECK(back.data(i, j) == data(i, j));
        }
    }

    const fs::path mpath = dir.path / "mask.csv";
    write_mask_csv(mpath, mask);
    CHECK(read_mask_csv(mpath) == mask);

    write_text_file(mpath, "1,true\nfalse,0\n");
    const BoolMatrix words = read_mask_csv(mpath);
    CHECK(words(0, 0));
    CHECK(words(0, 1));
    CHECK(!words(1, 0));
    write_text_file(mpath, "1,2\n");
    CHECK_THROWS_AS((void)read_mask_csv(mpath), IoError);

    write_text_file(path, "1,2\n3\n");
    CHECK_THROWS_AS((void)read_matrix_csv(path), IoError);
}

TEST_CASE("apply_mask hides cells and checks the shape") {
    Matrix data(2, 2);
    data << 1, 2, 3, 4;
    BoolMatrix mask(2, 2);
    mask << true, false, true, true;
    const ObservationMatrix d = apply_mask(ObservationMatrix(data), mask);
    CHECK(!d.mask(0, 1));
    CHECK(d.observed_count() == 3);
    CHECK_THROWS_AS((void)apply_mask(ObservationMatrix(data), BoolMatrix::Constant(3, 2, true)),
                    IoError);
}

TEST_CASE("config files are flat key=value lists") {
    const ConfigEntries entries = parse_config("# comment\n\n lambda1 = 0.5 \nmode=batch\nempty=\n");
    const ConfigEntries expected{{"lambda1", "0.5"}, {"mode", "batch"}, {"empty", ""}};
    CHECK(entries == expected);
    CHECK_THROWS_AS((void)parse_config("novalue\n"), ConfigError);
    CHECK_THROWS_AS((void)parse_config("=1\n"), ConfigError);

    TempDir dir;
    write_config_file(dir.path / "c.cfg", expected);
    CHECK(read_config_file(dir.path / "c.cfg") == expected);
}

TEST_CASE("stream records parse nulls as missing and round-trip") {
    const StreamRecord r = parse_stream_record(R"({"t": 7, "values": [1.5, null, -2]})", 3);
    REQUIRE(r.t.has_value());
    CHECK(*r.t == 7);
    CHECK(r.values(0) == 1.5);
    CHECK(!r.mask(1));
    CHECK(r.mask(2));
    const StreamRecord back = parse_stream_record(format_stream_record(r));
    CHECK(back.t == r.t);
    CHECK(back.mask == r.mask);
    CHECK(back.values == r.values);

    Rng rng(3);
    StreamRecord exact;
    exact.values = random_vector(rng, 20);
    exact.mask = BoolVector::Constant(20, true);
    CHECK(parse_stream_record(format_stream_record(exact)).values == exact.values);

    CHECK_THROWS_AS((void)parse_stream_record("{\"values\": [1, 2]}", 3), IoError);
    CHECK_THROWS_AS((void)parse_stream_record("[1, 2]"), IoError);
    CHECK_THROWS_AS((void)parse_stream_record("{\"values\": [\"x\"]}"), IoError);
    CHECK_THROWS_AS((void)parse_stream_record("{\"t\": 1.5, \"values\": []}"), IoError);
    CHECK_THROWS_AS((void)parse_stream_record("{\"values\": [1,"), IoError);
}

TEST_CASE("text files are written atomically") {
    TempDir dir;
    const fs::path p = dir.path / "x.txt";
    write_text_file(p, "first");
    write_text_file(p, "second");
    CHECK(read_text_file(p) == "second");
    CHECK(!fs::exists(dir.path / "x.txt.tmp"));
    CHECK_THROWS_AS(write_text_file(dir.path / "missing" / "y.txt", "z"), IoError);
}
