#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "csv.hpp"
#include "formats.hpp"
#include "json.hpp"
#include "kpool/error.hpp"
#include "kpool/numeric.hpp"
#include "report.hpp"

namespace fs = std::filesystem;
using namespace kpool;
using namespace kpool::cli;

namespace {

struct Scratch {
    fs::path dir;
    Scratch() {
        dir = fs::temp_directory_path() / ("kpool_cli_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~Scratch() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
    std::string write(const std::string& name, const std::string& text) const {
        const fs::path p = dir / name;
        std::ofstream(p, std::ios::binary) << text;
        return p.string();
    }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

const Scratch& scratch() {
    static Scratch s;
    return s;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Run {
    int code;
    std::string out;
    std::string err;
};

// Runs the binary with stdout and stderr captured to files.
Run run(const std::string& args) {
    static int counter = 0;
    const std::string tag = std::to_string(counter++);
    const std::string out = scratch().path("stdout" + tag), err = scratch().path("stderr" + tag);
    const std::string cmd = std::string("\"") + KPOOL_BIN + "\" " + args + " >\"" + out + "\" 2>\"" + err + "\"";
    const int status = std::system(cmd.c_str());
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return {code, slurp(out), slurp(err)};
}

std::vector<std::vector<std::string>> rows_of(const std::string& csv) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : parse_csv(csv, "output").records) rows.push_back(r.fields);
    return rows;
}

double num(const std::string& s) { return parse_number(s, 0, "cell"); }

}  // namespace

TEST_CASE("parse_csv handles tags, comments, quotes and blank lines") {
    const auto doc = parse_csv(
        "# kpool-panel v1\n# another comment\nperiod,respondent,p1\n\n 1 , \"r,1\" ,0.5\n2,\"say \"\"hi\"\"\",1\n"
        "3,\"multi\nline\",0\n",
        "t");
    REQUIRE(doc.format_tag.has_value());
    CHECK(*doc.format_tag == "kpool-panel v1");
    REQUIRE(doc.records.size() == 4);
    CHECK(doc.records[0].line == 3);
    CHECK(doc.records[1].fields == std::vector<std::string>{"1", "r,1", "0.5"});
    CHECK(doc.records[1].line == 5);
    CHECK(doc.records[2].fields[1] == "say \"hi\"");
    CHECK(doc.records[3].fields[1] == "multi\nline");
    CHECK(doc.records[3].line == 7);
}

TEST_CASE("parse_csv rejects an unterminated quote") {
    CHECK_THROWS_AS(parse_csv("a,b\n1,\"open\n", "t"), InputError);
}

TEST_CASE("parse_number is strict") {
    CHECK(parse_number("2.5", 1, "x") == 2.5);
    CHECK(parse_number("+3", 1, "x") == 3.0);
    CHECK(parse_number("-1e-3", 1, "x") == -1e-3);
    for (const char* bad : {"", "1.5x", "abc", "nan", "inf", "1,2"}) {
        CHECK_THROWS_AS(parse_number(bad, 4, "x"), InputError);
    }
    try {
        parse_number("oops", 17, "probability");
        FAIL("expected throw");
    } catch (const InputError& e) {
        CHECK(e.line() == 17);
    }
}

TEST_CASE("csv_escape round-trips through parse_csv") {
    const std::vector<std::string> fields{"plain", "a,b", "q\"uote", "line\nbreak", " padded "};
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) line += (i ? "," : "") + csv_escape(fields[i]);
    const auto doc = parse_csv(line + "\n", "t");
    REQUIRE(doc.records.size() == 1);
    CHECK(doc.records[0].fields == fields);
    CHECK(csv_escape("plain") == "plain");
}

TEST_CASE("format_number uses 12 significant digits and no negative zero") {
    CHECK(format_number(1.0 / 3.0) == "0.333333333333");
    CHECK(format_number(-0.0) == "0");
    CHECK(format_number(25.0) == "25");
}

TEST_CASE("read_input distinguishes panel and sample files") {
    const auto panel = scratch().write("p.csv", "period,respondent,p1,p2\n1,a,0.4,0.6\n");
    const auto sample = scratch().write("s.csv", "# kpool-sample v1\nforecast_id,weight,x1,x2\nf,1,0,1\nf,3,2,2\ng,1,5,5\n");
    const auto p = read_input(panel);
    REQUIRE(std::holds_alternative<PanelFile>(p));
    CHECK(std::get<PanelFile>(p).categories == 2);
    const auto s = read_input(sample);
    REQUIRE(std::holds_alternative<SampleFile>(s));
    const auto& sf = std::get<SampleFile>(s);
    CHECK(sf.dim == 2);
    REQUIRE(sf.forecasts.size() == 2);
    CHECK(sf.forecasts[0].weights == std::vector<double>{0.25, 0.75});
    CHECK(sf.forecasts[1].line == 5);
}

TEST_CASE("read_input rejects a wrong tag and duplicate respondents") {
    const auto tagged = scratch().write("bad_tag.csv", "# kpool-matrix v1\nperiod,respondent,p1\n1,a,1\n");
    CHECK_THROWS_AS(read_input(tagged), InputError);
    const auto dup = scratch().write("dup.csv", "period,respondent,p1,p2\n1,a,0.5,0.5\n1,a,0.2,0.8\n");
    try {
        (void)read_input(dup);
        FAIL("expected throw");
    } catch (const InputError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("read_matrix and read_cuts") {
    const auto m = read_matrix(scratch().write("a.csv", "# kpool-matrix v1\n2,0.5\n0.5,1\n"));
    CHECK(m.rows() == 2);
    CHECK(m(0, 1) == 0.5);
    CHECK_THROWS_AS(read_matrix(scratch().write("a_bad.csv", "1,2\n3\n")), InputError);
    const auto cuts = read_cuts(scratch().write("cuts.csv", "# kpool-bins v1\n-2\n0,2\n"));
    CHECK(cuts == std::vector<double>{-2.0, 0.0, 2.0});
}

TEST_CASE("score: point mass at the outcome scores 0") {
    const auto in = scratch().write("pm.csv", "forecast_id,weight,x1\na,1,3\nb,1,-1.5\n");
    for (const char* rule : {"se", "crps"}) {
        const auto a = run(std::string("score --rule ") + rule + " --input " + in + " --y 3 --no-divergences");
        REQUIRE(a.code == 0);
        const auto rows = rows_of(a.out);
        CHECK(rows[0] == std::vector<std::string>{"forecast", "score", "entropy"});
        CHECK(num(rows[1][1]) == 0.0);
    }
    const auto es = scratch().write("pm2.csv", "forecast_id,weight,x1,x2\na,1,1,2\n");
    const auto e = run("score --rule es --input " + es + " --y 1,2");
    REQUIRE(e.code == 0);
    CHECK(num(rows_of(e.out)[1][1]) == 0.0);
}

TEST_CASE("score: point masses at 0 and 2 with y = 5 give 25 and 9") {
    const auto in = scratch().write("se.csv", "forecast_id,weight,x1\nf0,1,0\nf2,1,2\n");
    const auto r = run("score --rule se --input " + in + " --y 5");
    REQUIRE(r.code == 0);
    const auto rows = rows_of(r.out);
    CHECK(num(rows[1][1]) == 25.0);
    CHECK(num(rows[2][1]) == 9.0);
    // Divergence between the two point masses is (0 - 2)^2.
    CHECK(rows[3] == std::vector<std::string>{"forecast_a", "forecast_b", "divergence"});
    CHECK(num(rows[4][2]) == 4.0);
}

TEST_CASE("malformed probability row exits 2 and names the line") {
    const auto in = scratch().write("bad.csv", "period,respondent,p1,p2\n1,a,0.5,0.5\n1,b,0.5,zero\n");
    for (const char* cmd : {"score --rule brier --y 1", "decompose --rule rps"}) {
        const auto r = run(std::string(cmd) + " --input " + in);
        CHECK(r.code == 2);
        const auto err = nlohmann::json::parse(r.err);
        CHECK(err["error"] == "input");
        CHECK(err["line"] == 3);
    }
    const auto sums = scratch().write("badsum.csv", "period,respondent,p1,p2\n1,a,0.5,0.5\n1,b,0.7,0.7\n");
    const auto r = run("decompose --rule brier --input " + sums);
    CHECK(r.code == 2);
    CHECK(nlohmann::json::parse(r.err)["line"] == 3);
}

TEST_CASE("usage errors exit 2 with a JSON record") {
    const auto in = scratch().write("u.csv", "forecast_id,weight,x1\na,1,0\n");
    for (const std::string& args : std::vector<std::string>{"score --input " + in, "decompose --rule nope --input " + in,
                                   "decompose --rule brier --input " + in, "frobnicate",
                                   "decompose --rule se --input " + in + " --truncate 3,1"}) {
        const auto r = run(args);
        CHECK(r.code == 2);
        CHECK(nlohmann::json::accept(r.err));
    }
}

TEST_CASE("decompose: Brier (1,0)/(0,1) equal weights") {
    const auto in = scratch().write("brier.csv", "period,respondent,p1,p2\n1,a,1,0\n1,b,0,1\n");
    const auto r = run("decompose --rule brier --input " + in);
    REQUIRE(r.code == 0);
    const auto rows = rows_of(r.out);
    CHECK(rows[0] == std::vector<std::string>{"period", "pool_entropy", "avg_entropy", "disagreement",
                                              "disagreement_share"});
    CHECK(num(rows[1][1]) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(num(rows[1][2]) == 0.0);
    CHECK(num(rows[1][3]) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(num(rows[1][4]) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("decompose: identical components have zero disagreement") {
    const auto panel = scratch().write(
        "same.csv", "period,respondent,p1,p2,p3\n1,a,20,30,50\n1,b,20,30,50\n2,a,0.1,0.1,0.8\n2,b,0.1,0.1,0.8\n2,c,0.1,0.1,0.8\n");
    for (const char* rule : {"brier", "rps"}) {
        const auto r = run(std::string("decompose --rule ") + rule + " --input " + panel);
        REQUIRE(r.code == 0);
        const auto rows = rows_of(r.out);
        REQUIRE(rows.size() == 3);
        for (std::size_t i = 1; i < rows.size(); ++i) CHECK(std::abs(num(rows[i][3])) <= 1e-12);
    }
    const auto sample = scratch().write("same_s.csv", "forecast_id,weight,x1,x2\na,1,0,0\na,1,1,3\nb,2,0,0\nb,2,1,3\n");
    const auto r = run("decompose --rule es --input " + sample);
    REQUIRE(r.code == 0);
    CHECK(std::abs(num(rows_of(r.out)[1][2])) <= 1e-12);
}

TEST_CASE("decompose: a single forecast has zero disagreement") {
    const auto in = scratch().write("one.csv", "forecast_id,weight,x1\na,1,0\na,1,4\n");
    const auto r = run("decompose --rule crps --input " + in);
    REQUIRE(r.code == 0);
    CHECK(num(rows_of(r.out)[1][2]) == 0.0);
}

TEST_CASE("decompose: 40 vs 5000 bivariate Energy Score matches the triple-sum oracle") {
    Rng rng(99);
    std::vector<std::array<double, 2>> a(40), b(5000);
    for (auto& p : a) p = {rng.normal(), rng.normal()};
    for (auto& p : b) p = {0.5 + 1.5 * rng.normal(), -0.25 + rng.normal()};
    std::string text = "# kpool-sample v1\nforecast_id,weight,x1,x2\n";
    char buf[96];
    for (const auto& p : a) {
        std::snprintf(buf, sizeof buf, "small,1,%.17g,%.17g\n", p[0], p[1]);
        text += buf;
    }
    for (const auto& p : b) {
        std::snprintf(buf, sizeof buf, "large,1,%.17g,%.17g\n", p[0], p[1]);
        text += buf;
    }
    const auto in = scratch().write("es40.csv", text);

    // Naive averages of Euclidean distances within and across the samples.
    auto mean_dist = [](const auto& x, const auto& y) {
        long double s = 0.0L;
        for (const auto& p : x)
            for (const auto& q : y) s += std::hypot(p[0] - q[0], p[1] - q[1]);
        return static_cast<double>(s / (static_cast<long double>(x.size()) * y.size()));
    };
    const double e_aa = mean_dist(a, a), e_bb = mean_dist(b, b), e_ab = mean_dist(a, b);
    const double oracle = 0.25 * e_ab - 0.125 * e_aa - 0.125 * e_bb;

    const auto r = run("decompose --rule es --method exact --format json --input " + in);
    REQUIRE(r.code == 0);
    const auto doc = nlohmann::json::parse(r.out);
    const double d = doc["decomposition"][0]["disagreement"].get<double>();
    CHECK(std::abs(d - oracle) <= 1e-9 * std::abs(oracle));
}

TEST_CASE("check: --random 1000 --seed 7 passes every property") {
    const auto r = run("check --random 1000 --seed 7");
    CHECK(r.code == 0);
    const auto rows = rows_of(r.out);
    REQUIRE(rows.size() > 40);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK_MESSAGE(rows[i][6] == "pass", (rows[i][0] + "/" + rows[i][1]));
}

TEST_CASE("check: the broken kernel fails with a negative gap") {
    const auto out = scratch().path("broken.csv");
    const auto r = run("check --random 50 --rule rps --inject-broken-kernel --out " + out);
    CHECK(r.code == 3);
    bool saw_gap = false;
    for (const auto& row : rows_of(slurp(out))) {
        if (row[1] != "quartic") continue;
        CHECK(row[6] == "fail");
        if (row[0] == "gen-disagreement-gap") {
            saw_gap = true;
            CHECK(num(row[4]) < 0.0);
        }
    }
    CHECK(saw_gap);
}

TEST_CASE("check: single-component pools pass") {
    const auto r = run("check --random 200 --max-components 1 --seed 3");
    CHECK(r.code == 0);
}

TEST_CASE("identical config and seed give byte-identical output") {
    const auto in = scratch().write("mc.csv", "forecast_id,weight,x1,x2\na,1,0,0\na,1,1,2\nb,1,3,1\nb,1,-1,0\n");
    const std::vector<std::string> configs{
        "check --random 60 --seed 11 --format json",
        "decompose --rule es --method mc --draws 5000 --seed 5 --input " + in,
        "score --rule mse --y 0,0 --input " + in,
    };
    for (const auto& c : configs) {
        const auto first = scratch().path("rep1.out"), second = scratch().path("rep2.out");
        REQUIRE(run(c + " --out " + first).code == 0);
        REQUIRE(run(c + " --out " + second).code == 0);
        CHECK(slurp(first) == slurp(second));
        CHECK(!slurp(first).empty());
    }
}

TEST_CASE("negative bounds parse for --truncate") {
    const auto in = scratch().write("tr.csv", "period,respondent,p1,p2,p3,p4,p5,p6,p7,p8,p9,p10\n1,a,1,0,0,0,0,0,0,0,0,0\n");
    const auto wide = run("decompose --rule se --truncate -25,25 --input " + in);
    const auto narrow = run("decompose --rule se --truncate=-13,25 --input " + in);
    REQUIRE(wide.code == 0);
    REQUIRE(narrow.code == 0);
    // All mass in the lowest bin: a point mass at its midpoint, so zero entropy either way.
    CHECK(num(rows_of(wide.out)[1][1]) == 0.0);
    CHECK(num(rows_of(narrow.out)[1][1]) == 0.0);
}

TEST_CASE("panel: dropped records become warnings and the identity holds per row") {
    std::string text = "# kpool-panel v1\nperiod,respondent,p1,p2,p3,p4,p5,p6,p7,p8,p9,p10\n";
    Rng rng(4);
    for (int t = 1; t <= 4; ++t) {
        for (int r = 0; r < 4; ++r) {
            const auto p = rng.dirichlet(std::vector<double>(10, 0.7));
            text += std::to_string(t) + ",r" + std::to_string(r);
            char buf[40];
            for (double v : p) {
                std::snprintf(buf, sizeof buf, ",%.17g", v);
                text += buf;
            }
            text += '\n';
        }
    }
    text += "4,bad,0.5,0.5,0.5,0,0,0,0,0,0,0\n";
    const auto in = scratch().write("panel.csv", text);
    const auto r = run("panel --format json --input " + in);
    REQUIRE(r.code == 0);
    const auto warning = nlohmann::json::parse(r.err);
    CHECK(warning["line"] == 19);
    const auto doc = nlohmann::json::parse(r.out);
    REQUIRE(doc["periods"].size() == 4);
    for (const auto& row : doc["periods"]) {
        const double pool = row["pool_erps"], avg = row["avg_erps"], d = row["disagreement_rps"];
        CHECK(std::abs(pool - avg - d) <= 1e-9 * std::max(1.0, pool));
        CHECK(row["respondents"] == 4);
    }
}
