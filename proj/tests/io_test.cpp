#include "hi/io.hpp"
#include "hi/witness.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace hi;
using nlohmann::json;

TEST(Io, ParamsRoundTrip) {
    for (const auto& p : {witness::toy_params(), witness::paper_params()}) {
        auto j = io::params_to_json(p);
        EXPECT_EQ(j.at("schema_version"), io::kSchemaVersion);
        auto back = io::params_from_json(json::parse(io::dump(j)));
        EXPECT_EQ(back, p);
        EXPECT_EQ(io::dump(io::params_to_json(back)), io::dump(j));
    }
}

TEST(Io, ParamsRejectsInconsistentFiles) {
    auto j = io::params_to_json(witness::toy_params());
    auto bad = j;
    bad["m"].erase(bad["m"].size() - 1);
    EXPECT_THROW(io::params_from_json(bad), Error);
    bad = j;
    bad["n"][0] = "1";
    EXPECT_THROW(io::params_from_json(bad), Error);
    bad = j;
    bad["m"][1] = bad["m"][0];
    EXPECT_THROW(io::params_from_json(bad), Error);
    bad = j;
    bad["kind"] = "vector";
    EXPECT_THROW(io::params_from_json(bad), Error);
}

TEST(Io, VectorsRoundTrip) {
    SparseVector x{{1, frac(1, 3)}, {4, frac(-7, 2)}};
    auto back = io::vector_from_json(json::parse(io::dump(io::vector_to_json(x))));
    EXPECT_EQ(back, x);
    SqrtVector y;
    y.set(2, frac(1, 2), -1);
    y.set(5, frac(1, 2), 1);
    EXPECT_EQ(io::sqrt_vector_from_json(io::sqrt_vector_to_json(y)), y);
    EXPECT_EQ(io::any_vector_from_json(io::vector_to_json(x)), SqrtVector::from_rational(x));
    EXPECT_EQ(io::any_vector_from_json(io::sqrt_vector_to_json(y)), y);
}

TEST(Io, BlocksMustBeSuccessiveAndNonzero) {
    SqrtVector a, b;
    a.set(1, 1);
    b.set(3, 1);
    auto j = io::blocks_to_json({a, b});
    EXPECT_EQ(io::blocks_from_json(j).size(), 2u);
    EXPECT_THROW(io::blocks_from_json(io::blocks_to_json({b, a})), Error);
    EXPECT_THROW(io::blocks_from_json(io::blocks_to_json({a, SqrtVector()})), Error);
}

TEST(Io, MalformedInputs) {
    EXPECT_THROW(io::vector_from_json(json::parse(R"({"kind":"vector","schema_version":1,"coords":{"x":"1"}})")),
                 Error);
    EXPECT_THROW(io::vector_from_json(json::parse(R"({"kind":"vector","schema_version":1,"coords":{"1":"1/0"}})")),
                 Error);
    EXPECT_THROW(io::read_json("/nonexistent/file.json"), Error);
    auto path = std::filesystem::temp_directory_path() / "hi_io_test_bad.json";
    io::write_text(path, "{ not json");
    EXPECT_THROW(io::read_json(path), Error);
    std::filesystem::remove(path);
}
