/*
   Copyright 2026 The rapidset Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "rapidset/brownian.hpp"
#include "rapidset/errors.hpp"

using namespace rapidset;

namespace {

double sample_var(const std::vector<double>& v)
{
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0;
    for (double x : v) s += (x - mean) * (x - mean);
    return s / static_cast<double>(v.size() - 1);
}

double sample_mean(const std::vector<double>& v)
{
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

TEST(GeneratePath, SingleStep)
{
    const auto p = generate_path(1, 5);
    ASSERT_EQ(p.resolution(), 1U);
    ASSERT_EQ(p.values().size(), 2U);
    EXPECT_EQ(p[0], 0.0);
    EXPECT_NE(p[1], 0.0);
}

TEST(GeneratePath, Deterministic)
{
    const auto a = generate_path(4, 123);
    const auto b = generate_path(4, 123);
    ASSERT_EQ(a.values().size(), 5U);
    for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(a[k], b[k]);
    const auto c = generate_path(4, 124);
    EXPECT_NE(a[4], c[4]);
}

TEST(GeneratePath, ZeroResolutionRejected)
{
    EXPECT_THROW(generate_path(0, 1), invalid_argument);
}

TEST(GeneratePath, LogRecordsSeedAndMethod)
{
    const auto p = generate_path(8, 77);
    ASSERT_EQ(p.generation_log().size(), 1U);
    EXPECT_EQ(p.generation_log()[0].seed, 77U);
    EXPECT_EQ(p.generation_log()[0].method, std::string(normal_method_name));
    EXPECT_EQ(p.seed(), 77U);
}

TEST(GeneratePath, TerminalVariance)
{
    std::vector<double> x1;
    for (std::uint64_t s = 0; s < 10000; ++s) x1.push_back(generate_path(16, derive_seed(9, "var", s))[16]);
    const double v = sample_var(x1);
    EXPECT_GE(v, 0.95);
    EXPECT_LE(v, 1.05);
}

TEST(GeneratePath, IncrementMeanAndVariance)
{
    const std::uint64_t m = 32;
    const std::size_t n = 10000;
    for (std::uint64_t k : {0ULL, 7ULL, 31ULL}) {
        std::vector<double> inc;
        for (std::size_t s = 0; s < n; ++s) {
            const auto p = generate_path(m, derive_seed(3, "inc", s));
            inc.push_back(p[k + 1] - p[k]);
        }
        const double var = sample_var(inc);
        const double sigma = std::sqrt(1.0 / static_cast<double>(m));
        EXPECT_LE(std::abs(sample_mean(inc)), 4.0 * sigma / std::sqrt(static_cast<double>(n)));
        EXPECT_NEAR(var, 1.0 / static_cast<double>(m), 0.05 / static_cast<double>(m));
    }
}

TEST(RefinePath, MidpointBridgeVariance)
{
    const auto base = PathGrid::from_values({0.0, 0.0});
    std::vector<double> mid;
    for (std::uint64_t s = 0; s < 10000; ++s) mid.push_back(refine_path(base, 2, derive_seed(1, "mid", s))[1]);
    const double v = sample_var(mid);
    EXPECT_GE(v, 0.235);
    EXPECT_LE(v, 0.265);
    EXPECT_LE(std::abs(sample_mean(mid)), 4.0 * 0.5 / 100.0);
}

// Interior point j of a factor-f bridge on [0, L] from a to b has mean
// a + (j/f)(b - a) and variance L (j/f)(1 - j/f).
TEST(RefinePath, MultiPointBridgeLaw)
{
    const auto base = PathGrid::from_values({0.0, 1.0});
    const std::uint64_t f = 8;
    std::vector<std::vector<double>> cols(f + 1);
    for (std::uint64_t s = 0; s < 20000; ++s) {
        const auto p = refine_path(base, f, derive_seed(2, "law", s));
        for (std::uint64_t j = 0; j <= f; ++j) cols[j].push_back(p[j]);
    }
    for (std::uint64_t j = 1; j < f; ++j) {
        const double t = static_cast<double>(j) / f;
        EXPECT_NEAR(sample_mean(cols[j]), t, 4.0 * std::sqrt(t * (1 - t) / 20000.0)) << j;
        EXPECT_NEAR(sample_var(cols[j]), t * (1 - t), 0.05 * t * (1 - t)) << j;
    }
    EXPECT_EQ(cols[0][0], 0.0);
    EXPECT_EQ(cols[f][0], 1.0);
}

TEST(RefinePath, PreservesOldValuesBitExactly)
{
    const auto p = generate_path(64, 10);
    const auto q = refine_path(p, 64, 11);
    ASSERT_EQ(q.resolution(), 4096U);
    for (std::uint64_t k = 0; k <= 64; ++k) EXPECT_EQ(q[k * 64], p[k]);
    EXPECT_EQ(q.generation_log().size(), 2U);
    EXPECT_EQ(q.generation_log()[1].seed, 11U);
}

TEST(RefinePath, FactorBelowTwoRejected)
{
    const auto p = generate_path(4, 1);
    EXPECT_THROW(refine_path(p, 1, 2), invalid_argument);
    EXPECT_THROW(refine_path(p, 0, 2), invalid_argument);
}

TEST(RefinePath, SegmentRefinementMatchesWholePath)
{
    const auto p = generate_path(16, 4);
    const auto q = refine_path(p, 8, 99);
    // Intervals 5..7 on their own.
    std::vector<double> out(3 * 8 + 1);
    refine_segment(p.values().subspan(5, 4), 5, 1.0 / 16, 8, 99, out);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], q[5 * 8 + i]);
}

// Coarse marginals of generate-then-refine match direct generation.
TEST(RefinePath, ConsistentWithDirectGeneration)
{
    const std::size_t n = 10000;
    std::vector<double> half_a, one_a, half_b, one_b;
    for (std::size_t s = 0; s < n; ++s) {
        const auto coarse = generate_path(2, derive_seed(5, "a", s));
        const auto fine = refine_path(coarse, 4, derive_seed(5, "r", s));
        half_a.push_back(fine[4]);
        one_a.push_back(fine[8]);
        const auto direct = generate_path(8, derive_seed(5, "b", s));
        half_b.push_back(direct[4]);
        one_b.push_back(direct[8]);
    }
    const auto two_sample = [&](const std::vector<double>& a, const std::vector<double>& b, double var) {
        EXPECT_LE(std::abs(sample_mean(a) - sample_mean(b)), 4.0 * std::sqrt(2 * var / n));
        EXPECT_NEAR(sample_var(a) / sample_var(b), 1.0, 0.08);
    };
    two_sample(half_a, half_b, 0.5);
    two_sample(one_a, one_b, 1.0);
}

TEST(Oscillation, Examples)
{
    const auto p = PathGrid::from_values({0.0, 0.3, -0.2});
    EXPECT_DOUBLE_EQ(oscillation(p, 0.0, 1.0), 0.5);
    EXPECT_DOUBLE_EQ(oscillation(p, 0.0, 0.5), 0.3);
    const auto flat = PathGrid::from_values(std::vector<double>(9, 0.0));
    for (int k = 0; k < 8; ++k) EXPECT_EQ(oscillation(flat, k / 8.0, (k + 1) / 8.0), 0.0);
}

TEST(Oscillation, InvalidArguments)
{
    const auto p = PathGrid::from_values({0.0, 0.3, -0.2});
    EXPECT_THROW(oscillation(p, 0.25, 1.0), invalid_argument);
    EXPECT_THROW(oscillation(p, 0.5, 0.5), invalid_argument);
    EXPECT_THROW(oscillation(p, 1.0, 0.5), invalid_argument);
    EXPECT_THROW(oscillation(p, -0.5, 0.5), invalid_argument);
}

TEST(Oscillation, MonotoneUnderInclusion)
{
    const auto p = generate_path(64, 31);
    for (int a = 0; a < 64; a += 5) {
        for (int b = a + 1; b <= 64; b += 7) {
            const double inner = oscillation(p, a / 64.0, b / 64.0);
            const double outer = oscillation(p, std::max(0, a - 3) / 64.0, std::min(64, b + 2) / 64.0);
            EXPECT_LE(inner, outer);
        }
    }
}

TEST(Oscillation, NeverDecreasesUnderRefinement)
{
    const auto p = generate_path(32, 8);
    const auto q = refine_path(p, 16, 9);
    for (int k = 0; k < 32; ++k) EXPECT_LE(oscillation(p, k / 32.0, (k + 1) / 32.0), oscillation(q, k / 32.0, (k + 1) / 32.0));
}

TEST(Gauge, Values)
{
    EXPECT_NEAR(gauge(std::exp(-1.0)), 0.857763, 1e-6);
    EXPECT_NEAR(gauge(0.25), 0.832555, 1e-6);
    for (double h : {1e-6, 0.01, 0.3, 0.9}) EXPECT_NEAR(gauge(h) / std::sqrt(h), std::sqrt(2 * std::log(1 / h)), 1e-12);
}

TEST(Gauge, DomainErrors)
{
    EXPECT_THROW(gauge(0.0), invalid_argument);
    EXPECT_THROW(gauge(1.0), invalid_argument);
    EXPECT_THROW(gauge(-0.1), invalid_argument);
    EXPECT_THROW(gauge(2.0), invalid_argument);
}

TEST(PathGrid, FromValuesValidation)
{
    EXPECT_THROW(PathGrid::from_values({0.0}), invalid_argument);
    EXPECT_THROW(PathGrid::from_values({0.1, 0.2}), invalid_argument);
}

TEST(PathCsv, RoundTripsFullPrecision)
{
    const auto p = generate_path(8, 2);
    const auto file = std::filesystem::temp_directory_path() / "rapidset_test_path" / "p.csv";
    write_path_csv(p, file);
    std::ifstream in(file);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t,x");
    for (std::uint64_t k = 0; k <= 8; ++k) {
        std::getline(in, line);
        const auto comma = line.find(',');
        EXPECT_EQ(std::stod(line.substr(0, comma)), k / 8.0);
        EXPECT_EQ(std::stod(line.substr(comma + 1)), p[k]);
    }
}
