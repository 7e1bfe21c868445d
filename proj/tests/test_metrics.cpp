#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "mrfusion/metrics/metrics.hpp"
#include "mrfusion/util/errors.hpp"
#include "support/oracles.hpp"
#include "support/tmpdir.hpp"

using namespace mrfusion;
using namespace mrfusion::metrics;

namespace {

std::vector<std::uint64_t> random_counts(std::size_t L, std::mt19937_64& rng, std::uint64_t hi = 1000) {
    std::vector<std::uint64_t> c(L * L);
    for (auto& v : c) v = rng() % (hi + 1);
    if (std::all_of(c.begin(), c.end(), [](auto v) { return v == 0; })) c[0] = 1;
    return c;
}

void check_against_oracle(const ConfusionMatrix& cm, double tol) {
    const auto o = testing::score_oracle(cm.counts(), cm.num_classes());
    const auto s = score(cm);
    CHECK(std::abs(s.accuracy - double(o.accuracy)) <= tol);
    CHECK(std::abs(s.kappa - double(o.kappa)) <= tol);
    CHECK(std::abs(s.fmeasure - double(o.weighted_f)) <= tol);
    CHECK(std::abs(s.fmeasure_macro - double(o.macro_f)) <= tol);
    for (std::size_t k = 0; k < cm.num_classes(); ++k)
        CHECK(std::abs(s.per_class_f[k] - double(o.per_class_f[k])) <= tol);
}

}  // namespace

TEST_SUITE("metrics") {
    TEST_CASE("hand-worked two-class example") {
        // 40 + 10 true class 1, 5 + 45 true class 2
        ConfusionMatrix cm(2, {40, 10, 5, 45});
        const auto s = score(cm);
        CHECK(s.accuracy == doctest::Approx(0.85));
        // pe = 0.5 * 0.45 + 0.5 * 0.55 = 0.5
        CHECK(s.kappa == doctest::Approx(0.7));
        CHECK(s.per_class_f[0] == doctest::Approx(80.0 / 95.0));
        CHECK(s.per_class_f[1] == doctest::Approx(90.0 / 105.0));
        CHECK(s.fmeasure == doctest::Approx(0.5 * 80.0 / 95.0 + 0.5 * 90.0 / 105.0));
    }

    TEST_CASE("label pairs are counted where they belong") {
        std::mt19937_64 rng(1);
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t L = 2 + rng() % 12;
            std::vector<std::int64_t> t(500), p(500);
            std::vector<std::uint64_t> expect(L * L, 0);
            for (std::size_t i = 0; i < t.size(); ++i) {
                t[i] = 1 + std::int64_t(rng() % L);
                p[i] = 1 + std::int64_t(rng() % L);
                ++expect[std::size_t(t[i] - 1) * L + std::size_t(p[i] - 1)];
            }
            const auto cm = confusion(t, p, L);
            CHECK(cm.counts() == expect);
            CHECK(cm.total() == 500);
        }
    }

    TEST_CASE("random matrices agree with the long-double oracle") {
        std::mt19937_64 rng(2);
        for (int trial = 0; trial < 1000; ++trial) {
            const std::size_t L = 2 + rng() % 12;
            check_against_oracle(ConfusionMatrix(L, random_counts(L, rng)), 1e-10);
        }
        // sparse matrices with empty rows and columns
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t L = 2 + rng() % 12;
            auto c = random_counts(L, rng, 3);
            for (auto& v : c)
                if (rng() % 3) v = 0;
            if (std::all_of(c.begin(), c.end(), [](auto v) { return v == 0; })) c[1] = 2;
            check_against_oracle(ConfusionMatrix(L, c), 1e-10);
        }
    }

    TEST_CASE("13-class matrix with large counts") {
        std::mt19937_64 rng(3);
        check_against_oracle(ConfusionMatrix(13, random_counts(13, rng, 5'000'000)), 1e-10);
    }

    TEST_CASE("relabelling classes and scaling counts leave scalar scores unchanged") {
        std::mt19937_64 rng(4);
        for (int trial = 0; trial < 100; ++trial) {
            const std::size_t L = 2 + rng() % 10;
            ConfusionMatrix cm(L, random_counts(L, rng));
            std::vector<std::size_t> perm(L);
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            ConfusionMatrix permuted(L), scaled(L);
            for (std::size_t t = 0; t < L; ++t)
                for (std::size_t p = 0; p < L; ++p) {
                    permuted(perm[t], perm[p]) = cm(t, p);
                    scaled(t, p) = 7 * cm(t, p);
                }
            const auto a = score(cm), b = score(permuted), c = score(scaled);
            for (const auto* o : {&b, &c}) {
                CHECK(o->accuracy == doctest::Approx(a.accuracy).epsilon(1e-12));
                CHECK(o->kappa == doctest::Approx(a.kappa).epsilon(1e-12));
                CHECK(o->fmeasure == doctest::Approx(a.fmeasure).epsilon(1e-12));
                CHECK(o->fmeasure_macro == doctest::Approx(a.fmeasure_macro).epsilon(1e-12));
            }
            for (std::size_t k = 0; k < L; ++k) CHECK(b.per_class_f[perm[k]] == doctest::Approx(a.per_class_f[k]));
        }
    }

    TEST_CASE("kappa is 1 exactly for diagonal matrices") {
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t L = 2 + rng() % 12;
            ConfusionMatrix cm(L);
            for (std::size_t k = 0; k < L; ++k) cm(k, k) = 1 + rng() % 100;
            CHECK(kappa(cm) == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(accuracy(cm) == 1.0);
            cm(0, 1) += 1;
            CHECK(kappa(cm) < 1.0);
        }
        // only one class present: chance agreement is 1 and kappa is defined as 0
        ConfusionMatrix single(3);
        single(1, 1) = 9;
        CHECK(kappa(single) == 0.0);
    }

    TEST_CASE("invalid inputs") {
        CHECK_THROWS_AS(confusion({1, 2}, {1}, 2), InputError);
        CHECK_THROWS_AS(confusion({1, 3}, {1, 1}, 2), InputError);
        CHECK_THROWS_AS(confusion({0}, {1}, 2), InputError);
        CHECK_THROWS_AS(score(ConfusionMatrix(3)), InputError);
        CHECK_THROWS_AS(ConfusionMatrix(2, {1, 2, 3}), InputError);
        ConfusionMatrix a(2), b(3);
        CHECK_THROWS_AS(a += b, InputError);
    }

    TEST_CASE("CSV files") {
        testing::TempDir dir;
        ConfusionMatrix cm(3, {5, 1, 0, 2, 7, 1, 0, 0, 4});
        write_confusion_csv(dir.file("cm.csv"), cm);
        std::ifstream in(dir.file("cm.csv"));
        std::stringstream ss;
        ss << in.rdbuf();
        CHECK(ss.str() == "true\\pred,1,2,3\n1,5,1,0\n2,2,7,1\n3,0,0,4\n");

        write_scores_csv(dir.file("s.csv"), score(cm));
        std::ifstream sin(dir.file("s.csv"));
        std::vector<std::string> keys;
        for (std::string line; std::getline(sin, line);) keys.push_back(line.substr(0, line.find(',')));
        CHECK(keys == std::vector<std::string>{"metric", "accuracy", "fmeasure", "fmeasure_macro", "kappa",
                                               "f_class1", "f_class2", "f_class3"});
    }
}
