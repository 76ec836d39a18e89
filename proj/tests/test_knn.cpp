#include "doctest.h"

#include "tshap/knn.hpp"
#include "tshap/rng.hpp"

using namespace tshap;

TEST_CASE("single point") {
    Eigen::MatrixXd pts(1, 2);
    pts << 0.3, -0.7;
    KnnIndex index(pts, Subset::full(2));
    CHECK(index.query(0, 1) == std::vector<int>{0});
    CHECK_THROWS_AS(index.query(0, 2), ArgumentError);
}

TEST_CASE("line of points with deterministic tie-breaks") {
    Eigen::MatrixXd pts(4, 1);
    pts << 0.0, 1.0, 2.0, 3.0;
    KnnIndex index(pts, Subset(1, {0}));
    // neighbours of the value 1: itself, then 0 and 2 tie at distance 1,
    // lowest index first
    CHECK(index.query(1, 3) == std::vector<int>{1, 0, 2});
    CHECK(index.query(0, 2) == std::vector<int>{0, 1});
}

TEST_CASE("duplicated points come first, lowest index first") {
    Eigen::MatrixXd pts(5, 2);
    pts << 1.0, 1.0,  //
        4.0, 4.0,     //
        1.0, 1.0,     //
        1.0, 1.0,     //
        1.5, 1.0;
    KnnIndex index(pts, Subset::full(2));
    CHECK(index.query(3, 3) == std::vector<int>{0, 2, 3});
    CHECK(index.query(0, 4) == std::vector<int>{0, 2, 3, 4});
}

TEST_CASE("k equal to N returns a permutation") {
    Rng rng = make_rng(11);
    Eigen::MatrixXd pts(40, 3);
    for (int i = 0; i < pts.size(); ++i) pts.data()[i] = std_normal(rng);
    KnnIndex index(pts, Subset(3, {0, 2}));
    auto res = index.query(17, 40);
    std::vector<int> sorted = res;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 40; ++i) CHECK(sorted[i] == i);
    CHECK(res[0] == 17);
}

TEST_CASE("tree equals brute force on random instances") {
    Rng rng = make_rng(2024);
    for (int inst = 0; inst < 50; ++inst) {
        const int n = 200 + uniform_index(800, rng);
        const int d = 1 + uniform_index(6, rng);
        Eigen::MatrixXd pts(n, d);
        for (int i = 0; i < pts.size(); ++i) pts.data()[i] = std_normal(rng);
        // random nonempty subspace
        std::uint32_t mask = 1 + uniform_index((1 << d) - 1, rng);
        KnnIndex index(pts, Subset::from_mask(d, mask));
        for (int q = 0; q < 20; ++q) {
            const int l = uniform_index(n, rng);
            const int k = 1 + uniform_index(8, rng);
            CHECK(index.query(l, k) == index.query_brute_force(l, k));
        }
    }
}

TEST_CASE("projection subspace only sees its own coordinates") {
    // larger gaussian cloud, 1000 points, 50 queries, k = 5 against brute force
    Rng rng = make_rng(5150);
    Eigen::MatrixXd pts(1000, 4);
    for (int i = 0; i < pts.size(); ++i) pts.data()[i] = std_normal(rng);
    KnnIndex index(pts, Subset(4, {1, 3}));
    for (int q = 0; q < 50; ++q) {
        const int l = uniform_index(1000, rng);
        CHECK(index.query(l, 5) == index.query_brute_force(l, 5));
    }
}
