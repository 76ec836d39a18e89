#include "doctest.h"

#include "tshap/subset.hpp"

using namespace tshap;

TEST_CASE("subset basics") {
    Subset u(4, {2, 0});
    CHECK(u.size() == 2);
    CHECK(u.members() == std::vector<int>{0, 2});
    CHECK(u.contains(0));
    CHECK(!u.contains(1));
    CHECK(u.proper());

    Subset c = u.complement();
    CHECK(c.members() == std::vector<int>{1, 3});
    CHECK((u.mask() | c.mask()) == 0b1111u);
    CHECK((u.mask() & c.mask()) == 0u);

    CHECK(Subset::full(4).is_full());
    CHECK(Subset::empty_set(4).empty());
    CHECK_THROWS_AS(Subset(4, {4}), ArgumentError);
}

TEST_CASE("gather scatter assemble") {
    Subset u(3, {0, 2});
    Eigen::VectorXd x(3);
    x << 10, 20, 30;
    Eigen::VectorXd xu = u.gather(x);
    CHECK(xu[0] == 10);
    CHECK(xu[1] == 30);
    Eigen::VectorXd xc = u.complement().gather(x);
    Eigen::VectorXd back = u.assemble(xu, xc);
    CHECK(back.isApprox(x));
}

TEST_CASE("proper subset enumeration") {
    auto subs = proper_subsets(3);
    CHECK(subs.size() == 6);
    for (const auto& s : subs) CHECK(s.proper());
    // ordered by mask
    for (size_t i = 1; i < subs.size(); ++i) CHECK(subs[i - 1].mask() < subs[i].mask());
}
