#include <gtest/gtest.h>

#include <cmath>

#include "adlab/datagen.hpp"
#include "adlab/errors.hpp"
#include "adlab/teacher.hpp"

using namespace adlab;

namespace {

Sample sample(bool learnable, int label = 1) {
    Sample s;
    s.patches = Eigen::MatrixXd::Zero(2, 5);
    s.label = label;
    s.learnable = learnable;
    s.patches(0, learnable ? 0 : 4) = 5.0 * label;
    return s;
}

TeacherSpec spec(TeacherKind k, double custom = 0.0) {
    TeacherSpec t;
    t.kind = k;
    t.custom_unlearnable_margin = custom;
    return t;
}

double naive_entropy(double p) { return -p * std::log(p) - (1 - p) * std::log(1 - p); }

}  // namespace

TEST(Teacher, MarginTable) {
    EXPECT_EQ(teacher_margin(spec(TeacherKind::Good), sample(false)), 0.0);
    EXPECT_EQ(teacher_margin(spec(TeacherKind::Good), sample(true)), 10.0);
    EXPECT_EQ(teacher_margin(spec(TeacherKind::Bad), sample(false)), 10.0);
    EXPECT_EQ(teacher_margin(spec(TeacherKind::Bad), sample(true)), 10.0);
    EXPECT_EQ(teacher_margin(spec(TeacherKind::CustomMargin, 2.5), sample(false)), 2.5);
    EXPECT_EQ(teacher_margin(spec(TeacherKind::CustomMargin, 2.5), sample(true, -1)), 10.0);
}

TEST(Teacher, CustomZeroEqualsGood) {
    const Dataset ds = generate_dataset([] {
        SyntheticConfig c;
        c.p_un = 0.3;
        return c;
    }());
    for (const auto& s : ds.samples) {
        EXPECT_EQ(teacher_margin(spec(TeacherKind::CustomMargin, 0.0), s), teacher_margin(spec(TeacherKind::Good), s));
        EXPECT_EQ(teacher_entropy(spec(TeacherKind::CustomMargin, 0.0), s), teacher_entropy(spec(TeacherKind::Good), s));
    }
}

TEST(Teacher, GoodAndBadAgreeOnLearnable) {
    for (int y : {1, -1})
        EXPECT_EQ(soft_label(spec(TeacherKind::Good), sample(true, y)).p_plus,
                  soft_label(spec(TeacherKind::Bad), sample(true, y)).p_plus);
}

TEST(Teacher, IndependentOfNoise) {
    Sample a = sample(false), b = sample(false);
    b.patches.row(1).setConstant(3.0);
    for (auto k : {TeacherKind::Good, TeacherKind::Bad, TeacherKind::CustomMargin}) {
        EXPECT_EQ(teacher_margin(spec(k, 1.5), a), teacher_margin(spec(k, 1.5), b));
        EXPECT_EQ(teacher_entropy(spec(k, 1.5), a), teacher_entropy(spec(k, 1.5), b));
    }
}

TEST(Teacher, SoftLabels) {
    const SoftLabel half = soft_label(spec(TeacherKind::Good), sample(false));
    EXPECT_EQ(half.p_plus, 0.5);
    EXPECT_EQ(half.p_minus, 0.5);
    const SoftLabel ten = soft_label(spec(TeacherKind::Bad), sample(false));
    EXPECT_NEAR(ten.p_plus, 1.0 / (1.0 + std::exp(-10.0)), 1e-16);
    EXPECT_NEAR(ten.p_plus, 0.9999546, 1e-7);
    EXPECT_NEAR(ten.p_plus + ten.p_minus, 1.0, 1e-16);
    double prev = 0.0;
    for (double g = 0.0; g <= 30.0; g += 0.5) {
        TeacherSpec t = spec(TeacherKind::Bad);
        t.gamma = g;
        const double p = soft_label(t, sample(true)).p_plus;
        EXPECT_GE(p, prev);
        EXPECT_GT(p, 0.0);
        EXPECT_LE(p, 1.0);
        prev = p;
    }
}

TEST(Teacher, Entropy) {
    EXPECT_NEAR(teacher_entropy(spec(TeacherKind::Good), sample(false)), std::log(2.0), 1e-15);
    const double p = 1.0 / (1.0 + std::exp(-10.0));
    const double h10 = teacher_entropy(spec(TeacherKind::Bad), sample(false));
    EXPECT_NEAR(h10, naive_entropy(p), 1e-12);
    EXPECT_NEAR(h10, 5.0e-4, 0.05e-4);
    for (double a : {0.1, 1.0, 3.0, 7.0, 20.0}) EXPECT_DOUBLE_EQ(binary_entropy_of_margin(a), binary_entropy_of_margin(-a));
}

TEST(Teacher, EntropyStrictlyDecreasingInMagnitude) {
    double prev = binary_entropy_of_margin(0.0);
    for (double a = 0.25; a <= 30.0; a += 0.25) {
        const double h = binary_entropy_of_margin(a);
        EXPECT_LT(h, prev) << a;
        EXPECT_GT(h, 0.0);
        prev = h;
    }
    EXPECT_GT(binary_entropy_of_margin(700.0), 0.0);
}

TEST(Teacher, KindNamesAndValidation) {
    EXPECT_EQ(teacher_kind_from_string("good"), TeacherKind::Good);
    EXPECT_EQ(teacher_kind_from_string("bad"), TeacherKind::Bad);
    EXPECT_EQ(teacher_kind_from_string("custom"), TeacherKind::CustomMargin);
    EXPECT_THROW(teacher_kind_from_string("great"), ConfigError);
    for (auto k : {TeacherKind::Good, TeacherKind::Bad, TeacherKind::CustomMargin})
        EXPECT_EQ(teacher_kind_from_string(to_string(k)), k);
    TeacherSpec t;
    t.gamma = -1.0;
    EXPECT_THROW(t.validate(), ConfigError);
}
