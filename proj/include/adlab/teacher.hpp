#pragma once

#include <string>

#include "adlab/datagen.hpp"
#include "adlab/math.hpp"

namespace adlab {

enum class TeacherKind { Good, Bad, CustomMargin };

std::string to_string(TeacherKind kind);
TeacherKind teacher_kind_from_string(const std::string& name);

// Margin oracle for y * f_T(X). Teachers see only the label and which feature carries
// the signal; noise patches never enter.
struct TeacherSpec {
    TeacherKind kind = TeacherKind::Good;
    double gamma = 10.0;
    double custom_unlearnable_margin = 0.0;

    void validate() const;
    double unlearnable_margin() const;
};

struct SoftLabel {
    double p_plus = 0.5;   // mass on the true label
    double p_minus = 0.5;
};

double teacher_margin(const TeacherSpec& spec, const Sample& sample);
SoftLabel soft_label(const TeacherSpec& spec, const Sample& sample);
// Binary Shannon entropy of the soft label, in nats.
double teacher_entropy(const TeacherSpec& spec, const Sample& sample);

// Entropy of Bernoulli(sigmoid(margin)), in nats, evaluated without cancellation.
double binary_entropy_of_margin(double margin);

}  // namespace adlab
