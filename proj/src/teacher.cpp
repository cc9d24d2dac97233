#include "adlab/teacher.hpp"

#include <cmath>

#include "adlab/errors.hpp"

namespace adlab {

std::string to_string(TeacherKind kind) {
    switch (kind) {
        case TeacherKind::Good: return "good";
        case TeacherKind::Bad: return "bad";
        case TeacherKind::CustomMargin: return "custom";
    }
    return "unknown";
}

TeacherKind teacher_kind_from_string(const std::string& name) {
    if (name == "good") return TeacherKind::Good;
    if (name == "bad") return TeacherKind::Bad;
    if (name == "custom") return TeacherKind::CustomMargin;
    throw ConfigError("unknown teacher kind '" + name + "' (expected good, bad or custom)");
}

void TeacherSpec::validate() const {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("teacher.gamma must be >= 0");
    if (!std::isfinite(custom_unlearnable_margin))
        throw ConfigError("teacher.custom_unlearnable_margin must be finite");
}

double TeacherSpec::unlearnable_margin() const {
    switch (kind) {
        case TeacherKind::Good: return 0.0;
        case TeacherKind::Bad: return gamma;
        case TeacherKind::CustomMargin: return custom_unlearnable_margin;
    }
    return 0.0;
}

double teacher_margin(const TeacherSpec& spec, const Sample& sample) {
    return sample.learnable ? spec.gamma : spec.unlearnable_margin();
}

SoftLabel soft_label(const TeacherSpec& spec, const Sample& sample) {
    const double margin = teacher_margin(spec, sample);
    return {sigmoid(margin), sigmoid(-margin)};
}

double binary_entropy_of_margin(double margin) {
    // -p ln p - (1-p) ln(1-p) with ln sigma(z) = -softplus(-z).
    const double a = std::abs(margin);
    return sigmoid(a) * softplus(-a) + sigmoid(-a) * softplus(a);
}

double teacher_entropy(const TeacherSpec& spec, const Sample& sample) {
    return binary_entropy_of_margin(teacher_margin(spec, sample));
}

}  // namespace adlab
