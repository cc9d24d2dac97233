#include "adlab/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "adlab/config.hpp"
#include "adlab/errors.hpp"

static_assert(std::endian::native == std::endian::little, "binary containers assume little-endian");

namespace adlab {

namespace {

constexpr char kDatasetMagic[8] = {'A', 'D', 'L', 'A', 'B', 'D', 'S', '1'};
constexpr char kWeightsMagic[8] = {'A', 'D', 'L', 'A', 'B', 'W', 'T', '1'};
constexpr char kCoeffMagic[8] = {'A', 'D', 'L', 'A', 'B', 'R', 'H', '1'};

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw std::runtime_error("truncated binary container");
    return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    return os;
}

std::ifstream open_in(const std::filesystem::path& path, const char (&magic)[8]) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path.string() + "'");
    char buf[8];
    is.read(buf, 8);
    if (!is || std::memcmp(buf, magic, 8) != 0)
        throw std::runtime_error("'" + path.string() + "' is not a " + std::string(magic, 8) + " container");
    return is;
}

// Row-major dump of a column-major Eigen matrix.
void put_matrix(std::ostream& os, const Eigen::MatrixXd& M) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R = M;
    os.write(reinterpret_cast<const char*>(R.data()), static_cast<std::streamsize>(R.size() * sizeof(double)));
}

Eigen::MatrixXd get_matrix(std::istream& is, Eigen::Index rows, Eigen::Index cols) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R(rows, cols);
    is.read(reinterpret_cast<char*>(R.data()), static_cast<std::streamsize>(R.size() * sizeof(double)));
    if (!is) throw std::runtime_error("truncated binary container");
    return R;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    nlohmann::json header;
    header["format"] = "adlab-dataset";
    header["version"] = 1;
    header["tool_version"] = tool_version();
    header["config"] = to_json(dataset.config);
    std::vector<int> labels, signal, learnable;
    for (const auto& s : dataset.samples) {
        labels.push_back(s.label);
        signal.push_back(s.signal_index);
        learnable.push_back(s.learnable ? 1 : 0);
    }
    header["labels"] = labels;
    header["signal_index"] = signal;
    header["learnable"] = learnable;
    const std::string text = header.dump();

    auto os = open_out(path);
    os.write(kDatasetMagic, 8);
    put<std::uint64_t>(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& s : dataset.samples) put_matrix(os, s.patches);
    if (!os) throw std::runtime_error("failed writing '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& path) {
    auto is = open_in(path, kDatasetMagic);
    const auto len = get<std::uint64_t>(is);
    std::string text(len, '\0');
    is.read(text.data(), static_cast<std::streamsize>(len));
    if (!is) throw std::runtime_error("truncated dataset header");
    const auto header = nlohmann::json::parse(text);
    Dataset ds;
    ds.config = synthetic_config_from_json(header.at("config"));
    const auto labels = header.at("labels").get<std::vector<int>>();
    const auto signal = header.at("signal_index").get<std::vector<int>>();
    const auto learnable = header.at("learnable").get<std::vector<int>>();
    if (static_cast<int>(labels.size()) != ds.config.N || signal.size() != labels.size() ||
        learnable.size() != labels.size())
        throw ShapeError("dataset header disagrees with its config");
    for (int i = 0; i < ds.config.N; ++i) {
        Sample s;
        s.label = labels[i];
        s.signal_index = signal[i];
        s.learnable = learnable[i] != 0;
        s.patches = get_matrix(is, ds.config.P, ds.config.d);
        (s.learnable ? ds.learnable_indices : ds.unlearnable_indices).push_back(i);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

void save_weights(const StudentWeights& weights, const std::filesystem::path& path) {
    auto os = open_out(path);
    os.write(kWeightsMagic, 8);
    put<std::int64_t>(os, weights.m());
    put<std::int64_t>(os, weights.d());
    put<double>(os, weights.sigma_0);
    put_matrix(os, weights.w);
    if (!os) throw std::runtime_error("failed writing '" + path.string() + "'");
}

StudentWeights load_weights(const std::filesystem::path& path) {
    auto is = open_in(path, kWeightsMagic);
    const auto m = get<std::int64_t>(is);
    const auto d = get<std::int64_t>(is);
    StudentWeights w;
    w.sigma_0 = get<double>(is);
    if (m < 1 || d < 1) throw ShapeError("weights checkpoint has invalid shape");
    w.w = get_matrix(is, m, d);
    return w;
}

void save_coefficients(const NoiseCoefficients& coeffs, const std::filesystem::path& path) {
    auto os = open_out(path);
    os.write(kCoeffMagic, 8);
    put<std::int64_t>(os, coeffs.N);
    put<std::int64_t>(os, coeffs.P);
    put<std::int64_t>(os, coeffs.m);
    put<std::uint8_t>(os, coeffs.is_signed ? 1 : 0);
    put_matrix(os, coeffs.rho);
    if (!os) throw std::runtime_error("failed writing '" + path.string() + "'");
}

NoiseCoefficients load_coefficients(const std::filesystem::path& path) {
    auto is = open_in(path, kCoeffMagic);
    NoiseCoefficients c;
    c.N = static_cast<int>(get<std::int64_t>(is));
    c.P = static_cast<int>(get<std::int64_t>(is));
    c.m = static_cast<int>(get<std::int64_t>(is));
    c.is_signed = get<std::uint8_t>(is) != 0;
    c.rho = get_matrix(is, static_cast<Eigen::Index>(c.N) * c.P, c.m);
    return c;
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    os << contents;
    if (!os) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace adlab
