#pragma once

// Single-file checkpoint: JSON header (format version, config, variant,
// epoch, optimizer step, RNG states) followed by named tensors as shape plus
// row-major 64-bit floats, then the Adam moment tensors in the same order.

#include "bag/model.hpp"
#include "bag/trainer.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace bag {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'B', 'A', 'G', 'C', 'K', 'P', 'T', '\0'};

struct Checkpoint {
    TrainConfig config;
    Variant variant = Variant::FULL;
    int epoch = 0;
    long adam_step = 0;
    std::string shuffle_rng_state;
    std::string dropout_rng_state;
    std::vector<std::string> names;
    std::vector<Mat> tensors;
    std::vector<Mat> adam_m;
    std::vector<Mat> adam_v;
};

namespace detail {

inline void write_u64(std::ostream& out, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, 8);
}

inline std::uint64_t read_u64(std::istream& in) {
    char buf[8];
    in.read(buf, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return v;
}

inline void write_mat(std::ostream& out, const Mat& m) {
    write_u64(out, static_cast<std::uint64_t>(m.rows()));
    write_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            double v = m(r, c);
            out.write(reinterpret_cast<const char*>(&v), sizeof(double));
        }
}

inline Mat read_mat(std::istream& in) {
    auto rows = static_cast<Eigen::Index>(read_u64(in));
    auto cols = static_cast<Eigen::Index>(read_u64(in));
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            double v;
            in.read(reinterpret_cast<char*>(&v), sizeof(double));
            m(r, c) = v;
        }
    return m;
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
    std::string s(static_cast<std::size_t>(read_u64(in)), '\0');
    in.read(s.data(), static_cast<std::streamsize>(s.size()));
    return s;
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::write_u64(out, kCheckpointVersion);
    nlohmann::json header = {{"format_version", kCheckpointVersion},
                             {"config", ck.config},
                             {"variant", variant_name(ck.variant)},
                             {"epoch", ck.epoch},
                             {"adam_step", ck.adam_step},
                             {"shuffle_rng", ck.shuffle_rng_state},
                             {"dropout_rng", ck.dropout_rng_state}};
    detail::write_string(out, header.dump());
    detail::write_u64(out, ck.names.size());
    for (std::size_t i = 0; i < ck.names.size(); ++i) {
        detail::write_string(out, ck.names[i]);
        detail::write_mat(out, ck.tensors[i]);
    }
    for (const Mat& m : ck.adam_m) detail::write_mat(out, m);
    for (const Mat& m : ck.adam_v) detail::write_mat(out, m);
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 7) != std::string(kCheckpointMagic, 7))
        throw std::runtime_error("not a checkpoint file: " + path);
    std::uint64_t version = detail::read_u64(in);
    if (version != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version in " + path);
    nlohmann::json header = nlohmann::json::parse(detail::read_string(in));
    Checkpoint ck;
    header.at("config").get_to(ck.config);
    ck.variant = parse_variant(header.at("variant").get<std::string>());
    ck.epoch = header.at("epoch").get<int>();
    ck.adam_step = header.at("adam_step").get<long>();
    ck.shuffle_rng_state = header.at("shuffle_rng").get<std::string>();
    ck.dropout_rng_state = header.at("dropout_rng").get<std::string>();
    std::uint64_t count = detail::read_u64(in);
    for (std::uint64_t i = 0; i < count; ++i) {
        ck.names.push_back(detail::read_string(in));
        ck.tensors.push_back(detail::read_mat(in));
    }
    for (std::uint64_t i = 0; i < count; ++i) ck.adam_m.push_back(detail::read_mat(in));
    for (std::uint64_t i = 0; i < count; ++i) ck.adam_v.push_back(detail::read_mat(in));
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    return ck;
}

inline Checkpoint make_checkpoint(const Model& model, const AdamState& adam,
                                  int epoch, const std::mt19937_64& shuffle_rng,
                                  const std::mt19937_64& dropout_rng) {
    Checkpoint ck;
    ck.config = model.config();
    ck.variant = model.variant();
    ck.epoch = epoch;
    ck.adam_step = adam.step;
    std::ostringstream s1, s2;
    s1 << shuffle_rng;
    s2 << dropout_rng;
    ck.shuffle_rng_state = s1.str();
    ck.dropout_rng_state = s2.str();
    ck.names = model.params().names();
    ck.tensors = model.params().tensors();
    ck.adam_m = adam.m;
    ck.adam_v = adam.v;
    return ck;
}

// Rebuilds the model and optimizer; throws if the stored tensors do not
// match the architecture implied by config and variant.
inline void restore_checkpoint(const Checkpoint& ck, Model& model, AdamState& adam,
                               std::mt19937_64* shuffle_rng = nullptr,
                               std::mt19937_64* dropout_rng = nullptr) {
    if (ck.names != model.params().names())
        throw std::runtime_error("checkpoint does not match model architecture");
    for (std::size_t i = 0; i < ck.names.size(); ++i) {
        if (ck.tensors[i].rows() != model.params().tensors()[i].rows() ||
            ck.tensors[i].cols() != model.params().tensors()[i].cols())
            throw std::runtime_error("checkpoint tensor shape mismatch: " + ck.names[i]);
        model.params().tensors()[i] = ck.tensors[i];
    }
    adam.m = ck.adam_m;
    adam.v = ck.adam_v;
    adam.step = ck.adam_step;
    if (shuffle_rng) {
        std::istringstream s(ck.shuffle_rng_state);
        s >> *shuffle_rng;
    }
    if (dropout_rng) {
        std::istringstream s(ck.dropout_rng_state);
        s >> *dropout_rng;
    }
}

inline Model model_from_checkpoint(const Checkpoint& ck, AdamState* adam_out = nullptr) {
    Model model(ck.config, ck.variant);
    AdamState adam(model.params());
    restore_checkpoint(ck, model, adam);
    if (adam_out) *adam_out = adam;
    return model;
}

}  // namespace bag
