#include "focusnet/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace focusnet {

namespace {

constexpr char kMagic[4] = {'F', 'N', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(os, bits);
}

void write_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u32(os, static_cast<std::uint32_t>(bits & 0xffffffffu));
    write_u32(os, static_cast<std::uint32_t>(bits >> 32));
}

std::uint32_t read_u32(std::istream& is, const std::string& what) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (is.gcount() != 4) {
        throw CheckpointError(CheckpointError::Kind::Truncated,
                              "checkpoint truncated while reading " + what);
    }
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

float read_f32(std::istream& is, const std::string& what) {
    const std::uint32_t bits = read_u32(is, what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

double read_f64(std::istream& is, const std::string& what) {
    const std::uint64_t lo = read_u32(is, what);
    const std::uint64_t hi = read_u32(is, what);
    const std::uint64_t bits = lo | (hi << 32);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void write_tensor(std::ostream& os, const std::string& name, const TensorF& t) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) write_u32(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(float)));
}

std::string join_widths(const std::vector<int>& ws) {
    std::ostringstream os;
    for (std::size_t i = 0; i < ws.size(); ++i) {
        if (i) os << ",";
        os << ws[i];
    }
    return os.str();
}

std::vector<int> parse_widths(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

}  // namespace

std::string arch_config_to_text(const ArchConfig& cfg) {
    std::ostringstream os;
    os << "in_channels = " << cfg.in_channels << "\n";
    os << "encoder_widths = " << join_widths(cfg.encoder_widths) << "\n";
    os << "bottleneck_width = " << cfg.bottleneck_width << "\n";
    os << "decoder_widths = " << join_widths(cfg.decoder_widths) << "\n";
    os << "se_ratio = " << cfg.se_ratio << "\n";
    os << "dropout_rate = " << cfg.dropout_rate << "\n";
    os << "input_size = " << cfg.input_size << "\n";
    return os.str();
}

ArchConfig arch_config_from_text(const std::string& text) {
    ArchConfig cfg;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t\r");
            return (a == std::string::npos) ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "in_channels")
                cfg.in_channels = std::stoi(value);
            else if (key == "encoder_widths")
                cfg.encoder_widths = parse_widths(value);
            else if (key == "bottleneck_width")
                cfg.bottleneck_width = std::stoi(value);
            else if (key == "decoder_widths")
                cfg.decoder_widths = parse_widths(value);
            else if (key == "se_ratio")
                cfg.se_ratio = std::stoi(value);
            else if (key == "dropout_rate")
                cfg.dropout_rate = std::stod(value);
            else if (key == "input_size")
                cfg.input_size = std::stoi(value);
            else
                throw CheckpointError(CheckpointError::Kind::Malformed,
                                      "unknown architecture key: " + key);
        } catch (const std::invalid_argument&) {
            throw CheckpointError(CheckpointError::Kind::Malformed,
                                  "bad value for architecture key " + key + ": " + value);
        }
    }
    return cfg;
}

void save_checkpoint(const CheckpointRecord& rec, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 4);
    write_u32(os, kVersion);

    const std::string cfg_text = arch_config_to_text(rec.model.cfg);
    write_u32(os, static_cast<std::uint32_t>(cfg_text.size()));
    os.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));

    if (rec.norm_mean.size() != rec.norm_std.size()) {
        throw ParamError("checkpoint normalization mean/std size mismatch");
    }
    write_u32(os, static_cast<std::uint32_t>(rec.norm_mean.size()));
    for (std::size_t i = 0; i < rec.norm_mean.size(); ++i) {
        write_f32(os, rec.norm_mean[i]);
        write_f32(os, rec.norm_std[i]);
    }

    write_f64(os, rec.best_val_loss);
    write_u32(os, static_cast<std::uint32_t>(rec.epoch));

    std::uint32_t count = static_cast<std::uint32_t>(rec.model.params.size());
    count += static_cast<std::uint32_t>(2 * rec.model.bn.size());
    write_u32(os, count);
    for (const auto& [name, tensor] : rec.model.params) write_tensor(os, name, tensor);
    for (const auto& [name, state] : rec.model.bn) {
        write_tensor(os, name + "/running_mean", state.running_mean);
        write_tensor(os, name + "/running_var", state.running_var);
    }
    if (!os) throw DataError("write failure on checkpoint: " + path);
}

CheckpointRecord load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint: " + path);

    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
        throw CheckpointError(CheckpointError::Kind::BadMagic,
                              "not a checkpoint file (bad magic): " + path);
    }
    const std::uint32_t version = read_u32(is, "version");
    if (version != kVersion) {
        throw CheckpointError(CheckpointError::Kind::BadVersion,
                              "unsupported checkpoint version " + std::to_string(version));
    }

    CheckpointRecord rec;
    const std::uint32_t cfg_len = read_u32(is, "config length");
    std::string cfg_text(cfg_len, '\0');
    is.read(cfg_text.data(), cfg_len);
    if (is.gcount() != static_cast<std::streamsize>(cfg_len)) {
        throw CheckpointError(CheckpointError::Kind::Truncated,
                              "checkpoint truncated inside config block");
    }
    rec.model.cfg = arch_config_from_text(cfg_text);
    try {
        rec.model.cfg.validate();
    } catch (const ConfigError& e) {
        throw CheckpointError(CheckpointError::Kind::Malformed,
                              std::string("invalid architecture in checkpoint: ") + e.what());
    }

    const std::uint32_t stat_channels = read_u32(is, "normalization stats");
    for (std::uint32_t i = 0; i < stat_channels; ++i) {
        rec.norm_mean.push_back(read_f32(is, "normalization mean"));
        rec.norm_std.push_back(read_f32(is, "normalization std"));
    }

    rec.best_val_loss = read_f64(is, "best validation loss");
    rec.epoch = static_cast<int>(read_u32(is, "epoch"));

    const std::uint32_t count = read_u32(is, "tensor count");
    std::map<std::string, TensorF> tensors;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = read_u32(is, "tensor name length");
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (is.gcount() != static_cast<std::streamsize>(name_len)) {
            throw CheckpointError(CheckpointError::Kind::Truncated,
                                  "checkpoint truncated inside a tensor name");
        }
        const std::uint32_t rank = read_u32(is, "rank of " + name);
        Shape shape;
        for (std::uint32_t d = 0; d < rank; ++d) {
            shape.push_back(static_cast<int>(read_u32(is, "dims of " + name)));
        }
        TensorF t(shape);
        is.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
        if (is.gcount() != static_cast<std::streamsize>(t.data.size() * sizeof(float))) {
            throw CheckpointError(CheckpointError::Kind::Truncated,
                                  "checkpoint truncated inside tensor " + name);
        }
        tensors.emplace(name, std::move(t));
    }

    // Split the flat tensor list into parameters and running stats.
    auto ends_with = [](const std::string& s, const std::string& suffix) {
        return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    for (auto& [name, tensor] : tensors) {
        if (ends_with(name, "/running_mean")) {
            rec.model.bn[name.substr(0, name.size() - 13)].running_mean = std::move(tensor);
        } else if (ends_with(name, "/running_var")) {
            rec.model.bn[name.substr(0, name.size() - 12)].running_var = std::move(tensor);
        } else {
            rec.model.params.emplace(name, std::move(tensor));
        }
    }

    // Sanity-check against the declared layout.
    const ModelDecl decl = declare_model(rec.model.cfg);
    if (decl.layers.size() != rec.model.params.size()) {
        throw CheckpointError(CheckpointError::Kind::Malformed,
                              "checkpoint parameter list does not match its architecture");
    }
    for (const auto& layer : decl.layers) {
        auto it = rec.model.params.find(layer.name);
        if (it == rec.model.params.end() || it->second.shape != layer.shape) {
            throw CheckpointError(CheckpointError::Kind::Malformed,
                                  "checkpoint missing or mis-shaped tensor " + layer.name);
        }
    }
    for (const auto& [name, channels] : decl.bn_layers) {
        auto it = rec.model.bn.find(name);
        if (it == rec.model.bn.end() || it->second.running_mean.size() != channels ||
            it->second.running_var.size() != channels) {
            throw CheckpointError(CheckpointError::Kind::Malformed,
                                  "checkpoint missing running stats for " + name);
        }
    }
    return rec;
}

}  // namespace focusnet
