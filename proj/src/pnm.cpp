#include "focusnet/pnm.hpp"

#include <cctype>
#include <fstream>

#include "focusnet/errors.hpp"

namespace focusnet {

namespace {

// Next whitespace-separated token, skipping '#' comments to end of line.
std::string next_token(std::istream& is, const std::string& path) {
    std::string tok;
    int c;
    while ((c = is.get()) != EOF) {
        if (c == '#') {
            while ((c = is.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    if (tok.empty()) throw DataError("unexpected end of PNM header in " + path);
    return tok;
}

int parse_int(const std::string& tok, const std::string& what, const std::string& path) {
    try {
        return std::stoi(tok);
    } catch (const std::exception&) {
        throw DataError("bad " + what + " '" + tok + "' in " + path);
    }
}

}  // namespace

PnmImage read_pnm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open image: " + path);

    const std::string magic = next_token(is, path);
    PnmImage img;
    if (magic == "P5") {
        img.channels = 1;
    } else if (magic == "P6") {
        img.channels = 3;
    } else {
        throw DataError("unsupported PNM magic '" + magic + "' in " + path +
                        " (only binary P5/P6 are supported)");
    }
    img.width = parse_int(next_token(is, path), "width", path);
    img.height = parse_int(next_token(is, path), "height", path);
    const int maxval = parse_int(next_token(is, path), "maxval", path);
    if (img.width <= 0 || img.height <= 0) throw DataError("bad dimensions in " + path);
    if (maxval != 255) {
        throw DataError("unsupported maxval " + std::to_string(maxval) + " in " + path +
                        " (8-bit only)");
    }
    // The header's closing whitespace byte was consumed by next_token.
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height * img.channels;
    img.pixels.resize(n);
    is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(n));
    if (is.gcount() != static_cast<std::streamsize>(n)) {
        throw DataError("truncated pixel data in " + path);
    }
    return img;
}

void write_pnm(const PnmImage& img, const std::string& path) {
    if (img.channels != 1 && img.channels != 3) {
        throw ParamError("write_pnm supports 1 or 3 channels");
    }
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height * img.channels;
    if (img.pixels.size() != n) throw ShapeError("write_pnm pixel buffer size mismatch");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open image for writing: " + path);
    os << (img.channels == 1 ? "P5" : "P6") << "\n"
       << img.width << " " << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(n));
    if (!os) throw DataError("write failure on image: " + path);
}

}  // namespace focusnet
