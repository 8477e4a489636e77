#include "evframes/image.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "evframes/error.hpp"

namespace evframes {

std::string encode_pnm(const Image& img) {
    if (img.width == 0 || img.height == 0) {
        throw Error(ErrorKind::invalid_geometry, "cannot encode a zero-sized image");
    }
    if (img.channels != 1 && img.channels != 3) {
        throw Error(ErrorKind::invalid_geometry, "PNM supports 1 or 3 channels, got " + std::to_string(img.channels));
    }
    if (img.data.size() != std::size_t{img.width} * img.height * img.channels) {
        throw Error(ErrorKind::invalid_geometry, "pixel buffer does not match image dimensions");
    }
    std::string out = (img.channels == 1 ? "P5\n" : "P6\n") + std::to_string(img.width) + " " +
                      std::to_string(img.height) + "\n255\n";
    out.append(img.data.begin(), img.data.end());
    return out;
}

Image decode_pnm(const std::string& bytes) {
    std::istringstream in(bytes);
    std::string magic;
    std::uint32_t w = 0;
    std::uint32_t h = 0;
    int maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (!in || (magic != "P5" && magic != "P6") || maxval != 255) {
        throw Error(ErrorKind::parse_error, "not an 8-bit binary PGM/PPM");
    }
    in.get();
    Image img(w, h, magic == "P5" ? 1 : 3);
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (static_cast<std::size_t>(in.gcount()) != img.data.size()) {
        throw Error(ErrorKind::truncated_file, "PNM payload shorter than header declares");
    }
    return img;
}

void export_image(const Image& img, const std::filesystem::path& path) {
    const std::string bytes = encode_pnm(img);
    std::ofstream out(path, std::ios::binary);
    if (!out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
        throw Error(ErrorKind::io_error, "cannot write " + path.string());
    }
}

Image import_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io_error, "cannot open " + path.string());
    }
    return decode_pnm(std::string(std::istreambuf_iterator<char>(in), {}));
}

}  // namespace evframes
