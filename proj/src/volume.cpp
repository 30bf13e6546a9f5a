#include "tpdm/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "json.hpp"

#include "tpdm/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "TPDMVOL1 I/O assumes a little-endian host");

namespace tpdm {

namespace {

constexpr char kMagic[8] = {'T', 'P', 'D', 'M', 'V', 'O', 'L', '1'};

void write_header(std::ofstream& out, const nlohmann::json& header) {
    const std::string text = header.dump();
    const std::uint32_t len = static_cast<std::uint32_t>(text.size());
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

void write_f32_payload(std::ofstream& out, const std::vector<double>& values) {
    std::vector<float> buf(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        buf[i] = static_cast<float>(values[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

// Reads and validates magic + header; returns (shape, dtype).
std::pair<std::array<std::int64_t, 3>, std::string>
read_header(std::ifstream& in, const std::filesystem::path& path) {
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw corrupt_file_error(path.string() + ": not a TPDMVOL1 file");

    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || len == 0 || len > (1u << 20))
        throw corrupt_file_error(path.string() +
                                 ": implausible header length");

    std::string text(len, '\0');
    in.read(text.data(), len);
    if (!in)
        throw corrupt_file_error(path.string() + ": truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw corrupt_file_error(path.string() + ": bad header JSON (" +
                                 e.what() + ")");
    }
    if (!header.is_object() || !header.contains("shape") ||
        !header.contains("dtype") || !header["shape"].is_array() ||
        header["shape"].size() != 3 || !header["dtype"].is_string())
        throw corrupt_file_error(path.string() + ": malformed header");

    std::array<std::int64_t, 3> shape{};
    for (int i = 0; i < 3; ++i) {
        if (!header["shape"][i].is_number_integer())
            throw corrupt_file_error(path.string() + ": non-integer shape");
        shape[i] = header["shape"][i].get<std::int64_t>();
        if (shape[i] <= 0)
            throw corrupt_file_error(path.string() +
                                     ": non-positive shape extent");
    }
    return {shape, header["dtype"].get<std::string>()};
}

// Reads exactly `count` f32 values and requires the file to end there.
std::vector<double> read_f32_payload(std::ifstream& in,
                                     const std::filesystem::path& path,
                                     std::size_t count) {
    std::vector<float> buf(count);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != count * sizeof(float))
        throw corrupt_file_error(path.string() + ": truncated payload");
    in.peek();
    if (!in.eof())
        throw corrupt_file_error(path.string() +
                                 ": trailing bytes after payload");
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i)
        values[i] = static_cast<double>(buf[i]);
    return values;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw io_error("cannot open for writing: " + path.string());
    return out;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw io_error("cannot open for reading: " + path.string());
    return in;
}

} // namespace

Volume3D::Volume3D(int a, int b, int c, double fill)
    : d1(a), d2(b), d3(c),
      data(static_cast<std::size_t>(a) * b * c, fill) {
    if (a <= 0 || b <= 0 || c <= 0)
        throw dim_error("volume extents must be positive");
}

Slice2D slice_extract(const Volume3D& vol, SliceAxis axis, int index) {
    const int bound = vol.extent(axis);
    if (index < 0 || index >= bound)
        throw std::out_of_range(
            std::string("slice index ") + std::to_string(index) + " out of range for " +
            (axis == SliceAxis::Axis3 ? "Axis3" : "Axis1") + " extent " +
            std::to_string(bound));
    if (axis == SliceAxis::Axis3) {
        Slice2D s(vol.d1, vol.d2);
        for (int a = 0; a < vol.d1; ++a)
            for (int b = 0; b < vol.d2; ++b)
                s.at(a, b) = vol.at(a, b, index);
        return s;
    }
    Slice2D s(vol.d2, vol.d3);
    for (int b = 0; b < vol.d2; ++b)
        for (int c = 0; c < vol.d3; ++c)
            s.at(b, c) = vol.at(index, b, c);
    return s;
}

Volume3D& slice_insert(Volume3D& vol, SliceAxis axis, int index,
                       const Slice2D& s) {
    const int bound = vol.extent(axis);
    if (index < 0 || index >= bound)
        throw std::out_of_range(
            std::string("slice index ") + std::to_string(index) + " out of range for " +
            (axis == SliceAxis::Axis3 ? "Axis3" : "Axis1") + " extent " +
            std::to_string(bound));
    const int want_h = axis == SliceAxis::Axis3 ? vol.d1 : vol.d2;
    const int want_w = axis == SliceAxis::Axis3 ? vol.d2 : vol.d3;
    if (s.h != want_h || s.w != want_w)
        throw dim_error("slice shape (" + std::to_string(s.h) + "," +
                        std::to_string(s.w) + ") does not match plane shape (" +
                        std::to_string(want_h) + "," + std::to_string(want_w) +
                        ")");
    if (axis == SliceAxis::Axis3) {
        for (int a = 0; a < vol.d1; ++a)
            for (int b = 0; b < vol.d2; ++b)
                vol.at(a, b, index) = s.at(a, b);
    } else {
        for (int b = 0; b < vol.d2; ++b)
            for (int c = 0; c < vol.d3; ++c)
                vol.at(index, b, c) = s.at(b, c);
    }
    return vol;
}

Volume3D normalize(const Volume3D& vol) {
    if (vol.data.empty())
        throw dim_error("cannot normalize an empty volume");
    const auto [lo_it, hi_it] =
        std::minmax_element(vol.data.begin(), vol.data.end());
    const double lo = *lo_it, hi = *hi_it;
    Volume3D out(vol.d1, vol.d2, vol.d3);
    if (hi == lo)
        return out; // constant volume -> all zeros
    const double scale = 1.0 / (hi - lo);
    for (std::size_t i = 0; i < vol.data.size(); ++i)
        out.data[i] = (vol.data[i] - lo) * scale;
    return out;
}

void save_volume(const Volume3D& vol, const std::filesystem::path& path) {
    std::ofstream out = open_for_write(path);
    write_header(out, nlohmann::json{{"shape", {vol.d1, vol.d2, vol.d3}},
                                     {"dtype", "f32"}});
    write_f32_payload(out, vol.data);
    if (!out)
        throw io_error("short write: " + path.string());
}

Volume3D load_volume(const std::filesystem::path& path) {
    std::ifstream in = open_for_read(path);
    const auto [shape, dtype] = read_header(in, path);
    if (dtype != "f32")
        throw corrupt_file_error(path.string() + ": expected dtype f32, got " +
                                 dtype);
    Volume3D vol(static_cast<int>(shape[0]), static_cast<int>(shape[1]),
                 static_cast<int>(shape[2]));
    vol.data = read_f32_payload(in, path, vol.size());
    return vol;
}

MeasurementStack::MeasurementStack(int h_, int w_, int n_,
                                   bool complex_valued_)
    : h(h_), w(w_), n(n_), complex_valued(complex_valued_),
      re(static_cast<std::size_t>(h_) * w_ * n_, 0.0),
      im(complex_valued_ ? static_cast<std::size_t>(h_) * w_ * n_ : 0, 0.0) {
    if (h_ <= 0 || w_ <= 0 || n_ <= 0)
        throw dim_error("measurement stack extents must be positive");
}

void save_stack(const MeasurementStack& stack,
                const std::filesystem::path& path) {
    std::ofstream out = open_for_write(path);
    write_header(out,
                 nlohmann::json{{"shape", {stack.h, stack.w, stack.n}},
                                {"dtype", stack.complex_valued ? "c64" : "f32"}});
    if (stack.complex_valued) {
        std::vector<double> interleaved(stack.re.size() * 2);
        for (std::size_t i = 0; i < stack.re.size(); ++i) {
            interleaved[2 * i] = stack.re[i];
            interleaved[2 * i + 1] = stack.im[i];
        }
        write_f32_payload(out, interleaved);
    } else {
        write_f32_payload(out, stack.re);
    }
    if (!out)
        throw io_error("short write: " + path.string());
}

MeasurementStack load_stack(const std::filesystem::path& path) {
    std::ifstream in = open_for_read(path);
    const auto [shape, dtype] = read_header(in, path);
    if (dtype != "f32" && dtype != "c64")
        throw corrupt_file_error(path.string() + ": unknown dtype " + dtype);
    MeasurementStack stack(static_cast<int>(shape[0]),
                           static_cast<int>(shape[1]),
                           static_cast<int>(shape[2]), dtype == "c64");
    const std::size_t count = stack.re.size();
    if (stack.complex_valued) {
        const std::vector<double> interleaved =
            read_f32_payload(in, path, count * 2);
        for (std::size_t i = 0; i < count; ++i) {
            stack.re[i] = interleaved[2 * i];
            stack.im[i] = interleaved[2 * i + 1];
        }
    } else {
        stack.re = read_f32_payload(in, path, count);
    }
    return stack;
}

void save_pgm(const Slice2D& s, const std::filesystem::path& path) {
    std::ofstream out = open_for_write(path);
    out << "P5\n" << s.w << " " << s.h << "\n255\n";
    std::vector<unsigned char> bytes(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double v = std::clamp(s.data[i], 0.0, 1.0);
        bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw io_error("short write: " + path.string());
}

} // namespace tpdm
