#pragma once

// Hyperspectral cube and label raster I/O.
//
// Cubes are held band-sequential in memory (band, row, col), row-major within
// each band, as 64-bit reals regardless of the on-disk sample type.

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hsi/error.hpp"

namespace hsi {

enum class SampleType { uint8, uint16, int16, float32, float64 };
enum class ByteOrder { little, big };
enum class Interleave { bsq, bil, bip };

inline std::size_t sample_size(SampleType t) {
    switch (t) {
        case SampleType::uint8: return 1;
        case SampleType::uint16:
        case SampleType::int16: return 2;
        case SampleType::float32: return 4;
        case SampleType::float64: return 8;
    }
    return 0;
}

inline const char *to_string(SampleType t) {
    switch (t) {
        case SampleType::uint8: return "uint8";
        case SampleType::uint16: return "uint16";
        case SampleType::int16: return "int16";
        case SampleType::float32: return "float32";
        case SampleType::float64: return "float64";
    }
    return "?";
}

inline const char *to_string(Interleave i) {
    switch (i) {
        case Interleave::bsq: return "bsq";
        case Interleave::bil: return "bil";
        case Interleave::bip: return "bip";
    }
    return "?";
}

/// Raster layout descriptor read from a key=value text header.
struct CubeHeader {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t bands = 1;
    SampleType type = SampleType::uint16;
    ByteOrder byte_order = ByteOrder::little;
    Interleave interleave = Interleave::bsq;
    std::vector<std::string> band_labels;

    std::size_t sample_count() const { return rows * cols * bands; }
    std::size_t byte_count() const { return sample_count() * sample_size(type); }
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string lower(std::string s) {
    for (auto &ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
}

inline std::size_t parse_count(const std::string &key, const std::string &value) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(value, &pos);
    } catch (const std::exception &) {
        pos = 0;
    }
    if (pos == 0 || pos != value.size())
        throw Error(ErrorKind::io, "datacube", "header key '" + key + "' expects an integer, got '" + value + "'");
    return static_cast<std::size_t>(v);
}

inline std::vector<std::string> split_list(std::string value) {
    value.erase(std::remove(value.begin(), value.end(), '{'), value.end());
    value.erase(std::remove(value.begin(), value.end(), '}'), value.end());
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::vector<char> read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "datacube", "cannot open '" + path.string() + "'");
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

template <typename T>
T load_scalar(const unsigned char *p, ByteOrder order) {
    std::array<unsigned char, sizeof(T)> buf;
    std::memcpy(buf.data(), p, sizeof(T));
    const bool native_little = std::endian::native == std::endian::little;
    if ((order == ByteOrder::little) != native_little) std::reverse(buf.begin(), buf.end());
    T v;
    std::memcpy(&v, buf.data(), sizeof(T));
    return v;
}

template <typename T>
void store_scalar(unsigned char *p, T v, ByteOrder order) {
    std::array<unsigned char, sizeof(T)> buf;
    std::memcpy(buf.data(), &v, sizeof(T));
    const bool native_little = std::endian::native == std::endian::little;
    if ((order == ByteOrder::little) != native_little) std::reverse(buf.begin(), buf.end());
    std::memcpy(p, buf.data(), sizeof(T));
}

inline double decode_sample(const unsigned char *p, SampleType type, ByteOrder order) {
    switch (type) {
        case SampleType::uint8: return static_cast<double>(*p);
        case SampleType::uint16: return static_cast<double>(load_scalar<std::uint16_t>(p, order));
        case SampleType::int16: return static_cast<double>(load_scalar<std::int16_t>(p, order));
        case SampleType::float32: return static_cast<double>(load_scalar<float>(p, order));
        case SampleType::float64: return load_scalar<double>(p, order);
    }
    return 0.0;
}

inline void encode_sample(unsigned char *p, double v, SampleType type, ByteOrder order) {
    switch (type) {
        case SampleType::uint8: *p = static_cast<std::uint8_t>(v); break;
        case SampleType::uint16: store_scalar(p, static_cast<std::uint16_t>(v), order); break;
        case SampleType::int16: store_scalar(p, static_cast<std::int16_t>(v), order); break;
        case SampleType::float32: store_scalar(p, static_cast<float>(v), order); break;
        case SampleType::float64: store_scalar(p, v, order); break;
    }
}

/// Offset of sample (row, col, band) within a file of the given interleave.
inline std::size_t file_offset(const CubeHeader &h, std::size_t row, std::size_t col, std::size_t band) {
    switch (h.interleave) {
        case Interleave::bsq: return (band * h.rows + row) * h.cols + col;
        case Interleave::bil: return (row * h.bands + band) * h.cols + col;
        case Interleave::bip: return (row * h.cols + col) * h.bands + band;
    }
    return 0;
}

}  // namespace detail

/// Parses header text. Accepts the native keys (rows, cols, bands, dtype,
/// byteorder, interleave, band_labels) and the ENVI spellings (lines, samples,
/// data type, byte order, wavelength). Unknown keys are ignored.
inline CubeHeader parse_header(std::string_view text) {
    CubeHeader h;
    bool have_rows = false, have_cols = false;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = detail::lower(detail::trim(std::string_view(line).substr(0, eq)));
        std::string value = detail::trim(std::string_view(line).substr(eq + 1));
        // ENVI braces may span several lines
        if (value.find('{') != std::string::npos) {
            while (value.find('}') == std::string::npos && std::getline(in, line)) {
                ++line_no;
                value += ' ' + detail::trim(line);
            }
        }
        const std::string lv = detail::lower(value);
        if (key == "rows" || key == "lines") {
            h.rows = detail::parse_count(key, value);
            have_rows = true;
        } else if (key == "cols" || key == "samples") {
            h.cols = detail::parse_count(key, value);
            have_cols = true;
        } else if (key == "bands") {
            h.bands = detail::parse_count(key, value);
        } else if (key == "dtype") {
            if (lv == "uint8" || lv == "u8") h.type = SampleType::uint8;
            else if (lv == "uint16" || lv == "u16") h.type = SampleType::uint16;
            else if (lv == "int16" || lv == "i16") h.type = SampleType::int16;
            else if (lv == "float32" || lv == "f32") h.type = SampleType::float32;
            else if (lv == "float64" || lv == "f64") h.type = SampleType::float64;
            else throw Error(ErrorKind::io, "datacube", "line " + std::to_string(line_no) + ": unknown dtype '" + value + "'");
        } else if (key == "data type") {
            switch (detail::parse_count(key, value)) {
                case 1: h.type = SampleType::uint8; break;
                case 2: h.type = SampleType::int16; break;
                case 4: h.type = SampleType::float32; break;
                case 5: h.type = SampleType::float64; break;
                case 12: h.type = SampleType::uint16; break;
                default: throw Error(ErrorKind::io, "datacube", "unsupported ENVI data type " + value);
            }
        } else if (key == "byteorder" || key == "byte order") {
            if (lv == "little" || lv == "0") h.byte_order = ByteOrder::little;
            else if (lv == "big" || lv == "1") h.byte_order = ByteOrder::big;
            else throw Error(ErrorKind::io, "datacube", "line " + std::to_string(line_no) + ": unknown byte order '" + value + "'");
        } else if (key == "interleave") {
            if (lv == "bsq") h.interleave = Interleave::bsq;
            else if (lv == "bil") h.interleave = Interleave::bil;
            else if (lv == "bip") h.interleave = Interleave::bip;
            else throw Error(ErrorKind::io, "datacube", "line " + std::to_string(line_no) + ": unknown interleave '" + value + "'");
        } else if (key == "band_labels" || key == "band names" || key == "wavelength") {
            h.band_labels = detail::split_list(value);
        }
    }
    if (!have_rows || !have_cols) throw Error(ErrorKind::io, "datacube", "header must declare rows and cols");
    if (h.rows == 0 || h.cols == 0 || h.bands == 0)
        throw Error(ErrorKind::io, "datacube", "header dimensions must be positive");
    if (!h.band_labels.empty() && h.band_labels.size() != h.bands) h.band_labels.clear();
    return h;
}

inline CubeHeader read_header(const std::filesystem::path &path) {
    const auto bytes = detail::read_file(path);
    return parse_header(std::string_view(bytes.data(), bytes.size()));
}

inline std::string format_header(const CubeHeader &h) {
    std::ostringstream out;
    out << "rows=" << h.rows << '\n'
        << "cols=" << h.cols << '\n'
        << "bands=" << h.bands << '\n'
        << "dtype=" << to_string(h.type) << '\n'
        << "byteorder=" << (h.byte_order == ByteOrder::little ? "little" : "big") << '\n'
        << "interleave=" << to_string(h.interleave) << '\n';
    if (!h.band_labels.empty()) {
        out << "band_labels=";
        for (std::size_t i = 0; i < h.band_labels.size(); ++i) out << (i ? "," : "") << h.band_labels[i];
        out << '\n';
    }
    return out.str();
}

/// Default header location for a raster: "<data path>.hdr".
inline std::filesystem::path header_path_for(const std::filesystem::path &data) {
    return std::filesystem::path(data.string() + ".hdr");
}

/// Single-band real image, row-major.
class Image {
public:
    Image() = default;
    Image(std::size_t rows, std::size_t cols, std::vector<double> values)
        : rows_(rows), cols_(cols), values_(std::move(values)) {
        if (rows_ == 0 || cols_ == 0) throw Error(ErrorKind::invalid_argument, "datacube", "image dimensions must be positive");
        if (values_.size() != rows_ * cols_)
            throw Error(ErrorKind::invalid_argument, "datacube", "image value count does not match rows*cols");
        for (double v : values_)
            if (!std::isfinite(v)) throw Error(ErrorKind::invalid_argument, "datacube", "image contains non-finite values");
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return values_.size(); }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
    std::span<const double> values() const { return values_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

/// r x l x b reflectance cube, band-sequential.
class HyperCube {
public:
    HyperCube() = default;
    HyperCube(std::size_t rows, std::size_t cols, std::size_t bands, std::vector<double> values,
              std::vector<std::string> band_labels = {})
        : rows_(rows), cols_(cols), bands_(bands), values_(std::move(values)), band_labels_(std::move(band_labels)) {
        if (rows_ == 0 || cols_ == 0 || bands_ == 0)
            throw Error(ErrorKind::invalid_argument, "datacube", "cube dimensions must be positive");
        if (values_.size() != rows_ * cols_ * bands_)
            throw Error(ErrorKind::invalid_argument, "datacube", "cube value count does not match rows*cols*bands");
        if (!band_labels_.empty() && band_labels_.size() != bands_)
            throw Error(ErrorKind::invalid_argument, "datacube", "band label count does not match band count");
        for (std::size_t i = 0; i < values_.size(); ++i)
            if (!std::isfinite(values_[i]))
                throw Error(ErrorKind::invalid_argument, "datacube", "non-finite value at offset " + std::to_string(i));
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t bands() const { return bands_; }
    std::size_t pixels() const { return rows_ * cols_; }
    std::span<const double> values() const { return values_; }
    const std::vector<std::string> &band_labels() const { return band_labels_; }

    double operator()(std::size_t row, std::size_t col, std::size_t band) const {
        return values_[(band * rows_ + row) * cols_ + col];
    }

    /// Contiguous view of one band.
    std::span<const double> band(std::size_t b) const {
        return std::span<const double>(values_).subspan(b * pixels(), pixels());
    }

    Image band_image(std::size_t b) const {
        auto s = band(b);
        return Image(rows_, cols_, std::vector<double>(s.begin(), s.end()));
    }

    std::vector<double> spectrum(std::size_t row, std::size_t col) const {
        std::vector<double> out(bands_);
        for (std::size_t b = 0; b < bands_; ++b) out[b] = (*this)(row, col, b);
        return out;
    }

    friend bool operator==(const HyperCube &, const HyperCube &) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::size_t bands_ = 0;
    std::vector<double> values_;
    std::vector<std::string> band_labels_;
};

/// Ground truth or predicted label raster. 0 is background, 1..K are classes.
class LabelMap {
public:
    LabelMap() = default;
    LabelMap(std::size_t rows, std::size_t cols, std::vector<int> labels, int num_classes = -1)
        : rows_(rows), cols_(cols), labels_(std::move(labels)) {
        if (rows_ == 0 || cols_ == 0) throw Error(ErrorKind::invalid_argument, "datacube", "label map dimensions must be positive");
        if (labels_.size() != rows_ * cols_)
            throw Error(ErrorKind::invalid_argument, "datacube", "label count does not match rows*cols");
        int max_label = 0;
        for (int v : labels_) {
            if (v < 0) throw Error(ErrorKind::invalid_argument, "datacube", "negative label " + std::to_string(v));
            max_label = std::max(max_label, v);
        }
        num_classes_ = num_classes < 0 ? max_label : num_classes;
        if (max_label > num_classes_)
            throw Error(ErrorKind::invalid_argument, "datacube",
                        "label " + std::to_string(max_label) + " exceeds declared class count " + std::to_string(num_classes_));
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return labels_.size(); }
    int num_classes() const { return num_classes_; }
    int operator[](std::size_t i) const { return labels_[i]; }
    int operator()(std::size_t r, std::size_t c) const { return labels_[r * cols_ + c]; }
    std::span<const int> labels() const { return labels_; }

    std::size_t labeled_count() const {
        return static_cast<std::size_t>(std::count_if(labels_.begin(), labels_.end(), [](int v) { return v != 0; }));
    }

    /// Pixel count per label value 0..K.
    std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes_) + 1, 0);
        for (int v : labels_) ++counts[static_cast<std::size_t>(v)];
        return counts;
    }

    friend bool operator==(const LabelMap &, const LabelMap &) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<int> labels_;
    int num_classes_ = 0;
};

/// Reads a raw cube described by `header`; converts to 64-bit reals in
/// band-sequential layout.
inline HyperCube load_cube(const std::filesystem::path &data_path, const CubeHeader &header) {
    if (header.rows == 0 || header.cols == 0 || header.bands == 0)
        throw Error(ErrorKind::io, "datacube", "header dimensions must be positive");
    if (!std::filesystem::exists(data_path))
        throw Error(ErrorKind::io, "datacube", "cube file '" + data_path.string() + "' does not exist");
    const auto bytes = detail::read_file(data_path);
    if (bytes.size() != header.byte_count())
        throw Error(ErrorKind::io, "datacube",
                    "size mismatch for '" + data_path.string() + "': expected " + std::to_string(header.byte_count()) +
                        " bytes, found " + std::to_string(bytes.size()));
    const std::size_t ss = sample_size(header.type);
    const auto *raw = reinterpret_cast<const unsigned char *>(bytes.data());
    std::vector<double> values(header.sample_count());
    std::size_t i = 0;
    for (std::size_t b = 0; b < header.bands; ++b)
        for (std::size_t r = 0; r < header.rows; ++r)
            for (std::size_t c = 0; c < header.cols; ++c, ++i) {
                const std::size_t off = detail::file_offset(header, r, c, b);
                const double v = detail::decode_sample(raw + off * ss, header.type, header.byte_order);
                if (!std::isfinite(v))
                    throw Error(ErrorKind::io, "datacube",
                                "non-finite sample at byte offset " + std::to_string(off * ss) + " (sample " +
                                    std::to_string(off) + ")");
                values[i] = v;
            }
    return HyperCube(header.rows, header.cols, header.bands, std::move(values), header.band_labels);
}

/// Reads a cube whose header sits next to it as "<data>.hdr".
inline HyperCube load_cube(const std::filesystem::path &data_path) {
    return load_cube(data_path, read_header(header_path_for(data_path)));
}

/// Writes `cube` using the sample type, byte order and interleave of
/// `layout` (its dimensions are taken from the cube), plus "<data>.hdr".
/// Values are converted with a plain cast; callers choose a type that
/// represents them.
inline void write_cube(const HyperCube &cube, const std::filesystem::path &data_path, CubeHeader layout) {
    layout.rows = cube.rows();
    layout.cols = cube.cols();
    layout.bands = cube.bands();
    layout.band_labels = cube.band_labels();
    const std::size_t ss = sample_size(layout.type);
    std::vector<unsigned char> bytes(layout.byte_count());
    for (std::size_t b = 0; b < cube.bands(); ++b)
        for (std::size_t r = 0; r < cube.rows(); ++r)
            for (std::size_t c = 0; c < cube.cols(); ++c)
                detail::encode_sample(bytes.data() + detail::file_offset(layout, r, c, b) * ss, cube(r, c, b), layout.type,
                                      layout.byte_order);
    std::ofstream out(data_path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "datacube", "cannot write '" + data_path.string() + "'");
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    std::ofstream hdr(header_path_for(data_path));
    if (!hdr) throw Error(ErrorKind::io, "datacube", "cannot write header for '" + data_path.string() + "'");
    hdr << format_header(layout);
}

/// Drops the listed 0-based bands; remaining bands keep order and values.
inline HyperCube remove_bands(const HyperCube &cube, std::span<const std::size_t> band_indices) {
    std::vector<bool> drop(cube.bands(), false);
    for (std::size_t idx : band_indices) {
        if (idx >= cube.bands())
            throw Error(ErrorKind::invalid_argument, "datacube",
                        "band index " + std::to_string(idx) + " out of range for " + std::to_string(cube.bands()) + " bands");
        if (drop[idx]) throw Error(ErrorKind::invalid_argument, "datacube", "duplicate band index " + std::to_string(idx));
        drop[idx] = true;
    }
    const std::size_t kept = cube.bands() - band_indices.size();
    if (kept == 0) throw Error(ErrorKind::invalid_argument, "datacube", "cannot remove every band");
    std::vector<double> values;
    values.reserve(kept * cube.pixels());
    std::vector<std::string> labels;
    for (std::size_t b = 0; b < cube.bands(); ++b) {
        if (drop[b]) continue;
        auto s = cube.band(b);
        values.insert(values.end(), s.begin(), s.end());
        if (!cube.band_labels().empty()) labels.push_back(cube.band_labels()[b]);
    }
    return HyperCube(cube.rows(), cube.cols(), kept, std::move(values), std::move(labels));
}

/// Expands "104-108,150-163,220" (1-based, inclusive) into sorted unique
/// 0-based indices.
inline std::vector<std::size_t> parse_band_ranges(std::string_view text) {
    std::set<std::size_t> out;
    std::stringstream ss{std::string(text)};
    std::string item;
    auto parse_one = [&](const std::string &s) -> std::size_t {
        std::size_t pos = 0;
        long long v = 0;
        try {
            v = std::stoll(s, &pos);
        } catch (const std::exception &) {
            pos = 0;
        }
        if (pos == 0 || pos != s.size() || v < 1)
            throw Error(ErrorKind::config, "datacube", "invalid 1-based band number '" + s + "'");
        return static_cast<std::size_t>(v);
    };
    while (std::getline(ss, item, ',')) {
        item = detail::trim(item);
        if (item.empty()) continue;
        const auto dash = item.find('-');
        if (dash == std::string::npos) {
            out.insert(parse_one(item) - 1);
        } else {
            const std::size_t lo = parse_one(detail::trim(item.substr(0, dash)));
            const std::size_t hi = parse_one(detail::trim(item.substr(dash + 1)));
            if (hi < lo) throw Error(ErrorKind::config, "datacube", "descending band range '" + item + "'");
            for (std::size_t b = lo; b <= hi; ++b) out.insert(b - 1);
        }
    }
    return {out.begin(), out.end()};
}

namespace detail {

// Reads the next whitespace/comment separated token of a netpbm header.
inline std::string pnm_token(const std::vector<char> &bytes, std::size_t &pos) {
    for (;;) {
        while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        if (pos < bytes.size() && bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            continue;
        }
        break;
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) tok += bytes[pos++];
    return tok;
}

struct Pnm {
    std::string magic;
    std::size_t width = 0, height = 0, maxval = 0;
    std::size_t data_offset = 0;
};

inline Pnm parse_pnm(const std::vector<char> &bytes, const std::string &path) {
    Pnm p;
    std::size_t pos = 0;
    p.magic = pnm_token(bytes, pos);
    try {
        p.width = std::stoul(pnm_token(bytes, pos));
        p.height = std::stoul(pnm_token(bytes, pos));
        p.maxval = std::stoul(pnm_token(bytes, pos));
    } catch (const std::exception &) {
        throw Error(ErrorKind::io, "datacube", "malformed netpbm header in '" + path + "'");
    }
    p.data_offset = pos + 1;  // single whitespace byte after maxval
    if (p.maxval == 0 || p.maxval > 65535) throw Error(ErrorKind::io, "datacube", "bad maxval in '" + path + "'");
    return p;
}

}  // namespace detail

/// Loads a label raster: binary portable graymap (".pgm"), or an 8/16-bit
/// single-band raw file with a "<path>.hdr" header.
inline LabelMap load_labels(const std::filesystem::path &path, std::size_t rows, std::size_t cols) {
    if (!std::filesystem::exists(path))
        throw Error(ErrorKind::io, "datacube", "label file '" + path.string() + "' does not exist");
    std::vector<int> labels(rows * cols);
    if (detail::lower(path.extension().string()) == ".pgm") {
        const auto bytes = detail::read_file(path);
        const auto pnm = detail::parse_pnm(bytes, path.string());
        if (pnm.magic != "P5") throw Error(ErrorKind::io, "datacube", "'" + path.string() + "' is not a binary graymap (P5)");
        if (pnm.height != rows || pnm.width != cols)
            throw Error(ErrorKind::io, "datacube",
                        "label raster is " + std::to_string(pnm.height) + "x" + std::to_string(pnm.width) + ", expected " +
                            std::to_string(rows) + "x" + std::to_string(cols));
        const std::size_t ss = pnm.maxval > 255 ? 2 : 1;
        if (bytes.size() < pnm.data_offset + rows * cols * ss)
            throw Error(ErrorKind::io, "datacube", "truncated graymap '" + path.string() + "'");
        const auto *raw = reinterpret_cast<const unsigned char *>(bytes.data()) + pnm.data_offset;
        for (std::size_t i = 0; i < rows * cols; ++i)
            labels[i] = ss == 1 ? raw[i] : static_cast<int>(detail::load_scalar<std::uint16_t>(raw + 2 * i, ByteOrder::big));
        return LabelMap(rows, cols, std::move(labels));
    }
    const CubeHeader h = read_header(header_path_for(path));
    if (h.rows != rows || h.cols != cols)
        throw Error(ErrorKind::io, "datacube",
                    "label raster is " + std::to_string(h.rows) + "x" + std::to_string(h.cols) + ", expected " +
                        std::to_string(rows) + "x" + std::to_string(cols));
    if (h.bands != 1) throw Error(ErrorKind::io, "datacube", "label raster must have a single band");
    if (h.type != SampleType::uint8 && h.type != SampleType::uint16)
        throw Error(ErrorKind::io, "datacube", "label raster must be 8- or 16-bit unsigned");
    const auto cube = load_cube(path, h);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(cube.values()[i]);
    return LabelMap(rows, cols, std::move(labels));
}

/// Writes labels as a binary graymap (8-bit when K < 256, else 16-bit).
inline void write_labels_pgm(const LabelMap &map, const std::filesystem::path &path) {
    const bool wide = map.num_classes() > 255;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "datacube", "cannot write '" + path.string() + "'");
    out << "P5\n" << map.cols() << ' ' << map.rows() << '\n' << (wide ? 65535 : 255) << '\n';
    for (int v : map.labels()) {
        if (wide) {
            unsigned char b[2];
            detail::store_scalar(b, static_cast<std::uint16_t>(v), ByteOrder::big);
            out.write(reinterpret_cast<const char *>(b), 2);
        } else {
            out.put(static_cast<char>(v));
        }
    }
}

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    friend bool operator==(const Rgb &, const Rgb &) = default;
    friend auto operator<=>(const Rgb &, const Rgb &) = default;
};

using Palette = std::map<int, Rgb>;

/// Distinct colors for labels 1..num_classes (HSV wheel, alternating
/// brightness).
inline Palette default_palette(int num_classes) {
    Palette p;
    for (int k = 1; k <= num_classes; ++k) {
        const double h = std::fmod((k - 1) * 0.618033988749895, 1.0) * 6.0;
        const double v = (k % 2) ? 1.0 : 0.7;
        const double s = 0.85;
        const int sector = static_cast<int>(h) % 6;
        const double f = h - std::floor(h);
        const double pp = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
        double r = 0, g = 0, b = 0;
        switch (sector) {
            case 0: r = v, g = t, b = pp; break;
            case 1: r = q, g = v, b = pp; break;
            case 2: r = pp, g = v, b = t; break;
            case 3: r = pp, g = q, b = v; break;
            case 4: r = t, g = pp, b = v; break;
            default: r = v, g = pp, b = q; break;
        }
        p[k] = Rgb{static_cast<std::uint8_t>(std::lround(r * 255)), static_cast<std::uint8_t>(std::lround(g * 255)),
                   static_cast<std::uint8_t>(std::lround(b * 255))};
    }
    return p;
}

/// Writes a binary portable pixmap (P6); label 0 renders black.
inline void write_class_map(const LabelMap &map, const Palette &palette, const std::filesystem::path &path) {
    std::vector<unsigned char> rgb(map.size() * 3, 0);
    for (std::size_t i = 0; i < map.size(); ++i) {
        const int label = map[i];
        if (label == 0) continue;
        auto it = palette.find(label);
        if (it == palette.end())
            throw Error(ErrorKind::invalid_argument, "datacube", "no palette entry for label " + std::to_string(label));
        rgb[3 * i] = it->second.r;
        rgb[3 * i + 1] = it->second.g;
        rgb[3 * i + 2] = it->second.b;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "datacube", "cannot write '" + path.string() + "'");
    out << "P6\n" << map.cols() << ' ' << map.rows() << "\n255\n";
    out.write(reinterpret_cast<const char *>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

struct Pixmap {
    std::size_t rows = 0, cols = 0;
    std::vector<Rgb> pixels;
};

inline Pixmap read_pixmap(const std::filesystem::path &path) {
    const auto bytes = detail::read_file(path);
    const auto pnm = detail::parse_pnm(bytes, path.string());
    if (pnm.magic != "P6" || pnm.maxval != 255)
        throw Error(ErrorKind::io, "datacube", "'" + path.string() + "' is not an 8-bit binary pixmap (P6)");
    Pixmap px{pnm.height, pnm.width, {}};
    if (bytes.size() < pnm.data_offset + px.rows * px.cols * 3)
        throw Error(ErrorKind::io, "datacube", "truncated pixmap '" + path.string() + "'");
    const auto *raw = reinterpret_cast<const unsigned char *>(bytes.data()) + pnm.data_offset;
    px.pixels.resize(px.rows * px.cols);
    for (std::size_t i = 0; i < px.pixels.size(); ++i) px.pixels[i] = Rgb{raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]};
    return px;
}

/// Inverse of write_class_map: black maps to 0, palette colors to their label.
inline LabelMap read_class_map(const std::filesystem::path &path, const Palette &palette) {
    const Pixmap px = read_pixmap(path);
    std::map<Rgb, int> inverse;
    for (const auto &[label, color] : palette) inverse.emplace(color, label);
    std::vector<int> labels(px.pixels.size(), 0);
    int num_classes = palette.empty() ? 0 : palette.rbegin()->first;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (px.pixels[i] == Rgb{}) continue;
        auto it = inverse.find(px.pixels[i]);
        if (it == inverse.end()) throw Error(ErrorKind::io, "datacube", "pixel color not found in palette");
        labels[i] = it->second;
    }
    return LabelMap(px.rows, px.cols, std::move(labels), num_classes);
}

}  // namespace hsi
