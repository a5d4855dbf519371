#pragma once

// File formats, synthetic data and result persistence.
//
//  * signal CSV: one decimal per line, written with 17 significant digits
//  * portable graymap (binary P5, 8 or 16 bit), scaled to [0, 1] on read
//  * raw float image: 8-byte magic "PAPCRAW1", uint64 side length n (little endian),
//    then n*n little-endian IEEE doubles in column-major order
//  * trace CSV: iter,step_H,primal_step,dual_step,objective,max_violation

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "papc/errors.hpp"
#include "papc/linops.hpp"
#include "papc/solver.hpp"

namespace papc {

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

/// Strict decimal parse: the whole field must be consumed and the value finite.
inline bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PersistenceError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw PersistenceError("read failure on '" + path.string() + "'");
    return ss.str();
}

template <class Fn>
void for_each_line(const std::string& text, Fn&& fn) {
    std::size_t line = 0, pos = 0;
    while (pos < text.size()) {
        const auto end = text.find('\n', pos);
        const auto stop = end == std::string::npos ? text.size() : end;
        fn(++line, std::string_view(text).substr(pos, stop - pos));
        pos = stop + 1;
    }
}

inline void store_u64_le(std::uint64_t v, unsigned char* out) {
    for (int i = 0; i < 8; ++i) out[i] = static_cast<unsigned char>(v >> (8 * i));
}

inline std::uint64_t load_u64_le(const unsigned char* in) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[i]) << (8 * i);
    return v;
}

}  // namespace detail

/// Writes `contents` next to `path` and renames it into place, so readers never observe
/// a partially written file.
inline void atomic_write(const std::filesystem::path& path, const std::string& contents) {
    namespace fs = std::filesystem;
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw PersistenceError("cannot open '" + tmp.string() + "' for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) {
            out.close();
            std::error_code ec;
            fs::remove(tmp, ec);
            throw PersistenceError("write failure on '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw PersistenceError("cannot move result into '" + path.string() + "'");
    }
}

// ---------------------------------------------------------------------------
// Signals.

/// One value per line; blank lines and lines starting with '#' are skipped.
inline Vector parse_signal_csv(const std::string& text, const std::string& source = "<memory>") {
    std::vector<double> values;
    detail::for_each_line(text, [&](std::size_t line, std::string_view raw) {
        const auto s = detail::trim(raw);
        if (s.empty() || s.front() == '#') return;
        double v;
        if (!detail::parse_double(s, v)) throw ParseError(source, line, "not a finite decimal: '" + std::string(s) + "'");
        values.push_back(v);
    });
    if (values.empty()) throw ParseError(source, 0, "empty input");
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

inline Vector read_signal_csv(const std::filesystem::path& path) {
    return parse_signal_csv(detail::read_text_file(path), path.string());
}

inline std::string format_signal_csv(const Vector& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out += detail::format_double(v[i]);
        out += '\n';
    }
    return out;
}

inline void write_signal_csv(const std::filesystem::path& path, const Vector& v) {
    atomic_write(path, format_signal_csv(v));
}

/// Square kernel, k rows of k comma-separated decimals.
inline Matrix read_psf_csv(const std::filesystem::path& path) {
    const std::string source = path.string();
    std::vector<std::vector<double>> rows;
    detail::for_each_line(detail::read_text_file(path), [&](std::size_t line, std::string_view raw) {
        const auto s = detail::trim(raw);
        if (s.empty() || s.front() == '#') return;
        std::vector<double> row;
        std::size_t pos = 0;
        while (true) {
            const auto comma = s.find(',', pos);
            double v;
            if (!detail::parse_double(s.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos), v))
                throw ParseError(source, line, "malformed kernel entry");
            row.push_back(v);
            if (comma == std::string_view::npos) break;
            pos = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size()) throw ParseError(source, line, "ragged kernel row");
        rows.push_back(std::move(row));
    });
    if (rows.empty()) throw ParseError(source, 0, "empty input");
    if (rows.size() != rows.front().size()) throw InvalidDimension(source + ": kernel must be square");
    const auto k = static_cast<Eigen::Index>(rows.size());
    Matrix psf(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) psf(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return psf;
}

// ---------------------------------------------------------------------------
// Images.

inline constexpr char kRawMagic[8] = {'P', 'A', 'P', 'C', 'R', 'A', 'W', '1'};

inline std::string encode_raw_image(const Matrix& img) {
    if (img.rows() != img.cols() || img.rows() == 0) throw InvalidDimension("raw image must be square and non-empty");
    const auto n = static_cast<std::uint64_t>(img.rows());
    std::string out(16 + 8 * n * n, '\0');
    auto* p = reinterpret_cast<unsigned char*>(out.data());
    std::memcpy(p, kRawMagic, 8);
    detail::store_u64_le(n, p + 8);
    for (Eigen::Index i = 0; i < img.size(); ++i)
        detail::store_u64_le(std::bit_cast<std::uint64_t>(img.data()[i]), p + 16 + 8 * i);
    return out;
}

inline Matrix decode_raw_image(const std::string& bytes, const std::string& source) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kRawMagic, 8) != 0)
        throw FormatError(source + ": not a raw float image");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint64_t n = detail::load_u64_le(p + 8);
    if (n == 0 || n > (1u << 20) || bytes.size() != 16 + 8 * n * n)
        throw FormatError(source + ": raw image size does not match its header");
    const auto ni = static_cast<Eigen::Index>(n);
    Matrix img(ni, ni);
    for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = std::bit_cast<double>(detail::load_u64_le(p + 16 + 8 * i));
    return img;
}

namespace detail {

/// Reads one whitespace-delimited header token of a graymap, skipping '#' comments.
inline std::string pgm_token(const std::string& bytes, std::size_t& pos, const std::string& source) {
    while (pos < bytes.size()) {
        const char c = bytes[pos];
        if (c == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            ++pos;
        } else {
            break;
        }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw FormatError(source + ": truncated graymap header");
    return bytes.substr(start, pos - start);
}

inline std::size_t pgm_number(const std::string& tok, const std::string& source) {
    std::size_t v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) throw FormatError(source + ": bad graymap header field");
    return v;
}

}  // namespace detail

/// Binary graymap; pixel (row i, col j) becomes entry (i, j) divided by maxval.
inline Matrix decode_pgm(const std::string& bytes, const std::string& source) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError(source + ": not a binary graymap");
    std::size_t pos = 2;
    const std::size_t width = detail::pgm_number(detail::pgm_token(bytes, pos, source), source);
    const std::size_t height = detail::pgm_number(detail::pgm_token(bytes, pos, source), source);
    const std::size_t maxval = detail::pgm_number(detail::pgm_token(bytes, pos, source), source);
    if (maxval == 0 || maxval > 65535) throw FormatError(source + ": graymap maxval out of range");
    ++pos;  // single whitespace byte after maxval
    if (width != height) throw InvalidDimension(source + ": graymap is " + std::to_string(width) + "x" +
                                                std::to_string(height) + ", expected a square image");
    if (width == 0) throw InvalidDimension(source + ": empty graymap");
    const std::size_t bpp = maxval < 256 ? 1 : 2;
    if (bytes.size() < pos + bpp * width * height) throw FormatError(source + ": truncated graymap pixel data");
    const auto n = static_cast<Eigen::Index>(width);
    Matrix img(n, n);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const std::size_t k = static_cast<std::size_t>(i * n + j);
            const unsigned v = bpp == 1 ? p[k] : (static_cast<unsigned>(p[2 * k]) << 8) | p[2 * k + 1];
            img(i, j) = static_cast<double>(v) / static_cast<double>(maxval);
        }
    return img;
}

/// 16-bit graymap with values clamped to [0, 1].
inline std::string encode_pgm(const Matrix& img) {
    if (img.rows() != img.cols() || img.rows() == 0) throw InvalidDimension("graymap must be square and non-empty");
    const auto n = img.rows();
    std::string out = "P5\n" + std::to_string(n) + " " + std::to_string(n) + "\n65535\n";
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto v = static_cast<unsigned>(std::lround(std::clamp(img(i, j), 0.0, 1.0) * 65535.0));
            out += static_cast<char>(v >> 8);
            out += static_cast<char>(v & 0xff);
        }
    return out;
}

/// Dispatches on the file's magic bytes.
inline Matrix read_image(const std::filesystem::path& path) {
    const std::string bytes = detail::read_text_file(path);
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kRawMagic, 8) == 0) return decode_raw_image(bytes, path.string());
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes, path.string());
    throw FormatError(path.string() + ": unsupported image format");
}

/// Extension ".pgm" selects the graymap; anything else the lossless raw format.
inline void write_image(const std::filesystem::path& path, const Matrix& img) {
    atomic_write(path, path.extension() == ".pgm" ? encode_pgm(img) : encode_raw_image(img));
}

// ---------------------------------------------------------------------------
// Synthetic data.

enum class SignalKind { blocks, ramp, custom_csv };

struct SyntheticSignal {
    Vector clean;
    Vector noisy;
};

/// i.i.d. N(0, sd^2) samples: Box-Muller over mt19937_64 with 53-bit uniforms, so the
/// sequence depends only on the seed and not on the standard library implementation.
inline Vector gaussian_noise(std::size_t n, double sd, std::uint64_t seed) {
    if (!(sd >= 0.0)) throw InvalidParameter("gaussian_noise: standard deviation must be nonnegative");
    std::mt19937_64 rng(seed);
    const auto uniform = [&rng] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
    Vector out(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < out.size(); i += 2) {
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double t = 2.0 * std::numbers::pi * uniform();
        out[i] = sd * r * std::cos(t);
        if (i + 1 < out.size()) out[i + 1] = sd * r * std::sin(t);
    }
    return out;
}

/// Piecewise-constant test signal with jumps of varying height on [0, 1].
inline Vector blocks_signal(std::size_t n) {
    Vector x(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        double v = 0.0;
        if (t >= 0.1 && t < 0.25) v = 0.6;
        else if (t >= 0.25 && t < 0.4) v = 0.2;
        else if (t >= 0.45 && t < 0.55) v = 1.0;
        else if (t >= 0.6 && t < 0.8) v = 0.4;
        else if (t >= 0.85 && t < 0.9) v = 0.8;
        x[static_cast<Eigen::Index>(i)] = v;
    }
    return x;
}

/// Piecewise-linear signal: a rising ramp, a plateau and a drop.
inline Vector ramp_signal(std::size_t n) {
    Vector x(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        double v = 0.0;
        if (t < 0.5) v = t / 0.5 * 0.8;
        else if (t < 0.75) v = 0.8;
        else v = 0.2;
        x[static_cast<Eigen::Index>(i)] = v;
    }
    return x;
}

/// For custom_csv, `clean` supplies the signal and n is taken from it.
inline SyntheticSignal synth_signal(SignalKind kind, std::size_t n, double noise_sd, std::uint64_t seed,
                                    const Vector& clean = {}) {
    SyntheticSignal s;
    switch (kind) {
        case SignalKind::blocks: s.clean = blocks_signal(n); break;
        case SignalKind::ramp: s.clean = ramp_signal(n); break;
        case SignalKind::custom_csv: s.clean = clean; break;
    }
    if (s.clean.size() == 0) throw InvalidDimension("synth_signal: empty signal");
    s.noisy = s.clean + gaussian_noise(static_cast<std::size_t>(s.clean.size()), noise_sd, seed);
    return s;
}

/// Disc, rectangle and two small spots on a dark background, values in [0, 1].
inline Matrix phantom_image(std::size_t n) {
    const auto N = static_cast<Eigen::Index>(n);
    Matrix img = Matrix::Zero(N, N);
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < N; ++j) {
            const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
            const double v = (static_cast<double>(j) + 0.5) / static_cast<double>(n);
            double val = 0.1;
            if ((u - 0.35) * (u - 0.35) + (v - 0.4) * (v - 0.4) < 0.04) val = 0.7;
            if (u > 0.6 && u < 0.85 && v > 0.55 && v < 0.9) val = 0.5;
            if ((u - 0.75) * (u - 0.75) + (v - 0.2) * (v - 0.2) < 0.003) val = 1.0;
            if ((u - 0.2) * (u - 0.2) + (v - 0.8) * (v - 0.8) < 0.002) val = 0.9;
            img(i, j) = val;
        }
    return img;
}

/// Normalized k x k Gaussian kernel (k odd) with standard deviation `width` pixels.
inline Matrix gaussian_psf(std::size_t k, double width) {
    if (k == 0 || k % 2 == 0) throw InvalidParameter("gaussian_psf: kernel size must be odd");
    if (!(width > 0.0)) throw InvalidParameter("gaussian_psf: width must be positive");
    const auto K = static_cast<Eigen::Index>(k);
    const double c = static_cast<double>(k / 2);
    Matrix psf(K, K);
    for (Eigen::Index i = 0; i < K; ++i)
        for (Eigen::Index j = 0; j < K; ++j) {
            const double di = static_cast<double>(i) - c, dj = static_cast<double>(j) - c;
            psf(i, j) = std::exp(-(di * di + dj * dj) / (2.0 * width * width));
        }
    return psf / psf.sum();
}

// ---------------------------------------------------------------------------
// Traces.

inline constexpr std::string_view kTraceHeader = "iter,step_H,primal_step,dual_step,objective,max_violation";

inline std::string format_trace_csv(const std::vector<TraceRecord>& records) {
    std::string out(kTraceHeader);
    out += '\n';
    for (const auto& r : records) {
        out += std::to_string(r.iter);
        for (double v : {r.step_H, r.primal_step, r.dual_step, r.objective, r.max_violation}) {
            out += ',';
            out += detail::format_double(v);
        }
        out += '\n';
    }
    return out;
}

inline void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRecord>& records) {
    atomic_write(path, format_trace_csv(records));
}

inline std::vector<TraceRecord> parse_trace_csv(const std::string& text, const std::string& source = "<memory>") {
    std::vector<TraceRecord> out;
    bool header_seen = false;
    detail::for_each_line(text, [&](std::size_t line, std::string_view raw) {
        const auto s = detail::trim(raw);
        if (s.empty()) return;
        if (!header_seen) {
            if (s != kTraceHeader) throw ParseError(source, line, "unexpected trace header");
            header_seen = true;
            return;
        }
        std::vector<std::string_view> fields;
        std::size_t pos = 0;
        while (true) {
            const auto comma = s.find(',', pos);
            fields.push_back(s.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
            if (comma == std::string_view::npos) break;
            pos = comma + 1;
        }
        if (fields.size() != 6) throw ParseError(source, line, "expected 6 fields");
        TraceRecord r;
        const auto iter_field = detail::trim(fields[0]);
        const auto res = std::from_chars(iter_field.data(), iter_field.data() + iter_field.size(), r.iter);
        if (res.ec != std::errc() || res.ptr != iter_field.data() + iter_field.size())
            throw ParseError(source, line, "malformed iteration index");
        double* slots[] = {&r.step_H, &r.primal_step, &r.dual_step, &r.objective, &r.max_violation};
        for (std::size_t i = 0; i < 5; ++i)
            if (!detail::parse_double(fields[i + 1], *slots[i])) throw ParseError(source, line, "malformed value");
        if (!out.empty() && r.iter <= out.back().iter) throw ParseError(source, line, "iteration index not increasing");
        out.push_back(r);
    });
    if (!header_seen) throw ParseError(source, 0, "empty input");
    return out;
}

inline std::vector<TraceRecord> read_trace_csv(const std::filesystem::path& path) {
    return parse_trace_csv(detail::read_text_file(path), path.string());
}

}  // namespace papc
