#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <openssl/evp.h>

#include "fwdopt/errors.hpp"

namespace fwdopt::runner {

/// Fixed, locale-independent number formatting used in every table.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

using Cell = std::variant<double, long long, std::string>;

/// Header row plus rows; written with comma separators and LF line endings.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row) {
        if (row.size() != header.size()) throw ContractViolation("csv: row width differs from header");
        rows.push_back(std::move(row));
    }

    std::string str() const {
        std::string out;
        for (std::size_t k = 0; k < header.size(); ++k) out += (k ? "," : "") + header[k];
        out += '\n';
        for (const auto& r : rows) {
            for (std::size_t k = 0; k < r.size(); ++k) {
                if (k) out += ',';
                if (const auto* d = std::get_if<double>(&r[k])) {
                    out += format_number(*d);
                } else if (const auto* i = std::get_if<long long>(&r[k])) {
                    out += std::to_string(*i);
                } else {
                    out += std::get<std::string>(r[k]);
                }
            }
            out += '\n';
        }
        return out;
    }
};

inline void write_text(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

inline std::string read_bytes(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256 failed");
    }
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

/// Static SVG line chart with linear axes and a legend.
inline std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                                  const std::vector<Series>& series) {
    constexpr double W = 640, H = 420, L = 70, R = 20, T = 40, B = 55;
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series) {
        for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
        for (double v : s.y) {
            if (std::isfinite(v)) y0 = std::min(y0, v), y1 = std::max(y1, v);
        }
    }
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!(y1 > y0)) y0 -= 0.5, y1 += 0.5;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << ' ' << H << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
      << title << "</text>\n";
    s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4.0;
        const double yv = y0 + (y1 - y0) * k / 4.0;
        s << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          << "font-size=\"11\">" << format_number(std::round(xv * 1e4) / 1e4) << "</text>\n";
        s << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
          << "font-size=\"11\">" << format_number(std::round(yv * 1e4) / 1e4) << "</text>\n";
        s << "<line x1=\"" << L << "\" y1=\"" << py(yv) << "\" x2=\"" << W - R << "\" y2=\"" << py(yv)
          << "\" stroke=\"#dddddd\"/>\n";
    }
    if (y0 < 0.0 && y1 > 0.0) {
        s << "<line x1=\"" << L << "\" y1=\"" << py(0.0) << "\" x2=\"" << W - R << "\" y2=\"" << py(0.0)
          << "\" stroke=\"#888888\" stroke-dasharray=\"4 3\"/>\n";
    }
    s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"12\">" << x_label << "</text>\n";
    s << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
      << "transform=\"rotate(-90 16 " << (T + H - B) / 2 << ")\">" << y_label << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& sr = series[k];
        const char* color = colors[k % 5];
        s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < sr.x.size(); ++i) {
            if (!std::isfinite(sr.y[i])) continue;
            s << format_number(px(sr.x[i])) << ',' << format_number(py(sr.y[i])) << ' ';
        }
        s << "\"/>\n";
        const double ly = T + 16 + 16 * static_cast<double>(k);
        s << "<line x1=\"" << W - R - 150 << "\" y1=\"" << ly << "\" x2=\"" << W - R - 130 << "\" y2=\"" << ly
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        s << "<text x=\"" << W - R - 125 << "\" y=\"" << ly + 4 << "\" font-family=\"sans-serif\" font-size=\"11\">"
          << sr.name << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

}  // namespace fwdopt::runner
