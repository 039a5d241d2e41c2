// SPDX-License-Identifier: Apache-2.0
#include "isac/cli/results.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "isac/errors.hpp"

namespace isac::cli {

namespace {

constexpr const char* kHeader = "scheme,bin,nmse_global,nmse_mean,n,seed";

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void check_field(const std::string& s) {
  if (s.find_first_of(",\n\r\"") != std::string::npos) throw UsageError("CSV field may not contain ',', quotes or newlines: " + s);
}

template <typename T>
T parse_number(const std::string& s, std::size_t line) {
  T v{};
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw UsageError("CSV line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string ResultTable::to_csv() const {
  std::string out = std::string(kHeader) + "\n";
  for (const auto& r : rows) {
    check_field(r.scheme);
    check_field(r.bin);
    out += r.scheme + "," + r.bin + "," + shortest(r.nmse_global) + "," + shortest(r.nmse_mean) + "," +
           std::to_string(r.n) + "," + std::to_string(r.seed) + "\n";
  }
  return out;
}

ResultTable ResultTable::parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw UsageError("CSV header must be '" + std::string(kHeader) + "'");
  ResultTable t;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t pos; (pos = line.find(',', start)) != std::string::npos; start = pos + 1) f.push_back(line.substr(start, pos - start));
    f.push_back(line.substr(start));
    if (f.size() != 6) throw UsageError("CSV line " + std::to_string(number) + ": expected 6 fields");
    ResultRow r;
    r.scheme = f[0];
    r.bin = f[1];
    r.nmse_global = parse_number<double>(f[2], number);
    r.nmse_mean = parse_number<double>(f[3], number);
    r.n = parse_number<std::size_t>(f[4], number);
    r.seed = parse_number<std::uint64_t>(f[5], number);
    t.rows.push_back(std::move(r));
  }
  return t;
}

std::string ResultTable::to_svg(const std::string& title, const std::string& x_label) const {
  std::vector<std::string> bins, schemes;
  for (const auto& r : rows) {
    if (std::find(bins.begin(), bins.end(), r.bin) == bins.end()) bins.push_back(r.bin);
    if (std::find(schemes.begin(), schemes.end(), r.scheme) == schemes.end()) schemes.push_back(r.scheme);
  }
  double lo = 1e300, hi = -1e300;
  for (const auto& r : rows) {
    if (r.nmse_global <= 0.0) continue;
    lo = std::min(lo, std::log10(r.nmse_global));
    hi = std::max(hi, std::log10(r.nmse_global));
  }
  if (lo > hi) lo = hi = 0.0;
  lo = std::floor(lo);
  hi = std::max(std::ceil(hi), lo + 1.0);

  const double W = 640, H = 400, L = 70, R = 160, T = 40, B = 60;
  auto x_of = [&](std::size_t i) {
    return bins.size() < 2 ? L + (W - L - R) / 2 : L + (W - L - R) * static_cast<double>(i) / static_cast<double>(bins.size() - 1);
  };
  auto y_of = [&](double v) { return T + (H - T - B) * (hi - std::log10(v)) / (hi - lo); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title) << "</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (double e = lo; e <= hi + 1e-9; e += 1.0) {
    const double y = y_of(std::pow(10.0, e));
    s << "<line x1=\"" << L - 4 << "\" y1=\"" << y << "\" x2=\"" << W - R << "\" y2=\"" << y << "\" stroke=\"#ddd\"/>\n";
    s << "<text x=\"" << L - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">1e" << static_cast<int>(e) << "</text>\n";
  }
  for (std::size_t i = 0; i < bins.size(); ++i) {
    s << "<text x=\"" << x_of(i) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << xml_escape(bins[i]) << "</text>\n";
  }
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << xml_escape(x_label) << "</text>\n";
  s << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << (T + H - B) / 2
    << ")\">NMSE</text>\n";
  for (std::size_t si = 0; si < schemes.size(); ++si) {
    const char* color = colors[si % 8];
    std::string points;
    for (std::size_t bi = 0; bi < bins.size(); ++bi) {
      for (const auto& r : rows) {
        if (r.scheme != schemes[si] || r.bin != bins[bi] || r.nmse_global <= 0.0) continue;
        points += std::to_string(x_of(bi)) + "," + std::to_string(y_of(r.nmse_global)) + " ";
        s << "<circle cx=\"" << x_of(bi) << "\" cy=\"" << y_of(r.nmse_global) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        break;
      }
    }
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << points << "\"/>\n";
    const double ly = T + 18.0 * static_cast<double>(si);
    s << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\">" << xml_escape(schemes[si]) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace isac::cli
