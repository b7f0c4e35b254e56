#include "acopf/case_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include "acopf/error.hpp"

namespace acopf {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingTable: return "MissingTable";
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::ZeroImpedance: return "ZeroImpedance";
    case ErrorKind::DanglingReference: return "DanglingReference";
    case ErrorKind::UnsupportedCost: return "UnsupportedCost";
    case ErrorKind::SingularElimination: return "SingularElimination";
    case ErrorKind::EmptyBox: return "EmptyBox";
    case ErrorKind::SingularSchur: return "SingularSchur";
    case ErrorKind::CallbackNonFinite: return "CallbackNonFinite";
    case ErrorKind::InfeasibleLinear: return "InfeasibleLinear";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

namespace {

struct Row {
  std::vector<double> values;
  int line;
};

struct Table {
  std::vector<Row> rows;
};

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_number(std::string_view tok) {
  if (tok.empty()) return std::nullopt;
  bool neg = false;
  std::string_view body = tok;
  if (body.front() == '+' || body.front() == '-') {
    neg = body.front() == '-';
    body.remove_prefix(1);
  }
  if (body == "Inf" || body == "inf") {
    const double inf = std::numeric_limits<double>::infinity();
    return neg ? -inf : inf;
  }
  double v = 0.0;
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  if (tok.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || std::isnan(v)) return std::nullopt;
  return v;
}

// Splits one matrix row on whitespace/commas.
std::vector<double> parse_row(std::string_view text, int line_no, const std::string& table) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == ',' || text[i] == '\r')) ++i;
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ' && text[j] != '\t' && text[j] != ',' && text[j] != '\r') ++j;
    const auto tok = text.substr(i, j - i);
    const auto v = parse_number(tok);
    if (!v) {
      throw Error(ErrorKind::MalformedRow, "line " + std::to_string(line_no) + ": non-numeric token '" +
                                               std::string(tok) + "' in mpc." + table);
    }
    out.push_back(*v);
    i = j;
  }
  return out;
}

struct ParsedFile {
  std::optional<double> base_mva;
  std::map<std::string, Table> tables;
};

ParsedFile scan(std::istream& in) {
  ParsedFile pf;
  std::string raw;
  int line_no = 0;
  std::string current;  // name of open matrix, empty when outside
  bool skipping_cell = false;
  Table* open = nullptr;

  auto feed_matrix_text = [&](std::string_view body) {
    // body may contain several ';'-separated rows and possibly the closing ']'.
    bool closed = false;
    const auto close = body.find(']');
    if (close != std::string_view::npos) {
      closed = true;
      body = body.substr(0, close);
    }
    std::size_t start = 0;
    while (start <= body.size()) {
      const auto semi = body.find(';', start);
      const auto piece = trim(body.substr(start, semi == std::string_view::npos ? std::string_view::npos : semi - start));
      if (!piece.empty() && open != nullptr) {
        open->rows.push_back({parse_row(piece, line_no, current), line_no});
      }
      if (semi == std::string_view::npos) break;
      start = semi + 1;
    }
    return closed;
  };

  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto pct = line.find('%'); pct != std::string_view::npos) line = line.substr(0, pct);
    line = trim(line);
    if (line.empty()) continue;

    if (skipping_cell) {
      if (line.find('}') != std::string_view::npos) skipping_cell = false;
      continue;
    }
    if (!current.empty()) {
      if (feed_matrix_text(line)) {
        current.clear();
        open = nullptr;
      }
      continue;
    }
    if (!line.starts_with("mpc.")) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) continue;
    const std::string name(trim(line.substr(4, eq - 4)));
    auto rhs = trim(line.substr(eq + 1));
    if (rhs.starts_with("[")) {
      current = name;
      open = &pf.tables[name];
      open->rows.clear();
      if (feed_matrix_text(rhs.substr(1))) {
        current.clear();
        open = nullptr;
      }
    } else if (rhs.starts_with("{")) {
      skipping_cell = rhs.find('}') == std::string_view::npos;
    } else if (name == "baseMVA") {
      if (rhs.ends_with(";")) rhs = trim(rhs.substr(0, rhs.size() - 1));
      const auto v = parse_number(rhs);
      if (!v) throw Error(ErrorKind::MalformedRow, "line " + std::to_string(line_no) + ": bad baseMVA");
      pf.base_mva = *v;
    }
  }
  if (!current.empty()) throw Error(ErrorKind::MalformedRow, "unterminated matrix mpc." + current);
  return pf;
}

const Table& require(const ParsedFile& pf, const std::string& name) {
  const auto it = pf.tables.find(name);
  if (it == pf.tables.end()) throw Error(ErrorKind::MissingTable, "mpc." + name + " not found");
  if (it->second.rows.empty()) throw Error(ErrorKind::MissingTable, "mpc." + name + " is empty");
  return it->second;
}

void check_columns(const Row& row, std::size_t min_cols, const std::string& table) {
  if (row.values.size() < min_cols) {
    throw Error(ErrorKind::MalformedRow, "line " + std::to_string(row.line) + ": mpc." + table + " row has " +
                                             std::to_string(row.values.size()) + " columns, expected at least " +
                                             std::to_string(min_cols));
  }
}

int as_int(double v) { return static_cast<int>(std::lround(v)); }

}  // namespace

RawCase parse_matpower(std::istream& in) {
  const ParsedFile pf = scan(in);
  if (!pf.base_mva) throw Error(ErrorKind::MissingTable, "mpc.baseMVA not found");

  RawCase rc;
  rc.base_mva = *pf.base_mva;
  if (!(rc.base_mva > 0.0)) throw Error(ErrorKind::MalformedRow, "baseMVA must be positive");

  for (const auto& row : require(pf, "bus").rows) {
    check_columns(row, 13, "bus");
    const auto& v = row.values;
    rc.buses.push_back({as_int(v[0]), as_int(v[1]), v[2], v[3], v[4], v[5], v[7], v[8], v[9], v[11], v[12]});
  }
  for (const auto& row : require(pf, "gen").rows) {
    check_columns(row, 10, "gen");
    const auto& v = row.values;
    rc.gens.push_back({as_int(v[0]), v[1], v[2], v[3], v[4], v[5], as_int(v[7]), v[8], v[9]});
  }
  for (const auto& row : require(pf, "branch").rows) {
    check_columns(row, 11, "branch");
    const auto& v = row.values;
    rc.branches.push_back({as_int(v[0]), as_int(v[1]), v[2], v[3], v[4], v[5], v[8], v[9], as_int(v[10])});
  }
  for (const auto& row : require(pf, "gencost").rows) {
    check_columns(row, 4, "gencost");
    const auto& v = row.values;
    const int model = as_int(v[0]);
    const int n = as_int(v[3]);
    if (model != 2) {
      throw Error(ErrorKind::UnsupportedCost,
                  "line " + std::to_string(row.line) + ": only polynomial cost (model 2) is supported");
    }
    if (n < 0 || n > 3) {
      throw Error(ErrorKind::UnsupportedCost,
                  "line " + std::to_string(row.line) + ": polynomial degree above 2 is not supported");
    }
    check_columns(row, 4 + static_cast<std::size_t>(n), "gencost");
    std::array<double, 3> c{0.0, 0.0, 0.0};  // c2, c1, c0
    for (int k = 0; k < n; ++k) c[3 - n + k] = v[4 + k];
    rc.gencosts.push_back({model, n, c[0], c[1], c[2]});
  }
  if (rc.gencosts.size() < rc.gens.size()) {
    throw Error(ErrorKind::MalformedRow, "mpc.gencost has fewer rows than mpc.gen");
  }
  return rc;
}

RawCase parse_matpower(const std::string& text) {
  std::istringstream in(text);
  return parse_matpower(in);
}

RawCase load_matpower_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open case file '" + path + "'");
  return parse_matpower(in);
}

Network build_network(const RawCase& raw) {
  if (!(raw.base_mva > 0.0)) throw Error(ErrorKind::InvalidArgument, "baseMVA must be positive");
  const double base = raw.base_mva;

  Network net;
  net.base_mva = base;
  std::unordered_map<int, std::size_t> index;
  std::optional<std::size_t> ref;
  for (const auto& b : raw.buses) {
    if (b.type == 4) continue;  // isolated
    if (b.vmin > b.vmax) {
      throw Error(ErrorKind::InvalidArgument, "bus " + std::to_string(b.id) + " has Vmin > Vmax");
    }
    if (!index.emplace(b.id, net.buses.size()).second) {
      throw Error(ErrorKind::InvalidArgument, "duplicate bus id " + std::to_string(b.id));
    }
    if (b.type == 3 && !ref) ref = net.buses.size();
    net.buses.push_back({b.id, b.gs / base, b.bs / base, b.pd / base, b.qd / base, b.vmin, b.vmax});
  }
  if (net.buses.empty()) throw Error(ErrorKind::MissingTable, "no in-service buses");
  net.ref_bus = ref.value_or(0);

  auto lookup = [&](int id, const char* what) -> std::optional<std::size_t> {
    if (const auto it = index.find(id); it != index.end()) return it->second;
    const bool isolated = std::any_of(raw.buses.begin(), raw.buses.end(),
                                      [&](const RawCase::Bus& b) { return b.id == id && b.type == 4; });
    if (isolated) return std::nullopt;
    throw Error(ErrorKind::DanglingReference, std::string(what) + " references unknown bus " + std::to_string(id));
  };

  net.bus_gens.assign(net.buses.size(), {});
  for (std::size_t g = 0; g < raw.gens.size(); ++g) {
    const auto& gen = raw.gens[g];
    const auto bus = lookup(gen.bus_id, "generator");
    if (gen.status <= 0 || !bus) continue;
    if (gen.pmax == 0.0 && gen.pmin == 0.0) continue;
    if (gen.pmin > gen.pmax || gen.qmin > gen.qmax) {
      throw Error(ErrorKind::InvalidArgument, "generator " + std::to_string(g + 1) + " has inverted bounds");
    }
    const auto& c = raw.gencosts[g];
    net.bus_gens[*bus].push_back(net.gens.size());
    net.gens.push_back({*bus, gen.pmin / base, gen.pmax / base, gen.qmin / base, gen.qmax / base,
                        c.c2 * base * base, c.c1 * base, c.c0});
  }

  net.adjacency.assign(net.buses.size(), {});
  for (std::size_t k = 0; k < raw.branches.size(); ++k) {
    const auto& br = raw.branches[k];
    const auto f = lookup(br.from_bus, "branch");
    const auto t = lookup(br.to_bus, "branch");
    if (br.status <= 0 || !f || !t) continue;
    if (br.r == 0.0 && br.x == 0.0) {
      throw Error(ErrorKind::ZeroImpedance, "branch " + std::to_string(k + 1) + " (" + std::to_string(br.from_bus) +
                                                "-" + std::to_string(br.to_bus) + ") has r = x = 0");
    }
    using cd = std::complex<double>;
    const cd y = 1.0 / cd(br.r, br.x);
    const double tau = br.tap == 0.0 ? 1.0 : br.tap;
    const double sigma = br.shift_deg * std::numbers::pi / 180.0;
    const cd ytt = y + cd(0.0, br.b / 2.0);
    const cd yff = ytt / (tau * tau);
    const cd yft = -y / (tau * std::exp(cd(0.0, -sigma)));
    const cd ytf = -y / (tau * std::exp(cd(0.0, sigma)));

    Network::Line line{};
    line.from = *f;
    line.to = *t;
    line.g_ii = yff.real();
    line.b_ii = yff.imag();
    line.g_ij = yft.real();
    line.b_ij = yft.imag();
    line.g_jj = ytt.real();
    line.b_jj = ytt.imag();
    line.g_ji = ytf.real();
    line.b_ji = ytf.imag();
    line.limited = br.rate_a > 0.0;
    line.s_max = line.limited ? br.rate_a / base : std::numeric_limits<double>::infinity();
    const std::size_t l = net.lines.size();
    net.adjacency[*f].push_back({l, LineEnd::From});
    net.adjacency[*t].push_back({l, LineEnd::To});
    net.lines.push_back(line);
  }
  return net;
}

}  // namespace acopf
