#pragma once

#include <array>
#include <cstddef>
#include <istream>
#include <string>
#include <vector>

namespace acopf {

// Rows of a MATPOWER case exactly as read from the file (MW, MVAr, degrees).
struct RawCase {
  struct Bus {
    int id;
    int type;
    double pd, qd, gs, bs;
    double vm, va_deg, base_kv;
    double vmax, vmin;
  };
  struct Gen {
    int bus_id;
    double pg, qg, qmax, qmin, vg;
    int status;
    double pmax, pmin;
  };
  struct Branch {
    int from_bus, to_bus;
    double r, x, b;
    double rate_a;
    double tap;
    double shift_deg;
    int status;
  };
  struct GenCost {
    int model;
    int n_coeffs;
    double c2, c1, c0;
  };

  double base_mva = 0.0;
  std::vector<Bus> buses;
  std::vector<Gen> gens;
  std::vector<Branch> branches;
  std::vector<GenCost> gencosts;
};

RawCase parse_matpower(std::istream& in);
RawCase parse_matpower(const std::string& text);
RawCase load_matpower_file(const std::string& path);

enum class LineEnd : unsigned char { From, To };

// One incident line endpoint at a bus.
struct Incidence {
  std::size_t line;
  LineEnd end;
};

// Per-unit, radians, in-service components only. Immutable once built.
struct Network {
  struct Bus {
    int id;
    double g_sh, b_sh;
    double p_d, q_d;
    double v_min, v_max;
  };
  struct Generator {
    std::size_t bus;
    double p_min, p_max, q_min, q_max;
    double c2, c1, c0;  // cost in $/h for p in per-unit
  };
  struct Line {
    std::size_t from, to;
    double g_ii, b_ii, g_ij, b_ij;
    double g_jj, b_jj, g_ji, b_ji;
    double s_max;      // per-unit; only meaningful when limited
    bool limited;      // rateA == 0 means no flow limit
  };

  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Generator> gens;
  std::vector<Line> lines;
  std::vector<std::vector<Incidence>> adjacency;     // B_i per bus
  std::vector<std::vector<std::size_t>> bus_gens;    // generators per bus
  std::size_t ref_bus = 0;

  std::size_t n_bus() const { return buses.size(); }
  std::size_t n_gen() const { return gens.size(); }
  std::size_t n_line() const { return lines.size(); }
};

Network build_network(const RawCase& raw);

inline Network load_network(const std::string& path) { return build_network(load_matpower_file(path)); }

}  // namespace acopf
