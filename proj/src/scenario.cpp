#include "issf/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "example1_scenario.hpp"

namespace issf {
namespace {

constexpr double kDefaultGainWindow = 100.0;

struct Entry {
  std::string key;
  std::string value;
  std::size_t line = 0;
  std::size_t key_col = 0;
  std::size_t value_col = 0;  // first character of the value text itself
  bool quoted = false;
  bool used = false;
};

struct Section {
  std::string name;
  std::size_t line = 0;
  std::size_t col = 0;
  std::vector<Entry> entries;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool key_char(char c) { return ident_char(c) || c == '.' || c == '-'; }

bool is_identifier(std::string_view s) {
  if (s.empty() || !ident_start(s[0])) return false;
  return std::all_of(s.begin(), s.end(), ident_char);
}

std::string trim(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

class Reader {
 public:
  Reader(std::string_view text, std::string source) : text_(text), source_(std::move(source)) {}

  std::vector<Section> read() {
    std::vector<Section> sections;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text_.size()) {
      const std::size_t end = std::min(text_.find('\n', pos), text_.size());
      std::string_view line = text_.substr(pos, end - pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      ++line_no;
      read_line(line, line_no, sections);
      if (end == text_.size()) break;
      pos = end + 1;
    }
    return sections;
  }

 private:
  [[noreturn]] void fail(std::size_t line, std::size_t col, const std::string& msg) const {
    throw ScenarioError(source_, line, col, msg);
  }

  void expect_rest_blank(std::string_view line, std::size_t i, std::size_t line_no) const {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i < line.size() && line[i] != '#') fail(line_no, i + 1, "unexpected text after value");
  }

  void read_line(std::string_view line, std::size_t line_no, std::vector<Section>& sections) const {
    std::size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i == line.size() || line[i] == '#') return;

    if (line[i] == '[') {
      const std::size_t close = line.find(']', i);
      if (close == std::string_view::npos) fail(line_no, i + 1, "unterminated section header");
      const std::string name = trim(line.substr(i + 1, close - i - 1));
      if (!is_identifier(name)) fail(line_no, i + 2, "invalid section name '" + name + "'");
      expect_rest_blank(line, close + 1, line_no);
      for (const auto& s : sections) {
        if (s.name == name) fail(line_no, i + 1, "section [" + name + "] appears twice");
      }
      sections.push_back(Section{name, line_no, i + 1, {}});
      return;
    }

    if (sections.empty()) fail(line_no, i + 1, "key outside of any section");
    Entry e;
    e.line = line_no;
    e.key_col = i + 1;
    const std::size_t key_begin = i;
    while (i < line.size() && key_char(line[i])) ++i;
    e.key = std::string(line.substr(key_begin, i - key_begin));
    if (e.key.empty()) fail(line_no, i + 1, std::string("unexpected character '") + line[i] + "'");
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i == line.size() || line[i] != '=') fail(line_no, i + 1, "expected '=' after key '" + e.key + "'");
    ++i;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;

    if (i < line.size() && line[i] == '"') {
      e.quoted = true;
      e.value_col = i + 2;
      const std::size_t open = i;
      ++i;
      bool closed = false;
      while (i < line.size()) {
        const char c = line[i];
        if (c == '\\') {
          if (i + 1 >= line.size() || (line[i + 1] != '"' && line[i + 1] != '\\')) {
            fail(line_no, i + 1, "unsupported escape sequence");
          }
          e.value.push_back(line[i + 1]);
          i += 2;
          continue;
        }
        if (c == '"') {
          closed = true;
          ++i;
          break;
        }
        e.value.push_back(c);
        ++i;
      }
      if (!closed) fail(line_no, open + 1, "unterminated string");
      expect_rest_blank(line, i, line_no);
    } else {
      const std::size_t begin = i;
      const std::size_t hash = line.find('#', i);
      const std::size_t stop = hash == std::string_view::npos ? line.size() : hash;
      e.value = trim(line.substr(begin, stop - begin));
      e.value_col = begin + 1;
    }

    Section& s = sections.back();
    for (const auto& other : s.entries) {
      if (other.key == e.key) {
        fail(line_no, e.key_col, "key '" + e.key + "' repeated in [" + s.name + "] (first on line " +
                                     std::to_string(other.line) + ")");
      }
    }
    s.entries.push_back(std::move(e));
  }

  std::string_view text_;
  std::string source_;
};

class Builder {
 public:
  Builder(std::vector<Section> sections, std::string source) : sections_(std::move(sections)), source_(std::move(source)) {
    static const std::set<std::string> known = {"system", "subsystem1", "subsystem2", "sampling",
                                                "simulation", "compose", "output"};
    for (const auto& s : sections_) {
      if (!known.count(s.name)) fail(s.line, s.col, "unknown section [" + s.name + "]");
    }
  }

  Scenario build(const std::string& name) {
    Scenario sc;
    sc.name = name;
    read_system(sc);
    for (int i = 1; i <= 2; ++i) read_subsystem(sc, i);

    std::vector<std::string> sources;
    for (const auto& s : sc.subsystems) sources.insert(sources.end(), s.dynamics.begin(), s.dynamics.end());
    sc.f = VectorField::parse(sources, sc.partition);

    read_sampling(sc);
    read_simulation(sc);
    read_compose(sc);
    read_output(sc);

    for (const auto& s : sections_) {
      for (const auto& e : s.entries) {
        if (!e.used) fail(e.line, e.key_col, "unknown key '" + e.key + "' in [" + s.name + "]");
      }
    }
    return sc;
  }

 private:
  [[noreturn]] void fail(std::size_t line, std::size_t col, const std::string& msg) const {
    throw ScenarioError(source_, line, col, msg);
  }
  [[noreturn]] void fail(const Entry& e, const std::string& msg) const { fail(e.line, e.value_col, msg); }

  Section* section(const std::string& name) {
    for (auto& s : sections_) {
      if (s.name == name) return &s;
    }
    return nullptr;
  }

  Section& require_section(const std::string& name) {
    Section* s = section(name);
    if (!s) fail(1, 1, "missing section [" + name + "]");
    return *s;
  }

  static Entry* find(Section* s, const std::string& key) {
    if (!s) return nullptr;
    for (auto& e : s->entries) {
      if (e.key == key) {
        e.used = true;
        return &e;
      }
    }
    return nullptr;
  }

  Entry& require(Section& s, const std::string& key) {
    Entry* e = find(&s, key);
    if (!e) fail(s.line, s.col, "missing key '" + key + "' in [" + s.name + "]");
    return *e;
  }

  double number(const Entry& e) const {
    double v = 0.0;
    const char* first = e.value.data();
    const char* last = first + e.value.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) fail(e, "expected a number, got '" + e.value + "'");
    return v;
  }

  std::uint64_t integer(const Entry& e) const {
    std::uint64_t v = 0;
    const char* first = e.value.data();
    const char* last = first + e.value.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) fail(e, "expected a non-negative integer, got '" + e.value + "'");
    return v;
  }

  std::vector<std::string> split(const Entry& e) const {
    std::vector<std::string> out;
    if (trim(e.value).empty()) return out;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = e.value.find(',', pos);
      out.push_back(trim(std::string_view(e.value).substr(pos, comma == std::string::npos ? std::string::npos
                                                                                           : comma - pos)));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    return out;
  }

  std::vector<std::string> names(const Entry& e) const {
    std::vector<std::string> out = split(e);
    for (const auto& n : out) {
      if (!is_identifier(n)) fail(e, "invalid variable name '" + n + "'");
    }
    return out;
  }

  /// Rethrows an expression error at its position in the file.
  [[noreturn]] void relocate(const Entry& e, const ParseError& pe) const {
    const std::size_t col = e.value_col + (pe.line() == 1 ? pe.column() - 1 : 0);
    fail(e.line, col, pe.detail());
  }

  void read_system(Scenario& sc) {
    Section& s = require_section("system");
    Entry& st1 = require(s, "states1");
    Entry& st2 = require(s, "states2");
    sc.subsystems[0].states = names(st1);
    sc.subsystems[1].states = names(st2);
    if (sc.subsystems[0].states.empty()) fail(st1, "subsystem 1 needs at least one state");
    if (sc.subsystems[1].states.empty()) fail(st2, "subsystem 2 needs at least one state");
    if (Entry* e = find(&s, "inputs1")) sc.subsystems[0].inputs = names(*e);
    if (Entry* e = find(&s, "inputs2")) sc.subsystems[1].inputs = names(*e);

    std::set<std::string> seen;
    for (int i = 0; i < 2; ++i) {
      for (const auto* list : {&sc.subsystems[i].states, &sc.subsystems[i].inputs}) {
        for (const auto& n : *list) {
          if (!seen.insert(n).second) fail(s.line, s.col, "variable '" + n + "' declared twice in [system]");
        }
      }
      sc.subsystems[i].index = i + 1;
    }
    sc.partition.x1 = sc.subsystems[0].states;
    sc.partition.x2 = sc.subsystems[1].states;
    sc.partition.u = sc.subsystems[0].inputs;
    sc.partition.u.insert(sc.partition.u.end(), sc.subsystems[1].inputs.begin(), sc.subsystems[1].inputs.end());
  }

  GainSpec read_gain(Section& s, const std::string& role, GainClass default_class, int index) {
    GainSpec spec;
    spec.role = role;
    Entry& e = require(s, role);
    spec.source = e.value;

    GainClass cls = default_class;
    if (Entry* c = find(&s, role + ".class")) {
      const auto parsed = parse_gain_class(c->value);
      if (!parsed) fail(*c, "unknown gain class '" + c->value + "' (use K, K-inf, extended-K or extended-K-inf)");
      cls = *parsed;
    }
    double window = kDefaultGainWindow;
    if (Entry* w = find(&s, role + ".window")) {
      window = number(*w);
      if (!(window > 0.0)) fail(*w, "window must be positive");
    }
    if (role == "phi" && cls != GainClass::ExtendedKInfinity) {
      fail(e, "cross gain phi must be claimed extended-K-inf");
    }

    try {
      spec.gain = GainFn::parse(e.value, cls, window);
    } catch (const ParseError& pe) {
      relocate(e, pe);
    }
    const bool zero = spec.gain.expr() && spec.gain.expr()->is_zero();
    if (zero && role == "gamma") return spec;

    ClassCertificate cert = certify_class(spec.gain);
    cert.subject = role + std::to_string(index) + "(r) = " + e.value;
    if (!cert.passed()) {
      fail(e, role + " of subsystem" + std::to_string(index) + " fails class " + std::string(to_string(cls)) +
                  " certification: " + cert.reason);
    }
    spec.certificate = std::move(cert);
    return spec;
  }

  void read_subsystem(Scenario& sc, int index) {
    const std::string name = "subsystem" + std::to_string(index);
    Section& s = require_section(name);
    SubsystemSpec& sub = sc.subsystems[index - 1];

    std::vector<std::string> visible = sc.partition.x1;
    visible.insert(visible.end(), sc.partition.x2.begin(), sc.partition.x2.end());
    visible.insert(visible.end(), sub.inputs.begin(), sub.inputs.end());

    for (auto& e : s.entries) {
      if (e.key.rfind("f.", 0) != 0) continue;
      const std::string state = e.key.substr(2);
      if (std::find(sub.states.begin(), sub.states.end(), state) == sub.states.end()) {
        fail(e.line, e.key_col, "'" + state + "' is not a state of subsystem " + std::to_string(index));
      }
    }
    for (const auto& state : sub.states) {
      Entry& e = require(s, "f." + state);
      try {
        parse(e.value, visible);
      } catch (const ParseError& pe) {
        relocate(e, pe);
      }
      sub.dynamics.push_back(e.value);
    }

    Entry& h = require(s, "h");
    try {
      sub.h = ScalarField::parse(h.value, sub.states);
    } catch (const ParseError& pe) {
      relocate(h, pe);
    }
    sub.barrier = h.value;

    sub.phi = read_gain(s, "phi", GainClass::ExtendedKInfinity, index);
    sub.gamma = read_gain(s, "gamma", GainClass::K, index);
    sub.alpha = read_gain(s, "alpha", GainClass::ExtendedK, index);
  }

  void read_sampling(Scenario& sc) {
    Section* s = section("sampling");
    if (!s) fail(1, 1, "missing section [sampling]");
    for (auto& e : s->entries) {
      if (e.key.rfind("box.", 0) != 0) continue;
      const std::string var = e.key.substr(4);
      const bool state = std::find(sc.partition.x1.begin(), sc.partition.x1.end(), var) != sc.partition.x1.end() ||
                         std::find(sc.partition.x2.begin(), sc.partition.x2.end(), var) != sc.partition.x2.end();
      if (!state) fail(e.line, e.key_col, "'" + var + "' is not a declared state variable");
    }
    std::vector<std::string> states = sc.partition.x1;
    states.insert(states.end(), sc.partition.x2.begin(), sc.partition.x2.end());
    for (const auto& var : states) {
      Entry& e = require(*s, "box." + var);
      const auto parts = split(e);
      if (parts.size() != 2) fail(e, "expected 'lo, hi'");
      Entry lo = e;
      lo.value = parts[0];
      Entry hi = e;
      hi.value = parts[1];
      const Interval iv{number(lo), number(hi)};
      if (!(iv.lo < iv.hi)) fail(e, "empty interval for '" + var + "'");
      sc.plan.state_box.push_back(iv);
    }
    if (Entry* e = find(s, "u_max")) {
      sc.plan.u_max = number(*e);
      if (sc.plan.u_max < 0.0) fail(*e, "u_max must be non-negative");
    }
    if (Entry* e = find(s, "samples")) {
      sc.plan.samples = integer(*e);
      if (sc.plan.samples == 0) fail(*e, "samples must be at least 1");
    }
    if (Entry* e = find(s, "strategy")) {
      const auto st = parse_strategy(e->value);
      if (!st) fail(*e, "unknown strategy '" + e->value + "'");
      sc.plan.strategy = *st;
    }
    if (Entry* e = find(s, "seed")) sc.plan.seed = integer(*e);
  }

  void read_simulation(Scenario& sc) {
    Section* s = section("simulation");
    InvarianceOptions& o = sc.simulation;
    if (Entry* e = find(s, "trajectories")) {
      o.trajectories = integer(*e);
      if (o.trajectories == 0) fail(*e, "trajectories must be at least 1");
    }
    if (Entry* e = find(s, "dt")) {
      o.dt = number(*e);
      if (!(o.dt > 0.0)) fail(*e, "dt must be positive");
    }
    if (Entry* e = find(s, "horizon")) {
      o.horizon = number(*e);
      if (!(o.horizon >= o.dt)) fail(*e, "horizon must be at least dt");
    }
    if (Entry* e = find(s, "boundary_fraction")) {
      o.boundary_fraction = number(*e);
      if (o.boundary_fraction < 0.0 || o.boundary_fraction > 1.0) fail(*e, "boundary_fraction must lie in [0, 1]");
    }
    if (Entry* e = find(s, "hold")) {
      o.hold = number(*e);
      if (!(o.hold > 0.0)) fail(*e, "hold must be positive");
    }
  }

  void read_compose(Scenario& sc) {
    Section* s = section("compose");
    if (Entry* e = find(s, "window")) {
      sc.window = number(*e);
      if (sc.window < 2.0) fail(*e, "compose window must be at least 2");
    }
    if (Entry* e = find(s, "grid")) {
      sc.grid = integer(*e);
      if (sc.grid < 16) fail(*e, "grid must have at least 16 points");
    }
    if (Entry* e = find(s, "phi_override")) {
      try {
        GainFn::parse(e->value, GainClass::ExtendedKInfinity, sc.window);
      } catch (const ParseError& pe) {
        relocate(*e, pe);
      }
      sc.phi_override = e->value;
    }
    for (const auto& sub : sc.subsystems) {
      if (sub.phi.gain.radius() < sc.window + 1.0) {
        const Section& ss = *section("subsystem" + std::to_string(sub.index));
        fail(ss.line, ss.col, "phi window of subsystem" + std::to_string(sub.index) +
                                  " must reach the compose window + 1");
      }
    }
  }

  void read_output(Scenario& sc) {
    if (Entry* e = find(section("output"), "dir")) {
      if (e->value.empty()) fail(*e, "output dir must not be empty");
      sc.output_dir = e->value;
    }
  }

  std::vector<Section> sections_;
  std::string source_;
};

}  // namespace

Subsystem Scenario::subsystem(std::size_t i) const {
  const SubsystemSpec& s = subsystems.at(i);
  return Subsystem{s.index, f, s.h, s.alpha.gain, s.phi.gain, s.gamma.gain, s.inputs};
}

Scenario parse_scenario(std::string_view text, const std::string& source_name) {
  auto sections = Reader(text, source_name).read();
  std::string name = source_name;
  const auto slash = name.find_last_of('/');
  if (slash != std::string::npos) name = name.substr(slash + 1);
  const auto dot = name.rfind('.');
  if (dot != std::string::npos && dot > 0) name = name.substr(0, dot);
  return Builder(std::move(sections), source_name).build(name);
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(path.string(), 0, 0, "cannot open scenario file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.string());
}

std::string_view bundled_example1() { return kExample1Scenario; }

}  // namespace issf
