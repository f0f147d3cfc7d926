#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <type_traits>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace wtdchain::cli {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::vector<std::string>>& known_keys() {
  static const std::map<std::string, std::vector<std::string>> keys = {
      {"model", {"kind", "L", "V", "J", "h_file"}},
      {"baths", {"gamma1", "gammaL", "f1", "fL"}},
      {"run", {"initial_state"}},
      {"grid", {"t_max", "points"}},
      {"tolerances", {"quadrature", "oracle"}},
      {"output", {"directory"}},
  };
  return keys;
}

template <typename T>
bool parse_full(const std::string& text, T& out) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = first + text.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// (section, key) -> 1-based line, found by a light scan of the raw text.
std::map<std::pair<std::string, std::string>, int> key_lines(const std::string& text) {
  std::map<std::pair<std::string, std::string>, int> lines;
  std::istringstream in(text);
  std::string line, section;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == ';' || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      lines.emplace(std::make_pair(section, std::string{}), number);
      continue;
    }
    const auto eq = t.find('=');
    if (eq != std::string::npos) {
      lines.emplace(std::make_pair(section, trim(t.substr(0, eq))), number);
    }
  }
  return lines;
}

class Reader {
 public:
  Reader(const pt::ptree& tree, std::string source,
         std::map<std::pair<std::string, std::string>, int> lines)
      : tree_(tree), source_(std::move(source)), lines_(std::move(lines)) {}

  [[noreturn]] void fail(const std::string& section, const std::string& key,
                         const std::string& message) const {
    std::ostringstream os;
    os << source_;
    const auto it = lines_.find({section, key});
    if (it != lines_.end()) os << ":" << it->second;
    os << ": [" << section << "]";
    if (!key.empty()) os << " " << key;
    os << ": " << message;
    throw ValidationError(os.str());
  }

  std::optional<std::string> raw(const std::string& section, const std::string& key) const {
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    const auto value = sec->get_child_optional(pt::ptree::path_type(key, '\0'));
    if (!value) return std::nullopt;
    return trim(value->data());
  }

  std::optional<double> number(const std::string& section, const std::string& key) const {
    const auto text = raw(section, key);
    if (!text) return std::nullopt;
    double value = 0.0;
    if (!parse_full(*text, value) || !std::isfinite(value)) {
      fail(section, key, "expected a finite number, got '" + *text + "'");
    }
    return value;
  }

  std::optional<int> integer(const std::string& section, const std::string& key) const {
    const auto text = raw(section, key);
    if (!text) return std::nullopt;
    long value = 0;
    if (!parse_full(*text, value) || value < 0 || value > 1'000'000) {
      fail(section, key, "expected a non-negative integer, got '" + *text + "'");
    }
    return static_cast<int>(value);
  }

  void check_known() const {
    for (const auto& [section, body] : tree_) {
      const auto it = known_keys().find(section);
      if (it == known_keys().end()) {
        if (body.empty() && !body.data().empty()) {
          fail("", section, "key outside any section");
        }
        fail(section, "", "unknown section");
      }
      for (const auto& [key, value] : body) {
        const auto& allowed = it->second;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
          fail(section, key, "unknown key");
        }
      }
    }
  }

 private:
  const pt::ptree& tree_;
  std::string source_;
  std::map<std::pair<std::string, std::string>, int> lines_;
};

}  // namespace

RunConfig parse_config(std::istream& in, const std::string& source_name,
                       const std::filesystem::path& base_dir) {
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  pt::ptree tree;
  try {
    std::istringstream stream(text);
    pt::ini_parser::read_ini(stream, tree);
  } catch (const pt::ini_parser_error& e) {
    std::ostringstream os;
    os << source_name << ":" << e.line() << ": " << e.message();
    throw ValidationError(os.str());
  }

  const Reader r(tree, source_name, key_lines(text));
  r.check_known();

  RunConfig c;
  c.base_dir = base_dir;
  if (const auto kind = r.raw("model", "kind")) {
    if (*kind == "tight_binding") {
      c.model = ModelKind::TightBinding;
    } else if (*kind == "custom_h") {
      c.model = ModelKind::CustomH;
    } else {
      r.fail("model", "kind", "expected tight_binding or custom_h, got '" + *kind + "'");
    }
  }
  if (const auto l = r.integer("model", "L")) {
    if (*l < 2) r.fail("model", "L", "need at least 2 sites, got " + std::to_string(*l));
    c.sites = *l;
  }
  if (const auto v = r.number("model", "V")) c.v = *v;
  if (const auto j = r.number("model", "J")) c.j = *j;
  if (const auto h = r.raw("model", "h_file")) c.h_file = *h;
  if (c.model == ModelKind::CustomH && c.h_file.empty()) {
    r.fail("model", "h_file", "kind = custom_h needs h_file");
  }

  auto rate = [&](const char* key, double& out) {
    if (const auto v = r.number("baths", key)) {
      if (*v < 0.0) r.fail("baths", key, "rate must be >= 0");
      out = *v;
    }
  };
  auto fermi = [&](const char* key, double& out) {
    if (const auto v = r.number("baths", key)) {
      if (*v < 0.0 || *v > 1.0) r.fail("baths", key, "Fermi factor must lie in [0, 1]");
      out = *v;
    }
  };
  rate("gamma1", c.gamma1);
  rate("gammaL", c.gammaL);
  fermi("f1", c.f1);
  fermi("fL", c.fL);

  if (const auto s = r.raw("run", "initial_state")) {
    if (*s == "steady") {
      c.initial_state = StateKind::Steady;
    } else if (*s == "vacuum") {
      c.initial_state = StateKind::Vacuum;
    } else {
      r.fail("run", "initial_state", "expected steady or vacuum, got '" + *s + "'");
    }
  }
  if (c.initial_state == StateKind::Steady && (c.gamma1 <= 0.0 || c.gammaL <= 0.0)) {
    r.fail("baths", c.gamma1 <= 0.0 ? "gamma1" : "gammaL",
           "the steady state needs both boundary rates > 0");
  }

  if (const auto t = r.number("grid", "t_max")) {
    if (*t <= 0.0) r.fail("grid", "t_max", "must be > 0");
    c.t_max = *t;
  }
  if (const auto p = r.integer("grid", "points")) {
    if (*p < 2) r.fail("grid", "points", "need at least 2 points");
    c.points = *p;
  }
  if (const auto q = r.number("tolerances", "quadrature")) {
    if (*q <= 0.0) r.fail("tolerances", "quadrature", "must be > 0");
    c.quadrature_tol = *q;
  }
  if (const auto o = r.number("tolerances", "oracle")) {
    if (*o <= 0.0) r.fail("tolerances", "oracle", "must be > 0");
    c.oracle_tol = *o;
  }
  if (const auto d = r.raw("output", "directory")) {
    if (d->empty()) r.fail("output", "directory", "must not be empty");
    c.output_dir = *d;
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config file '" + path.string() + "'");
  return parse_config(in, path.string(), path.parent_path().empty() ? "." : path.parent_path());
}

CMatrix read_h_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open h matrix file '" + path.string() + "'");
  std::vector<std::vector<Complex>> rows;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::vector<double> values;
    std::istringstream fields(t);
    std::string field;
    while (std::getline(fields, field, ',')) {
      double v = 0.0;
      if (!parse_full(trim(field), v) || !std::isfinite(v)) {
        throw ValidationError(path.string() + ":" + std::to_string(number) +
                              ": expected a number, got '" + trim(field) + "'");
      }
      values.push_back(v);
    }
    if (values.size() % 2 != 0) {
      throw ValidationError(path.string() + ":" + std::to_string(number) +
                            ": expected real,imag pairs (even number of fields)");
    }
    std::vector<Complex> row;
    for (std::size_t k = 0; k < values.size(); k += 2) row.emplace_back(values[k], values[k + 1]);
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ValidationError(path.string() + ":" + std::to_string(number) + ": row has " +
                            std::to_string(row.size()) + " entries, expected " +
                            std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n == 0 || static_cast<Eigen::Index>(rows.front().size()) != n) {
    throw ValidationError(path.string() + ": h matrix must be square, got " +
                          std::to_string(n) + " rows");
  }
  CMatrix h(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) h(a, b) = rows[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
  }
  return h;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

ChainSpec build_spec(const RunConfig& c) {
  ChainSpec spec;
  if (c.model == ModelKind::TightBinding) {
    spec.h = build_tight_binding(c.sites, c.v, c.j);
  } else {
    std::filesystem::path p(c.h_file);
    if (p.is_relative()) p = c.base_dir / p;
    spec.h = read_h_matrix(p);
  }
  spec.gamma1 = c.gamma1;
  spec.gammaL = c.gammaL;
  spec.f1 = c.f1;
  spec.fL = c.fL;
  spec.validate();
  return spec;
}

std::string to_ini(const RunConfig& c, const std::string& prefix) {
  std::ostringstream os;
  auto line = [&](const std::string& s) { os << prefix << s << '\n'; };
  auto kv = [&](const std::string& k, const auto& v) {
    using V = std::decay_t<decltype(v)>;
    if constexpr (std::is_same_v<V, double>) {
      line(k + " = " + format_double(v));
    } else {
      std::ostringstream val;
      val << v;
      line(k + " = " + val.str());
    }
  };
  line("[model]");
  kv("kind", c.model == ModelKind::TightBinding ? "tight_binding" : "custom_h");
  if (c.model == ModelKind::TightBinding) {
    kv("L", c.sites);
    kv("V", c.v);
    kv("J", c.j);
  } else {
    kv("h_file", c.h_file);
  }
  line("[baths]");
  kv("gamma1", c.gamma1);
  kv("gammaL", c.gammaL);
  kv("f1", c.f1);
  kv("fL", c.fL);
  line("[run]");
  kv("initial_state", std::string(to_string(c.initial_state)));
  line("[grid]");
  if (c.t_max) kv("t_max", *c.t_max);
  kv("points", c.points);
  line("[tolerances]");
  kv("quadrature", c.quadrature_tol);
  kv("oracle", c.oracle_tol);
  line("[output]");
  kv("directory", c.output_dir);
  return os.str();
}

}  // namespace wtdchain::cli
