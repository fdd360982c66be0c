#include "qleak/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <system_error>
#include <vector>

namespace qleak {

namespace {

void write_double(std::ostream& os, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  os.write(buf, res.ptr - buf);
}

double parse_double(const std::string& tok) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto res = std::from_chars(first, last, v);
  require(res.ec == std::errc{} && res.ptr == last, Errc::IoError, "bad number: " + tok);
  return v;
}

// next non-comment, non-empty line split into tokens
bool next_tokens(std::istream& is, std::vector<std::string>& toks) {
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    toks.clear();
    std::string t;
    while (ls >> t) toks.push_back(t);
    if (!toks.empty()) return true;
  }
  return false;
}

}  // namespace

void write_matrix(std::ostream& os, const ComplexMatrix& m) {
  os << m.rows << ' ' << m.cols << '\n';
  for (const Cx& z : m.a) {
    write_double(os, z.real());
    os << ' ';
    write_double(os, z.imag());
    os << '\n';
  }
}

ComplexMatrix read_matrix(std::istream& is) {
  std::vector<std::string> toks;
  require(next_tokens(is, toks) && toks.size() == 2, Errc::IoError,
          "matrix: expected 'rows cols' header");
  const std::size_t rows = static_cast<std::size_t>(parse_double(toks[0]));
  const std::size_t cols = static_cast<std::size_t>(parse_double(toks[1]));
  ComplexMatrix m(rows, cols);
  std::size_t have = 0;
  while (have < rows * cols) {
    require(next_tokens(is, toks), Errc::IoError, "matrix: truncated entries");
    require(toks.size() % 2 == 0, Errc::IoError, "matrix: entries come as 're im' pairs");
    for (std::size_t i = 0; i + 1 < toks.size(); i += 2) {
      require(have < rows * cols, Errc::IoError, "matrix: too many entries");
      m.a[have++] = Cx{parse_double(toks[i]), parse_double(toks[i + 1])};
    }
  }
  require(all_finite(m), Errc::NotFinite, "matrix: non-finite entry");
  return m;
}

void write_state(std::ostream& os, const DensityOperator& rho) {
  os << "layout";
  for (const Subsystem& s : rho.layout.subsystems())
    os << ' ' << s.label << ':' << s.dim << ':' << (s.classical ? 'c' : 'q');
  os << '\n';
  write_matrix(os, rho.matrix);
}

DensityOperator read_state(std::istream& is) {
  std::vector<std::string> toks;
  require(next_tokens(is, toks) && toks.front() == "layout" && toks.size() >= 2, Errc::IoError,
          "state: expected 'layout label:dim:c|q ...' header");
  std::vector<Subsystem> subs;
  for (std::size_t i = 1; i < toks.size(); ++i) {
    const std::string& t = toks[i];
    const auto c1 = t.find(':');
    const auto c2 = t.rfind(':');
    require(c1 != std::string::npos && c2 != c1, Errc::IoError, "state: bad layout token " + t);
    Subsystem s;
    s.label = t.substr(0, c1);
    s.dim = static_cast<std::size_t>(parse_double(t.substr(c1 + 1, c2 - c1 - 1)));
    const std::string flag = t.substr(c2 + 1);
    require(flag == "c" || flag == "q", Errc::IoError, "state: flag must be c or q in " + t);
    s.classical = flag == "c";
    subs.push_back(std::move(s));
  }
  ComplexMatrix m = read_matrix(is);
  return DensityOperator::make(SystemLayout(std::move(subs)), std::move(m));
}

void write_kraus(std::ostream& os, const KrausChannel& ch) {
  os << ch.kraus.size() << ' ' << ch.input_dim << ' ' << ch.output_dim << '\n';
  for (const ComplexMatrix& e : ch.kraus) write_matrix(os, e);
}

KrausChannel read_kraus(std::istream& is) {
  std::vector<std::string> toks;
  require(next_tokens(is, toks) && toks.size() == 3, Errc::IoError,
          "kraus: expected 'k in_dim out_dim' header");
  const std::size_t k = static_cast<std::size_t>(parse_double(toks[0]));
  const std::size_t in = static_cast<std::size_t>(parse_double(toks[1]));
  const std::size_t out = static_cast<std::size_t>(parse_double(toks[2]));
  require(k >= 1, Errc::IoError, "kraus: need at least one operator");
  std::vector<ComplexMatrix> ops;
  for (std::size_t i = 0; i < k; ++i) {
    ComplexMatrix e = read_matrix(is);
    require(e.rows == out && e.cols == in, Errc::IoError, "kraus: operator shape mismatch");
    ops.push_back(std::move(e));
  }
  return KrausChannel::make(std::move(ops));
}

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), Errc::IoError, "cannot open " + path);
  return f;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  require(f.good(), Errc::IoError, "cannot write " + path);
  return f;
}

}  // namespace

ComplexMatrix load_matrix(const std::string& path) {
  auto f = open_in(path);
  return read_matrix(f);
}

void save_matrix(const std::string& path, const ComplexMatrix& m) {
  auto f = open_out(path);
  write_matrix(f, m);
}

DensityOperator load_state(const std::string& path) {
  auto f = open_in(path);
  return read_state(f);
}

void save_state(const std::string& path, const DensityOperator& rho) {
  auto f = open_out(path);
  write_state(f, rho);
}

KrausChannel load_kraus(const std::string& path) {
  auto f = open_in(path);
  return read_kraus(f);
}

void save_kraus(const std::string& path, const KrausChannel& ch) {
  auto f = open_out(path);
  write_kraus(f, ch);
}

std::string read_text_file(const std::string& path) {
  auto f = open_in(path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace qleak
