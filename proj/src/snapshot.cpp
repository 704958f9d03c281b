#include "prefcore/snapshot.hpp"

#include <fstream>
#include <sstream>

#include "prefcore/error.hpp"
#include "prefcore/log_io.hpp"

namespace prefcore {

namespace {

template <class M>
void write_block(std::ostream& out, const std::string& name, const M& m,
                 Eigen::Index rows, Eigen::Index cols) {
  out << "block " << name << ' ' << rows << ' ' << cols << '\n';
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (c) out << ' ';
      out << format_double(m.data()[r * cols + c]);
    }
    out << '\n';
  }
}

void write_mat(std::ostream& out, const std::string& name, const Mat& m) {
  write_block(out, name, m, m.rows(), m.cols());
}

void write_vec(std::ostream& out, const std::string& name, const Vec& v) {
  write_block(out, name, v, 1, v.size());
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string line(const std::string& what) {
    std::string l;
    if (!std::getline(in_, l)) throw DataError("snapshot truncated: expected " + what);
    return l;
  }

  std::istringstream fields(const std::string& what) { return std::istringstream(line(what)); }

  // Reads "block <name> <rows> <cols>" followed by its rows.
  std::vector<double> block(const std::string& name, Eigen::Index& rows, Eigen::Index& cols) {
    auto header = fields("block " + name);
    std::string tag, got;
    header >> tag >> got >> rows >> cols;
    if (!header || tag != "block" || got != name) {
      throw DataError("snapshot: expected block '" + name + "'");
    }
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(rows * cols));
    for (Eigen::Index r = 0; r < rows; ++r) {
      auto row = fields("row of " + name);
      std::string tok;
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (!(row >> tok)) throw DataError("snapshot: short row in block " + name);
        values.push_back(parse_double(tok, "value in block " + name));
      }
    }
    return values;
  }

  Mat mat(const std::string& name) {
    Eigen::Index r = 0, c = 0;
    auto v = block(name, r, c);
    Mat m(r, c);
    std::copy(v.begin(), v.end(), m.data());
    return m;
  }

  Vec vec(const std::string& name) {
    Eigen::Index r = 0, c = 0;
    auto v = block(name, r, c);
    if (r != 1) throw DataError("snapshot: block " + name + " must have one row");
    Vec out(c);
    std::copy(v.begin(), v.end(), out.data());
    return out;
  }

 private:
  std::istream& in_;
};

}  // namespace

std::string ModelSnapshot::kind() const {
  if (cf) return "cf";
  if (seq) return seq->knowledge_bound() ? "ke" : "seq";
  return "empty";
}

void write_snapshot(std::ostream& out, const ModelSnapshot& s) {
  if (!s.cf && !s.seq) throw DataError("snapshot holds no model");
  out << kModelFormat << '\n' << "digest " << s.digest << '\n';
  out << "kind " << s.kind() << '\n';
  if (s.cf) {
    const auto& m = *s.cf;
    out << "dims " << m.num_users() << ' ' << m.num_actions() << ' ' << m.dim() << '\n';
    write_mat(out, "P", m.P);
    write_mat(out, "Q", m.Q);
    out << "known ";
    for (bool k : m.known_users) out << (k ? '1' : '0');
    out << '\n';
    return;
  }
  const auto& m = *s.seq;
  out << "dims " << m.num_actions() << ' ' << m.dim() << '\n';
  out << "bind " << (m.bind == BindMode::concat ? "concat" : "hadamard") << '\n';
  out << "init " << (m.init_mode == InitMode::from_cf ? "from_cf" : "shared") << '\n';
  const auto& p = m.params;
  write_mat(out, "Wz", p.Wz);
  write_mat(out, "Uz", p.Uz);
  write_mat(out, "Wr", p.Wr);
  write_mat(out, "Ur", p.Ur);
  write_mat(out, "Wn", p.Wn);
  write_mat(out, "Un", p.Un);
  write_vec(out, "bz", p.bz);
  write_vec(out, "br", p.br);
  write_vec(out, "bn", p.bn);
  write_mat(out, "Q", p.Q);
  write_vec(out, "h0", p.h0);
  write_mat(out, "proj", p.proj);
  write_mat(out, "knowledge", m.knowledge);
  out << "user_init " << m.user_init.size() << '\n';
  for (const auto& [u, v] : m.user_init) {
    out << "user " << raw(u) << '\n';
    write_vec(out, "state", v);
  }
}

ModelSnapshot read_snapshot(std::istream& in) {
  Reader r(in);
  if (r.line("format line") != kModelFormat) {
    throw DataError("missing '" + std::string(kModelFormat) + "' header");
  }
  ModelSnapshot s;
  const auto digest = r.line("digest line");
  if (digest.rfind("digest ", 0) != 0) throw DataError("missing digest line in snapshot");
  s.digest = digest.substr(7);
  auto kind_line = r.fields("kind line");
  std::string tag, kind;
  kind_line >> tag >> kind;
  if (tag != "kind") throw DataError("missing kind line in snapshot");

  if (kind == "cf") {
    auto dims = r.fields("dims");
    std::size_t users = 0, actions = 0, dim = 0;
    dims >> tag >> users >> actions >> dim;
    CfModel m;
    m.P = r.mat("P");
    m.Q = r.mat("Q");
    if (static_cast<std::size_t>(m.P.rows()) != users ||
        static_cast<std::size_t>(m.Q.rows()) != actions ||
        static_cast<std::size_t>(m.P.cols()) != dim ||
        static_cast<std::size_t>(m.Q.cols()) != dim) {
      throw DataError("snapshot: CF blocks disagree with declared dimensions");
    }
    auto known = r.fields("known");
    std::string bits;
    known >> tag >> bits;
    if (tag != "known" || bits.size() != users) throw DataError("snapshot: bad known-user line");
    for (char b : bits) m.known_users.push_back(b == '1');
    s.cf = std::move(m);
    return s;
  }
  if (kind != "seq" && kind != "ke") throw DataError("unknown snapshot kind '" + kind + "'");

  r.line("dims");
  SeqModel m;
  auto bind = r.fields("bind");
  std::string value;
  bind >> tag >> value;
  m.bind = value == "concat" ? BindMode::concat : BindMode::hadamard;
  auto init = r.fields("init");
  init >> tag >> value;
  m.init_mode = value == "from_cf" ? InitMode::from_cf : InitMode::shared;
  auto& p = m.params;
  p.Wz = r.mat("Wz");
  p.Uz = r.mat("Uz");
  p.Wr = r.mat("Wr");
  p.Ur = r.mat("Ur");
  p.Wn = r.mat("Wn");
  p.Un = r.mat("Un");
  p.bz = r.vec("bz");
  p.br = r.vec("br");
  p.bn = r.vec("bn");
  p.Q = r.mat("Q");
  p.h0 = r.vec("h0");
  p.proj = r.mat("proj");
  m.knowledge = r.mat("knowledge");
  auto ui = r.fields("user_init");
  std::size_t count = 0;
  ui >> tag >> count;
  if (tag != "user_init") throw DataError("snapshot: missing user_init section");
  for (std::size_t i = 0; i < count; ++i) {
    auto user_line = r.fields("user line");
    std::uint32_t id = 0;
    user_line >> tag >> id;
    if (!user_line || tag != "user") throw DataError("snapshot: bad user line");
    m.user_init[user_id(id)] = r.vec("state");
  }
  s.seq = std::move(m);
  return s;
}

void save_snapshot(const std::filesystem::path& path, const ModelSnapshot& snapshot) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_snapshot(out, snapshot);
}

ModelSnapshot load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open snapshot " + path.string());
  return read_snapshot(in);
}

}  // namespace prefcore
