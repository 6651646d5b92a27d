#include "jetfrob/dsl.hpp"

#include <fstream>
#include <sstream>

#include "jetfrob/parse.hpp"

namespace jetfrob {

namespace {

[[noreturn]] void fail(int line, const std::string& msg) {
  throw std::runtime_error("line " + std::to_string(line) + ": " + msg);
}

std::string strip(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string t; is >> t;) out.push_back(t);
  return out;
}

Rat parse_rat(const std::string& s, int line) {
  try {
    size_t sl = s.find('/');
    if (sl == std::string::npos) return Rat(mpz_class(s));
    return Rat(mpz_class(s.substr(0, sl)), mpz_class(s.substr(sl + 1)));
  } catch (const std::exception&) {
    fail(line, "malformed rational '" + s + "'");
  }
}

bool is_keyword(const std::string& w) {
  return w == "INDEPENDENTS" || w == "DEPENDENTS" || w == "PARAMS" || w == "ATOMS" ||
         w == "SYSTEM" || w == "OPERATORS" || w == "SECTIONS" || w == "INTEGRALS" ||
         w == "WEIGHTS";
}

std::vector<int> ordinary_deps(Universe* u) {
  std::vector<int> out;
  for (int i = 0; i < u->n_dependents(); ++i)
    if (!u->dependent_x_only(i)) out.push_back(i);
  return out;
}

}  // namespace

const TDOperator* ProblemFile::find_operator(const std::string& name) const {
  for (auto& [n, op] : operators)
    if (n == name) return &op;
  return nullptr;
}

const Section* ProblemFile::find_section(const std::string& name) const {
  for (auto& [n, s] : sections)
    if (n == name) return &s;
  return nullptr;
}

ProblemFile parse_problem(const std::string& text) {
  ProblemFile pf;
  pf.universe = std::make_unique<Universe>();
  Universe* u = pf.universe.get();

  // pass 1: split into (line number, section keyword, argument, body lines)
  struct Block {
    int line;
    std::string kw, arg;
    std::vector<std::pair<int, std::string>> body;
  };
  std::vector<Block> blocks;
  std::istringstream is(text);
  std::string raw;
  int ln = 0;
  while (std::getline(is, raw)) {
    ++ln;
    size_t hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    std::string line = strip(raw);
    if (line.empty()) continue;
    std::string first = line.substr(0, line.find_first_of(" \t"));
    if (is_keyword(first)) {
      Block b;
      b.line = ln;
      b.kw = first;
      b.arg = strip(line.substr(first.size()));
      blocks.push_back(std::move(b));
    } else {
      if (blocks.empty()) fail(ln, "content before any section keyword");
      blocks.back().body.emplace_back(ln, line);
    }
  }

  // pass 2: declarations first so later expressions can refer to them
  auto declare_names = [&](const Block& b, const std::function<void(const std::string&, int)>& f) {
    for (const std::string& t : split_ws(b.arg)) f(t, b.line);
    for (auto& [bl, body] : b.body)
      for (const std::string& t : split_ws(body)) f(t, bl);
  };
  for (const Block& b : blocks) {
    if (b.kw == "INDEPENDENTS")
      declare_names(b, [&](const std::string& n, int l) {
        if (u->lookup(n) != kNoSym) fail(l, "duplicate symbol '" + n + "'");
        u->add_independent(n);
      });
  }
  if (u->n_independents() == 0 && !blocks.empty())
    fail(blocks.front().line, "no INDEPENDENTS declared");
  for (const Block& b : blocks) {
    if (b.kw == "DEPENDENTS")
      declare_names(b, [&](const std::string& n, int l) {
        bool x_only = false;
        std::string nm = n;
        if (size_t c = nm.find(':'); c != std::string::npos) {
          std::string tag = nm.substr(c + 1);
          if (tag != "x") fail(l, "unknown dependent tag '" + tag + "'");
          x_only = true;
          nm = nm.substr(0, c);
        }
        if (u->lookup(nm) != kNoSym) fail(l, "duplicate symbol '" + nm + "'");
        u->add_dependent(nm, x_only);
      });
    else if (b.kw == "PARAMS")
      declare_names(b, [&](const std::string& n, int l) {
        if (u->lookup(n) != kNoSym) fail(l, "duplicate symbol '" + n + "'");
        u->add_parameter(n);
      });
  }
  // atoms: declare all names first, partials may be mutually recursive
  struct AtomLine {
    int line, idx;
    std::string rest;
  };
  std::vector<AtomLine> atom_lines;
  for (const Block& b : blocks) {
    if (b.kw != "ATOMS") continue;
    std::vector<std::pair<int, std::string>> lines = b.body;
    if (!b.arg.empty()) lines.insert(lines.begin(), {b.line, b.arg});
    for (auto& [l, body] : lines) {
      size_t colon = body.find(':');
      if (colon == std::string::npos) fail(l, "atom line needs 'NAME : dep -> expr; ...'");
      std::string nm = strip(body.substr(0, colon));
      if (u->lookup(nm) != kNoSym) fail(l, "duplicate symbol '" + nm + "'");
      atom_lines.push_back({l, u->add_atom(nm), strip(body.substr(colon + 1))});
    }
  }
  for (const AtomLine& al : atom_lines) {
    std::istringstream parts(al.rest);
    std::string piece;
    while (std::getline(parts, piece, ';')) {
      piece = strip(piece);
      if (piece.empty()) continue;
      size_t arrow = piece.find("->");
      if (arrow == std::string::npos) fail(al.line, "atom partial needs 'dep -> expr'");
      std::string dep = strip(piece.substr(0, arrow));
      int d = u->find_dependent(dep);
      if (d < 0) fail(al.line, "unknown dependent '" + dep + "'");
      Expr coeff;
      try {
        coeff = parse_expr(u, strip(piece.substr(arrow + 2)));
      } catch (const std::exception& e) {
        fail(al.line, e.what());
      }
      u->set_atom_partial(al.idx, d, std::vector<int>(u->n_independents(), 0), coeff);
    }
  }

  // pass 3: everything else in order
  for (const Block& b : blocks) {
    if (b.kw == "INDEPENDENTS" || b.kw == "DEPENDENTS" || b.kw == "PARAMS" || b.kw == "ATOMS")
      continue;
    if (b.kw == "SYSTEM") {
      if (pf.sys || pf.lagrangian) fail(b.line, "duplicate SYSTEM section");
      pf.system_kind = b.arg;
      if (b.arg == "evolution" || b.arg == "hyperbolic") {
        std::vector<int> deps;
        std::vector<Expr> rhs;
        std::string suffix = (b.arg == "evolution")
                                 ? "_" + u->independent_name(1)
                                 : "_" + u->independent_name(0) + u->independent_name(1);
        for (auto& [l, body] : b.body) {
          size_t eq = body.find('=');
          if (eq == std::string::npos) fail(l, "equation needs 'lhs = rhs'");
          std::string lhs = strip(body.substr(0, eq));
          if (lhs.size() <= suffix.size() || lhs.substr(lhs.size() - suffix.size()) != suffix)
            fail(l, "left-hand side must be a jet '<dep>" + suffix + "'");
          std::string dep = lhs.substr(0, lhs.size() - suffix.size());
          int d = u->find_dependent(dep);
          if (d < 0) fail(l, "unknown dependent '" + dep + "'");
          try {
            deps.push_back(d);
            rhs.push_back(parse_expr(u, body.substr(eq + 1)));
          } catch (const std::exception& e) {
            fail(l, e.what());
          }
        }
        if (deps.empty()) fail(b.line, "SYSTEM block has no equations");
        pf.sys = (b.arg == "evolution") ? SystemModel::evolution(deps, rhs)
                                        : SystemModel::hyperbolic(deps, rhs);
      } else if (b.arg == "lagrangian") {
        std::vector<std::vector<Rat>> kappa;
        std::optional<Expr> H;
        for (auto& [l, body] : b.body) {
          auto toks = split_ws(body);
          if (toks.empty()) continue;
          if (toks[0] == "KAPPA") {
            std::string rest = strip(body.substr(body.find("KAPPA") + 5));
            std::istringstream rows(rest);
            std::string row;
            while (std::getline(rows, row, ';')) {
              std::vector<Rat> r;
              for (const std::string& t : split_ws(strip(row))) r.push_back(parse_rat(t, l));
              if (!r.empty()) kappa.push_back(std::move(r));
            }
          } else if (toks[0] == "HAMILTONIAN") {
            try {
              H = parse_expr(u, strip(body.substr(body.find("HAMILTONIAN") + 11)));
            } catch (const std::exception& e) {
              fail(l, e.what());
            }
          } else {
            fail(l, "expected KAPPA or HAMILTONIAN, got '" + toks[0] + "'");
          }
        }
        if (kappa.empty() || !H) fail(b.line, "lagrangian SYSTEM needs KAPPA and HAMILTONIAN");
        std::vector<int> deps = ordinary_deps(u);
        if (kappa.size() != deps.size()) fail(b.line, "KAPPA size does not match the dependents");
        try {
          pf.lagrangian = LagrangianModel::make(u, deps, kappa, *H);
          pf.sys = pf.lagrangian->sys;
        } catch (const std::exception& e) {
          fail(b.line, e.what());
        }
      } else {
        fail(b.line, "SYSTEM must be evolution, hyperbolic, or lagrangian");
      }
      continue;
    }
    // named or plain assignment bodies
    std::vector<std::pair<int, std::string>> lines = b.body;
    if (!b.arg.empty()) lines.insert(lines.begin(), {b.line, b.arg});
    for (auto& [l, body] : lines) {
      size_t eq = body.find('=');
      if (eq == std::string::npos) fail(l, b.kw + " line needs 'name = ...'");
      std::string name = strip(body.substr(0, eq));
      std::string val = strip(body.substr(eq + 1));
      try {
        if (b.kw == "OPERATORS") {
          pf.operators.emplace_back(name, parse_operator(u, val));
        } else if (b.kw == "SECTIONS") {
          TDOperator col = parse_operator(u, val);
          if (col.cols() != 1 || col.max_order() != 0)
            fail(l, "a section is a column of expressions");
          Section s;
          std::vector<int> deps = ordinary_deps(u);
          for (int i = 0; i < col.rows(); ++i) {
            s.deps.push_back(i < (int)deps.size() ? deps[i] : -1);
            s.comps.push_back(col.coeff(i, 0, 0));
          }
          pf.sections.emplace_back(name, std::move(s));
        } else if (b.kw == "INTEGRALS") {
          pf.integrals.push_back(parse_expr(u, val));
        } else if (b.kw == "WEIGHTS") {
          if (!pf.weights) {
            pf.weights = WeightSystem{};
            pf.weights->u = u;
          }
          Rat w = parse_rat(val, l);
          if (name == "dx") {
            pf.weights->dx = w;
          } else if (int d = u->find_dependent(name); d >= 0) {
            pf.weights->dep_w[d] = w;
          } else {
            SymId s = u->lookup(name);
            if (s == kNoSym) fail(l, "unknown symbol '" + name + "' in WEIGHTS");
            pf.weights->sym_w[s] = w;
          }
        }
      } catch (const std::exception& e) {
        std::string msg = e.what();
        if (msg.rfind("line ", 0) == 0) throw;
        fail(l, msg);
      }
    }
  }
  return pf;
}

ProblemFile load_problem(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open input file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_problem(ss.str());
}

}  // namespace jetfrob
